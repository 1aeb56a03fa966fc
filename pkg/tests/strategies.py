from hypothesis import strategies as st

from critbbm.offspring import make_offspring


@st.composite
def critical_laws(draw, max_sigma2=3.0):
    """Critical laws on {0,1,2,3}: p0 = p2 + 2 p3 and p1 = 1 - 2 p2 - 3 p3."""
    p2 = draw(st.floats(0.0, 0.5))
    p3 = draw(st.floats(0.0, (1.0 - 2.0 * p2) / 3.0))
    if 2.0 * p2 + 6.0 * p3 < 0.05:
        p2 = 0.025
    p0 = p2 + 2.0 * p3
    p1 = max(0.0, 1.0 - 2.0 * p2 - 3.0 * p3)
    return make_offspring([p0, p1, p2, p3])
