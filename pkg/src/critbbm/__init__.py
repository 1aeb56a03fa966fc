"""Critical branching Brownian motion killed at the origin.

Exact and numerical hitting probabilities, laws of the number of killed
particles, and a Monte Carlo engine to cross-check them.
"""
from .errors import BBMError
from .offspring import MORANIAN, OffspringDistribution, make_offspring, load_offspring

__all__ = ["BBMError", "MORANIAN", "OffspringDistribution", "make_offspring", "load_offspring"]
__version__ = "0.1.0"
