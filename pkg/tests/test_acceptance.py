"""Every acceptance criterion at its stated tolerance, one line each in the summary."""
import pytest

from critbbm.acceptance import CHECKS, SuiteOptions

OPTIONS = SuiteOptions()


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, acceptance_log):
    result = CHECKS[number](OPTIONS)
    acceptance_log[number] = result.line()
    print(result.line())
    assert result.passed, result.line() + (f" [{result.detail}]" if result.detail else "")
