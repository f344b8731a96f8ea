import sys
from fractions import Fraction

import pytest
from hypothesis import settings

from ratlogic.timed import TimedWord

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def word(*pairs) -> TimedWord:
    """word("a", 0, "ab", "0.3") with each event a string of one-letter propositions."""
    it = iter(pairs)
    return TimedWord.of([(frozenset(ev), Fraction(str(t))) for ev, t in zip(it, it)])


@pytest.fixture
def mk():
    return word


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
