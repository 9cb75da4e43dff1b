import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from blinkrecon.synth import SynthConfig, synthesize_trace  # noqa: E402


@pytest.fixture(scope="session")
def small_corpus():
    """Twenty noisy trials with blinks at the default rate."""
    return synthesize_trace(SynthConfig(n_trials=20, rng_seed=11))


@pytest.fixture(scope="session")
def clean_corpus():
    """Blink-free corpus used for grammar training."""
    return synthesize_trace(SynthConfig(n_trials=30, blink_rate_per_min=0.0, rng_seed=5))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
