import os

import hypothesis
import numpy as np
import pytest

from fxpbs.params import SET_I, TfheParams

hypothesis.settings.register_profile("default", deadline=None, print_blob=True)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=50)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Small ring for unit tests that run full bootstraps.
TINY = TfheParams(n=8, k=1, N=64, beta=8, l=2, sigma_tlwe=2.0**-20, sigma_tglwe=2.0**-30, name="tiny")
NOISELESS = TINY.with_noise(0.0, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny():
    return TINY


@pytest.fixture(scope="session")
def set_i_lab():
    from fxpbs.noise import NoiseLab

    return NoiseLab(SET_I, seed=0)


@pytest.fixture(scope="session")
def set_i_keys(set_i_lab):
    return set_i_lab.keys, set_i_lab.bk


# One line per acceptance criterion, printed after the run.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
