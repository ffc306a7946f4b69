import numpy as np
import pytest

from sparse_feedback import SynthesisSpec, closed_loop, realize, synthesize

from helpers import config


class Solved:
    def __init__(self, name, **spec_overrides):
        self.cfg = config(name)
        base = self.cfg.spec
        fields = dict(N=base.N, s=base.s, variant=base.variant, norm=base.norm)
        fields.update(spec_overrides)
        self.spec = SynthesisSpec(**fields)
        self.sys = self.cfg.system
        self.pair, self.sol = synthesize(self.sys, self.spec, full_output=True)
        self.data = realize(self.pair)
        self.comp = self.data.gains
        self.aug = closed_loop(self.sys, self.comp)


@pytest.fixture(scope="session")
def cartpole():
    return Solved("cartpole")


@pytest.fixture(scope="session")
def mimo():
    return Solved("mimo")


@pytest.fixture(scope="session")
def mimo_sum():
    return Solved("mimo", norm="sum")


@pytest.fixture(scope="session")
def oscillator():
    return Solved("oscillator")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
