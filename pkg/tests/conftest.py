import numpy as np
import pytest

from hgdas.classic import default_gamma
from hgdas.problem import GeneratorConfig, build_instance


@pytest.fixture
def ref_cfg():
    return GeneratorConfig(M=75, N=150, matrix_kind="correlated_gaussian", rho=0.5, seed=11)


@pytest.fixture
def prob(ref_cfg):
    return build_instance(ref_cfg, 10.0)


@pytest.fixture
def small_prob():
    return build_instance(GeneratorConfig(M=20, N=40, nonzero_ratio=0.2, seed=3), 1.0)


@pytest.fixture
def gamma(prob):
    return default_gamma(prob.A)


def instances(n, seed0=100, **kw):
    base = dict(M=75, N=150, matrix_kind="correlated_gaussian", rho=0.5)
    base.update(kw)
    return [build_instance(GeneratorConfig(seed=seed0 + k, **base), 10.0) for k in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
