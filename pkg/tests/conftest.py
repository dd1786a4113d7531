from __future__ import annotations

import numpy as np
import pytest

from semiglobal.burnside import BurnsideParams
from semiglobal.detpath import solve_path
from semiglobal.expansion import solve_expansion
from semiglobal.models import burnside_model, growth_model
from semiglobal.schur import block_schur
from semiglobal.tvlre import backward_recursion, build_tvsystem, transition_matrix


@pytest.fixture(scope="session")
def bp() -> BurnsideParams:
    return BurnsideParams()


@pytest.fixture(scope="session")
def bmodel(bp):
    return burnside_model(bp)


class Pipeline:
    """Deterministic path, split, system and first-order tables for one start point."""

    def __init__(self, model, x0, z0=None, T=300):
        self.model = model
        self.path = solve_path(model, x0, z0, T)
        self.L = transition_matrix(model, self.path.steady)
        self.split = block_schur(self.L, model.n_y)
        self.sys = build_tvsystem(model, self.path, self.split, self.L)
        self.tables = backward_recursion(self.sys, check=False)


@pytest.fixture(scope="session")
def burnside_pipe(bp, bmodel):
    cache = {}

    def get(k_sigma: float) -> Pipeline:
        if k_sigma not in cache:
            cache[k_sigma] = Pipeline(bmodel, [bp.xbar + k_sigma * bp.sigma_x], [0.0])
        return cache[k_sigma]

    return get


@pytest.fixture(scope="session")
def burnside_solution(bp, bmodel):
    cache = {}

    def get(k_sigma: float):
        if k_sigma not in cache:
            cache[k_sigma] = solve_expansion(bmodel, [bp.xbar + k_sigma * bp.sigma_x], [0.0], order=2)
        return cache[k_sigma]

    return get


GROWTH = dict(alpha=0.33, beta=0.9, rho=0.9, sigma=0.01)


@pytest.fixture(scope="session")
def gmodel():
    return growth_model(**GROWTH)


@pytest.fixture(scope="session")
def growth_solution(gmodel):
    k = gmodel.steady_guess[1]
    return solve_expansion(gmodel, [0.8 * k], [0.02], order=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_VERDICTS: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _VERDICTS[props["criterion"]] = ("PASS" if report.passed else "FAIL", props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        verdict, detail = _VERDICTS[n]
        terminalreporter.write_line(f"criterion {n}: {verdict}  {detail}")
