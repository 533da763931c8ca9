import functools

import pytest

from mcdc_opf import analysis, cases
from mcdc_opf.oracle import audit

# every Optimal solve made through the analysis layer, with its audit result
AUDITED: list[tuple[str, str, float]] = []
# PASS/FAIL lines from test_acceptance, printed at the end of the run
ACCEPTANCE: list[str] = []


def _audited_extract(original):
    @functools.wraps(original)
    def extract(vmap, x, lam=None, **kw):
        sol = original(vmap, x, lam, **kw)
        if sol.status == "Optimal":
            rep = audit(vmap.network, sol, 1e-6)
            AUDITED.append((vmap.network.name, vmap.model, rep.max_residual))
            assert rep.ok, f"Optimal solve of {vmap.network.name} fails audit:\n{rep.table()}"
        return sol
    return extract


def pytest_configure(config):
    analysis.extract_solution = _audited_extract(analysis.extract_solution)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
        if AUDITED:
            terminalreporter.write_line(
                f"whole session: {len(AUDITED)} Optimal solves audited, max residual "
                f"{max(r for _, _, r in AUDITED):.1e} pu")


@functools.lru_cache(maxsize=None)
def _solve(name: str, model: str):
    return analysis.solve_network(cases.network(name), model)


@pytest.fixture(scope="session")
def solved():
    """Cached solve of a bundled case: ``solved(name, model="mcdc")``."""
    def get(name: str, model: str = "mcdc"):
        return _solve(name, model)
    return get


@pytest.fixture(scope="session")
def balanced_net():
    return cases.network("balanced_bipolar_4dc")


@pytest.fixture(scope="session")
def unbalanced_net():
    return cases.network("unbalanced_tap_4dc")
