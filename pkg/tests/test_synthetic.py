import time

import pytest

from mcdc_opf.analysis import compare_balanced, solve_network
from mcdc_opf.network import derive_balanced_equivalent, validate
from mcdc_opf.oracle import audit
from mcdc_opf.synthetic import synthetic_balanced


def test_same_seed_same_network():
    assert synthetic_balanced(40, 4, seed=3) == synthetic_balanced(40, 4, seed=3)
    assert synthetic_balanced(40, 4, seed=3) != synthetic_balanced(40, 4, seed=4)


@pytest.mark.parametrize("n_ac, n_dc", [(8, 2), (40, 4), (100, 10), (101, 10)])
def test_sizes_and_validity(n_ac, n_dc):
    net = synthetic_balanced(n_ac, n_dc)
    assert len(net.ac_buses) == n_ac
    assert len(net.dc_buses) == n_dc
    assert len(net.converters) == n_dc
    assert validate(net) == []
    assert derive_balanced_equivalent(net).single_conductor


@pytest.mark.parametrize("n_ac, n_dc", [(7, 2), (10, 1)])
def test_too_small_rejected(n_ac, n_dc):
    with pytest.raises(ValueError):
        synthetic_balanced(n_ac, n_dc)


def test_hundred_bus_case_solves_quickly_and_audits_clean():
    net = synthetic_balanced(100, 10)
    t0 = time.perf_counter()
    out = solve_network(net)
    elapsed = time.perf_counter() - t0
    assert out.ok
    assert elapsed < 60.0
    assert audit(net, out.solution, 1e-6).ok


def test_models_agree_on_small_synthetic_case():
    cmp = compare_balanced(synthetic_balanced(40, 4, seed=11))
    assert cmp.converged
    assert cmp.objective_gap <= 1e-6
    assert cmp.max_neutral_voltage <= 1e-6
