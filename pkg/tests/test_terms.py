import numpy as np
import pytest
from scipy.optimize import approx_fprime

from mcdc_opf.formulation.terms import COS, SIN, TermModel


def sample_model():
    tm = TermModel(5)
    r0, r1, r2 = tm.add_row(), tm.add_row(), tm.add_row()
    tm.const(r0, 0.5)
    tm.lin(r0, 2.0, 0)
    tm.quad(r0, -1.5, 1, 2)
    tm.quad(r1, 3.0, 3, 3)
    tm.trig(r1, 0.7, 0, 1, 2, 3, COS)
    tm.trig(r1, -0.4, 1, 0, 4, 2, SIN)
    tm.biquad(r2, 1.2, 3, 4)
    tm.norm(r2, -0.8, 0, 4, 1e-3)
    tm.norm(r0, 1.1, 2, 1, 0.2)
    return tm.freeze()


@pytest.mark.parametrize("seed", range(5))
def test_term_derivatives_match_finite_differences(seed):
    tm = sample_model()
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, 5)
    w = rng.uniform(-1.0, 1.0, 3)
    J = tm.jacobian(x).toarray()
    for k in range(3):
        fd = approx_fprime(x, lambda y: tm.values(y)[k], 1e-7)
        assert J[k] == pytest.approx(fd, abs=1e-5)
    H = tm.hessian(x, w).toarray()
    assert np.allclose(H, H.T)
    fd = approx_fprime(x, lambda y: tm.jacobian(y).T @ w, 1e-7)
    assert H == pytest.approx(fd, abs=1e-5)


def test_norm_term_is_exact_at_origin_and_close_elsewhere():
    tm = TermModel(2)
    r = tm.add_row()
    tm.norm(r, 1.0, 0, 1, 1e-8)
    tm.freeze()
    assert tm.values(np.zeros(2))[0] == 0.0
    assert tm.values(np.array([0.3, -0.4]))[0] == pytest.approx(0.5 - 1e-8, abs=1e-15)
    # the gradient stays bounded (by one) even at the origin
    assert np.abs(tm.jacobian(np.zeros(2)).toarray()).max() == 0.0
    assert np.abs(tm.jacobian(np.array([3e-5, 0.0])).toarray()).max() <= 1.0


def test_invalid_terms_rejected():
    tm = TermModel(4)
    with pytest.raises(ValueError):
        tm.trig(0, 1.0, 0, 0, 1, 2, COS)
    with pytest.raises(ValueError):
        tm.biquad(0, 1.0, 1, 1)
    with pytest.raises(ValueError):
        tm.norm(0, 1.0, 0, 1, 0.0)
