import math

import numpy as np
import pytest

from temperfield.operators import (OperatorSpec, is_in_Q, mat_exp, real_power,
                                   real_power_many, spectral_bounds)


def taylor_exp(a, terms=60):
    """Plain truncated series; only trustworthy for ||A|| <= 1."""
    a = np.asarray(a, dtype=float)
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


def test_exp_zero_is_identity():
    assert np.allclose(mat_exp(np.zeros((3, 3))), np.eye(3), atol=1e-15)


def test_exp_diagonal():
    got = mat_exp(np.diag([1.0, 2.0]))
    assert np.allclose(np.diag(got), [math.e, math.e ** 2], rtol=1e-14)
    assert abs(got[0, 1]) < 1e-15 and abs(got[1, 0]) < 1e-15


def test_exp_nilpotent_truncates():
    assert np.allclose(mat_exp([[0.0, 1.0], [0.0, 0.0]]),
                       [[1.0, 1.0], [0.0, 1.0]], atol=1e-15)


def test_exp_matches_taylor_oracle_small_norm():
    rng = np.random.default_rng(1)
    for _ in range(30):
        m = rng.integers(1, 5)
        a = rng.standard_normal((m, m))
        a *= 0.9 / max(np.linalg.norm(a, 1), 1e-12)
        got = mat_exp(a)
        ref = taylor_exp(a)
        assert np.allclose(got, ref, rtol=1e-13, atol=1e-14)


def test_exp_matches_scipy_for_larger_norms():
    from scipy.linalg import expm
    rng = np.random.default_rng(2)
    for scale in (5.0, 20.0, 50.0):
        a = rng.standard_normal((4, 4))
        a *= scale / np.linalg.norm(a, 1)
        got = mat_exp(a)
        ref = expm(a)
        assert np.allclose(got, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_exp_rejects_bad_input():
    with pytest.raises(ValueError):
        mat_exp(np.ones((2, 3)))
    with pytest.raises(ValueError):
        mat_exp([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        mat_exp(np.zeros((17, 17)))


def test_real_power_trivial_cases():
    E = OperatorSpec([[0.7, 0.2], [0.0, 1.3]])
    assert np.allclose(real_power(E, 1.0), np.eye(2), atol=1e-15)
    assert np.allclose(real_power(np.eye(2), 3.5), 3.5 * np.eye(2), rtol=1e-14)
    assert np.allclose(np.diag(real_power(np.diag([1.0, 2.0]), 4.0)),
                       [4.0, 16.0], rtol=1e-13)
    with pytest.raises(ValueError):
        real_power(E, 0.0)
    with pytest.raises(ValueError):
        real_power(E, -2.0)


def test_real_power_group_law_and_inverse():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = rng.integers(1, 4)
        E = rng.standard_normal((m, m))
        E *= 5.0 / max(np.linalg.norm(E), 1e-9)
        c1, c2 = 10.0 ** rng.uniform(-3, 3, 2)
        lhs = real_power(E, c1) @ real_power(E, c2)
        rhs = real_power(E, c1 * c2)
        assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.abs(rhs).max())
        inv = real_power(E, c1) @ real_power(E, 1.0 / c1)
        assert np.allclose(inv, np.eye(m), atol=1e-10 * max(1.0, np.abs(
            real_power(E, c1)).max()))


def test_real_power_determinant_identity():
    rng = np.random.default_rng(4)
    for _ in range(20):
        m = rng.integers(1, 4)
        E = OperatorSpec(rng.standard_normal((m, m)))
        c = 10.0 ** rng.uniform(-2, 2)
        det = np.linalg.det(real_power(E, c))
        assert det == pytest.approx(c ** E.trace_q, rel=1e-8)


def test_real_power_many_matches_scalar():
    rng = np.random.default_rng(5)
    E = OperatorSpec(rng.standard_normal((3, 3)))
    cs = 10.0 ** rng.uniform(-2, 2, 11)
    batch = real_power_many(E, cs)
    for c, got in zip(cs, batch):
        assert np.allclose(got, real_power(E, c), rtol=1e-9, atol=1e-9)


def test_spectral_bounds_examples():
    assert spectral_bounds(np.diag([1.0, 2.0])) == pytest.approx((1.0, 2.0, 3.0))
    lo, hi, tr = spectral_bounds([[0.0, 1.0], [-1.0, 0.0]])
    assert (lo, hi, tr) == pytest.approx((0.0, 0.0, 0.0), abs=1e-10)
    assert spectral_bounds(np.diag([0.6, 0.9])) == pytest.approx((0.6, 0.9, 1.5))


def test_operator_spec_metadata():
    spec = OperatorSpec([[0.6, 1.0], [0.0, 0.9]])
    assert spec.trace_q == pytest.approx(1.5, abs=1e-15)
    assert spec.re_eig_min == pytest.approx(0.6, abs=1e-10)
    assert spec.re_eig_max == pytest.approx(0.9, abs=1e-10)
    with pytest.raises(AttributeError):
        spec.trace_q = 2.0


def test_is_in_Q():
    assert is_in_Q(np.eye(3))
    assert not is_in_Q([[0.0, 1.0], [-1.0, 0.0]])
    assert not is_in_Q(np.diag([0.6, -0.1]))
