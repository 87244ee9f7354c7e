import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import svr_dual_projected_gradient
from v2xqos.svr import (
    SvrConvergenceWarning,
    SvrModel,
    dual_objective,
    fit_svr,
    kkt_violation,
    predict_svr,
    rbf_kernel,
    rbf_matrix,
    scale_gamma,
)


def toy(seed, n=30, d=1):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, (n, d))
    y = np.sin(2 * X[:, 0]) + 0.1 * rng.normal(size=n)
    return X, y


def test_rbf_kernel_examples(rng):
    x = rng.normal(size=4)
    assert rbf_kernel(x, x, 0.7) == 1.0
    assert rbf_kernel([0.0], [1.0], 1.0) == pytest.approx(0.36788, abs=1e-5)
    for _ in range(20):
        a, b = rng.normal(size=3), rng.normal(size=3)
        assert rbf_kernel(a, b, 0.3) == rbf_kernel(b, a, 0.3)
        assert 0 < rbf_kernel(a, b, 0.3) <= 1
    with pytest.raises(ValueError):
        rbf_kernel([0.0, 1.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        rbf_kernel([0.0], [1.0], 0.0)


def test_rbf_matrix_matches_pairwise(rng):
    A, B = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    K = rbf_matrix(A, B, 0.4)
    for i in range(5):
        for j in range(4):
            assert K[i, j] == pytest.approx(rbf_kernel(A[i], B[j], 0.4), rel=1e-12)


def test_scale_gamma():
    X = np.array([[0.0, 2.0], [2.0, 0.0]])
    assert scale_gamma(X) == pytest.approx(1.0 / (2 * 1.0))
    assert scale_gamma(np.ones((3, 2))) == 1.0


def test_constant_targets():
    X, _ = toy(0)
    m = fit_svr(X, np.full(30, 7.0), C=1, epsilon=0.1)
    assert m.dual_coef.size == 0 and m.bias == 7.0
    assert np.all(m.predict(X) == 7.0)


def test_targets_inside_tube(rng):
    X, _ = toy(1)
    y = 3.0 + rng.uniform(-0.09, 0.09, 30)
    m = fit_svr(X, y, C=3, epsilon=0.1)
    p = m.predict(rng.normal(size=(10, 1)))
    assert m.dual_coef.size == 0
    assert np.all(p == p[0]) and abs(p[0] - 3.0) <= 0.1


@pytest.mark.parametrize("seed", range(5))
def test_matches_projected_gradient_oracle(seed):
    X, y = toy(seed)
    C, eps = (1.0, 3.0)[seed % 2], (0.1, 0.3)[seed % 2]
    g = scale_gamma(X)
    m = fit_svr(X, y, C=C, epsilon=eps)
    _, best = svr_dual_projected_gradient(rbf_matrix(X, X, g), y, C, eps)
    assert abs(m.objective - best) <= 1e-3
    assert m.objective == pytest.approx(dual_objective(m.full_beta(), X, y, g, eps), abs=1e-9)
    assert kkt_violation(m, X, y).max() <= 1e-3


def test_dual_feasibility_throughout(rng):
    X, y = toy(4, n=40, d=2)
    for sweeps in (1, 2, 5, 10_000):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SvrConvergenceWarning)
            m = fit_svr(X, y, C=1.0, epsilon=0.1, max_sweeps=sweeps)
        beta = m.full_beta()
        assert abs(beta.sum()) <= 1e-6
        assert np.all(np.abs(beta) <= m.C + 1e-12)
        assert np.all(np.abs(m.dual_coef) > 1e-12)


def test_iteration_cap_warns():
    X, y = toy(2, n=40)
    with pytest.warns(SvrConvergenceWarning):
        m = fit_svr(X, y, C=3, epsilon=0.01, max_sweeps=1)
    assert not m.converged and m.n_iter == 20


def test_objective_non_decreasing():
    X, y = toy(3, n=50, d=2)
    trace = []
    fit_svr(X, y, C=3, epsilon=0.1, trace=trace)
    assert trace[0] == 0.0 and len(trace) > 10
    assert np.all(np.diff(trace) >= -1e-9)


def test_predict_examples(rng):
    empty = SvrModel(np.zeros((0, 2)), np.zeros(0), 1.25, 1.0, 1.0, 0.1, np.zeros(0, dtype=int), 3)
    assert predict_svr(empty, rng.normal(size=(4, 2))).tolist() == [1.25] * 4
    two = SvrModel(np.array([[0.0], [50.0]]), np.array([0.8, -0.8]), 0.5, 1.0, 1.0, 0.1, np.array([0, 1]), 2)
    assert two.predict([[0.0]])[0] == pytest.approx(0.8 + 0.5, abs=1e-12)
    X, y = toy(5)
    m = fit_svr(X, y, C=1, epsilon=0.1)
    batch = m.predict(X)
    rows = np.array([m.predict(x[None, :])[0] for x in X])
    assert np.allclose(batch, rows, rtol=0, atol=1e-12)
    manual = [sum(b * rbf_kernel(sv, x, m.gamma) for b, sv in zip(m.dual_coef, m.support_vectors)) + m.bias for x in X]
    assert np.allclose(batch, manual, rtol=0, atol=1e-10)
    with pytest.raises(ValueError):
        m.predict(np.zeros((2, 3)))


def test_duplicated_rows_without_bound_coefficients(rng):
    X = rng.uniform(-1, 1, (25, 2))
    y = X[:, 0] - 0.5 * X[:, 1] ** 2
    m = fit_svr(X, y, C=100.0, epsilon=0.05, tol=1e-9)
    assert np.all(np.abs(m.dual_coef) < m.C / 2)
    m2 = fit_svr(np.vstack([X, X]), np.concatenate([y, y]), C=100.0, epsilon=0.05, tol=1e-9, gamma=m.gamma)
    probe = rng.uniform(-1, 1, (50, 2))
    assert np.allclose(m.predict(probe), m2.predict(probe), rtol=0, atol=1e-6)


def test_row_cache_path_agrees(monkeypatch):
    import v2xqos.svr as svr

    X, y = toy(6, n=60, d=3)
    full = fit_svr(X, y, C=3, epsilon=0.1, tol=1e-6)
    monkeypatch.setattr(svr, "FULL_GRAM_LIMIT", 10)
    monkeypatch.setattr(svr, "CACHE_ROWS", 7)
    cached = svr.fit_svr(X, y, C=3, epsilon=0.1, tol=1e-6)
    assert np.allclose(full.predict(X), cached.predict(X), rtol=0, atol=1e-4)
    assert kkt_violation(cached, X, y).max() <= 1e-6 + 1e-9


def test_rejects_bad_input():
    X, y = toy(0)
    with pytest.raises(FloatingPointError):
        fit_svr(X * 1e200, y, gamma=1e10)
    with pytest.raises(ValueError):
        fit_svr(X, y, C=0)
    X2 = X.copy()
    X2[0, 0] = np.nan
    with pytest.raises(ValueError):
        fit_svr(X2, y)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([1.0, 3.0]), st.sampled_from([0.1, 0.3]))
def test_kkt_audit_property(seed, C, eps):
    X, y = toy(seed, n=35, d=2)
    m = fit_svr(X, y, C=C, epsilon=eps)
    assert m.converged
    assert kkt_violation(m, X, y).max() <= 1e-3
    assert abs(m.full_beta().sum()) <= 1e-6
