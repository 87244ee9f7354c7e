"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by sequential minimal optimization over the stacked
variable vector ``a = [alpha, alpha*]`` (length 2n) with labels ``s = [+1, -1]``:

    minimize   1/2 a'Qa + p'a
    subject to s'a = 0,  0 <= a <= C

where ``Q[t, u] = s_t s_u K(x_t, x_u)`` and ``p = [eps - y, eps + y]``.  The
regression coefficients are ``beta = alpha - alpha*`` and the prediction is
``sum_i beta_i K(x_i, x) + b``.  Pair selection picks the maximal violator
and pairs it with the partner giving the largest second-order decrease.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numba import njit

TAU = 1e-12
SV_THRESHOLD = 1e-12
FULL_GRAM_LIMIT = 9000
MAX_SWEEPS = 10_000
CACHE_ROWS = 2048


class SvrConvergenceWarning(RuntimeWarning):
    pass


def rbf_kernel(x, z, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    z = np.asarray(z, dtype=np.float64).ravel()
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {z.size}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    diff = x - z
    return math.exp(-gamma * float(diff @ diff))


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def scale_gamma(X) -> float:
    """1 / (d * population variance of all entries); 1.0 for constant input."""
    X = np.asarray(X, dtype=np.float64)
    var = float(X.var())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


@dataclass(frozen=True, eq=False)
class SvrModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # beta for each stored vector
    bias: float
    gamma: float
    C: float
    epsilon: float
    support_indices: np.ndarray = field(repr=False)
    n_train: int = 0
    n_iter: int = 0
    converged: bool = True
    objective: float = 0.0

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got shape {X.shape}")
        if self.dual_coef.size == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_matrix(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def full_beta(self) -> np.ndarray:
        beta = np.zeros(self.n_train)
        beta[self.support_indices] = self.dual_coef
        return beta


@njit(cache=True)
def _kernel_row(X, sq, gamma, i, out):
    n, d = X.shape
    for t in range(n):
        acc = 0.0
        for c in range(d):
            acc += X[t, c] * X[i, c]
        dist = sq[t] + sq[i] - 2.0 * acc
        if dist < 0.0:
            dist = 0.0
        out[t] = np.exp(-gamma * dist)


@njit(cache=True)
def _get_row(i, full, X, sq, gamma, cache, tags):
    if full.shape[0] > 0:
        return full[i]
    slot = i % tags.size
    if tags[slot] != i:
        _kernel_row(X, sq, gamma, i, cache[slot])
        tags[slot] = i
    return cache[slot]


@njit(cache=True)
def _smo(full, X, gamma, y, C, eps, tol, max_iter, seed, cache_rows, record):
    """SMO over the stacked 2n variables (alpha first, then alpha*).

    ``full`` is the Gram matrix, or an empty array to compute kernel rows on
    demand through a direct-mapped cache of ``cache_rows`` rows.  Returns
    (a, G, iterations, converged, objective trace).
    """
    n = y.size
    m = 2 * n
    np.random.seed(seed)
    s = np.empty(m)
    p = np.empty(m)
    for t in range(n):
        s[t] = 1.0
        s[n + t] = -1.0
        p[t] = eps - y[t]
        p[n + t] = eps + y[t]
    a = np.zeros(m)
    G = p.copy()
    sq = np.empty(n)
    for t in range(n):
        acc = 0.0
        for c in range(X.shape[1]):
            acc += X[t, c] * X[t, c]
        sq[t] = acc
    n_cache = 1 if full.shape[0] > 0 else min(cache_rows, n)
    cache = np.empty((n_cache, n))
    tags = np.full(n_cache, -1)
    trace = np.zeros(max_iter + 1 if record else 1)
    low_idx = np.empty(m, dtype=np.int64)

    it = 0
    converged = False
    while it < max_iter:
        # maximal violator i over I_up, and the I_low extreme for the gap
        g_max = -np.inf
        i = -1
        g_max2 = -np.inf
        for t in range(m):
            up = (s[t] > 0 and a[t] < C) or (s[t] < 0 and a[t] > 0)
            low = (s[t] > 0 and a[t] > 0) or (s[t] < 0 and a[t] < C)
            f = -s[t] * G[t]
            if up and f > g_max:
                g_max = f
                i = t
            if low and -f > g_max2:
                g_max2 = -f
        if i < 0 or g_max + g_max2 < tol:
            converged = True
            break
        Ki = _get_row(i % n, full, X, sq, gamma, cache, tags).copy()

        # partner j with the largest second-order decrease
        j = -1
        best = np.inf
        n_low = 0
        for t in range(m):
            low = (s[t] > 0 and a[t] > 0) or (s[t] < 0 and a[t] < C)
            if not low:
                continue
            low_idx[n_low] = t
            n_low += 1
            grad_diff = g_max + s[t] * G[t]
            if grad_diff > 0.0:
                quad = 2.0 - 2.0 * Ki[t % n]  # K(x, x) = 1 for RBF
                if quad <= 0.0:
                    quad = TAU
                score = -(grad_diff * grad_diff) / quad
                if score < best:
                    best = score
                    j = t
        if j < 0:
            j = low_idx[np.random.randint(0, n_low)]
        Kj = _get_row(j % n, full, X, sq, gamma, cache, tags)

        old_i = a[i]
        old_j = a[j]
        Q_ij = s[i] * s[j] * Ki[j % n]
        if s[i] != s[j]:
            quad = 2.0 + 2.0 * Q_ij
            if quad <= 0.0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            quad = 2.0 - 2.0 * Q_ij
            if quad <= 0.0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = total

        da_i = (a[i] - old_i) * s[i]
        da_j = (a[j] - old_j) * s[j]
        for t in range(n):
            delta_g = Ki[t] * da_i + Kj[t] * da_j
            G[t] += delta_g
            G[n + t] -= delta_g
        it += 1
        if record:
            obj = 0.0
            for t in range(m):
                obj += a[t] * (G[t] + p[t])
            trace[it] = -0.5 * obj
    if record:
        return a, G, it, converged, trace[: it + 1]
    return a, G, it, converged, trace[:0]


def fit_svr(
    features,
    targets,
    C: float = 1.0,
    epsilon: float = 0.1,
    gamma: Union[str, float] = "scale",
    seed: int = 0,
    tol: float = 1e-3,
    max_sweeps: int = MAX_SWEEPS,
    trace: Optional[list] = None,
) -> SvrModel:
    """Solve the epsilon-SVR dual by SMO.

    Stops when the maximal KKT violation gap drops below ``tol`` or after
    ``max_sweeps`` sweeps of ``ceil(n/2)`` pair updates each; the latter sets
    ``converged=False`` and emits :class:`SvrConvergenceWarning`.  If ``trace``
    is a list, the dual objective (maximization form) after every update is
    appended to it, starting with the value at ``a = 0``.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64).ravel()
    n = X.shape[0]
    if n < 2 or y.size != n:
        raise ValueError("need at least 2 rows and one target per row")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training data")
    if C <= 0 or epsilon < 0:
        raise ValueError("C must be positive and epsilon non-negative")
    g = scale_gamma(X) if gamma == "scale" else float(gamma)
    if not g > 0:
        raise ValueError("gamma must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        full = rbf_matrix(X, X, g) if n <= FULL_GRAM_LIMIT else np.empty((0, 0))
    if not np.all(np.isfinite(full)):
        raise FloatingPointError("non-finite kernel values; is the input scaled?")
    max_iter = max_sweeps * max(1, (n + 1) // 2)
    a, G, it, converged, obj_trace = _smo(
        full, X, g, y, float(C), float(epsilon), float(tol), int(max_iter), int(seed % 2**32), CACHE_ROWS, trace is not None
    )
    if trace is not None:
        trace.extend(obj_trace.tolist())
    if not converged:
        warnings.warn(f"SMO hit the iteration cap ({max_iter}) before reaching tol={tol}", SvrConvergenceWarning, stacklevel=2)

    s = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - y, epsilon + y])
    bias = _bias(a, G, s, C)
    beta = a[:n] - a[n:]
    keep = np.flatnonzero(np.abs(beta) > SV_THRESHOLD)
    return SvrModel(
        support_vectors=X[keep].copy(),
        dual_coef=beta[keep].copy(),
        bias=bias,
        gamma=g,
        C=float(C),
        epsilon=float(epsilon),
        support_indices=keep,
        n_train=n,
        n_iter=int(it),
        converged=bool(converged),
        objective=-0.5 * float(a @ (G + p)),
    )


def _bias(a, G, s, C) -> float:
    sG = s * G
    free = (a > 0) & (a < C)
    if free.any():
        rho = float(sG[free].mean())
    else:
        at_upper = a >= C
        at_lower = a <= 0
        ub_mask = (at_upper & (s < 0)) | (at_lower & (s > 0))
        lb_mask = (at_upper & (s > 0)) | (at_lower & (s < 0))
        ub = float(sG[ub_mask].min()) if ub_mask.any() else np.inf
        lb = float(sG[lb_mask].max()) if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb) if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return -rho


def predict_svr(model: SvrModel, features) -> np.ndarray:
    return model.predict(features)


def dual_objective(beta, X, y, gamma: float, epsilon: float) -> float:
    """Maximization-form dual value for coefficients ``beta``."""
    beta = np.asarray(beta, dtype=np.float64)
    K = rbf_matrix(X, X, gamma)
    return float(-0.5 * beta @ K @ beta + np.asarray(y) @ beta - epsilon * np.abs(beta).sum())


def kkt_violation(model: SvrModel, features, targets) -> np.ndarray:
    """Per-row distance from the epsilon-insensitive optimality conditions.

    For residual ``r = y - f(x)``: beta = 0 needs |r| <= eps; 0 < beta < C
    needs r = eps; beta = C needs r >= eps; and mirrored for negative beta.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    beta = model.full_beta()
    r = y - model.predict(X)
    eps, C = model.epsilon, model.C
    out = np.zeros(y.size)
    zero = np.abs(beta) <= SV_THRESHOLD
    upper = beta >= C - SV_THRESHOLD
    lower = beta <= -C + SV_THRESHOLD
    pos_free = (beta > SV_THRESHOLD) & ~upper
    neg_free = (beta < -SV_THRESHOLD) & ~lower
    out[zero] = np.maximum(np.abs(r[zero]) - eps, 0.0)
    out[pos_free] = np.abs(r[pos_free] - eps)
    out[neg_free] = np.abs(r[neg_free] + eps)
    out[upper] = np.maximum(eps - r[upper], 0.0)
    out[lower] = np.maximum(r[lower] + eps, 0.0)
    return out
