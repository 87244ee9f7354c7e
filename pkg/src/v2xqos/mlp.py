"""One-hidden-layer ReLU network for squared-loss regression.

Trained full-batch with Adam; every iteration is one update on the whole
training set, and the parameters with the lowest training loss seen are the
ones used for prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PARAM_NAMES = ("W1", "b1", "W2", "b2")


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class MlpModel:
    W1: np.ndarray  # (hidden, n_in)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (1, hidden)
    b2: np.ndarray  # (1,)
    max_iter: int = 0
    final: dict = field(default_factory=dict, repr=False)
    best_loss: float = float("nan")
    loss_curve: tuple = field(default=(), repr=False)

    @property
    def hidden_size(self) -> int:
        return self.W1.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def with_params(self, params: dict[str, np.ndarray]) -> "MlpModel":
        return replace(self, **{k: np.array(v, dtype=np.float64) for k, v in params.items()})

    def predict(self, features) -> np.ndarray:
        return forward(self, features)


def init_mlp(hidden_size: int, seed: int, n_inputs: int = 4) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    if hidden_size < 1:
        raise ValueError("hidden_size must be >= 1")
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (n_inputs + hidden_size))
    lim2 = np.sqrt(6.0 / (hidden_size + 1))
    return MlpModel(
        W1=rng.uniform(-lim1, lim1, size=(hidden_size, n_inputs)),
        b1=np.zeros(hidden_size),
        W2=rng.uniform(-lim2, lim2, size=(1, hidden_size)),
        b2=np.zeros(1),
    )


def _inputs(model: MlpModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} input columns, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input")
    return X


def forward(model: MlpModel, features) -> np.ndarray:
    X = _inputs(model, features)
    hidden = np.maximum(X @ model.W1.T + model.b1, 0.0)
    return hidden @ model.W2[0] + model.b2[0]


def loss_and_gradients(model: MlpModel, features, targets) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error and its gradient for every parameter array.

    The ReLU derivative at exactly 0 is taken as 0.
    """
    X = _inputs(model, features)
    y = np.asarray(targets, dtype=np.float64).ravel()
    n = X.shape[0]
    if n == 0 or y.size != n:
        raise ValueError("need a non-empty batch with one target per row")
    pre = X @ model.W1.T + model.b1
    hidden = np.maximum(pre, 0.0)
    out = hidden @ model.W2[0] + model.b2[0]
    resid = out - y
    loss = float(resid @ resid) / n
    d_out = 2.0 * resid / n
    grad_W2 = (d_out @ hidden)[None, :]
    grad_b2 = np.array([d_out.sum()])
    d_hidden = np.outer(d_out, model.W2[0]) * (pre > 0.0)
    grad_W1 = d_hidden.T @ X
    grad_b1 = d_hidden.sum(axis=0)
    return loss, {"W1": grad_W1, "b1": grad_b1, "W2": grad_W2, "b2": grad_b2}


def fit_mlp(features, targets, hidden_size: int = 10, max_iter: int = 500, seed: int = 0) -> MlpModel:
    """Run exactly ``max_iter`` full-batch Adam steps from a seeded init.

    Raises :class:`DivergenceError` if the loss stops being finite.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    model = init_mlp(hidden_size, seed, n_inputs=X.shape[1])
    params = {k: v.copy() for k, v in model.params().items()}
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    best_params = {k: p.copy() for k, p in params.items()}
    best_loss = np.inf
    curve = []
    current = model
    for step in range(1, max_iter + 1):
        loss, grads = loss_and_gradients(current, X, y)
        if not np.isfinite(loss):
            raise DivergenceError(f"training loss became non-finite at iteration {step}")
        curve.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_params = {k: p.copy() for k, p in params.items()}
        for k in PARAM_NAMES:
            m[k] = ADAM_BETA1 * m[k] + (1 - ADAM_BETA1) * grads[k]
            v[k] = ADAM_BETA2 * v[k] + (1 - ADAM_BETA2) * grads[k] ** 2
            m_hat = m[k] / (1 - ADAM_BETA1**step)
            v_hat = v[k] / (1 - ADAM_BETA2**step)
            params[k] = params[k] - ADAM_LR * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        current = current.with_params(params)
    if max_iter > 0:
        loss, _ = loss_and_gradients(current, X, y)
        if not np.isfinite(loss):
            raise DivergenceError("training loss became non-finite after the last update")
        curve.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_params = {k: p.copy() for k, p in params.items()}
    else:
        best_loss, _ = loss_and_gradients(model, X, y)
    final = {k: p.copy() for k, p in params.items()}
    return replace(model.with_params(best_params), max_iter=max_iter, final=final, best_loss=float(best_loss), loss_curve=tuple(curve))
