"""Logit-space scaling calibrators: Temperature, Vector and Dirichlet scaling.

Each can be fit with the usual multiclass cross-entropy (``loss="ce"``) or
with the top-versus-all binary cross-entropy on the confidence
(``loss="bce_tva"``), where the target is whether the uncalibrated
prediction was correct. Vector and Dirichlet scaling add an L2 penalty
pulling their scale coefficients toward 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, logsumexp

from ._optim import descend
from .dataset import LogitsDataset, softmax
from .errors import InvalidInputError, InvalidParameterError

__all__ = [
    "EPS",
    "LOSSES",
    "FitOptions",
    "TemperatureModel",
    "VectorModel",
    "DirichletModel",
    "ce_loss",
    "bce_tva_loss",
    "grad_ce_temperature",
    "grad_bce_temperature",
    "reg_loss",
    "fit_temperature",
    "fit_vector",
    "fit_dirichlet",
    "apply_scaling",
    "temperature_objective",
    "vector_objective",
    "dirichlet_objective",
]

EPS = 1e-12
LOG_EPS = math.log(EPS)
LOSSES = ("ce", "bce_tva")
T_MIN, T_MAX = 1e-3, 1e3
V_MIN = 1e-6


@dataclass(frozen=True)
class FitOptions:
    """Hyperparameters shared by the scaling fitters.

    ``lam`` only affects vector and Dirichlet scaling. ``init_temperature``
    switches their initialization from the identity map to ``v = 1/T``
    (resp. ``W = I/T``), typically with ``T`` from a top-versus-all
    temperature fit.
    """

    loss: str = "ce"
    lam: float = 0.01
    learning_rate: float = 0.01
    max_iter: int = 2000
    tol: float = 1e-9
    init_temperature: float | None = None

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise InvalidParameterError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if not (self.lam >= 0) or not math.isfinite(self.lam):
            raise InvalidParameterError(f"lam must be non-negative, got {self.lam}")
        if not (self.learning_rate > 0):
            raise InvalidParameterError(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not (self.tol > 0):
            raise InvalidParameterError(f"tol must be positive, got {self.tol}")
        if self.init_temperature is not None and not (
            self.init_temperature > 0 and math.isfinite(self.init_temperature)
        ):
            raise InvalidParameterError(
                f"init_temperature must be positive, got {self.init_temperature}"
            )


@dataclass(frozen=True, eq=False)
class TemperatureModel:
    T: float
    history: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InvalidParameterError(f"temperature must be positive and finite, got {self.T}")

    def transform(self, logits):
        return np.asarray(logits, dtype=np.float64) / self.T

    def to_dict(self):
        return {"method": "ts", "T": float(self.T)}


@dataclass(frozen=True, eq=False)
class VectorModel:
    v: np.ndarray
    b: np.ndarray
    history: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.v, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        if v.ndim != 1 or b.shape != v.shape:
            raise InvalidParameterError("v and b must be 1-D of equal length")
        if not (np.all(np.isfinite(v)) and np.all(v > 0) and np.all(np.isfinite(b))):
            raise InvalidParameterError("v must be positive and finite, b finite")
        v.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "b", b)

    @property
    def n_classes(self):
        return self.v.shape[0]

    def transform(self, logits):
        return np.asarray(logits, dtype=np.float64) * self.v + self.b

    def to_dict(self):
        return {"method": "vs", "v": self.v.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class DirichletModel:
    W: np.ndarray
    b: np.ndarray
    history: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or b.shape != (W.shape[0],):
            raise InvalidParameterError("W must be L x L and b of length L")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise InvalidParameterError("W and b must be finite")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def n_classes(self):
        return self.b.shape[0]

    def transform(self, logits):
        logp = log_softmax(np.asarray(logits, dtype=np.float64), axis=-1)
        return logp @ self.W.T + self.b

    def to_dict(self):
        return {"method": "dc", "W": self.W.tolist(), "b": self.b.tolist()}


# --------------------------------------------------------------------------
# losses and their gradients


def _bce_terms(z, pred, target):
    """Per-sample BCE on the probability ``s`` of class ``pred``.

    Returns ``(loss, factor, p)`` with ``p = softmax(z)`` and
    ``d loss / d z_k = factor * (onehot(pred)_k - p_k)``. ``log s`` and
    ``log(1 - s)`` are both formed from sums of exponentials without
    subtracting from 1, and each is floored at ``log(EPS)``; samples whose
    active term sits on that floor get a zero factor, matching the flat
    clamped loss.
    """
    rows = np.arange(z.shape[0])
    e = np.exp(z - z.max(axis=1, keepdims=True))
    e_pred = e[rows, pred].copy()
    e[rows, pred] = 0.0
    others = e.sum(axis=1)
    e[rows, pred] = e_pred
    total = others + e_pred
    log_total = np.log(total)
    log_s = np.log(e_pred) - log_total
    with np.errstate(divide="ignore"):
        log_1ms = np.log(others) - log_total
    correct = target == 1
    loss = np.where(correct, -np.maximum(log_s, LOG_EPS), -np.maximum(log_1ms, LOG_EPS))
    # d(-log s)/dz = -(e_m - p) ; d(-log(1-s))/dz = s/(1-s) (e_m - p)
    with np.errstate(divide="ignore", over="ignore"):
        odds = e_pred / others
    factor = np.where(correct, -1.0, odds)
    clamped = np.where(correct, log_s < LOG_EPS, log_1ms < LOG_EPS)
    factor = np.where(clamped, 0.0, factor)
    return loss, factor, e / total[:, None]


def _logit_grad(z, labels, target, loss):
    """Mean loss over rows of ``z`` and its gradient with respect to ``z``.

    ``target`` is the correctness of the uncalibrated predictions, fixed
    before fitting; the BCE confidence is the largest probability of ``z``.
    """
    n = z.shape[0]
    rows = np.arange(n)
    if loss == "ce":
        zmax = z.max(axis=1, keepdims=True)
        e = np.exp(z - zmax)
        total = e.sum(axis=1)
        per = np.log(total) + zmax[:, 0] - z[rows, labels]
        g = e / total[:, None]
        g[rows, labels] -= 1.0
    else:
        # confidence is the top calibrated probability; targets stay fixed
        pred = np.argmax(z, axis=1)
        per, factor, p = _bce_terms(z, pred, target)
        g = -p
        g[rows, pred] += 1.0
        g *= factor[:, None]
    return float(np.mean(per)), g / n


def _as_batch(logits_row, label):
    z = np.asarray(logits_row, dtype=np.float64)
    if z.ndim != 1 or z.size < 2:
        raise InvalidInputError("expected a single logit row with at least two entries")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits contain NaN or infinite values")
    return z[None, :], np.array([int(label)])


def _check_T(T):
    if not (T > 0 and math.isfinite(T)):
        raise InvalidParameterError(f"temperature must be positive and finite, got {T}")


def ce_loss(logits_row, label, T: float = 1.0) -> float:
    """Cross-entropy ``-log f_y`` of one sample at temperature ``T``."""
    _check_T(T)
    z, y = _as_batch(logits_row, label)
    a = z / T
    return float(logsumexp(a, axis=1)[0] - a[0, y[0]])


def bce_tva_loss(logits_row, correctness, T: float = 1.0) -> float:
    """Binary cross-entropy between the confidence at temperature ``T`` and
    the correctness bit of the (temperature-invariant) prediction.
    """
    _check_T(T)
    z, yb = _as_batch(logits_row, correctness)
    a = z / T
    pred = np.argmax(z, axis=1)
    loss, _, _ = _bce_terms(a, pred, yb)
    return float(loss[0])


def grad_ce_temperature(logits_row, label, T: float = 1.0) -> float:
    """``d l_CE / dT = (z_y - sum_k z_k f_k) / T^2``."""
    _check_T(T)
    z, y = _as_batch(logits_row, label)
    f = softmax(z, T)[0]
    return float((z[0, y[0]] - z[0] @ f) / T**2)


def grad_bce_temperature(logits_row, correctness, T: float = 1.0) -> float:
    """``d l_BCE / dT = (y_b - s) / (1 - s) * (z_max - sum_k z_k f_k) / T^2``.

    For a correct prediction ``(y_b - s) / (1 - s) = 1`` and the value is the
    cross-entropy gradient. For a wrong one the ratio is ``-s / (1 - s)``,
    evaluated as ``-sum_k e_k / sum_{k != max} e_k`` to stay accurate near
    ``s = 1``; it is zero where the loss is on its ``EPS`` floor.
    """
    _check_T(T)
    z, yb = _as_batch(logits_row, correctness)
    f = softmax(z, T)[0]
    m = int(np.argmax(z[0]))
    spread = z[0, m] - z[0] @ f
    if yb[0] == 1:
        return float(spread / T**2)
    _, factor, _ = _bce_terms(z / T, np.array([m]), yb)
    return float(-factor[0] * spread / T**2)


def reg_loss(v) -> float:
    """Mean squared distance of the scale coefficients from 1."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.mean((v - 1.0) ** 2))


# --------------------------------------------------------------------------
# objectives


def _surrogate(dataset: LogitsDataset):
    s = dataset.summary()
    return np.array(s.predicted), np.array(s.correctness)


def temperature_objective(dataset: LogitsDataset, loss: str = "ce"):
    """Mean loss as a function of ``[log T]``; returns ``fun(x) -> (loss, grad)``.

    The predicted class keeps its index under any temperature, so logits are
    stored relative to the predicted logit with that entry set to ``-inf``;
    one exponential pass then gives both ``1 - s`` (up to normalization)
    and the softmax-weighted mean logit.
    """
    z = dataset.logits
    labels = dataset.labels
    rows = np.arange(z.shape[0])
    pred, target = _surrogate(dataset)
    z_pred = z[rows, pred]
    z_lab = z[rows, labels]
    gap = z - z_pred[:, None]
    gap[rows, pred] = -np.inf
    correct = target == 1

    def fun(x):
        T = math.exp(x[0])
        e = np.exp(gap * (1.0 / T))
        others = e.sum(axis=1)
        total = others + 1.0
        c = ((e * z).sum(axis=1) + z_pred) / total
        log_total = np.log(total)
        if loss == "ce":
            per = log_total + (z_pred - z_lab) / T
            dT = (z_lab - c) / T**2
        else:
            log_s = -log_total
            with np.errstate(divide="ignore"):
                log_1ms = np.log(others) - log_total
                odds = 1.0 / others
            per = np.where(correct, -np.maximum(log_s, LOG_EPS), -np.maximum(log_1ms, LOG_EPS))
            factor = np.where(correct, -1.0, odds)
            factor = np.where(np.where(correct, log_s < LOG_EPS, log_1ms < LOG_EPS), 0.0, factor)
            dT = -factor * (z_pred - c) / T**2
        return float(np.mean(per)), np.array([float(np.mean(dT)) * T])

    return fun


def vector_objective(dataset: LogitsDataset, loss: str = "ce", lam: float = 0.01):
    """Mean loss plus penalty as a function of ``concat(v, b)``."""
    z = dataset.logits
    n_classes = z.shape[1]
    labels = dataset.labels
    _, target = _surrogate(dataset)

    def fun(x):
        v, b = x[:n_classes], x[n_classes:]
        value, g = _logit_grad(z * v + b, labels, target, loss)
        value += lam * (np.mean((v - 1.0) ** 2) + np.mean(b**2))
        gv = (g * z).sum(axis=0) + lam * 2.0 * (v - 1.0) / n_classes
        gb = g.sum(axis=0) + lam * 2.0 * b / n_classes
        return float(value), np.concatenate([gv, gb])

    return fun


def dirichlet_objective(dataset: LogitsDataset, loss: str = "ce", lam: float = 0.01):
    """Mean loss plus penalty as a function of ``concat(W.ravel(), b)``.

    Penalty: diagonal of ``W`` toward 1 (mean square), off-diagonal entries
    toward 0 (mean square over the ``L(L-1)`` entries) and ``b`` toward 0,
    all weighted by ``lam``.
    """
    logp = log_softmax(dataset.logits, axis=1)
    n_classes = logp.shape[1]
    labels = dataset.labels
    _, target = _surrogate(dataset)
    eye = np.eye(n_classes, dtype=bool)
    n_off = max(n_classes * (n_classes - 1), 1)

    def fun(x):
        W = x[: n_classes * n_classes].reshape(n_classes, n_classes)
        b = x[n_classes * n_classes :]
        value, g = _logit_grad(logp @ W.T + b, labels, target, loss)
        diag = np.diag(W)
        off = np.where(eye, 0.0, W)
        value += lam * (np.mean((diag - 1.0) ** 2) + np.sum(off**2) / n_off + np.mean(b**2))
        gW = g.T @ logp
        gW += lam * 2.0 * off / n_off
        gW[eye] += lam * 2.0 * (diag - 1.0) / n_classes
        gb = g.sum(axis=0) + lam * 2.0 * b / n_classes
        return float(value), np.concatenate([gW.ravel(), gb])

    return fun


# --------------------------------------------------------------------------
# fitting


def fit_temperature(cal: LogitsDataset, options: FitOptions = FitOptions()) -> TemperatureModel:
    """Fit a single temperature by gradient descent on ``log T``.

    ``T`` is kept within ``[1e-3, 1e3]``. Predictions never change under
    temperature scaling, so the BCE targets are fixed up front.
    """
    fun = temperature_objective(cal, options.loss)
    lo, hi = math.log(T_MIN), math.log(T_MAX)
    x0 = [math.log(options.init_temperature)] if options.init_temperature else [0.0]
    x, hist = descend(
        fun, x0, options.learning_rate, options.max_iter, options.tol,
        project=lambda x: np.clip(x, lo, hi),
    )
    return TemperatureModel(math.exp(x[0]), tuple(hist))


def _project_vector(n_classes):
    def project(x):
        x = x.copy()
        x[:n_classes] = np.maximum(x[:n_classes], V_MIN)
        return x

    return project


def fit_vector(cal: LogitsDataset, options: FitOptions = FitOptions()) -> VectorModel:
    """Fit ``z' = v * z + b`` minimizing mean loss + ``lam * (reg(v) + mean(b^2))``."""
    n_classes = cal.n_classes
    v0 = 1.0 / options.init_temperature if options.init_temperature else 1.0
    x0 = np.concatenate([np.full(n_classes, v0), np.zeros(n_classes)])
    fun = vector_objective(cal, options.loss, options.lam)
    x, hist = descend(
        fun, x0, options.learning_rate, options.max_iter, options.tol,
        project=_project_vector(n_classes),
    )
    return VectorModel(x[:n_classes], x[n_classes:], tuple(hist))


def fit_dirichlet(cal: LogitsDataset, options: FitOptions = FitOptions()) -> DirichletModel:
    """Fit ``z' = W log softmax(z) + b`` with the off-diagonal/bias penalty."""
    n_classes = cal.n_classes
    w0 = 1.0 / options.init_temperature if options.init_temperature else 1.0
    x0 = np.concatenate([(w0 * np.eye(n_classes)).ravel(), np.zeros(n_classes)])
    fun = dirichlet_objective(cal, options.loss, options.lam)
    x, hist = descend(fun, x0, options.learning_rate, options.max_iter, options.tol)
    W = x[: n_classes * n_classes].reshape(n_classes, n_classes)
    return DirichletModel(W, x[n_classes * n_classes :], tuple(hist))


def apply_scaling(model, logits) -> np.ndarray:
    """Calibrated probability matrix ``softmax(model.transform(logits))``."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise InvalidInputError(f"logits must be 2-D, got shape {z.shape}")
    n_classes = getattr(model, "n_classes", None)
    if n_classes is not None and z.shape[1] != n_classes:
        raise InvalidInputError(f"model expects {n_classes} classes, got {z.shape[1]}")
    if isinstance(model, TemperatureModel):
        return softmax(z, model.T)
    return softmax(model.transform(z))


def model_from_dict(d):
    method = d.get("method")
    if method == "ts":
        return TemperatureModel(float(d["T"]))
    if method == "vs":
        return VectorModel(d["v"], d["b"])
    if method == "dc":
        return DirichletModel(d["W"], d["b"])
    raise InvalidParameterError(f"not a scaling model: {method!r}")
