"""One-dimensional probability calibrators fit on (score, binary target) pairs.

Histogram binning, isotonic regression (pool-adjacent-violators), beta
calibration and Bayesian binning into quantiles (BBQ). Each model maps a
score in [0, 1] to a calibrated probability in [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, expit

from ._optim import descend
from .errors import DegenerateFitError, InvalidInputError, InvalidParameterError

__all__ = [
    "DEFAULT_HB_BINS",
    "BinningModel",
    "IsotonicModel",
    "BetaModel",
    "BbqModel",
    "fit_histogram",
    "fit_isotonic",
    "fit_beta",
    "fit_bbq",
    "bbq_candidates",
    "apply_binary",
    "pava",
    "model_from_dict",
]

DEFAULT_HB_BINS = 10
EPS = 1e-12
HB_SCHEMES = ("equal_size", "equal_mass")


def _check_set(scores, targets):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if s.ndim != 1 or y.shape != s.shape:
        raise InvalidInputError(f"scores and targets must be 1-D of equal length, got {s.shape}, {y.shape}")
    if s.size == 0:
        raise InvalidInputError("empty calibration set")
    if not np.all(np.isfinite(s)) or np.any(s < 0) or np.any(s > 1):
        raise InvalidInputError("scores must lie in [0, 1]")
    if not np.all((y == 0) | (y == 1)):
        raise InvalidInputError("targets must be 0 or 1")
    return s, y


def _check_scores(scores):
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)) or np.any(s < 0) or np.any(s > 1):
        raise InvalidInputError("scores must lie in [0, 1]")
    return s


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# histogram binning


@dataclass(frozen=True, eq=False)
class BinningModel:
    """Piecewise-constant map over ``B`` bins ``(edges[k], edges[k+1]]``.

    The first bin is closed at 0.
    """

    scheme: str
    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = _frozen(self.edges)
        values = _frozen(self.values)
        if edges.ndim != 1 or edges.size < 2 or values.shape != (edges.size - 1,):
            raise InvalidParameterError("need B + 1 edges and B values with B >= 1")
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) < 0):
            raise InvalidParameterError("edges must be non-decreasing from 0 to 1")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("bin values must be finite")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return self.values.size

    def bin_index(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        return np.searchsorted(self.edges[1:-1], s, side="left")

    def __call__(self, scores):
        return self.values[self.bin_index(_check_scores(scores))]

    def to_dict(self):
        return {"method": "hb", "scheme": self.scheme, "edges": self.edges.tolist(),
                "values": self.values.tolist()}


def _equal_mass_edges(s, bin_count):
    """Interior cut points halfway between the runs of a stable sort."""
    order = np.sort(s, kind="stable")
    chunks = np.array_split(order, bin_count)
    edges = [0.0]
    for left, right in zip(chunks[:-1], chunks[1:]):
        if left.size and right.size:
            cut = 0.5 * (left[-1] + right[0])
        else:
            cut = edges[-1]
        edges.append(max(cut, edges[-1]))
    edges.append(1.0)
    return np.array(edges)


def fit_histogram(scores, targets, bin_count: int = DEFAULT_HB_BINS,
                  scheme: str = "equal_size") -> BinningModel:
    """Histogram binning: each bin predicts the mean target of its samples.

    ``equal_size`` bins have width ``1/B``. ``equal_mass`` bins hold (nearly)
    equal numbers of calibration scores; ties may put unequal counts in
    neighbouring bins. Bins that receive no samples predict their midpoint.
    """
    s, y = _check_set(scores, targets)
    if int(bin_count) != bin_count or bin_count < 1:
        raise InvalidParameterError(f"bin_count must be a positive integer, got {bin_count}")
    bin_count = int(bin_count)
    if scheme == "equal_size":
        edges = np.arange(bin_count + 1) / bin_count
    elif scheme == "equal_mass":
        edges = _equal_mass_edges(s, bin_count)
    else:
        raise InvalidParameterError(f"unknown scheme {scheme!r}; expected one of {HB_SCHEMES}")
    idx = np.searchsorted(edges[1:-1], s, side="left")
    counts = np.bincount(idx, minlength=bin_count)
    sums = np.bincount(idx, weights=y, minlength=bin_count)
    mid = 0.5 * (edges[:-1] + edges[1:])
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(counts > 0, sums / np.maximum(counts, 1), mid)
    return BinningModel(scheme, edges, values)


# --------------------------------------------------------------------------
# isotonic regression


def pava(y, w=None):
    """Pool-adjacent-violators: weighted least-squares non-decreasing fit.

    Block values are kept as (weighted sum, weight) pairs and divided only
    at the end, so pooled means do not accumulate rounding from earlier
    merges.

    Parameters
    ----------
    y : array_like
        Values in the order of the (already sorted) design points.
    w : array_like, optional
        Positive weights, default 1.

    Returns
    -------
    ndarray
        Fitted non-decreasing values, same length as ``y``.
    """
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    return _pool(y * w, w)


def _pool(sums_in, weights_in):
    sums, weights, sizes = [], [], []
    for si, wi in zip(sums_in, weights_in):
        sums.append(float(si))
        weights.append(float(wi))
        sizes.append(1)
        # pool while the previous block mean exceeds the last one
        while len(sums) > 1 and sums[-2] * weights[-1] > sums[-1] * weights[-2]:
            s_last, w_last, n_last = sums.pop(), weights.pop(), sizes.pop()
            sums[-1] += s_last
            weights[-1] += w_last
            sizes[-1] += n_last
    return np.repeat(np.array(sums) / np.array(weights), sizes)


@dataclass(frozen=True, eq=False)
class IsotonicModel:
    """Step function: ``values[k]`` on ``[breakpoints[k], breakpoints[k+1])``.

    Scores below the first breakpoint map to the first value.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = _frozen(self.breakpoints)
        values = _frozen(self.values)
        if bp.ndim != 1 or bp.size < 1 or values.shape != bp.shape:
            raise InvalidParameterError("breakpoints and values must be 1-D, equal length, non-empty")
        if np.any(np.diff(bp) <= 0):
            raise InvalidParameterError("breakpoints must be strictly increasing")
        if np.any(np.diff(values) < 0):
            raise InvalidParameterError("values must be non-decreasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", values)

    def __call__(self, scores):
        s = _check_scores(scores)
        idx = np.searchsorted(self.breakpoints, s, side="right") - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]

    def to_dict(self):
        return {"method": "iso", "breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}


def fit_isotonic(scores, targets) -> IsotonicModel:
    """Isotonic regression of targets on scores.

    Tied scores are merged first (their targets averaged, weighted by
    multiplicity), then PAVA runs over the distinct sorted scores.
    """
    s, y = _check_set(scores, targets)
    bp, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=y, minlength=bp.size)
    values = _pool(sums, counts.astype(np.float64))
    return IsotonicModel(bp, values)


# --------------------------------------------------------------------------
# beta calibration


@dataclass(frozen=True, eq=False)
class BetaModel:
    """``mu(s) = sigmoid(a ln s - b ln(1 - s) + c)``; identity at ``a = b = 1, c = 0``."""

    a: float
    b: float
    c: float
    history: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c)):
            raise InvalidParameterError("beta parameters must be finite")
        if self.a < 0 or self.b < 0:
            raise InvalidParameterError("beta parameters a and b must be non-negative")

    def __call__(self, scores):
        s = np.clip(_check_scores(scores), EPS, 1 - EPS)
        return expit(self.a * np.log(s) - self.b * np.log1p(-s) + self.c)

    def to_dict(self):
        return {"method": "beta", "a": float(self.a), "b": float(self.b), "c": float(self.c)}


def fit_beta(scores, targets, learning_rate: float = 0.01, max_iter: int = 2000,
             tol: float = 1e-9) -> BetaModel:
    """Maximum-likelihood beta calibration by projected gradient descent.

    Starts from the identity map. ``a`` and ``b`` are projected onto
    ``[0, inf)`` after every step, which keeps the map non-decreasing.
    """
    s, y = _check_set(scores, targets)
    if y.min() == y.max():
        raise DegenerateFitError("beta calibration needs both target classes")
    s = np.clip(s, EPS, 1 - EPS)
    features = np.column_stack([np.log(s), -np.log1p(-s), np.ones_like(s)])
    n = s.size

    def fun(theta):
        t = features @ theta
        # mean of log(1 + e^t) - y t
        nll = float(np.mean(np.logaddexp(0.0, t) - y * t))
        grad = features.T @ (expit(t) - y) / n
        return nll, grad

    theta, hist = descend(
        fun, [1.0, 1.0, 0.0], learning_rate, max_iter, tol,
        project=lambda th: np.array([max(th[0], 0.0), max(th[1], 0.0), th[2]]),
    )
    return BetaModel(float(theta[0]), float(theta[1]), float(theta[2]), tuple(hist))


# --------------------------------------------------------------------------
# BBQ


def bbq_candidates(n: int) -> list:
    """Default bin counts: ``floor(n^(1/3)) -+ 5`` clipped to ``[2, 25]``."""
    root = int(math.floor(n ** (1.0 / 3.0) + 1e-9))
    lo = max(2, root - 5)
    hi = min(25, root + 5)
    if lo > hi:
        return [min(max(root, 2), 25)]
    return list(range(lo, hi + 1))


@dataclass(frozen=True, eq=False)
class BbqModel:
    members: tuple
    weights: np.ndarray

    def __post_init__(self):
        members = tuple(self.members)
        weights = _frozen(self.weights)
        if not members or weights.shape != (len(members),):
            raise InvalidParameterError("need one weight per member and at least one member")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("weights must be positive and sum to 1")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", weights)

    def __call__(self, scores):
        s = _check_scores(scores)
        out = np.zeros(s.shape)
        for w, m in zip(self.weights, self.members):
            out += w * m(s)
        return np.clip(out, 0.0, 1.0)

    def to_dict(self):
        return {"method": "bbq", "members": [m.to_dict() for m in self.members],
                "weights": self.weights.tolist()}


def fit_bbq(scores, targets, bin_count_candidates=None) -> BbqModel:
    """Bayesian binning into quantiles.

    One equal-mass binning per candidate bin count. Each bin gets a
    Beta(1, 1) prior, so it predicts ``(m + 1) / (n + 2)`` for ``m``
    positives out of ``n``, and the binning is scored by its marginal
    likelihood ``prod_b B(m_b + 1, n_b - m_b + 1)``. Weights are the
    normalized scores.
    """
    s, y = _check_set(scores, targets)
    if bin_count_candidates is None:
        bin_count_candidates = bbq_candidates(s.size)
    candidates = list(bin_count_candidates)
    if not candidates:
        raise InvalidParameterError("need at least one candidate bin count")
    members, log_scores = [], []
    for b in candidates:
        if int(b) != b or b < 1:
            raise InvalidParameterError(f"bin counts must be positive integers, got {b}")
        edges = _equal_mass_edges(s, int(b))
        idx = np.searchsorted(edges[1:-1], s, side="left")
        n_b = np.bincount(idx, minlength=int(b)).astype(np.float64)
        m_b = np.bincount(idx, weights=y, minlength=int(b))
        members.append(BinningModel("equal_mass", edges, (m_b + 1.0) / (n_b + 2.0)))
        log_scores.append(float(np.sum(betaln(m_b + 1.0, n_b - m_b + 1.0))))
    log_scores = np.array(log_scores)
    w = np.exp(log_scores - log_scores.max())
    w /= w.sum()
    # members whose weight underflows to zero contribute nothing; drop them
    keep = w > 0
    w = w[keep] / w[keep].sum()
    members = [m for m, k in zip(members, keep) if k]
    return BbqModel(tuple(members), w)


# --------------------------------------------------------------------------


def apply_binary(model, scores):
    """Calibrated probabilities for scores in [0, 1]; scalar in, scalar out."""
    out = model(scores)
    if np.ndim(scores) == 0:
        return float(out)
    return out


def model_from_dict(d):
    method = d.get("method")
    if method == "hb":
        return BinningModel(d["scheme"], d["edges"], d["values"])
    if method == "iso":
        return IsotonicModel(d["breakpoints"], d["values"])
    if method == "beta":
        return BetaModel(float(d["a"]), float(d["b"]), float(d["c"]))
    if method == "bbq":
        return BbqModel(tuple(model_from_dict(m) for m in d["members"]), d["weights"])
    raise InvalidParameterError(f"not a binary calibration model: {method!r}")
