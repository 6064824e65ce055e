"""Multiclass calibrators built from scaling and binary methods.

Three formulations:

``standard``
    Scaling methods fit with the multiclass cross-entropy.
``ova``
    One-versus-all: one binary calibrator per class on ``(f_k, 1[y = k])``,
    optionally renormalized. Can change the predicted class.
``tva``
    Top-versus-all: a single binary problem, "is the prediction correct?",
    on ``(max_k f_k, 1[argmax = y])``. Binary methods then remap only the
    confidence and never touch the predicted class; scaling methods are fit
    with the binary cross-entropy on the confidence.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _json
from . import binary as _binary
from . import scaling as _scaling
from .dataset import LogitsDataset, PredictionSummary, build_tva_set, softmax
from .errors import InvalidInputError, InvalidParameterError
from .metrics import DEFAULT_BINS, ece

__all__ = [
    "SCALING_METHODS",
    "BINARY_METHODS",
    "MODES",
    "VALID_MODES",
    "Calibrator",
    "OvaEnsemble",
    "fit",
    "fit_standard",
    "fit_tva",
    "fit_ova",
    "apply_calibrator",
    "identity_calibrator",
    "ova_subproblems",
    "is_prediction_preserving",
]

SCALING_METHODS = ("ts", "vs", "dc")
BINARY_METHODS = ("hb", "iso", "beta", "bbq")
MODES = ("standard", "ova", "tva")
VALID_MODES = {
    **{m: ("standard", "tva") for m in SCALING_METHODS},
    **{m: ("ova", "tva") for m in BINARY_METHODS},
}


def is_prediction_preserving(mode: str, method: str) -> bool:
    """Temperature scaling and every TvA-wrapped binary method keep the argmax."""
    if method == "ts":
        return True
    return mode == "tva" and method in BINARY_METHODS


def _check_pair(method, mode):
    if method not in VALID_MODES:
        raise InvalidParameterError(
            f"unknown method {method!r}; expected one of {SCALING_METHODS + BINARY_METHODS}"
        )
    if mode not in VALID_MODES[method]:
        raise InvalidParameterError(
            f"method {method!r} does not support mode {mode!r}; valid pairs: " + valid_pairs_text()
        )


def valid_pairs_text() -> str:
    return ", ".join(f"{m}:{'|'.join(modes)}" for m, modes in VALID_MODES.items())


@dataclass(frozen=True, eq=False)
class OvaEnsemble:
    """One binary calibrator per class, applied column-wise."""

    members: tuple
    normalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def n_classes(self):
        return len(self.members)

    def __call__(self, probs):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape[1] != self.n_classes:
            raise InvalidInputError(f"ensemble has {self.n_classes} members, got {probs.shape[1]} columns")
        out = np.column_stack([m(probs[:, k]) for k, m in enumerate(self.members)])
        if self.normalize:
            totals = out.sum(axis=1, keepdims=True)
            dead = totals[:, 0] <= 0
            if dead.any():
                out[dead] = 1.0
                totals[dead] = self.n_classes
            out = out / totals
        return out

    def to_dict(self):
        return {"normalize": bool(self.normalize), "members": [m.to_dict() for m in self.members]}


@dataclass(frozen=True, eq=False)
class Calibrator:
    """A fitted multiclass calibrator.

    ``model`` is a scaling model (standard/TvA scaling), a binary model
    (TvA binary) or an :class:`OvaEnsemble`.
    """

    mode: str
    method: str
    model: object

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameterError(f"unknown mode {self.mode!r}")
        _check_pair(self.method, self.mode)

    @property
    def prediction_preserving(self) -> bool:
        return is_prediction_preserving(self.mode, self.method)

    @property
    def n_classes(self):
        return getattr(self.model, "n_classes", None)

    def apply(self, dataset: LogitsDataset):
        return apply_calibrator(self, dataset)

    def to_dict(self):
        return {
            "mode": self.mode,
            "method": self.method,
            "prediction_preserving": self.prediction_preserving,
            "model": self.model.to_dict(),
        }

    def to_json(self) -> str:
        return _json.dumps(self.to_dict())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_dict(cls, d) -> "Calibrator":
        try:
            mode, method, md = d["mode"], d["method"], d["model"]
        except (KeyError, TypeError):
            raise InvalidParameterError("calibrator JSON needs mode, method and model") from None
        _check_pair(method, mode)
        if mode == "ova":
            members = tuple(_binary.model_from_dict(m) for m in md["members"])
            model = OvaEnsemble(members, bool(md.get("normalize", True)))
        elif method in SCALING_METHODS:
            model = _scaling.model_from_dict(md)
        else:
            model = _binary.model_from_dict(md)
        cal = cls(mode, method, model)
        if "prediction_preserving" in d and bool(d["prediction_preserving"]) != cal.prediction_preserving:
            raise InvalidParameterError("prediction_preserving flag inconsistent with mode/method")
        return cal

    @classmethod
    def from_json(cls, text) -> "Calibrator":
        return cls.from_dict(_json.loads(text))

    @classmethod
    def load(cls, path) -> "Calibrator":
        with open(path) as fh:
            return cls.from_json(fh.read())


def identity_calibrator() -> Calibrator:
    """Temperature scaling with ``T = 1``: leaves the classifier untouched."""
    return Calibrator("standard", "ts", _scaling.TemperatureModel(1.0))


# --------------------------------------------------------------------------
# fitting


def _fit_binary(method, scores, targets, bins, scheme, bbq_candidates):
    if method == "hb":
        return _binary.fit_histogram(scores, targets, bins, scheme)
    if method == "iso":
        return _binary.fit_isotonic(scores, targets)
    if method == "beta":
        return _binary.fit_beta(scores, targets)
    return _binary.fit_bbq(scores, targets, bbq_candidates)


def _scaling_options(options, loss):
    return replace(options or _scaling.FitOptions(), loss=loss)


def _fit_scaling(method, cal, options, init):
    if init not in ("default", "ts"):
        raise InvalidParameterError(f"init must be 'default' or 'ts', got {init!r}")
    if method == "ts":
        return _scaling.fit_temperature(cal, options)
    if init == "ts":
        T = _scaling.fit_temperature(cal, options).T
        options = replace(options, init_temperature=T)
    if method == "vs":
        return _scaling.fit_vector(cal, options)
    return _scaling.fit_dirichlet(cal, options)


def fit_standard(method: str, cal: LogitsDataset, options=None, init: str = "default") -> Calibrator:
    """Scaling method fit with the multiclass cross-entropy."""
    _check_pair(method, "standard")
    model = _fit_scaling(method, cal, _scaling_options(options, "ce"), init)
    return Calibrator("standard", method, model)


def fit_tva(method: str, cal: LogitsDataset, options=None, *, bins: int | None = None,
            scheme: str = "auto", bbq_candidates=None, init: str = "default") -> Calibrator:
    """Top-versus-all calibrator.

    Binary methods are fit on ``(confidence, correctness)`` of the raw
    classifier. Scaling methods are fit on the full logits with the binary
    cross-entropy on the confidence, plus the coefficient penalty for VS/DC.

    Parameters
    ----------
    method : {"ts", "vs", "dc", "hb", "iso", "beta", "bbq"}
    cal : LogitsDataset
    options : FitOptions, optional
        Scaling methods only; its ``loss`` is overridden with ``"bce_tva"``.
    bins : int, optional
        Histogram binning bin count, default 10.
    scheme : {"auto", "equal_size", "equal_mass"}
        Histogram binning scheme. ``"auto"`` fits both and keeps the one
        with the lower ECE on the calibration set.
    bbq_candidates : sequence of int, optional
        BBQ bin counts; default from :func:`tvacal.binary.bbq_candidates`.
    init : {"default", "ts"}
        VS/DC initialization; ``"ts"`` starts from ``1/T`` of a TvA
        temperature fit.
    """
    _check_pair(method, "tva")
    if method in SCALING_METHODS:
        model = _fit_scaling(method, cal, _scaling_options(options, "bce_tva"), init)
        return Calibrator("tva", method, model)
    tva = build_tva_set(cal.summary())
    bins = _binary.DEFAULT_HB_BINS if bins is None else bins
    if method == "hb" and scheme == "auto":
        best = None
        for sch in _binary.HB_SCHEMES:
            m = _binary.fit_histogram(tva.confidence, tva.target, bins, sch)
            err = ece(m(tva.confidence), tva.target, DEFAULT_BINS)
            if best is None or err < best[0]:
                best = (err, m)
        return Calibrator("tva", method, best[1])
    model = _fit_binary(method, tva.confidence, tva.target, bins, scheme, bbq_candidates)
    return Calibrator("tva", method, model)


def ova_subproblems(dataset: LogitsDataset):
    """Per-class ``(scores, targets)`` pairs: ``(f_k(x), 1[y = k])`` for each class ``k``."""
    probs = dataset.probabilities()
    return [
        (probs[:, k], (dataset.labels == k).astype(np.int64)) for k in range(dataset.n_classes)
    ]


def _fit_ova_members(method, problems, bins, scheme, bbq_candidates):
    members = []
    for k, (scores, targets) in enumerate(problems):
        n_pos = int(targets.sum())
        if n_pos == 0 or n_pos == targets.size:
            prior = n_pos / targets.size
            warnings.warn(
                f"class {k} has {n_pos} positives out of {targets.size}; "
                f"using the constant map {prior:g}",
                RuntimeWarning,
                stacklevel=3,
            )
            members.append(_binary.BinningModel("equal_size", [0.0, 1.0], [prior]))
            continue
        members.append(_fit_binary(method, scores, targets, bins, scheme, bbq_candidates))
    return members


def fit_ova(method: str, cal: LogitsDataset, *, bins: int | None = None, scheme: str = "auto",
            bbq_candidates=None, normalize: bool = True) -> Calibrator:
    """One-versus-all calibrator: one binary calibrator per class.

    A class with no positive (or no negative) calibration sample gets the
    constant map equal to its empirical frequency, with a warning. With
    ``scheme="auto"`` the histogram scheme is chosen once for all classes,
    by the top-label ECE of the calibrated calibration set.
    """
    _check_pair(method, "ova")
    problems = ova_subproblems(cal)
    bins = _binary.DEFAULT_HB_BINS if bins is None else bins
    if method == "hb" and scheme == "auto":
        probs = cal.probabilities()
        best = None
        for sch in _binary.HB_SCHEMES:
            ens = OvaEnsemble(_fit_ova_members(method, problems, bins, sch, None), normalize)
            q = ens(probs)
            pred = np.argmax(q, axis=1)
            conf = q[np.arange(q.shape[0]), pred]
            err = ece(conf, (pred == cal.labels).astype(np.int64), DEFAULT_BINS)
            if best is None or err < best[0]:
                best = (err, ens)
        return Calibrator("ova", method, best[1])
    members = _fit_ova_members(method, problems, bins, scheme, bbq_candidates)
    return Calibrator("ova", method, OvaEnsemble(members, normalize))


def fit(method: str, mode: str, cal: LogitsDataset, options=None, **kwargs) -> Calibrator:
    """Dispatch to :func:`fit_standard`, :func:`fit_ova` or :func:`fit_tva`."""
    _check_pair(method, mode)
    if mode == "standard":
        return fit_standard(method, cal, options, **kwargs)
    if mode == "ova":
        return fit_ova(method, cal, **kwargs)
    return fit_tva(method, cal, options, **kwargs)


# --------------------------------------------------------------------------
# inference


def apply_calibrator(calibrator: Calibrator, dataset: LogitsDataset):
    """Calibrate ``dataset`` and summarize the calibrated predictions.

    Returns
    -------
    scores : ndarray
        Probability matrix ``(N, L)`` for scaling and OvA calibrators; the
        calibrated confidence vector ``(N,)`` for TvA binary calibrators,
        whose remaining class probabilities are left as they were.
    summary : PredictionSummary
        For prediction-preserving calibrators ``predicted`` is the raw
        argmax, sample for sample.
    """
    n_classes = calibrator.n_classes
    if n_classes is not None and n_classes != dataset.n_classes:
        raise InvalidInputError(f"calibrator expects {n_classes} classes, got {dataset.n_classes}")
    z = dataset.logits
    labels = dataset.labels
    rows = np.arange(z.shape[0])
    raw_probs = softmax(z)
    raw_pred = np.argmax(raw_probs, axis=1)
    method, mode = calibrator.method, calibrator.mode
    if mode == "tva" and method in BINARY_METHODS:
        raw_conf = raw_probs[rows, raw_pred]
        conf = np.asarray(calibrator.model(raw_conf), dtype=np.float64)
        correct = (raw_pred == labels).astype(np.int64)
        return conf, PredictionSummary(raw_pred, conf, correct)
    if mode == "ova":
        probs = calibrator.model(raw_probs)
    else:
        probs = _scaling.apply_scaling(calibrator.model, z)
    pred = raw_pred if calibrator.prediction_preserving else np.argmax(probs, axis=1)
    conf = probs[rows, pred]
    correct = (pred == labels).astype(np.int64)
    return probs, PredictionSummary(pred, conf, correct)
