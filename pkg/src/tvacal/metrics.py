"""Calibration and discrimination metrics over (confidence, correctness) pairs."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidInputError, InvalidParameterError, UndefinedMetricError

__all__ = [
    "DEFAULT_BINS",
    "Bin",
    "ReliabilityDiagram",
    "MetricsReport",
    "reliability_diagram",
    "ece",
    "brier",
    "auroc",
    "summary_metrics",
    "evaluate",
]

DEFAULT_BINS = 15
SCHEMES = ("equal_width", "equal_mass")


@dataclass(frozen=True)
class Bin:
    lower: float
    upper: float
    count: int
    accuracy: float
    mean_confidence: float


@dataclass(frozen=True)
class ReliabilityDiagram:
    scheme: str
    bins: tuple

    @property
    def n_samples(self) -> int:
        return sum(b.count for b in self.bins)

    @property
    def counts(self) -> np.ndarray:
        return np.array([b.count for b in self.bins], dtype=np.int64)

    def ece(self) -> float:
        n = self.n_samples
        total = 0.0
        for b in self.bins:
            if b.count:
                total += (b.count / n) * abs(b.accuracy - b.mean_confidence)
        return total

    def to_csv(self, path) -> None:
        """Write ``bin_lower,bin_upper,count,accuracy,mean_confidence`` rows.

        Empty bins have accuracy and mean confidence written as 0.
        """
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lower", "bin_upper", "count", "accuracy", "mean_confidence"])
            for b in self.bins:
                w.writerow([_fmt(b.lower), _fmt(b.upper), b.count, _fmt(b.accuracy), _fmt(b.mean_confidence)])


def _fmt(x):
    return format(float(x), ".17g")


def _check_pairs(confidence, correctness):
    s = np.asarray(confidence, dtype=np.float64)
    y = np.asarray(correctness, dtype=np.float64)
    if s.ndim != 1 or y.shape != s.shape:
        raise InvalidInputError(
            f"confidence and correctness must be 1-D of equal length, got {s.shape} and {y.shape}"
        )
    if s.size == 0:
        raise InvalidInputError("empty input")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("confidences must be finite")
    return s, y


def _bin_record(lower, upper, s, y):
    n = s.size
    if n == 0:
        return Bin(float(lower), float(upper), 0, 0.0, 0.0)
    return Bin(float(lower), float(upper), int(n), float(np.mean(y)), float(np.mean(s)))


def reliability_diagram(confidence, correctness, bin_count: int = DEFAULT_BINS,
                        scheme: str = "equal_width") -> ReliabilityDiagram:
    """Tabulate per-bin counts, accuracy and mean confidence.

    ``equal_width`` uses edges ``k / B``; a sample falls in ``(lower, upper]``
    except that the first bin also takes the closed lower end ``[0, 1/B]``.
    ``equal_mass`` stably sorts the confidences and cuts them into ``B``
    consecutive runs whose sizes differ by at most one, so tied confidences
    may straddle two bins. A bin's upper edge is its largest confidence
    (1 for the last bin) and its lower edge is the previous bin's upper edge.
    """
    s, y = _check_pairs(confidence, correctness)
    if int(bin_count) != bin_count or bin_count < 1:
        raise InvalidParameterError(f"bin_count must be a positive integer, got {bin_count}")
    bin_count = int(bin_count)
    bins = []
    if scheme == "equal_width":
        edges = np.arange(bin_count + 1) / bin_count
        idx = np.clip(np.searchsorted(edges[1:-1], s, side="left"), 0, bin_count - 1)
        for k in range(bin_count):
            m = idx == k
            bins.append(_bin_record(edges[k], edges[k + 1], s[m], y[m]))
    elif scheme == "equal_mass":
        order = np.argsort(s, kind="stable")
        lower = 0.0
        chunks = np.array_split(order, bin_count)
        for k, chunk in enumerate(chunks):
            if k == bin_count - 1:
                upper = 1.0
            elif chunk.size:
                upper = float(s[chunk[-1]])
            else:
                upper = lower
            bins.append(_bin_record(lower, upper, s[chunk], y[chunk]))
            lower = upper
    else:
        raise InvalidParameterError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return ReliabilityDiagram(scheme, tuple(bins))


def ece(confidence, correctness, bin_count: int = DEFAULT_BINS, scheme: str = "equal_width") -> float:
    """Expected calibration error: sum over bins of ``n_b / N * |acc(b) - conf(b)|``."""
    return reliability_diagram(confidence, correctness, bin_count, scheme).ece()


def brier(confidence, correctness) -> float:
    """Brier score of the predicted class, ``mean((s - correct)^2)``."""
    s, y = _check_pairs(confidence, correctness)
    return float(np.mean((s - y) ** 2))


def auroc(confidence, correctness) -> float:
    """Area under the ROC curve of confidence as a detector of correct predictions.

    Mann-Whitney statistic with average ranks for ties, i.e. the probability
    that a random correct sample has higher confidence than a random
    incorrect one, ties counting one half.
    """
    s, y = _check_pairs(confidence, correctness)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs at least one correct and one incorrect sample")
    ranks = rankdata(s, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class MetricsReport:
    ece: float
    ece_equal_mass: float
    brier: float
    auroc: float
    accuracy: float
    mean_confidence: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        from ._json import dumps

        return dumps(self.to_dict())


def summary_metrics(confidence, correctness, bin_count: int = DEFAULT_BINS) -> MetricsReport:
    """All report fields from a (confidence, correctness) pair of sequences.

    AUROC is reported as NaN when every prediction is correct (or every one
    is wrong), since it is undefined there.
    """
    s, y = _check_pairs(confidence, correctness)
    try:
        roc = auroc(s, y)
    except UndefinedMetricError:
        roc = float("nan")
    return MetricsReport(
        ece=ece(s, y, bin_count, "equal_width"),
        ece_equal_mass=ece(s, y, bin_count, "equal_mass"),
        brier=brier(s, y),
        auroc=roc,
        accuracy=float(np.mean(y)),
        mean_confidence=float(np.mean(s)),
    )


def evaluate(dataset, calibrator, bin_count: int = DEFAULT_BINS) -> MetricsReport:
    """Apply a fitted calibrator to ``dataset`` and compute every report field.

    Accuracy is taken from the calibrated predictions, which only differ
    from the raw ones for calibrators that are not prediction-preserving.
    """
    _, summary = calibrator.apply(dataset)
    return summary_metrics(summary.confidence, summary.correctness, bin_count)
