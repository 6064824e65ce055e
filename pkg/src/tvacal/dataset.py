"""Logit datasets: validation, softmax, predictions, splitting and file I/O.

Everything in the toolkit starts from an ``N x L`` matrix of logits exported
from a trained classifier plus the integer labels of the samples.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError, InvalidParameterError

__all__ = [
    "LogitsDataset",
    "PredictionSummary",
    "TvaBinarySet",
    "softmax",
    "predict",
    "build_tva_set",
    "split",
    "split_indices",
    "load_dataset",
    "save_dataset",
]

BINARY_MAGIC = b"CALB"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sHHII")


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LogitsDataset:
    """Logits of ``N`` samples over ``L`` classes with their true labels."""

    logits: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        labels = np.asarray(self.labels)
        if logits.ndim != 2:
            raise InvalidInputError(f"logits must be 2-D, got shape {logits.shape}")
        n, n_classes = logits.shape
        if n < 1 or n_classes < 2:
            raise InvalidInputError(f"need N >= 1 and L >= 2, got N={n}, L={n_classes}")
        if not np.all(np.isfinite(logits)):
            raise InvalidInputError("logits contain NaN or infinite values")
        if labels.shape != (n,):
            raise InvalidInputError(f"labels must have shape ({n},), got {labels.shape}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise InvalidInputError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.min() < 0 or labels.max() >= n_classes:
            raise InvalidInputError(f"labels must lie in [0, {n_classes})")
        object.__setattr__(self, "logits", _frozen(logits))
        object.__setattr__(self, "labels", _frozen(labels))

    @property
    def n_samples(self) -> int:
        return self.logits.shape[0]

    @property
    def n_classes(self) -> int:
        return self.logits.shape[1]

    def __len__(self):
        return self.n_samples

    def subset(self, indices) -> "LogitsDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LogitsDataset(self.logits[indices], self.labels[indices])

    def probabilities(self, temperature: float = 1.0) -> np.ndarray:
        return softmax(self.logits, temperature)

    def summary(self) -> "PredictionSummary":
        """Predictions of the uncalibrated classifier."""
        return predict(self.probabilities(), self.labels)


@dataclass(frozen=True, eq=False)
class PredictionSummary:
    """Predicted class, confidence and correctness of every sample."""

    predicted: np.ndarray
    confidence: np.ndarray
    correctness: np.ndarray

    def __post_init__(self):
        for name in ("predicted", "confidence", "correctness"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.correctness))


@dataclass(frozen=True, eq=False)
class TvaBinarySet:
    """Calibration set of the surrogate "is the prediction correct?" classifier."""

    confidence: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "confidence", _frozen(self.confidence))
        object.__setattr__(self, "target", _frozen(self.target))

    def __len__(self):
        return self.confidence.shape[0]

    @property
    def positive_fraction(self) -> float:
        return float(np.mean(self.target))


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax of ``logits / temperature``.

    The row maximum is subtracted before exponentiation, so logits of any
    finite magnitude are safe.

    Parameters
    ----------
    logits : array_like, shape (N, L) or (L,)
    temperature : float
        Strictly positive.

    Returns
    -------
    ndarray
        Same shape as ``logits``; each row sums to one.
    """
    if not (temperature > 0) or not math.isfinite(temperature):
        raise InvalidParameterError(f"temperature must be positive and finite, got {temperature}")
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits contain NaN or infinite values")
    z = z / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict(probs, labels) -> PredictionSummary:
    """Argmax prediction (ties to the lowest index), confidence and correctness."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2:
        raise InvalidInputError(f"probabilities must be 2-D, got shape {probs.shape}")
    if labels.shape != (probs.shape[0],):
        raise InvalidInputError(
            f"got {labels.shape[0] if labels.ndim else 1} labels for {probs.shape[0]} rows"
        )
    predicted = np.argmax(probs, axis=1)
    confidence = probs[np.arange(probs.shape[0]), predicted]
    correctness = (predicted == labels).astype(np.int64)
    return PredictionSummary(predicted, confidence, correctness)


def build_tva_set(summary: PredictionSummary) -> TvaBinarySet:
    """Surrogate binary calibration set: (confidence, prediction correct?)."""
    return TvaBinarySet(
        np.array(summary.confidence, dtype=np.float64),
        np.array(summary.correctness, dtype=np.int64),
    )


def split_indices(n: int, calibration_fraction: float, seed: int = 0):
    """Seeded random partition of ``range(n)`` into calibration and test indices.

    The indices are shuffled with numpy's PCG64 generator seeded by ``seed``
    and the first ``floor(calibration_fraction * n)`` become the calibration
    part.
    """
    if not 0 < calibration_fraction < 1:
        raise InvalidParameterError(
            f"calibration_fraction must be in (0, 1), got {calibration_fraction}"
        )
    if seed < 0:
        raise InvalidParameterError(f"seed must be non-negative, got {seed}")
    n_cal = int(math.floor(calibration_fraction * n))
    if n_cal < 1 or n_cal >= n:
        raise InvalidParameterError(
            f"fraction {calibration_fraction} of {n} samples leaves an empty part"
        )
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    return perm[:n_cal], perm[n_cal:]


def split(dataset: LogitsDataset, calibration_fraction: float, seed: int = 0):
    """Split a dataset into (calibration, test) parts. See :func:`split_indices`."""
    cal_idx, test_idx = split_indices(dataset.n_samples, calibration_fraction, seed)
    return dataset.subset(cal_idx), dataset.subset(test_idx)


# --------------------------------------------------------------------------
# file formats


def _format_from_path(path, fmt):
    if fmt is not None:
        if fmt not in ("csv", "binary"):
            raise InvalidParameterError(f"unknown format {fmt!r}; expected 'csv' or 'binary'")
        return fmt
    return "csv" if Path(path).suffix.lower() == ".csv" else "binary"


def save_dataset(dataset: LogitsDataset, path, format: str | None = None) -> None:
    """Write ``dataset`` as CSV or as the little-endian ``CALB`` binary format.

    With ``format=None`` the format follows the file suffix (``.csv`` or binary).
    """
    fmt = _format_from_path(path, format)
    if fmt == "csv":
        n_classes = dataset.n_classes
        header = [f"logit_{k}" for k in range(n_classes)] + ["label"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row, label in zip(dataset.logits, dataset.labels):
                w.writerow([format_float(v) for v in row] + [str(int(label))])
        return
    n, n_classes = dataset.logits.shape
    if n > 0xFFFFFFFF or n_classes > 0xFFFFFFFF:
        raise InvalidInputError("dataset too large for the binary format")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, 0, n, n_classes))
        fh.write(dataset.logits.astype("<f4").tobytes())
        fh.write(dataset.labels.astype("<u4").tobytes())


def load_dataset(path, format: str | None = None) -> LogitsDataset:
    """Read a dataset written by :func:`save_dataset` (or by hand, for CSV).

    Raises
    ------
    FormatError
        With the row/column of the first offending value when it can be located.
    """
    fmt = _format_from_path(path, format)
    if fmt == "csv":
        return _load_csv(path)
    return _load_binary(path)


def _load_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty CSV file") from None
        header = [h.strip() for h in header]
        n_classes = len(header) - 1
        expected = [f"logit_{k}" for k in range(n_classes)] + ["label"]
        if n_classes < 2 or header != expected:
            raise FormatError("CSV header must be logit_0,...,logit_{L-1},label with L >= 2")
        logits, labels = [], []
        for i, rec in enumerate(reader):
            if not rec:
                continue
            if len(rec) != n_classes + 1:
                raise FormatError(f"expected {n_classes + 1} fields, got {len(rec)}", row=i)
            vals = []
            for j, field in enumerate(rec[:-1]):
                try:
                    v = float(field)
                except ValueError:
                    raise FormatError(f"cannot parse logit {field!r}", row=i, column=j) from None
                if not math.isfinite(v):
                    raise FormatError("non-finite logit", row=i, column=j)
                vals.append(v)
            try:
                label = int(rec[-1])
            except ValueError:
                raise FormatError(f"cannot parse label {rec[-1]!r}", row=i, column=n_classes) from None
            if not 0 <= label < n_classes:
                raise FormatError(f"label {label} outside [0, {n_classes})", row=i, column=n_classes)
            logits.append(vals)
            labels.append(label)
    if not logits:
        raise FormatError("CSV file has no data rows")
    return LogitsDataset(np.array(logits, dtype=np.float64), np.array(labels, dtype=np.int64))


def _load_binary(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("file shorter than the binary header")
    magic, version, reserved, n, n_classes = _HEADER.unpack_from(data)
    if magic != BINARY_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != BINARY_VERSION:
        raise FormatError(f"unsupported version {version}")
    if reserved != 0:
        raise FormatError("reserved header field must be 0")
    if n < 1 or n_classes < 2:
        raise FormatError(f"need N >= 1 and L >= 2, got N={n}, L={n_classes}")
    n_logits = n * n_classes
    expected = _HEADER.size + 4 * n_logits + 4 * n
    # N and L are u32 each, so their product cannot overflow Python ints; a
    # product too large for the file shows up as a size mismatch.
    if n_logits > (1 << 62) or len(data) != expected:
        raise FormatError(f"file size {len(data)} does not match N={n}, L={n_classes}")
    logits = np.frombuffer(data, dtype="<f4", count=n_logits, offset=_HEADER.size)
    logits = logits.reshape(n, n_classes)
    labels = np.frombuffer(data, dtype="<u4", count=n, offset=_HEADER.size + 4 * n_logits)
    bad = ~np.isfinite(logits)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise FormatError("non-finite logit", row=int(r), column=int(c))
    out = labels >= n_classes
    if out.any():
        r = int(np.flatnonzero(out)[0])
        raise FormatError(f"label {int(labels[r])} outside [0, {n_classes})", row=r, column=n_classes)
    return LogitsDataset(logits.astype(np.float64), labels.astype(np.int64))


def format_float(x: float) -> str:
    """17-significant-digit decimal rendering (lossless for float64)."""
    return format(float(x), ".17g")
