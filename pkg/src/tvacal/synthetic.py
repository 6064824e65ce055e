"""Seeded synthetic logits with known calibration.

Latent logits ``z`` are i.i.d. Gaussian and each label is drawn from
``softmax(z)``, so a classifier emitting ``z`` is perfectly calibrated by
construction. The emitted logits are ``tau * z``: overconfident for
``tau > 1``, underconfident for ``tau < 1``, and restored exactly by a
temperature of ``tau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import LogitsDataset, softmax
from .errors import InvalidParameterError

__all__ = ["SynthSpec", "generate", "generate_split"]


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 100
    n_samples: int = 10000
    scale: float = 2.0
    tau: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_classes) != self.n_classes or self.n_classes < 2:
            raise InvalidParameterError(f"n_classes must be an integer >= 2, got {self.n_classes}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise InvalidParameterError(f"n_samples must be a positive integer, got {self.n_samples}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidParameterError(f"scale must be positive, got {self.scale}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidParameterError(f"seed must be a non-negative integer, got {self.seed}")


def generate(spec: SynthSpec) -> LogitsDataset:
    """Draw a dataset from ``spec`` using numpy's PCG64 generator.

    The latent logits are drawn first (row-major), then one uniform per
    sample picks the label by inverse-CDF lookup in ``softmax(z)``.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    z = rng.normal(0.0, spec.scale, size=(spec.n_samples, spec.n_classes))
    p = softmax(z)
    u = rng.random(spec.n_samples)
    cdf = np.cumsum(p, axis=1)
    labels = (cdf < u[:, None]).sum(axis=1)
    # cumsum rounding can leave cdf[-1] slightly below u
    labels = np.minimum(labels, spec.n_classes - 1)
    return LogitsDataset(spec.tau * z, labels)


def generate_split(spec: SynthSpec, n_cal: int):
    """Generate ``spec.n_samples`` rows and cut the first ``n_cal`` off as calibration data."""
    if not 0 < n_cal < spec.n_samples:
        raise InvalidParameterError(f"n_cal must be in (0, {spec.n_samples}), got {n_cal}")
    data = generate(spec)
    idx = np.arange(spec.n_samples)
    return data.subset(idx[:n_cal]), data.subset(idx[n_cal:])
