"""Why wrap binary calibrators top-versus-all rather than one-versus-all.

One-versus-all fits a calibrator per class on a 1-in-L positive rate and
renormalises, which can reorder the classes. Top-versus-all fits a single
calibrator on "was the prediction right?" and only rewrites the confidence.
"""
import warnings

import numpy as np

from tvacal import SynthSpec, fit_ova, fit_tva
from tvacal.metrics import ece
from tvacal.synthetic import generate_split

cal, test = generate_split(SynthSpec(n_classes=100, n_samples=12000, tau=2.0, seed=3), 4000)
raw = test.summary()
print(f"raw: accuracy {raw.accuracy:.4f}  ECE {ece(raw.confidence, raw.correctness):.4f}\n")

print(f"{'method':<8}{'mode':<6}{'accuracy':>10}{'ECE':>9}{'changed':>9}")
for method in ("hb", "iso", "beta", "bbq"):
    for mode, fitter in (("ova", fit_ova), ("tva", fit_tva)):
        with warnings.catch_warnings():
            # a few of the 100 classes may lack calibration positives
            warnings.simplefilter("ignore", RuntimeWarning)
            calibrator = fitter(method, cal)
        _, s = calibrator.apply(test)
        changed = int(np.sum(s.predicted != raw.predicted))
        print(f"{method:<8}{mode:<6}{s.accuracy:>10.4f}{ece(s.confidence, s.correctness):>9.4f}{changed:>9}")

tva = fit_tva("iso", cal).model
print(f"\nTvA set positive rate = accuracy = {cal.summary().accuracy:.3f}; "
      f"each OvA problem has rate ~ {1 / cal.n_classes:.3f}")
print(f"isotonic TvA map: {len(tva.breakpoints)} breakpoints, {len(set(tva.values))} distinct levels")
