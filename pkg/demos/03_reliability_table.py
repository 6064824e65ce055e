"""Read a reliability diagram before and after calibration.

Each row is one confidence bin: how many samples fell in it, how often
they were right and how confident the model claimed to be. A calibrated
model has accuracy close to mean confidence in every populated bin.
"""
from tvacal import SynthSpec, fit_tva
from tvacal.metrics import reliability_diagram, summary_metrics
from tvacal.synthetic import generate_split

cal, test = generate_split(SynthSpec(n_classes=10, n_samples=6000, tau=3.0, seed=21), 2000)
calibrator = fit_tva("hb", cal, bins=10)


def show(title, confidence, correctness):
    print(title)
    print(f"  {'bin':<15}{'count':>7}{'acc':>8}{'conf':>8}")
    for b in reliability_diagram(confidence, correctness, 10).bins:
        if b.count:
            label = f"({b.lower:.1f}, {b.upper:.1f}]"
            print(f"  {label:<15}{b.count:>7}{b.accuracy:>8.3f}{b.mean_confidence:>8.3f}")
    report = summary_metrics(confidence, correctness)
    print(f"  ECE {report.ece:.4f}  equal-mass ECE {report.ece_equal_mass:.4f}  "
          f"Brier {report.brier:.4f}  AUROC {report.auroc:.4f}\n")


raw = test.summary()
show("uncalibrated", raw.confidence, raw.correctness)
_, s = calibrator.apply(test)
show("histogram binning, top-versus-all", s.confidence, s.correctness)
