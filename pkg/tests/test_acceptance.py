"""Acceptance suite: one check per criterion, one PASS/FAIL line each.

Run ``python tests/test_acceptance.py`` for the summary lines alone, or
``pytest tests/test_acceptance.py -s`` to see them alongside pytest output.
"""
import json
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from tvacal import Calibrator, FitOptions, LogitsDataset, SynthSpec, fit, generate, load_dataset, save_dataset
from tvacal.adapters import BINARY_METHODS, VALID_MODES, fit_tva, ova_subproblems
from tvacal.binary import fit_isotonic
from tvacal.cli import main as cli_main
from tvacal.dataset import build_tva_set
from tvacal.metrics import auroc, ece, reliability_diagram
from tvacal.scaling import (
    apply_scaling,
    bce_tva_loss,
    ce_loss,
    fit_temperature,
    fit_vector,
    grad_bce_temperature,
    grad_ce_temperature,
)
from tvacal.synthetic import generate_split


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-12)


def criterion_1():
    """Analytic temperature gradients agree with central differences."""
    rng = np.random.default_rng(101)
    h = 1e-5
    worst = 0.0
    start = time.perf_counter()
    for i in range(100):
        n_classes = (2, 10, 100)[i % 3]
        z = rng.normal(0, 2, n_classes)
        y = int(rng.integers(n_classes))
        yb = int(rng.integers(2))
        T = float(rng.uniform(0.5, 3.0))
        fd_ce = (ce_loss(z, y, T + h) - ce_loss(z, y, T - h)) / (2 * h)
        fd_bce = (bce_tva_loss(z, yb, T + h) - bce_tva_loss(z, yb, T - h)) / (2 * h)
        worst = max(worst, _rel(grad_ce_temperature(z, y, T), fd_ce),
                    _rel(grad_bce_temperature(z, yb, T), fd_bce))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 1.0
    return ok, f"max relative error {worst:.2e}, {elapsed:.2f}s"


def criterion_2():
    """|dBCE/dT| > |dCE/dT| on wrong confident rows; equality on correct rows."""
    rng = np.random.default_rng(202)
    held = total = 0
    per_l = {}
    while total < 10000:
        n_classes = int(rng.choice([2, 10, 100]))
        z = rng.normal(0, rng.uniform(1, 5), n_classes)
        f = np.exp(z - z.max())
        f /= f.sum()
        m = int(np.argmax(z))
        if f[m] <= 0.5:
            continue
        y = int(rng.choice([k for k in range(n_classes) if k != m]))
        ok = abs(grad_bce_temperature(z, 0, 1.0)) > abs(grad_ce_temperature(z, y, 1.0))
        held += ok
        total += 1
        h, t = per_l.get(n_classes, (0, 0))
        per_l[n_classes] = (h + ok, t + 1)

    worst_eq = 0.0
    for _ in range(1000):
        n_classes = int(rng.choice([2, 10, 100]))
        z = rng.normal(0, 2, n_classes)
        T = float(rng.uniform(0.5, 3.0))
        worst_eq = max(worst_eq, abs(grad_bce_temperature(z, 1, T) - grad_ce_temperature(z, int(np.argmax(z)), T)))

    breakdown = ", ".join(f"L={k}: {h}/{t}" for k, (h, t) in sorted(per_l.items()))
    ok = held == total and worst_eq <= 1e-12
    return ok, (f"inequality held in {held}/{total} wrong rows ({breakdown}); "
                f"correct-row max gap {worst_eq:.1e}")


def criterion_3():
    """Temperature recovered within 10% and ECE cut to a quarter, under 10 s."""
    start = time.perf_counter()
    parts = []
    ok = True
    for tau in (0.5, 2.5):
        cal, test = generate_split(SynthSpec(n_classes=100, n_samples=15000, scale=2.0, tau=tau, seed=7), 5000)
        raw = test.summary()
        before = ece(raw.confidence, raw.correctness)
        for loss in ("ce", "bce_tva"):
            model = fit_temperature(cal, FitOptions(loss=loss))
            probs = apply_scaling(model, test.logits)
            conf = probs[np.arange(test.n_samples), raw.predicted]
            after = ece(conf, raw.correctness)
            good = _rel(model.T, tau) <= 0.10 and after <= 0.25 * before
            ok &= good
            parts.append(f"tau={tau} {loss}: T={model.T:.3f} ECE {before:.4f}->{after:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10.0
    return ok, "; ".join(parts) + f"; {elapsed:.1f}s"


def criterion_4():
    """TvA keeps every predicted label; HB_TvA has at most 10 confidence values."""
    checked = 0
    max_distinct = 0
    ok = True
    for i, (n_classes, tau) in enumerate([(3, 1.0), (10, 2.5), (100, 0.5), (100, 2.5)]):
        cal, test = generate_split(SynthSpec(n_classes=n_classes, n_samples=4000, tau=tau, seed=40 + i), 2000)
        raw_pred = test.summary().predicted
        for method in BINARY_METHODS + ("ts",):
            c = fit_tva(method, cal, FitOptions(max_iter=300))
            scores, summary = c.apply(test)
            ok &= bool(np.array_equal(summary.predicted, raw_pred))
            if method == "ts":
                ok &= bool(np.array_equal(np.argmax(scores, axis=1), raw_pred))
            if method == "hb":
                max_distinct = max(max_distinct, len(np.unique(scores)))
            checked += 1
    ok &= max_distinct <= 10
    return ok, f"{checked} calibrator/dataset pairs preserved predictions; HB_TvA distinct values <= {max_distinct}"


def _brute_isotonic(scores, targets):
    order = sorted(set(scores))
    blocks = [[sum(t for s, t in zip(scores, targets) if s == u), scores.count(u), [u]] for u in order]
    merged = True
    while merged:
        merged = False
        for i in range(len(blocks) - 1):
            a, b = blocks[i], blocks[i + 1]
            if a[0] * b[1] > b[0] * a[1]:
                blocks[i:i + 2] = [[a[0] + b[0], a[1] + b[1], a[2] + b[2]]]
                merged = True
                break
    value = {u: total / count for total, count, members in blocks for u in members}
    return [value[u] for u in order]


def criterion_5():
    """PAVA equals repeated pooling exactly."""
    rng = np.random.default_rng(505)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        scores = (rng.integers(0, 25, n) / 24).tolist()
        targets = rng.integers(0, 2, n).tolist()
        if fit_isotonic(scores, targets).values.tolist() != _brute_isotonic(scores, targets):
            mismatches += 1
    return mismatches == 0, f"{mismatches} mismatches in 1000 instances"


def _brute_auroc(s, y):
    pos = [a for a, t in zip(s, y) if t]
    neg = [a for a, t in zip(s, y) if not t]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def criterion_6():
    """ECE worked examples, AUROC against pair counting, diagram bookkeeping."""
    examples = [
        (ece([0.9, 0.9, 0.6, 0.6], [1, 0, 1, 1], 2), 0.0),
        (ece([0.3, 0.8], [1, 1], 2), 0.5 * abs(1 - 0.3) + 0.5 * abs(1 - 0.8)),
        (ece([1.0] * 5, [1] * 5), 0.0),
    ]
    ece_ok = all(got == want for got, want in examples)

    rng = np.random.default_rng(606)
    auroc_bad = 0
    diagram_bad = 0
    for _ in range(200):
        n = int(rng.integers(2, 201))
        s = (rng.integers(0, 30, n) / 29).tolist()
        y = rng.integers(0, 2, n).tolist()
        if 0 < sum(y) < n and auroc(s, y) != _brute_auroc(s, y):
            auroc_bad += 1
        bins = int(rng.integers(1, 21))
        s_cont = rng.random(n)
        mass = reliability_diagram(s_cont, y, bins, "equal_mass")
        width = reliability_diagram(s, y, bins, "equal_width")
        counts = [b.count for b in mass.bins]
        if max(counts) - min(counts) > 1 or sum(counts) != n or sum(b.count for b in width.bins) != n:
            diagram_bad += 1
    ok = ece_ok and auroc_bad == 0 and diagram_bad == 0
    return ok, f"ECE examples {'exact' if ece_ok else 'WRONG'}; AUROC mismatches {auroc_bad}/200; diagram violations {diagram_bad}/200"


def criterion_7():
    """The identity calibrator on calibrated synthetic data has small ECE."""
    s = generate(SynthSpec(n_classes=100, n_samples=10000, tau=1.0, seed=0)).summary()
    value = ece(s.confidence, s.correctness)
    return value <= 0.02, f"ECE {value:.4f}"


def criterion_8():
    """OvA positive fraction 1/L on balanced data; TvA positive fraction = accuracy."""
    n_classes, per_class = 20, 250
    base = generate(SynthSpec(n_classes=n_classes, n_samples=n_classes * per_class, seed=8))
    labels = np.repeat(np.arange(n_classes), per_class)
    data = LogitsDataset(base.logits, labels)
    ova_ok = all(t.mean() == 1 / n_classes and t.sum() == per_class for _, t in ova_subproblems(data))
    summary = base.summary()
    tva = build_tva_set(summary)
    tva_ok = tva.positive_fraction == summary.accuracy and tva.target.sum() == summary.correctness.sum()
    return ova_ok and tva_ok, (f"OvA fractions all 1/{n_classes}: {ova_ok}; "
                               f"TvA fraction {tva.positive_fraction:.4f} vs accuracy {summary.accuracy:.4f}")


def _pipeline(root: Path):
    run = lambda *a: cli_main([str(x) for x in a])
    codes = [
        run("synth", "--classes", 10, "--samples", 1500, "--tau", 2.0, "--seed", 9, "--out", root / "all.bin"),
        run("split", "--input", root / "all.bin", "--fraction", 0.4, "--seed", 2,
            "--cal-out", root / "cal.bin", "--test-out", root / "test.csv"),
    ]
    for method, mode in [("ts", "tva"), ("vs", "standard"), ("hb", "tva"), ("iso", "ova"), ("bbq", "tva")]:
        tag = f"{method}_{mode}"
        codes.append(run("fit", "--input", root / "cal.bin", "--method", method, "--mode", mode,
                         "--max-iter", 200, "--out", root / f"{tag}.json"))
        codes.append(run("apply", "--input", root / "test.csv", "--calibrator", root / f"{tag}.json",
                         "--out", root / f"{tag}.csv"))
        codes.append(run("eval", "--input", root / "test.csv", "--calibrator", root / f"{tag}.json",
                         "--out", root / f"{tag}_eval.json"))
        codes.append(run("diagram", "--input", root / "test.csv", "--calibrator", root / f"{tag}.json",
                         "--scheme", "equal_mass", "--out", root / f"{tag}_diagram.csv"))
    return codes, {p.name: p.read_bytes() for p in sorted(root.iterdir())}


def criterion_9():
    """Binary format round-trips, CLI reruns are byte-identical, calibrator JSON round-trips."""
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        data = generate(SynthSpec(n_classes=7, n_samples=500, seed=9))
        save_dataset(data, tmp / "a.bin")
        once = load_dataset(tmp / "a.bin")
        save_dataset(once, tmp / "b.bin")
        twice = load_dataset(tmp / "b.bin")
        binary_ok = ((tmp / "a.bin").read_bytes() == (tmp / "b.bin").read_bytes()
                     and once.logits.tobytes() == twice.logits.tobytes()
                     and np.array_equal(once.labels, data.labels)
                     and np.array_equal(once.logits, data.logits.astype(np.float32)))

        runs = []
        for name in ("r1", "r2"):
            (tmp / name).mkdir()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                runs.append(_pipeline(tmp / name))
        cli_ok = all(c == 0 for c in runs[0][0] + runs[1][0]) and runs[0][1] == runs[1][1]
        n_files = len(runs[0][1])

    cal = generate(SynthSpec(n_classes=6, n_samples=600, seed=10))
    json_bad = []
    for method, modes in VALID_MODES.items():
        for mode in modes:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                c = fit(method, mode, cal, FitOptions(max_iter=50))
            back = Calibrator.from_json(c.to_json())
            a, _ = c.apply(cal)
            b, _ = back.apply(cal)
            if not np.array_equal(a, b) or json.loads(back.to_json()) != json.loads(c.to_json()):
                json_bad.append(f"{method}/{mode}")
    ok = binary_ok and cli_ok and not json_bad
    return ok, (f"binary round-trip {'exact' if binary_ok else 'BROKEN'}; "
                f"CLI rerun {n_files} artifacts {'identical' if cli_ok else 'DIFFER'}; "
                f"JSON round-trip failures: {json_bad or 'none'}")


def criterion_10():
    """A huge penalty pins vector scaling to the identity."""
    cal, _ = generate_split(SynthSpec(n_classes=10, n_samples=4000, tau=2.5, seed=12), 2000)
    model = fit_vector(cal, FitOptions(lam=1e6))
    dv = float(np.max(np.abs(model.v - 1)))
    db = float(np.max(np.abs(model.b)))
    return dv <= 1e-2 and db <= 1e-2, f"max |v-1| = {dv:.1e}, max |b| = {db:.1e}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def _line(i, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {i}: {detail}"


@pytest.mark.parametrize("index", range(1, len(CRITERIA) + 1))
def test_criterion(index):
    ok, detail = CRITERIA[index - 1]()
    print(_line(index, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for i, check in enumerate(CRITERIA, 1):
        ok, detail = check()
        failed += not ok
        print(_line(i, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
