import warnings

import numpy as np
import pytest

from tvacal import (
    Calibrator,
    FitOptions,
    InvalidInputError,
    InvalidParameterError,
    LogitsDataset,
    SynthSpec,
    fit,
    fit_ova,
    fit_tva,
    generate,
    identity_calibrator,
)
from tvacal.adapters import (
    BINARY_METHODS,
    SCALING_METHODS,
    VALID_MODES,
    is_prediction_preserving,
    ova_subproblems,
)
from tvacal.metrics import ece

FAST = FitOptions(max_iter=200)


def _logits_from_probs(p):
    return LogitsDataset(np.log(np.asarray(p, dtype=float)), np.zeros(len(p), dtype=int))


@pytest.mark.parametrize("method", BINARY_METHODS + ("ts",))
def test_tva_preserves_predictions(method, overconfident_split):
    cal, test = overconfident_split
    c = fit_tva(method, cal, FAST)
    assert c.prediction_preserving
    _, summary = c.apply(test)
    np.testing.assert_array_equal(summary.predicted, test.summary().predicted)


def test_ts_standard_preserves_predictions(overconfident_split):
    cal, test = overconfident_split
    c = fit("ts", "standard", cal, FAST)
    probs, summary = c.apply(test)
    np.testing.assert_array_equal(np.argmax(probs, axis=1), test.summary().predicted)


def test_hb_tva_distinct_values(overconfident_split):
    cal, test = overconfident_split
    for bins in (3, 10, 15):
        conf, _ = fit_tva("hb", cal, bins=bins).apply(test)
        assert len(np.unique(conf)) <= bins


def test_hb_tva_auto_picks_lower_ece(overconfident_split):
    cal, _ = overconfident_split
    chosen = fit_tva("hb", cal, scheme="auto").model
    conf, corr = cal.summary().confidence, cal.summary().correctness
    errs = {s: ece(fit_tva("hb", cal, scheme=s).model(conf), corr) for s in ("equal_size", "equal_mass")}
    assert ece(chosen(conf), corr) == min(errs.values())


def test_tva_reduces_ece(overconfident_split):
    cal, test = overconfident_split
    before = ece(test.summary().confidence, test.summary().correctness)
    for method in BINARY_METHODS:
        _, s = fit_tva(method, cal).apply(test)
        assert ece(s.confidence, s.correctness) < before / 2, method


class TestOva:
    def test_positive_fractions(self):
        data = generate(SynthSpec(n_classes=5, n_samples=500, seed=1))
        fractions = [t.mean() for _, t in ova_subproblems(data)]
        assert sum(fractions) == pytest.approx(1.0)

    def test_balanced_imbalance(self):
        n_classes, n = 1000, 25000
        labels = np.repeat(np.arange(n_classes), n // n_classes)
        data = LogitsDataset(np.zeros((n, n_classes), dtype=np.float32), labels)
        for _, t in ova_subproblems(data)[:50]:
            assert t.sum() == 25
            assert t.mean() == 1 / n_classes

    def test_normalized_rows(self, overconfident_split):
        cal, test = overconfident_split
        for method in BINARY_METHODS:
            probs, _ = fit_ova(method, cal).apply(test)
            np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_unnormalized(self, overconfident_split):
        cal, test = overconfident_split
        probs, _ = fit_ova("iso", cal, normalize=False).apply(test)
        assert np.max(np.abs(probs.sum(axis=1) - 1)) > 1e-3

    def test_can_change_prediction(self):
        cal = LogitsDataset(
            np.log([[0.58, 0.42], [0.95, 0.05], [0.1, 0.9]]), np.array([1, 0, 1])
        )
        c = fit_ova("hb", cal, bins=10, scheme="equal_size")
        assert not c.prediction_preserving
        probs, summary = c.apply(_logits_from_probs([[0.58, 0.42]]))
        assert cal.summary().predicted[0] == 0
        assert summary.predicted[0] == 1
        np.testing.assert_allclose(probs[0], [0.0, 1.0])

    def test_zero_positive_fallback(self):
        z = np.random.default_rng(0).normal(size=(60, 3))
        labels = np.arange(60) % 2  # class 2 never occurs
        with pytest.warns(RuntimeWarning, match="class 2"):
            c = fit_ova("iso", LogitsDataset(z, labels))
        member = c.model.members[2]
        np.testing.assert_array_equal(member(np.linspace(0, 1, 11)), 0.0)

    def test_all_zero_row_uniform(self):
        from tvacal.adapters import OvaEnsemble
        from tvacal.binary import BinningModel

        zero = BinningModel("equal_size", [0.0, 1.0], [0.0])
        probs = OvaEnsemble([zero] * 4)(np.full((2, 4), 0.25))
        np.testing.assert_array_equal(probs, 0.25)


class TestPreservingFlag:
    @pytest.mark.parametrize("method", SCALING_METHODS + BINARY_METHODS)
    def test_matrix(self, method):
        for mode in VALID_MODES[method]:
            expected = method == "ts" or (mode == "tva" and method in BINARY_METHODS)
            assert is_prediction_preserving(mode, method) is expected

    def test_vs_standard_can_change_prediction(self):
        from tvacal.scaling import VectorModel

        c = Calibrator("standard", "vs", VectorModel(np.array([1.0, 2.0]), np.zeros(2)))
        _, s = c.apply(LogitsDataset(np.array([[1.0, 0.8]]), np.array([0])))
        assert s.predicted[0] == 1


class TestSerialization:
    @pytest.mark.parametrize("method,mode", [(m, md) for m, modes in VALID_MODES.items() for md in modes])
    def test_round_trip(self, method, mode, calibrated_small):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            c = fit(method, mode, calibrated_small, FitOptions(max_iter=30))
        back = Calibrator.from_json(c.to_json())
        assert back.to_json() == c.to_json()
        a, _ = c.apply(calibrated_small)
        b, _ = back.apply(calibrated_small)
        np.testing.assert_array_equal(a, b)

    def test_envelope(self):
        d = identity_calibrator().to_dict()
        assert d["mode"] == "standard" and d["method"] == "ts" and d["prediction_preserving"] is True

    def test_inconsistent_flag(self):
        d = identity_calibrator().to_dict()
        d["prediction_preserving"] = False
        with pytest.raises(InvalidParameterError):
            Calibrator.from_dict(d)

    def test_save_load(self, tmp_path, calibrated_small):
        c = fit_tva("bbq", calibrated_small)
        path = tmp_path / "c.json"
        c.save(path)
        assert Calibrator.load(path).to_json() == c.to_json()


class TestInvalid:
    @pytest.mark.parametrize("method,mode", [("ts", "ova"), ("vs", "ova"), ("hb", "standard"),
                                             ("iso", "standard"), ("xx", "tva")])
    def test_pairs(self, method, mode, calibrated_small):
        with pytest.raises(InvalidParameterError):
            fit(method, mode, calibrated_small)

    def test_class_count_mismatch(self, calibrated_small):
        c = fit_ova("hb", calibrated_small)
        with pytest.raises(InvalidInputError):
            c.apply(generate(SynthSpec(n_classes=4, n_samples=10)))

    def test_identity(self, calibrated_small):
        probs, s = identity_calibrator().apply(calibrated_small)
        np.testing.assert_allclose(probs, calibrated_small.probabilities(), rtol=1e-12)
