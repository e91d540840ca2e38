"""Classification metrics, ROC/AUC, and the six-classifier bank."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from stentrom.classify import (
    FAILURE,
    KINDS,
    SUCCESS,
    ConfusionMatrix,
    evaluation_report,
    load_bank,
    metrics,
    predict_label,
    report_table,
    roc_auc,
    save_bank,
    train,
    train_bank,
)
from stentrom.errors import ConfigError, DataError


def test_confusion_matrix_from_hand_counted_example():
    y_true = [1, 1, 1, 0, 0, 1, 0, 0, 0, 1]
    y_pred = [1, 0, 1, 1, 0, 1, 0, 0, 1, 0]
    cm = ConfusionMatrix.from_predictions(y_true, y_pred)
    assert (cm.TP, cm.FP, cm.TN, cm.FN) == (3, 2, 3, 2)
    assert cm.total == 10
    with pytest.raises(DataError):
        ConfusionMatrix.from_predictions([1, 0], [1])
    with pytest.raises(DataError):
        ConfusionMatrix(TP=-1, FP=0, TN=0, FN=0)


def test_metric_formulas_hand_checked():
    m = metrics(ConfusionMatrix(TP=3, FP=2, TN=3, FN=2))
    assert m["accuracy"] == pytest.approx(6 / 10)
    assert m["sensitivity"] == pytest.approx(3 / 5)
    assert m["specificity"] == pytest.approx(3 / 5)
    assert m["precision"] == pytest.approx(3 / 5)
    assert m["f1"] == pytest.approx(2 * (3 / 5) * (3 / 5) / (6 / 5))


def test_metrics_undefined_cases_are_none_not_zero():
    # no positives in truth or prediction
    m = metrics(ConfusionMatrix(TP=0, FP=0, TN=4, FN=0))
    assert m["sensitivity"] is None and m["precision"] is None and m["f1"] is None
    assert m["accuracy"] == 1.0 and m["specificity"] == 1.0
    m2 = metrics(ConfusionMatrix(TP=5, FP=0, TN=0, FN=0))
    assert m2["specificity"] is None
    assert m2["sensitivity"] == 1.0


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=5, max_size=200))
@settings(max_examples=60, deadline=None)
def test_metrics_match_sklearn(pairs):
    from sklearn.metrics import accuracy_score, f1_score, precision_score, recall_score

    y_true = np.array([p[0] for p in pairs])
    y_pred = np.array([p[1] for p in pairs])
    cm = ConfusionMatrix.from_predictions(y_true, y_pred)
    m = metrics(cm)
    assert m["accuracy"] == pytest.approx(accuracy_score(y_true, y_pred))
    if m["sensitivity"] is not None:
        assert m["sensitivity"] == pytest.approx(recall_score(y_true, y_pred, zero_division=0))
    if m["precision"] is not None:
        assert m["precision"] == pytest.approx(precision_score(y_true, y_pred, zero_division=0))
    if m["f1"] is not None:
        assert m["f1"] == pytest.approx(f1_score(y_true, y_pred, zero_division=0))


def _mann_whitney_auc(scores, truth):
    """Brute-force tie-corrected pairwise statistic."""
    pos = [s for s, t in zip(scores, truth) if t == SUCCESS]
    neg = [s for s, t in zip(scores, truth) if t == FAILURE]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


@given(
    st.lists(
        st.tuples(st.integers(0, 6), st.integers(0, 1)),  # few distinct scores -> many ties
        min_size=2,
        max_size=200,
    )
)
@settings(max_examples=80, deadline=None)
def test_auc_equals_brute_force_mann_whitney(pairs):
    truth = np.array([p[1] for p in pairs])
    assume(0 < truth.sum() < len(truth))
    scores = np.array([p[0] for p in pairs], dtype=float)
    out = roc_auc(scores, truth)
    assert out["auc"] == pytest.approx(_mann_whitney_auc(scores, truth), abs=1e-12)


def test_auc_matches_sklearn_on_continuous_scores():
    from sklearn.metrics import roc_auc_score

    rng = np.random.default_rng(0)
    truth = rng.integers(0, 2, size=150)
    truth[:2] = [0, 1]
    scores = rng.normal(size=150) + truth  # informative but noisy
    assert roc_auc(scores, truth)["auc"] == pytest.approx(roc_auc_score(truth, scores), abs=1e-12)


def test_roc_curve_shape_and_endpoints():
    scores = np.array([0.9, 0.8, 0.8, 0.3, 0.2])
    truth = np.array([1, 1, 0, 0, 1])
    out = roc_auc(scores, truth)
    assert out["fpr"][0] == 0.0 and out["tpr"][0] == 0.0
    assert out["fpr"][-1] == 1.0 and out["tpr"][-1] == 1.0
    assert np.all(np.diff(out["fpr"]) >= 0) and np.all(np.diff(out["tpr"]) >= 0)
    # tied scores collapse to one curve point: 4 distinct scores -> 5 points
    assert len(out["fpr"]) == 5
    with pytest.raises(DataError):
        roc_auc([0.5, 0.4], [1, 1])  # one class only


def _blobs(n=160, seed=0):
    """Linearly separable two-class data with a comfortable margin."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    X = rng.normal(scale=0.5, size=(n, 2)) + np.where(y[:, None] == 1, 3.0, -3.0)
    return X, y


def test_every_classifier_kind_separates_blobs():
    X, y = _blobs()
    X_test, y_test = _blobs(seed=1)
    bank = train_bank(X, y, seed=0)
    assert set(bank) == set(KINDS)
    for kind, model in bank.items():
        labels, scores = model.predict(X_test)
        acc = float(np.mean(labels == y_test))
        assert acc >= 0.95, f"{kind} accuracy {acc}"
        assert roc_auc(scores, y_test)["auc"] >= 0.95, kind


def test_predict_label_wrapper_and_dimension_check():
    X, y = _blobs()
    model = train("LR", X, y)
    out = predict_label(model, np.array([3.0, 3.0]))
    assert out["label"] == SUCCESS and out["score"] > 0.5
    out = predict_label(model, np.array([-3.0, -3.0]))
    assert out["label"] == FAILURE and out["score"] < 0.5
    with pytest.raises(ConfigError):
        model.predict(np.zeros((1, 5)))


def test_train_validation():
    with pytest.raises(DataError):
        train("LR", np.zeros((4, 2)), [0, 0, 0, 0])  # single class
    with pytest.raises(DataError):
        train("LR", np.zeros((4, 2)), [0, 1, 0])
    with pytest.raises(ConfigError):
        train("XGB", *_blobs())


def test_bank_save_load_roundtrip(tmp_path):
    X, y = _blobs(n=80)
    bank = train_bank(X, y, seed=0)
    path = tmp_path / "bank.sclf"
    save_bank(bank, path)
    loaded = load_bank(path)
    assert set(loaded) == set(KINDS)
    Xq = _blobs(seed=2)[0][:20]
    for kind in KINDS:
        la, sa = bank[kind].predict(Xq)
        lb, sb = loaded[kind].predict(Xq)
        np.testing.assert_array_equal(la, lb)
        np.testing.assert_array_equal(sa, sb)
    bad = tmp_path / "bad.sclf"
    bad.write_bytes(b"JUNKJUNKJUNK")
    with pytest.raises(DataError):
        load_bank(bad)


def test_evaluation_report_and_table():
    X, y = _blobs(n=120)
    X_test, y_test = _blobs(n=60, seed=3)
    bank = {k: train(k, X, y) for k in ("LR", "SVM")}
    report = evaluation_report(bank, X_test, y_test)
    for kind in ("LR", "SVM"):
        entry = report[kind]
        cm = entry["confusion"]
        assert cm["TP"] + cm["FP"] + cm["TN"] + cm["FN"] == 60
        assert entry["metrics"]["accuracy"] >= 0.9
        assert entry["auc"] >= 0.9
    text = report_table(report)
    assert "LR" in text and "accuracy" in text
