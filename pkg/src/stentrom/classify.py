"""Binary success/failure classifiers over deployment parameters.

Six classifier kinds (LR, kNN, NB, DT, ANN, SVM) are backed by scikit-learn
estimators configured to the documented architectures; features are
standardized with training-split statistics only. Confusion-matrix metrics
and ROC/AUC are computed here from first principles.

Label convention: success = 1 (positive class), failure = 0.
"""

from __future__ import annotations

import pickle
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .gpr import Standardizer

KINDS = ("LR", "kNN", "NB", "DT", "ANN", "SVM")

SUCCESS, FAILURE = 1, 0

_MAGIC = b"SCLF"
_VERSION = 1


def _make_estimator(kind: str, seed: int, hyper: dict):
    from sklearn.linear_model import LogisticRegression
    from sklearn.naive_bayes import GaussianNB
    from sklearn.neighbors import KNeighborsClassifier
    from sklearn.neural_network import MLPClassifier
    from sklearn.svm import SVC
    from sklearn.tree import DecisionTreeClassifier

    if kind == "LR":
        return LogisticRegression(penalty=None, max_iter=2000)
    if kind == "kNN":
        return KNeighborsClassifier(n_neighbors=hyper.get("k", 5))
    if kind == "NB":
        return GaussianNB()
    if kind == "DT":
        return DecisionTreeClassifier(
            criterion="gini",
            max_depth=hyper.get("max_depth", 12),
            min_samples_leaf=hyper.get("min_leaf", 2),
            random_state=seed,
        )
    if kind == "ANN":
        return MLPClassifier(
            hidden_layer_sizes=(10, 10, 10),
            activation="tanh",
            solver="sgd",
            momentum=0.9,
            batch_size=hyper.get("batch_size", "auto"),
            learning_rate_init=hyper.get("lr", 0.05),
            early_stopping=hyper.get("early_stopping", True),
            validation_fraction=0.2,
            n_iter_no_change=50,
            max_iter=hyper.get("max_iter", 3000),
            random_state=seed,
        )
    if kind == "SVM":
        # polynomial order-2 kernel (x.x' + 1)^2, soft margin C = 1
        return SVC(kernel="poly", degree=2, gamma=1.0, coef0=1.0, C=hyper.get("C", 1.0))
    raise ConfigError(f"unknown classifier kind {kind!r}; expected one of {KINDS}")


@dataclass
class TrainedClassifier:
    """A fitted classifier plus its feature standardizer."""

    kind: str
    estimator: object
    std: Standardizer

    def predict(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Hard labels and monotone scores (higher = more likely success).

        Scores: class-1 probability for LR/NB/DT/ANN, vote fraction for
        kNN, signed margin for SVM.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.std.mean):
            raise ConfigError(f"feature dimension {X.shape[1]} != trained dimension {len(self.std.mean)}")
        Z = self.std.transform(X)
        labels = np.asarray(self.estimator.predict(Z), dtype=int)
        if self.kind == "SVM":
            scores = np.asarray(self.estimator.decision_function(Z), dtype=float)
        else:
            proba = self.estimator.predict_proba(Z)
            one = list(self.estimator.classes_).index(SUCCESS) if SUCCESS in self.estimator.classes_ else None
            scores = proba[:, one] if one is not None else np.zeros(len(Z))
        return labels, scores


def train(kind: str, X: np.ndarray, y: np.ndarray, seed: int = 0, **hyper) -> TrainedClassifier:
    """Fit one classifier kind on labeled data (standardizing internally)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int).ravel()
    if len(X) != len(y):
        raise DataError("X and y lengths differ")
    if len(np.unique(y)) < 2:
        raise DataError("training data contains a single class")
    std = Standardizer.fit(X)
    if kind == "ANN" and "batch_size" not in hyper:
        # full-batch updates (sized to the post-validation-split training set)
        hyper["batch_size"] = max(int(0.8 * len(X)), 1)
    est = _make_estimator(kind, seed, hyper)
    est.fit(std.transform(X), y)
    return TrainedClassifier(kind=kind, estimator=est, std=std)


def train_bank(X: np.ndarray, y: np.ndarray, seed: int = 0) -> dict[str, TrainedClassifier]:
    """Train all six kinds on the same data."""
    return {kind: train(kind, X, y, seed=seed) for kind in KINDS}


def predict_label(model: TrainedClassifier, x: np.ndarray) -> dict:
    """Single-sample convenience wrapper returning {label, score}."""
    labels, scores = model.predict(np.atleast_2d(x))
    return {"label": int(labels[0]), "score": float(scores[0])}


# -- metrics (from first principles) -----------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    TP: int
    FP: int
    TN: int
    FN: int

    def __post_init__(self):
        if min(self.TP, self.FP, self.TN, self.FN) < 0:
            raise DataError("confusion-matrix counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.TP + self.FP + self.TN + self.FN

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        t = np.asarray(y_true, dtype=int).ravel()
        p = np.asarray(y_pred, dtype=int).ravel()
        if t.shape != p.shape:
            raise DataError("prediction/truth length mismatch")
        return cls(
            TP=int(np.sum((t == SUCCESS) & (p == SUCCESS))),
            FP=int(np.sum((t == FAILURE) & (p == SUCCESS))),
            TN=int(np.sum((t == FAILURE) & (p == FAILURE))),
            FN=int(np.sum((t == SUCCESS) & (p == FAILURE))),
        )


def _ratio(num: float, den: float) -> float | None:
    return None if den == 0 else num / den


def metrics(cm: ConfusionMatrix) -> dict:
    """Accuracy, sensitivity, specificity, precision, F1.

    Zero-denominator metrics are reported as None (undefined), never 0.
    """
    acc = _ratio(cm.TP + cm.TN, cm.total)
    sens = _ratio(cm.TP, cm.TP + cm.FN)
    spec = _ratio(cm.TN, cm.TN + cm.FP)
    prec = _ratio(cm.TP, cm.TP + cm.FP)
    f1 = None
    if prec is not None and sens is not None and (prec + sens) > 0:
        f1 = 2.0 * prec * sens / (prec + sens)
    return {"accuracy": acc, "sensitivity": sens, "specificity": spec, "precision": prec, "f1": f1}


def roc_auc(scores, truth) -> dict:
    """ROC curve (FPR, TPR per threshold) and trapezoidal AUC.

    Tied scores cross their threshold simultaneously (one curve point per
    distinct score), which makes the trapezoidal area equal the
    Mann-Whitney tie-corrected statistic.
    """
    s = np.asarray(scores, dtype=float).ravel()
    t = np.asarray(truth, dtype=int).ravel()
    if s.shape != t.shape:
        raise DataError("scores/truth length mismatch")
    n_pos = int(np.sum(t == SUCCESS))
    n_neg = int(np.sum(t == FAILURE))
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    t_sorted = t[order]
    # cumulative counts at each distinct-score boundary
    distinct = np.nonzero(np.diff(s_sorted))[0]
    cut = np.concatenate([distinct, [len(s_sorted) - 1]])
    tp = np.cumsum(t_sorted == SUCCESS)[cut]
    fp = np.cumsum(t_sorted == FAILURE)[cut]
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    return {"fpr": fpr, "tpr": tpr, "auc": auc}


# -- serialization ------------------------------------------------------------


def save_bank(bank: dict[str, TrainedClassifier], path) -> None:
    """Versioned binary container wrapping the pickled classifier bank."""
    payload = pickle.dumps(bank, protocol=4)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", _VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)


def load_bank(path) -> dict[str, TrainedClassifier]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise DataError(f"{path}: not a classifier bank file")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != _VERSION:
            raise DataError(f"{path}: unsupported classifier bank version {version}")
        (n,) = struct.unpack("<Q", fh.read(8))
        bank = pickle.loads(fh.read(n))
    if not isinstance(bank, dict):
        raise DataError(f"{path}: malformed classifier bank payload")
    return bank


def evaluation_report(bank: dict[str, TrainedClassifier], X_test, y_test) -> dict:
    """Per-kind confusion matrix, metrics, and ROC/AUC on a test split."""
    out = {}
    for kind, model in bank.items():
        labels, scores = model.predict(X_test)
        cm = ConfusionMatrix.from_predictions(y_test, labels)
        entry = {
            "confusion": {"TP": cm.TP, "FP": cm.FP, "TN": cm.TN, "FN": cm.FN},
            "metrics": metrics(cm),
        }
        try:
            roc = roc_auc(scores, y_test)
            entry["roc"] = {"fpr": roc["fpr"].tolist(), "tpr": roc["tpr"].tolist()}
            entry["auc"] = roc["auc"]
        except DataError:
            entry["auc"] = None
        out[kind] = entry
    return out


def report_table(report: dict) -> str:
    """Plain-text metric table, one classifier per row."""
    cols = ["accuracy", "sensitivity", "specificity", "precision", "f1"]
    lines = ["{:<6} {:>9} {:>12} {:>12} {:>10} {:>7} {:>7}".format("kind", *cols, "auc")]
    for kind, entry in report.items():
        vals = [entry["metrics"][c] for c in cols] + [entry.get("auc")]
        cells = ["{:>7}".format("n/a") if v is None else f"{v:7.3f}" for v in vals]
        lines.append("{:<6} {:>9} {:>12} {:>12} {:>10} {:>7} {:>7}".format(kind, *cells))
    return "\n".join(lines)
