"""Activity classification and the three train/test regime comparison.

The classifier is a small CNN (~0.2M parameters) trained with cross-entropy.
`run_regime_sweep` compares three schemes over growing training-set sizes:
train on original measured data and test on original measured data
(train_om_test_om), train on simulated data and test on enhanced measured
data (train_s_test_em), and train on simulated data and test on original
measured data (train_s_test_om). The measured test split stays fixed; the
enhanced regime feeds exactly those test inputs through the enhancer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from torch import nn

from .datagen import Dataset, PairRecord, derive_seed
from .enhancers import TrainingDiverged, _EnhancerBase
from .validation import as_spectrogram_batch

SWEEP_SIZES = (170, 194, 218, 243, 304)

REGIME_TRAIN_OM_TEST_OM = "train_om_test_om"
REGIME_TRAIN_S_TEST_EM = "train_s_test_em"
REGIME_TRAIN_S_TEST_OM = "train_s_test_om"
REGIMES = (REGIME_TRAIN_OM_TEST_OM, REGIME_TRAIN_S_TEST_EM, REGIME_TRAIN_S_TEST_OM)


class _SmallCNN(nn.Module):
    def __init__(self, conv_channels=(16, 32, 64), dense_units=48, n_classes=6):
        super().__init__()
        blocks = []
        in_ch = 1
        for out_ch in conv_channels:
            blocks += [nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1), nn.ReLU()]
            in_ch = out_ch
        self.features = nn.Sequential(*blocks)
        with torch.no_grad():
            flat = self.features(torch.zeros(1, 1, 48, 80)).numel()
        self.head = nn.Sequential(nn.Flatten(), nn.Linear(flat, dense_units), nn.ReLU(), nn.Linear(dense_units, n_classes))

    def forward(self, x):
        return self.head(self.features(x))


class ActivityClassifier(BaseEstimator, ClassifierMixin):
    """Six-way spectrogram classifier with a sklearn fit/predict surface."""

    def __init__(self, conv_channels=(16, 32, 64), dense_units=48, epochs=40, lr=1e-3, batch_size=16, seed=0):
        self.conv_channels = conv_channels
        self.dense_units = dense_units
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        X = as_spectrogram_batch(X)
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"X and y disagree: {X.shape[0]} vs {y.shape[0]} samples")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError(f"need at least 2 classes to fit, got {self.classes_.size}")

        torch.manual_seed(derive_seed(self.seed, 0, 0xC1A5) % (2**63))
        self.net_ = _SmallCNN(tuple(self.conv_channels), self.dense_units, self.classes_.size)
        self.n_params_ = sum(p.numel() for p in self.net_.parameters())
        opt = torch.optim.Adam(self.net_.parameters(), lr=self.lr)
        rng = np.random.default_rng(derive_seed(self.seed, 1, 0xC1A5))
        Xt = torch.from_numpy(X).unsqueeze(1)
        yt = torch.from_numpy(y_idx.astype(np.int64))
        objective = nn.CrossEntropyLoss()
        self.net_.train()
        self.loss_curve_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(X.shape[0])
            total, count = 0.0, 0
            for start in range(0, X.shape[0], self.batch_size):
                idx = torch.as_tensor(order[start : start + self.batch_size], dtype=torch.long)
                logits = self.net_(Xt[idx])
                loss = objective(logits, yt[idx])
                if not torch.isfinite(loss):
                    raise TrainingDiverged(f"non-finite classifier loss at epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += float(loss) * idx.numel()
                count += idx.numel()
            self.loss_curve_.append(total / count)
        self.net_.eval()
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("ActivityClassifier has not been fitted yet")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_spectrogram_batch(X)
        self.net_.eval()
        with torch.no_grad():
            probs = []
            for start in range(0, X.shape[0], 128):
                xb = torch.from_numpy(X[start : start + 128]).unsqueeze(1)
                probs.append(torch.softmax(self.net_(xb), dim=1).numpy())
        return np.concatenate(probs)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


@dataclass
class RegimeResult:
    """Accuracy and confusion matrix of one (regime, training size) cell."""

    regime: str
    train_size: int
    accuracy: float
    confusion: list = field(default_factory=list)  # rows: true class, cols: predicted
    classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "train_size": self.train_size,
            "accuracy": self.accuracy,
            "confusion": self.confusion,
            "classes": self.classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegimeResult":
        return cls(d["regime"], d["train_size"], d["accuracy"], d["confusion"], d["classes"])


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, classes: np.ndarray) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[index[t], index[p]] += 1
    return cm


def stratified_subset(records: list[PairRecord], size: int, seed: int) -> list[PairRecord]:
    """Deterministic class-balanced subset via largest-remainder allocation."""
    if size > len(records):
        raise ValueError(f"requested {size} samples from a pool of {len(records)}")
    by_class: dict[str, list[PairRecord]] = {}
    for rec in records:
        by_class.setdefault(rec.activity, []).append(rec)
    classes = sorted(by_class)
    total = len(records)
    exact = {c: size * len(by_class[c]) / total for c in classes}
    take = {c: int(np.floor(exact[c])) for c in classes}
    shortfall = size - sum(take.values())
    for c in sorted(classes, key=lambda c: (-(exact[c] - take[c]), c))[:shortfall]:
        take[c] += 1
    chosen: list[PairRecord] = []
    for c in classes:
        rng = np.random.default_rng(derive_seed(seed, _class_tag(c), 0x57BA))
        order = rng.permutation(len(by_class[c]))[: take[c]]
        chosen.extend(by_class[c][i] for i in sorted(order.tolist()))
    return chosen


def _class_tag(name: str) -> int:
    import hashlib

    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")


def _evaluate(clf: ActivityClassifier, X: np.ndarray, y: np.ndarray, regime: str, train_size: int) -> RegimeResult:
    pred = clf.predict(X)
    classes = clf.classes_
    cm = confusion_matrix(y, pred, classes)
    accuracy = float(np.trace(cm) / cm.sum())
    return RegimeResult(regime, train_size, accuracy, cm.tolist(), [str(c) for c in classes])


def run_regime_sweep(
    dataset: Dataset,
    enhancer: _EnhancerBase,
    sizes=SWEEP_SIZES,
    regimes=REGIMES,
    classifier_params: dict | None = None,
    master_seed: int = 0,
) -> list[RegimeResult]:
    """Train/evaluate every requested (regime, size) cell.

    Simulated training pools draw from the full corpus; measured pools draw
    from the train split only, so sizes beyond it are skipped for the
    measured-trained regime. Enhanced test inputs are the fixed measured
    test inputs passed through `enhancer.transform`.
    """
    classifier_params = dict(classifier_params or {})
    test_records = dataset.select(split="test")
    if not test_records:
        raise ValueError("dataset has no test split")
    y_test = dataset.labels(test_records)
    X_test_om = dataset.meas_batch(test_records)

    needs_em = REGIME_TRAIN_S_TEST_EM in regimes
    X_test_em = enhancer.transform(X_test_om) if needs_em else None

    sim_pool = dataset.select()  # simulated data may use the whole corpus
    om_pool = dataset.select(split="train")

    results: list[RegimeResult] = []
    for size in sizes:
        wants_s = REGIME_TRAIN_S_TEST_EM in regimes or REGIME_TRAIN_S_TEST_OM in regimes
        if wants_s and size <= len(sim_pool):
            subset = stratified_subset(sim_pool, size, derive_seed(master_seed, size, 0x5))
            before = dataset.read_counts["meas"]
            X_train = dataset.sim_batch(subset)
            y_train = dataset.labels(subset)
            clf = ActivityClassifier(seed=derive_seed(master_seed, size, 0xC), **classifier_params)
            clf.fit(X_train, y_train)
            meas_reads_during_training = dataset.read_counts["meas"] - before
            if meas_reads_during_training:
                raise RuntimeError(
                    f"regime isolation violated: {meas_reads_during_training} measured reads "
                    "during simulated-only training"
                )
            if REGIME_TRAIN_S_TEST_EM in regimes:
                results.append(_evaluate(clf, X_test_em, y_test, REGIME_TRAIN_S_TEST_EM, size))
            if REGIME_TRAIN_S_TEST_OM in regimes:
                results.append(_evaluate(clf, X_test_om, y_test, REGIME_TRAIN_S_TEST_OM, size))
        if REGIME_TRAIN_OM_TEST_OM in regimes and size <= len(om_pool):
            subset = stratified_subset(om_pool, size, derive_seed(master_seed, size, 0x6))
            X_train = dataset.meas_batch(subset)
            y_train = dataset.labels(subset)
            clf = ActivityClassifier(seed=derive_seed(master_seed, size, 0xD), **classifier_params)
            clf.fit(X_train, y_train)
            results.append(_evaluate(clf, X_test_om, y_test, REGIME_TRAIN_OM_TEST_OM, size))
    return results
