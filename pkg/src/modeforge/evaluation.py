"""Cross-validated model evaluation: folds, metrics, confusion matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .baselines import (
    TreeConfig,
    train_bagging,
    train_glm,
    train_random_forest,
    train_tree,
)
from .errors import TrainingError
from .features import TRAJECTORY_FEATURES, FeatureVector
from .trips import MODES
from .widedeep import LOG_CLAMP, TrainConfig, train

N_CLASSES = len(MODES)

MODEL_KINDS = ("wide_deep", "glm", "tree", "bagging", "random_forest")


@dataclass(frozen=True)
class FoldPlan:
    seed: int
    assignments: np.ndarray  # fold id per sample index

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)


def make_folds(n: int, k: int = 10, seed: int = 0) -> FoldPlan:
    """Seeded shuffle + round-robin assignment into k folds.

    Folds partition the index set with sizes differing by at most one.
    """
    if n < k:
        raise ValueError(f"need at least {k} samples for {k} folds, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    assignments = np.empty(n, dtype=int)
    assignments[order] = np.arange(n) % k
    return FoldPlan(seed=seed, assignments=assignments)


@dataclass
class ConfusionMatrix:
    """Rows = reported (true) mode, columns = detected mode."""

    counts: np.ndarray = field(
        default_factory=lambda: np.zeros((N_CLASSES, N_CLASSES), dtype=int))
    class_order: tuple[str, ...] = MODES

    def add(self, true: np.ndarray, pred: np.ndarray) -> None:
        for t, p in zip(true, pred):
            self.counts[t, p] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total


def precision_recall(cm: ConfusionMatrix,
                     ) -> tuple[list[Optional[float]], list[Optional[float]], float]:
    """Per-class precision and recall plus overall accuracy.

    A class with no predicted (resp. true) samples gets precision (resp.
    recall) of None rather than a division error.
    """
    counts = cm.counts
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    recall = [counts[i, i] / row_sums[i] if row_sums[i] > 0 else None
              for i in range(N_CLASSES)]
    precision = [counts[j, j] / col_sums[j] if col_sums[j] > 0 else None
                 for j in range(N_CLASSES)]
    return precision, recall, cm.accuracy


@dataclass(frozen=True)
class EvalConfig:
    n_folds: int = 10
    n_seeds: int = 10
    base_seed: int = 0
    subsample_fraction: float = 1.0  # fraction of samples drawn per seed

    def __post_init__(self) -> None:
        if not (0 < self.subsample_fraction <= 1.0):
            raise ValueError("subsample_fraction must be in (0, 1]")


@dataclass
class CellMetrics:
    seed: int
    fold: int
    model_kind: str
    n_test: int
    n_correct: int
    total_loss: float

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_test


@dataclass
class CrossValResult:
    model_kind: str
    cells: list[CellMetrics]
    confusion: ConfusionMatrix

    @property
    def total_loss(self) -> float:
        return sum(c.total_loss for c in self.cells)

    @property
    def average_loss(self) -> float:
        return self.total_loss / sum(c.n_test for c in self.cells)

    @property
    def accuracy(self) -> float:
        """Pooled accuracy over every held-out prediction."""
        return (sum(c.n_correct for c in self.cells)
                / sum(c.n_test for c in self.cells))


def _fit_predict(model_kind: str, x_train, y_train, x_test,
                 train_cfg: TrainConfig, tree_cfg: TreeConfig, seed: int,
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Train one model and return (predicted indices, probabilities)."""
    if model_kind in ("wide_deep", "glm"):
        cfg = TrainConfig(
            optimizer=train_cfg.optimizer,
            learning_rate=train_cfg.learning_rate,
            epochs=train_cfg.epochs,
            batch_size=train_cfg.batch_size,
            seed=seed,
            rmsprop_decay=train_cfg.rmsprop_decay,
            adam_beta1=train_cfg.adam_beta1,
            adam_beta2=train_cfg.adam_beta2,
            epsilon=train_cfg.epsilon,
            hidden_widths=train_cfg.hidden_widths,
            combine_trainable=train_cfg.combine_trainable)
        if model_kind == "glm":
            model = train_glm(x_train, y_train, cfg)
        else:
            model = train(x_train, y_train, cfg)
        probs = model.predict_proba(x_test)
        return np.argmax(probs, axis=1), probs
    cfg = TreeConfig(max_depth=tree_cfg.max_depth,
                     min_samples_leaf=tree_cfg.min_samples_leaf,
                     n_trees=tree_cfg.n_trees, bootstrap=tree_cfg.bootstrap,
                     m_features=tree_cfg.m_features, seed=seed)
    if model_kind == "tree":
        model = train_tree(x_train, y_train, cfg)
    elif model_kind == "bagging":
        model = train_bagging(x_train, y_train, cfg)
    elif model_kind == "random_forest":
        model = train_random_forest(x_train, y_train, cfg)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")
    return model.predict(x_test), model.predict_proba(x_test)


def cross_validate(vectors: Sequence[FeatureVector], model_kind: str,
                   eval_cfg: EvalConfig = EvalConfig(),
                   train_cfg: TrainConfig = TrainConfig(),
                   tree_cfg: TreeConfig = TreeConfig(),
                   include_network: bool = True) -> CrossValResult:
    """k-fold cross-validation repeated over several random seeds.

    For every seed x fold cell the scaler and the model are fitted on the
    train folds only and evaluated on the held-out fold; results are the
    per-cell metrics plus one confusion matrix pooled over all cells.
    """
    labeled = [v for v in vectors if v.label is not None]
    if not labeled:
        raise ValueError("cross_validate needs labeled feature vectors")
    labels = np.array([MODES.index(v.label) for v in labeled])
    n_keep = len(TRAJECTORY_FEATURES) + (3 if include_network else 0)
    raw = np.stack([v.raw for v in labeled])[:, :n_keep]

    cells: list[CellMetrics] = []
    confusion = ConfusionMatrix()
    for seed_off in range(eval_cfg.n_seeds):
        seed = eval_cfg.base_seed + seed_off
        if eval_cfg.subsample_fraction < 1.0:
            rng = np.random.default_rng(seed)
            m = max(eval_cfg.n_folds,
                    int(round(len(labels) * eval_cfg.subsample_fraction)))
            subset = np.sort(rng.choice(len(labels), size=m, replace=False))
        else:
            subset = np.arange(len(labels))
        plan = make_folds(len(subset), eval_cfg.n_folds, seed)
        for fold in range(eval_cfg.n_folds):
            test_idx = subset[plan.fold_indices(fold)]
            train_idx = subset[np.flatnonzero(plan.assignments != fold)]
            # scaler fitted on the train split only
            mins = raw[train_idx].min(axis=0)
            maxs = raw[train_idx].max(axis=0)
            span = np.where(maxs > mins, maxs - mins, 1.0)
            x_train = np.clip((raw[train_idx] - mins) / span, 0.0, 1.0)
            x_train[:, maxs == mins] = 0.0
            x_test = np.clip((raw[test_idx] - mins) / span, 0.0, 1.0)
            x_test[:, maxs == mins] = 0.0
            try:
                pred, probs = _fit_predict(
                    model_kind, x_train, labels[train_idx], x_test,
                    train_cfg, tree_cfg, seed)
            except TrainingError as exc:
                raise TrainingError(
                    f"seed {seed} fold {fold}: {exc}") from exc
            true = labels[test_idx]
            p_true = probs[np.arange(len(true)), true]
            cell_loss = float(-np.log(np.maximum(p_true, LOG_CLAMP)).sum())
            cells.append(CellMetrics(
                seed=seed, fold=fold, model_kind=model_kind,
                n_test=len(true), n_correct=int((pred == true).sum()),
                total_loss=cell_loss))
            confusion.add(true, pred)
    return CrossValResult(model_kind=model_kind, cells=cells,
                          confusion=confusion)
