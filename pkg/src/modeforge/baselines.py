"""Classical comparison models sharing the normalized-feature interface.

* standalone generalized linear model (multinomial logit), trained on the
  same code path as the joint model with the deep contribution pinned to 0
* CART-style decision tree with Gini impurity
* bagging ensemble and random forest built on that tree

Predictions of an ensemble are the majority vote over trees, with ties
broken by the lowest class index in the fixed class order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DimensionError, ModelFormatError
from .features import FeatureScaler
from .trips import MODES
from .widedeep import MODEL_FORMAT_VERSION, TrainConfig, WideDeepModel, train

N_CLASSES = len(MODES)


def train_glm(x: np.ndarray, labels: np.ndarray, cfg: TrainConfig,
              scaler: Optional[FeatureScaler] = None) -> WideDeepModel:
    """Multinomial logit via gradient descent on cross-entropy.

    Reuses the joint trainer with the deep component weight fixed at 0, so
    the GLM is by construction identical to a wide-and-deep model with
    w_deep = 0 and the same hyperparameters.
    """
    if np.atleast_2d(x).shape[1] < 1:
        raise DimensionError("GLM needs at least one feature")
    model = train(x, labels, cfg, scaler=scaler, combine_weights=(1.0, 0.0))
    model.metadata["kind"] = "glm"
    return model


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 12
    min_samples_leaf: int = 1
    n_trees: int = 100
    bootstrap: bool = True
    m_features: Optional[int] = None  # None = all; RF default ceil(sqrt(d))
    seed: int = 0


@dataclass
class TreeNode:
    counts: np.ndarray  # class counts of samples routed here
    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


def _best_split(x: np.ndarray, y: np.ndarray, feature_ids: np.ndarray,
                min_leaf: int) -> Optional[tuple[int, float, np.ndarray]]:
    """Best (feature, threshold, left_mask) by weighted Gini.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values; ties go to the lowest feature index, then lowest threshold.
    """
    n = len(y)
    onehot = np.zeros((n, N_CLASSES))
    onehot[np.arange(n), y] = 1.0
    best = None  # (score, feature, threshold)
    for f in feature_ids:
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        cum = np.cumsum(onehot[order], axis=0)  # cum[i] = counts of first i+1
        total = cum[-1]
        # split index i puts samples [0, i) left and [i, n) right
        i = np.arange(min_leaf, n - min_leaf + 1)
        if len(i) == 0:
            continue
        valid = xs[i] > xs[i - 1]
        i = i[valid]
        if len(i) == 0:
            continue
        left = cum[i - 1]
        right = total - left
        nl = i.astype(float)
        nr = n - nl
        gini_l = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
        score = (nl * gini_l + nr * gini_r) / n
        k = int(np.argmin(score))
        thr = (xs[i[k] - 1] + xs[i[k]]) / 2.0
        cand = (float(score[k]), int(f), float(thr))
        if best is None or cand[0] < best[0] - 1e-15:
            best = cand
    if best is None:
        return None
    _, f, thr = best
    return f, thr, x[:, f] <= thr


def _build_tree(x: np.ndarray, y: np.ndarray, depth: int, cfg: TreeConfig,
                rng: Optional[np.random.Generator]) -> TreeNode:
    counts = np.bincount(y, minlength=N_CLASSES).astype(float)
    node = TreeNode(counts=counts)
    if depth >= cfg.max_depth or _gini(counts) == 0.0 \
            or len(y) < 2 * cfg.min_samples_leaf:
        return node
    d = x.shape[1]
    if cfg.m_features is not None and rng is not None and cfg.m_features < d:
        feature_ids = np.sort(rng.choice(d, size=cfg.m_features, replace=False))
    else:
        feature_ids = np.arange(d)
    split = _best_split(x, y, feature_ids, cfg.min_samples_leaf)
    if split is None:
        return node
    f, thr, left_mask = split
    if left_mask.all() or not left_mask.any():
        return node
    node.feature = f
    node.threshold = thr
    node.left = _build_tree(x[left_mask], y[left_mask], depth + 1, cfg, rng)
    node.right = _build_tree(x[~left_mask], y[~left_mask], depth + 1, cfg, rng)
    return node


@dataclass
class DecisionTree:
    root: TreeNode
    scaler: Optional[FeatureScaler] = None
    class_order: tuple[str, ...] = MODES
    metadata: dict = field(default_factory=dict)

    def _leaf(self, row: np.ndarray) -> TreeNode:
        node = self.root
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        return node

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty((len(x), N_CLASSES))
        for i, row in enumerate(x):
            counts = self._leaf(row).counts
            out[i] = counts / counts.sum()
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)


def train_tree(x: np.ndarray, labels: np.ndarray, cfg: TreeConfig,
               scaler: Optional[FeatureScaler] = None,
               rng: Optional[np.random.Generator] = None) -> DecisionTree:
    """Greedy CART fit with Gini impurity on (normalized) features."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(labels, dtype=int)
    if len(y) == 0:
        raise ValueError("cannot train a tree on an empty set")
    root = _build_tree(x, y, 0, cfg, rng)
    return DecisionTree(root=root, scaler=scaler,
                        metadata={"max_depth": cfg.max_depth,
                                  "min_samples_leaf": cfg.min_samples_leaf})


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    scaler: Optional[FeatureScaler] = None
    class_order: tuple[str, ...] = MODES
    metadata: dict = field(default_factory=dict)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Majority vote; ties broken by lowest class index."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        votes = np.zeros((len(x), N_CLASSES), dtype=int)
        for tree in self.trees:
            pred = tree.predict(x)
            votes[np.arange(len(x)), pred] += 1
        return np.argmax(votes, axis=1)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Mean of per-tree leaf distributions (used for loss reporting)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        acc = np.zeros((len(x), N_CLASSES))
        for tree in self.trees:
            acc += tree.predict_proba(x)
        return acc / len(self.trees)


def _train_forest(x: np.ndarray, labels: np.ndarray, cfg: TreeConfig,
                  per_split_features: bool,
                  scaler: Optional[FeatureScaler]) -> ForestModel:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(labels, dtype=int)
    n, d = x.shape
    rng = np.random.default_rng(cfg.seed)
    trees = []
    for _ in range(cfg.n_trees):
        tree_rng = np.random.default_rng(rng.integers(0, 2**63))
        if cfg.bootstrap:
            idx = tree_rng.integers(0, n, size=n)
            xi, yi = x[idx], y[idx]
        else:
            xi, yi = x, y
        tree_cfg = cfg if per_split_features else TreeConfig(
            max_depth=cfg.max_depth, min_samples_leaf=cfg.min_samples_leaf,
            n_trees=cfg.n_trees, bootstrap=cfg.bootstrap,
            m_features=None, seed=cfg.seed)
        trees.append(train_tree(xi, yi, tree_cfg,
                                rng=tree_rng if per_split_features else None))
    return ForestModel(trees=trees, scaler=scaler,
                       metadata={"n_trees": cfg.n_trees,
                                 "bootstrap": cfg.bootstrap,
                                 "m_features": cfg.m_features
                                 if per_split_features else None,
                                 "seed": cfg.seed})


def train_bagging(x: np.ndarray, labels: np.ndarray, cfg: TreeConfig,
                  scaler: Optional[FeatureScaler] = None) -> ForestModel:
    """Bootstrap-aggregated trees on the full feature set."""
    return _train_forest(x, labels, cfg, per_split_features=False,
                         scaler=scaler)


def train_random_forest(x: np.ndarray, labels: np.ndarray, cfg: TreeConfig,
                        scaler: Optional[FeatureScaler] = None) -> ForestModel:
    """Bagging plus random feature subsets (default ceil(sqrt(d))) per split."""
    d = np.atleast_2d(x).shape[1]
    if cfg.m_features is None:
        cfg = TreeConfig(max_depth=cfg.max_depth,
                         min_samples_leaf=cfg.min_samples_leaf,
                         n_trees=cfg.n_trees, bootstrap=cfg.bootstrap,
                         m_features=int(np.ceil(np.sqrt(d))), seed=cfg.seed)
    return _train_forest(x, labels, cfg, per_split_features=True,
                         scaler=scaler)


# ---------------------------------------------------------------------------
# Serialization (same versioned-JSON scheme as the joint model, kind-tagged)


def _node_to_dict(node: TreeNode) -> dict:
    d = {"counts": node.counts.tolist()}
    if not node.is_leaf:
        d.update(feature=node.feature, threshold=node.threshold,
                 left=_node_to_dict(node.left),
                 right=_node_to_dict(node.right))
    return d


def _node_from_dict(d: dict) -> TreeNode:
    node = TreeNode(counts=np.array(d["counts"], dtype=float))
    if "feature" in d:
        node.feature = int(d["feature"])
        node.threshold = float(d["threshold"])
        node.left = _node_from_dict(d["left"])
        node.right = _node_from_dict(d["right"])
    return node


def save_forest(model: ForestModel | DecisionTree, path: str | Path) -> None:
    if isinstance(model, DecisionTree):
        kind, trees = "decision_tree", [model]
    else:
        kind, trees = "forest", model.trees
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": kind,
        "class_order": list(model.class_order),
        "trees": [_node_to_dict(t.root) for t in trees],
        "scaler": model.scaler.to_dict() if model.scaler else None,
        "metadata": model.metadata,
    }
    Path(path).write_text(json.dumps(doc))


def load_forest(path: str | Path) -> ForestModel | DecisionTree:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: cannot read model: {exc}") from exc
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version!r}")
    kind = doc.get("kind")
    if kind not in ("decision_tree", "forest"):
        raise ModelFormatError(f"not a tree model: kind={kind!r}")
    try:
        scaler = (FeatureScaler.from_dict(doc["scaler"])
                  if doc.get("scaler") else None)
        class_order = tuple(doc["class_order"])
        trees = [DecisionTree(root=_node_from_dict(t), class_order=class_order)
                 for t in doc["trees"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from exc
    if kind == "decision_tree":
        tree = trees[0]
        tree.scaler = scaler
        tree.metadata = doc.get("metadata", {})
        return tree
    return ForestModel(trees=trees, scaler=scaler, class_order=class_order,
                       metadata=doc.get("metadata", {}))
