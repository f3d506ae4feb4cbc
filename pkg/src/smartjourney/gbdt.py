"""Gradient-boosted regression trees with exact greedy split search.

Additive CART training under squared error (gradient = prediction - target,
hessian = 1): per node, the best (feature, threshold) maximizes the
second-order gain with an L2 leaf penalty; leaves score -G / (H + lambda).
Shrinkage is applied at prediction time: base_score + eta * sum of tree
scores. Tabular inputs are flattened feature windows plus two calendar
features (hour of day, day of week of the target hour).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataset import WindowedSample


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (weight)."""

    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.weight}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeNode":
        if "leaf" in data:
            return cls(weight=float(data["leaf"]))
        return cls(
            feature=int(data["feature"]),
            threshold=float(data["threshold"]),
            left=cls.from_dict(data["left"]),
            right=cls.from_dict(data["right"]),
        )


@dataclass
class BoostingConfig:
    max_depth: int = 5
    min_child_weight: float = 4.0
    eta: float = 0.05
    subsample: float = 0.7
    num_rounds: int = 500
    early_stop_rounds: int = 15
    leaf_l2: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.subsample <= 1.0):
            raise ValueError("subsample must be in (0, 1]")
        if self.num_rounds < 1:
            raise ValueError("num_rounds must be >= 1")


@dataclass
class GbdtEnsemble:
    trees: list[TreeNode] = field(default_factory=list)
    eta: float = 0.05
    base_score: float = 0.0
    n_features: int = 0

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "base_score": self.base_score,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GbdtEnsemble":
        return cls(
            trees=[TreeNode.from_dict(t) for t in data["trees"]],
            eta=float(data["eta"]),
            base_score=float(data["base_score"]),
            n_features=int(data["n_features"]),
        )


def tree_score(node: TreeNode, x: np.ndarray) -> float:
    """Leaf weight the tree routes a single feature vector to."""
    while not node.is_leaf:
        node = node.left if x[node.feature] < node.threshold else node.right
    return node.weight


def tree_score_batch(node: TreeNode, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0])
    _score_into(node, x, np.arange(x.shape[0]), out)
    return out


def _score_into(node: TreeNode, x: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if node.is_leaf:
        out[idx] = node.weight
        return
    goes_left = x[idx, node.feature] < node.threshold
    _score_into(node.left, x, idx[goes_left], out)
    _score_into(node.right, x, idx[~goes_left], out)


def ensemble_predict(x: np.ndarray, model: GbdtEnsemble) -> float:
    """base_score + eta * sum of per-tree scores for one sample."""
    if model.n_features and x.shape[-1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {x.shape[-1]}")
    return model.base_score + model.eta * sum(tree_score(t, x) for t in model.trees)


def ensemble_predict_batch(x: np.ndarray, model: GbdtEnsemble) -> np.ndarray:
    if model.n_features and x.shape[-1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {x.shape[-1]}")
    preds = np.full(x.shape[0], model.base_score, dtype=np.float64)
    for tree in model.trees:
        preds += model.eta * tree_score_batch(tree, x)
    return preds


def _best_split(
    x: np.ndarray, g: np.ndarray, h: np.ndarray, idx: np.ndarray, config: BoostingConfig
) -> tuple[float, int, float]:
    """(gain, feature, threshold) of the best valid split; gain -inf when none.

    Thresholds are midpoints between consecutive distinct sorted values.
    Ties break to the lower feature index, then the lower threshold.
    """
    lam = config.leaf_l2
    g_total = g[idx].sum()
    h_total = h[idx].sum()
    parent_term = (g_total * g_total) / (h_total + lam)

    best_gain = -math.inf
    best_feature = -1
    best_threshold = 0.0
    for feature in range(x.shape[1]):
        vals = x[idx, feature]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sg = np.cumsum(g[idx][order])[:-1]
        sh = np.cumsum(h[idx][order])[:-1]
        thresholds = (sv[:-1] + sv[1:]) / 2.0
        valid = (sv[:-1] < thresholds) & (thresholds <= sv[1:])
        valid &= (sh >= config.min_child_weight) & ((h_total - sh) >= config.min_child_weight)
        if not valid.any():
            continue
        gr = g_total - sg
        hr = h_total - sh
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = 0.5 * (sg * sg / (sh + lam) + gr * gr / (hr + lam) - parent_term)
        gains = np.where(valid, gains, -math.inf)
        pos = int(np.argmax(gains))  # first max -> lowest threshold
        # recompute the winner's gain canonically (direct subset sums in
        # ascending sample order): the same bipartition reachable through two
        # features must yield bitwise-equal gains so ties break to the lower
        # feature index, independent of prefix-sum rounding
        threshold = float(thresholds[pos])
        goes_left = vals < threshold
        gl, hl = g[idx][goes_left].sum(), h[idx][goes_left].sum()
        grr, hrr = g[idx][~goes_left].sum(), h[idx][~goes_left].sum()
        gain = 0.5 * (gl * gl / (hl + lam) + grr * grr / (hrr + lam) - parent_term)
        if gain > best_gain:
            best_gain = float(gain)
            best_feature = feature
            best_threshold = threshold
    return best_gain, best_feature, best_threshold


def _leaf(g: np.ndarray, h: np.ndarray, idx: np.ndarray, lam: float) -> TreeNode:
    return TreeNode(weight=float(-g[idx].sum() / (h[idx].sum() + lam)))


def _build_node(
    x: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    idx: np.ndarray,
    depth: int,
    config: BoostingConfig,
) -> TreeNode:
    if depth >= config.max_depth or idx.size < 2:
        return _leaf(g, h, idx, config.leaf_l2)
    gain, feature, threshold = _best_split(x, g, h, idx, config)
    if gain <= 0.0:
        return _leaf(g, h, idx, config.leaf_l2)
    goes_left = x[idx, feature] < threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_build_node(x, g, h, idx[goes_left], depth + 1, config),
        right=_build_node(x, g, h, idx[~goes_left], depth + 1, config),
    )


def build_tree(x: np.ndarray, g: np.ndarray, h: np.ndarray, config: BoostingConfig) -> TreeNode:
    """Exact greedy CART on gradients/hessians aligned with the sample rows."""
    if x.shape[0] == 0:
        raise ValueError("cannot build a tree on an empty sample set")
    return _build_node(x, g, h, np.arange(x.shape[0]), 0, config)


@dataclass
class BoostingResult:
    ensemble: GbdtEnsemble
    val_rmse_trace: list[float]
    best_round: int  # 0-based round whose prefix the ensemble keeps


def train_boosting(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    config: BoostingConfig,
    seed: int = 0,
) -> BoostingResult:
    """Additive boosting with seeded row subsampling and round-based early stop.

    Gradients are computed on the full training predictions each round; the
    tree is fitted on the subsampled rows. Stops when validation RMSE has
    not improved for early_stop_rounds consecutive rounds, keeping the
    best-round prefix.
    """
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("training and validation splits must be non-empty")
    rng = np.random.default_rng(seed)
    n = x_train.shape[0]
    base = float(y_train.mean())
    model = GbdtEnsemble(eta=config.eta, base_score=base, n_features=x_train.shape[1])

    pred_train = np.full(n, base)
    pred_val = np.full(x_val.shape[0], base)
    trace: list[float] = []
    best_rmse = math.inf
    best_round = -1

    for round_idx in range(config.num_rounds):
        if config.subsample < 1.0:
            k = int(math.ceil(config.subsample * n))
            rows = np.sort(rng.choice(n, size=k, replace=False))
        else:
            rows = np.arange(n)
        g = pred_train - y_train
        h = np.ones(n)
        tree = build_tree(x_train[rows], g[rows], h[rows], config)
        model.trees.append(tree)
        pred_train += config.eta * tree_score_batch(tree, x_train)
        pred_val += config.eta * tree_score_batch(tree, x_val)

        rmse = float(np.sqrt(np.mean((pred_val - y_val) ** 2)))
        trace.append(rmse)
        if rmse < best_rmse:
            best_rmse = rmse
            best_round = round_idx
        elif round_idx - best_round >= config.early_stop_rounds:
            break

    model.trees = model.trees[: best_round + 1]
    return BoostingResult(ensemble=model, val_rmse_trace=trace, best_round=best_round)


def featurize_sample(sample: WindowedSample) -> np.ndarray:
    """Flattened window plus hour-of-day and day-of-week of the target hour."""
    calendar = np.array(
        [sample.target_timestamp.hour, sample.target_timestamp.weekday()], dtype=np.float64
    )
    return np.concatenate([sample.inputs.reshape(-1), calendar])


def featurize_samples(samples: list[WindowedSample]) -> tuple[np.ndarray, np.ndarray]:
    if not samples:
        return np.zeros((0, 0)), np.zeros(0)
    x = np.stack([featurize_sample(s) for s in samples])
    y = np.array([s.target for s in samples], dtype=np.float64)
    return x, y
