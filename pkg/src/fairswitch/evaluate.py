"""Downstream link prediction and the accuracy/fairness/topology metrics.

The predictor is a one-layer graph autoencoder: embeddings are the
symmetric-normalized adjacency (with self-loops) times one-hot node features
times a weight matrix; a pair's score is the sigmoid of the embedding dot
product.  Training minimizes cross-entropy on observed edges against an
equal number of resampled non-edges per epoch, with hand-derived gradients.

Fairness gaps compare predicted-link rates between same-group and
cross-group node pairs (statistical parity), and the same restricted to
ground-truth links (equality of opportunity); both are reported as
percentages in [0, 100].
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PairSet:
    """Evaluation pairs (i, j, label), i != j, unordered and deduplicated."""

    pairs: np.ndarray
    labels: np.ndarray
    mode: str

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.pairs) != len(self.labels):
            raise ValueError("pairs and labels must have equal length")
        if len(self.pairs):
            if np.any(self.pairs[:, 0] == self.pairs[:, 1]):
                raise ValueError("pairs must join distinct nodes")
            lo = self.pairs.min(axis=1)
            hi = self.pairs.max(axis=1)
            keys = lo * (self.pairs.max() + 1) + hi
            if len(np.unique(keys)) != len(keys):
                raise ValueError("duplicate unordered pairs")

    def __len__(self):
        return len(self.pairs)


def full_universe(g):
    """All unordered node pairs, labeled by the graph's adjacency."""
    iu, ju = np.triu_indices(g.n_nodes, k=1)
    return PairSet(
        np.column_stack([iu, ju]),
        g.adjacency[iu, ju].astype(np.int64),
        mode="full-universe",
    )


def _sample_non_edges(g, n_wanted, rng, forbidden=None):
    """Uniform unordered non-edges of g, avoiding an optional forbidden set."""
    n = g.n_nodes
    available = n * (n - 1) // 2 - g.n_edges - (len(forbidden) if forbidden else 0)
    if n_wanted > available:
        raise ValueError("not enough non-edges to sample")
    chosen = set() if forbidden is None else set(forbidden)
    out = []
    while len(out) < n_wanted:
        u = int(rng.integers(n))
        v = int(rng.integers(n))
        if u == v:
            continue
        a, b = (u, v) if u < v else (v, u)
        if g.adjacency[a, b] or (a, b) in chosen:
            continue
        chosen.add((a, b))
        out.append((a, b))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def balanced_negative(g, positives, seed):
    """Positive pairs plus an equal number of sampled non-edges."""
    rng = np.random.default_rng(seed)
    negatives = _sample_non_edges(g, len(positives), rng)
    pairs = np.vstack([positives, negatives])
    labels = np.concatenate([np.ones(len(positives), dtype=np.int64), np.zeros(len(negatives), dtype=np.int64)])
    return PairSet(pairs, labels, mode="balanced-negative")


@dataclass
class EdgeSplit:
    """Train graph (kept edges only) plus validation/test pair sets with
    matched negatives."""

    train_graph: "Graph"
    val: PairSet
    test: PairSet


def split_edges(g, seed, fractions=(0.85, 0.05, 0.10)):
    """Random edge split; held-out sets get matched negative samples."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    edges = g.edge_list()
    if len(edges) == 0:
        raise ValueError("graph has no edges to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(edges))
    n_test = int(round(fractions[2] * len(edges)))
    n_val = int(round(fractions[1] * len(edges)))
    test_e = edges[order[:n_test]]
    val_e = edges[order[n_test : n_test + n_val]]
    train_e = edges[order[n_test + n_val :]]

    adjacency = np.zeros_like(g.adjacency)
    adjacency[train_e[:, 0], train_e[:, 1]] = 1
    adjacency |= adjacency.T
    from .graphs import Graph

    train_graph = Graph(adjacency, g.features.copy(), g.sensitive.copy(), n_classes=g.n_classes)

    forbidden = set()
    neg_test = _sample_non_edges(g, len(test_e), rng, forbidden)
    forbidden.update(map(tuple, neg_test))
    neg_val = _sample_non_edges(g, len(val_e), rng, forbidden)

    def pack(pos, neg):
        pairs = np.vstack([pos, neg]) if len(pos) else neg
        labels = np.concatenate([np.ones(len(pos), dtype=np.int64), np.zeros(len(neg), dtype=np.int64)])
        return PairSet(pairs, labels, mode="balanced-negative")

    return EdgeSplit(train_graph, pack(val_e, neg_val), pack(test_e, neg_test))


def _one_hot_features(g, include_sensitive):
    """Concatenated one-hot encoding of the categorical columns; the group
    channel is excluded by default so the predictor cannot read it directly."""
    blocks = []
    arity = g.feature_arity()
    for f in range(g.n_features):
        block = np.zeros((g.n_nodes, int(arity[f])))
        block[np.arange(g.n_nodes), g.features[:, f]] = 1.0
        blocks.append(block)
    if include_sensitive:
        block = np.zeros((g.n_nodes, g.n_classes))
        block[np.arange(g.n_nodes), g.sensitive] = 1.0
        blocks.append(block)
    if not blocks:
        blocks.append(np.ones((g.n_nodes, 1)))
    return np.hstack(blocks)


def _normalized_adjacency(g):
    a = g.adjacency.astype(np.float64) + np.eye(g.n_nodes)
    d = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class PredictorConfig:
    embed_dim: int = 16
    epochs: int = 200
    learning_rate: float = 1.0
    include_sensitive: bool = False

    def validate(self):
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.epochs < 1 or self.learning_rate <= 0:
            raise ValueError("epochs and learning rate must be positive")


@dataclass
class LinkPredictor:
    """One-layer graph autoencoder: Z = normalize(A) @ onehot(X) @ W."""

    weights: np.ndarray
    config: PredictorConfig

    def embed(self, g):
        h = _normalized_adjacency(g) @ _one_hot_features(g, self.config.include_sensitive)
        if h.shape[1] != self.weights.shape[0]:
            raise ValueError("graph feature encoding does not match trained weights")
        return h @ self.weights

    def scores(self, g, pairs):
        z = self.embed(g)
        return _sigmoid((z[pairs.pairs[:, 0]] * z[pairs.pairs[:, 1]]).sum(axis=1))


def train_link_predictor(train_graph, hyper=None, seed=0):
    """Fit the autoencoder on the graph's edges vs. per-epoch resampled
    non-edges; deterministic given the seed."""
    hyper = hyper or PredictorConfig()
    hyper.validate()
    edges = train_graph.edge_list()
    if len(edges) == 0:
        raise ValueError("training graph needs at least one edge")
    rng = np.random.default_rng(seed)
    h = _normalized_adjacency(train_graph) @ _one_hot_features(train_graph, hyper.include_sensitive)
    n, f_enc = h.shape
    w = rng.normal(scale=0.1, size=(f_enc, hyper.embed_dim))
    lr = hyper.learning_rate

    for _ in range(hyper.epochs):
        negatives = _sample_non_edges(train_graph, len(edges), rng)
        pairs = np.vstack([edges, negatives])
        y = np.concatenate([np.ones(len(edges)), np.zeros(len(negatives))])
        z = h @ w
        s = _sigmoid((z[pairs[:, 0]] * z[pairs[:, 1]]).sum(axis=1))
        loss = -np.mean(y * np.log(s + 1e-12) + (1 - y) * np.log(1 - s + 1e-12))
        if not np.isfinite(loss):
            raise RuntimeError("non-finite training loss: lower the learning rate")
        coef = (s - y) / len(pairs)
        c_sym = np.zeros((n, n))
        np.add.at(c_sym, (pairs[:, 0], pairs[:, 1]), coef)
        np.add.at(c_sym, (pairs[:, 1], pairs[:, 0]), coef)
        w -= lr * (h.T @ (c_sym @ z))
    return LinkPredictor(weights=w, config=hyper)


def auc(scores, labels):
    """Rank statistic: probability a positive outscores a negative, ties
    counting one half.  Average ranks make it exactly the pairwise count."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative label")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def fairness_metrics(predictions, pairs, sensitive, threshold=0.5):
    """Statistical-parity and equal-opportunity gaps, in percent.

    predictions may be raw scores (binarized at the threshold) or already
    binary.  The parity gap compares positive-prediction rates between
    same-group and cross-group pairs; the opportunity gap restricts to pairs
    whose ground-truth label is 1.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    if len(predictions) != len(pairs):
        raise ValueError("predictions must align with the pair set")
    pred = (predictions >= threshold).astype(np.float64)
    same = sensitive[pairs.pairs[:, 0]] == sensitive[pairs.pairs[:, 1]]

    def rate_gap(mask, context):
        a = mask & same
        b = mask & ~same
        if not a.any():
            raise ValueError(f"no same-group pairs {context}")
        if not b.any():
            raise ValueError(f"no cross-group pairs {context}")
        return abs(pred[a].mean() - pred[b].mean())

    delta_sp = rate_gap(np.ones(len(pairs), dtype=bool), "in the pair set")
    positive = pairs.labels == 1
    delta_eo = rate_gap(positive, "among ground-truth links")
    return 100.0 * delta_sp, 100.0 * delta_eo


def wasserstein1_empirical(a, b):
    """1-Wasserstein distance between two empirical distributions via the
    quantile-function integral (mean sorted gap when sizes match)."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("samples must be nonempty")
    if len(a) == len(b):
        return float(np.abs(a - b).mean())
    n, m = len(a), len(b)
    cuts = np.union1d(np.arange(1, n) / n, np.arange(1, m) / m)
    edges = np.concatenate([[0.0], cuts, [1.0]])
    widths = np.diff(edges)
    mids = (edges[:-1] + edges[1:]) / 2.0
    qa = a[np.minimum((mids * n).astype(np.int64), n - 1)]
    qb = b[np.minimum((mids * m).astype(np.int64), m - 1)]
    return float((np.abs(qa - qb) * widths).sum())


def pareto_frontier(points):
    """Indices of non-dominated points, both axes higher-is-better.

    A point is dominated when another is >= on both axes and > on at least
    one; duplicated points are all retained.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    keep = []
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))  # utility desc, fairness desc
    best_above = -np.inf
    i = 0
    while i < n:
        j = i
        while j + 1 < n and pts[order[j + 1], 0] == pts[order[i], 0]:
            j += 1
        group = order[i : j + 1]
        group_max = pts[group, 1].max()
        for idx in group:
            if pts[idx, 1] == group_max and pts[idx, 1] > best_above:
                keep.append(int(idx))
        best_above = max(best_above, group_max)
        i = j + 1
    return np.array(sorted(keep), dtype=np.int64)


@dataclass
class FairnessReport:
    """Metrics of one trained predictor evaluated against the reference."""

    auc: float
    delta_sp: float
    delta_eo: float
    entropy: float
    threshold: float

    def validate(self):
        for name in ("auc", "delta_sp", "delta_eo", "entropy"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite metric {name}")
        if not (0.0 <= self.delta_sp <= 100.0 and 0.0 <= self.delta_eo <= 100.0):
            raise ValueError("percentage metrics must lie in [0, 100]")
