"""Graph data model, stochastic-block-model sampling, file ingestion, and
basic structural statistics.

Graphs are undirected and loop-free: a symmetric 0/1 adjacency matrix, a
matrix of categorical feature codes, and one protected-group label per node.
"""

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class Graph:
    """Undirected attributed graph with categorical node data.

    adjacency : (N, N) symmetric uint8 matrix with zero diagonal.
    features  : (N, F) integer codes; column f takes values in [0, arity_f).
    sensitive : (N,) protected-group labels in [0, n_classes).
    """

    adjacency: np.ndarray
    features: np.ndarray
    sensitive: np.ndarray
    n_classes: int = 0

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.uint8)
        self.features = np.asarray(self.features, dtype=np.int64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(len(self.features), 0)
        self.sensitive = np.asarray(self.sensitive, dtype=np.int64)
        if self.n_classes <= 0:
            self.n_classes = int(self.sensitive.max()) + 1 if len(self.sensitive) else 1
        self.validate()

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def validate(self):
        n = self.adjacency.shape[0]
        if self.adjacency.shape != (n, n):
            raise ValueError("adjacency must be square")
        if not np.array_equal(self.adjacency, self.adjacency.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(self.adjacency) != 0):
            raise ValueError("adjacency diagonal must be zero")
        if len(self.sensitive) != n or self.features.shape[0] != n:
            raise ValueError("node attribute lengths do not match adjacency")
        if len(self.sensitive) and (
            self.sensitive.min() < 0 or self.sensitive.max() >= self.n_classes
        ):
            raise ValueError("sensitive labels out of range")

    def edge_list(self):
        """Edges as an (E, 2) array of node pairs with u < v."""
        iu, ju = np.triu_indices(self.n_nodes, k=1)
        mask = self.adjacency[iu, ju] == 1
        return np.column_stack([iu[mask], ju[mask]])

    @property
    def n_edges(self):
        return int(np.triu(self.adjacency, k=1).sum())

    def feature_arity(self):
        """Per-column class count, inferred as 1 + max code."""
        if self.n_features == 0:
            return np.zeros(0, dtype=np.int64)
        return self.features.max(axis=0) + 1

    def copy(self):
        return Graph(
            self.adjacency.copy(),
            self.features.copy(),
            self.sensitive.copy(),
            n_classes=self.n_classes,
        )


@dataclass
class DensityMatrix:
    """Class sizes and the realized edge density between each pair of groups.

    density[l, k] = edges between groups l and k, divided by the number of
    unordered node pairs between them: N_l * N_k for l != k and
    N_l * (N_l - 1) / 2 for l == k.  Groups with no possible pairs get 0.
    """

    counts_per_class: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        self.counts_per_class = np.asarray(self.counts_per_class, dtype=np.int64)
        self.density = np.asarray(self.density, dtype=np.float64)
        k = len(self.counts_per_class)
        if self.density.shape != (k, k):
            raise ValueError("density must be K x K")
        if not np.allclose(self.density, self.density.T):
            raise ValueError("density must be symmetric")
        if np.any(self.density < 0) or np.any(self.density > 1):
            raise ValueError("density entries must lie in [0, 1]")

    @property
    def n_classes(self):
        return len(self.counts_per_class)

    def possible_pairs(self):
        """Unordered node-pair counts per class pair (zero-safe)."""
        counts = self.counts_per_class.astype(np.float64)
        pairs = np.outer(counts, counts)
        np.fill_diagonal(pairs, counts * (counts - 1) / 2.0)
        return pairs


@dataclass
class EdgePartition:
    """Edge counts split by whether endpoints share the protected group."""

    n_interior: int
    n_exterior: int

    @property
    def total(self):
        return self.n_interior + self.n_exterior


def sbm_generate(counts_per_class, density, feature_spec, seed):
    """Sample a stochastic-block-model graph.

    Each unordered pair (i, j) carries an edge independently with probability
    density[s_i, s_j].  Feature columns are drawn from per-group categorical
    distributions derived from the seed, so features correlate with groups.
    """
    counts = np.asarray(counts_per_class, dtype=np.int64)
    density = np.asarray(density, dtype=np.float64)
    if counts.sum() <= 0:
        raise ValueError("total node count must be positive")
    if np.any(counts < 0):
        raise ValueError("class counts must be nonnegative")
    if np.any(density < 0) or np.any(density > 1):
        raise ValueError("density entries must lie in [0, 1]")
    k = len(counts)
    if density.shape != (k, k):
        raise ValueError("density must be K x K")

    rng = np.random.default_rng(seed)
    n = int(counts.sum())
    sensitive = np.repeat(np.arange(k), counts)

    adjacency = np.zeros((n, n), dtype=np.uint8)
    iu, ju = np.triu_indices(n, k=1)
    probs = density[sensitive[iu], sensitive[ju]]
    edges = rng.random(len(iu)) < probs
    adjacency[iu[edges], ju[edges]] = 1
    adjacency |= adjacency.T

    arities = list(feature_spec)
    features = np.zeros((n, len(arities)), dtype=np.int64)
    for f, arity in enumerate(arities):
        if arity < 1:
            raise ValueError("feature class counts must be >= 1")
        class_dists = rng.dirichlet(np.ones(arity), size=k)
        for cls in range(k):
            members = np.flatnonzero(sensitive == cls)
            features[members, f] = rng.choice(arity, size=len(members), p=class_dists[cls])

    return Graph(adjacency, features, sensitive, n_classes=k)


def edge_density_matrix(g, n_classes=None):
    """Realized between-group edge densities of a graph."""
    k = n_classes or g.n_classes
    counts = np.bincount(g.sensitive, minlength=k)
    edges = g.edge_list()
    realized = np.zeros((k, k))
    if len(edges):
        su, sv = g.sensitive[edges[:, 0]], g.sensitive[edges[:, 1]]
        np.add.at(realized, (su, sv), 1.0)
        np.add.at(realized, (sv, su), 1.0)
        np.fill_diagonal(realized, np.diag(realized) / 2.0)
    fcounts = counts.astype(np.float64)
    possible = np.outer(fcounts, fcounts)
    np.fill_diagonal(possible, fcounts * (fcounts - 1) / 2.0)
    density = np.where(possible > 0, realized / np.maximum(possible, 1.0), 0.0)
    return DensityMatrix(counts, density)


def partition_edges(g):
    """Count edges inside vs. across protected groups."""
    edges = g.edge_list()
    if len(edges) == 0:
        return EdgePartition(0, 0)
    same = g.sensitive[edges[:, 0]] == g.sensitive[edges[:, 1]]
    return EdgePartition(int(same.sum()), int((~same).sum()))


def clustering_coefficients(g):
    """Local clustering coefficient per node; degree < 2 yields 0."""
    a = g.adjacency.astype(np.float64)
    deg = a.sum(axis=1)
    triangles = np.einsum("ij,jk,ki->i", a, a, a) / 2.0
    wedges = deg * (deg - 1) / 2.0
    out = np.zeros(g.n_nodes)
    mask = deg >= 2
    out[mask] = triangles[mask] / wedges[mask]
    return out


def degrees(g):
    return g.adjacency.sum(axis=1).astype(np.float64)


def load_graph(edge_path, attr_path):
    """Load a graph from an edge TSV (`u<TAB>v` per line, 0-based ids) and an
    attribute CSV with header ``node_id,sensitive,f0,...,f{F-1}``.

    Edges are symmetrized; duplicate edges and self-loops are dropped with a
    logged count.  The group count is inferred as 1 + max label.
    """
    with open(attr_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "node_id" or header[1] != "sensitive":
            raise ValueError(f"{attr_path}: expected header node_id,sensitive,f0,...")
        n_feat = len(header) - 2
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != n_feat + 2:
                raise ValueError(f"{attr_path}:{lineno}: expected {n_feat + 2} fields")
            try:
                values = [int(x) for x in row]
            except ValueError as exc:
                raise ValueError(f"{attr_path}:{lineno}: non-integer code") from exc
            rows[values[0]] = values[1:]
    n = len(rows)
    if n == 0:
        raise ValueError(f"{attr_path}: no nodes")
    if sorted(rows) != list(range(n)):
        raise ValueError(f"{attr_path}: node ids must be 0..N-1 without gaps")
    table = np.array([rows[i] for i in range(n)], dtype=np.int64)
    sensitive = table[:, 0]
    features = table[:, 1:]
    if sensitive.min() < 0 or features.size and features.min() < 0:
        raise ValueError(f"{attr_path}: negative codes are not allowed")

    adjacency = np.zeros((n, n), dtype=np.uint8)
    n_self = 0
    n_dup = 0
    with open(edge_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{edge_path}:{lineno}: expected two node ids")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValueError(f"{edge_path}:{lineno}: non-integer node id") from exc
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"{edge_path}:{lineno}: node id outside attribute file")
            if u == v:
                n_self += 1
                continue
            if adjacency[u, v]:
                n_dup += 1
                continue
            adjacency[u, v] = 1
            adjacency[v, u] = 1
    if n_self or n_dup:
        logger.info(
            "dropped %d self-loops and %d duplicate edges from %s", n_self, n_dup, edge_path
        )
    return Graph(adjacency, features, sensitive)


def graph_to_json(g):
    """JSON-serializable bundle {n_nodes, edges, sensitive, features}."""
    return {
        "n_nodes": g.n_nodes,
        "n_classes": g.n_classes,
        "edges": [[int(u), int(v)] for u, v in g.edge_list()],
        "sensitive": g.sensitive.tolist(),
        "features": g.features.tolist(),
    }


def graph_from_json(doc):
    n = int(doc["n_nodes"])
    adjacency = np.zeros((n, n), dtype=np.uint8)
    for u, v in doc["edges"]:
        adjacency[u, v] = 1
        adjacency[v, u] = 1
    features = np.asarray(doc["features"], dtype=np.int64)
    if features.size == 0:
        features = features.reshape(n, 0)
    return Graph(
        adjacency,
        features,
        np.asarray(doc["sensitive"], dtype=np.int64),
        n_classes=int(doc.get("n_classes", 0)),
    )


def save_graph(g, path):
    with open(path, "w") as fh:
        json.dump(graph_to_json(g), fh, sort_keys=True, separators=(",", ":"))


def load_graph_json(path):
    with open(path) as fh:
        return graph_from_json(json.load(fh))
