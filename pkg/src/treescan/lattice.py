"""Feature containers and input-adaptive neighborhood graphs.

A feature map holds L token (or pixel) embeddings of C channels each.  Graph
builders connect neighboring tokens and weigh every edge by the feature
dissimilarity of its endpoints, producing the connected weighted graph that
the spanning-tree stage prunes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRICS = ("cosine", "euclidean", "manhattan")

_FLOAT_DTYPES = (np.float32, np.float64)


def _as_float_matrix(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(np.float64)
    return np.ascontiguousarray(arr)


@dataclass
class FeatureMap:
    """L x C matrix of token features, optionally carrying a 2-D shape.

    When ``spatial=(H, W)`` is present, H*W must equal L and token i sits at
    grid position (i // W, i % W) in row-major order.
    """

    data: np.ndarray
    spatial: tuple[int, int] | None = None

    def __post_init__(self):
        self.data = _as_float_matrix(self.data)
        if self.data.ndim != 2:
            raise ValueError(f"feature data must be 2-D (L, C), got shape {self.data.shape}")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError(f"need L >= 1 and C >= 1, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature data contains NaN or Inf")
        if self.spatial is not None:
            h, w = self.spatial
            if h < 1 or w < 1:
                raise ValueError(f"spatial shape must be positive, got {self.spatial}")
            if h * w != self.data.shape[0]:
                raise ValueError(
                    f"spatial shape {self.spatial} implies {h * w} tokens, data has {self.data.shape[0]}"
                )
            self.spatial = (int(h), int(w))

    @property
    def num_tokens(self) -> int:
        return self.data.shape[0]

    @property
    def num_channels(self) -> int:
        return self.data.shape[1]


@dataclass
class WeightedGraph:
    """Undirected weighted graph over ``num_vertices`` vertices.

    Edges are stored canonically: endpoint arrays with u < v, no self-loops,
    no duplicates, all weights finite and nonnegative.
    """

    num_vertices: int
    edges: np.ndarray  # (E, 2) int64, each row (u, v) with u < v
    weights: np.ndarray  # (E,) float64

    def __post_init__(self):
        self.edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int64))
        self.weights = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if self.edges.ndim != 2 or self.edges.shape[1] != 2:
            raise ValueError(f"edges must be (E, 2), got {self.edges.shape}")
        if self.weights.shape != (self.edges.shape[0],):
            raise ValueError("weights length must match edge count")
        u, v = self.edges[:, 0], self.edges[:, 1]
        if self.edges.size and (u.min() < 0 or v.max() >= self.num_vertices):
            raise ValueError("edge endpoint out of range")
        if np.any(u >= v):
            raise ValueError("edges must satisfy u < v (canonical order, no self-loops)")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("edge weights must be finite and >= 0")
        keys = u * self.num_vertices + v
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate edges")

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]


def _check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")
    return metric


def _pairwise_dissimilarity(metric: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise distance between matching rows of two (K, C) matrices."""
    if metric == "euclidean":
        return np.sqrt(np.sum((a - b) ** 2, axis=1))
    if metric == "manhattan":
        return np.sum(np.abs(a - b), axis=1)
    # cosine: 1 - <a,b>/(|a||b|); a zero-norm endpoint counts as distance 1
    # (orthogonal-equivalent) so degenerate features never poison MST weights.
    na = np.sqrt(np.sum(a * a, axis=1))
    nb = np.sqrt(np.sum(b * b, axis=1))
    denom = na * nb
    dot = np.sum(a * b, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = 1.0 - dot / denom
    dist = np.where(denom > 0.0, dist, 1.0)
    # identical vectors are exactly at distance 0; rounding in dot/denom would
    # otherwise leave one-ulp residue
    equal = np.all(a == b, axis=1) & (denom > 0.0)
    return np.clip(np.where(equal, 0.0, dist), 0.0, 2.0)


def vertex_dissimilarity(metric: str, a, b) -> float:
    """Distance between two feature vectors under the chosen metric.

    Cosine results are clamped to [0, 2]; a zero-norm vector under the cosine
    metric is defined to be at distance 1 from everything.
    """
    _check_metric(metric)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"expected equal-length 1-D vectors, got shapes {a.shape} and {b.shape}")
    if a.size < 1:
        raise ValueError("vectors must have length >= 1")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("inputs contain NaN or Inf")
    return float(_pairwise_dissimilarity(metric, a[None, :], b[None, :])[0])


def build_grid_graph(feature: FeatureMap, metric: str = "cosine") -> WeightedGraph:
    """4-connected pixel graph of a spatial feature map.

    Every horizontally or vertically adjacent pixel pair gets one edge whose
    weight is the dissimilarity of the two pixel features; the result has
    H*(W-1) + W*(H-1) edges and is connected.  Edges are enumerated row-major,
    horizontal block first.
    """
    _check_metric(metric)
    if feature.spatial is None:
        raise ValueError("grid graph needs a feature map with a spatial shape")
    h, w = feature.spatial
    if h * w < 2:
        raise ValueError("single-pixel map has no edges")
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    edges = np.concatenate([horiz, vert], axis=0)
    x = feature.data.astype(np.float64, copy=False)
    weights = _pairwise_dissimilarity(metric, x[edges[:, 0]], x[edges[:, 1]])
    return WeightedGraph(h * w, edges, weights)


def build_causal_graph(feature: FeatureMap, m: int = 3, metric: str = "cosine") -> WeightedGraph:
    """Connect each token to its m predecessors, weighted by dissimilarity.

    Token i >= 1 gets edges (j, i) for j in [max(0, i-m), i); the edge to the
    immediate predecessor always exists, so the graph is connected.  Edges are
    listed in ascending (later-token, earlier-token) order.
    """
    _check_metric(metric)
    n = feature.num_tokens
    if n < 2:
        raise ValueError("need at least 2 tokens")
    if m < 1:
        raise ValueError("m must be >= 1")
    blocks = []
    for d in range(1, m + 1):
        if d >= n:
            break
        i = np.arange(d, n, dtype=np.int64)
        blocks.append(np.stack([i - d, i], axis=1))
    edges = np.concatenate(blocks, axis=0)
    order = np.lexsort((edges[:, 0], edges[:, 1]))
    edges = edges[order]
    x = feature.data.astype(np.float64, copy=False)
    weights = _pairwise_dissimilarity(metric, x[edges[:, 0]], x[edges[:, 1]])
    return WeightedGraph(n, edges, weights)
