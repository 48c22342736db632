"""Independent brute-force references for the fast kernels.

Deliberately simple and separately implemented: nothing here shares code
with the scan or MST fast paths, only the domain containers.  These routines
may be quadratic or worse; they exist to be trusted, not to be fast.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import WeightedGraph
from .mst import SpanningTree
from .scan import DiscreteScanParams, GradBundle


@dataclass
class FiniteDifferenceConfig:
    epsilon: float = 1e-5
    relative_tolerance: float = 1e-4
    scheme: str = field(default="central")

    def __post_init__(self):
        if self.epsilon <= 0 or self.relative_tolerance <= 0:
            raise ValueError("epsilon and relative_tolerance must be > 0")
        if self.scheme != "central":
            raise ValueError("only the central scheme is implemented")


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def kruskal_mst(graph: WeightedGraph) -> tuple[np.ndarray, np.ndarray]:
    """Sort-and-union minimum spanning tree with (weight, u, v) tie order.

    Returns ``(edges, weights)`` sorted by (u, v), matching the contraction
    algorithm's output exactly under the shared tie rule.
    """
    n = graph.num_vertices
    if n < 2:
        raise ValueError("need at least 2 vertices")
    order = np.lexsort((graph.edges[:, 1], graph.edges[:, 0], graph.weights))
    ds = _DisjointSet(n)
    keep = []
    for e in order:
        u, v = int(graph.edges[e, 0]), int(graph.edges[e, 1])
        if ds.union(u, v):
            keep.append(int(e))
            if len(keep) == n - 1:
                break
    if len(keep) != n - 1:
        root = ds.find(0)
        members = [v for v in range(n) if ds.find(v) == root]
        raise ValueError(
            f"graph is disconnected: component {members} cannot reach the rest"
        )
    keep_arr = np.array(sorted(keep), dtype=np.int64)
    edges = graph.edges[keep_arr]
    weights = graph.weights[keep_arr]
    out = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[out], weights[out]


def path_product(tree: SpanningTree, p: DiscreteScanParams, i: int, j: int) -> np.ndarray:
    """Per-lane product of transition scalars along the unique i-j tree path.

    Each tree edge is keyed by its child endpoint, so crossing the edge
    between v and parent(v) multiplies by a_bar[v].  Returns a (C, N) array;
    the empty path i == j gives all ones.
    """
    n = tree.num_vertices
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError("vertex index out of range")
    par = tree.parent
    depth = tree.depths
    keys: list[int] = []
    a, b = i, j
    while depth[a] > depth[b]:
        keys.append(a)
        a = int(par[a])
    while depth[b] > depth[a]:
        keys.append(b)
        b = int(par[b])
    while a != b:
        keys.append(a)
        keys.append(b)
        a = int(par[a])
        b = int(par[b])
    prod = np.ones(p.shape[1:], dtype=np.float64)
    for k in sorted(keys):  # canonical order makes the product direction-free
        prod = prod * p.a_bar[k]
    return prod


def finite_diff_gradients(
    forward,
    x: np.ndarray,
    a_bar: np.ndarray,
    b_bar: np.ndarray,
    weights: np.ndarray,
    cfg: FiniteDifferenceConfig | None = None,
) -> GradBundle:
    """Central-difference gradients of loss = sum(weights * forward(x, a_bar, b_bar)).

    ``forward`` must be a deterministic function of the three arrays returning
    hidden states shaped like ``weights``.  Every scalar coordinate of every
    input is perturbed by +/- epsilon in turn.
    """
    cfg = cfg or FiniteDifferenceConfig()
    eps = cfg.epsilon
    x = np.array(x, dtype=np.float64)
    a_bar = np.array(a_bar, dtype=np.float64)
    b_bar = np.array(b_bar, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)

    def loss() -> float:
        h = forward(x, a_bar, b_bar)
        val = float(np.sum(weights * h))
        if not np.isfinite(val):
            raise ValueError("loss is not finite")
        return val

    def sweep(arr: np.ndarray) -> np.ndarray:
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            hi = loss()
            flat[k] = orig - eps
            lo = loss()
            flat[k] = orig
            gflat[k] = (hi - lo) / (2.0 * eps)
        return grad

    return GradBundle(sweep(x), sweep(a_bar), sweep(b_bar))
