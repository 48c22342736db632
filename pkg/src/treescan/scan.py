"""State-space scan kernels on sequences and trees.

Everything here operates on per-lane scalars: a lane is one (channel, state)
coordinate pair, carried as the trailing two axes of (L, C, N) arrays.  The
transition scalar of vertex i, ``a_bar[i]``, is attached to the tree edge
between i and its parent under the rooting of the tree that is passed in;
path weights are products of these child-keyed scalars.

The tree scan computes, for every vertex i, the aggregation over all vertices
j of (path weight from j to i) * b_bar[j] * x[j].  Done directly that costs
O(L^2); the two-pass dynamic program below does it in O(L): a leaf-to-root
pass accumulates subtree sums (xi), then a root-to-leaf pass combines each
subtree sum with the complement flowing down from the parent.  The backward
pass has the same structure run on the output gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import FeatureMap
from .mst import SpanningTree

NAIVE_SCAN_GUARD = 4096


@dataclass
class ContinuousScanParams:
    """Continuous-time parameters before discretization.

    Shapes: a (C, N) state matrix, b (L, N) per-token input matrix, c_out
    (L, N) per-token output matrix, d (C,) feedthrough, delta (L, C) positive
    sampling time-scales.
    """

    a: np.ndarray
    b: np.ndarray
    c_out: np.ndarray
    d: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c_out = np.asarray(self.c_out, dtype=np.float64)
        self.d = np.asarray(self.d, dtype=np.float64)
        self.delta = np.asarray(self.delta, dtype=np.float64)
        if self.a.ndim != 2:
            raise ValueError("a must be (C, N)")
        c, n = self.a.shape
        if self.delta.ndim != 2 or self.delta.shape[1] != c:
            raise ValueError("delta must be (L, C) with C matching a")
        length = self.delta.shape[0]
        if self.b.shape != (length, n):
            raise ValueError(f"b must be (L, N) = ({length}, {n}), got {self.b.shape}")
        if self.c_out.shape != (length, n):
            raise ValueError(f"c_out must be (L, N) = ({length}, {n}), got {self.c_out.shape}")
        if self.d.shape != (c,):
            raise ValueError(f"d must be (C,) = ({c},), got {self.d.shape}")
        for name, arr in (("a", self.a), ("b", self.b), ("c_out", self.c_out),
                          ("d", self.d), ("delta", self.delta)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains NaN or Inf")
        if np.any(self.delta <= 0):
            raise ValueError("delta entries must be > 0")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.delta.shape[0], self.a.shape[0], self.a.shape[1])


@dataclass
class DiscreteScanParams:
    """Per-token transition and input scalars, shape (L, C, N) each."""

    a_bar: np.ndarray
    b_bar: np.ndarray

    def __post_init__(self):
        self.a_bar = np.asarray(self.a_bar)
        self.b_bar = np.asarray(self.b_bar)
        if self.a_bar.ndim != 3 or self.a_bar.shape != self.b_bar.shape:
            raise ValueError("a_bar and b_bar must both be (L, C, N)")
        if not (np.all(np.isfinite(self.a_bar)) and np.all(np.isfinite(self.b_bar))):
            raise ValueError("discrete parameters contain NaN or Inf")
        if np.any(self.a_bar <= 0):
            raise ValueError("a_bar entries must be strictly positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.a_bar.shape


@dataclass
class GradBundle:
    """Gradients of a scalar loss: d_x (L, C), d_a_bar and d_b_bar (L, C, N)."""

    d_x: np.ndarray
    d_a_bar: np.ndarray
    d_b_bar: np.ndarray


def discretize(params: ContinuousScanParams) -> DiscreteScanParams:
    """Zero-order-hold transition with first-order-Taylor input scalars.

    a_bar[i,c,n] = exp(delta[i,c] * a[c,n]) and b_bar[i,c,n] = delta[i,c] *
    b[i,n]; the output matrix and feedthrough pass through unchanged (they
    stay on ``params``).
    """
    a_bar = np.exp(params.delta[:, :, None] * params.a[None, :, :])
    b_bar = params.delta[:, :, None] * params.b[:, None, :]
    return DiscreteScanParams(a_bar, b_bar)


def _check_instance(x: FeatureMap, p: DiscreteScanParams, tree: SpanningTree | None = None) -> None:
    length, channels, _ = p.shape
    if x.data.shape != (length, channels):
        raise ValueError(
            f"feature map shape {x.data.shape} does not match params (L, C) = ({length}, {channels})"
        )
    if tree is not None and tree.num_vertices != length:
        raise ValueError(f"tree has {tree.num_vertices} vertices, params expect {length}")


def sequential_selective_scan(x: FeatureMap, p: DiscreteScanParams) -> np.ndarray:
    """Plain chain recurrence h[i] = a_bar[i] * h[i-1] + b_bar[i] * x[i].

    The state prior is zero, so h[0] = b_bar[0] * x[0] and a_bar[0] is never
    used.  Returns hidden states of shape (L, C, N).
    """
    _check_instance(x, p)
    u = p.b_bar * x.data[:, :, None]
    h = np.empty_like(u)
    h[0] = u[0]
    for i in range(1, u.shape[0]):
        h[i] = p.a_bar[i] * h[i - 1] + u[i]
    return h


def _aggregate_up(tree: SpanningTree, unit: np.ndarray, a_bar: np.ndarray) -> np.ndarray:
    """Leaf-to-root pass: out[i] = unit[i] + sum over children j of out[j]*a_bar[j]."""
    out = unit.copy()
    for lv in reversed(tree.levels[1:]):
        np.add.at(out, tree.parent[lv], out[lv] * a_bar[lv])
    return out


def _propagate_down(tree: SpanningTree, agg: np.ndarray, a_bar: np.ndarray) -> np.ndarray:
    """Root-to-leaf pass: out[root] = agg[root]; out[i] = (1 - a^2)*agg[i] + a*out[parent]."""
    out = np.empty_like(agg)
    out[tree.root] = agg[tree.root]
    for lv in tree.levels[1:]:
        a = a_bar[lv]
        out[lv] = (1.0 - a * a) * agg[lv] + a * out[tree.parent[lv]]
    return out


def tree_scan_vision_forward(
    x: FeatureMap, p: DiscreteScanParams, tree: SpanningTree
) -> tuple[np.ndarray, np.ndarray]:
    """All-roots tree aggregation in two traversals.

    Pass 1 (leaf to root) builds xi[i], the aggregation over i's subtree;
    pass 2 (root to leaf) turns it into h[i], the aggregation over every
    vertex, via h[i] = (1 - a_bar[i]^2) * xi[i] + a_bar[i] * h[parent].
    Returns ``(h, xi)``, both (L, C, N); the backward pass consumes xi.
    """
    _check_instance(x, p, tree)
    unit = p.b_bar * x.data[:, :, None]
    xi = _aggregate_up(tree, unit, p.a_bar)
    h = _propagate_down(tree, xi, p.a_bar)
    return h, xi


def tree_scan_vision_backward(
    x: FeatureMap,
    p: DiscreteScanParams,
    tree: SpanningTree,
    xi: np.ndarray,
    h: np.ndarray,
    d_h: np.ndarray,
) -> GradBundle:
    """Analytic gradients of the all-roots tree scan.

    Runs the same two traversals on the output gradients: eta aggregates d_h
    leaf-to-root, rho propagates it back down; then per lane

        d_x[i]     = sum_n b_bar[i] * rho[i]
        d_b_bar[i] = x[i] * rho[i]
        d_a_bar[i] = eta[i] * h[parent] + xi[i] * rho[parent]
                     - 2 * a_bar[i] * eta[i] * xi[i]      (0 at the root)

    ``xi`` and ``h`` must come from the matching forward call; that pairing
    is the caller's contract and cannot be checked here.
    """
    _check_instance(x, p, tree)
    d_h = np.asarray(d_h)
    if d_h.shape != p.shape:
        raise ValueError(f"d_h shape {d_h.shape} does not match params shape {p.shape}")
    if xi.shape != p.shape or h.shape != p.shape:
        raise ValueError("xi/h shapes do not match params shape")

    eta = _aggregate_up(tree, d_h, p.a_bar)
    rho = _propagate_down(tree, eta, p.a_bar)

    d_x = np.sum(p.b_bar * rho, axis=2)
    d_b_bar = x.data[:, :, None] * rho
    d_a_bar = np.zeros_like(p.a_bar)
    nonroot = np.flatnonzero(np.arange(tree.num_vertices) != tree.root)
    par = tree.parent[nonroot]
    d_a_bar[nonroot] = (
        eta[nonroot] * h[par]
        + xi[nonroot] * rho[par]
        - 2.0 * p.a_bar[nonroot] * eta[nonroot] * xi[nonroot]
    )
    return GradBundle(d_x, d_a_bar, d_b_bar)


def tree_scan_language_forward(
    x: FeatureMap, p: DiscreteScanParams, tree: SpanningTree
) -> np.ndarray:
    """Causal tree aggregation: one leaf-to-root pass, root fixed at the last token.

    h[i] = xi[i] = b_bar[i]*x[i] + sum over children j of xi[j]*a_bar[j], so
    each token only sees its own subtree.  Raises unless tree.root == L - 1.
    """
    _check_instance(x, p, tree)
    if tree.root != tree.num_vertices - 1:
        raise ValueError(
            f"causal scan requires the tree to be rooted at the last token "
            f"{tree.num_vertices - 1}, got root {tree.root}"
        )
    unit = p.b_bar * x.data[:, :, None]
    return _aggregate_up(tree, unit, p.a_bar)


def tree_scan_language_backward(
    x: FeatureMap,
    p: DiscreteScanParams,
    tree: SpanningTree,
    h: np.ndarray,
    d_h: np.ndarray,
) -> GradBundle:
    """Gradients of the causal tree aggregation, one root-to-leaf pass.

    rho[i] = d_h[i] + a_bar[i] * rho[parent] accumulates how the loss sees
    xi[i]; then d_x[i] = sum_n b_bar[i]*rho[i], d_b_bar[i] = x[i]*rho[i], and
    d_a_bar[i] = rho[parent] * h[i] (zero at the root, whose transition is
    unused).
    """
    _check_instance(x, p, tree)
    if tree.root != tree.num_vertices - 1:
        raise ValueError(
            f"causal scan requires the tree to be rooted at the last token "
            f"{tree.num_vertices - 1}, got root {tree.root}"
        )
    d_h = np.asarray(d_h)
    if d_h.shape != p.shape or h.shape != p.shape:
        raise ValueError("h/d_h shapes do not match params shape")

    rho = d_h.copy()
    for lv in tree.levels[1:]:
        rho[lv] = d_h[lv] + p.a_bar[lv] * rho[tree.parent[lv]]

    d_x = np.sum(p.b_bar * rho, axis=2)
    d_b_bar = x.data[:, :, None] * rho
    d_a_bar = np.zeros_like(p.a_bar)
    nonroot = np.flatnonzero(np.arange(tree.num_vertices) != tree.root)
    d_a_bar[nonroot] = rho[tree.parent[nonroot]] * h[nonroot]
    return GradBundle(d_x, d_a_bar, d_b_bar)


def _edge_key_adjacency(tree: SpanningTree) -> list[list[tuple[int, int]]]:
    """Undirected adjacency with each edge tagged by the vertex that keys it."""
    n = tree.num_vertices
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for v in range(n):
        u = int(tree.parent[v])
        if u != v:
            adj[v].append((u, v))  # edge (v, parent) keyed by child v
            adj[u].append((v, v))
    return adj


def naive_tree_scan(
    x: FeatureMap,
    p: DiscreteScanParams,
    tree: SpanningTree,
    roots: str = "all",
    force: bool = False,
) -> np.ndarray:
    """Direct quadratic evaluation of the tree aggregation; the reference
    the fast kernels are checked against.

    For each requested root i it walks the tree accumulating path-weight
    products and sums weight * b_bar[j] * x[j] over all j.  ``roots="all"``
    returns (L, C, N); ``roots="single"`` evaluates only the tree root and
    returns (C, N).  Refuses L > 4096 unless ``force=True``.
    """
    _check_instance(x, p, tree)
    if roots not in ("all", "single"):
        raise ValueError("roots must be 'all' or 'single'")
    n = tree.num_vertices
    if n > NAIVE_SCAN_GUARD and not force:
        raise ValueError(
            f"naive scan is O(L^2); refusing L = {n} > {NAIVE_SCAN_GUARD} without force=True"
        )
    unit = p.b_bar * x.data[:, :, None]
    adj = _edge_key_adjacency(tree)
    targets = range(n) if roots == "all" else [tree.root]
    out = np.empty((len(targets),) + unit.shape[1:], dtype=unit.dtype)
    prod = np.empty_like(unit)
    for row, i in enumerate(targets):
        seen = np.zeros(n, dtype=bool)
        seen[i] = True
        prod[i] = 1.0
        stack = [i]
        while stack:
            v = stack.pop()
            for nb, key in adj[v]:
                if not seen[nb]:
                    seen[nb] = True
                    prod[nb] = prod[v] * p.a_bar[key]
                    stack.append(nb)
        out[row] = np.einsum("lcn,lcn->cn", prod, unit)
    return out if roots == "all" else out[0]


def _rms_normalize(h: np.ndarray) -> np.ndarray:
    """Per-token RMS over the flattened (C, N) entries; zero stays zero."""
    length = h.shape[0]
    flat = h.reshape(length, -1)
    rms = np.sqrt(np.mean(flat * flat, axis=1))
    safe = np.where(rms > 0.0, rms, 1.0)
    scale = np.where(rms > 0.0, 1.0 / safe, 0.0)
    return h * scale[:, None, None]


def output_projection(
    h: np.ndarray, p: ContinuousScanParams, x: FeatureMap, norm: str = "rms"
) -> FeatureMap:
    """Project hidden states to output features.

    y[i,c] = sum_n c_out[i,n] * norm(h)[i,c,n] + d[c] * x[i,c], where norm is
    per-token RMS normalization over all C*N hidden entries ("rms") or a
    pass-through ("identity", for testing).
    """
    if x.data.shape != p.shape[:2]:
        raise ValueError(
            f"feature map shape {x.data.shape} does not match params (L, C) = {p.shape[:2]}"
        )
    if h.shape != p.shape:
        raise ValueError(f"hidden states shape {h.shape} inconsistent with params {p.shape}")
    if norm == "rms":
        hn = _rms_normalize(h)
    elif norm == "identity":
        hn = h
    else:
        raise ValueError("norm must be 'rms' or 'identity'")
    y = np.einsum("ln,lcn->lc", p.c_out, hn) + p.d[None, :] * x.data
    return FeatureMap(y, spatial=x.spatial)


def output_projection_backward(
    h: np.ndarray,
    p: ContinuousScanParams,
    x: FeatureMap,
    d_y: np.ndarray,
    norm: str = "rms",
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Local derivatives of ``output_projection``.

    Returns ``(d_h, d_c_out, d_d, d_x)`` for an upstream gradient d_y of
    shape (L, C).  The RMS branch backpropagates through the per-token
    normalization; tokens with all-zero hidden state get zero gradient.
    """
    d_y = np.asarray(d_y, dtype=np.float64)
    if d_y.shape != x.data.shape:
        raise ValueError("d_y must have the feature map's (L, C) shape")
    length = h.shape[0]
    if norm == "identity":
        hn = h
        d_hn = np.einsum("lc,ln->lcn", d_y, p.c_out)
        d_h = d_hn
    elif norm == "rms":
        flat = h.reshape(length, -1)
        m = flat.shape[1]
        rms = np.sqrt(np.mean(flat * flat, axis=1))
        safe = np.where(rms > 0.0, rms, 1.0)
        hn = h * np.where(rms > 0.0, 1.0 / safe, 0.0)[:, None, None]
        d_hn = np.einsum("lc,ln->lcn", d_y, p.c_out)
        # d(h/r)/dh with r = sqrt(mean(h^2)): d_h = d_hn/r - h * <d_hn, h> / (m r^3)
        inner = np.einsum("lcn,lcn->l", d_hn, h)
        d_h = d_hn / safe[:, None, None] - h * (inner / (m * safe**3))[:, None, None]
        d_h *= (rms > 0.0)[:, None, None]
    else:
        raise ValueError("norm must be 'rms' or 'identity'")
    d_c_out = np.einsum("lc,lcn->ln", d_y, hn)
    d_d = np.einsum("lc,lc->c", d_y, x.data)
    d_x = d_y * p.d[None, :]
    return d_h, d_c_out, d_d, d_x


def discretization_backward(
    p: ContinuousScanParams,
    disc: DiscreteScanParams,
    d_a_bar: np.ndarray,
    d_b_bar: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chain rule from (d_a_bar, d_b_bar) back to the continuous parameters.

    Uses d(a_bar)/d(delta) = a * a_bar, d(a_bar)/d(a) = delta * a_bar,
    d(b_bar)/d(delta) = b and d(b_bar)/d(b) = delta.  Returns
    ``(d_a, d_b, d_delta)`` with shapes (C, N), (L, N), (L, C).
    """
    d_a_bar = np.asarray(d_a_bar, dtype=np.float64)
    d_b_bar = np.asarray(d_b_bar, dtype=np.float64)
    if d_a_bar.shape != p.shape or d_b_bar.shape != p.shape:
        raise ValueError("gradient shapes must match the (L, C, N) parameter shape")
    d_a = np.einsum("lcn,lc,lcn->cn", d_a_bar, p.delta, disc.a_bar)
    d_b = np.einsum("lcn,lc->ln", d_b_bar, p.delta)
    d_delta = np.einsum("lcn,cn,lcn->lc", d_a_bar, p.a, disc.a_bar) + np.einsum(
        "lcn,ln->lc", d_b_bar, p.b
    )
    return d_a, d_b, d_delta


def affinity_map(
    tree: SpanningTree, p: DiscreteScanParams, anchor: int, lane_reduce: str = "mean"
) -> np.ndarray:
    """Mean path weight from every vertex to the anchor, an L-vector in [0, 1].

    Entry j is the lane-mean of the product of transition scalars along the
    tree path from j to the anchor; the anchor itself is exactly 1.  Requires
    every a_bar entry in (0, 1] so products stay in [0, 1].
    """
    if lane_reduce != "mean":
        raise ValueError("only lane_reduce='mean' is supported")
    n = tree.num_vertices
    if not 0 <= anchor < n:
        raise ValueError(f"anchor {anchor} out of range for {n} vertices")
    if p.shape[0] != n:
        raise ValueError("params length does not match the tree")
    if np.any(p.a_bar > 1.0):
        raise ValueError("affinity map requires a_bar entries in (0, 1]")
    adj = _edge_key_adjacency(tree)
    prod = np.empty(p.shape, dtype=np.float64)
    seen = np.zeros(n, dtype=bool)
    seen[anchor] = True
    prod[anchor] = 1.0
    stack = [anchor]
    while stack:
        v = stack.pop()
        for nb, key in adj[v]:
            if not seen[nb]:
                seen[nb] = True
                prod[nb] = prod[v] * p.a_bar[key]
                stack.append(nb)
    return prod.reshape(n, -1).mean(axis=1)
