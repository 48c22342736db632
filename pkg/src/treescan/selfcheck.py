"""Seeded random instances and the end-to-end consistency suite.

The generators here are shared by the self-check command and the test suite:
every instance is reproducible from a single integer seed, and the checks
compare the fast kernels against the brute-force references.
"""

from __future__ import annotations

import sys

import numpy as np

from .lattice import FeatureMap, WeightedGraph
from .mst import SpanningTree, boruvka_mst, root_tree
from .oracle import FiniteDifferenceConfig, finite_diff_gradients, kruskal_mst
from .scan import (
    DiscreteScanParams,
    GradBundle,
    naive_tree_scan,
    sequential_selective_scan,
    tree_scan_language_backward,
    tree_scan_language_forward,
    tree_scan_vision_backward,
    tree_scan_vision_forward,
)

# Components below this magnitude are measured against it instead of their own
# size, i.e. they must agree within rtol * GRAD_DENOM_FLOOR = 1e-8 absolutely.
# Central differences at epsilon = 1e-5 carry ~|loss| * ulp / (2 epsilon) of
# intrinsic rounding noise (~1e-9 at desk scale), so a pure relative test on
# near-zero components would fail against an exact analytic gradient.
GRAD_DENOM_FLOOR = 1e-4


def random_connected_graph(
    rng: np.random.Generator, n: int, extra_edges: int = 0, distinct: bool = False
) -> WeightedGraph:
    """Random spanning tree plus ``extra_edges`` random chords.

    With ``distinct=True`` the weights are a shuffled arithmetic progression,
    so no two edges tie and the minimum spanning tree is unique.
    """
    pairs = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        pairs.add((u, v))
    attempts = 0
    while len(pairs) < n - 1 + extra_edges and attempts < 50 * (extra_edges + 1):
        u, v = rng.integers(0, n, size=2)
        attempts += 1
        if u == v:
            continue
        pairs.add((min(int(u), int(v)), max(int(u), int(v))))
    edges = np.array(sorted(pairs), dtype=np.int64)
    m = len(edges)
    if distinct:
        weights = rng.permutation(m).astype(np.float64) / max(m, 1) + 0.5
    else:
        weights = rng.random(m)
    return WeightedGraph(n, edges, weights)


def random_tree(rng: np.random.Generator, n: int, root: int | None = None) -> SpanningTree:
    graph = random_connected_graph(rng, n, extra_edges=n // 2)
    edges, weights = boruvka_mst(graph)
    if root is None:
        root = int(rng.integers(0, n))
    return root_tree(edges, weights, n, root)


def random_scan_instance(
    rng: np.random.Generator,
    num_tokens: int,
    channels: int,
    states: int,
    root: int | None = None,
    a_range: tuple[float, float] = (0.05, 0.95),
) -> tuple[FeatureMap, DiscreteScanParams, SpanningTree]:
    """Random tree plus random per-lane scan scalars with a_bar in ``a_range``."""
    tree = random_tree(rng, num_tokens, root=root)
    lo, hi = a_range
    a_bar = rng.uniform(lo, hi, size=(num_tokens, channels, states))
    b_bar = rng.standard_normal((num_tokens, channels, states))
    x = FeatureMap(rng.standard_normal((num_tokens, channels)))
    return x, DiscreteScanParams(a_bar, b_bar), tree


def chain_tree(num_tokens: int) -> SpanningTree:
    """Path 0-1-...-(L-1) rooted at the last token."""
    edges = np.stack(
        [np.arange(num_tokens - 1, dtype=np.int64), np.arange(1, num_tokens, dtype=np.int64)],
        axis=1,
    )
    return root_tree(edges, np.zeros(num_tokens - 1), num_tokens, num_tokens - 1)


def align_chain_params(p: DiscreteScanParams) -> DiscreteScanParams:
    """Re-key sequential-scan transitions onto the chain tree's edges.

    The sequential recurrence attaches a_bar[i] to the edge between tokens
    i-1 and i (the receiving token keys it); the tree keys the same edge by
    its child, token i-1, once the chain is rooted at the last token.  Both
    views carry one multiplier per edge, offset by one slot.
    """
    a = np.empty_like(p.a_bar)
    a[:-1] = p.a_bar[1:]
    a[-1] = 1.0  # root slot, never read
    return DiscreteScanParams(a, p.b_bar)


def relative_gradient_error(analytic: GradBundle, reference: GradBundle) -> float:
    """Worst componentwise |a - r| / max(|a|, |r|, GRAD_DENOM_FLOOR)."""
    worst = 0.0
    for a, r in (
        (analytic.d_x, reference.d_x),
        (analytic.d_a_bar, reference.d_a_bar),
        (analytic.d_b_bar, reference.d_b_bar),
    ):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(r)), GRAD_DENOM_FLOOR)
        worst = max(worst, float(np.max(np.abs(a - r) / denom)))
    return worst


# ---------------------------------------------------------------------------
# individual checks; each returns (ok, detail)

def check_mst(seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 257))
    graph = random_connected_graph(rng, n, extra_edges=int(rng.integers(0, 3 * n)), distinct=True)
    be, bw = boruvka_mst(graph)
    ke, kw = kruskal_mst(graph)
    total_b, total_k = float(bw.sum()), float(kw.sum())
    if abs(total_b - total_k) > 1e-9:
        return False, f"totals differ: {total_b} vs {total_k}"
    if not np.array_equal(be, ke):
        return False, "edge sets differ under distinct weights"
    return True, f"n={n} total={total_b:.6f}"


def check_scan_equivalence(seed: int, perturb: bool = False) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 129))
    c = int(rng.integers(1, 4))
    s = int(rng.integers(1, 4))
    x, p, tree = random_scan_instance(rng, n, c, s)
    h, xi = tree_scan_vision_forward(x, p, tree)
    if perturb:
        h = h + 1e-6
    ref = naive_tree_scan(x, p, tree, roots="all")
    diff = float(np.max(np.abs(h - ref)))
    if diff >= 1e-9:
        return False, f"max abs diff {diff:.3e} >= 1e-9"
    nonroot = np.flatnonzero(np.arange(n) != tree.root)
    a = p.a_bar[nonroot]
    ident = np.max(
        np.abs(h[nonroot] - (a * h[tree.parent[nonroot]] + (1.0 - a * a) * xi[nonroot]))
    )
    if ident >= 1e-12:
        return False, f"two-traversal identity violated by {ident:.3e}"
    return True, f"L={n} C={c} N={s} diff={diff:.1e}"


def check_gradients_vision(seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 21))
    c = int(rng.integers(1, 3))
    s = int(rng.integers(1, 3))
    x, p, tree = random_scan_instance(rng, n, c, s)
    w = rng.standard_normal(p.shape)
    h, xi = tree_scan_vision_forward(x, p, tree)
    analytic = tree_scan_vision_backward(x, p, tree, xi, h, w)

    def forward(xa, aa, ba):
        hh, _ = tree_scan_vision_forward(FeatureMap(xa), DiscreteScanParams(aa, ba), tree)
        return hh

    cfg = FiniteDifferenceConfig()
    ref = finite_diff_gradients(forward, x.data, p.a_bar, p.b_bar, w, cfg)
    err = relative_gradient_error(analytic, ref)
    return err < cfg.relative_tolerance, f"L={n} rel_err={err:.2e}"


def check_gradients_language(seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 21))
    c = int(rng.integers(1, 3))
    s = int(rng.integers(1, 3))
    x, p, tree = random_scan_instance(rng, n, c, s, root=n - 1)
    w = rng.standard_normal(p.shape)
    h = tree_scan_language_forward(x, p, tree)
    analytic = tree_scan_language_backward(x, p, tree, h, w)

    def forward(xa, aa, ba):
        return tree_scan_language_forward(FeatureMap(xa), DiscreteScanParams(aa, ba), tree)

    cfg = FiniteDifferenceConfig()
    ref = finite_diff_gradients(forward, x.data, p.a_bar, p.b_bar, w, cfg)
    err = relative_gradient_error(analytic, ref)
    return err < cfg.relative_tolerance, f"L={n} rel_err={err:.2e}"


def check_chain_reduction(seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 129))
    c = int(rng.integers(1, 4))
    s = int(rng.integers(1, 4))
    a_bar = rng.uniform(0.05, 0.95, size=(n, c, s))
    b_bar = rng.standard_normal((n, c, s))
    x = FeatureMap(rng.standard_normal((n, c)))
    p = DiscreteScanParams(a_bar, b_bar)
    h_seq = sequential_selective_scan(x, p)
    h_tree = tree_scan_language_forward(x, align_chain_params(p), chain_tree(n))
    diff = float(np.max(np.abs(h_seq - h_tree)))
    return diff <= 1e-12, f"L={n} diff={diff:.1e}"


_SUITE = (
    ("mst-equivalence", check_mst, 25),
    ("scan-equivalence", check_scan_equivalence, 40),
    ("gradients-vision", check_gradients_vision, 8),
    ("gradients-language", check_gradients_language, 8),
    ("chain-reduction", check_chain_reduction, 12),
)


def run_selfcheck(base_seed: int = 20240601, perturb: bool = False, out=None) -> bool:
    """Run every check group; prints one line per instance and a summary.

    ``perturb`` injects a deliberate error into the scan outputs (negative
    control for the harness itself).  Returns True iff everything passed.
    """
    out = out or sys.stdout
    all_ok = True
    for group, (name, fn, count) in enumerate(_SUITE):
        group_ok = True
        for k in range(count):
            seed = base_seed + 100000 * group + k
            if name == "scan-equivalence":
                ok, detail = fn(seed, perturb=perturb)
            else:
                ok, detail = fn(seed)
            print(f"{'ok  ' if ok else 'FAIL'} {name:<20} seed={seed} {detail}", file=out)
            group_ok &= ok
        print(f"---- {name}: {'pass' if group_ok else 'FAIL'} ({count} instances)", file=out)
        all_ok &= group_ok
    print(f"self-check: {'all checks passed' if all_ok else 'FAILURES detected'}", file=out)
    return all_ok
