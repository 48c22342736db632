"""Render the effective receptive field of an anchor pixel.

The affinity of pixel j to the anchor is the product of transition scalars
along the tree path between them: 1 at the anchor, shrinking with every
dissimilar edge crossed.  On a two-region image the anchor's own region
stays bright while the other region is dimmed by the single boundary edge
the spanning tree keeps.

Writes affinity.pgm next to this script.
"""

from pathlib import Path

import numpy as np

from treescan import (
    DiscreteScanParams,
    FeatureMap,
    affinity_map,
    boruvka_mst,
    build_grid_graph,
    root_tree,
)
from treescan.io import write_pgm

H, W = 12, 16
data = np.zeros((H * W, 2))
for i in range(H * W):
    data[i] = [1.0, 0.0] if (i % W) < W // 2 else [0.0, 1.0]
image = FeatureMap(data, spatial=(H, W))

graph = build_grid_graph(image, "cosine")
edges, weights = boruvka_mst(graph)
tree = root_tree(edges, weights, H * W, root=0)

# Without trained parameters, derive transitions from the tree's own edge
# weights: similar neighbors (weight 0) pass state through untouched,
# dissimilar ones attenuate it by exp(-weight).
a_bar = np.exp(-tree.edge_weight_to_parent)[:, None, None]
params = DiscreteScanParams(a_bar, np.zeros_like(a_bar))

anchor = 0  # top-left pixel
values = affinity_map(tree, params, anchor)
left = values.reshape(H, W)[:, : W // 2].mean()
right = values.reshape(H, W)[:, W // 2 :].mean()
print(f"mean affinity, anchor region: {left:.3f}   opposite region: {right:.3f}")
print(f"contrast factor: {left / right:.2f}")

out = Path(__file__).with_name("affinity.pgm")
write_pgm(out, np.rint(255 * values).reshape(H, W).astype(np.uint8))
print(f"wrote {out}")
