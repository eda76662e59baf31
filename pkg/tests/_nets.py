"""Shared helpers for building random test networks."""

import numpy as np
import scipy.sparse as sp

from manifold_relu.network import STRICT, Network


def random_network(rng, depth=None, widths=None, density=0.6, mode=STRICT, input_dim=None, output_dim=None):
    if widths is None:
        depth = int(rng.integers(0, 4)) if depth is None else depth
        widths = [int(rng.integers(1, 6)) for _ in range(depth + 2)]
        if input_dim is not None:
            widths[0] = input_dim
        if output_dim is not None:
            widths[-1] = output_dim
    depth = len(widths) - 2
    weights = []
    for i in range(depth + 1):
        w = rng.uniform(-1, 1, (widths[i + 1], widths[i]))
        w[rng.random(w.shape) > density] = 0.0
        weights.append(sp.csr_matrix(w))
    shifts = [np.where(rng.random(widths[i + 1]) < density, rng.uniform(-1, 1, widths[i + 1]), 0.0)
              for i in range(depth)]
    return Network(weights, shifts, mode)


def reference_eval(net, x):
    """Dense, layer-by-layer evaluation used as an independent oracle."""
    h = np.atleast_2d(x).T
    for w, v in zip(net.weights[:-1], net.shifts):
        h = np.maximum(w.toarray() @ h - v[:, None], 0.0)
    return (net.weights[-1].toarray() @ h).T
