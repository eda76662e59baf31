"""Combination rules for networks: enlargement, composition, depth padding,
parallelization and removal of inactive units, plus a few wiring helpers.

All operations return new networks; strict-mode inputs give strict-mode outputs.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .network import STRICT, RELAXED, Architecture, Network, NetworkError


def _mode(*nets: Network) -> str:
    return STRICT if all(n.weight_mode == STRICT for n in nets) else RELAXED


def embed(net: Network, target: Architecture, extra_sparsity: int = 0) -> Network:
    """Zero-pad ``net`` to the (componentwise larger) architecture ``target``.

    ``extra_sparsity`` is the allowance of the enlarged class; padding itself adds no nonzeros.
    """
    if extra_sparsity < 0:
        raise NetworkError("extra_sparsity must be nonnegative")
    if target.depth != net.depth:
        raise NetworkError(f"embed keeps the depth: {net.depth} != {target.depth}")
    if any(t < p for t, p in zip(target.widths, net.widths)):
        raise NetworkError(f"target widths {target.widths} smaller than {net.widths} in some coordinate")
    q = target.widths
    weights = [sp.csr_matrix((w.data, w.indices, w.indptr), shape=w.shape) for w in net.weights]
    weights = [_resize(w, (q[i + 1], q[i])) for i, w in enumerate(weights)]
    shifts = [np.concatenate([v, np.zeros(q[i + 1] - v.size)]) for i, v in enumerate(net.shifts)]
    return Network(weights, shifts, net.weight_mode, check=False)


def _resize(w: sp.spmatrix, shape) -> sp.csr_matrix:
    coo = w.tocoo()
    return sp.csr_matrix((coo.data, (coo.row, coo.col)), shape=shape)


def compose(outer: Network, inner: Network, v=None) -> Network:
    """Network for ``x -> outer(sigma_v(inner(x)))``; depth ``L_inner + L_outer + 1``."""
    if inner.output_dim != outer.input_dim:
        raise NetworkError(f"cannot compose: inner output dim {inner.output_dim} != outer input dim {outer.input_dim}")
    v = np.zeros(inner.output_dim) if v is None else np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (inner.output_dim,):
        raise NetworkError(f"interface shift must have length {inner.output_dim}")
    mode = _mode(outer, inner)
    if mode == STRICT and np.any(np.abs(v) > 1):
        raise NetworkError("interface shift outside [-1, 1] in strict mode")
    return Network(list(inner.weights) + list(outer.weights),
                   list(inner.shifts) + [v] + list(outer.shifts), mode, check=False)


def pad_depth(net: Network, q: int) -> Network:
    """Insert ``q`` identity layers of width ``p_0`` at the input side.

    Exact for inputs with all coordinates >= 0 (uses sigma(sigma(x)) = sigma(x)); a
    negative coordinate is clipped to 0 by the first inserted layer.
    """
    if q < 1:
        raise NetworkError("q must be >= 1")
    p0 = net.input_dim
    eye = sp.identity(p0, format="csr")
    return Network([eye] * q + list(net.weights), [np.zeros(p0)] * q + list(net.shifts),
                   net.weight_mode, check=False)


def pad_depth_top(net: Network, q: int) -> Network:
    """Insert ``q`` identity layers of width ``p_{L+1}`` at the output side.

    Exact wherever all outputs of ``net`` are >= 0; otherwise outputs become
    ``sigma(net(x))``.
    """
    if q < 1:
        raise NetworkError("q must be >= 1")
    k = net.output_dim
    eye = sp.identity(k, format="csr")
    return Network(list(net.weights) + [eye] * q, list(net.shifts) + [np.zeros(k)] * q,
                   net.weight_mode, check=False)


def pad_to_depth(net: Network, depth: int, where: str = "top") -> Network:
    if depth < net.depth:
        raise NetworkError(f"cannot shrink depth {net.depth} to {depth}")
    if depth == net.depth:
        return net
    return (pad_depth_top if where == "top" else pad_depth)(net, depth - net.depth)


def parallelize(*nets: Network) -> Network:
    """Stack networks of equal depth and input dimension; outputs are concatenated."""
    if not nets:
        raise NetworkError("nothing to parallelize")
    L, p0 = nets[0].depth, nets[0].input_dim
    for n in nets[1:]:
        if n.depth != L or n.input_dim != p0:
            raise NetworkError(
                f"parallelize needs equal depth and input dim, got (L={L}, p0={p0}) and "
                f"(L={n.depth}, p0={n.input_dim}); use pad_depth/embed first")
    if len(nets) == 1:
        return nets[0]
    weights = [sp.vstack([n.weights[0] for n in nets], format="csr")]
    weights += [sp.block_diag([n.weights[i] for n in nets], format="csr") for i in range(1, L + 1)]
    shifts = [np.concatenate([n.shifts[i] for n in nets]) for i in range(L)]
    return Network(weights, shifts, _mode(*nets), check=False)


def replicate(net: Network, copies: int) -> Network:
    """``copies`` independent copies of ``net`` side by side (inputs and outputs interleaved per copy)."""
    eye = sp.identity(copies, format="csr")
    weights = [sp.kron(eye, w, format="csr") for w in net.weights]
    shifts = [np.tile(v, copies) for v in net.shifts]
    return Network(weights, shifts, net.weight_mode, check=False)


def select_inputs(net: Network, columns: Sequence[int], input_dim: int) -> Network:
    """Rewire the input layer so that input ``k`` of ``net`` reads coordinate ``columns[k]``."""
    columns = np.asarray(columns, dtype=int)
    if columns.size != net.input_dim:
        raise NetworkError("need one column per network input")
    sel = sp.csr_matrix((np.ones(columns.size), (np.arange(columns.size), columns)),
                        shape=(columns.size, input_dim))
    w0 = (net.weights[0] @ sel).tocsr()
    return Network([w0] + list(net.weights[1:]), net.shifts, net.weight_mode, check=False)


def map_outputs(net: Network, matrix) -> Network:
    """Replace the output layer ``W_L`` by ``matrix @ W_L``.

    In strict mode the caller must keep the products inside [-1, 1]; this is checked.
    """
    m = sp.csr_matrix(matrix, dtype=float)
    if m.shape[1] != net.output_dim:
        raise NetworkError(f"output map has {m.shape[1]} columns, network has {net.output_dim} outputs")
    wl = (m @ net.weights[-1]).tocsr()
    return Network(list(net.weights[:-1]) + [wl], net.shifts, net.weight_mode)


def identity_net(dim: int, depth: int = 1) -> Network:
    """``depth`` identity layers; equals the identity on the nonnegative orthant."""
    eye = sp.identity(dim, format="csr")
    return Network([eye] * (depth + 1), [np.zeros(dim)] * depth)


def linear_net(matrix) -> Network:
    """Depth-0 network ``x -> A x``."""
    return Network([sp.csr_matrix(matrix, dtype=float)], [])


def canonical_width(net: Network, s_budget: int | None = None) -> Network:
    """Drop hidden units that can never influence the output.

    A unit is dead if its outgoing weights are all zero, or if it receives no
    weights and has shift >= 0 (then it is constantly 0).  Units are examined in
    ascending index order and the sweep repeats until nothing changes; each
    hidden layer keeps at least one unit.
    """
    from .network import sparsity

    if s_budget is not None and sparsity(net).nonzero_count > s_budget:
        raise NetworkError("network sparsity exceeds s_budget")
    weights = [w.tocsc() for w in net.weights]
    shifts = [v.copy() for v in net.shifts]
    changed = True
    while changed:
        changed = False
        for i in range(len(shifts)):
            w_in = weights[i].tocsr()
            w_out = weights[i + 1].tocsc()
            in_nnz = np.diff(w_in.indptr)
            out_nnz = np.diff(w_out.indptr)
            dead = (out_nnz == 0) | ((in_nnz == 0) & (shifts[i] >= 0))
            keep = np.flatnonzero(~dead)
            if keep.size == 0:
                keep = np.array([0])
            if keep.size == shifts[i].size:
                continue
            weights[i] = w_in[keep, :]
            weights[i + 1] = w_out[:, keep]
            shifts[i] = shifts[i][keep]
            if keep.size == 1 and dead[keep[0]]:
                weights[i] = sp.csr_matrix((1, weights[i].shape[1]))
                weights[i + 1] = sp.csr_matrix((weights[i + 1].shape[0], 1))
                shifts[i] = np.zeros(1)
            changed = True
    return Network(weights, shifts, net.weight_mode, check=False)


def sign_split(net: Network) -> Network:
    """Two-output network ``x -> (h(x)_+, (-h(x))_+)`` for single-output ``h``.

    The difference of the channels reconstructs ``h``; both channels are nonnegative
    and so can be carried through identity layers exactly.
    """
    if net.output_dim != 1:
        raise NetworkError("sign_split needs a single-output network")
    return compose(linear_net(np.eye(2)), map_outputs(net, [[1.0], [-1.0]]))
