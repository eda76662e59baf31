"""Gadget networks with all entries in [-1, 1].

* ``build_mult(m)``: approximate product on [0, 1]^2 with error <= 2^-m, exact zero
  annihilation, output clipped into [0, 1].  Built from the sawtooth expansion
  ``t^2 = t - sum_k g_k(t) / 4^k`` and ``xy = ((x+y)/2)^2 - ((x-y)/2)^2``.
* ``build_mult_star(m)``: ``(x, y, z) -> (Mult_m(x, z), Mult_m(y, z))``.
* hat layers ``(1 - M|x - l/M|)_+`` realized exactly, slope M carried by a
  doubling chain so no weight exceeds 1.
* affine input maps, exact scaling gadgets and balanced product trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .calculus import (
    compose,
    identity_net,
    linear_net,
    map_outputs,
    parallelize,
    replicate,
    select_inputs,
)
from .network import STRICT, Network, NetworkError


@dataclass(frozen=True)
class MultContract:
    m: int

    @property
    def error_bound(self) -> float:
        return 2.0 ** -self.m


def sawtooth_levels(m: int) -> int:
    """Number of sawtooth terms so that the two-square difference is within 2^-m."""
    # each square is overestimated by at most 2^(-2k-2); the difference inherits one such term
    return max(1, math.ceil((m - 1) / 2))


@lru_cache(maxsize=64)
def build_mult(m: int) -> Network:
    if m < 1:
        raise NetworkError("Mult_m needs m >= 1")
    k_max = sawtooth_levels(m)
    # Per channel and level k three units: acc_k, p_k = sigma(g_k) / 4^k and
    # q_k = sigma(g_k - 1/2) / 4^k, where g_{k+1} = 2 sigma(g_k) - 4 sigma(g_k - 1/2).
    # The 4^-k scaling turns every weight into 1/2 or 1 and is exact in binary:
    #   p_{k+1} = sigma(p_k / 2 - q_k),  q_{k+1} = sigma(p_k / 2 - q_k - 4^-(k+1) / 2),
    #   acc_{k+1} = acc_k - p_k / 2 + q_k.
    # Channel a carries (x+y)/2, channel b carries |x-y|/2; unit u of channel c sits at
    # 2u + c so the final difference cancels term by term (Mult(0, y) is exactly 0).
    weights = [np.array([[1.0, 0.0], [0.0, 1.0], [1.0, -1.0], [-1.0, 1.0]])]
    shifts = [np.zeros(4)]

    w = np.zeros((6, 4))
    w[0::2, 0:2] = 0.5
    w[1::2, 2:4] = 0.5
    weights.append(w)
    shifts.append(np.array([0.0, 0.0, 0.0, 0.0, 0.5, 0.5]))

    acc_row = np.array([1.0, -0.5, 1.0])  # from (acc, p, q)
    pq_row = np.array([0.0, 0.5, -1.0])
    for k in range(1, k_max):
        w = np.zeros((6, 6))
        for c in range(2):
            cols = [c, 2 + c, 4 + c]
            w[c, cols] = acc_row
            w[2 + c, cols] = pq_row
            w[4 + c, cols] = pq_row
        weights.append(w)
        shifts.append(np.array([0.0, 0.0, 0.0, 0.0, 0.5 / 4 ** k, 0.5 / 4 ** k]))

    # difference of the two squares, then clip into [0, 1]: out = sigma(D) - sigma(D - 1)
    d_row = np.zeros(6)
    d_row[0::2] = acc_row
    d_row[1::2] = -acc_row
    weights.append(np.vstack([d_row, d_row]))
    shifts.append(np.array([0.0, 1.0]))
    weights.append(np.array([[1.0, -1.0]]))
    return Network(weights, shifts, STRICT)


def mult_star_exponent(r: int, eta: float) -> int:
    """Accuracy exponent ``ceil(log2(r / eta)) + 2`` for the chart-combination gadget."""
    return int(math.ceil(math.log2(r / eta) - 1e-12)) + 2


def build_mult_star(m_star: int) -> Network:
    if m_star < 1:
        raise NetworkError("Mult* needs m_star >= 1")
    mult = build_mult(m_star)
    return parallelize(select_inputs(mult, [0, 2], 3), select_inputs(mult, [1, 2], 3))


def mult_bank(pairs: Sequence[tuple[int, int]], input_dim: int, m: int) -> Network:
    """Independent ``Mult_m`` gadgets, output k = Mult_m(x[pairs[k][0]], x[pairs[k][1]])."""
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    bank = replicate(build_mult(m), len(pairs))
    return select_inputs(bank, pairs.reshape(-1), input_dim)


def product_net(input_dim: int, factors: Sequence[Sequence[int]], m: int) -> Network:
    """Balanced ``Mult_m`` trees: output k approximates prod_i x[factors[k][i]] on [0,1].

    Every output sits at the same depth; shorter products are carried by identity
    layers, which is exact because all intermediate signals are nonnegative.
    With a factor list of length ``n`` the error is at most ``(n - 1) 2^-m``.
    """
    current = [list(f) for f in factors]
    if any(len(f) == 0 for f in current):
        raise NetworkError("empty factor list")
    mult_depth = build_mult(m).depth
    net = None
    dim = input_dim
    while True:
        if all(len(f) == 1 for f in current) and net is not None:
            order = [f[0] for f in current]
            if order == list(range(net.output_dim)):
                return net
            perm = sp.csr_matrix((np.ones(len(order)), (np.arange(len(order)), order)),
                                 shape=(len(order), net.output_dim))
            return map_outputs(net, perm)
        pairs, carries, nxt = [], [], []
        for f in current:
            row = []
            for i in range(0, len(f) - 1, 2):
                row.append(("m", len(pairs)))
                pairs.append((f[i], f[i + 1]))
            if len(f) % 2:
                row.append(("c", len(carries)))
                carries.append(f[-1])
            nxt.append(row)
        if not pairs:
            # nothing to multiply at all: a single identity layer selects the inputs
            return select_inputs(identity_net(len(carries), 1), carries, dim)
        parts = [mult_bank(pairs, dim, m)]
        if carries:
            parts.append(select_inputs(identity_net(len(carries), mult_depth), carries, dim))
        level = parallelize(*parts)
        offset = {"m": 0, "c": len(pairs)}
        current = [[offset[kind] + i for kind, i in row] for row in nxt]
        net = level if net is None else compose(level, net)
        dim = level.output_dim


# ------------------------------------------------------------------ scaling / affine


def scale_gadget(w: float) -> Network:
    """Exact ``x -> w x`` for ``x >= 0`` with entries in [-1, 1].

    |w| <= 1 is a single edge; otherwise ``ceil(|w|)`` parallel copies of sigma(x)
    summed with weights ``w / k``.
    """
    if not np.isfinite(w):
        raise NetworkError("scale must be finite")
    if abs(w) <= 1:
        return linear_net([[w]])
    k = int(math.ceil(abs(w)))
    return Network([np.ones((k, 1)), np.full((1, k), w / k)], [np.zeros(k)], STRICT)


def doubling_net(dim: int, q: int) -> Network:
    """``x -> 2^q x`` coordinatewise for ``x >= 0`` using depth ``q`` and width ``2 dim``."""
    if q < 1:
        raise NetworkError("q must be >= 1")
    first = sp.kron(sp.identity(dim), np.ones((2, 1)), format="csr")
    double = sp.kron(sp.identity(dim), np.ones((2, 2)), format="csr")
    out = sp.kron(sp.identity(dim), np.ones((1, 2)), format="csr")
    weights = [first] + [double] * (q - 1) + [out]
    return Network(weights, [np.zeros(2 * dim)] * q, STRICT)


def build_affine(A, b, weight_mode: str = STRICT) -> Network:
    """One hidden layer computing ``sigma(A x + b)`` as ``sigma_{-b}(A x)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (A.shape[0],):
        raise NetworkError("shape mismatch between A and b")
    if weight_mode == STRICT and (np.any(np.abs(A) > 1) or np.any(np.abs(b) > 1)):
        raise NetworkError("affine map has entries outside [-1, 1]; rescale it (scale_gadget / larger R)")
    return Network([A, np.eye(A.shape[0])], [-b], weight_mode)


def rescaling_radius(points) -> float:
    """``R = 1 v 4 max |x|_inf`` over a set of points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return max(1.0, 4.0 * float(np.abs(pts).max()))


# ------------------------------------------------------------------ hats


def hat_values(z, M: int, ell) -> np.ndarray:
    """Exact ``(1 - M |z - ell/M|)_+`` (reference implementation)."""
    return np.maximum(1.0 - M * np.abs(np.asarray(z, dtype=float) - np.asarray(ell) / M), 0.0)


def hat_net(d: int, M: int, indices: Sequence[Sequence[int]] | None = None) -> Network:
    """Exact hats on [0, 1]: one output per (dimension j, grid index l in indices[j]).

    Outputs are ordered dimension-major.  Each hat is
    ``M [s(z - (l-1)/M) - 2 s(z - l/M) + s(z - (l+1)/M)]``; the slope M is split
    into a weight ``M / 2^q <= 1`` followed by a ``q``-step doubling chain.  The
    term with shift ``(M+1)/M > 1`` vanishes on [0, 1] and is dropped.
    """
    if M < 1:
        raise NetworkError("M must be >= 1")
    if indices is None:
        indices = [list(range(M + 1))] * d
    indices = [np.asarray(ix, dtype=int) for ix in indices]
    for ix in indices:
        if ix.size and (ix.min() < 0 or ix.max() > M):
            raise NetworkError(f"grid index out of range 0..{M}")
    q = int(math.ceil(math.log2(M))) if M > 1 else 0
    c = M / 2.0 ** q

    # base units: two copies of sigma(z_j - k/M) for each needed k in -1..M
    base_rows, base_cols, base_shift = [], [], []
    base_pos = {}
    for j, ix in enumerate(indices):
        for k in sorted({int(k) for l in ix for k in (l - 1, l, l + 1) if -1 <= k <= M}):
            base_pos[(j, k)] = len(base_shift)
            for _ in range(2):
                base_rows.append(len(base_shift))
                base_cols.append(j)
                base_shift.append(k / M)
    n_base = len(base_shift)
    w0 = sp.csr_matrix((np.ones(n_base), (np.arange(n_base), base_cols)), shape=(n_base, d))

    hats = [(j, int(l)) for j, ix in enumerate(indices) for l in ix]
    n_hat = len(hats)
    copies = 2 if q >= 1 else 1
    rows, cols, vals = [], [], []
    for h, (j, l) in enumerate(hats):
        terms = [(l - 1, c), (l, -c), (l, -c), (l + 1, c)]
        seen = {}
        for k, wt in terms:
            if (j, k) not in base_pos:
                continue
            slot = base_pos[(j, k)] + seen.get(k, 0)
            seen[k] = seen.get(k, 0) + 1
            for cp in range(copies):
                rows.append(copies * h + cp)
                cols.append(slot)
                vals.append(wt)
    w1 = sp.csr_matrix((vals, (rows, cols)), shape=(copies * n_hat, n_base))
    weights = [w0, w1]
    shifts = [np.array(base_shift), np.zeros(copies * n_hat)]
    if q >= 1:
        double = sp.kron(sp.identity(n_hat), np.ones((2, 2)), format="csr")
        weights += [double] * (q - 1)
        shifts += [np.zeros(2 * n_hat)] * (q - 1)
        weights.append(sp.kron(sp.identity(n_hat), np.ones((1, 2)), format="csr"))
    else:
        weights.append(sp.identity(n_hat, format="csr"))
    return Network(weights, shifts, STRICT)


def build_hat_product(M: int, grid_index: Sequence[int], m: int) -> Network:
    """Network for ``x -> prod_j (1 - M|x_j - l_j/M|)_+`` on [0, 1]^d.

    Unary hats are exact; the product uses a balanced ``Mult_m`` tree, so the total
    error is at most ``(d - 1) 2^-m``.
    """
    ell = [int(v) for v in grid_index]
    d = len(ell)
    if any(v < 0 or v > M for v in ell):
        raise NetworkError(f"grid index {ell} out of range 0..{M}")
    hats = hat_net(d, M, [[v] for v in ell])
    if d == 1:
        return hats
    return compose(product_net(d, [list(range(d))], m), hats)
