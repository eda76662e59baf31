"""Hölder functions, the grid-based local Taylor scheme and its ReLU realization.

The scheme on the unit cube is

    P g(z) = sum_l P_{z*_l} g(z) * prod_j (1 - M |z_j - l_j / M|)_+

where ``z*_l`` is the in-domain grid point nearest to ``l / M`` and ``P_a g`` is the
Taylor polynomial of degree ``floor(beta)`` (largest integer strictly below beta).
A general domain is mapped into [1/4, 3/4]^d by ``z = (y - c) / R + 1/2``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .calculus import compose, identity_net, linear_net, map_outputs, pad_to_depth, parallelize, select_inputs
from .network import Network, NetworkError, evaluate, sparsity
from .primitives import build_affine, build_mult, doubling_net, hat_net, mult_bank, product_net

log = logging.getLogger(__name__)

_BOX_TOL = 1e-12


class PreconditionError(ValueError):
    pass


def floor_strict(beta: float) -> int:
    """Largest integer strictly smaller than ``beta``."""
    return int(math.ceil(beta)) - 1


def multi_indices(d: int, max_degree: int, min_degree: int = 0) -> list[tuple[int, ...]]:
    """All multi-indices with ``min_degree <= |alpha| <= max_degree``, graded then lexicographic."""
    out = []
    for total in range(min_degree, max_degree + 1):
        for combo in itertools.product(range(total + 1), repeat=d):
            if sum(combo) == total:
                out.append(combo)
    return out


def _factorial(alpha) -> float:
    return float(np.prod([math.factorial(a) for a in alpha]))


def monomials(x: np.ndarray, gammas: Sequence[tuple[int, ...]]) -> np.ndarray:
    x = np.atleast_2d(x)
    out = np.ones((x.shape[0], len(gammas)))
    for k, g in enumerate(gammas):
        for i, e in enumerate(g):
            if e:
                out[:, k] *= x[:, i] ** e
    return out


# ------------------------------------------------------------------ functions


@dataclass
class HolderFunction:
    """A vector-valued function on a domain ``U`` with bounding box ``[lower, upper]``.

    ``func`` maps an ``(n, dim)`` array to ``(n, out_dim)`` (or ``(n,)`` when
    ``out_dim == 1``).  ``derivative(alpha, x)`` supplies analytic partials; without
    it central finite differences with step ``fd_step`` are used, which requires
    ``func`` to be defined slightly outside ``U``.  ``projection`` optionally
    precomposes a linear feature map, so the network input is ``x`` and the
    function sees ``projection @ x``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    beta: float
    K: float
    lower: np.ndarray
    upper: np.ndarray
    out_dim: int = 1
    contains: Callable[[np.ndarray], np.ndarray] | None = None
    derivative: Callable[[tuple, np.ndarray], np.ndarray] | None = None
    fd_step: float | None = None
    projection: np.ndarray | None = None
    name: str = "f"

    def __post_init__(self):
        if not self.beta > 0 or not self.K > 0:
            raise ValueError("need beta > 0 and K > 0")
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dim,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dim,)).copy()
        if np.any(self.upper < self.lower):
            raise ValueError("empty bounding box")
        if self.projection is not None:
            self.projection = np.atleast_2d(np.asarray(self.projection, dtype=float))
            if self.projection.shape[0] != self.dim:
                raise ValueError("projection must have dim rows")

    @property
    def degree(self) -> int:
        return floor_strict(self.beta)

    @property
    def input_dim(self) -> int:
        return self.dim if self.projection is None else self.projection.shape[1]

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return np.asarray(self.func(y), dtype=float).reshape(y.shape[0], self.out_dim)

    def ambient(self, x) -> np.ndarray:
        """Evaluate on network inputs (applies the projection)."""
        return self(self.project(x))

    def project(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x if self.projection is None else x @ self.projection.T

    def in_domain(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        inside = np.all((y >= self.lower - _BOX_TOL) & (y <= self.upper + _BOX_TOL), axis=1)
        if self.contains is not None:
            inside &= np.asarray(self.contains(y), dtype=bool)
        return inside

    def partial(self, alpha: tuple, y, h: float | None = None) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if sum(alpha) == 0:
            return self(y)
        if self.derivative is not None:
            return np.asarray(self.derivative(tuple(alpha), y), dtype=float).reshape(y.shape[0], self.out_dim)
        h = h if h is not None else (self.fd_step or 1e-4)
        return _central_difference(self, alpha, y, h)

    @classmethod
    def from_sympy(cls, exprs, symbols, beta, K, lower, upper, contains=None, name="f", projection=None):
        """Build from sympy expressions; partial derivatives are differentiated symbolically."""
        import sympy

        exprs = list(exprs) if isinstance(exprs, (list, tuple)) else [exprs]
        symbols = list(symbols)
        cache = {}

        def lam(alpha):
            if alpha not in cache:
                fs = []
                for e in exprs:
                    de = e
                    for s, a in zip(symbols, alpha):
                        if a:
                            de = sympy.diff(de, s, a)
                    fs.append(sympy.lambdify(symbols, de, "numpy"))
                cache[alpha] = fs
            return cache[alpha]

        def evaluate_alpha(alpha, y):
            cols = [np.broadcast_to(np.asarray(f(*y.T), dtype=float), (y.shape[0],)) for f in lam(alpha)]
            return np.stack(cols, axis=1)

        d = len(symbols)
        return cls(lambda y: evaluate_alpha((0,) * d, y), d, beta, K, lower, upper, len(exprs), contains,
                   evaluate_alpha, None, projection, name)

    def check_bounds(self, n_samples: int = 2000, seed: int = 0) -> dict:
        """Sampled checks of ``|f| <= K`` and ``gamma! |c_gamma| <= K`` (monomial coefficients)."""
        rng = np.random.default_rng(seed)
        y = self.lower + (self.upper - self.lower) * rng.random((n_samples, self.dim))
        y = y[self.in_domain(y)]
        sup = float(np.abs(self(y)).max()) if len(y) else 0.0
        coef = 0.0
        for a in y[: min(len(y), 50)]:
            tp = taylor_poly(self, a)
            for g, c in tp.monomial_coefficients().items():
                coef = max(coef, _factorial(g) * float(np.abs(c).max()))
        return {"sup": sup, "coef": coef, "ok": sup <= self.K and coef <= self.K}


def _central_difference(f: HolderFunction, alpha, y, h) -> np.ndarray:
    stencils = []
    for a in alpha:
        if a == 0:
            stencils.append([(0.0, 1.0)])
        else:
            stencils.append([((a / 2 - k) * h, (-1) ** k * math.comb(a, k) / h ** a) for k in range(a + 1)])
    out = np.zeros((y.shape[0], f.out_dim))
    for combo in itertools.product(*stencils):
        offset = np.array([c[0] for c in combo])
        weight = float(np.prod([c[1] for c in combo]))
        out += weight * f(y + offset)
    return out


# ------------------------------------------------------------------ Taylor polynomials


@dataclass
class TaylorPolynomial:
    """``sum_alpha coeffs[alpha] (x - anchor)^alpha`` (coefficients already divided by alpha!)."""

    anchor: np.ndarray
    coeffs: dict

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.coeffs), default=0)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        alphas = list(self.coeffs)
        basis = monomials(x - self.anchor, alphas)
        return basis @ np.stack([self.coeffs[a] for a in alphas])

    def monomial_coefficients(self) -> dict:
        """Coefficients in powers of ``x`` itself (binomial expansion around the anchor)."""
        out: dict = {}
        for alpha, c in self.coeffs.items():
            for gamma in itertools.product(*(range(a + 1) for a in alpha)):
                w = 1.0
                for ai, gi, ci in zip(alpha, gamma, self.anchor):
                    w *= math.comb(ai, gi) * (-ci) ** (ai - gi)
                out[gamma] = out.get(gamma, 0.0) + w * np.asarray(c)
        return out


def taylor_poly(f: HolderFunction, a, h: float | None = None) -> TaylorPolynomial:
    a = np.asarray(a, dtype=float).reshape(-1)
    if not f.in_domain(a)[0]:
        raise ValueError(f"anchor {a} outside the domain of {f.name}")
    coeffs = {}
    for alpha in multi_indices(f.dim, f.degree):
        coeffs[alpha] = f.partial(alpha, a[None, :], h)[0] / _factorial(alpha)
    return TaylorPolynomial(a, coeffs)


# ------------------------------------------------------------------ grid


@dataclass(frozen=True)
class Grid:
    M: int
    d: int

    def __post_init__(self):
        if self.M < 1 or self.d < 1:
            raise ValueError("need M >= 1 and d >= 1")

    @property
    def size(self) -> int:
        return (self.M + 1) ** self.d

    @property
    def indices(self) -> np.ndarray:
        """All grid indices in lexicographic order, shape ``(size, d)``."""
        return np.array(list(itertools.product(range(self.M + 1), repeat=self.d)), dtype=int).reshape(-1, self.d)

    @property
    def points(self) -> np.ndarray:
        return self.indices / self.M

    def flat(self, idx) -> np.ndarray:
        idx = np.atleast_2d(idx)
        return np.ravel_multi_index(tuple(idx.T), (self.M + 1,) * self.d)


def grid_from_budget(N: int, d: int) -> Grid:
    """Largest M with ``(M+1)^d <= N``."""
    M = int(math.floor(N ** (1.0 / d) + 1e-9)) - 1
    while (M + 2) ** d <= N:
        M += 1
    while M >= 1 and (M + 1) ** d > N:
        M -= 1
    if M < 1:
        raise PreconditionError(f"N={N} too small for a grid in dimension {d}")
    return Grid(M, d)


def _domain_predicate(U):
    if isinstance(U, HolderFunction):
        return U.in_domain
    if callable(U):
        return lambda y: np.asarray(U(np.atleast_2d(y)), dtype=bool)
    lo, hi = (np.asarray(v, dtype=float) for v in U)
    return lambda y: np.all((np.atleast_2d(y) >= lo - _BOX_TOL) & (np.atleast_2d(y) <= hi + _BOX_TOL), axis=1)


def anchor_table(grid: Grid, inside: np.ndarray) -> np.ndarray:
    """For every grid index (lexicographic), the flat index of its nearest in-domain grid point.

    Distances are sup-norm on integer indices, so ties are exact and resolved by the
    lexicographically smallest candidate.
    """
    cand = np.flatnonzero(inside)
    if cand.size == 0:
        raise PreconditionError("grid too coarse for U: no grid point lies in the domain")
    idx = grid.indices
    out = np.empty(len(idx), dtype=int)
    out[cand] = cand
    todo = np.flatnonzero(~inside)
    cidx = idx[cand]
    step = max(1, 4_000_000 // max(1, cand.size))
    for s in range(0, todo.size, step):
        rows = todo[s:s + step]
        dist = np.abs(idx[rows][:, None, :] - cidx[None, :, :]).max(axis=2)
        out[rows] = cand[np.argmin(dist, axis=1)]
    return out


def nearest_indomain(x_l, U, grid: Grid) -> np.ndarray:
    """Grid point in ``U`` closest to ``x_l`` in sup norm; ties go to the lexicographically smallest index."""
    pred = _domain_predicate(U)
    idx = grid.indices
    inside = pred(idx / grid.M)
    l = np.rint(np.asarray(x_l, dtype=float).reshape(-1) * grid.M).astype(int)
    cand = np.flatnonzero(inside)
    if cand.size == 0:
        raise PreconditionError("grid too coarse for U: no grid point lies in the domain")
    dist = np.abs(idx[cand] - l).max(axis=1)
    return idx[cand[np.argmin(dist)]] / grid.M


def hat_weights(z: np.ndarray, M: int):
    """Active anchors and weights of the hat products at points ``z`` in [0,1]^d.

    Returns ``(index, weight)`` of shape ``(n, 2^d, d)`` and ``(n, 2^d)``.
    """
    z = np.atleast_2d(z)
    n, d = z.shape
    base = np.clip(np.floor(z * M).astype(int), 0, M - 1)
    corners = np.array(list(itertools.product((0, 1), repeat=d)), dtype=int)
    idx = base[:, None, :] + corners[None, :, :]
    w = np.prod(np.maximum(1.0 - M * np.abs(z[:, None, :] - idx / M), 0.0), axis=2)
    return idx, w


# ------------------------------------------------------------------ scheme


@dataclass
class Rescaling:
    """``z = (y - center) / R + 1/2``."""

    center: np.ndarray
    R: float

    def forward(self, y):
        return (np.atleast_2d(y) - self.center) / self.R + 0.5

    def inverse(self, z):
        return self.center + self.R * (np.atleast_2d(z) - 0.5)


def choose_rescaling(f: HolderFunction, center: str | Sequence[float] = "box") -> Rescaling:
    """``R = 1 v 4 max_U |y - c|_inf``; ``center=0`` reproduces the uncentered map.

    With a nonzero center ``R`` is also kept large enough that the input shift
    ``1/2 - c/R`` stays inside [-1, 1].
    """
    if isinstance(center, str):
        if center != "box":
            raise ValueError(f"unknown center {center!r}")
        c = 0.5 * (f.lower + f.upper)
    else:
        c = np.broadcast_to(np.asarray(center, dtype=float), (f.dim,)).copy()
    spread = np.maximum(np.abs(f.lower - c), np.abs(f.upper - c)).max()
    R = max(1.0, 4.0 * float(spread), float(np.abs(c).max()) / 1.5)
    return Rescaling(c, R)


class LocalScheme:
    """The local Taylor scheme for ``h(z) = f(T^{-1} z)`` on the grid ``{l / M}``.

    Anchors outside ``T(U)`` are replaced by their nearest in-domain grid point.
    Polynomials are stored as monomial coefficients in ``z``:
    ``coef[k, g, l]`` for output ``k``, monomial ``g`` and grid index ``l``.
    """

    def __init__(self, f: HolderFunction, M: int, rescaling: Rescaling | None = None, h: float | None = None):
        self.f = f
        self.grid = Grid(M, f.dim)
        self.rescaling = rescaling or Rescaling(np.full(f.dim, 0.5), 1.0)
        self.h = h if h is not None else (f.fd_step or max(1e-4, 1e-2 / M))
        d, R = f.dim, self.rescaling.R
        zpts = self.grid.points
        inside = f.in_domain(self.rescaling.inverse(zpts))
        self.anchor_index = anchor_table(self.grid, inside)
        anchors_used = np.unique(self.anchor_index)
        self.gammas = multi_indices(d, f.degree)
        gpos = {g: i for i, g in enumerate(self.gammas)}
        coef_used = np.zeros((f.out_dim, len(self.gammas), anchors_used.size))
        za = zpts[anchors_used]
        ya = self.rescaling.inverse(za)
        for alpha in self.gammas:
            deriv = f.partial(alpha, ya, self.h) * R ** sum(alpha) / _factorial(alpha)  # (n_a, d')
            for gamma in itertools.product(*(range(a + 1) for a in alpha)):
                w = np.ones(anchors_used.size)
                for ai, gi, zi in zip(alpha, gamma, za.T):
                    if ai - gi:
                        w = w * math.comb(ai, gi) * (-zi) ** (ai - gi)
                    else:
                        w = w * math.comb(ai, gi)
                coef_used[:, gpos[gamma], :] += (deriv * w[:, None]).T
        pos = np.searchsorted(anchors_used, self.anchor_index)
        self.coef = coef_used[:, :, pos]

    @property
    def M(self) -> int:
        return self.grid.M

    def coefficient_bound(self) -> float:
        """``max_{l,k} sum_g |a_{g,l,k}|``, bounds every anchor polynomial on [0,1]^d."""
        if self.coef.size == 0:
            return 0.0
        return float(np.abs(self.coef).sum(axis=1).max())

    def evaluate_z(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        idx, w = hat_weights(z, self.M)
        flat = self.grid.flat(idx.reshape(-1, self.grid.d)).reshape(w.shape)
        mono = monomials(z, self.gammas)  # (n, G)
        out = np.zeros((z.shape[0], self.f.out_dim))
        for k in range(self.f.out_dim):
            c = self.coef[k][:, flat]  # (G, n, 2^d)
            vals = np.einsum("gnc,ng->nc", c, mono)
            out[:, k] = (vals * w).sum(axis=1)
        return out

    def __call__(self, y) -> np.ndarray:
        return self.evaluate_z(self.rescaling.forward(y))


def local_scheme_eval(f: HolderFunction, grid: Grid, x) -> np.ndarray:
    """Scheme value at ``x`` in [0,1]^d with ``U`` taken in the unit-cube coordinates of ``f``."""
    if grid.d != f.dim:
        raise ValueError("grid dimension does not match the function")
    return LocalScheme(f, grid.M)(x)


# ------------------------------------------------------------------ network


def reference_depth(m: int, d: int, beta: float) -> int:
    return 9 + (m + 5) * (1 + int(math.ceil(math.log2(max(d, beta)))))


def sparsity_envelope(N: int, m: int, d: int, beta: float, d_out: int = 1) -> float:
    return 142.0 * d_out * (d + beta + 1) ** (3 + d) * N * (m + 6)


def two_term_bound(N: int, m: int, d: int, beta: float, K: float, R: float) -> float:
    return ((2 * K * R ** beta + 1) * (1 + d * d + beta * beta) * 6 ** d * N * 2.0 ** -m
            + K * (9 * R) ** beta * N ** (-beta / d))


def holder_precondition(d: int, beta: float, K: float) -> float:
    return max(5.0 ** d, (beta + 1) ** d, (K + 1) * math.e ** d)


def gadget_constant(B: float, d: int, degree: int) -> float:
    """Multiplier of ``2^-m`` bounding network-minus-scheme (telescoped Mult trees)."""
    terms = (d - 1) + (degree if degree >= 1 else 0)
    return B * 2 ** d * terms


@dataclass
class HolderNet:
    network: Network
    scheme: LocalScheme
    N: int
    m: int
    B: float
    audit: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.scheme.M

    def oracle(self, x) -> np.ndarray:
        """Scheme values on network inputs."""
        return self.scheme(self.scheme.f.project(x))


def build_holder_net(f: HolderFunction, N: int, m: int, center="box", check_precondition: bool = True,
                     strict_budget: bool = False, prune: bool = True,
                     scheme: LocalScheme | None = None) -> HolderNet:
    """Strict-mode network realizing the rescaled local Taylor scheme of ``f``.

    Layout: ``sigma(T x)`` -> [hat products | monomials] -> Mult(monomial, hat) bank
    -> signed weighted sums / B -> doubling chain restoring the factor ``B = 2^b``.
    With ``prune`` the grid points whose hat never touches the rescaled bounding box
    of ``U``, and those whose local polynomial vanishes identically, are left out;
    on ``U`` the output is unchanged.
    """
    d, D = f.dim, f.degree
    if m < 1:
        raise ValueError("m must be >= 1")
    need = holder_precondition(d, f.beta, f.K)
    if check_precondition and N < need:
        raise PreconditionError(f"N={N} below the required 5^d v (beta+1)^d v (K+1)e^d = {need:.3g}")
    grid = grid_from_budget(N, d)
    M = grid.M
    if scheme is None:
        scheme = LocalScheme(f, M, choose_rescaling(f, center))
    elif scheme.M != M or scheme.f is not f:
        raise ValueError("precomputed scheme does not match f and N")
    resc = scheme.rescaling

    idx = grid.indices
    if prune:
        zlo, zhi = resc.forward(f.lower)[0], resc.forward(f.upper)[0]
        act = np.flatnonzero(np.all(((idx + 1) / M > zlo - _BOX_TOL) & ((idx - 1) / M < zhi + _BOX_TOL), axis=1))
        nonzero = np.any(scheme.coef[:, :, act] != 0, axis=(0, 1))
        act = act[nonzero] if nonzero.any() else act[:1]
    else:
        act = np.arange(grid.size)
    coef = scheme.coef[:, :, act]
    n_anchor = act.size

    # input map z = sigma(A x + b), A = F / R
    F = np.eye(d) if f.projection is None else f.projection
    s1 = build_affine(F / resc.R, 0.5 - resc.center / resc.R)

    # hat products, one per kept grid index
    levels = [np.unique(idx[act, j]) for j in range(d)]
    hats = hat_net(d, M, levels)
    offsets = np.concatenate([[0], np.cumsum([lv.size for lv in levels])])
    if d == 1:
        hp = hats
    else:
        factors = [[int(offsets[j] + np.searchsorted(levels[j], l)) for j, l in enumerate(row)] for row in idx[act]]
        hp = compose(product_net(int(offsets[-1]), factors, m), hats)

    gam = [g for g in scheme.gammas if sum(g) >= 1]
    mult_depth = build_mult(m).depth
    if gam:
        mono = product_net(d, [[i for i in range(d) for _ in range(g[i])] for g in gam], m)
        depth = max(hp.depth, mono.depth)
        s2 = parallelize(pad_to_depth(hp, depth), pad_to_depth(mono, depth))
        n_g = len(gam)
        # inputs of s3: [H_0..H_{N-1}, mono_0..mono_{G-1}]
        pairs = [(n_anchor + g, l) for g in range(n_g) for l in range(n_anchor)]
        bank = mult_bank(pairs, n_anchor + n_g, m)
        carry = select_inputs(identity_net(n_anchor, mult_depth), list(range(n_anchor)), n_anchor + n_g)
        s3 = parallelize(bank, carry)
        gpos = [scheme.gammas.index(g) for g in gam]
        const_pos = scheme.gammas.index((0,) * d)
        sums = np.concatenate([coef[:, gpos, :].reshape(f.out_dim, -1), coef[:, const_pos, :]], axis=1)
    else:
        s2 = hp
        s3 = None
        sums = coef[:, 0, :]

    B = float(np.abs(coef).sum(axis=1).max()) if coef.size else 0.0
    b = int(math.ceil(math.log2(B))) if B > 0 else 0
    b = max(b, 0)
    B = 2.0 ** b
    signed = np.vstack([sums, -sums]) / B  # rows: +S_k, -S_k
    out_dim = f.out_dim

    body = compose(s2, s1)
    if s3 is not None:
        body = compose(map_outputs(s3, signed), body)
    else:
        body = compose(linear_net(signed), body)
    if b >= 1:
        tail = map_outputs(doubling_net(2 * out_dim, b), np.hstack([np.eye(out_dim), -np.eye(out_dim)]))
    else:
        tail = linear_net(np.hstack([np.eye(out_dim), -np.eye(out_dim)]))
    net = compose(tail, body)

    rep = sparsity(net)
    c_gadget = gadget_constant(B, d, D)
    audit = {
        "N": N, "M": M, "m": m, "R": resc.R, "B": B, "anchors": n_anchor,
        "depth": net.depth, "max_width": max(net.widths[1:-1] or (0,)), "sparsity": rep.nonzero_count,
        "reference_depth": reference_depth(m, d, f.beta),
        "sparsity_envelope": sparsity_envelope(N, m, d, f.beta, out_dim),
        "two_term_bound": two_term_bound(N, m, d, f.beta, f.K, resc.R),
        "gadget_constant": c_gadget,
        "gadget_bound": c_gadget * 2.0 ** -m,
        "scheme_bound": f.K * resc.R ** f.beta * 3 ** f.beta * M ** -f.beta,
    }
    log.info("holder net %s: %s", f.name, audit)
    if rep.nonzero_count > audit["sparsity_envelope"]:
        msg = f"sparsity {rep.nonzero_count} exceeds the envelope {audit['sparsity_envelope']:.4g}"
        if strict_budget:
            raise NetworkError(msg)
        log.warning(msg)
    return HolderNet(net, scheme, N, m, B, audit)


def choose_m(N: int, d: int, beta: float, extra: int = 2) -> int:
    """Accuracy exponent making the gadget error negligible next to ``N^{-beta/d}``."""
    return max(1, int(math.ceil((1 + beta / d) * math.log2(max(N, 2)))) + extra)


def measure(hn: HolderNet, x, chunk: int = 128) -> dict:
    """Sup errors of the network against ``f`` and against the scheme on points ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = evaluate(hn.network, x, chunk)
    f = hn.scheme.f
    return {"sup_error": float(np.abs(out - f.ambient(x)).max()),
            "gadget_error": float(np.abs(out - hn.oracle(x)).max()),
            "scheme_error": float(np.abs(hn.oracle(x) - f.ambient(x)).max())}
