"""Charts, built-in manifolds and a smooth partition of unity subordinate to an atlas.

Every chart has the form ``psi(x) = offset + link(F x)`` where ``F`` is a
``(d*, d)`` feature matrix and ``link`` acts per coordinate (``arcsin`` or the
identity), and its patch is cut out by linear gates ``{x in M : n . x > level}``.
The offset places the coordinate image inside [1, inf)^{d*}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

ARCSIN = "arcsin"
IDENTITY = "identity"

_LINKS = {
    ARCSIN: (np.arcsin, np.sin),
    IDENTITY: (lambda s: s, lambda s: s),
}


@dataclass
class Chart:
    features: np.ndarray  # (d*, d)
    offset: np.ndarray  # (d*,)
    links: tuple
    gates: list  # [(normal (d,), level)]
    coord_lo: np.ndarray
    coord_hi: np.ndarray
    inverse_fn: Callable[[np.ndarray], np.ndarray]
    name: str = "chart"

    @property
    def d_star(self) -> int:
        return self.features.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.features.shape[1]

    def feature_values(self, x) -> np.ndarray:
        return np.atleast_2d(np.asarray(x, dtype=float)) @ self.features.T

    def forward(self, x) -> np.ndarray:
        s = self.feature_values(x)
        out = np.empty_like(s)
        for i, link in enumerate(self.links):
            out[:, i] = _LINKS[link][0](np.clip(s[:, i], -1.0, 1.0) if link == ARCSIN else s[:, i])
        return out + self.offset

    def features_of(self, t) -> np.ndarray:
        """Feature values ``F x`` belonging to chart coordinates ``t``."""
        t = np.atleast_2d(np.asarray(t, dtype=float)) - self.offset
        out = np.empty_like(t)
        for i, link in enumerate(self.links):
            out[:, i] = _LINKS[link][1](t[:, i])
        return out

    def inverse(self, t) -> np.ndarray:
        return self.inverse_fn(np.atleast_2d(np.asarray(t, dtype=float)))

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.ones(x.shape[0], dtype=bool)
        for normal, level in self.gates:
            inside &= x @ normal > level
        return inside

    @property
    def feature_box(self) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.features_of(self.coord_lo)[0], self.features_of(self.coord_hi)[0]
        return np.minimum(a, b), np.maximum(a, b)


@dataclass
class Manifold:
    name: str
    d: int
    d_star: int
    charts: list
    sampler: Callable[[int, np.random.Generator], np.ndarray]
    mesher: Callable[[int], np.ndarray]
    diameter: float = 2.0
    # maps ambient points to the coordinates of the unembedded manifold (None: identity)
    base_coords: np.ndarray | None = None

    @property
    def base_dim(self) -> int:
        return self.d if self.base_coords is None else self.base_coords.shape[0]

    @property
    def r(self) -> int:
        return len(self.charts)

    def sample(self, n: int, rng=None) -> np.ndarray:
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        return self.sampler(n, rng)

    def mesh(self, n: int) -> np.ndarray:
        """Deterministic quasi-uniform point set of roughly ``n`` points."""
        return self.mesher(n)

    def coverage(self, x) -> np.ndarray:
        return np.stack([c.contains(x) for c in self.charts], axis=1).sum(axis=1)

    def in_margin(self, x, j: int, delta: float, resolution: int = 10_000) -> np.ndarray:
        return in_margin(self, x, j, delta, resolution)


# ------------------------------------------------------------------ built-ins


def _circle_point(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.stack([np.sin(t), np.cos(t)], axis=-1)


def make_circle(n_charts: int = 4, half_width: float = 3 * math.pi / 8) -> Manifold:
    """Unit circle ``(sin t, cos t)`` with ``n_charts`` overlapping arcsin charts.

    Chart ``j`` is centered at ``t_j = 2 pi j / n_charts`` and covers
    ``|t - t_j| < half_width``; its coordinate is ``1 + half_width + (t - t_j)``,
    computed as ``offset + arcsin(u_j . x)`` with ``u_j = (cos t_j, -sin t_j)``.
    """
    if not 0 < half_width < math.pi / 2:
        raise ValueError("half_width must lie in (0, pi/2) for arcsin charts")
    if n_charts * 2 * half_width <= 2 * math.pi:
        raise ValueError("charts do not cover the circle")
    charts = []
    offset = 1.0 + half_width
    for j in range(n_charts):
        tj = 2 * math.pi * j / n_charts
        u = np.array([math.cos(tj), -math.sin(tj)])
        normal = np.array([math.sin(tj), math.cos(tj)])

        def inv(t, tj=tj):
            return _circle_point(tj + t[:, 0] - offset)

        charts.append(Chart(u[None, :], np.array([offset]), (ARCSIN,), [(normal, math.cos(half_width))],
                            np.array([1.0]), np.array([1.0 + 2 * half_width]), inv, f"arc{j}"))

    def sampler(n, rng):
        return _circle_point(rng.uniform(0.0, 2 * math.pi, n))

    def mesher(n):
        return _circle_point(2 * math.pi * (np.arange(n) + 0.5) / n)

    return Manifold("circle", 2, 1, charts, sampler, mesher, 2.0)


def make_interval(lo: float = 0.0, hi: float = 1.0) -> Manifold:
    """The segment [lo, hi] in R with a single identity chart.

    It has a boundary, so no bump partition with a positive chart margin exists;
    ``build_partition`` raises ``CoverageError`` on it.
    """
    offset = 1.0 - lo

    def inv(t):
        return t - offset

    chart = Chart(np.eye(1), np.array([offset]), (IDENTITY,), [], np.array([1.0]),
                  np.array([1.0 + hi - lo]), inv, "interval")

    def sampler(n, rng):
        return rng.uniform(lo, hi, (n, 1))

    def mesher(n):
        return (lo + (hi - lo) * (np.arange(n) + 0.5) / n)[:, None]

    return Manifold("interval", 1, 1, [chart], sampler, mesher, hi - lo)


def make_product(A: Manifold, B: Manifold) -> Manifold:
    """Product manifold with the product atlas (``r_A * r_B`` charts)."""
    charts = []
    dA, dB = A.d, B.d
    for ca in A.charts:
        for cb in B.charts:
            F = scipy.linalg.block_diag(ca.features, cb.features)
            gates = [(np.concatenate([n, np.zeros(dB)]), lv) for n, lv in ca.gates]
            gates += [(np.concatenate([np.zeros(dA), n]), lv) for n, lv in cb.gates]
            k = ca.d_star

            def inv(t, ca=ca, cb=cb, k=k):
                return np.hstack([ca.inverse(t[:, :k]), cb.inverse(t[:, k:])])

            charts.append(Chart(F, np.concatenate([ca.offset, cb.offset]), ca.links + cb.links, gates,
                                np.concatenate([ca.coord_lo, cb.coord_lo]),
                                np.concatenate([ca.coord_hi, cb.coord_hi]), inv, f"{ca.name}x{cb.name}"))

    def sampler(n, rng):
        return np.hstack([A.sampler(n, rng), B.sampler(n, rng)])

    def mesher(n):
        ka = max(1, int(round(n ** (A.d_star / (A.d_star + B.d_star)))))
        kb = max(1, int(math.ceil(n / ka)))
        pa, pb = A.mesher(ka), B.mesher(kb)
        return np.hstack([np.repeat(pa, len(pb), axis=0), np.tile(pb, (len(pa), 1))])

    return Manifold(f"{A.name}x{B.name}", dA + dB, A.d_star + B.d_star, charts, sampler, mesher,
                    max(A.diameter, B.diameter))


def random_orthonormal(d: int, k: int, seed: int = 0) -> np.ndarray:
    """``(d, k)`` matrix with orthonormal columns from a fixed-seed Gaussian draw."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, k)))
    return q * np.sign(np.diag(r))


def embed_linear(base: Manifold, d: int, seed: int = 0) -> Manifold:
    """Image of ``base`` under a fixed-seed linear isometry ``R^{base.d} -> R^d``."""
    if d < base.d:
        raise ValueError("target dimension smaller than the ambient dimension")
    Q = random_orthonormal(d, base.d, seed)
    charts = []
    for c in base.charts:
        def inv(t, c=c):
            return c.inverse(t) @ Q.T

        charts.append(Chart(c.features @ Q.T, c.offset, c.links, [(Q @ n, lv) for n, lv in c.gates],
                            c.coord_lo, c.coord_hi, inv, c.name))

    def sampler(n, rng):
        return base.sampler(n, rng) @ Q.T

    def mesher(n):
        return base.mesher(n) @ Q.T

    coords = Q.T if base.base_coords is None else base.base_coords @ Q.T
    return Manifold(f"{base.name}_in_R{d}", d, base.d_star, charts, sampler, mesher, base.diameter, coords)


def make_torus() -> Manifold:
    return make_product(make_circle(), make_circle())


def circle_embedded(d: int = 10, seed: int = 0) -> Manifold:
    if not 2 <= d <= 16:
        raise ValueError("embedding dimension must lie in 2..16")
    return embed_linear(make_circle(), d, seed)


def manifold_by_name(name: str, **kw) -> Manifold:
    if name == "circle":
        return make_circle()
    if name == "torus":
        return make_torus()
    if name == "circle_embedded":
        return circle_embedded(kw.get("dim", 10), kw.get("seed", 0))
    if name == "interval":
        return make_interval()
    raise ValueError(f"unknown manifold {name!r}")


# ------------------------------------------------------------------ margins


_COMPLEMENT_CACHE: dict = {}


def _complement_tree(M: Manifold, j: int, resolution: int):
    key = (id(M), j, resolution)
    hit = _COMPLEMENT_CACHE.get(key)
    if hit is not None and hit[0] is M:
        return hit[1]
    pts = M.mesh(resolution)
    rest = pts[~M.charts[j].contains(pts)]
    tree = cKDTree(rest) if len(rest) else None
    _COMPLEMENT_CACHE[key] = (M, tree)
    return tree


def distance_to_complement(M: Manifold, x, j: int, resolution: int = 10_000) -> np.ndarray:
    """Sup-norm distance from points ``x`` to a dense sample of ``M \\ V_j``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    tree = _complement_tree(M, j, resolution)
    if tree is None:
        return np.full(x.shape[0], M.diameter)
    dist, _ = tree.query(x, p=np.inf)
    return dist


def in_margin(M: Manifold, x, j: int, delta: float, resolution: int = 10_000) -> np.ndarray:
    """Membership in ``V_j^{-delta}`` with the complement distance taken on a dense sample."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    inside = M.charts[j].contains(x)
    if delta == 0:
        return inside
    out = np.zeros(x.shape[0], dtype=bool)
    if inside.any():
        out[inside] = distance_to_complement(M, x[inside], j, resolution) >= delta
    return out


# ------------------------------------------------------------------ smooth pieces


def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(x) -> np.ndarray:
    """C-infinity step: 0 for ``x <= 1/4``, 1 for ``x >= 3/4``."""
    x = np.asarray(x, dtype=float)
    a, b = _psi(x - 0.25), _psi(0.75 - x)
    return a / (a + b)


def smoothed_division(u, v, sigma_lo: float, sigma_hi: float) -> np.ndarray:
    """Smooth ``G`` with ``G(u, v) = u / v`` whenever ``-1/4 <= u <= sigma_hi`` and
    ``sigma_lo <= v <= sigma_hi``, and ``G = 0`` outside a bounded set.

    Cutoffs: ``K(u + 1) K(v / sigma_lo) K(sigma_hi + 1 - u) K(sigma_hi + 1 - v)``.
    """
    if not sigma_lo > 0 or sigma_hi < sigma_lo:
        raise ValueError("need 0 < sigma_lo <= sigma_hi")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cut = (smooth_step(u + 1.0) * smooth_step(v / sigma_lo)
           * smooth_step(sigma_hi + 1.0 - u) * smooth_step(sigma_hi + 1.0 - v))
    safe = np.where(cut > 0, v, 1.0)
    return np.where(cut > 0, cut * u / safe, 0.0)


def bump(r2) -> np.ndarray:
    """``exp(-1 / (1 - r^2))`` for ``r^2 < 1``, else 0."""
    r2 = np.asarray(r2, dtype=float)
    out = np.zeros_like(r2)
    inside = r2 < 1
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


# ------------------------------------------------------------------ partition of unity


@dataclass
class PartitionOfUnity:
    manifold: Manifold
    centers: list  # per chart (n_c, d*) in chart coordinates
    radii: list  # per chart (n_c,)
    sigma_lo: float
    sigma_hi: float
    delta_low: float
    resolution: int = 10_000
    delta_prime: list = field(default_factory=list)
    margin_boxes: list = field(default_factory=list)

    @property
    def r(self) -> int:
        return self.manifold.r

    def sigma(self, x, j: int) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        chart = self.manifold.charts[j]
        out = np.zeros(x.shape[0])
        inside = chart.contains(x)
        if inside.any() and len(self.centers[j]):
            t = chart.forward(x[inside])
            c, rho = self.centers[j], self.radii[j]
            r2 = ((t[:, None, :] - c[None, :, :]) / rho[None, :, None]) ** 2
            out[inside] = bump(r2).prod(axis=2).sum(axis=1) * math.e ** self.manifold.d_star
        return out

    def sigmas(self, x) -> np.ndarray:
        return np.stack([self.sigma(x, j) for j in range(self.r)], axis=1)

    def tau(self, x) -> np.ndarray:
        """All ``tau_j`` at ``x``, shape ``(n, r)``."""
        s = self.sigmas(x)
        total = s.sum(axis=1, keepdims=True)
        return smoothed_division(s, total, 0.5 * self.sigma_lo, 2.0 * self.sigma_hi)

    def tau_j(self, x, j: int) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = self.sigmas(x)
        return smoothed_division(s[:, j], s.sum(axis=1), 0.5 * self.sigma_lo, 2.0 * self.sigma_hi)


class CoverageError(ValueError):
    pass


def _grid_centers(lo, hi, k: int) -> np.ndarray:
    axes = [lo[i] + (np.arange(k) + 0.5) * (hi[i] - lo[i]) / k for i in range(lo.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _cube_probe(d_star: int, n: int, rng) -> np.ndarray:
    """Points of the closed unit sup-ball, including its corners and a boundary sample."""
    inner = rng.uniform(-1.0, 1.0, (n, d_star))
    face = rng.uniform(-1.0, 1.0, (n, d_star))
    face[np.arange(n), rng.integers(0, d_star, n)] = rng.choice([-1.0, 1.0], n)
    corners = np.array(list(itertools.product((-1.0, 1.0), repeat=d_star)))
    return np.vstack([inner, face, corners])


def build_partition(M: Manifold, centers_per_chart: int, resolution: int = 10_000, seed: int = 0,
                    min_margin_fraction: float = 0.3) -> PartitionOfUnity:
    """Bump-function partition of unity subordinate to the atlas of ``M``.

    Bumps are tensor products of ``exp(-1 / (1 - t^2))`` (normalized to 1 at the
    center) on a grid of ``centers_per_chart`` points per coordinate axis; each
    radius is shrunk until the bump support maps into the sup-ball of radius
    ``delta(x_c) / 2`` around the center, ``delta`` being the distance to the
    chart complement.  Centers whose margin is below ``min_margin_fraction`` of
    the chart's best margin are skipped (they would only add sharp features).
    """
    if centers_per_chart < 1:
        raise ValueError("centers_per_chart must be >= 1")
    rng = np.random.default_rng(seed)
    probe = _cube_probe(M.d_star, 256, rng)
    centers, radii, deltas = [], [], []
    for j, chart in enumerate(M.charts):
        c = _grid_centers(chart.coord_lo, chart.coord_hi, centers_per_chart)
        xc = chart.inverse(c)
        keep = chart.contains(xc)
        c, xc = c[keep], xc[keep]
        delta = distance_to_complement(M, xc, j, resolution)
        keep = delta >= min_margin_fraction * delta.max() if delta.size else keep[:0]
        c, xc, delta = c[keep], xc[keep], delta[keep]
        # start from the coordinate distance to the image boundary and shrink
        rho = np.minimum(c - chart.coord_lo, chart.coord_hi - c).min(axis=1)
        for i in range(len(c)):
            for _ in range(200):
                pts = chart.inverse(c[i] + rho[i] * probe)
                if np.abs(pts - xc[i]).max() < delta[i] / 2:
                    break
                rho[i] *= 0.95
        centers.append(c)
        radii.append(rho)
        deltas.append(delta)
    all_delta = np.concatenate(deltas) if deltas else np.zeros(0)
    if all_delta.size == 0:
        raise CoverageError("no admissible bump centers; increase centers_per_chart")
    pou = PartitionOfUnity(M, centers, radii, 1.0, 1.0, float(all_delta.min() / 2), resolution)
    pts = M.mesh(resolution)
    total = pou.sigmas(pts).sum(axis=1)
    lo, hi = float(total.min()), float(total.max())
    if not lo > 1e-8:
        raise CoverageError(f"bumps do not cover the manifold (min sum {lo:.3g}); increase centers_per_chart")
    pou.sigma_lo, pou.sigma_hi = lo, hi
    _audit_margins(pou, pts)
    return pou


def _audit_margins(pou: PartitionOfUnity, pts: np.ndarray) -> None:
    """Record the coordinate box of ``psi_j(V_j^{-delta})`` and its distance ``delta'`` to the image boundary."""
    M = pou.manifold
    pou.delta_prime, pou.margin_boxes = [], []
    for j, chart in enumerate(M.charts):
        inner = pts[in_margin(M, pts, j, pou.delta_low, pou.resolution)]
        if len(inner) == 0:
            raise CoverageError(f"chart {j}: empty margin set")
        t = chart.forward(inner)
        blo, bhi = t.min(axis=0), t.max(axis=0)
        dp = float(min((blo - chart.coord_lo).min(), (chart.coord_hi - bhi).min()))
        if not dp > 0:
            raise CoverageError(f"chart {j}: margin set reaches the chart boundary (delta' = {dp:.3g})")
        pou.delta_prime.append(dp)
        pou.margin_boxes.append((blo, bhi))


def audit_partition(pou: PartitionOfUnity, x) -> dict:
    """Sampled checks of nonnegativity, sum-to-one and support containment."""
    tau = pou.tau(x)
    supp_ok = True
    for j in range(pou.r):
        pos = tau[:, j] > 0
        if pos.any():
            supp_ok &= bool(in_margin(pou.manifold, x[pos], j, pou.delta_low, pou.resolution).all())
    return {"min": float(tau.min()), "sum_error": float(np.abs(tau.sum(axis=1) - 1).max()),
            "support_ok": supp_ok, "delta_low": pou.delta_low}
