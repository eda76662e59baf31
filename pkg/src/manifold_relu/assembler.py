"""Network approximation of a function on a manifold by chart-wise pipelines.

For every chart ``j`` the assembled network computes

    Mult*( sigma(+g_j(psi_j(x))), sigma(-g_j(psi_j(x))), tau_j(x) ),   g_j = f o psi_j^{-1},

and the final layer sums ``(+channel) - (-channel)`` over the charts.  Each
stage (chart map, pullback, partition function) is a local-Taylor network whose
grid is refined until its measured sup error meets the stage budget.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy

from .calculus import compose, linear_net, map_outputs, pad_to_depth, parallelize
from .holder import (
    HolderFunction,
    HolderNet,
    LocalScheme,
    build_holder_net,
    choose_rescaling,
    gadget_constant,
    measure,
)
from .manifold import ARCSIN, Chart, Manifold, PartitionOfUnity, in_margin, smooth_step
from .network import Network, evaluate, sparsity, validate
from .primitives import build_mult, build_mult_star, mult_star_exponent, product_net

log = logging.getLogger(__name__)


class BudgetError(RuntimeError):
    def __init__(self, stage: str, measured: float, budget: float, hint: str = ""):
        super().__init__(f"{stage}: measured error {measured:.4g} exceeds budget {budget:.4g}"
                         + (f"; {hint}" if hint else ""))
        self.stage, self.measured, self.budget = stage, measured, budget


@dataclass(frozen=True)
class ErrorBudget:
    eta: float
    r: int
    beta: float
    delta_prime: float
    chart: float
    pullback: float
    partition: float
    mult: float

    def recombined(self) -> float:
        """``r * (mult + partition + chart^(beta ^ 1) + pullback)`` (Lipschitz constant one)."""
        return self.r * (self.mult + self.partition + self.chart ** min(self.beta, 1.0) + self.pullback)


def error_budget(eta: float, r: int, delta_prime: float, beta: float) -> ErrorBudget:
    if not 0 < eta <= 0.5:
        raise ValueError("eta must lie in (0, 1/2]")
    if r < 1 or not delta_prime > 0:
        raise ValueError("need r >= 1 and delta' > 0")
    share = eta / (4 * r)
    chart = min(share ** (1.0 / min(beta, 1.0)), delta_prime / 4)
    eb = ErrorBudget(eta, r, beta, delta_prime, chart, share, share, share)
    assert eb.recombined() <= eta * (1 + 1e-12)
    return eb


# ------------------------------------------------------------------ stage search


def _next_M(M: int) -> int:
    return max(M + 1, int(math.ceil(M * 1.15)))


def accuracy_exponent(B: float, d: int, degree: int, target: float) -> int:
    """Smallest ``m`` with gadget error ``C 2^-m <= target``."""
    c = gadget_constant(B, d, degree)
    return max(1, int(math.ceil(math.log2(c / target)))) if c > 0 else 1


def fit_holder_net(f: HolderFunction, points: np.ndarray, budget: float, stage: str,
                   M_start: int = 2, M_max: int = 4096, err_fn: Callable | None = None) -> tuple[HolderNet, float]:
    """Smallest grid (searched geometrically) whose network meets ``budget`` on ``points``.

    ``points`` are network inputs.  ``err_fn(net_out, points)`` overrides the default
    sup error against ``f``.
    """
    target_vals = f.ambient(points)
    M = M_start
    last = float("inf")
    while M <= M_max:
        scheme = LocalScheme(f, M, choose_rescaling(f))
        s_err = float(np.abs(scheme(f.project(points)) - target_vals).max())
        if s_err <= 0.7 * budget:
            N = (M + 1) ** f.dim
            B = max(scheme.coefficient_bound(), 1e-300)
            m = accuracy_exponent(2.0 ** max(0, math.ceil(math.log2(B))), f.dim, f.degree, 0.1 * budget)
            hn = build_holder_net(f, N, m, check_precondition=False, scheme=scheme)
            out = evaluate(hn.network, points)
            err = float(np.abs(out - target_vals).max()) if err_fn is None else float(err_fn(out, points))
            last = err
            if err <= budget:
                hn.audit.update(stage=stage, measured=err, budget=budget, scheme_error=s_err)
                return hn, err
        M = _next_M(M)
    raise BudgetError(stage, last, budget, "increase N/m (grid search exhausted)")


def estimate_holder_constant(f: HolderFunction, n: int = 4000, seed: int = 0) -> float:
    """Sampled ``sum_{|a| <= D} sup|d^a f| + max_{|a| = D} Hölder quotient`` (rough)."""
    from .holder import multi_indices

    rng = np.random.default_rng(seed)
    y = f.lower + (f.upper - f.lower) * rng.random((n, f.dim))
    y = y[f.in_domain(y)]
    if len(y) < 2:
        return 1.0
    D = f.degree
    total = 0.0
    for a in multi_indices(f.dim, D):
        total += float(np.abs(f.partial(a, y)).max())
    step = 1e-2 * float((f.upper - f.lower).max() or 1.0)
    y2 = np.clip(y + step * rng.uniform(-1, 1, y.shape), f.lower, f.upper)
    dist = np.abs(y2 - y).max(axis=1)
    ok = dist > 0
    q = 0.0
    for a in multi_indices(f.dim, D, D):
        diff = np.abs(f.partial(a, y[ok]) - f.partial(a, y2[ok])).max(axis=1)
        q = max(q, float((diff / dist[ok] ** (f.beta - D)).max()))
    return max(total + q, 1e-6)


# ------------------------------------------------------------------ per-chart pieces


def _chart_samples(manifold: Manifold, j: int, n: int, seed: int = 0) -> np.ndarray:
    pts = np.vstack([manifold.mesh(n), manifold.sample(n, seed)])
    return pts[manifold.charts[j].contains(pts)]


def chart_function(chart: Chart, beta: float) -> HolderFunction:
    """``psi_j`` as a function of the chart features ``s = F x``."""
    syms = sympy.symbols(f"s0:{chart.d_star}")
    exprs = [float(chart.offset[i]) + (sympy.asin(s) if link == ARCSIN else s)
             for i, (s, link) in enumerate(zip(syms, chart.links))]
    lo, hi = chart.feature_box
    f = HolderFunction.from_sympy(exprs, syms, max(beta, 1.0), 1.0, lo, hi, name="chart",
                                  projection=chart.features)
    f.K = estimate_holder_constant(f)
    return f


def build_chart_net(manifold: Manifold, j: int, budget: float, beta: float = 2.0,
                    n_samples: int = 10_000) -> HolderNet:
    chart = manifold.charts[j]
    f = chart_function(chart, beta)
    pts = _chart_samples(manifold, j, n_samples)

    def err(out, x):
        return np.abs(out - chart.forward(x)).max()

    hn, e = fit_holder_net(f, pts, budget, f"chart[{j}]", err_fn=err)
    out = evaluate(hn.network, pts)
    hn.audit["min_output"] = float(out.min())
    return hn


def pullback_function(f: HolderFunction, chart: Chart, lo, hi, beta: float) -> HolderFunction:
    def g(t):
        return f.ambient(chart.inverse(t))

    h = HolderFunction(g, chart.d_star, beta, 1.0, lo, hi, f.out_dim, name="pullback")
    h.K = estimate_holder_constant(h)
    return h


def build_pullback_net(f: HolderFunction, manifold: Manifold, partition: PartitionOfUnity, j: int,
                       budget: float, n_grid: int = 2001) -> tuple[Network, dict]:
    """Two outputs approximating ``(g, -g) / (1 + err)`` for ``g = f o psi_j^{-1}`` on the
    ``delta'/2``-fattened coordinate box of ``V_j^{-delta}``."""
    chart = manifold.charts[j]
    blo, bhi = partition.margin_boxes[j]
    pad = partition.delta_prime[j] / 2
    lo, hi = blo - pad, bhi + pad
    g = pullback_function(f, chart, lo, hi, f.beta)
    k = chart.d_star
    per_axis = max(3, int(round(n_grid ** (1.0 / k))))
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(k)]
    pts = np.stack([a.reshape(-1) for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    gv = g(pts)
    target = budget
    for _ in range(8):
        hn, e = fit_holder_net(g, pts, 0.45 * target, f"pullback[{j}]")
        c = 1.0 / (1.0 + e)
        net = map_outputs(hn.network, [[c], [-c]])
        out = evaluate(net, pts)
        err = float(max(np.abs(out[:, 0] - gv[:, 0]).max(), np.abs(out[:, 1] + gv[:, 0]).max()))
        if err <= budget:
            info = dict(hn.audit, normalization=c, measured=err, budget=budget)
            return net, info
        target *= 0.7
    raise BudgetError(f"pullback[{j}]", err, budget)


def _clip01(net: Network) -> Network:
    """Append ``y -> sigma(y) - sigma(y - 1)`` (one layer) to a single-output network."""
    return compose(linear_net([[1.0, -1.0]]), map_outputs(net, [[1.0], [1.0]]), v=[0.0, 1.0])


def tau_factors(partition: PartitionOfUnity, j: int, beta: float, n_mesh: int = 20_000):
    """Factor ``tau_j(x) = h_j(F_j x) * prod_i chi_i(n_i . x)`` on the manifold.

    ``h_j`` is ``tau_j`` read through the chart features (front sheet of the link).
    A point sharing its features with a supported point but lying on the back sheet
    of factor ``i`` has ``n_i . x <= -c_i`` where ``c_i = min n_i . x`` over the
    support, so ``chi_i`` steps from 0 at ``-c_i`` to 1 at ``c_i`` and the product is
    exact on the manifold.
    """
    M = partition.manifold
    chart = M.charts[j]
    mesh = M.mesh(n_mesh)
    tau = partition.tau_j(mesh, j)
    supp = mesh[tau > 0]
    k = chart.d_star
    lo = np.array([-1.0 if l == ARCSIN else chart.feature_box[0][i] for i, l in enumerate(chart.links)])
    hi = np.array([1.0 if l == ARCSIN else chart.feature_box[1][i] for i, l in enumerate(chart.links)])

    def h(s):
        t = np.empty_like(s)
        for i, l in enumerate(chart.links):
            t[:, i] = chart.offset[i] + (np.arcsin(np.clip(s[:, i], -1, 1)) if l == ARCSIN else s[:, i])
        return partition.tau_j(chart.inverse(t), j)

    hf = HolderFunction(h, k, beta, 1.0, lo, hi, name=f"tau_h[{j}]", projection=chart.features)
    gates = []
    for i, (normal, level) in enumerate(chart.gates):
        top = float((supp @ normal).min())
        if not top > max(level, 0.0):
            raise BudgetError(f"tau[{j}]", float("nan"), 0.0, "support touches the chart boundary")

        def chi(c, top=top):
            return smooth_step(0.25 + 0.25 * (c[:, 0] + top) / top)

        gates.append(HolderFunction(chi, 1, beta, 1.0, [-1.0], [1.0], name=f"tau_gate[{j},{i}]",
                                    projection=normal[None, :]))
    return hf, gates


def build_tau_net(partition: PartitionOfUnity, j: int, budget: float, beta: float = 3.0,
                  n_samples: int = 10_000, seed: int = 0) -> tuple[Network, dict]:
    """``(tau_bar - shift)_+`` with ``tau_bar`` a Mult-product of clipped factor networks and
    ``shift`` the sup error of ``tau_bar`` measured on a dense manifold sample.

    ``tau_j`` is C-infinity, so any smoothness index may be declared; ``beta`` sets the
    Taylor degree of the factor networks.
    """
    M = partition.manifold
    hf, gates = tau_factors(partition, j, beta)
    pts = np.vstack([M.mesh(n_samples), M.sample(n_samples // 4, seed)])
    tau = partition.tau_j(pts, j)
    n_fac = 1 + len(gates)
    part = budget / 2 / (n_fac + 0.5)
    t0 = time.perf_counter()
    e_bar = float("inf")
    for _ in range(6):
        nets, fac_info = [], []
        for fac in [hf] + gates:
            hn, e = fit_holder_net(fac, pts, part, fac.name)
            nets.append(_clip01(hn.network))
            fac_info.append({"M": hn.M, "m": hn.m, "sparsity": hn.audit["sparsity"], "measured": e})
        if n_fac > 1:
            m = max(1, int(math.ceil(math.log2(n_fac / (0.25 * part)))))
            depth = max(n.depth for n in nets)
            stack = parallelize(*[pad_to_depth(n, depth) for n in nets])
            bar = compose(product_net(n_fac, [list(range(n_fac))], m), stack)
        else:
            m, bar = None, nets[0]
        e_bar = float(np.abs(evaluate(bar, pts)[:, 0] - tau).max())
        if 2 * e_bar <= budget:
            net = compose(linear_net([[1.0]]), bar, v=[e_bar])
            out = evaluate(net, pts)[:, 0]
            info = {"stage": f"tau[{j}]", "tau_bar_error": e_bar, "shift": e_bar,
                    "measured": float(np.abs(out - tau).max()), "budget": budget,
                    "support_ok": bool(np.all(out[tau == 0] == 0)), "m": m, "factors": fac_info,
                    "sparsity": sparsity(net).nonzero_count, "seconds": time.perf_counter() - t0}
            return net, info
        part *= 0.6
    raise BudgetError(f"tau[{j}]", 2 * e_bar, budget)


# ------------------------------------------------------------------ assembly


@dataclass
class Assembly:
    network: Network
    budget: ErrorBudget
    audit: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)


def assemble(f: HolderFunction, manifold: Manifold, partition: PartitionOfUnity, eta: float,
             n_samples: int = 10_000, seed: int = 0, cache: dict | None = None) -> Assembly:
    """Single-output strict network with measured sup error at most ``eta`` on ``manifold``.

    Chart and partition networks do not depend on ``f``; passing the same ``cache``
    dict to several calls with the same ``partition`` reuses them.
    """
    cache = {} if cache is None else cache
    if not 0 < eta <= 0.5:
        raise ValueError("eta must lie in (0, 1/2]")
    if f.input_dim != manifold.d:
        raise ValueError("target function must take ambient points")
    t0 = time.perf_counter()
    r, beta = manifold.r, f.beta
    eb = error_budget(eta, r, min(partition.delta_prime), beta)
    stages = []
    composites, taus = [], []
    for j in range(r):
        dp = partition.delta_prime[j]
        chart_budget = min(eb.chart, dp / 4)
        inner = _chart_samples(manifold, j, n_samples)
        inner = inner[in_margin(manifold, inner, j, partition.delta_low, partition.resolution)]
        fv = f.ambient(inner)[:, 0]
        pull, pinfo = build_pullback_net(f, manifold, partition, j, eb.pullback)
        for _ in range(6):
            key = ("chart", id(partition), j, chart_budget, beta)
            if key not in cache:
                cache[key] = build_chart_net(manifold, j, chart_budget, beta, n_samples)
            chart = cache[key]
            comp = compose(pull, chart.network)
            out = evaluate(comp, inner)
            e_comp = float(max(np.abs(out[:, 0] - fv).max(), np.abs(out[:, 1] + fv).max()))
            if e_comp <= eta / (2 * r):
                break
            chart_budget *= 0.5
        else:
            raise BudgetError(f"composite[{j}]", e_comp, eta / (2 * r))
        key = ("tau", id(partition), j, eb.partition, max(beta, 3.0))
        if key not in cache:
            cache[key] = build_tau_net(partition, j, eb.partition, max(beta, 3.0), n_samples, seed)
        tau_net, tinfo = cache[key]
        stages.append({"chart": j, "chart_net": chart.audit, "pullback": pinfo, "composite_error": e_comp,
                       "composite_budget": eta / (2 * r), "tau": tinfo})
        composites.append(comp)
        taus.append(tau_net)

    depth = max(max(c.depth, t.depth) for c, t in zip(composites, taus))
    m_star = mult_star_exponent(r, eta)
    mstar = build_mult_star(m_star)
    pipes = []
    for comp, tau_net in zip(composites, taus):
        E = parallelize(pad_to_depth(comp, depth), pad_to_depth(tau_net, depth))
        pipes.append(compose(mstar, E))
    allp = parallelize(*pipes)
    net = compose(linear_net([[1.0, -1.0] * r]), allp)

    rep = validate(net)
    x = manifold.sample(n_samples, seed)
    out = evaluate(net, x)[:, 0]
    err = float(np.abs(out - f.ambient(x)[:, 0]).max())
    sp = sparsity(net)
    audit = {
        "eta": eta, "r": r, "m_star": m_star, "sup_error": err, "ok": err <= eta and rep.ok,
        "strict_ok": rep.ok, "depth": net.depth, "max_width": max(net.widths[1:-1]),
        "sparsity": sp.nonzero_count, "delta_low": partition.delta_low,
        "delta_prime": min(partition.delta_prime),
        "log_inv_eta": math.log(1 / eta), "eta_pow": eta ** (-manifold.d_star / beta),
        "fitted_C_prime": sp.nonzero_count / (net.depth * eta ** (-manifold.d_star / beta)),
        "seconds": time.perf_counter() - t0,
    }
    log.info("assembled %s on %s at eta=%g: %s", f.name, manifold.name, eta, audit)
    if err > eta:
        raise BudgetError("assembled", err, eta)
    return Assembly(net, eb, audit, stages)
