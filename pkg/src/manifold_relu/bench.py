"""Experiment driver: sup errors, rate fits, sweeps, the regression (ERM) experiment and CSV reports."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import sympy

from .holder import HolderFunction, build_holder_net, choose_m
from .network import Network, evaluate, sparsity, validate

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ function corpus

_SMOOTH = {
    # name: (expression builder on symbols x0.., smallest ambient dimension)
    "zero": (lambda x: sympy.Integer(0), 1),
    "const": (lambda x: sympy.Rational(1, 2), 1),
    "x": (lambda x: x[0], 1),
    "xy": (lambda x: x[0] * x[1], 2),
    "sin": (lambda x: sympy.sin(2 * x[0] + x[1]), 2),
    "sq": (lambda x: sum(xi ** 2 for xi in x) / len(x), 1),
    "sinh": (lambda x: sympy.sin(2 * sum(x)) / 2, 1),
    "exp": (lambda x: sympy.exp(-sum(x) / len(x)), 1),
}


def _saw(t, q):
    """Distance to the lattice ``Z / (2q)``: a Lipschitz zig-zag with kinks at spacing ``1/(2q)``."""
    u = t * 2 * q
    return np.abs(u - np.round(u)) / (2 * q)


_KINK = {
    # name: callable on (n, d) arrays, Lipschitz in the sup norm with constant <= 1
    "saw": lambda y: _saw(y.sum(axis=1) / y.shape[1], 7.3),
    "vee": lambda y: np.abs(y - 1 / 3).max(axis=1) - 0.5 * _saw(y.mean(axis=1), 5.1),
    "tent": lambda y: np.minimum.reduce([np.abs(y[:, i] - 0.41 - 0.07 * i) for i in range(y.shape[1])])
    + 0.5 * _saw(y[:, 0], 3.7),
}

RATE_CORPUS = {2.0: ("sq", "sinh", "exp"), 1.0: ("saw", "vee", "tent")}


def target_function(name: str, d: int, beta: float | None = None, lower=None, upper=None,
                    K: float | None = None) -> HolderFunction:
    """Named corpus function on ``[lower, upper]^d`` (default ``[-1, 1]^d``)."""
    lo = np.full(d, -1.0) if lower is None else np.broadcast_to(np.asarray(lower, float), (d,)).copy()
    hi = np.full(d, 1.0) if upper is None else np.broadcast_to(np.asarray(upper, float), (d,)).copy()
    if name in _SMOOTH:
        build, need = _SMOOTH[name]
        if d < need:
            raise ConfigError(f"function {name!r} needs at least {need} input coordinates")
        xs = sympy.symbols(f"x0:{d}")
        beta = 2.0 if beta is None else float(beta)
        return HolderFunction.from_sympy([build(xs)], xs, beta, 4.0 if K is None else K, lo, hi, name=name)
    if name in _KINK:
        beta = 1.0 if beta is None else float(beta)
        if beta > 1:
            raise ConfigError(f"function {name!r} is only Lipschitz; use beta <= 1")
        fn = _KINK[name]
        return HolderFunction(lambda y, fn=fn: fn(np.asarray(y, float))[:, None], d, beta,
                              3.0 if K is None else K, lo, hi, name=name)
    raise ConfigError(f"unknown function {name!r}; choose from {sorted(_SMOOTH) + sorted(_KINK)}")


def manifold_function(name: str, manifold, beta: float | None = None, K: float | None = None) -> HolderFunction:
    """Corpus function of the unembedded coordinates, read on the ambient points of ``manifold``."""
    f = target_function(name, manifold.base_dim, beta, K=K)
    if manifold.base_coords is not None:
        f.projection = np.asarray(manifold.base_coords, dtype=float)
    return f


# ------------------------------------------------------------------ measurement


def sup_error(net: Network, f: Callable, sampler: Callable, n_samples: int, seed: int = 0) -> float:
    """``max_i |net(x_i) - f(x_i)|_inf`` over ``x = sampler(n_samples, rng)``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    x = sampler(n_samples, np.random.default_rng(seed))
    out = evaluate(net, x).reshape(len(x), -1)
    ref = np.asarray(f(x), dtype=float).reshape(len(x), -1)
    return float(np.abs(out - ref).max())


def rate_fit(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log error`` against ``log size``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least 3 (size, error) pairs")
    if np.any(~(pts > 0)):
        raise ValueError("sizes and errors must be positive")
    return float(np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)[0])


def complexity_term(n: int, L: int, s: int, d: int) -> float:
    """``((s+1) log(4 n (L+1) (s+1)^L (d+1)) + 1) / n`` with unit constant."""
    lg = math.log(4 * n * (L + 1) * (d + 1)) + L * math.log(s + 1)
    return ((s + 1) * lg + 1) / n


# ------------------------------------------------------------------ config and report


@dataclass
class ErmConfig:
    n_sweep: list = field(default_factory=lambda: [64, 256, 1024])
    seeds: int = 5
    noise: bool = True
    steps: int = 1500
    lr: float = 0.01
    sparsity: int = 200
    depth: int = 3
    width: int = 16
    prune_every: int = 50
    risk_samples: int = 10_000
    baseline_eta: float | None = None


@dataclass
class ExperimentConfig:
    experiment: str = "rate"  # "rate" (N sweep), "assemble" (eta sweep) or "erm"
    manifold: str = "circle"
    function: str = "x"
    beta: float = 2.0
    K: float | None = None
    dim: int = 1
    lower: float = 0.25
    upper: float = 0.75
    grid_sweep: list = field(default_factory=lambda: [16, 32, 64, 128])
    m: int | None = None
    eta_sweep: list = field(default_factory=lambda: [0.4, 0.2, 0.1])
    centers_per_chart: int = 8
    n_samples: int = 10_000
    seed: int = 0
    workers: int = 1
    erm: ErmConfig = field(default_factory=ErmConfig)
    output: str | None = None

    def __post_init__(self):
        if isinstance(self.erm, dict):
            self.erm = ErmConfig(**self.erm)
        self.validate()

    def validate(self):
        if self.experiment not in ("rate", "assemble", "erm"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        sweep = {"rate": self.grid_sweep, "assemble": self.eta_sweep, "erm": self.erm.n_sweep}[self.experiment]
        if not sweep:
            raise ConfigError("sweep must be nonempty")
        if self.n_samples < 1 or self.workers < 1:
            raise ConfigError("n_samples and workers must be >= 1")

    @property
    def config_id(self) -> str:
        return f"{self.experiment}:{self.manifold}:{self.function}:b{self.beta:g}:s{self.seed}"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


HEADER = ("config_id", "experiment", "manifold", "function", "size", "eta", "seed", "sup_error",
          "risk", "baseline_risk", "complexity_term", "depth", "max_width", "sparsity", "envelope",
          "slope", "status")


@dataclass
class ErrorReport:
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    timings: list = field(default_factory=list)

    def add(self, **row):
        unknown = set(row) - set(HEADER)
        if unknown:
            raise KeyError(f"unknown report columns {sorted(unknown)}")
        self.rows.append({k: row.get(k) for k in HEADER})

    def summary(self) -> str:
        lines = [f"{len(self.rows)} rows"]
        for k, v in self.slopes.items():
            lines.append(f"slope[{k}] = {v:.4f}")
        for r in self.rows:
            if r["slope"] is None:
                bits = [f"{c}={r[c]:.4g}" if isinstance(r[c], float) else f"{c}={r[c]}"
                        for c in ("size", "eta", "seed", "sup_error", "risk", "sparsity", "status")
                        if r[c] is not None]
                lines.append("  " + " ".join(bits))
        if self.timings:
            lines.append(f"wall time {sum(self.timings):.1f}s")
        return "\n".join(lines)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_report(report: ErrorReport, path) -> None:
    """CSV with header ``HEADER``; rows in insertion order, slope rows last.

    Wall times are left out of the file (they would break byte-reproducibility) and
    appear only in the human-readable summary.
    """
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADER)
            for r in report.rows:
                w.writerow([_fmt(r[k]) for k in HEADER])
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


_INT_COLS = {"size", "seed", "depth", "max_width", "sparsity"}
_FLOAT_COLS = {"eta", "sup_error", "risk", "baseline_risk", "complexity_term", "envelope", "slope"}


def read_report(path) -> ErrorReport:
    rep = ErrorReport()
    with Path(path).open(newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != HEADER:
            raise ValueError(f"unexpected header in {path}")
        for raw in rd:
            row = {}
            for k, v in zip(HEADER, raw):
                if v == "":
                    row[k] = None
                elif k in _INT_COLS:
                    row[k] = int(v)
                elif k in _FLOAT_COLS:
                    row[k] = float(v)
                else:
                    row[k] = v
            rep.rows.append(row)
            if row["slope"] is not None:
                rep.slopes[row["function"]] = row["slope"]
    return rep


# ------------------------------------------------------------------ sweeps


def _box_sampler(lo: float, hi: float, d: int) -> Callable:
    def sampler(n, rng):
        return lo + (hi - lo) * rng.random((n, d))
    return sampler


def _box_grid(lo: float, hi: float, d: int, n: int) -> np.ndarray:
    per = max(2, int(round(n ** (1.0 / d))))
    ax = np.linspace(lo, hi, per)
    return np.stack([a.reshape(-1) for a in np.meshgrid(*([ax] * d), indexing="ij")], axis=1)


def run_rate(cfg: ExperimentConfig) -> ErrorReport:
    """Grid sweep of the Hölder network on ``[lower, upper]^dim``; slope of error vs ``N``."""
    f = target_function(cfg.function, cfg.dim, cfg.beta, cfg.lower, cfg.upper, cfg.K)
    rep = ErrorReport()
    x = np.vstack([_box_grid(cfg.lower, cfg.upper, cfg.dim, cfg.n_samples),
                   _box_sampler(cfg.lower, cfg.upper, cfg.dim)(cfg.n_samples, np.random.default_rng(cfg.seed))])
    fx = f.ambient(x)
    pts = []
    for M in cfg.grid_sweep:
        t0 = time.perf_counter()
        N = (int(M) + 1) ** cfg.dim
        m = cfg.m if cfg.m is not None else choose_m(N, cfg.dim, cfg.beta)
        hn = build_holder_net(f, N, m, check_precondition=False)
        err = float(np.abs(evaluate(hn.network, x) - fx).max())
        ok = validate(hn.network).ok
        rep.add(config_id=cfg.config_id, experiment="rate", manifold="box", function=f.name, size=N, seed=cfg.seed,
                sup_error=err, depth=hn.network.depth, max_width=hn.audit["max_width"],
                sparsity=hn.audit["sparsity"], envelope=hn.audit["sparsity_envelope"],
                status="ok" if ok else "invalid")
        rep.timings.append(time.perf_counter() - t0)
        pts.append((N, err))
    slope = rate_fit(pts) if len(pts) >= 3 and all(e > 0 for _, e in pts) else float("nan")
    rep.slopes[f.name] = slope
    rep.add(config_id=cfg.config_id, experiment="rate", manifold="box", function=f.name, slope=slope,
            status="fit")
    return rep


def run_assembly_sweep(cfg: ExperimentConfig) -> ErrorReport:
    """Assemble ``cfg.function`` on ``cfg.manifold`` for each ``eta``; slope of sparsity vs ``eta``."""
    from .assembler import assemble
    from .manifold import build_partition, manifold_by_name

    man = manifold_by_name(cfg.manifold)
    f = manifold_function(cfg.function, man, cfg.beta, cfg.K)
    pou = build_partition(man, cfg.centers_per_chart, seed=cfg.seed)
    rep = ErrorReport()
    cache: dict = {}
    pts = []
    for eta in cfg.eta_sweep:
        t0 = time.perf_counter()
        asm = assemble(f, man, pou, float(eta), cfg.n_samples, cfg.seed, cache)
        a = asm.audit
        rep.add(config_id=cfg.config_id, experiment="assemble", manifold=man.name, function=f.name,
                eta=float(eta), seed=cfg.seed, sup_error=a["sup_error"], depth=a["depth"],
                max_width=a["max_width"], sparsity=a["sparsity"], status="ok" if a["ok"] else "fail")
        rep.timings.append(time.perf_counter() - t0)
        pts.append((float(eta), float(a["sparsity"])))
    if len(pts) >= 3:
        slope = rate_fit(pts)
        rep.slopes[f.name] = slope
        rep.add(config_id=cfg.config_id, experiment="assemble", manifold=man.name, function=f.name,
                slope=slope, status="fit")
    return rep


# ------------------------------------------------------------------ ERM


def _erm_row(args) -> dict:
    cfg, n, rep_idx, seed_seq = args
    import torch

    from .manifold import manifold_by_name

    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)
    e = cfg.erm
    man = manifold_by_name(cfg.manifold)
    f0 = manifold_function(cfg.function, man, cfg.beta, cfg.K)
    ss_data, ss_init, ss_risk = seed_seq.spawn(3)
    rng = np.random.default_rng(ss_data)
    X = man.sample(n, rng)
    Y = f0.ambient(X)[:, 0]
    if e.noise:
        Y = Y + rng.standard_normal(n)
    torch.manual_seed(int(ss_init.generate_state(1)[0]))
    t0 = time.perf_counter()
    net = _train(X, Y, e)
    Xr = man.sample(e.risk_samples, np.random.default_rng(ss_risk))
    with torch.no_grad():
        pred = net(torch.from_numpy(Xr)).numpy()
    diverged = not np.all(np.isfinite(pred))
    risk = float(np.mean((pred - f0.ambient(Xr)[:, 0]) ** 2)) if not diverged else float("nan")
    return {"size": n, "seed": rep_idx, "risk": risk, "sparsity": net.nonzero_count(),
            "complexity_term": complexity_term(n, e.depth, e.sparsity, man.d),
            "depth": e.depth, "max_width": e.width, "status": "diverged" if diverged else "ok",
            "seconds": time.perf_counter() - t0}


class _ClippedNet:
    """``x -> clip(W_L relu(... relu(W_0 x - v_1) ...), -1, 1)`` with a sparsity mask."""

    def __init__(self, d: int, width: int, depth: int):
        import torch

        dims = [d] + [width] * depth + [1]
        self.weights = [torch.empty(dims[i + 1], dims[i]).uniform_(-1, 1) / math.sqrt(dims[i])
                        for i in range(len(dims) - 1)]
        self.shifts = [torch.empty(w).uniform_(-0.1, 0.1) for w in dims[1:-1]]
        self.params = self.weights + self.shifts
        for p in self.params:
            p.requires_grad_(True)
        self.masks = [torch.ones_like(p, dtype=torch.bool) for p in self.params]

    def __call__(self, x):
        import torch

        h = x.T.to(self.weights[0].dtype)
        for w, v in zip(self.weights[:-1], self.shifts):
            h = torch.relu(w @ h - v[:, None])
        return torch.clamp((self.weights[-1] @ h)[0], -1.0, 1.0)

    def nonzero_count(self) -> int:
        return int(sum(int((p != 0).sum()) for p in self.params))

    def project(self, s: int, reprune: bool):
        import torch

        with torch.no_grad():
            for p, mk in zip(self.params, self.masks):
                p.clamp_(-1.0, 1.0)
            if reprune:
                flat = torch.cat([p.abs().reshape(-1) for p in self.params])
                if flat.numel() > s:
                    thr = torch.topk(flat, s, sorted=True).values[-1]
                    keep_all = flat >= thr
                    # ties at the threshold are broken by position for determinism
                    if int(keep_all.sum()) > s:
                        idx = torch.nonzero(keep_all).reshape(-1)[s:]
                        keep_all[idx] = False
                    start = 0
                    for i, p in enumerate(self.params):
                        k = p.numel()
                        self.masks[i] = keep_all[start:start + k].reshape(p.shape)
                        start += k
            for p, mk in zip(self.params, self.masks):
                p.mul_(mk)

    def check(self, s: int):
        for p in self.params:
            assert float(p.detach().abs().max()) <= 1.0, "weight left [-1, 1]"
        assert self.nonzero_count() <= s, "sparsity budget exceeded"


def _train(X: np.ndarray, Y: np.ndarray, e: ErmConfig) -> _ClippedNet:
    """Projected Adam on the squared loss: clip to [-1, 1] and re-apply the sparsity mask
    after every step; recompute the magnitude mask every ``prune_every`` steps."""
    import torch

    Xt = torch.from_numpy(X)
    Yt = torch.from_numpy(Y).to(torch.float32)
    net = _ClippedNet(X.shape[1], e.width, e.depth)
    opt = torch.optim.Adam(net.params, lr=e.lr)
    net.project(e.sparsity, reprune=True)
    for step in range(e.steps):
        opt.zero_grad()
        loss = torch.mean((net(Xt) - Yt) ** 2)
        loss.backward()
        opt.step()
        net.project(e.sparsity, reprune=(step + 1) % e.prune_every == 0)
        net.check(e.sparsity)
    return net


def run_erm_experiment(cfg: ExperimentConfig) -> ErrorReport:
    """Sweep over ``n`` and seeds: trained-network risk, complexity term and optional
    constructive baseline risk."""
    from .manifold import manifold_by_name

    e = cfg.erm
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(len(e.n_sweep) * e.seeds)
    jobs = [(cfg, int(n), r, children[i * e.seeds + r]) for i, n in enumerate(e.n_sweep) for r in range(e.seeds)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_erm_row, jobs))
    else:
        results = [_erm_row(j) for j in jobs]

    baseline = None
    if e.baseline_eta is not None:
        from .assembler import assemble
        from .manifold import build_partition

        man = manifold_by_name(cfg.manifold)
        f0 = manifold_function(cfg.function, man, cfg.beta, cfg.K)
        asm = assemble(f0, man, build_partition(man, cfg.centers_per_chart, seed=cfg.seed), e.baseline_eta,
                       cfg.n_samples, cfg.seed)
        Xr = man.sample(e.risk_samples, np.random.default_rng(root.spawn(1)[0]))
        baseline = float(np.mean((evaluate(asm.network, Xr)[:, 0] - f0.ambient(Xr)[:, 0]) ** 2))

    rep = ErrorReport()
    for res in results:
        rep.add(config_id=cfg.config_id, experiment="erm", manifold=cfg.manifold, function=cfg.function,
                size=res["size"], seed=res["seed"], risk=res["risk"], baseline_risk=baseline,
                complexity_term=res["complexity_term"], depth=res["depth"], max_width=res["max_width"],
                sparsity=res["sparsity"], status=res["status"])
        rep.timings.append(res["seconds"])
    med = [(n, float(np.nanmedian([r["risk"] for r in results if r["size"] == n]))) for n in e.n_sweep]
    if len(med) >= 3 and all(v > 0 for _, v in med):
        rep.slopes[cfg.function] = rate_fit(med)
        rep.add(config_id=cfg.config_id, experiment="erm", manifold=cfg.manifold, function=cfg.function,
                slope=rep.slopes[cfg.function], status="fit")
    return rep


def median_risks(report: ErrorReport) -> dict:
    out: dict = {}
    for r in report.rows:
        if r["experiment"] == "erm" and r["slope"] is None:
            out.setdefault(r["size"], []).append(r["risk"])
    return {n: float(np.nanmedian(v)) for n, v in sorted(out.items())}


def run_experiment(cfg: ExperimentConfig) -> ErrorReport:
    return {"rate": run_rate, "assemble": run_assembly_sweep, "erm": run_erm_experiment}[cfg.experiment](cfg)
