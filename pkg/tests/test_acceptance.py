"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import itertools
import time

import numpy as np
import pytest
import sympy

from _nets import random_network, reference_eval
from manifold_relu.assembler import assemble
from manifold_relu.bench import (RATE_CORPUS, ExperimentConfig, emit_report, manifold_function, median_risks, rate_fit,
                                 run_experiment, run_rate)
from manifold_relu.calculus import canonical_width, compose, embed, parallelize
from manifold_relu.holder import Grid, HolderFunction, LocalScheme, choose_rescaling, hat_weights
from manifold_relu.manifold import audit_partition, build_partition, circle_embedded, make_circle, make_torus
from manifold_relu.network import Architecture, deserialize, evaluate, serialize, sparsity, validate
from manifold_relu.primitives import build_mult, build_mult_star, mult_star_exponent


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, detail, seconds, limit):
        ok = bool(ok) and seconds < limit
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail} ({seconds:.1f}s, limit {limit}s)")
        return ok
    return emit


def _entries_equal(a, b):
    if a.widths != b.widths or a.weight_mode != b.weight_mode:
        return False
    for wa, wb in zip(a.weights, b.weights):
        if (wa != wb).nnz:
            return False
    return all(np.array_equal(va, vb) for va, vb in zip(a.shifts, b.shifts))


def test_criterion_1_calculus(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240101)
    worst, arith_ok = 0.0, True
    for _ in range(200):
        inner = random_network(rng)
        outer = random_network(rng, input_dim=inner.output_dim)
        x = rng.uniform(-1, 1, (1000, inner.input_dim))
        v = rng.uniform(-1, 1, inner.output_dim)
        # composition
        c = compose(outer, inner, v)
        ref = reference_eval(outer, np.maximum(reference_eval(inner, x) - v, 0.0))
        worst = max(worst, np.abs(evaluate(c, x) - ref).max())
        arith_ok &= c.depth == inner.depth + outer.depth + 1
        arith_ok &= c.widths == inner.widths + outer.widths[1:]
        arith_ok &= sparsity(c).nonzero_count == (sparsity(inner).nonzero_count + sparsity(outer).nonzero_count
                                                  + np.count_nonzero(v))
        # parallelization
        g = random_network(rng, widths=[inner.input_dim] + [int(rng.integers(1, 5)) for _ in range(inner.depth + 1)])
        p = parallelize(inner, g)
        ref = np.hstack([reference_eval(inner, x), reference_eval(g, x)])
        worst = max(worst, np.abs(evaluate(p, x) - ref).max())
        arith_ok &= p.widths == (inner.input_dim,) + tuple(a + b for a, b in zip(inner.widths[1:], g.widths[1:]))
        arith_ok &= sparsity(p).nonzero_count == sparsity(inner).nonzero_count + sparsity(g).nonzero_count
        # enlargement
        target = Architecture(inner.depth, tuple(w + int(rng.integers(0, 3)) for w in inner.widths))
        e = embed(inner, target)
        xe = np.hstack([x, rng.uniform(-1, 1, (1000, target.widths[0] - inner.input_dim))])
        worst = max(worst, np.abs(evaluate(e, xe)[:, :inner.output_dim] - reference_eval(inner, x)).max())
        arith_ok &= e.widths == target.widths and sparsity(e).nonzero_count == sparsity(inner).nonzero_count
        # removal of inactive units
        s = sparsity(outer).nonzero_count
        cw = canonical_width(outer, s_budget=max(s, 1))
        xo = rng.uniform(-1, 1, (1000, outer.input_dim))
        worst = max(worst, np.abs(evaluate(cw, xo) - reference_eval(outer, xo)).max())
        arith_ok &= cw.depth == outer.depth and all(w <= max(s, 1) for w in cw.widths[1:-1])
        arith_ok &= sparsity(cw).nonzero_count <= s
    ok = worst <= 1e-12 and arith_ok
    assert verdict(1, ok, f"max deviation {worst:.2e}, arithmetic exact={arith_ok}", time.perf_counter() - t0, 60)


def test_criterion_2_mult(verdict):
    t0 = time.perf_counter()
    g = np.linspace(0, 1, 101)
    xy = np.array(list(itertools.product(g, g)))
    ok, worst = True, []
    for m in (4, 8, 12):
        out = evaluate(build_mult(m), xy)[:, 0]
        err = np.abs(out - xy[:, 0] * xy[:, 1]).max()
        worst.append(err * 2 ** m)
        zero = (xy[:, 0] == 0) | (xy[:, 1] == 0)
        ok &= err <= 2.0 ** -m and np.all(out[zero] == 0.0) and out.min() >= 0 and out.max() <= 1
    star = evaluate(build_mult_star(mult_star_exponent(4, 0.1)), np.c_[xy, np.zeros(len(xy))])
    ok &= bool(np.all(star == 0.0))
    detail = "error * 2^m = " + ", ".join(f"{w:.3f}" for w in worst) + f"; Mult*(x,y,0)=0: {np.all(star == 0)}"
    assert verdict(2, ok, detail, time.perf_counter() - t0, 10)


def test_criterion_3_interpolation(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    ok, notes = True, []
    for d, M in itertools.product((1, 2), (4, 8, 16)):
        z = np.vstack([rng.random((2000, d)), Grid(M, d).points])
        _, w = hat_weights(z, M)
        ok &= np.abs(w.sum(axis=1) - 1).max() <= 1e-12
    for d, beta in itertools.product((1, 2), (1.0, 2.0, 3.0)):
        xs = sympy.symbols(f"x0:{d}")
        deg = int(np.ceil(beta)) - 1
        poly = sum((k + 1) * xs[k % d] ** k for k in range(deg + 1)) + (xs[0] * xs[-1] if deg >= 2 and d > 1 else 0)
        f = HolderFunction.from_sympy([poly], xs, beta, 4.0, np.zeros(d), np.ones(d))
        y = rng.random((1000, d))
        for M in (4, 8, 16):
            ok &= np.abs(LocalScheme(f, M)(y) - f(y)).max() <= 1e-10
    xs = sympy.symbols("x0:1")
    sq = HolderFunction.from_sympy([xs[0] ** 2], xs, 2.0, 2.0, [0.25], [0.75])
    y = np.linspace(0.25, 0.75, 10_001)[:, None]
    for M in (4, 8, 16, 32, 64):
        err = np.abs(LocalScheme(sq, M, choose_rescaling(sq))(y) - sq(y)).max()
        bound = sq.K * 3 ** 2 * M ** -2.0
        ok &= err <= bound
        notes.append(f"M={M}: {err:.2e}<={bound:.2e}")
    assert verdict(3, ok, "; ".join(notes), time.perf_counter() - t0, 30)


# grids chosen so that N = (M+1)^d spans at least three octaves
_RATE_GRIDS = {1: [15, 31, 63, 127], 2: [8, 16, 32]}


@pytest.mark.slow
def test_criterion_4_rate(verdict):
    t0 = time.perf_counter()
    ok, notes = True, []
    for d, beta in itertools.product((1, 2), (1.0, 2.0)):
        for name in RATE_CORPUS[beta]:
            cfg = ExperimentConfig(experiment="rate", function=name, beta=beta, dim=d, grid_sweep=_RATE_GRIDS[d])
            rep = run_rate(cfg)
            rows = [r for r in rep.rows if r["slope"] is None]
            sizes = [r["size"] for r in rows]
            slope = rep.slopes[name]
            good = (abs(slope + beta / d) <= 0.25 and np.log2(max(sizes) / min(sizes)) >= 3
                    and all(r["status"] == "ok" for r in rows)
                    and all(r["sparsity"] <= r["envelope"] for r in rows))
            ok &= good
            notes.append(f"d={d} b={beta:g} {name}: {slope:.3f}")
    assert verdict(4, ok, "slopes " + ", ".join(notes), time.perf_counter() - t0, 600)


def test_criterion_5_partition(verdict):
    t0 = time.perf_counter()
    ok, notes = True, []
    for M, k in ((make_circle(), 8), (make_torus(), 6)):
        pou = build_partition(M, k)
        rep = audit_partition(pou, M.sample(10_000, np.random.default_rng(5)))
        ok &= rep["sum_error"] <= 1e-9 and rep["min"] >= 0 and rep["support_ok"] and rep["delta_low"] > 0
        notes.append(f"{M.name}: sum err {rep['sum_error']:.1e}, min {rep['min']:.1e}, "
                     f"delta_low {rep['delta_low']:.3f}, support {rep['support_ok']}")
    assert verdict(5, ok, "; ".join(notes), time.perf_counter() - t0, 60)


@pytest.mark.slow
def test_criterion_6_assemble(verdict):
    t0 = time.perf_counter()
    etas = (0.4, 0.2, 0.1)
    ok, notes, sizes = True, [], {}
    for M in (make_circle(), circle_embedded(10, seed=0)):
        pou = build_partition(M, 8)
        cache: dict = {}
        for name in ("x", "xy", "sin"):
            f = manifold_function(name, M, 2.0)
            x = M.sample(10_000, np.random.default_rng(11))
            pts = []
            for eta in etas:
                asm = assemble(f, M, pou, eta, cache=cache)
                err = float(np.abs(evaluate(asm.network, x)[:, 0] - f.ambient(x)[:, 0]).max())
                ok &= err <= eta and asm.audit["strict_ok"]
                sizes[(M.d, name, eta)] = asm.audit["sparsity"]
                pts.append((eta, asm.audit["sparsity"]))
            slope = rate_fit(pts)
            ok &= abs(slope + 0.5) <= 0.35
            notes.append(f"R^{M.d} {name}: slope {slope:.3f}")
    ratio = max(max(sizes[(10, n, e)] / sizes[(2, n, e)], sizes[(2, n, e)] / sizes[(10, n, e)])
                for n in ("x", "xy", "sin") for e in etas)
    ok &= ratio <= 4
    notes.append(f"max R^10/R^2 sparsity ratio {ratio:.2f}")
    assert verdict(6, ok, "; ".join(notes), time.perf_counter() - t0, 1800)


@pytest.mark.slow
def test_criterion_7_erm(verdict):
    t0 = time.perf_counter()
    noisy = run_experiment(ExperimentConfig.from_dict({"experiment": "erm", "manifold": "circle",
                                                       "function": "sin"}))
    rows = [r for r in noisy.rows if r["slope"] is None]
    constraints = all(r["status"] == "ok" for r in rows)
    med = median_risks(noisy)
    ns = sorted(med)
    mono = all(med[b] <= 1.1 * med[a] for a, b in zip(ns, ns[1:]))
    quiet = run_experiment(ExperimentConfig.from_dict({"experiment": "erm", "manifold": "circle", "function": "zero",
                                                       "erm": {"noise": False, "n_sweep": [256]}}))
    zero_risk = median_risks(quiet)[256]
    ok = constraints and mono and zero_risk <= 1e-3
    detail = (f"medians {', '.join(f'n={n}: {med[n]:.4f}' for n in ns)}; constraints {constraints}; "
              f"noiseless zero risk {zero_risk:.1e}")
    assert verdict(7, ok, detail, time.perf_counter() - t0, 900)


def test_criterion_8_reproducibility(verdict, tmp_path):
    t0 = time.perf_counter()
    cfgs = [ExperimentConfig(experiment="rate", function="sinh", dim=2, grid_sweep=[4, 8, 16], n_samples=2000),
            ExperimentConfig.from_dict({"experiment": "erm", "function": "sin",
                                        "erm": {"n_sweep": [32, 64, 128], "seeds": 2, "steps": 40,
                                                "sparsity": 30, "prune_every": 10, "risk_samples": 500}})]
    same = True
    for i, cfg in enumerate(cfgs):
        a, b = tmp_path / f"{i}a.csv", tmp_path / f"{i}b.csv"
        emit_report(run_experiment(cfg), a)
        emit_report(run_experiment(cfg), b)
        same &= a.read_bytes() == b.read_bytes()
    rng = np.random.default_rng(8)
    nets = [random_network(rng) for _ in range(100)] + [build_mult(9), build_mult_star(6)]
    roundtrip = all(_entries_equal(deserialize(serialize(n)), n) and serialize(deserialize(serialize(n))) == serialize(n)
                    for n in nets)
    ok = same and roundtrip and all(validate(n).ok for n in nets)
    assert verdict(8, ok, f"byte-identical CSVs {same}; entry-exact round trips {roundtrip}",
                   time.perf_counter() - t0, 300)
