"""Command line interface: ``build``, ``audit``, ``rate``, ``erm`` and ``eval``.

Exit codes: 0 success, 1 validation or budget failure, 2 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .assembler import BudgetError, assemble
from .bench import (ConfigError, ExperimentConfig, emit_report, manifold_function, run_experiment,
                    target_function)
from .holder import PreconditionError, build_holder_net, choose_m, sparsity_envelope
from .manifold import CoverageError, build_partition, manifold_by_name
from .network import FormatError, NetworkError, evaluate, load, save, sparsity, validate

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path: str | None, overrides: dict, sets: list[str]) -> ExperimentConfig:
    """JSON file, then explicit flags, then ``--set key=value`` (``erm.key`` for the ERM block)."""
    data: dict = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    for item in sets or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        if key.startswith("erm."):
            erm = dict(data.get("erm") or {})
            erm[key[4:]] = _parse_value(val)
            data["erm"] = erm
        else:
            data[key] = _parse_value(val)
    return ExperimentConfig.from_dict(data)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--function")
    p.add_argument("--manifold")
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="manifold-relu")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="construct and serialize a network")
    _common(b)
    b.add_argument("--eta", type=float, help="assemble on the manifold at this accuracy")
    b.add_argument("--N", type=int, help="grid budget for a network on the box [lower, upper]^dim")
    b.add_argument("--m", type=int)
    b.add_argument("--dim", type=int)

    a = sub.add_parser("audit", help="parameter report of a serialized network")
    a.add_argument("network")
    a.add_argument("--N", type=int)
    a.add_argument("--m", type=int)
    a.add_argument("--dim", type=int, default=1)
    a.add_argument("--beta", type=float, default=2.0)

    r = sub.add_parser("rate", help="N sweep (box) or eta sweep (manifold) with slope fit")
    _common(r)
    r.add_argument("--experiment", choices=["rate", "assemble"])

    e = sub.add_parser("erm", help="regression experiment")
    _common(e)

    v = sub.add_parser("eval", help="apply a serialized network to points (.npy or text)")
    v.add_argument("network")
    v.add_argument("points")
    v.add_argument("--out")
    return ap


def _cmd_build(args) -> int:
    cfg = load_config(args.config, {"function": args.function, "manifold": args.manifold, "beta": args.beta,
                                    "seed": args.seed, "dim": args.dim, "m": args.m}, args.set)
    if args.eta is not None:
        man = manifold_by_name(cfg.manifold)
        f = manifold_function(cfg.function, man, cfg.beta, cfg.K)
        pou = build_partition(man, cfg.centers_per_chart, seed=cfg.seed)
        asm = assemble(f, man, pou, args.eta, cfg.n_samples, cfg.seed)
        net, audit = asm.network, asm.audit
    else:
        f = target_function(cfg.function, cfg.dim, cfg.beta, cfg.lower, cfg.upper, cfg.K)
        N = args.N or (17 ** cfg.dim)
        m = cfg.m or choose_m(N, cfg.dim, cfg.beta)
        hn = build_holder_net(f, N, m, check_precondition=False)
        net, audit = hn.network, hn.audit
    out = args.out or cfg.output or "network.rnet"
    save(net, out)
    print(json.dumps({k: v for k, v in audit.items() if isinstance(v, (int, float, str, bool))}, indent=1))
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_audit(args) -> int:
    net = load(args.network)
    rep = validate(net)
    sp = sparsity(net)
    info = {"depth": net.depth, "widths": list(net.widths), "sparsity": sp.nonzero_count,
            "max_abs_weight": sp.max_abs_weight, "mode": net.weight_mode, "valid": rep.ok,
            "strict_ok": rep.ok and sp.max_abs_weight <= 1.0, "violations": len(rep.violations)}
    if args.N and args.m:
        info["sparsity_envelope"] = sparsity_envelope(args.N, args.m, args.dim, args.beta, net.output_dim)
        info["within_envelope"] = sp.nonzero_count <= info["sparsity_envelope"]
    print(json.dumps(info, indent=1))
    ok = rep.ok and info.get("within_envelope", True)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_sweep(args, experiment: str) -> int:
    cfg = load_config(args.config, {"function": args.function, "manifold": args.manifold, "beta": args.beta,
                                    "seed": args.seed, "workers": args.workers, "experiment": experiment},
                      args.set)
    rep = run_experiment(cfg)
    out = args.out or cfg.output
    if out:
        emit_report(rep, out)
    print(rep.summary())
    bad = [r for r in rep.rows if r["status"] not in ("ok", "fit")]
    return EXIT_FAIL if bad else EXIT_OK


def _read_points(path: str) -> np.ndarray:
    if path.endswith(".npy"):
        return np.load(path)
    return np.loadtxt(path, delimiter="," if path.endswith(".csv") else None, ndmin=2)


def _cmd_eval(args) -> int:
    net = load(args.network)
    x = _read_points(args.points)
    y = evaluate(net, x)
    if args.out:
        if args.out.endswith(".npy"):
            np.save(args.out, y)
        else:
            np.savetxt(args.out, y, delimiter=",", fmt="%.17g")
    else:
        np.savetxt(sys.stdout, y, delimiter=",", fmt="%.17g")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "build":
            return _cmd_build(args)
        if args.command == "audit":
            return _cmd_audit(args)
        if args.command == "rate":
            return _cmd_sweep(args, args.experiment or "rate")
        if args.command == "erm":
            return _cmd_sweep(args, "erm")
        return _cmd_eval(args)
    except (ConfigError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BudgetError, PreconditionError, CoverageError, NetworkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
