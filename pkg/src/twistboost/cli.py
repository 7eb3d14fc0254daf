"""Command line entry point: ``twistboost <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .adaptive import estimate_noise
from .boosting import BoostDiagnostics, convergence_certificate, make_link
from .data import Dataset, synth_xd6, write_csv
from .harness import ConfigError, ExperimentConfig, format_table, run_and_emit
from .links import PilTable, SurrogateEval, pil_gap_report
from .losses import AlphaParam
from .twisters import TwisterSpec


def _load_dataset(ref: str) -> Dataset:
    """``xd6`` or ``xd6:<m>:<seed>`` for the synthetic set, else an experiment config path."""
    if ref.startswith("xd6"):
        parts = ref.split(":")
        m = int(parts[1]) if len(parts) > 1 else 973
        seed = int(parts[2]) if len(parts) > 2 else 0
        return synth_xd6(m, seed)
    cfg = ExperimentConfig.load(ref)
    base = Path(cfg.base_dir) if cfg.base_dir else None
    return cfg.dataset.load(base)


def _parse_twister(ref: str, seed: int) -> TwisterSpec:
    """``kind:p`` or ``feature_noise:p1,p2``, or a YAML file with TwisterSpec fields."""
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") and path.exists():
        spec = yaml.safe_load(path.read_text(encoding="utf-8"))
        spec.setdefault("rng_seed", seed)
        return TwisterSpec(**spec)
    kind, _, arg = ref.partition(":")
    if kind == "none":
        return TwisterSpec("none", rng_seed=seed)
    vals = [float(v) for v in arg.split(",")] if arg else [0.0]
    if kind == "feature_noise" and len(vals) == 2:
        return TwisterSpec(kind, p=vals[0], p1=vals[0], p2=vals[1], rng_seed=seed)
    return TwisterSpec(kind, p=vals[0], rng_seed=seed)


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    results, files = run_and_emit(cfg, args.out, args.folds)
    print(format_table(results))
    for key in ("results", "curves", "importance"):
        print(f"wrote {files[key]}")
    return 1 if any(r.partial for r in results) else 0


def cmd_twist(args) -> int:
    ds = _load_dataset(args.dataset)
    tw = _parse_twister(args.twister, args.seed)
    twisted = tw.apply(ds)
    write_csv(twisted, args.out, args.label_column)
    changed = int(np.sum(np.any(twisted.X != ds.X, axis=1) | (twisted.y != ds.y)))
    print(f"wrote {args.out} ({twisted.m} rows, {changed} changed)")
    return 0


def cmd_estimate(args) -> int:
    ds = _load_dataset(args.dataset)
    if args.twister:
        ds = _parse_twister(args.twister, args.seed).apply(ds)
    est = estimate_noise(ds)
    for k, v in est.__dict__.items():
        print(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}")
    return 0


def cmd_certify(args) -> int:
    diag = BoostDiagnostics.from_dict(json.loads(Path(args.diagnostics).read_text(encoding="utf-8")))
    if diag.alpha == "adaboost":
        print("certificates apply to PILBoost runs only", file=sys.stderr)
        return 2
    sur = SurrogateEval.for_alpha(float(diag.alpha))
    cert = convergence_certificate(diag, sur, gamma=args.gamma, zeta=args.zeta, pi=args.pi,
                                   z_star=args.z_star, theta=args.theta, epsilon=args.epsilon,
                                   link=make_link(float(diag.alpha)))
    print(json.dumps(cert.as_dict(), indent=2, sort_keys=True))
    return 0


def cmd_links(args) -> int:
    table = PilTable(AlphaParam(args.alpha))
    print(f"alpha={args.alpha:g} conjugate={table.saturation_hi:.6g}")
    print("z\tpil\texact")
    for z, p, e in table.rows(args.n):
        print(f"{z:.6g}\t{p:.6g}\t{e:.6g}")
    if args.alpha >= 1.2:
        rep = pil_gap_report(args.alpha)
        lo, hi = rep.forbidden_interval
        print(f"max_gap={rep.max_gap:.6g} outside +/-[{lo:.6g}, {hi:.6g}] (bound 0.14/alpha={0.14 / args.alpha:.6g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twistboost", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a full experiment from a YAML config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: config output or $TWISTBOOST_OUTPUT_DIR)")
    p.add_argument("--folds", type=int, help="run only the first N folds")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("twist", help="write a twisted copy of a dataset as CSV")
    p.add_argument("dataset", help="xd6[:m[:seed]] or an experiment config")
    p.add_argument("twister", help="kind:p, feature_noise:p1,p2 or a YAML file")
    p.add_argument("--out", default="twisted.csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label-column", default="label")
    p.set_defaults(func=cmd_twist)

    p = sub.add_parser("estimate-alpha", help="estimate the noise rate and alpha0")
    p.add_argument("dataset")
    p.add_argument("--twister", help="twist the data first (kind:p)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("certify", help="convergence certificate from a diagnostics JSON")
    p.add_argument("diagnostics")
    for name in ("gamma", "zeta", "pi", "z_star"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("links", help="tabulate the alpha pseudo-inverse link")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n", type=int, default=21, help="table rows (odd keeps z=0)")
    p.set_defaults(func=cmd_links)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
