"""Command-line front end: ``spoar <subcommand> [options]``.

Exit status: 0 on success, 1 on usage/validation errors (bad flags,
unreadable or invalid config), 2 on runtime failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, armodel, bench, dynsys
from ._io import atomic_write_json, dump_json
from .dynsys import SystemSpec
from .train import train

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` overrides; values are parsed as JSON when possible."""
    for item in overrides or ():
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValidationError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = _parse_value(value)
    return cfg


def _load_json(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc


def _with_defaults(raw: dict, defaults: dict, nested=()) -> dict:
    """Fill missing top-level keys (and the fields of ``nested`` objects) from ``defaults``."""
    out = {**defaults, **raw}
    for key in nested:
        if isinstance(raw.get(key), dict):
            out[key] = {**defaults[key], **raw[key]}
    return out


def _experiment_config(args) -> bench.ExperimentConfig:
    defaults = bench.ExperimentConfig().to_dict()
    raw = _with_defaults(_load_json(args.config), defaults, nested=("system", "lag"))
    raw = apply_overrides(raw, args.set)
    if getattr(args, "full_scale", False):
        raw["trials"] = bench.FULL_SCALE_TRIALS
    for name in ("trials", "seed", "jobs"):
        if getattr(args, name, None) is not None:
            raw[name] = getattr(args, name)
    try:
        return bench.ExperimentConfig.from_dict(raw)
    except (TypeError, ValueError, KeyError) as exc:
        raise ValidationError(f"invalid experiment config: {exc}") from exc


def _system_config(args) -> SystemSpec:
    raw = _load_json(args.config)
    raw = raw.get("system", raw)
    raw = apply_overrides(_with_defaults(raw, dynsys.benchmark_system().to_dict()), args.set)
    try:
        return SystemSpec.from_dict(raw)
    except (TypeError, ValueError, KeyError) as exc:
        raise ValidationError(f"invalid system config: {exc}") from exc


def _emit(obj, out):
    if out is None:
        sys.stdout.write(dump_json(obj))
    else:
        atomic_write_json(out, obj)


def _read_traj(path):
    try:
        return dynsys.read_trajectory_csv(path)
    except (OSError, ValueError, IndexError) as exc:
        raise ValidationError(f"cannot read trajectory {path}: {exc}") from exc


def cmd_generate(args):
    spec = _system_config(args)
    traj = dynsys.simulate(spec, args.n, args.seed)
    if args.out is None:
        sys.stdout.write(dynsys.write_trajectory_csv(traj))
    else:
        dynsys.write_trajectory_csv(traj, args.out)


def cmd_train(args):
    cfg = _experiment_config(args)
    traj = _read_traj(args.trajectory)
    data = traj.data[: args.q] if args.q else traj.data
    if args.loss not in cfg.losses:
        raise ValidationError(f"loss {args.loss!r} not configured; have {sorted(cfg.losses)}")
    l = cfg.lag.choose(data)
    ds = armodel.build_lagged(data, l)
    tc = cfg.losses[args.loss].replace(seed=args.seed if args.seed is not None else cfg.seed)
    rep = train(ds, tc, cfg.region)
    _emit({"config": cfg.to_dict(), "loss": args.loss, "lag": l, "report": rep.to_dict()}, args.out)


def cmd_eval(args):
    cfg = _experiment_config(args)
    traj = _read_traj(args.trajectory)
    try:
        doc = json.loads(Path(args.model).read_text())
        model = armodel.ArModel.from_dict(doc["report"]["model"] if "report" in doc else doc)
    except (OSError, ValueError, KeyError) as exc:
        raise ValidationError(f"cannot read model {args.model}: {exc}") from exc
    q = args.q if args.q is not None else cfg.q
    p = args.p if args.p is not None else len(traj) - q
    value = bench.normalized_regret(model, traj, q, p, cfg.region)
    _emit({"config": cfg.to_dict(), "q": q, "p": p, "normalized_regret": value}, args.out)


def cmd_experiment(args):
    cfg = _experiment_config(args)
    rep = bench.run_experiment(cfg, args.out)
    if args.out is None:
        sys.stdout.write(dump_json(rep.to_dict()))
    _print_summary([("experiment", rep)])


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad number list {text!r}") from exc


def cmd_sweep_deg(args):
    cfg = _experiment_config(args)
    degs = [int(d) for d in _floats(args.degs)] if args.degs else bench.BENCH_DEGS
    reps = bench.sweep_deg(cfg, degs, args.out)
    _print_summary([(f"deg={d}", r) for d, r in zip(degs, reps)])


def cmd_sweep_a12(args):
    cfg = _experiment_config(args)
    values = _floats(args.values) if args.values else bench.BENCH_A12
    reps = bench.sweep_a12(cfg, values, args.out)
    _print_summary([(f"a12={v:g} rho={r.diagnostics['rho']:.3f} sigma_max={r.diagnostics['sigma_max']:.3f}", r)
                    for v, r in zip(values, reps)])


def _print_summary(items):
    for label, rep in items:
        meds = ", ".join(f"{n}={rep.median(n):.4f}" for n in rep.losses)
        print(f"{label}: median normalized regret {meds}", file=sys.stderr)


def cmd_bounds(args):
    raw = apply_overrides(_load_json(args.inputs), args.set)
    variant = raw.pop("variant", args.variant)
    beta = raw.pop("beta_from", None)
    try:
        if beta is not None:
            # {"A": [[...]], "gap": a - l, "c": 1}
            raw["beta_al"] = dynsys.mixing_proxy(beta["A"], int(beta["gap"]), float(beta.get("c", 1.0)))
            raw["beta_source"] = "proxy"
        inputs = analysis.BoundInputs(**raw)
    except (TypeError, ValueError, KeyError) as exc:
        raise ValidationError(f"invalid bound inputs: {exc}") from exc
    res = analysis.generalization_bound(inputs, variant)
    _emit(res.to_dict(), args.out)


def cmd_blocks(args):
    try:
        split = analysis.block_split(args.n, args.a, args.m, args.l)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    _emit({"n": split.n, "a": split.a, "m": split.m, "l": split.l,
           "y0_blocks": [list(b) for b in split.y0_blocks],
           "y1_blocks": [list(b) for b in split.y1_blocks]}, args.out)


def cmd_pacf(args):
    traj = _read_traj(args.trajectory)
    y = traj.data
    n = len(y)
    coords = []
    for j in range(y.shape[1]):
        vals = armodel.pacf(y[:, j], args.max_lag)
        coords.append({"coordinate": j + 1, "pacf": vals.tolist(),
                       "cutoff": armodel.pacf_cutoff(vals, n, args.confidence)})
    _emit({"n": n, "max_lag": args.max_lag, "confidence": args.confidence, "band": args.confidence / np.sqrt(n),
           "coordinates": coords, "selected_lag": armodel.select_lag(y, args.max_lag, args.confidence)}, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spoar", description="Decision-focused autoregressive forecasting toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help, config=True):
        sp = sub.add_parser(name, help=help)
        if config:
            sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override (repeatable)")
        sp.add_argument("--out", help="output path (file or directory)")
        sp.set_defaults(func=func)
        return sp

    sp = add("generate", cmd_generate, "simulate a cost trajectory to CSV")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("train", cmd_train, "fit a predictor on a trajectory CSV")
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--loss", default="spo_plus")
    sp.add_argument("--q", type=int, help="train on the first q steps only")
    sp.add_argument("--seed", type=int)

    sp = add("eval", cmd_eval, "normalized regret of a saved model")
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--q", type=int)
    sp.add_argument("--p", type=int)

    for name, func, help in (("experiment", cmd_experiment, "run repeated train/test trials"),
                             ("sweep-deg", cmd_sweep_deg, "sweep the observer degree"),
                             ("sweep-a12", cmd_sweep_a12, "sweep the state coupling a12")):
        sp = add(name, func, help)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int, default=bench.available_jobs())
        sp.add_argument("--full-scale", action="store_true",
                        help=f"{bench.FULL_SCALE_TRIALS} trials per point (--trials still wins)")
        if name == "sweep-deg":
            sp.add_argument("--degs", help="comma-separated degrees (default 2,4,6,8)")
        if name == "sweep-a12":
            sp.add_argument("--values", help="comma-separated a12 values (default 0,0.1,...,0.6)")

    sp = add("bounds", cmd_bounds, "evaluate the generalization bound", config=False)
    sp.add_argument("--inputs", required=True, help="JSON with BoundInputs fields")
    sp.add_argument("--variant", choices=("expected", "empirical"), default="expected")

    sp = add("blocks", cmd_blocks, "independent-block split indices", config=False)
    for flag in ("--n", "--a", "--m", "--l"):
        sp.add_argument(flag, type=int, required=True)

    sp = add("pacf", cmd_pacf, "per-coordinate PACF and selected lag", config=False)
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--max-lag", type=int, default=5)
    sp.add_argument("--confidence", type=float, default=1.96)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"spoar {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"spoar {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
