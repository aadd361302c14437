"""Command-line entry point: ``numsense <command> [flags]``.

Commands write machine-readable JSON or CSV to ``--out`` and print a short
human-readable summary to stdout. Exit status is 0 when every check passes,
1 when a check fails and 2 on bad flags or unreadable inputs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .binning import BinSpec, DistanceKind, default_bins, load_bins
from .data import Dataset, SyntheticConfig, generate_synthetic, load_embeddings_csv, split, write_embeddings_csv
from .diagnostics import (
    DiscreteJoint,
    evaluate,
    gradient_suite,
    lambda_condition_check,
    preset_joints,
    verify_mi_bound,
)
from .errors import ConfigError, NumsenseError
from .model import load_checkpoint, save_checkpoint
from .train import TrainConfig, train

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
MI_BATCH_SIZES = (2, 4, 8)
# flags that name output locations; left out of the config echo so reports
# from identical runs written to different places compare equal
_NOT_ECHOED = {"out", "config", "command"}


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"range needs lo < hi, got {text!r}")
    return lo, hi


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


# ---------------------------------------------------------------------------
# parser


def _add_data_flags(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="embeddings CSV (label,f0,f1,...)")
    g.add_argument("--n", type=_positive_int, help="synthesize this many samples instead of reading --data")
    g.add_argument("--range", type=_parse_range, default=(16.0, 77.0), metavar="LO:HI")
    g.add_argument("--bins", type=_positive_int, default=5)
    g.add_argument("--bin-file", help="bin definitions (edge_lo,edge_hi,center,concept per line)")
    g.add_argument("--dims", type=_positive_int, default=8, help="synthetic feature dimension")
    g.add_argument("--noise", type=float, default=0.3, help="synthetic noise std")


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--loss", choices=["fcrc", "infonce"], default="fcrc")
    g.add_argument("--dist", choices=[k.value for k in DistanceKind], default="absolute")
    g.add_argument("--lambda-mode", choices=["mean", "exp"], default="mean")
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--tau", type=float, default=0.07)
    g.add_argument("--epochs", type=_positive_int, default=100)
    g.add_argument("--batch", type=int, default=32)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--shots", type=_positive_int, help="train on this many samples per bin")
    g.add_argument("--train-fraction", type=float, default=0.8)
    g.add_argument(
        "--bypass-encoder",
        action="store_true",
        help="use the normalized input rows as embeddings (for precomputed features)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="numsense", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="key=value file supplying defaults for unset flags")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = command("synth", "write a synthetic embeddings CSV")
    _add_data_flags(p)
    p.add_argument("--out", required=True)

    p = command("train", "train a model and write checkpoint, history and report")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="output directory")

    p = command("eval", "evaluate a checkpoint on a dataset")
    _add_data_flags(p)
    p.add_argument("--model", required=True, help="checkpoint written by train")
    p.add_argument("--out", help="metrics JSON path (stdout when omitted)")

    p = command("ablate-distance", "train once per label distance over shared seeds")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--seeds", type=_parse_seeds, default=[0, 1, 2])
    p.add_argument("--out", required=True, help="CSV path")

    p = command("gradcheck", "finite-difference check of every loss and head operation")
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--instances", type=_positive_int, default=100)
    p.add_argument("--out", help="JSON report path")

    p = command("micheck", "verify the InfoNCE mutual-information bounds on preset joints")
    p.add_argument("--trials", type=_positive_int, default=100_000)
    p.add_argument("--out", help="JSON report path")
    return parser


def _read_config(path) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}: line {number}: expected key=value")
        values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, raw in _read_config(args.config).items():
            if key not in known or key in _NOT_ECHOED:
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            action = known[key]
            try:
                if isinstance(action, argparse._StoreTrueAction):
                    defaults[key] = _parse_bool(raw)
                else:
                    defaults[key] = action.type(raw) if action.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"config {key}={raw!r}: {exc}") from None
            if action.choices is not None and defaults[key] not in action.choices:
                raise ConfigError(f"config {key}={raw!r}: choose from {sorted(action.choices)}")
        # explicit flags win because they are parsed on top of the new defaults
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# helpers


def _bin_spec(args) -> BinSpec:
    if args.bin_file:
        return load_bins(args.bin_file)
    lo, hi = args.range
    return default_bins(lo, hi, args.bins)


def _dataset(args, spec: BinSpec) -> Dataset:
    if args.data:
        return load_embeddings_csv(args.data, spec)
    if args.n:
        cfg = SyntheticConfig(n=args.n, d_in=args.dims, y_range=(spec.lo, spec.hi), noise_std=args.noise, seed=args.seed)
        return generate_synthetic(cfg, spec)
    raise ConfigError("no data source: pass --data FILE or synthesize with --n N (plus --range, --dims, --noise)")


def _train_config(args, seed: int, distance=None) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        tau=args.tau,
        beta=args.beta,
        distance=distance or args.dist,
        loss=args.loss,
        lambda_mode=args.lambda_mode,
        seed=seed,
        use_encoder=not args.bypass_encoder,
    )


def _split(args, data: Dataset, seed: int):
    return split(data, args.train_fraction, args.shots, seed=seed)


def config_echo(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in _NOT_ECHOED:
            continue
        out[key.replace("_", "-")] = list(value) if isinstance(value, tuple) else value
    return out


def _dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
    if path:
        Path(path).write_bytes(text.encode("utf-8"))
    return text


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    spec = _bin_spec(args)
    if not args.n:
        raise ConfigError("synth needs --n")
    data = _dataset(args, spec)
    write_embeddings_csv(data, args.out)
    print(f"wrote {len(data)} samples x {data.d_in} features to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    spec = _bin_spec(args)
    data = _dataset(args, spec)
    train_set, eval_set = _split(args, data, args.seed)
    start = time.perf_counter()
    model, history = train(_train_config(args, args.seed), train_set, spec, eval_set)
    wall = time.perf_counter() - start
    metrics = evaluate(model, eval_set, spec)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "model.ckpt")
    history.write_csv(out / "history.csv")
    report = {
        "config": config_echo(args),
        "seed": args.seed,
        "metrics": metrics.to_dict(),
        "final-mae": metrics.mae,
        "history": "history.csv",
        "checkpoint": "model.ckpt",
        "train-size": len(train_set),
        "eval-size": len(eval_set),
        "warnings": history.warnings,
    }
    _dump_json(report, out / "report.json")
    # kept apart so report.json is byte-identical across repeated runs
    _dump_json({"wall-time-seconds": wall}, out / "timing.json")
    print(
        f"{args.loss}: eval MAE {metrics.mae:.4f}, coarse accuracy {metrics.coarse_accuracy:.4f}, "
        f"ordinality {metrics.ordinality_spearman:.3f} ({wall:.1f} s)"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    spec = _bin_spec(args)
    data = _dataset(args, spec)
    model = load_checkpoint(args.model)
    if model.k != spec.k:
        raise ConfigError(f"checkpoint has {model.k} bins, bin spec has {spec.k}")
    metrics = evaluate(model, data, spec)
    text = _dump_json(metrics.to_dict(), args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ablate_distance(args) -> int:
    spec = _bin_spec(args)
    data = _dataset(args, spec)
    rows = ["kind,seed,mae,accuracy"]
    finite = True
    for kind in DistanceKind:
        for seed in args.seeds:
            train_set, eval_set = _split(args, data, seed)
            model, _ = train(_train_config(args, seed, kind), train_set, spec, eval_set)
            m = evaluate(model, eval_set, spec)
            finite &= math.isfinite(m.mae)
            rows.append(f"{kind.value},{seed},{m.mae!r},{m.coarse_accuracy!r}")
            print(f"{kind.value:>8} seed {seed}: MAE {m.mae:.4f}, accuracy {m.coarse_accuracy:.4f}")
    Path(args.out).write_bytes(("\n".join(rows) + "\n").encode("utf-8"))
    return EXIT_OK if finite else EXIT_FAILED


def cmd_gradcheck(args) -> int:
    results = gradient_suite(seed=args.seed, tolerance=args.tolerance, instances=args.instances)
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{status} {r.name:<15} max rel err {r.max_relative_error:.3e} at {r.worst_coordinate}")
    passed = all(r.passed for r in results)
    report = {"tolerance": args.tolerance, "passed": passed, "checks": [r.to_dict() for r in results]}
    _dump_json(report, args.out)
    return EXIT_OK if passed else EXIT_FAILED


def _condition_batch(table: np.ndarray):
    # one sample per symbol, labelled by its ordinal position; the ratio for
    # anchor i against negative j is p(w_j | z_i) / p(w_j)
    joint = DiscreteJoint(table)
    n = min(table.shape)
    return np.arange(n, dtype=np.float64), joint.density_ratio()[:n, :n]


def cmd_micheck(args) -> int:
    presets = []
    ok = True
    for name, (table, negatives) in preset_joints().items():
        bounds, holds = {}, True
        for m in MI_BATCH_SIZES:
            entry = {}
            for mode in ("exhaustive", "montecarlo"):
                rep = verify_mi_bound(table, m, trials=args.trials, seed=args.seed, negatives=negatives, mode=mode)
                entry[mode] = rep.to_dict()
                holds &= rep.holds_eq2 and rep.holds_eq3
            bounds[str(m)] = entry
        labels, ratios = _condition_batch(table)
        cond1, cond2 = lambda_condition_check(labels, DistanceKind.ABSOLUTE, ratios)
        ok &= holds and cond2
        presets.append({"name": name, "bounds": bounds, "condition1": cond1, "condition2": cond2})
        print(f"{'pass' if holds and cond2 else 'FAIL'} {name:<17} condition1={cond1} condition2={cond2}")
    _dump_json({"passed": ok, "presets": presets}, args.out)
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate-distance": cmd_ablate_distance,
    "gradcheck": cmd_gradcheck,
    "micheck": cmd_micheck,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except (NumsenseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
