"""Command-line entry point: one subcommand per pipeline stage.

    liftbid simulate-log CONFIG [--seed N] [--out DIR]
    liftbid train CONFIG --logs DIR --mode {erm,ips,ips-clipped} [--out PATH]
    liftbid experiment CONFIG --bundles-dir DIR [--seed N] [--out DIR]
    liftbid report --run-dir DIR [--format {csv,json}]

Outputs default to $LIFTBID_OUT (or ./liftbid-out) / <config stem>-seed<seed>.
Failures exit nonzero after printing one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .bidding import PctrModel
from .config import ConfigError, load_config, resolved_text
from .harness.experiment import run_ab_experiment, run_logging_campaign
from .harness.metrics import compute_metrics
from .harness.store import dumps, emit_report, read_labels, read_run, read_users, write_arm, write_run
from .learning.bundle import ModelBundle, train_bundle
from .learning.outcome import LossMode

OUT_ENV = "LIFTBID_OUT"
LOGGING_ARM = "logging"
BUNDLE_FILES = {m: f"{m.value}.json" for m in LossMode}


class UsageError(ValueError):
    pass


def _out_root() -> Path:
    return Path(os.environ.get(OUT_ENV) or "liftbid-out")


def _run_dir(config: str, seed: int, out: str | None) -> Path:
    if out:
        return Path(out)
    return _out_root() / f"{Path(config).stem}-seed{seed}"


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def cmd_simulate_log(args) -> int:
    plan = load_config(args.config)
    seed = plan.seed if args.seed is None else args.seed
    out = _run_dir(args.config, seed, args.out)
    campaign = run_logging_campaign(plan, seed)
    run = campaign.run
    write_arm(out, run)
    (out / LOGGING_ARM / "pctr.json").write_text(dumps(campaign.pctr.to_dict()))
    (out / "config.resolved").write_text(resolved_text(plan))
    _emit({"command": "simulate-log", "out": str(out), "seed": seed, "bids": len(run.log)})
    return 0


def _logs_dir(path: str) -> Path:
    p = Path(path)
    if (p / LOGGING_ARM / "labels.csv").exists():
        p = p / LOGGING_ARM
    if not (p / "labels.csv").exists():
        raise UsageError(f"no logging-campaign labels under {path}")
    return p


def cmd_train(args) -> int:
    plan = load_config(args.config)
    logs = _logs_dir(args.logs)
    uid, s_final, y = read_labels(logs / "labels.csv")
    uid2, X, _ = read_users(logs / "users.csv")
    if not (uid == uid2).all():
        raise UsageError(f"{logs}: labels.csv and users.csv list different users")
    pctr = PctrModel.from_dict(json.loads((logs / "pctr.json").read_text()))
    mode = LossMode(args.mode)
    bundle = train_bundle(X, s_final, y, pctr, mode, plan.learner, plan.seed)
    if args.out is None:
        out = logs.parent / "bundles" / BUNDLE_FILES[mode]
    else:
        out = Path(args.out)
        if out.suffix != ".json":
            out = out / BUNDLE_FILES[mode]
    bundle.save(out)
    _emit({"command": "train", "mode": mode.value, "out": str(out), "tau_bar": bundle.tau_bar})
    return 0


def load_bundles(bundles_dir) -> dict[LossMode, ModelBundle]:
    d = Path(bundles_dir)
    out = {}
    for mode, name in BUNDLE_FILES.items():
        if not (d / name).exists():
            raise UsageError(f"missing bundle {d / name}; run `liftbid train --mode {mode.value}`")
        bundle = ModelBundle.load(d / name)
        if bundle.mode is not mode:
            raise UsageError(f"{d / name} holds a {bundle.mode.value} bundle")
        out[mode] = bundle
    return out


def cmd_experiment(args) -> int:
    plan = load_config(args.config)
    seed = plan.seed if args.seed is None else args.seed
    out = _run_dir(args.config, seed, args.out)
    bundles = load_bundles(args.bundles_dir)
    runs = run_ab_experiment(plan, bundles, seed)
    write_run(out, runs, plan.cpc)
    report = compute_metrics(runs, plan.cpc)
    for fmt in ("csv", "json"):
        emit_report(report, out, fmt)
    (out / "config.resolved").write_text(resolved_text(plan))
    _emit({"command": "experiment", "out": str(out), "seed": seed})
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not (run_dir / "run.json").exists():
        raise UsageError(f"{run_dir} is not an experiment run directory")
    runs, cpc = read_run(run_dir)
    paths = emit_report(compute_metrics(runs, cpc), run_dir, args.format)
    _emit({"command": "report", "out": str(paths[0])})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liftbid", description="Lift-based bidding simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate-log", help="run the biased logging campaign")
    s.add_argument("config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate_log)

    s = sub.add_parser("train", help="fit a model bundle from logging-campaign artifacts")
    s.add_argument("config")
    s.add_argument("--logs", required=True)
    s.add_argument("--mode", required=True, choices=[m.value for m in LossMode])
    s.add_argument("--out")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("experiment", help="run the five-arm A/B experiment")
    s.add_argument("config")
    s.add_argument("--bundles-dir", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("report", help="recompute metrics from a run directory")
    s.add_argument("--run-dir", required=True)
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        err = {"error": "config", "message": exc.message, "key": exc.key, "line": exc.line}
        code = 2
    except (UsageError, FileNotFoundError) as exc:
        err = {"error": "usage", "message": str(exc)}
        code = 2
    except (ValueError, ZeroDivisionError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        code = 1
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
