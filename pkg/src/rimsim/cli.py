"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 runtime or
data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from rimsim import config as config_mod
from rimsim import features, mlp, recommender, sensorsim, synthgen
from rimsim.config import ConfigError
from rimsim.metrics import MetricsReport

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("rimsim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _load_config(args) -> config_mod.ExperimentConfig:
    cfg = config_mod.load(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
        cfg.validate()
    return cfg


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    if args.users < 1 or args.days < 1:
        raise ConfigError("users" if args.users < 1 else "days", "must be >= 1")
    data = synthgen.generate_dataset(args.users, args.days, cfg.seed, cfg.generator)
    _write(synthgen.to_csv(synthgen.flatten(data)), args.out)
    return EXIT_OK


def parse_schedule(text: str, start_ms: int) -> list[sensorsim.Segment]:
    """``walk:MIN[:SPM]`` and ``idle:MIN`` items separated by commas."""
    items = []
    for part in text.split(","):
        bits = part.strip().split(":")
        if bits[0] not in ("walk", "idle") or len(bits) not in (2, 3):
            raise ConfigError("schedule", f"cannot parse segment {part!r}")
        items.append((bits[0], *map(float, bits[1:])))
    return sensorsim.schedule_from(items, start_ms)


def cmd_trace(args) -> int:
    cfg = _load_config(args)
    if args.input:
        trace = sensorsim.read_trace(args.input)
    else:
        start = dt.datetime.fromisoformat(args.start).replace(tzinfo=dt.timezone.utc)
        segs = parse_schedule(args.schedule, int(start.timestamp() * 1000))
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        trace = sensorsim.synth_trace(segs, rng, cfg.sensors)
        if args.save_trace:
            sensorsim.write_trace(trace, args.save_trace)
    summary = sensorsim.process_trace(trace, cfg.sensors)
    if trace:
        day = dt.datetime.fromtimestamp(trace[0].t / 1000, dt.timezone.utc).date()
    else:
        day = dt.date.fromisoformat(args.start[:10])
    row = {
        "date": day.isoformat(), "steps": str(summary.steps),
        "distance_km": f"{summary.distance_km:.4f}", "sleep_hrs": f"{summary.sleep_hrs:.4f}",
    }
    cells = [row.get(col, "") for col in synthgen.CSV_HEADER]
    _write(",".join(synthgen.CSV_HEADER) + "\n" + ",".join(cells) + "\n", args.out)
    return EXIT_OK


def cmd_pretrain(args) -> int:
    from rimsim import pipeline

    cfg = _load_config(args)
    res = pipeline.pretrain(cfg)
    mlp.save_checkpoint(res.checkpoint.params, res.checkpoint.scaler, res.checkpoint.arch, args.out)
    summary = {
        "epochs_run": len(res.history.epochs),
        "best_epoch": res.history.best_epoch,
        "holdout_mae": res.holdout_mae,
        "holdout_sign_accuracy": res.holdout_sign_accuracy,
    }
    if args.history:
        Path(args.history).write_text(
            json.dumps({**summary, **res.history.to_dict()}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_fed(args) -> int:
    from rimsim import pipeline

    cfg = _load_config(args)
    if args.rounds is not None:
        fed = cfg.federated
        per = fed.local_epochs
        cfg = cfg.replace(federated=dataclasses.replace(
            fed, rounds=args.rounds, total_epochs=args.rounds * per))
        cfg.validate()
    if not Path(args.checkpoint).is_file():
        raise FileNotFoundError(f"checkpoint {args.checkpoint} not found")
    ckpt = mlp.load_checkpoint(args.checkpoint, expect_arch=cfg.model.arch)
    result = pipeline.run_federated(cfg, ckpt, args.strategy)
    _write(result.report.to_json(), args.out)
    if args.log:
        with open(args.log, "a", encoding="utf-8") as fh:
            for entry in result.report.telemetry:
                fh.write(json.dumps({"strategy": result.report.strategy, **entry},
                                    sort_keys=True) + "\n")
    if args.out not in (None, "-"):
        sys.stdout.write(result.report.render())
    return EXIT_OK


def cmd_recommend(args) -> int:
    cfg = _load_config(args)
    record = synthgen.DailyRecord(
        date=dt.date.fromisoformat(args.date), steps=0, distance=args.distance,
        sleep=args.sleep, breakfast=args.breakfast, lunch=args.lunch, dinner=args.dinner,
        age=args.age, height=args.height, weight=args.weight, gender=args.gender,
    )
    record.validate()
    x = features.engineer(record)
    if args.checkpoint:
        ckpt = mlp.load_checkpoint(args.checkpoint, expect_arch=cfg.model.arch)
        d = recommender.deficits_from_model(ckpt, x)
        origin = "model"
    else:
        d = features.deficit_labels(record, cfg.model.ranges)
        origin = "ideal-range"
    rcfg = cfg.recommender.build()
    rec = recommender.recommend(x, d, rcfg)
    if args.json:
        doc = {
            "deficits": {"sleep": float(d[0]), "distance": float(d[1]), "source": origin},
            "composite_risk": rec.score,
            "high_priority": rec.high_priority,
            "messages": list(rec.messages),
            "items": [dataclasses.asdict(i) for i in rec.items],
        }
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(rec.render(rcfg.catalog.get("high_priority_tag", "[HIGH PRIORITY]")))
    return EXIT_OK


def cmd_report(args) -> int:
    doc = json.loads(Path(args.report).read_text(encoding="utf-8"))
    report = MetricsReport.from_dict(doc)
    sys.stdout.write(report.render())
    if args.json_out:
        Path(args.json_out).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _load_config(args)
    _write(cfg.to_toml(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rimsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--config", help="experiment config (TOML)")
        if seed:
            sp.add_argument("--seed", type=int, help="override the master seed")

    g = sub.add_parser("generate", help="synthetic dataset to CSV")
    common(g)
    g.add_argument("--users", type=int, default=100)
    g.add_argument("--days", type=int, default=15)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("trace", help="synthesize or replay an accelerometer trace")
    common(t)
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="trace CSV (t_ms,x,y,z)")
    src.add_argument("--schedule", help="e.g. 'walk:10:100,idle:60'")
    t.add_argument("--start", default="2025-04-18T08:00", help="schedule start, UTC")
    t.add_argument("--save-trace")
    t.add_argument("--out", default="-")
    t.set_defaults(func=cmd_trace)

    pt = sub.add_parser("pretrain", help="train on the synthetic corpus")
    common(pt)
    pt.add_argument("--out", required=True, help="checkpoint path")
    pt.add_argument("--history", help="write per-epoch history JSON")
    pt.set_defaults(func=cmd_pretrain)

    f = sub.add_parser("fed", help="federated fine-tuning experiment")
    common(f)
    f.add_argument("--strategy", choices=("fedavg", "fedper"))
    f.add_argument("--checkpoint", default="checkpoint.json")
    f.add_argument("--rounds", type=int)
    f.add_argument("--out", default="-", help="machine-readable report (JSON)")
    f.add_argument("--log", help="append per-round telemetry (JSON lines)")
    f.set_defaults(func=cmd_fed)

    r = sub.add_parser("recommend", help="recommendations for one day")
    common(r, seed=False)
    r.add_argument("--checkpoint", help="predict deficits with this model")
    r.add_argument("--date", default=dt.date.today().isoformat())
    r.add_argument("--sleep", type=float, required=True)
    r.add_argument("--distance", type=float, required=True, help="km")
    r.add_argument("--age", type=int, required=True)
    r.add_argument("--height", type=float, required=True, help="cm")
    r.add_argument("--weight", type=float, required=True, help="kg")
    r.add_argument("--gender", type=int, choices=(0, 1), required=True, help="0 female, 1 male")
    for meal in ("breakfast", "lunch", "dinner"):
        r.add_argument(f"--{meal}", type=int, choices=(0, 1), default=1)
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_recommend)

    rp = sub.add_parser("report", help="render a saved report")
    rp.add_argument("report")
    rp.add_argument("--json-out")
    rp.set_defaults(func=cmd_report)

    c = sub.add_parser("config", help="print the effective configuration")
    common(c)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_config)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
