"""Command line interface.

    intermittent simulate     --config exp.json [--seeds N] [--k-max K] [--out DIR] [--assert]
    intermittent verify-bound --config exp.json [--k-min K] ...
    intermittent dist-check   --config exp.json [--k K ...] [--ks-threshold T] ...
    intermittent trace        (--config exp.json | --path "0 1 0 0 1") [--lags 1,2,2]
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from typing import Sequence

import numpy as np

from .estimator import estimate
from .partitions import FiniteAlphabetExact, family_from_dict
from .stopping import LagSchedule, ScannerState, capped, supplier
from .harness import ExperimentConfig, dist_check, run, verify_bound, write_report
from .harness.report import summary

log = logging.getLogger("intermittent")


def _floats(text: str) -> list[float]:
    return [float(t) for t in re.split(r"[,\s]+", text.strip()) if t]


def _ints(text: str) -> list[int]:
    return [int(t) for t in re.split(r"[,\s]+", text.strip()) if t]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="intermittent", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser, config_required: bool = True) -> None:
        sp.add_argument("--config", required=config_required, help="experiment JSON")
        sp.add_argument("--seeds", type=int, help="number of seeds (keeps the configured base)")
        sp.add_argument("--k-max", type=int, dest="k_max")
        sp.add_argument("--horizon", type=int, help="max samples per path")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--assert", action="store_true", dest="check",
                        help="exit 1 if an acceptance check fails")

    common(sub.add_parser("simulate", help="error curves over seeds"))
    vb = sub.add_parser("verify-bound", help="growth-bound violation rates")
    common(vb)
    vb.add_argument("--k-min", type=int, dest="k_min")
    dc = sub.add_parser("dist-check", help="KS test of X_{zeta_k+1} against X_1")
    common(dc)
    dc.add_argument("--k", type=int, action="append", dest="ks")
    dc.add_argument("--ks-threshold", type=float, dest="ks_threshold")
    tr = sub.add_parser("trace", help="event-by-event log of a single path")
    common(tr, config_required=False)
    tr.add_argument("--path", help="literal path, comma or space separated")
    tr.add_argument("--alphabet", help="exact alphabet for --path (default: its symbols)")
    tr.add_argument("--family", help="partition family as JSON")
    tr.add_argument("--lags", help="custom lag table l_1,l_2,...")
    tr.add_argument("--seed", type=int, help="seed to trace (default: first configured)")
    return p


def _config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    seeds = None
    if args.seeds is not None:
        if args.seeds < 1:
            raise ValueError("--seeds must be >= 1")
        base = cfg.seeds[0]
        seeds = tuple(range(base, base + args.seeds))
    return cfg.with_overrides(
        seeds=seeds, k_max=args.k_max, horizon=args.horizon, workers=args.workers,
        k_min=getattr(args, "k_min", None), out_dir=args.out,
    )


def _report_lines(report, dist_rows=()) -> list[str]:
    lines = [f"seeds={len(report.logs)} truncated={report.counters()['truncated']} "
             f"degenerate_steps={report.counters()['degenerate_steps']}"]
    for c in report.checks:
        detail = " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in c.detail.items())
        lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name} {detail}".rstrip())
    return lines


def _trace(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    if args.path is None and args.config is None:
        raise ValueError("trace needs --path or --config")
    model = None
    if args.config is not None:
        cfg = _config(args)
        family, schedule, k_max, model = cfg.family, cfg.schedule, cfg.k_max, cfg.model
        seed = args.seed if args.seed is not None else cfg.seeds[0]
        more = capped(model.sampler(seed), cfg.horizon)
    else:
        path = np.array(_floats(args.path))
        alphabet = _floats(args.alphabet) if args.alphabet else np.unique(path)
        family = (family_from_dict(json.loads(args.family)) if args.family
                  else FiniteAlphabetExact(alphabet))
        schedule = LagSchedule("log_floor", c=3.0)
        k_max = args.k_max
        more = supplier(path)
    if args.lags:
        schedule = LagSchedule("custom", table=tuple(_ints(args.lags)))
        k_max = min(k_max or math.inf, len(schedule.table))
    if args.family and args.config is not None:
        family = family_from_dict(json.loads(args.family))
    state = ScannerState()
    n = 0
    for ev in estimate(more, family, schedule, k_max, state):
        n += 1
        line = f"k={ev.k} eta={ev.eta} zeta={ev.zeta} target_index={ev.target_index} g={ev.g!r}"
        if model is not None and model.has_oracle:
            z = ev.zeta
            line += f" oracle={model.cond_exp(state.history.view(0, z + 1))!r}"
        print(line, file=out)
    if k_max is None or n < k_max:
        print(f"stopped: no recurrence for k={state.k} within {len(state.history)} samples", file=out)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "trace":
            return _trace(args)
        cfg = _config(args)
        dist_rows = ()
        if args.command == "simulate":
            report = run(cfg)
        elif args.command == "verify-bound":
            report = verify_bound(cfg)
        else:
            report, dist_rows = dist_check(cfg, args.ks, args.ks_threshold)
    except (ValueError, LookupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.out_dir:
        write_report(report, cfg.out_dir, args.command, dist_rows)
    for line in _report_lines(report):
        print(line)
    for r in dist_rows:
        print(f"k={r.k} ks={r.ks:.6g} threshold={r.threshold:.6g} n={r.n_stopped}/{r.n_reference}")
    if not cfg.out_dir and args.verbose:
        print(json.dumps(summary(report, args.command, dist_rows)["counters"]))
    return 1 if args.check and not report.passed else 0


if __name__ == "__main__":
    sys.exit(main())
