"""Command line front end.

Subcommands:
  sweep         axis sweep over schemes, CSV to stdout or a file
  frame         solve one served frame and print per-scheme rates
  throughput    cell throughput with both power strategies
  dump-channel  CSV dump of one realized frame's channel matrices

Any scenario default can be replaced with --config FILE and/or repeated
--set key=value flags (applied after the file, left to right).
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from . import __version__
from .baselines import CeParams
from .channel import dump_channel, synthesize_frame
from .errors import InvalidConfigError, InvalidInputError
from .harness import (METRIC_FRAME_RATE, METRIC_THROUGHPUT, SCHEMES, SweepSpec,
                      emit_csv, run_frame_trial, run_sweep,
                      run_throughput_trial, stream_id, PURPOSE_CHANNEL)
from .numerics import RngStream
from .scenario import ScenarioConfig, apply_overrides, build_schedule, load_config


def _parse_values(text: str) -> List[float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(float(tok))
    if not out:
        raise InvalidInputError("--values needs at least one number")
    return out


def _parse_schemes(text: str) -> List[str]:
    schemes = [tok.strip() for tok in text.split(",") if tok.strip()]
    for s in schemes:
        if s not in SCHEMES:
            raise InvalidInputError(
                f"unknown scheme {s!r}; known: {', '.join(SCHEMES)}")
    if not schemes:
        raise InvalidInputError("--schemes needs at least one entry")
    return schemes


def _load_cfg(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.set:
        pairs = {}
        for item in args.set:
            key, sep, val = item.partition("=")
            if not sep:
                raise InvalidConfigError(f"--set expects key=value, got {item!r}")
            pairs[key.strip()] = val.strip()
        cfg = apply_overrides(cfg, pairs)
    return cfg


def _add_common(sub):
    sub.add_argument("--config", help="scenario config file (key = value lines)")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override one scenario field (repeatable)")
    sub.add_argument("--seed", type=int, default=1, help="base seed")


def _ce_params(args) -> Optional[CeParams]:
    if args.ce_population is None and args.ce_generations is None:
        return None
    params = CeParams()
    if args.ce_population is not None:
        params.population = args.ce_population
    if args.ce_generations is not None:
        params.generations = args.ce_generations
    return params


def _write_out(text: str, path: Optional[str]):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irslink",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"irslink {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sweep = subs.add_parser("sweep", help="axis sweep to CSV")
    _add_common(sweep)
    sweep.add_argument("--axis", required=True)
    sweep.add_argument("--values", required=True,
                       help="comma separated axis values")
    sweep.add_argument("--schemes", default="proposed,nce,sr,rps,no_irs")
    sweep.add_argument("--trials", type=int, default=10)
    sweep.add_argument("--metric", default=METRIC_FRAME_RATE,
                       choices=[METRIC_FRAME_RATE, METRIC_THROUGHPUT])
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--frame", type=int, default=None,
                       help="served frame for the frame_rate metric "
                            "(default: middle of the served stretch)")
    sweep.add_argument("--ce-population", type=int, default=None)
    sweep.add_argument("--ce-generations", type=int, default=None)
    sweep.add_argument("--out", help="CSV path (default: stdout)")

    frame = subs.add_parser("frame", help="solve one frame")
    _add_common(frame)
    frame.add_argument("--frame", type=int, default=None)
    frame.add_argument("--schemes", default="proposed")
    frame.add_argument("--trial", type=int, default=0)
    frame.add_argument("--ce-population", type=int, default=None)
    frame.add_argument("--ce-generations", type=int, default=None)

    tput = subs.add_parser("throughput", help="cell throughput, both "
                                              "power strategies")
    _add_common(tput)
    tput.add_argument("--schemes", default="proposed")
    tput.add_argument("--trials", type=int, default=5)
    tput.add_argument("--ce-population", type=int, default=None)
    tput.add_argument("--ce-generations", type=int, default=None)

    dump = subs.add_parser("dump-channel", help="dump one frame's channel")
    _add_common(dump)
    dump.add_argument("--frame", type=int, required=True)
    dump.add_argument("--trial", type=int, default=0)
    dump.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    spec = SweepSpec(axis=args.axis, values=tuple(_parse_values(args.values)),
                     schemes=tuple(_parse_schemes(args.schemes)),
                     trials=args.trials, seed=args.seed, metric=args.metric,
                     workers=args.workers, frame=args.frame,
                     ce=_ce_params(args))
    result = run_sweep(cfg, spec)
    meta = {"axis": spec.axis, "metric": spec.metric,
            "noise_dbm": f"{cfg.noise_dbm:g}",
            "schemes": ";".join(spec.schemes), "trials": str(spec.trials),
            "seed": str(spec.seed), "version": __version__}
    _write_out(emit_csv(result, meta), args.out)
    for err in result.errors:
        print(f"warning: {err}", file=sys.stderr)
    return 0


def _cmd_frame(args) -> int:
    cfg = _load_cfg(args)
    schemes = _parse_schemes(args.schemes)
    rates = run_frame_trial(cfg, schemes, args.seed, 0, args.trial,
                            frame=args.frame, ce=_ce_params(args))
    for s in schemes:
        print(f"{s} {rates[s]:.9g}")
    return 0


def _cmd_throughput(args) -> int:
    cfg = _load_cfg(args)
    schemes = _parse_schemes(args.schemes)
    sums = {s: {"throughput": [], "throughput_eq": []} for s in schemes}
    for trial in range(args.trials):
        out = run_throughput_trial(cfg, schemes, args.seed, 0, trial,
                                   ce=_ce_params(args))
        for s in schemes:
            for key in sums[s]:
                sums[s][key].append(out[s][key])
    for s in schemes:
        for key in ("throughput", "throughput_eq"):
            vals = sums[s][key]
            mean = sum(vals) / len(vals)
            print(f"{s} {key} {mean:.9g}")
    return 0


def _cmd_dump(args) -> int:
    cfg = _load_cfg(args)
    sched = build_schedule(cfg)
    if not 1 <= args.frame <= sched.frames_per_cell:
        raise InvalidInputError(
            f"frame must lie in 1..{sched.frames_per_cell}")
    rng = RngStream(args.seed, stream_id(0, args.trial, args.frame,
                                         PURPOSE_CHANNEL))
    ch = synthesize_frame(cfg, args.frame, rng)
    text = f"# noise_dbm={cfg.noise_dbm:g}\n" + dump_channel(ch)
    _write_out(text, args.out)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    handlers = {"sweep": _cmd_sweep, "frame": _cmd_frame,
                "throughput": _cmd_throughput, "dump-channel": _cmd_dump}
    try:
        return handlers[args.command](args)
    except (InvalidInputError, InvalidConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
