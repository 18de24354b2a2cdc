"""Experiment driver: paired-trial sweeps, aggregation, CSV emission.

Every random draw is keyed by a packed stream id (value index, trial, frame,
purpose) on top of one base seed, so a given trial sees the identical channel
realization under every scheme, schemes cannot perturb each other's draws,
and the output is byte-identical for any worker count.  Sweeps additionally
pin the value index to 0, pairing trials across axis cells: cells whose
configs give the draws the same shapes (k_factor, quant_bits, speed) then
see literally the same underlying randomness.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import (CeParams, FrameSolution, cross_entropy_solution,
                        no_surface_solution, random_phase_solution,
                        successive_refinement_solution)
from .channel import synthesize_frame
from .errors import InvalidConfigError, InvalidInputError
from .numerics import RngStream
from .optimizer import alternating_optimize
from .power import allocate_window, window_throughput
from .rate import composite_elements, gains_from_composite
from .scenario import ScenarioConfig, build_schedule

PURPOSE_CHANNEL = 0
PURPOSE_RPS = 1
PURPOSE_CE = 2

METRIC_FRAME_RATE = "frame_rate"
METRIC_THROUGHPUT = "throughput"
METRIC_THROUGHPUT_EQ = "throughput_eq"

SCHEMES = ("proposed", "proposed_no_pa", "nce", "sr", "rps", "no_irs")


def stream_id(value_idx: int, trial: int, frame: int, purpose: int) -> int:
    """Pack the draw coordinates into one 64-bit Philox stream id."""
    if not 0 <= value_idx < (1 << 24):
        raise InvalidInputError("value index out of packing range")
    if not 0 <= trial < (1 << 20):
        raise InvalidInputError("trial index out of packing range")
    if not 0 <= frame < (1 << 16):
        raise InvalidInputError("frame index out of packing range")
    if not 0 <= purpose < (1 << 4):
        raise InvalidInputError("purpose code out of packing range")
    return (((value_idx << 20 | trial) << 16 | frame) << 4) | purpose


def _set_users_per_cluster(cfg: ScenarioConfig, value) -> ScenarioConfig:
    served = cfg.total_users // cfg.users_per_cluster
    n = int(value)
    return cfg.replace(users_per_cluster=n, total_users=n * served)


def _set_speed_kmh(cfg: ScenarioConfig, value) -> ScenarioConfig:
    return cfg.replace(train_speed_mps=float(value) / 3.6)


_AXES = {
    "users_per_cluster": _set_users_per_cluster,
    "irs_elements": lambda cfg, v: cfg.replace(irs_elements=int(v)),
    "k_factor": lambda cfg, v: cfg.replace(rician_k_db=float(v)),
    "quant_bits": lambda cfg, v: cfg.replace(quant_bits=int(v)),
    "speed": _set_speed_kmh,        # axis values in km/h
    "bs_antennas": lambda cfg, v: cfg.replace(bs_antennas=int(v)),
    "avg_power_dbm": lambda cfg, v: cfg.replace(avg_power_dbm=float(v)),
    "alloc_window": lambda cfg, v: cfg.replace(alloc_window=int(v)),
}


def apply_axis(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    try:
        setter = _AXES[axis]
    except KeyError:
        raise InvalidInputError(
            f"unknown sweep axis {axis!r}; known: {', '.join(sorted(_AXES))}")
    return setter(cfg, value)


@dataclass
class SweepSpec:
    axis: str
    values: Tuple
    schemes: Tuple[str, ...]
    trials: int
    seed: int
    metric: str = METRIC_FRAME_RATE
    workers: int = 1
    frame: Optional[int] = None
    ce: Optional[CeParams] = None

    def __post_init__(self):
        self.values = tuple(self.values)
        self.schemes = tuple(self.schemes)
        for s in self.schemes:
            if s not in SCHEMES:
                raise InvalidInputError(
                    f"unknown scheme {s!r}; known: {', '.join(SCHEMES)}")
        if self.metric not in (METRIC_FRAME_RATE, METRIC_THROUGHPUT):
            raise InvalidInputError("metric must be frame_rate or throughput")
        if self.trials < 1 or self.workers < 1:
            raise InvalidInputError("trials and workers must be >= 1")


@dataclass
class SweepRow:
    axis: str
    value: float
    scheme: str
    metric: str
    mean: float
    stderr: float
    trials: int
    seed: int


@dataclass
class SweepResult:
    rows: List[SweepRow]
    errors: List[str] = field(default_factory=list)


def solve_frame(scheme: str, ch, cfg: ScenarioConfig, seed: int,
                value_idx: int, trial: int,
                ce: Optional[CeParams] = None) -> FrameSolution:
    """Run one scheme on one realized frame."""
    if scheme in ("proposed", "proposed_no_pa"):
        res = alternating_optimize(ch, cfg)
        gains = gains_from_composite(
            composite_elements(ch, res.beam.values), res.phases.values)
        return FrameSolution(rate=res.rate, gain_total=float(np.sum(gains)),
                             phases=res.phases.phases, beam=res.beam.values)
    if scheme == "rps":
        rng = RngStream(seed, stream_id(value_idx, trial, ch.frame, PURPOSE_RPS))
        return random_phase_solution(ch, cfg, rng)
    if scheme == "sr":
        return successive_refinement_solution(ch, cfg)
    if scheme == "nce":
        rng = RngStream(seed, stream_id(value_idx, trial, ch.frame, PURPOSE_CE))
        return cross_entropy_solution(ch, cfg, rng, params=ce)
    if scheme == "no_irs":
        return no_surface_solution(ch, cfg)
    raise InvalidInputError(f"unknown scheme {scheme!r}")


def _channel(cfg: ScenarioConfig, frame: int, seed: int, value_idx: int,
             trial: int):
    rng = RngStream(seed, stream_id(value_idx, trial, frame, PURPOSE_CHANNEL))
    return synthesize_frame(cfg, frame, rng)


def run_frame_trial(cfg: ScenarioConfig, schemes: Sequence[str], seed: int,
                    value_idx: int, trial: int, frame: Optional[int] = None,
                    ce: Optional[CeParams] = None) -> Dict[str, float]:
    """Frame rate of each scheme on one shared realization."""
    sched = build_schedule(cfg)
    if frame is None:
        frame = sched.served[(len(sched.served) - 1) // 2]
    if frame not in sched.served:
        raise InvalidInputError(f"frame {frame} is outside the served stretch")
    ch = _channel(cfg, frame, seed, value_idx, trial)
    return {s: solve_frame(s, ch, cfg, seed, value_idx, trial, ce).rate
            for s in schemes}


def run_throughput_trial(cfg: ScenarioConfig, schemes: Sequence[str], seed: int,
                         value_idx: int, trial: int,
                         ce: Optional[CeParams] = None
                         ) -> Dict[str, Dict[str, float]]:
    """Cell throughput of each scheme over the whole served stretch.

    Solves every served frame once per scheme, pools the per-frame effective
    gains into scheduling windows, and reports both power strategies: the
    window-level allocation and the flat per-frame average.
    """
    sched = build_schedule(cfg)
    weight = 1.0 / sched.frames_per_cell
    budget_unit = cfg.avg_power_w
    bases = {"proposed_no_pa": "proposed"}
    gammas: Dict[str, List[float]] = {}
    for frame in sched.served:
        ch = _channel(cfg, frame, seed, value_idx, trial)
        memo: Dict[str, FrameSolution] = {}
        for s in schemes:
            base = bases.get(s, s)
            if base not in memo:
                memo[base] = solve_frame(base, ch, cfg, seed, value_idx,
                                         trial, ce)
            gammas.setdefault(s, []).append(memo[base].gain_total / ch.noise_w)
    first = sched.served[0]
    out: Dict[str, Dict[str, float]] = {}
    for s in schemes:
        g = np.asarray(gammas[s])
        tp_opt = 0.0
        tp_eq = 0.0
        for window in sched.windows:
            gw = g[[k - first for k in window]]
            budget = len(window) * budget_unit
            equal = np.full(gw.size, budget_unit)
            tp_eq += window_throughput(equal, gw, weight)
            if s == "proposed_no_pa":
                tp_opt += window_throughput(equal, gw, weight)
                continue
            win = allocate_window(
                gw, budget,
                mu_init=cfg.pa_mu_init, e_init=cfg.pa_e_step_init,
                c_init=cfg.pa_c_step_init, d_init=cfg.pa_d_step_init,
                tol=cfg.pa_tol, feas_tol=cfg.pa_feas_tol,
                max_iter=cfg.pa_max_iter, project_duals=cfg.project_duals)
            tp_opt += window_throughput(win.power, gw, weight)
        out[s] = {METRIC_THROUGHPUT: tp_opt, METRIC_THROUGHPUT_EQ: tp_eq}
    return out


def _sweep_task(args):
    # Stream ids use value_idx 0 for every cell: trials are paired across
    # axis values as well as schemes (same draws, different config), which
    # is what makes adjacent-cell comparisons low-variance.
    cfg, spec_metric, schemes, seed, value_idx, trial, frame, ce = args
    try:
        if spec_metric == METRIC_FRAME_RATE:
            rates = run_frame_trial(cfg, schemes, seed, 0, trial,
                                    frame=frame, ce=ce)
            return ("ok", {s: {METRIC_FRAME_RATE: r} for s, r in rates.items()})
        return ("ok", run_throughput_trial(cfg, schemes, seed, 0, trial,
                                           ce=ce))
    except Exception as exc:           # recorded, not fatal to the sweep
        return ("error", f"value_idx={value_idx} trial={trial}: {exc!r}")


def run_sweep(base_cfg: ScenarioConfig, spec: SweepSpec) -> SweepResult:
    """Full axis sweep; deterministic for any worker count.

    An axis value that produces an invalid configuration (say a non-square
    element count) is recorded as an error and reported with empty cells; the
    remaining values still run.
    """
    configs: List[Optional[ScenarioConfig]] = []
    errors: List[str] = []
    for value in spec.values:
        try:
            configs.append(apply_axis(base_cfg, spec.axis, value))
        except (InvalidInputError, InvalidConfigError) as exc:
            configs.append(None)
            errors.append(f"value={value!r}: {exc}")
    tasks = []
    slices: Dict[int, Tuple[int, int]] = {}
    for vi, cfg in enumerate(configs):
        if cfg is None:
            continue
        start = len(tasks)
        for trial in range(spec.trials):
            tasks.append((cfg, spec.metric, spec.schemes, spec.seed, vi,
                          trial, spec.frame, spec.ce))
        slices[vi] = (start, len(tasks))
    if spec.workers > 1 and tasks:
        with Pool(spec.workers) as pool:
            outcomes = pool.map(_sweep_task, tasks)
    else:
        outcomes = [_sweep_task(t) for t in tasks]

    rows: List[SweepRow] = []
    for vi, value in enumerate(spec.values):
        lo, hi = slices.get(vi, (0, 0))
        chunk = outcomes[lo:hi]
        samples: Dict[Tuple[str, str], List[float]] = {}
        for status, payload in chunk:
            if status == "error":
                errors.append(payload)
                continue
            for scheme, metrics in payload.items():
                for metric, val in metrics.items():
                    samples.setdefault((scheme, metric), []).append(val)
        for scheme in spec.schemes:
            metrics = ([METRIC_FRAME_RATE] if spec.metric == METRIC_FRAME_RATE
                       else [METRIC_THROUGHPUT, METRIC_THROUGHPUT_EQ])
            for metric in metrics:
                vals = samples.get((scheme, metric), [])
                if vals:
                    arr = np.asarray(vals)
                    mean = float(np.mean(arr))
                    err = (float(np.std(arr, ddof=1) / math.sqrt(arr.size))
                           if arr.size > 1 else 0.0)
                else:
                    mean, err = float("nan"), float("nan")
                rows.append(SweepRow(axis=spec.axis, value=float(value),
                                     scheme=scheme, metric=metric, mean=mean,
                                     stderr=err, trials=len(vals),
                                     seed=spec.seed))
    return SweepResult(rows=rows, errors=errors)


CSV_HEADER = "axis,value,scheme,metric,mean,stderr,trials,seed"


def emit_csv(result: SweepResult, metadata: Optional[Dict[str, str]] = None) -> str:
    """Stable text form of a sweep: '# key=value' preamble, then the table."""
    buf = io.StringIO()
    for key in sorted(metadata or {}):
        buf.write(f"# {key}={metadata[key]}\n")
    buf.write(CSV_HEADER + "\n")
    for r in result.rows:
        buf.write(f"{r.axis},{r.value:.9g},{r.scheme},{r.metric},"
                  f"{r.mean:.9g},{r.stderr:.9g},{r.trials},{r.seed}\n")
    return buf.getvalue()


def read_csv(text: str) -> Tuple[Dict[str, str], List[SweepRow]]:
    """Inverse of emit_csv (modulo float formatting)."""
    meta: Dict[str, str] = {}
    rows: List[SweepRow] = []
    lines = [ln for ln in text.splitlines() if ln.strip()]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, val = ln[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
        else:
            body.append(ln)
    if not body or body[0] != CSV_HEADER:
        raise InvalidInputError("missing sweep CSV header")
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != 8:
            raise InvalidInputError(f"malformed sweep CSV row: {ln!r}")
        rows.append(SweepRow(axis=parts[0], value=float(parts[1]),
                             scheme=parts[2], metric=parts[3],
                             mean=float(parts[4]), stderr=float(parts[5]),
                             trials=int(parts[6]), seed=int(parts[7])))
    return meta, rows
