"""Deployment geometry, frame schedule, and configuration handling.

The base station is static next to a straight rail segment of length twice the
cell radius. A refracting surface rides on a train window past it at constant
speed; time is sliced into frames short enough that the surface is treated as
stationary within each one. A block of consecutive frames is served, one user
cluster per frame.

Coordinate convention: the rail runs along the y axis, the surface starts at
``irs_initial_position`` which is its closest-approach point to the base
station, and the carriage interior extends away from the base station in x.
``bs_rail_distance_m`` is the lateral distance used by the closed-form
distance law; the configured 3-D positions are used for angles and user
geometry.

Note on noise: the configured ``noise_psd_dbm_hz`` and ``bandwidth_hz`` are
carried for reference only; multiplying them out gives a noise level that is
inconsistent with any sane link budget at these pathlosses, so the receiver
noise power is the direct config value ``noise_dbm`` (calibrated default).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .numerics import RngStream


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Immutable scenario parameters. All units are SI unless the name says dB."""

    carrier_freq_hz: float = 28e9
    frame_duration_s: float = 0.036
    cell_radius_m: float = 350.0
    bs_rail_distance_m: float = 20.0
    avg_power_dbm: float = 20.0
    bs_antennas: int = 16
    irs_elements: int = 64
    bandwidth_hz: float = 2e9
    noise_psd_dbm_hz: float = -80.0
    noise_dbm: float = -110.0
    rician_k_db: float = 3.0
    pathloss_exp_bs_irs: float = 2.0
    pathloss_exp_irs_user: float = 3.0
    train_speed_mps: float = 300.0 / 3.6
    alloc_window: int = 10
    quant_bits: int = 2
    users_per_cluster: int = 4
    total_users: int = 92
    ref_loss_db: float = -61.3849
    bs_position: Tuple[float, float, float] = (20.0, 0.0, 2.0)
    irs_initial_position: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    carriage_length_m: float = 24.0
    carriage_width_m: float = 5.0
    carriage_height_m: float = 2.5
    seat_height_m: float = 1.2
    seat_jitter_m: float = 0.1
    penetration_loss_db: float = 65.0
    doppler_enabled: bool = False
    nlos_pathloss_scaled: bool = True
    serve_offset: Optional[int] = None
    ao_tol: float = 1e-3
    ao_max_iter: int = 50
    sca_tol: float = 1e-9
    sca_max_iter: int = 200
    bb_node_budget: int = 1_000_000
    pa_max_iter: int = 100
    pa_tol: float = 1e-2
    pa_feas_tol: float = 1e-12
    pa_mu_init: float = -50.0
    pa_e_step_init: float = 10.0
    pa_c_step_init: float = 1.0
    pa_d_step_init: float = 1.0
    project_duals: bool = True

    def __post_init__(self):
        positive = [
            "carrier_freq_hz", "frame_duration_s", "cell_radius_m",
            "bs_rail_distance_m", "bandwidth_hz", "train_speed_mps",
            "carriage_length_m", "carriage_width_m", "carriage_height_m",
            "ao_tol", "sca_tol", "pa_tol", "pa_feas_tol",
            "pa_e_step_init", "pa_c_step_init", "pa_d_step_init",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise InvalidConfigError(f"{name} must be positive")
        for name in ("bs_antennas", "irs_elements", "alloc_window", "quant_bits",
                     "users_per_cluster", "total_users", "ao_max_iter",
                     "sca_max_iter", "bb_node_budget", "pa_max_iter"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfigError(f"{name} must be a positive integer")
        side = math.isqrt(self.irs_elements)
        if side * side != self.irs_elements:
            raise InvalidConfigError(
                f"irs_elements must be a perfect square for the planar surface, got {self.irs_elements}"
            )
        if self.total_users % self.users_per_cluster != 0:
            raise InvalidConfigError(
                f"total_users ({self.total_users}) must be an exact multiple of "
                f"users_per_cluster ({self.users_per_cluster})"
            )
        if len(self.bs_position) != 3 or len(self.irs_initial_position) != 3:
            raise InvalidConfigError("bs_position and irs_initial_position need 3 coordinates")
        if self.seat_jitter_m < 0:
            raise InvalidConfigError("seat_jitter_m must be nonnegative")
        lo = self.seat_height_m - self.seat_jitter_m
        hi = self.seat_height_m + self.seat_jitter_m
        if lo < 0 or hi > self.carriage_height_m:
            raise InvalidConfigError("seat height band must lie inside the carriage height")
        # schedule feasibility, including an explicit serve_offset
        sched_probe = build_schedule(self, _validate_only=True)
        del sched_probe

    # derived quantities

    @property
    def frame_advance_m(self) -> float:
        return self.train_speed_mps * self.frame_duration_s

    @property
    def frames_per_cell(self) -> int:
        return _round_half_up(2.0 * self.cell_radius_m / self.frame_advance_m)

    @property
    def frames_served(self) -> int:
        return self.total_users // self.users_per_cluster

    @property
    def irs_side(self) -> int:
        return math.isqrt(self.irs_elements)

    @property
    def avg_power_w(self) -> float:
        return dbm_to_watt(self.avg_power_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_watt(self.noise_dbm)

    @property
    def wavelength_m(self) -> float:
        return 299_792_458.0 / self.carrier_freq_hz

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class FrameSchedule:
    """Served-frame plan derived from a config.

    Frames are 1-based. ``served`` lists the frame indices that carry a user
    cluster; ``windows`` chops them into power-allocation blocks of
    ``alloc_window`` frames (the last block may be shorter).
    """

    frame_advance_m: float
    frames_per_cell: int
    frames_served: int
    serve_start: int
    served: Tuple[int, ...]
    windows: Tuple[Tuple[int, ...], ...]


def build_schedule(cfg: ScenarioConfig, _validate_only: bool = False):
    k_total = cfg.frames_per_cell
    k_serve = cfg.frames_served
    if k_serve > k_total:
        raise InvalidConfigError(
            f"served frames ({k_serve}) exceed frames in the cell ({k_total})"
        )
    if cfg.serve_offset is None:
        start = (k_total - k_serve) // 2
    else:
        start = int(cfg.serve_offset)
    if start < 0 or start + k_serve > k_total:
        raise InvalidConfigError(
            f"serve_offset {start} puts the {k_serve}-frame window outside 1..{k_total}"
        )
    if _validate_only:
        return None
    served = tuple(range(start + 1, start + k_serve + 1))
    win = int(cfg.alloc_window)
    windows = tuple(served[i:i + win] for i in range(0, k_serve, win))
    return FrameSchedule(
        frame_advance_m=cfg.frame_advance_m,
        frames_per_cell=k_total,
        frames_served=k_serve,
        serve_start=start,
        served=served,
        windows=windows,
    )


def distance_bs_irs(cfg: ScenarioConfig, k) -> np.ndarray:
    """Closed-form BS-to-surface distance at frame k (1-based, scalar or array).

    sqrt((R - (k - 1/2) d_f)^2 + d0^2); symmetric about the cell midpoint, so
    the outbound half mirrors the inbound half automatically.
    """
    karr = np.asarray(k)
    if np.any(karr < 1) or np.any(karr > cfg.frames_per_cell):
        raise InvalidInputError(
            f"frame index out of range 1..{cfg.frames_per_cell}: {k!r}"
        )
    along = cfg.cell_radius_m - (karr - 0.5) * cfg.frame_advance_m
    return np.sqrt(along ** 2 + cfg.bs_rail_distance_m ** 2)


def irs_position(cfg: ScenarioConfig, k: int) -> np.ndarray:
    """Surface reference-element position at frame k (1-based)."""
    if k < 1 or k > cfg.frames_per_cell:
        raise InvalidInputError(f"frame index out of range 1..{cfg.frames_per_cell}: {k}")
    base = np.asarray(cfg.irs_initial_position, dtype=float)
    advance = (k - 0.5) * cfg.frame_advance_m - cfg.cell_radius_m
    return base + np.array([0.0, advance, 0.0])


def draw_user_positions(cfg: ScenarioConfig, irs_pos: np.ndarray, rng: RngStream) -> np.ndarray:
    """Seat positions for one cluster, uniform over the carriage box.

    The carriage is centered lengthwise on the window and extends away from
    the base station; seats sit at seat_height_m +- seat_jitter_m. Draw order
    is fixed: x block, then y, then z.
    """
    n = cfg.users_per_cluster
    if float(cfg.bs_position[0]) >= float(irs_pos[0]):
        x_lo, x_hi = irs_pos[0] - cfg.carriage_width_m, irs_pos[0]
    else:
        x_lo, x_hi = irs_pos[0], irs_pos[0] + cfg.carriage_width_m
    xs = rng.uniform(x_lo, x_hi, n)
    ys = rng.uniform(irs_pos[1] - cfg.carriage_length_m / 2.0,
                     irs_pos[1] + cfg.carriage_length_m / 2.0, n)
    zs = rng.uniform(cfg.seat_height_m - cfg.seat_jitter_m,
                     cfg.seat_height_m + cfg.seat_jitter_m, n)
    return np.stack([xs, ys, zs], axis=1)


def bearing(origin, target):
    """(azimuth, elevation) of target as seen from origin.

    Azimuth is measured in the horizontal plane from +x toward +y; elevation
    from the horizontal plane toward +z. Coincident points are an error.
    """
    delta = np.asarray(target, dtype=float) - np.asarray(origin, dtype=float)
    if not np.any(delta):
        raise InvalidInputError("bearing undefined for coincident points")
    horiz = math.hypot(delta[0], delta[1])
    return math.atan2(delta[1], delta[0]), math.atan2(delta[2], horiz)


# configuration file handling: UTF-8 "key = value" lines, '#' comments


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise InvalidConfigError(f"not a boolean: {raw!r}")


def _parse_triple(raw: str) -> Tuple[float, float, float]:
    parts = [p for p in raw.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise InvalidConfigError(f"expected 3 coordinates, got {raw!r}")
    return tuple(float(p) for p in parts)


def _parse_serve_offset(raw: str):
    low = raw.strip().lower()
    if low in ("none", "centered", "center", "auto"):
        return None
    return int(low)


def _field_parser(field: dataclasses.Field):
    if field.name in ("bs_position", "irs_initial_position"):
        return _parse_triple
    if field.name == "serve_offset":
        return _parse_serve_offset
    if field.type in ("bool",):
        return _parse_bool
    if field.type in ("int",):
        return lambda raw: int(raw.strip())
    return lambda raw: float(raw.strip())


_PARSERS = {f.name: _field_parser(f) for f in dataclasses.fields(ScenarioConfig)}


def parse_config_text(text: str, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    changes = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise InvalidConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _PARSERS:
            raise InvalidConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            changes[key] = _PARSERS[key](raw)
        except InvalidConfigError:
            raise
        except ValueError as exc:
            raise InvalidConfigError(f"line {lineno}: bad value for {key}: {raw!r}") from exc
    cfg = base if base is not None else ScenarioConfig()
    return cfg.replace(**changes) if changes else cfg


def load_config(path, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def apply_overrides(cfg: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    """Apply string-valued overrides (CLI flags) through the same parsers."""
    changes = {}
    for key, raw in overrides.items():
        if key not in _PARSERS:
            raise InvalidConfigError(f"unknown config key {key!r}")
        if isinstance(raw, str):
            changes[key] = _PARSERS[key](raw)
        else:
            changes[key] = raw
    return cfg.replace(**changes) if changes else cfg
