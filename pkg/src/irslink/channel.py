"""Frame-level channel synthesis.

Three links per frame: the BS-to-surface matrix G (elements x antennas), one
surface-to-user vector per cluster user, and one heavily attenuated direct
BS-to-user vector per user (through the carriage shell, used by the no-surface
baseline). Each link is Rician: a deterministic geometry phase front plus a
scaled complex-Gaussian scatter term.

Steering phases follow the half-wavelength conventions

    linear array:  pi * idx * sin(az) * cos(el)
    planar array:  pi * (iy * sin(el) * sin(az) + iz * sin(el) * cos(az))

with angles from :func:`irslink.scenario.bearing`. Angles are evaluated per
element pair from the actual 3-D geometry; at cell-scale distances this
converges to the planar-wave model. Channel vectors are stored in column
form, i.e. the received scalar is v^H diag(theta) G f and h^H f.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import InvalidInputError
from .numerics import RngStream, sample_cn01
from .scenario import (
    ScenarioConfig,
    db_to_linear,
    distance_bs_irs,
    draw_user_positions,
    irs_position,
)

_C = 299_792_458.0


def pathloss_amplitude(ref_loss_db: float, distance_m, exponent: float):
    """Amplitude sqrt(h0 * d^-beta) of the distance-power pathloss law."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise InvalidInputError("pathloss distance must be positive")
    return np.sqrt(db_to_linear(ref_loss_db) * d ** (-exponent))


def ula_phase(idx, az, el):
    return np.pi * np.asarray(idx) * np.sin(az) * np.cos(el)


def upa_phase(iy, iz, az, el):
    return np.pi * (np.asarray(iy) * np.sin(el) * np.sin(az)
                    + np.asarray(iz) * np.sin(el) * np.cos(az))


def steering(az: float, el: float, kind: str, count: int) -> np.ndarray:
    """Planar-wave steering vector; the reference element carries phase 0."""
    if kind == "ula":
        return np.exp(1j * ula_phase(np.arange(count), az, el))
    if kind == "upa":
        side = int(round(np.sqrt(count)))
        if side * side != count:
            raise InvalidInputError(f"planar array size must be a perfect square, got {count}")
        iy, iz = np.divmod(np.arange(count), side)
        return np.exp(1j * upa_phase(iy, iz, az, el))
    raise InvalidInputError(f"unknown array kind {kind!r}")


def surface_element_positions(cfg: ScenarioConfig, center) -> np.ndarray:
    """(M, 3) element positions; the window plane spans rail direction and height.

    Element m maps to offsets (iy, iz) = divmod(m, side), y-major, reference
    element at the window center position.
    """
    side = cfg.irs_side
    iy, iz = np.divmod(np.arange(cfg.irs_elements), side)
    d = cfg.wavelength_m / 2.0
    pos = np.tile(np.asarray(center, dtype=float), (cfg.irs_elements, 1))
    pos[:, 1] += iy * d
    pos[:, 2] += iz * d
    return pos


def bs_antenna_positions(cfg: ScenarioConfig) -> np.ndarray:
    """(L, 3) antenna positions, a half-wavelength line along the rail axis."""
    d = cfg.wavelength_m / 2.0
    pos = np.tile(np.asarray(cfg.bs_position, dtype=float), (cfg.bs_antennas, 1))
    pos[:, 1] += np.arange(cfg.bs_antennas) * d
    return pos


def _pair_angles(from_pos: np.ndarray, to_pos: np.ndarray):
    """Azimuth/elevation from each row of from_pos to each row of to_pos."""
    delta = to_pos[None, :, :] - from_pos[:, None, :]
    horiz = np.hypot(delta[..., 0], delta[..., 1])
    az = np.arctan2(delta[..., 1], delta[..., 0])
    el = np.arctan2(delta[..., 2], horiz)
    return az, el, delta


def rician_mix(los: np.ndarray, nlos: np.ndarray, k_factor_db: float) -> np.ndarray:
    """Blend a deterministic term with an (already scaled) scatter term.

    Weights sqrt(kappa/(kappa+1)) and sqrt(1/(kappa+1)), kappa linear from dB.
    """
    kappa = db_to_linear(k_factor_db)
    return np.sqrt(kappa / (kappa + 1.0)) * los + np.sqrt(1.0 / (kappa + 1.0)) * nlos


@dataclass
class ChannelRealization:
    """One frame's links plus the geometry they came from."""

    frame: int
    g: np.ndarray               # (M, L) surface x antennas
    v: np.ndarray               # (N, M) column form per user
    direct: np.ndarray          # (N, L) column form per user
    noise_w: float
    irs_pos: np.ndarray = field(default=None, repr=False)
    user_positions: np.ndarray = field(default=None, repr=False)
    d_bs_irs: float = 0.0
    d_irs_user: np.ndarray = field(default=None, repr=False)


def los_bs_irs(cfg: ScenarioConfig, k: int, elem_pos: np.ndarray,
               ant_pos: np.ndarray) -> np.ndarray:
    """Deterministic part of G at frame k, per-element-pair angles.

    Entry (m, l) carries the arrival phase at element m from antenna l, the
    closed-form pathloss amplitude, and (when enabled) the Doppler rotation
    over one frame for the relative speed along each arrival path.
    """
    amp = float(pathloss_amplitude(cfg.ref_loss_db, distance_bs_irs(cfg, k),
                                   cfg.pathloss_exp_bs_irs))
    az, el, delta = _pair_angles(elem_pos, ant_pos)
    side = cfg.irs_side
    iy, iz = np.divmod(np.arange(cfg.irs_elements), side)
    phases = upa_phase(iy[:, None], iz[:, None], az, el)
    if cfg.doppler_enabled:
        unit = delta / np.linalg.norm(delta, axis=-1, keepdims=True)
        cos_path = unit[..., 1]  # travel direction is +y
        shift = (cfg.train_speed_mps * cfg.carrier_freq_hz / _C) * cos_path
    else:
        shift = np.zeros_like(phases)
    doppler = np.exp(1j * 2.0 * np.pi * shift * cfg.frame_duration_s)
    return amp * np.exp(1j * phases) * doppler


def los_surface_user(cfg: ScenarioConfig, elem_pos: np.ndarray, user_pos: np.ndarray,
                     d_ref: float) -> np.ndarray:
    """Deterministic surface-to-user row, returned in column form (length M)."""
    az, el, _ = _pair_angles(elem_pos, user_pos[None, :])
    side = cfg.irs_side
    iy, iz = np.divmod(np.arange(cfg.irs_elements), side)
    phases = upa_phase(iy, iz, az[:, 0], el[:, 0])
    amp = float(pathloss_amplitude(cfg.ref_loss_db, d_ref, cfg.pathloss_exp_irs_user))
    return np.conj(amp * np.exp(1j * phases))


def los_bs_user(cfg: ScenarioConfig, ant_pos: np.ndarray, user_pos: np.ndarray,
                d_ref: float) -> np.ndarray:
    """Deterministic direct BS-to-user row with penetration loss, column form."""
    az, el, _ = _pair_angles(ant_pos, user_pos[None, :])
    phases = ula_phase(np.arange(cfg.bs_antennas), az[:, 0], el[:, 0])
    amp = float(pathloss_amplitude(cfg.ref_loss_db, d_ref, cfg.pathloss_exp_bs_irs))
    amp *= 10.0 ** (-cfg.penetration_loss_db / 20.0)
    return np.conj(amp * np.exp(1j * phases))


def synthesize_frame(cfg: ScenarioConfig, k: int, rng: RngStream) -> ChannelRealization:
    """Draw one frame's channel state.

    RNG consumption order is fixed: user positions, then the scatter parts of
    G, the surface-to-user links, and the direct links, in that order.
    """
    irs_pos = irs_position(cfg, k)
    users = draw_user_positions(cfg, irs_pos, rng)
    elem_pos = surface_element_positions(cfg, irs_pos)
    ant_pos = bs_antenna_positions(cfg)
    n = cfg.users_per_cluster

    amp_g = float(pathloss_amplitude(cfg.ref_loss_db, distance_bs_irs(cfg, k),
                                     cfg.pathloss_exp_bs_irs))
    los_g = los_bs_irs(cfg, k, elem_pos, ant_pos)
    nlos_g = sample_cn01(rng, (cfg.irs_elements, cfg.bs_antennas))
    if cfg.nlos_pathloss_scaled:
        nlos_g = amp_g * nlos_g
    g = rician_mix(los_g, nlos_g, cfg.rician_k_db)

    d_user = np.linalg.norm(users - irs_pos[None, :], axis=1)
    v = np.empty((n, cfg.irs_elements), dtype=np.complex128)
    for i in range(n):
        los_v = los_surface_user(cfg, elem_pos, users[i], float(d_user[i]))
        nlos_v = sample_cn01(rng, cfg.irs_elements)
        if cfg.nlos_pathloss_scaled:
            nlos_v = float(pathloss_amplitude(cfg.ref_loss_db, float(d_user[i]),
                                              cfg.pathloss_exp_irs_user)) * nlos_v
        v[i] = rician_mix(los_v, nlos_v, cfg.rician_k_db)

    bs = np.asarray(cfg.bs_position, dtype=float)
    d_direct = np.linalg.norm(users - bs[None, :], axis=1)
    direct = np.empty((n, cfg.bs_antennas), dtype=np.complex128)
    pen = 10.0 ** (-cfg.penetration_loss_db / 20.0)
    for i in range(n):
        los_d = los_bs_user(cfg, ant_pos, users[i], float(d_direct[i]))
        nlos_d = sample_cn01(rng, cfg.bs_antennas)
        if cfg.nlos_pathloss_scaled:
            nlos_d = pen * float(pathloss_amplitude(cfg.ref_loss_db, float(d_direct[i]),
                                                    cfg.pathloss_exp_bs_irs)) * nlos_d
        direct[i] = rician_mix(los_d, nlos_d, cfg.rician_k_db)

    return ChannelRealization(
        frame=k,
        g=g,
        v=v,
        direct=direct,
        noise_w=cfg.noise_w,
        irs_pos=irs_pos,
        user_positions=users,
        d_bs_irs=float(distance_bs_irs(cfg, k)),
        d_irs_user=d_user,
    )


def dump_channel(ch: ChannelRealization) -> str:
    """Flat text table of one realization: frame,link,row,col,re,im.

    Links are "g" for the surface-antenna matrix, "v<i>"/"d<i>" (1-based user
    index) for the per-user vectors; row/col are 0-based matrix indices,
    vectors use col 0.
    """
    out = io.StringIO()
    out.write("frame,link,row,col,re,im\n")

    def emit(link, arr):
        mat = np.atleast_2d(arr)
        for r in range(mat.shape[0]):
            for c in range(mat.shape[1]):
                z = mat[r, c]
                # plain-float repr round-trips exactly and parses anywhere
                out.write(f"{ch.frame},{link},{r},{c},"
                          f"{float(z.real)!r},{float(z.imag)!r}\n")

    emit("g", ch.g)
    for i in range(ch.v.shape[0]):
        emit(f"v{i + 1}", ch.v[i][:, None])
    for i in range(ch.direct.shape[0]):
        emit(f"d{i + 1}", ch.direct[i][:, None])
    return out.getvalue()
