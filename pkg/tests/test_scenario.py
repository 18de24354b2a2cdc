"""Scenario geometry, frame schedule, and config parsing."""

import math

import numpy as np
import pytest

from irslink.errors import InvalidConfigError, InvalidInputError
from irslink.numerics import RngStream
from irslink.scenario import (ScenarioConfig, apply_overrides, bearing,
                              build_schedule, db_to_linear, dbm_to_watt,
                              distance_bs_irs, draw_user_positions,
                              irs_position, load_config, parse_config_text)


def toy_cfg(**kw):
    """One-user scenario with unit frame advance unless overridden."""
    base = dict(cell_radius_m=3.0, train_speed_mps=2.0, frame_duration_s=1.0,
                bs_rail_distance_m=4.0, users_per_cluster=1, total_users=1,
                alloc_window=1, irs_elements=4, bs_antennas=2)
    base.update(kw)
    return ScenarioConfig(**base)


class TestDerivedQuantities:
    def test_default_frame_counts(self):
        cfg = ScenarioConfig()
        assert cfg.frame_advance_m == pytest.approx(3.0)
        assert cfg.frames_per_cell == 233
        assert cfg.frames_served == 23

    def test_frame_count_rounds_half_up(self):
        assert toy_cfg(cell_radius_m=3.0, train_speed_mps=1.0).frames_per_cell == 6
        assert toy_cfg(cell_radius_m=3.25, train_speed_mps=1.0).frames_per_cell == 7

    def test_frame_count_speed_duration_product(self):
        a = ScenarioConfig()
        b = a.replace(train_speed_mps=a.train_speed_mps * 2,
                      frame_duration_s=a.frame_duration_s / 2)
        assert b.frames_per_cell == a.frames_per_cell

    def test_frames_served_is_cluster_count(self):
        cfg = ScenarioConfig(total_users=8, users_per_cluster=4)
        assert cfg.frames_served == 2
        assert ScenarioConfig(total_users=4).frames_served == 1

    def test_power_noise_wavelength(self):
        cfg = ScenarioConfig()
        assert cfg.avg_power_w == pytest.approx(0.1, rel=1e-12)
        assert cfg.noise_w == pytest.approx(1e-14, rel=1e-12)
        assert cfg.wavelength_m == pytest.approx(299_792_458.0 / 28e9, rel=1e-12)
        assert cfg.irs_side == 8

    def test_unit_helpers(self):
        assert db_to_linear(10.0) == pytest.approx(10.0)
        assert dbm_to_watt(30.0) == pytest.approx(1.0)


class TestConfigValidation:
    def test_non_square_elements(self):
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(irs_elements=17)

    def test_cluster_divisibility(self):
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(total_users=93)

    @pytest.mark.parametrize("field,value", [
        ("carrier_freq_hz", 0.0), ("frame_duration_s", -1.0),
        ("bs_antennas", 0), ("alloc_window", 0), ("quant_bits", 0),
    ])
    def test_positivity(self, field, value):
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(**{field: value})

    def test_seat_band_inside_carriage(self):
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(seat_height_m=2.45, seat_jitter_m=0.1)
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(seat_height_m=0.05, seat_jitter_m=0.1)
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(seat_jitter_m=-0.1)

    def test_bad_positions(self):
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(bs_position=(1.0, 2.0))

    def test_offset_checked_at_construction(self):
        ScenarioConfig(serve_offset=210)  # last legal start
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(serve_offset=211)
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(serve_offset=-1)


class TestSchedule:
    def test_default_centered(self):
        sched = build_schedule(ScenarioConfig())
        assert sched.serve_start == 105
        assert sched.served == tuple(range(106, 129))
        assert len(sched.served) == 23
        # idle margins differ by at most one frame
        before = sched.served[0] - 1
        after = sched.frames_per_cell - sched.served[-1]
        assert abs(before - after) <= 1

    def test_windows_chunking(self):
        sched = build_schedule(ScenarioConfig())
        assert tuple(len(w) for w in sched.windows) == (10, 10, 3)
        flat = tuple(f for w in sched.windows for f in w)
        assert flat == sched.served

    def test_explicit_offset(self):
        sched = build_schedule(ScenarioConfig(serve_offset=0))
        assert sched.served[0] == 1
        sched = build_schedule(ScenarioConfig(serve_offset=210))
        assert sched.served[-1] == 233

    def test_served_exceeding_cell(self):
        with pytest.raises(InvalidConfigError):
            ScenarioConfig(total_users=233 * 4 + 4)

    def test_window_length_config(self):
        sched = build_schedule(ScenarioConfig(alloc_window=23))
        assert tuple(len(w) for w in sched.windows) == (23,)


class TestGeometry:
    def test_toy_distance(self):
        # along-track offset vanishes at frame 2: distance collapses to the
        # rail standoff
        assert distance_bs_irs(toy_cfg(), 2) == pytest.approx(4.0, abs=1e-12)

    def test_default_endpoints(self):
        cfg = ScenarioConfig()
        assert float(distance_bs_irs(cfg, 1)) == pytest.approx(
            math.hypot(348.5, 20.0), abs=1e-4)
        assert float(distance_bs_irs(cfg, 233)) == pytest.approx(
            math.hypot(347.5, 20.0), abs=1e-4)

    def test_distance_symmetry(self):
        cfg = ScenarioConfig(cell_radius_m=300.0)
        assert cfg.frames_per_cell == 200
        k = np.arange(1, 101)
        assert np.allclose(distance_bs_irs(cfg, k),
                           distance_bs_irs(cfg, 201 - k), rtol=0, atol=1e-9)

    def test_distance_vectorized_matches_scalar(self):
        cfg = ScenarioConfig()
        ks = np.array([1, 50, 117, 233])
        vec = distance_bs_irs(cfg, ks)
        assert np.array_equal(vec, [float(distance_bs_irs(cfg, k)) for k in ks])

    def test_distance_floor_is_rail_standoff(self):
        cfg = ScenarioConfig()
        all_d = distance_bs_irs(cfg, np.arange(1, 234))
        assert np.all(all_d >= cfg.bs_rail_distance_m)

    @pytest.mark.parametrize("k", [0, 234, -3])
    def test_frame_range_errors(self, k):
        with pytest.raises(InvalidInputError):
            distance_bs_irs(ScenarioConfig(), k)
        with pytest.raises(InvalidInputError):
            irs_position(ScenarioConfig(), k)

    def test_surface_track(self):
        cfg = toy_cfg()
        # frame 2 puts the window abreast of the base station
        assert np.allclose(irs_position(cfg, 2), [0.0, 0.0, 1.0])
        p1 = irs_position(cfg, 1)
        p3 = irs_position(cfg, 3)
        assert p3[1] - p1[1] == pytest.approx(2 * cfg.frame_advance_m)
        assert p1[0] == p3[0] == 0.0 and p1[2] == p3[2] == 1.0

    def test_position_consistent_with_closed_form(self):
        # with the antenna at window height the 3-D distance equals the
        # closed-form rail expression
        cfg = ScenarioConfig(bs_position=(20.0, 0.0, 1.0))
        bs = np.asarray(cfg.bs_position)
        for k in (1, 60, 117, 233):
            d3 = np.linalg.norm(irs_position(cfg, k) - bs)
            assert d3 == pytest.approx(float(distance_bs_irs(cfg, k)), abs=1e-9)

    def test_user_box(self):
        cfg = ScenarioConfig()
        irs = irs_position(cfg, 117)
        pos = np.concatenate([
            draw_user_positions(cfg, irs, RngStream(5, t)) for t in range(50)
        ])
        assert pos.shape == (200, 3)
        # carriage interior lies away from the base station (negative x side)
        assert np.all(pos[:, 0] >= irs[0] - cfg.carriage_width_m)
        assert np.all(pos[:, 0] <= irs[0])
        assert np.all(np.abs(pos[:, 1] - irs[1]) <= cfg.carriage_length_m / 2)
        assert np.all(pos[:, 2] >= cfg.seat_height_m - cfg.seat_jitter_m)
        assert np.all(pos[:, 2] <= cfg.seat_height_m + cfg.seat_jitter_m)
        # the box is actually explored
        assert np.ptp(pos[:, 0]) > 0.5 * cfg.carriage_width_m
        assert np.ptp(pos[:, 1]) > 0.5 * cfg.carriage_length_m

    def test_user_box_flips_with_bs_side(self):
        cfg = ScenarioConfig(bs_position=(-20.0, 0.0, 2.0))
        irs = irs_position(cfg, 117)
        pos = draw_user_positions(cfg, irs, RngStream(5, 0))
        assert np.all(pos[:, 0] >= irs[0])
        assert np.all(pos[:, 0] <= irs[0] + cfg.carriage_width_m)

    def test_draws_reproducible(self):
        cfg = ScenarioConfig()
        irs = irs_position(cfg, 10)
        a = draw_user_positions(cfg, irs, RngStream(9, 1))
        b = draw_user_positions(cfg, irs, RngStream(9, 1))
        assert np.array_equal(a, b)


class TestBearing:
    def test_diagonal(self):
        az, el = bearing((0.0, 0.0, 0.0), (1.0, 1.0, math.sqrt(2.0)))
        assert az == pytest.approx(math.pi / 4)
        assert el == pytest.approx(math.pi / 4)

    def test_axes(self):
        assert bearing((0, 0, 0), (1, 0, 0)) == pytest.approx((0.0, 0.0))
        az, el = bearing((0, 0, 0), (0, 1, 0))
        assert az == pytest.approx(math.pi / 2) and el == 0.0
        az, el = bearing((0, 0, 0), (0, 0, 2))
        assert el == pytest.approx(math.pi / 2)

    def test_coincident_rejected(self):
        with pytest.raises(InvalidInputError):
            bearing((1.0, 2.0, 3.0), (1.0, 2.0, 3.0))


CONFIG_TEXT = """
# downlink scenario overrides
irs_elements = 25
rician_k_db = 5.5        # trailing comment
bs_position = 18, 0, 2.5
doppler_enabled = yes
serve_offset = none
train_speed_mps = 55.5
"""


class TestConfigParsing:
    def test_round_trip_values(self):
        cfg = parse_config_text(CONFIG_TEXT)
        assert cfg.irs_elements == 25
        assert cfg.rician_k_db == 5.5
        assert cfg.bs_position == (18.0, 0.0, 2.5)
        assert cfg.doppler_enabled is True
        assert cfg.serve_offset is None
        assert cfg.train_speed_mps == 55.5
        # untouched fields keep defaults
        assert cfg.bs_antennas == 16

    def test_base_config_respected(self):
        base = ScenarioConfig(quant_bits=3)
        cfg = parse_config_text("rician_k_db = 1\n", base=base)
        assert cfg.quant_bits == 3 and cfg.rician_k_db == 1.0

    def test_unknown_key_reports_line(self):
        with pytest.raises(InvalidConfigError, match="line 2"):
            parse_config_text("\nnot_a_key = 3\n")

    def test_bad_value_reports_line(self):
        with pytest.raises(InvalidConfigError, match="line 1"):
            parse_config_text("irs_elements = sixteen\n")

    def test_missing_equals(self):
        with pytest.raises(InvalidConfigError, match="key = value"):
            parse_config_text("just words\n")

    def test_bad_boolean(self):
        with pytest.raises(InvalidConfigError):
            parse_config_text("doppler_enabled = maybe\n")

    def test_bad_triple(self):
        with pytest.raises(InvalidConfigError):
            parse_config_text("bs_position = 1, 2\n")

    def test_serve_offset_spellings(self):
        for word in ("none", "centered", "center", "auto"):
            assert parse_config_text(f"serve_offset = {word}\n").serve_offset is None
        assert parse_config_text("serve_offset = 7\n").serve_offset == 7

    def test_parsed_config_still_validated(self):
        with pytest.raises(InvalidConfigError):
            parse_config_text("irs_elements = 17\n")

    def test_load_config(self, tmp_path):
        path = tmp_path / "scen.cfg"
        path.write_text(CONFIG_TEXT, encoding="utf-8")
        assert load_config(path) == parse_config_text(CONFIG_TEXT)

    def test_apply_overrides(self):
        cfg = apply_overrides(ScenarioConfig(), {"irs_elements": "36",
                                                 "noise_dbm": "-100"})
        assert cfg.irs_elements == 36 and cfg.noise_dbm == -100.0
        cfg = apply_overrides(ScenarioConfig(), {"quant_bits": 3})
        assert cfg.quant_bits == 3

    def test_apply_overrides_unknown_key(self):
        with pytest.raises(InvalidConfigError):
            apply_overrides(ScenarioConfig(), {"nope": "1"})
