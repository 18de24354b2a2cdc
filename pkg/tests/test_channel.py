"""Pathloss, array responses, fading mix, and frame synthesis."""

import math

import numpy as np
import pytest

from irslink.channel import (bs_antenna_positions, dump_channel, los_bs_irs,
                             los_bs_user, los_surface_user, pathloss_amplitude,
                             rician_mix, steering, surface_element_positions,
                             synthesize_frame, ula_phase, upa_phase)
from irslink.errors import InvalidInputError
from irslink.numerics import RngStream, sample_cn01
from irslink.scenario import (ScenarioConfig, distance_bs_irs, irs_position)


class TestPathloss:
    def test_reference_distance(self):
        amp = pathloss_amplitude(-61.3849, 1.0, 2.0)
        assert amp == pytest.approx(math.sqrt(10 ** (-61.3849 / 10)), rel=1e-12)

    def test_rail_distance_value(self):
        # amplitude at the cell edge of the default layout
        amp = pathloss_amplitude(-61.3849, 349.0735, 2.0)
        assert amp == pytest.approx(2.4417e-6, rel=5e-4)
        assert amp == pytest.approx(10 ** (-61.3849 / 20) / 349.0735, rel=1e-12)

    def test_exponent_zero_is_flat(self):
        a = pathloss_amplitude(-60.0, 1.0, 0.0)
        b = pathloss_amplitude(-60.0, 500.0, 0.0)
        assert a == b

    def test_power_halves_per_doubling_squared(self):
        a = pathloss_amplitude(-60.0, 10.0, 2.0)
        b = pathloss_amplitude(-60.0, 20.0, 2.0)
        assert (a / b) ** 2 == pytest.approx(4.0, rel=1e-12)

    def test_vectorized(self):
        d = np.array([1.0, 2.0, 4.0])
        amp = pathloss_amplitude(-60.0, d, 3.0)
        assert amp.shape == (3,)
        assert amp[0] / amp[1] == pytest.approx(2 ** 1.5, rel=1e-12)

    def test_nonpositive_distance(self):
        with pytest.raises(InvalidInputError):
            pathloss_amplitude(-60.0, 0.0, 2.0)
        with pytest.raises(InvalidInputError):
            pathloss_amplitude(-60.0, np.array([1.0, -2.0]), 2.0)


class TestSteering:
    def test_phase_conventions(self):
        assert ula_phase(0, 0.3, 0.2) == 0.0
        assert ula_phase(2, np.pi / 6, 0.0) == pytest.approx(2 * np.pi * 0.5)
        assert upa_phase(0, 0, 0.7, 0.4) == 0.0
        # elevation pi/2, azimuth 0 puts the full phase on the z index
        assert upa_phase(1, 1, 0.0, np.pi / 2) == pytest.approx(np.pi)

    def test_broadside_all_ones(self):
        for kind, count in (("ula", 8), ("upa", 9)):
            vec = steering(0.0, 0.0, kind, count)
            assert np.allclose(vec, np.ones(count))

    def test_endfire_line(self):
        vec = steering(np.pi / 2, 0.0, "ula", 2)
        assert np.allclose(vec, [1.0, -1.0], atol=1e-12)

    def test_unit_modulus(self):
        rng = RngStream(2, 0)
        for _ in range(20):
            az = float(rng.uniform(-np.pi, np.pi))
            el = float(rng.uniform(-np.pi / 2, np.pi / 2))
            v = steering(az, el, "upa", 16)
            assert np.allclose(np.abs(v), 1.0, atol=1e-12)
            assert v[0] == 1.0 + 0.0j  # reference element

    def test_upa_layout_matches_phase_rule(self):
        az, el = 0.4, -0.7
        v = steering(az, el, "upa", 9)
        iy, iz = np.divmod(np.arange(9), 3)
        assert np.allclose(v, np.exp(1j * upa_phase(iy, iz, az, el)))

    def test_bad_kinds(self):
        with pytest.raises(InvalidInputError):
            steering(0.0, 0.0, "upa", 10)   # not a square
        with pytest.raises(InvalidInputError):
            steering(0.0, 0.0, "circular", 8)


class TestElementLayout:
    def test_surface_grid_spacing(self):
        cfg = ScenarioConfig(irs_elements=16)
        pos = surface_element_positions(cfg, np.zeros(3))
        assert pos.shape == (16, 3)
        half = cfg.wavelength_m / 2
        # reference element sits at the given center, grid advances along +y/+z
        assert np.allclose(pos[0], 0.0)
        assert np.allclose(pos[1] - pos[0], [0.0, 0.0, half])
        assert np.allclose(pos[4] - pos[0], [0.0, half, 0.0])
        assert np.all(pos[:, 0] == 0.0)

    def test_bs_line_spacing(self):
        cfg = ScenarioConfig()
        pos = bs_antenna_positions(cfg)
        assert pos.shape == (16, 3)
        d = np.diff(pos[:, 1])
        assert np.allclose(d, cfg.wavelength_m / 2)
        assert np.allclose(pos[0], cfg.bs_position)


class TestRicianMix:
    def test_pure_los_limit(self):
        los = np.exp(1j * np.linspace(0, 2, 8))
        nlos = sample_cn01(RngStream(1, 0), 8)
        mixed = rician_mix(los, nlos, 140.0)
        assert np.allclose(mixed, los, rtol=1e-5, atol=1e-5)

    def test_equal_split_at_zero_db(self):
        los = np.ones(4)
        nlos = 1j * np.ones(4)
        mixed = rician_mix(los, nlos, 0.0)
        assert np.allclose(mixed, (los + nlos) / math.sqrt(2.0), rtol=1e-12)

    def test_three_db_weight(self):
        mixed = rician_mix(np.ones(1), np.zeros(1), 3.0)
        kappa = 10 ** 0.3
        assert abs(mixed[0]) == pytest.approx(0.81615, abs=5e-5)
        assert abs(mixed[0]) == pytest.approx(math.sqrt(kappa / (kappa + 1)),
                                              rel=1e-12)

    def test_power_is_convex_combination(self):
        # |w_los|^2 + |w_nlos|^2 = 1 for every factor
        for kdb in (-10.0, 0.0, 3.0, 7.0, 20.0):
            wl = abs(rician_mix(np.ones(1), np.zeros(1), kdb)[0])
            wn = abs(rician_mix(np.zeros(1), np.ones(1), kdb)[0])
            assert wl ** 2 + wn ** 2 == pytest.approx(1.0, rel=1e-12)


class TestLosLinks:
    def test_bs_irs_magnitudes(self):
        cfg = ScenarioConfig(irs_elements=16)
        irs = irs_position(cfg, 117)
        g = los_bs_irs(cfg, 117, surface_element_positions(cfg, irs),
                       bs_antenna_positions(cfg))
        assert g.shape == (16, 16)
        amp = pathloss_amplitude(cfg.ref_loss_db,
                                 float(distance_bs_irs(cfg, 117)),
                                 cfg.pathloss_exp_bs_irs)
        assert np.allclose(np.abs(g), amp, rtol=1e-12)

    def test_doppler_unit_modulus_rotation(self):
        cfg = ScenarioConfig(irs_elements=16)
        irs = irs_position(cfg, 50)
        elem = surface_element_positions(cfg, irs)
        ant = bs_antenna_positions(cfg)
        g_off = los_bs_irs(cfg, 50, elem, ant)
        g_on = los_bs_irs(cfg.replace(doppler_enabled=True), 50, elem, ant)
        rot = g_on / g_off
        assert np.allclose(np.abs(rot), 1.0, rtol=1e-12)
        # train moves along +y toward the midpoint: phases actually rotate
        assert np.max(np.abs(np.angle(rot))) > 1e-3

    def test_surface_user_magnitude_and_form(self):
        cfg = ScenarioConfig(irs_elements=16)
        irs = irs_position(cfg, 117)
        elem = surface_element_positions(cfg, irs)
        user = irs - np.array([2.0, 1.0, 0.3])
        d = float(np.linalg.norm(user - irs))
        row = los_surface_user(cfg, elem, user, d)
        amp = pathloss_amplitude(cfg.ref_loss_db, d, cfg.pathloss_exp_irs_user)
        assert row.shape == (16,)
        assert np.allclose(np.abs(row), amp, rtol=1e-12)
        assert row[0] == pytest.approx(amp + 0.0j)  # reference element

    def test_direct_row_penetration(self):
        cfg = ScenarioConfig()
        ant = bs_antenna_positions(cfg)
        user = np.array([-2.0, 0.0, 1.2])
        d = float(np.linalg.norm(user - np.asarray(cfg.bs_position)))
        row = los_bs_user(cfg, ant, user, d)
        amp = pathloss_amplitude(cfg.ref_loss_db, d, cfg.pathloss_exp_bs_irs)
        expect = amp * 10 ** (-cfg.penetration_loss_db / 20.0)
        assert np.allclose(np.abs(row), expect, rtol=1e-12)


class TestSynthesizeFrame:
    def test_shapes_and_metadata(self):
        cfg = ScenarioConfig()
        ch = synthesize_frame(cfg, 117, RngStream(1, 0))
        assert ch.g.shape == (64, 16)
        assert ch.v.shape == (4, 64)
        assert ch.direct.shape == (4, 16)
        assert ch.frame == 117
        assert ch.noise_w == cfg.noise_w
        assert ch.user_positions.shape == (4, 3)
        assert ch.d_bs_irs == pytest.approx(float(distance_bs_irs(cfg, 117)))
        assert np.allclose(ch.d_irs_user,
                           np.linalg.norm(ch.user_positions - ch.irs_pos, axis=1))

    def test_reproducible(self):
        cfg = ScenarioConfig(irs_elements=16)
        a = synthesize_frame(cfg, 10, RngStream(3, 7))
        b = synthesize_frame(cfg, 10, RngStream(3, 7))
        assert np.array_equal(a.g, b.g)
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.direct, b.direct)
        c = synthesize_frame(cfg, 10, RngStream(3, 8))
        assert not np.array_equal(a.g, c.g)

    def test_pure_los_limit_matches_deterministic_links(self):
        cfg = ScenarioConfig(irs_elements=16, rician_k_db=200.0)
        ch = synthesize_frame(cfg, 117, RngStream(4, 0))
        elem = surface_element_positions(cfg, ch.irs_pos)
        expect_g = los_bs_irs(cfg, 117, elem, bs_antenna_positions(cfg))
        assert np.allclose(ch.g, expect_g, rtol=1e-4, atol=1e-12)
        for i in range(cfg.users_per_cluster):
            expect_v = los_surface_user(cfg, elem, ch.user_positions[i],
                                        float(ch.d_irs_user[i]))
            assert np.allclose(ch.v[i], expect_v, rtol=1e-4, atol=1e-18)

    def test_mean_link_power_tracks_pathloss(self):
        # with distance-scaled scattering, E|G_ml|^2 equals the pathloss power
        # for every fading factor
        cfg = ScenarioConfig(irs_elements=16, bs_antennas=8, rician_k_db=0.0)
        amp = float(pathloss_amplitude(cfg.ref_loss_db,
                                       float(distance_bs_irs(cfg, 117)),
                                       cfg.pathloss_exp_bs_irs))
        draws = 4000
        acc = {0.0: 0.0, 10.0: 0.0}
        for kdb in acc:
            c = cfg.replace(rician_k_db=kdb)
            total = 0.0
            for t in range(draws):
                ch = synthesize_frame(c, 117, RngStream(1000 + t, 0))
                total += float(np.mean(np.abs(ch.g) ** 2))
            acc[kdb] = total / draws
        for kdb, mean_pow in acc.items():
            assert mean_pow == pytest.approx(amp ** 2, rel=0.03), kdb
        assert acc[0.0] == pytest.approx(acc[10.0], rel=0.03)

    def test_direct_scales_with_penetration(self):
        cfg = ScenarioConfig(irs_elements=16)
        hard = cfg.replace(penetration_loss_db=cfg.penetration_loss_db + 10.0)
        a = synthesize_frame(cfg, 117, RngStream(6, 2))
        b = synthesize_frame(hard, 117, RngStream(6, 2))
        assert np.allclose(b.direct, a.direct * 10 ** -0.5, rtol=1e-12)
        assert np.array_equal(a.g, b.g)     # surface path untouched

    def test_unscaled_mode_keeps_unit_scatter(self):
        cfg = ScenarioConfig(irs_elements=16, rician_k_db=-200.0,
                             nlos_pathloss_scaled=False)
        ch = synthesize_frame(cfg, 117, RngStream(7, 0))
        # scatter-only link with unit variance: mean power near one
        assert np.mean(np.abs(ch.g) ** 2) == pytest.approx(1.0, rel=0.2)


class TestDumpChannel:
    def test_layout(self):
        cfg = ScenarioConfig(irs_elements=4, bs_antennas=2,
                             users_per_cluster=2, total_users=92 * 2)
        ch = synthesize_frame(cfg, 9, RngStream(2, 0))
        text = dump_channel(ch)
        lines = text.strip().split("\n")
        assert lines[0] == "frame,link,row,col,re,im"
        m, l, n = 4, 2, 2
        assert len(lines) == 1 + m * l + n * m + n * l
        links = [ln.split(",")[1] for ln in lines[1:]]
        assert links[:m * l] == ["g"] * (m * l)
        assert set(links) == {"g", "v1", "v2", "d1", "d2"}

    def test_values_round_trip_exactly(self):
        cfg = ScenarioConfig(irs_elements=4, bs_antennas=2,
                             users_per_cluster=2, total_users=92 * 2)
        ch = synthesize_frame(cfg, 9, RngStream(2, 0))
        for line in dump_channel(ch).strip().split("\n")[1:]:
            frame, link, row, col, re, im = line.split(",")
            assert int(frame) == 9
            r, c = int(row), int(col)
            if link == "g":
                z = ch.g[r, c]
            elif link.startswith("v"):
                z = ch.v[int(link[1:]) - 1][r]
                assert c == 0
            else:
                z = ch.direct[int(link[1:]) - 1][r]
                assert c == 0
            assert float(re) == z.real and float(im) == z.imag
