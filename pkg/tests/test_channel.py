import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedmarl import channel


def make_params(**kw):
    defaults = dict(carrier_frequency_hz=5e9, reference_distance_m=1.0,
                    path_loss_exponent=3.0, shadowing_sigma_db=0.0,
                    tx_gain_dbi=3.0, rx_gain_dbi=3.0)
    defaults.update(kw)
    return channel.PathLossParams(**defaults)


class TestFreeSpaceRefLoss:
    def test_5ghz_reference(self):
        # hand evaluation: lambda = c/5e9 = 0.0599585 m, 20*log10(4*pi/lambda)
        assert channel.free_space_ref_loss(make_params()) == pytest.approx(
            46.4272, abs=5e-3)

    def test_wavelength_four_pi_gives_zero(self):
        f = channel.SPEED_OF_LIGHT_MPS / (4.0 * math.pi)
        p = make_params(carrier_frequency_hz=f)
        assert channel.free_space_ref_loss(p) == pytest.approx(0.0, abs=1e-9)

    def test_half_frequency_subtracts_6db(self):
        hi = channel.free_space_ref_loss(make_params())
        lo = channel.free_space_ref_loss(make_params(carrier_frequency_hz=2.5e9))
        assert lo == pytest.approx(40.4066, abs=5e-3)
        assert hi - lo == pytest.approx(20.0 * math.log10(2.0), abs=1e-9)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            make_params(carrier_frequency_hz=0.0)
        with pytest.raises(ValueError):
            make_params(path_loss_exponent=0.5)
        with pytest.raises(ValueError):
            make_params(shadowing_sigma_db=-1.0)


class TestPathLoss:
    def test_10m_hand_oracle(self):
        # 46.4272 + 10*3*log10(10) - 3 - 3 = 70.4272
        assert channel.path_loss(make_params(), 10.0, 0.0) == pytest.approx(
            70.4272, abs=5e-3)

    def test_reference_distance_equals_ref_loss(self):
        p = make_params(tx_gain_dbi=0.0, rx_gain_dbi=0.0)
        assert channel.path_loss(p, 1.0, 0.0) == pytest.approx(
            channel.free_space_ref_loss(p), abs=1e-12)

    def test_shadowing_is_additive(self):
        base = channel.path_loss(make_params(), 10.0, 0.0)
        assert channel.path_loss(make_params(), 10.0, 5.0) == pytest.approx(
            base + 5.0, abs=1e-12)

    def test_below_reference_distance_rejected(self):
        with pytest.raises(ValueError):
            channel.path_loss(make_params(), 0.5, 0.0)

    @given(st.floats(min_value=1.0, max_value=1e4),
           st.floats(min_value=1.0, max_value=1e4))
    @settings(max_examples=50, deadline=None)
    def test_strictly_increasing_in_distance(self, d1, d2):
        if d1 == d2:
            return
        lo, hi = sorted((d1, d2))
        p = make_params()
        assert channel.path_loss(p, lo, 0.0) < channel.path_loss(p, hi, 0.0)


class TestSnr:
    radio = channel.RadioParams(tx_power_dbm=20.0, bandwidth_hz=80e6)

    def test_pipeline_hand_oracle(self):
        # received: 10^((20 - 70.4272 - 30)/10) W; noise: 10^(-20.4) * 80e6 W
        got = channel.snr(self.radio, 70.4272)
        assert got == pytest.approx(2.8457e4, rel=1e-2)
        assert 10.0 * math.log10(got) == pytest.approx(44.54, abs=0.05)

    def test_equal_powers_give_unity(self):
        noise_dbm = self.radio.noise_psd_dbm_hz + 10.0 * math.log10(
            self.radio.bandwidth_hz)
        pl = self.radio.tx_power_dbm - noise_dbm
        assert channel.snr(self.radio, pl) == pytest.approx(1.0, rel=1e-12)

    def test_ten_db_more_loss_is_ten_times_less_snr(self):
        assert channel.snr(self.radio, 80.4272) == pytest.approx(
            channel.snr(self.radio, 70.4272) * 0.1, rel=1e-12)

    def test_decreasing_in_distance(self):
        p = make_params()
        snrs = [channel.snr(self.radio, channel.path_loss(p, d, 0.0))
                for d in (1.0, 2.0, 5.0, 10.0, 50.0)]
        assert all(a > b for a, b in zip(snrs, snrs[1:]))


class TestShannonRate:
    def test_pipeline_value(self):
        assert channel.shannon_rate(80e6, 2.8457e4) == pytest.approx(
            1.1837e9, rel=1e-3)

    def test_zero_snr_zero_rate(self):
        assert channel.shannon_rate(80e6, 0.0) == 0.0

    def test_unit_case(self):
        assert channel.shannon_rate(1.0, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_negative_snr_rejected(self):
        with pytest.raises(ValueError):
            channel.shannon_rate(1.0, -0.1)

    @given(st.floats(min_value=0.0, max_value=1e6),
           st.floats(min_value=1e-3, max_value=1e6))
    @settings(max_examples=50, deadline=None)
    def test_increasing_in_snr_linear_in_bandwidth(self, s, delta):
        r1 = channel.shannon_rate(80e6, s)
        assert channel.shannon_rate(80e6, s + delta) > r1
        assert channel.shannon_rate(160e6, s) == pytest.approx(2 * r1, rel=1e-12)


class TestChannelMatrix:
    def test_reference_shape(self):
        h = channel.sample_channel_matrix(4, 2, np.random.default_rng(0))
        assert h.shape == (2, 4)
        assert np.iscomplexobj(h)
        assert np.isfinite(h).all()

    def test_single_antenna(self):
        h = channel.sample_channel_matrix(1, 1, np.random.default_rng(0))
        assert h.shape == (1, 1)

    def test_too_many_device_antennas_rejected(self):
        with pytest.raises(ValueError):
            channel.sample_channel_matrix(2, 4, np.random.default_rng(0))
        with pytest.raises(ValueError):
            channel.sample_channel_matrix(2, 0, np.random.default_rng(0))

    def test_unit_variance_monte_carlo(self):
        rng = np.random.default_rng(123)
        power = np.mean([abs(channel.sample_channel_matrix(1, 1, rng)[0, 0]) ** 2
                         for _ in range(10_000)])
        assert power == pytest.approx(1.0, abs=0.05)


class TestMobility:
    def test_step_displacement_is_speed_times_dt(self):
        pos = channel.Position(0.0, 0.0, (0.0, 0.0))
        nxt = channel.mobility_step(pos, 1.0, 0.2, np.random.default_rng(0))
        assert math.hypot(nxt.x - pos.x, nxt.y - pos.y) == pytest.approx(
            0.2, rel=1e-12)

    def test_zero_speed_is_identity(self):
        pos = channel.Position(3.0, 4.0, (0.0, 0.0))
        assert channel.mobility_step(pos, 0.0, 0.2, np.random.default_rng(0)) is pos

    def test_thousand_steps_stay_in_disc(self):
        rng = np.random.default_rng(7)
        pos = channel.Position(0.0, 0.0, (0.0, 0.0), max_radius_m=20.0)
        for _ in range(1000):
            pos = channel.mobility_step(pos, 1.0, 0.2, rng)
            assert pos.anchor_distance() <= 20.0 + 1e-9

    def test_boundary_reflection_keeps_inside(self):
        # park on the rim: nearly every heading exits, forcing the fold
        rng = np.random.default_rng(5)
        pos = channel.Position(2.0, 0.0, (0.0, 0.0), max_radius_m=2.0)
        for _ in range(200):
            pos = channel.mobility_step(pos, 5.0, 0.2, rng)
            assert pos.anchor_distance() <= 2.0 + 1e-9

    def test_same_seed_is_bit_identical(self):
        pos = channel.Position(1.0, 1.0, (0.0, 0.0))
        a = channel.mobility_step(pos, 1.0, 0.2, np.random.default_rng(9))
        b = channel.mobility_step(pos, 1.0, 0.2, np.random.default_rng(9))
        assert (a.x, a.y) == (b.x, b.y)

    def test_position_invariant_enforced(self):
        with pytest.raises(ValueError):
            channel.Position(30.0, 0.0, (0.0, 0.0), max_radius_m=20.0)
