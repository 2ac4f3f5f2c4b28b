"""Propagation-model tests against hand-derived dB-arithmetic oracles.

The FROZEN_* constants below were computed independently of the library
(plain math.log10 chains, see each comment) and must match to 1e-9 relative.
"""

import math

import numpy as np
import pytest

from oransleep.channel import (
    ChannelParams,
    achievable_rate,
    los_probability,
    path_loss_los,
    path_loss_nlos,
    sample_gain_matrix,
    sample_link,
    snr_from_gain,
    snr_per_prb,
)

REL = 1e-9

# 32.4 + 21*log10(100) + 20*log10(2)
FROZEN_PL_LOS_100M = 80.42059991327963
# 35.3 + 22.4*log10(100) + 21.3*log10(2) - 0.3*(1.7 - 1.5)
FROZEN_PL_NLOS_100M = 86.4519389076428
# 4 * 15 * 1.7 * 2e9 / 3e8
FROZEN_BREAKPOINT_M = 680.0
# 32.4 + 40*log10(700) + 20*log10(2) - 9.5 (beyond the breakpoint)
FROZEN_PL_LOS_700M = 142.7245215138499
# 0.5*(1 - e^-1) + e^-1
FROZEN_P_LOS_36M = 0.6839397205857212
# -174 dBm/Hz + 10*log10(180e3), then dBm -> W
FROZEN_NOISE_PRB_DBM = -121.44727494896694
FROZEN_NOISE_PRB_W = 7.165929069962951e-16
# 30 dBm - 10*log10(100) - 80.4206 dB - noise_dBm  (1 W TX over 100 PRBs)
FROZEN_SNR_DB = 51.026675035687305
FROZEN_SNR_LIN = 126668.17213276483
# 180e3 * log2(1 + FROZEN_SNR_LIN): one PRB already clears the 3 Mbps demand
FROZEN_RATE_1PRB_BPS = 3051127.067128396

DEFAULTS = ChannelParams()


def test_path_loss_los_frozen_oracle():
    assert path_loss_los(100.0, DEFAULTS) == pytest.approx(FROZEN_PL_LOS_100M, rel=REL)


def test_path_loss_los_all_log_terms_vanish():
    p = ChannelParams(carrier_freq_ghz=1.0)
    assert path_loss_los(1.0, p) == pytest.approx(32.4, rel=REL)


def test_breakpoint_distance_frozen():
    assert DEFAULTS.breakpoint_distance_m == pytest.approx(FROZEN_BREAKPOINT_M, rel=REL)


def test_path_loss_los_beyond_breakpoint():
    assert path_loss_los(700.0, DEFAULTS) == pytest.approx(FROZEN_PL_LOS_700M, rel=REL)
    # the steeper branch applies strictly beyond d_BP
    just_inside = path_loss_los(FROZEN_BREAKPOINT_M, DEFAULTS)
    expected_near = 32.4 + 21 * math.log10(680.0) + 20 * math.log10(2.0)
    assert just_inside == pytest.approx(expected_near, rel=REL)


def test_path_loss_nlos_frozen_oracle():
    assert path_loss_nlos(100.0, DEFAULTS) == pytest.approx(FROZEN_PL_NLOS_100M, rel=REL)


def test_path_loss_nlos_all_variable_terms_zero():
    p = ChannelParams(carrier_freq_ghz=1.0, ue_height_m=1.5)
    assert path_loss_nlos(1.0, p) == pytest.approx(35.3, rel=REL)


def test_nlos_exceeds_los_at_200m():
    assert path_loss_nlos(200.0, DEFAULTS) > path_loss_los(200.0, DEFAULTS)


@pytest.mark.parametrize("fn", [path_loss_los, path_loss_nlos])
def test_path_loss_rejects_below_one_meter(fn):
    with pytest.raises(ValueError):
        fn(0.5, DEFAULTS)
    with pytest.raises(ValueError):
        fn(np.array([10.0, 0.99]), DEFAULTS)


def test_path_loss_accepts_arrays():
    d = np.array([10.0, 100.0, 700.0])
    out = path_loss_los(d, DEFAULTS)
    assert out.shape == (3,)
    assert out[1] == pytest.approx(FROZEN_PL_LOS_100M, rel=REL)
    assert out[2] == pytest.approx(FROZEN_PL_LOS_700M, rel=REL)


def test_los_probability_inside_18m_is_one():
    assert los_probability(10.0) == 1.0
    assert los_probability(0.0) == 1.0


def test_los_probability_at_36m_frozen():
    assert los_probability(36.0) == pytest.approx(FROZEN_P_LOS_36M, rel=REL)


def test_los_probability_vanishes_far_out():
    assert los_probability(1e7) < 1e-5


def test_los_probability_bounded_over_random_distances(rng):
    d = rng.uniform(0.0, 5000.0, size=2000)
    p = los_probability(d)
    assert np.all(p >= 0.0) and np.all(p <= 1.0)


def test_sample_link_deterministic_for_fixed_seed():
    a = sample_link(50.0, DEFAULTS, np.random.default_rng(9))
    b = sample_link(50.0, DEFAULTS, np.random.default_rng(9))
    assert a == b


def test_sample_link_zero_sigma_reproduces_pure_branch():
    p = ChannelParams(shadowing_sigma_los_db=0.0, shadowing_sigma_nlos_db=0.0)
    for seed in range(20):
        link = sample_link(120.0, p, np.random.default_rng(seed))
        expected = path_loss_los(120.0, p) if link.is_los else path_loss_nlos(120.0, p)
        assert link.path_loss_db == pytest.approx(expected, rel=REL)
        assert link.gain_linear == pytest.approx(10 ** (-expected / 10), rel=REL)


def test_sample_link_monte_carlo_los_fraction(rng):
    hits = sum(sample_link(36.0, DEFAULTS, rng).is_los for _ in range(100_000))
    assert hits / 100_000 == pytest.approx(FROZEN_P_LOS_36M, abs=0.01)


def test_gain_stays_in_unit_interval_under_shadowing(rng):
    # heavy shadowing at short range would push PL negative without the clamp
    d = rng.uniform(1.0, 3000.0, size=(40, 50))
    g = sample_gain_matrix(d, DEFAULTS, rng)
    assert np.all(g > 0.0) and np.all(g <= 1.0)


def test_gain_matrix_seeded_determinism(rng):
    d = rng.uniform(1.0, 800.0, size=(6, 20))
    g1 = sample_gain_matrix(d, DEFAULTS, np.random.default_rng(4))
    g2 = sample_gain_matrix(d, DEFAULTS, np.random.default_rng(4))
    assert np.array_equal(g1, g2)


def test_gain_matrix_forced_los_with_zero_sigma():
    # all distances under 18 m -> P_LOS = 1, so the LOS branch is certain
    p = ChannelParams(shadowing_sigma_los_db=0.0, shadowing_sigma_nlos_db=0.0)
    d = np.array([[2.0, 5.0], [10.0, 17.0]])
    g = sample_gain_matrix(d, p, np.random.default_rng(0))
    expected = 10 ** (-path_loss_los(d, p) / 10)
    assert np.allclose(g, expected, rtol=REL)


def test_gain_matrix_clamps_distances_to_model_floor():
    p = ChannelParams(shadowing_sigma_los_db=0.0, shadowing_sigma_nlos_db=0.0)
    g_tiny = sample_gain_matrix(np.array([[0.01]]), p, np.random.default_rng(1))
    g_one = sample_gain_matrix(np.array([[1.0]]), p, np.random.default_rng(1))
    assert g_tiny == pytest.approx(g_one, rel=REL)


def test_snr_chain_frozen_oracle():
    gain = 10 ** (-FROZEN_PL_LOS_100M / 10)
    snr = snr_from_gain(gain, p_tx_w=1.0, q_total=100, params=DEFAULTS)
    assert 10 * math.log10(snr) == pytest.approx(FROZEN_SNR_DB, rel=REL)
    assert snr == pytest.approx(FROZEN_SNR_LIN, rel=REL)


def test_noise_per_prb_frozen():
    assert DEFAULTS.noise_per_prb_w == pytest.approx(FROZEN_NOISE_PRB_W, rel=REL)
    as_dbm = 10 * math.log10(DEFAULTS.noise_per_prb_w) + 30.0
    assert as_dbm == pytest.approx(FROZEN_NOISE_PRB_DBM, rel=REL)


def test_snr_per_prb_on_sampled_link():
    p = ChannelParams(shadowing_sigma_los_db=0.0, shadowing_sigma_nlos_db=0.0)
    link = sample_link(10.0, p, np.random.default_rng(0))  # inside 18 m: LOS certain
    got = snr_per_prb(link, 1.0, 100, p)
    assert got == pytest.approx(link.gain_linear / (100 * p.noise_per_prb_w), rel=REL)


def test_snr_rejects_bad_arguments():
    with pytest.raises(ValueError):
        snr_from_gain(0.5, 1.0, 0, DEFAULTS)
    with pytest.raises(ValueError):
        snr_from_gain(0.5, 0.0, 100, DEFAULTS)


def test_snr_vanishes_with_gain():
    assert snr_from_gain(0.0, 1.0, 100, DEFAULTS) == 0.0


def test_rate_zero_prbs_is_zero():
    assert achievable_rate(0, FROZEN_SNR_LIN, DEFAULTS) == 0.0


def test_rate_one_prb_frozen_oracle():
    assert achievable_rate(1, FROZEN_SNR_LIN, DEFAULTS) == pytest.approx(
        FROZEN_RATE_1PRB_BPS, rel=REL
    )


def test_rate_exactly_linear_in_prb_count():
    one = achievable_rate(1, FROZEN_SNR_LIN, DEFAULTS)
    for n in (2, 3, 10, 100):
        assert achievable_rate(n, FROZEN_SNR_LIN, DEFAULTS) == n * one


def test_rate_monotone_in_n_and_snr(rng):
    snrs = np.sort(rng.uniform(0.0, 1e5, size=50))
    rates = achievable_rate(1, snrs, DEFAULTS)
    assert np.all(np.diff(rates) >= 0.0)
    ns = np.arange(0, 20)
    rates_n = achievable_rate(ns, 100.0, DEFAULTS)
    assert np.all(np.diff(rates_n) > 0.0)


def test_per_prb_snr_independent_of_grant_size():
    # splitting P_TX over Q PRBs: the per-PRB ratio never depends on how many
    # PRBs the UE is granted, so rate(n)/n is constant
    one = achievable_rate(1, FROZEN_SNR_LIN, DEFAULTS)
    for n in range(1, 101):
        assert achievable_rate(n, FROZEN_SNR_LIN, DEFAULTS) / n == pytest.approx(one, rel=1e-12)


def test_channel_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(carrier_freq_ghz=0.0)
    with pytest.raises(ValueError):
        ChannelParams(ru_height_m=-1.0)
    with pytest.raises(ValueError):
        ChannelParams(prb_bandwidth_hz=0.0)
    with pytest.raises(ValueError):
        ChannelParams(shadowing_sigma_los_db=-0.1)
