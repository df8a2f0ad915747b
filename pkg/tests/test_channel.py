import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edgetime.channel import (
    BEST,
    WORST,
    PhaseOutages,
    RadioConfig,
    SnrProfile,
    db_to_linear,
    outage_data_dist,
    outage_local_update_noma,
    outage_local_update_oma,
    outage_multicast,
    outage_worstbest_multicast,
    phase_outages,
)
from edgetime.errors import DomainError

RADIO = RadioConfig()  # B = 20 MHz, every rate 5 Mbit/s
T_QUARTER = 2.0 ** 0.25 - 1.0

# 2-D quadrature over the joint exponential density (tests/oracles/freeze_values.py)
NOMA_K2_EQUAL = 0.01878319424665072
NOMA_K2_WEAK_DEV = 0.018746925435132317  # eta = (10, 100), device with eta 10
NOMA_K2_STRONG_DEV = 0.001894392628191352  # eta = (10, 100), device with eta 100


def mc_outage(mean_snr, threshold, n=1_000_000, seed=0):
    draws = np.random.default_rng(seed).exponential(mean_snr, n)
    p = float(np.mean(draws < threshold))
    return p, math.sqrt(p * (1 - p) / n)


def test_db_conversion():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(20.0) == pytest.approx(100.0)


def test_snr_profile_validation():
    with pytest.raises(DomainError):
        SnrProfile((1.0, 2.0), (1.0,))
    with pytest.raises(DomainError):
        SnrProfile((0.0,), (1.0,))
    with pytest.raises(DomainError):
        SnrProfile((math.inf,), (1.0,))
    prof = SnrProfile.spaced(3, (10, 20), (10, 30))
    assert prof.rho_bar == pytest.approx((10.0, 10 ** 1.5, 100.0))
    assert prof.eta_bar[-1] == pytest.approx(1000.0)


def test_radio_validation():
    with pytest.raises(DomainError):
        RadioConfig(bandwidth_hz=0.0)


def test_data_dist_examples():
    assert outage_data_dist(10.0, 4, RADIO) == pytest.approx(-math.expm1(-0.1), rel=1e-12)
    assert outage_data_dist(10.0, 4, RADIO) == pytest.approx(0.09516, abs=1e-5)
    assert outage_data_dist(10.0, 1, RADIO) == pytest.approx(0.01874, abs=1e-5)
    assert outage_data_dist(1e12, 10, RADIO) < 1e-9


@pytest.mark.parametrize("snr,k", [(10.0, 1), (10.0, 4), (3.0, 2)])
def test_data_dist_matches_monte_carlo(snr, k):
    p_mc, se = mc_outage(snr, 2.0 ** (k * 0.25) - 1.0)
    assert abs(outage_data_dist(snr, k, RADIO) - p_mc) <= 3 * se


def test_upload_oma_examples():
    assert outage_local_update_oma(10.0, 4, RADIO) == pytest.approx(0.02469, abs=1e-5)
    assert outage_local_update_oma(10.0, 8, RADIO) == pytest.approx(0.03681, abs=1e-5)
    assert outage_local_update_oma(7.0, 1, RADIO) == pytest.approx(-math.expm1(-T_QUARTER / 7.0))


@pytest.mark.parametrize("snr,k", [(10.0, 4), (10.0, 8)])
def test_upload_oma_matches_monte_carlo(snr, k):
    # SNR on the B/K share is K times larger
    p_mc, se = mc_outage(k * snr, 2.0 ** (k * 0.25) - 1.0, seed=k)
    assert abs(outage_local_update_oma(snr, k, RADIO) - p_mc) <= 3 * se


def test_domain_errors():
    for fn in (outage_data_dist, outage_local_update_oma):
        with pytest.raises(DomainError):
            fn(-1.0, 2, RADIO)
        with pytest.raises(DomainError):
            fn(math.nan, 2, RADIO)
        with pytest.raises(DomainError):
            fn(10.0, 0, RADIO)
    with pytest.raises(DomainError):
        outage_worstbest_multicast(10.0, 0, RADIO)
    with pytest.raises(DomainError):
        outage_worstbest_multicast(0.0, 2, RADIO)
    with pytest.raises(DomainError):
        outage_local_update_noma(SnrProfile((10.0,), (10.0,)), RADIO, 0, 0)


def test_multicast_examples():
    one = SnrProfile((10.0,), (10.0,))
    assert outage_multicast(one, RADIO) == pytest.approx(0.01874, abs=1e-5)
    assert outage_multicast(one, RADIO) == pytest.approx(outage_data_dist(10.0, 1, RADIO))
    two = SnrProfile((10.0, 10.0), (10.0, 10.0))
    assert outage_multicast(two, RADIO) == pytest.approx(0.03714, abs=1e-5)
    assert outage_worstbest_multicast(10.0, 2, RADIO, WORST) == pytest.approx(outage_multicast(two, RADIO))
    assert outage_worstbest_multicast(1e15, 3, RADIO, BEST) < 1e-12


def test_multicast_two_devices_monte_carlo():
    rng = np.random.default_rng(3)
    n = 1_000_000
    worst = np.minimum(rng.exponential(10.0, n), rng.exponential(10.0, n))
    p = float(np.mean(worst < T_QUARTER))
    se = math.sqrt(p * (1 - p) / n)
    assert abs(outage_multicast(SnrProfile((10.0, 10.0), (1.0, 1.0)), RADIO) - p) <= 3 * se


def test_certain_outage_sentinel():
    p = outage_data_dist(1e-300, 64, RADIO)
    assert p == 1.0
    snr = SnrProfile((1e-300,), (10.0,))
    assert phase_outages(snr, RADIO).certain_outage


def test_phase_outages_rejects_bad_values():
    with pytest.raises(DomainError):
        PhaseOutages((1.5,), (0.1,), 0.1)
    with pytest.raises(DomainError):
        phase_outages(SnrProfile((10.0,), (10.0,)), RADIO, p_up=(0.1, 0.2))


@given(st.floats(0.05, 1e4), st.integers(1, 63))
def test_oma_outages_increase_in_k(snr, k):
    assert outage_data_dist(snr, k + 1, RADIO) >= outage_data_dist(snr, k, RADIO)
    assert outage_local_update_oma(snr, k + 1, RADIO) >= outage_local_update_oma(snr, k, RADIO)


@given(st.floats(0.05, 1e3), st.floats(1.01, 10.0), st.integers(1, 16))
def test_outages_decrease_in_snr(snr, factor, k):
    for fn in (outage_data_dist, outage_local_update_oma):
        lo, hi = fn(snr, k, RADIO), fn(snr * factor, k, RADIO)
        assert 0.0 <= hi <= lo < 1.0
    assert (outage_worstbest_multicast(snr * factor, k, RADIO)
            <= outage_worstbest_multicast(snr, k, RADIO))


@given(st.lists(st.floats(0.1, 1e4), min_size=1, max_size=12))
def test_multicast_dominates_every_single_receiver(rhos):
    prof = SnrProfile(tuple(rhos), tuple(rhos))
    p = outage_multicast(prof, RADIO)
    assert p >= max(outage_multicast(SnrProfile((r,), (r,)), RADIO) for r in rhos) - 1e-15


def test_noma_single_device_is_interference_free():
    prof = SnrProfile((10.0,), (10.0,))
    est = outage_local_update_noma(prof, RADIO, 1_000_000, seed=1)
    exact = -math.expm1(-T_QUARTER / 10.0)
    assert abs(est[0] - exact) <= 3 * math.sqrt(exact * (1 - exact) / 1e6)


def test_noma_is_deterministic_per_seed():
    prof = SnrProfile((10.0, 20.0, 30.0), (10.0, 20.0, 30.0))
    a = outage_local_update_noma(prof, RADIO, 50_000, seed=9)
    b = outage_local_update_noma(prof, RADIO, 50_000, seed=9, chunk=7_000)
    np.testing.assert_array_equal(a, outage_local_update_noma(prof, RADIO, 50_000, seed=9))
    assert np.all(np.abs(a - b) < 0.01)


@pytest.mark.parametrize("eta,expected", [
    ((10.0, 10.0), (NOMA_K2_EQUAL, NOMA_K2_EQUAL)),
    ((10.0, 100.0), (NOMA_K2_WEAK_DEV, NOMA_K2_STRONG_DEV)),
])
def test_noma_two_devices_matches_quadrature(eta, expected):
    est = outage_local_update_noma(SnrProfile(eta, eta), RADIO, 1_000_000, seed=4)
    for e, x in zip(est, expected):
        assert abs(e - x) <= 3.5 * math.sqrt(x * (1 - x) / 1e6)


def test_noma_reports_by_device_identity():
    # a much stronger device should see far fewer outages, whatever its position
    est = outage_local_update_noma(SnrProfile((1.0, 1.0), (1000.0, 1.0)), RADIO, 100_000, seed=2)
    assert est[0] < est[1]
    swapped = outage_local_update_noma(SnrProfile((1.0, 1.0), (1.0, 1000.0)), RADIO, 100_000, seed=2)
    assert swapped[1] < swapped[0]
