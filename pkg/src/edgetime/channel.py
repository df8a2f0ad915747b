"""Link outage model for the three communication phases under Rayleigh fading.

Instantaneous received SNRs are exponential with per-device means. All SNR
arguments here are linear; dB values are converted once when a profile is
built (:meth:`SnrProfile.from_db`).

Phases:

* data distribution (PS -> device k, unicast, bandwidth B/K, power P/K)
* local update delivery (device k -> PS, OMA with bandwidth B/K, or NOMA
  over the full band with SIC at the PS)
* global model delivery (PS -> all, multicast at the worst receiver's rate)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

WORST = "worst"
BEST = "best"


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def _check_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")


def _check_devices(k_devices):
    if int(k_devices) != k_devices or k_devices < 1:
        raise DomainError(f"number of devices must be a positive integer, got {k_devices!r}")


def _outage(exponent):
    # 1 - exp(-x) without cancellation; saturates to exactly 1.0 (certain outage)
    return float(-math.expm1(-exponent))


@dataclass(frozen=True)
class SnrProfile:
    """Per-device mean received SNRs (linear scale).

    ``rho_bar[k]`` is the mean SNR at device k for PS transmissions and
    ``eta_bar[k]`` the mean SNR at the PS for device k's transmissions.
    """

    rho_bar: tuple
    eta_bar: tuple

    def __post_init__(self):
        rho = tuple(float(x) for x in np.atleast_1d(self.rho_bar))
        eta = tuple(float(x) for x in np.atleast_1d(self.eta_bar))
        if len(rho) == 0 or len(rho) != len(eta):
            raise DomainError("rho_bar and eta_bar must be non-empty and of equal length")
        for x in rho + eta:
            _check_positive("mean SNR", x)
        object.__setattr__(self, "rho_bar", rho)
        object.__setattr__(self, "eta_bar", eta)

    @property
    def k_devices(self) -> int:
        return len(self.rho_bar)

    @classmethod
    def from_db(cls, rho_db, eta_db) -> "SnrProfile":
        return cls(tuple(db_to_linear(rho_db)), tuple(db_to_linear(eta_db)))

    @classmethod
    def spaced(cls, k_devices: int, rho_db_range, eta_db_range) -> "SnrProfile":
        """Means equally spaced in dB over the given closed intervals."""
        _check_devices(k_devices)
        rho_db = np.linspace(rho_db_range[0], rho_db_range[1], k_devices)
        eta_db = np.linspace(eta_db_range[0], eta_db_range[1], k_devices)
        return cls.from_db(rho_db, eta_db)


@dataclass(frozen=True)
class RadioConfig:
    """Total bandwidth (Hz) and the fixed per-phase transmission rates (bit/s)."""

    bandwidth_hz: float = 20e6
    rate_dist: float = 5e6
    rate_up: float = 5e6
    rate_mul: float = 5e6

    def __post_init__(self):
        for name in ("bandwidth_hz", "rate_dist", "rate_up", "rate_mul"):
            _check_positive(name, getattr(self, name))


@dataclass(frozen=True)
class PhaseOutages:
    """Outage probabilities of every link in one system configuration.

    An entry equal to 1.0 is the certain-outage sentinel: the matching
    expected transmission count is +inf.
    """

    p_dist: tuple
    p_up: tuple
    p_mul: float

    def __post_init__(self):
        p_dist = tuple(float(p) for p in self.p_dist)
        p_up = tuple(float(p) for p in self.p_up)
        for p in p_dist + p_up + (float(self.p_mul),):
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"outage probability out of range: {p!r}")
        object.__setattr__(self, "p_dist", p_dist)
        object.__setattr__(self, "p_up", p_up)
        object.__setattr__(self, "p_mul", float(self.p_mul))

    @property
    def certain_outage(self) -> bool:
        return max(self.p_dist + self.p_up + (self.p_mul,)) >= 1.0


def outage_data_dist(rho_bar_k, k_devices, radio: RadioConfig, alloc: float = 1.0) -> float:
    """Outage of the PS -> device k unicast link during data distribution.

    With uniform bandwidth/power split the received SNR does not depend on
    K, but the spectral efficiency needed on the B/K share grows as K R / B.
    ``alloc`` multiplies the SNR threshold and is the hook for non-uniform
    resource allocation (1 for the uniform split).
    """
    _check_positive("rho_bar_k", rho_bar_k)
    _check_devices(k_devices)
    _check_positive("alloc", alloc)
    threshold = alloc * math.expm1(k_devices * radio.rate_dist / radio.bandwidth_hz * math.log(2))
    return _outage(threshold / rho_bar_k)


def outage_local_update_oma(eta_bar_k, k_devices, radio: RadioConfig, alloc: float = 1.0) -> float:
    """Outage of device k's upload on its B/K orthogonal share.

    Device power is not split, so the SNR on the narrower band is K times
    larger: P[(B/K) log2(1 + K eta_k) < R_up].
    """
    _check_positive("eta_bar_k", eta_bar_k)
    _check_devices(k_devices)
    _check_positive("alloc", alloc)
    threshold = alloc * math.expm1(k_devices * radio.rate_up / radio.bandwidth_hz * math.log(2))
    return _outage(threshold / (k_devices * eta_bar_k))


def outage_multicast(snr: SnrProfile, radio: RadioConfig) -> float:
    """Outage of the full-band multicast, limited by the weakest receiver.

    The minimum of independent exponentials is exponential with the summed
    rates, so the outage is 1 - exp(-(2^{R/B} - 1) sum_k 1/rho_bar_k).
    """
    if snr.k_devices < 1:
        raise DomainError("empty SNR profile")
    threshold = math.expm1(radio.rate_mul / radio.bandwidth_hz * math.log(2))
    return _outage(threshold * sum(1.0 / r for r in snr.rho_bar))


def outage_worstbest_multicast(extreme_snr, k_devices, radio: RadioConfig, which: str = WORST) -> float:
    """Multicast outage when all K receivers share one extreme mean SNR.

    ``which`` only documents intent: pass the minimum mean SNR for the worst
    case, the maximum for the best case. Both evaluate
    1 - exp(-(K / snr)(2^{R/B} - 1)).
    """
    if which not in (WORST, BEST):
        raise DomainError(f"which must be 'worst' or 'best', got {which!r}")
    _check_positive("extreme_snr", extreme_snr)
    _check_devices(k_devices)
    threshold = math.expm1(radio.rate_mul / radio.bandwidth_hz * math.log(2))
    return _outage(k_devices * threshold / extreme_snr)


def outage_local_update_noma(snr: SnrProfile, radio: RadioConfig, trials: int, seed: int,
                             chunk: int = 200_000) -> np.ndarray:
    """Monte-Carlo per-device upload outage under NOMA with SIC.

    Every trial draws independent exponential SNRs, decodes in descending
    order of instantaneous SNR and treats the not-yet-decoded (weaker)
    devices as interference. Outage frequencies are accumulated per device
    identity, not per decoding rank.
    """
    if int(trials) != trials or trials < 1:
        raise DomainError(f"trials must be a positive integer, got {trials!r}")
    eta = np.asarray(snr.eta_bar)
    k = eta.size
    threshold = math.expm1(radio.rate_up / radio.bandwidth_hz * math.log(2))
    rng = np.random.default_rng(seed)
    failures = np.zeros(k, dtype=np.int64)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        draws = rng.exponential(eta, size=(n, k))
        order = np.argsort(-draws, axis=1, kind="stable")
        ranked = np.take_along_axis(draws, order, axis=1)
        # interference seen by rank i: sum of ranks i+1..K-1
        tail = np.cumsum(ranked[:, ::-1], axis=1)[:, ::-1]
        interference = tail - ranked
        sinr = ranked / (interference + 1.0)
        fail = sinr < threshold
        np.add.at(failures, order[fail], 1)
        done += n
    return failures / float(trials)


def phase_outages(snr: SnrProfile, radio: RadioConfig, p_up=None) -> PhaseOutages:
    """Closed-form OMA outages for every link; ``p_up`` overrides the upload phase."""
    k = snr.k_devices
    p_dist = tuple(outage_data_dist(r, k, radio) for r in snr.rho_bar)
    if p_up is None:
        p_up = tuple(outage_local_update_oma(e, k, radio) for e in snr.eta_bar)
    elif len(p_up) != k:
        raise DomainError("p_up must have one entry per device")
    return PhaseOutages(p_dist, tuple(p_up), outage_multicast(snr, radio))
