"""How many edge devices to use.

Decision rules built on the completion-time bounds, the high-accuracy and
large-dataset conditions, and an exhaustive Monte-Carlo search over K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import PhaseOutages, RadioConfig, outage_local_update_noma, phase_outages
from .completion import SystemConfig, avg_completion_mc, child_seed, completion_bounds, respace
from .errors import DomainError

DECREASES = "Decreases"
INCREASES = "Increases"
INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class AdditionVerdict:
    verdict: str
    margin_s: float
    divergent: bool = False


def addition_verdict(cfg: SystemConfig) -> AdditionVerdict:
    """Effect of adding one device, decided from the bounds at K and K + 1.

    Decreases when upper(K+1) <= lower(K); Increases when
    lower(K+1) >= upper(K); Indeterminate otherwise. ``margin_s`` is the
    deciding difference, or for Indeterminate the smaller of the two
    violations (signed as in its test).
    """
    lower_k, upper_k = completion_bounds(cfg)
    lower_next, upper_next = completion_bounds(respace(cfg, cfg.k_devices + 1))
    if not all(math.isfinite(x) for x in (lower_k, upper_k, lower_next, upper_next)):
        return AdditionVerdict(INDETERMINATE, math.nan, divergent=True)
    dec = upper_next - lower_k
    inc = lower_next - upper_k
    if dec <= 0:
        return AdditionVerdict(DECREASES, dec)
    if inc >= 0:
        return AdditionVerdict(INCREASES, inc)
    return AdditionVerdict(INDETERMINATE, dec if dec < -inc else inc)


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def high_accuracy_condition(K: int, eta_max: float, eta_min: float, rho_max: float,
                            rho_min: float, radio: RadioConfig, c: float, n_total: int,
                            eps_local: float, variant: str = "statement"):
    """Sufficient condition (as eps_G -> 0) for one more device to increase the time.

    Returns ``(holds, lhs, rhs)`` with lhs the per-iteration communication
    increase and rhs = c N / (eps_l K (K+1)) the computation saving.

    ``variant="statement"`` uses exp((1/eta)(2^{..} - 1)) in the two upload
    terms; ``variant="proof"`` uses exp((1/(K eta))(2^{..} - 1)), which is
    what substituting the worst/best upload outages actually produces.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    for v in (eta_max, eta_min, rho_max, rho_min):
        if not v > 0:
            raise DomainError("mean SNRs must be positive")
    if variant not in ("statement", "proof"):
        raise DomainError(f"unknown variant {variant!r}")
    up, mul = radio.rate_up / radio.bandwidth_hz, radio.rate_mul / radio.bandwidth_hz
    scale = K if variant == "proof" else 1
    mul_threshold = 2.0 ** mul - 1.0
    lhs = (_exp((2.0 ** ((K + 1) * up) - 1.0) / (scale * eta_max))
           + _exp((K + 1) / rho_max * mul_threshold)
           - K * _exp((2.0 ** (K * up) - 1.0) / (scale * eta_min))
           - _exp(K / rho_min * mul_threshold))
    rhs = c * n_total / (eps_local * K * (K + 1))
    return bool(lhs >= rhs), lhs, rhs


def _planner_c(cfg: SystemConfig) -> float:
    # the large-data analysis assumes c_k = c; the bottom of the configured range
    return min(cfg.compute_consts)


def stationarity_residual(K: float, cfg: SystemConfig) -> float:
    """Derivative in K of the large-dataset upper bound (uniform n_k, c_k = c).

    A sign change brackets the real-relaxed minimiser.
    """
    if not K > 0:
        raise DomainError("K must be positive")
    w, n, c = cfg.slot_seconds, cfg.n_total, _planner_c(cfg)
    el, eg, lam = cfg.eps_local, cfg.eps_gap, cfg.lambda_reg
    r, b, rho = cfg.radio.rate_dist, cfg.radio.bandwidth_hz, cfg.rho_min
    growth = 2.0 ** (K * r / b)
    dist = w * n * (r * math.log(2) / (b * rho)) * growth * _exp((growth - 1.0) / rho)
    iters = (w * c * n / ((1.0 - el) * el * lam)) / K ** 2 * math.log((lam * K + 1.0) / ((1.0 - el) * eg * lam))
    return dist - iters + (w * c * n / ((1.0 - el) * el)) / K


def q_of_k(K: int, cfg: SystemConfig) -> float:
    """Threshold Q(K) of the large-dataset necessary condition 1/rho_min >= Q(K).

    Returns -inf when the logarithm's argument is non-positive (the
    condition then holds trivially).
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    c, el, eg, lam = _planner_c(cfg), cfg.eps_local, cfg.eps_gap, cfg.lambda_reg
    r, b = cfg.radio.rate_dist, cfg.radio.bandwidth_hz
    shrink = 2.0 ** (-K * r / b)
    bracket = math.log((lam * K + 1.0) / (lam * (1.0 - el) * eg)) / (lam * K) - 1.0
    arg = c * b / (el * (1.0 - el) * r * math.log(2)) * shrink / K * bracket
    if arg <= 0:
        return -math.inf
    return shrink * math.log(arg)


def necessary_condition_holds(K: int, rho_min: float, cfg: SystemConfig) -> bool:
    if not rho_min > 0:
        raise DomainError("rho_min must be positive")
    return 1.0 / rho_min >= q_of_k(K, cfg)


def stationary_point(cfg: SystemConfig, k_lo: float = 0.5, k_hi: float = 64.0,
                     grid: int = 400, tol: float = 1e-6) -> list:
    """Roots of :func:`stationarity_residual` on [k_lo, k_hi].

    Sign changes are located on a log-spaced grid and refined by bisection.
    """
    ks = np.geomspace(k_lo, k_hi, grid)
    vals = [stationarity_residual(float(k), cfg) for k in ks]
    roots = []
    for a, b, fa, fb in zip(ks[:-1], ks[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(float(a))
        elif np.sign(fa) != np.sign(fb):
            lo, hi, flo = float(a), float(b), fa
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fm = stationarity_residual(mid, cfg)
                if np.sign(fm) == np.sign(flo):
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
    return roots


def k_seed(seed: int, k: int) -> np.random.SeedSequence:
    """Per-K seed, independent of the order in which K values are evaluated."""
    return np.random.SeedSequence(seed, spawn_key=(k,))


def noma_outages(cfg: SystemConfig, trials: int, seed) -> PhaseOutages:
    """Phase outages with the upload phase replaced by NOMA with SIC."""
    p_up = outage_local_update_noma(cfg.snr, cfg.radio, trials, child_seed(seed, 7))
    return phase_outages(cfg.snr, cfg.radio, p_up=tuple(p_up))


def optimal_k_search(cfg_template: SystemConfig, k_max: int, trials: int, seed: int,
                     access: str = "oma", noma_trials: int = 100_000):
    """Exhaustive search of the K in 1..k_max with the smallest mean completion time.

    Every K uses a uniform partition and profiles re-spaced over the
    template's ranges. Ties go to the smallest K. Returns
    ``(k_star, rows)`` with rows ``(K, mean_s, lower_s, upper_s)``.
    """
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    if access not in ("oma", "noma"):
        raise DomainError(f"unknown access scheme {access!r}")
    rows = []
    for k in range(1, k_max + 1):
        cfg = respace(cfg_template, k)
        ss = k_seed(seed, k)
        outages = noma_outages(cfg, noma_trials, ss) if access == "noma" else None
        est = avg_completion_mc(cfg, trials, ss, outages=outages)
        rows.append((k, est.mean_s, est.lower_bound_s, est.upper_bound_s))
    means = np.array([r[1] for r in rows])
    if not np.any(np.isfinite(means)):
        raise DomainError("every K in the search range is in certain outage")
    k_star = int(np.argmin(means)) + 1
    return k_star, rows
