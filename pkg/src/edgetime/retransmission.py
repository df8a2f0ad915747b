"""Transmission counts under retransmit-until-success.

With outage probability p per attempt and i.i.d. channel draws, the number
of attempts L needed for one packet is geometric on {1, 2, ...} with
P[L = l] = p^(l-1) (1 - p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .errors import DivergenceError, DomainError

# Tail cutoff of the CCDF sum and of tabulated max-of-geometric distributions.
TAIL_TOL = 1e-12
# Beyond this many CCDF terms the integral form (Euler-Maclaurin) is used.
_MAX_SUM_TERMS = 2_000_000
_MAX_TABLE = 20_000


def _check_p(p):
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise DomainError(f"outage probability must be in [0, 1], got {p!r}")
    if p >= 1.0:
        raise DivergenceError("outage probability 1: expected transmission count diverges")


@dataclass(frozen=True)
class TxCountModel:
    """Geometric transmission-count distribution for one link."""

    p: float

    def __post_init__(self):
        _check_p(float(self.p))

    @property
    def mean(self) -> float:
        return 1.0 / (1.0 - self.p)


def geometric_pmf(model: TxCountModel, l: int) -> float:
    if l < 1:
        raise DomainError("transmission count starts at 1")
    if model.p == 0.0:
        return 1.0 if l == 1 else 0.0
    return model.p ** (l - 1) * (1.0 - model.p)


def sample_tx_count(model: TxCountModel, uniform_draw: float) -> int:
    """Inverse-CDF sample: the smallest L with 1 - p^L > u."""
    if model.p == 0.0:
        return 1
    # L > log(1-u)/log(p)
    x = math.log1p(-uniform_draw) / math.log(model.p)
    return max(1, math.floor(x) + 1)


def expected_max_tx_iid(p: float, k_devices: int) -> float:
    """E[max of K i.i.d. geometric counts] with per-attempt outage ``p``.

    Evaluated as sum_{L>=0} (1 - (1 - p^L)^K), which equals the alternating
    binomial series but does not cancel catastrophically for large K.
    """
    _check_p(p)
    if k_devices < 1:
        raise DomainError("k_devices must be >= 1")
    if p == 0.0:
        return 1.0
    if k_devices == 1:
        return 1.0 / (1.0 - p)
    log_p = math.log(p)
    # number of terms until K p^L < TAIL_TOL
    n_terms = int(math.ceil(math.log(TAIL_TOL / k_devices) / log_p)) + 2
    if n_terms > _MAX_SUM_TERMS:
        # sum ~ integral + g(0)/2; higher Euler-Maclaurin terms vanish like (ln p)^K
        harmonic = sum(1.0 / q for q in range(1, k_devices + 1))
        return harmonic / -log_p + 0.5
    p_l = np.exp(np.arange(1, n_terms, dtype=float) * log_p)
    terms = -np.expm1(k_devices * np.log1p(-p_l))
    # the L = 0 term is exactly 1; add the small tail terms first
    return 1.0 + float(np.sum(terms[::-1]))


def expected_max_tx_series(p: float, k_devices: int) -> float:
    """Alternating binomial form sum_q C(K,q)(-1)^(q+1)/(1-p^q).

    Loses precision from cancellation once K grows past ~25; kept for
    cross-checking :func:`expected_max_tx_iid`.
    """
    _check_p(p)
    q = np.arange(1, k_devices + 1)
    signs = np.where(q % 2 == 1, 1.0, -1.0)
    return float(np.sum(comb(k_devices, q) * signs / -np.expm1(q * math.log(p)))) if p > 0 else 1.0


def expected_max_tx_bounds(p: float, k_devices: int) -> tuple[float, float]:
    """Jensen lower bound 1/(1-p) and union upper bound K/(1-p) on E[max]."""
    _check_p(p)
    if k_devices < 1:
        raise DomainError("k_devices must be >= 1")
    mean = 1.0 / (1.0 - p)
    return mean, k_devices * mean


def expected_max_weighted_tx_mc(outages, weights, trials: int, seed: int,
                                chunk: int = 100_000) -> tuple[float, float]:
    """Monte-Carlo estimate of E[max_k w_k L_k] for independent geometric L_k.

    Returns ``(mean, stderr)`` with stderr from the unbiased sample variance.
    """
    p = np.asarray(outages, dtype=float)
    w = np.asarray(weights, dtype=float)
    if p.shape != w.shape or p.ndim != 1 or p.size == 0:
        raise DomainError("outages and weights must be equal-length non-empty lists")
    if trials < 1:
        raise DomainError("trials must be >= 1")
    for x in p:
        _check_p(float(x))
    if np.any(w <= 0):
        raise DomainError("weights must be positive")
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        counts = rng.geometric(1.0 - p, size=(n, p.size))
        values = np.max(counts * w, axis=1)
        total += float(values.sum())
        total_sq += float(np.dot(values, values))
        done += n
    mean = total / trials
    if trials < 2:
        return mean, 0.0
    var = max(total_sq - trials * mean * mean, 0.0) / (trials - 1)
    return mean, math.sqrt(var / trials)


# --- sampling helpers used by the completion-time simulator -----------------

def max_geometric_pmf(outages) -> np.ndarray | None:
    """PMF of max_k L_k on {1, 2, ...}, truncated once the tail is < TAIL_TOL.

    The residual tail mass is folded into the last support point. Returns
    ``None`` when the support would exceed the table limit.
    """
    p = np.asarray(outages, dtype=float)
    p_max = float(p.max())
    if p_max == 0.0:
        return np.array([1.0])
    n = int(math.ceil(math.log(TAIL_TOL / p.size) / math.log(p_max))) + 1
    if n > _MAX_TABLE:
        return None
    ell = np.arange(0, n + 1, dtype=float)
    with np.errstate(divide="ignore"):
        cdf = np.exp(np.sum(np.log1p(-(p[None, :] ** ell[:, None])), axis=1))
    pmf = np.diff(cdf)
    pmf[-1] += 1.0 - cdf[-1]
    return np.clip(pmf, 0.0, None) / pmf.sum()


def sample_sum_of_max(outages, n_rounds: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` samples of sum_{i=1..n_rounds} max_k L_{k,i}.

    Rounds are i.i.d.; when the distribution of one round's maximum is
    tabulable the per-round values are drawn as multinomial counts over its
    support, otherwise every geometric count is drawn explicitly.
    """
    p = np.asarray(outages, dtype=float)
    if n_rounds == 0:
        return np.zeros(size)
    pmf = max_geometric_pmf(p)
    if pmf is not None:
        support = np.arange(1, pmf.size + 1, dtype=float)
        if pmf.size == 1:
            return np.full(size, float(n_rounds))
        counts = rng.multinomial(n_rounds, pmf, size=size)
        return counts @ support
    out = np.empty(size)
    for i in range(size):
        draws = rng.geometric(1.0 - p, size=(n_rounds, p.size))
        out[i] = draws.max(axis=1).sum(dtype=float)
    return out


def sample_sum_geometric(p: float, n_rounds, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` samples of a sum of ``n_rounds`` i.i.d. geometric counts."""
    n_rounds = np.asarray(n_rounds)
    if p == 0.0:
        return np.broadcast_to(n_rounds.astype(float), (size,) + n_rounds.shape).copy()
    failures = rng.negative_binomial(np.maximum(n_rounds, 1), 1.0 - p,
                                     size=(size,) + n_rounds.shape)
    return np.where(n_rounds > 0, failures + n_rounds, 0).astype(float)
