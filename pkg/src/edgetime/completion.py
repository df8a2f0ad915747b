"""Completion time of parameter-server training over K wireless edge devices.

One run consists of a data-distribution phase followed by M_K global
iterations, each made of local computation, upload of the local updates
and a multicast of the new global model. Every phase waits for the slowest
device.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .channel import (
    BEST,
    WORST,
    PhaseOutages,
    RadioConfig,
    SnrProfile,
    outage_data_dist,
    outage_local_update_oma,
    outage_worstbest_multicast,
    phase_outages,
)
from .errors import DegenerateModelWarning, DivergenceError, DomainError
from .retransmission import (
    expected_max_tx_iid,
    expected_max_weighted_tx_mc,
    max_geometric_pmf,
    sample_sum_geometric,
    sample_sum_of_max,
)

SINGLE_COUNT_DIST = "single_count"
PER_EXAMPLE_DIST = "per_example"


def uniform_partition_sizes(n_total: int, k_devices: int) -> tuple:
    """Block sizes ceil(N/K) for the first N mod K blocks, floor(N/K) after."""
    base, extra = divmod(n_total, k_devices)
    return tuple(base + 1 if k < extra else base for k in range(k_devices))


def spaced_compute_consts(k_devices: int, c_range=(1e-10, 1e-9), spacing: str = "log") -> tuple:
    """K compute constants equally spaced over ``c_range`` (log or linear scale).

    Log spacing falls back to linear when the range starts at zero.
    """
    lo, hi = c_range
    if lo < 0 or hi < lo:
        raise DomainError("need 0 <= c_min <= c_max")
    if spacing == "log" and lo > 0:
        return tuple(np.geomspace(lo, hi, k_devices))
    if spacing in ("log", "linear"):
        return tuple(np.linspace(lo, hi, k_devices))
    raise DomainError(f"unknown spacing {spacing!r}")


@dataclass(frozen=True)
class SystemConfig:
    """All scalar and per-device parameters of the timing model.

    ``sigma_product`` is sigma' * sigma_max from the convergence analysis;
    ``None`` selects the large-data default N / K.
    """

    n_total: int
    k_devices: int
    radio: RadioConfig
    snr: SnrProfile
    compute_consts: tuple
    partition_sizes: tuple
    slot_seconds: float = 1e-3
    eps_local: float = 1e-3
    eps_gap: float = 1e-3
    lambda_reg: float = 0.01
    mu_smooth: float = 1.0
    zeta_convex: float = 1.0
    sigma_product: float | None = None
    dist_mode: str = SINGLE_COUNT_DIST

    def __post_init__(self):
        k = self.k_devices
        if int(k) != k or k < 1:
            raise DomainError("k_devices must be a positive integer")
        if self.n_total < 1:
            raise DomainError("n_total must be >= 1")
        object.__setattr__(self, "compute_consts", tuple(float(c) for c in self.compute_consts))
        object.__setattr__(self, "partition_sizes", tuple(int(n) for n in self.partition_sizes))
        if not (len(self.compute_consts) == len(self.partition_sizes) == self.snr.k_devices == k):
            raise DomainError("snr, compute_consts and partition_sizes need one entry per device")
        if sum(self.partition_sizes) != self.n_total or min(self.partition_sizes) < 0:
            raise DomainError("partition sizes must be non-negative and sum to n_total")
        if any(c < 0 or not math.isfinite(c) for c in self.compute_consts):
            raise DomainError("compute constants must be finite and non-negative")
        for name in ("eps_local", "eps_gap"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {v!r}")
        for name in ("slot_seconds", "lambda_reg", "mu_smooth", "zeta_convex"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.sigma_product is not None and self.sigma_product < 0:
            raise DomainError("sigma_product must be non-negative")
        if self.dist_mode not in (SINGLE_COUNT_DIST, PER_EXAMPLE_DIST):
            raise DomainError(f"unknown dist_mode {self.dist_mode!r}")

    @classmethod
    def default(cls, k_devices: int, n_total: int = 4600, radio: RadioConfig | None = None,
                rho_db_range=(10.0, 20.0), eta_db_range=(10.0, 20.0),
                c_range=(1e-10, 1e-9), c_spacing: str = "log", **kwargs) -> "SystemConfig":
        """Default experiment environment with K devices and a uniform partition."""
        return cls(
            n_total=n_total,
            k_devices=k_devices,
            radio=radio or RadioConfig(),
            snr=SnrProfile.spaced(k_devices, rho_db_range, eta_db_range),
            compute_consts=spaced_compute_consts(k_devices, c_range, c_spacing),
            partition_sizes=uniform_partition_sizes(n_total, k_devices),
            **kwargs,
        )

    @property
    def sigma_product_value(self) -> float:
        if self.sigma_product is None:
            return self.n_total / self.k_devices
        return self.sigma_product

    @property
    def rho_min(self) -> float:
        return min(self.snr.rho_bar)

    @property
    def rho_max(self) -> float:
        return max(self.snr.rho_bar)

    @property
    def eta_min(self) -> float:
        return min(self.snr.eta_bar)

    @property
    def eta_max(self) -> float:
        return max(self.snr.eta_bar)

    def max_compute_load(self) -> float:
        """max_k c_k n_k, the per-local-iteration time of the slowest device."""
        return max(c * n for c, n in zip(self.compute_consts, self.partition_sizes))


def _db(x: float) -> float:
    return 10.0 * math.log10(x)


def respace(cfg: SystemConfig, k_devices: int, c_spacing: str = "log") -> SystemConfig:
    """Same environment with ``k_devices`` devices.

    Mean SNRs are re-spaced evenly in dB and compute constants re-spaced
    over the template's [min, max] ranges; the partition becomes uniform.
    An explicit ``sigma_product`` is kept as is.
    """
    rho_db = (_db(cfg.rho_min), _db(cfg.rho_max))
    eta_db = (_db(cfg.eta_min), _db(cfg.eta_max))
    c_range = (min(cfg.compute_consts), max(cfg.compute_consts))
    if c_range[0] == 0.0 or c_range[0] == c_range[1]:
        consts = tuple(np.linspace(c_range[0], c_range[1], k_devices))
    else:
        consts = spaced_compute_consts(k_devices, c_range, c_spacing)
    return replace(
        cfg,
        k_devices=k_devices,
        snr=SnrProfile.spaced(k_devices, rho_db, eta_db),
        compute_consts=consts,
        partition_sizes=uniform_partition_sizes(cfg.n_total, k_devices),
    )


def iteration_budget(k_devices: int, n_total: float, eps_local: float, eps_gap: float,
                     lambda_reg: float, mu_smooth: float = 1.0, zeta_convex: float = 1.0,
                     sigma_product: float | None = None) -> int:
    """Global-iteration budget M_K that guarantees duality gap <= eps_gap.

    M_K = ceil( K/(1-eps_l) * (mu zeta lam N + s)/(mu zeta lam N)
                * ln( (mu zeta lam N + s)/((1-eps_l) mu zeta lam N) * K/eps_gap ) )

    with s = sigma' sigma_max (default N/K). A non-positive value (log
    argument <= 1) is clamped to 1 with a :class:`DegenerateModelWarning`.
    """
    if not 0.0 <= eps_local < 1.0 or not 0.0 < eps_gap:
        raise DomainError("need 0 <= eps_local < 1 and eps_gap > 0")
    s = n_total / k_devices if sigma_product is None else sigma_product
    base = mu_smooth * zeta_convex * lambda_reg * n_total
    ratio = (base + s) / base
    value = k_devices / (1.0 - eps_local) * ratio * math.log(
        ratio / (1.0 - eps_local) * k_devices / eps_gap)
    # absorb round-off such as ln(e) = 1.0000000000000002 before the ceiling
    m = math.ceil(value - 1e-9 * abs(value))
    if m < 1:
        warnings.warn(f"iteration budget {value:.3g} <= 0; clamped to 1", DegenerateModelWarning)
        return 1
    return int(m)


def global_iterations(cfg: SystemConfig) -> int:
    """:func:`iteration_budget` for a system configuration."""
    return iteration_budget(cfg.k_devices, cfg.n_total, cfg.eps_local, cfg.eps_gap,
                            cfg.lambda_reg, cfg.mu_smooth, cfg.zeta_convex, cfg.sigma_product)


def local_compute_time(c_k: float, n_k: int, eps_local: float) -> float:
    """Time for one local solve to eps_l accuracy: c_k n_k / eps_l."""
    if eps_local <= 0:
        raise DivergenceError("eps_local = 0 needs infinitely many local iterations")
    if c_k < 0 or n_k < 0:
        raise DomainError("c_k and n_k must be non-negative")
    return c_k * n_k / eps_local


def centralized_time(c: float, n_total: int, eps_gap: float) -> float:
    """Completion time of a single central solver, c N / eps_G."""
    if eps_gap <= 0:
        raise DivergenceError("eps_gap = 0 needs infinitely many iterations")
    if c < 0 or n_total < 0:
        raise DomainError("c and n_total must be non-negative")
    return c * n_total / eps_gap


@dataclass(frozen=True)
class CompletionEstimate:
    mean_s: float
    stderr_s: float
    trials: int
    lower_bound_s: float
    upper_bound_s: float
    iterations_m_k: int
    certain_outage: bool = False


def _expected_max(p: float, k: int) -> float:
    return math.inf if p >= 1.0 else expected_max_tx_iid(p, k)


def _expected_single(p: float) -> float:
    return math.inf if p >= 1.0 else 1.0 / (1.0 - p)


def bound_outages(cfg: SystemConfig) -> dict:
    """Worst-case (``max``) and best-case (``min``) outages used by the bounds."""
    k, radio = cfg.k_devices, cfg.radio
    return {
        "max": (
            outage_data_dist(cfg.rho_min, k, radio),
            outage_local_update_oma(cfg.eta_min, k, radio),
            outage_worstbest_multicast(cfg.rho_min, k, radio, WORST),
        ),
        "min": (
            outage_data_dist(cfg.rho_max, k, radio),
            outage_local_update_oma(cfg.eta_max, k, radio),
            outage_worstbest_multicast(cfg.rho_max, k, radio, BEST),
        ),
    }


def _bound_value(cfg: SystemConfig, p_dist: float, p_up: float, p_mul: float, m_k: int) -> float:
    k, w = cfg.k_devices, cfg.slot_seconds
    dist = w * max(cfg.partition_sizes) * _expected_max(p_dist, k)
    local = m_k * cfg.max_compute_load() / cfg.eps_local
    up = w * m_k * _expected_max(p_up, k)
    mul = w * m_k * _expected_single(p_mul)
    return dist + local + up + mul


def completion_bounds(cfg: SystemConfig) -> tuple[float, float]:
    """Lower and upper bounds on the average completion time.

    Both treat all devices as sharing one outage probability per phase: the
    best device's for the lower bound and the worst device's for the upper
    bound. The upper bound is +inf when the worst link is in certain outage.
    """
    m_k = global_iterations(cfg)
    outs = bound_outages(cfg)
    return _bound_value(cfg, *outs["min"], m_k), _bound_value(cfg, *outs["max"], m_k)


def expected_completion_closed(cfg: SystemConfig, outages: PhaseOutages | None = None,
                               trials: int = 200_000, seed: int = 0) -> float:
    """Linearity-of-expectation assembly of the mean completion time.

    The expectation of the per-phase maxima over non-identical devices has
    no closed form; the data-distribution term is estimated by Monte Carlo
    and the upload maximum is evaluated exactly from its CDF.
    """
    outages = outages or phase_outages(cfg.snr, cfg.radio)
    if outages.certain_outage:
        return math.inf
    m_k = global_iterations(cfg)
    w = cfg.slot_seconds
    sizes = np.asarray(cfg.partition_sizes, dtype=float)
    active = sizes > 0
    dist_mean, _ = expected_max_weighted_tx_mc(np.asarray(outages.p_dist)[active], sizes[active],
                                               trials, seed)
    pmf = max_geometric_pmf(outages.p_up)
    if pmf is not None:
        up_mean = float(pmf @ np.arange(1, pmf.size + 1))
    else:
        up_mean, _ = expected_max_weighted_tx_mc(outages.p_up, np.ones(cfg.k_devices), trials, seed + 1)
    return (w * dist_mean + m_k * cfg.max_compute_load() / cfg.eps_local
            + w * m_k * up_mean + w * m_k / (1.0 - outages.p_mul))


def child_seed(seed, *key) -> np.random.SeedSequence:
    """Deterministic sub-stream of ``seed`` (an int or a SeedSequence).

    Unlike ``SeedSequence.spawn`` this does not mutate its argument, so the
    same seed always yields the same streams.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key)
    return np.random.SeedSequence(seed, spawn_key=key)


def _phase_rngs(seed):
    return [np.random.default_rng(child_seed(seed, i)) for i in range(3)]


def avg_completion_mc(cfg: SystemConfig, trials: int, seed, outages: PhaseOutages | None = None,
                      chunk: int = 20_000) -> CompletionEstimate:
    """Monte-Carlo estimate of the average completion time.

    Each trial draws the data-distribution time omega * max_k n_k L_k once,
    then M_K independent iterations of
    max_k T_local_k + omega * max_k L_up_k + omega * L_mul.
    Local computation is deterministic, so only the summed transmission
    counts over the M_K iterations are sampled (exactly, via their
    per-iteration distributions).

    Each phase draws from its own child stream of ``seed`` so two runs that
    differ only in one phase's outages share the other phases' samples.
    ``outages`` overrides the closed-form OMA outages (e.g. for NOMA).
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    outages = outages or phase_outages(cfg.snr, cfg.radio)
    m_k = global_iterations(cfg)
    lower, upper = completion_bounds(cfg)
    if outages.certain_outage:
        return CompletionEstimate(math.inf, math.inf, trials, lower, upper, m_k, True)

    rng_dist, rng_up, rng_mul = _phase_rngs(seed)
    w = cfg.slot_seconds
    sizes = np.asarray(cfg.partition_sizes)
    p_dist = np.asarray(outages.p_dist)
    local = m_k * cfg.max_compute_load() / cfg.eps_local

    totals = np.empty(trials)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        if cfg.dist_mode == SINGLE_COUNT_DIST:
            counts = rng_dist.geometric(1.0 - p_dist, size=(n, cfg.k_devices))
            dist = w * np.max(counts * sizes, axis=1)
        else:
            per_device = np.column_stack([
                sample_sum_geometric(float(p), int(nk), n, rng_dist)
                for p, nk in zip(p_dist, sizes)
            ])
            dist = w * per_device.max(axis=1)
        up = sample_sum_of_max(outages.p_up, m_k, n, rng_up)
        mul = sample_sum_geometric(outages.p_mul, m_k, n, rng_mul)
        totals[done:done + n] = dist + local + w * (up + mul)
        done += n

    mean = float(totals.mean())
    # a constant sample has exactly zero spread (np.std can leave round-off)
    spread = trials > 1 and totals.max() > totals.min()
    stderr = float(totals.std(ddof=1) / math.sqrt(trials)) if spread else 0.0
    return CompletionEstimate(mean, stderr, trials, lower, upper, m_k)


def large_data_upper(cfg: SystemConfig) -> float:
    """Large-dataset upper bound omega N / (1 - p_dist_max) + M_K max_k c_k n_k / eps_l.

    Upload and multicast terms are dropped; the order statistic of the
    data-distribution counts is replaced by its union bound.
    """
    p = outage_data_dist(cfg.rho_min, cfg.k_devices, cfg.radio)
    m_k = global_iterations(cfg)
    return (cfg.slot_seconds * cfg.n_total * _expected_single(p)
            + m_k * cfg.max_compute_load() / cfg.eps_local)
