"""Experiment configuration, dataset loading and the figure-reproduction sweeps.

Every sweep returns a :class:`Table` (header plus rows) that is written as
CSV with floats at 9 significant digits, so reruns with the same config and
seed are byte-identical.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import PhaseOutages, RadioConfig
from .cocoa import Dataset, LossKit, centralized_baseline, train
from .completion import (
    SystemConfig,
    avg_completion_mc,
    centralized_time,
    completion_bounds,
    global_iterations,
)
from .errors import DomainError
from .planner import (
    addition_verdict,
    high_accuracy_condition,
    k_seed,
    necessary_condition_holds,
    noma_outages,
    optimal_k_search,
    q_of_k,
    stationarity_residual,
)


class ConfigError(DomainError):
    pass


def bundled_spambase() -> Path:
    return Path(str(resources.files("edgetime") / "data" / "spambase.csv"))


@dataclass(frozen=True)
class ExperimentConfig:
    # system model
    n_total: int = 4600
    k_min: int = 1
    k_max: int = 30
    slot_seconds: float = 1e-3
    eps_local: float = 1e-3
    eps_gap: float = 1e-3
    lambda_reg: float = 0.01
    mu_smooth: float = 1.0
    zeta_convex: float = 1.0
    sigma_product: float | None = None
    dist_mode: str = "single_count"
    bandwidth_hz: float = 20e6
    rate_dist: float = 5e6
    rate_up: float = 5e6
    rate_mul: float = 5e6
    rho_min_db: float = 10.0
    rho_max_db: float = 20.0
    eta_min_db: float = 10.0
    eta_max_db: float = 20.0
    c_min: float = 1e-10
    c_max: float = 1e-9
    c_spacing: str = "log"
    # Monte Carlo
    trials: int = 10_000
    noma_trials: int = 100_000
    seed: int = 0
    access: str = "oma"
    zero_outage: bool = False
    # SNR sweeps: rho and eta ranges are [x, x + snr_span_db] for every grid point x
    snr_grid_db: tuple = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    snr_span_db: float = 10.0
    bandwidths_hz: tuple = (20e6, 40e6)
    n_grid: tuple = (1000, 10_000, 100_000)
    # learning
    dataset: str = ""
    loss: str = "logistic"
    train_k: tuple = (5, 10)
    gamma: float = 1.0
    max_iters: int = 200
    partition_mode: str = "uniform"
    sigma_mode: str = "safe_bound"
    standardize: bool = True
    normalize: bool = True
    centralized_gap: float = 1e-6
    output: str = ""

    def __post_init__(self):
        if not 1 <= self.k_min <= self.k_max:
            raise ConfigError("need 1 <= k_min <= k_max")
        for lo, hi in (("rho_min_db", "rho_max_db"), ("eta_min_db", "eta_max_db"), ("c_min", "c_max")):
            if getattr(self, lo) > getattr(self, hi):
                raise ConfigError(f"{lo} must not exceed {hi}")
        if self.trials < 1 or self.noma_trials < 1:
            raise ConfigError("trials must be >= 1")
        for name in ("eps_local", "eps_gap"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.access not in ("oma", "noma"):
            raise ConfigError("access must be oma or noma")
        if self.loss not in ("logistic", "squared"):
            raise ConfigError("loss must be logistic or squared")
        if not self.snr_grid_db or not self.bandwidths_hz or not self.train_k:
            raise ConfigError("grids must be non-empty")

    @property
    def k_range(self) -> range:
        return range(self.k_min, self.k_max + 1)

    @property
    def radio(self) -> RadioConfig:
        return RadioConfig(self.bandwidth_hz, self.rate_dist, self.rate_up, self.rate_mul)

    def system(self, k_devices: int, **overrides) -> SystemConfig:
        cfg = self if not overrides else replace(self, **overrides)
        return SystemConfig.default(
            k_devices,
            n_total=cfg.n_total,
            radio=cfg.radio,
            rho_db_range=(cfg.rho_min_db, cfg.rho_max_db),
            eta_db_range=(cfg.eta_min_db, cfg.eta_max_db),
            c_range=(cfg.c_min, cfg.c_max),
            c_spacing=cfg.c_spacing,
            slot_seconds=cfg.slot_seconds,
            eps_local=cfg.eps_local,
            eps_gap=cfg.eps_gap,
            lambda_reg=cfg.lambda_reg,
            mu_smooth=cfg.mu_smooth,
            zeta_convex=cfg.zeta_convex,
            sigma_product=cfg.sigma_product,
            dist_mode=cfg.dist_mode,
        )

    def at_snr(self, rho_min_db: float, **overrides) -> "ExperimentConfig":
        """Both SNR ranges moved to [rho_min_db, rho_min_db + snr_span_db]."""
        top = rho_min_db + self.snr_span_db
        return replace(self, rho_min_db=rho_min_db, rho_max_db=top,
                       eta_min_db=rho_min_db, eta_max_db=top, **overrides)


# --- config parsing ------------------------------------------------------------

def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _converter(default):
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return lambda s: int(float(s)) if float(s).is_integer() else int(s)
    if isinstance(default, float):
        return float
    if isinstance(default, tuple):
        item = int if default and all(isinstance(x, int) for x in default) else float
        return lambda s: tuple(item(float(x)) if item is int else float(x)
                               for x in s.replace(",", " ").split())
    if default is None:
        return lambda s: None if s.lower() in ("none", "") else float(s)
    return str


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    defaults = {f.name: f.default for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _converter(defaults[key])(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


# --- dataset loading -----------------------------------------------------------

def load_dataset(path, standardize: bool = True, normalize: bool = True) -> Dataset:
    """Read a CSV with one example per row and the label in the last column.

    Labels in {0, 1} become {-1, +1}. With ``standardize`` every feature is
    centred and scaled to unit variance; with ``normalize`` every example is
    then scaled to unit norm.
    """
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for idx, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise DomainError(f"row {idx}: need at least one feature and a label")
            elif len(row) != width:
                raise DomainError(f"row {idx}: expected {width} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise DomainError(f"row {idx}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise DomainError(f"row {idx}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DomainError("dataset is empty")
    table = np.asarray(rows)
    x, y = table[:, :-1], table[:, -1]
    if set(np.unique(y)) <= {0.0, 1.0}:
        y = 2.0 * y - 1.0
    if standardize and x.shape[0] > 1:
        scale = x.std(axis=0)
        scale[scale == 0] = 1.0
        x = (x - x.mean(axis=0)) / scale
    data = Dataset(x.T, y)
    return data.normalized() if normalize else data


# --- tables --------------------------------------------------------------------

@dataclass
class Table:
    header: tuple
    rows: list = field(default_factory=list)

    def column(self, name):
        i = self.header.index(name)
        return [r[i] for r in self.rows]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.header)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(table: Table, path) -> None:
    Path(path).write_text(to_csv(table), encoding="utf-8")


# --- sweeps --------------------------------------------------------------------

def _zero_outages(k: int) -> PhaseOutages:
    return PhaseOutages((0.0,) * k, (0.0,) * k, 0.0)


def run_sweep_k(cfg: ExperimentConfig) -> Table:
    """Monte-Carlo mean, bounds and M_K for every K in the configured range."""
    table = Table(("K", "mc_mean_s", "mc_stderr_s", "lower_s", "upper_s", "m_k"))
    for k in cfg.k_range:
        sys_cfg = cfg.system(k)
        ss = k_seed(cfg.seed, k)
        if cfg.zero_outage:
            outages = _zero_outages(k)
        elif cfg.access == "noma":
            outages = noma_outages(sys_cfg, cfg.noma_trials, ss)
        else:
            outages = None
        est = avg_completion_mc(sys_cfg, cfg.trials, ss, outages=outages)
        table.rows.append((k, est.mean_s, est.stderr_s, est.lower_bound_s,
                           est.upper_bound_s, est.iterations_m_k))
    return table


def run_bounds(cfg: ExperimentConfig) -> Table:
    """Closed-form lower and upper completion-time bounds over K."""
    table = Table(("K", "lower_s", "upper_s", "m_k"))
    for k in cfg.k_range:
        sys_cfg = cfg.system(k)
        lower, upper = completion_bounds(sys_cfg)
        table.rows.append((k, lower, upper, global_iterations(sys_cfg)))
    return table


def run_optimal_k_vs_snr(cfg: ExperimentConfig, snr_grid_db=None, bandwidths_hz=None) -> Table:
    """Optimal K for every (rho_min, bandwidth) grid point."""
    table = Table(("rho_min_db", "bandwidth_hz", "k_star"))
    for bw in bandwidths_hz or cfg.bandwidths_hz:
        for snr in snr_grid_db or cfg.snr_grid_db:
            point = cfg.at_snr(snr, bandwidth_hz=bw)
            k_star, _ = optimal_k_search(point.system(1), cfg.k_max, cfg.trials, cfg.seed,
                                         access=cfg.access, noma_trials=cfg.noma_trials)
            table.rows.append((float(snr), float(bw), k_star))
    return table


def run_oma_vs_noma(cfg: ExperimentConfig, snr_grid_db=None) -> Table:
    """Mean completion time under OMA and NOMA upload, per rho_min and K.

    Both columns at a given K reuse the same seed, so they share the
    distribution and multicast samples.
    """
    table = Table(("rho_min_db", "K", "mean_oma_s", "stderr_oma_s", "mean_noma_s", "stderr_noma_s"))
    for snr in snr_grid_db or cfg.snr_grid_db:
        point = cfg.at_snr(snr)
        for k in cfg.k_range:
            sys_cfg = point.system(k)
            ss = k_seed(cfg.seed, k)
            oma = avg_completion_mc(sys_cfg, cfg.trials, ss)
            noma = avg_completion_mc(sys_cfg, cfg.trials, ss,
                                     outages=noma_outages(sys_cfg, cfg.noma_trials, ss))
            table.rows.append((float(snr), k, oma.mean_s, oma.stderr_s, noma.mean_s, noma.stderr_s))
    return table


def run_train(cfg: ExperimentConfig, dataset_path=None) -> Table:
    """CoCoA training traces for every K in ``train_k`` plus the centralized baseline."""
    path = dataset_path or cfg.dataset or bundled_spambase()
    data = load_dataset(path, standardize=cfg.standardize, normalize=cfg.normalize)
    kit = LossKit(cfg.loss)
    table = Table(("run", "t", "duality_gap", "accuracy"))
    for k in cfg.train_k:
        trace = train(data, k, kit, cfg.lambda_reg, cfg.eps_local, cfg.eps_gap, gamma=cfg.gamma,
                      seed=cfg.seed, max_iters=cfg.max_iters, partition_mode=cfg.partition_mode,
                      sigma_mode=cfg.sigma_mode)
        table.rows.extend((f"K={k}", t, gap, acc) for t, gap, acc in trace.records)
    base = centralized_baseline(data, kit, cfg.lambda_reg, cfg.centralized_gap)
    table.rows.extend(("centralized", t, gap, acc) for t, gap, acc in base.records)
    return table


def run_planner_report(cfg: ExperimentConfig) -> Table:
    """Addition verdict, high-accuracy and large-dataset conditions over K."""
    table = Table(("K", "verdict", "prop3_holds", "q_of_k", "necessary_holds", "stationarity_residual"))
    for k in cfg.k_range:
        sys_cfg = cfg.system(k)
        verdict = addition_verdict(sys_cfg)
        holds, _, _ = high_accuracy_condition(k, sys_cfg.eta_max, sys_cfg.eta_min, sys_cfg.rho_max,
                                              sys_cfg.rho_min, sys_cfg.radio, min(sys_cfg.compute_consts),
                                              sys_cfg.n_total, sys_cfg.eps_local)
        table.rows.append((k, verdict.verdict, holds, q_of_k(k, sys_cfg),
                           necessary_condition_holds(k, sys_cfg.rho_min, sys_cfg),
                           stationarity_residual(float(k), sys_cfg)))
    return table


def run_centralized(cfg: ExperimentConfig) -> Table:
    """Centralized solver time against the best distributed mean, per dataset size.

    The central solver uses the fastest configured compute constant.
    """
    table = Table(("n_total", "centralized_s", "best_distributed_s", "k_star", "distributed_over_centralized"))
    for n in cfg.n_grid:
        point = replace(cfg, n_total=int(n))
        k_star, rows = optimal_k_search(point.system(1), cfg.k_max, cfg.trials, cfg.seed)
        best = rows[k_star - 1][1]
        central = centralized_time(cfg.c_min, int(n), cfg.eps_gap)
        table.rows.append((int(n), central, best, k_star, best / central))
    return table


SUBCOMMANDS = {
    "sweep-k": run_sweep_k,
    "bounds": run_bounds,
    "optimal-k": run_optimal_k_vs_snr,
    "oma-noma": run_oma_vs_noma,
    "train": run_train,
    "planner": run_planner_report,
    "centralized": run_centralized,
}
