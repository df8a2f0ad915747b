"""CoCoA distributed dual coordinate ascent with gradient-descent local solvers.

Problem: minimise F(w) = (1/N) sum_n l_n(x_n^T w) + (lam/2)||w||^2 over w,
via the dual

    D(alpha) = -(1/N) sum_n l_n^*(-alpha_n) - (lam/2) ||X alpha / (lam N)||^2,

with w(alpha) = X alpha / (lam N). Labels are folded into the losses, so X
(M x N, one column per example) carries features only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .completion import iteration_budget
from .errors import DivergenceError, DomainError

SQUARED = "squared"
LOGISTIC = "logistic"

# Keeps the logistic dual strictly inside its domain so log terms stay finite.
_LOGISTIC_EDGE = 1e-12
# Full recomputation period of v = X alpha.
REFRESH_EVERY = 50


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # M x N
    labels: np.ndarray  # N

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float).ravel()
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DomainError("features must be a non-empty M x N matrix")
        if y.size != x.shape[1]:
            raise DomainError("need one label per column of the feature matrix")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("dataset contains non-finite entries")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n_examples(self) -> int:
        return self.features.shape[1]

    @property
    def n_features(self) -> int:
        return self.features.shape[0]

    def normalized(self) -> "Dataset":
        """Copy with every example (column) scaled to unit Euclidean norm."""
        norms = np.linalg.norm(self.features, axis=0)
        norms[norms == 0] = 1.0
        return Dataset(self.features / norms, self.labels)


@dataclass(frozen=True)
class Partition:
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=np.int64) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)

    @property
    def k_devices(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple:
        return tuple(int(b.size) for b in self.blocks)

    def validate(self, n_total: int):
        allidx = np.concatenate(self.blocks) if self.blocks else np.array([], dtype=np.int64)
        if allidx.size != n_total or not np.array_equal(np.sort(allidx), np.arange(n_total)):
            raise DomainError("blocks must be disjoint and cover every example exactly once")


def partition_dataset(n_total: int, k_devices: int, mode: str = "uniform", seed: int = 0) -> Partition:
    """Split example indices 0..N-1 into K disjoint blocks after a seeded shuffle.

    ``uniform``: the first N mod K blocks get ceil(N/K) examples, the rest
    floor(N/K). ``random``: block sizes are multinomial with probabilities
    drawn uniformly from the simplex.
    """
    if k_devices < 1 or n_total < 1:
        raise DomainError("need N >= 1 and K >= 1")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_total)
    if mode == "uniform":
        if k_devices > n_total:
            warnings.warn(f"K={k_devices} > N={n_total}: some blocks are empty")
        base, extra = divmod(n_total, k_devices)
        sizes = [base + 1 if k < extra else base for k in range(k_devices)]
    elif mode == "random":
        probs = rng.dirichlet(np.ones(k_devices))
        sizes = list(rng.multinomial(n_total, probs))
    else:
        raise DomainError(f"unknown partition mode {mode!r}")
    cuts = np.cumsum([0] + sizes)
    return Partition(tuple(np.sort(perm[cuts[k]:cuts[k + 1]]) for k in range(k_devices)))


# --- spectral constants -------------------------------------------------------

def _power_top_eig(gram_apply, dim: int, tol: float, rng, max_iter: int = 10_000) -> float:
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    value = 0.0
    for _ in range(max_iter):
        u = gram_apply(v)
        new = float(np.linalg.norm(u))
        if new == 0.0:
            return 0.0
        v = u / new
        if abs(new - value) <= tol * new:
            return new
        value = new
    return value


def sigma_max(data: Dataset, part: Partition, tol: float = 1e-10, seed: int = 0) -> float:
    """max_k of the largest squared singular value of the block X_[k].

    Power iteration on the smaller of X_k^T X_k and X_k X_k^T, to relative
    tolerance ``tol`` on the eigenvalue.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for block in part.blocks:
        if block.size == 0:
            continue
        xk = data.features[:, block]
        if xk.shape[0] <= xk.shape[1]:
            gram = xk @ xk.T
        else:
            gram = xk.T @ xk
        best = max(best, _power_top_eig(lambda v: gram @ v, gram.shape[0], tol, rng))
    return best


def sigma_prime(data: Dataset, part: Partition, mode: str = "safe_bound", trials: int = 5,
                seed: int = 0, tol: float = 1e-12) -> float:
    """Aggregation constant (1/K) max_alpha ||X alpha||^2 / sum_k ||X_k alpha_k||^2.

    ``safe_bound`` returns 1, which always holds for disjoint blocks.
    ``estimate`` maximises the ratio: writing X_k alpha_k = Q_k z_k with Q_k
    an orthonormal basis of range(X_k), the ratio is ||[Q_1 .. Q_K] z||^2 /
    ||z||^2, maximised by power iteration from ``trials`` random starts.
    """
    if mode == "safe_bound":
        return 1.0
    if mode != "estimate":
        raise DomainError(f"unknown sigma_prime mode {mode!r}")
    k = part.k_devices
    if k == 1:
        return 1.0
    bases = []
    for block in part.blocks:
        if block.size == 0:
            continue
        u, s, _ = np.linalg.svd(data.features[:, block], full_matrices=False)
        rank = int(np.sum(s > s[0] * 1e-10)) if s.size and s[0] > 0 else 0
        if rank:
            bases.append(u[:, :rank])
    if not bases:
        return 0.0
    stacked = np.hstack(bases)
    gram = stacked @ stacked.T if stacked.shape[0] <= stacked.shape[1] else stacked.T @ stacked
    rng = np.random.default_rng(seed)
    best = max(_power_top_eig(lambda v: gram @ v, gram.shape[0], tol, rng) for _ in range(max(trials, 1)))
    return best / k


# --- losses -------------------------------------------------------------------

@dataclass(frozen=True)
class LossKit:
    """Per-example loss l(a; y), its conjugate and derivatives.

    ``mu`` is the smoothness parameter: l is (1/mu)-smooth, so l^* is
    mu-strongly convex.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in (SQUARED, LOGISTIC):
            raise DomainError(f"unknown loss {self.kind!r}")

    @property
    def mu(self) -> float:
        return 1.0 if self.kind == SQUARED else 4.0

    def loss(self, a, y):
        if self.kind == SQUARED:
            return 0.5 * (a - y) ** 2
        return np.logaddexp(0.0, -y * a)

    def loss_grad(self, a, y):
        if self.kind == SQUARED:
            return a - y
        return -y / (1.0 + np.exp(y * a))

    def conj(self, b, y):
        """l^*(b); +inf outside the domain for the logistic loss."""
        b = np.asarray(b, dtype=float)
        if self.kind == SQUARED:
            return 0.5 * b ** 2 + b * y
        s = -b * y
        inside = (s >= 0) & (s <= 1)
        sc = np.clip(s, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(sc > 0, sc * np.log(sc), 0.0) + np.where(sc < 1, (1 - sc) * np.log1p(-sc), 0.0)
        return np.where(inside, val, np.inf)

    def conj_grad(self, b, y):
        if self.kind == SQUARED:
            return b + y
        s = np.clip(-b * y, _LOGISTIC_EDGE, 1.0 - _LOGISTIC_EDGE)
        return -y * np.log(s / (1.0 - s))

    # dual-variable forms: h(u) = l^*(-u) and its derivative
    def dual_loss(self, u, y):
        return self.conj(-np.asarray(u, dtype=float), y)

    def dual_loss_grad(self, u, y):
        return -self.conj_grad(-np.asarray(u, dtype=float), y)

    def project(self, u, y):
        """Map dual variables into the (interior of the) conjugate's domain."""
        if self.kind == SQUARED:
            return u
        return y * np.clip(u * y, _LOGISTIC_EDGE, 1.0 - _LOGISTIC_EDGE)

    def dual_curvature(self, u=None, y=None) -> float:
        """Lower bound on h'' (upper bound too for the squared loss)."""
        return self.mu


# --- dual state and objectives -------------------------------------------------

@dataclass
class DualState:
    alpha: np.ndarray
    shared_v: np.ndarray
    model_w: np.ndarray
    lambda_reg: float
    steps: int = 0

    @classmethod
    def zeros(cls, data: Dataset, lambda_reg: float) -> "DualState":
        m, n = data.features.shape
        return cls(np.zeros(n), np.zeros(m), np.zeros(m), lambda_reg)

    @classmethod
    def from_alpha(cls, alpha, data: Dataset, lambda_reg: float) -> "DualState":
        alpha = np.asarray(alpha, dtype=float).copy()
        v = data.features @ alpha
        return cls(alpha, v, v / (lambda_reg * data.n_examples), lambda_reg)

    def refreshed(self, data: Dataset) -> "DualState":
        v = data.features @ self.alpha
        return replace(self, shared_v=v, model_w=v / (self.lambda_reg * data.n_examples))


def primal_objective(w, data: Dataset, kit: LossKit, lambda_reg: float) -> float:
    margins = data.features.T @ w
    return float(np.mean(kit.loss(margins, data.labels)) + 0.5 * lambda_reg * np.dot(w, w))


def dual_objective(state: DualState, data: Dataset, kit: LossKit, lambda_reg: float) -> float:
    n = data.n_examples
    w = state.shared_v / (lambda_reg * n)
    return float(-np.mean(kit.dual_loss(state.alpha, data.labels)) - 0.5 * lambda_reg * np.dot(w, w))


def duality_gap(state: DualState, data: Dataset, kit: LossKit, lambda_reg: float) -> float:
    """F(w(alpha)) - D(alpha); non-negative up to round-off."""
    w = state.shared_v / (lambda_reg * data.n_examples)
    gap = primal_objective(w, data, kit, lambda_reg) - dual_objective(state, data, kit, lambda_reg)
    if not math.isfinite(gap):
        raise DivergenceError("duality gap is not finite")
    return gap


def accuracy(w, data: Dataset) -> float:
    pred = np.where(data.features.T @ w >= 0, 1.0, -1.0)
    return float(np.mean(pred == data.labels))


def local_objective(delta, state: DualState, block, data: Dataset, kit: LossKit,
                    gamma: float, sigma_prime: float, k_devices: int = 1) -> float:
    """Local subproblem value for block k at update ``delta`` (block coordinates).

    (lam/K) r*(v/(lam N)) + (1/N) w^T X_k delta
      + gamma sigma' / (2 lam N^2) ||X_k delta||^2
      + (1/N) sum_{n in P_k} l_n^*(-alpha_n - delta_n)
    """
    n = data.n_examples
    lam = state.lambda_reg
    xk = data.features[:, block]
    xd = xk @ delta
    w = state.model_w
    return float(lam / k_devices * 0.5 * np.dot(w, w)
                 + np.dot(w, xd) / n
                 + gamma * sigma_prime / (2.0 * lam * n * n) * np.dot(xd, xd)
                 + np.sum(kit.dual_loss(state.alpha[block] + delta, data.labels[block])) / n)


def local_gradient(delta, state: DualState, block, data: Dataset, kit: LossKit,
                   gamma: float, sigma_prime: float) -> np.ndarray:
    n = data.n_examples
    lam = state.lambda_reg
    xk = data.features[:, block]
    inner = state.model_w / n + gamma * sigma_prime / (lam * n * n) * (xk @ delta)
    return xk.T @ inner + kit.dual_loss_grad(state.alpha[block] + delta, data.labels[block]) / n


def local_lipschitz(block, data: Dataset, kit: LossKit, gamma: float, sigma_prime: float,
                    lambda_reg: float, block_sigma: float | None = None) -> float:
    """Gradient Lipschitz constant of the local subproblem (exact for squared loss;
    for the logistic loss only a lower bound, step sizes are then backtracked)."""
    n = data.n_examples
    if block_sigma is None:
        xk = data.features[:, block]
        block_sigma = float(np.linalg.norm(xk, 2) ** 2) if xk.size else 0.0
    return gamma * sigma_prime * block_sigma / (lambda_reg * n * n) + kit.dual_curvature() / n


def local_solve(state: DualState, block, data: Dataset, kit: LossKit, gamma: float,
                sigma_prime: float, step: float, iters: int) -> np.ndarray:
    """Gradient descent on the local subproblem from delta = 0.

    Runs ``iters`` steps touching only the block's coordinates. Steps that
    fail the sufficient-decrease test are halved (this never triggers for
    the squared loss with step <= 1/L); iterates are projected into the
    conjugate's domain.
    """
    if step <= 0 or iters < 1:
        raise DomainError("need step > 0 and iters >= 1")
    block = np.asarray(block, dtype=np.int64)
    n = data.n_examples
    lam = state.lambda_reg
    xk = data.features[:, block]
    y = data.labels[block]
    alpha_k = state.alpha[block]
    lin = xk.T @ state.model_w / n
    quad = gamma * sigma_prime / (lam * n * n)

    delta = np.zeros(block.size)
    xd = np.zeros(data.n_features)

    def value(d, xdv):
        return float(np.dot(lin, d) + 0.5 * quad * np.dot(xdv, xdv)
                     + np.sum(kit.dual_loss(alpha_k + d, y)) / n)

    current = value(delta, xd)
    theta = step
    for it in range(iters):
        grad = lin + quad * (xk.T @ xd) + kit.dual_loss_grad(alpha_k + delta, y) / n
        if not np.all(np.isfinite(grad)):
            raise DivergenceError(f"non-finite local gradient at inner iteration {it}")
        while True:
            cand = kit.project(alpha_k + delta - theta * grad, y) - alpha_k
            move = cand - delta
            sq = float(np.dot(move, move))
            if sq == 0.0:
                return delta
            xd_cand = xd + xk @ move
            new = value(cand, xd_cand)
            if new <= current - sq / (2.0 * theta) * 1e-4 or theta < 1e-30:
                break
            theta *= 0.5
        delta, xd, current = cand, xd_cand, new
        if theta < step:
            theta = min(step, 2.0 * theta)
    return delta


def global_step(state: DualState, updates, gamma: float, data: Dataset) -> DualState:
    """alpha <- alpha + gamma * sum_k delta_k, with v and w kept consistent.

    ``updates`` is a sequence of ``(block_indices, delta)`` pairs applied in
    the given order. v is updated incrementally and recomputed from scratch
    every ``REFRESH_EVERY`` steps.
    """
    seen = np.zeros(data.n_examples, dtype=bool)
    alpha = state.alpha.copy()
    v = state.shared_v.copy()
    for block, delta in updates:
        block = np.asarray(block, dtype=np.int64)
        if np.any(seen[block]):
            raise DomainError("block updates overlap")
        seen[block] = True
        if gamma == 0:
            continue
        alpha[block] += gamma * delta
        v += gamma * (data.features[:, block] @ delta)
    steps = state.steps + 1
    if steps % REFRESH_EVERY == 0:
        v = data.features @ alpha
    lam = state.lambda_reg
    return DualState(alpha, v, v / (lam * data.n_examples), lam, steps)


# --- training loop ------------------------------------------------------------

@dataclass
class TrainTrace:
    records: list = field(default_factory=list)  # (t, duality_gap, train_accuracy)
    sigma_prime: float = math.nan
    sigma_max: float = math.nan
    iterations_used: int = 0
    m_k_budget: int = 0
    converged: bool = False
    state: DualState | None = None

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r[1] for r in self.records])

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r[2] for r in self.records])


class TrainingDiverged(DivergenceError):
    def __init__(self, message, trace: TrainTrace):
        super().__init__(message)
        self.trace = trace


def train(data: Dataset, k_devices: int, kit: LossKit, lambda_reg: float, eps_local: float,
          eps_gap: float, gamma: float = 1.0, seed: int = 0, max_iters: int = 1000,
          partition_mode: str = "uniform", sigma_mode: str = "safe_bound",
          inner_iters: int | None = None, partition: Partition | None = None) -> TrainTrace:
    """Run CoCoA until the duality gap reaches ``eps_gap`` or ``max_iters``.

    Every device runs ceil(1/eps_local) gradient steps per global iteration
    unless ``inner_iters`` is given. The local subproblems use the
    aggregation-safe smoothing gamma * K * sigma', where sigma' is 1
    (``safe_bound``) or the measured constant (``estimate``). The trace
    records the measured sigma', sigma_max and the matching iteration budget.
    """
    if not 0 < gamma <= 1:
        raise DomainError("gamma must lie in (0, 1]")
    part = partition or partition_dataset(data.n_examples, k_devices, partition_mode, seed)
    part.validate(data.n_examples)
    k = part.k_devices
    sp_measured = sigma_prime(data, part, "estimate", seed=seed)
    sm = sigma_max(data, part, seed=seed)
    sp_used = sigma_prime(data, part, sigma_mode, seed=seed) if sigma_mode == "safe_bound" else sp_measured
    sigma_sub = gamma * k * sp_used
    budget = iteration_budget(k, data.n_examples, eps_local, eps_gap, lambda_reg,
                              kit.mu, 1.0, sp_measured * sm)
    trace = TrainTrace(sigma_prime=sp_measured, sigma_max=sm, m_k_budget=budget)
    iters = inner_iters or int(math.ceil(1.0 / eps_local))

    steps = []
    for block in part.blocks:
        lip = local_lipschitz(block, data, kit, 1.0, sigma_sub, lambda_reg)
        steps.append(1.0 / lip)

    state = DualState.zeros(data, lambda_reg)
    gap = duality_gap(state, data, kit, lambda_reg)
    trace.records.append((0, gap, accuracy(state.model_w, data)))
    for t in range(1, max_iters + 1):
        updates = [(block, local_solve(state, block, data, kit, 1.0, sigma_sub, step, iters))
                   for block, step in zip(part.blocks, steps) if block.size]
        state = global_step(state, updates, gamma, data)
        gap = duality_gap(state, data, kit, lambda_reg)
        trace.records.append((t, gap, accuracy(state.model_w, data)))
        trace.iterations_used = t
        if gap <= eps_gap:
            trace.converged = True
            break
        if t >= 20 and gap > 10.0 * trace.records[t - 20][1]:
            trace.state = state
            raise TrainingDiverged(f"duality gap grew tenfold over 20 iterations (t={t})", trace)
    trace.state = state
    return trace


def centralized_baseline(data: Dataset, kit: LossKit, lambda_reg: float, gap_tol: float = 1e-6,
                         max_iters: int = 100_000) -> TrainTrace:
    """Single-machine dual ascent (K = 1) run to duality gap ``gap_tol``."""
    part = Partition((np.arange(data.n_examples),))
    trace = TrainTrace(sigma_prime=1.0, sigma_max=sigma_max(data, part))
    state = DualState.zeros(data, lambda_reg)
    step = 1.0 / local_lipschitz(part.blocks[0], data, kit, 1.0, 1.0, lambda_reg, trace.sigma_max)
    chunk = 50
    for t in range(1, max_iters // chunk + 1):
        delta = local_solve(state, part.blocks[0], data, kit, 1.0, 1.0, step, chunk)
        state = global_step(state, [(part.blocks[0], delta)], 1.0, data)
        gap = duality_gap(state, data, kit, lambda_reg)
        trace.records.append((t * chunk, gap, accuracy(state.model_w, data)))
        trace.iterations_used = t * chunk
        if gap <= gap_tol:
            trace.converged = True
            break
    trace.state = state
    return trace
