"""Markov noise processes on node and edge categories.

Discrete noise uses either uniform or marginal transitions with a cosine
schedule. The Gaussian (variance-preserving) process used by the continuous
baseline lives here too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DatasetStats, Graph, GraphError, _one_hot, sample_categorical

DEFAULT_S = 0.008
DEFAULT_T = 500
ROW_TOL = 1e-12
# per-step signal ratio floor for the Gaussian process; avoids 1/0 at t = T
MIN_STEP_RATIO = 1e-3

UNIFORM = "uniform"
MARGINAL = "marginal"


class NoiseError(ValueError):
    pass


def cosine_alpha_bar(t, T: int, s: float = DEFAULT_S):
    """cos(0.5*pi*(t/T + s)/(1 + s))**2, clamped to [0, 1]."""
    if s <= 0:
        raise NoiseError(f"cosine offset must be positive, got {s}")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > T):
        raise NoiseError(f"timestep outside [0, {T}]")
    val = np.cos(0.5 * np.pi * (t_arr / T + s) / (1 + s)) ** 2
    val = np.where(t_arr == T, 0.0, np.clip(val, 0.0, 1.0))
    return float(val) if np.ndim(val) == 0 else val


class NoiseSchedule:
    """Cosine schedule over t = 0..T.

    The cumulative signal rate is the cosine curve divided by its value at
    t = 0, so that the cumulative transition at t = 0 is the identity and the
    per-step rates telescope exactly into the cumulative ones.
    """

    def __init__(self, T: int = DEFAULT_T, s: float = DEFAULT_S):
        if T < 1:
            raise NoiseError("T must be at least 1")
        self.T = int(T)
        self.s = float(s)
        raw = cosine_alpha_bar(np.arange(T + 1), T, s)
        self.alpha_bar = raw / raw[0]
        self.alpha_bar[0] = 1.0
        self.alpha_bar[-1] = 0.0
        self.alpha = np.ones(T + 1)
        prev = self.alpha_bar[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            self.alpha[1:] = np.where(prev > 0, self.alpha_bar[1:] / prev, 0.0)
        self.beta = 1.0 - self.alpha
        self.beta_bar = 1.0 - self.alpha_bar

    def __repr__(self):
        return f"NoiseSchedule(T={self.T}, s={self.s})"

    def _check_t(self, t: int, lo: int = 0) -> int:
        if not lo <= t <= self.T:
            raise NoiseError(f"timestep {t} outside [{lo}, {self.T}]")
        return int(t)


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise NoiseError(f"alpha must lie in [0, 1], got {alpha}")


def _check_dist(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 1 or np.any(m < 0) or abs(m.sum() - 1.0) > 1e-12:
        raise NoiseError(f"not a probability vector: {m}")
    return m


def uniform_transition(alpha_t: float, d: int) -> np.ndarray:
    _check_alpha(alpha_t)
    return alpha_t * np.eye(d) + (1.0 - alpha_t) * np.full((d, d), 1.0 / d)


def marginal_transition(alpha_t: float, beta_t: float, m) -> np.ndarray:
    _check_alpha(alpha_t)
    if abs(alpha_t + beta_t - 1.0) > 1e-12:
        raise NoiseError("alpha and beta must sum to 1")
    m = _check_dist(m)
    return alpha_t * np.eye(m.size) + beta_t * np.outer(np.ones(m.size), m)


def _limit(m_or_d) -> np.ndarray:
    if np.ndim(m_or_d) == 0:
        d = int(m_or_d)
        return np.full(d, 1.0 / d)
    return _check_dist(m_or_d)


def cumulative_transition(alpha_bar_t: float, m_or_uniform) -> np.ndarray:
    """Closed form of the product of per-step transitions.

    ``m_or_uniform`` is either a limit distribution or an int ``d`` meaning
    the uniform distribution over ``d`` classes.
    """
    _check_alpha(alpha_bar_t)
    m = _limit(m_or_uniform)
    return alpha_bar_t * np.eye(m.size) + (1.0 - alpha_bar_t) * np.outer(np.ones(m.size), m)


@dataclass(frozen=True)
class TransitionMatrices:
    Q_X: np.ndarray
    Q_E: np.ndarray
    Qbar_X: np.ndarray
    Qbar_E: np.ndarray
    kind: str


class DiscreteNoise:
    """Schedule plus limit distributions for nodes and edges."""

    def __init__(self, schedule: NoiseSchedule, kind: str, m_X, m_E):
        if kind not in (UNIFORM, MARGINAL):
            raise NoiseError(f"unknown transition kind {kind!r}")
        self.schedule = schedule
        self.kind = kind
        m_X = _check_dist(m_X)
        m_E = _check_dist(m_E)
        if kind == UNIFORM:
            m_X = np.full(m_X.size, 1.0 / m_X.size)
            m_E = np.full(m_E.size, 1.0 / m_E.size)
        self.m_X = m_X
        self.m_E = m_E
        self._cache: dict[int, TransitionMatrices] = {}

    @classmethod
    def from_stats(cls, schedule: NoiseSchedule, kind: str, stats: DatasetStats):
        return cls(schedule, kind, stats.node_marginals, stats.edge_marginals)

    @property
    def T(self) -> int:
        return self.schedule.T

    @property
    def a(self) -> int:
        return self.m_X.size

    @property
    def b(self) -> int:
        return self.m_E.size

    def _step(self, alpha: float, m: np.ndarray) -> np.ndarray:
        return marginal_transition(alpha, 1.0 - alpha, m)

    def matrices(self, t: int) -> TransitionMatrices:
        t = self.schedule._check_t(t)
        if t not in self._cache:
            sch = self.schedule
            self._cache[t] = TransitionMatrices(
                Q_X=self._step(sch.alpha[t], self.m_X),
                Q_E=self._step(sch.alpha[t], self.m_E),
                Qbar_X=cumulative_transition(sch.alpha_bar[t], self.m_X),
                Qbar_E=cumulative_transition(sch.alpha_bar[t], self.m_E),
                kind=self.kind,
            )
        return self._cache[t]

    # batched array versions used by the engine -------------------------

    def noisy_probs(self, X: np.ndarray, E: np.ndarray, t: int):
        """Rows of q(G^t | G) for one-hot arrays of any leading shape."""
        mats = self.matrices(t)
        return X @ mats.Qbar_X, E @ mats.Qbar_E

    def sample_noisy(self, X: np.ndarray, E: np.ndarray, t: int, rng: np.random.Generator):
        """Sample G^t for stacked one-hot arrays ``(..., n, a)``, ``(..., n, n, b)``."""
        px, pe = self.noisy_probs(X, E, t)
        return (
            _one_hot(sample_categorical(px, rng), self.a),
            sample_symmetric_edges(pe, rng),
        )

    def sample_noisy_per_graph(self, X: np.ndarray, E: np.ndarray, ts, rng: np.random.Generator):
        """Like ``sample_noisy`` but with one timestep per graph of a (B, ...) stack."""
        qx = np.stack([self.matrices(int(t)).Qbar_X for t in ts])
        qe = np.stack([self.matrices(int(t)).Qbar_E for t in ts])
        px = np.einsum("bna,bac->bnc", X, qx)
        pe = np.einsum("bnma,bac->bnmc", E, qe)
        return _one_hot(sample_categorical(px, rng), self.a), sample_symmetric_edges(pe, rng)


def sample_symmetric_edges(pe: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample each unordered pair once, mirror, and pin the diagonal to class 0."""
    n = pe.shape[-2]
    b = pe.shape[-1]
    iu, ju = np.triu_indices(n, k=1)
    labels = np.zeros(pe.shape[:-1], dtype=np.int64)
    if iu.size:
        picked = sample_categorical(pe[..., iu, ju, :], rng)
        labels[..., iu, ju] = picked
        labels[..., ju, iu] = picked
    return _one_hot(labels, b)


def apply_discrete_noise(g: Graph, t: int, noise: DiscreteNoise, rng: np.random.Generator) -> Graph:
    noise.schedule._check_t(t, lo=1)
    X, E = noise.sample_noisy(g.X, g.E, t, rng)
    return Graph(X, E)


def posterior_single(z_t, x, Q_t: np.ndarray, Qbar_prev: np.ndarray) -> np.ndarray:
    """q(z^{t-1} | z^t, x) for one variable, from one-hot (or index) inputs."""
    z_t = _as_one_hot(z_t, Q_t.shape[0])
    x = _as_one_hot(x, Q_t.shape[0])
    unnorm = (z_t @ Q_t.T) * (x @ Qbar_prev)
    total = unnorm.sum()
    if total <= 0:
        raise NoiseError("posterior has zero mass: (z_t, x) is impossible under the noise model")
    return unnorm / total


def _as_one_hot(v, d: int) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim == 0:
        out = np.zeros(d)
        out[int(v)] = 1.0
        return out
    return v.astype(np.float64)


def posterior_table(z_t: np.ndarray, Q_t: np.ndarray, Qbar_prev: np.ndarray):
    """Unnormalized posteriors for every candidate clean class.

    Returns ``num`` of shape ``(..., d, d)`` with ``num[..., x, k] =
    Qbar_prev[x, k] * Q_t[k, z_t]``. Its row sums equal q(z^t | x).
    """
    col = z_t @ Q_t.T  # (..., d): Q_t[k, z_t]
    return Qbar_prev * col[..., None, :]


def sample_prior(n: int, stats_or_noise, kind: str | None = None, rng=None) -> Graph:
    """Draw G^T from the limit distribution (nodes and edges i.i.d.)."""
    if isinstance(stats_or_noise, DiscreteNoise):
        m_X, m_E = stats_or_noise.m_X, stats_or_noise.m_E
    else:
        stats = stats_or_noise
        if kind == MARGINAL:
            m_X, m_E = stats.node_marginals, stats.edge_marginals
        elif kind == UNIFORM:
            a, b = stats.node_marginals.size, stats.edge_marginals.size
            m_X, m_E = np.full(a, 1.0 / a), np.full(b, 1.0 / b)
        else:
            raise NoiseError(f"unknown transition kind {kind!r}")
    if n < 1:
        raise GraphError("graph must have at least one node")
    X, E = sample_prior_arrays((n,), m_X, m_E, rng)
    return Graph(X, E)


def sample_prior_arrays(shape, m_X, m_E, rng):
    """Stacked prior samples: ``shape`` is ``(..., n)``."""
    shape = tuple(shape)
    px = np.broadcast_to(m_X, shape + (len(m_X),))
    pe = np.broadcast_to(m_E, shape + (shape[-1], len(m_E)))
    X = _one_hot(sample_categorical(px, rng), len(m_X))
    E = sample_symmetric_edges(pe, rng)
    return X, E


# --- Gaussian variance-preserving process ------------------------------------


@dataclass(frozen=True)
class VPStep:
    alpha: float
    sigma: float
    alpha_prev: float
    sigma_prev: float
    alpha_cond: float
    sigma_cond: float
    sigma_post: float


class ContinuousNoiseParams:
    """Signal and noise rates of the Gaussian process, derived from a schedule.

    alpha_t = sqrt(alpha_bar_t) and sigma_t**2 = 1 - alpha_t**2. Per-step signal
    ratios are floored at ``MIN_STEP_RATIO`` (in squared terms) before taking
    cumulative products so the last reverse step stays finite.
    """

    def __init__(self, schedule: NoiseSchedule, min_step_ratio: float = MIN_STEP_RATIO):
        self.schedule = schedule
        T = schedule.T
        ratio = np.ones(T + 1)
        ratio[1:] = np.maximum(schedule.alpha[1:], min_step_ratio)
        ab = np.cumprod(ratio)
        self.alpha = np.sqrt(ab)
        self.sigma = np.sqrt(np.clip(1.0 - ab, 0.0, None))
        self.alpha_cond = np.ones(T + 1)
        self.alpha_cond[1:] = self.alpha[1:] / self.alpha[:-1]
        sig2_cond = np.zeros(T + 1)
        sig2_cond[1:] = self.sigma[1:] ** 2 - self.alpha_cond[1:] ** 2 * self.sigma[:-1] ** 2
        # rounding can leave -1e-17 where the step is a no-op
        sig2_cond[np.abs(sig2_cond) < 1e-15] = 0.0
        self.sigma_cond_sq = sig2_cond
        self.sigma_cond = np.sqrt(np.clip(sig2_cond, 0.0, None))
        self.sigma_post = np.zeros(T + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            post = self.sigma_cond[1:] * self.sigma[:-1] / self.sigma[1:]
        self.sigma_post[1:] = np.where(self.sigma[1:] > 0, post, 0.0)

    @property
    def T(self) -> int:
        return self.schedule.T


def vp_params(t: int, params: ContinuousNoiseParams) -> VPStep:
    params.schedule._check_t(t, lo=1)
    if params.sigma_cond_sq[t] < 0:
        raise NoiseError(f"negative conditional variance at t={t}: schedule is inconsistent")
    return VPStep(
        alpha=float(params.alpha[t]),
        sigma=float(params.sigma[t]),
        alpha_prev=float(params.alpha[t - 1]),
        sigma_prev=float(params.sigma[t - 1]),
        alpha_cond=float(params.alpha_cond[t]),
        sigma_cond=float(params.sigma_cond[t]),
        sigma_post=float(params.sigma_post[t]),
    )


def posterior_mean(x_clean, z_t, step: VPStep):
    """Mean of q(z^{t-1} | x, z^t) for the Gaussian process."""
    c_z = step.alpha_cond * step.sigma_prev**2 / step.sigma**2
    c_x = step.alpha_prev * step.sigma_cond**2 / step.sigma**2
    return c_z * z_t + c_x * x_clean


def symmetric_normal(shape, rng: np.random.Generator) -> np.ndarray:
    """Standard normal edge noise, drawn on i < j, mirrored, zero diagonal."""
    *lead, n, n2, b = shape
    assert n == n2
    iu, ju = np.triu_indices(n, k=1)
    out = np.zeros(shape)
    draws = rng.standard_normal(tuple(lead) + (iu.size, b))
    out[..., iu, ju, :] = draws
    out[..., ju, iu, :] = draws
    return out


def apply_gaussian_noise(g: Graph, t: int, params: ContinuousNoiseParams, rng: np.random.Generator):
    """Return (X^t, E^t, eps_X, eps_E). The edge diagonal carries no signal or noise."""
    step = vp_params(t, params)
    eps_x = rng.standard_normal(g.X.shape)
    eps_e = symmetric_normal(g.E.shape, rng)
    E = g.E * offdiag_mask(g.n)[..., None]
    return step.alpha * g.X + step.sigma * eps_x, step.alpha * E + step.sigma * eps_e, eps_x, eps_e


def offdiag_mask(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)
