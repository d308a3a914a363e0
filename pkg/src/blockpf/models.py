"""State-space models: generic interface plus the two benchmark systems.

Particles are stored column-wise: a (d_x, N_p) matrix.  All sampling methods
are vectorized over particles and take an explicit PRNG stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionTooSmall,
    InvalidSpec,
    ZeroNoiseUnsupported,
)
from .linalg import cholesky_psd, sample_mvn
from .rng import RngStream

__all__ = [
    "NoiseCovSpec",
    "build_q",
    "StateSpaceModel",
    "LinearGaussianModel",
    "lorenz96_drift",
    "rk4_step",
    "Lorenz96Model",
]

_LOG_2PI = float(np.log(2.0 * np.pi))

# default block-size regimes of the time-varying benchmark (d_x = 100)
TIME_VARYING_SIZES = ((5, 9, 8, 12, 13, 7, 15, 14, 11, 6),
                      (8, 14, 11, 15, 12, 5, 13, 9, 6, 7))
TIME_VARYING_SWITCH = 26  # second regime applies from this time step on


@dataclass(frozen=True)
class NoiseCovSpec:
    """Declarative description of a state-noise covariance matrix."""

    kind: str  # identity_scaled | squared_exponential | block_diagonal_se | time_varying_blocks
    l: float | None = None  # squared-exponential length scale
    scale: float = 1.0  # variance for identity_scaled
    block_sizes: tuple = ()  # one size tuple per time regime
    switch_time: int = TIME_VARYING_SWITCH

    def __post_init__(self):
        kinds = ("identity_scaled", "squared_exponential", "block_diagonal_se",
                 "time_varying_blocks")
        if self.kind not in kinds:
            raise InvalidSpec(f"unknown noise kind {self.kind!r}")
        if self.kind != "identity_scaled" and (self.l is None or self.l <= 0):
            raise InvalidSpec("length scale l must be > 0")
        object.__setattr__(self, "block_sizes",
                           tuple(tuple(int(s) for s in reg) for reg in self.block_sizes))


def _se_matrix(d: int, l: float) -> np.ndarray:
    idx = np.arange(d)
    return np.exp(-((idx[:, None] - idx[None, :]) ** 2) / l)


def _block_diag_se(sizes, d_x: int, l: float) -> np.ndarray:
    if sum(sizes) != d_x:
        raise InvalidSpec(f"block sizes {sizes} do not sum to d_x={d_x}")
    q = np.zeros((d_x, d_x))
    start = 0
    for s in sizes:
        q[start : start + s, start : start + s] = _se_matrix(s, l)
        start += s
    return q


def build_q(spec: NoiseCovSpec, d_x: int, t: int = 1) -> np.ndarray:
    """State-noise covariance at time step t (1-based)."""
    if spec.kind == "identity_scaled":
        return spec.scale * np.eye(d_x)
    if spec.kind == "squared_exponential":
        return _se_matrix(d_x, spec.l)
    if spec.kind == "block_diagonal_se":
        if len(spec.block_sizes) != 1:
            raise InvalidSpec("block_diagonal_se takes exactly one size regime")
        return _block_diag_se(spec.block_sizes[0], d_x, spec.l)
    # time_varying_blocks
    sizes = spec.block_sizes or TIME_VARYING_SIZES
    if len(sizes) != 2:
        raise InvalidSpec("time_varying_blocks takes two size regimes")
    regime = sizes[1] if t >= spec.switch_time else sizes[0]
    return _block_diag_se(regime, d_x, spec.l)


def q_block_partition(spec: NoiseCovSpec, d_x: int, t: int = 1):
    """Index blocks of the (block-diagonal) Q at time t, or None if dense."""
    if spec.kind == "block_diagonal_se":
        sizes = spec.block_sizes[0]
    elif spec.kind == "time_varying_blocks":
        regs = spec.block_sizes or TIME_VARYING_SIZES
        sizes = regs[1] if t >= spec.switch_time else regs[0]
    else:
        return None
    bounds = np.cumsum((0,) + tuple(sizes))
    return tuple(tuple(range(bounds[k], bounds[k + 1])) for k in range(len(sizes)))


class StateSpaceModel:
    """Hidden Markov model with a component-wise factorized likelihood.

    Subclasses set d_x, d_y and implement the sampling methods plus
    ``log_factors``; ``log_factors(y, X)[n, i]`` is the log of the factor
    attached to state index n evaluated at particle i (0 for unobserved
    indices, so the factors multiply to the full likelihood).
    """

    d_x: int
    d_y: int

    def sample_initial(self, rng: RngStream, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample_transition(self, x_prev: np.ndarray, rng: RngStream, t: int = 1) -> np.ndarray:
        raise NotImplementedError

    def sample_observation(self, x: np.ndarray, rng: RngStream) -> np.ndarray:
        raise NotImplementedError

    def log_factors(self, y: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def observed_index_of(self, n: int) -> int | None:
        raise NotImplementedError

    def log_likelihood_factor(self, n: int, y: np.ndarray, x_n: float) -> float:
        """Log factor for one state index and one scalar particle component."""
        x = np.zeros((self.d_x, 1))
        x[n, 0] = x_n
        return float(self.log_factors(np.asarray(y, dtype=float), x)[n, 0])


class LinearGaussianModel(StateSpaceModel):
    """x_t = F x_{t-1} + w_t,  y_t = H x_t + v_t with Gaussian noises.

    The likelihood factorizes per component only for H = I and diagonal R,
    which is what the benchmarks use; other shapes are accepted for the
    Kalman oracle but rejected by ``log_factors``.
    """

    def __init__(self, d_x: int, f_mat=None, h_mat=None, noise_spec: NoiseCovSpec | None = None,
                 q=None, r=None, sigma0=None):
        self.d_x = int(d_x)
        eye = np.eye(self.d_x)
        self.F = eye if f_mat is None else np.asarray(f_mat, dtype=float)
        self.H = eye if h_mat is None else np.asarray(h_mat, dtype=float)
        self.R = eye if r is None else np.asarray(r, dtype=float)
        self.Sigma0 = eye if sigma0 is None else np.asarray(sigma0, dtype=float)
        self.noise_spec = noise_spec
        self._q_fixed = None if q is None else np.asarray(q, dtype=float)
        if self._q_fixed is None and noise_spec is None:
            raise InvalidSpec("provide either q or noise_spec")
        self.d_y = self.H.shape[0]
        for mat, shape, name in ((self.F, (d_x, d_x), "F"), (self.H, (self.d_y, d_x), "H"),
                                 (self.R, (self.d_y, self.d_y), "R"),
                                 (self.Sigma0, (d_x, d_x), "Sigma0")):
            if mat.shape != shape:
                raise DimensionMismatch(f"{name} has shape {mat.shape}, expected {shape}")
        if np.all(self.q_matrix(1) == 0) and np.all(self.R == 0):
            raise ZeroNoiseUnsupported("Q = R = 0 makes the likelihood degenerate")
        self._chol_cache: dict = {}
        self._chol_sigma0 = cholesky_psd(self.Sigma0)
        self._chol_r = cholesky_psd(self.R)

    def q_matrix(self, t: int) -> np.ndarray:
        if self._q_fixed is not None:
            return self._q_fixed
        return build_q(self.noise_spec, self.d_x, t)

    def q_partition(self, t: int):
        if self.noise_spec is None:
            return None
        return q_block_partition(self.noise_spec, self.d_x, t)

    def _chol_q(self, t: int) -> np.ndarray:
        if self._q_fixed is not None:
            key = "fixed"
        elif self.noise_spec.kind == "time_varying_blocks":
            key = t >= self.noise_spec.switch_time
        else:
            key = "static"
        if key not in self._chol_cache:
            self._chol_cache[key] = cholesky_psd(self.q_matrix(t))
        return self._chol_cache[key]

    def sample_initial(self, rng, n):
        return sample_mvn(np.zeros(self.d_x), self._chol_sigma0, rng, size=n)

    def sample_transition(self, x_prev, rng, t=1):
        noise = self._chol_q(t) @ rng.standard_normal(x_prev.shape)
        return self.F @ x_prev + noise

    def sample_observation(self, x, rng):
        v = self._chol_r @ rng.standard_normal(self.d_y)
        return self.H @ x + v

    def _check_factorizable(self):
        if not np.array_equal(self.H, np.eye(self.d_x)):
            raise InvalidSpec("factorized likelihood requires H = I")
        r_diag = np.diag(self.R)
        if not np.array_equal(self.R, np.diag(r_diag)) or np.any(r_diag <= 0):
            raise ZeroNoiseUnsupported("factorized likelihood requires diagonal R > 0")
        return r_diag

    def log_factors(self, y, x):
        r_diag = self._check_factorizable()
        resid = y[:, None] - x
        return -0.5 * (resid**2 / r_diag[:, None] + _LOG_2PI + np.log(r_diag)[:, None])

    def observed_index_of(self, n):
        return n


def lorenz96_drift(x: np.ndarray, forcing: float = 8.0) -> np.ndarray:
    """Right-hand side of the Lorenz 96 ODE with periodic indexing."""
    if x.shape[0] < 4:
        raise DimensionTooSmall("Lorenz 96 needs d_x >= 4")
    xp1 = np.roll(x, -1, axis=0)
    xm2 = np.roll(x, 2, axis=0)
    xm1 = np.roll(x, 1, axis=0)
    return (xp1 - xm2) * xm1 - x + forcing


def rk4_step(x: np.ndarray, dt: float, forcing: float = 8.0) -> np.ndarray:
    """One classical Runge-Kutta step of the Lorenz 96 flow."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    k1 = lorenz96_drift(x, forcing)
    k2 = lorenz96_drift(x + 0.5 * dt * k1, forcing)
    k3 = lorenz96_drift(x + 0.5 * dt * k2, forcing)
    k4 = lorenz96_drift(x + dt * k3, forcing)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class Lorenz96Model(StateSpaceModel):
    """Lorenz 96 dynamics, every other state variable observed with unit noise.

    The transition integrates one RK4 step and then adds state noise drawn
    from ``noise_spec`` (noise is applied after the integrator, not inside).
    """

    def __init__(self, d_x: int, noise_spec: NoiseCovSpec, forcing: float = 8.0,
                 obs_noise_var: float = 1.0, dt: float = 0.05, init_var: float = 0.01):
        if d_x % 2 != 0:
            raise InvalidSpec("the half-observed scheme needs an even d_x")
        if d_x < 4:
            raise DimensionTooSmall("Lorenz 96 needs d_x >= 4")
        self.d_x = int(d_x)
        self.d_y = self.d_x // 2
        self.forcing = float(forcing)
        self.dt = float(dt)
        self.obs_noise_var = float(obs_noise_var)
        self.init_var = float(init_var)
        self.noise_spec = noise_spec
        self._chol_q = cholesky_psd(build_q(noise_spec, d_x))
        self._obs_rows = np.arange(0, d_x, 2)  # state indices 1, 3, 5, ... (1-based)

    def q_matrix(self, t: int) -> np.ndarray:
        return build_q(self.noise_spec, self.d_x, t)

    def q_partition(self, t: int):
        return q_block_partition(self.noise_spec, self.d_x, t)

    def sample_initial(self, rng, n):
        return np.sqrt(self.init_var) * rng.standard_normal((self.d_x, n))

    def sample_transition(self, x_prev, rng, t=1):
        x_new = rk4_step(x_prev, self.dt, self.forcing)
        return x_new + self._chol_q @ rng.standard_normal(x_new.shape)

    def sample_observation(self, x, rng):
        return x[self._obs_rows] + np.sqrt(self.obs_noise_var) * rng.standard_normal(self.d_y)

    def log_factors(self, y, x):
        out = np.zeros_like(x)
        resid = y[:, None] - x[self._obs_rows]
        var = self.obs_noise_var
        out[self._obs_rows] = -0.5 * (resid**2 / var + _LOG_2PI + np.log(var))
        return out

    def observed_index_of(self, n):
        return n // 2 if n % 2 == 0 else None
