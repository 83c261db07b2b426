"""Explicit Runge-Kutta steppers and the Euler-Maruyama scheme.

`rk_step` is generic over numpy arrays and tape tensors: training losses
push tensors through it so gradients flow through every stage, while
rollouts and data generation use plain arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import DomainError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = t0 + j dt for j = 0..n_steps."""

    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("TimeGrid requires dt > 0")
        if self.n_steps < 1:
            raise ValueError("TimeGrid requires at least one step")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * self.n_steps

    def refined(self, substeps: int) -> "TimeGrid":
        return TimeGrid(self.t0, self.dt / substeps, self.n_steps * substeps)


def _stage(f, z, tag):
    try:
        return f(z)
    except DomainError as err:
        raise DomainError(f"{tag}: {err}") from err


def rk_step(f, z, dt, order: int = 4):
    """One explicit step z -> z'.  Orders: 2 midpoint, 3 Kutta, 4 classical."""
    if order == 2:
        k1 = _stage(f, z, "RK2 stage 1")
        k2 = _stage(f, z + k1 * (dt / 2.0), "RK2 stage 2")
        return z + k2 * dt
    if order == 3:
        k1 = _stage(f, z, "RK3 stage 1")
        k2 = _stage(f, z + k1 * (dt / 2.0), "RK3 stage 2")
        k3 = _stage(f, z + k2 * (2.0 * dt) - k1 * dt, "RK3 stage 3")
        return z + (k1 + k2 * 4.0 + k3) * (dt / 6.0)
    if order == 4:
        k1 = _stage(f, z, "RK4 stage 1")
        k2 = _stage(f, z + k1 * (dt / 2.0), "RK4 stage 2")
        k3 = _stage(f, z + k2 * (dt / 2.0), "RK4 stage 3")
        k4 = _stage(f, z + k3 * dt, "RK4 stage 4")
        return z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    raise ValueError(f"unsupported Runge-Kutta order {order}")


def rollout(f, z0: np.ndarray, grid: TimeGrid, order: int = 4,
            substeps: int = 1) -> np.ndarray:
    """Free-running trajectory from z0; returns (..., n_steps+1, d)."""
    z = np.asarray(z0, dtype=np.float64)
    states = [z]
    h = grid.dt / substeps
    for _ in range(grid.n_steps):
        for _ in range(substeps):
            z = rk_step(f, z, h, order)
        states.append(z)
    return np.stack(states, axis=-2)


def teacher_forced(f, observed: np.ndarray, dt: float, order: int = 4) -> np.ndarray:
    """One step from each observed state: predictions for t_1..t_T.

    observed has shape (..., T+1, d); the result (..., T, d) lines up with
    observed[..., 1:, :], which is exactly how per-step training residuals
    are defined.
    """
    prev = np.asarray(observed)[..., :-1, :]
    return rk_step(f, prev, dt, order)


def euler_maruyama(mu_sigma, z0: np.ndarray, grid: TimeGrid, seed: int,
                   n_wiener: int, substeps: int = 1,
                   path_offset: int = 0) -> np.ndarray:
    """Sample paths z_{j+1} = z_j + dt mu(z_j) + sigma(z_j) sqrt(dt) xi_j.

    Path i draws its increments from an independent stream keyed by
    (seed, path_offset + i), so results are reproducible no matter how the
    batch of paths is split across workers.
    """
    z = np.atleast_2d(np.asarray(z0, dtype=np.float64)).copy()
    n_paths, _ = z.shape
    total = grid.n_steps * substeps
    noise = np.stack([
        np.random.default_rng([seed, path_offset + i])
        .standard_normal((total, n_wiener))
        for i in range(n_paths)
    ], axis=0)
    h = grid.dt / substeps
    root_h = np.sqrt(h)
    out = [z.copy()]
    step = 0
    for _ in range(grid.n_steps):
        for _ in range(substeps):
            mu, sigma = mu_sigma(z)
            z = z + h * np.asarray(mu) \
                + root_h * np.einsum("ndk,nk->nd", np.asarray(sigma), noise[:, step])
            step += 1
        out.append(z.copy())
    states = np.stack(out, axis=1)
    return states if np.asarray(z0).ndim > 1 else states[0]
