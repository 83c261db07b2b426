"""Loss assembly, Adam, and the minibatch training loop.

Losses are built on single-use tapes per minibatch: the trajectory loss
takes one teacher-forced integrator step from each observed state, the
transition likelihood is a multivariate Gaussian whose covariance comes
from the model's own noise factor (so the fluctuation-dissipation identity
is baked into the objective).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .integrators import rk_step
from .nets import ParamStore


class NumericalError(FloatingPointError):
    """Loss or gradient became non-finite; message carries the iteration."""


def mse_loss(rhs, z_prev: np.ndarray, z_next: np.ndarray, dt: float,
             order: int = 2, substeps: int = 1) -> ad.Tensor:
    """Mean squared one-step residual, teacher forced.

    `rhs` maps a state tensor to its time derivative on the same tape.
    The mean is over transitions; the square is the full Euclidean norm,
    not divided by the state dimension.  `substeps` applies the integrator
    that many times across each observed interval, which shrinks the
    discretization bias the learned field would otherwise absorb.
    """
    if len(z_prev) == 0:
        raise ValueError("mse_loss: empty batch")
    zhat = ad.tensor(np.asarray(z_prev))
    for _ in range(substeps):
        zhat = rk_step(rhs, zhat, dt / substeps, order)
    diff = ad.sub(zhat, ad.constant(np.asarray(z_next)))
    return ad.tmean(ad.tsum(ad.mul(diff, diff), axis=-1))


def gaussian_transition_nll(delta: np.ndarray, mean: ad.Tensor,
                            cov0: ad.Tensor,
                            jitter_scale: float = 1e-6) -> ad.Tensor:
    """Mean negative log density of N(delta; mean, cov0 + eps I).

    The friction operator can be singular, so a diagonal jitter
    eps = jitter_scale * (1 + trace(cov0)/d) regularizes the density.
    """
    d = delta.shape[-1]
    rows = np.arange(d)
    trace = ad.tsum(ad.gather_pairs(cov0, rows, rows), axis=-1)
    eps = ad.mul(ad.add(1.0, ad.mul(trace, 1.0 / d)), jitter_scale)
    eye = ad.constant(np.eye(d))
    cov = ad.add(cov0, ad.mul(eye, ad.reshape(eps, eps.shape + (1, 1))))
    r = ad.sub(ad.constant(np.asarray(delta)), mean)
    quad = ad.einsum("...i,...ij,...j->...", r, ad.matinv(cov), r)
    per = ad.mul(ad.add(ad.add(ad.logdet(cov), quad), d * np.log(2.0 * np.pi)), 0.5)
    return ad.tmean(per)


def nll_loss(mu_sigma, z_prev: np.ndarray, z_next: np.ndarray, dt: float,
             jitter_scale: float = 1e-6) -> ad.Tensor:
    """Transition NLL with mean dt*mu and covariance dt*sigma sigma^T.

    For structure-preserving models dt*sigma sigma^T equals
    2 k_B dt M by construction, which is the stated density.
    """
    if len(z_prev) == 0:
        raise ValueError("nll_loss: empty batch")
    zp = ad.tensor(np.asarray(z_prev))
    mu, sigma = mu_sigma(zp)
    cov0 = ad.mul(ad.einsum("...ik,...jk->...ij", sigma, sigma), dt)
    mean = ad.mul(mu, dt)
    delta = np.asarray(z_next) - np.asarray(z_prev)
    return gaussian_transition_nll(delta, mean, cov0, jitter_scale)


class Adam:
    """Bias-corrected Adam on the flat parameter vector, epsilon outside
    the square root."""

    def __init__(self, n_params: int, learning_rate: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        if not np.all(np.isfinite(grad)):
            raise NumericalError("NaN or Inf in gradient")
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        params -= self.learning_rate * mhat / (np.sqrt(vhat) + self.eps)


class TransitionSampler:
    """Uniform minibatches over flattened (z_prev, z_next) pairs."""

    def __init__(self, z_prev: np.ndarray, z_next: np.ndarray,
                 batch_size: int | None, seed: int):
        self.z_prev = np.asarray(z_prev)
        self.z_next = np.asarray(z_next)
        if len(self.z_prev) != len(self.z_next) or len(self.z_prev) == 0:
            raise ValueError("transition arrays must be nonempty and aligned")
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)

    def __call__(self):
        if self.batch_size is None or self.batch_size >= len(self.z_prev):
            return self.z_prev, self.z_next
        idx = self.rng.integers(0, len(self.z_prev), size=self.batch_size)
        return self.z_prev[idx], self.z_next[idx]


@dataclass
class TrainRun:
    """Outcome of one optimization run."""

    seed: int
    iterations: int
    history: list = field(default_factory=list)  # rows (iteration, loss, wall_ms)
    final_loss: float = float("nan")
    wall_time_s: float = 0.0
    store: ParamStore = None

    def history_array(self) -> np.ndarray:
        return np.asarray(self.history, dtype=np.float64).reshape(-1, 3)


def train_loop(loss_fn, store: ParamStore, sampler, n_iterations: int,
               learning_rate: float = 0.001, seed: int = 0,
               log_every: int = 100, invariant_check=None,
               check_every: int = 1000) -> TrainRun:
    """Minimize `loss_fn(leaves, z_prev, z_next)` over the store's parameters.

    Records (iteration, loss, wall_ms) every `log_every` iterations and runs
    `invariant_check(store)` every `check_every` (structure is architectural,
    so this is a tripwire, not a projection).  Any non-finite loss aborts
    with the iteration index.
    """
    run = TrainRun(seed=seed, iterations=n_iterations, store=store)
    opt = Adam(store.size, learning_rate=learning_rate)
    t0 = time.perf_counter()
    loss_value = float("nan")
    for it in range(n_iterations):
        zp, zn = sampler()
        leaves = store.leaves()
        loss = loss_fn(leaves, zp, zn)
        loss_value = float(loss.value)
        if not np.isfinite(loss_value):
            raise NumericalError(f"loss became non-finite at iteration {it}")
        grads = ad.grad(loss, list(leaves.values()))
        flat = store.grad_vector(leaves, grads)
        try:
            opt.step(store.flat, flat)
        except NumericalError as err:
            raise NumericalError(f"{err} at iteration {it}") from err
        if it % log_every == 0:
            run.history.append(
                (it, loss_value, 1000.0 * (time.perf_counter() - t0)))
        if invariant_check is not None and check_every and \
                (it + 1) % check_every == 0:
            invariant_check(store)
    run.final_loss = loss_value
    run.wall_time_s = time.perf_counter() - t0
    return run


def loss_gradient(loss_fn, store: ParamStore, z_prev, z_next):
    """(value, flat gradient) pair for finite-difference verification."""
    leaves = store.leaves()
    loss = loss_fn(leaves, z_prev, z_next)
    grads = ad.grad(loss, list(leaves.values()))
    return float(loss.value), store.grad_vector(leaves, grads)


def fd_harness(loss_fn, store: ParamStore, z_prev, z_next):
    """Adapter for `autodiff.fd_check` over the flat parameter vector."""
    def fn(theta):
        probe = store.copy()
        probe.flat[:] = theta
        return loss_gradient(loss_fn, probe, z_prev, z_next)
    return fn


def gradient_fd_error(loss_fn, store: ParamStore, z_prev, z_next,
                      step: float = 1e-5) -> float:
    """Norm-wise relative error max_i |g_i - fd_i| / (max_i |g_i| + 1e-12).

    Loss gradients mix coordinates across many orders of magnitude and the
    central-difference floor is eps*|loss|/step, so a per-coordinate
    quotient saturates at roundoff no matter how exact the tape is; the
    gradient-norm denominator is the scale at which correctness is
    decidable in 64-bit arithmetic.
    """
    fn = fd_harness(loss_fn, store, z_prev, z_next)
    point = store.flat.copy()
    _, analytic = fn(point)
    worst = 0.0
    for i in range(point.size):
        shift = np.zeros_like(point)
        shift[i] = step
        up, _ = fn(point + shift)
        dn, _ = fn(point - shift)
        fd = (up - dn) / (2.0 * step)
        worst = max(worst, abs(analytic[i] - fd))
    return worst / (np.max(np.abs(analytic)) + 1e-12)
