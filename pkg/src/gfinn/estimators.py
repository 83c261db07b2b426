"""Trainable dynamics models with a fit/predict surface.

Each estimator wraps one method (structure-preserving model, bracket
baseline, soft-penalty baseline, or unconstrained SDE nets), learns from a
TrajectorySet, and predicts by free-running integration from given initial
states.  Constructor arguments are hyperparameters only; everything learned
lands in underscore-suffixed attributes.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .base import BaseEstimator, check_states, check_trajectories
from .baselines import build_gnode, build_sdenet, build_spnn, spnn_loss
from .datasets import TrajectorySet
from .integrators import TimeGrid, euler_maruyama, rollout
from .model import build_gfinn
from .nets import ConfigError, ParamStore
from .problems import get_problem
from .training import TransitionSampler, mse_loss, nll_loss, train_loop


class _DynamicsEstimator(BaseEstimator):
    """Shared fit/predict machinery; subclasses build method-specific models."""

    def _build(self):
        raise NotImplementedError

    def _loss(self, leaves, z_prev, z_next, dt):
        raise NotImplementedError

    def _stochastic(self) -> bool:
        return not get_problem(self.problem).deterministic

    def fit(self, data: TrajectorySet):
        check_trajectories(data, self.problem)
        self.model_, self.store_ = self._build()
        zp, zn = data.transitions("train")
        sampler = TransitionSampler(zp, zn, self.batch_size, seed=self.seed)
        dt = data.grid.dt
        run = train_loop(
            lambda leaves, a, b: self._loss(leaves, a, b, dt),
            self.store_, sampler, self.n_iterations,
            learning_rate=self.learning_rate, seed=self.seed,
            log_every=self.log_every,
            invariant_check=self._invariant_check(data),
            check_every=self.check_every)
        self.run_ = run
        self.history_ = run.history_array()
        self.dt_ = dt
        return self

    def _invariant_check(self, data):
        return None

    def predict(self, z0, grid: TimeGrid, order: int = 4) -> np.ndarray:
        """Deterministic free-running trajectories from each initial state."""
        self._check_fitted("model_")
        z0 = check_states(z0, get_problem(self.problem).dim)
        return rollout(self._rhs_fn(), z0, grid, order=order)

    def _rhs_fn(self):
        return self.model_.rhs_fn(self.store_)

    def save(self, path):
        self._check_fitted("store_")
        self.store_.save(path)


class GfinnDynamics(_DynamicsEstimator):
    """Structure-preserving surrogate for one benchmark problem.

    The case tag picks what is learned: "1" learns the generators under
    known operators, "2a" learns the operators under known generators,
    "2b" learns all four components.
    """

    def __init__(self, problem="gas", case="2a", e_hidden=(20, 20),
                 s_hidden=(20, 20), l_hidden=(20, 20), m_hidden=(20, 20),
                 k_l=5, k_m=4, k_boltzmann=1.0, n_iterations=1000,
                 batch_size=100, learning_rate=0.001, integrator_order=2,
                 integrator_substeps=1, jitter_scale=1e-6, seed=0,
                 log_every=100, check_every=1000):
        self.problem = problem
        self.case = case
        self.e_hidden = e_hidden
        self.s_hidden = s_hidden
        self.l_hidden = l_hidden
        self.m_hidden = m_hidden
        self.k_l = k_l
        self.k_m = k_m
        self.k_boltzmann = k_boltzmann
        self.n_iterations = n_iterations
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.integrator_order = integrator_order
        self.integrator_substeps = integrator_substeps
        self.jitter_scale = jitter_scale
        self.seed = seed
        self.log_every = log_every
        self.check_every = check_every

    def _build(self):
        return build_gfinn(
            self.problem, self.case, e_hidden=tuple(self.e_hidden),
            s_hidden=tuple(self.s_hidden), l_hidden=tuple(self.l_hidden),
            m_hidden=tuple(self.m_hidden), k_l=self.k_l, k_m=self.k_m,
            k_boltzmann=self.k_boltzmann, seed=self.seed)

    def _loss(self, leaves, z_prev, z_next, dt):
        if self._stochastic():
            return nll_loss(lambda w: self.model_.mu_sigma(leaves, w),
                            z_prev, z_next, dt, jitter_scale=self.jitter_scale)
        return mse_loss(lambda w: self.model_.rhs(leaves, w),
                        z_prev, z_next, dt, order=self.integrator_order,
                        substeps=self.integrator_substeps)

    def _invariant_check(self, data):
        probe = data.train_states()[:, 0, :][:64]

        def check(store: ParamStore):
            residuals = self.structural_residuals(probe, store=store)
            worst = max(residuals["degeneracy_l"], residuals["degeneracy_m"])
            if worst > 1e-10:
                raise FloatingPointError(
                    f"structural degeneracy drifted to {worst:.3e}")
        return check

    def structural_residuals(self, z, store: ParamStore | None = None) -> dict:
        """Scaled degeneracy/symmetry residuals of the current model."""
        self._check_fitted("model_")
        store = store if store is not None else self.store_
        leaves = store.leaves()
        zt = ad.tensor(check_states(z, get_problem(self.problem).dim))
        model = self.model_
        L = model.l_matrix(leaves, zt)
        M = model.m_matrix(leaves, zt)
        L = L.value if isinstance(L, ad.Tensor) else np.broadcast_to(
            L, zt.shape[:-1] + L.shape)
        M = M.value if isinstance(M, ad.Tensor) else np.asarray(M)
        gE = model.grad_energy(leaves, zt)
        gS = model.grad_entropy(leaves, zt)
        gE = gE.value if isinstance(gE, ad.Tensor) else np.asarray(gE)
        gS = gS.value if isinstance(gS, ad.Tensor) else np.asarray(gS)
        scale_s = 1.0 + np.linalg.norm(gS, axis=-1)
        scale_e = 1.0 + np.linalg.norm(gE, axis=-1)
        return {
            "skewness": float(np.max(np.abs(L + np.swapaxes(L, -1, -2)))),
            "min_eig_m": float(np.min(np.linalg.eigvalsh(M))),
            "degeneracy_l": float(np.max(
                np.abs(np.einsum("...ij,...j->...i", L, gS))
                / scale_s[..., None])),
            "degeneracy_m": float(np.max(
                np.abs(np.einsum("...ij,...j->...i", M, gE))
                / scale_e[..., None])),
        }

    def energy(self, z) -> np.ndarray:
        self._check_fitted("model_")
        zt = ad.tensor(check_states(z, get_problem(self.problem).dim))
        out = self.model_.energy(self.store_.leaves(), zt)
        return out.value if isinstance(out, ad.Tensor) else np.asarray(out)

    def entropy(self, z) -> np.ndarray:
        self._check_fitted("model_")
        zt = ad.tensor(check_states(z, get_problem(self.problem).dim))
        out = self.model_.entropy(self.store_.leaves(), zt)
        return out.value if isinstance(out, ad.Tensor) else np.asarray(out)

    def sample_paths(self, z0, grid: TimeGrid, seed: int = 0) -> np.ndarray:
        """Euler-Maruyama paths of the learned stochastic dynamics."""
        self._check_fitted("model_")
        if not self._stochastic():
            raise ConfigError(f"problem {self.problem!r} is deterministic")
        z0 = check_states(z0, get_problem(self.problem).dim)
        fn = self.model_.mu_sigma_fn(self.store_)
        k = 1 if self.case == "1" else self.k_m
        return euler_maruyama(fn, z0, grid, seed=seed, n_wiener=k)


class GnodeDynamics(_DynamicsEstimator):
    """Bracket-parameterized baseline (case 2 only)."""

    def __init__(self, problem="gas", case="2b", e_hidden=(20, 20),
                 s_hidden=(20, 20), n_skew=None, n_iterations=1000,
                 batch_size=100, learning_rate=0.001, integrator_order=2,
                 seed=0, log_every=100, check_every=1000):
        self.problem = problem
        self.case = case
        self.e_hidden = e_hidden
        self.s_hidden = s_hidden
        self.n_skew = n_skew
        self.n_iterations = n_iterations
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.integrator_order = integrator_order
        self.seed = seed
        self.log_every = log_every
        self.check_every = check_every

    def _build(self):
        return build_gnode(self.problem, self.case,
                           e_hidden=tuple(self.e_hidden),
                           s_hidden=tuple(self.s_hidden),
                           n_skew=self.n_skew, seed=self.seed)

    def _loss(self, leaves, z_prev, z_next, dt):
        return mse_loss(lambda w: self.model_.rhs(leaves, w),
                        z_prev, z_next, dt, order=self.integrator_order)


class SpnnDynamics(_DynamicsEstimator):
    """Soft-penalty baseline: known operators, penalized degeneracy."""

    def __init__(self, problem="gas", penalty=0.1, e_hidden=(20, 20),
                 s_hidden=(20, 20), n_iterations=1000, batch_size=100,
                 learning_rate=0.001, integrator_order=2, seed=0,
                 log_every=100, check_every=1000):
        self.problem = problem
        self.penalty = penalty
        self.e_hidden = e_hidden
        self.s_hidden = s_hidden
        self.n_iterations = n_iterations
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.integrator_order = integrator_order
        self.seed = seed
        self.log_every = log_every
        self.check_every = check_every

    def _build(self):
        return build_spnn(self.problem, e_hidden=tuple(self.e_hidden),
                          s_hidden=tuple(self.s_hidden),
                          penalty=self.penalty, seed=self.seed)

    def _loss(self, leaves, z_prev, z_next, dt):
        return spnn_loss(self.model_, leaves, z_prev, z_next, dt,
                         order=self.integrator_order)


class SdeNetDynamics(_DynamicsEstimator):
    """Unconstrained drift/diffusion nets; stochastic problems only."""

    def __init__(self, problem="langevin", mu_hidden=(20, 20),
                 sigma_hidden=(20, 20), n_wiener=None, n_iterations=1000,
                 batch_size=100, learning_rate=0.001, jitter_scale=1e-6,
                 seed=0, log_every=100, check_every=1000):
        self.problem = problem
        self.mu_hidden = mu_hidden
        self.sigma_hidden = sigma_hidden
        self.n_wiener = n_wiener
        self.n_iterations = n_iterations
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.jitter_scale = jitter_scale
        self.seed = seed
        self.log_every = log_every
        self.check_every = check_every

    def _build(self):
        if get_problem(self.problem).deterministic:
            raise ConfigError(
                "drift/diffusion nets apply to the stochastic problem only")
        return build_sdenet(self.problem, mu_hidden=tuple(self.mu_hidden),
                            sigma_hidden=tuple(self.sigma_hidden),
                            n_wiener=self.n_wiener, seed=self.seed)

    def _loss(self, leaves, z_prev, z_next, dt):
        return nll_loss(lambda w: self.model_.mu_sigma(leaves, w),
                        z_prev, z_next, dt, jitter_scale=self.jitter_scale)

    def _rhs_fn(self):
        fn = self.model_.mu_sigma_fn(self.store_)
        return lambda z: fn(z)[0]  # drift skeleton

    def sample_paths(self, z0, grid: TimeGrid, seed: int = 0) -> np.ndarray:
        self._check_fitted("model_")
        z0 = check_states(z0, get_problem(self.problem).dim)
        fn = self.model_.mu_sigma_fn(self.store_)
        return euler_maruyama(fn, z0, grid, seed=seed,
                              n_wiener=self.model_.n_wiener)


ESTIMATORS = {
    "gfinn": GfinnDynamics,
    "gnode": GnodeDynamics,
    "spnn": SpnnDynamics,
    "sdenet": SdeNetDynamics,
}
