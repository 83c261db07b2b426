"""Structure-preserving learning of deterministic and stochastic dynamics
under the GENERIC formalism: surrogate models whose reversible and
irreversible operators satisfy the symmetry and degeneracy conditions by
construction, trained from trajectory data."""

from .base import BaseEstimator, NotFittedError
from .datasets import TrajectorySet, generate_dataset
from .estimators import (GfinnDynamics, GnodeDynamics, SdeNetDynamics,
                         SpnnDynamics)
from .integrators import TimeGrid, euler_maruyama, rk_step, rollout
from .metrics import (AffineCalibration, EvalReport, GaussianKde, calibrate,
                      sliced_w2, sliced_w2_over_time, test_mse)
from .model import GenericModel, build_gfinn
from .nets import MlpSpec, ParamStore, SkewBank, TriangularNet
from .problems import get_problem, kernel_certificate
from .training import Adam, mse_loss, nll_loss, train_loop

__version__ = "0.1.0"

__all__ = [
    "Adam", "AffineCalibration", "BaseEstimator", "EvalReport",
    "GaussianKde", "GenericModel", "GfinnDynamics", "GnodeDynamics",
    "MlpSpec", "NotFittedError", "ParamStore", "SdeNetDynamics", "SkewBank",
    "SpnnDynamics", "TimeGrid", "TrajectorySet", "TriangularNet",
    "build_gfinn", "calibrate", "euler_maruyama", "generate_dataset",
    "get_problem", "kernel_certificate", "mse_loss", "nll_loss", "rk_step",
    "rollout", "sliced_w2", "sliced_w2_over_time", "test_mse", "train_loop",
]
