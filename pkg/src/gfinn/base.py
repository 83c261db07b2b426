"""Estimator plumbing: parameter introspection in the scikit-learn style
plus input validation helpers shared by the trainable dynamics models."""

from __future__ import annotations

import inspect

import numpy as np

from .problems import get_problem


class BaseEstimator:
    """get_params/set_params over __init__ keywords; learned state carries a
    trailing underscore and never appears in the constructor."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p.name for p in sig.parameters.values()
                if p.name != "self" and p.kind == p.POSITIONAL_OR_KEYWORD]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(
                    f"invalid parameter {key!r} for {type(self).__name__}; "
                    f"valid options: {sorted(valid)}")
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    def _check_fitted(self, attr: str):
        if not hasattr(self, attr):
            raise NotFittedError(
                f"{type(self).__name__} must be fitted before this call")


class NotFittedError(RuntimeError):
    pass


def check_states(z, dim: int | None = None) -> np.ndarray:
    """Validate a batch of states: finite float64, shape (n, d)."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2:
        raise ValueError(f"states must be (n, d); got shape {z.shape}")
    if dim is not None and z.shape[1] != dim:
        raise ValueError(f"states have dimension {z.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(z)):
        raise ValueError("states contain NaN or Inf")
    return z


def check_trajectories(data, problem_name: str):
    """Validate a TrajectorySet against the estimator's problem tag."""
    from .datasets import TrajectorySet

    if not isinstance(data, TrajectorySet):
        raise TypeError("fit expects a TrajectorySet")
    if data.problem != problem_name:
        raise ValueError(
            f"dataset is for problem {data.problem!r}, estimator is set to "
            f"{problem_name!r}")
    if data.dim != get_problem(problem_name).dim:
        raise ValueError("dataset dimension does not match the problem")
    return data
