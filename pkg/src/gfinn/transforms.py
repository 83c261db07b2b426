"""Kernel-confining input transforms.

For an operator A with constant-rank kernel, the transform maps the state
into coordinates whose Jacobian rows span ker A(z): a fixed orthonormal
block (state components whose basis vectors are constant in z) plus
closed-form scalar functions whose gradients supply the remaining kernel
directions.  A scalar network composed with such a transform automatically
satisfies A(z) grad G(z) = 0.

Transforms are registered per (problem, operator); they are closed forms
taken from the benchmark systems, not discovered at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .problems import get_problem


@dataclass(frozen=True)
class TransformPA:
    """Closed-form kernel transform for one (problem, operator) pair."""

    problem: str
    operator: str                       # "L" or "M"
    ker_inv_idx: tuple                  # state components forming Q~^T z
    f_scalar: Optional[Callable] = None  # F_A(z): dual numpy/tensor, scalar
    grad_fm: Optional[Callable] = None   # closed-form grad F_A (numpy)
    c_factor: Optional[Callable] = None  # coefficient functions for grad E
    ker_inv_basis: np.ndarray = field(init=False, repr=False)
    dim: int = field(init=False)

    def __post_init__(self):
        d = get_problem(self.problem).dim
        basis = np.zeros((d, len(self.ker_inv_idx)))
        for col, i in enumerate(self.ker_inv_idx):
            basis[i, col] = 1.0
        object.__setattr__(self, "ker_inv_basis", basis)
        object.__setattr__(self, "dim", d)

    @property
    def n_out(self) -> int:
        return len(self.ker_inv_idx) + (0 if self.f_scalar is None else 1)

    def __call__(self, z):
        """P_A(z): (..., d) -> (..., n_A); raises DomainError outside domain."""
        prob = get_problem(self.problem)
        zv = z.value if isinstance(z, ad.Tensor) else np.asarray(z)
        prob.check_domain(zv)
        idx = list(self.ker_inv_idx)
        proj = z[..., idx] if isinstance(z, ad.Tensor) else np.asarray(z)[..., idx]
        if self.f_scalar is None:
            return proj
        f = self.f_scalar(z)
        if isinstance(z, ad.Tensor):
            return ad.concat([proj, ad.reshape(f, f.shape + (1,))], axis=-1)
        return np.concatenate([proj, np.asarray(f)[..., None]], axis=-1)

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        """Rows [Q~^T; J F_A] at z, shape (..., n_A, d)."""
        z = np.asarray(z, dtype=np.float64)
        rows = np.broadcast_to(self.ker_inv_basis.T, z.shape[:-1]
                               + self.ker_inv_basis.T.shape)
        if self.f_scalar is None:
            return np.array(rows)
        g = self.grad_fm(z)
        return np.concatenate([rows, g[..., None, :]], axis=-2)


def _gas_fm(z):
    e1, e2 = get_problem("gas")._internal_energies(z)
    return e1 + e2


def _gas_grad_fm(z):
    prob = get_problem("gas")
    q = z[..., 0]
    e1, e2 = prob._internal_energies(z)
    t3 = (-2.0 / 3.0) * e1 / q + (2.0 / 3.0) * e2 / (2.0 - q)
    return np.stack(np.broadcast_arrays(
        t3, 0.0 * t3, (2.0 / 3.0) * e1, (2.0 / 3.0) * e2), axis=-1)


def _gas_c(z):
    p = z[..., 1]
    return np.stack(np.broadcast_arrays(0.0 * p, p, 1.0 + 0.0 * p), axis=-1)


def _dp_fm(z):
    return get_problem("pendulum").internal_energy(z)


def _dp_grad_fm(z):
    prob = get_problem("pendulum")
    dq = prob._grad_internal_q(z)
    t1, t2 = prob.temperatures(z)
    zeros = np.zeros(z[..., 4:8].shape)
    return np.concatenate(
        [dq, zeros, np.stack(np.broadcast_arrays(t1, t2), axis=-1)], axis=-1)


def _dp_c(z):
    zeros = np.zeros(z[..., 0:4].shape)
    ones = np.ones(z[..., 0:1].shape)
    return np.concatenate([zeros, z[..., 4:8], ones], axis=-1)


def _lg_fm(z):
    return get_problem("langevin").energy(z)


def _lg_grad_fm(z):
    return np.asarray(get_problem("langevin").grad_energy(z))


def _lg_c(z):
    p = z[..., 1]
    return np.stack(np.broadcast_arrays(0.0 * p, 1.0 + 0.0 * p), axis=-1)


_REGISTRY = {
    # constant Poisson operators: kernels are fixed entropy slots
    ("gas", "L"): TransformPA("gas", "L", ker_inv_idx=(2, 3)),
    ("pendulum", "L"): TransformPA("pendulum", "L", ker_inv_idx=(8, 9)),
    ("langevin", "L"): TransformPA("langevin", "L", ker_inv_idx=(2,)),
    # friction operators: fixed block plus one scalar kernel function
    ("gas", "M"): TransformPA("gas", "M", ker_inv_idx=(0, 1),
                              f_scalar=_gas_fm, grad_fm=_gas_grad_fm,
                              c_factor=_gas_c),
    ("pendulum", "M"): TransformPA("pendulum", "M",
                                   ker_inv_idx=tuple(range(8)),
                                   f_scalar=_dp_fm, grad_fm=_dp_grad_fm,
                                   c_factor=_dp_c),
    ("langevin", "M"): TransformPA("langevin", "M", ker_inv_idx=(0,),
                                   f_scalar=_lg_fm, grad_fm=_lg_grad_fm,
                                   c_factor=_lg_c),
}


def kernel_transform(problem: str, operator: str) -> TransformPA:
    """Registered transform confining scalar-net gradients to ker A."""
    try:
        return _REGISTRY[(problem, operator)]
    except KeyError:
        raise KeyError(f"no kernel transform registered for {(problem, operator)}")
