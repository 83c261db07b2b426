"""Closed-form ground-truth systems: energies, entropies, operators and
right-hand sides for the gas-container, thermoelastic double-pendulum and
Langevin benchmarks, plus the kernel certificates for their friction
operators.

Functions are written against a tiny dispatch shim so the same expressions
run on plain numpy arrays (data generation, certificates) and on tape
tensors (inside learned models that keep the analytic parts).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad


class DomainError(ValueError):
    """State left the problem domain; message names the violated constraint."""


def _is_tensor(x):
    return isinstance(x, ad.Tensor)


def _exp(x):
    return ad.exp(x) if _is_tensor(x) else np.exp(x)


def _log(x):
    return ad.log(x) if _is_tensor(x) else np.log(x)


def _sqrt(x):
    return ad.sqrt(x) if _is_tensor(x) else np.sqrt(x)


def _pow(x, p):
    return ad.power(x, p) if _is_tensor(x) else x ** p


def _stack_last(parts):
    if any(_is_tensor(p) for p in parts):
        return ad.stack_last([ad._as_tensor(p) for p in parts])
    return np.stack(np.broadcast_arrays(*parts), axis=-1)


def _concat_last(parts):
    if any(_is_tensor(p) for p in parts):
        return ad.concat([ad._as_tensor(p) for p in parts], axis=-1)
    return np.concatenate(parts, axis=-1)


def _sum_last(x):
    return ad.tsum(x, axis=-1) if _is_tensor(x) else np.sum(x, axis=-1)


def _comp(z, i):
    """Component i of a (..., d) state."""
    return z[..., i]


def _scatter(vals, rows, cols, dim):
    if any(_is_tensor(v) for v in vals):
        vec = _stack_last(vals)
        return ad.scatter_pairs(vec, np.asarray(rows), np.asarray(cols), dim)
    vals = np.broadcast_arrays(*vals)
    buf = np.zeros(vals[0].shape + (dim, dim))
    for v, r, c in zip(vals, rows, cols):
        buf[..., r, c] = v
    return buf


def _matvec(m, v):
    if _is_tensor(m) or _is_tensor(v):
        return ad.einsum("...ij,...j->...i", m, v)
    return np.einsum("...ij,...j->...i", m, v)


class GasContainer:
    """Two ideal-gas compartments exchanging heat and volume through a
    moving wall.  State z = (q, p, S1, S2); units m = N k_B = c_hat = 1."""

    name = "gas"
    dim = 4
    deterministic = True
    alpha = 10.0
    dt = 0.02
    n_steps = 400
    init_box = (np.array([0.2, -1.0, 1.0, 1.0]), np.array([1.8, 1.0, 3.0, 3.0]))

    def check_domain(self, z):
        q = z.value[..., 0] if _is_tensor(z) else np.asarray(z)[..., 0]
        if np.any(q <= 0.0) or np.any(q >= 2.0):
            raise DomainError("gas container requires 0 < q < 2")

    def _internal_energies(self, z):
        self.check_domain(z)  # fractional powers NaN silently otherwise
        q = _comp(z, 0)
        e1 = _exp((2.0 / 3.0) * _comp(z, 2)) * _pow(q, -2.0 / 3.0)
        e2 = _exp((2.0 / 3.0) * _comp(z, 3)) * _pow(2.0 - q, -2.0 / 3.0)
        return e1, e2

    def temperatures(self, z):
        e1, e2 = self._internal_energies(z)
        return (2.0 / 3.0) * e1, (2.0 / 3.0) * e2

    def energy(self, z):
        e1, e2 = self._internal_energies(z)
        p = _comp(z, 1)
        return 0.5 * p * p + e1 + e2

    def entropy(self, z):
        return _comp(z, 2) + _comp(z, 3)

    def grad_energy(self, z):
        q = _comp(z, 0)
        e1, e2 = self._internal_energies(z)
        dq = (-2.0 / 3.0) * e1 / q + (2.0 / 3.0) * e2 / (2.0 - q)
        return _stack_last([dq, _comp(z, 1), (2.0 / 3.0) * e1, (2.0 / 3.0) * e2])

    def grad_entropy(self, z):
        one = 1.0 + 0.0 * _comp(z, 2)
        return _stack_last([0.0 * one, 0.0 * one, one, one])

    def L_matrix(self, z=None):
        L = np.zeros((4, 4))
        L[0, 1], L[1, 0] = 1.0, -1.0
        return L

    def M_matrix(self, z):
        t1, t2 = self.temperatures(z)
        a = self.alpha
        return _scatter(
            [a / (t1 * t1), -a / (t1 * t2), -a / (t1 * t2), a / (t2 * t2)],
            [2, 2, 3, 3], [2, 3, 2, 3], 4)

    def rhs(self, z):
        gE = self.grad_energy(z)
        gS = self.grad_entropy(z)
        return _matvec(self.L_matrix(), gE) + _matvec(self.M_matrix(z), gS)

    def rhs_printed(self, z):
        """Component form as displayed, for self-consistency checks."""
        q, p = _comp(z, 0), _comp(z, 1)
        e1, e2 = self._internal_energies(z)
        t1, t2 = (2.0 / 3.0) * e1, (2.0 / 3.0) * e2
        heat = self.alpha * (1.0 / t1 - 1.0 / t2)
        return _stack_last([
            p,
            (2.0 / 3.0) * (e1 / q - e2 / (2.0 - q)),
            heat / t1,
            -heat / t2,
        ])

    def sample_initial(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo, hi = self.init_box
        return rng.uniform(lo, hi, size=(n, 4))


class DoublePendulum:
    """Thermoelastic double pendulum in the plane.
    State z = (q1, q2, p1, p2, S1, S2) with q_i, p_i in R^2."""

    name = "pendulum"
    dim = 10
    deterministic = True
    dt = 0.1
    n_steps = 400
    init_box = (
        np.array([0.9, -0.1, 2.1, -0.1, -0.1, 1.9, 0.9, -0.1, 0.9, 0.1]),
        np.array([1.1, 0.1, 2.3, 0.1, 0.1, 2.1, 1.1, 0.1, 1.1, 0.3]),
    )

    def check_domain(self, z):
        z = z.value if _is_tensor(z) else np.asarray(z)
        l1 = np.linalg.norm(z[..., 0:2], axis=-1)
        l2 = np.linalg.norm(z[..., 2:4] - z[..., 0:2], axis=-1)
        if np.any(l1 <= 0.0):
            raise DomainError("pendulum requires lambda_1 = |q1| > 0")
        if np.any(l2 <= 0.0):
            raise DomainError("pendulum requires lambda_2 = |q2 - q1| > 0")

    def _lengths(self, z):
        self.check_domain(z)  # log of the spring lengths below
        q1 = z[..., 0:2]
        d21 = z[..., 2:4] - q1
        l1 = _sqrt(_sum_last(q1 * q1))
        l2 = _sqrt(_sum_last(d21 * d21))
        return l1, l2

    def temperatures(self, z):
        l1, l2 = self._lengths(z)
        return _exp(_comp(z, 8)) / l1, _exp(_comp(z, 9)) / l2

    def internal_energy(self, z):
        l1, l2 = self._lengths(z)
        t1, t2 = self.temperatures(z)
        e1 = 0.5 * _log(l1) * _log(l1) + _log(l1) + t1 - 1.0
        e2 = 0.5 * _log(l2) * _log(l2) + _log(l2) + t2 - 1.0
        return e1 + e2

    def energy(self, z):
        p = z[..., 4:8]
        return 0.5 * _sum_last(p * p) + self.internal_energy(z)

    def entropy(self, z):
        return _comp(z, 8) + _comp(z, 9)

    def grad_energy(self, z):
        dq = self._grad_internal_q(z)
        t1, t2 = self.temperatures(z)
        return _concat_last([dq, z[..., 4:8], _stack_last([t1, t2])])

    def _grad_internal_q(self, z):
        # d(E1+E2)/d(q1, q2) through lambda_i; dE_i/dlambda_i = (log l + 1 - T_i)/l
        q1 = z[..., 0:2]
        d21 = z[..., 2:4] - q1
        l1, l2 = self._lengths(z)
        t1, t2 = self.temperatures(z)
        h1 = (_log(l1) + 1.0 - t1) / l1
        h2 = (_log(l2) + 1.0 - t2) / l2
        u1 = q1 * _stack_last([h1 / l1, h1 / l1])
        u2 = d21 * _stack_last([h2 / l2, h2 / l2])
        return _concat_last([u1 - u2, u2])

    def grad_entropy(self, z):
        one = 1.0 + 0.0 * _comp(z, 8)
        zero = 0.0 * one
        return _stack_last([zero] * 8 + [one, one])

    def L_matrix(self, z=None):
        L = np.zeros((10, 10))
        L[0:2, 4:6] = np.eye(2)
        L[2:4, 6:8] = np.eye(2)
        L[4:6, 0:2] = -np.eye(2)
        L[6:8, 2:4] = -np.eye(2)
        return L

    def M_matrix(self, z):
        t1, t2 = self.temperatures(z)
        mones = -1.0 + 0.0 * t1
        return _scatter([t2 / t1, mones, mones, t1 / t2],
                        [8, 8, 9, 9], [8, 9, 8, 9], 10)

    def rhs(self, z):
        gE = self.grad_energy(z)
        gS = self.grad_entropy(z)
        return _matvec(self.L_matrix(), gE) + _matvec(self.M_matrix(z), gS)

    def rhs_printed(self, z):
        t1, t2 = self.temperatures(z)
        dq = self._grad_internal_q(z)
        return _concat_last([
            z[..., 4:8],
            -1.0 * dq,
            _stack_last([t2 / t1 - 1.0, t1 / t2 - 1.0]),
        ])

    def sample_initial(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo, hi = self.init_box
        return rng.uniform(lo, hi, size=(n, 10))


class LangevinParticle:
    """Diffusing particle with environment entropy.
    State z = (q, p, S_e); k_B = 1; friction operator has rank 1."""

    name = "langevin"
    dim = 3
    deterministic = False
    k_boltzmann = 1.0
    dt = 0.004
    n_steps = 250
    n_wiener = 1
    init_mean = np.array([0.0, 2.0, 0.0])
    init_std = 0.4

    def check_domain(self, z):
        pass  # whole of R^3

    def energy(self, z):
        p = _comp(z, 1)
        return 0.5 * p * p + _comp(z, 2)

    def entropy(self, z):
        return _comp(z, 2)

    def grad_energy(self, z):
        p = _comp(z, 1)
        return _stack_last([0.0 * p, p, 1.0 + 0.0 * p])

    def grad_entropy(self, z):
        p = _comp(z, 1)
        zero = 0.0 * p
        return _stack_last([zero, zero, 1.0 + zero])

    def L_matrix(self, z=None):
        L = np.zeros((3, 3))
        L[0, 1], L[1, 0] = 1.0, -1.0
        return L

    def M_matrix(self, z):
        p = _comp(z, 1)
        half = 0.5 + 0.0 * p
        return _scatter([half, -0.5 * p, -0.5 * p, 0.5 * p * p],
                        [1, 1, 2, 2], [1, 2, 1, 2], 3)

    def sigma(self, z):
        """Noise amplitude (..., 3, 1); sigma sigma^T = 2 k_B M exactly."""
        p = _comp(z, 1)
        col = _stack_last([0.0 * p, 1.0 + 0.0 * p, -p])
        if _is_tensor(col):
            return ad.reshape(col, col.shape + (1,))
        return col[..., None]

    def divergence_M(self, z):
        """(d/dz) . M, rows differentiated against matching coordinates.
        Only dM_32/dp survives; this value is what keeps the Ito energy
        balance dE = 0 exact along sample paths."""
        p = _comp(z, 1)
        zero = 0.0 * p
        return _stack_last([zero, zero, zero - 0.5])

    def drift(self, z):
        gE = self.grad_energy(z)
        gS = self.grad_entropy(z)
        rev = _matvec(self.L_matrix(), gE)
        irr = _matvec(self.M_matrix(z), gS)
        return rev + irr + self.k_boltzmann * self.divergence_M(z)

    # deterministic part only; used when treating the problem without noise
    def rhs(self, z):
        gE = self.grad_energy(z)
        gS = self.grad_entropy(z)
        return _matvec(self.L_matrix(), gE) + _matvec(self.M_matrix(z), gS)

    def sample_initial(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.init_mean, self.init_std, size=(n, 3))


PROBLEMS = {
    "gas": GasContainer(),
    "pendulum": DoublePendulum(),
    "langevin": LangevinParticle(),
}


def get_problem(name: str):
    try:
        return PROBLEMS[name]
    except KeyError:
        raise DomainError(
            f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}")


class CertificateError(AssertionError):
    """A kernel-certificate identity failed; message names the identity."""


def kernel_certificate(problem_name: str, z: np.ndarray, tol: float = 1e-10,
                       grad_fm_override=None) -> dict:
    """Verify the friction-kernel structure at states `z` (batched).

    Checks (i) M b = 0 for every listed kernel basis vector, (ii) the listed
    basis is linearly independent and the orthonormal variant is orthonormal,
    (iii) rank(M) + n_M = d, and (iv) the energy-gradient factorization
    through the kernel transform.  Raises CertificateError naming the first
    violated identity; returns the per-check residuals otherwise.
    """
    from .transforms import kernel_transform

    problem = get_problem(problem_name)
    if problem.name not in ("gas", "pendulum"):
        raise DomainError("kernel certificates exist for gas and pendulum only")
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    problem.check_domain(z)
    tr = kernel_transform(problem.name, "M")

    M = np.asarray(problem.M_matrix(z))
    d = problem.dim
    gF = tr.grad_fm(z) if grad_fm_override is None else grad_fm_override(z)

    fixed = tr.ker_inv_basis  # (d, n_tilde) constant columns
    basis = np.concatenate(
        [np.broadcast_to(fixed.T, z.shape[:-1] + fixed.T.shape), gF[..., None, :]],
        axis=-2)  # (..., n_A, d)

    report = {}
    resid = np.einsum("...ij,...kj->...ki", M, basis)
    report["kernel_membership"] = float(np.max(np.abs(resid)))

    # independence via the smallest singular value of the stacked basis
    smin = np.linalg.svd(basis, compute_uv=False)[..., -1]
    report["basis_independence_smin"] = float(np.min(smin))

    t1, t2 = problem.temperatures(z)
    scale = np.sqrt(t1 ** 2 + t2 ** 2)
    qhat = np.zeros_like(basis[..., 0, :])
    qhat[..., d - 2] = t1 / scale
    qhat[..., d - 1] = t2 / scale
    ortho = np.concatenate([basis[..., :-1, :], qhat[..., None, :]], axis=-2)
    gram = np.einsum("...ij,...kj->...ik", ortho, ortho)
    eye = np.eye(ortho.shape[-2])
    report["orthonormality"] = float(np.max(np.abs(gram - eye)))

    rank = np.linalg.matrix_rank(M, tol=1e-8)
    report["rank_plus_kernel"] = int(np.max(rank + basis.shape[-2]))

    gE = np.asarray(problem.grad_energy(z))
    jac_t = np.concatenate(
        [np.broadcast_to(fixed[None, ...], z.shape[:-1] + fixed.shape),
         gF[..., :, None]], axis=-1)  # (..., d, n_A) = [Q~ | grad F_M]
    coeff = tr.c_factor(z)
    recon = np.einsum("...ij,...j->...i", jac_t, coeff)
    rel = np.abs(recon - gE) / (1.0 + np.abs(gE))
    report["energy_factorization"] = float(np.max(rel))

    failures = []
    if report["kernel_membership"] > tol:
        failures.append(f"M b = 0 violated: {report['kernel_membership']:.3e}")
    if report["basis_independence_smin"] < 1e-8:
        failures.append("kernel basis is numerically dependent")
    if report["orthonormality"] > 1e-12:
        failures.append(f"orthonormal basis check: {report['orthonormality']:.3e}")
    if report["rank_plus_kernel"] != d or int(np.min(rank + basis.shape[-2])) != d:
        failures.append(f"rank(M) + n_M != d ({report['rank_plus_kernel']} vs {d})")
    if report["energy_factorization"] > tol:
        failures.append(
            f"gradE factorization violated: {report['energy_factorization']:.3e}")
    if failures:
        raise CertificateError("; ".join(failures))
    return report
