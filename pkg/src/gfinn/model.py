"""Assembly of structure-preserving surrogate models.

A model is four components: scalar generators E and S and matrix operators
L (skew) and M (symmetric PSD), each either analytic or learned.  The three
supported configurations are

  case 1  — L, M analytic; E, S are scalar nets composed with the kernel
            transforms, so A grad G = 0 holds by the input layer;
  case 2a — E, S analytic; L, M are built from skew banks applied to the
            analytic gradients plus triangular nets;
  case 2b — everything learned; L, M are built from the learned gradients.

The operator construction Q_G^T B Q_G inherits its null space from the rows
(S_j grad G)^T, so both degeneracy conditions hold for every parameter
value, and the stochastic pieces reuse the same factors, which makes
sigma sigma^T = 2 k_B M an identity rather than a constraint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autodiff as ad
from .nets import (ConfigError, MlpSpec, ParamStore, SkewBank, TriangularNet,
                   mlp_init, mlp_scalar)
from .problems import get_problem
from .transforms import TransformPA, kernel_transform

CASES = ("1", "2a", "2b")


@dataclass(frozen=True)
class ScalarComponent:
    """Energy or entropy: analytic, transform-composed net, or plain net."""

    role: str                    # "E" or "S"
    kind: str                    # "analytic" | "case1" | "plain"
    prefix: Optional[str] = None
    spec: Optional[MlpSpec] = None
    transform: Optional[TransformPA] = None

    def value(self, leaves, z, problem):
        if self.kind == "analytic":
            return (problem.energy if self.role == "E" else problem.entropy)(z)
        x = self.transform(z) if self.kind == "case1" else z
        return mlp_scalar(leaves, self.prefix, self.spec, x)

    def value_and_grad(self, leaves, z, problem):
        """Scalar (...,) plus gradient (..., d); both stay on the tape."""
        if self.kind == "analytic":
            g = (problem.grad_energy if self.role == "E"
                 else problem.grad_entropy)(z)
            return self.value(leaves, z, problem), g
        val = self.value(leaves, z, problem)
        total = ad.tsum(val)
        (g,) = ad.grad(total, [z])
        return val, g


@dataclass(frozen=True)
class OperatorComponent:
    """Poisson or friction operator: analytic, or spectral-style net."""

    role: str                    # "L" or "M"
    kind: str                    # "analytic" | "case2"
    bank: Optional[SkewBank] = None
    tri: Optional[TriangularNet] = None
    bank_prefix: Optional[str] = None
    tri_prefix: Optional[str] = None

    def _l_pieces(self, leaves, z, grad_partner):
        q = self.bank.apply(leaves, self.bank_prefix, grad_partner)
        t = self.tri.matrix(leaves, self.tri_prefix, z)
        return q, ad.sub(ad.swap_last2(t), t)       # skew-symmetric core

    def m_root(self, leaves, z, grad_partner) -> ad.Tensor:
        """Factor R = T_M Q with M = R^T R; sigma reuses R verbatim, which
        is what makes sigma sigma^T = 2 k_B M exact to roundoff."""
        q = self.bank.apply(leaves, self.bank_prefix, grad_partner)
        t = self.tri.matrix(leaves, self.tri_prefix, z)
        return ad.einsum("...kl,...ld->...kd", t, q)

    def matrix(self, leaves, z, grad_partner, problem):
        if self.kind == "analytic":
            mat = (problem.L_matrix(z) if self.role == "L"
                   else problem.M_matrix(z))
            if isinstance(mat, np.ndarray) and not isinstance(mat, ad.Tensor):
                if isinstance(z, ad.Tensor) and mat.ndim == 2:
                    mat = ad.constant(mat)
            return mat
        if self.role == "L":
            q, core = self._l_pieces(leaves, z, grad_partner)
            return ad.einsum("...ki,...kl,...lj->...ij", q, core, q)
        root = self.m_root(leaves, z, grad_partner)
        return ad.einsum("...ki,...kj->...ij", root, root)

    def apply(self, leaves, z, grad_partner, vector, problem):
        """Operator applied to `vector` without materializing d x d."""
        if self.kind == "analytic":
            mat = self.matrix(leaves, z, grad_partner, problem)
            return ad.einsum("...ij,...j->...i", mat, vector) \
                if isinstance(mat, ad.Tensor) or isinstance(vector, ad.Tensor) \
                else np.einsum("...ij,...j->...i", mat, vector)
        if self.role == "L":
            q, core = self._l_pieces(leaves, z, grad_partner)
            qv = ad.einsum("...kd,...d->...k", q, vector)
            return ad.einsum("...kd,...kl,...l->...d", q, core, qv)
        root = self.m_root(leaves, z, grad_partner)
        rv = ad.einsum("...kd,...d->...k", root, vector)
        return ad.einsum("...kd,...k->...d", root, rv)


class GenericModel:
    """Four components plus the case tag and fluctuation scale k_B."""

    def __init__(self, problem_name: str, case: str, e_comp, s_comp,
                 l_comp, m_comp, k_boltzmann: float = 1.0):
        if case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {case!r}")
        expect = {
            "1": ("case1", "analytic"),
            "2a": ("analytic", "case2"),
            "2b": ("plain", "case2"),
        }[case]
        if (e_comp.kind, l_comp.kind) != expect or \
           (s_comp.kind, m_comp.kind) != expect:
            raise ConfigError(
                f"component kinds {e_comp.kind}/{l_comp.kind} do not match case {case}")
        if k_boltzmann <= 0:
            raise ConfigError("k_boltzmann must be positive")
        self.problem = get_problem(problem_name)
        self.problem_name = problem_name
        self.case = case
        self.e_comp, self.s_comp = e_comp, s_comp
        self.l_comp, self.m_comp = l_comp, m_comp
        self.k_boltzmann = float(k_boltzmann)

    # ---------------- scalar surfaces ----------------

    def energy(self, leaves, z):
        return self.e_comp.value(leaves, z, self.problem)

    def entropy(self, leaves, z):
        return self.s_comp.value(leaves, z, self.problem)

    def grad_energy(self, leaves, z):
        return self.e_comp.value_and_grad(leaves, z, self.problem)[1]

    def grad_entropy(self, leaves, z):
        return self.s_comp.value_and_grad(leaves, z, self.problem)[1]

    # ---------------- operators ----------------

    def l_matrix(self, leaves, z):
        _, gS = self.s_comp.value_and_grad(leaves, z, self.problem)
        return self.l_comp.matrix(leaves, z, gS, self.problem)

    def m_matrix(self, leaves, z):
        _, gE = self.e_comp.value_and_grad(leaves, z, self.problem)
        return self.m_comp.matrix(leaves, z, gE, self.problem)

    # ---------------- dynamics ----------------

    def rhs(self, leaves, z):
        """Deterministic right-hand side L grad E + M grad S."""
        _, gE = self.e_comp.value_and_grad(leaves, z, self.problem)
        _, gS = self.s_comp.value_and_grad(leaves, z, self.problem)
        rev = self.l_comp.apply(leaves, z, gS, gE, self.problem)
        irr = self.m_comp.apply(leaves, z, gE, gS, self.problem)
        return ad.add(rev, irr)

    def rhs_fn(self, store: ParamStore):
        """Plain state-to-state callable over fresh single-use tapes."""
        def f(z_np):
            leaves = store.leaves()
            z = ad.tensor(np.asarray(z_np))
            return self.rhs(leaves, z).value
        return f

    def divergence_m(self, leaves, z):
        """(d/dz) . M as tape nodes (exact; differentiable again)."""
        if self.m_comp.kind == "analytic":
            div = getattr(self.problem, "divergence_M", None)
            if div is None:
                raise ConfigError(
                    f"analytic M of {self.problem_name!r} has no registered divergence")
            return div(z)
        _, gE = self.e_comp.value_and_grad(leaves, z, self.problem)
        mat = self.m_comp.matrix(leaves, z, gE, self.problem)
        return self._divergence_of(mat, z)

    def _divergence_of(self, mat, z):
        """Row-wise divergence sum_k dM_{:,k}/dz_k via forward tangents."""
        cols = []
        for k in range(self.problem.dim):
            tangent = np.zeros(z.shape)
            tangent[..., k] = 1.0
            dm = ad.jvp(mat, z, tangent)
            cols.append(dm[..., :, k])
        total = cols[0]
        for c in cols[1:]:
            total = ad.add(total, c)
        return total

    def mu_sigma(self, leaves, z):
        """Drift with divergence correction, and the noise factor (...,d,K).

        sigma is the transposed product of the triangular factor with the
        skew-bank rows, the same factor R that builds M = R^T R and the
        divergence graph, so the fluctuation-dissipation identity holds to
        roundoff by construction and no factor is computed twice.
        """
        _, gE = self.e_comp.value_and_grad(leaves, z, self.problem)
        _, gS = self.s_comp.value_and_grad(leaves, z, self.problem)
        rev = self.l_comp.apply(leaves, z, gS, gE, self.problem)
        if self.m_comp.kind == "analytic":
            if not hasattr(self.problem, "sigma"):
                raise ConfigError(
                    f"analytic M of {self.problem_name!r} has no noise factor")
            irr = self.m_comp.apply(leaves, z, gE, gS, self.problem)
            div = self.divergence_m(leaves, z)
            sigma = self.problem.sigma(z)
        else:
            root = self.m_comp.m_root(leaves, z, gE)
            rv = ad.einsum("...kd,...d->...k", root, gS)
            irr = ad.einsum("...kd,...k->...d", root, rv)
            mat = ad.einsum("...ki,...kj->...ij", root, root)
            div = self._divergence_of(mat, z)
            sigma = ad.mul(ad.swap_last2(root),
                           np.sqrt(2.0 * self.k_boltzmann))
        mu = ad.add(ad.add(rev, irr), ad.mul(div, self.k_boltzmann))
        return mu, sigma

    def mu_sigma_fn(self, store: ParamStore):
        def f(z_np):
            leaves = store.leaves()
            z = ad.tensor(np.asarray(z_np))
            mu, sigma = self.mu_sigma(leaves, z)
            mu = mu.value if isinstance(mu, ad.Tensor) else np.asarray(mu)
            sigma = sigma.value if isinstance(sigma, ad.Tensor) else np.asarray(sigma)
            return mu, sigma
        return f


def build_gfinn(problem_name: str, case: str, *,
                e_hidden=(30, 30, 30, 30), s_hidden=(30, 30, 30, 30),
                l_hidden=(30, 30, 30, 30), m_hidden=(30, 30, 30, 30),
                k_l: int = 5, k_m: int = 4, k_boltzmann: float = 1.0,
                seed: int = 0):
    """Construct model plus freshly initialized parameters.

    Hidden tuples follow the convention "n layers" = n affine maps, so a
    5-layer width-30 net passes hidden=(30, 30, 30, 30).  k_l and k_m are
    the skew-bank sizes for the L and M operators; they bound the operator
    rank from above, so they must not be below the rank of the target.
    """
    if case not in CASES:
        raise ConfigError(f"case must be one of {CASES}, got {case!r}")
    problem = get_problem(problem_name)
    d = problem.dim
    rng = np.random.default_rng(seed)
    store = ParamStore()
    store.meta.update({"problem": problem_name, "case": case,
                       "k_boltzmann": k_boltzmann, "seed": seed,
                       "kind": "gfinn"})

    if case == "1":
        tr_m = kernel_transform(problem_name, "M")
        tr_l = kernel_transform(problem_name, "L")
        e_spec = MlpSpec((tr_m.n_out,) + tuple(e_hidden) + (1,))
        s_spec = MlpSpec((tr_l.n_out,) + tuple(s_hidden) + (1,))
        mlp_init(store, "E", e_spec, rng)
        mlp_init(store, "S", s_spec, rng)
        e_comp = ScalarComponent("E", "case1", "E", e_spec, tr_m)
        s_comp = ScalarComponent("S", "case1", "S", s_spec, tr_l)
        l_comp = OperatorComponent("L", "analytic")
        m_comp = OperatorComponent("M", "analytic")
    else:
        if case == "2a":
            e_comp = ScalarComponent("E", "analytic")
            s_comp = ScalarComponent("S", "analytic")
        else:
            e_spec = MlpSpec((d,) + tuple(e_hidden) + (1,))
            s_spec = MlpSpec((d,) + tuple(s_hidden) + (1,))
            mlp_init(store, "E", e_spec, rng)
            mlp_init(store, "S", s_spec, rng)
            e_comp = ScalarComponent("E", "plain", "E", e_spec)
            s_comp = ScalarComponent("S", "plain", "S", s_spec)
        bank_l = SkewBank(k_l, d)
        bank_m = SkewBank(k_m, d)
        tri_l = TriangularNet.build(k_l, d, tuple(l_hidden))
        tri_m = TriangularNet.build(k_m, d, tuple(m_hidden))
        bank_l.init(store, "L.bank", rng)
        tri_l.init(store, "L.tri", rng)
        bank_m.init(store, "M.bank", rng)
        tri_m.init(store, "M.tri", rng)
        l_comp = OperatorComponent("L", "case2", bank_l, tri_l, "L.bank", "L.tri")
        m_comp = OperatorComponent("M", "case2", bank_m, tri_m, "M.bank", "M.tri")

    model = GenericModel(problem_name, case, e_comp, s_comp, l_comp, m_comp,
                         k_boltzmann=k_boltzmann)
    return model, store
