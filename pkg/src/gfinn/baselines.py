"""Comparison methods: bracket-parameterized operators (GNODE), soft-penalty
training of generators under known operators (SPNN), and unconstrained
drift/diffusion networks (SDENet).
"""

from __future__ import annotations

from itertools import combinations, permutations

import numpy as np

from . import autodiff as ad
from .nets import ConfigError, MlpSpec, ParamStore, mlp_apply, mlp_init, mlp_scalar
from .problems import get_problem
from .training import mse_loss


def antisymmetric_expansion(d: int) -> tuple[np.ndarray, int]:
    """Constant (d^3, n_free) matrix expanding canonical entries xi_{a<b<g}
    into a fully antisymmetric 3-tensor (sign per permutation parity)."""
    combos = list(combinations(range(d), 3))
    expand = np.zeros((d * d * d, len(combos)))
    for col, combo in enumerate(combos):
        for perm in permutations(range(3)):
            sign = 1.0 if _parity(perm) == 0 else -1.0
            a, b, g = (combo[perm[0]], combo[perm[1]], combo[perm[2]])
            expand[(a * d + b) * d + g, col] = sign
    return expand, len(combos)


def _parity(perm) -> int:
    inversions = sum(1 for i in range(len(perm))
                     for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return inversions % 2


class GnodeModel:
    """Operators from bracket algebra: L contracts an antisymmetric 3-tensor
    with grad S, and M is a PSD quadratic form of skew images of grad E, so
    the symmetry and degeneracy conditions hold for any parameter values.
    """

    def __init__(self, problem_name: str, case: str, n_skew: int | None = None,
                 e_spec: MlpSpec | None = None, s_spec: MlpSpec | None = None):
        if case not in ("2a", "2b"):
            raise ConfigError("bracket parameterization applies to case 2 only")
        self.problem = get_problem(problem_name)
        self.problem_name = problem_name
        self.case = case
        d = self.problem.dim
        if d < 3:
            raise ConfigError("antisymmetric 3-tensor needs dimension >= 3")
        self.n_skew = n_skew if n_skew is not None else d
        self.e_spec, self.s_spec = e_spec, s_spec
        self._expand, self.n_xi = antisymmetric_expansion(d)
        self._triu = np.triu_indices(d, k=1)

    def init_params(self, rng: np.random.Generator) -> ParamStore:
        store = ParamStore()
        store.meta.update({"problem": self.problem_name, "case": self.case,
                           "kind": "gnode"})
        d = self.problem.dim
        scale = 1.0 / d
        store.add("gnode.xi", rng.uniform(-scale, scale, size=self.n_xi))
        store.add("gnode.lam", rng.uniform(
            -scale, scale, size=(self.n_skew, d * (d - 1) // 2)))
        store.add("gnode.C", rng.uniform(
            -scale, scale, size=(self.n_skew, self.n_skew)))
        if self.case == "2b":
            mlp_init(store, "E", self.e_spec, rng)
            mlp_init(store, "S", self.s_spec, rng)
        return store

    def grads(self, leaves, z):
        if self.case == "2a":
            return self.problem.grad_energy(z), self.problem.grad_entropy(z)
        gs = []
        for prefix, spec in (("E", self.e_spec), ("S", self.s_spec)):
            val = mlp_scalar(leaves, prefix, spec, z)
            (g,) = ad.grad(ad.tsum(val), [z])
            gs.append(g)
        return gs[0], gs[1]

    def _xi_full(self, leaves):
        d = self.problem.dim
        flat = ad.einsum("ij,j->i", ad.constant(self._expand), leaves["gnode.xi"])
        return ad.reshape(flat, (d, d, d))

    def _lam_full(self, leaves):
        d = self.problem.dim
        rows, cols = self._triu
        upper = ad.scatter_pairs(leaves["gnode.lam"], rows, cols, d)
        return ad.sub(upper, ad.swap_last2(upper))

    def operators(self, leaves, z):
        """(L, M) at z; batched (..., d, d)."""
        gE, gS = self.grads(leaves, z)
        xi = self._xi_full(leaves)
        L = ad.einsum("abg,...g->...ab", xi, gS)
        lam = self._lam_full(leaves)
        w = ad.einsum("mab,...b->...ma", lam, gE)
        D = ad.einsum("km,kn->mn", leaves["gnode.C"], leaves["gnode.C"])
        M = ad.einsum("mn,...ma,...nb->...ab", D, w, w)
        return L, M

    def rhs(self, leaves, z):
        gE, gS = self.grads(leaves, z)
        L, M = self.operators(leaves, z)
        return ad.add(ad.einsum("...ab,...b->...a", L, gE),
                      ad.einsum("...ab,...b->...a", M, gS))

    def rhs_fn(self, store: ParamStore):
        def f(z_np):
            return self.rhs(store.leaves(), ad.tensor(np.asarray(z_np))).value
        return f


def build_gnode(problem_name: str, case: str, *, e_hidden=(30, 30, 30, 30),
                s_hidden=(30, 30, 30, 30), n_skew: int | None = None,
                seed: int = 0):
    problem = get_problem(problem_name)
    d = problem.dim
    e_spec = MlpSpec((d,) + tuple(e_hidden) + (1,)) if case == "2b" else None
    s_spec = MlpSpec((d,) + tuple(s_hidden) + (1,)) if case == "2b" else None
    model = GnodeModel(problem_name, case, n_skew=n_skew,
                       e_spec=e_spec, s_spec=s_spec)
    store = model.init_params(np.random.default_rng(seed))
    store.meta["seed"] = seed
    return model, store


class SpnnModel:
    """Known operators, learned generators, degeneracy enforced only through
    a penalty: plain scalar nets with no kernel transform in front."""

    def __init__(self, problem_name: str, e_spec: MlpSpec, s_spec: MlpSpec,
                 penalty: float = 0.1):
        if penalty <= 0:
            raise ConfigError("soft penalty weight must be positive")
        self.problem = get_problem(problem_name)
        self.problem_name = problem_name
        self.e_spec, self.s_spec = e_spec, s_spec
        self.penalty = float(penalty)

    def init_params(self, rng: np.random.Generator) -> ParamStore:
        store = ParamStore()
        store.meta.update({"problem": self.problem_name, "kind": "spnn",
                           "penalty": self.penalty})
        mlp_init(store, "E", self.e_spec, rng)
        mlp_init(store, "S", self.s_spec, rng)
        return store

    def grads(self, leaves, z):
        gs = []
        for prefix, spec in (("E", self.e_spec), ("S", self.s_spec)):
            val = mlp_scalar(leaves, prefix, spec, z)
            (g,) = ad.grad(ad.tsum(val), [z])
            gs.append(g)
        return gs[0], gs[1]

    def rhs(self, leaves, z):
        gE, gS = self.grads(leaves, z)
        L = ad.constant(self.problem.L_matrix())
        M = self.problem.M_matrix(z)
        return ad.add(ad.einsum("ab,...b->...a", L, gE),
                      ad.einsum("...ab,...b->...a", M, gS))

    def rhs_fn(self, store: ParamStore):
        def f(z_np):
            return self.rhs(store.leaves(), ad.tensor(np.asarray(z_np))).value
        return f

    def degeneracy_residuals(self, leaves, z):
        """Mean squared |L grad S| and |M grad E| at the given states."""
        gE, gS = self.grads(leaves, z)
        L = ad.constant(self.problem.L_matrix())
        M = self.problem.M_matrix(z)
        ls = ad.einsum("ab,...b->...a", L, gS)
        me = ad.einsum("...ab,...b->...a", M, gE)
        return (ad.tmean(ad.tsum(ad.mul(ls, ls), axis=-1)),
                ad.tmean(ad.tsum(ad.mul(me, me), axis=-1)))


def spnn_loss(model: SpnnModel, leaves, z_prev, z_next, dt: float,
              order: int = 2, penalty: float | None = None) -> ad.Tensor:
    """Trajectory MSE plus the weighted degeneracy penalty at observed states.

    With the weight at zero the value reduces to the plain trajectory loss;
    the penalty vanishes exactly when both residuals vanish on the batch.
    """
    lam = model.penalty if penalty is None else penalty
    base = mse_loss(lambda w: model.rhs(leaves, w), z_prev, z_next, dt, order)
    if lam == 0.0:
        return base
    ls, me = model.degeneracy_residuals(leaves, ad.tensor(np.asarray(z_prev)))
    return ad.add(base, ad.mul(ad.add(ls, me), lam))


def build_spnn(problem_name: str, *, e_hidden=(30, 30, 30, 30),
               s_hidden=(30, 30, 30, 30), penalty: float = 0.1, seed: int = 0):
    d = get_problem(problem_name).dim
    model = SpnnModel(problem_name,
                      MlpSpec((d,) + tuple(e_hidden) + (1,)),
                      MlpSpec((d,) + tuple(s_hidden) + (1,)),
                      penalty=penalty)
    store = model.init_params(np.random.default_rng(seed))
    store.meta["seed"] = seed
    return model, store


class SdeNetModel:
    """Independent drift and diffusion networks; no structural constraints,
    so sigma sigma^T grad E need not vanish (the negative control)."""

    def __init__(self, problem_name: str, mu_spec: MlpSpec, sigma_spec: MlpSpec,
                 n_wiener: int):
        self.problem = get_problem(problem_name)
        self.problem_name = problem_name
        self.mu_spec, self.sigma_spec = mu_spec, sigma_spec
        self.n_wiener = n_wiener

    def init_params(self, rng: np.random.Generator) -> ParamStore:
        store = ParamStore()
        store.meta.update({"problem": self.problem_name, "kind": "sdenet",
                           "n_wiener": self.n_wiener})
        mlp_init(store, "mu", self.mu_spec, rng)
        mlp_init(store, "sigma", self.sigma_spec, rng)
        return store

    def mu_sigma(self, leaves, z):
        d = self.problem.dim
        mu = mlp_apply(leaves, "mu", self.mu_spec, z)
        flat = mlp_apply(leaves, "sigma", self.sigma_spec, z)
        sigma = ad.reshape(flat, flat.shape[:-1] + (d, self.n_wiener))
        return mu, sigma

    def mu_sigma_fn(self, store: ParamStore):
        def f(z_np):
            mu, sigma = self.mu_sigma(store.leaves(), ad.tensor(np.asarray(z_np)))
            return mu.value, sigma.value
        return f


def build_sdenet(problem_name: str, *, mu_hidden=(30, 30, 30, 30),
                 sigma_hidden=(30, 30, 30, 30), n_wiener: int | None = None,
                 seed: int = 0):
    problem = get_problem(problem_name)
    d = problem.dim
    k = n_wiener if n_wiener is not None else d
    model = SdeNetModel(problem_name,
                        MlpSpec((d,) + tuple(mu_hidden) + (d,)),
                        MlpSpec((d,) + tuple(sigma_hidden) + (d * k,)),
                        n_wiener=k)
    store = model.init_params(np.random.default_rng(seed))
    store.meta["seed"] = seed
    return model, store
