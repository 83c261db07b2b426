import numpy as np
import pytest

from gfinn import autodiff as ad
from gfinn.model import GenericModel, OperatorComponent, ScalarComponent, build_gfinn
from gfinn.nets import ConfigError, ParamStore
from gfinn.problems import get_problem

ARCH_SMALL = dict(e_hidden=(10, 10), s_hidden=(10, 10),
                  l_hidden=(10, 10), m_hidden=(10, 10))


def _states(name, seed, n):
    return get_problem(name).sample_initial(np.random.default_rng(seed), n)


def test_case1_constant_head_gives_zero_gradient():
    model, store = build_gfinn("gas", "1", **ARCH_SMALL, seed=0)
    # zero all weights: f is constant, so grad G must vanish identically
    store.flat[:] = 0.0
    leaves = store.leaves()
    z = ad.tensor(_states("gas", 0, 8))
    g = model.grad_energy(leaves, z)
    assert np.allclose(g.value, 0.0)


@pytest.mark.parametrize("name", ["gas", "pendulum", "langevin"])
def test_case1_degeneracy_both_sides(name):
    prob = get_problem(name)
    z = _states(name, 1, 1000)
    worst_l, worst_m = 0.0, 0.0
    for seed in range(5):
        model, store = build_gfinn(name, "1", **ARCH_SMALL, seed=seed)
        leaves = store.leaves()
        zt = ad.tensor(z)
        gS = model.grad_entropy(leaves, zt).value
        gE = model.grad_energy(leaves, zt).value
        L = prob.L_matrix()
        M = np.asarray(prob.M_matrix(z))
        res_l = np.abs(gS @ L.T)
        res_m = np.abs(np.einsum("bij,bj->bi", M, gE))
        worst_l = max(worst_l, float(np.max(res_l / (1 + np.linalg.norm(gS, axis=-1, keepdims=True)))))
        worst_m = max(worst_m, float(np.max(res_m / (1 + np.linalg.norm(gE, axis=-1, keepdims=True)))))
    assert worst_l <= 1e-12
    assert worst_m <= 1e-10


@pytest.mark.parametrize("name,case", [
    ("gas", "2a"), ("gas", "2b"),
    ("pendulum", "2a"), ("pendulum", "2b"),
    ("langevin", "2a"), ("langevin", "2b"),
])
def test_case2_operator_classes_and_degeneracy(name, case):
    prob = get_problem(name)
    z = _states(name, 2, 300)
    for seed in range(3):
        model, store = build_gfinn(name, case, **ARCH_SMALL, seed=seed)
        leaves = store.leaves()
        zt = ad.tensor(z)
        L = model.l_matrix(leaves, zt).value
        M = model.m_matrix(leaves, zt).value
        gE = np.asarray(model.grad_energy(leaves, zt).value
                        if isinstance(model.grad_energy(leaves, zt), ad.Tensor)
                        else model.grad_energy(leaves, zt))
        gS = model.grad_entropy(leaves, zt)
        gS = gS.value if isinstance(gS, ad.Tensor) else np.asarray(gS)
        assert np.max(np.abs(L + np.swapaxes(L, -1, -2))) <= 1e-13
        assert np.min(np.linalg.eigvalsh(M)) >= -1e-10
        nrm_s = 1 + np.linalg.norm(gS, axis=-1, keepdims=True)
        nrm_e = 1 + np.linalg.norm(gE, axis=-1, keepdims=True)
        assert np.max(np.abs(np.einsum("bij,bj->bi", L, gS)) / nrm_s) <= 1e-11
        assert np.max(np.abs(np.einsum("bij,bj->bi", M, gE)) / nrm_e) <= 1e-11


def test_case2_zero_gradient_gives_zero_operator():
    model, store = build_gfinn("gas", "2b", **ARCH_SMALL, seed=3)
    # zero E/S nets => grad G = 0 => Q rows vanish => A = 0
    for name in store.names():
        if name.startswith(("E.", "S.")):
            store.view(name)[:] = 0.0
    leaves = store.leaves()
    z = ad.tensor(_states("gas", 3, 16))
    assert np.allclose(model.l_matrix(leaves, z).value, 0.0)
    assert np.allclose(model.m_matrix(leaves, z).value, 0.0)


def test_case2_matrix_vs_factored_apply():
    model, store = build_gfinn("pendulum", "2b", **ARCH_SMALL, seed=4)
    leaves = store.leaves()
    z = ad.tensor(_states("pendulum", 4, 20))
    gE = model.grad_energy(leaves, z)
    gS = model.grad_entropy(leaves, z)
    L = model.l_matrix(leaves, z).value
    M = model.m_matrix(leaves, z).value
    lv = model.l_comp.apply(leaves, z, gS, gE, model.problem).value
    mv = model.m_comp.apply(leaves, z, gE, gS, model.problem).value
    assert np.max(np.abs(lv - np.einsum("bij,bj->bi", L, gE.value))) <= 1e-12
    assert np.max(np.abs(mv - np.einsum("bij,bj->bi", M, gS.value))) <= 1e-12


@pytest.mark.parametrize("case", ["1", "2a", "2b"])
def test_energy_conserved_entropy_produced_along_model_flow(case):
    # exact identities at the vector-field level, any parameters
    model, store = build_gfinn("gas", case, **ARCH_SMALL, seed=5)
    leaves = store.leaves()
    z = ad.tensor(_states("gas", 5, 200))
    zdot = model.rhs(leaves, z).value
    gE = model.grad_energy(leaves, z)
    gE = gE.value if isinstance(gE, ad.Tensor) else np.asarray(gE)
    gS = model.grad_entropy(leaves, z)
    gS = gS.value if isinstance(gS, ad.Tensor) else np.asarray(gS)
    de = np.sum(gE * zdot, axis=-1)
    ds = np.sum(gS * zdot, axis=-1)
    assert np.max(np.abs(de)) <= 1e-11 * (1 + np.max(np.abs(gE)))
    assert np.min(ds) >= -1e-12


def test_langevin_case2_fluctuation_dissipation_exact():
    model, store = build_gfinn("langevin", "2a", **ARCH_SMALL, seed=6)
    leaves = store.leaves()
    z = ad.tensor(_states("langevin", 6, 100))
    mu, sigma = model.mu_sigma(leaves, z)
    M = model.m_matrix(leaves, z).value
    gap = np.einsum("bik,bjk->bij", sigma.value, sigma.value) \
        - 2.0 * model.k_boltzmann * M
    assert np.max(np.abs(gap)) <= 1e-14


@pytest.mark.parametrize("case", ["2a", "2b"])
def test_learned_divergence_matches_fd(case):
    model, store = build_gfinn("langevin", case, **ARCH_SMALL, seed=7)
    leaves = store.leaves()
    z0 = _states("langevin", 7, 4)
    div = model.divergence_m(leaves, ad.tensor(z0)).value

    def m_at(zv):
        return model.m_matrix(store.leaves(), ad.tensor(zv)).value

    h = 1e-5
    fd = np.zeros_like(z0)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd += (m_at(z0 + e)[..., :, k] - m_at(z0 - e)[..., :, k]) / (2 * h)
    assert np.max(np.abs(div - fd)) <= 1e-8


def test_langevin_case1_uses_registered_divergence():
    model, store = build_gfinn("langevin", "1", **ARCH_SMALL, seed=8)
    leaves = store.leaves()
    z = ad.tensor(_states("langevin", 8, 10))
    mu, sigma = model.mu_sigma(leaves, z)
    assert sigma.value.shape == (10, 3, 1)
    div = model.divergence_m(leaves, z)
    assert np.allclose(div.value, [0.0, 0.0, -0.5])


def test_gas_analytic_divergence_unregistered_errors():
    model, store = build_gfinn("gas", "1", **ARCH_SMALL, seed=9)
    with pytest.raises(ConfigError, match="divergence"):
        model.divergence_m(store.leaves(), ad.tensor(_states("gas", 9, 2)))


def test_model_rhs_fn_matches_tape():
    model, store = build_gfinn("gas", "2a", **ARCH_SMALL, seed=10)
    z = _states("gas", 10, 6)
    f = model.rhs_fn(store)
    direct = model.rhs(store.leaves(), ad.tensor(z)).value
    assert np.array_equal(f(z), direct)


def test_case_component_mismatch_rejected():
    e = ScalarComponent("E", "analytic")
    s = ScalarComponent("S", "analytic")
    l = OperatorComponent("L", "analytic")
    m = OperatorComponent("M", "analytic")
    with pytest.raises(ConfigError):
        GenericModel("gas", "1", e, s, l, m)
    with pytest.raises(ConfigError):
        GenericModel("gas", "zz", e, s, l, m)


def test_checkpoint_roundtrip_preserves_model_meta(tmp_path):
    model, store = build_gfinn("langevin", "2b", **ARCH_SMALL, seed=11)
    p = tmp_path / "model.json"
    store.save(p)
    back = ParamStore.load(p)
    assert back.meta["problem"] == "langevin"
    assert back.meta["case"] == "2b"
    assert back.meta["k_boltzmann"] == 1.0
    assert np.array_equal(back.flat, store.flat)
