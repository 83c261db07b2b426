"""Experiment orchestration: configuration resolution and validation, the
benchmark presets at desk and full scale, and the generate/train/eval/export
pipelines that the command line binds together.

Full-scale presets carry the published budgets (5e5 iterations, batch 100,
five-layer width-30 nets, ten-seed ensembles); the desk scale is sized so
the whole pipeline runs on one core in minutes and is what the acceptance
suite exercises.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .datasets import TrajectorySet, generate_dataset
from .estimators import ESTIMATORS
from .integrators import TimeGrid, euler_maruyama
from .metrics import EvalReport, GaussianKde, calibrate, sliced_w2_over_time
from .metrics import test_mse as mse_curve
from .model import build_gfinn
from .problems import get_problem, kernel_certificate
from .training import nll_loss

PROBLEM_NAMES = ("gas", "pendulum", "langevin")
METHOD_NAMES = ("gfinn", "gnode", "spnn", "sdenet")
CASE_NAMES = ("1", "2a", "2b")
KDE_TIMES = (0.0, 0.5, 1.0, 2.0)

FULL5 = (30, 30, 30, 30)
DESK3 = (20, 20)


class ExperimentConfigError(ValueError):
    """Invalid experiment configuration; message lists every violation."""


def _arch_table(problem, method, case, scale):
    wide = FULL5 if scale == "full" else DESK3
    arch = {"e_hidden": wide, "s_hidden": wide,
            "l_hidden": wide, "m_hidden": wide,
            "mu_hidden": wide, "sigma_hidden": wide}
    if method in ("gfinn", "gnode") and case == "2b":
        # published tables use a single affine map for the entropy net of
        # the gas and Langevin problems, and for the Langevin friction net
        if problem in ("gas", "langevin"):
            arch["s_hidden"] = ()
        if problem == "langevin" and method == "gfinn":
            arch["m_hidden"] = ()
    return arch


@dataclass
class ExperimentConfig:
    problem: str = "gas"
    method: str = "gfinn"
    case: str = "2a"
    scale: str = "desk"
    seeds: tuple = (0,)
    # data budget
    n_trajectories: int = 0
    n_train: int = 0
    data_substeps: int | None = None
    # optimization budget
    n_iterations: int = 0
    batch_size: int | None = 100
    learning_rate: float = 0.001
    integrator_order: int = 2
    penalty: float = 0.1
    jitter_scale: float = 1e-6
    # architecture
    e_hidden: tuple = DESK3
    s_hidden: tuple = DESK3
    l_hidden: tuple = DESK3
    m_hidden: tuple = DESK3
    mu_hidden: tuple = DESK3
    sigma_hidden: tuple = DESK3
    k_l: int = 5
    k_m: int = 4
    min_operator_rank: int = 1
    n_skew: int | None = None
    n_wiener: int | None = None
    # evaluation
    eval_samples: int = 5000
    eval_horizon_steps: int | None = None
    sw_directions: int = 100
    sw_seed: int = 0

    def to_dict(self) -> dict:
        doc = asdict(self)
        for key, value in doc.items():
            if isinstance(value, tuple):
                doc[key] = list(value)
        return doc

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def validate(self) -> list:
        bad = []
        if self.problem not in PROBLEM_NAMES:
            bad.append(f"problem must be one of {PROBLEM_NAMES}")
        if self.method not in METHOD_NAMES:
            bad.append(f"method must be one of {METHOD_NAMES}")
        if self.case not in CASE_NAMES:
            bad.append(f"case must be one of {CASE_NAMES}")
        if self.scale not in ("desk", "full"):
            bad.append("scale must be 'desk' or 'full'")
        if self.method == "spnn" and self.case != "1":
            bad.append("spnn applies in case 1 only")
        if self.method == "gnode" and self.case not in ("2a", "2b"):
            bad.append("gnode applies in case 2 only")
        if self.method == "sdenet" and self.problem != "langevin":
            bad.append("sdenet applies to the langevin problem only")
        if self.method == "sdenet" and self.case != "2b":
            bad.append("sdenet carries no physics priors; use case 2b")
        if self.method in ("spnn", "gnode") and self.problem == "langevin":
            bad.append(f"{self.method} has no noise model for the "
                       "stochastic problem")
        if self.problem in ("gas", "pendulum") and self.n_train >= \
                self.n_trajectories:
            bad.append("deterministic problems need held-out test trajectories")
        if self.n_train > self.n_trajectories:
            bad.append("n_train exceeds n_trajectories")
        if not self.seeds:
            bad.append("at least one seed is required")
        if self.n_iterations < 0:
            bad.append("n_iterations must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            bad.append("batch_size must be >= 1 or null for full batch")
        if self.learning_rate <= 0:
            bad.append("learning_rate must be positive")
        if self.integrator_order not in (2, 3, 4):
            bad.append("integrator_order must be 2, 3 or 4")
        if self.method == "spnn" and self.penalty <= 0:
            bad.append("spnn penalty weight must be positive")
        if min(self.k_l, self.k_m) < self.min_operator_rank:
            bad.append("skew bank sizes fall below the configured "
                       "minimum operator rank")
        if self.eval_samples < 2:
            bad.append("eval_samples must be >= 2")
        return bad

    def require_valid(self):
        bad = self.validate()
        if bad:
            raise ExperimentConfigError("; ".join(bad))
        return self


def resolve_config(doc: dict) -> ExperimentConfig:
    """Fill preset defaults from (problem, method, case, scale), then apply
    explicit overrides from the document."""
    doc = dict(doc)
    problem = doc.get("problem", "gas")
    method = doc.get("method", "gfinn")
    case = doc.get("case", {"spnn": "1", "gnode": "2b",
                            "sdenet": "2b"}.get(method, "2a"))
    scale = doc.get("scale", "desk")

    preset = {"problem": problem, "method": method, "case": case,
              "scale": scale}
    if problem in ("gas", "pendulum"):
        if scale == "full":
            preset.update(n_trajectories=100, n_train=80,
                          n_iterations=500_000, batch_size=100,
                          seeds=tuple(range(10)))
        else:
            preset.update(n_trajectories=25, n_train=20,
                          n_iterations=50_000, batch_size=100, seeds=(0,))
    else:
        if scale == "full":
            preset.update(n_trajectories=40, n_train=40,
                          n_iterations=50_000, batch_size=None,
                          seeds=tuple(range(10)), eval_samples=50_000)
        else:
            preset.update(n_trajectories=40, n_train=40,
                          n_iterations=20_000, batch_size=500, seeds=(0,),
                          eval_samples=5000)
        preset["eval_horizon_steps"] = 500  # out to t = 2 at dt = 0.004
    preset.update(_arch_table(problem, method, case, scale))

    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ExperimentConfigError(f"unknown config keys: {sorted(unknown)}")
    preset.update(doc)
    if problem == "langevin" and "n_train" not in doc:
        preset["n_train"] = preset["n_trajectories"]  # all paths train
    for key in ("seeds", "e_hidden", "s_hidden", "l_hidden", "m_hidden",
                "mu_hidden", "sigma_hidden"):
        if key in preset and preset[key] is not None:
            preset[key] = tuple(preset[key])
    return ExperimentConfig(**preset)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return resolve_config(json.load(fh))


# --------------------------------------------------------------------------
# pipeline stages
# --------------------------------------------------------------------------

def data_path(out: Path) -> Path:
    return Path(out) / "data.csv"


def checkpoint_path(out: Path, seed: int) -> Path:
    return Path(out) / f"model_seed{seed}.json"


def run_generate(cfg: ExperimentConfig, out: Path, overwrite: bool = False,
                 threads: int = 1) -> Path:
    cfg.require_valid()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    target = data_path(out)
    if target.exists() and not overwrite:
        raise FileExistsError(
            f"{target} exists; pass --overwrite to regenerate")
    data = generate_dataset(cfg.problem, cfg.n_trajectories, seed=cfg.sw_seed,
                            n_train=cfg.n_train, substeps=cfg.data_substeps,
                            threads=threads)
    data.meta["config_hash"] = cfg.config_hash()
    data.save(target)
    with open(out / "config.json", "w") as fh:
        json.dump({"config": cfg.to_dict(), "hash": cfg.config_hash()}, fh,
                  indent=1, sort_keys=True)
    return target


def _make_estimator(cfg: ExperimentConfig, seed: int):
    common = dict(problem=cfg.problem, n_iterations=cfg.n_iterations,
                  batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
                  seed=seed)
    if cfg.method == "gfinn":
        return ESTIMATORS["gfinn"](
            case=cfg.case, e_hidden=cfg.e_hidden, s_hidden=cfg.s_hidden,
            l_hidden=cfg.l_hidden, m_hidden=cfg.m_hidden, k_l=cfg.k_l,
            k_m=cfg.k_m, integrator_order=cfg.integrator_order,
            jitter_scale=cfg.jitter_scale, **common)
    if cfg.method == "gnode":
        return ESTIMATORS["gnode"](
            case=cfg.case, e_hidden=cfg.e_hidden, s_hidden=cfg.s_hidden,
            n_skew=cfg.n_skew, integrator_order=cfg.integrator_order, **common)
    if cfg.method == "spnn":
        return ESTIMATORS["spnn"](
            penalty=cfg.penalty, e_hidden=cfg.e_hidden, s_hidden=cfg.s_hidden,
            integrator_order=cfg.integrator_order, **common)
    return ESTIMATORS["sdenet"](
        mu_hidden=cfg.mu_hidden, sigma_hidden=cfg.sigma_hidden,
        n_wiener=cfg.n_wiener, jitter_scale=cfg.jitter_scale, **common)


def run_train(cfg: ExperimentConfig, out: Path) -> list:
    cfg.require_valid()
    out = Path(out)
    data = TrajectorySet.load(data_path(out))
    paths = []
    for seed in cfg.seeds:
        est = _make_estimator(cfg, seed)
        est.fit(data)
        est.store_.meta["config_hash"] = cfg.config_hash()
        ckpt = checkpoint_path(out, seed)
        est.save(ckpt)
        log = out / f"train_log_seed{seed}.csv"
        with open(log, "w") as fh:
            fh.write(f"# config_hash={cfg.config_hash()}\n")
            fh.write("iteration,loss,wall_ms\n")
            for it, loss, ms in est.run_.history:
                fh.write(f"{int(it)},{loss!r},{ms:.3f}\n")
        paths.append(ckpt)
    return paths


def _fitted_estimator(cfg: ExperimentConfig, out: Path, seed: int):
    """Rebuild the estimator for `seed` and load its trained parameters."""
    from .nets import ParamStore

    est = _make_estimator(cfg, seed)
    est.model_, est.store_ = est._build()
    loaded = ParamStore.load(checkpoint_path(out, seed))
    if loaded.names() != est.store_.names():
        raise ExperimentConfigError(
            "checkpoint layout does not match the configured architecture")
    est.store_.flat[:] = loaded.flat
    est.store_.meta.update(loaded.meta)
    est.dt_ = get_problem(cfg.problem).dt
    return est


def run_eval(cfg: ExperimentConfig, out: Path) -> Path:
    """Metric curves across seeds plus figure-source extras, one report."""
    cfg.require_valid()
    out = Path(out)
    data = TrajectorySet.load(data_path(out))
    if get_problem(cfg.problem).deterministic:
        report = _eval_deterministic(cfg, out, data)
    else:
        report = _eval_stochastic(cfg, out, data)
    report.metadata.update({"config_hash": cfg.config_hash(),
                            "method": cfg.method, "case": cfg.case,
                            "scale": cfg.scale, "seeds": list(cfg.seeds)})
    path = out / f"report_{report.metric}.json"
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, sort_keys=True)
    _write_band_csv(out / f"report_{report.metric}.csv", report,
                    cfg.config_hash())
    return path


def _write_band_csv(path: Path, report: EvalReport, config_hash: str):
    with open(path, "w") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        fh.write("t,min,mean,max\n")
        for t, lo, mid, hi in zip(report.times, report.low, report.mean,
                                  report.high):
            fh.write(f"{float(t)!r},{float(lo)!r},{float(mid)!r},{float(hi)!r}\n")


def _safe_rollout(rhs, z0, grid, order, check_domain):
    """Free-running rollout that freezes a trajectory at its last finite
    in-domain state instead of crashing; returns (states, diverged_steps)."""
    from .integrators import rk_step
    from .problems import DomainError

    n = len(z0)
    states = np.empty((n, grid.n_steps + 1, z0.shape[1]))
    diverged = []
    for i in range(n):
        z = np.asarray(z0[i], dtype=np.float64)
        states[i, 0] = z
        stop = None
        for j in range(1, grid.n_steps + 1):
            if stop is None:
                try:
                    with np.errstate(all="ignore"):
                        znew = rk_step(rhs, z, grid.dt, order)
                    check_domain(znew)
                    if not np.all(np.isfinite(znew)) or \
                            np.max(np.abs(znew)) > 1e8:
                        raise DomainError("state diverged")
                    z = znew
                except DomainError:
                    stop = j  # hold the last valid state from here on
            states[i, j] = z
        diverged.append(stop)
    return states, diverged


def _eval_deterministic(cfg, out, data) -> EvalReport:
    truth = data.test_states()
    grid = data.grid
    problem = get_problem(cfg.problem)
    curves, overlays, diverged = [], [], {}
    for seed in cfg.seeds:
        est = _fitted_estimator(cfg, out, seed)
        pred, stops = _safe_rollout(est._rhs_fn(), truth[:, 0, :], grid,
                                    order=4, check_domain=problem.check_domain)
        if any(s is not None for s in stops):
            diverged[str(seed)] = stops
        curves.append(mse_curve(truth, pred))
        overlays.append(pred)
    curves = np.asarray(curves)
    best = int(np.argmin(curves.sum(axis=1)))
    extras = {
        "overlay": {
            "times": grid.times.tolist(),
            "truth": truth[0].tolist(),
            "prediction": overlays[best][0].tolist(),
            "seed": int(cfg.seeds[best]),
        }
    }
    if diverged:
        extras["diverged_at"] = diverged
    if cfg.problem == "gas" and _learns_scalars(cfg):
        extras["contours"] = _gas_contours(cfg, out, cfg.seeds[best])
    return EvalReport(cfg.problem, "mse", grid.times, curves, extras=extras)


def _learns_scalars(cfg) -> bool:
    if cfg.method == "spnn":
        return True
    if cfg.method in ("gfinn", "gnode"):
        return cfg.case in ("1", "2b")
    return False


def _gas_contours(cfg, out, seed) -> dict:
    """Calibrated energy/entropy surfaces on the two reference hyperplanes."""
    est = _fitted_estimator(cfg, out, seed)
    gas = get_problem("gas")
    q = np.linspace(0.2, 1.8, 61)
    p = np.linspace(-1.0, 1.0, 61)
    qq, pp = np.meshgrid(q, p, indexing="ij")
    z_e = np.column_stack([qq.ravel(), pp.ravel(),
                           np.full(qq.size, 2.5), np.full(qq.size, 2.5)])
    s1 = np.linspace(1.0, 3.0, 61)
    s2 = np.linspace(1.0, 3.0, 61)
    ss1, ss2 = np.meshgrid(s1, s2, indexing="ij")
    z_s = np.column_stack([np.ones(ss1.size), np.zeros(ss1.size),
                           ss1.ravel(), ss2.ravel()])
    true_e = np.asarray(gas.energy(z_e))
    true_s = np.asarray(gas.entropy(z_s))
    learned_e = _scalar_surface(est, z_e, "energy")
    learned_s = _scalar_surface(est, z_s, "entropy")
    cal_e = calibrate(learned_e, true_e)
    cal_s = calibrate(learned_s, true_s)
    return {
        "panels": [
            {"quantity": "energy", "hyperplane": "S1=2.5, S2=2.5",
             "x": q.tolist(), "y": p.tolist(), "xlabel": "q", "ylabel": "p",
             "true": true_e.reshape(61, 61).tolist(),
             "learned": cal_e.apply(learned_e).reshape(61, 61).tolist(),
             "calibration": [cal_e.slope, cal_e.intercept]},
            {"quantity": "entropy", "hyperplane": "p=0, q=1",
             "x": s1.tolist(), "y": s2.tolist(), "xlabel": "S1",
             "ylabel": "S2",
             "true": true_s.reshape(61, 61).tolist(),
             "learned": cal_s.apply(learned_s).reshape(61, 61).tolist(),
             "calibration": [cal_s.slope, cal_s.intercept]},
        ]
    }


def _scalar_surface(est, z, which: str) -> np.ndarray:
    if hasattr(est, which):  # structure-preserving estimator
        return np.asarray(getattr(est, which)(z))
    # baselines with scalar nets: evaluate the named network head
    from .nets import mlp_scalar

    prefix = "E" if which == "energy" else "S"
    spec = est.model_.e_spec if which == "energy" else est.model_.s_spec
    leaves = est.store_.leaves()
    return mlp_scalar(leaves, prefix, spec, ad.tensor(z)).value


def _eval_stochastic(cfg, out, data) -> EvalReport:
    problem = get_problem(cfg.problem)
    steps = cfg.eval_horizon_steps or problem.n_steps
    grid = TimeGrid(0.0, problem.dt, steps)
    rng = np.random.default_rng(cfg.sw_seed + 1)
    z0 = problem.sample_initial(rng, cfg.eval_samples)

    def truth_mu_sigma(z):
        return problem.drift(z), problem.sigma(z)

    truth = euler_maruyama(truth_mu_sigma, z0, grid, seed=cfg.sw_seed + 2,
                           n_wiener=problem.n_wiener)
    curves, nlls, kde_panels = [], [], None
    capped = False
    zp, zn = data.transitions("train")
    for seed in cfg.seeds:
        est = _fitted_estimator(cfg, out, seed)
        pred = est.sample_paths(z0, grid, seed=cfg.sw_seed + 3)
        if not np.all(np.isfinite(pred)):
            # a diverged model: cap so metrics and reports stay serializable
            pred = np.nan_to_num(pred, nan=1e6, posinf=1e6, neginf=-1e6)
            capped = True
        curves.append(sliced_w2_over_time(truth, pred,
                                          n_directions=cfg.sw_directions,
                                          seed=cfg.sw_seed))
        nlls.append(_final_nll(est, zp, zn, data.grid.dt))
        if kde_panels is None:
            kde_panels = _kde_panels(truth, pred, grid)
    extras = {"final_nll": nlls, "kde": kde_panels,
              "eval_samples": cfg.eval_samples}
    if capped:
        extras["nonfinite_samples_capped"] = True
    return EvalReport(cfg.problem, "sliced_w2", grid.times,
                      np.asarray(curves), extras=extras)


def _final_nll(est, zp, zn, dt) -> float:
    leaves = est.store_.leaves()
    loss = nll_loss(lambda w: est.model_.mu_sigma(leaves, w), zp, zn, dt,
                    jitter_scale=est.jitter_scale)
    return float(loss.value)


def _kde_panels(truth, pred, grid) -> dict:
    from .metrics import MetricContractError

    names = ["q", "p", "S_e"]
    panels = []
    for t in KDE_TIMES:
        j = int(round(t / grid.dt))
        if j > grid.n_steps:
            continue
        for c, name in enumerate(names):
            try:
                kt = GaussianKde(grid_points=201).fit(truth[:, j, c])
                km = GaussianKde(grid_points=201).fit(pred[:, j, c])
            except MetricContractError:
                continue  # degenerate (e.g. frozen) marginal: no density
            panels.append({
                "time": t, "component": name,
                "true_grid": kt.grid_.tolist(),
                "true_density": kt.density_.tolist(),
                "model_grid": km.grid_.tolist(),
                "model_density": km.density_.tolist(),
            })
    return {"times": list(KDE_TIMES), "components": names, "panels": panels}


def run_export(report_path, export_dir) -> list:
    """Figure-ready files from a report: band CSV, overlay CSV, contour and
    density JSON, plus a manifest naming them."""
    report_path = Path(report_path)
    export_dir = Path(export_dir)
    export_dir.mkdir(parents=True, exist_ok=True)
    with open(report_path) as fh:
        report = EvalReport.from_json_dict(json.load(fh))
    config_hash = report.metadata.get("config_hash", "unknown")
    written = []

    band = export_dir / f"{report.metric}_vs_time.csv"
    _write_band_csv(band, report, config_hash)
    written.append(band)

    if "overlay" in report.extras:
        overlay = report.extras["overlay"]
        truth = np.asarray(overlay["truth"])
        pred = np.asarray(overlay["prediction"])
        times = np.asarray(overlay["times"])
        path = export_dir / "trajectory_overlay.csv"
        d = truth.shape[1]
        cols = [f"true_{i}" for i in range(d)] + [f"pred_{i}" for i in range(d)]
        with open(path, "w") as fh:
            fh.write(f"# config_hash={config_hash}\n")
            fh.write("t," + ",".join(cols) + "\n")
            for j in range(len(times)):
                vals = list(truth[j]) + list(pred[j])
                fh.write(",".join([repr(float(times[j]))]
                                  + [repr(float(v)) for v in vals]) + "\n")
        written.append(path)

    if "contours" in report.extras:
        path = export_dir / "contours.json"
        with open(path, "w") as fh:
            json.dump({"kind": "contours", "config_hash": config_hash,
                       **report.extras["contours"]}, fh, sort_keys=True)
        written.append(path)

    if "kde" in report.extras and report.extras["kde"]:
        path = export_dir / "kde_panels.json"
        with open(path, "w") as fh:
            json.dump({"kind": "kde", "config_hash": config_hash,
                       **report.extras["kde"]}, fh, sort_keys=True)
        written.append(path)

    manifest = export_dir / "manifest.json"
    with open(manifest, "w") as fh:
        json.dump({"config_hash": config_hash, "metric": report.metric,
                   "problem": report.problem,
                   "files": [p.name for p in written]}, fh, sort_keys=True,
                  indent=1)
    written.append(manifest)
    return written


# --------------------------------------------------------------------------
# standalone verification (structural invariants + kernel certificates)
# --------------------------------------------------------------------------

def run_verify(n_draws: int = 5, n_states: int = 200, seed: int = 0) -> dict:
    """Structure checks over random parameter draws and random states for
    every (problem, case), plus the kernel certificates.  Returns a dict of
    check name -> (passed, worst value)."""
    results = {}
    arch = dict(e_hidden=(8, 8), s_hidden=(8, 8), l_hidden=(8, 8),
                m_hidden=(8, 8))
    for problem_name in PROBLEM_NAMES:
        problem = get_problem(problem_name)
        z = problem.sample_initial(np.random.default_rng(seed), n_states)
        for case in CASE_NAMES:
            worst = {"skew": 0.0, "eig": 0.0, "deg_l": 0.0, "deg_m": 0.0}
            for draw in range(n_draws):
                model, store = build_gfinn(problem_name, case, **arch,
                                           seed=seed + draw)
                leaves = store.leaves()
                zt = ad.tensor(z)
                L = model.l_matrix(leaves, zt)
                L = L.value if isinstance(L, ad.Tensor) else \
                    np.broadcast_to(np.asarray(L), z.shape[:-1] + np.asarray(L).shape)
                M = model.m_matrix(leaves, zt).value \
                    if isinstance(model.m_matrix(leaves, zt), ad.Tensor) \
                    else np.asarray(model.m_matrix(leaves, zt))
                gE = model.grad_energy(leaves, zt)
                gS = model.grad_entropy(leaves, zt)
                gE = gE.value if isinstance(gE, ad.Tensor) else np.asarray(gE)
                gS = gS.value if isinstance(gS, ad.Tensor) else np.asarray(gS)
                worst["skew"] = max(worst["skew"], float(np.max(np.abs(
                    L + np.swapaxes(L, -1, -2)))))
                worst["eig"] = max(worst["eig"], float(-np.min(
                    np.linalg.eigvalsh(M))))
                se = 1.0 + np.linalg.norm(gE, axis=-1)
                ss = 1.0 + np.linalg.norm(gS, axis=-1)
                worst["deg_l"] = max(worst["deg_l"], float(np.max(np.abs(
                    np.einsum("...ij,...j->...i", L, gS)) / ss[..., None])))
                worst["deg_m"] = max(worst["deg_m"], float(np.max(np.abs(
                    np.einsum("...ij,...j->...i", M, gE)) / se[..., None])))
            key = f"{problem_name}/case{case}"
            results[f"{key}/skew_symmetry"] = (worst["skew"] <= 1e-12,
                                               worst["skew"])
            results[f"{key}/psd_min_eig"] = (worst["eig"] <= 1e-10,
                                             worst["eig"])
            results[f"{key}/degeneracy_L"] = (worst["deg_l"] <= 1e-10,
                                              worst["deg_l"])
            results[f"{key}/degeneracy_M"] = (worst["deg_m"] <= 1e-10,
                                              worst["deg_m"])
    for problem_name in ("gas", "pendulum"):
        z = get_problem(problem_name).sample_initial(
            np.random.default_rng(seed + 99), n_states)
        try:
            report = kernel_certificate(problem_name, z)
            ok, val = True, max(report["kernel_membership"],
                                report["energy_factorization"])
        except AssertionError as err:  # CertificateError
            ok, val = False, float("nan")
        results[f"{problem_name}/kernel_certificate"] = (ok, val)
    return results
