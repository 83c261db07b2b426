"""Trajectory containers, ground-truth generation, and dataset files.

File format: CSV with header ``traj_id,t,z0,...,z{d-1}`` plus a JSON
sidecar holding the problem tag, grid, seed, split and generator settings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .integrators import TimeGrid, euler_maruyama, rollout
from .problems import DomainError, get_problem


@dataclass
class TrajectorySet:
    """Batch of trajectories on a shared grid: states (n, T+1, d)."""

    problem: str
    grid: TimeGrid
    states: np.ndarray
    seed: int
    n_train: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim != 3:
            raise ValueError("states must have shape (n_traj, n_steps+1, d)")
        if self.states.shape[1] != self.grid.n_steps + 1:
            raise ValueError("states length does not match the grid")
        if not 0 <= self.n_train <= self.n_traj:
            raise ValueError("invalid train split")

    @property
    def n_traj(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[2]

    @property
    def times(self):
        return self.grid.times

    def train_states(self) -> np.ndarray:
        return self.states[:self.n_train]

    def test_states(self) -> np.ndarray:
        return self.states[self.n_train:]

    def transitions(self, which: str = "train"):
        """Flattened (z_prev, z_next) pairs for per-step losses."""
        states = self.train_states() if which == "train" else self.test_states()
        zp = states[:, :-1, :].reshape(-1, self.dim)
        zn = states[:, 1:, :].reshape(-1, self.dim)
        return zp, zn

    # ------------------------------- files -------------------------------

    def save(self, csv_path) -> None:
        csv_path = Path(csv_path)
        d = self.dim
        header = "traj_id,t," + ",".join(f"z{i}" for i in range(d))
        times = self.times
        with open(csv_path, "w") as fh:
            fh.write(header + "\n")
            for k in range(self.n_traj):
                for j in range(self.grid.n_steps + 1):
                    row = ",".join(repr(float(v)) for v in self.states[k, j])
                    fh.write(f"{k},{float(times[j])!r},{row}\n")
        sidecar = {
            "problem": self.problem,
            "grid": {"t0": self.grid.t0, "dt": self.grid.dt,
                     "n_steps": self.grid.n_steps},
            "seed": self.seed,
            "n_traj": self.n_traj,
            "n_train": self.n_train,
            "meta": self.meta,
        }
        with open(csv_path.with_suffix(".json"), "w") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, csv_path) -> "TrajectorySet":
        csv_path = Path(csv_path)
        with open(csv_path.with_suffix(".json")) as fh:
            sidecar = json.load(fh)
        grid = TimeGrid(**sidecar["grid"])
        raw = np.loadtxt(csv_path, delimiter=",", skiprows=1)
        n = sidecar["n_traj"]
        states = raw[:, 2:].reshape(n, grid.n_steps + 1, -1)
        return cls(problem=sidecar["problem"], grid=grid, states=states,
                   seed=sidecar["seed"], n_train=sidecar["n_train"],
                   meta=sidecar.get("meta", {}))


def sample_initial_states(problem, rng: np.random.Generator, n: int,
                          max_resample: int = 100) -> np.ndarray:
    """Draw initial conditions, resampling rows that leave the domain."""
    z = problem.sample_initial(rng, n)
    for _ in range(max_resample):
        try:
            problem.check_domain(z)
            return z
        except DomainError:
            bad = np.zeros(n, dtype=bool)
            for i in range(n):
                try:
                    problem.check_domain(z[i])
                except DomainError:
                    bad[i] = True
            if not bad.any():
                return z
            z[bad] = problem.sample_initial(rng, int(bad.sum()))
    raise DomainError(
        f"initial sampler for {problem.name!r} kept leaving the domain")


def generate_dataset(problem_name: str, n_traj: int, seed: int,
                     n_train: int | None = None, grid: TimeGrid | None = None,
                     substeps: int | None = None,
                     threads: int = 1) -> TrajectorySet:
    """Ground truth for one benchmark.

    Deterministic problems integrate with RK4 at `substeps` sub-steps per
    output interval (default 10).  The stochastic problem samples
    Euler-Maruyama paths at the native grid by default (substeps=1), which
    is the discretization the transition likelihood assumes; a finer
    sub-stepped mode is available for model-mismatch experiments.

    `threads` splits integration across trajectory chunks; per-trajectory
    arithmetic and per-path noise streams are independent, so the result is
    byte-identical for any worker count.
    """
    problem = get_problem(problem_name)
    if grid is None:
        grid = TimeGrid(0.0, problem.dt, problem.n_steps)
    rng = np.random.default_rng(seed)
    z0 = sample_initial_states(problem, rng, n_traj)

    if problem.deterministic:
        substeps = 10 if substeps is None else substeps
        def integrate(z0_chunk, offset):
            return rollout(problem.rhs, z0_chunk, grid, order=4,
                           substeps=substeps)
    else:
        substeps = 1 if substeps is None else substeps
        def mu_sigma(z):
            return problem.drift(z), problem.sigma(z)
        def integrate(z0_chunk, offset):
            return euler_maruyama(mu_sigma, z0_chunk, grid, seed=seed,
                                  n_wiener=problem.n_wiener,
                                  substeps=substeps, path_offset=offset)

    states = _integrate_chunked(integrate, z0, max(1, threads))
    if n_train is None:
        n_train = n_traj
    return TrajectorySet(problem=problem_name, grid=grid, states=states,
                         seed=seed, n_train=n_train,
                         meta={"substeps": substeps, "integrator":
                               "rk4" if problem.deterministic else "euler-maruyama"})


def _integrate_chunked(integrate, z0: np.ndarray, threads: int) -> np.ndarray:
    if threads == 1 or len(z0) < 2 * threads:
        return integrate(z0, 0)
    from concurrent.futures import ThreadPoolExecutor

    bounds = np.array_split(np.arange(len(z0)), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(
            lambda idx: integrate(z0[idx], int(idx[0])), bounds))
    return np.concatenate(parts, axis=0)
