"""Evaluation metrics: per-time mean squared error, squared sliced
Wasserstein-2 distance, affine calibration of learned scalars, and Gaussian
kernel density estimates for distribution figures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MetricContractError(ValueError):
    """Inputs violate a metric's shape or pairing contract."""


def test_mse(truth: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """MSE(t_j) over test trajectories, averaged over the state dimension.

    Inputs are (n_test, T+1, d) with matching grids and matching initial
    states (predictions are free-running from the truth's z0).
    """
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise MetricContractError(
            f"trajectory sets differ in shape: {truth.shape} vs {pred.shape}")
    return np.mean((truth - pred) ** 2, axis=(0, 2))


def sphere_directions(n_directions: int, dim: int,
                      rng: np.random.Generator) -> np.ndarray:
    u = rng.normal(size=(n_directions, dim))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def sliced_w2(samples_a: np.ndarray, samples_b: np.ndarray,
              n_directions: int = 100, seed: int = 0,
              directions: np.ndarray | None = None) -> float:
    """Squared sliced Wasserstein-2 distance between two equal-size clouds.

    Projections onto each direction are sorted independently, so index k
    pairs order statistics; the squared gaps are averaged over samples and
    directions.  The direction seed is recorded by callers for
    reproducibility.
    """
    a = np.asarray(samples_a)
    b = np.asarray(samples_b)
    if a.shape != b.shape or a.ndim != 2:
        raise MetricContractError(
            f"sample clouds must share (N, d); got {a.shape} and {b.shape}")
    if directions is None:
        directions = sphere_directions(n_directions, a.shape[1],
                                       np.random.default_rng(seed))
    pa = np.sort(a @ directions.T, axis=0)
    pb = np.sort(b @ directions.T, axis=0)
    return float(np.mean((pa - pb) ** 2))


def sliced_w2_over_time(truth: np.ndarray, pred: np.ndarray,
                        n_directions: int = 100, seed: int = 0) -> np.ndarray:
    """SW(t_j) for (N, T+1, d) sample arrays; directions drawn once."""
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise MetricContractError(
            f"sample arrays differ in shape: {truth.shape} vs {pred.shape}")
    directions = sphere_directions(n_directions, truth.shape[2],
                                   np.random.default_rng(seed))
    return np.array([
        sliced_w2(truth[:, j], pred[:, j], directions=directions)
        for j in range(truth.shape[1])
    ])


@dataclass(frozen=True)
class AffineCalibration:
    """Slope/intercept resolving the scaling freedom of learned generators.

    Applied as a * learned + b; pairing the inverse slope with the matched
    operator leaves the dynamics unchanged, so this is presentation only.
    """

    slope: float
    intercept: float
    residual: float
    degenerate: bool = False

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.slope * np.asarray(values) + self.intercept


def calibrate(learned: np.ndarray, truth: np.ndarray) -> AffineCalibration:
    """Least-squares affine fit of learned values onto truth values."""
    learned = np.asarray(learned, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if learned.size != truth.size or learned.size < 2:
        raise MetricContractError("calibration needs >= 2 paired values")
    spread = np.ptp(learned)
    if spread == 0.0:
        # constant learned field: report, do not fail
        b = float(np.mean(truth))
        res = float(np.sum((truth - b) ** 2))
        return AffineCalibration(0.0, b, res, degenerate=True)
    design = np.column_stack([learned, np.ones_like(learned)])
    coef, *_ = np.linalg.lstsq(design, truth, rcond=None)
    res = float(np.sum((design @ coef - truth) ** 2))
    return AffineCalibration(float(coef[0]), float(coef[1]), res)


class GaussianKde:
    """Gaussian product-kernel density on a regular grid (1 or 2 dims).

    Bandwidth is Scott's rule per dimension: sigma_hat * N^(-1/(dim+4)).
    After `fit`, the grid, bandwidth and density are available as
    `grid_`, `bandwidth_`, `density_`.
    """

    def __init__(self, grid_points: int = 401, padding: float = 3.0):
        self.grid_points = grid_points
        self.padding = padding

    def get_params(self):
        return {"grid_points": self.grid_points, "padding": self.padding}

    def set_params(self, **params):
        for k, v in params.items():
            if not hasattr(self, k):
                raise MetricContractError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    def fit(self, samples: np.ndarray) -> "GaussianKde":
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        n, dim = x.shape
        if n < 30:
            raise MetricContractError("kernel density estimate needs N >= 30")
        if dim > 2:
            raise MetricContractError("density grids support 1 or 2 dimensions")
        sigma = x.std(axis=0, ddof=1)
        if np.any(sigma == 0.0):
            raise MetricContractError("zero variance sample; no density scale")
        h = sigma * n ** (-1.0 / (dim + 4))
        axes = [
            np.linspace(x[:, j].min() - self.padding * h[j],
                        x[:, j].max() + self.padding * h[j],
                        self.grid_points if dim == 1 else min(self.grid_points, 151))
            for j in range(dim)
        ]
        self.n_samples_ = n
        self.dim_ = dim
        self.bandwidth_ = h
        self.grid_ = axes[0] if dim == 1 else axes
        self.density_ = self._evaluate(x, axes, h)
        return self

    def _evaluate(self, x, axes, h):
        n = x.shape[0]
        norm = 1.0 / (n * np.prod(h) * (2 * np.pi) ** (x.shape[1] / 2.0))
        chunk = max(1, int(2e6 // max(len(a) for a in axes)))
        if x.shape[1] == 1:
            g = axes[0][:, None]
            total = np.zeros(len(axes[0]))
            for i in range(0, n, chunk):
                u = (g - x[i:i + chunk, 0][None, :]) / h[0]
                total += np.exp(-0.5 * u * u).sum(axis=1)
            return norm * total
        gx, gy = axes
        total = np.zeros((len(gx), len(gy)))
        for i in range(0, n, chunk):
            ux = (gx[:, None] - x[i:i + chunk, 0][None, :]) / h[0]
            uy = (gy[:, None] - x[i:i + chunk, 1][None, :]) / h[1]
            total += np.einsum("gn,hn->gh", np.exp(-0.5 * ux * ux),
                               np.exp(-0.5 * uy * uy))
        return norm * total

    def integral(self) -> float:
        """Trapezoid mass on the grid; near 1 up to tail truncation."""
        if self.dim_ == 1:
            return float(np.trapezoid(self.density_, self.grid_))
        inner = np.trapezoid(self.density_, self.grid_[1], axis=1)
        return float(np.trapezoid(inner, self.grid_[0]))


@dataclass
class EvalReport:
    """Per-time-step metric curves plus ensemble aggregates and metadata."""

    problem: str
    metric: str                       # "mse" or "sliced_w2"
    times: np.ndarray
    curves: np.ndarray                # (n_seeds, T+1)
    metadata: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.curves = np.atleast_2d(np.asarray(self.curves, dtype=np.float64))
        if self.curves.shape[1] != self.times.shape[0]:
            raise MetricContractError("curve length does not match the grid")

    @property
    def mean(self):
        return self.curves.mean(axis=0)

    @property
    def low(self):
        return self.curves.min(axis=0)

    @property
    def high(self):
        return self.curves.max(axis=0)

    def to_json_dict(self) -> dict:
        return {
            "problem": self.problem,
            "metric": self.metric,
            "times": self.times.tolist(),
            "curves": self.curves.tolist(),
            "metadata": self.metadata,
            "extras": self.extras,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EvalReport":
        return cls(problem=doc["problem"], metric=doc["metric"],
                   times=np.asarray(doc["times"]),
                   curves=np.asarray(doc["curves"]),
                   metadata=doc.get("metadata", {}),
                   extras=doc.get("extras", {}))
