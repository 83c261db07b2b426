"""Parameterized building blocks: scalar/vector MLPs, banks of constant
skew-symmetric matrices, and triangular matrix-valued networks.

All trainable state lives in a single flat float64 vector (`ParamStore`)
with a named-slice layout; evaluation wraps slices as tape leaves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad


class ConfigError(ValueError):
    """Invalid architecture or layout configuration."""


@dataclass(frozen=True)
class MlpSpec:
    """Feed-forward spec: widths = (n_in, hidden..., n_out), tanh between
    affine maps.  len(widths) - 1 equals the number of weight matrices."""

    widths: tuple
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ConfigError("MlpSpec needs at least input and output widths")
        if any(int(w) < 1 for w in self.widths):
            raise ConfigError(f"zero or negative width in {self.widths}")
        if self.activation != "tanh":
            raise ConfigError("only tanh has registered second derivatives")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))

    @property
    def n_layers(self):
        return len(self.widths) - 1

    @property
    def n_in(self):
        return self.widths[0]

    @property
    def n_out(self):
        return self.widths[-1]


class ParamStore:
    """Flat parameter vector with named slices.

    Mutation (optimizer steps) must not overlap evaluation of a live tape;
    `leaves()` hands out views, so an update is visible to the next tape
    without copying.
    """

    def __init__(self):
        self.flat = np.zeros(0)
        self._layout = {}  # name -> (offset, shape)
        self.meta = {"fill_convention": "row-major lower triangle"}

    def add(self, name: str, value: np.ndarray):
        if name in self._layout:
            raise ConfigError(f"duplicate parameter slice {name!r}")
        value = np.asarray(value, dtype=np.float64)
        offset = self.flat.size
        self._layout[name] = (offset, value.shape)
        self.flat = np.concatenate([self.flat, value.ravel()])
        return self

    def names(self):
        return list(self._layout)

    @property
    def size(self):
        return self.flat.size

    def view(self, name: str) -> np.ndarray:
        offset, shape = self._layout[name]
        return self.flat[offset:offset + int(np.prod(shape))].reshape(shape)

    def leaves(self) -> dict:
        """Fresh tape leaves over the current parameter values."""
        return {name: ad.tensor(self.view(name)) for name in self._layout}

    def grad_vector(self, leaves: dict, grads: list) -> np.ndarray:
        """Assemble tensor gradients back into flat layout order."""
        out = np.zeros_like(self.flat)
        by_name = dict(zip(leaves.keys(), grads))
        for name, (offset, shape) in self._layout.items():
            g = by_name[name]
            out[offset:offset + int(np.prod(shape))] = g.value.ravel()
        return out

    def copy(self) -> "ParamStore":
        new = ParamStore()
        new.flat = self.flat.copy()
        new._layout = dict(self._layout)
        new.meta = dict(self.meta)
        return new

    # -- checkpoint format: JSON slices + shapes + conventions + metadata --

    def to_json_dict(self) -> dict:
        return {
            "meta": self.meta,
            "slices": {
                name: {"shape": list(shape), "data": self.view(name).ravel().tolist()}
                for name, (_, shape) in self._layout.items()
            },
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ParamStore":
        store = cls()
        store.meta = dict(doc.get("meta", {}))
        for name, entry in doc["slices"].items():
            store.add(name, np.asarray(entry["data"]).reshape(entry["shape"]))
        return store

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "ParamStore":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def glorot_uniform(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_out, n_in))


def mlp_init(store: ParamStore, prefix: str, spec: MlpSpec,
             rng: np.random.Generator) -> None:
    """Glorot-uniform weights, zero biases, registered as named slices."""
    for i in range(spec.n_layers):
        n_in, n_out = spec.widths[i], spec.widths[i + 1]
        store.add(f"{prefix}.W{i}", glorot_uniform(rng, n_out, n_in))
        store.add(f"{prefix}.b{i}", np.zeros(n_out))


def mlp_apply(leaves: dict, prefix: str, spec: MlpSpec, x: ad.Tensor) -> ad.Tensor:
    """Evaluate the network on (..., n_in) input; tanh between affine maps."""
    h = x
    for i in range(spec.n_layers):
        h = ad.linear(h, leaves[f"{prefix}.W{i}"], leaves[f"{prefix}.b{i}"])
        if i < spec.n_layers - 1:
            h = ad.tanh(h)
    return h


def mlp_scalar(leaves: dict, prefix: str, spec: MlpSpec, x: ad.Tensor) -> ad.Tensor:
    """Scalar-output network evaluated batched: (..., n_in) -> (...)."""
    if spec.n_out != 1:
        raise ConfigError("mlp_scalar requires n_out == 1")
    out = mlp_apply(leaves, prefix, spec, x)
    return ad.reshape(out, out.shape[:-1])


@dataclass(frozen=True)
class SkewBank:
    """K constant skew-symmetric d x d matrices stored as their strict
    upper triangles, so S_j = -S_j^T holds by layout, never by checking."""

    n_matrices: int
    dim: int
    _pairs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_matrices < 1 or self.dim < 2:
            raise ConfigError("SkewBank needs K >= 1 matrices of size d >= 2")
        object.__setattr__(self, "_pairs", np.triu_indices(self.dim, k=1))

    @property
    def n_free(self):
        return self.dim * (self.dim - 1) // 2

    def init(self, store: ParamStore, prefix: str, rng: np.random.Generator):
        scale = 1.0 / np.sqrt(self.dim)
        store.add(f"{prefix}.skew", rng.uniform(
            -scale, scale, size=(self.n_matrices, self.n_free)))

    def matrices(self, leaves: dict, prefix: str) -> ad.Tensor:
        """Expand free parameters into the (K, d, d) bank."""
        rows, cols = self._pairs
        upper = ad.scatter_pairs(leaves[f"{prefix}.skew"], rows, cols, self.dim)
        return ad.sub(upper, ad.swap_last2(upper))

    def apply(self, leaves: dict, prefix: str, g: ad.Tensor) -> ad.Tensor:
        """Rows (S_j g)^T stacked: input (..., d) -> output (..., K, d).

        The product with g itself vanishes identically; that orthogonality
        is what the degeneracy conditions of the assembled operators rest on.
        """
        if g.shape[-1] != self.dim:
            raise ConfigError(
                f"skew bank of dim {self.dim} applied to vector of {g.shape[-1]}")
        mats = self.matrices(leaves, prefix)
        return ad.einsum("kij,...j->...ki", mats, g)


@dataclass(frozen=True)
class TriangularNet:
    """MLP whose K(K+1)/2 outputs fill a K x K lower triangle, row-major."""

    size: int
    spec: MlpSpec = None

    def __post_init__(self):
        want = self.size * (self.size + 1) // 2
        if self.spec.n_out != want:
            raise ConfigError(
                f"triangular net of size {self.size} needs {want} outputs, "
                f"spec has {self.spec.n_out}")

    @classmethod
    def build(cls, size: int, n_in: int, hidden: tuple) -> "TriangularNet":
        n_out = size * (size + 1) // 2
        return cls(size=size, spec=MlpSpec((n_in,) + tuple(hidden) + (n_out,)))

    def init(self, store: ParamStore, prefix: str, rng: np.random.Generator,
             output_scale: float = 0.1):
        """Glorot layers with a damped final layer: operators built from this
        net start small, so rollouts of a freshly initialized model cannot
        fling integrator stages out of the problem domain (and, unlike a
        zero last layer, the Gram form T^T T keeps a nonzero gradient)."""
        mlp_init(store, prefix, self.spec, rng)
        store.view(f"{prefix}.W{self.spec.n_layers - 1}")[:] *= output_scale

    def matrix(self, leaves: dict, prefix: str, z: ad.Tensor) -> ad.Tensor:
        """(..., d) -> (..., K, K) lower-triangular matrix."""
        vec = mlp_apply(leaves, prefix, self.spec, z)
        rows, cols = np.tril_indices(self.size)
        return ad.scatter_pairs(vec, rows, cols, self.size)
