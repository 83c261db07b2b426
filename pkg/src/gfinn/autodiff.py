"""Reverse-mode automatic differentiation on a dynamically built tape.

Nodes hold eagerly evaluated float64 numpy arrays.  Every backward rule is
expressed in terms of tape operations, so gradients are themselves tape
nodes and can be differentiated again.  This is what makes input-gradients
of networks (which appear inside GENERIC right-hand sides) differentiable
with respect to parameters, and it only requires activations whose
derivatives are expressible through their own outputs (tanh).

A forward-mode sweep (`jvp`) is provided on the same tape; its tangent
computations are also tape operations, which is how exact divergence terms
stay differentiable.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

_IDS = itertools.count()


class TapeError(RuntimeError):
    """Structural misuse of the tape (bad shapes, bad subscripts)."""


class Tensor:
    """One tape node: cached primal value plus links to its parents.

    Topological order equals insertion order (monotone ``tid``); parents are
    always created before children because evaluation is eager.
    """

    __slots__ = ("value", "parents", "vjp", "jvp_rule", "tid")

    def __init__(self, value, parents=(), vjp=None, jvp_rule=None):
        if isinstance(value, np.ndarray) and value.dtype == np.float64:
            self.value = value
        else:
            self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjp = vjp
        self.jvp_rule = jvp_rule
        self.tid = next(_IDS)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, tid={self.tid})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return take(self, idx)


def tensor(value) -> Tensor:
    """Leaf node (no parents); gradients may be requested for it."""
    return Tensor(value)


def constant(value) -> Tensor:
    """Alias of `tensor`; constants are just leaves nobody differentiates."""
    return Tensor(value)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _sum_to(t: Tensor, shape: tuple) -> Tensor:
    """Reduce `t` to `shape` by summing axes introduced by broadcasting."""
    if t.shape == shape:
        return t
    extra = t.ndim - len(shape)
    if extra > 0:
        t = tsum(t, axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and t.shape[i] != 1)
    if axes:
        t = tsum(t, axis=axes, keepdims=True)
    if t.shape != shape:
        raise TapeError(f"cannot reduce shape {t.shape} to {shape}")
    return t


# ---------------------------------------------------------------------------
# elementwise operations
# ---------------------------------------------------------------------------

_SCALARS = (int, float)


def add(a, b) -> Tensor:
    if isinstance(b, _SCALARS):                    # literal: no adjoint slot
        a = _as_tensor(a)
        out = Tensor(a.value + b, (a,))
        out.vjp = lambda g: (g,)
        out.jvp_rule = lambda da: da
        return out
    if isinstance(a, _SCALARS):
        return add(b, a)
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value + b.value, (a, b))
    if a.shape == b.shape:
        out.vjp = lambda g: (g, g)
    else:
        out.vjp = lambda g: (_sum_to(g, a.shape), _sum_to(g, b.shape))
    out.jvp_rule = lambda da, db: (
        da if db is None else db if da is None else add(da, db)
    )
    return out


def sub(a, b) -> Tensor:
    if isinstance(b, _SCALARS):
        return add(a, -b)
    if isinstance(a, _SCALARS):
        return add(neg(b), a)
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value - b.value, (a, b))
    if a.shape == b.shape:
        out.vjp = lambda g: (g, neg(g))
    else:
        out.vjp = lambda g: (_sum_to(g, a.shape), neg(_sum_to(g, b.shape)))
    out.jvp_rule = lambda da, db: (
        da if db is None else neg(db) if da is None else sub(da, db)
    )
    return out


def neg(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(-a.value, (a,))
    out.vjp = lambda g: (neg(g),)
    out.jvp_rule = lambda da: neg(da)
    return out


def mul(a, b) -> Tensor:
    if isinstance(b, _SCALARS):
        a = _as_tensor(a)
        out = Tensor(a.value * b, (a,))
        out.vjp = lambda g: (mul(g, b),)
        out.jvp_rule = lambda da: mul(da, b)
        return out
    if isinstance(a, _SCALARS):
        return mul(b, a)
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value * b.value, (a, b))
    if a.shape == b.shape:
        out.vjp = lambda g: (mul(g, b), mul(g, a))
    else:
        out.vjp = lambda g: (_sum_to(mul(g, b), a.shape),
                             _sum_to(mul(g, a), b.shape))
    out.jvp_rule = lambda da, db: (
        mul(da, b) if db is None
        else mul(a, db) if da is None
        else add(mul(da, b), mul(a, db))
    )
    return out


def div(a, b) -> Tensor:
    if isinstance(b, _SCALARS):
        return mul(a, 1.0 / b)
    a_scalar = isinstance(a, _SCALARS)
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.value / b.value, (a, b))
    if a_scalar or a.shape == b.shape:
        out.vjp = lambda g: (_sum_to(div(g, b), a.shape),
                             neg(div(mul(g, out), b)))
    else:
        out.vjp = lambda g: (
            _sum_to(div(g, b), a.shape),
            _sum_to(neg(div(mul(g, out), b)), b.shape),
        )
    out.jvp_rule = lambda da, db: (
        div(da, b) if db is None
        else neg(div(mul(out, db), b)) if da is None
        else div(sub(da, mul(out, db)), b)
    )
    return out


def power(a, p: float) -> Tensor:
    a = _as_tensor(a)
    p = float(p)
    out = Tensor(a.value ** p, (a,))
    out.vjp = lambda g: (mul(g, mul(power(a, p - 1.0), p)),)
    out.jvp_rule = lambda da: mul(da, mul(power(a, p - 1.0), p))
    return out


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.sqrt(a.value), (a,))
    out.vjp = lambda g: (div(mul(g, 0.5), out),)
    out.jvp_rule = lambda da: div(mul(da, 0.5), out)
    return out


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.exp(a.value), (a,))
    out.vjp = lambda g: (mul(g, out),)
    out.jvp_rule = lambda da: mul(da, out)
    return out


def log(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.log(a.value), (a,))
    out.vjp = lambda g: (div(g, a),)
    out.jvp_rule = lambda da: div(da, a)
    return out


def tanh(a) -> Tensor:
    # phi' = 1 - phi^2 is expressed through the output, so repeated
    # differentiation (phi'', phi''', ...) falls out of the mul/sub rules.
    a = _as_tensor(a)
    out = Tensor(np.tanh(a.value), (a,))
    out.vjp = lambda g: (mul(g, sub(1.0, mul(out, out))),)
    out.jvp_rule = lambda da: mul(da, sub(1.0, mul(out, out)))
    return out


# ---------------------------------------------------------------------------
# shape operations
# ---------------------------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(shape)
    out = Tensor(a.value.reshape(shape), (a,))
    out.vjp = lambda g: (reshape(g, a.shape),)
    out.jvp_rule = lambda da: reshape(da, shape)
    return out


def swap_last2(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.swapaxes(a.value, -1, -2).copy(), (a,))
    out.vjp = lambda g: (swap_last2(g),)
    out.jvp_rule = lambda da: swap_last2(da)
    return out


def broadcast_to(a, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(shape)
    out = Tensor(np.broadcast_to(a.value, shape).copy(), (a,))
    out.vjp = lambda g: (_sum_to(g, a.shape),)
    out.jvp_rule = lambda da: broadcast_to(da, shape)
    return out


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.sum(a.value, axis=axis, keepdims=keepdims), (a,))

    def _vjp(g):
        if axis is None:
            return (broadcast_to(reshape(g, (1,) * a.ndim), a.shape),)
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        if not keepdims:
            kshape = list(a.shape)
            for ax in axes:
                kshape[ax % a.ndim] = 1
            g = reshape(g, kshape)
        return (broadcast_to(g, a.shape),)

    out.vjp = _vjp
    out.jvp_rule = lambda da: tsum(da, axis=axis, keepdims=keepdims)
    return out


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = _as_tensor(a)
    n = a.value.size if axis is None else np.prod(
        [a.shape[ax] for ax in ((axis,) if isinstance(axis, int) else axis)]
    )
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def take(a, idx) -> Tensor:
    """Basic (static) indexing / slicing along leading or trailing axes."""
    a = _as_tensor(a)
    out = Tensor(np.array(a.value[idx]), (a,))
    out.vjp = lambda g: (put(g, a.shape, idx),)
    out.jvp_rule = lambda da: take(da, idx)
    return out


def put(g, shape, idx) -> Tensor:
    """Embed `g` into zeros of `shape` at `idx` (adjoint of `take`)."""
    g = _as_tensor(g)
    buf = np.zeros(shape)
    buf[idx] = g.value
    out = Tensor(buf, (g,))
    out.vjp = lambda up: (take(up, idx),)
    out.jvp_rule = lambda dg: put(dg, shape, idx)
    return out


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.value for p in parts], axis=axis), tuple(parts))
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def _slice(i):
        idx = [slice(None)] * parts[0].ndim
        idx[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
        return tuple(idx)

    out.vjp = lambda g: tuple(take(g, _slice(i)) for i in range(len(parts)))

    def _jvp(*tangents):
        pieces = [
            t if t is not None else constant(np.zeros(p.shape))
            for t, p in zip(tangents, parts)
        ]
        return concat(pieces, axis=axis)

    out.jvp_rule = _jvp
    return out


def stack_last(parts: Sequence[Tensor]) -> Tensor:
    """Stack same-shape tensors along a new trailing axis."""
    parts = [_as_tensor(p) for p in parts]
    shaped = [reshape(p, p.shape + (1,)) for p in parts]
    return concat(shaped, axis=-1)


def scatter_pairs(vec, rows, cols, dim: int) -> Tensor:
    """Place entries of `vec` (..., k) at (rows[j], cols[j]) of a (..., dim, dim)
    matrix of zeros.  Fill order is whatever (rows, cols) encode — callers fix
    the convention (row-major lower triangle, strict upper, ...)."""
    vec = _as_tensor(vec)
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    if vec.shape[-1] != rows.size:
        raise TapeError(
            f"scatter_pairs: got {vec.shape[-1]} values for {rows.size} slots"
        )
    buf = np.zeros(vec.shape[:-1] + (dim, dim))
    buf[..., rows, cols] = vec.value
    out = Tensor(buf, (vec,))
    out.vjp = lambda g: (gather_pairs(g, rows, cols),)
    out.jvp_rule = lambda dv: scatter_pairs(dv, rows, cols, dim)
    return out


def gather_pairs(mat, rows, cols) -> Tensor:
    mat = _as_tensor(mat)
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    dim = mat.shape[-1]
    out = Tensor(np.ascontiguousarray(mat.value[..., rows, cols]), (mat,))
    out.vjp = lambda g: (scatter_pairs(g, rows, cols, dim),)
    out.jvp_rule = lambda dm: gather_pairs(dm, rows, cols)
    return out


# ---------------------------------------------------------------------------
# contractions and linear algebra
# ---------------------------------------------------------------------------

def _split_spec(spec: str):
    lhs, rhs = spec.split("->")
    return lhs.split(","), rhs


_EINSUM_PLANS: dict = {}


def _einsum_plan(spec: str, n_ops: int):
    """Validate the subscripts once and precompute the vjp swap specs."""
    key = (spec, n_ops)
    plan = _EINSUM_PLANS.get(key)
    if plan is not None:
        return plan
    in_subs, out_subs = _split_spec(spec)
    if len(in_subs) != n_ops:
        raise TapeError(f"einsum: spec {spec!r} does not match {n_ops} operands")
    for i, s in enumerate(in_subs):
        letters = [c for c in s.replace("...", "")]
        if len(set(letters)) != len(letters):
            raise TapeError(f"einsum: repeated index within operand {i} of {spec!r}")
        pool = set(out_subs.replace("...", ""))
        for j, s2 in enumerate(in_subs):
            if j != i:
                pool |= set(s2.replace("...", ""))
        if not set(letters) <= pool:
            raise TapeError(f"einsum: operand {i} of {spec!r} has an isolated index")
    swaps = []
    for i in range(n_ops):
        other_subs = [in_subs[j] for j in range(n_ops) if j != i]
        target = in_subs[i]
        if "..." not in target and (
            "..." in out_subs or any("..." in s for s in other_subs)
        ):
            # broadcast dims must appear in the output; reduce afterwards
            target = "..." + target
        swaps.append(",".join([out_subs] + other_subs) + "->" + target)
    plan = (tuple(swaps),)
    _EINSUM_PLANS[key] = plan
    return plan


def einsum(spec: str, *ops) -> Tensor:
    """np.einsum with reverse/forward rules obtained by subscript swapping.

    Every index of an operand must appear in the output or another operand
    (no output-free summed indices confined to one operand), and no operand
    may repeat an index; both are checked at construction.
    """
    ops = [_as_tensor(o) for o in ops]
    (swaps,) = _einsum_plan(spec, len(ops))
    out = Tensor(np.einsum(spec, *[o.value for o in ops]), tuple(ops))

    def _vjp(g):
        grads = []
        for i in range(len(ops)):
            others = [ops[j] for j in range(len(ops)) if j != i]
            gi = einsum(swaps[i], g, *others)
            grads.append(_sum_to(gi, ops[i].shape))
        return tuple(grads)

    out.vjp = _vjp

    def _jvp(*tangents):
        total = None
        for i, t in enumerate(tangents):
            if t is None:
                continue
            args = [(t if j == i else ops[j]) for j in range(len(ops))]
            term = einsum(spec, *args)
            total = term if total is None else add(total, term)
        return total

    out.jvp_rule = _jvp
    return out


def _dotT(x, weight) -> Tensor:
    """x @ W^T for x (..., in) and W (out, in); matmul-backed for speed."""
    x, weight = _as_tensor(x), _as_tensor(weight)
    out = Tensor(np.matmul(x.value, weight.value.T), (x, weight))

    def _vjp(g):
        gx = _dotT(g, swap_last2(weight))          # g @ W
        g2 = g if g.ndim == 2 else reshape(g, (-1, g.shape[-1]))
        x2 = x if x.ndim == 2 else reshape(x, (-1, x.shape[-1]))
        gw = _dotT(swap_last2(g2), swap_last2(x2))  # g^T @ x over the batch
        return gx, gw

    out.vjp = _vjp
    out.jvp_rule = lambda dx, dw: (
        _dotT(dx, weight) if dw is None
        else _dotT(x, dw) if dx is None
        else add(_dotT(dx, weight), _dotT(x, dw))
    )
    return out


def linear(x, weight, bias=None) -> Tensor:
    """Affine layer x @ W^T + b with W of shape (out, in)."""
    y = _dotT(x, weight)
    return y if bias is None else add(y, bias)


def matinv(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.linalg.inv(a.value), (a,))

    def _vjp(g):
        it = swap_last2(out)
        return (neg(einsum("...ij,...jk,...kl->...il", it, g, it)),)

    out.vjp = _vjp
    out.jvp_rule = lambda da: neg(einsum("...ij,...jk,...kl->...il", out, da, out))
    return out


def logdet(a) -> Tensor:
    """log det A for symmetric positive definite batched matrices."""
    a = _as_tensor(a)
    try:
        chol = np.linalg.cholesky(a.value)
    except np.linalg.LinAlgError as err:
        raise FloatingPointError(f"logdet: matrix not positive definite ({err})")
    diag = np.diagonal(chol, axis1=-2, axis2=-1)
    out = Tensor(2.0 * np.sum(np.log(diag), axis=-1), (a,))

    def _vjp(g):
        gex = reshape(g, g.shape + (1, 1))
        return (mul(gex, swap_last2(matinv(a))),)

    out.vjp = _vjp
    out.jvp_rule = lambda da: einsum("...ij,...ji->...", matinv(a), da)
    return out


# ---------------------------------------------------------------------------
# reverse and forward sweeps
# ---------------------------------------------------------------------------

def _reachable(root: Tensor, stop_ids=None):
    """Nodes reachable from `root` in increasing tid (= topological) order."""
    seen = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if node.tid in seen:
            continue
        seen[node.tid] = node
        if stop_ids is None or node.tid not in stop_ids:
            stack.extend(node.parents)
    return [seen[k] for k in sorted(seen)]


def grad(output: Tensor, wrt: Sequence[Tensor], seed: Tensor | None = None):
    """Gradients of a scalar `output` with respect to each tensor in `wrt`.

    Returned gradients are tape nodes, so any scalar built from them can be
    differentiated again.  Accumulation order is fixed by node ids, which
    keeps results bit-identical across runs.
    """
    if seed is None:
        if output.value.ndim != 0:
            raise TapeError("grad: output is not scalar; pass an explicit seed")
        seed = constant(1.0)
    adjoint = {output.tid: seed}
    for node in reversed(_reachable(output)):
        g = adjoint.get(node.tid)
        if g is None or node.vjp is None or not node.parents:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None:
                continue
            prev = adjoint.get(parent.tid)
            adjoint[parent.tid] = pg if prev is None else add(prev, pg)
    out = []
    for w in wrt:
        g = adjoint.get(w.tid)
        out.append(g if g is not None else constant(np.zeros(w.shape)))
    return out


def jvp(output: Tensor, wrt: Tensor, tangent) -> Tensor:
    """Directional derivative of every value on the path wrt -> output.

    The tangent sweep emits ordinary tape nodes, so the result remains
    differentiable (this carries the divergence terms of friction
    operators through parameter gradients).
    """
    tangent = _as_tensor(tangent)
    if tangent.shape != wrt.shape:
        raise TapeError("jvp: tangent shape does not match the leaf")
    tangents: dict[int, Tensor] = {wrt.tid: tangent}
    for node in _reachable(output, stop_ids={wrt.tid}):
        if node.tid in tangents or not node.parents:
            continue
        args = [tangents.get(p.tid) for p in node.parents]
        if all(a is None for a in args):
            continue
        if node.jvp_rule is None:
            raise TapeError(f"jvp: node {node!r} has no forward rule")
        t = node.jvp_rule(*args)
        if t is not None:
            tangents[node.tid] = t
    got = tangents.get(output.tid)
    return got if got is not None else constant(np.zeros(output.shape))


# ---------------------------------------------------------------------------
# finite-difference harness
# ---------------------------------------------------------------------------

def fd_check(fn: Callable[[np.ndarray], tuple], point: np.ndarray,
             step: float = 1e-5) -> float:
    """Max relative |analytic - central difference| over coordinates.

    `fn` maps a flat parameter vector to (scalar value, analytic gradient).
    Non-smooth points yield a large number, never an exception.
    """
    point = np.asarray(point, dtype=np.float64)
    _, analytic = fn(point)
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    worst = 0.0
    for i in range(point.size):
        shift = np.zeros_like(point)
        shift[i] = step
        up, _ = fn(point + shift)
        dn, _ = fn(point - shift)
        fd = (up - dn) / (2.0 * step)
        err = abs(analytic[i] - fd) / (abs(analytic[i]) + 1e-12)
        if err > worst:
            worst = err
    return worst
