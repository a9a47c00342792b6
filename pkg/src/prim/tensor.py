"""Dense float64 tensors with a reverse-mode gradient tape.

Operations record onto the innermost active :class:`Tape`.  Outside a tape
nothing is recorded, which is what inference uses.

    with Tape() as tape:
        loss = (x @ w).sum()
    backward(loss, tape)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class DimensionError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return tsum(self, axis)


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered record of differentiable operations.

    Ops are appended as they execute, so every op's inputs were produced
    earlier on the tape (or are leaves).
    """

    nodes: list[_Node] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)


_TAPES: list[Tape] = []


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data: np.ndarray, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.name = None
    tracked = bool(_TAPES) and any(t.requires_grad for t in inputs)
    out.requires_grad = tracked
    if tracked:
        _TAPES[-1].nodes.append(_Node(out, inputs, backward_fn))
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate ``.grad`` for every tensor reachable from ``loss`` on ``tape``.

    Gradients accumulate into existing ``.grad`` arrays; zero them between
    optimizer steps.
    """
    if loss.data.size != 1:
        raise DimensionError(f"backward() needs a scalar loss, got shape {loss.shape}")
    # intermediates keep their gradients in a side table so leaf .grad
    # fields are the only persistent state
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
    # whatever is left belongs to leaves (or to tensors created off-tape)
    for node in tape.nodes:
        for inp in node.inputs:
            g = grads.pop(id(inp), None)
            if g is not None:
                inp.grad = g.copy() if inp.grad is None else inp.grad + g
    if id(loss) in grads and loss.requires_grad:
        loss.grad = grads.pop(id(loss))


def check_finite(t: Tensor, what: str) -> Tensor:
    if not np.all(np.isfinite(t.data)):
        raise NonFiniteError(f"non-finite values in {what}")
    return t


# ---------------------------------------------------------------------------
# elementwise arithmetic


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return _record(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _record(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data
    return _record(ad * bd, (a, b),
                   lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return _record(out, (a, b),
                   lambda g: (_unbroadcast(g / bd, ad.shape),
                              _unbroadcast(-g * out / bd, bd.shape)))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return _record(out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    xd = x.data
    return _record(np.log(xd), (x,), lambda g: (g / xd,))


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)
    return _record(out, (x,), lambda g: (g * 0.5 / out,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _record(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    mask = x.data > 0
    scale = np.where(mask, 1.0, slope)
    return _record(x.data * scale, (x,), lambda g: (g * scale,))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # branch-free stable form: exp of a non-positive argument only
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return _record(out, (x,), lambda g: (g * out * (1.0 - out),))


def softplus(x: Tensor) -> Tensor:
    """log(1 + exp(x)) without overflow; -log sigmoid(s) == softplus(-s)."""
    xd = x.data
    out = np.maximum(xd, 0.0) + np.log1p(np.exp(-np.abs(xd)))
    return _record(out, (x,), lambda g: (g * _sigmoid(xd),))


def log_sigmoid(x: Tensor) -> Tensor:
    return mul(softplus(mul(x, -1.0)), -1.0)


# ---------------------------------------------------------------------------
# shape and linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return _record(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise DimensionError(f"transpose needs a matrix, got shape {x.shape}")
    return _record(x.data.T.copy(), (x,), lambda g: (g.T,))


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {old} as {shape}") from None
    return _record(out, (x,), lambda g: (g.reshape(old),))


def getitem(x: Tensor, key) -> Tensor:
    old = x.shape

    def bw(g):
        full = np.zeros(old)
        full[key] = g
        return (full,)

    return _record(np.array(x.data[key]), (x,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise DimensionError("concat of zero tensors")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"concat: incompatible shapes {shapes} on axis {axis}") from None
    cuts = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _record(out, tensors, lambda g: tuple(np.split(g, cuts, axis=axis)))


def tsum(x: Tensor, axis=None) -> Tensor:
    old = x.shape
    out = x.data.sum(axis=axis)

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, old).copy(),)

    return _record(np.asarray(out, dtype=np.float64), (x,), bw)


def mean(x: Tensor, axis=None) -> Tensor:
    count = x.data.size if axis is None else x.shape[axis]
    return mul(tsum(x, axis), 1.0 / count)


def take(x: Tensor, index: np.ndarray) -> Tensor:
    """Rows ``x[index]``; the backward pass scatter-adds into repeated rows."""
    index = np.asarray(index, dtype=np.int64)
    n = x.shape[0]

    def bw(g):
        sel = _selection(index, n)
        return (np.asarray(sel.T @ g.reshape(len(index), -1)).reshape((n,) + g.shape[1:]),)

    return _record(x.data[index], (x,), bw)


def _selection(index: np.ndarray, n: int) -> sp.csr_matrix:
    m = len(index)
    return sp.csr_matrix((np.ones(m), (np.arange(m), index)), shape=(m, n))


def segment_sum(x: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    """Sum rows of ``x`` into ``n_segments`` buckets.

    Rows are summed in their stored order within each bucket, so callers
    that sort rows get a reproducible floating-point result.
    """
    segments = np.asarray(segments, dtype=np.int64)
    if x.shape[0] != len(segments):
        raise DimensionError(f"segment_sum: {x.shape[0]} rows but {len(segments)} segment ids")
    agg = sp.csr_matrix((np.ones(len(segments)), (segments, np.arange(len(segments)))),
                        shape=(n_segments, len(segments)))
    flat = x.data.reshape(len(segments), -1)
    out = np.asarray(agg @ flat).reshape((n_segments,) + x.shape[1:])
    return _record(out, (x,), lambda g: (g[segments],))


def spmm(matrix: sp.spmatrix, x: Tensor) -> Tensor:
    """Constant sparse matrix times a dense tensor."""
    if matrix.shape[1] != x.shape[0]:
        raise DimensionError(f"spmm: incompatible shapes {matrix.shape} and {x.shape}")
    mt = matrix.T.tocsr()
    return _record(np.asarray(matrix @ x.data), (x,), lambda g: (np.asarray(mt @ g),))


_DOT_CHUNK = 1 << 16


def _rowwise_dots(a: np.ndarray, b: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """``a[rows[e]] . b[cols[e]]`` for every e.

    Small operands go through one dense product; otherwise rows are
    gathered in chunks to bound memory.
    """
    if a.shape[0] * b.shape[0] <= 32 * len(rows):
        return (a @ b.T)[rows, cols]
    out = np.empty(len(rows))
    for s in range(0, len(rows), _DOT_CHUNK):
        r, c = rows[s:s + _DOT_CHUNK], cols[s:s + _DOT_CHUNK]
        out[s:s + _DOT_CHUNK] = np.einsum("ij,ij->i", a[r], b[c])
    return out


def pair_dot(a: Tensor, b: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Dot products ``a[rows[e]] . b[cols[e]]`` without materializing the gathers."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionError(f"pair_dot: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def bw(g):
        m = sp.csr_matrix((g, (rows, cols)), shape=(ad.shape[0], bd.shape[0]))
        return np.asarray(m @ bd), np.asarray(m.T @ ad)

    return _record(_rowwise_dots(ad, bd, rows, cols), (a, b), bw)


def weighted_gather_sum(weights: Tensor, x: Tensor, dst: np.ndarray, src: np.ndarray,
                        n_dst: int) -> Tensor:
    """``out[i] = sum_e w[e] * x[src[e]]`` over edges with ``dst[e] == i``.

    ``weights`` of shape (E, K) applies column k to the k-th of K equal
    column blocks of ``x`` (one block per attention head).
    """
    dst = np.asarray(dst, dtype=np.int64)
    src = np.asarray(src, dtype=np.int64)
    wd = weights.data.reshape(len(dst), -1)
    xd = x.data
    heads = wd.shape[1]
    if xd.ndim != 2 or xd.shape[1] % heads:
        raise DimensionError(f"weighted_gather_sum: {heads} weight columns for shape {xd.shape}")
    width = xd.shape[1] // heads
    mats = [sp.csr_matrix((wd[:, k], (dst, src)), shape=(n_dst, xd.shape[0])) for k in range(heads)]
    out = np.concatenate([np.asarray(m @ xd[:, k * width:(k + 1) * width])
                          for k, m in enumerate(mats)], axis=1)

    def bw(g):
        dx = np.concatenate([np.asarray(m.T @ g[:, k * width:(k + 1) * width])
                             for k, m in enumerate(mats)], axis=1)
        dw = np.column_stack([_rowwise_dots(g[:, k * width:(k + 1) * width],
                                            xd[:, k * width:(k + 1) * width], dst, src)
                              for k in range(heads)])
        return dw.reshape(weights.shape), dx

    return _record(out, (weights, x), bw)


def softmax(x: Tensor) -> Tensor:
    if x.ndim != 1:
        raise DimensionError(f"softmax expects a vector, got shape {x.shape}")
    if x.shape[0] == 0:
        raise DimensionError("softmax of an empty vector")
    z = np.exp(x.data - x.data.max())
    out = z / z.sum()
    return _record(out, (x,), lambda g: (out * (g - np.dot(g, out)),))


def segment_softmax(x: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    """Softmax of ``x`` within each segment, independently per column.

    ``x`` has shape (E,) or (E, K); ``segments`` maps each row to a bucket.
    """
    segments = np.asarray(segments, dtype=np.int64)
    xd = x.data
    if xd.shape[0] != len(segments):
        raise DimensionError(f"segment_softmax: {xd.shape[0]} rows but {len(segments)} segment ids")
    flat = xd.reshape(len(segments), int(np.prod(xd.shape[1:])))
    seg_max = np.full((n_segments, flat.shape[1]), -np.inf)
    np.maximum.at(seg_max, segments, flat)
    z = np.exp(flat - seg_max[segments])
    agg = sp.csr_matrix((np.ones(len(segments)), (segments, np.arange(len(segments)))),
                        shape=(n_segments, len(segments)))
    denom = np.asarray(agg @ z)
    out = (z / denom[segments]).reshape(xd.shape)

    def bw(g):
        gf = g.reshape(flat.shape)
        of = out.reshape(flat.shape)
        dot = np.asarray(agg @ (gf * of))
        return ((of * (gf - dot[segments])).reshape(xd.shape),)

    return _record(out, (x,), bw)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], state: AdamState) -> None:
    """One bias-corrected Adam update using each parameter's ``.grad``.

    Parameters without a gradient are treated as having a zero gradient.
    """
    for name, p in params.items():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data = p.data - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    tolerance: float
    max_rel_error: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(err <= self.tolerance for err in self.max_rel_error.values())

    def worst(self) -> tuple[str, float]:
        return max(self.max_rel_error.items(), key=lambda kv: kv[1])

    def lines(self) -> list[str]:
        out = []
        for name, err in self.max_rel_error.items():
            status = "ok" if err <= self.tolerance else "FAIL"
            out.append(f"{name}\t{err:.3e}\t{status}")
        return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def grad_check(loss_fn: Callable[[], Tensor], params: dict[str, Tensor],
               tolerance: float = 1e-4, step: float = 1e-5,
               names: Iterable[str] | None = None) -> GradCheckReport:
    """Compare tape gradients with central differences for every entry.

    ``loss_fn`` must rebuild the scalar loss from the current parameter
    values each time it is called.
    """
    for p in params.values():
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape)
    report = {}
    for name in (names if names is not None else params):
        p = params[name]
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up = loss_fn().item()
            flat[k] = orig - step
            down = loss_fn().item()
            flat[k] = orig
            nflat[k] = (up - down) / (2.0 * step)
        err = relative_error(analytic, numeric)
        report[name] = float(err.max()) if err.size else 0.0
    return GradCheckReport(tolerance, report)


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))
