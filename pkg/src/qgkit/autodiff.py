"""Reverse-mode automatic differentiation over dense float64 tensors.

Provides exactly the operator set the classifier and generator need:
matmul, elementwise arithmetic and activations, stabilized softmax,
per-segment maxima (for max-capped copy scores), embedding lookup,
scatter-sum regrouping, and cross-entropy.  Ops executed while a Tape
is active are recorded in execution order; ``backward`` replays the
tape in exact reverse order and accumulates gradients into every
tensor the loss can reach.  Ops executed with no active tape are plain
forward evaluations, which keeps inference and finite-difference
probing cheap.

Everything is 64-bit and deterministic: the same seed and the same op
sequence produce bit-identical values.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "add",
    "sub",
    "mul",
    "sigmoid",
    "tanh",
    "relu",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "reduce_sum",
    "reduce_mean",
    "softmax",
    "segment_max",
    "lookup",
    "scatter_sum",
    "cross_entropy",
    "backward",
    "AdamState",
    "adam_step",
    "uniform_init",
]

PROB_FLOOR = 1e-12  # floor applied before log in cross_entropy


class Tensor:
    """Dense float64 tensor with an optional gradient slot.

    ``data`` holds the values with their shape; ``values`` exposes the
    flat row-major view.  ``grad`` is None until ``backward`` populates
    it, after which it has the same shape as ``data``.
    """

    __slots__ = ("data", "grad", "name")

    def __init__(self, data, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the values."""
        return self.data.ravel()

    def copy(self) -> "Tensor":
        out = Tensor(self.data.copy(), name=self.name)
        return out

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

    # Operator sugar; all routed through the recorded ops below.
    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, key):
        return _getitem(self, key)


class _TapeEntry:
    __slots__ = ("op", "inputs", "output", "backward_fn")

    def __init__(self, op, inputs, output, backward_fn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


_ACTIVE_TAPES: list["Tape"] = []


class Tape:
    """Ordered record of executed ops.

    Inputs of every entry precede it on the tape by construction, so a
    single reverse sweep implements the chain rule.  Use as a context
    manager; ops executed inside the block are recorded.
    """

    def __init__(self):
        self.entries: list[_TapeEntry] = []

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPES.pop()
        return False

    def __len__(self):
        return len(self.entries)


def _record(op: str, inputs: tuple, output: Tensor, backward_fn: Callable):
    if _ACTIVE_TAPES:
        tensor_inputs = tuple(t for t in inputs if isinstance(t, Tensor))
        _ACTIVE_TAPES[-1].entries.append(
            _TapeEntry(op, tensor_inputs, output, backward_fn)
        )


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate ``grad`` on every tensor the loss reaches through the tape.

    Tensors that appear on the tape but do not feed into the loss end up
    with zero gradients; tensors never touched by the tape keep
    ``grad is None``.
    """
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    seen: dict[int, Tensor] = {}
    for entry in tape.entries:
        for t in entry.inputs:
            seen[id(t)] = t
        seen[id(entry.output)] = entry.output
    for t in seen.values():
        t.grad = np.zeros_like(t.data)
    if loss.grad is None:
        loss.grad = np.zeros_like(loss.data)
    loss.grad = np.ones_like(loss.data)
    for entry in reversed(tape.entries):
        grad_out = entry.output.grad
        if grad_out is None:
            continue
        grads = entry.backward_fn(grad_out)
        for t, g in zip(entry.inputs, grads):
            if g is not None:
                t.grad += g


# ---------------------------------------------------------------------------
# Elementwise ops.  Broadcasting is restricted to equal shapes or a
# single-element operand against anything; other mixes are an error.
# ---------------------------------------------------------------------------


def _as_operands(a, b, op: str):
    ta = a if isinstance(a, Tensor) else Tensor(np.float64(a))
    tb = b if isinstance(b, Tensor) else Tensor(np.float64(b))
    if ta.data.shape != tb.data.shape and ta.data.size != 1 and tb.data.size != 1:
        raise ValueError(
            f"{op}: incompatible shapes {ta.data.shape} vs {tb.data.shape} "
            "(only equal-shape or scalar broadcasting supported)"
        )
    return ta, tb


def _unbroadcast(g: np.ndarray, t: Tensor) -> np.ndarray:
    if g.shape == t.data.shape:
        return g
    return np.sum(g).reshape(t.data.shape)


def add(a, b) -> Tensor:
    ta, tb = _as_operands(a, b, "add")
    out = Tensor(ta.data + tb.data)
    _record(
        "add",
        (ta, tb),
        out,
        lambda g: (_unbroadcast(g, ta), _unbroadcast(g, tb)),
    )
    return out


def sub(a, b) -> Tensor:
    ta, tb = _as_operands(a, b, "sub")
    out = Tensor(ta.data - tb.data)
    _record(
        "sub",
        (ta, tb),
        out,
        lambda g: (_unbroadcast(g, ta), _unbroadcast(-g, tb)),
    )
    return out


def mul(a, b) -> Tensor:
    ta, tb = _as_operands(a, b, "mul")
    out = Tensor(ta.data * tb.data)
    _record(
        "mul",
        (ta, tb),
        out,
        lambda g: (_unbroadcast(g * tb.data, ta), _unbroadcast(g * ta.data, tb)),
    )
    return out


def sigmoid(x: Tensor) -> Tensor:
    # Split by sign to avoid overflow in exp for large |x|.
    d = x.data
    y = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.clip(d, 0, None))),
                 np.exp(np.clip(d, None, 0)) / (1.0 + np.exp(np.clip(d, None, 0))))
    out = Tensor(y)
    _record("sigmoid", (x,), out, lambda g: (g * y * (1.0 - y),))
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = Tensor(y)
    _record("tanh", (x,), out, lambda g: (g * (1.0 - y * y),))
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0))
    _record("relu", (x,), out, lambda g: (g * mask,))
    return out


# ---------------------------------------------------------------------------
# Structural ops.
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(
            f"matmul expects 2-D operands, got {a.data.shape} and {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul: inner dimensions disagree, {a.data.shape} x {b.data.shape}"
        )
    out = Tensor(a.data @ b.data)
    _record(
        "matmul",
        (a, b),
        out,
        lambda g: (g @ b.data.T, a.data.T @ g),
    )
    return out


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ValueError(f"transpose expects a 2-D tensor, got {x.data.shape}")
    out = Tensor(x.data.T.copy())
    _record("transpose", (x,), out, lambda g: (g.T,))
    return out


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    out = Tensor(x.data.reshape(shape).copy())
    _record("reshape", (x,), out, lambda g: (g.reshape(x.data.shape),))
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ValueError("concat of an empty list")
    parts = [t.data for t in tensors]
    out = Tensor(np.concatenate(parts, axis=axis))
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    _record("concat", tuple(tensors), out, back)
    return out


def _getitem(x: Tensor, key) -> Tensor:
    out_data = x.data[key]
    out = Tensor(np.array(out_data, dtype=np.float64))

    def back(g):
        gx = np.zeros_like(x.data)
        gx[key] += g.reshape(out_data.shape)
        return (gx,)

    _record("getitem", (x,), out, back)
    return out


def reduce_sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out = Tensor(np.sum(x.data, axis=axis, keepdims=keepdims))

    def back(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.data.shape).copy(),)

    _record("reduce_sum", (x,), out, back)
    return out


def reduce_mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else x.data.shape[axis]
    return mul(reduce_sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


# ---------------------------------------------------------------------------
# Probability ops.
# ---------------------------------------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if x.data.shape[axis] == 0:
        raise ValueError("softmax over an empty axis")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)
    out = Tensor(y)

    def back(g):
        inner = np.sum(g * y, axis=axis, keepdims=True)
        return ((g - inner) * y,)

    _record("softmax", (x,), out, back)
    return out


def segment_max(
    scores: Tensor, segments: Sequence[Sequence[int]]
) -> tuple[Tensor, list[int]]:
    """Per-segment maximum with the winning index of each segment.

    Gradient is routed only to each segment's winning position; ties go
    to the lowest index.  Returns ``(maxima, argmax_indices)``.
    """
    if scores.data.ndim != 1:
        raise ValueError(f"segment_max expects a 1-D score tensor, got {scores.shape}")
    n = scores.data.shape[0]
    maxima = np.empty(len(segments), dtype=np.float64)
    winners: list[int] = []
    for k, seg in enumerate(segments):
        idx = sorted(int(i) for i in seg)
        if not idx:
            raise ValueError(f"segment {k} is empty")
        if idx[0] < 0 or idx[-1] >= n:
            raise ValueError(f"segment {k} indexes outside 0..{n - 1}")
        vals = scores.data[idx]
        w = idx[int(np.argmax(vals))]
        winners.append(w)
        maxima[k] = scores.data[w]
    out = Tensor(maxima)

    def back(g):
        gs = np.zeros_like(scores.data)
        for k, w in enumerate(winners):
            gs[w] += g[k]
        return (gs,)

    _record("segment_max", (scores,), out, back)
    return out, winners


def lookup(table: Tensor, ids: Sequence[int]) -> Tensor:
    """Row gather from an embedding table; backward scatter-adds."""
    if table.data.ndim != 2:
        raise ValueError(f"lookup expects a 2-D table, got {table.shape}")
    idx = np.asarray(list(ids), dtype=np.intp)
    v = table.data.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= v):
        raise ValueError(f"lookup id outside 0..{v - 1}")
    out = Tensor(table.data[idx])

    def back(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    _record("lookup", (table,), out, back)
    return out


def scatter_sum(values: Tensor, index_map: Sequence[int], size: int) -> Tensor:
    """out[i] = sum of values[j] over all j with index_map[j] == i."""
    if values.data.ndim != 1:
        raise ValueError(f"scatter_sum expects a 1-D tensor, got {values.shape}")
    idx = np.asarray(list(index_map), dtype=np.intp)
    if idx.shape[0] != values.data.shape[0]:
        raise ValueError("index_map length must match values length")
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise ValueError(f"scatter_sum target outside 0..{size - 1}")
    acc = np.zeros(size, dtype=np.float64)
    np.add.at(acc, idx, values.data)
    out = Tensor(acc)
    _record("scatter_sum", (values,), out, lambda g: (g[idx],))
    return out


def cross_entropy(pred_dist: Tensor, gold: int) -> Tensor:
    """Negative log-likelihood of ``gold`` under a probability vector.

    The probability is floored at 1e-12 before the log so confidently
    wrong predictions stay finite.
    """
    flat = pred_dist.data.ravel()
    if gold < 0 or gold >= flat.shape[0]:
        raise ValueError(f"gold index {gold} outside 0..{flat.shape[0] - 1}")
    p = flat[gold]
    out = Tensor(-np.log(max(p, PROB_FLOOR)))

    def back(g):
        gp = np.zeros_like(pred_dist.data)
        if p > PROB_FLOOR:
            gp.ravel()[gold] = -float(g) / p
        return (gp,)

    _record("cross_entropy", (pred_dist,), out, back)
    return out


# ---------------------------------------------------------------------------
# Optimizer and initialization.
# ---------------------------------------------------------------------------


class AdamState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self):
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update with decoupled weight decay, in place."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.data.shape:
            raise ValueError(
                f"adam_step: gradient shape {g.shape} does not match "
                f"parameter {name!r} shape {p.data.shape}"
            )
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        if weight_decay:
            update = update + weight_decay * p.data
        p.data -= lr * update


def uniform_init(
    rng: np.random.Generator, shape: Sequence[int], fan_in: int, name: str | None = None
) -> Tensor:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=tuple(shape)), name=name)
