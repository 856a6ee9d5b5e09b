"""Float64 tensors with reverse-mode differentiation, losses and Adam.

Operations are recorded on the innermost active :class:`GradientTape` when at
least one input requires a gradient. Outside a tape nothing is recorded, so
inference runs on plain numpy arrays with a thin wrapper.

Backward closures capture the numpy arrays seen at forward time, never the
``Tensor.data`` attribute, so updating parameters after a forward pass does not
change the gradients a persistent tape later produces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

EPS_LOG = 1e-12
PARTITIONS = ("encoder", "decoder", "aux_decoder")

_TAPES: list["GradientTape"] = []
# when a list, relu/max_pool append their active pattern (finite-difference kink detection)
_KINKS: list | None = None


class Tensor:
    __slots__ = ("data", "requires_grad", "name")
    __array_ufunc__ = None  # ndarray <op> Tensor defers to Tensor

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return transpose(self)

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

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

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return index(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def detach(x: Tensor) -> Tensor:
    """Same values, cut from the graph."""
    return Tensor(x.data)


class GradientTape:
    """Records operations while active; ``backward`` turns them into gradients.

    A non-persistent tape may be consumed once. ``persistent=True`` allows
    several backward passes over the same recording, which is how two losses
    sharing one forward pass get separate gradients.
    """

    def __init__(self, persistent=False):
        self.persistent = persistent
        self._nodes: list[tuple[Tensor, tuple, Callable]] = []
        self._consumed = False

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def __len__(self):
        return len(self._nodes)

    def record(self, out, parents, backward_fn):
        self._nodes.append((out, parents, backward_fn))

    def backward(self, loss: Tensor, params=None) -> dict[str, np.ndarray]:
        """Gradients of scalar ``loss`` keyed by parameter name.

        ``params`` is a :class:`ParamStore` or an iterable of named tensors;
        parameters that the loss does not reach get zero arrays.
        """
        if self._consumed:
            raise RuntimeError("gradient tape already consumed; use persistent=True")
        if loss.data.size != 1:
            raise ValueError("backward needs a scalar loss")
        if not self.persistent:
            self._consumed = True

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for out, parents, fn in reversed(self._nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for parent, pg in zip(parents, fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
                    leaves[key] = parent

        if params is None:
            return {t.name: grads[k] for k, t in leaves.items() if t.name is not None and k in grads}
        tensors = params.tensors() if isinstance(params, ParamStore) else list(params)
        return {t.name: grads.get(id(t), np.zeros_like(t.data)) for t in tensors}


def backward(tape: GradientTape, loss: Tensor, params=None) -> dict[str, np.ndarray]:
    return tape.backward(loss, params)


def _finite(arr, op):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values produced by {op}")


def _make(data, parents, backward_fn, op) -> Tensor:
    _finite(data, op)
    out = Tensor(data)
    if _TAPES and any(p.requires_grad for p in parents):
        out.requires_grad = True
        _TAPES[-1].record(out, parents, backward_fn)
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# --- elementwise -----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    x, y = a.data, b.data
    return _make(x * y, (a, b),
                 lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)), "mul")


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _make(y, (x,), lambda g: (g * y,), "exp")


def log_clamped(x: Tensor, eps: float = EPS_LOG) -> Tensor:
    """``log(max(x, eps))``; clamped entries pass no gradient."""
    v = x.data
    safe = np.maximum(v, eps)
    live = v > eps
    return _make(np.log(safe), (x,), lambda g: (np.where(live, g / safe, 0.0),), "log")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _make(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def sigmoid(x: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _make(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(x: Tensor) -> Tensor:
    live = x.data > 0
    if _KINKS is not None:
        _KINKS.append(live.tobytes())
    return _make(np.where(live, x.data, 0.0), (x,), lambda g: (g * live,), "relu")


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    v = x.data
    t = np.tanh(_GELU_C * (v + 0.044715 * v ** 3))
    dy = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * v * v)
    return _make(0.5 * v * (1.0 + t), (x,), lambda g: (g * dy,), "gelu")


# --- shape and linear algebra ----------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    x, y = a.data, b.data
    if x.ndim < 2 or y.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")

    def back(g):
        return (_unbroadcast(g @ np.swapaxes(y, -1, -2), x.shape),
                _unbroadcast(np.swapaxes(x, -1, -2) @ g, y.shape))

    return _make(x @ y, (a, b), back, "matmul")


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),), "transpose")


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def _basic(idx) -> bool:
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (slice, int, np.integer)) or p is Ellipsis or p is None for p in parts)


def index(x: Tensor, idx) -> Tensor:
    shape = x.shape
    basic = _basic(idx)

    def back(g):
        out = np.zeros(shape)
        if basic:
            out[idx] = g
        else:
            np.add.at(out, idx, g)
        return (out,)

    return _make(x.data[idx], (x,), back, "index")


def take_rows(table: Tensor, ids) -> Tensor:
    """Embedding lookup: ``table[ids]`` with scatter-add gradient."""
    ids = np.asarray(ids, dtype=np.int64)
    shape = table.shape

    def back(g):
        out = np.zeros(shape)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, shape[-1]))
        return (out,)

    return _make(table.data[ids], (table,), back, "take_rows")


def pick(x: Tensor, idx) -> Tensor:
    """Select one entry per row along the last axis."""
    idx = np.asarray(idx, dtype=np.int64)
    n = x.shape[-1]
    if np.any(idx < 0) or np.any(idx >= n):
        raise IndexError(f"label index out of range for {n} classes")
    ex = idx[..., None]
    shape = x.shape

    def back(g):
        out = np.zeros(shape)
        np.put_along_axis(out, ex, g[..., None], axis=-1)
        return (out,)

    return _make(np.take_along_axis(x.data, ex, axis=-1)[..., 0], (x,), back, "pick")


def concat(tensors: Sequence[Tensor], axis=-1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors),
                 lambda g: tuple(np.split(g, cuts, axis=axis)), "concat")


def sum(x: Tensor, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    shape = x.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), back, "sum")


def mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def max_pool(x: Tensor, axis=-1) -> Tensor:
    """Max along ``axis``; the gradient goes to the first maximal entry."""
    arg = np.expand_dims(np.argmax(x.data, axis=axis), axis)
    if _KINKS is not None:
        _KINKS.append(arg.tobytes())
    shape = x.shape

    def back(g):
        out = np.zeros(shape)
        np.put_along_axis(out, arg, np.expand_dims(g, axis), axis=axis)
        return (out,)

    return _make(np.take_along_axis(x.data, arg, axis=axis).squeeze(axis), (x,), back, "max_pool")


# --- normalisation ---------------------------------------------------------

def softmax(logits, axis=-1, mask=None) -> Tensor:
    """Max-shifted softmax. ``mask`` (broadcastable bool) marks allowed entries."""
    logits = as_tensor(logits)
    z = logits.data
    if z.size == 0 or z.shape[axis] == 0:
        raise ValueError("empty distribution")
    if mask is not None:
        mask = np.broadcast_to(mask, z.shape)
        if not np.all(np.any(mask, axis=axis)):
            raise ValueError("empty distribution: every entry is masked")
        z = np.where(mask, z, -np.inf)
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def back(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _make(y, (logits,), back, "softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps=1e-5) -> Tensor:
    v = x.data
    mu = v.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(v.var(axis=-1, keepdims=True) + eps)
    xhat = (v - mu) * inv
    gd = gain.data

    def back(g):
        dxhat = g * gd
        dx = inv * (dxhat - dxhat.mean(-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _make(xhat * gd + bias.data, (x, gain, bias), back, "layer_norm")


def dropout_apply(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1/(1-rate)``; identity in eval."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(keep))


# --- losses ----------------------------------------------------------------

def cross_entropy_onehot(pred: Tensor, gold) -> Tensor:
    """``-log(pred[gold])`` with the probability clamped at ``EPS_LOG``.

    Works row-wise for a batch of distributions; returns one value per row.
    """
    return mul(log_clamped(pick(pred, gold)), -1.0)


def kl_divergence(p: Tensor, q: Tensor) -> Tensor:
    """KL(p || q) along the last axis, both clamped inside the log."""
    p, q = as_tensor(p), as_tensor(q)
    if p.shape != q.shape:
        raise ValueError(f"distribution shapes differ: {p.shape} vs {q.shape}")
    return sum(mul(p, sub(log_clamped(p), log_clamped(q))), axis=-1)


# --- parameters and optimisation -------------------------------------------

@dataclass
class Param:
    tensor: Tensor
    partition: str
    init: str


class ParamStore:
    """Named parameters split into encoder / decoder / auxiliary-decoder sets."""

    def __init__(self):
        self._params: dict[str, Param] = {}

    def add(self, name, partition, shape, init, rng=None) -> Tensor:
        if partition not in PARTITIONS:
            raise ValueError(f"unknown partition {partition!r}")
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        data = initialise(init, shape, rng)
        t = Tensor(data, requires_grad=True, name=name)
        self._params[name] = Param(t, partition, init)
        return t

    def __getitem__(self, name) -> Tensor:
        return self._params[name].tensor

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self, partitions=None) -> list[str]:
        if isinstance(partitions, str):
            partitions = (partitions,)
        return [n for n, p in self._params.items() if partitions is None or p.partition in partitions]

    def tensors(self, partitions=None) -> list[Tensor]:
        return [self._params[n].tensor for n in self.names(partitions)]

    def partition_of(self, name) -> str:
        return self._params[name].partition

    def init_of(self, name) -> str:
        return self._params[name].init

    def snapshot(self, partitions=None) -> dict[str, np.ndarray]:
        return {n: self._params[n].tensor.data.copy() for n in self.names(partitions)}

    def load(self, values: dict[str, np.ndarray]):
        for name, arr in values.items():
            t = self[name]
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != t.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {t.shape}")
            t.data = arr.copy()


def initialise(init: str, shape, rng) -> np.ndarray:
    """Build an array from a descriptor such as ``uniform:0.1`` or ``normal:1``."""
    kind, _, arg = init.partition(":")
    if kind == "zeros":
        return np.zeros(shape)
    if kind == "ones":
        return np.ones(shape)
    if kind == "uniform":
        a = float(arg)
        return rng.uniform(-a, a, size=shape)
    if kind == "normal":
        return rng.normal(0.0, float(arg), size=shape)
    raise ValueError(f"unknown initialiser {init!r}")


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: Iterable[Tensor], grads: dict[str, np.ndarray]):
    """One bias-corrected Adam update. Parameter arrays are rebound, not mutated."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p in params:
        g = grads[p.name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {p.name} {p.shape}")
        m = state.m.get(p.name)
        v = state.v.get(p.name)
        m = (1.0 - state.beta1) * g if m is None else state.beta1 * m + (1.0 - state.beta1) * g
        v = (1.0 - state.beta2) * g * g if v is None else state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[p.name], state.v[p.name] = m, v
        p.data = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# --- verification ----------------------------------------------------------

@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_param: str | None
    worst_index: tuple | None
    checked: int
    skipped: int
    unresolved: int
    per_param: dict[str, float]

    def passed(self, tol=1e-4) -> bool:
        return self.max_rel_error <= tol and self.checked > 0


def _eval_with_kinks(loss_fn):
    global _KINKS
    _KINKS = []
    try:
        value = float(loss_fn().data)
        return value, _KINKS
    finally:
        _KINKS = None


def finite_diff_check(loss_fn, params, h=1e-5, coords_per_param=6, seed=0,
                      grad_hook=None, tol=1e-4) -> GradCheckResult:
    """Compare tape gradients with central differences on sampled coordinates.

    ``loss_fn()`` must be deterministic and return a scalar Tensor. The relative
    error at a coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``. A coordinate
    whose perturbation flips a ReLU or max-pool winner straddles a
    non-differentiable point; it is counted in ``skipped`` instead of compared.
    When both magnitudes sit below ``10 * eps * |f| / (h * tol)`` the central
    difference cannot resolve a relative error of ``tol`` at all; such
    coordinates are counted in ``unresolved``.
    ``grad_hook`` may rewrite the analytic gradients first (negative controls).
    """
    tensors = params.tensors() if isinstance(params, ParamStore) else list(params)
    with GradientTape() as tape:
        loss = loss_fn()
    _finite(loss.data, "loss")
    grads = tape.backward(loss, tensors)
    if grad_hook is not None:
        grads = grad_hook(grads)
    _, base = _eval_with_kinks(loss_fn)

    rng = np.random.default_rng(seed)
    worst, worst_name, worst_idx, checked, skipped, unresolved = 0.0, None, None, 0, 0, 0
    eps = np.finfo(np.float64).eps
    per_param = {}
    for t in tensors:
        flat = t.data.reshape(-1)
        n = min(coords_per_param, flat.size)
        picks = rng.choice(flat.size, size=n, replace=False)
        p_worst = 0.0
        for k in picks:
            idx = np.unravel_index(k, t.shape)
            orig = t.data[idx]
            t.data[idx] = orig + h
            f_plus, k_plus = _eval_with_kinks(loss_fn)
            t.data[idx] = orig - h
            f_minus, k_minus = _eval_with_kinks(loss_fn)
            t.data[idx] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise FloatingPointError(f"non-finite loss while perturbing {t.name}")
            if k_plus != base or k_minus != base:
                skipped += 1
                continue
            numeric = (f_plus - f_minus) / (2 * h)
            analytic = float(grads[t.name][idx])
            floor = 10 * eps * max(abs(f_plus), abs(f_minus)) / (h * tol)
            if max(abs(analytic), abs(numeric)) < floor:
                unresolved += 1
                continue
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            checked += 1
            p_worst = max(p_worst, err)
            if err > worst:
                worst, worst_name, worst_idx = err, t.name, tuple(int(i) for i in idx)
        per_param[t.name] = p_worst
    return GradCheckResult(worst, worst_name, worst_idx, checked, skipped, unresolved, per_param)
