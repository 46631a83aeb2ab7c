"""Minimal n-dimensional tensor engine with reverse-mode automatic differentiation.

Tensors wrap float64 numpy arrays.  Operations executed while a Tape is
active are recorded; ``backward`` replays the tape in reverse and populates
``grad`` on every ``requires_grad`` leaf it saw.  Without an active tape the
same operations run as plain (inference-mode) array math.

All forward math is deterministic: identical inputs and seeds produce
bit-identical outputs in single-threaded use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import DataError


class Tensor:
    """A value in the computation graph."""

    __slots__ = ("values", "requires_grad", "grad", "_tracked")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._tracked = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def item(self) -> float:
        return float(self.values)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A named learnable tensor."""

    __slots__ = ("name",)

    def __init__(self, name: str, values):
        super().__init__(values, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


@dataclass
class _Node:
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward_fn: callable


class Tape:
    """Ordered record of operations for one reverse-mode pass.

    Use as a context manager around the forward computation::

        with Tape() as tape:
            loss = softmax_cross_entropy(affine(x, w, b), labels)
        backward(loss, tape)

    A tape and its tensors are a single-threaded unit of work; distinct tapes
    may run concurrently over shared read-only parameters.
    """

    _active: "Tape | None" = None

    def __init__(self):
        self.nodes: list[_Node] = []
        self.watched: list[Tensor] = []
        self._watched_ids: set[int] = set()

    def __enter__(self) -> "Tape":
        if Tape._active is not None:
            raise DataError("tapes do not nest; close the active tape first")
        Tape._active = self
        return self

    def __exit__(self, exc_type, exc, tb):
        Tape._active = None
        return False

    def watch(self, tensor: Tensor) -> None:
        """Register a leaf so backward assigns it a gradient even if unused."""
        if tensor.requires_grad and id(tensor) not in self._watched_ids:
            self._watched_ids.add(id(tensor))
            self.watched.append(tensor)

    def record(self, output: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> None:
        for t in inputs:
            if t.requires_grad and not t._tracked:
                self.watch(t)
        output._tracked = True
        self.nodes.append(_Node(output, inputs, backward_fn))


def _maybe_record(output: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    tape = Tape._active
    if tape is not None and any(t.requires_grad or t._tracked for t in inputs):
        tape.record(output, inputs, backward_fn)
    return output


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate gradients of a scalar loss into all requires_grad leaves.

    Leaves watched by the tape but not on any path to the loss receive a zero
    gradient.
    """
    if loss.shape != ():
        raise DataError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss._tracked:
        raise DataError("loss was not produced on this tape")
    grads: dict[int, np.ndarray] = {id(loss): np.array(1.0)}
    for node in reversed(tape.nodes):
        upstream = grads.pop(id(node.output), None)
        if upstream is None:
            continue
        input_grads = node.backward_fn(upstream)
        for tensor, g in zip(node.inputs, input_grads):
            if g is None or not (tensor.requires_grad or tensor._tracked):
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
    for leaf in tape.watched:
        g = grads.get(id(leaf))
        leaf.grad = np.zeros_like(leaf.values) if g is None else np.asarray(g, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.values + b.values)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _maybe_record(out, (a, b), bw)


def affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """y = x @ W + b for x: (N, D_in), W: (D_in, D_out), b: (D_out,)."""
    if x.ndim != 2 or W.ndim != 2 or b.ndim != 1:
        raise DataError(
            f"affine expects 2D x, 2D W, 1D b; got {x.shape}, {W.shape}, {b.shape}"
        )
    if x.shape[1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise DataError(f"affine shape mismatch: x {x.shape}, W {W.shape}, b {b.shape}")
    out = Tensor(x.values @ W.values + b.values)

    def bw(g):
        return g @ W.values.T, x.values.T @ g, g.sum(axis=0)

    return _maybe_record(out, (x, W, b), bw)


def _im2col(padded: np.ndarray, k: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    n, c = padded.shape[:2]
    sn, sc, sh, sw = padded.strides
    view = as_strided(
        padded,
        shape=(n, c, out_h, out_w, k, k),
        strides=(sn, sc, sh * stride, sw * stride, sh, sw),
    )
    # (N*out_h*out_w, C*k*k)
    return view.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, c * k * k)


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2D cross-correlation of x: (N, C_in, H, W) with kernel: (C_out, C_in, k, k)."""
    if x.ndim != 4 or kernel.ndim != 4:
        raise DataError(f"conv2d expects 4D input and kernel, got {x.shape}, {kernel.shape}")
    n, c_in, h, w = x.shape
    c_out, kc, kh, kw = kernel.shape
    if kc != c_in:
        raise DataError(f"kernel expects {kc} input channels, input has {c_in}")
    if kh != kw:
        raise DataError(f"only square kernels supported, got {kh}x{kw}")
    k = kh
    if stride < 1 or padding < 0:
        raise DataError(f"invalid stride {stride} or padding {padding}")
    if h + 2 * padding < k or w + 2 * padding < k:
        raise DataError(
            f"kernel {k}x{k} larger than padded input {h + 2 * padding}x{w + 2 * padding}"
        )
    out_h = (h + 2 * padding - k) // stride + 1
    out_w = (w + 2 * padding - k) // stride + 1
    padded = np.pad(x.values, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(padded, k, stride, out_h, out_w)
    w_mat = kernel.values.reshape(c_out, c_in * k * k)
    out_vals = (cols @ w_mat.T).reshape(n, out_h, out_w, c_out).transpose(0, 3, 1, 2)
    out = Tensor(np.ascontiguousarray(out_vals))

    def bw(g):
        g_mat = g.transpose(0, 2, 3, 1).reshape(n * out_h * out_w, c_out)
        grad_kernel = (g_mat.T @ cols).reshape(c_out, c_in, k, k)
        grad_cols = (g_mat @ w_mat).reshape(n, out_h, out_w, c_in, k, k)
        grad_cols = grad_cols.transpose(0, 3, 4, 5, 1, 2)  # (N, C_in, k, k, out_h, out_w)
        grad_padded = np.zeros_like(padded)
        for i in range(k):
            for j in range(k):
                grad_padded[:, :, i:i + stride * out_h:stride,
                            j:j + stride * out_w:stride] += grad_cols[:, :, i, j]
        if padding:
            grad_x = grad_padded[:, :, padding:padding + h, padding:padding + w]
        else:
            grad_x = grad_padded
        return grad_x, grad_kernel

    return _maybe_record(out, (x, kernel), bw)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.values, 0.0))

    def bw(g):
        return (g * (x.values > 0.0),)

    return _maybe_record(out, (x,), bw)


def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    out_vals = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                        np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    out = Tensor(out_vals)

    def bw(g):
        return (g * out_vals * (1.0 - out_vals),)

    return _maybe_record(out, (x,), bw)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise product; an (N, C) factor broadcasts over an (N, C, H, W) map."""
    av, bv = a.values, b.values
    if av.ndim == 4 and bv.ndim == 2 and av.shape[:2] == bv.shape:
        bv = bv[:, :, None, None]
    elif bv.ndim == 4 and av.ndim == 2 and bv.shape[:2] == av.shape:
        av = av[:, :, None, None]
    try:
        out_vals = av * bv
    except ValueError as exc:
        raise DataError(f"hadamard shape mismatch: {a.shape} vs {b.shape}") from exc
    out = Tensor(out_vals)

    def bw(g):
        ga = _unbroadcast(g * bv, av.shape).reshape(a.shape)
        gb = _unbroadcast(g * av, bv.shape).reshape(b.shape)
        return ga, gb

    return _maybe_record(out, (a, b), bw)


def concat(parts, axis: int) -> Tensor:
    parts = list(parts)
    if not parts:
        raise DataError("concat requires at least one tensor")
    nd = parts[0].ndim
    if not -nd <= axis < nd:
        raise DataError(f"concat axis {axis} out of range for {nd}-dimensional tensors")
    out = Tensor(np.concatenate([p.values for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return _maybe_record(out, tuple(parts), bw)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial extent: (N, C, H, W) -> (N, C)."""
    if x.ndim != 4:
        raise DataError(f"global_avg_pool expects a 4D tensor, got shape {x.shape}")
    n, c, h, w = x.shape
    out = Tensor(x.values.mean(axis=(2, 3)))

    def bw(g):
        return (np.broadcast_to(g[:, :, None, None], (n, c, h, w)) / (h * w),)

    return _maybe_record(out, (x,), bw)


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability ``rate`` and rescale survivors.

    Identity at inference time or at rate 0, in which case the input tensor is
    returned unchanged.
    """
    if not 0.0 <= rate < 1.0:
        raise DataError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.values * mask)

    def bw(g):
        return (g * mask,)

    return _maybe_record(out, (x,), bw)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stabilized softmax of a plain array."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log softmax probability of the true labels."""
    if logits.ndim != 2:
        raise DataError(f"logits must be (N, K), got shape {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DataError(f"labels must have shape ({n},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise DataError(f"labels must lie in [0, {k}), got range "
                        f"[{labels.min()}, {labels.max()}]")
    z = logits.values - logits.values.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = Tensor(-log_probs[np.arange(n), labels].mean())
    probs = np.exp(log_probs)

    def bw(g):
        grad = probs.copy()
        grad[np.arange(n), labels] -= 1.0
        return (grad * (float(g) / n),)

    return _maybe_record(out, (logits,), bw)


def ssum(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    out = Tensor(x.values.sum())

    def bw(g):
        return (np.full(x.shape, float(g)),)

    return _maybe_record(out, (x,), bw)


def mean_all(x: Tensor) -> Tensor:
    """Mean of all elements, as a scalar tensor."""
    n = x.values.size
    out = Tensor(x.values.mean())

    def bw(g):
        return (np.full(x.shape, float(g) / n),)

    return _maybe_record(out, (x,), bw)


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        state = cls()
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.values)
            state.v[name] = np.zeros_like(p.values)
        return state


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0) -> None:
    """One in-place Adam update with bias correction.

    ``params`` maps names to tensors and ``grads`` maps the same names to
    gradient arrays.  Weight decay is decoupled: it adds ``lr * wd * p`` to
    the update without touching the moment estimates.
    """
    state.step += 1
    t = state.step
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        if g.shape != p.values.shape:
            raise DataError(f"gradient shape {g.shape} does not match parameter "
                            f"{name} shape {p.values.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        update = m_hat / (np.sqrt(v_hat) + eps)
        if weight_decay:
            update = update + weight_decay * p.values
        p.values -= lr * update
