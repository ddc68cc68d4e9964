"""Define-by-run reverse-mode differentiation on float64 numpy arrays.

A :class:`Tape` records every operation applied to its :class:`Node` objects.
Trainable state lives in :class:`Parameter` objects that outlive any single
tape; ``backward`` walks the tape in reverse and returns one gradient array per
parameter slot.

    tape = Tape()
    w = tape.param(weight)
    loss = ad.sum(ad.square(tape.constant(x) @ w))
    grads = backward(tape, loss)
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

EPS = 1e-7
DTYPE = np.float64


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(ValueError):
    """A precondition of an operation was violated."""


class Parameter:
    """A trainable array. Hashes by identity so it can key a gradient map."""

    def __init__(self, value, name: str = ""):
        self.value = np.array(value, dtype=DTYPE)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class Node:
    """One recorded value on a tape."""

    __slots__ = ("tape", "value", "parents", "vjp", "op", "requires_grad", "index")

    def __init__(self, tape: "Tape", value: np.ndarray, parents=(), vjp=None, op="const",
                 requires_grad=False):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.op = op
        self.requires_grad = requires_grad
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node({self.op}, shape={self.shape})"

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

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)


class Tape:
    """Append-only operation record plus the parameter slots it touched."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.slots: dict[Parameter, Node] = {}

    def param(self, p: Parameter) -> Node:
        node = self.slots.get(p)
        if node is None:
            node = Node(self, p.value, op="param", requires_grad=True)
            self.slots[p] = node
        return node

    def constant(self, value) -> Node:
        return Node(self, np.asarray(value, dtype=DTYPE))


GradientMap = dict  # Parameter -> np.ndarray


def _lift(x, tape: Tape) -> Node:
    if isinstance(x, Node):
        if x.tape is not tape:
            raise ContractError("operands recorded on different tapes")
        return x
    return tape.constant(x)


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Node):
            return x.tape
    raise ContractError("at least one operand must be a tape node")


def _record(tape: Tape, value: np.ndarray, parents: Sequence[Node], vjp, op: str) -> Node:
    req = any(p.requires_grad for p in parents)
    return Node(tape, value, tuple(parents), vjp if req else None, op, req)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(a: Node, b: Node, op: str) -> tuple[int, ...]:
    if a.value.shape == b.value.shape:
        return a.value.shape
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- elementwise ---------------------------------------------------------------

def add(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    _broadcast_shape(a, b, "add")
    return _record(tape, a.value + b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    _broadcast_shape(a, b, "sub")
    return _record(tape, a.value - b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)), "sub")


def mul(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    _broadcast_shape(a, b, "mul")
    av, bv = a.value, b.value
    return _record(tape, av * bv, (a, b),
                   lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)), "mul")


def scale(x: Node, c: float) -> Node:
    c = float(c)
    return _record(x.tape, x.value * c, (x,), lambda g: (g * c,), "scale")


def square(x: Node) -> Node:
    xv = x.value
    return _record(x.tape, xv * xv, (x,), lambda g: (2.0 * xv * g,), "square")


def exp(x: Node) -> Node:
    out = np.exp(x.value)
    return _record(x.tape, out, (x,), lambda g: (g * out,), "exp")


def log(x: Node) -> Node:
    """Natural log with the input clamped to at least ``EPS``."""
    xv = x.value
    clamped = np.maximum(xv, EPS)
    live = xv >= EPS
    return _record(x.tape, np.log(clamped), (x,), lambda g: (np.where(live, g / clamped, 0.0),),
                   "log")


def clip(x: Node, lo: float, hi: float) -> Node:
    xv = x.value
    inside = (xv >= lo) & (xv <= hi)
    return _record(x.tape, np.clip(xv, lo, hi), (x,), lambda g: (np.where(inside, g, 0.0),),
                   "clip")


def elementwise(op: str, *operands, c: float | None = None) -> Node:
    """Dispatch by name: add, sub, mul, log, exp, square, scale."""
    if op in ("add", "sub", "mul"):
        return {"add": add, "sub": sub, "mul": mul}[op](*operands)
    if op == "scale":
        return scale(operands[0], c)
    if op in ("log", "exp", "square"):
        return {"log": log, "exp": exp, "square": square}[op](operands[0])
    raise ContractError(f"unknown elementwise op {op!r}")


# -- activations ---------------------------------------------------------------

def _sigmoid(v: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -v))


def sigmoid(x: Node) -> Node:
    s = _sigmoid(x.value)
    return _record(x.tape, s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def relu(x: Node) -> Node:
    mask = x.value > 0
    return _record(x.tape, np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,), "relu")


def tanh(x: Node) -> Node:
    t = np.tanh(x.value)
    return _record(x.tape, t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")


ACTIVATIONS = ("sigmoid", "relu", "tanh", "linear")


def activation(kind: str, x: Node) -> Node:
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "relu":
        return relu(x)
    if kind == "tanh":
        return tanh(x)
    if kind == "linear":
        return x
    raise ContractError(f"unknown activation {kind!r}")


def activation_derivative(kind: str, pre: Node, out: Node) -> Node | float:
    """act'(pre) expressed with differentiable ops, reusing ``out = act(pre)``."""
    if kind == "sigmoid":
        return out * (1.0 - out)
    if kind == "tanh":
        return 1.0 - square(out)
    if kind == "relu":
        return pre.tape.constant((pre.value > 0).astype(DTYPE))
    if kind == "linear":
        return 1.0
    raise ContractError(f"unknown activation {kind!r}")


# -- reductions and shape ------------------------------------------------------

def sum(x: Node, axis=None) -> Node:  # noqa: A001 - mirrors numpy
    shape = x.shape

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _record(x.tape, np.sum(x.value, axis=axis), (x,), vjp, "sum")


def mean(x: Node, axis=None) -> Node:
    count = x.value.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return scale(sum(x, axis=axis), 1.0 / count)


def reshape(x: Node, shape) -> Node:
    old = x.shape
    return _record(x.tape, x.value.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def take(x: Node, index) -> Node:
    shape = x.shape

    def vjp(g):
        out = np.zeros(shape, dtype=DTYPE)
        np.add.at(out, index, g)
        return (out,)

    return _record(x.tape, x.value[index], (x,), vjp, "take")


def matmul(a, b) -> Node:
    """Matrix product; leading batch axes broadcast as in ``np.matmul``."""
    tape = _tape_of(a, b)
    a, b = _lift(a, tape), _lift(b, tape)
    if a.value.ndim < 2 or b.value.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    av, bv = a.value, b.value

    def vjp(g):
        ga = g @ np.swapaxes(bv, -1, -2)
        gb = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _record(tape, av @ bv, (a, b), vjp, "matmul")


# -- image ops (NHWC) ----------------------------------------------------------

def _same_padding(size: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return out, total // 2, total - total // 2


def _conv_geometry(in_shape, kshape, stride):
    if stride < 1:
        raise ContractError(f"invalid stride {stride}")
    _, H, W, C = in_shape
    kh, kw, kc, _ = kshape
    if kc != C:
        raise DimensionError(f"conv: input channels {C} do not match kernel {tuple(kshape)}")
    Ho, pt, pb = _same_padding(H, kh, stride)
    Wo, pl, pr = _same_padding(W, kw, stride)
    return Ho, Wo, (pt, pb, pl, pr)


def _windows(x: np.ndarray, kh: int, kw: int, stride: int, pads, Ho: int, Wo: int) -> np.ndarray:
    pt, pb, pl, pr = pads
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # B, H', W', C, kh, kw
    return win[:, ::stride, ::stride][:, :Ho, :Wo]


def _conv_value(x: np.ndarray, k: np.ndarray, stride: int) -> np.ndarray:
    kh, kw = k.shape[:2]
    Ho, Wo, pads = _conv_geometry(x.shape, k.shape, stride)
    win = _windows(x, kh, kw, stride, pads, Ho, Wo)
    return np.tensordot(win, k, axes=([3, 4, 5], [2, 0, 1]))


def _conv_input_grad(g: np.ndarray, k: np.ndarray, stride: int, in_shape) -> np.ndarray:
    kh, kw = k.shape[:2]
    Ho, Wo, (pt, pb, pl, pr) = _conv_geometry(in_shape, k.shape, stride)
    B, H, W, C = in_shape
    dxp = np.zeros((B, H + pt + pb, W + pl + pr, C), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            dxp[:, i:i + stride * Ho:stride, j:j + stride * Wo:stride, :] += g @ k[i, j].T
    return dxp[:, pt:pt + H, pl:pl + W, :]


def _conv_kernel_grad(x: np.ndarray, g: np.ndarray, kshape, stride: int) -> np.ndarray:
    kh, kw = kshape[:2]
    Ho, Wo, pads = _conv_geometry(x.shape, kshape, stride)
    win = _windows(x, kh, kw, stride, pads, Ho, Wo)
    dk = np.tensordot(win, g, axes=([0, 1, 2], [0, 1, 2]))  # C, kh, kw, F
    return dk.transpose(1, 2, 0, 3)


def conv2d(x, k, stride: int = 1) -> Node:
    """Same-padded cross-correlation. x: [B,H,W,C], k: [kh,kw,C,F]."""
    tape = _tape_of(x, k)
    x, k = _lift(x, tape), _lift(k, tape)
    xv, kv = x.value, k.value
    out = _conv_value(xv, kv, stride)

    def vjp(g):
        return (_conv_input_grad(g, kv, stride, xv.shape),
                _conv_kernel_grad(xv, g, kv.shape, stride))

    return _record(tape, out, (x, k), vjp, "conv2d")


def conv_transpose2d(y, k, stride: int = 1) -> Node:
    """Adjoint of :func:`conv2d`. y: [B,H,W,F], k: [kh,kw,C,F] -> [B,H*s,W*s,C]."""
    tape = _tape_of(y, k)
    y, k = _lift(y, tape), _lift(k, tape)
    yv, kv = y.value, k.value
    if stride < 1:
        raise ContractError(f"invalid stride {stride}")
    if yv.shape[3] != kv.shape[3]:
        raise DimensionError(f"deconv: input channels {yv.shape[3]} do not match kernel {kv.shape}")
    B, H, W, _ = yv.shape
    out_shape = (B, H * stride, W * stride, kv.shape[2])
    out = _conv_input_grad(yv, kv, stride, out_shape)

    def vjp(g):
        return _conv_value(g, kv, stride), _conv_kernel_grad(g, yv, kv.shape, stride)

    return _record(tape, out, (y, k), vjp, "conv_transpose2d")


def maxpool2d(x: Node) -> Node:
    """2x2 max pooling, stride 2. Odd sides are zero-padded bottom/right.

    Gradient goes to the first maximum of each window in row-major order.
    """
    xv = x.value
    B, H, W, C = xv.shape
    ph, pw = H % 2, W % 2
    if ph or pw:
        xv = np.pad(xv, ((0, 0), (0, ph), (0, pw), (0, 0)))
    Hh, Wh = xv.shape[1] // 2, xv.shape[2] // 2
    blocks = xv.reshape(B, Hh, 2, Wh, 2, C).transpose(0, 1, 3, 5, 2, 4).reshape(B, Hh, Wh, C, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]

    def vjp(g):
        gb = np.zeros_like(blocks)
        np.put_along_axis(gb, arg[..., None], g[..., None], axis=-1)
        full = gb.reshape(B, Hh, Wh, C, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(B, 2 * Hh, 2 * Wh, C)
        return (full[:, :H, :W, :],)

    return _record(x.tape, out, (x,), vjp, "maxpool2d")


def upsample2d(x: Node) -> Node:
    """Repeat every pixel into a 2x2 block."""
    xv = x.value
    B, H, W, C = xv.shape
    out = np.repeat(np.repeat(xv, 2, axis=1), 2, axis=2)

    def vjp(g):
        return (g.reshape(B, H, 2, W, 2, C).sum(axis=(2, 4)),)

    return _record(x.tape, out, (x,), vjp, "upsample2d")


# -- reverse pass --------------------------------------------------------------

def backward(tape: Tape, output: Node, params: Iterable[Parameter] | None = None) -> GradientMap:
    """Gradients of the scalar ``output`` with respect to every parameter slot.

    Parameters given in ``params`` but never touched by the tape get zeros.
    """
    if output.tape is not tape:
        raise ContractError("output node belongs to another tape")
    if output.value.shape != ():
        raise ContractError(f"backward needs a scalar output, got shape {output.shape}")
    grads: dict[int, np.ndarray] = {output.index: np.ones((), dtype=DTYPE)}
    for node in reversed(tape.nodes[: output.index + 1]):
        g = grads.pop(node.index, None) if node.op != "param" else grads.get(node.index)
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if not parent.requires_grad:
                continue
            if parent.index in grads:
                grads[parent.index] = grads[parent.index] + pg
            else:
                grads[parent.index] = pg
    result: GradientMap = {}
    for p, node in tape.slots.items():
        g = grads.get(node.index)
        result[p] = np.zeros_like(p.value) if g is None else np.asarray(g, dtype=DTYPE).reshape(p.shape)
    for p in params or ():
        result.setdefault(p, np.zeros_like(p.value))
    return result


def grad_check(objective: Callable[[Tape], Node], params: Sequence[Parameter],
               h: float = 1e-5) -> float:
    """Worst relative error between reverse-mode and central-difference gradients.

    ``objective`` must rebuild its graph on the tape it is given. The
    denominator of each relative error is ``max(|g|, |fd|, 1e-8)``.
    """
    if h <= 0:
        raise ContractError("step h must be positive")
    tape = Tape()
    grads = backward(tape, objective(tape), params)

    def f() -> float:
        return float(objective(Tape()).value)

    worst = 0.0
    for p in params:
        flat = p.value.reshape(-1)  # view: edits land in p.value
        g = grads[p].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            fd = (fp - fm) / (2.0 * h)
            err = abs(g[i] - fd) / max(abs(g[i]), abs(fd), 1e-8)
            worst = max(worst, err)
    return worst
