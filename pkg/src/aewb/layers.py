"""Layer stack for encoder/decoder networks.

Shapes given to layers exclude the batch axis. Images are channels-last
(``H, W, C``). A :class:`Network` is split at ``code_index``: the encoder is
``layers[:code_index]`` and the decoder is ``layers[code_index:]``, so the
encoding is the output of ``layers[code_index - 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import ContractError, DimensionError, Node, Parameter, Tape
from .prng import normal

TRAIN, EVAL = "train", "eval"


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def code_noise(z: Node, sigma: float, mode: str, rng: Optional[np.random.Generator]) -> Node:
    """Additive N(0, sigma^2) noise on the code in train mode; identity otherwise."""
    if sigma < 0:
        raise ContractError(f"noise sigma must be >= 0, got {sigma}")
    if mode != TRAIN or sigma == 0:
        return z
    if rng is None:
        raise ContractError("train-mode code noise needs a PRNG")
    return z + normal(rng, z.shape, sigma)


def sample_latent(mu: Node, logvar: Node, eps) -> Node:
    """Reparameterized draw ``mu + exp(logvar / 2) * eps``; eps is a constant."""
    eps = np.asarray(eps, dtype=ad.DTYPE)
    if mu.shape != logvar.shape or mu.shape != eps.shape:
        raise DimensionError(f"sample_latent: shapes {mu.shape}, {logvar.shape}, {eps.shape}")
    return mu + ad.exp(ad.scale(logvar, 0.5)) * eps


@dataclass
class Record:
    layer: "Layer"
    input: Node
    pre: Optional[Node]
    output: Node


@dataclass
class Context:
    mode: str = EVAL
    rng: Optional[np.random.Generator] = None
    records: list = field(default_factory=list)


class Layer:
    kind = "layer"
    activation = "linear"

    def __init__(self):
        self.params: list[Parameter] = []
        self.in_shape: tuple[int, ...] = ()
        self.out_shape: tuple[int, ...] = ()

    def build(self, in_shape: tuple[int, ...], rng: np.random.Generator) -> tuple[int, ...]:
        raise NotImplementedError

    def forward(self, tape: Tape, x: Node, ctx: Context) -> Node:
        raise NotImplementedError

    def hyper(self) -> dict:
        return {}

    def _image_in(self, in_shape):
        if len(in_shape) != 3:
            raise DimensionError(f"{self.kind} expects an H,W,C input, got {in_shape}")
        return in_shape


class Dense(Layer):
    """activation(x W + b). Inputs of rank > 1 are flattened; outputs may be reshaped."""

    kind = "dense"

    def __init__(self, units, activation: str = "linear"):
        super().__init__()
        self.units = (units,) if isinstance(units, int) else tuple(units)
        self.activation = activation

    def build(self, in_shape, rng):
        n_in = int(np.prod(in_shape))
        n_out = int(np.prod(self.units))
        self.in_shape, self.out_shape = tuple(in_shape), self.units
        if not self.params:
            self.params = [Parameter(_glorot(rng, (n_in, n_out), n_in, n_out), "W"),
                           Parameter(np.zeros(n_out), "b")]
        elif self.params[0].shape != (n_in, n_out):
            raise DimensionError(f"dense weights {self.params[0].shape} vs input {in_shape}")
        return self.out_shape

    def forward(self, tape, x, ctx):
        B = x.shape[0]
        flat = ad.reshape(x, (B, -1)) if x.value.ndim != 2 else x
        if flat.shape[1] != self.params[0].shape[0]:
            raise DimensionError(f"dense: input {x.shape} vs weights {self.params[0].shape}")
        W, b = (tape.param(p) for p in self.params)
        pre = flat @ W + b
        out = ad.activation(self.activation, pre)
        if len(self.units) > 1:
            out = ad.reshape(out, (B,) + self.units)
        ctx.records.append(Record(self, flat, pre, out))
        return out

    def hyper(self):
        return {"units": list(self.units)}


class Conv(Layer):
    kind = "conv"

    def __init__(self, filters: int, kernel: int, stride: int = 1, activation: str = "relu"):
        super().__init__()
        if stride < 1:
            raise ContractError(f"invalid stride {stride}")
        self.filters, self.kernel, self.stride = filters, kernel, stride
        self.activation = activation

    def _kernel_shape(self, C):
        return (self.kernel, self.kernel, C, self.filters)

    def build(self, in_shape, rng):
        H, W, C = self._image_in(in_shape)
        kshape = self._kernel_shape(C)
        if not self.params:
            area = self.kernel * self.kernel
            self.params = [Parameter(_glorot(rng, kshape, area * C, area * self.filters), "K"),
                           Parameter(np.zeros(self.filters), "b")]
        self.in_shape = tuple(in_shape)
        self.out_shape = (-(-H // self.stride), -(-W // self.stride), self.filters)
        return self.out_shape

    def _apply(self, x, K):
        return ad.conv2d(x, K, self.stride)

    def forward(self, tape, x, ctx):
        K, b = (tape.param(p) for p in self.params)
        pre = self._apply(x, K) + b
        out = ad.activation(self.activation, pre)
        ctx.records.append(Record(self, x, pre, out))
        return out

    def hyper(self):
        return {"filters": self.filters, "kernel": self.kernel, "stride": self.stride}


class Deconv(Conv):
    """Transposed convolution; multiplies spatial sides by ``stride``."""

    kind = "deconv"

    def _kernel_shape(self, C):
        return (self.kernel, self.kernel, self.filters, C)

    def build(self, in_shape, rng):
        H, W, C = self._image_in(in_shape)
        kshape = self._kernel_shape(C)
        if not self.params:
            area = self.kernel * self.kernel
            self.params = [Parameter(_glorot(rng, kshape, area * C, area * self.filters), "K"),
                           Parameter(np.zeros(self.filters), "b")]
        self.in_shape = tuple(in_shape)
        self.out_shape = (H * self.stride, W * self.stride, self.filters)
        return self.out_shape

    def _apply(self, x, K):
        return ad.conv_transpose2d(x, K, self.stride)


class MaxPool(Layer):
    kind = "maxpool"

    def build(self, in_shape, rng):
        H, W, C = self._image_in(in_shape)
        self.in_shape = tuple(in_shape)
        self.out_shape = (-(-H // 2), -(-W // 2), C)
        return self.out_shape

    def forward(self, tape, x, ctx):
        out = ad.maxpool2d(x)
        ctx.records.append(Record(self, x, None, out))
        return out


class Upsample(Layer):
    kind = "upsample"

    def build(self, in_shape, rng):
        H, W, C = self._image_in(in_shape)
        self.in_shape = tuple(in_shape)
        self.out_shape = (2 * H, 2 * W, C)
        return self.out_shape

    def forward(self, tape, x, ctx):
        out = ad.upsample2d(x)
        ctx.records.append(Record(self, x, None, out))
        return out


class GaussianNoise(Layer):
    kind = "gaussian-noise"

    def __init__(self, sigma: float):
        super().__init__()
        if sigma < 0:
            raise ContractError(f"noise sigma must be >= 0, got {sigma}")
        self.sigma = sigma

    def build(self, in_shape, rng):
        self.in_shape = self.out_shape = tuple(in_shape)
        return self.out_shape

    def forward(self, tape, x, ctx):
        out = code_noise(x, self.sigma, ctx.mode, ctx.rng)
        ctx.records.append(Record(self, x, None, out))
        return out

    def hyper(self):
        return {"sigma": self.sigma}


class Sampling(Layer):
    """Splits a ``[mu | logvar]`` vector of width 2k and draws a k-wide latent.

    In eval mode the draw is replaced by ``mu`` so inference is deterministic.
    """

    kind = "sampling"

    def build(self, in_shape, rng):
        if len(in_shape) != 1 or in_shape[0] % 2:
            raise DimensionError(f"sampling expects an even-width vector, got {in_shape}")
        self.in_shape = tuple(in_shape)
        self.out_shape = (in_shape[0] // 2,)
        return self.out_shape

    def forward(self, tape, x, ctx):
        k = self.out_shape[0]
        mu, logvar = x[:, :k], x[:, k:]
        if ctx.mode == TRAIN:
            if ctx.rng is None:
                raise ContractError("train-mode sampling needs a PRNG")
            out = sample_latent(mu, logvar, normal(ctx.rng, mu.shape))
        else:
            out = mu
        ctx.records.append(Record(self, x, None, out))
        return out


LAYER_KINDS = {cls.kind: cls for cls in (Dense, Conv, Deconv, MaxPool, Upsample, GaussianNoise, Sampling)}


@dataclass
class Pass:
    """Everything a forward pass produced, for objectives that need internals."""

    input: Node
    code: Node
    output: Node
    records: list


class Network:
    def __init__(self, input_shape, layers: list[Layer], code_index: int, seed: int = 0):
        if not 0 < code_index < len(layers):
            raise ContractError(f"code_index {code_index} must lie in (0, {len(layers)})")
        self.input_shape = tuple(input_shape)
        self.layers = layers
        self.code_index = code_index
        self.mode = EVAL
        rng = np.random.Generator(np.random.PCG64(seed))
        shape = self.input_shape
        for layer in layers:
            shape = layer.build(shape, rng)
        if shape != self.input_shape:
            raise DimensionError(f"network output shape {shape} != input shape {self.input_shape}")

    @property
    def code_shape(self) -> tuple[int, ...]:
        return self.layers[self.code_index - 1].out_shape

    @property
    def encoder(self) -> list[Layer]:
        return self.layers[: self.code_index]

    @property
    def decoder(self) -> list[Layer]:
        return self.layers[self.code_index:]

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.params]

    def train(self) -> "Network":
        self.mode = TRAIN
        return self

    def eval(self) -> "Network":
        self.mode = EVAL
        return self

    def _run(self, tape, x, layers, ctx):
        for layer in layers:
            x = layer.forward(tape, x, ctx)
        return x

    def run(self, tape: Tape, x, rng: Optional[np.random.Generator] = None) -> Pass:
        x = x if isinstance(x, Node) else tape.constant(x)
        ctx = Context(self.mode, rng)
        code = self._run(tape, x, self.encoder, ctx)
        out = self._run(tape, code, self.decoder, ctx)
        return Pass(x, code, out, ctx.records)

    def encode(self, tape: Tape, x, rng=None) -> Node:
        x = x if isinstance(x, Node) else tape.constant(x)
        return self._run(tape, x, self.encoder, Context(self.mode, rng))

    def decode(self, tape: Tape, z, rng=None) -> Node:
        z = z if isinstance(z, Node) else tape.constant(z)
        return self._run(tape, z, self.decoder, Context(self.mode, rng))

    # array conveniences, always in eval mode, processed in chunks
    def _batched(self, fn, X, batch):
        X = np.asarray(X, dtype=ad.DTYPE)
        saved, self.mode = self.mode, EVAL
        try:
            return np.concatenate([fn(Tape(), X[i:i + batch]).value
                                   for i in range(0, len(X), batch)], axis=0)
        finally:
            self.mode = saved

    def predict(self, X, batch: int = 256) -> np.ndarray:
        return self._batched(lambda t, x: self.run(t, x).output, X, batch)

    def encode_array(self, X, batch: int = 256) -> np.ndarray:
        return self._batched(self.encode, X, batch)

    def decode_array(self, Z, batch: int = 256) -> np.ndarray:
        return self._batched(self.decode, Z, batch)

    def describe(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "code_index": self.code_index,
            "layers": [{"kind": l.kind, "activation": l.activation,
                        "output_shape": list(l.out_shape), **l.hyper()} for l in self.layers],
        }
