"""Binary model container (``AEWB1``) with a JSON sidecar.

Layout, all integers little-endian u32, all reals little-endian f64::

    magic "AEWB1" | n_layers | code_index | ndim | input dims...
    per layer:
        kind tag (u8) | ndim | output dims... | activation tag (u8)
        n_hyper | hyper values (f64)... | n_params
        per param: ndim | dims... | data (f64, row-major)
"""
from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import ACTIVATIONS, Parameter
from .layers import Conv, Deconv, Dense, GaussianNoise, LAYER_KINDS, MaxPool, Network, Sampling, Upsample

MAGIC = b"AEWB1"
KIND_TAGS = {kind: i for i, kind in enumerate(LAYER_KINDS)}
ACT_TAGS = {name: i for i, name in enumerate(ACTIVATIONS)}


class FormatError(ValueError):
    pass


def _hyper_values(layer) -> list[float]:
    if isinstance(layer, (Conv, Deconv)):
        return [layer.filters, layer.kernel, layer.stride]
    if isinstance(layer, GaussianNoise):
        return [layer.sigma]
    return []


def _u32(buf, *values):
    buf.write(struct.pack(f"<{len(values)}I", *values))


def dumps(net: Network) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    _u32(buf, len(net.layers), net.code_index, len(net.input_shape), *net.input_shape)
    for layer in net.layers:
        buf.write(struct.pack("<B", KIND_TAGS[layer.kind]))
        _u32(buf, len(layer.out_shape), *layer.out_shape)
        buf.write(struct.pack("<B", ACT_TAGS[layer.activation]))
        hyper = _hyper_values(layer)
        _u32(buf, len(hyper))
        buf.write(np.asarray(hyper, dtype="<f8").tobytes())
        _u32(buf, len(layer.params))
        for p in layer.params:
            _u32(buf, p.value.ndim, *p.value.shape)
            buf.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("truncated model file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, n: int = 1):
        vals = struct.unpack(f"<{n}I", self.take(4 * n))
        return vals if n != 1 else vals[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def f64(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)


def loads(data: bytes) -> Network:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise FormatError("bad magic; not an AEWB1 model")
    n_layers, code_index, ndim = r.u32(3)
    input_shape = tuple(r.u32(ndim)) if ndim > 1 else (r.u32(),)
    kinds = list(KIND_TAGS)
    acts = list(ACT_TAGS)
    layers = []
    for _ in range(n_layers):
        kind = kinds[r.u8()]
        nd = r.u32()
        out_shape = tuple(r.u32(nd)) if nd > 1 else (r.u32(),)
        act = acts[r.u8()]
        hyper = r.f64(r.u32())
        params = []
        for _ in range(r.u32()):
            pd = r.u32()
            shape = tuple(r.u32(pd)) if pd > 1 else (r.u32(),)
            params.append(Parameter(r.f64(int(np.prod(shape))).reshape(shape)))
        if kind == "dense":
            layer = Dense(out_shape, act)
        elif kind in ("conv", "deconv"):
            cls = Conv if kind == "conv" else Deconv
            layer = cls(int(hyper[0]), int(hyper[1]), int(hyper[2]), act)
        elif kind == "gaussian-noise":
            layer = GaussianNoise(float(hyper[0]))
        else:
            layer = {"maxpool": MaxPool, "upsample": Upsample, "sampling": Sampling}[kind]()
        for p, name in zip(params, ("W", "b") if kind == "dense" else ("K", "b")):
            p.name = name
        layer.params = params
        layers.append(layer)
    return Network(input_shape, layers, code_index)


def save(net: Network, path) -> list[Path]:
    """Write ``path`` and a ``.json`` sidecar; returns both paths."""
    path = Path(path)
    path.write_bytes(dumps(net))
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps(net.describe(), indent=2, sort_keys=True) + "\n")
    return [path, sidecar]


def load(path) -> Network:
    return loads(Path(path).read_bytes())
