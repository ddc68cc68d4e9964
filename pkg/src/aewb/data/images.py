"""Netpbm images (PGM/PPM, plain and raw) and image batches in [0, 1]."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class FormatError(ValueError):
    pass


@dataclass
class ImageSet:
    images: np.ndarray  # [B, H, W, C] in [0, 1]
    bit_depth: int = 8

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        if self.images.ndim != 4:
            raise FormatError(f"image batch must be [B,H,W,C], got shape {self.images.shape}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.images.shape[1:]

    def __len__(self) -> int:
        return len(self.images)


def _tokens(data: bytes, count: int, pos: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping '#' comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise FormatError("truncated header")
        start = pos
        while pos < n and not data[pos:pos + 1].isspace():
            pos += 1
        out.append(data[start:pos])
    return out, pos


def read_pnm(data: bytes) -> np.ndarray:
    """Decode P2/P3/P5/P6 into an [H, W, C] float array in [0, 1]."""
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise FormatError(f"bad magic {magic!r}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    (w, h, maxval), pos = _tokens(data, 3, 2)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("non-integer header field") from None
    if not 0 < maxval <= 255:
        raise FormatError(f"unsupported maxval {maxval}")
    count = w * h * channels
    if magic in (b"P5", b"P6"):
        payload = data[pos + 1:pos + 1 + count]
        if len(payload) < count:
            raise FormatError(f"truncated payload: {len(payload)} of {count} bytes")
        px = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        fields = data[pos:].split()
        if len(fields) < count:
            raise FormatError(f"truncated payload: {len(fields)} of {count} samples")
        px = np.array([int(f) for f in fields[:count]], dtype=np.float64)
    return (px / maxval).reshape(h, w, channels)


def _to_bytes(img: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(img, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_pnm(img, plain: bool = False) -> bytes:
    """Encode an [H, W] or [H, W, C] image (C in {1, 3}); values rounded half-up."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    h, w, c = img.shape
    if c not in (1, 3):
        raise FormatError(f"cannot write {c}-channel image")
    px = _to_bytes(img)
    kind = {(1, True): b"P2", (1, False): b"P5", (3, True): b"P3", (3, False): b"P6"}[(c, plain)]
    header = kind + b"\n%d %d\n255\n" % (w, h)
    if plain:
        rows = [" ".join(str(v) for v in row.reshape(-1)) for row in px]
        return header + ("\n".join(rows) + "\n").encode()
    return header + px.tobytes()


def read_images(paths: Sequence) -> ImageSet:
    imgs = [read_pnm(Path(p).read_bytes()) for p in paths]
    if len({im.shape for im in imgs}) > 1:
        raise FormatError("images differ in shape")
    return ImageSet(np.stack(imgs))


def image_strip(images, pad: int = 1) -> np.ndarray:
    """Tile [N, H, W, C] images left to right with a white gutter."""
    images = np.asarray(images)
    n, h, w, c = images.shape
    strip = np.ones((h, n * w + (n - 1) * pad, c))
    for i, im in enumerate(images):
        strip[:, i * (w + pad):i * (w + pad) + w] = im
    return strip


def image_grid(images, cols: int, pad: int = 1) -> np.ndarray:
    images = np.asarray(images)
    rows = [image_strip(images[i:i + cols], pad) for i in range(0, len(images), cols)]
    width = rows[0].shape[1]
    rows = [np.pad(r, ((0, 0), (0, width - r.shape[1]), (0, 0)), constant_values=1.0) for r in rows]
    gutter = np.ones((pad, width, images.shape[3]))
    out = [rows[0]]
    for r in rows[1:]:
        out += [gutter, r]
    return np.concatenate(out, axis=0)
