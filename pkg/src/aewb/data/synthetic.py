"""Deterministic desk-scale stand-ins for the case-study datasets.

Each generator is a pure function of its arguments and seed, so these corpora
behave like bundled files without shipping binary blobs.
"""
from __future__ import annotations

import numpy as np

from ..prng import make_rng
from .images import ImageSet
from .tabular import Column, Dataset


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def manifold_table(n: int = 2000, n_features: int = 21, hidden: int = 6, noise: float = 0.01,
                   seed: int = 573) -> Dataset:
    """Rows on a curved 2-D manifold in ``n_features`` dimensions.

    The manifold is the image of a random one-hidden-layer map from a 2-D
    latent square, so two principal components cannot span it. The target
    ``usr`` is a smooth function of the latent coordinates.
    """
    rng = make_rng(seed)
    W1 = rng.normal(0.0, 2.5, size=(2, hidden))
    b1 = rng.normal(0.0, 1.0, size=hidden)
    W2 = rng.normal(0.0, 2.0, size=(hidden, n_features))
    b2 = rng.normal(0.0, 0.5, size=n_features)
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    X = _sigmoid(_sigmoid(u @ W1 + b1) @ W2 + b2) + rng.normal(0.0, noise, size=(n, n_features))
    usr = 50.0 + 40.0 * np.tanh(u[:, 0] + 0.5 * u[:, 1] ** 2)
    cols = [Column(f"f{j + 1}") for j in range(n_features)]
    return Dataset(cols, [X[:, j] for j in range(n_features)], relation="synthetic-manifold",
                   target=usr, target_column=Column("usr"))


def planar_table(n: int = 1000, dim: int = 5, noise: float = 1e-3, seed: int = 0) -> Dataset:
    """Points on a random 2-D affine plane in ``dim`` dimensions plus tiny noise."""
    rng = make_rng(seed)
    basis = rng.normal(size=(2, dim))
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    X = u @ basis + rng.normal(0.0, noise, size=(n, dim))
    cols = [Column(f"x{j + 1}") for j in range(dim)]
    return Dataset(cols, [X[:, j] for j in range(dim)], relation="synthetic-plane",
                   target=u[:, 0], target_column=Column("t"))


def shapes_images(n: int = 500, side: int = 28, channels: int = 3, seed: int = 10) -> ImageSet:
    """Flat-coloured rectangles, discs and triangles on a smooth background."""
    rng = make_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side] / (side - 1)
    out = np.empty((n, side, side, channels))
    for i in range(n):
        c0, c1 = rng.uniform(0.0, 1.0, size=(2, channels))
        angle = rng.uniform(0, 2 * np.pi)
        ramp = (np.cos(angle) * xx + np.sin(angle) * yy + 1.0) / 2.0
        img = c0 + (c1 - c0) * ramp[..., None] * 0.5
        for _ in range(rng.integers(1, 4)):
            color = rng.uniform(0.0, 1.0, size=channels)
            cx, cy = rng.uniform(0.2, 0.8, size=2)
            r = rng.uniform(0.1, 0.3)
            kind = rng.integers(3)
            if kind == 0:
                mask = (np.abs(xx - cx) < r) & (np.abs(yy - cy) < r * rng.uniform(0.5, 1.0))
            elif kind == 1:
                mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
            else:
                mask = (yy - cy > -r) & (yy - cy < r - 2 * np.abs(xx - cx))
            img[mask] = color
        out[i] = img
    return ImageSet(np.clip(out, 0.0, 1.0))


def faces_images(n: int = 200, side: int = 32, seed: int = 41083) -> ImageSet:
    """Grey-level cartoon faces varying in pose, size, lighting, hair and expression."""
    rng = make_rng(seed)
    yy, xx = (np.mgrid[0:side, 0:side] + 0.5) / side
    out = np.empty((n, side, side, 1))
    for i in range(n):
        bg = rng.uniform(0.1, 0.4)
        img = bg + 0.1 * (yy - 0.5)
        cx = 0.5 + rng.uniform(-0.08, 0.08)
        cy = 0.52 + rng.uniform(-0.05, 0.05)
        rx, ry = rng.uniform(0.25, 0.33), rng.uniform(0.32, 0.40)
        skin = rng.uniform(0.55, 0.9)
        light = rng.uniform(-0.15, 0.15)
        face = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 < 1.0
        img = np.where(face, skin + light * (xx - cx) / rx, img)
        hair_line = cy - ry * rng.uniform(0.3, 0.8)
        hair = face & (yy < hair_line)
        img = np.where(hair, rng.uniform(0.05, 0.3), img)
        eye_y = cy - ry * 0.15
        eye_dx = rx * rng.uniform(0.35, 0.5)
        eye_r = rng.uniform(0.035, 0.06)
        for sx in (-1, 1):
            eye = ((xx - cx - sx * eye_dx) ** 2 + (yy - eye_y) ** 2) < eye_r ** 2
            img = np.where(eye, 0.05, img)
        smile = rng.uniform(-1.0, 1.0)
        mouth_y = cy + ry * 0.45 + smile * 0.04 * ((xx - cx) / (rx * 0.5)) ** 2
        mouth = (np.abs(yy - mouth_y) < 0.025) & (np.abs(xx - cx) < rx * 0.45)
        img = np.where(mouth, 0.15, img)
        out[i, :, :, 0] = img
    return ImageSet(np.clip(out, 0.0, 1.0))


def topic_corpus(n_docs: int = 2000, n_terms: int = 200, n_topics: int = 4,
                 doc_length: int = 40, concentration: float = 0.3, seed: int = 1836):
    """Binary bag-of-words documents drawn from overlapping topics.

    Topics are bumps of term probability placed around a ring of the
    vocabulary, and each document mixes topics with Dirichlet weights, so
    semantic similarity varies gradually rather than in four hard blocks.

    Returns ``(binary matrix, count matrix, vocabulary, dominant topic)``.
    """
    rng = make_rng(seed)
    pos = np.arange(n_terms)
    centers = np.arange(n_topics) * n_terms / n_topics
    width = n_terms / n_topics * 0.45
    ring = np.abs(pos[None, :] - centers[:, None])
    ring = np.minimum(ring, n_terms - ring)
    topics = np.exp(-0.5 * (ring / width) ** 2) + 0.01
    topics /= topics.sum(axis=1, keepdims=True)
    weights = rng.dirichlet(np.full(n_topics, concentration), size=n_docs)
    probs = weights @ topics
    counts = np.stack([rng.multinomial(doc_length, p) for p in probs]).astype(np.float64)
    vocab = [f"t{j:03d}" for j in range(n_terms)]
    return (counts > 0).astype(np.float64), counts, vocab, weights.argmax(axis=1)


def traffic_table(n_train: int = 3000, n_test: int = 2000, anomaly_rate: float = 0.05,
                  n_numeric: int = 20, shift: float = 4.0, seed: int = 15) -> Dataset:
    """Connection-record stand-in: numeric descriptors plus three nominal fields.

    Normal rows come from one Gaussian mode lying near a 2-D subspace, with
    the nominal fields fixed at their usual values (tcp/http/FIN). Test
    anomalies are normal draws displaced by ``shift`` to ``shift + 2``
    standard deviations along a random third of the numeric features, with
    their nominal fields resampled. Training rows are all normal. The
    ``label`` target marks anomalies with 1.
    """
    rng = make_rng(seed)
    protos, services, states = ("tcp", "udp", "icmp"), ("http", "dns", "ftp", "smtp"), ("FIN", "CON", "INT")
    n = n_train + n_test
    basis = rng.normal(size=(2, n_numeric))
    latent = rng.normal(size=(n, 2))
    X = latent @ basis + rng.normal(0.0, 0.15, size=(n, n_numeric))
    X = X / X[:n_train].std(axis=0)
    proto = np.zeros(n, dtype=np.int64)
    service = np.zeros(n, dtype=np.int64)
    state = np.zeros(n, dtype=np.int64)
    label = np.zeros(n, dtype=np.int64)
    test_idx = np.arange(n_train, n)
    anomalies = rng.choice(test_idx, size=int(round(anomaly_rate * n_test)), replace=False)
    label[anomalies] = 1
    for i in anomalies:
        feats = rng.choice(n_numeric, size=max(1, n_numeric // 3), replace=False)
        X[i, feats] += rng.choice([-1.0, 1.0], size=len(feats)) * rng.uniform(shift, shift + 2.0, size=len(feats))
        proto[i], service[i], state[i] = rng.integers(3), rng.integers(4), rng.integers(3)
    cols = [Column(f"num{j + 1}") for j in range(n_numeric)]
    vals = [X[:, j] for j in range(n_numeric)]
    for name, cats, codes in (("proto", protos, proto), ("service", services, service), ("state", states, state)):
        cols.append(Column(name, "nominal", cats))
        vals.append(np.array([cats[c] for c in codes], dtype=object))
    is_test = np.zeros(n, dtype=bool)
    is_test[n_train:] = True
    return Dataset(cols, vals, relation="synthetic-traffic", target=label.astype(np.float64),
                   target_column=Column("label"), is_test=is_test)
