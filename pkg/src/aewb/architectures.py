"""Network builders for the five case-study models.

Every builder keeps the published layer ordering; the ``scale`` or size
arguments shrink channel counts and image sides for desk-scale runs.
"""
from __future__ import annotations

from .autodiff import ContractError
from .layers import Conv, Deconv, Dense, GaussianNoise, MaxPool, Network, Sampling, Upsample


def hidden_width(n: int, k: int) -> int:
    """Width h giving equal compression n->h and h->k, i.e. round(sqrt(n*k)) half-up."""
    if not n > k >= 1:
        raise ContractError(f"hidden_width needs n > k >= 1, got n={n}, k={k}")
    target = n * k
    h = int(target ** 0.5)
    while (h + 1) ** 2 <= target:
        h += 1
    # half-up: compare n*k against (h + 1/2)^2 = h^2 + h + 1/4 exactly in integers
    return h + 1 if 4 * target >= 4 * h * h + 4 * h + 1 else h


def dense_autoencoder(n: int, widths: list[int], hidden: str = "sigmoid",
                      code: str = "sigmoid", output: str = "sigmoid", seed: int = 0) -> Network:
    """Symmetric MLP n -> widths... -> widths[-2]... -> n; widths[-1] is the code."""
    enc = [Dense(w, hidden) for w in widths[:-1]] + [Dense(widths[-1], code)]
    dec = [Dense(w, hidden) for w in reversed(widths[:-1])] + [Dense(n, output)]
    return Network((n,), enc + dec, len(enc), seed=seed)


def visualization_net(n: int, code: int = 2, seed: int = 0) -> Network:
    """n -> h -> 2 -> h -> n with h from :func:`hidden_width`."""
    return dense_autoencoder(n, [hidden_width(n, code), code], seed=seed)


def denoising_net(height: int, width: int, channels: int, scale: float = 1.0,
                  seed: int = 0) -> Network:
    """Conv5x5(64) -> Conv1x1(128) -> MaxPool [code] -> Deconv5x5(64) -> Upsample -> Deconv3x3(C)."""
    c1, c2 = max(1, round(64 * scale)), max(1, round(128 * scale))
    layers = [
        Conv(c1, 5, 1, "relu"),
        Conv(c2, 1, 1, "relu"),
        MaxPool(),
        Deconv(c1, 5, 1, "relu"),
        Upsample(),
        Deconv(channels, 3, 1, "sigmoid"),
    ]
    return Network((height, width, channels), layers, 3, seed=seed)


def hashing_net(n: int, bits: int = 7, hidden: int = 512, sigma: float = 0.2,
                seed: int = 0) -> Network:
    """n -> hidden -> bits (sigmoid) | GaussianNoise -> hidden -> n."""
    layers = [
        Dense(hidden, "sigmoid"),
        Dense(bits, "sigmoid"),
        GaussianNoise(sigma),
        Dense(hidden, "sigmoid"),
        Dense(n, "sigmoid"),
    ]
    return Network((n,), layers, 2, seed=seed)


def detection_net(n: int, code: int = 2, seed: int = 0) -> Network:
    """n -> code (ReLU) -> n (sigmoid)."""
    return Network((n,), [Dense(code, "relu"), Dense(n, "sigmoid")], 1, seed=seed)


def variational_net(side: int = 64, latent: int = 32, seed: int = 0) -> Network:
    """Three stride-2 convs (8, 16, 32) -> Dense(2*latent) -> Sampling [code] ->
    Dense(s/8 x s/8 x 8) -> Deconvs (32, 16, 8, stride 2) -> Deconv(1)."""
    if side % 8:
        raise ContractError(f"image side must be divisible by 8, got {side}")
    s8 = side // 8
    layers = [
        Conv(8, 3, 2, "relu"),
        Conv(16, 3, 2, "relu"),
        Conv(32, 3, 2, "relu"),
        Dense(2 * latent, "linear"),
        Sampling(),
        Dense((s8, s8, 8), "relu"),
        Deconv(32, 3, 2, "relu"),
        Deconv(16, 3, 2, "relu"),
        Deconv(8, 3, 2, "relu"),
        Deconv(1, 3, 1, "sigmoid"),
    ]
    return Network((side, side, 1), layers, 5, seed=seed)
