"""Reconstruction distances, code penalties, input corruption and their sum.

Distances reduce by the mean over coordinates and then over instances, so a
batch objective equals the average per-instance distance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import EPS, ContractError, DimensionError, Node, Tape
from .layers import Dense, Network, Pass, Sampling, TRAIN
from .prng import cauchy, normal

DISTANCES = ("mse", "bce")
PENALTIES = ("sparse_quadratic", "sparse_kl", "contractive", "vae_kl")
NOISES = ("gaussian", "cauchy", "zero_mask", "zero_one_mask")

DEFAULT_WEIGHTS = {"contractive": 1e-3, "sparse_quadratic": 1e-2, "sparse_kl": 1e-2, "vae_kl": 1.0}
DEFAULT_RHO = 0.05


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    sigma: float = 0.1  # std for gaussian, scale for cauchy
    p: float = 0.1

    def __post_init__(self):
        if self.kind not in NOISES:
            raise ContractError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ContractError(f"noise p must lie in [0, 1], got {self.p}")
        if self.kind in ("gaussian", "cauchy") and self.sigma < 0:
            raise ContractError(f"noise scale must be non-negative, got {self.sigma}")


@dataclass(frozen=True)
class Penalty:
    kind: str
    weight: float
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if self.kind not in PENALTIES:
            raise ContractError(f"unknown penalty {self.kind!r}")
        if self.weight < 0:
            raise ContractError(f"penalty weight must be >= 0, got {self.weight}")
        if self.kind.startswith("sparse") and not 0.0 < self.rho < 1.0:
            raise ContractError(f"sparsity target rho must lie in (0, 1), got {self.rho}")


@dataclass(frozen=True)
class ObjectiveSpec:
    distance: str = "mse"
    penalties: tuple[Penalty, ...] = field(default_factory=tuple)
    corruption: Optional[NoiseSpec] = None
    class_weight: Optional[float] = None

    def __post_init__(self):
        if self.distance not in DISTANCES:
            raise ContractError(f"unknown distance {self.distance!r}")
        if self.class_weight is not None and not 0.0 <= self.class_weight <= 1.0:
            raise ContractError(f"class weight alpha must lie in [0, 1], got {self.class_weight}")


def _check_same(x: Node, y: Node, name: str):
    if x.shape != y.shape:
        raise DimensionError(f"{name}: shapes {x.shape} and {y.shape} differ")


def _per_instance_mean(v: Node) -> Node:
    B = v.shape[0]
    return ad.mean(ad.reshape(v, (B, -1)), axis=1)


def mse_per_instance(x: Node, xr: Node) -> Node:
    _check_same(x, xr, "mse")
    return _per_instance_mean(ad.square(x - xr))


def bce_per_instance(x: Node, xr: Node) -> Node:
    _check_same(x, xr, "bce")
    p = ad.clip(xr, EPS, 1.0 - EPS)
    ll = x * ad.log(p) + (1.0 - x) * ad.log(1.0 - p)
    return -_per_instance_mean(ll)


def distance_per_instance(kind: str, x: Node, xr: Node) -> Node:
    if kind == "mse":
        return mse_per_instance(x, xr)
    if kind == "bce":
        return bce_per_instance(x, xr)
    raise ContractError(f"unknown distance {kind!r}")


def mse(x: Node, xr: Node) -> Node:
    return ad.mean(mse_per_instance(x, xr))


def bce(x: Node, xr: Node) -> Node:
    return ad.mean(bce_per_instance(x, xr))


def _unit_rates(codes: Node) -> Node:
    return ad.mean(ad.reshape(codes, (codes.shape[0], -1)), axis=0)


def sparse_penalty_quadratic(codes: Node, rho: float) -> Node:
    """sum_j (rho - rho_j)^2 with rho_j the batch-mean activation of code unit j."""
    return ad.sum(ad.square(rho - _unit_rates(codes)))


def sparse_penalty_kl(codes: Node, rho: float) -> Node:
    """sum_j KL(Bernoulli(rho) || Bernoulli(rho_j)), natural log."""
    rj = ad.clip(_unit_rates(codes), EPS, 1.0 - EPS)
    terms = (-rho) * ad.log(rj) - (1.0 - rho) * ad.log(1.0 - rj)
    const = rho * np.log(rho) + (1.0 - rho) * np.log(1.0 - rho)
    return ad.sum(terms) + const * rj.shape[0]


def contractive_penalty(encoder_records: Sequence, reduction: str = "mean") -> Node:
    """Squared Frobenius norm of the encoder Jacobian, averaged (or summed) over the batch.

    ``encoder_records`` are the forward records of the encoder's dense layers,
    in order. The Jacobian is assembled as a product of ``W_l * act'(a_l)``
    factors on the tape, so the penalty is itself differentiable in theta.
    """
    J = None
    for rec in encoder_records:
        if not isinstance(rec.layer, Dense) or len(rec.layer.units) != 1:
            raise ContractError(f"contractive penalty needs dense layers, got {rec.layer.kind}")
        tape = rec.output.tape
        W = tape.param(rec.layer.params[0])
        d = ad.activation_derivative(rec.layer.activation, rec.pre, rec.output)
        B = rec.output.shape[0]
        # per-instance factor W * diag(d): [B, n_in, n_out]
        if isinstance(d, float):
            factor = ad.reshape(W, (1,) + W.shape)
        else:
            factor = ad.reshape(W, (1,) + W.shape) * ad.reshape(d, (B, 1, d.shape[1]))
        J = factor if J is None else ad.matmul(J, factor)
    if J is None:
        raise ContractError("contractive penalty needs at least one encoder layer")
    # an all-linear encoder leaves J with a batch axis of 1 shared by every row
    B = encoder_records[0].output.shape[0]
    per_row = ad.scale(ad.sum(ad.square(J)), 1.0 / J.shape[0])
    return ad.scale(per_row, float(B)) if reduction == "sum" else per_row


def vae_kl(mu: Node, logvar: Node) -> Node:
    """Batch mean of KL(N(mu, exp(logvar)) || N(0, I))."""
    _check_same(mu, logvar, "vae_kl")
    per = ad.sum(ad.square(mu) + ad.exp(logvar) - logvar - 1.0, axis=1)
    return ad.scale(ad.mean(per), 0.5)


def corrupt(x: np.ndarray, spec: Optional[NoiseSpec], rng: Optional[np.random.Generator],
            mode: str = TRAIN) -> np.ndarray:
    """Apply the corruption function; identity in eval mode or without a spec."""
    if spec is None or mode != TRAIN:
        return x
    x = np.asarray(x, dtype=ad.DTYPE)
    if spec.kind == "gaussian":
        return x + normal(rng, x.shape, spec.sigma) if spec.sigma > 0 else x
    if spec.kind == "cauchy":
        return x + cauchy(rng, x.shape, spec.sigma) if spec.sigma > 0 else x
    u = rng.random(x.shape)
    if spec.kind == "zero_mask":
        return np.where(u < spec.p, 0.0, x)
    # zero_one_mask: [0, p) -> 0, [p, 2p) -> 1
    return np.where(u < spec.p, 0.0, np.where(u < 2 * spec.p, 1.0, x))


def weighted_reconstruction(tape: Tape, x_neg, x_pos, alpha: float, net: Network,
                            distance: str = "mse", rng=None) -> Node:
    """(1 - alpha) * sum over negatives + alpha * sum over positives of d(x, g(f(x)))."""
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"alpha must lie in [0, 1], got {alpha}")
    total = tape.constant(0.0)
    for X, w in ((x_neg, 1.0 - alpha), (x_pos, alpha)):
        if X is None or len(X) == 0:
            continue
        run = net.run(tape, X, rng)
        total = total + ad.scale(ad.sum(distance_per_instance(distance, run.input, run.output)), w)
    return total


def _penalty_value(pen: Penalty, run: Pass, net: Network) -> Node:
    if pen.kind == "sparse_quadratic":
        return sparse_penalty_quadratic(run.code, pen.rho)
    if pen.kind == "sparse_kl":
        return sparse_penalty_kl(run.code, pen.rho)
    if pen.kind == "contractive":
        encoder = set(map(id, net.encoder))
        return contractive_penalty([r for r in run.records if id(r.layer) in encoder])
    for rec in run.records:
        if isinstance(rec.layer, Sampling):
            k = rec.layer.out_shape[0]
            return vae_kl(rec.input[:, :k], rec.input[:, k:])
    raise ContractError("vae_kl penalty needs a sampling layer")


def total_objective(tape: Tape, x, spec: ObjectiveSpec, net: Network,
                    rng: Optional[np.random.Generator] = None, labels=None) -> Node:
    """d(x, g(f(nu(x)))) + sum of weighted penalties.

    The corruption touches the network input only; the distance compares
    against the clean ``x``. With ``class_weight`` set, ``labels`` (1 = positive)
    split the batch as in the class-weighted objective and the distance term
    is that weighted sum.
    """
    x = np.asarray(x, dtype=ad.DTYPE)
    noisy = corrupt(x, spec.corruption, rng, net.mode)
    run = net.run(tape, noisy, rng)
    clean = tape.constant(x)
    per = distance_per_instance(spec.distance, clean, run.output)
    if spec.class_weight is not None:
        if labels is None:
            raise ContractError("class-weighted objective needs labels")
        a = spec.class_weight
        w = np.where(np.asarray(labels) > 0, a, 1.0 - a).astype(ad.DTYPE)
        total = ad.sum(per * w)
    else:
        total = ad.mean(per)
    for pen in spec.penalties:
        if pen.weight == 0:
            continue
        total = total + ad.scale(_penalty_value(pen, run, net), pen.weight)
    return total
