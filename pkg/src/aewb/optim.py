"""SGD and Adam updates plus a seeded mini-batch training loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import ContractError, GradientMap, Node, Parameter, Tape, backward

log = logging.getLogger(__name__)


def sgd_step(params: Sequence[Parameter], grads: GradientMap, lr: float = 1e-2) -> None:
    if lr <= 0:
        raise ContractError(f"learning rate must be positive, got {lr}")
    for p in params:
        p.value -= lr * grads[p]


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: Sequence[Parameter], grads: GradientMap) -> AdamState:
    """One Adam update with bias correction; mutates params and state in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p in params:
        g = grads[p]
        m = state.m.get(p)
        if m is None:
            m = state.m[p] = np.zeros_like(p.value)
            state.v[p] = np.zeros_like(p.value)
        v = state.v[p]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


class Optimizer:
    """Uniform front end: ``Optimizer("adam", lr).step(params, grads)``."""

    def __init__(self, kind: str = "adam", lr: Optional[float] = None, **adam_kw):
        if kind not in ("sgd", "adam"):
            raise ContractError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.lr = lr if lr is not None else (1e-3 if kind == "adam" else 1e-2)
        if self.lr <= 0:
            raise ContractError(f"learning rate must be positive, got {self.lr}")
        self.state = AdamState(lr=self.lr, **adam_kw) if kind == "adam" else None

    def step(self, params: Sequence[Parameter], grads: GradientMap) -> None:
        if self.kind == "sgd":
            sgd_step(params, grads, self.lr)
        else:
            adam_step(self.state, params, grads)


def fit(params: Sequence[Parameter], loss_fn: Callable[[Tape, np.ndarray], Node], n: int,
        optimizer: Optimizer, rng: np.random.Generator, epochs: int = 100,
        batch_size: int = 32, patience: int = 10, min_delta: float = 1e-6) -> list[float]:
    """Shuffled mini-batch descent over ``n`` instances; returns per-epoch mean loss.

    ``loss_fn(tape, idx)`` builds the batch objective for row indices ``idx``.
    Stops early once the best epoch loss has improved by less than
    ``min_delta`` over the last ``patience`` epochs (``patience=0`` disables).
    """
    if epochs < 1:
        raise ContractError("epochs must be >= 1")
    history: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            tape = Tape()
            loss = loss_fn(tape, idx)
            grads = backward(tape, loss, params)
            optimizer.step(params, grads)
            total += float(loss.value) * len(idx)
        history.append(total / n)
        log.debug("epoch %d loss %.6g", epoch + 1, history[-1])
        if patience and len(history) > patience:
            if min(history[:-patience]) - min(history[-patience:]) < min_delta:
                break
    return history
