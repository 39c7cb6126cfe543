"""Proxy learning: fit per-class weight vectors to pseudo-label distributions.

The objective is the mean KL divergence between the pseudo-labels and the
softmax distribution induced by the weights over image embeddings. Descent
is full-batch gradient descent with momentum; after every step each weight
row is projected back onto the unit sphere so logits stay on the cosine
scale the temperature assumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError
from .numerics import as_matrix, l2_normalize_rows, log_softmax_rows
from .retrieval import TextProxies
from .solvers import PseudoLabels

__all__ = [
    "ProxyWeights",
    "LearnConfig",
    "LearnTrace",
    "loss",
    "gradient",
    "learn",
    "classify",
]


@dataclass(frozen=True)
class ProxyWeights:
    """K x d learned proxy matrix with unit-norm rows."""

    w: np.ndarray

    def __post_init__(self):
        w = as_matrix(self.w, "proxy weights")
        norms = np.linalg.norm(w, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            row = int(np.flatnonzero(np.abs(norms - 1.0) > 1e-9)[0])
            raise UsageError(f"proxy row {row} has norm {norms[row]!r}, expected 1")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class LearnConfig:
    # momentum 0.5: 0.9 overshoots at tau 0.01 and breaks monotone descent
    tau_learn: float = 0.01
    learning_rate: float = 0.02
    momentum: float = 0.5
    max_epochs: int = 500
    loss_tolerance: float = 1e-7

    def __post_init__(self):
        if self.tau_learn <= 0:
            raise UsageError(f"tau_learn must be positive, got {self.tau_learn}")
        if self.learning_rate < 0:
            raise UsageError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise UsageError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.max_epochs < 1:
            raise UsageError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.loss_tolerance < 0:
            raise UsageError(f"loss_tolerance must be >= 0, got {self.loss_tolerance}")


@dataclass
class LearnTrace:
    """Loss before any step (index 0) and after each epoch's step."""

    losses: list[float]
    epochs_run: int
    stop_reason: str  # "converged" or "max_epochs"


def _check_shapes(w: np.ndarray, images: np.ndarray, labels: np.ndarray) -> None:
    n, d = images.shape
    k, dw = w.shape
    if dw != d:
        raise UsageError(f"images have dim {d} but proxies have dim {dw}")
    if labels.shape != (n, k):
        raise UsageError(
            f"labels shape {labels.shape} does not match {n} images x {k} classes"
        )


def loss(w: ProxyWeights, images, labels: PseudoLabels, tau: float) -> float:
    """Mean KL(labels || softmax(images @ w.T / tau)) over the dataset."""
    if tau <= 0:
        raise UsageError(f"tau must be positive, got {tau}")
    x = as_matrix(images, "image embeddings")
    _check_shapes(w.w, x, labels.p)
    log_q = log_softmax_rows(x @ w.w.T, tau)
    support = labels.p > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(support, labels.p * (np.log(labels.p) - log_q), 0.0)
    return float(terms.sum() / x.shape[0])


def gradient(w: ProxyWeights, images, labels: PseudoLabels, tau: float) -> np.ndarray:
    """Analytic K x d gradient of :func:`loss`: (1/(N tau)) (P - Q)^T X."""
    if tau <= 0:
        raise UsageError(f"tau must be positive, got {tau}")
    x = as_matrix(images, "image embeddings")
    _check_shapes(w.w, x, labels.p)
    p = np.exp(log_softmax_rows(x @ w.w.T, tau))
    n = x.shape[0]
    return (p - labels.p).T @ x / (n * tau)


def learn(
    images,
    labels: PseudoLabels,
    init: TextProxies,
    cfg: LearnConfig,
) -> tuple[ProxyWeights, LearnTrace]:
    """Full-batch momentum descent from the text proxies.

    Stops when the epoch-over-epoch loss decrease falls below
    ``cfg.loss_tolerance`` (reason "converged") or after ``cfg.max_epochs``
    steps. Weight rows are re-normalized after every step.
    """
    x = as_matrix(images, "image embeddings")
    w = init.w.copy()
    _check_shapes(w, x, labels.p)
    velocity = np.zeros_like(w)
    current = loss(ProxyWeights(w), x, labels, cfg.tau_learn)
    if not np.isfinite(current):
        raise NumericError(
            f"initial loss is {current!r} (learning_rate={cfg.learning_rate})"
        )
    losses = [current]
    epochs_run = 0
    stop_reason = "max_epochs"
    for epoch in range(1, cfg.max_epochs + 1):
        g = gradient(ProxyWeights(w), x, labels, cfg.tau_learn)
        velocity = cfg.momentum * velocity - cfg.learning_rate * g
        w = l2_normalize_rows(w + velocity)
        current = loss(ProxyWeights(w), x, labels, cfg.tau_learn)
        if not np.isfinite(current):
            raise NumericError(
                f"loss became {current!r} at epoch {epoch} "
                f"(learning_rate={cfg.learning_rate})"
            )
        losses.append(current)
        epochs_run = epoch
        if losses[-2] - losses[-1] < cfg.loss_tolerance:
            stop_reason = "converged"
            break
    return ProxyWeights(w), LearnTrace(losses, epochs_run, stop_reason)


def classify(images, w: ProxyWeights) -> np.ndarray:
    """Argmax inner product per image; ties break to the lowest class index."""
    x = as_matrix(images, "image embeddings")
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if x.shape[1] != w.w.shape[1]:
        raise UsageError(
            f"images have dim {x.shape[1]} but proxies have dim {w.w.shape[1]}"
        )
    return np.argmax(x @ w.w.T, axis=1)
