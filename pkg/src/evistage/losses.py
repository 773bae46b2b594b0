"""Evidential training losses.

Per-sample loss = expected cross-entropy under the predictive Dirichlet
plus an annealed KL penalty pushing wrong-class evidence toward the
uniform prior. The overall objective sums the fused-opinion loss and
every per-view loss over the batch.

Array helpers operate on batches of Dirichlet parameter rows (n, K);
the public single-sample operations wrap them.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError, EmptyInputError
from .opinion import DirichletEvidence
from .special import digamma, log_gamma, trigamma

_PARAM_TOL = 1e-12


def _as_onehot(g, class_count: int) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.shape[-1] != class_count:
        raise DimensionError("one-hot label length must equal class count")
    ones = np.sum(g == 1.0, axis=-1)
    zeros = np.sum(g == 0.0, axis=-1)
    if np.any(ones != 1) or np.any(zeros != class_count - 1):
        raise DimensionError("labels must be exactly one-hot")
    return g


def expected_ce_batch(params: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    """psi(S) - psi(d_true) per row."""
    strength = params.sum(axis=-1)
    return digamma(strength) - (onehot * digamma(params)).sum(axis=-1)


def adjust_params(params: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    """Clamp the true-class parameter to 1, leaving the rest unchanged."""
    return onehot + (1.0 - onehot) * params


def kl_uniform_batch(adjusted: np.ndarray) -> np.ndarray:
    """KL from Dirichlet(adjusted) to the uniform Dirichlet prior, per row."""
    adjusted = np.asarray(adjusted, dtype=np.float64)
    if np.any(adjusted < 1.0 - _PARAM_TOL):
        raise DomainError("adjusted parameters must be >= 1; run adjust_params first")
    single = adjusted.ndim == 1
    adjusted = np.atleast_2d(np.maximum(adjusted, 1.0))
    k = adjusted.shape[-1]
    total = adjusted.sum(axis=-1)
    log_norm = log_gamma(total) - log_gamma(float(k)) - log_gamma(adjusted).sum(axis=-1)
    tilt = ((adjusted - 1.0) * (digamma(adjusted) - digamma(total)[:, None])).sum(axis=-1)
    result = log_norm + tilt
    return result[0] if single else result


def sample_loss_batch(params: np.ndarray, onehot: np.ndarray, eta: float) -> np.ndarray:
    return expected_ce_batch(params, onehot) + eta * kl_uniform_batch(
        adjust_params(params, onehot)
    )


def sample_loss_grad(params: np.ndarray, onehot: np.ndarray, eta: float) -> np.ndarray:
    """Gradient of sample_loss_batch with respect to the Dirichlet parameters.

    d/dd_j [psi(S) - psi(d_true)] = psi'(S) - g_j psi'(d_j)
    d/dd_j  KL(adjusted)          = (1-g_j) [(d~_j - 1) psi'(d~_j) - (S~ - K) psi'(S~)]
    """
    strength = params.sum(axis=-1, keepdims=True)
    grad = trigamma(strength) - onehot * trigamma(params)
    if eta != 0.0:
        adj = adjust_params(params, onehot)
        k = params.shape[-1]
        s_adj = adj.sum(axis=-1, keepdims=True)
        kl_grad = (adj - 1.0) * trigamma(adj) - (s_adj - k) * trigamma(s_adj)
        grad = grad + eta * (1.0 - onehot) * kl_grad
    return grad


def anneal_coefficient(epoch: int, anneal_epochs: int) -> float:
    """Linear ramp from 0 to 1 over the first anneal_epochs epochs."""
    if epoch < 0 or anneal_epochs < 1:
        raise DomainError("epoch must be >= 0 and anneal_epochs >= 1")
    return min(1.0, epoch / anneal_epochs)


# ---------------------------------------------------------------------------
# Single-sample operations over the value types.
# ---------------------------------------------------------------------------

def expected_ce_loss(d: DirichletEvidence, onehot) -> float:
    onehot = _as_onehot(onehot, d.class_count)
    return float(expected_ce_batch(d.params, onehot))


def adjust_dirichlet(d: DirichletEvidence, onehot) -> np.ndarray:
    onehot = _as_onehot(onehot, d.class_count)
    return adjust_params(d.params, onehot)


def kl_uniform(adjusted) -> float:
    return float(kl_uniform_batch(np.asarray(adjusted, dtype=np.float64)))


def sample_loss(d: DirichletEvidence, onehot, eta: float) -> float:
    onehot = _as_onehot(onehot, d.class_count)
    return float(sample_loss_batch(d.params, onehot, eta))


def overall_loss(fused: DirichletEvidence, per_view, onehot, eta: float) -> float:
    """Fused-opinion loss plus the sum of per-view losses for one sample."""
    per_view = list(per_view)
    if not per_view:
        raise EmptyInputError("overall_loss needs at least one per-view Dirichlet")
    total = sample_loss(fused, onehot, eta)
    for d in per_view:
        if d.class_count != fused.class_count:
            raise DimensionError("all views must share the fused class count")
        total += sample_loss(d, onehot, eta)
    return total
