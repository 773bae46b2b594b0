"""Per-view evidential MLP, joint training, and gradient verification.

Each view owns a small MLP with tanh hidden layers and a softplus output
head producing non-negative evidence. All views are trained jointly: the
objective sums each view's evidential loss and the loss of the Dempster
fused opinion, with gradients backpropagated by hand through the fusion
fold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import MultiViewDataset, TRAIN
from .errors import DimensionError, DivergenceError, EmptyInputError
from .losses import anneal_coefficient, sample_loss_batch, sample_loss_grad
from .opinion import DirichletEvidence, dirichlet_from_evidence
from .special import sigmoid, softplus


@dataclass
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 1e-3
    anneal_epochs: int = 50
    batch_size: int | None = None  # None = full batch
    optimizer: str = "adaptive-moments"  # or "plain-gradient-descent"
    hidden_dims: tuple = (64,)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.anneal_epochs < 1 or self.learning_rate <= 0:
            raise ValueError("epochs >= 1, anneal_epochs >= 1, learning_rate > 0")
        if self.optimizer not in ("adaptive-moments", "plain-gradient-descent"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class EvidentialClassifier:
    """MLP with softplus evidence head for one view."""

    view_id: str
    layer_dims: tuple
    weights: list
    biases: list
    activation: str = "tanh"
    rng_seed: int = 0

    @classmethod
    def initialize(cls, view_id, layer_dims, seed=0):
        layer_dims = tuple(int(d) for d in layer_dims)
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            scale = np.sqrt(2.0 / (fan_in + fan_out))
            weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(view_id=view_id, layer_dims=layer_dims,
                   weights=weights, biases=biases, rng_seed=seed)

    @property
    def class_count(self) -> int:
        return self.layer_dims[-1]

    def forward_batch(self, x: np.ndarray):
        """Evidence for a (n, dim) batch plus the caches backprop needs."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.layer_dims[0]:
            raise DimensionError(
                f"view {self.view_id!r} expects input width {self.layer_dims[0]}"
            )
        hs = [x]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            hs.append(np.tanh(hs[-1] @ w + b))
        z = hs[-1] @ self.weights[-1] + self.biases[-1]
        return softplus(z), (hs, z)

    def forward(self, x) -> DirichletEvidence:
        """Single-sample forward pass to a Dirichlet evidence value."""
        evidence, _ = self.forward_batch(np.asarray(x, dtype=np.float64)[None, :])
        return dirichlet_from_evidence(evidence[0])

    def backward_batch(self, cache, grad_evidence):
        """Parameter gradients given d(objective)/d(evidence)."""
        hs, z = cache
        delta = grad_evidence * sigmoid(z)
        grads_w, grads_b = [], []
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w.append(hs[layer].T @ delta)
            grads_b.append(delta.sum(axis=0))
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (1.0 - hs[layer] ** 2)
        return grads_w[::-1], grads_b[::-1]

    def save(self, path):
        arrays = {f"w{i}": w for i, w in enumerate(self.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(self.biases)})
        np.savez(
            path,
            view_id=np.str_(self.view_id),
            layer_dims=np.array(self.layer_dims, dtype=np.int64),
            activation=np.str_(self.activation),
            rng_seed=np.int64(self.rng_seed),
            n_layers=np.int64(len(self.weights)),
            **arrays,
        )

    @classmethod
    def load(cls, path):
        with np.load(path) as blob:
            n = int(blob["n_layers"])
            return cls(
                view_id=str(blob["view_id"]),
                layer_dims=tuple(int(d) for d in blob["layer_dims"]),
                weights=[blob[f"w{i}"] for i in range(n)],
                biases=[blob[f"b{i}"] for i in range(n)],
                activation=str(blob["activation"]),
                rng_seed=int(blob["rng_seed"]),
            )


def forward(model: EvidentialClassifier, x) -> DirichletEvidence:
    return model.forward(x)


# ---------------------------------------------------------------------------
# Differentiable fusion over raw arrays (batched opinions).
# ---------------------------------------------------------------------------

def _opinion_arrays(evidence: np.ndarray):
    k = evidence.shape[1]
    strength = evidence.sum(axis=1) + k
    return evidence / strength[:, None], k / strength, strength


def _fuse_forward(evidences):
    """Fold the pairwise rule over per-view evidence batches.

    Returns the fused (beliefs, uncertainty) plus the intermediate states
    needed for the backward pass.
    """
    opinions = [_opinion_arrays(e)[:2] for e in evidences]
    states = [opinions[0]]
    norms = []
    for b2, u2 in opinions[1:]:
        b1, u1 = states[-1]
        c = b1.sum(axis=1) * b2.sum(axis=1) - (b1 * b2).sum(axis=1)
        norm = 1.0 - c
        if np.any(norm < 1e-12):
            raise DivergenceError("total conflict encountered during fusion")
        beliefs = (b1 * b2 + b1 * u2[:, None] + b2 * u1[:, None]) / norm[:, None]
        states.append((beliefs, u1 * u2 / norm))
        norms.append(norm)
    return states[-1], (opinions, states, norms)


def _fuse_backward(grad_b, grad_u, caches):
    """Adjoints of the fused opinion with respect to each view's opinion."""
    opinions, states, norms = caches
    view_grads = [None] * len(opinions)
    gb, gu = grad_b, grad_u
    for t in range(len(opinions) - 1, 0, -1):
        b1, u1 = states[t - 1]
        b2, u2 = opinions[t]
        out_b, out_u = states[t]
        norm = norms[t - 1]
        # d(out)/d(1-C) weight shared by every conflict derivative
        w = ((gb * out_b).sum(axis=1) + gu * out_u) / norm
        sum1 = b1.sum(axis=1)
        sum2 = b2.sum(axis=1)
        gb1 = gb * (b2 + u2[:, None]) / norm[:, None] + w[:, None] * (sum2[:, None] - b2)
        gu1 = (gb * b2).sum(axis=1) / norm + gu * u2 / norm
        gb2 = gb * (b1 + u1[:, None]) / norm[:, None] + w[:, None] * (sum1[:, None] - b1)
        gu2 = (gb * b1).sum(axis=1) / norm + gu * u1 / norm
        view_grads[t] = (gb2, gu2)
        gb, gu = gb1, gu1
    view_grads[0] = (gb, gu)
    return view_grads


def _evidence_adjoint(gb, gu, evidence, strength, k):
    """Chain (beliefs, uncertainty) adjoints back to raw evidence."""
    s = strength[:, None]
    inner = (gb * evidence).sum(axis=1) + gu * k
    return gb / s - (inner / strength**2)[:, None]


def _fused_params(beliefs, uncertainty, k):
    return beliefs * (k / uncertainty)[:, None] + 1.0


def objective(models, inputs, onehot, eta):
    """Summed overall loss for a batch: fused term plus every view term."""
    if not models:
        raise EmptyInputError("need at least one view model")
    evidences = [m.forward_batch(x)[0] for m, x in zip(models, inputs)]
    k = onehot.shape[1]
    total = 0.0
    for e in evidences:
        total += sample_loss_batch(e + 1.0, onehot, eta).sum()
    (b_f, u_f), _ = _fuse_forward(evidences)
    total += sample_loss_batch(_fused_params(b_f, u_f, k), onehot, eta).sum()
    return float(total)


def objective_and_grads(models, inputs, onehot, eta):
    """Objective value and parameter gradients for every view model."""
    k = onehot.shape[1]
    evidences, caches = [], []
    for m, x in zip(models, inputs):
        e, cache = m.forward_batch(x)
        evidences.append(e)
        caches.append(cache)
    (b_f, u_f), fuse_cache = _fuse_forward(evidences)
    d_fused = _fused_params(b_f, u_f, k)

    total = sample_loss_batch(d_fused, onehot, eta).sum()
    for e in evidences:
        total += sample_loss_batch(e + 1.0, onehot, eta).sum()

    # fused branch: loss -> fused params -> fused opinion -> per-view opinions
    g_fused = sample_loss_grad(d_fused, onehot, eta)
    scale = k / u_f
    gb_f = g_fused * scale[:, None]
    gu_f = -(scale / u_f) * (g_fused * b_f).sum(axis=1)
    opinion_grads = _fuse_backward(gb_f, gu_f, fuse_cache)

    grads = []
    for m, e, cache, (gb, gu) in zip(models, evidences, caches, opinion_grads):
        strength = e.sum(axis=1) + k
        ge = sample_loss_grad(e + 1.0, onehot, eta)  # direct view term, d = e + 1
        ge = ge + _evidence_adjoint(gb, gu, e, strength, k)
        grads.append(m.backward_batch(cache, ge))
    return float(total), grads


@dataclass
class TrainResult:
    models: list
    epoch_losses: np.ndarray  # mean per-sample overall loss per epoch


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


class _PlainGradientDescent:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def _flatten_params(models):
    params = []
    for m in models:
        params.extend(m.weights)
        params.extend(m.biases)
    return params


def _flatten_grads(grads):
    flat = []
    for gw, gb in grads:
        flat.extend(gw)
        flat.extend(gb)
    return flat


def train(dataset: MultiViewDataset, config: TrainConfig) -> TrainResult:
    """Jointly fit one evidential MLP per view on the training split."""
    train_idx = dataset.indices(TRAIN)
    if len(train_idx) == 0:
        raise EmptyInputError("training split is empty")
    view_ids = dataset.view_ids
    inputs = [dataset.views[v][train_idx] for v in view_ids]
    onehot = dataset.onehot_labels(train_idx)
    n = len(train_idx)

    seeds = np.random.SeedSequence(config.seed).generate_state(len(view_ids))
    models = [
        EvidentialClassifier.initialize(
            vid, (x.shape[1], *config.hidden_dims, dataset.class_count), int(s)
        )
        for vid, x, s in zip(view_ids, inputs, seeds)
    ]
    params = _flatten_params(models)
    if config.optimizer == "adaptive-moments":
        optimizer = _Adam(params, config.learning_rate)
    else:
        optimizer = _PlainGradientDescent(params, config.learning_rate)

    batch = config.batch_size or n
    epoch_losses = np.empty(config.epochs)
    for epoch in range(config.epochs):
        eta = anneal_coefficient(epoch, config.anneal_epochs)
        epoch_loss = 0.0
        for start in range(0, n, batch):
            stop = min(start + batch, n)
            loss, grads = objective_and_grads(
                models,
                [x[start:stop] for x in inputs],
                onehot[start:stop],
                eta,
            )
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            epoch_loss += loss
            optimizer.step(params, _flatten_grads(grads))
        epoch_losses[epoch] = epoch_loss / n
    return TrainResult(models=models, epoch_losses=epoch_losses)


@dataclass
class GradientCheckReport:
    relative_errors: np.ndarray
    max_relative_error: float
    coordinates_checked: int


def gradient_check(models, inputs, onehot, eta,
                   num_coords=200, step=1e-5, seed=0) -> GradientCheckReport:
    """Compare analytic gradients against central finite differences."""
    _, grads = objective_and_grads(models, inputs, onehot, eta)
    params = _flatten_params(models)
    flat_grads = _flatten_grads(grads)
    sizes = [p.size for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    coords = rng.choice(total, size=min(num_coords, total), replace=False)

    offsets = np.cumsum([0] + sizes)
    errors = np.empty(len(coords))
    for i, flat_index in enumerate(coords):
        which = int(np.searchsorted(offsets, flat_index, side="right") - 1)
        local = np.unravel_index(flat_index - offsets[which], params[which].shape)
        original = params[which][local]
        params[which][local] = original + step
        upper = objective(models, inputs, onehot, eta)
        params[which][local] = original - step
        lower = objective(models, inputs, onehot, eta)
        params[which][local] = original
        fd = (upper - lower) / (2.0 * step)
        analytic = flat_grads[which][local]
        errors[i] = abs(analytic - fd) / max(1e-8, abs(analytic) + abs(fd))
    return GradientCheckReport(
        relative_errors=errors,
        max_relative_error=float(errors.max()),
        coordinates_checked=len(coords),
    )
