"""Staged single -> dual -> full inference with tuned uncertainty thresholds.

A sample is first classified from the lead view alone; only if that
opinion's uncertainty exceeds t1 is the partner view consulted (pairwise
fusion), and only if the fused uncertainty exceeds t2 are the remaining
views evaluated. Views past the deciding stage are never touched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LabeledSample
from .errors import (
    ConfigurationError,
    DimensionError,
    EmptyInputError,
    TotalConflictError,
)
from .fusion import combine_pair
from .opinion import SubjectiveOpinion, opinion_from_dirichlet


@dataclass(frozen=True)
class StagedDecisionPolicy:
    """Ordered view schedule plus the two uncertainty thresholds."""

    view_order: tuple
    t1: float
    t2: float

    def __post_init__(self):
        if len(self.view_order) < 1:
            raise ConfigurationError("view_order must list at least one view")
        if not (0.0 <= self.t1 <= 1.0 and 0.0 <= self.t2 <= 1.0):
            raise ConfigurationError("thresholds must lie in [0, 1]")


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    stage_used: int
    opinion: SubjectiveOpinion
    predicted_class: int
    u_single: float
    u_dual: float | None
    u_tri: float | None


def _classify(opinion: SubjectiveOpinion) -> int:
    # np.argmax takes the lowest index on ties
    return int(np.argmax(opinion.beliefs))


def staged_predict(sample: LabeledSample, models, policy: StagedDecisionPolicy) -> PredictionRecord:
    """Route one sample through the staged policy, evaluating views lazily."""
    order = policy.view_order
    missing = [v for v in order if v not in models]
    if missing:
        raise ConfigurationError(f"no model for views {missing}")

    def view_opinion(view_id):
        return opinion_from_dirichlet(models[view_id].forward(sample.features[view_id]))

    opinion = view_opinion(order[0])
    u_single = opinion.uncertainty
    u_dual = u_tri = None
    stage = 1
    try:
        if u_single > policy.t1 and len(order) > 1:
            fused = combine_pair(opinion, view_opinion(order[1]))
            opinion = fused.opinion
            u_dual = opinion.uncertainty
            stage = 2
            if u_dual > policy.t2 and len(order) > 2:
                for view_id in order[2:]:
                    opinion = combine_pair(opinion, view_opinion(view_id)).opinion
                u_tri = opinion.uncertainty
                stage = 3
    except TotalConflictError as exc:
        raise TotalConflictError(f"sample {sample.sample_id!r}: {exc}") from exc
    return PredictionRecord(
        sample_id=sample.sample_id,
        stage_used=stage,
        opinion=opinion,
        predicted_class=_classify(opinion),
        u_single=u_single,
        u_dual=u_dual,
        u_tri=u_tri,
    )


def tune_thresholds(u_single, u_dual, stage_preds, labels, grid_size: int = 100):
    """Exhaustive grid search for (t1, t2) maximizing routed correct count.

    stage_preds holds, per sample, the (single, dual, tri) predicted
    classes. The grid spans [min, max] of each uncertainty vector with
    grid_size points; ties keep the last maximizer in iteration order
    (t1 ascending outer, t2 ascending inner).
    """
    u1 = np.asarray(u_single, dtype=np.float64)
    u2 = np.asarray(u_dual, dtype=np.float64)
    preds = np.asarray(stage_preds)
    labels = np.asarray(labels)
    n = len(labels)
    if u1.shape != (n,) or u2.shape != (n,) or preds.shape != (n, 3) or n == 0:
        raise DimensionError("u_single, u_dual, stage_preds, labels must align")

    range_t1 = np.linspace(u1.min(), u1.max(), grid_size)
    range_t2 = np.linspace(u2.min(), u2.max(), grid_size)
    correct = preds == labels[:, None]  # (n, 3)

    counts = np.empty((grid_size, grid_size), dtype=np.int64)
    for i, t1 in enumerate(range_t1):
        stage1 = u1 <= t1
        base = int(np.count_nonzero(correct[stage1, 0]))
        rest = ~stage1
        dual = u2[rest, None] <= range_t2[None, :]  # (n_rest, grid)
        counts[i] = (
            base
            + (dual & correct[rest, 1][:, None]).sum(axis=0)
            + (~dual & correct[rest, 2][:, None]).sum(axis=0)
        )
    best = counts.max()
    flat = np.flatnonzero(counts.ravel() == best)[-1]
    i, j = np.unravel_index(flat, counts.shape)
    return float(range_t1[i]), float(range_t2[j])


def select_view_order(single_accuracy, pair_accuracy, override=None):
    """Lead with the best single view, partner with its best pairing.

    Accuracy maps: view id -> validation accuracy, and frozenset of two
    view ids -> validation accuracy. Ties break toward the
    lexicographically smaller view id. An explicit override wins.
    """
    views = sorted(single_accuracy)
    if override is not None:
        override = tuple(override)
        if sorted(override) != views:
            raise ConfigurationError("override must be a permutation of the views")
        return override
    if not views:
        raise ConfigurationError("no single-view accuracies supplied")
    lead = min(views, key=lambda v: (-single_accuracy[v], v))
    partners = [v for v in views if v != lead]
    if not partners:
        return (lead,)
    for v in partners:
        if frozenset((lead, v)) not in pair_accuracy:
            raise ConfigurationError(f"missing pair accuracy for ({lead}, {v})")
    partner = min(partners, key=lambda v: (-pair_accuracy[frozenset((lead, v))], v))
    rest = sorted(v for v in partners if v != partner)
    return (lead, partner, *rest)


@dataclass(frozen=True)
class StageShare:
    stage: int
    fraction: float
    views: tuple


def stage_distribution(records, view_order=None):
    """Fraction of samples decided at each stage, with the views consumed."""
    records = list(records)
    if not records:
        raise EmptyInputError("no prediction records")
    n = len(records)
    shares = []
    for stage in (1, 2, 3):
        count = sum(1 for r in records if r.stage_used == stage)
        views = tuple(view_order[:stage]) if view_order else ()
        if stage == 3 and view_order:
            views = tuple(view_order)
        shares.append(StageShare(stage=stage, fraction=count / n, views=views))
    return shares


def export_records(records, labels, path):
    """Write PredictionRecord rows as CSV, columns in the contract order."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["sample_id", "stage", "u_single", "u_dual", "u_tri",
             "predicted_class", "true_class"]
        )
        for record, label in zip(records, labels):
            writer.writerow([
                record.sample_id,
                record.stage_used,
                f"{record.u_single:.6g}",
                "" if record.u_dual is None else f"{record.u_dual:.6g}",
                "" if record.u_tri is None else f"{record.u_tri:.6g}",
                record.predicted_class,
                int(label),
            ])
    return path
