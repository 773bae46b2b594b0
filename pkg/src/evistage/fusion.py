"""Reduced Dempster-Shafer combination of subjective opinions.

The mass functions carry only singleton classes plus the universe
(uncertainty), so the rule stays closed under combination and is
commutative and associative up to floating-point error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyInputError, TotalConflictError
from .opinion import SubjectiveOpinion, _frozen

#: Below this value of 1 - C the combination is treated as total conflict.
EPS_CONFLICT = 1e-12


@dataclass(frozen=True)
class FusionResult:
    """Fused opinion, the conflict of the final pairwise step, input count."""

    opinion: SubjectiveOpinion
    conflict: float
    inputs: int


def _check_same_k(o1: SubjectiveOpinion, o2: SubjectiveOpinion):
    if o1.class_count != o2.class_count:
        raise DimensionError(
            f"class counts differ: {o1.class_count} vs {o2.class_count}"
        )


def conflict(o1: SubjectiveOpinion, o2: SubjectiveOpinion) -> float:
    """Conflict coefficient C = sum_{i != j} B_i^1 B_j^2."""
    _check_same_k(o1, o2)
    b1, b2 = o1.beliefs, o2.beliefs
    return float(b1.sum() * b2.sum() - np.dot(b1, b2))


def combine_pair(o1: SubjectiveOpinion, o2: SubjectiveOpinion) -> FusionResult:
    """Combine two opinions, discarding conflicting mass via 1/(1 - C)."""
    c = conflict(o1, o2)
    norm = 1.0 - c
    if norm < EPS_CONFLICT:
        raise TotalConflictError(f"conflict {c!r} is numerically total")
    b1, b2 = o1.beliefs, o2.beliefs
    u1, u2 = o1.uncertainty, o2.uncertainty
    beliefs = (b1 * b2 + b1 * u2 + b2 * u1) / norm
    fused = SubjectiveOpinion(
        beliefs=_frozen(beliefs),
        uncertainty=u1 * u2 / norm,
        class_count=o1.class_count,
    )
    return FusionResult(opinion=fused, conflict=c, inputs=2)


def combine_all(opinions) -> FusionResult:
    """Left-fold combine_pair over an ordered list of opinions."""
    opinions = list(opinions)
    if not opinions:
        raise EmptyInputError("combine_all needs at least one opinion")
    acc = opinions[0]
    last_conflict = 0.0
    for other in opinions[1:]:
        step = combine_pair(acc, other)
        acc = step.opinion
        last_conflict = step.conflict
    return FusionResult(opinion=acc, conflict=last_conflict, inputs=len(opinions))
