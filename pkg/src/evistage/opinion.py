"""Evidence vectors, Dirichlet parameters, and subjective opinions.

The three representations are monotone images of each other:

    evidence e_k >= 0
    params   d_k = e_k + 1,      strength S = sum(d_k)
    opinion  B_k = e_k / S,      uncertainty U = K / S

with the mass constraint U + sum(B_k) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOpinionError, DimensionError, EvidenceError

#: Absolute tolerance for the mass-sum constraint.
MASS_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DirichletEvidence:
    """Non-negative evidence with derived Dirichlet parameters and strength."""

    evidence: np.ndarray
    params: np.ndarray
    strength: float
    class_count: int

    def __post_init__(self):
        if self.class_count < 2:
            raise EvidenceError("need at least 2 classes")
        if np.any(self.evidence < 0.0) or not np.all(np.isfinite(self.evidence)):
            raise EvidenceError("evidence must be non-negative and finite")


@dataclass(frozen=True)
class SubjectiveOpinion:
    """Per-class belief masses plus an uncertainty mass summing to 1."""

    beliefs: np.ndarray
    uncertainty: float
    class_count: int

    def __post_init__(self):
        if self.class_count < 2 or len(self.beliefs) != self.class_count:
            raise DimensionError("belief vector length must equal class_count >= 2")
        if self.uncertainty <= 0.0:
            raise DegenerateOpinionError("uncertainty mass must be strictly positive")
        if np.any(self.beliefs < 0.0) or np.any(self.beliefs >= 1.0):
            raise EvidenceError("belief masses must lie in [0, 1)")
        total = float(np.sum(self.beliefs)) + self.uncertainty
        if abs(total - 1.0) > MASS_TOL:
            raise EvidenceError(f"masses sum to {total!r}, expected 1")


def dirichlet_from_evidence(evidence) -> DirichletEvidence:
    """Build Dirichlet parameters d = e + 1 from an evidence vector."""
    e = np.asarray(evidence, dtype=np.float64)
    if e.ndim != 1 or e.size < 2:
        raise EvidenceError("evidence must be a 1-d vector of length >= 2")
    if np.any(e < 0.0) or not np.all(np.isfinite(e)):
        raise EvidenceError("evidence must be non-negative and finite")
    params = e + 1.0
    return DirichletEvidence(
        evidence=_frozen(e),
        params=_frozen(params),
        strength=float(params.sum()),
        class_count=e.size,
    )


def opinion_from_dirichlet(d: DirichletEvidence) -> SubjectiveOpinion:
    """Belief masses B_k = (d_k - 1)/S and uncertainty U = K/S."""
    beliefs = (d.params - 1.0) / d.strength
    return SubjectiveOpinion(
        beliefs=_frozen(beliefs),
        uncertainty=d.class_count / d.strength,
        class_count=d.class_count,
    )


def dirichlet_from_opinion(o: SubjectiveOpinion) -> DirichletEvidence:
    """Invert the opinion map: S = K/U, e_k = B_k * S."""
    if o.uncertainty <= 0.0:
        raise DegenerateOpinionError("cannot invert an opinion with zero uncertainty")
    strength = o.class_count / o.uncertainty
    return dirichlet_from_evidence(o.beliefs * strength)


def expected_probabilities(d: DirichletEvidence) -> np.ndarray:
    """Dirichlet mean p_k = d_k / S; the point prediction."""
    return d.params / d.strength
