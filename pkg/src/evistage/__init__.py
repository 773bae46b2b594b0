"""Uncertainty-aware staged multi-view evidential classification."""

from .opinion import (
    DirichletEvidence,
    SubjectiveOpinion,
    dirichlet_from_evidence,
    dirichlet_from_opinion,
    expected_probabilities,
    opinion_from_dirichlet,
)
from .fusion import FusionResult, combine_all, combine_pair, conflict
from .losses import (
    adjust_dirichlet,
    anneal_coefficient,
    expected_ce_loss,
    kl_uniform,
    overall_loss,
    sample_loss,
)
from .model import (
    EvidentialClassifier,
    GradientCheckReport,
    TrainConfig,
    TrainResult,
    forward,
    gradient_check,
    train,
)
from .decision import (
    PredictionRecord,
    StagedDecisionPolicy,
    select_view_order,
    stage_distribution,
    staged_predict,
    tune_thresholds,
)
from .metrics import MetricReport, accuracy, compute_report, f1_scores, roc_auc
from .data import (
    LabeledSample,
    MultiViewDataset,
    SyntheticConfig,
    generate_synthetic,
    load_dataset,
    normalize,
    split_dataset,
)

__version__ = "0.1.0"
