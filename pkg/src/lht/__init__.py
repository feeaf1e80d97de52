"""Hierarchical classification with learned label transition matrices.

A fine-level classifier plus input-conditioned column-stochastic transition
matrices propagate a prediction through a label taxonomy in either direction,
trained with per-level cross-entropy and a confusion penalty that keeps the
transitions from saturating.  Everything runs on a small reverse-mode
autodiff core, and the package's formal claims ship as executable checks.
"""

from .autodiff import Gradients, Tape, Tensor
from .data import (
    BENCHMARK_D,
    BENCHMARK_LEVEL_SIZES,
    BENCHMARK_N_PER_CLASS,
    BENCHMARK_SCALES,
    BENCHMARK_SIGMA,
    Dataset,
    Sample,
    benchmark_datasets,
    benchmark_hierarchy,
    drop_level,
    generate_synthetic,
    load_csv,
    relabel,
    save_csv,
)
from .errors import (
    CheckpointError,
    ChildlessParent,
    DimensionMismatch,
    HierarchyError,
    HierarchyMismatch,
    InconsistentChain,
    IndexOutOfRange,
    InvalidLevel,
    InvalidScales,
    LhtError,
    ModeMismatch,
    NegativeLambda,
    NonDecreasingSizes,
    NotConverged,
    NotOneHot,
    NotOnSimplex,
    NumericalError,
    OrphanClass,
    ParseError,
    ShapeMismatch,
    StepOutOfRange,
)
from .evaluation import (
    MetricsReport,
    build_report,
    evaluate,
    mistake_severity,
    per_class_delta,
    per_class_delta_csv,
    per_class_csv,
    predictions,
    report_json,
)
from .hierarchy import LabelHierarchy, balanced
from .losses import (
    DEFAULT_LAMBDA,
    LossBreakdown,
    batch_losses,
    confusion_loss,
    hierarchical_ce,
    total_loss,
)
from .model import (
    MODES,
    LhtModel,
    ModelConfig,
    PredictionChain,
    TransitionRecord,
    forward_c2f,
    forward_f2c,
    forward_vanilla,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    MomentumSGD,
    StepRecord,
    TrainConfig,
    TrainResult,
    cosine_lr,
    sgd_step,
    train,
)
from .verify import (
    CheckResult,
    check_gradients,
    check_lambda_saturation,
    check_naive_collapse,
    check_nll_ce_identity,
    run_all,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # hierarchy
    "LabelHierarchy",
    "balanced",
    # autodiff
    "Tensor",
    "Tape",
    "Gradients",
    # model
    "MODES",
    "LhtModel",
    "ModelConfig",
    "PredictionChain",
    "TransitionRecord",
    "forward_f2c",
    "forward_c2f",
    "forward_vanilla",
    "save_checkpoint",
    "load_checkpoint",
    # losses
    "DEFAULT_LAMBDA",
    "LossBreakdown",
    "hierarchical_ce",
    "confusion_loss",
    "total_loss",
    "batch_losses",
    # training
    "TrainConfig",
    "TrainResult",
    "StepRecord",
    "MomentumSGD",
    "cosine_lr",
    "sgd_step",
    "train",
    # data
    "BENCHMARK_LEVEL_SIZES",
    "BENCHMARK_D",
    "BENCHMARK_N_PER_CLASS",
    "BENCHMARK_SCALES",
    "BENCHMARK_SIGMA",
    "Sample",
    "Dataset",
    "generate_synthetic",
    "save_csv",
    "load_csv",
    "drop_level",
    "relabel",
    "benchmark_hierarchy",
    "benchmark_datasets",
    # evaluation
    "MetricsReport",
    "predictions",
    "evaluate",
    "build_report",
    "mistake_severity",
    "per_class_delta",
    "report_json",
    "per_class_csv",
    "per_class_delta_csv",
    # verification
    "CheckResult",
    "check_gradients",
    "check_naive_collapse",
    "check_lambda_saturation",
    "check_nll_ce_identity",
    "run_all",
    # errors
    "LhtError",
    "HierarchyError",
    "OrphanClass",
    "ChildlessParent",
    "NonDecreasingSizes",
    "IndexOutOfRange",
    "InvalidLevel",
    "ShapeMismatch",
    "NumericalError",
    "NotOnSimplex",
    "NotOneHot",
    "ModeMismatch",
    "CheckpointError",
    "NegativeLambda",
    "StepOutOfRange",
    "InvalidScales",
    "ParseError",
    "InconsistentChain",
    "DimensionMismatch",
    "HierarchyMismatch",
    "NotConverged",
]
