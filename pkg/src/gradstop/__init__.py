"""Label-free early stopping for deep unsupervised outlier detection.

The library trains shallow detectors (autoencoder or hypersphere
scorer) with full-batch gradient descent, watches per-sample gradient
dynamics on a fixed evaluation batch, and selects the checkpoint at
which those dynamics last looked beneficial for the detection task.
"""

from .core import NumericError, angle_between, make_rng, norm, sum_vectors
from .data import (
    CsvParseError,
    DataError,
    Dataset,
    EvalBatch,
    LabelError,
    SyntheticConfig,
    TrainView,
    downsample,
    gen_synthetic,
    load_csv,
    sample_eval_batch,
    standardize,
)
from .dynamics import (
    EpochRecord,
    GradientSet,
    ZeroSumError,
    auc,
    class_loss_means,
    cohesion,
    divergence,
    grad_sample,
)
from .model import (
    Checkpoint,
    Hyperparameters,
    ModelParams,
    PRESETS,
    batch_loss_and_gradient,
    gd_step,
    init_model,
    load_checkpoint,
    per_sample_gradient,
    per_sample_gradients,
    per_sample_loss,
    save_checkpoint,
    score_dataset,
)
from .stopper import (
    RunResult,
    StopDecision,
    StopperState,
    StopReason,
    downtrend_ratio,
    finalize,
    observe,
    run_training,
    run_with_gradstop,
)
from .theory import (
    DynamicsProbe,
    StepSizeError,
    TheoremReport,
    cohesion_bridge,
    probe_dynamics,
    threshold_mean_gap,
    threshold_sum_gap,
    verify_theorem,
)

__version__ = "0.1.0"

__all__ = [
    "NumericError", "angle_between", "make_rng", "norm", "sum_vectors",
    "CsvParseError", "DataError", "Dataset", "EvalBatch", "LabelError",
    "SyntheticConfig", "TrainView", "downsample", "gen_synthetic",
    "load_csv", "sample_eval_batch", "standardize",
    "EpochRecord", "GradientSet", "ZeroSumError", "auc", "class_loss_means",
    "cohesion", "divergence", "grad_sample",
    "Checkpoint", "Hyperparameters", "ModelParams", "PRESETS",
    "batch_loss_and_gradient", "gd_step", "init_model", "load_checkpoint",
    "per_sample_gradient", "per_sample_gradients", "per_sample_loss",
    "save_checkpoint", "score_dataset",
    "RunResult", "StopDecision", "StopperState", "StopReason",
    "downtrend_ratio", "finalize", "observe", "run_training",
    "run_with_gradstop",
    "DynamicsProbe", "StepSizeError", "TheoremReport", "cohesion_bridge",
    "probe_dynamics", "threshold_mean_gap", "threshold_sum_gap",
    "verify_theorem",
]
