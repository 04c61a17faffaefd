"""Counterfactually invariant latent geometry.

Generate counterfactually paired warped-roll data from a known structural
model, train an autoencoder whose decoder geometry (pullback metric and
Hessian stack) matches across the pairs, and compare against a plain
baseline on accuracy, reconstruction and geometric invariance.
"""

from .derivatives import (
    DiffMode,
    Elu,
    LayerStack,
    Softplus,
    input_hessian,
    input_jacobian,
)
from .engine import grad_scalar, matmul
from .errors import (
    DomainError,
    FormatError,
    NumericError,
    ShapeError,
    TrainingDiverged,
    UsageError,
)
from .evaluation import MetricReport, dump_latents, evaluate, run_experiment
from .geometry import (
    GeometryBundle,
    curvature_discrepancy,
    geometry_at,
    metric_discrepancy,
    pullback_metric,
)
from .losses import (
    Batch,
    LossBreakdown,
    LossWeights,
    align_loss,
    geo_loss,
    task_loss,
    total_loss,
)
from .net import (
    MlpSpec,
    ModelBundle,
    ParamStore,
    decode,
    default_bundle,
    encode,
    forward,
    init,
    load_checkpoint,
    param_count,
    predict,
    save_checkpoint,
)
from .scm import (
    DatasetSplit,
    SampleRecord,
    export_dataset,
    import_dataset,
    sample_dataset,
    structural_map,
)
from .training import TrainConfig, Trainer, TrainState, train, train_step

__version__ = "0.1.0"
