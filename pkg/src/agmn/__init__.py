"""Exact tree-structured belief propagation for keypoint score maps.

The engine consumes per-keypoint unary score maps and per-directed-edge
displacement kernels, runs sum-product message passing as 2D convolutions,
and emits marginal score maps, argmax keypoint predictions, and PCK / loss
metrics. A synthetic data generator and a brute-force checking oracle make
the whole pipeline testable end to end on one desktop core.
"""

from .errors import (
    BudgetError,
    ContractError,
    EngineError,
    FormatError,
    GraphError,
    InvalidKernelError,
    InvalidPotentialError,
    NonFiniteError,
    ScheduleError,
    ShapeMismatchError,
)
from .graph import Schedule, TreeGraph, build_schedule, default_hand_tree, validate
from .grids import (
    Grid2D,
    GridIndex,
    TensorStack,
    argmax_cell,
    conv2d_same,
    hadamard,
    normalize_sum,
    read_tensor,
    reflect180,
    write_tensor,
)
from .inference import BeliefResult, InferOptions, infer, message_update, run_bp
from .metrics import DEFAULT_SIGMAS, LossWeights, PckCurve, pck, total_loss
from .potentials import (
    KeypointSet,
    PotentialSet,
    clamp_nonneg,
    gaussian_map,
    make_kernel_targets,
    make_unary_targets,
    normalize_targets,
)
from .synth import CorruptionConfig, SyntheticSample, generate_dataset, sample_pose

__version__ = "0.1.0"

__all__ = [
    "BeliefResult",
    "BudgetError",
    "ContractError",
    "CorruptionConfig",
    "DEFAULT_SIGMAS",
    "EngineError",
    "FormatError",
    "GraphError",
    "Grid2D",
    "GridIndex",
    "InferOptions",
    "InvalidKernelError",
    "InvalidPotentialError",
    "KeypointSet",
    "LossWeights",
    "NonFiniteError",
    "PckCurve",
    "PotentialSet",
    "Schedule",
    "ScheduleError",
    "ShapeMismatchError",
    "SyntheticSample",
    "TensorStack",
    "TreeGraph",
    "argmax_cell",
    "build_schedule",
    "clamp_nonneg",
    "conv2d_same",
    "default_hand_tree",
    "gaussian_map",
    "generate_dataset",
    "hadamard",
    "infer",
    "make_kernel_targets",
    "make_unary_targets",
    "message_update",
    "normalize_sum",
    "normalize_targets",
    "pck",
    "read_tensor",
    "reflect180",
    "run_bp",
    "sample_pose",
    "total_loss",
    "validate",
    "write_tensor",
]
