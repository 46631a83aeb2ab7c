"""Skeleton-based gait recognition with multi-branch feature fusion.

The pipeline ingests 16-joint 2D keypoint sequences, estimates gait cycles
from lower-limb similarity, expands windows into body-proportion, velocity
and skeletal-motion feature branches, refines each branch with a bottleneck
residual extractor, and fuses them through channel-attention excitation into
a global identity embedding.  ``GaitRecognizer`` wraps the whole thing in a
scikit-learn style estimator.
"""

__version__ = "0.1.0"

from .branches import (
    BranchBundle,
    ProportionFeatures,
    SkeletalMotionFeatures,
    VelocityFeatures,
    build_bundle,
    proportion_branch,
    skeletal_motion_branch,
    skeleton_center,
    velocity_branch,
)
from .cycles import (
    GaitCycleEstimate,
    SimilarityWaveform,
    detect_cycle,
    encode_lower_limbs,
    similarity_waveform,
    temporal_stride,
)
from .errors import (
    ConfigError,
    DataError,
    FormatError,
    GaitfuseError,
    NoPeriodicityError,
    NumericalError,
    ParseError,
)
from .estimator import GaitRecognizer
from .skeleton import (
    MPII_TOPOLOGY,
    GaitTensor,
    Joint,
    KeypointFrame,
    PoseSequence,
    SkeletonTopology,
    load_sequences,
    normalize_sequence,
    save_sequences,
    to_gait_tensor,
)
from .synth import SynthConfig, WalkerParams, generate_dataset, render_sequence, sample_subject
from .training import (
    Checkpoint,
    EvalReport,
    TrainConfig,
    ablation_suite,
    load_checkpoint,
    pckh,
    rank1_eval,
    save_checkpoint,
    split_gallery_probe,
    train,
)

__all__ = [
    "BranchBundle",
    "Checkpoint",
    "ConfigError",
    "DataError",
    "EvalReport",
    "FormatError",
    "GaitCycleEstimate",
    "GaitRecognizer",
    "GaitTensor",
    "GaitfuseError",
    "Joint",
    "KeypointFrame",
    "MPII_TOPOLOGY",
    "NoPeriodicityError",
    "NumericalError",
    "ParseError",
    "PoseSequence",
    "ProportionFeatures",
    "SimilarityWaveform",
    "SkeletalMotionFeatures",
    "SkeletonTopology",
    "SynthConfig",
    "TrainConfig",
    "VelocityFeatures",
    "WalkerParams",
    "ablation_suite",
    "build_bundle",
    "detect_cycle",
    "encode_lower_limbs",
    "generate_dataset",
    "load_checkpoint",
    "load_sequences",
    "normalize_sequence",
    "pckh",
    "proportion_branch",
    "rank1_eval",
    "render_sequence",
    "sample_subject",
    "save_checkpoint",
    "save_sequences",
    "similarity_waveform",
    "skeletal_motion_branch",
    "skeleton_center",
    "split_gallery_probe",
    "temporal_stride",
    "to_gait_tensor",
    "train",
    "velocity_branch",
]
