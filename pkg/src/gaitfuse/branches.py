"""The three complementary feature branches built from a gait tensor.

* proportion: joint positions relative to the skeleton center, stacked with
  the raw keypoints.
* velocity: 6-frame short-period displacements stacked with adjacent-frame
  instantaneous displacements, both truncated to the common valid range.
* skeletal motion: bone vectors toward each joint's adjacent joint plus the
  bone's elevation angle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .skeleton import GaitTensor, SkeletonTopology

# Lag (in frames) of the short-period displacement feature.
SHORT_PERIOD_LAG = 6

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class ProportionFeatures:
    """(2C) x T x I: center-relative positions in channels [0, C), raw keypoints after."""

    data: np.ndarray


@dataclass(frozen=True)
class VelocityFeatures:
    """(2C) x (T-6) x I: short-period displacements then instantaneous ones."""

    data: np.ndarray


@dataclass(frozen=True)
class SkeletalMotionFeatures:
    """(C+1) x T x I: bone vectors in channels [0, C), elevation angle in channel C."""

    data: np.ndarray


@dataclass(frozen=True)
class BranchBundle:
    proportion: ProportionFeatures
    velocity: VelocityFeatures
    skeletal: SkeletalMotionFeatures


def skeleton_center(X: GaitTensor, topo: SkeletonTopology) -> np.ndarray:
    """Per-frame midpoint of the thorax-pelvis segment, shape C x T."""
    thorax, pelvis = topo.center_pair
    return (X.data[:, :, thorax] + X.data[:, :, pelvis]) / 2.0


def proportion_branch(X: GaitTensor, topo: SkeletonTopology) -> ProportionFeatures:
    """Positions relative to the skeleton center, concatenated with the raw tensor."""
    center = skeleton_center(X, topo)
    relative = X.data - center[:, :, None]
    return ProportionFeatures(np.concatenate([relative, X.data], axis=0))


def velocity_branch(X: GaitTensor) -> VelocityFeatures:
    """Short-period and instantaneous frame differences over the common valid range.

    For t in [0, T-6): f_t = X[:, t+6, :] - X[:, t, :] and
    e_t = X[:, t+1, :] - X[:, t, :]; both stacked along the channel axis.
    """
    T = X.frames
    if T < SHORT_PERIOD_LAG + 2:
        raise DataError(
            f"sequence too short for velocity branch: {T} frames, "
            f"need at least {SHORT_PERIOD_LAG + 2}"
        )
    valid = T - SHORT_PERIOD_LAG
    short = X.data[:, SHORT_PERIOD_LAG:, :] - X.data[:, :valid, :]
    instant = X.data[:, 1:valid + 1, :] - X.data[:, :valid, :]
    return VelocityFeatures(np.concatenate([short, instant], axis=0))


def skeletal_motion_branch(X: GaitTensor, topo: SkeletonTopology,
                           epsilon: float = DEFAULT_EPSILON,
                           signed_angles: bool = False) -> SkeletalMotionFeatures:
    """Bone vectors toward each joint's adjacent joint plus bone elevation angles.

    The angle is arccos(l_y / sqrt(l_x^2 + l_y^2 + epsilon^2)) with the
    argument clamped to [-1, 1]; the root joint gets a zero bone vector and a
    zero angle by convention.  ``signed_angles`` switches to the
    atan2(l_x, l_y) variant that keeps the left/right lean sign (off by
    default; the unsigned form is the reference behavior).
    """
    if epsilon <= 0:
        raise DataError(f"epsilon must be positive, got {epsilon}")
    if X.channels != 2:
        raise DataError(f"skeletal motion branch expects 2 coordinate channels, got {X.channels}")
    adj = np.array(topo.parent, dtype=np.int64)
    bones = X.data - X.data[:, :, adj]
    root = topo.root
    bones[:, :, root] = 0.0
    lx, ly = bones[0], bones[1]
    if signed_angles:
        angles = np.arctan2(lx, ly)
    else:
        norm = np.sqrt(lx * lx + ly * ly + epsilon * epsilon)
        angles = np.arccos(np.clip(ly / norm, -1.0, 1.0))
    angles[:, root] = 0.0
    return SkeletalMotionFeatures(np.concatenate([bones, angles[None, :, :]], axis=0))


def build_bundle(X: GaitTensor, topo: SkeletonTopology,
                 epsilon: float = DEFAULT_EPSILON) -> BranchBundle:
    """All three branch features computed from the same gait tensor window."""
    return BranchBundle(
        proportion=proportion_branch(X, topo),
        velocity=velocity_branch(X),
        skeletal=skeletal_motion_branch(X, topo, epsilon=epsilon),
    )
