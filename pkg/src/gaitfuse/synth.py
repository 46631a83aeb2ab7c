"""Parametric synthetic walker: ground-truth-period, identity-separable gait.

A 2D side-projected kinematic tree with sinusoidal joint drives.  Every
oscillator is built from sin(2*pi*k*t/P + phi) terms with phi in {0, pi}, so
the full lower-limb pose returns to the same neutral configuration exactly
every half period; this is what makes the gait-cycle detector's trough
structure line up with the true period.  Oscillator arguments are computed
from t mod P, so zero-noise renders are bit-exactly periodic.

Subjects differ in limb lengths, cadence, amplitudes and speed; conditions
add the qualitative failure modes of carrying a bag (one arm frozen plus
doubled shoulder-region jitter) and wearing a coat (tripled jitter plus 10%
limb-length inflation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .skeleton import (
    HEAD_TOP,
    L_ANKLE,
    L_ELBOW,
    L_HIP,
    L_KNEE,
    L_SHOULDER,
    L_WRIST,
    NUM_JOINTS,
    PELVIS,
    R_ANKLE,
    R_ELBOW,
    R_HIP,
    R_KNEE,
    R_SHOULDER,
    R_WRIST,
    THORAX,
    UPPER_NECK,
    PoseSequence,
)

BONE_NAMES = ("torso", "upper_arm", "lower_arm", "thigh", "shin", "neck", "head")

# Documented sampling ranges for sample_subject (torso units / frames / radians).
PERIOD_RANGE = (16, 32)
THIGH_RANGE = (0.40, 0.55)
SHIN_RANGE = (0.40, 0.55)
UPPER_ARM_RANGE = (0.28, 0.38)
LOWER_ARM_RANGE = (0.24, 0.34)
NECK_RANGE = (0.16, 0.24)
HEAD_RANGE = (0.14, 0.22)
TORSO_RANGE = (0.95, 1.05)
STRIDE_AMPLITUDE_RANGE = (0.55, 0.80)
ARM_AMPLITUDE_RANGE = (0.20, 0.40)
BOUNCE_RANGE = (0.01, 0.03)
SPEED_RANGE = (0.010, 0.030)

# The leg drive is a pure sinusoid: odd in time around every neutral
# crossing, so all similarity-waveform troughs share one symmetric bowl
# shape.  Harmonics would either alternate the bowl asymmetry between
# troughs (even orders) or revisit mid-swing poses (strong odd orders),
# both of which bias the trough-gap statistics.

# Torso anchor joints (pelvis, thorax, hips) are detected more reliably than
# the extremities; damping their jitter also keeps the per-frame
# center-and-scale normalization stable.
ANCHOR_NOISE_FACTOR = 0.5

# Constant posture offsets (preserved at every half-period, so they do not
# disturb the neutral-pose recurrence).  The hip lateral offset is close to
# one similarity-encoding bin, so the two legs occupy distinct bins at the
# neutral pose for essentially every subject; intermediate offsets leave the
# legs' bins dependent on per-subject quantization-edge luck, which skews the
# half-period trough family relative to the full-period one.
KNEE_BASE_BEND = 0.22
ELBOW_BEND = 0.35
HIP_OFFSET = (0.10, 0.04)
SHOULDER_OFFSET = (0.08, 0.05)

# Frontal views keep at least this fraction of the lateral swing amplitude.
VIEW_AMPLITUDE_FLOOR = 0.15

# Condition effects: noise multiplier, and for CL the limb inflation factor.
BG_SHOULDER_NOISE_MULT = 2.0
CL_NOISE_MULT = 3.0
CL_LIMB_INFLATION = 1.10
SHOULDER_REGION = (R_SHOULDER, L_SHOULDER, R_ELBOW, L_ELBOW)

# Walker-space to image-space mapping: torso length 1 becomes 0.25 image units.
_IMAGE_SCALE = 0.25
_IMAGE_OFFSET = (0.5, 1.0)


@dataclass(frozen=True)
class WalkerParams:
    """Per-subject gait parameters; limb lengths are in torso units."""

    limb_lengths: dict[str, float]
    period_frames: int
    phase: float
    stride_amplitude: float
    arm_amplitude: float
    bounce_amplitude: float
    speed: float

    def __post_init__(self):
        missing = set(BONE_NAMES) - set(self.limb_lengths)
        if missing:
            raise ConfigError(f"limb_lengths missing bones: {sorted(missing)}")
        if any(v <= 0 for v in self.limb_lengths.values()):
            raise ConfigError("limb lengths must be positive")
        if self.period_frames < 8:
            raise ConfigError(f"period must be at least 8 frames, got {self.period_frames}")
        if not 0.0 <= self.phase < 2.0 * math.pi:
            raise ConfigError(f"phase must lie in [0, 2*pi), got {self.phase}")


@dataclass(frozen=True)
class SynthConfig:
    subjects: int = 12
    nm_sequences: int = 6
    bg_sequences: int = 2
    cl_sequences: int = 2
    frames: int = 60
    views: tuple[int, ...] = (54, 90, 126)
    noise_sigma: float = 0.015
    seed: int = 0

    def __post_init__(self):
        counts = (self.subjects, self.nm_sequences, self.bg_sequences,
                  self.cl_sequences, self.frames)
        if any(c < 1 for c in counts):
            raise ConfigError("all synth counts must be positive")
        if not self.views:
            raise ConfigError("at least one view angle is required")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be non-negative, got {self.noise_sigma}")


def _rng_for(*key) -> np.random.Generator:
    # Documented seed mixing: every (seed, subject, condition, view, sequence)
    # combination gets an independent, reproducible stream.
    return np.random.default_rng(np.random.SeedSequence(key))


def sample_subject(seed: int, subject_index: int) -> WalkerParams:
    """Draw one subject's walker parameters from the documented uniform ranges.

    The gait phase is drawn from {0, pi}: it selects which leg leads at frame
    0 while keeping frame 0 on the neutral crossing pose that the gait-cycle
    detector's trough spacing relies on.
    """
    rng = _rng_for(seed, subject_index, 0xC0FFEE)
    lengths = {
        "torso": float(rng.uniform(*TORSO_RANGE)),
        "upper_arm": float(rng.uniform(*UPPER_ARM_RANGE)),
        "lower_arm": float(rng.uniform(*LOWER_ARM_RANGE)),
        "thigh": float(rng.uniform(*THIGH_RANGE)),
        "shin": float(rng.uniform(*SHIN_RANGE)),
        "neck": float(rng.uniform(*NECK_RANGE)),
        "head": float(rng.uniform(*HEAD_RANGE)),
    }
    return WalkerParams(
        limb_lengths=lengths,
        period_frames=int(rng.integers(PERIOD_RANGE[0], PERIOD_RANGE[1] + 1)),
        phase=float(rng.choice([0.0, math.pi])),
        stride_amplitude=float(rng.uniform(*STRIDE_AMPLITUDE_RANGE)),
        arm_amplitude=float(rng.uniform(*ARM_AMPLITUDE_RANGE)),
        bounce_amplitude=float(rng.uniform(*BOUNCE_RANGE)),
        speed=float(rng.uniform(*SPEED_RANGE)),
    )


def _view_scale(view_deg: int) -> float:
    return max(VIEW_AMPLITUDE_FLOOR, abs(math.sin(math.radians(view_deg))))


def _skeleton_at(t: int, params: WalkerParams, lengths: dict[str, float],
                 amp_scale: float, frozen_right_arm: bool) -> np.ndarray:
    """Walker-space joint positions (y up, torso units) at integer frame t."""
    period = params.period_frames
    frac = (t % period) / period
    # One leg waveform drives the whole gait; the other side is its negation
    # (equivalent to a half-period shift).
    drive = math.sin(2.0 * math.pi * frac + params.phase)
    bounce = params.bounce_amplitude * math.sin(4.0 * math.pi * frac)

    stride = params.stride_amplitude * amp_scale
    arm = params.arm_amplitude * amp_scale

    # Swing-phase knee flexion makes the shin swing wider than the thigh,
    # which keeps the ankles (the strongest periodicity cue) moving fast.
    thigh_r = stride * drive
    thigh_l = -stride * drive
    bend_r = KNEE_BASE_BEND - 0.8 * stride * drive
    bend_l = KNEE_BASE_BEND + 0.8 * stride * drive
    arm_r = -arm * drive
    arm_l = arm * drive
    if frozen_right_arm:
        arm_r = 0.15

    joints = np.zeros((NUM_JOINTS, 2))
    pelvis = np.array([params.speed * t, bounce])
    joints[PELVIS] = pelvis
    joints[THORAX] = pelvis + (0.0, lengths["torso"])
    joints[UPPER_NECK] = joints[THORAX] + (0.0, lengths["neck"])
    joints[HEAD_TOP] = joints[UPPER_NECK] + (0.0, lengths["head"])

    def limb(origin, angle, length):
        # angle measured from straight down
        return origin + length * np.array([math.sin(angle), -math.cos(angle)])

    joints[R_HIP] = pelvis + (HIP_OFFSET[0], -HIP_OFFSET[1])
    joints[L_HIP] = pelvis + (-HIP_OFFSET[0], -HIP_OFFSET[1])
    joints[R_KNEE] = limb(joints[R_HIP], thigh_r, lengths["thigh"])
    joints[L_KNEE] = limb(joints[L_HIP], thigh_l, lengths["thigh"])
    joints[R_ANKLE] = limb(joints[R_KNEE], thigh_r - bend_r, lengths["shin"])
    joints[L_ANKLE] = limb(joints[L_KNEE], thigh_l - bend_l, lengths["shin"])

    joints[R_SHOULDER] = joints[THORAX] + (SHOULDER_OFFSET[0], -SHOULDER_OFFSET[1])
    joints[L_SHOULDER] = joints[THORAX] + (-SHOULDER_OFFSET[0], -SHOULDER_OFFSET[1])
    joints[R_ELBOW] = limb(joints[R_SHOULDER], arm_r, lengths["upper_arm"])
    joints[L_ELBOW] = limb(joints[L_SHOULDER], arm_l, lengths["upper_arm"])
    forearm_r = arm_r + (0.5 if frozen_right_arm else ELBOW_BEND)
    joints[R_WRIST] = limb(joints[R_ELBOW], forearm_r, lengths["lower_arm"])
    joints[L_WRIST] = limb(joints[L_ELBOW], arm_l + ELBOW_BEND, lengths["lower_arm"])
    return joints


def render_sequence(params: WalkerParams, subject_id: str, sequence_id: str,
                    frames: int, view_deg: int, condition: str,
                    noise_sigma: float, rng: np.random.Generator) -> PoseSequence:
    """Render one walk as a pose sequence in image-like coordinates.

    The view angle scales the lateral swing amplitudes by |sin(view)| with a
    floor of 0.15, emulating the loss of gait discriminability at frontal or
    rear views without disturbing bone lengths.  Conditions:

    * NM: clean kinematics plus noise_sigma jitter (in torso units).
    * BG: right arm frozen near the torso plus doubled jitter around the
      shoulders and elbows.
    * CL: tripled jitter on every joint and 10% limb-length inflation.
    """
    if frames < params.period_frames:
        raise DataError(
            f"frames ({frames}) must cover at least one period "
            f"({params.period_frames})"
        )
    lengths = dict(params.limb_lengths)
    if condition == "CL":
        for bone in ("thigh", "shin", "upper_arm", "lower_arm"):
            lengths[bone] *= CL_LIMB_INFLATION
    amp_scale = _view_scale(view_deg)

    sigma = np.full(NUM_JOINTS, noise_sigma)
    sigma[[PELVIS, THORAX, R_HIP, L_HIP]] *= ANCHOR_NOISE_FACTOR
    if condition == "BG":
        sigma[list(SHOULDER_REGION)] *= BG_SHOULDER_NOISE_MULT
    elif condition == "CL":
        sigma *= CL_NOISE_MULT

    data = np.empty((frames, NUM_JOINTS, 3))
    for t in range(frames):
        joints = _skeleton_at(t, params, lengths, amp_scale, condition == "BG")
        if noise_sigma > 0:
            joints = joints + rng.normal(0.0, 1.0, size=joints.shape) * sigma[:, None]
        data[t, :, 0] = _IMAGE_OFFSET[0] + _IMAGE_SCALE * joints[:, 0]
        data[t, :, 1] = _IMAGE_OFFSET[1] - _IMAGE_SCALE * joints[:, 1]
        data[t, :, 2] = rng.uniform(0.8, 1.0, size=NUM_JOINTS)
    return PoseSequence.from_array(subject_id, sequence_id, condition, view_deg, data)


def generate_dataset(config: SynthConfig):
    """Generate the full subjects x conditions x views grid plus a manifest.

    Returns (sequences, manifest) where the manifest holds one row per
    sequence recording its identifiers and the subject's walker parameters
    for ground-truth audits.  Deterministic in ``config.seed``.
    """
    condition_plan = (
        ("NM", config.nm_sequences),
        ("BG", config.bg_sequences),
        ("CL", config.cl_sequences),
    )
    sequences = []
    manifest = []
    for subject_index in range(config.subjects):
        params = sample_subject(config.seed, subject_index)
        subject_id = f"S{subject_index:03d}"
        for condition, count in condition_plan:
            for k in range(1, count + 1):
                for view in config.views:
                    sequence_id = f"{condition}-{k:02d}-v{view:03d}"
                    cond_code = ("NM", "BG", "CL").index(condition)
                    rng = _rng_for(config.seed, subject_index, cond_code, k, view)
                    seq = render_sequence(
                        params, subject_id, sequence_id, config.frames, view,
                        condition, config.noise_sigma, rng,
                    )
                    sequences.append(seq)
                    row = {
                        "subject_id": subject_id,
                        "sequence_id": sequence_id,
                        "condition": condition,
                        "view_deg": view,
                        "period_frames": params.period_frames,
                        "phase": params.phase,
                        "stride_amplitude": params.stride_amplitude,
                        "arm_amplitude": params.arm_amplitude,
                        "bounce_amplitude": params.bounce_amplitude,
                        "speed": params.speed,
                    }
                    for bone in BONE_NAMES:
                        row[f"len_{bone}"] = params.limb_lengths[bone]
                    manifest.append(row)
    return sequences, manifest


def manifest_to_tsv(manifest: list[dict]) -> str:
    """Tab-separated manifest text, one line per sequence."""
    if not manifest:
        return ""
    columns = list(manifest[0].keys())
    lines = ["\t".join(columns)]
    for row in manifest:
        lines.append("\t".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                              for c in columns))
    return "\n".join(lines) + "\n"
