"""Skeleton data model: joints, frames, sequences, topology, tensor conversion.

Keypoints follow the 16-joint MPII indexing convention (see ``JOINT_NAMES``).
Sequences are ingested from a line-oriented JSON format (one frame per line)
and converted into a channels x frames x joints array that feeds the feature
branches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError

NUM_JOINTS = 16

# MPII joint indices
R_ANKLE = 0
R_KNEE = 1
R_HIP = 2
L_HIP = 3
L_KNEE = 4
L_ANKLE = 5
PELVIS = 6
THORAX = 7
UPPER_NECK = 8
HEAD_TOP = 9
R_WRIST = 10
R_ELBOW = 11
R_SHOULDER = 12
L_SHOULDER = 13
L_ELBOW = 14
L_WRIST = 15

JOINT_NAMES = (
    "r_ankle", "r_knee", "r_hip", "l_hip", "l_knee", "l_ankle",
    "pelvis", "thorax", "upper_neck", "head_top",
    "r_wrist", "r_elbow", "r_shoulder", "l_shoulder", "l_elbow", "l_wrist",
)

CONDITIONS = ("NM", "BG", "CL")

# Left/right swap used by the mirroring augmentation.
MIRROR_PERMUTATION = (5, 4, 3, 2, 1, 0, 6, 7, 8, 9, 15, 14, 13, 12, 11, 10)

KEYPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Joint:
    """A single 2D keypoint with detector confidence."""

    x: float
    y: float
    confidence: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DataError(f"joint coordinates must be finite, got ({self.x}, {self.y})")
        if not (0.0 <= self.confidence <= 1.0):
            raise DataError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class KeypointFrame:
    """Exactly 16 joints observed at one frame index."""

    frame_index: int
    joints: tuple[Joint, ...]

    def __post_init__(self):
        if self.frame_index < 0:
            raise DataError(f"frame_index must be non-negative, got {self.frame_index}")
        if len(self.joints) != NUM_JOINTS:
            raise DataError(f"expected {NUM_JOINTS} joints, got {len(self.joints)}")


@dataclass(frozen=True)
class PoseSequence:
    """One labeled walk of one subject.

    Frames must be strictly increasing in frame_index with no gaps.
    """

    subject_id: str
    sequence_id: str
    condition: str
    view_deg: int
    frames: tuple[KeypointFrame, ...]
    _array: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise DataError(f"condition must be one of {CONDITIONS}, got {self.condition!r}")
        if not (0 <= self.view_deg <= 180):
            raise DataError(f"view_deg must be in [0, 180], got {self.view_deg}")
        if len(self.frames) < 2:
            raise DataError(
                f"sequence {self.subject_id}/{self.sequence_id} has {len(self.frames)} "
                "frames; at least 2 required"
            )
        first = self.frames[0].frame_index
        for offset, frame in enumerate(self.frames):
            if frame.frame_index != first + offset:
                raise DataError(
                    f"sequence {self.subject_id}/{self.sequence_id}: frame indices must "
                    f"be contiguous, found {frame.frame_index} after {first + offset - 1}"
                )

    def __len__(self):
        return len(self.frames)

    def as_array(self) -> np.ndarray:
        """Return a (T, 16, 3) float array of (x, y, confidence) per frame/joint."""
        if self._array is None:
            arr = np.array(
                [[(j.x, j.y, j.confidence) for j in f.joints] for f in self.frames],
                dtype=np.float64,
            )
            object.__setattr__(self, "_array", arr)
        return self._array

    @staticmethod
    def from_array(subject_id, sequence_id, condition, view_deg, array,
                   first_frame_index=0) -> "PoseSequence":
        """Build a sequence from a (T, 16, 3) array of (x, y, confidence)."""
        frames = tuple(
            KeypointFrame(
                frame_index=first_frame_index + t,
                joints=tuple(Joint(float(x), float(y), float(c)) for x, y, c in array[t]),
            )
            for t in range(array.shape[0])
        )
        return PoseSequence(subject_id, sequence_id, condition, int(view_deg), frames)


@dataclass(frozen=True)
class SkeletonTopology:
    """Kinematic tree over the 16 MPII joints.

    ``parent[i]`` is the adjacent joint that bone i connects to; the root maps
    to itself.  ``center_pair`` is (thorax, pelvis), whose midpoint defines the
    skeleton center.  ``lower_limb_set`` drives the gait-cycle similarity
    encoding.
    """

    parent: tuple[int, ...]
    center_pair: tuple[int, int]
    lower_limb_set: frozenset[int]

    def __post_init__(self):
        if len(self.parent) != NUM_JOINTS:
            raise DataError(f"parent table must cover {NUM_JOINTS} joints")
        roots = [i for i, p in enumerate(self.parent) if p == i]
        if len(roots) != 1:
            raise DataError(f"expected exactly one root joint, found {roots}")
        thorax, pelvis = self.center_pair
        if thorax == pelvis or not (0 <= thorax < NUM_JOINTS and 0 <= pelvis < NUM_JOINTS):
            raise DataError(f"invalid center pair {self.center_pair}")
        root = roots[0]
        for i in range(NUM_JOINTS):
            j, hops = i, 0
            while j != root:
                j = self.parent[j]
                hops += 1
                if hops > NUM_JOINTS:
                    raise DataError(f"parent chain from joint {i} does not reach the root")

    @property
    def root(self) -> int:
        return next(i for i, p in enumerate(self.parent) if p == i)


MPII_TOPOLOGY = SkeletonTopology(
    parent=(
        R_KNEE,      # r_ankle
        R_HIP,       # r_knee
        PELVIS,      # r_hip
        PELVIS,      # l_hip
        L_HIP,       # l_knee
        L_KNEE,      # l_ankle
        PELVIS,      # pelvis (root)
        PELVIS,      # thorax
        THORAX,      # upper_neck
        UPPER_NECK,  # head_top
        R_ELBOW,     # r_wrist
        R_SHOULDER,  # r_elbow
        THORAX,      # r_shoulder
        THORAX,      # l_shoulder
        L_SHOULDER,  # l_elbow
        L_ELBOW,     # l_wrist
    ),
    center_pair=(THORAX, PELVIS),
    lower_limb_set=frozenset({R_ANKLE, R_KNEE, R_HIP, L_HIP, L_KNEE, L_ANKLE}),
)


@dataclass(frozen=True)
class GaitTensor:
    """Spatiotemporal array of shape C x T x I (coordinate channels, frames, joints)."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise DataError(f"gait tensor must be 3-dimensional, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise DataError("gait tensor contains non-finite entries")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def joints(self) -> int:
        return self.data.shape[2]


def _parse_frame_line(path, line_no, line):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ParseError(path, line_no, "expected a JSON object")
    for key in ("subject_id", "sequence_id", "condition", "view_deg", "frame_idx", "joints"):
        if key not in obj:
            raise ParseError(path, line_no, f"missing field {key!r}")
    joints = obj["joints"]
    if not isinstance(joints, list) or len(joints) != NUM_JOINTS:
        n = len(joints) if isinstance(joints, list) else "non-array"
        raise ParseError(path, line_no, f"expected {NUM_JOINTS} joints, got {n}")
    parsed = []
    for i, triple in enumerate(joints):
        if not isinstance(triple, list) or len(triple) != 3:
            raise ParseError(path, line_no, f"joint {i} must be an [x, y, confidence] array")
        try:
            parsed.append(Joint(float(triple[0]), float(triple[1]), float(triple[2])))
        except (TypeError, ValueError, DataError) as exc:
            raise ParseError(path, line_no, f"joint {i}: {exc}") from exc
    if obj["condition"] not in CONDITIONS:
        raise ParseError(path, line_no, f"unknown condition {obj['condition']!r}")
    try:
        view = int(obj["view_deg"])
        frame_idx = int(obj["frame_idx"])
    except (TypeError, ValueError) as exc:
        raise ParseError(path, line_no, f"view_deg/frame_idx must be integers: {exc}") from exc
    if frame_idx < 0:
        raise ParseError(path, line_no, f"frame_idx must be non-negative, got {frame_idx}")
    return (
        str(obj["subject_id"]),
        str(obj["sequence_id"]),
        obj["condition"],
        view,
        frame_idx,
        tuple(parsed),
    )


def load_sequences(path) -> list[PoseSequence]:
    """Load all pose sequences from a keypoint file or a directory of them.

    One frame per line as a JSON object with fields subject_id, sequence_id,
    condition, view_deg, frame_idx and a 16-element joints array of
    [x, y, confidence] triples.  Frames are grouped by (subject_id,
    sequence_id) and sorted by frame index.  Directories are read as the
    concatenation of their *.jsonl files in sorted order.

    Raises ParseError with the offending path and line number on any
    malformed line, duplicate frame index, or inconsistent sequence metadata.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"keypoint path does not exist: {path}")
    if path.is_dir():
        files = sorted(path.glob("*.jsonl"))
        if not files:
            raise DataError(f"no *.jsonl files found in directory {path}")
    else:
        files = [path]

    groups: dict[tuple[str, str], dict] = {}
    for file in files:
        with open(file, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                subject, sequence, condition, view, frame_idx, joints = _parse_frame_line(
                    file, line_no, line
                )
                key = (subject, sequence)
                group = groups.setdefault(
                    key, {"condition": condition, "view": view, "frames": {}}
                )
                if group["condition"] != condition or group["view"] != view:
                    raise ParseError(
                        file, line_no,
                        f"sequence {subject}/{sequence} mixes conditions or view angles",
                    )
                if frame_idx in group["frames"]:
                    raise ParseError(
                        file, line_no,
                        f"duplicate frame_idx {frame_idx} in sequence {subject}/{sequence}",
                    )
                group["frames"][frame_idx] = joints

    sequences = []
    for (subject, sequence) in sorted(groups):
        group = groups[(subject, sequence)]
        frames = tuple(
            KeypointFrame(idx, group["frames"][idx]) for idx in sorted(group["frames"])
        )
        sequences.append(
            PoseSequence(subject, sequence, group["condition"], group["view"], frames)
        )
    return sequences


def save_sequences(sequences, path) -> None:
    """Write sequences in the keypoint file format (UTF-8, LF line endings).

    The writer emits floats with Python's shortest round-trip representation,
    so a save/load cycle reproduces coordinates bit-exactly.  Sequences are
    written in sorted (subject_id, sequence_id) order, making the file bytes
    canonical for a given sequence set.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for seq in sorted(sequences, key=lambda s: (s.subject_id, s.sequence_id)):
            for frame in seq.frames:
                record = {
                    "subject_id": seq.subject_id,
                    "sequence_id": seq.sequence_id,
                    "condition": seq.condition,
                    "view_deg": seq.view_deg,
                    "frame_idx": frame.frame_index,
                    "joints": [[j.x, j.y, j.confidence] for j in frame.joints],
                }
                fh.write(json.dumps(record, separators=(",", ":")))
                fh.write("\n")


def normalize_sequence(seq: PoseSequence, topo: SkeletonTopology = MPII_TOPOLOGY) -> PoseSequence:
    """Center each frame on the thorax-pelvis midpoint and scale torso length to 1.

    Translation and uniform scale per frame only; no rotation, so bone angles
    are preserved.  Confidences pass through untouched.  Raises DataError
    naming the frame index if thorax and pelvis coincide.
    """
    arr = seq.as_array().copy()
    thorax, pelvis = topo.center_pair
    centers = (arr[:, thorax, :2] + arr[:, pelvis, :2]) / 2.0
    diffs = arr[:, thorax, :2] - arr[:, pelvis, :2]
    scales = np.sqrt(diffs[:, 0] ** 2 + diffs[:, 1] ** 2)
    bad = np.flatnonzero(scales == 0.0)
    if bad.size:
        raise DataError(
            f"sequence {seq.subject_id}/{seq.sequence_id}: thorax coincides with pelvis "
            f"at frame_index {seq.frames[bad[0]].frame_index}"
        )
    arr[:, :, :2] = (arr[:, :, :2] - centers[:, None, :]) / scales[:, None, None]
    return PoseSequence.from_array(
        seq.subject_id, seq.sequence_id, seq.condition, seq.view_deg, arr,
        first_frame_index=seq.frames[0].frame_index,
    )


def to_gait_tensor(seq: PoseSequence, start: int, window: int) -> GaitTensor:
    """Slice a window of frames into the C x T x I coordinate tensor.

    data[c][t][i] is coordinate c (0 = x, 1 = y) of joint i at frame start+t.
    """
    if window < 8:
        raise DataError(f"window must be at least 8 frames, got {window}")
    if start < 0 or start + window > len(seq.frames):
        raise DataError(
            f"window [{start}, {start + window}) out of range for sequence of "
            f"length {len(seq.frames)}"
        )
    arr = seq.as_array()[start:start + window, :, :2]
    return GaitTensor(np.ascontiguousarray(arr.transpose(2, 0, 1)))
