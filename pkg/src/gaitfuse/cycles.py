"""Gait cycle estimation from lower-limb keypoint similarity.

Each normalized frame's lower-limb joints are quantized into one-hot bins and
compared to the first frame by Hamming distance, producing a similarity
waveform whose troughs mark half-gait-cycle intervals.  Twice the full cycle
gives the temporal stride used to window sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NoPeriodicityError
from .skeleton import KeypointFrame, PoseSequence, SkeletonTopology

DEFAULT_BINS = 16
DEFAULT_SMOOTHING = 3
DEFAULT_MIN_SEPARATION = 6

# Fallback window when no periodicity is detected: twice a 24-frame cycle.
FALLBACK_WINDOW = 48

# Quantization range for normalized coordinates (torso length 1).
ENCODE_RANGE = (-2.0, 2.0)


@dataclass(frozen=True)
class SimilarityWaveform:
    """Hamming distance of each frame against the reference frame (index 0)."""

    values: np.ndarray
    reference_index: int = 0

    def __post_init__(self):
        if self.values[self.reference_index] != 0:
            raise DataError("waveform must be zero at its reference index")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class GaitCycleEstimate:
    half_cycle_frames: int
    full_cycle_frames: int
    trough_indices: tuple[int, ...]

    def __post_init__(self):
        if self.half_cycle_frames <= 0:
            raise DataError("half cycle must be positive")
        if self.full_cycle_frames != 2 * self.half_cycle_frames:
            raise DataError("full cycle must be twice the half cycle")
        if any(b <= a for a, b in zip(self.trough_indices, self.trough_indices[1:])):
            raise DataError("trough indices must be strictly increasing")


def _bin_indices(coords: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = ENCODE_RANGE
    width = (hi - lo) / bins
    idx = np.floor((coords - lo) / width).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _lower_limb_coords(frame_array: np.ndarray, topo: SkeletonTopology) -> np.ndarray:
    joints = sorted(topo.lower_limb_set)
    return frame_array[..., joints, :2]


def encode_lower_limbs(frame: KeypointFrame, topo: SkeletonTopology,
                       bins: int = DEFAULT_BINS) -> np.ndarray:
    """One-hot encode the lower-limb joint coordinates of a normalized frame.

    Each coordinate is quantized into ``bins`` equal-width intervals over
    [-2, 2] (out-of-range values clamp to the boundary bin) and one-hot
    encoded; the result is the concatenated bit vector of length
    |lower_limb_set| * 2 * bins.
    """
    if bins < 2:
        raise DataError(f"bins must be at least 2, got {bins}")
    coords = np.array([(j.x, j.y) for j in frame.joints], dtype=np.float64)
    limb = _lower_limb_coords(coords, topo)
    idx = _bin_indices(limb.reshape(-1), bins)
    onehot = np.zeros((idx.size, bins), dtype=bool)
    onehot[np.arange(idx.size), idx] = True
    return onehot.reshape(-1)


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Number of differing bits between two encodings of equal length."""
    if a.shape != b.shape:
        raise DataError(f"encodings differ in length: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def similarity_waveform(seq: PoseSequence, topo: SkeletonTopology,
                        bins: int = DEFAULT_BINS) -> SimilarityWaveform:
    """Hamming distance of every frame's lower-limb encoding vs. frame 0."""
    if bins < 2:
        raise DataError(f"bins must be at least 2, got {bins}")
    if len(seq.frames) < 2:
        raise DataError("sequence too short for a similarity waveform")
    coords = _lower_limb_coords(seq.as_array(), topo)
    idx = _bin_indices(coords, bins)
    flat = idx.reshape(idx.shape[0], -1)
    onehot = np.zeros((flat.shape[0], flat.shape[1], bins), dtype=bool)
    rows = np.arange(flat.shape[1])
    for t in range(flat.shape[0]):
        onehot[t, rows, flat[t]] = True
    enc = onehot.reshape(flat.shape[0], -1)
    values = np.count_nonzero(enc != enc[0], axis=1).astype(np.int64)
    return SimilarityWaveform(values=values)


def _smooth(values: np.ndarray, window: int) -> np.ndarray:
    # Centered moving average; the window truncates at the edges.
    half = window // 2
    out = np.empty(len(values), dtype=np.float64)
    for t in range(len(values)):
        lo = max(0, t - half)
        hi = min(len(values), t + half + 1)
        out[t] = values[lo:hi].mean()
    return out


def detect_cycle(waveform: SimilarityWaveform, smoothing: int = DEFAULT_SMOOTHING,
                 min_separation: int = DEFAULT_MIN_SEPARATION) -> GaitCycleEstimate:
    """Locate waveform troughs and derive the half/full gait cycle lengths.

    Troughs are strict local minima of the moving-average-smoothed waveform,
    thinned so that kept troughs are at least ``min_separation`` frames apart
    (smaller smoothed values win ties).  The half cycle is the lower median of
    consecutive trough gaps; the full cycle is twice that.

    Raises NoPeriodicityError when fewer than two troughs survive; callers
    fall back to ``FALLBACK_WINDOW``.
    """
    values = np.asarray(waveform.values, dtype=np.float64)
    if len(values) < 2 * min_separation:
        raise DataError(
            f"waveform of length {len(values)} too short for min_separation {min_separation}"
        )
    smoothed = _smooth(values, smoothing)
    # Strict local minima, plateau-aware: a maximal run of equal smoothed
    # values strictly below both run neighbors is one trough at its center.
    candidates = []
    t = 0
    n = len(smoothed)
    while t < n:
        u = t
        while u + 1 < n and smoothed[u + 1] == smoothed[t]:
            u += 1
        if t > 0 and u < n - 1 and smoothed[t] < smoothed[t - 1] and smoothed[t] < smoothed[u + 1]:
            candidates.append((t + u) // 2)
        t = u + 1
    kept: list[int] = []
    for t in sorted(candidates, key=lambda t: (smoothed[t], t)):
        if all(abs(t - k) >= min_separation for k in kept):
            kept.append(t)
    troughs = sorted(kept)
    if len(troughs) < 2:
        raise NoPeriodicityError("no periodicity detected")
    gaps = np.diff(troughs)
    # Median of the gaps (mean of the central pair for even counts), rounded
    # half-up; trough jitter of +/-1 frame then cancels instead of biasing
    # the estimate low.
    half = int(np.floor(float(np.median(gaps)) + 0.5))
    return GaitCycleEstimate(
        half_cycle_frames=half,
        full_cycle_frames=2 * half,
        trough_indices=tuple(int(t) for t in troughs),
    )


def temporal_stride(estimates: list[GaitCycleEstimate]) -> int:
    """Twice the mean full-cycle length, rounded half-up to whole frames."""
    if not estimates:
        raise DataError("temporal_stride requires at least one cycle estimate")
    mean_full = float(np.mean([e.full_cycle_frames for e in estimates]))
    return int(np.floor(2.0 * mean_full + 0.5))
