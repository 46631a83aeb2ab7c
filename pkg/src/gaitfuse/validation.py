"""Input validation helpers shared by the estimator API and the pipeline."""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .skeleton import PoseSequence


def check_pose_sequences(X) -> list[PoseSequence]:
    """Validate and materialize an iterable of PoseSequence inputs."""
    sequences = list(X)
    if not sequences:
        raise DataError("expected at least one pose sequence")
    for i, seq in enumerate(sequences):
        if not isinstance(seq, PoseSequence):
            raise DataError(
                f"element {i} is {type(seq).__name__}, expected PoseSequence"
            )
    return sequences


def check_labels(sequences, y) -> list[str]:
    """Resolve per-sequence labels, defaulting to each sequence's subject id."""
    if y is None:
        return [seq.subject_id for seq in sequences]
    labels = [str(label) for label in y]
    if len(labels) != len(sequences):
        raise DataError(
            f"got {len(labels)} labels for {len(sequences)} sequences"
        )
    return labels


def check_finite_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr
