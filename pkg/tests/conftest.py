import numpy as np
import pytest

from gaitfuse.skeleton import MPII_TOPOLOGY, Joint, KeypointFrame, PoseSequence
from gaitfuse.synth import SynthConfig, generate_dataset
from gaitfuse.training import TrainConfig


@pytest.fixture
def topo():
    return MPII_TOPOLOGY


@pytest.fixture(scope="session")
def small_dataset():
    """3 subjects x (2 NM + 1 BG + 1 CL) x 1 view, 36-frame sequences."""
    config = SynthConfig(subjects=3, nm_sequences=2, bg_sequences=1, cl_sequences=1,
                         frames=36, views=(90,), noise_sigma=0.01, seed=7)
    sequences, manifest = generate_dataset(config)
    return sequences, manifest


@pytest.fixture
def tiny_train_config():
    """Small, fast network and schedule for training-behavior tests."""
    return TrainConfig(
        batch_size=16,
        learning_rate=3e-3,
        lr_decay=0.01,
        dropout_rate=0.1,
        epochs=4,
        seed=3,
        window_policy=12,
        stem_channels=4,
        stage_blocks=((1, 8, 2),),
        reduction_ratio=4,
    )


def sequence_from_coords(coords, subject_id="S", sequence_id="Q", condition="NM",
                         view_deg=90, confidence=1.0):
    """Build a PoseSequence from a (T, 16, 2) coordinate array."""
    coords = np.asarray(coords, dtype=np.float64)
    frames = tuple(
        KeypointFrame(t, tuple(Joint(float(x), float(y), confidence) for x, y in coords[t]))
        for t in range(coords.shape[0])
    )
    return PoseSequence(subject_id, sequence_id, condition, view_deg, frames)
