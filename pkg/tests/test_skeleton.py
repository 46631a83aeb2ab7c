import json

import numpy as np
import pytest

from gaitfuse.errors import DataError, ParseError
from gaitfuse.skeleton import (
    L_ANKLE,
    MPII_TOPOLOGY,
    PELVIS,
    THORAX,
    Joint,
    KeypointFrame,
    PoseSequence,
    SkeletonTopology,
    load_sequences,
    normalize_sequence,
    save_sequences,
    to_gait_tensor,
)

from conftest import sequence_from_coords


def random_sequence(rng, frames=30, **kwargs):
    coords = rng.uniform(-1.0, 1.0, size=(frames, 16, 2))
    return sequence_from_coords(coords, **kwargs)


class TestFileFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        seqs = [
            random_sequence(rng, 30, subject_id="S001", sequence_id="NM-01"),
            random_sequence(rng, 12, subject_id="S001", sequence_id="BG-01", condition="BG"),
            random_sequence(rng, 18, subject_id="S002", sequence_id="NM-01", view_deg=54),
        ]
        path = tmp_path / "kp.jsonl"
        save_sequences(seqs, path)
        loaded = load_sequences(path)
        assert loaded == sorted(seqs, key=lambda s: (s.subject_id, s.sequence_id))
        save_sequences(loaded, tmp_path / "kp2.jsonl")
        assert (tmp_path / "kp.jsonl").read_bytes() == (tmp_path / "kp2.jsonl").read_bytes()

    def test_single_sequence(self, tmp_path):
        seq = random_sequence(np.random.default_rng(1), 30)
        path = tmp_path / "one.jsonl"
        save_sequences([seq], path)
        loaded = load_sequences(path)
        assert len(loaded) == 1
        assert len(loaded[0].frames) == 30

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_sequences(path) == []

    def test_wrong_joint_count_names_line(self, tmp_path):
        seq = random_sequence(np.random.default_rng(2), 4)
        path = tmp_path / "bad.jsonl"
        save_sequences([seq], path)
        lines = path.read_text().splitlines()
        record = json.loads(lines[2])
        record["joints"] = record["joints"][:15]
        lines[2] = json.dumps(record)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError) as exc:
            load_sequences(path)
        assert exc.value.line_no == 3
        assert "15" in str(exc.value)

    def test_duplicate_frame_index(self, tmp_path):
        seq = random_sequence(np.random.default_rng(3), 4)
        path = tmp_path / "dup.jsonl"
        save_sequences([seq], path)
        lines = path.read_text().splitlines()
        lines.append(lines[1])
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError, match="duplicate frame_idx"):
            load_sequences(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="does not exist"):
            load_sequences(tmp_path / "nope.jsonl")

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "garbage.jsonl"
        path.write_text("not json\n")
        with pytest.raises(ParseError) as exc:
            load_sequences(path)
        assert exc.value.line_no == 1

    def test_directory_loading(self, tmp_path):
        rng = np.random.default_rng(4)
        a = random_sequence(rng, 10, subject_id="A")
        b = random_sequence(rng, 10, subject_id="B")
        save_sequences([a], tmp_path / "a.jsonl")
        save_sequences([b], tmp_path / "b.jsonl")
        loaded = load_sequences(tmp_path)
        assert [s.subject_id for s in loaded] == ["A", "B"]


class TestDomainTypes:
    def test_joint_validation(self):
        with pytest.raises(DataError):
            Joint(float("nan"), 0.0, 1.0)
        with pytest.raises(DataError):
            Joint(0.0, 0.0, 1.5)

    def test_frame_needs_16_joints(self):
        with pytest.raises(DataError, match="16"):
            KeypointFrame(0, tuple(Joint(0.0, 0.0) for _ in range(15)))

    def test_sequence_needs_contiguous_frames(self):
        joints = tuple(Joint(0.0, float(i)) for i in range(16))
        frames = (KeypointFrame(0, joints), KeypointFrame(2, joints))
        with pytest.raises(DataError, match="contiguous"):
            PoseSequence("s", "q", "NM", 90, frames)

    def test_sequence_min_length(self):
        joints = tuple(Joint(0.0, float(i)) for i in range(16))
        with pytest.raises(DataError, match="at least 2"):
            PoseSequence("s", "q", "NM", 90, (KeypointFrame(0, joints),))

    def test_topology_rejects_broken_chain(self):
        parent = list(MPII_TOPOLOGY.parent)
        parent[0] = 0  # second root
        with pytest.raises(DataError, match="root"):
            SkeletonTopology(tuple(parent), MPII_TOPOLOGY.center_pair,
                             MPII_TOPOLOGY.lower_limb_set)

    def test_topology_root_is_pelvis(self):
        assert MPII_TOPOLOGY.root == PELVIS


class TestNormalize:
    def test_idempotent(self):
        seq = random_sequence(np.random.default_rng(5), 12)
        once = normalize_sequence(seq)
        twice = normalize_sequence(once)
        np.testing.assert_allclose(
            twice.as_array()[:, :, :2], once.as_array()[:, :, :2], atol=1e-12
        )

    def test_translation_invariance(self):
        rng = np.random.default_rng(6)
        coords = rng.uniform(-1, 1, size=(10, 16, 2))
        base = normalize_sequence(sequence_from_coords(coords))
        shifted = normalize_sequence(sequence_from_coords(coords + np.array([5.0, 7.0])))
        np.testing.assert_allclose(
            shifted.as_array()[:, :, :2], base.as_array()[:, :, :2], atol=1e-12
        )

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        coords = rng.uniform(-1, 1, size=(10, 16, 2))
        center = coords.mean(axis=(0, 1))
        base = normalize_sequence(sequence_from_coords(coords))
        scaled = normalize_sequence(sequence_from_coords((coords - center) * 3.0 + center))
        np.testing.assert_allclose(
            scaled.as_array()[:, :, :2], base.as_array()[:, :, :2], atol=1e-12
        )

    def test_degenerate_frame_names_index(self):
        coords = np.random.default_rng(8).uniform(-1, 1, size=(5, 16, 2))
        coords[3, THORAX] = coords[3, PELVIS]
        with pytest.raises(DataError, match="frame_index 3"):
            normalize_sequence(sequence_from_coords(coords))

    def test_normalized_geometry(self, topo):
        seq = normalize_sequence(random_sequence(np.random.default_rng(9), 8))
        arr = seq.as_array()
        torso = np.linalg.norm(arr[:, THORAX, :2] - arr[:, PELVIS, :2], axis=1)
        center = (arr[:, THORAX, :2] + arr[:, PELVIS, :2]) / 2
        np.testing.assert_allclose(torso, 1.0, atol=1e-12)
        np.testing.assert_allclose(center, 0.0, atol=1e-12)


class TestGaitTensor:
    def test_shape_contract(self):
        seq = random_sequence(np.random.default_rng(10), 24)
        X = to_gait_tensor(seq, 0, 24)
        assert X.data.shape == (2, 24, 16)

    def test_window_out_of_range(self):
        seq = random_sequence(np.random.default_rng(11), 24)
        with pytest.raises(DataError, match="out of range"):
            to_gait_tensor(seq, 0, 25)
        with pytest.raises(DataError, match="at least 8"):
            to_gait_tensor(seq, 0, 4)

    def test_direct_index_oracle(self):
        seq = random_sequence(np.random.default_rng(12), 20)
        X = to_gait_tensor(seq, 5, 10)
        assert X.data[1][3][5] == seq.frames[8].joints[L_ANKLE].y
        assert X.data[0][3][5] == seq.frames[8].joints[L_ANKLE].x

    def test_pure_reindexing_sum(self):
        seq = random_sequence(np.random.default_rng(13), 16)
        X = to_gait_tensor(seq, 0, 16)
        raw = seq.as_array()[:, :, :2]
        assert X.data.sum() == pytest.approx(raw.sum(), abs=1e-9)
