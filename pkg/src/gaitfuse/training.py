"""End-to-end training, gallery/probe evaluation, ablation, PCKh, checkpoints.

Training is single-threaded and fully determined by (dataset, config, seed):
two identical runs produce byte-identical checkpoints and reports.
Evaluation embeds each sequence as the mean global feature over its windows
and assigns every probe the subject of its nearest gallery embedding.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import container
from .branches import SHORT_PERIOD_LAG, build_bundle
from .cycles import FALLBACK_WINDOW, NoPeriodicityError, detect_cycle, similarity_waveform, temporal_stride
from .errors import ConfigError, DataError, FormatError, NumericalError
from .extractor import DEFAULT_STAGE_BLOCKS, ExtractorConfig, ResidualExtractor
from .fusion import FusionConfig, FusionParams, mff_forward
from .skeleton import (
    MIRROR_PERMUTATION,
    MPII_TOPOLOGY,
    GaitTensor,
    KeypointFrame,
    PoseSequence,
    normalize_sequence,
    to_gait_tensor,
)

BRANCHES = ("proportion", "velocity", "skeletal")

# Channel counts each branch feeds into its extractor (C = 2 raw coordinates).
BRANCH_CHANNELS = {"proportion": 4, "velocity": 4, "skeletal": 3}

# Table-style ablation rows: every combination exercised by the ablation suite.
ABLATION_COMBOS = (
    ("velocity",),
    ("proportion", "skeletal"),
    ("proportion", "velocity"),
    ("skeletal", "velocity"),
    ("proportion", "velocity", "skeletal"),
)

CHECKPOINT_FORMAT_VERSION = container.FORMAT_VERSION

_META_JSON = "meta.json"
_META_HISTORY = "meta.loss_history"

MIN_WINDOW = 8


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the fusion network and its training loop."""

    batch_size: int = 64
    learning_rate: float = 1e-4
    lr_decay: float = 0.01
    dropout_rate: float = 0.35
    epochs: int = 150
    seed: int = 0
    window_policy: int | str = "auto"
    augment: bool = False
    stem_channels: int = 16
    stage_blocks: tuple[tuple[int, int, int], ...] = DEFAULT_STAGE_BLOCKS
    reduction_ratio: int = 4
    metric: str = "euclidean"
    selection: str = "final"
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.lr_decay < 0:
            raise ConfigError(f"lr_decay must be non-negative, got {self.lr_decay}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if isinstance(self.window_policy, str):
            if self.window_policy != "auto":
                raise ConfigError(
                    f"window_policy must be 'auto' or a frame count, got {self.window_policy!r}"
                )
        elif self.window_policy < MIN_WINDOW:
            raise ConfigError(f"fixed window must be at least {MIN_WINDOW} frames")
        if self.metric not in ("euclidean", "cosine"):
            raise ConfigError(f"metric must be 'euclidean' or 'cosine', got {self.metric!r}")
        if self.selection not in ("final", "best_loss"):
            raise ConfigError(f"selection must be 'final' or 'best_loss', got {self.selection!r}")
        # Normalize the nested tuple so config snapshots serialize canonically.
        object.__setattr__(
            self, "stage_blocks",
            tuple(tuple(int(v) for v in stage) for stage in self.stage_blocks),
        )


@dataclass(frozen=True)
class Checkpoint:
    """Trained parameters (float32) plus the metadata needed to rebuild the model."""

    parameters: dict[str, np.ndarray]
    epoch: int
    train_loss: float
    config: dict
    format_version: int = CHECKPOINT_FORMAT_VERSION
    loss_history: tuple[float, ...] = ()


@dataclass(frozen=True)
class EvalReport:
    """Rank-1 accuracies per condition and per view angle.

    ``overall`` is the unweighted mean of the per-condition accuracies.
    """

    rank1_by_condition: dict[str, float]
    rank1_by_angle: dict[int, dict[str, float]]
    overall: float


def _check_branch_mask(branch_mask) -> frozenset:
    if branch_mask is None:
        return frozenset(BRANCHES)
    mask = frozenset(branch_mask)
    unknown = mask - set(BRANCHES)
    if unknown:
        raise ConfigError(f"unknown branches in mask: {sorted(unknown)}")
    if not mask:
        raise ConfigError("branch mask must keep at least one branch")
    return mask


class FusionModel:
    """Three branch extractors, the fusion module, and the identity classifier."""

    def __init__(self, config: TrainConfig, subjects: list[str], branch_mask,
                 window: int):
        self.config = config
        self.subjects = list(subjects)
        self.branch_mask = _check_branch_mask(branch_mask)
        self.window = window
        self.topology = MPII_TOPOLOGY
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0)))

        self.extractor_configs = {
            branch: ExtractorConfig(
                stem_channels=config.stem_channels,
                stage_blocks=config.stage_blocks,
                input_channels=BRANCH_CHANNELS[branch],
            )
            for branch in BRANCHES
        }
        self.extractors: dict[str, ResidualExtractor] = {}
        for branch in BRANCHES:
            if branch in self.branch_mask:
                self.extractors[branch] = ResidualExtractor(
                    self.extractor_configs[branch], rng, prefix=f"extractor.{branch}"
                )

        c_out = self.extractor_configs["proportion"].out_channels
        self.fusion_config = FusionConfig(
            spatial_channels=2 * c_out,
            velocity_channels=c_out,
            reduction_ratio=config.reduction_ratio,
        )
        self.fusion = FusionParams(self.fusion_config, rng)

        feat_dim = self.fusion_config.total_channels
        n_classes = len(self.subjects)
        bound = 1.0 / np.sqrt(feat_dim)
        self.classifier_w = ad.Parameter(
            "classifier.weight", rng.uniform(-bound, bound, size=(feat_dim, n_classes))
        )
        self.classifier_b = ad.Parameter("classifier.bias", np.zeros(n_classes))

    def parameters(self) -> dict[str, ad.Parameter]:
        params: dict[str, ad.Parameter] = {}
        for branch in BRANCHES:
            if branch in self.extractors:
                for p in self.extractors[branch].parameters():
                    params[p.name] = p
        for p in self.fusion.parameters():
            params[p.name] = p
        params[self.classifier_w.name] = self.classifier_w
        params[self.classifier_b.name] = self.classifier_b
        return params

    def _branch_map(self, branch: str, values: np.ndarray) -> ad.Tensor:
        cfg = self.extractor_configs[branch]
        if branch in self.extractors:
            return self.extractors[branch].forward(ad.Tensor(values))
        n = values.shape[0]
        c, h, w = cfg.output_shape(values.shape[2], values.shape[3])
        return ad.Tensor(np.zeros((n, c, h, w)))

    def forward(self, proportion: np.ndarray, velocity: np.ndarray,
                skeletal: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None):
        """Run the full network; returns (logits, global feature) tensors."""
        prop_map = self._branch_map("proportion", proportion)
        vel_map = self._branch_map("velocity", velocity)
        skel_map = self._branch_map("skeletal", skeletal)
        feature = mff_forward(prop_map, skel_map, vel_map, self.fusion).values
        dropped = ad.dropout(feature, self.config.dropout_rate, training, rng)
        logits = ad.affine(dropped, self.classifier_w, self.classifier_b)
        return logits, feature


def _resolve_window(normalized, config: TrainConfig) -> int:
    if isinstance(config.window_policy, int):
        return config.window_policy
    estimates = []
    for seq in normalized:
        try:
            waveform = similarity_waveform(seq, MPII_TOPOLOGY)
            estimates.append(detect_cycle(waveform))
        except (NoPeriodicityError, DataError):
            continue
    if not estimates:
        return FALLBACK_WINDOW
    return max(MIN_WINDOW, temporal_stride(estimates))


def _window_starts(length: int, window: int) -> list[int]:
    return list(range(0, length - window + 1, window))


def _bundle_arrays(seq: PoseSequence, start: int, window: int):
    bundle = build_bundle(to_gait_tensor(seq, start, window), MPII_TOPOLOGY)
    return bundle.proportion.data, bundle.velocity.data, bundle.skeletal.data


def _augmented_window(seq_array: np.ndarray, start: int, window: int,
                      rng: np.random.Generator):
    # Temporal crop jitter of +/-2 frames, mirroring with joint relabeling,
    # and sigma=0.01 coordinate jitter, all on the normalized coordinates.
    max_start = seq_array.shape[0] - window
    start = int(np.clip(start + rng.integers(-2, 3), 0, max_start))
    coords = seq_array[start:start + window, :, :2].copy()
    if rng.random() < 0.5:
        coords = coords[:, MIRROR_PERMUTATION, :]
        coords[:, :, 0] *= -1.0
    coords += rng.normal(0.0, 0.01, size=coords.shape)
    tensor = GaitTensor(np.ascontiguousarray(coords.transpose(2, 0, 1)))
    bundle = build_bundle(tensor, MPII_TOPOLOGY)
    return bundle.proportion.data, bundle.velocity.data, bundle.skeletal.data


def _config_snapshot(config: TrainConfig, window: int, branch_mask, subjects) -> dict:
    return {
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "lr_decay": config.lr_decay,
        "dropout_rate": config.dropout_rate,
        "epochs": config.epochs,
        "seed": config.seed,
        "window_policy": config.window_policy,
        "window": window,
        "augment": config.augment,
        "stem_channels": config.stem_channels,
        "stage_blocks": [list(stage) for stage in config.stage_blocks],
        "reduction_ratio": config.reduction_ratio,
        "metric": config.metric,
        "selection": config.selection,
        "weight_decay": config.weight_decay,
        "branch_mask": sorted(branch_mask),
        "subjects": list(subjects),
    }


def train(dataset, config: TrainConfig, branch_mask=None) -> Checkpoint:
    """Train the fusion network on labeled pose sequences.

    Sequences are normalized, windowed at the temporal stride (twice the mean
    full gait cycle under the "auto" policy), expanded into branch features,
    and fed through the per-branch extractors, the fusion module, and a
    softmax identity classifier.  Branches absent from ``branch_mask`` are
    replaced by zero feature maps of the correct shape and contribute no
    parameters.

    Returns the checkpoint selected per ``config.selection`` ("final" keeps
    the last epoch; "best_loss" the epoch with the lowest training loss)
    along with the per-epoch loss history.
    """
    branch_mask = _check_branch_mask(branch_mask)
    subjects = sorted({seq.subject_id for seq in dataset})
    if len(subjects) < 2:
        raise DataError(f"training requires at least 2 subjects, got {len(subjects)}")
    label_of = {s: i for i, s in enumerate(subjects)}

    normalized = [normalize_sequence(seq) for seq in dataset]
    window = _resolve_window(normalized, config)
    for seq in normalized:
        if len(seq) < window:
            raise DataError(
                f"insufficient data: sequence {seq.subject_id}/{seq.sequence_id} has "
                f"{len(seq)} frames, window needs {window}"
            )

    samples = []
    for idx, seq in enumerate(normalized):
        for start in _window_starts(len(seq), window):
            samples.append((label_of[seq.subject_id], idx, start))
    if not samples:
        raise DataError("insufficient data: no training windows")

    if config.augment:
        seq_arrays = [seq.as_array() for seq in normalized]
        cached = None
    else:
        cached = [
            _bundle_arrays(normalized[idx], start, window)
            for (_, idx, start) in samples
        ]

    model = FusionModel(config, subjects, branch_mask, window)
    params = model.parameters()
    state = ad.AdamState.for_params(params)
    train_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 1)))

    labels_all = np.array([s[0] for s in samples], dtype=np.int64)
    loss_history: list[float] = []
    best_loss = math.inf
    best_params: dict[str, np.ndarray] | None = None
    best_epoch = 0

    for epoch in range(config.epochs):
        lr = config.learning_rate * math.exp(-config.lr_decay * epoch)
        order = train_rng.permutation(len(samples))
        epoch_loss = 0.0
        for step, lo in enumerate(range(0, len(order), config.batch_size)):
            batch = order[lo:lo + config.batch_size]
            if config.augment:
                parts = [
                    _augmented_window(seq_arrays[samples[i][1]], samples[i][2],
                                      window, train_rng)
                    for i in batch
                ]
            else:
                parts = [cached[i] for i in batch]
            prop = np.stack([p[0] for p in parts])
            vel = np.stack([p[1] for p in parts])
            skel = np.stack([p[2] for p in parts])
            labels = labels_all[batch]

            with ad.Tape() as tape:
                logits, _ = model.forward(prop, vel, skel, training=True, rng=train_rng)
                loss = ad.softmax_cross_entropy(logits, labels)
            loss_value = loss.item()
            if not math.isfinite(loss_value):
                raise NumericalError("non-finite training loss", epoch=epoch, step=step)
            ad.backward(loss, tape)
            grads = {
                name: (p.grad if p.grad is not None else np.zeros_like(p.values))
                for name, p in params.items()
            }
            ad.adam_step(params, grads, state, lr, weight_decay=config.weight_decay)
            epoch_loss += loss_value * len(batch)
        epoch_loss /= len(samples)
        loss_history.append(epoch_loss)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_epoch = epoch
            if config.selection == "best_loss":
                best_params = {n: p.values.copy() for n, p in params.items()}

    if config.selection == "best_loss" and best_params is not None:
        final_values = best_params
        final_epoch, final_loss = best_epoch, best_loss
    else:
        final_values = {n: p.values for n, p in params.items()}
        final_epoch, final_loss = config.epochs - 1, loss_history[-1]

    return Checkpoint(
        parameters={n: v.astype(np.float32) for n, v in final_values.items()},
        epoch=final_epoch,
        train_loss=final_loss,
        config=_config_snapshot(config, window, branch_mask, subjects),
        loss_history=tuple(loss_history),
    )


def _config_from_snapshot(snapshot: dict) -> TrainConfig:
    window_policy = snapshot["window_policy"]
    return TrainConfig(
        batch_size=snapshot["batch_size"],
        learning_rate=snapshot["learning_rate"],
        lr_decay=snapshot["lr_decay"],
        dropout_rate=snapshot["dropout_rate"],
        epochs=snapshot["epochs"],
        seed=snapshot["seed"],
        window_policy=window_policy,
        augment=snapshot["augment"],
        stem_channels=snapshot["stem_channels"],
        stage_blocks=tuple(tuple(s) for s in snapshot["stage_blocks"]),
        reduction_ratio=snapshot["reduction_ratio"],
        metric=snapshot["metric"],
        selection=snapshot["selection"],
        weight_decay=snapshot["weight_decay"],
    )


def model_from_checkpoint(ckpt: Checkpoint) -> FusionModel:
    """Rebuild a model and install the checkpoint's parameter values."""
    config = _config_from_snapshot(ckpt.config)
    model = FusionModel(
        config, ckpt.config["subjects"], frozenset(ckpt.config["branch_mask"]),
        ckpt.config["window"],
    )
    params = model.parameters()
    missing = sorted(set(params) - set(ckpt.parameters))
    unknown = sorted(set(ckpt.parameters) - set(params))
    if missing or unknown:
        raise FormatError(
            f"checkpoint parameters do not match the model: missing {missing}, "
            f"unknown {unknown}"
        )
    for name, p in params.items():
        stored = ckpt.parameters[name]
        if stored.shape != p.values.shape:
            raise FormatError(
                f"parameter {name} has shape {stored.shape}, expected {p.values.shape}"
            )
        p.values = stored.astype(np.float64)
    return model


def embed_sequence(model: FusionModel, seq: PoseSequence) -> np.ndarray:
    """Mean global feature over a sequence's non-overlapping windows.

    Sequences shorter than the model window fall back to a single window of
    the full sequence length (at least 8 frames).
    """
    normalized = normalize_sequence(seq)
    window = min(model.window, len(normalized))
    starts = _window_starts(len(normalized), window)
    parts = [_bundle_arrays(normalized, start, window) for start in starts]
    prop = np.stack([p[0] for p in parts])
    vel = np.stack([p[1] for p in parts])
    skel = np.stack([p[2] for p in parts])
    _, feature = model.forward(prop, vel, skel, training=False)
    return feature.values.mean(axis=0)


def _embed_all(model: FusionModel, sequences, threads: int) -> np.ndarray:
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            vectors = list(pool.map(lambda s: embed_sequence(model, s), sequences))
    else:
        vectors = [embed_sequence(model, seq) for seq in sequences]
    return np.stack(vectors)


def rank1_eval(ckpt: Checkpoint, gallery, probe, threads: int = 1) -> EvalReport:
    """Rank-1 identification of probe sequences against a gallery.

    Every probe is assigned the subject of its nearest gallery embedding
    (Euclidean by default, cosine when the checkpoint was trained with
    ``metric="cosine"``; ties break toward the earlier gallery entry).
    Accuracy is reported per condition, per view angle, and overall (the
    unweighted mean over conditions).
    """
    gallery = list(gallery)
    probe = list(probe)
    if not gallery or not probe:
        raise DataError("gallery and probe must both be non-empty")
    gallery_subjects = {seq.subject_id for seq in gallery}
    for seq in probe:
        if seq.subject_id not in gallery_subjects:
            raise DataError(f"probe subject {seq.subject_id!r} absent from gallery")

    model = model_from_checkpoint(ckpt)
    metric = ckpt.config.get("metric", "euclidean")
    g_emb = _embed_all(model, gallery, threads)
    p_emb = _embed_all(model, probe, threads)

    if metric == "cosine":
        g_norm = g_emb / np.maximum(np.linalg.norm(g_emb, axis=1, keepdims=True), 1e-12)
        p_norm = p_emb / np.maximum(np.linalg.norm(p_emb, axis=1, keepdims=True), 1e-12)
        nearest = np.argmax(p_norm @ g_norm.T, axis=1)
    else:
        d2 = ((p_emb[:, None, :] - g_emb[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argmin(d2, axis=1)

    by_condition: dict[str, list[int]] = {}
    by_angle: dict[int, dict[str, list[int]]] = {}
    for i, seq in enumerate(probe):
        correct = int(gallery[nearest[i]].subject_id == seq.subject_id)
        by_condition.setdefault(seq.condition, []).append(correct)
        by_angle.setdefault(seq.view_deg, {}).setdefault(seq.condition, []).append(correct)

    rank1_by_condition = {
        cond: float(np.mean(flags)) for cond, flags in sorted(by_condition.items())
    }
    rank1_by_angle = {
        angle: {cond: float(np.mean(flags)) for cond, flags in sorted(conds.items())}
        for angle, conds in sorted(by_angle.items())
    }
    overall = float(np.mean(list(rank1_by_condition.values())))
    return EvalReport(rank1_by_condition, rank1_by_angle, overall)


def split_gallery_probe(sequences, enroll_count: int = 4):
    """Enrollment split: the first ``enroll_count`` NM sequences per subject and view.

    "First" is sorted sequence_id order, mirroring the protocol of enrolling a
    subject's first normal walks; everything else (later NM walks plus all BG
    and CL walks) becomes the probe set.
    """
    groups: dict[tuple[str, int], list[PoseSequence]] = {}
    for seq in sequences:
        if seq.condition == "NM":
            groups.setdefault((seq.subject_id, seq.view_deg), []).append(seq)
    gallery_ids = set()
    for key, seqs in groups.items():
        for seq in sorted(seqs, key=lambda s: s.sequence_id)[:enroll_count]:
            gallery_ids.add((seq.subject_id, seq.sequence_id))
    gallery = [s for s in sequences if (s.subject_id, s.sequence_id) in gallery_ids]
    probe = [s for s in sequences if (s.subject_id, s.sequence_id) not in gallery_ids]
    return gallery, probe


def ablation_suite(dataset, config: TrainConfig, seeds, combos=None) -> dict:
    """Train and evaluate every branch combination across the given seeds.

    Returns ``{combo_label: [EvalReport per seed]}`` with combos in the
    canonical table order.  At least two seeds are needed for trend claims;
    one seed still runs but reports no spread.
    """
    seeds = list(seeds)
    if not seeds:
        raise DataError("ablation requires at least one seed")
    combos = tuple(combos) if combos is not None else ABLATION_COMBOS
    gallery, probe = split_gallery_probe(dataset)
    results: dict[str, list[EvalReport]] = {}
    for combo in combos:
        label = "+".join(combo)
        reports = []
        for seed in seeds:
            cfg = replace(config, seed=seed)
            ckpt = train(dataset, cfg, branch_mask=frozenset(combo))
            reports.append(rank1_eval(ckpt, gallery, probe))
        results[label] = reports
    return results


def pckh(predicted, truth, head_scales, threshold: float):
    """Head-normalized probability of correct keypoint.

    For each joint, the score is the fraction of persons whose prediction
    error, divided by that person's head scale, is at most ``threshold``.
    Returns (per-joint scores, mean score).
    """
    predicted = list(predicted)
    truth = list(truth)
    if len(predicted) != len(truth) or not predicted:
        raise DataError(
            f"predicted and truth must be equal-length non-empty lists, got "
            f"{len(predicted)} and {len(truth)}"
        )
    scales = np.asarray(list(head_scales), dtype=np.float64)
    if scales.shape != (len(predicted),):
        raise DataError(f"need one head scale per person, got {scales.shape}")
    if np.any(scales <= 0):
        raise DataError("head scales must be positive")

    def coords(frames):
        return np.array([[(j.x, j.y) for j in f.joints] for f in frames], dtype=np.float64)

    d = np.linalg.norm(coords(predicted) - coords(truth), axis=2)
    ok = d / scales[:, None] <= threshold
    per_joint = ok.mean(axis=0)
    return per_joint, float(per_joint.mean())


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Serialize a checkpoint into the tensor container format.

    Metadata (epoch, train loss, config snapshot) rides along as reserved
    ``meta.*`` tensors: the config JSON is stored byte-per-float, which keeps
    the container format unchanged and the round trip byte-exact.
    """
    for name in ckpt.parameters:
        if name.startswith("meta."):
            raise FormatError(f"parameter name {name!r} collides with reserved meta prefix")
    meta = {
        "epoch": ckpt.epoch,
        "train_loss": ckpt.train_loss,
        "format_version": ckpt.format_version,
        "config": ckpt.config,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    tensors = dict(ckpt.parameters)
    tensors[_META_JSON] = np.frombuffer(meta_bytes, dtype=np.uint8).astype(np.float32)
    tensors[_META_HISTORY] = np.asarray(ckpt.loss_history, dtype=np.float32)
    container.save_tensors(tensors, path)


def load_checkpoint(path) -> Checkpoint:
    """Load a checkpoint saved by ``save_checkpoint``."""
    tensors = container.load_tensors(path)
    if _META_JSON not in tensors:
        raise FormatError(f"{path}: not a checkpoint (missing {_META_JSON})")
    meta_bytes = tensors.pop(_META_JSON).astype(np.uint8).tobytes()
    try:
        meta = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint metadata: {exc}") from exc
    history = tuple(float(v) for v in tensors.pop(_META_HISTORY, np.array([])))
    if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported checkpoint version {meta.get('format_version')}"
        )
    return Checkpoint(
        parameters=tensors,
        epoch=int(meta["epoch"]),
        train_loss=float(meta["train_loss"]),
        config=meta["config"],
        format_version=int(meta["format_version"]),
        loss_history=history,
    )


def format_report(report: EvalReport, percent: bool = True) -> str:
    """Render an EvalReport as tab-separated tables (conditions, then angles)."""
    scale = 100.0 if percent else 1.0
    fmt = "{:.2f}" if percent else "{:.4f}"
    conditions = ("NM", "BG", "CL")
    lines = ["condition\t" + "\t".join(conditions) + "\toverall"]
    row = ["rank1"]
    for cond in conditions:
        value = report.rank1_by_condition.get(cond)
        row.append(fmt.format(value * scale) if value is not None else "-")
    row.append(fmt.format(report.overall * scale))
    lines.append("\t".join(row))
    lines.append("")
    lines.append("angle\t" + "\t".join(conditions))
    for angle in sorted(report.rank1_by_angle):
        row = [str(angle)]
        for cond in conditions:
            value = report.rank1_by_angle[angle].get(cond)
            row.append(fmt.format(value * scale) if value is not None else "-")
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def format_ablation(results: dict, percent: bool = True) -> str:
    """Render ablation results as one row per combo with mean +/- std cells."""
    scale = 100.0 if percent else 1.0
    conditions = ("NM", "BG", "CL")
    lines = ["branches\t" + "\t".join(conditions) + "\toverall"]
    for label, reports in results.items():
        row = [label]
        for cond in conditions:
            values = [r.rank1_by_condition.get(cond) for r in reports]
            values = [v for v in values if v is not None]
            if values:
                mean = np.mean(values) * scale
                spread = np.std(values) * scale
                row.append(f"{mean:.2f}±{spread:.2f}")
            else:
                row.append("-")
        overalls = [r.overall for r in reports]
        row.append(f"{np.mean(overalls) * scale:.2f}±{np.std(overalls) * scale:.2f}")
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
