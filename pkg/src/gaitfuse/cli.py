"""Command-line interface: synth, cycles, featurize, train, eval, ablate.

Configuration comes from an INI-style file (sections [train], [extractor],
[fusion], [synth]) with command-line flags taking precedence.  Exit codes:
0 success, 1 usage/configuration error, 2 data or format error, 3 numerical
failure during training.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

from . import __version__
from . import container
from .cycles import NoPeriodicityError, detect_cycle, similarity_waveform
from .errors import FormatError, GaitfuseError, NumericalError
from .skeleton import (
    KEYPOINT_FORMAT_VERSION,
    MPII_TOPOLOGY,
    load_sequences,
    normalize_sequence,
    save_sequences,
)
from .synth import SynthConfig, generate_dataset, manifest_to_tsv
from .training import (
    TrainConfig,
    ablation_suite,
    format_ablation,
    format_report,
    load_checkpoint,
    rank1_eval,
    save_checkpoint,
    split_gallery_probe,
    train,
    _bundle_arrays,
    _resolve_window,
    _window_starts,
)

_VERSION_TEXT = (
    f"gaitfuse {__version__} "
    f"(keypoint format v{KEYPOINT_FORMAT_VERSION}, "
    f"checkpoint container v{container.FORMAT_VERSION})"
)

_TRAIN_KEYS = {
    "batch_size": int,
    "learning_rate": float,
    "lr_decay": float,
    "dropout_rate": float,
    "epochs": int,
    "seed": int,
    "window": str,
    "augment": lambda s: s.lower() in ("1", "true", "yes"),
    "metric": str,
    "selection": str,
    "weight_decay": float,
}
_EXTRACTOR_KEYS = {"stem_channels": int, "stage_blocks": str}
_FUSION_KEYS = {"reduction_ratio": int}
_SYNTH_KEYS = {
    "subjects": int,
    "nm_sequences": int,
    "bg_sequences": int,
    "cl_sequences": int,
    "frames": int,
    "views": str,
    "noise_sigma": float,
    "seed": int,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _parse_stage_blocks(text: str):
    stages = []
    for part in text.split(","):
        pieces = part.strip().split(":")
        if len(pieces) != 3:
            raise _UsageError(
                f"stage_blocks entries must be count:width:stride, got {part!r}"
            )
        stages.append(tuple(int(p) for p in pieces))
    return tuple(stages)


def _parse_window(text: str):
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise _UsageError(f"window must be 'auto' or an integer, got {text!r}") from None


def _read_config(path):
    sections = {"train": {}, "extractor": {}, "fusion": {}, "synth": {}}
    if path is None:
        return sections
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise FormatError(f"config file not found or unreadable: {path}")
    known = {
        "train": _TRAIN_KEYS,
        "extractor": _EXTRACTOR_KEYS,
        "fusion": _FUSION_KEYS,
        "synth": _SYNTH_KEYS,
    }
    for section in parser.sections():
        if section not in known:
            raise _UsageError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in known[section]:
                raise _UsageError(f"unknown config key {key!r} in section [{section}]")
            sections[section][key] = known[section][key](raw)
    return sections


def _train_config(sections, args) -> TrainConfig:
    values = dict(sections["train"])
    values.update(sections["extractor"])
    values.update(sections["fusion"])
    if "window" in values:
        values["window_policy"] = _parse_window(values.pop("window"))
    if "stage_blocks" in values:
        values["stage_blocks"] = _parse_stage_blocks(values["stage_blocks"])
    for flag in ("batch_size", "learning_rate", "epochs", "seed"):
        override = getattr(args, flag, None)
        if override is not None:
            values[flag] = override
    if getattr(args, "window", None) is not None:
        values["window_policy"] = _parse_window(args.window)
    return TrainConfig(**values)


def _synth_config(sections, args) -> SynthConfig:
    values = dict(sections["synth"])
    if "views" in values:
        values["views"] = tuple(int(v) for v in values["views"].split(","))
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    return SynthConfig(**values)


def _cmd_synth(args) -> int:
    sections = _read_config(args.config)
    config = _synth_config(sections, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sequences, manifest = generate_dataset(config)
    save_sequences(sequences, out / "keypoints.jsonl")
    with open(out / "manifest.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(manifest_to_tsv(manifest))
    print(f"wrote {len(sequences)} sequences to {out / 'keypoints.jsonl'}")
    return 0


def _cmd_cycles(args) -> int:
    sequences = load_sequences(args.data)
    print("sequence_id\thalf_cycle\tfull_cycle\ttroughs")
    for seq in sequences:
        normalized = normalize_sequence(seq)
        label = f"{seq.subject_id}/{seq.sequence_id}"
        try:
            waveform = similarity_waveform(normalized, MPII_TOPOLOGY, bins=args.bins)
            estimate = detect_cycle(waveform, smoothing=args.smoothing,
                                    min_separation=args.min_separation)
            troughs = ",".join(str(t) for t in estimate.trough_indices)
            print(f"{label}\t{estimate.half_cycle_frames}\t{estimate.full_cycle_frames}\t{troughs}")
        except (NoPeriodicityError, GaitfuseError):
            print(f"{label}\tNA\tNA\t")
    return 0


def _cmd_featurize(args) -> int:
    sections = _read_config(args.config)
    config = _train_config(sections, args)
    sequences = load_sequences(args.data)
    normalized = [normalize_sequence(s) for s in sequences]
    window = _resolve_window(normalized, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for seq in normalized:
        tensors = {}
        for start in _window_starts(len(seq), window):
            prop, vel, skel = _bundle_arrays(seq, start, window)
            tensors[f"w{start:04d}.proportion"] = prop
            tensors[f"w{start:04d}.velocity"] = vel
            tensors[f"w{start:04d}.skeletal"] = skel
        path = out / f"{seq.subject_id}__{seq.sequence_id}.gmff"
        container.save_tensors(tensors, path)
        count += len(tensors) // 3
    print(f"wrote {count} windows (window={window}) to {out}")
    return 0


def _cmd_train(args) -> int:
    sections = _read_config(args.config)
    config = _train_config(sections, args)
    dataset = load_sequences(args.data)
    branch_mask = frozenset(args.branches.split(",")) if args.branches else None
    ckpt = train(dataset, config, branch_mask=branch_mask)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, out)
    history_path = Path(str(out) + ".loss.tsv")
    with open(history_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch\tloss\n")
        for epoch, loss in enumerate(ckpt.loss_history):
            fh.write(f"{epoch}\t{loss!r}\n")
    print(f"checkpoint: {out} (final loss {ckpt.train_loss:.6f})")
    return 0


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    if args.gallery and args.probe:
        gallery = load_sequences(args.gallery)
        probe = load_sequences(args.probe)
    elif args.data:
        gallery, probe = split_gallery_probe(load_sequences(args.data))
    else:
        raise _UsageError("eval requires either --gallery and --probe, or --data")
    report = rank1_eval(ckpt, gallery, probe, threads=args.threads)
    sys.stdout.write(format_report(report))
    return 0


def _cmd_ablate(args) -> int:
    sections = _read_config(args.config)
    config = _train_config(sections, args)
    dataset = load_sequences(args.data)
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    except ValueError:
        raise _UsageError(f"--seeds must be comma-separated integers, got {args.seeds!r}") from None
    results = ablation_suite(dataset, config, seeds)
    sys.stdout.write(format_ablation(results))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="gaitfuse", description=__doc__)
    parser.add_argument("--version", action="version", version=_VERSION_TEXT)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic walker dataset")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("cycles", help="per-sequence gait cycle table")
    p.add_argument("--data", required=True)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--smoothing", type=int, default=3)
    p.add_argument("--min-separation", dest="min_separation", type=int, default=6)
    p.set_defaults(func=_cmd_cycles)

    p = sub.add_parser("featurize", help="emit branch tensors per window")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--window", default=None)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train the fusion network")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--window", default=None)
    p.add_argument("--branches", default=None,
                   help="comma-separated subset of proportion,velocity,skeletal")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="rank-1 gallery/probe evaluation")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--gallery", default=None)
    p.add_argument("--probe", default=None)
    p.add_argument("--data", default=None,
                   help="dataset to split by the first-4-NM enrollment protocol")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="branch-combination ablation table")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seeds", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--window", default=None)
    p.set_defaults(func=_cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (GaitfuseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
