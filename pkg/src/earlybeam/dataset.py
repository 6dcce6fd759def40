"""On-disk dataset layout, loading, validation, and conversion.

Layout (all paths relative to the dataset root):

    splits.json                       {"train": [...], "val": [...], "test": [...]}
    sequences/<seq_id>/
        frames/<index>.pgm            grayscale frame, 8- or 16-bit binary PGM
        annotations/<index>.json      {"keypoints": [{x, y, vehicle_id, kind}, ...]}
        depth/<index>.pgm             optional 16-bit depth, centimeters, 0 = no return
        tags.json                     optional SequenceTags fields (frame indices)

Frame indices come from the zero-padded file stems and must be strictly
increasing.  Frames without an annotation file simply have no keypoints.
Annotation and tag files are written canonically (sorted keys, two-space
indent, trailing newline), so saving a loaded dataset reproduces the same
bytes.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Iterable

import cv2
import numpy as np

from .boxes import VALID_KINDS, Keypoint
from .errors import DataError
from .image import GrayImage, load_depth_pgm, load_pgm, pgm_dimensions, save_pgm
from .metrics import SequenceTags

SPLITS = ("train", "val", "test")
_FRAME_STEM = "{:06d}"


@dataclasses.dataclass(frozen=True)
class FrameRecord:
    """One frame: its image file, ground-truth keypoints, optional depth."""

    index: int
    image_path: Path
    keypoints: tuple[Keypoint, ...] = ()
    depth_path: Path | None = None

    def load_image(self) -> GrayImage:
        return load_pgm(self.image_path)

    def load_depth(self) -> np.ndarray | None:
        return None if self.depth_path is None else load_depth_pgm(self.depth_path)


@dataclasses.dataclass(frozen=True)
class SequenceRecord:
    """An ordered recording with its notable-moment tags."""

    sequence_id: str
    frames: tuple[FrameRecord, ...]
    tags: SequenceTags = SequenceTags()

    def __post_init__(self) -> None:
        indices = [f.index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise DataError(f"sequence {self.sequence_id}: frame indices must strictly increase")
        valid = set(indices)
        for name in ("first_annotation", "human_reaction", "first_direct_sight", "production_detection"):
            v = getattr(self.tags, name)
            if v is not None and v not in valid:
                raise DataError(f"sequence {self.sequence_id}: tag {name}={v} references no frame")


@dataclasses.dataclass(frozen=True)
class Dataset:
    root: Path
    sequences: dict[str, SequenceRecord]
    splits: dict[str, tuple[str, ...]]

    def split_sequences(self, split: str) -> list[SequenceRecord]:
        if split not in self.splits:
            raise DataError(f"unknown split {split!r}; have {sorted(self.splits)}")
        return [self.sequences[sid] for sid in self.splits[split]]


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _keypoint_to_dict(kp: Keypoint) -> dict:
    return {"kind": kp.kind, "vehicle_id": kp.vehicle_id, "x": kp.x, "y": kp.y}


def save_annotations(path: str | Path, keypoints: Iterable[Keypoint]) -> None:
    payload = {"keypoints": [_keypoint_to_dict(k) for k in keypoints]}
    Path(path).write_text(canonical_json(payload))


def load_annotations(path: str | Path) -> tuple[Keypoint, ...]:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict) or not isinstance(raw.get("keypoints"), list):
        raise DataError(f"{path}: expected an object with a 'keypoints' list")
    kps = []
    for i, item in enumerate(raw["keypoints"]):
        try:
            kps.append(
                Keypoint(
                    float(item["x"]),
                    float(item["y"]),
                    int(item.get("vehicle_id", 0)),
                    str(item.get("kind", "direct")),
                )
            )
        except (KeyError, TypeError, ValueError, DataError) as exc:
            raise DataError(f"{path}: keypoint {i}: {exc}") from None
    return tuple(kps)


_TAG_FIELDS = ("first_annotation", "human_reaction", "first_direct_sight", "production_detection")


def save_tags(path: str | Path, tags: SequenceTags) -> None:
    payload = {name: getattr(tags, name) for name in _TAG_FIELDS if getattr(tags, name) is not None}
    Path(path).write_text(canonical_json(payload))


def load_tags(path: str | Path) -> SequenceTags:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    unknown = set(raw) - set(_TAG_FIELDS)
    if unknown:
        raise DataError(f"{path}: unknown tag fields {sorted(unknown)}")
    try:
        return SequenceTags(**{k: int(v) for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _load_sequence(seq_dir: Path) -> SequenceRecord:
    frames_dir = seq_dir / "frames"
    if not frames_dir.is_dir():
        raise DataError(f"{seq_dir}: missing frames/ directory")
    records = []
    for img_path in sorted(frames_dir.glob("*.pgm")):
        try:
            index = int(img_path.stem)
        except ValueError:
            raise DataError(f"{img_path}: frame file name must be a numeric index") from None
        width, height = pgm_dimensions(img_path)
        ann_path = seq_dir / "annotations" / f"{img_path.stem}.json"
        keypoints: tuple[Keypoint, ...] = ()
        if ann_path.exists():
            keypoints = load_annotations(ann_path)
            for kp in keypoints:
                if not (0 <= kp.x <= width - 1 and 0 <= kp.y <= height - 1):
                    raise DataError(
                        f"{ann_path}: keypoint ({kp.x}, {kp.y}) outside the {width}x{height} image"
                    )
        depth_path = seq_dir / "depth" / f"{img_path.stem}.pgm"
        records.append(
            FrameRecord(index, img_path, keypoints, depth_path if depth_path.exists() else None)
        )
    if not records:
        raise DataError(f"{seq_dir}: sequence has no frames")
    tags_path = seq_dir / "tags.json"
    tags = load_tags(tags_path) if tags_path.exists() else SequenceTags()
    return SequenceRecord(seq_dir.name, tuple(records), tags)


def load_dataset(root: str | Path) -> Dataset:
    """Load and validate a dataset tree; errors carry the offending path."""
    root = Path(root)
    manifest = root / "splits.json"
    if not manifest.exists():
        raise DataError(f"{root}: missing split manifest {manifest}")
    try:
        raw_splits = json.loads(manifest.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest}: invalid JSON: {exc}") from None
    missing = [s for s in SPLITS if s not in raw_splits]
    if missing:
        raise DataError(f"{manifest}: missing splits: {', '.join(missing)}")
    splits = {s: tuple(str(x) for x in raw_splits[s]) for s in SPLITS}
    sequences: dict[str, SequenceRecord] = {}
    for split_ids in splits.values():
        for sid in split_ids:
            if sid in sequences:
                continue
            seq_dir = root / "sequences" / sid
            if not seq_dir.is_dir():
                raise DataError(f"{manifest}: split references missing sequence {seq_dir}")
            sequences[sid] = _load_sequence(seq_dir)
    return Dataset(root, sequences, splits)


def save_dataset(dataset: Dataset, root: str | Path | None = None) -> Path:
    """Write manifest, annotations, and tags (canonical form).

    Image and depth files are copied only when writing to a new root;
    in-place saves leave them untouched.
    """
    out_root = Path(root) if root is not None else dataset.root
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "splits.json").write_text(
        canonical_json({s: list(ids) for s, ids in dataset.splits.items()})
    )
    for seq in dataset.sequences.values():
        seq_dir = out_root / "sequences" / seq.sequence_id
        (seq_dir / "annotations").mkdir(parents=True, exist_ok=True)
        for frame in seq.frames:
            stem = _FRAME_STEM.format(frame.index)
            if frame.keypoints or (seq_dir / "annotations" / f"{stem}.json").exists():
                save_annotations(seq_dir / "annotations" / f"{stem}.json", frame.keypoints)
            if out_root != dataset.root:
                frames_dir = seq_dir / "frames"
                frames_dir.mkdir(parents=True, exist_ok=True)
                (frames_dir / f"{stem}.pgm").write_bytes(frame.image_path.read_bytes())
                if frame.depth_path is not None:
                    (seq_dir / "depth").mkdir(parents=True, exist_ok=True)
                    (seq_dir / "depth" / f"{stem}.pgm").write_bytes(frame.depth_path.read_bytes())
        save_tags(seq_dir / "tags.json", seq.tags)
    return out_root


def convert_pvdn(pvdn_root: str | Path, out_root: str | Path, illumination: str = "day") -> Dataset:
    """Best-effort conversion of a PVDN-style tree into this layout.

    Expected source layout, per split s in train/val/test:
        <root>/<illumination>/<s>/images/<sequence>/<frame>.png
        <root>/<illumination>/<s>/labels/keypoints/<frame>.json
    where each label file holds a list of annotation objects with a "pos"
    [x, y] pair (direct sources) or nested instances.  Unreadable or
    unexpected pieces are skipped with a note rather than failing the run,
    since published trees vary slightly between dataset versions.
    """
    pvdn_root = Path(pvdn_root)
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    notes: list[str] = []
    splits: dict[str, list[str]] = {s: [] for s in SPLITS}
    for split in SPLITS:
        images_dir = pvdn_root / illumination / split / "images"
        labels_dir = pvdn_root / illumination / split / "labels" / "keypoints"
        if not images_dir.is_dir():
            notes.append(f"no images for split {split}: {images_dir}")
            continue
        for seq_dir in sorted(p for p in images_dir.iterdir() if p.is_dir()):
            seq_id = f"{illumination}_{split}_{seq_dir.name}"
            frames_out = out_root / "sequences" / seq_id / "frames"
            ann_out = out_root / "sequences" / seq_id / "annotations"
            frames_out.mkdir(parents=True, exist_ok=True)
            ann_out.mkdir(parents=True, exist_ok=True)
            wrote_any = False
            for img_path in sorted(seq_dir.glob("*.png")):
                try:
                    index = int("".join(ch for ch in img_path.stem if ch.isdigit()))
                except ValueError:
                    notes.append(f"skipped unparseable frame name {img_path}")
                    continue
                raw = cv2.imread(str(img_path), cv2.IMREAD_GRAYSCALE)
                if raw is None:
                    notes.append(f"unreadable image {img_path}")
                    continue
                stem = _FRAME_STEM.format(index)
                save_pgm(frames_out / f"{stem}.pgm", GrayImage.from_uint8(raw))
                kps = _pvdn_keypoints(labels_dir / f"{img_path.stem}.json", notes)
                if kps:
                    save_annotations(ann_out / f"{stem}.json", kps)
                wrote_any = True
            if wrote_any:
                splits[split].append(seq_id)
            save_tags(out_root / "sequences" / seq_id / "tags.json", SequenceTags())
    (out_root / "splits.json").write_text(canonical_json(splits))
    if notes:
        (out_root / "conversion_notes.txt").write_text("\n".join(notes) + "\n")
    return load_dataset(out_root)


def _pvdn_keypoints(label_path: Path, notes: list[str]) -> list[Keypoint]:
    if not label_path.exists():
        return []
    try:
        raw = json.loads(label_path.read_text())
    except (OSError, json.JSONDecodeError):
        notes.append(f"unreadable label file {label_path}")
        return []
    items = raw.get("annotations", raw) if isinstance(raw, dict) else raw
    if not isinstance(items, list):
        notes.append(f"unrecognized label structure in {label_path}")
        return []
    kps: list[Keypoint] = []
    for item in items:
        if not isinstance(item, dict):
            continue
        vid = int(item.get("id", item.get("vehicle_id", 0)) or 0)
        pos = item.get("pos")
        if isinstance(pos, (list, tuple)) and len(pos) == 2:
            kind = "direct" if item.get("direct", True) else "indirect"
            if kind not in VALID_KINDS:
                kind = "direct"
            kps.append(Keypoint(float(pos[0]), float(pos[1]), vid, kind))
        for inst in item.get("instances", []) or []:
            ipos = inst.get("pos") if isinstance(inst, dict) else None
            if isinstance(ipos, (list, tuple)) and len(ipos) == 2:
                kind = "direct" if inst.get("direct", True) else "indirect"
                kps.append(Keypoint(float(ipos[0]), float(ipos[1]), vid, kind))
    return kps
