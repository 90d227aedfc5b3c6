"""Canonical 32-joint skeleton data model, label taxonomy, and capture I/O.

Coordinates are millimeters in the camera frame. A capture file is
line-delimited JSON (one object per frame) or the equivalent compact
binary form with magic header ``DYAD0001``; both store two tracked
bodies per frame in a stable subject order.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import CaptureError, LabelError, SampleValidationError

FRAMES_PER_SAMPLE = 91
FPS = 30
FRAME_DT = 1.0 / FPS
NUM_JOINTS = 32

CAPTURE_MAGIC = b"DYAD0001"

# Fraction of NONE-confidence joints on either body above which a frame
# counts as occluded (in addition to any frame with fewer than 2 bodies).
DEFAULT_OCCLUSION_CONF_THRESHOLD = 0.25


class JointId(IntEnum):
    """The 32 tracked joints, indexed per the depth-tracker body hierarchy.

    PELVIS is the root (index 0) and SPINE_NAVAL is index 1; the rest of
    the ordering is the documented convention used by every array in this
    package (joint-major feature layouts, descriptor columns, graph nodes).
    """

    PELVIS = 0
    SPINE_NAVAL = 1
    SPINE_CHEST = 2
    NECK = 3
    CLAVICLE_LEFT = 4
    SHOULDER_LEFT = 5
    ELBOW_LEFT = 6
    WRIST_LEFT = 7
    HAND_LEFT = 8
    HANDTIP_LEFT = 9
    THUMB_LEFT = 10
    CLAVICLE_RIGHT = 11
    SHOULDER_RIGHT = 12
    ELBOW_RIGHT = 13
    WRIST_RIGHT = 14
    HAND_RIGHT = 15
    HANDTIP_RIGHT = 16
    THUMB_RIGHT = 17
    HIP_LEFT = 18
    KNEE_LEFT = 19
    ANKLE_LEFT = 20
    FOOT_LEFT = 21
    HIP_RIGHT = 22
    KNEE_RIGHT = 23
    ANKLE_RIGHT = 24
    FOOT_RIGHT = 25
    HEAD = 26
    NOSE = 27
    EYE_LEFT = 28
    EAR_LEFT = 29
    EYE_RIGHT = 30
    EAR_RIGHT = 31


# Parent of each joint in the body hierarchy; PELVIS is the root.
JOINT_PARENT: dict[JointId, JointId | None] = {
    JointId.PELVIS: None,
    JointId.SPINE_NAVAL: JointId.PELVIS,
    JointId.SPINE_CHEST: JointId.SPINE_NAVAL,
    JointId.NECK: JointId.SPINE_CHEST,
    JointId.CLAVICLE_LEFT: JointId.SPINE_CHEST,
    JointId.SHOULDER_LEFT: JointId.CLAVICLE_LEFT,
    JointId.ELBOW_LEFT: JointId.SHOULDER_LEFT,
    JointId.WRIST_LEFT: JointId.ELBOW_LEFT,
    JointId.HAND_LEFT: JointId.WRIST_LEFT,
    JointId.HANDTIP_LEFT: JointId.HAND_LEFT,
    JointId.THUMB_LEFT: JointId.WRIST_LEFT,
    JointId.CLAVICLE_RIGHT: JointId.SPINE_CHEST,
    JointId.SHOULDER_RIGHT: JointId.CLAVICLE_RIGHT,
    JointId.ELBOW_RIGHT: JointId.SHOULDER_RIGHT,
    JointId.WRIST_RIGHT: JointId.ELBOW_RIGHT,
    JointId.HAND_RIGHT: JointId.WRIST_RIGHT,
    JointId.HANDTIP_RIGHT: JointId.HAND_RIGHT,
    JointId.THUMB_RIGHT: JointId.WRIST_RIGHT,
    JointId.HIP_LEFT: JointId.PELVIS,
    JointId.KNEE_LEFT: JointId.HIP_LEFT,
    JointId.ANKLE_LEFT: JointId.KNEE_LEFT,
    JointId.FOOT_LEFT: JointId.ANKLE_LEFT,
    JointId.HIP_RIGHT: JointId.PELVIS,
    JointId.KNEE_RIGHT: JointId.HIP_RIGHT,
    JointId.ANKLE_RIGHT: JointId.KNEE_RIGHT,
    JointId.FOOT_RIGHT: JointId.ANKLE_RIGHT,
    JointId.HEAD: JointId.NECK,
    JointId.NOSE: JointId.HEAD,
    JointId.EYE_LEFT: JointId.HEAD,
    JointId.EAR_LEFT: JointId.HEAD,
    JointId.EYE_RIGHT: JointId.HEAD,
    JointId.EAR_RIGHT: JointId.HEAD,
}

# The 31 parent->child bone pairs, in child-index order.
BONES: tuple[tuple[JointId, JointId], ...] = tuple(
    (parent, child) for child, parent in JOINT_PARENT.items() if parent is not None
)


class ConfidenceLevel(IntEnum):
    """Tracker reliability ordinal for one joint."""

    NONE = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3


class InteractionCategory(IntEnum):
    """Functional communication categories the 12 classes fall into."""

    EMBLEM = 0
    ILLUSTRATOR = 1
    AFFECT_DISPLAY = 2
    REGULATOR = 3
    ADAPTOR = 4


class InteractionLabel(IntEnum):
    """The 12 dyadic interaction classes, with a fixed class -> category map."""

    WAVING_IN = 0
    THUMBS_UP = 1
    WAVING = 2
    POINTING = 3
    SHOWING_MEASUREMENTS = 4
    HUGGING = 5
    LAUGHING = 6
    ARM_CROSSING = 7
    NODDING = 8
    WRITING_CIRCLES = 9
    HOLDING_PALMS_OUT = 10
    TWIRLING_HAIR = 11

    @property
    def class_id(self) -> int:
        return int(self)

    @property
    def label_name(self) -> str:
        return self.name.lower()

    @property
    def category(self) -> InteractionCategory:
        return _LABEL_CATEGORY[self]

    @classmethod
    def from_name(cls, name: str) -> "InteractionLabel":
        try:
            return cls[name.upper()]
        except KeyError:
            raise LabelError(f"unknown interaction label {name!r}") from None


_LABEL_CATEGORY = {
    InteractionLabel.WAVING_IN: InteractionCategory.EMBLEM,
    InteractionLabel.THUMBS_UP: InteractionCategory.EMBLEM,
    InteractionLabel.WAVING: InteractionCategory.EMBLEM,
    InteractionLabel.POINTING: InteractionCategory.ILLUSTRATOR,
    InteractionLabel.SHOWING_MEASUREMENTS: InteractionCategory.ILLUSTRATOR,
    InteractionLabel.HUGGING: InteractionCategory.AFFECT_DISPLAY,
    InteractionLabel.LAUGHING: InteractionCategory.AFFECT_DISPLAY,
    InteractionLabel.ARM_CROSSING: InteractionCategory.AFFECT_DISPLAY,
    InteractionLabel.NODDING: InteractionCategory.REGULATOR,
    InteractionLabel.WRITING_CIRCLES: InteractionCategory.REGULATOR,
    InteractionLabel.HOLDING_PALMS_OUT: InteractionCategory.REGULATOR,
    InteractionLabel.TWIRLING_HAIR: InteractionCategory.ADAPTOR,
}

NUM_CLASSES = len(InteractionLabel)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BodyPose:
    """One tracked body: 32 joint positions (mm) and per-joint confidences."""

    joints: np.ndarray  # (32, 3) float64
    confidences: np.ndarray  # (32,) uint8, values 0..3

    def __post_init__(self):
        joints = np.ascontiguousarray(self.joints, dtype=np.float64)
        conf = np.ascontiguousarray(self.confidences, dtype=np.uint8)
        if joints.shape != (NUM_JOINTS, 3):
            raise ValueError(f"joints must have shape (32, 3), got {joints.shape}")
        if conf.shape != (NUM_JOINTS,):
            raise ValueError(f"confidences must have shape (32,), got {conf.shape}")
        object.__setattr__(self, "joints", _freeze(joints))
        object.__setattr__(self, "confidences", _freeze(conf))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BodyPose):
            return NotImplemented
        return np.array_equal(self.joints, other.joints, equal_nan=True) and np.array_equal(
            self.confidences, other.confidences
        )

    def joint(self, j: JointId) -> np.ndarray:
        return self.joints[int(j)]


@dataclass(frozen=True, eq=False)
class DyadFrame:
    """One frame of a capture: 0, 1 or 2 bodies in stable subject order."""

    frame_index: int
    bodies: tuple[BodyPose, ...]

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        bodies = tuple(self.bodies)
        if len(bodies) > 2:
            raise ValueError(f"at most 2 bodies per frame, got {len(bodies)}")
        object.__setattr__(self, "bodies", bodies)

    @property
    def timestamp(self) -> float:
        """Seconds since sample start; exactly frame_index / 30."""
        return self.frame_index * FRAME_DT

    def __eq__(self, other) -> bool:
        if not isinstance(other, DyadFrame):
            return NotImplemented
        return self.frame_index == other.frame_index and self.bodies == other.bodies


@dataclass(frozen=True, eq=False)
class DyadSample:
    """One labeled 91-frame capture of a two-person interaction."""

    frames: tuple[DyadFrame, ...]
    label: InteractionLabel
    sample_id: str
    pair_id: str
    occluded_frames: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "occluded_frames", frozenset(self.occluded_frames))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DyadSample):
            return NotImplemented
        return (
            self.sample_id == other.sample_id
            and self.pair_id == other.pair_id
            and self.label == other.label
            and self.occluded_frames == other.occluded_frames
            and self.frames == other.frames
        )

    def pose_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense views of the sample for vectorized processing.

        Returns ``(coords, conf, present)`` with shapes (T, 2, 32, 3),
        (T, 2, 32) and (T, 2). Missing bodies appear as zero poses with
        NONE confidence and ``present=False``.
        """
        n = len(self.frames)
        coords = np.zeros((n, 2, NUM_JOINTS, 3), dtype=np.float64)
        conf = np.zeros((n, 2, NUM_JOINTS), dtype=np.float64)
        present = np.zeros((n, 2), dtype=bool)
        for i, frame in enumerate(self.frames):
            for m, body in enumerate(frame.bodies):
                coords[i, m] = body.joints
                conf[i, m] = body.confidences
                present[i, m] = True
        return coords, conf, present


def swap_subjects(sample: DyadSample) -> DyadSample:
    """Reverse the subject order in every frame.

    Label and occluded frames are untouched; applying the swap twice
    returns an equal sample.
    """
    frames = tuple(
        DyadFrame(f.frame_index, tuple(reversed(f.bodies))) for f in sample.frames
    )
    return replace(sample, frames=frames)


def derive_occluded_frames(
    frames: tuple[DyadFrame, ...],
    conf_none_threshold: float = DEFAULT_OCCLUSION_CONF_THRESHOLD,
) -> frozenset[int]:
    """Frames with fewer than 2 bodies, or where more than
    ``conf_none_threshold`` of either body's joints have NONE confidence."""
    occluded = set()
    for i, frame in enumerate(frames):
        if len(frame.bodies) < 2:
            occluded.add(i)
            continue
        for body in frame.bodies:
            none_frac = float(np.mean(body.confidences == ConfidenceLevel.NONE))
            if none_frac > conf_none_threshold:
                occluded.add(i)
                break
    return frozenset(occluded)


def validate_sample(sample: DyadSample) -> list[str]:
    """Check every structural invariant; returns one message per violation.

    An empty list means the sample is well formed. Violations are data,
    not errors: a NaN coordinate or an out-of-range occlusion index is
    reported with the offending field and frame index.
    """
    violations: list[str] = []
    n = len(sample.frames)
    if n != FRAMES_PER_SAMPLE:
        violations.append(f"frames: expected {FRAMES_PER_SAMPLE}, got {n}")
    for i, frame in enumerate(sample.frames):
        if frame.frame_index != i:
            violations.append(
                f"frame {i}: frame_index is {frame.frame_index}, expected {i}"
            )
        for m, body in enumerate(frame.bodies):
            bad = ~np.isfinite(body.joints)
            if bad.any():
                j = int(np.argwhere(bad)[0][0])
                violations.append(
                    f"frame {i}: body {m} joint {JointId(j).name}: non-finite coordinate"
                )
            out = (body.confidences > int(ConfidenceLevel.HIGH)).nonzero()[0]
            if out.size:
                violations.append(
                    f"frame {i}: body {m} joint {JointId(int(out[0])).name}: "
                    f"confidence out of range"
                )
    for idx in sorted(sample.occluded_frames):
        if not 0 <= idx < FRAMES_PER_SAMPLE:
            violations.append(f"occluded_frames: index {idx} out of range [0, 91)")
    return violations


# ---------------------------------------------------------------------------
# Capture I/O.  Line-delimited JSON, one object per frame:
#   {"sample_id": ..., "label": ..., "pair_id": ..., "t": ...,
#    "bodies": [{"joints": [[x, y, z, c] * 32]}, ...]}
# or the compact binary form (magic DYAD0001, little-endian, f64).
# ---------------------------------------------------------------------------


def parse_capture(
    path: str | Path,
    conf_none_threshold: float = DEFAULT_OCCLUSION_CONF_THRESHOLD,
) -> list[DyadSample]:
    """Read a capture file (JSONL or binary) into validated samples.

    Occluded frames are derived, not stored: any frame with fewer than
    two bodies, plus the configurable confidence rule. Raises
    CaptureError for malformed records (naming the line number),
    SampleValidationError for samples without exactly 91 frames, and
    LabelError for unknown label strings.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(CAPTURE_MAGIC))
    if head == CAPTURE_MAGIC:
        records = _read_binary_records(path)
    else:
        records = _read_jsonl_records(path)
    return _assemble_samples(records, conf_none_threshold)


def serialize_captures(
    samples: list[DyadSample], path: str | Path, fmt: str = "binary"
) -> None:
    """Write samples to a capture file; ``fmt`` is "binary" or "jsonl".

    The binary form is lossless (64-bit coordinates); parsing it back
    yields samples equal to the input.
    """
    path = Path(path)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(capture_bytes(samples))
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for sample in samples:
                for frame in sample.frames:
                    fh.write(_frame_json_line(sample, frame))
                    fh.write("\n")
    else:
        raise ValueError(f"unknown capture format {fmt!r}")


def capture_bytes(samples: list[DyadSample]) -> bytes:
    """Binary capture encoding of a sample list (magic DYAD0001)."""
    buf = io.BytesIO()
    buf.write(CAPTURE_MAGIC)
    buf.write(struct.pack("<I", len(samples)))
    for sample in samples:
        for text in (sample.sample_id, sample.label.label_name, sample.pair_id):
            raw = text.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
        buf.write(struct.pack("<I", len(sample.frames)))
        for frame in sample.frames:
            buf.write(struct.pack("<IB", frame.frame_index, len(frame.bodies)))
            for body in frame.bodies:
                block = np.empty((NUM_JOINTS, 4), dtype="<f8")
                block[:, :3] = body.joints
                block[:, 3] = body.confidences
                buf.write(block.tobytes())
    return buf.getvalue()


def _frame_json_line(sample: DyadSample, frame: DyadFrame) -> str:
    bodies = []
    for body in frame.bodies:
        joints = [
            [float(x), float(y), float(z), int(c)]
            for (x, y, z), c in zip(body.joints, body.confidences)
        ]
        bodies.append({"joints": joints})
    record = {
        "sample_id": sample.sample_id,
        "label": sample.label.label_name,
        "pair_id": sample.pair_id,
        "t": frame.frame_index,
        "bodies": bodies,
    }
    return json.dumps(record, separators=(",", ":"))


def _read_jsonl_records(path: Path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CaptureError(f"{path.name} line {lineno}: invalid JSON ({exc.msg})")
            records.append(_record_from_json(obj, path.name, lineno))
    return records


def _record_from_json(obj, filename: str, lineno: int):
    where = f"{filename} line {lineno}"
    if not isinstance(obj, dict):
        raise CaptureError(f"{where}: frame record must be an object")
    for key in ("sample_id", "label", "pair_id", "t", "bodies"):
        if key not in obj:
            raise CaptureError(f"{where}: missing field {key!r}")
    t = obj["t"]
    if not isinstance(t, int) or t < 0:
        raise CaptureError(f"{where}: 't' must be a non-negative integer")
    bodies = []
    if not isinstance(obj["bodies"], list) or len(obj["bodies"]) > 2:
        raise CaptureError(f"{where}: 'bodies' must be a list of at most 2 entries")
    for b, body in enumerate(obj["bodies"]):
        joints = body.get("joints") if isinstance(body, dict) else None
        if joints is None or len(joints) != NUM_JOINTS:
            raise CaptureError(f"{where}: body {b} must carry exactly 32 joints")
        arr = np.asarray(joints, dtype=np.float64)
        if arr.shape != (NUM_JOINTS, 4):
            raise CaptureError(f"{where}: body {b} joints must be [x, y, z, c] rows")
        conf = arr[:, 3]
        if not np.isin(conf, (0.0, 1.0, 2.0, 3.0)).all():
            raise CaptureError(f"{where}: body {b} confidence outside {{0,1,2,3}}")
        bodies.append(BodyPose(arr[:, :3], conf.astype(np.uint8)))
    label = InteractionLabel.from_name(str(obj["label"]))
    return (str(obj["sample_id"]), label, str(obj["pair_id"]), t, tuple(bodies))


def _read_binary_records(path: Path):
    data = path.read_bytes()
    view = memoryview(data)
    offset = len(CAPTURE_MAGIC)

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(data):
            raise CaptureError(f"{path.name}: truncated binary capture")
        chunk = view[offset : offset + n]
        offset += n
        return chunk

    def take_str() -> str:
        (n,) = struct.unpack("<I", take(4))
        return bytes(take(n)).decode("utf-8")

    records = []
    (n_samples,) = struct.unpack("<I", take(4))
    for _ in range(n_samples):
        sample_id = take_str()
        label = InteractionLabel.from_name(take_str())
        pair_id = take_str()
        (n_frames,) = struct.unpack("<I", take(4))
        for _ in range(n_frames):
            t, n_bodies = struct.unpack("<IB", take(5))
            if n_bodies > 2:
                raise CaptureError(f"{path.name}: frame {t} carries {n_bodies} bodies")
            bodies = []
            for _ in range(n_bodies):
                block = np.frombuffer(take(NUM_JOINTS * 4 * 8), dtype="<f8")
                block = block.reshape(NUM_JOINTS, 4)
                bodies.append(BodyPose(block[:, :3], block[:, 3].astype(np.uint8)))
            records.append((sample_id, label, pair_id, t, tuple(bodies)))
    if offset != len(data):
        raise CaptureError(f"{path.name}: trailing bytes after last sample")
    return records


def _assemble_samples(records, conf_none_threshold: float) -> list[DyadSample]:
    grouped: dict[str, list] = {}
    meta: dict[str, tuple] = {}
    for sample_id, label, pair_id, t, bodies in records:
        grouped.setdefault(sample_id, []).append((t, bodies))
        prev = meta.setdefault(sample_id, (label, pair_id))
        if prev != (label, pair_id):
            raise CaptureError(
                f"sample {sample_id!r}: inconsistent label/pair across frames"
            )
    samples = []
    for sample_id, entries in grouped.items():
        entries.sort(key=lambda e: e[0])
        if len(entries) != FRAMES_PER_SAMPLE:
            raise SampleValidationError(
                f"sample {sample_id!r}: expected 91 frames, got {len(entries)}"
            )
        if [t for t, _ in entries] != list(range(FRAMES_PER_SAMPLE)):
            raise SampleValidationError(
                f"sample {sample_id!r}: frame indices must be exactly 0..90"
            )
        label, pair_id = meta[sample_id]
        frames = tuple(DyadFrame(t, bodies) for t, bodies in entries)
        samples.append(
            DyadSample(
                frames=frames,
                label=label,
                sample_id=sample_id,
                pair_id=pair_id,
                occluded_frames=derive_occluded_frames(frames, conf_none_threshold),
            )
        )
    return samples


# ---------------------------------------------------------------------------
# Dataset manifest: sample inventory with labels and split assignment.
# ---------------------------------------------------------------------------


def save_manifest(manifest: dict, path: str | Path) -> None:
    """Write a manifest deterministically (sorted keys, fixed separators)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, separators=(",", ": "), indent=1)
        fh.write("\n")


def load_manifest(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
