"""Per-frame feature extraction for dyadic skeleton samples.

Each 91-frame sample becomes a 91x467 matrix. Per subject (233 columns):
96 recentered joint coordinates, 96 joint velocities (mm/s), 12 sets of
(angle rad, angular velocity rad/s, confidence), and 5 intra-body
distances (mm). Column 466 holds the inter-body distance between the two
SPINE_NAVAL joints, computed from raw (pre-recentering) coordinates.

Velocities, angles and intra-distances are computed from recentered
coordinates; the first frame has zero velocities by convention. Rows for
occluded frames are zeroed across all 467 columns.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import CaptureError
from .skeleton import (
    FRAME_DT,
    FRAMES_PER_SAMPLE,
    NUM_JOINTS,
    BodyPose,
    ConfidenceLevel,
    DyadSample,
    JointId,
)

J = JointId

# Joints with norm below this (mm) around an angle apex count as collapsed;
# the angle degrades to 0 with NONE confidence instead of raising.
DEGENERATE_NORM_MM = 1e-6


class AngleId(IntEnum):
    """The 12 tracked joint angles, each subtended at an apex joint."""

    ELBOW_RIGHT = 0
    ELBOW_LEFT = 1
    SHOULDER_RIGHT = 2
    SHOULDER_LEFT = 3
    WRIST_RIGHT = 4
    NECK = 5
    SPINE_CHEST = 6
    SPINE_NAVAL = 7
    HIP_RIGHT = 8
    HIP_LEFT = 9
    KNEE_RIGHT = 10
    KNEE_LEFT = 11


# (end_a, apex, end_b): the angle is between the rays apex->end_a and
# apex->end_b. Upper-body heavy, since the tracked interactions mostly
# bend arms, spine and neck.
ANGLE_TRIPLES: dict[AngleId, tuple[JointId, JointId, JointId]] = {
    AngleId.ELBOW_RIGHT: (J.WRIST_RIGHT, J.ELBOW_RIGHT, J.SHOULDER_RIGHT),
    AngleId.ELBOW_LEFT: (J.WRIST_LEFT, J.ELBOW_LEFT, J.SHOULDER_LEFT),
    AngleId.SHOULDER_RIGHT: (J.ELBOW_RIGHT, J.SHOULDER_RIGHT, J.SPINE_CHEST),
    AngleId.SHOULDER_LEFT: (J.ELBOW_LEFT, J.SHOULDER_LEFT, J.SPINE_CHEST),
    AngleId.WRIST_RIGHT: (J.HAND_RIGHT, J.WRIST_RIGHT, J.ELBOW_RIGHT),
    AngleId.NECK: (J.HEAD, J.NECK, J.SPINE_CHEST),
    AngleId.SPINE_CHEST: (J.NECK, J.SPINE_CHEST, J.SPINE_NAVAL),
    AngleId.SPINE_NAVAL: (J.SPINE_CHEST, J.SPINE_NAVAL, J.PELVIS),
    AngleId.HIP_RIGHT: (J.KNEE_RIGHT, J.HIP_RIGHT, J.PELVIS),
    AngleId.HIP_LEFT: (J.KNEE_LEFT, J.HIP_LEFT, J.PELVIS),
    AngleId.KNEE_RIGHT: (J.ANKLE_RIGHT, J.KNEE_RIGHT, J.HIP_RIGHT),
    AngleId.KNEE_LEFT: (J.ANKLE_LEFT, J.KNEE_LEFT, J.HIP_LEFT),
}

NUM_ANGLES = len(AngleId)


class DistanceId(IntEnum):
    """The 5 tracked intra-body joint-pair distances."""

    WRIST_TO_WRIST = 0
    WRIST_RIGHT_TO_HEAD = 1
    WRIST_LEFT_TO_HEAD = 2
    WRIST_RIGHT_TO_PELVIS = 3
    WRIST_LEFT_TO_PELVIS = 4


DISTANCE_PAIRS: dict[DistanceId, tuple[JointId, JointId]] = {
    DistanceId.WRIST_TO_WRIST: (J.WRIST_LEFT, J.WRIST_RIGHT),
    DistanceId.WRIST_RIGHT_TO_HEAD: (J.WRIST_RIGHT, J.HEAD),
    DistanceId.WRIST_LEFT_TO_HEAD: (J.WRIST_LEFT, J.HEAD),
    DistanceId.WRIST_RIGHT_TO_PELVIS: (J.WRIST_RIGHT, J.PELVIS),
    DistanceId.WRIST_LEFT_TO_PELVIS: (J.WRIST_LEFT, J.PELVIS),
}

NUM_DISTANCES = len(DistanceId)

# Column layout of one feature row.
COORD_COLS = NUM_JOINTS * 3  # 96
VEL_COLS = NUM_JOINTS * 3  # 96
ANGLE_COLS = NUM_ANGLES * 3  # 36 interleaved (theta, omega, confidence) sets
SUBJECT_COLS = COORD_COLS + VEL_COLS + ANGLE_COLS + NUM_DISTANCES  # 233
FEATURE_COLS = 2 * SUBJECT_COLS + 1  # 467
INTER_DISTANCE_COL = FEATURE_COLS - 1  # 466

FEATURE_MAGIC = b"FEAT0001"

_ANGLE_IDX = np.array(
    [[int(a), int(apex), int(b)] for a, apex, b in ANGLE_TRIPLES.values()],
    dtype=np.intp,
)
_DIST_IDX = np.array(
    [[int(a), int(b)] for a, b in DISTANCE_PAIRS.values()], dtype=np.intp
)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """The 91x467 per-sample feature array (32-bit values, row per frame)."""

    values: np.ndarray  # (91, 467) float32
    occluded_frames: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.shape != (FRAMES_PER_SAMPLE, FEATURE_COLS):
            raise ValueError(
                f"feature matrix must be 91x467, got {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "occluded_frames", frozenset(self.occluded_frames))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.occluded_frames == other.occluded_frames
            and np.array_equal(self.values, other.values)
        )

    def subject_block(self, m: int) -> np.ndarray:
        """Columns of subject ``m`` (0 or 1): a (91, 233) view."""
        if m not in (0, 1):
            raise ValueError("subject index must be 0 or 1")
        return self.values[:, m * SUBJECT_COLS : (m + 1) * SUBJECT_COLS]


def recenter_body(pose: BodyPose) -> BodyPose:
    """Translate a pose so its SPINE_NAVAL joint sits at the origin."""
    centered = pose.joints - pose.joints[int(J.SPINE_NAVAL)]
    return BodyPose(centered, pose.confidences)


def joint_velocities(
    prev: BodyPose | None, curr: BodyPose, dt: float = FRAME_DT
) -> np.ndarray:
    """Per-joint velocity vectors in mm/s; zeros when there is no previous frame."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if prev is None:
        return np.zeros((NUM_JOINTS, 3), dtype=np.float64)
    return (curr.joints - prev.joints) / dt


def joint_angle(pose: BodyPose, angle: AngleId) -> tuple[float, ConfidenceLevel]:
    """Angle (radians, in [0, pi]) subtended at the apex joint, plus the
    apex confidence. Collapsed joints (near-zero rays) give (0, NONE)."""
    end_a, apex, end_b = ANGLE_TRIPLES[angle]
    u = pose.joint(end_a) - pose.joint(apex)
    v = pose.joint(end_b) - pose.joint(apex)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < DEGENERATE_NORM_MM or nv < DEGENERATE_NORM_MM:
        return 0.0, ConfidenceLevel.NONE
    cos = float(np.dot(u, v) / (nu * nv))
    theta = float(np.arccos(np.clip(cos, -1.0, 1.0)))
    return theta, ConfidenceLevel(int(pose.confidences[int(apex)]))


def angular_velocity(
    theta_prev: float | None, theta_curr: float, dt: float = FRAME_DT
) -> float:
    """Angle change rate in rad/s; zero when there is no previous frame."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if theta_prev is None:
        return 0.0
    return (theta_curr - theta_prev) / dt


def distances(
    pose1: BodyPose, pose2: BodyPose
) -> tuple[np.ndarray, np.ndarray, float]:
    """Intra-body distances of each pose (5 each) and the inter-body
    SPINE_NAVAL distance, all in mm.

    The inter-body distance must be computed from raw poses; recentered
    poses would pin it to the distance between two origins.
    """
    def intra(pose: BodyPose) -> np.ndarray:
        diffs = pose.joints[_DIST_IDX[:, 0]] - pose.joints[_DIST_IDX[:, 1]]
        return np.linalg.norm(diffs, axis=1)

    inter = float(
        np.linalg.norm(pose1.joint(J.SPINE_NAVAL) - pose2.joint(J.SPINE_NAVAL))
    )
    return intra(pose1), intra(pose2), inter


def extract_features(sample: DyadSample) -> FeatureMatrix:
    """Build the 91x467 feature matrix for one sample.

    Occluded frames contribute zero poses to every computation (so the
    frames around an occlusion window see zeroed neighbors, and subject
    swapping commutes with extraction), and their rows are zeroed exactly
    afterwards.
    """
    if len(sample.frames) != FRAMES_PER_SAMPLE:
        raise ValueError(
            f"sample {sample.sample_id!r} has {len(sample.frames)} frames, expected 91"
        )
    coords, conf, _present = sample.pose_arrays()
    occluded = sorted(sample.occluded_frames)
    coords[occluded] = 0.0
    conf[occluded] = 0.0

    navel = coords[:, :, int(J.SPINE_NAVAL), :]
    centered = coords - navel[:, :, None, :]

    vel = np.zeros_like(centered)
    vel[1:] = (centered[1:] - centered[:-1]) / FRAME_DT

    u = centered[:, :, _ANGLE_IDX[:, 0], :] - centered[:, :, _ANGLE_IDX[:, 1], :]
    v = centered[:, :, _ANGLE_IDX[:, 2], :] - centered[:, :, _ANGLE_IDX[:, 1], :]
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    degenerate = (nu < DEGENERATE_NORM_MM) | (nv < DEGENERATE_NORM_MM)
    denom = np.where(degenerate, 1.0, nu * nv)
    cos = np.clip(np.sum(u * v, axis=-1) / denom, -1.0, 1.0)
    theta = np.where(degenerate, 0.0, np.arccos(cos))

    omega = np.zeros_like(theta)
    omega[1:] = (theta[1:] - theta[:-1]) / FRAME_DT

    angle_conf = np.where(degenerate, 0.0, conf[:, :, _ANGLE_IDX[:, 1]])

    pair_diff = centered[:, :, _DIST_IDX[:, 0], :] - centered[:, :, _DIST_IDX[:, 1], :]
    intra = np.linalg.norm(pair_diff, axis=-1)

    inter = np.linalg.norm(navel[:, 0, :] - navel[:, 1, :], axis=-1)

    n = FRAMES_PER_SAMPLE
    rows = np.empty((n, FEATURE_COLS), dtype=np.float64)
    for m in range(2):
        base = m * SUBJECT_COLS
        rows[:, base : base + COORD_COLS] = centered[:, m].reshape(n, COORD_COLS)
        base += COORD_COLS
        rows[:, base : base + VEL_COLS] = vel[:, m].reshape(n, VEL_COLS)
        base += VEL_COLS
        sets = np.stack([theta[:, m], omega[:, m], angle_conf[:, m]], axis=-1)
        rows[:, base : base + ANGLE_COLS] = sets.reshape(n, ANGLE_COLS)
        base += ANGLE_COLS
        rows[:, base : base + NUM_DISTANCES] = intra[:, m]
    rows[:, INTER_DISTANCE_COL] = inter
    rows[occluded] = 0.0

    return FeatureMatrix(rows.astype(np.float32), sample.occluded_frames)


def zero_occluded(matrix: FeatureMatrix, occluded: set[int]) -> FeatureMatrix:
    """Zero the given rows across all 467 columns; idempotent."""
    occluded = set(occluded)
    for idx in occluded:
        if not 0 <= idx < FRAMES_PER_SAMPLE:
            raise ValueError(f"occluded frame index {idx} out of range [0, 91)")
    values = np.array(matrix.values)
    values[sorted(occluded)] = 0.0
    return FeatureMatrix(values, matrix.occluded_frames | occluded)


def column_labels() -> list[str]:
    """Human-readable names of all 467 columns, for CSV inspection."""
    labels = []
    for m in (1, 2):
        for joint in JointId:
            labels += [f"s{m}_pos_{joint.name}_{c}" for c in "xyz"]
        for joint in JointId:
            labels += [f"s{m}_vel_{joint.name}_{c}" for c in "xyz"]
        for angle in AngleId:
            labels += [
                f"s{m}_angle_{angle.name}",
                f"s{m}_angvel_{angle.name}",
                f"s{m}_conf_{angle.name}",
            ]
        for dist in DistanceId:
            labels.append(f"s{m}_dist_{dist.name}")
    labels.append("inter_body_distance")
    return labels


# ---------------------------------------------------------------------------
# Feature matrix files: magic FEAT0001, u32 rows, u32 cols, f32 row-major.
# ---------------------------------------------------------------------------


def save_feature_matrix(matrix: FeatureMatrix, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", FRAMES_PER_SAMPLE, FEATURE_COLS))
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f4").tobytes())


def load_feature_matrix(
    path: str | Path, occluded_frames: set[int] | frozenset[int] = frozenset()
) -> FeatureMatrix:
    """Read a feature file; occlusion bookkeeping is supplied by the caller
    (it lives in the dataset manifest, not in the feature file)."""
    path = Path(path)
    data = path.read_bytes()
    if data[: len(FEATURE_MAGIC)] != FEATURE_MAGIC:
        raise CaptureError(f"{path.name}: not a feature matrix file")
    rows, cols = struct.unpack_from("<II", data, len(FEATURE_MAGIC))
    if (rows, cols) != (FRAMES_PER_SAMPLE, FEATURE_COLS):
        raise CaptureError(f"{path.name}: unexpected dimensions {rows}x{cols}")
    values = np.frombuffer(
        data, dtype="<f4", offset=len(FEATURE_MAGIC) + 8
    ).reshape(rows, cols)
    return FeatureMatrix(values, frozenset(occluded_frames))


def save_feature_csv(matrix: FeatureMatrix, path: str | Path) -> None:
    header = ",".join(column_labels())
    np.savetxt(path, matrix.values, delimiter=",", header=header, comments="")
