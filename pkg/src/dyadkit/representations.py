"""Model-input encodings of a feature matrix.

Two derived forms: a 91x157x3 descriptor image for convolutional models
(a lossless repacking of the 467 feature columns into an image-like grid)
and a spatio-temporal interaction graph for graph-convolutional models
(joints as nodes; natural bone, temporal and inter-body edges). Recurrent
and attention models consume the raw feature matrix directly.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import CaptureError, LayoutError, SampleValidationError
from .features import (
    ANGLE_COLS,
    ANGLE_TRIPLES,
    COORD_COLS,
    FEATURE_COLS,
    INTER_DISTANCE_COL,
    NUM_ANGLES,
    NUM_DISTANCES,
    SUBJECT_COLS,
    VEL_COLS,
    FeatureMatrix,
)
from .skeleton import (
    BONES,
    FRAMES_PER_SAMPLE,
    NUM_JOINTS,
    DyadSample,
    JointId,
)

IMAGE_ROWS = FRAMES_PER_SAMPLE  # 91
IMAGE_COLS = 157
IMAGE_CHANNELS = 3
SUBJECT_IMAGE_COLS = 78

IMAGE_MAGIC = b"DIMG0001"
GRAPH_MAGIC = b"GRPH0001"

NUM_BODIES = 2
GRAPH_NODE_FEATURES = 9  # x, y, z, vx, vy, vz, angle, angular velocity, confidence
NODES_PER_FRAME = NUM_BODIES * NUM_JOINTS  # 64
NUM_NODES = FRAMES_PER_SAMPLE * NODES_PER_FRAME  # 5824
NUM_NATURAL_EDGES = len(BONES) * NUM_BODIES * FRAMES_PER_SAMPLE  # 5642
NUM_TEMPORAL_EDGES = NODES_PER_FRAME * (FRAMES_PER_SAMPLE - 1)  # 5760
NUM_INTERBODY_EDGES = FRAMES_PER_SAMPLE  # 91


def _image_feature_map() -> np.ndarray:
    """Feature-column index for every (column, channel) image slot, -1 for
    the zero-padding slots."""
    table = np.full((IMAGE_COLS, IMAGE_CHANNELS), -1, dtype=np.intp)
    for m in range(NUM_BODIES):
        col = m * SUBJECT_IMAGE_COLS
        feat = m * SUBJECT_COLS
        for j in range(NUM_JOINTS):  # joint coordinates, channels x/y/z
            table[col + j] = [feat + 3 * j, feat + 3 * j + 1, feat + 3 * j + 2]
        col += NUM_JOINTS
        feat += COORD_COLS
        for j in range(NUM_JOINTS):  # velocities
            table[col + j] = [feat + 3 * j, feat + 3 * j + 1, feat + 3 * j + 2]
        col += NUM_JOINTS
        feat += VEL_COLS
        for k in range(NUM_ANGLES):  # angle sets (theta, omega, confidence)
            table[col + k] = [feat + 3 * k, feat + 3 * k + 1, feat + 3 * k + 2]
        col += NUM_ANGLES
        feat += ANGLE_COLS
        # 5 intra-distances packed into 2 columns; the sixth slot stays zero
        table[col] = [feat, feat + 1, feat + 2]
        table[col + 1, 0] = feat + 3
        table[col + 1, 1] = feat + 4
    table[IMAGE_COLS - 1, 0] = INTER_DISTANCE_COL
    return table


_FEATURE_OF_SLOT = _image_feature_map()
_PAD_SLOTS = np.argwhere(_FEATURE_OF_SLOT < 0)  # (4, 2): [col, channel]
_SLOT_OF_FEATURE = np.empty(FEATURE_COLS, dtype=np.intp)
for _col in range(IMAGE_COLS):
    for _ch in range(IMAGE_CHANNELS):
        _f = _FEATURE_OF_SLOT[_col, _ch]
        if _f >= 0:
            _SLOT_OF_FEATURE[_f] = _col * IMAGE_CHANNELS + _ch
del _col, _ch, _f


@dataclass(frozen=True, eq=False)
class DescriptorImage:
    """A 91x157x3 image-like tensor holding one sample's features."""

    values: np.ndarray  # (91, 157, 3) float32

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.shape != (IMAGE_ROWS, IMAGE_COLS, IMAGE_CHANNELS):
            raise ValueError(f"descriptor image must be 91x157x3, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DescriptorImage):
            return NotImplemented
        return np.array_equal(self.values, other.values)


def build_descriptor(matrix: FeatureMatrix) -> DescriptorImage:
    """Pack a feature matrix into the descriptor image layout.

    Row = frame; per subject, 32 coordinate columns (channels x/y/z),
    32 velocity columns, 12 angle-set columns (theta/omega/confidence)
    and 2 packed distance columns; the final column carries the
    inter-body distance in its first channel. Unused slots are zero, so
    the mapping is losslessly invertible.
    """
    flat = np.zeros((IMAGE_ROWS, IMAGE_COLS * IMAGE_CHANNELS), dtype=np.float32)
    mapping = _FEATURE_OF_SLOT.reshape(-1)
    used = mapping >= 0
    flat[:, used] = matrix.values[:, mapping[used]]
    return DescriptorImage(flat.reshape(IMAGE_ROWS, IMAGE_COLS, IMAGE_CHANNELS))


def decode_descriptor(
    image: DescriptorImage,
    occluded_frames: set[int] | frozenset[int] = frozenset(),
) -> FeatureMatrix:
    """Exact inverse of :func:`build_descriptor`.

    Raises LayoutError if any padding slot is nonzero, which signals a
    corrupted image rather than a recoverable value.
    """
    pads = image.values[:, _PAD_SLOTS[:, 0], _PAD_SLOTS[:, 1]]
    if np.any(pads != 0.0):
        row, k = np.argwhere(pads != 0.0)[0]
        col, ch = _PAD_SLOTS[k]
        raise LayoutError(
            f"padding slot (row {row}, col {col}, channel {ch}) is nonzero"
        )
    flat = image.values.reshape(IMAGE_ROWS, IMAGE_COLS * IMAGE_CHANNELS)
    return FeatureMatrix(flat[:, _SLOT_OF_FEATURE], frozenset(occluded_frames))


class EdgeType(IntEnum):
    NATURAL = 0  # parent-child bone within one body, one frame
    TEMPORAL = 1  # same joint in adjacent frames
    INTERBODY = 2  # SPINE_NAVAL of body 1 to SPINE_NAVAL of body 2, one frame


@dataclass(frozen=True, eq=False)
class InteractionGraph:
    """Joints-as-nodes graph over a whole sample.

    Node ``(t, m, joint)`` has id ``t*64 + m*32 + joint`` and a 9-value
    feature vector (position, velocity, and the angle set when the joint
    is an angle apex, zeros otherwise). Edge attributes are bone length,
    joint displacement magnitude, and inter-body distance (all mm); edges
    touching an occluded frame have zero attributes, but the topology
    never changes.
    """

    node_features: np.ndarray  # (91, 2, 32, 9) float32
    edges: dict  # EdgeType -> structured array (src, dst, attr)

    def __post_init__(self):
        values = np.ascontiguousarray(self.node_features, dtype=np.float32)
        expect = (FRAMES_PER_SAMPLE, NUM_BODIES, NUM_JOINTS, GRAPH_NODE_FEATURES)
        if values.shape != expect:
            raise ValueError(f"node features must be {expect}, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "node_features", values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionGraph):
            return NotImplemented
        if not np.array_equal(self.node_features, other.node_features):
            return False
        return all(
            np.array_equal(self.edges[t], other.edges[t]) for t in EdgeType
        )

    @property
    def num_nodes(self) -> int:
        return NUM_NODES

    def edge_counts(self) -> dict[EdgeType, int]:
        return {t: len(self.edges[t]) for t in EdgeType}


EDGE_DTYPE = np.dtype([("src", "<u4"), ("dst", "<u4"), ("attr", "<f4")])


def node_id(t: int, m: int, joint: int) -> int:
    return t * NODES_PER_FRAME + m * NUM_JOINTS + joint

# Angle index whose apex is each joint, or -1.
_APEX_ANGLE = np.full(NUM_JOINTS, -1, dtype=np.intp)
for _k, (_, _apex, _) in enumerate(ANGLE_TRIPLES.values()):
    _APEX_ANGLE[int(_apex)] = _k
del _k, _apex


def build_graph(sample: DyadSample, matrix: FeatureMatrix) -> InteractionGraph:
    """Build the interaction graph for a sample from its feature matrix."""
    if matrix.occluded_frames != sample.occluded_frames:
        raise SampleValidationError(
            f"sample {sample.sample_id!r}: feature matrix occlusion bookkeeping "
            "does not match the sample"
        )
    return graph_from_features(matrix)


def graph_from_features(matrix: FeatureMatrix) -> InteractionGraph:
    """Graph construction needing only the feature matrix (plus its
    occlusion set); topology is fixed by the joint hierarchy."""
    T, M, V = FRAMES_PER_SAMPLE, NUM_BODIES, NUM_JOINTS
    coords = np.empty((T, M, V, 3), dtype=np.float32)
    vels = np.empty((T, M, V, 3), dtype=np.float32)
    angle_sets = np.zeros((T, M, V, 3), dtype=np.float32)
    for m in range(M):
        base = m * SUBJECT_COLS
        coords[:, m] = matrix.values[:, base : base + COORD_COLS].reshape(T, V, 3)
        vels[:, m] = matrix.values[
            :, base + COORD_COLS : base + COORD_COLS + VEL_COLS
        ].reshape(T, V, 3)
        sets = matrix.values[
            :, base + COORD_COLS + VEL_COLS : base + COORD_COLS + VEL_COLS + ANGLE_COLS
        ].reshape(T, NUM_ANGLES, 3)
        apex_joints = _APEX_ANGLE >= 0
        angle_sets[:, m, apex_joints] = sets[:, _APEX_ANGLE[apex_joints]]

    node_features = np.concatenate([coords, vels, angle_sets], axis=-1)

    occluded = np.zeros(T, dtype=bool)
    occluded[sorted(matrix.occluded_frames)] = True

    bones = np.array([[int(p), int(c)] for p, c in BONES], dtype=np.intp)
    frames = np.arange(T)

    # Natural edges: per frame, per body, the 31 bones in child order.
    nat = np.empty(NUM_NATURAL_EDGES, dtype=EDGE_DTYPE)
    t_idx = np.repeat(frames, M * len(bones))
    m_idx = np.tile(np.repeat(np.arange(M), len(bones)), T)
    b_idx = np.tile(np.arange(len(bones)), T * M)
    nat["src"] = t_idx * NODES_PER_FRAME + m_idx * V + bones[b_idx, 0]
    nat["dst"] = t_idx * NODES_PER_FRAME + m_idx * V + bones[b_idx, 1]
    bone_vec = (
        coords[t_idx, m_idx, bones[b_idx, 1]] - coords[t_idx, m_idx, bones[b_idx, 0]]
    )
    nat["attr"] = np.where(
        occluded[t_idx], 0.0, np.linalg.norm(bone_vec, axis=-1)
    )

    # Temporal edges: same joint, frame t -> t+1, attribute = displacement.
    tmp = np.empty(NUM_TEMPORAL_EDGES, dtype=EDGE_DTYPE)
    t_idx = np.repeat(frames[:-1], NODES_PER_FRAME)
    mj_idx = np.tile(np.arange(NODES_PER_FRAME), T - 1)
    tmp["src"] = t_idx * NODES_PER_FRAME + mj_idx
    tmp["dst"] = (t_idx + 1) * NODES_PER_FRAME + mj_idx
    flat_coords = coords.reshape(T, NODES_PER_FRAME, 3)
    disp = flat_coords[t_idx + 1, mj_idx] - flat_coords[t_idx, mj_idx]
    tmp["attr"] = np.where(
        occluded[t_idx] | occluded[t_idx + 1], 0.0, np.linalg.norm(disp, axis=-1)
    )

    # Inter-body edges: the two SPINE_NAVAL joints, once per frame.
    inter = np.empty(NUM_INTERBODY_EDGES, dtype=EDGE_DTYPE)
    navel = int(JointId.SPINE_NAVAL)
    inter["src"] = frames * NODES_PER_FRAME + navel
    inter["dst"] = frames * NODES_PER_FRAME + V + navel
    inter["attr"] = matrix.values[:, INTER_DISTANCE_COL]

    return InteractionGraph(
        node_features=node_features,
        edges={EdgeType.NATURAL: nat, EdgeType.TEMPORAL: tmp, EdgeType.INTERBODY: inter},
    )


def node_feature_array(graph: InteractionGraph) -> np.ndarray:
    """Node features as a (channels=9, frames=91, nodes=64) array, the
    layout graph-convolutional models consume."""
    flat = graph.node_features.reshape(
        FRAMES_PER_SAMPLE, NODES_PER_FRAME, GRAPH_NODE_FEATURES
    )
    return np.ascontiguousarray(flat.transpose(2, 0, 1))


def spatial_adjacency() -> np.ndarray:
    """Symmetrically normalized 64x64 adjacency over one frame's nodes:
    natural bones of both bodies, the inter-body link, and self-loops."""
    A = np.zeros((NODES_PER_FRAME, NODES_PER_FRAME), dtype=np.float64)
    for m in range(NUM_BODIES):
        off = m * NUM_JOINTS
        for parent, child in BONES:
            A[off + int(parent), off + int(child)] = 1.0
            A[off + int(child), off + int(parent)] = 1.0
    navel = int(JointId.SPINE_NAVAL)
    A[navel, NUM_JOINTS + navel] = 1.0
    A[NUM_JOINTS + navel, navel] = 1.0
    A += np.eye(NODES_PER_FRAME)
    d = 1.0 / np.sqrt(A.sum(axis=1))
    return A * d[:, None] * d[None, :]


# ---------------------------------------------------------------------------
# Files: DIMG0001 (dims + f32 row-major) and GRPH0001 (node table followed
# by one typed edge section per edge kind), both little-endian.
# ---------------------------------------------------------------------------


def save_descriptor(image: DescriptorImage, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC)
        fh.write(struct.pack("<III", IMAGE_ROWS, IMAGE_COLS, IMAGE_CHANNELS))
        fh.write(np.ascontiguousarray(image.values, dtype="<f4").tobytes())


def load_descriptor(path: str | Path) -> DescriptorImage:
    path = Path(path)
    data = path.read_bytes()
    if data[: len(IMAGE_MAGIC)] != IMAGE_MAGIC:
        raise CaptureError(f"{path.name}: not a descriptor image file")
    rows, cols, chans = struct.unpack_from("<III", data, len(IMAGE_MAGIC))
    if (rows, cols, chans) != (IMAGE_ROWS, IMAGE_COLS, IMAGE_CHANNELS):
        raise CaptureError(f"{path.name}: unexpected dimensions {rows}x{cols}x{chans}")
    values = np.frombuffer(data, dtype="<f4", offset=len(IMAGE_MAGIC) + 12)
    return DescriptorImage(values.reshape(rows, cols, chans))


def save_graph(graph: InteractionGraph, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(GRAPH_MAGIC)
        fh.write(
            struct.pack(
                "<IIII", FRAMES_PER_SAMPLE, NUM_BODIES, NUM_JOINTS, GRAPH_NODE_FEATURES
            )
        )
        fh.write(np.ascontiguousarray(graph.node_features, dtype="<f4").tobytes())
        for edge_type in EdgeType:
            table = graph.edges[edge_type]
            fh.write(struct.pack("<BI", int(edge_type), len(table)))
            fh.write(np.ascontiguousarray(table, dtype=EDGE_DTYPE).tobytes())


def load_graph(path: str | Path) -> InteractionGraph:
    path = Path(path)
    data = path.read_bytes()
    if data[: len(GRAPH_MAGIC)] != GRAPH_MAGIC:
        raise CaptureError(f"{path.name}: not a graph file")
    offset = len(GRAPH_MAGIC)
    T, M, V, F = struct.unpack_from("<IIII", data, offset)
    offset += 16
    if (T, M, V, F) != (FRAMES_PER_SAMPLE, NUM_BODIES, NUM_JOINTS, GRAPH_NODE_FEATURES):
        raise CaptureError(f"{path.name}: unexpected graph dimensions")
    count = T * M * V * F
    node_features = np.frombuffer(data, dtype="<f4", offset=offset, count=count)
    node_features = node_features.reshape(T, M, V, F)
    offset += count * 4
    edges = {}
    for _ in range(len(EdgeType)):
        code, n = struct.unpack_from("<BI", data, offset)
        offset += 5
        table = np.frombuffer(data, dtype=EDGE_DTYPE, offset=offset, count=n)
        offset += n * EDGE_DTYPE.itemsize
        edges[EdgeType(code)] = table
    if offset != len(data):
        raise CaptureError(f"{path.name}: trailing bytes after edge tables")
    return InteractionGraph(node_features=node_features, edges=edges)


def export_png(image: DescriptorImage, path: str | Path) -> None:
    """8-bit PNG preview with per-channel min-max scaling; the scaling
    constants go to a JSON sidecar so the export stays interpretable.
    Requires Pillow."""
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover - depends on extras
        raise RuntimeError("PNG export needs Pillow (install dyadkit[image])")
    path = Path(path)
    values = image.values
    lo = values.min(axis=(0, 1))
    hi = values.max(axis=(0, 1))
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = np.clip((values - lo) / span * 255.0, 0, 255).astype(np.uint8)
    Image.fromarray(scaled, mode="RGB").save(path)
    sidecar = {
        "channel_min": [float(x) for x in lo],
        "channel_max": [float(x) for x in hi],
    }
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)
        fh.write("\n")
