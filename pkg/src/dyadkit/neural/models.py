"""The five benchmarked classifiers and their shared output head.

Every model maps its input form to 12 class probabilities through the
same final stack (32-unit layer, 12-unit layer, softmax). Input forms:

- cnn          descriptor images   (B, frames, 157, 3)
- bilstm       feature matrices    (B, frames, 467)
- convlstm     feature matrices    (B, frames, 467)
- transformer  feature matrices    (B, frames, 467)
- stgcn        graph node arrays   (B, 9, frames, 64)

``frames`` defaults to 91 and may be reduced (gradient checks run on
short truncations). Hyperparameters are deliberately small; everything
lives in ModelSpec so nothing is hard-coded in the architectures.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CaptureError, ShapeError
from ..representations import spatial_adjacency
from . import tensor as T
from .layers import (
    ClassifierHead,
    Conv2d,
    ConvLSTM1d,
    LSTM,
    Linear,
    TransformerBlock,
    sinusoidal_encoding,
)
from .tensor import Tensor

NUM_CLASSES = 12
FEATURE_DIM = 467
IMAGE_DIMS = (157, 3)
GRAPH_DIMS = (9, 64)

MODEL_KINDS = ("cnn", "bilstm", "convlstm", "stgcn", "transformer")

INPUT_FORMS = {
    "cnn": "descriptor_image",
    "bilstm": "feature_matrix",
    "convlstm": "feature_matrix",
    "stgcn": "interaction_graph",
    "transformer": "feature_matrix",
}

DEFAULT_HYPERPARAMS: dict[str, dict] = {
    "cnn": {"channels": [16, 32], "kernel": 3, "pool": 2},
    "bilstm": {"hidden": 64},
    "convlstm": {"hidden_channels": 16, "kernel": 5},
    "stgcn": {"channels": [16, 32], "temporal_kernel": 9},
    "transformer": {"d_model": 64, "heads": 4, "layers": 2, "ff": 128},
}

CHECKPOINT_MAGIC = b"MODL0001"


@dataclass
class ModelSpec:
    """Architecture identity plus the knobs needed to rebuild it."""

    kind: str
    frames: int = 91
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        merged = dict(DEFAULT_HYPERPARAMS[self.kind])
        merged.update(self.hyperparams)
        self.hyperparams = merged
        if self.frames < 4:
            raise ValueError("frames must be at least 4")

    @property
    def input_form(self) -> str:
        return INPUT_FORMS[self.kind]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "frames": self.frames, "hyperparams": self.hyperparams}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        return cls(kind=data["kind"], frames=data.get("frames", 91),
                   hyperparams=data.get("hyperparams", {}))


class ModelBase:
    spec: ModelSpec
    dtype: np.dtype

    def expected_shape(self) -> tuple[int, ...]:
        raise NotImplementedError

    def logits(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def parameter_blocks(self) -> dict[str, Tensor]:
        raise NotImplementedError

    def prepare_input(self, x: np.ndarray) -> Tensor:
        x = np.asarray(x)
        if np.isnan(x).any():
            raise ValueError(f"{self.spec.kind} input contains NaN")
        expect = self.expected_shape()
        if x.shape[1:] != expect:
            raise ShapeError(
                f"{self.spec.kind} expects {self.spec.input_form} input of shape "
                f"(batch,) + {expect}, got {x.shape}"
            )
        return Tensor(x.astype(self.dtype, copy=False))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities (batch, 12); rows sum to 1."""
        return T.softmax(self.logits(self.prepare_input(x)), axis=-1).data

    def zero_grad(self) -> None:
        for p in self.parameter_blocks().values():
            p.zero_grad()

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameter_blocks().values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: np.array(p.data) for name, p in self.parameter_blocks().items()}

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        blocks = self.parameter_blocks()
        if set(state) != set(blocks):
            missing = set(blocks) ^ set(state)
            raise ValueError(f"checkpoint blocks do not match model: {sorted(missing)}")
        for name, values in state.items():
            target = blocks[name]
            if values.shape != target.data.shape:
                raise ValueError(f"block {name}: shape {values.shape} != {target.data.shape}")
            target.data = values.astype(self.dtype)


def _named(prefix: str, layer) -> list[tuple[str, Tensor]]:
    return [(f"{prefix}.{name}", p) for name, p in layer.params()]


class ConvNet(ModelBase):
    def __init__(self, spec: ModelSpec, rng: np.random.Generator, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        hp = spec.hyperparams
        c1, c2 = hp["channels"]
        k = hp["kernel"]
        self.pool = hp["pool"]
        self.conv1 = Conv2d(IMAGE_DIMS[1], c1, (k, k), rng, self.dtype)
        self.conv2 = Conv2d(c1, c2, (k, k), rng, self.dtype)
        rows = spec.frames // self.pool // self.pool
        cols = IMAGE_DIMS[0] // self.pool // self.pool
        self.flat_dim = c2 * rows * cols
        self.head = ClassifierHead(self.flat_dim, rng, self.dtype)

    def expected_shape(self):
        return (self.spec.frames, IMAGE_DIMS[0], IMAGE_DIMS[1])

    def logits(self, x: Tensor) -> Tensor:
        x = T.transpose(x, (0, 3, 1, 2))  # channels first
        x = T.maxpool2d(T.relu(self.conv1(x)), self.pool)
        x = T.maxpool2d(T.relu(self.conv2(x)), self.pool)
        return self.head(T.reshape(x, (x.shape[0], self.flat_dim)))

    def parameter_blocks(self):
        return dict(
            _named("conv1", self.conv1) + _named("conv2", self.conv2) + _named("head", self.head)
        )


class BiLSTMNet(ModelBase):
    def __init__(self, spec: ModelSpec, rng: np.random.Generator, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        hidden = spec.hyperparams["hidden"]
        self.forward_dir = LSTM(FEATURE_DIM, hidden, rng, self.dtype)
        self.backward_dir = LSTM(FEATURE_DIM, hidden, rng, self.dtype)
        self.head = ClassifierHead(2 * hidden, rng, self.dtype)

    def expected_shape(self):
        return (self.spec.frames, FEATURE_DIM)

    def direction_summaries(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Final hidden states of the two directions (before the head)."""
        return self.forward_dir(x), self.backward_dir(x[:, ::-1])

    def logits(self, x: Tensor) -> Tensor:
        fwd, bwd = self.direction_summaries(x)
        return self.head(T.concat([fwd, bwd], axis=1))

    def parameter_blocks(self):
        return dict(
            _named("forward", self.forward_dir)
            + _named("backward", self.backward_dir)
            + _named("head", self.head)
        )


class ConvLSTMNet(ModelBase):
    def __init__(self, spec: ModelSpec, rng: np.random.Generator, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        hp = spec.hyperparams
        self.cell = ConvLSTM1d(1, hp["hidden_channels"], hp["kernel"], rng, self.dtype)
        self.head = ClassifierHead(hp["hidden_channels"], rng, self.dtype)

    def expected_shape(self):
        return (self.spec.frames, FEATURE_DIM)

    def logits(self, x: Tensor) -> Tensor:
        final = self.cell(x)  # (B, hidden_channels, 467)
        return self.head(final.mean(axis=2))

    def parameter_blocks(self):
        return dict(_named("cell", self.cell) + _named("head", self.head))


class STGCNNet(ModelBase):
    """Graph blocks: neighborhood aggregation with a fixed normalized
    adjacency, 1x1 channel mixing, then a temporal convolution per node."""

    def __init__(
        self,
        spec: ModelSpec,
        rng: np.random.Generator,
        dtype=np.float64,
        adjacency: np.ndarray | None = None,
    ):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        hp = spec.hyperparams
        c1, c2 = hp["channels"]
        kt = hp["temporal_kernel"]
        self.adjacency = (
            spatial_adjacency() if adjacency is None else np.asarray(adjacency)
        ).astype(self.dtype)
        self.mix1 = Linear(GRAPH_DIMS[0], c1, rng, self.dtype)
        self.tconv1 = Conv2d(c1, c1, (kt, 1), rng, self.dtype)
        self.mix2 = Linear(c1, c2, rng, self.dtype)
        self.tconv2 = Conv2d(c2, c2, (kt, 1), rng, self.dtype)
        self.head = ClassifierHead(c2, rng, self.dtype)

    def expected_shape(self):
        return (GRAPH_DIMS[0], self.spec.frames, GRAPH_DIMS[1])

    def _block(self, x: Tensor, mix: Linear, tconv: Conv2d) -> Tensor:
        x = x @ Tensor(self.adjacency)  # aggregate neighbors per frame
        x = T.transpose(x, (0, 2, 3, 1))  # (B, T, V, C)
        x = mix(x)
        x = T.transpose(x, (0, 3, 1, 2))  # back to (B, C, T, V)
        return T.relu(tconv(x))

    def logits(self, x: Tensor) -> Tensor:
        x = self._block(x, self.mix1, self.tconv1)
        x = self._block(x, self.mix2, self.tconv2)
        return self.head(x.mean(axis=(2, 3)))

    def parameter_blocks(self):
        return dict(
            _named("mix1", self.mix1)
            + _named("tconv1", self.tconv1)
            + _named("mix2", self.mix2)
            + _named("tconv2", self.tconv2)
            + _named("head", self.head)
        )


class TransformerNet(ModelBase):
    def __init__(self, spec: ModelSpec, rng: np.random.Generator, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        hp = spec.hyperparams
        dim = hp["d_model"]
        self.project = Linear(FEATURE_DIM, dim, rng, self.dtype)
        self.positions = sinusoidal_encoding(spec.frames, dim, self.dtype)
        self.blocks = [
            TransformerBlock(dim, hp["heads"], hp["ff"], rng, self.dtype)
            for _ in range(hp["layers"])
        ]
        self.head = ClassifierHead(dim, rng, self.dtype)

    def expected_shape(self):
        return (self.spec.frames, FEATURE_DIM)

    def logits(self, x: Tensor) -> Tensor:
        x = self.project(x) + Tensor(self.positions)
        for block in self.blocks:
            x = block(x)
        return self.head(x.mean(axis=1))

    def parameter_blocks(self):
        out = _named("project", self.project)
        for i, block in enumerate(self.blocks):
            out += _named(f"block{i}", block)
        return dict(out + _named("head", self.head))


_MODEL_CLASSES = {
    "cnn": ConvNet,
    "bilstm": BiLSTMNet,
    "convlstm": ConvLSTMNet,
    "stgcn": STGCNNet,
    "transformer": TransformerNet,
}


def build_model(
    spec: ModelSpec, rng: np.random.Generator, dtype=np.float64, **kwargs
) -> ModelBase:
    """Instantiate a model with parameters drawn deterministically from
    ``rng``; the same generator state always gives the same tensors."""
    return _MODEL_CLASSES[spec.kind](spec, rng, dtype=dtype, **kwargs)


# ---------------------------------------------------------------------------
# Checkpoints: magic, JSON spec descriptor, named 64-bit parameter blocks.
# ---------------------------------------------------------------------------


def save_checkpoint(model: ModelBase, path: str | Path) -> None:
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    descriptor = json.dumps(
        {"spec": model.spec.to_dict(), "dtype": model.dtype.name},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    buf.write(struct.pack("<I", len(descriptor)))
    buf.write(descriptor)
    blocks = model.state_arrays()
    buf.write(struct.pack("<I", len(blocks)))
    for name, values in blocks.items():
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", values.ndim))
        buf.write(struct.pack(f"<{values.ndim}I", *values.shape))
        buf.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> ModelBase:
    path = Path(path)
    data = path.read_bytes()
    if data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CaptureError(f"{path.name}: not a model checkpoint")
    offset = len(CHECKPOINT_MAGIC)
    (desc_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    descriptor = json.loads(data[offset : offset + desc_len].decode("utf-8"))
    offset += desc_len
    spec = ModelSpec.from_dict(descriptor["spec"])
    dtype = np.dtype(descriptor["dtype"])
    model = build_model(spec, np.random.default_rng(0), dtype=dtype)
    (n_blocks,) = struct.unpack_from("<I", data, offset)
    offset += 4
    state = {}
    for _ in range(n_blocks):
        (name_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<I", data, offset)
        offset += 4
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(data, dtype="<f8", offset=offset, count=count)
        offset += count * 8
        state[name] = values.reshape(shape)
    model.load_state_arrays(state)
    return model
