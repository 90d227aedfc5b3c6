"""Parameterized building blocks for the five architectures.

Each layer owns named parameter tensors and exposes them via ``params()``
as (name, tensor) pairs; models prefix these names to form the checkpoint
block names. Initialization is Glorot-uniform drawn from a caller-provided
generator, so identical seeds give identical parameters.
"""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


def glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int, dtype) -> Tensor:
    bound = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


def zeros(shape, dtype) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng, dtype):
        self.weight = glorot(rng, (in_dim, out_dim), in_dim, out_dim, dtype)
        self.bias = zeros((out_dim,), dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]


class Conv2d:
    """Stride-1 same-padding convolution for odd kernel sizes."""

    def __init__(self, in_ch: int, out_ch: int, kernel: tuple[int, int], rng, dtype):
        kh, kw = kernel
        fan_in = in_ch * kh * kw
        fan_out = out_ch * kh * kw
        self.weight = glorot(rng, (out_ch, in_ch, kh, kw), fan_in, fan_out, dtype)
        self.bias = zeros((out_ch,), dtype)
        self.padding = (kh // 2, kw // 2)

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias, self.padding)

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]


class Conv1d:
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng, dtype):
        fan_in = in_ch * kernel
        self.weight = glorot(rng, (out_ch, in_ch, kernel), fan_in, out_ch * kernel, dtype)
        self.bias = zeros((out_ch,), dtype)
        self.padding = kernel // 2

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv1d(x, self.weight, self.bias, self.padding)

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]


class LSTM:
    """One direction of a standard LSTM; returns the final hidden state.

    Gate order is (input, forget, cell, output); the forget-gate bias
    starts at 1 so memory persists early in training.
    """

    def __init__(self, in_dim: int, hidden: int, rng, dtype):
        self.hidden = hidden
        self.dtype = dtype
        self.w_input = glorot(rng, (in_dim, 4 * hidden), in_dim, 4 * hidden, dtype)
        self.w_hidden = glorot(rng, (hidden, 4 * hidden), hidden, 4 * hidden, dtype)
        bias = np.zeros(4 * hidden, dtype=dtype)
        bias[hidden : 2 * hidden] = 1.0
        self.bias = Tensor(bias, requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        """x: (B, T, F) -> final hidden state (B, H)."""
        batch, steps, _ = x.shape
        hid = self.hidden
        # input contributions for all steps in one matmul
        xw = T.reshape(
            T.reshape(x, (batch * steps, x.shape[2])) @ self.w_input + self.bias,
            (batch, steps, 4 * hid),
        )
        h = Tensor(np.zeros((batch, hid), dtype=self.dtype))
        c = Tensor(np.zeros((batch, hid), dtype=self.dtype))
        for t in range(steps):
            gates = xw[:, t] + h @ self.w_hidden
            i = T.sigmoid(gates[:, :hid])
            f = T.sigmoid(gates[:, hid : 2 * hid])
            g = T.tanh(gates[:, 2 * hid : 3 * hid])
            o = T.sigmoid(gates[:, 3 * hid :])
            c = f * c + i * g
            h = o * T.tanh(c)
        return h

    def params(self):
        return [("w_input", self.w_input), ("w_hidden", self.w_hidden), ("bias", self.bias)]


class ConvLSTM1d:
    """Recurrent cell whose gates are 1-d convolutions over the feature
    axis; state shape (B, hidden_channels, length)."""

    def __init__(self, in_ch: int, hidden_ch: int, kernel: int, rng, dtype):
        self.hidden_ch = hidden_ch
        self.dtype = dtype
        self.gates = Conv1d(in_ch + hidden_ch, 4 * hidden_ch, kernel, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        """x: (B, T, L) treated as one input channel per step -> final h."""
        batch, steps, length = x.shape
        hc = self.hidden_ch
        h = Tensor(np.zeros((batch, hc, length), dtype=self.dtype))
        c = Tensor(np.zeros((batch, hc, length), dtype=self.dtype))
        for t in range(steps):
            step = T.reshape(x[:, t], (batch, 1, length))
            gates = self.gates(T.concat([step, h], axis=1))
            i = T.sigmoid(gates[:, :hc])
            f = T.sigmoid(gates[:, hc : 2 * hc])
            g = T.tanh(gates[:, 2 * hc : 3 * hc])
            o = T.sigmoid(gates[:, 3 * hc :])
            c = f * c + i * g
            h = o * T.tanh(c)
        return h

    def params(self):
        return [("gates." + n, p) for n, p in self.gates.params()]


class LayerNorm:
    def __init__(self, dim: int, dtype, eps: float = 1e-5):
        self.gain = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.shift = zeros((dim,), dtype)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mean = x.mean(axis=-1, keepdims=True)
        centered = x - mean
        var = (centered * centered).mean(axis=-1, keepdims=True)
        normed = centered * T.power(var + self.eps, -0.5)
        return normed * self.gain + self.shift

    def params(self):
        return [("gain", self.gain), ("shift", self.shift)]


class MultiHeadAttention:
    def __init__(self, dim: int, heads: int, rng, dtype):
        if dim % heads:
            raise ValueError(f"model dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.q = Linear(dim, dim, rng, dtype)
        self.k = Linear(dim, dim, rng, dtype)
        self.v = Linear(dim, dim, rng, dtype)
        self.out = Linear(dim, dim, rng, dtype)

    def _split(self, x: Tensor, batch: int, steps: int) -> Tensor:
        x = T.reshape(x, (batch, steps, self.heads, self.head_dim))
        return T.transpose(x, (0, 2, 1, 3))  # (B, heads, T, head_dim)

    def __call__(self, x: Tensor) -> Tensor:
        batch, steps, dim = x.shape
        q = self._split(self.q(x), batch, steps)
        k = self._split(self.k(x), batch, steps)
        v = self._split(self.v(x), batch, steps)
        scores = (q @ T.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(self.head_dim))
        attended = T.softmax(scores, axis=-1) @ v
        merged = T.reshape(T.transpose(attended, (0, 2, 1, 3)), (batch, steps, dim))
        return self.out(merged)

    def params(self):
        out = []
        for name, layer in (("q", self.q), ("k", self.k), ("v", self.v), ("out", self.out)):
            out += [(f"{name}.{n}", p) for n, p in layer.params()]
        return out


class TransformerBlock:
    """Post-norm encoder layer: attention and feed-forward sublayers with
    residual connections."""

    def __init__(self, dim: int, heads: int, ff_dim: int, rng, dtype):
        self.attention = MultiHeadAttention(dim, heads, rng, dtype)
        self.norm1 = LayerNorm(dim, dtype)
        self.ff1 = Linear(dim, ff_dim, rng, dtype)
        self.ff2 = Linear(ff_dim, dim, rng, dtype)
        self.norm2 = LayerNorm(dim, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        x = self.norm1(x + self.attention(x))
        return self.norm2(x + self.ff2(T.relu(self.ff1(x))))

    def params(self):
        out = [("attention." + n, p) for n, p in self.attention.params()]
        out += [("norm1." + n, p) for n, p in self.norm1.params()]
        out += [("ff1." + n, p) for n, p in self.ff1.params()]
        out += [("ff2." + n, p) for n, p in self.ff2.params()]
        out += [("norm2." + n, p) for n, p in self.norm2.params()]
        return out


class ClassifierHead:
    """The shared output stack: 32-unit layer, then 12-unit layer."""

    def __init__(self, in_dim: int, rng, dtype, hidden: int = 32, classes: int = 12):
        self.fc1 = Linear(in_dim, hidden, rng, dtype)
        self.fc2 = Linear(hidden, classes, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(T.relu(self.fc1(x)))

    def params(self):
        return [("fc1." + n, p) for n, p in self.fc1.params()] + [
            ("fc2." + n, p) for n, p in self.fc2.params()
        ]


def sinusoidal_encoding(steps: int, dim: int, dtype) -> np.ndarray:
    """Fixed position encoding table (steps, dim)."""
    position = np.arange(steps, dtype=np.float64)[:, None]
    div = np.exp(np.arange(0, dim, 2, dtype=np.float64) * (-np.log(10000.0) / dim))
    table = np.zeros((steps, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(position * div)
    table[:, 1::2] = np.cos(position * div)[:, : dim // 2]
    return table.astype(dtype)
