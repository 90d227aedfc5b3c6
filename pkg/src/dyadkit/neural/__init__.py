"""Compact numpy-backed tensor runtime and the five benchmark models."""

from .tensor import Tensor  # noqa: F401
