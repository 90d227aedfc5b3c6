"""Shared fixture builders: random but structurally valid samples."""
from __future__ import annotations

import numpy as np
import pytest

from dyadkit.skeleton import (
    FRAMES_PER_SAMPLE,
    NUM_JOINTS,
    BodyPose,
    DyadFrame,
    DyadSample,
    InteractionLabel,
    derive_occluded_frames,
)


def random_pose(rng: np.random.Generator, center=(0.0, 3000.0, 900.0)) -> BodyPose:
    joints = rng.uniform(-400.0, 400.0, size=(NUM_JOINTS, 3)) + np.asarray(center)
    conf = rng.integers(1, 4, size=NUM_JOINTS).astype(np.uint8)
    return BodyPose(joints, conf)


def random_sample(
    rng: np.random.Generator,
    label: InteractionLabel = InteractionLabel.HUGGING,
    occluded: set[int] | None = None,
    sample_id: str = "s0",
    pair_id: str = "p0",
) -> DyadSample:
    """A sample with smooth random motion; ``occluded`` frames keep a
    single body so the occlusion rule derives exactly that set."""
    occluded = set() if occluded is None else set(occluded)
    base1 = random_pose(rng, center=(-400.0, 3200.0, 900.0))
    base2 = random_pose(rng, center=(400.0, 3400.0, 900.0))
    frames = []
    for t in range(FRAMES_PER_SAMPLE):
        drift = 4.0 * np.sin(2 * np.pi * t / 45.0)
        wobble1 = rng.normal(0.0, 2.0, size=(NUM_JOINTS, 3))
        wobble2 = rng.normal(0.0, 2.0, size=(NUM_JOINTS, 3))
        b1 = BodyPose(base1.joints + drift + wobble1, base1.confidences)
        b2 = BodyPose(base2.joints - drift + wobble2, base2.confidences)
        bodies = (b1,) if t in occluded else (b1, b2)
        frames.append(DyadFrame(t, bodies))
    frames = tuple(frames)
    return DyadSample(
        frames=frames,
        label=label,
        sample_id=sample_id,
        pair_id=pair_id,
        occluded_frames=derive_occluded_frames(frames),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(779)
