"""Synthetic dyadic interaction generator.

Produces labeled 91-frame two-person captures that mimic the collection
protocol behind the real dataset: volunteer pairs with individual body
scale and tempo, repeated performances of each interaction class at
random orientations to the camera, sensor-style coordinate noise, and
single-body occlusion windows in a configurable fraction of samples.

Motion is parametric, not biomechanical: a neutral 32-joint skeleton is
animated per class (wrist targets solved with a two-link arm chain, head
and torso rotations for nods and laughter, root approach for hugs),
placed on the interaction area, and projected into the tilted camera
frame. Every sample is generated from a counter-based random stream
keyed by (seed, sample index), so generation parallelizes without
changing a single bit of output.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .prng import keyed_rng
from .skeleton import (
    FPS,
    FRAMES_PER_SAMPLE,
    NUM_JOINTS,
    BodyPose,
    ConfidenceLevel,
    DyadFrame,
    DyadSample,
    InteractionLabel,
    JointId,
    save_manifest,
    serialize_captures,
)
from .splits import SplitPlan, split_assignment

J = JointId


@dataclass(frozen=True)
class CameraConfig:
    """Depth-sensor placement: mounted high, tilted down at the area."""

    height_mm: float = 2210.0
    tilt_deg: float = 37.0
    standoff_mm: float = 2620.0
    area_mm: tuple[float, float] = (2185.0, 1805.0)


@dataclass(frozen=True)
class SynthConfig:
    n_pairs: int = 10
    reps_per_class: int = 40
    classes: tuple[InteractionLabel, ...] = tuple(InteractionLabel)
    fps: int = FPS
    frames: int = FRAMES_PER_SAMPLE
    camera: CameraConfig = field(default_factory=CameraConfig)
    orientation_range_deg: float = 360.0
    noise_std_mm: float = 4.0
    occlusion_rate: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.frames != FRAMES_PER_SAMPLE:
            raise ValueError("frames is fixed at 91")
        if self.fps != FPS:
            raise ValueError("fps is fixed at 30")
        if not 0.0 <= self.occlusion_rate <= 1.0:
            raise ValueError("occlusion_rate must be in [0, 1]")
        if self.n_pairs < 1 or self.reps_per_class < 1 or not self.classes:
            raise ValueError("n_pairs, reps_per_class and classes must be nonempty")
        object.__setattr__(self, "classes", tuple(InteractionLabel(c) for c in self.classes))

    @property
    def n_samples(self) -> int:
        return self.n_pairs * self.reps_per_class * len(self.classes)

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "reps_per_class": self.reps_per_class,
            "classes": [c.label_name for c in self.classes],
            "fps": self.fps,
            "frames": self.frames,
            "camera": {
                "height_mm": self.camera.height_mm,
                "tilt_deg": self.camera.tilt_deg,
                "standoff_mm": self.camera.standoff_mm,
                "area_mm": list(self.camera.area_mm),
            },
            "orientation_range_deg": self.orientation_range_deg,
            "noise_std_mm": self.noise_std_mm,
            "occlusion_rate": self.occlusion_rate,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        data = dict(data)
        if "camera" in data:
            cam = dict(data["camera"])
            if "area_mm" in cam:
                cam["area_mm"] = tuple(cam["area_mm"])
            data["camera"] = CameraConfig(**cam)
        if "classes" in data:
            data["classes"] = tuple(
                InteractionLabel.from_name(c) if isinstance(c, str) else InteractionLabel(c)
                for c in data["classes"]
            )
        return cls(**data)


@dataclass(frozen=True)
class PersonParams:
    """Individuality of one volunteer: overall and arm-length scale."""

    scale: float
    arm_scale: float


@dataclass(frozen=True)
class PairParams:
    pair_id: str
    persons: tuple[PersonParams, PersonParams]
    tempo: float  # gesture frequency multiplier
    amplitude: float  # gesture amplitude multiplier


def pair_params(seed: int, pair_index: int) -> PairParams:
    rng = keyed_rng(seed, "pair", pair_index)
    persons = tuple(
        PersonParams(
            scale=float(np.clip(rng.normal(1.0, 0.045), 0.88, 1.12)),
            arm_scale=float(np.clip(rng.normal(1.0, 0.03), 0.9, 1.1)),
        )
        for _ in range(2)
    )
    return PairParams(
        pair_id=f"pair{pair_index:02d}",
        persons=persons,
        tempo=float(rng.uniform(0.85, 1.2)),
        amplitude=float(rng.uniform(0.9, 1.12)),
    )


# ---------------------------------------------------------------------------
# Skeleton construction and kinematic helpers. The body-local frame is
# +x toward the body's left, +y facing forward, +z up, origin at PELVIS.
# ---------------------------------------------------------------------------

_NEUTRAL = np.zeros((NUM_JOINTS, 3))
_NEUTRAL[J.PELVIS] = (0, 0, 0)
_NEUTRAL[J.SPINE_NAVAL] = (0, 0, 180)
_NEUTRAL[J.SPINE_CHEST] = (0, 0, 360)
_NEUTRAL[J.NECK] = (0, 0, 560)
_NEUTRAL[J.HEAD] = (0, 20, 680)
_NEUTRAL[J.NOSE] = (0, 110, 660)
_NEUTRAL[J.EYE_LEFT] = (32, 95, 700)
_NEUTRAL[J.EYE_RIGHT] = (-32, 95, 700)
_NEUTRAL[J.EAR_LEFT] = (78, 25, 690)
_NEUTRAL[J.EAR_RIGHT] = (-78, 25, 690)
_NEUTRAL[J.CLAVICLE_LEFT] = (35, 10, 520)
_NEUTRAL[J.CLAVICLE_RIGHT] = (-35, 10, 520)
_NEUTRAL[J.SHOULDER_LEFT] = (185, 0, 530)
_NEUTRAL[J.SHOULDER_RIGHT] = (-185, 0, 530)
_NEUTRAL[J.ELBOW_LEFT] = (205, 10, 250)
_NEUTRAL[J.ELBOW_RIGHT] = (-205, 10, 250)
_NEUTRAL[J.WRIST_LEFT] = (215, 30, -10)
_NEUTRAL[J.WRIST_RIGHT] = (-215, 30, -10)
_NEUTRAL[J.HAND_LEFT] = (215, 45, -80)
_NEUTRAL[J.HAND_RIGHT] = (-215, 45, -80)
_NEUTRAL[J.HANDTIP_LEFT] = (215, 55, -150)
_NEUTRAL[J.HANDTIP_RIGHT] = (-215, 55, -150)
_NEUTRAL[J.THUMB_LEFT] = (185, 60, -40)
_NEUTRAL[J.THUMB_RIGHT] = (-185, 60, -40)
_NEUTRAL[J.HIP_LEFT] = (95, 0, -60)
_NEUTRAL[J.HIP_RIGHT] = (-95, 0, -60)
_NEUTRAL[J.KNEE_LEFT] = (100, 15, -480)
_NEUTRAL[J.KNEE_RIGHT] = (-100, 15, -480)
_NEUTRAL[J.ANKLE_LEFT] = (105, 10, -870)
_NEUTRAL[J.ANKLE_RIGHT] = (-105, 10, -870)
_NEUTRAL[J.FOOT_LEFT] = (105, 160, -930)
_NEUTRAL[J.FOOT_RIGHT] = (-105, 160, -930)

_UPPER_BODY = [
    J.SPINE_CHEST, J.NECK, J.HEAD, J.NOSE, J.EYE_LEFT, J.EYE_RIGHT,
    J.EAR_LEFT, J.EAR_RIGHT, J.CLAVICLE_LEFT, J.CLAVICLE_RIGHT,
    J.SHOULDER_LEFT, J.SHOULDER_RIGHT, J.ELBOW_LEFT, J.ELBOW_RIGHT,
    J.WRIST_LEFT, J.WRIST_RIGHT, J.HAND_LEFT, J.HAND_RIGHT,
    J.HANDTIP_LEFT, J.HANDTIP_RIGHT, J.THUMB_LEFT, J.THUMB_RIGHT,
]
_HEAD_CLUSTER = [J.HEAD, J.NOSE, J.EYE_LEFT, J.EYE_RIGHT, J.EAR_LEFT, J.EAR_RIGHT]

_ARM = {
    "left": (J.SHOULDER_LEFT, J.ELBOW_LEFT, J.WRIST_LEFT, J.HAND_LEFT,
             J.HANDTIP_LEFT, J.THUMB_LEFT),
    "right": (J.SHOULDER_RIGHT, J.ELBOW_RIGHT, J.WRIST_RIGHT, J.HAND_RIGHT,
              J.HANDTIP_RIGHT, J.THUMB_RIGHT),
}


@dataclass(frozen=True)
class _Body:
    neutral: np.ndarray  # (32, 3) scaled local pose
    upper_arm: float
    forearm: float
    pelvis_height: float


def _build_body(person: PersonParams) -> _Body:
    local = _NEUTRAL * person.scale
    for side in ("left", "right"):
        shoulder, elbow, wrist, hand, tip, thumb = (int(j) for j in _ARM[side])
        for j in (elbow, wrist, hand, tip, thumb):
            local[j] = local[shoulder] + (local[j] - local[shoulder]) * person.arm_scale
    upper_arm = float(np.linalg.norm(local[J.ELBOW_RIGHT] - local[J.SHOULDER_RIGHT]))
    forearm = float(np.linalg.norm(local[J.WRIST_RIGHT] - local[J.ELBOW_RIGHT]))
    return _Body(
        neutral=local,
        upper_arm=upper_arm,
        forearm=forearm,
        pelvis_height=float(-local[J.FOOT_RIGHT, 2]),
    )


def _normalize(v: np.ndarray, axis: int = -1) -> np.ndarray:
    n = np.linalg.norm(v, axis=axis, keepdims=True)
    return v / np.where(n < 1e-9, 1.0, n)


def _set_arm(
    track: np.ndarray,
    body: _Body,
    side: str,
    wrist_target: np.ndarray,
    bend_dir: tuple[float, float, float],
) -> None:
    """Pose one arm so the wrist follows ``wrist_target`` (T, 3).

    A two-link chain places the elbow; targets beyond reach are pulled
    back to 99.5% extension, so straight-arm gestures stay solvable.
    Hand, fingertip and thumb follow the forearm direction.
    """
    shoulder_j, elbow_j, wrist_j, hand_j, tip_j, thumb_j = (int(j) for j in _ARM[side])
    shoulder = track[:, shoulder_j]
    l1, l2 = body.upper_arm, body.forearm
    d = wrist_target - shoulder
    dist = np.linalg.norm(d, axis=1, keepdims=True)
    reach = np.clip(dist, abs(l1 - l2) * 1.15 + 1e-6, (l1 + l2) * 0.995)
    axis = d / np.where(dist < 1e-9, 1.0, dist)
    wrist = shoulder + axis * reach

    a = (l1 * l1 - l2 * l2 + reach * reach) / (2.0 * reach)
    h = np.sqrt(np.maximum(l1 * l1 - a * a, 1.0))
    hint = np.asarray(bend_dir, dtype=float)
    perp = hint - (axis @ hint)[:, None] * axis
    norms = np.linalg.norm(perp, axis=1, keepdims=True)
    fallback = np.array([0.0, 0.0, -1.0])
    perp = np.where(norms < 1e-6, fallback, perp / np.where(norms < 1e-9, 1.0, norms))
    elbow = shoulder + a * axis + h * perp

    forearm_dir = _normalize(wrist - elbow)
    side_sign = 1.0 if side == "left" else -1.0
    track[:, elbow_j] = elbow
    track[:, wrist_j] = wrist
    track[:, hand_j] = wrist + forearm_dir * 70.0
    track[:, tip_j] = wrist + forearm_dir * 140.0
    track[:, thumb_j] = wrist + forearm_dir * 35.0 + np.array([side_sign * -30.0, 0, 0])


def _rotate_x(points: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """Rotate (T, N, 3) points about the +x axis by per-frame angles."""
    c = np.cos(angle)[:, None]
    s = np.sin(angle)[:, None]
    out = points.copy()
    out[..., 1] = points[..., 1] * c - points[..., 2] * s
    out[..., 2] = points[..., 1] * s + points[..., 2] * c
    return out


def _pitch_head(track: np.ndarray, angle: np.ndarray) -> None:
    """Nod: rotate the head cluster about the neck's left-right axis."""
    idx = [int(j) for j in _HEAD_CLUSTER]
    neck = track[:, int(J.NECK)][:, None, :]
    track[:, idx] = neck + _rotate_x(track[:, idx] - neck, angle)


def _lean_torso(track: np.ndarray, angle: np.ndarray) -> None:
    """Lean everything above SPINE_NAVAL about its left-right axis."""
    idx = [int(j) for j in _UPPER_BODY]
    navel = track[:, int(J.SPINE_NAVAL)][:, None, :]
    track[:, idx] = navel + _rotate_x(track[:, idx] - navel, angle)


def _idle_track(body: _Body, tt: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Neutral stance with breathing and a touch of arm sway."""
    track = np.repeat(body.neutral[None, :, :], len(tt), axis=0)
    phase = rng.uniform(0, 2 * np.pi)
    breath = 3.0 * np.sin(2 * np.pi * 0.27 * tt + phase)
    for j in (J.SPINE_CHEST, J.NECK, *_HEAD_CLUSTER):
        track[:, int(j), 2] += breath
    sway = 4.0 * np.sin(2 * np.pi * 0.21 * tt + rng.uniform(0, 2 * np.pi))
    for side in ("left", "right"):
        for j in _ARM[side][2:]:
            track[:, int(j), 1] += sway
    return track


# ---------------------------------------------------------------------------
# Class templates. Each returns local joint tracks for the instigator and
# the receiver plus the body-separation trajectory (mm).
# ---------------------------------------------------------------------------


@dataclass
class _Ctx:
    tt: np.ndarray
    amp: float
    tempo: float
    rng: np.random.Generator

    def osc(self, freq_hz: float, phase: float | None = None) -> np.ndarray:
        if phase is None:
            phase = self.rng.uniform(0, 2 * np.pi)
        return np.sin(2 * np.pi * freq_hz * self.tempo * self.tt + phase)


def _const(ctx: _Ctx, value: float) -> np.ndarray:
    return np.full_like(ctx.tt, value)


def _base_separation(ctx: _Ctx) -> np.ndarray:
    return _const(ctx, ctx.rng.uniform(1550.0, 2050.0))


def _anim_waving_in(ctx, inst, recv):
    track = _idle_track(inst, ctx.tt, ctx.rng)
    sweep = 0.5 + 0.5 * ctx.osc(1.1)
    wrist = np.stack(
        [_const(ctx, -230.0), 500.0 - 350.0 * ctx.amp * sweep, _const(ctx, 380.0)],
        axis=1,
    )
    _set_arm(track, inst, "right", wrist, bend_dir=(-0.4, -0.2, -1.0))
    return track, _idle_track(recv, ctx.tt, ctx.rng), _base_separation(ctx)


def _anim_thumbs_up(ctx, inst, recv):
    # left fist pulled in tight against the shoulder, held with a tremor
    track = _idle_track(inst, ctx.tt, ctx.rng)
    tremor = 6.0 * ctx.osc(0.9)
    wrist = np.stack(
        [_const(ctx, 150.0), _const(ctx, 180.0) + tremor, _const(ctx, 430.0)], axis=1
    )
    _set_arm(track, inst, "left", wrist, bend_dir=(0.3, -0.6, -1.0))
    return track, _idle_track(recv, ctx.tt, ctx.rng), _base_separation(ctx)


def _anim_waving(ctx, inst, recv):
    track = _idle_track(inst, ctx.tt, ctx.rng)
    wave = 210.0 * ctx.amp * ctx.osc(1.6)
    wrist = np.stack(
        [-170.0 + wave, _const(ctx, 180.0), _const(ctx, 820.0)], axis=1
    )
    _set_arm(track, inst, "right", wrist, bend_dir=(-1.0, 0.0, -0.2))
    return track, _idle_track(recv, ctx.tt, ctx.rng), _base_separation(ctx)


def _anim_pointing(ctx, inst, recv):
    track = _idle_track(inst, ctx.tt, ctx.rng)
    raise_up = np.clip(ctx.tt / 0.8, 0.0, 1.0)  # arm up within the first 0.8 s
    wrist = np.stack(
        [_const(ctx, -120.0), 30.0 + 620.0 * raise_up, -10.0 + 540.0 * raise_up],
        axis=1,
    )
    _set_arm(track, inst, "right", wrist, bend_dir=(0.0, 0.0, -1.0))
    return track, _idle_track(recv, ctx.tt, ctx.rng), _base_separation(ctx)


def _anim_showing_measurements(ctx, inst, recv):
    track = _idle_track(inst, ctx.tt, ctx.rng)
    half_gap = 90.0 + 290.0 * ctx.amp * (1.05 + ctx.osc(0.5))
    for side, sign in (("left", 1.0), ("right", -1.0)):
        wrist = np.stack(
            [sign * half_gap, _const(ctx, 480.0), _const(ctx, 430.0)], axis=1
        )
        _set_arm(track, inst, side, wrist, bend_dir=(0.0, -0.3, -1.0))
    return track, _idle_track(recv, ctx.tt, ctx.rng), _base_separation(ctx)


def _anim_hugging(ctx, inst, recv):
    half = len(ctx.tt) // 2  # approach phase: strictly closing distance
    start = ctx.rng.uniform(1650.0, 1950.0)
    end = ctx.rng.uniform(420.0, 470.0)
    sep = np.empty_like(ctx.tt)
    sep[: half + 1] = np.linspace(start, end, half + 1)
    sep[half + 1 :] = end
    wrap = np.clip((np.arange(len(ctx.tt)) - 20.0) / 30.0, 0.0, 1.0)[:, None]
    tracks = []
    for body in (inst, recv):
        track = _idle_track(body, ctx.tt, ctx.rng)
        for side, sign in (("left", 1.0), ("right", -1.0)):
            rest = track[:, int(_ARM[side][2])]
            target = np.stack(
                [_const(ctx, sign * -140.0), _const(ctx, 520.0), _const(ctx, 470.0)],
                axis=1,
            )
            _set_arm(track, body, side, rest + (target - rest) * wrap,
                     bend_dir=(sign * 1.0, 0.0, -0.4))
        tracks.append(track)
    return tracks[0], tracks[1], sep


def _anim_laughing(ctx, inst, recv):
    tracks = []
    for body in (inst, recv):
        track = _idle_track(body, ctx.tt, ctx.rng)
        for side, sign in (("left", 1.0), ("right", -1.0)):
            wrist = np.stack(
                [_const(ctx, sign * 260.0), _const(ctx, 250.0), _const(ctx, 420.0)],
                axis=1,
            )
            _set_arm(track, body, side, wrist, bend_dir=(sign * 0.4, -0.4, -1.0))
        lean = 0.17 * ctx.amp * ctx.osc(1.3)
        _lean_torso(track, lean)
        _pitch_head(track, 0.5 * lean)
        tracks.append(track)
    return tracks[0], tracks[1], _base_separation(ctx)


def _anim_arm_crossing(ctx, inst, recv):
    track = _idle_track(inst, ctx.tt, ctx.rng)
    close = np.clip(np.arange(len(ctx.tt)) / 28.0, 0.0, 1.0)[:, None]
    # wrists converge past the midline and hold crossed
    for side, sign in (("left", 1.0), ("right", -1.0)):
        rest = track[:, int(_ARM[side][2])]
        crossed = np.stack(
            [_const(ctx, -sign * 150.0), _const(ctx, 300.0), _const(ctx, 350.0)], axis=1
        )
        _set_arm(track, inst, side, rest + (crossed - rest) * close,
                 bend_dir=(0.0, -0.5, -1.0))
    return track, _idle_track(recv, ctx.tt, ctx.rng), _base_separation(ctx)


def _anim_nodding(ctx, inst, recv):
    # the receiver acknowledges: head pitches down from neutral and the
    # whole head translates forward-down, so its height clearly oscillates
    recv_track = _idle_track(recv, ctx.tt, ctx.rng)
    nod = 0.34 * ctx.amp * (0.5 + 0.5 * ctx.osc(1.15))
    _pitch_head(recv_track, nod)
    head_idx = [int(j) for j in _HEAD_CLUSTER]
    recv_track[:, head_idx, 1] += (55.0 * nod)[:, None]
    recv_track[:, head_idx, 2] -= (65.0 * nod)[:, None]
    # the instigator just stands; nodding is the only class where both
    # subjects keep their arms down
    return _idle_track(inst, ctx.tt, ctx.rng), recv_track, _base_separation(ctx)


def _anim_writing_circles(ctx, inst, recv):
    track = _idle_track(inst, ctx.tt, ctx.rng)
    phase = ctx.rng.uniform(0, 2 * np.pi)
    radius = 150.0 * ctx.amp
    angle = 2 * np.pi * 1.2 * ctx.tempo * ctx.tt + phase
    wrist = np.stack(
        [-180.0 + radius * np.cos(angle), _const(ctx, 480.0), 600.0 + radius * np.sin(angle)],
        axis=1,
    )
    _set_arm(track, inst, "right", wrist, bend_dir=(-0.6, -0.2, -1.0))
    return track, _idle_track(recv, ctx.tt, ctx.rng), _base_separation(ctx)


def _anim_holding_palms_out(ctx, inst, recv):
    track = _idle_track(inst, ctx.tt, ctx.rng)
    push = np.clip(np.arange(len(ctx.tt)) / 22.0, 0.0, 1.0)
    for side, sign in (("left", 1.0), ("right", -1.0)):
        wrist = np.stack(
            [_const(ctx, sign * 190.0), 30.0 + 560.0 * push, -10.0 + 530.0 * push],
            axis=1,
        )
        _set_arm(track, inst, side, wrist, bend_dir=(sign * 0.3, 0.0, -1.0))
    return track, _idle_track(recv, ctx.tt, ctx.rng), _base_separation(ctx)


def _anim_twirling_hair(ctx, inst, recv):
    # left hand circles right next to the ear
    track = _idle_track(inst, ctx.tt, ctx.rng)
    phase = ctx.rng.uniform(0, 2 * np.pi)
    angle = 2 * np.pi * 1.9 * ctx.tempo * ctx.tt + phase
    radius = 42.0 * ctx.amp
    wrist = np.stack(
        [150.0 + radius * np.cos(angle), 60.0 + radius * np.sin(angle), _const(ctx, 640.0)],
        axis=1,
    )
    _set_arm(track, inst, "left", wrist, bend_dir=(1.0, -0.2, -0.3))
    return track, _idle_track(recv, ctx.tt, ctx.rng), _base_separation(ctx)


MOTION_TEMPLATES = {
    InteractionLabel.WAVING_IN: _anim_waving_in,
    InteractionLabel.THUMBS_UP: _anim_thumbs_up,
    InteractionLabel.WAVING: _anim_waving,
    InteractionLabel.POINTING: _anim_pointing,
    InteractionLabel.SHOWING_MEASUREMENTS: _anim_showing_measurements,
    InteractionLabel.HUGGING: _anim_hugging,
    InteractionLabel.LAUGHING: _anim_laughing,
    InteractionLabel.ARM_CROSSING: _anim_arm_crossing,
    InteractionLabel.NODDING: _anim_nodding,
    InteractionLabel.WRITING_CIRCLES: _anim_writing_circles,
    InteractionLabel.HOLDING_PALMS_OUT: _anim_holding_palms_out,
    InteractionLabel.TWIRLING_HAIR: _anim_twirling_hair,
}


def _camera_transform(points: np.ndarray, camera: CameraConfig) -> np.ndarray:
    """World (x lateral, y away from sensor, z up; sensor above origin)
    to camera frame (x right, y down-ish, z optical depth)."""
    tau = math.radians(camera.tilt_deg)
    x, y, z = points[..., 0], points[..., 1], points[..., 2] - camera.height_mm
    cam = np.empty_like(points)
    cam[..., 0] = x
    cam[..., 1] = -math.sin(tau) * y - math.cos(tau) * z
    cam[..., 2] = math.cos(tau) * y - math.sin(tau) * z
    return cam


def generate_sample(
    label: InteractionLabel,
    pair: PairParams,
    orientation_deg: float,
    rng: np.random.Generator,
    *,
    camera: CameraConfig = CameraConfig(),
    noise_std_mm: float = 4.0,
    occluded: bool = False,
    instigator_first: bool | None = None,
    sample_id: str = "sample",
) -> DyadSample:
    """Generate one labeled capture; bit-deterministic given the rng state.

    ``occluded`` injects a contiguous window during which one body drops
    out of tracking and the other's confidences degrade. When
    ``instigator_first`` is None the subject order is drawn from ``rng``.
    """
    label = InteractionLabel(label)
    if label not in MOTION_TEMPLATES:
        raise ValueError(f"no motion template for class {label!r}")
    tt = np.arange(FRAMES_PER_SAMPLE, dtype=np.float64) / FPS

    if instigator_first is None:
        instigator_first = bool(rng.integers(2))
    instigator_person = int(rng.integers(2))
    bodies = [_build_body(p) for p in pair.persons]
    inst_body = bodies[instigator_person]
    recv_body = bodies[1 - instigator_person]

    ctx = _Ctx(
        tt=tt,
        amp=pair.amplitude * float(rng.uniform(0.92, 1.08)),
        tempo=pair.tempo,
        rng=rng,
    )
    inst_track, recv_track, separation = MOTION_TEMPLATES[label](ctx, inst_body, recv_body)

    # Place the dyad: instigator faces +y at -sep/2, receiver faces -y.
    world = []
    for track, body, facing, sign in (
        (inst_track, inst_body, 0.0, -1.0),
        (recv_track, recv_body, math.pi, 1.0),
    ):
        yaw = facing + rng.uniform(-0.15, 0.15)
        c, s = math.cos(yaw), math.sin(yaw)
        rot = track.copy()
        rot[..., 0] = track[..., 0] * c - track[..., 1] * s
        rot[..., 1] = track[..., 0] * s + track[..., 1] * c
        rot[..., 0] += rng.uniform(-60.0, 60.0)
        rot[..., 1] += sign * separation[:, None] / 2.0
        rot[..., 2] += body.pelvis_height
        world.append(rot)

    # Whole-dyad orientation and placement on the interaction area.
    theta = math.radians(orientation_deg)
    c, s = math.cos(theta), math.sin(theta)
    area_w, area_d = camera.area_mm
    center_x = rng.uniform(-0.22, 0.22) * area_w
    center_y = camera.standoff_mm + area_d / 2.0 + rng.uniform(-0.18, 0.18) * area_d
    for rot in world:
        x = rot[..., 0] * c - rot[..., 1] * s
        y = rot[..., 0] * s + rot[..., 1] * c
        rot[..., 0] = x + center_x
        rot[..., 1] = y + center_y

    cam_tracks = [_camera_transform(w, camera) for w in world]
    for track in cam_tracks:
        track += rng.normal(0.0, noise_std_mm, size=track.shape)

    confidences = [
        np.full((FRAMES_PER_SAMPLE, NUM_JOINTS), int(ConfidenceLevel.HIGH), dtype=np.uint8)
        for _ in range(2)
    ]

    occluded_window: range | None = None
    dropped_role = 0  # 0 = instigator occluded, 1 = receiver occluded
    if occluded:
        length = int(rng.integers(15, 36))
        start = int(rng.integers(5, FRAMES_PER_SAMPLE - length - 4))
        occluded_window = range(start, start + length)
        dropped_role = int(rng.integers(2))
        degrade = rng.random((length, NUM_JOINTS))
        conf = confidences[1 - dropped_role]
        window = np.arange(start, start + length)
        conf[window] = np.where(degrade < 0.08, int(ConfidenceLevel.NONE),
                                np.where(degrade < 0.25, int(ConfidenceLevel.LOW),
                                         conf[window]))

    # subject slots: (instigator, receiver) or the reverse
    role_order = (0, 1) if instigator_first else (1, 0)

    frames = []
    for t in range(FRAMES_PER_SAMPLE):
        in_window = occluded_window is not None and t in occluded_window
        poses = tuple(
            BodyPose(cam_tracks[role][t], confidences[role][t])
            for role in role_order
            if not (in_window and role == dropped_role)
        )
        frames.append(DyadFrame(t, poses))

    return DyadSample(
        frames=tuple(frames),
        label=label,
        sample_id=sample_id,
        pair_id=pair.pair_id,
        occluded_frames=frozenset(occluded_window or ()),
    )


# ---------------------------------------------------------------------------
# Dataset assembly: class-balanced enumeration over pairs x classes x reps
# with keyed per-sample streams and a globally chosen occlusion subset.
# ---------------------------------------------------------------------------


def _sample_plan(cfg: SynthConfig) -> list[dict]:
    """Deterministic per-sample plan: id, class, pair, orientation seed
    inputs, balanced subject order, occlusion membership."""
    n = cfg.n_samples
    n_occluded = int(cfg.occlusion_rate * n)
    occluded_set = set(
        keyed_rng(cfg.seed, "occlusion-subset").permutation(n)[:n_occluded].tolist()
    )
    plan = []
    index = 0
    for pair_idx in range(cfg.n_pairs):
        for label in cfg.classes:
            order_rng = keyed_rng(cfg.seed, "order", pair_idx, int(label))
            half = (cfg.reps_per_class + 1) // 2
            order = np.zeros(cfg.reps_per_class, dtype=bool)
            order[order_rng.permutation(cfg.reps_per_class)[:half]] = True
            for rep in range(cfg.reps_per_class):
                plan.append(
                    {
                        "index": index,
                        "sample_id": f"pair{pair_idx:02d}_{label.label_name}_{rep:03d}",
                        "label": label,
                        "pair_index": pair_idx,
                        "rep": rep,
                        "instigator_first": bool(order[rep]),
                        "occluded": index in occluded_set,
                    }
                )
                index += 1
    return plan


def _generate_planned(cfg: SynthConfig, item: dict) -> DyadSample:
    rng = keyed_rng(cfg.seed, "sample", item["index"])
    orientation = float(rng.uniform(0.0, cfg.orientation_range_deg))
    return generate_sample(
        item["label"],
        pair_params(cfg.seed, item["pair_index"]),
        orientation,
        rng,
        camera=cfg.camera,
        noise_std_mm=cfg.noise_std_mm,
        occluded=item["occluded"],
        instigator_first=item["instigator_first"],
        sample_id=item["sample_id"],
    )


def iter_dataset(cfg: SynthConfig):
    """Yield ``(sample, manifest_entry)`` pairs in plan order with O(1)
    memory; the entry carries label, pair, occlusion and order metadata."""
    for item in _sample_plan(cfg):
        sample = _generate_planned(cfg, item)
        yield sample, _manifest_entry(sample, item)


def _manifest_entry(sample: DyadSample, item: dict) -> dict:
    return {
        "sample_id": sample.sample_id,
        "label": sample.label.label_name,
        "pair_id": sample.pair_id,
        "occluded_frames": sorted(sample.occluded_frames),
        "instigator_first": item["instigator_first"],
    }


def build_manifest(cfg: SynthConfig, entries: list[dict], plan: SplitPlan | None = None) -> dict:
    plan = plan or SplitPlan(seed=cfg.seed)
    assignment = split_assignment(entries, plan)
    samples = [dict(e, split=s) for e, s in zip(entries, assignment)]
    return {
        "manifest_version": 1,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "split_plan": plan.to_dict(),
        "samples": samples,
    }


def generate_dataset(
    cfg: SynthConfig, plan: SplitPlan | None = None
) -> tuple[list[DyadSample], dict]:
    """Materialize the whole dataset in memory plus its manifest.

    Fine at benchmark scale; use :func:`iter_dataset` or
    :func:`write_dataset` for the full 4800-sample default, which runs to
    roughly a gigabyte of poses.
    """
    samples, entries = [], []
    for sample, entry in iter_dataset(cfg):
        samples.append(sample)
        entries.append(entry)
    return samples, build_manifest(cfg, entries, plan)


def _write_one(args) -> dict:
    cfg, item, out_dir, fmt = args
    sample = _generate_planned(cfg, item)
    ext = "bin" if fmt == "binary" else "jsonl"
    rel = f"captures/{sample.sample_id}.{ext}"
    serialize_captures([sample], Path(out_dir) / rel, fmt=fmt)
    entry = _manifest_entry(sample, item)
    entry["capture"] = rel
    return entry


def write_dataset(
    cfg: SynthConfig,
    out_dir: str | Path,
    fmt: str = "binary",
    jobs: int = 1,
    plan: SplitPlan | None = None,
) -> dict:
    """Stream the dataset to ``out_dir`` (one capture file per sample,
    plus manifest.json) and return the manifest. Output bytes do not
    depend on ``jobs``."""
    out_dir = Path(out_dir)
    (out_dir / "captures").mkdir(parents=True, exist_ok=True)
    work = [(cfg, item, out_dir, fmt) for item in _sample_plan(cfg)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_write_one, work, chunksize=8))
    else:
        entries = [_write_one(w) for w in work]
    manifest = build_manifest(cfg, entries, plan)
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest
