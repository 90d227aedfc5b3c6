import numpy as np
import pytest

from dyadkit.features import (
    ANGLE_TRIPLES,
    DISTANCE_PAIRS,
    FEATURE_COLS,
    INTER_DISTANCE_COL,
    SUBJECT_COLS,
    AngleId,
    DistanceId,
    FeatureMatrix,
    angular_velocity,
    column_labels,
    distances,
    extract_features,
    joint_angle,
    joint_velocities,
    load_feature_matrix,
    recenter_body,
    save_feature_csv,
    save_feature_matrix,
    zero_occluded,
)
from dyadkit.skeleton import (
    FRAME_DT,
    NUM_JOINTS,
    BodyPose,
    ConfidenceLevel,
    DyadSample,
    JointId,
    swap_subjects,
)

from conftest import random_pose, random_sample


def pose_with(joints: dict[JointId, tuple], conf_value: int = 3) -> BodyPose:
    arr = np.zeros((NUM_JOINTS, 3))
    for j, xyz in joints.items():
        arr[int(j)] = xyz
    conf = np.full(NUM_JOINTS, conf_value, dtype=np.uint8)
    return BodyPose(arr, conf)


class TestAngleAndDistanceTables:
    def test_twelve_angles_with_distinct_apexes(self):
        assert len(AngleId) == 12
        apexes = [apex for _, apex, _ in ANGLE_TRIPLES.values()]
        assert len(set(apexes)) == 12

    def test_right_elbow_triple_matches_worked_example(self):
        a, apex, b = ANGLE_TRIPLES[AngleId.ELBOW_RIGHT]
        assert apex == JointId.ELBOW_RIGHT
        assert {a, b} == {JointId.WRIST_RIGHT, JointId.SHOULDER_RIGHT}

    def test_five_distances(self):
        assert len(DistanceId) == 5
        assert DISTANCE_PAIRS[DistanceId.WRIST_TO_WRIST] == (
            JointId.WRIST_LEFT,
            JointId.WRIST_RIGHT,
        )


class TestRecenterBody:
    def test_translates_navel_to_origin(self, rng):
        pose = random_pose(rng)
        out = recenter_body(pose)
        assert np.allclose(out.joint(JointId.SPINE_NAVAL), 0.0)
        shift = pose.joint(JointId.SPINE_NAVAL)
        assert np.allclose(out.joint(JointId.HEAD), pose.joint(JointId.HEAD) - shift)
        assert np.array_equal(out.confidences, pose.confidences)

    def test_already_centered_is_identity(self, rng):
        pose = recenter_body(random_pose(rng))
        again = recenter_body(pose)
        assert np.array_equal(again.joints, pose.joints)

    def test_translation_invariance_property(self, rng):
        # recenter(translate(p, v)) == recenter(p) for any offset v
        for _ in range(50):
            pose = random_pose(rng)
            v = rng.uniform(-5000, 5000, size=3)
            shifted = BodyPose(pose.joints + v, pose.confidences)
            assert np.allclose(
                recenter_body(shifted).joints, recenter_body(pose).joints, atol=1e-9
            )


class TestJointVelocities:
    def test_static_joint_is_zero(self, rng):
        pose = random_pose(rng)
        assert np.all(joint_velocities(pose, pose, FRAME_DT) == 0.0)

    def test_unit_displacement_at_30fps(self, rng):
        prev = random_pose(rng)
        curr = BodyPose(prev.joints + np.array([1.0, 0.0, 0.0]), prev.confidences)
        vel = joint_velocities(prev, curr, FRAME_DT)
        assert np.allclose(vel[:, 0], 30.0)
        assert np.allclose(vel[:, 1:], 0.0)

    def test_first_frame_convention(self, rng):
        assert np.all(joint_velocities(None, random_pose(rng), FRAME_DT) == 0.0)

    def test_nonpositive_dt_rejected(self, rng):
        pose = random_pose(rng)
        with pytest.raises(ValueError):
            joint_velocities(pose, pose, 0.0)


class TestJointAngle:
    def test_straight_limb_gives_pi(self):
        pose = pose_with(
            {
                JointId.SHOULDER_RIGHT: (-100, 0, 0),
                JointId.ELBOW_RIGHT: (0, 0, 0),
                JointId.WRIST_RIGHT: (100, 0, 0),
                JointId.SPINE_NAVAL: (0, -500, 0),
            }
        )
        theta, conf = joint_angle(pose, AngleId.ELBOW_RIGHT)
        assert theta == pytest.approx(np.pi)
        assert conf == ConfidenceLevel.HIGH

    def test_perpendicular_gives_half_pi(self):
        pose = pose_with(
            {
                JointId.SHOULDER_RIGHT: (0, 100, 0),
                JointId.ELBOW_RIGHT: (0, 0, 0),
                JointId.WRIST_RIGHT: (100, 0, 0),
            }
        )
        theta, _ = joint_angle(pose, AngleId.ELBOW_RIGHT)
        assert theta == pytest.approx(np.pi / 2)

    def test_45_degrees(self):
        # u = (1, 0, 0), v = (1, 1, 0) -> arccos(1/sqrt(2)) = pi/4
        pose = pose_with(
            {
                JointId.WRIST_RIGHT: (1, 0, 0),
                JointId.SHOULDER_RIGHT: (1, 1, 0),
                JointId.ELBOW_RIGHT: (0, 0, 0),
            }
        )
        theta, _ = joint_angle(pose, AngleId.ELBOW_RIGHT)
        assert theta == pytest.approx(np.pi / 4)

    def test_degenerate_collapse_returns_zero_none(self):
        pose = pose_with({})  # everything at the origin
        theta, conf = joint_angle(pose, AngleId.NECK)
        assert theta == 0.0
        assert conf == ConfidenceLevel.NONE

    def test_angle_always_in_0_pi(self, rng):
        for _ in range(200):
            pose = random_pose(rng)
            for angle in AngleId:
                theta, _ = joint_angle(pose, angle)
                assert 0.0 <= theta <= np.pi


class TestAngularVelocity:
    def test_constant_angle_is_zero(self):
        assert angular_velocity(1.2, 1.2, FRAME_DT) == 0.0

    def test_tenth_radian_at_30fps(self):
        assert angular_velocity(1.0, 1.1, FRAME_DT) == pytest.approx(3.0)

    def test_first_frame_convention(self):
        assert angular_velocity(None, 2.0, FRAME_DT) == 0.0

    def test_nonpositive_dt_rejected(self):
        with pytest.raises(ValueError):
            angular_velocity(1.0, 1.0, -0.1)


class TestDistances:
    def test_identical_wrists_give_zero(self, rng):
        pose = random_pose(rng)
        joints = np.array(pose.joints)
        joints[int(JointId.WRIST_LEFT)] = joints[int(JointId.WRIST_RIGHT)]
        pose = BodyPose(joints, pose.confidences)
        intra, _, _ = distances(pose, random_pose(rng))
        assert intra[int(DistanceId.WRIST_TO_WRIST)] == 0.0

    def test_3_4_5_triangle_inter_distance(self):
        p1 = pose_with({JointId.SPINE_NAVAL: (0, 0, 0)})
        p2 = pose_with({JointId.SPINE_NAVAL: (3, 4, 0)})
        _, _, inter = distances(p1, p2)
        assert inter == pytest.approx(5.0)

    def test_joint_translation_leaves_inter_distance(self, rng):
        for _ in range(50):
            p1, p2 = random_pose(rng), random_pose(rng)
            v = rng.uniform(-3000, 3000, size=3)
            q1 = BodyPose(p1.joints + v, p1.confidences)
            q2 = BodyPose(p2.joints + v, p2.confidences)
            assert distances(q1, q2)[2] == pytest.approx(distances(p1, p2)[2], rel=1e-9)


class TestExtractFeatures:
    def test_shape_is_91_by_467(self, rng):
        matrix = extract_features(random_sample(rng))
        assert matrix.values.shape == (91, 467)
        assert np.isfinite(matrix.values).all()

    def test_frozen_skeletons_have_zero_motion_columns(self, rng):
        pose1 = random_pose(rng, center=(-500, 3000, 900))
        pose2 = random_pose(rng, center=(500, 3000, 900))
        from dyadkit.skeleton import DyadFrame

        frames = tuple(DyadFrame(t, (pose1, pose2)) for t in range(91))
        sample = DyadSample(frames, label=random_sample(rng).label, sample_id="f", pair_id="p")
        matrix = extract_features(sample)
        for base in (0, SUBJECT_COLS):
            vel = matrix.values[:, base + 96 : base + 192]
            assert np.all(vel == 0.0)
            omegas = matrix.values[:, base + 192 + 1 : base + 228 : 3]
            assert np.all(omegas == 0.0)

    def test_matches_per_frame_operations(self, rng):
        # the vectorized path must agree with composing the scalar ops
        sample = random_sample(rng)
        matrix = extract_features(sample)
        coords, conf, _ = sample.pose_arrays()
        t = 37
        for m in range(2):
            pose = BodyPose(coords[t, m], conf[t, m].astype(np.uint8))
            prev = BodyPose(coords[t - 1, m], conf[t - 1, m].astype(np.uint8))
            centered = recenter_body(pose)
            base = m * SUBJECT_COLS
            assert np.allclose(
                matrix.values[t, base : base + 96],
                centered.joints.reshape(-1),
                rtol=1e-6,
                atol=1e-3,
            )
            vel = joint_velocities(recenter_body(prev), centered, FRAME_DT)
            assert np.allclose(
                matrix.values[t, base + 96 : base + 192],
                vel.reshape(-1),
                rtol=1e-5,
                atol=1e-2,
            )
            for k, angle in enumerate(AngleId):
                theta, c = joint_angle(centered, angle)
                assert matrix.values[t, base + 192 + 3 * k] == pytest.approx(theta, abs=1e-6)
                assert matrix.values[t, base + 192 + 3 * k + 2] == float(c)
        p1 = BodyPose(coords[t, 0], conf[t, 0].astype(np.uint8))
        p2 = BodyPose(coords[t, 1], conf[t, 1].astype(np.uint8))
        assert matrix.values[t, INTER_DISTANCE_COL] == pytest.approx(
            distances(p1, p2)[2], rel=1e-6
        )

    def test_first_row_motion_is_zero(self, rng):
        matrix = extract_features(random_sample(rng))
        for base in (0, SUBJECT_COLS):
            assert np.all(matrix.values[0, base + 96 : base + 192] == 0.0)

    def test_subject_swap_exchanges_blocks(self, rng):
        sample = random_sample(rng, occluded={40, 41, 42})
        ours = extract_features(sample).values
        theirs = extract_features(swap_subjects(sample)).values
        assert np.array_equal(theirs[:, :SUBJECT_COLS], ours[:, SUBJECT_COLS : 2 * SUBJECT_COLS])
        assert np.array_equal(theirs[:, SUBJECT_COLS : 2 * SUBJECT_COLS], ours[:, :SUBJECT_COLS])
        assert np.array_equal(theirs[:, INTER_DISTANCE_COL], ours[:, INTER_DISTANCE_COL])

    def test_per_body_translation_only_moves_inter_distance(self, rng):
        sample = random_sample(rng)
        base_matrix = extract_features(sample).values
        v = rng.uniform(-2000, 2000, size=3)
        from dyadkit.skeleton import DyadFrame

        frames = tuple(
            DyadFrame(
                f.frame_index,
                (f.bodies[0], BodyPose(f.bodies[1].joints + v, f.bodies[1].confidences)),
            )
            for f in sample.frames
        )
        moved = DyadSample(frames, sample.label, "s", "p", sample.occluded_frames)
        moved_matrix = extract_features(moved).values
        assert np.allclose(
            moved_matrix[:, :INTER_DISTANCE_COL],
            base_matrix[:, :INTER_DISTANCE_COL],
            rtol=1e-5,
            atol=2e-3,
        )

    def test_occluded_rows_zero(self, rng):
        sample = random_sample(rng, occluded=set(range(10, 20)))
        matrix = extract_features(sample)
        assert np.all(matrix.values[10:20] == 0.0)
        assert np.any(matrix.values[9] != 0.0)
        assert np.any(matrix.values[20] != 0.0)


class TestZeroOccluded:
    def test_empty_set_is_identity(self, rng):
        matrix = extract_features(random_sample(rng))
        assert zero_occluded(matrix, set()) == matrix

    def test_total_occlusion_zeroes_everything(self, rng):
        matrix = extract_features(random_sample(rng))
        out = zero_occluded(matrix, set(range(91)))
        assert np.all(out.values == 0.0)

    def test_window_zeroes_exactly_those_rows(self, rng):
        matrix = extract_features(random_sample(rng))
        out = zero_occluded(matrix, set(range(10, 20)))
        row_sums = np.abs(out.values).sum(axis=1)
        assert np.all(row_sums[10:20] == 0.0)
        assert np.all(row_sums[:10] > 0.0)
        assert np.all(row_sums[20:] > 0.0)

    def test_idempotent(self, rng):
        matrix = extract_features(random_sample(rng))
        once = zero_occluded(matrix, {5, 6})
        twice = zero_occluded(once, {5, 6})
        assert once == twice

    def test_out_of_range_index_rejected(self, rng):
        matrix = extract_features(random_sample(rng))
        with pytest.raises(ValueError):
            zero_occluded(matrix, {91})


class TestFeatureIO:
    def test_binary_round_trip(self, rng, tmp_path):
        matrix = extract_features(random_sample(rng, occluded={4}))
        path = tmp_path / "feat.bin"
        save_feature_matrix(matrix, path)
        loaded = load_feature_matrix(path, occluded_frames=matrix.occluded_frames)
        assert loaded == matrix

    def test_csv_export(self, rng, tmp_path):
        matrix = extract_features(random_sample(rng))
        path = tmp_path / "feat.csv"
        save_feature_csv(matrix, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 92
        assert lines[0].split(",")[466] == "inter_body_distance"

    def test_column_labels_count(self):
        assert len(column_labels()) == FEATURE_COLS


class TestFeatureMatrixType:
    def test_shape_enforced(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.zeros((91, 466)))

    def test_subject_block_view(self, rng):
        matrix = extract_features(random_sample(rng))
        assert matrix.subject_block(0).shape == (91, 233)
        assert matrix.subject_block(1).shape == (91, 233)
        with pytest.raises(ValueError):
            matrix.subject_block(2)
