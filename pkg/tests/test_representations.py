import numpy as np
import pytest

from dyadkit.errors import LayoutError, SampleValidationError
from dyadkit.features import FEATURE_COLS, FeatureMatrix, extract_features
from dyadkit.representations import (
    NUM_INTERBODY_EDGES,
    NUM_NATURAL_EDGES,
    NUM_NODES,
    NUM_TEMPORAL_EDGES,
    DescriptorImage,
    EdgeType,
    build_descriptor,
    build_graph,
    decode_descriptor,
    graph_from_features,
    load_descriptor,
    load_graph,
    node_feature_array,
    node_id,
    save_descriptor,
    save_graph,
    spatial_adjacency,
)
from dyadkit.skeleton import FRAMES_PER_SAMPLE, JointId, swap_subjects

from conftest import random_sample


def random_matrix(rng, occluded=frozenset()) -> FeatureMatrix:
    values = rng.standard_normal((91, 467)).astype(np.float32)
    values[sorted(occluded)] = 0.0
    return FeatureMatrix(values, occluded)


class TestDescriptor:
    def test_shape(self, rng):
        image = build_descriptor(random_matrix(rng))
        assert image.values.shape == (91, 157, 3)

    def test_first_frame_navel_lands_in_second_column(self, rng):
        sample = random_sample(rng)
        matrix = extract_features(sample)
        image = build_descriptor(matrix)
        navel = matrix.values[0, 3:6]  # subject-1 SPINE_NAVAL x, y, z of frame 0
        assert np.array_equal(image.values[0, 1, :], navel)
        assert int(JointId.SPINE_NAVAL) == 1

    def test_zero_matrix_gives_zero_image(self):
        image = build_descriptor(FeatureMatrix(np.zeros((91, 467), dtype=np.float32)))
        assert np.all(image.values == 0.0)

    def test_padding_slots_are_zero(self, rng):
        image = build_descriptor(random_matrix(rng)).values
        assert np.all(image[:, 77, 2] == 0.0)
        assert np.all(image[:, 155, 2] == 0.0)
        assert np.all(image[:, 156, 1] == 0.0)
        assert np.all(image[:, 156, 2] == 0.0)

    def test_inter_distance_in_last_column(self, rng):
        matrix = random_matrix(rng)
        image = build_descriptor(matrix)
        assert np.array_equal(image.values[:, 156, 0], matrix.values[:, 466])

    def test_round_trip_exact(self, rng):
        for _ in range(100):
            matrix = random_matrix(rng)
            decoded = decode_descriptor(build_descriptor(matrix))
            assert np.array_equal(decoded.values, matrix.values)

    def test_round_trip_on_extracted_features(self, rng):
        matrix = extract_features(random_sample(rng, occluded={2, 3}))
        decoded = decode_descriptor(
            build_descriptor(matrix), occluded_frames=matrix.occluded_frames
        )
        assert decoded == matrix

    def test_corrupted_padding_raises_layout_error(self, rng):
        image = build_descriptor(random_matrix(rng))
        values = np.array(image.values)
        values[12, 156, 1] = 1.0
        with pytest.raises(LayoutError, match="col 156, channel 1"):
            decode_descriptor(DescriptorImage(values))

    def test_subject_swap_permutes_column_blocks(self, rng):
        sample = random_sample(rng)
        ours = build_descriptor(extract_features(sample)).values
        theirs = build_descriptor(extract_features(swap_subjects(sample))).values
        assert np.array_equal(theirs[:, :78], ours[:, 78:156])
        assert np.array_equal(theirs[:, 78:156], ours[:, :78])
        assert np.array_equal(theirs[:, 156], ours[:, 156])


class TestGraph:
    def test_node_and_edge_counts(self, rng):
        sample = random_sample(rng)
        graph = build_graph(sample, extract_features(sample))
        assert graph.num_nodes == 5824 == NUM_NODES
        counts = graph.edge_counts()
        assert counts[EdgeType.NATURAL] == 5642 == NUM_NATURAL_EDGES
        assert counts[EdgeType.TEMPORAL] == 5760 == NUM_TEMPORAL_EDGES
        assert counts[EdgeType.INTERBODY] == 91 == NUM_INTERBODY_EDGES

    def test_no_duplicate_edges(self, rng):
        sample = random_sample(rng)
        graph = build_graph(sample, extract_features(sample))
        seen = set()
        for edge_type in EdgeType:
            for rec in graph.edges[edge_type]:
                key = (int(rec["src"]), int(rec["dst"]))
                assert key not in seen
                seen.add(key)

    def test_static_sample_has_zero_temporal_attributes(self, rng):
        from dyadkit.skeleton import DyadFrame, DyadSample

        sample = random_sample(rng)
        frames = tuple(
            DyadFrame(t, sample.frames[0].bodies) for t in range(FRAMES_PER_SAMPLE)
        )
        static = DyadSample(frames, sample.label, "s", "p")
        graph = build_graph(static, extract_features(static))
        assert np.all(graph.edges[EdgeType.TEMPORAL]["attr"] == 0.0)

    def test_fully_occluded_sample_zero_features_topology_intact(self, rng):
        sample = random_sample(rng, occluded=set(range(91)))
        graph = build_graph(sample, extract_features(sample))
        assert np.all(graph.node_features == 0.0)
        for edge_type in EdgeType:
            assert np.all(graph.edges[edge_type]["attr"] == 0.0)
        assert graph.edge_counts()[EdgeType.NATURAL] == NUM_NATURAL_EDGES

    def test_topology_independent_of_coordinates(self, rng):
        a = graph_from_features(random_matrix(rng))
        b = graph_from_features(random_matrix(rng, occluded={1, 2}))
        for edge_type in EdgeType:
            assert np.array_equal(a.edges[edge_type]["src"], b.edges[edge_type]["src"])
            assert np.array_equal(a.edges[edge_type]["dst"], b.edges[edge_type]["dst"])

    def test_occlusion_zeroes_incident_edges_only(self, rng):
        sample = random_sample(rng, occluded={40})
        graph = build_graph(sample, extract_features(sample))
        tmp = graph.edges[EdgeType.TEMPORAL]
        spans_occluded = (tmp["src"] // 64 == 40) | (tmp["dst"] // 64 == 40)
        assert np.all(tmp["attr"][spans_occluded] == 0.0)
        # recentered SPINE_NAVAL sits at the origin, so its displacement is
        # always zero; every other unoccluded joint moves in this fixture
        navel = (tmp["src"] % 32) == int(JointId.SPINE_NAVAL)
        assert np.all(tmp["attr"][~spans_occluded & ~navel] > 0.0)
        assert np.all(tmp["attr"][navel] == 0.0)

    def test_mismatched_occlusion_bookkeeping_rejected(self, rng):
        sample = random_sample(rng, occluded={3})
        matrix = extract_features(random_sample(rng))
        with pytest.raises(SampleValidationError):
            build_graph(sample, matrix)

    def test_interbody_attr_matches_feature_column(self, rng):
        sample = random_sample(rng)
        matrix = extract_features(sample)
        graph = build_graph(sample, matrix)
        assert np.array_equal(
            graph.edges[EdgeType.INTERBODY]["attr"], matrix.values[:, 466]
        )

    def test_node_id_layout(self):
        assert node_id(0, 0, 0) == 0
        assert node_id(0, 1, 0) == 32
        assert node_id(1, 0, 0) == 64
        assert node_id(90, 1, 31) == 5823

    def test_node_feature_array_layout(self, rng):
        sample = random_sample(rng)
        graph = build_graph(sample, extract_features(sample))
        arr = node_feature_array(graph)
        assert arr.shape == (9, 91, 64)
        assert np.array_equal(arr[:, 17, 32 + 5], graph.node_features[17, 1, 5])

    def test_spatial_adjacency_is_symmetric_normalized(self):
        A = spatial_adjacency()
        assert A.shape == (64, 64)
        assert np.allclose(A, A.T)
        # eigenvalues of the symmetric normalization lie in [-1, 1]
        eig = np.linalg.eigvalsh(A)
        assert eig.max() <= 1.0 + 1e-9


class TestRepresentationIO:
    def test_descriptor_file_round_trip(self, rng, tmp_path):
        image = build_descriptor(random_matrix(rng))
        path = tmp_path / "img.bin"
        save_descriptor(image, path)
        assert load_descriptor(path) == image

    def test_graph_file_round_trip(self, rng, tmp_path):
        sample = random_sample(rng, occluded={8})
        graph = build_graph(sample, extract_features(sample))
        path = tmp_path / "graph.bin"
        save_graph(graph, path)
        assert load_graph(path) == graph

    def test_png_export_writes_sidecar(self, rng, tmp_path):
        pytest.importorskip("PIL")
        from dyadkit.representations import export_png

        image = build_descriptor(random_matrix(rng))
        path = tmp_path / "img.png"
        export_png(image, path)
        assert path.exists()
        assert (tmp_path / "img.png.json").exists()
