"""Superpixel graph construction and the digit dataset writer."""

import json

import numpy as np
import pytest

from polynet.errors import PolyNetError
from polynet.tasks import (
    GraphSample,
    digit_images,
    load_graph_dataset,
    superpixel_graph,
    synthesize_graph_dataset,
    upscale,
)


def checker(size=32):
    image = np.zeros((size, size))
    image[: size // 2, : size // 2] = 1.0
    image[size // 2 :, size // 2 :] = 0.6
    return image


def test_node_count_is_exact():
    rng = np.random.default_rng(0)
    for _ in range(20):
        image = rng.random((32, 32))
        g = superpixel_graph(image, n_nodes=75)
        assert g.features.shape == (75, 1)
        assert g.positions.shape == (75, 2)


def test_blank_image_all_features_minus_one():
    g = superpixel_graph(np.zeros((32, 32)), n_nodes=75)
    np.testing.assert_array_equal(g.features, -1.0)
    # clusters tile the grid, so adjacency stays grid-like: every node has
    # between 2 and 8 spatial neighbours
    degrees = np.bincount(g.edges.ravel(), minlength=75)
    assert degrees.min() >= 2
    assert degrees.max() <= 8


def test_feature_and_position_ranges():
    rng = np.random.default_rng(1)
    for _ in range(5):
        g = superpixel_graph(rng.random((24, 40)))
        assert np.all(g.features >= -1.0) and np.all(g.features <= 1.0)
        assert np.all(g.positions >= -1.0) and np.all(g.positions <= 1.0)


def test_deterministic():
    image = checker()
    a = superpixel_graph(image, label=3, sample_id="x")
    b = superpixel_graph(image, label=3, sample_id="x")
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.edges, b.edges)


def test_edges_are_valid_and_connected_ish():
    g = superpixel_graph(checker())
    assert g.edges.ndim == 2 and g.edges.shape[1] == 2
    assert np.all(g.edges[:, 0] < g.edges[:, 1]), "edges stored with i < j"
    assert np.all(g.edges < 75)
    # no duplicate edges
    keys = g.edges[:, 0] * 75 + g.edges[:, 1]
    assert np.unique(keys).size == keys.size


def test_too_small_image_rejected():
    with pytest.raises(PolyNetError):
        superpixel_graph(np.zeros((8, 8)), n_nodes=75)


def test_intensity_maps_to_feature_scale():
    # constant half-intensity image: mean 0.5 -> feature 2*0.5-1 = 0
    g = superpixel_graph(np.full((32, 32), 0.5))
    np.testing.assert_allclose(g.features, 0.0, atol=1e-12)


def test_upscale_repeats_pixels():
    image = np.array([[0.0, 1.0], [0.5, 0.25]])
    big = upscale(image, 3)
    assert big.shape == (6, 6)
    assert np.all(big[:3, :3] == 0.0)
    assert np.all(big[:3, 3:] == 1.0)


def test_sample_json_round_trip(tmp_path):
    g = superpixel_graph(checker(), label=7, sample_id="rt")
    path = tmp_path / "g.json"
    g.save(path)
    h = GraphSample.load(path)
    np.testing.assert_array_equal(g.features, h.features)
    np.testing.assert_array_equal(g.positions, h.positions)
    np.testing.assert_array_equal(g.edges, h.edges)
    assert h.label == 7
    # file follows the documented shape
    payload = json.loads(path.read_text())
    assert set(payload) == {"nodes", "edges", "label"}
    assert set(payload["nodes"][0]) == {"feat", "pos"}


def test_network_input_wiring():
    g = superpixel_graph(checker(), label=2, sample_id="w")
    sample = g.to_network_input()
    assert sample.features.shape == (75, 3)
    assert len(sample.adjacencies) == 1
    assert sample.pools == []
    assert sample.label == 2
    # feature columns: intensity then the two position channels
    np.testing.assert_array_equal(sample.features[:, :1], g.features)
    np.testing.assert_array_equal(sample.features[:, 1:], g.positions)


def test_digit_images_shape_and_range():
    images, labels = digit_images()
    assert images.shape[1:] == (8, 8)
    assert images.shape[0] == labels.shape[0] >= 1000
    assert images.min() >= 0.0 and images.max() <= 1.0
    assert set(np.unique(labels)) == set(range(10))


def test_dataset_writer_layout_and_determinism(tmp_path):
    a = synthesize_graph_dataset(tmp_path / "a", n_train=6, n_test=3, seed=4)
    b = synthesize_graph_dataset(tmp_path / "b", n_train=6, n_test=3, seed=4)
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (
        tmp_path / "b" / "manifest.json"
    ).read_bytes()
    train_files = sorted((tmp_path / "a" / "train").glob("*.json"))
    assert len(train_files) == 6
    for fa in train_files:
        fb = tmp_path / "b" / "train" / fa.name
        assert fa.read_bytes() == fb.read_bytes()
    assert a["splits"]["train"] == b["splits"]["train"]

    samples = load_graph_dataset(tmp_path / "a", "test")
    assert len(samples) == 3
    assert all(s.features.shape == (75, 1) for s in samples)


def test_load_missing_dataset_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_graph_dataset(tmp_path / "nope", "train")
