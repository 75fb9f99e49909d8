# -*- coding: utf-8 -*-
import struct
import warnings

import numpy as np
import pytest

from ddvi_lab import data_io, defaults
from ddvi_lab.data_io import (Dataset, genotype_features, label_mask, load_dataset, load_idx, load_matrix_csv,
                              make_synthetic, parse_idx_images, parse_idx_labels, pca_project, split_dataset,
                              write_matrix_csv)
from ddvi_lab.exceptions import (BadMagicError, ContractViolation, CountMismatchError, MatrixParseError,
                                 TruncatedPayloadError)
from ddvi_lab.priors import PinwheelPrior


def idx_images(pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    count, rows, cols = pixels.shape
    return struct.pack(">IIII", defaults.IDX_IMAGES_MAGIC, count, rows, cols) + pixels.tobytes()


def idx_labels(labels):
    return struct.pack(">II", defaults.IDX_LABELS_MAGIC, len(labels)) + bytes(labels)


def test_parse_idx_images():
    items = parse_idx_images(idx_images([[[0, 255], [51, 102]], [[255, 255], [0, 0]]]))
    np.testing.assert_allclose(items, [[0.0, 1.0, 0.2, 0.4], [1.0, 1.0, 0.0, 0.0]])


def test_idx_bad_magic():
    data = struct.pack(">IIII", 0x00000801, 1, 1, 1) + b"\x00"
    with pytest.raises(BadMagicError) as info:
        parse_idx_images(data, "x.idx")
    assert info.value.magic == 0x801
    assert "x.idx" in str(info.value)


def test_idx_truncated():
    data = idx_images(np.zeros((2, 2, 2)))[:-1]
    with pytest.raises(TruncatedPayloadError) as info:
        parse_idx_images(data)
    assert (info.value.expected, info.value.found) == (8, 7)
    with pytest.raises(TruncatedPayloadError):
        parse_idx_images(b"\x00\x00")
    with pytest.raises(TruncatedPayloadError):
        parse_idx_labels(idx_labels([1, 2, 3])[:-2])


def test_parse_idx_labels():
    np.testing.assert_array_equal(parse_idx_labels(idx_labels([7, 0, 9])), [7, 0, 9])


def test_load_idx_files(tmp_path):
    images = tmp_path / "images.idx"
    labels = tmp_path / "labels.idx"
    images.write_bytes(idx_images(np.full((3, 2, 2), 255)))
    labels.write_bytes(idx_labels([1, 2, 3]))
    dataset = load_idx(str(images), str(labels))
    assert dataset.kind == "binary-image"
    assert dataset.items.shape == (3, 4)
    np.testing.assert_array_equal(dataset.labels, [1, 2, 3])
    labels.write_bytes(idx_labels([1, 2]))
    with pytest.raises(CountMismatchError):
        load_idx(str(images), str(labels))


def test_load_matrix_csv(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1,2,0\n\n3.5,-4,1\n")
    dataset = load_matrix_csv(str(path), label_column=True)
    np.testing.assert_array_equal(dataset.items, [[1.0, 2.0], [3.5, -4.0]])
    np.testing.assert_array_equal(dataset.labels, [0, 1])
    plain = load_matrix_csv(str(path))
    assert plain.items.shape == (2, 3)
    assert plain.labels is None


def test_load_matrix_tab_delimited(tmp_path):
    path = tmp_path / "m.tsv"
    path.write_text("1\t2\n3\t4\n")
    np.testing.assert_array_equal(load_matrix_csv(str(path), delimiter="\t").items, [[1, 2], [3, 4]])


def test_matrix_parse_errors(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2\n3\n")
    with pytest.raises(MatrixParseError) as info:
        load_matrix_csv(str(ragged))
    assert info.value.row == 2
    text = tmp_path / "text.csv"
    text.write_text("1,2\n3,abc\n")
    with pytest.raises(MatrixParseError, match="abc"):
        load_matrix_csv(str(text))


def test_write_matrix_csv_is_exact(tmp_path):
    items = np.array([[0.1, 1.0 / 3.0], [-2.5e-8, 7.0]])
    path = str(tmp_path / "out.csv")
    write_matrix_csv(path, items, labels=[4, 5])
    dataset = load_matrix_csv(path, label_column=True)
    np.testing.assert_array_equal(dataset.items, items)
    np.testing.assert_array_equal(dataset.labels, [4, 5])


def test_dataset_checks():
    with pytest.raises(ContractViolation, match="n x D"):
        Dataset(np.zeros(3))
    with pytest.raises(ContractViolation, match="labels"):
        Dataset(np.zeros((3, 2)), labels=[0, 1])
    with pytest.raises(ContractViolation, match=r"\[0, 1\]"):
        Dataset(np.full((1, 2), 2.0), kind="binary-image")


def correlated(n=200, seed=0):
    gen = np.random.default_rng(seed)
    base = gen.normal(size=(n, 1))
    return np.hstack([3.0 * base, base + 0.1 * gen.normal(size=(n, 1)), gen.normal(size=(n, 1)) * 0.5])


def test_pca_projection():
    X = correlated()
    result = pca_project(X, 2)
    assert result.projected.shape == (200, 2)
    np.testing.assert_allclose(result.projected.mean(axis=0), 0.0, atol=1e-10)
    assert result.variances[0] >= result.variances[1]
    np.testing.assert_allclose(result.components.T @ result.components, np.eye(2), atol=1e-10)
    np.testing.assert_allclose(np.var(result.projected, axis=0, ddof=1), result.variances, rtol=1e-8)
    assert result.ratio.sum() <= 1.0 + 1e-12
    scaled = pca_project(X, 2, scale=30.0)
    np.testing.assert_allclose(scaled.projected, result.projected / 30.0)


def test_pca_signs_are_fixed():
    result = pca_project(correlated(), 3)
    idx = np.argmax(np.abs(result.components), axis=0)
    assert np.all(result.components[idx, np.arange(3)] > 0)
    flipped = pca_project(-correlated(), 3)
    np.testing.assert_allclose(np.abs(flipped.projected), np.abs(result.projected), atol=1e-8)


def test_randomized_path_agrees(monkeypatch):
    X = correlated()
    exact = pca_project(X, 2)
    monkeypatch.setattr(defaults, "PCA_EIGH_MAX_DIM", 0)
    approx = pca_project(X, 2)
    np.testing.assert_allclose(approx.variances, exact.variances, rtol=1e-6)
    np.testing.assert_allclose(approx.projected, exact.projected, atol=1e-6)


@pytest.mark.parametrize("k", [0, 4])
def test_pca_rank_bounds(k):
    with pytest.raises(ContractViolation, match="PCA"):
        pca_project(correlated(), k)


def test_genotype_features():
    X = np.random.default_rng(1).integers(0, 3, size=(12, 40)).astype(float)
    features = genotype_features(X)
    assert features.shape == (12, 11)
    np.testing.assert_allclose(features, pca_project(X, 11).projected / defaults.GENOTYPE_SCALE)


def test_make_synthetic():
    a = make_synthetic(PinwheelPrior(), 100, 3, dim=8)
    b = make_synthetic(PinwheelPrior(), 100, 3, dim=8)
    np.testing.assert_array_equal(a.items, b.items)
    assert a.items.shape == (100, 8)
    assert a.kind == "binary-image"
    assert a.items.min() > 0.0 and a.items.max() < 1.0
    other_lift = make_synthetic(PinwheelPrior(), 100, 3, dim=8, lift_seed=1)
    np.testing.assert_array_equal(other_lift.labels, a.labels)
    assert not np.allclose(other_lift.items, a.items)
    assert make_synthetic(PinwheelPrior(), 10, 3, dim=8, head="identity").kind == "continuous"


def test_load_dataset_with_pca(make_config):
    dataset = load_dataset(make_config({"data.pca_components": 3, "data.pca_scale": 2.0}))
    assert dataset.items.shape == (120, 3)
    assert dataset.kind == "continuous"


def test_load_dataset_matrix(make_config, tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1;2;0\n3;4;1\n")
    config = make_config({"data.kind": "matrix", "data.matrix_path": str(path), "data.delimiter": ";",
                          "data.label_column": True})
    dataset = load_dataset(config)
    np.testing.assert_array_equal(dataset.labels, [0, 1])


def test_pca_needs_two_items(make_config, tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("1,2,3\n")
    config = make_config({"data.kind": "matrix", "data.matrix_path": str(path), "data.pca_components": 2})
    with pytest.raises(ContractViolation, match="at least 2 items"):
        load_dataset(config)


def test_synthetic_sigmoid_head_saturates_without_overflow(monkeypatch):
    monkeypatch.setattr(defaults, "SYNTHETIC_OUT_SCALE", 1e4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        dataset = make_synthetic(PinwheelPrior(), 200, 0, dim=8)
    assert np.all(np.isfinite(dataset.items))
    assert dataset.items.min() >= 0.0 and dataset.items.max() <= 1.0
    assert dataset.kind == "binary-image"


def test_split_dataset():
    dataset = Dataset(np.arange(20, dtype=float).reshape(10, 2), np.arange(10))
    train, test = split_dataset(dataset, 0.3, 4)
    assert (len(train), len(test)) == (7, 3)
    assert sorted(train.labels.tolist() + test.labels.tolist()) == list(range(10))
    again, _ = split_dataset(dataset, 0.3, 4)
    np.testing.assert_array_equal(again.items, train.items)
    assert np.all(np.diff(train.labels) > 0)


def test_label_mask():
    mask = label_mask(50, 0.2, 1)
    assert mask.sum() == 10
    np.testing.assert_array_equal(mask, label_mask(50, 0.2, 1))
    assert label_mask(5, 0.0, 1).sum() == 0
    assert data_io.label_mask(5, 1.0, 1).all()
