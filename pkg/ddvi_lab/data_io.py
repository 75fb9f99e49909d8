# -*- coding: utf-8 -*-
"""Dataset loaders: IDX image files, delimited matrices, PCA, synthetic lifts."""
import csv
import struct
from collections import namedtuple
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import expit
from sklearn.utils.extmath import randomized_svd

from . import defaults, mob_log
from .exceptions import (BadMagicError, ContractViolation, CountMismatchError, MatrixParseError,
                         TruncatedPayloadError)
from .priors import prior_from_config, sample_prior
from .utils import derive_seed, rng

PcaResult = namedtuple("PcaResult", ["projected", "components", "variances", "mean", "ratio"])


@dataclass
class Dataset(object):
    items: np.ndarray
    labels: Optional[np.ndarray] = None
    kind: str = "continuous"  # binary-image | continuous
    name: str = ""

    def __post_init__(self):
        self.items = np.asarray(self.items, dtype=np.float64)
        if self.items.ndim != 2:
            raise ContractViolation("dataset items must be an n x D matrix, got shape %s" % (self.items.shape,))
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != len(self.items):
                raise ContractViolation("%d labels for %d items" % (len(self.labels), len(self.items)))
        if self.kind == "binary-image" and self.items.size and (self.items.min() < 0 or self.items.max() > 1):
            raise ContractViolation("binary-image items must lie in [0, 1]")

    def __len__(self):
        return len(self.items)

    @property
    def dim(self):
        return self.items.shape[1]

    def subset(self, index):
        labels = None if self.labels is None else self.labels[index]
        return replace(self, items=self.items[index], labels=labels)


def _read(path):
    with open(path, "rb") as f:
        return f.read()


def parse_idx_images(data, path="<bytes>"):
    """n x (rows*cols) matrix in [0, 1] from the bytes of an IDX image file."""
    if len(data) < 16:
        raise TruncatedPayloadError(path, 16, len(data))
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != defaults.IDX_IMAGES_MAGIC:
        raise BadMagicError(path, magic, defaults.IDX_IMAGES_MAGIC)
    expected = count * rows * cols
    payload = data[16:16 + expected]
    if len(payload) < expected:
        raise TruncatedPayloadError(path, expected, len(payload))
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return pixels.reshape(count, rows * cols)


def parse_idx_labels(data, path="<bytes>"):
    if len(data) < 8:
        raise TruncatedPayloadError(path, 8, len(data))
    magic, count = struct.unpack(">II", data[:8])
    if magic != defaults.IDX_LABELS_MAGIC:
        raise BadMagicError(path, magic, defaults.IDX_LABELS_MAGIC)
    payload = data[8:8 + count]
    if len(payload) < count:
        raise TruncatedPayloadError(path, count, len(payload))
    return np.frombuffer(payload, dtype=np.uint8).astype(np.int64)


def load_idx(images_path, labels_path=None):
    items = parse_idx_images(_read(images_path), images_path)
    labels = None
    if labels_path:
        labels = parse_idx_labels(_read(labels_path), labels_path)
        if len(labels) != len(items):
            raise CountMismatchError(len(items), len(labels))
    return Dataset(items, labels, kind="binary-image", name=str(images_path))


def load_matrix_csv(path, delimiter=",", label_column=False):
    """Numeric table, rows in file order. With ``label_column`` the last column holds int labels."""
    rows = []
    width = None
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f, delimiter=delimiter), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise MatrixParseError(lineno, "expected %d columns, found %d" % (width, len(row)))
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                bad = next(cell for cell in row if not _is_float(cell))
                raise MatrixParseError(lineno, "non-numeric cell %r" % bad)
    table = np.array(rows, dtype=np.float64).reshape(len(rows), width or 0)
    labels = None
    if label_column:
        if table.shape[1] < 1:
            raise MatrixParseError(1, "no label column")
        labels = table[:, -1].astype(np.int64)
        table = table[:, :-1]
    return Dataset(table, labels, kind="continuous", name=str(path))


def _is_float(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def write_matrix_csv(path, items, labels=None, delimiter=","):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, delimiter=delimiter, lineterminator="\n")
        for i, row in enumerate(np.asarray(items, dtype=np.float64)):
            cells = ["%.17g" % v for v in row]
            if labels is not None:
                cells.append("%d" % labels[i])
            writer.writerow(cells)


def _fix_signs(components):
    """Make the largest-magnitude entry of every component positive."""
    idx = np.argmax(np.abs(components), axis=0)
    signs = np.sign(components[idx, np.arange(components.shape[1])])
    signs[signs == 0] = 1.0
    return components * signs


def pca_project(X, k, scale=1.0):
    """Project mean-centred rows onto the top-k principal directions.

    Covariance eigendecomposition up to ``PCA_EIGH_MAX_DIM`` features,
    randomized SVD above. The projection is divided by ``scale``.
    """
    X = np.asarray(X, dtype=np.float64)
    n, D = X.shape
    if not 1 <= k <= min(n, D):
        raise ContractViolation("PCA needs 1 <= k <= min(n, D) = %d, got %d" % (min(n, D), k))
    mean = X.mean(axis=0)
    Xc = X - mean
    denom = max(n - 1, 1)
    if D <= defaults.PCA_EIGH_MAX_DIM:
        cov = Xc.T @ Xc / denom
        values, vectors = np.linalg.eigh(cov)
        order = np.argsort(values, kind="stable")[::-1][:k]
        variances = np.clip(values[order], 0.0, None)
        components = vectors[:, order]
        total = float(np.clip(values, 0.0, None).sum())
    else:
        _, s, vt = randomized_svd(Xc, n_components=k, random_state=0)
        variances = s ** 2 / denom
        components = vt.T
        total = float(np.sum(Xc * Xc) / denom)
    components = _fix_signs(components)
    ratio = variances / total if total > 0 else np.zeros_like(variances)
    return PcaResult(Xc @ components / scale, components, variances, mean, ratio)


def genotype_features(X, k=None, scale=defaults.GENOTYPE_SCALE):
    """Genotype preset: top min(1000, n-1, D) components divided by 30."""
    X = np.asarray(X, dtype=np.float64)
    n, D = X.shape
    if k is None:
        k = min(defaults.GENOTYPE_COMPONENTS, n - 1, D)
    return pca_project(X, k, scale).projected


def make_synthetic(prior, n, seed, dim=defaults.SYNTHETIC_DIM, head="sigmoid", lift_seed=0,
                   hidden=defaults.SYNTHETIC_LIFT_HIDDEN):
    """Prior samples pushed through a fixed random tanh lift to ``dim`` features.

    The lift depends only on ``lift_seed``; the sigmoid head gives a
    binary-image style dataset in (0, 1).
    """
    z, labels = sample_prior(prior, n, seed)
    gen = rng(lift_seed)
    w1 = gen.normal(0.0, defaults.SYNTHETIC_LIFT_SCALE, size=(prior.dim, hidden))
    b1 = gen.normal(0.0, 0.5, size=hidden)
    w2 = gen.normal(0.0, defaults.SYNTHETIC_OUT_SCALE / np.sqrt(hidden), size=(hidden, dim))
    out = np.tanh(z @ w1 + b1) @ w2
    if head == "sigmoid":
        return Dataset(expit(out), labels, kind="binary-image", name="synthetic-%s" % prior.kind)
    return Dataset(out, labels, kind="continuous", name="synthetic-%s" % prior.kind)


def load_dataset(config):
    """The configured dataset, after optional PCA."""
    if config.data_kind == "idx":
        dataset = load_idx(config.images_path, config.labels_path or None)
    elif config.data_kind == "matrix":
        dataset = load_matrix_csv(config.matrix_path, config.delimiter, config.label_column)
    elif config.data_kind == "synthetic":
        dataset = make_synthetic(prior_from_config(config), config.n_items, derive_seed(config.seed, 3),
                                 dim=config.data_dim, head=config.head, lift_seed=config.lift_seed)
    else:
        raise ContractViolation("unknown data kind %r" % config.data_kind)
    if config.pca_components:
        if len(dataset) < 2:
            raise ContractViolation("PCA needs at least 2 items, dataset %s has %d" % (dataset.name, len(dataset)))
        k = min(config.pca_components, len(dataset) - 1, dataset.dim)
        mob_log.info(f"pca: {dataset.dim} features -> {k} components, scale {config.pca_scale}").track_id("").commit()
        dataset = replace(dataset, items=pca_project(dataset.items, k, config.pca_scale).projected,
                          kind="continuous")
    return dataset


def split_dataset(dataset, test_fraction, seed):
    """(train, test) by a seeded permutation."""
    n = len(dataset)
    order = rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    return dataset.subset(np.sort(order[n_test:])), dataset.subset(np.sort(order[:n_test]))


def label_mask(n, fraction, seed):
    """Boolean mask of the items whose labels are visible in semi-supervised training."""
    mask = np.zeros(n, dtype=bool)
    mask[rng(seed).permutation(n)[:int(round(n * fraction))]] = True
    return mask
