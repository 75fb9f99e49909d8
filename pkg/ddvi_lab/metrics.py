# -*- coding: utf-8 -*-
import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.metrics import completeness_score, normalized_mutual_info_score
from sklearn.metrics.cluster import contingency_matrix

from . import defaults, mob_log
from .exceptions import ContractViolation
from .objectives import cluster_assign, evaluate_breakdown
from .priors import KdeDensity, MixturePrior
from .utils import derive_seed, parallel_map


@dataclass
class EvalReport(object):
    elbo: float
    mmd: Optional[float] = None
    latent_nll: Optional[float] = None
    knn_acc: Optional[float] = None
    purity: Optional[float] = None
    completeness: Optional[float] = None
    nmi: Optional[float] = None
    n_eval: int = 0

    def to_text(self):
        """One ``key=value`` line per metric; absent metrics are ``na``."""
        lines = []
        for key in defaults.REPORT_KEYS:
            value = getattr(self, key)
            if value is None:
                lines.append("%s=na" % key)
            elif key == "n_eval":
                lines.append("%s=%d" % (key, value))
            else:
                lines.append("%s=%r" % (key, float(value)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            if key not in defaults.REPORT_KEYS:
                raise ValueError("unknown report key %r" % key)
            if value == "na":
                values[key] = None
            elif key == "n_eval":
                values[key] = int(value)
            else:
                values[key] = float(value)
        return cls(**values)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _sets(X, Y):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    X = X.reshape(len(X), -1)
    Y = Y.reshape(len(Y), -1)
    if len(X) == 0 or len(Y) == 0:
        raise ContractViolation("mmd needs two non-empty sample sets")
    if X.shape[1] != Y.shape[1]:
        raise ContractViolation("mmd sets differ in dimension: %d vs %d" % (X.shape[1], Y.shape[1]))
    return X, Y


def _kernel_mean(A, B, sigmas):
    sq = cdist(A, B, "sqeuclidean")
    return sum(np.exp(-sq / (2.0 * s * s)).mean() for s in sigmas)


def mmd_squared(X, Y, sigmas=defaults.MMD_SIGMAS):
    """Biased (V-statistic) MMD^2 with a sum of RBF kernels."""
    X, Y = _sets(X, Y)
    return _kernel_mean(X, X, sigmas) + _kernel_mean(Y, Y, sigmas) - 2.0 * _kernel_mean(X, Y, sigmas)


def mmd(X, Y, sigmas=defaults.MMD_SIGMAS):
    return math.sqrt(max(0.0, mmd_squared(X, Y, sigmas)))


def latent_nll(model_latents, prior_samples, bandwidths=defaults.KDE_BANDWIDTHS):
    """-mean log-density of the prior samples under a KDE of the model's latents."""
    model_latents = np.asarray(model_latents, dtype=np.float64)
    prior_samples = np.asarray(prior_samples, dtype=np.float64)
    if len(model_latents) == 0 or len(prior_samples) == 0:
        raise ContractViolation("latent_nll needs non-empty latent and prior sets")
    return -float(np.mean(KdeDensity(model_latents, bandwidths).log_density(prior_samples)))


def knn_accuracy(latents, labels, k=defaults.KNN_K, chunk=1024):
    """Leave-one-out k-nearest-neighbour accuracy.

    Distance ties go to the lower index, vote ties to the smaller label. K is
    clamped to n - 1; returns ``(accuracy, k_used)``.
    """
    latents = np.asarray(latents, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(latents)
    if n != len(labels):
        raise ContractViolation("%d latents but %d labels" % (n, len(labels)))
    if n < 2:
        raise ContractViolation("knn_accuracy needs at least 2 points, got %d" % n)
    k_used = min(k, n - 1)
    if k_used != k:
        mob_log.info(f"knn: k={k} clamped to {k_used} for n={n}").track_id("").commit()
    minlength = int(labels.max()) + 1

    def correct(start):
        rows = np.arange(start, min(start + chunk, n))
        dist = cdist(latents[rows], latents, "sqeuclidean")
        dist[np.arange(len(rows)), rows] = np.inf
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k_used]
        hits = 0
        for i, idx in enumerate(nearest):
            vote = int(np.argmax(np.bincount(labels[idx], minlength=minlength)))
            hits += vote == labels[rows[i]]
        return hits

    hits = sum(parallel_map(correct, range(0, n, chunk)))
    return hits / float(n), k_used


def _entropy(counts):
    p = counts[counts > 0] / float(counts.sum())
    return float(-np.sum(p * np.log(p)))


def cluster_scores(assignments, true_labels):
    """(purity, completeness, nmi) of a clustering against class labels.

    Completeness is 1 - H(K|C)/H(K) with K the clusters and C the classes
    (1 when H(K) = 0); NMI uses the geometric mean and is 0 when either
    entropy is 0.
    """
    assignments = np.asarray(assignments)
    true_labels = np.asarray(true_labels)
    if len(assignments) != len(true_labels):
        raise ContractViolation("%d assignments but %d labels" % (len(assignments), len(true_labels)))
    if len(assignments) == 0:
        raise ContractViolation("cluster_scores needs at least one item")
    cm = contingency_matrix(true_labels, assignments)
    purity = cm.max(axis=0).sum() / float(len(assignments))
    completeness = completeness_score(true_labels, assignments)
    if _entropy(cm.sum(axis=0)) == 0.0 or _entropy(cm.sum(axis=1)) == 0.0:
        nmi = 0.0
    else:
        nmi = normalized_mutual_info_score(true_labels, assignments, average_method="geometric")
    return float(purity), float(completeness), float(nmi)


def _chunks(n, size):
    return [(start, min(start + size, n)) for start in range(0, n, size)]


def elbo_eval(x, model, config, n_mc=None, seed=None, epoch=None):
    """Item-weighted mean of the breakdown total over the test set."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        return float("nan")
    seed = config.eval_seed if seed is None else seed
    epoch = config.epochs if epoch is None else epoch
    n_mc = config.eval_n_mc if n_mc is None else n_mc
    totals = [evaluate_breakdown(x[a:b], model, config, derive_seed(seed, i), epoch, n_mc=n_mc).total * (b - a)
              for i, (a, b) in enumerate(_chunks(len(x), config.batch_size))]
    return float(np.sum(totals) / len(x))


def model_latents(x, model, seed, batch_size):
    parts = [model.latents(x[a:b], derive_seed(seed, i)) for i, (a, b) in enumerate(_chunks(len(x), batch_size))]
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, model.latent_dim))


def evaluate(model, config, dataset, seed=None, epoch=None, run_id=""):
    """Full report on a dataset (normally the test split)."""
    seed = config.eval_seed if seed is None else seed
    x = dataset.items
    n = len(x)
    report = EvalReport(elbo=elbo_eval(x, model, config, seed=derive_seed(seed, 0), epoch=epoch), n_eval=n)
    if n == 0:
        return report
    latents = model_latents(x, model, derive_seed(seed, 1), config.batch_size)
    prior_z, _ = model.prior.sample(config.eval_n_samples, derive_seed(seed, 2))
    if len(prior_z):
        report.latent_nll = latent_nll(latents, prior_z)
        generated = model.decoder.decode(prior_z).data
        squared = mmd_squared(generated, x)
        report.mmd = math.sqrt(max(0.0, squared))
        mob_log.info(f"eval: mmd^2={squared!r}, n_generated={len(generated)}, n_test={n}").track_id(run_id).commit()
    if dataset.labels is not None and n > 1:
        report.knn_acc, _ = knn_accuracy(latents, dataset.labels, config.knn_k)
        if isinstance(model.prior, MixturePrior):
            assignments = cluster_assign(latents, model.prior)
            report.purity, report.completeness, report.nmi = cluster_scores(assignments, dataset.labels)
    return report
