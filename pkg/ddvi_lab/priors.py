# -*- coding: utf-8 -*-
"""Latent priors p(z), their 10-way partitions, and KDE densities.

Structured priors (pinwheel, swiss roll, square) have no closed-form density;
their log p(z) comes from a :class:`KdeDensity` fitted on prior samples. The
gaussian and mixture priors have analytic, differentiable densities.
"""
import math

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp, ndtr
from scrapy.utils.misc import load_object

from . import defaults, mob_log
from .autodiff import as_tensor, concat
from .autodiff import logsumexp as t_logsumexp
from .exceptions import ContractViolation
from .utils import derive_seed, rng


class KdeDensity(object):
    """Gaussian KDE mixed uniformly over points and bandwidths."""

    def __init__(self, fit_points, bandwidths=defaults.KDE_BANDWIDTHS):
        fit_points = np.asarray(fit_points, dtype=np.float64)
        if fit_points.ndim == 1:
            fit_points = fit_points.reshape(-1, 1)
        if len(fit_points) == 0:
            raise ContractViolation("KDE needs at least one fit point")
        self.fit_points = fit_points
        self.bandwidths = tuple(float(b) for b in bandwidths)

    @property
    def dim(self):
        return self.fit_points.shape[1]

    def _query(self, query):
        query = np.asarray(query, dtype=np.float64)
        single = query.ndim == 1
        query = query.reshape(1, -1) if single else query
        if query.shape[1] != self.dim:
            raise ContractViolation("KDE query dimension %d, fitted on %d" % (query.shape[1], self.dim))
        return query, single

    def log_density(self, query):
        query, single = self._query(query)
        sq = cdist(query, self.fit_points, "sqeuclidean")
        d = self.dim
        logs = [-sq / (2.0 * b * b) - 0.5 * d * math.log(2.0 * math.pi * b * b) for b in self.bandwidths]
        out = logsumexp(np.concatenate(logs, axis=1), axis=1) - math.log(len(self.fit_points) * len(self.bandwidths))
        return out[0] if single else out

    def log_density_tensor(self, query):
        """Differentiable log-density of a batch of queries (one value per row)."""
        query = as_tensor(query)
        d = self.dim
        pts = self.fit_points
        sq = (query.square().sum(axis=1, keepdims=True)
              - 2.0 * (query @ pts.T)
              + (pts * pts).sum(axis=1)[None, :])
        logs = [sq * (-1.0 / (2.0 * b * b)) - 0.5 * d * math.log(2.0 * math.pi * b * b) for b in self.bandwidths]
        return t_logsumexp(concat(logs, axis=1), axis=1) - math.log(len(pts) * len(self.bandwidths))


def kde_log_density(kde, query):
    return kde.log_density(query)


class PriorSpec(object):
    """Base class of the priors. Subclasses set ``kind`` and implement ``_generate``.

    ``_generate(n, rng)`` returns ``(points, positions)``; the label of a point
    comes from its generator position through :meth:`label_of`.
    """

    kind = None
    analytic = False

    def __init__(self, dim=defaults.LATENT_DIM, n_partitions=defaults.N_PARTITIONS, noise=None):
        self.dim = dim
        self.n_partitions = n_partitions
        self.noise = self.default_noise if noise is None or noise < 0 else float(noise)

    default_noise = 0.0

    @classmethod
    def from_config(cls, config):
        return cls(dim=config.prior_dim, noise=config.prior_noise)

    def __repr__(self):
        return "%s(dim=%d, noise=%g)" % (self.__class__.__name__, self.dim, self.noise)

    def sample(self, n, seed):
        if n < 0:
            raise ContractViolation("sample count must be >= 0, got %d" % n)
        if n == 0:
            return np.zeros((0, self.dim)), np.zeros(0, dtype=np.int64)
        points, positions = self._generate(n, rng(seed))
        return points, self.label_of(positions)

    def label_of(self, position):
        """Partition id of a generator position in [0, 1)."""
        position = np.asarray(position, dtype=np.float64)
        labels = np.floor(position * self.n_partitions).astype(np.int64)
        return np.clip(labels, 0, self.n_partitions - 1)

    def _generate(self, n, gen):
        raise NotImplementedError

    def log_density_tensor(self, z):
        raise ContractViolation("prior %r has no analytic density; fit a KDE" % self.kind)

    def fit_kde(self, n_points, seed, label=None, bandwidths=defaults.KDE_BANDWIDTHS):
        if label is None:
            points, _ = self.sample(n_points, seed)
        else:
            points = sample_partition(self, np.full(n_points, label), seed)
        return KdeDensity(points, bandwidths)


class PinwheelPrior(PriorSpec):
    """Ten curved arms; the label is the arm."""

    kind = "pinwheel"
    default_noise = defaults.PINWHEEL_TANGENTIAL_STD

    def _generate(self, n, gen):
        arm = gen.integers(0, self.n_partitions, size=n)
        radial = np.abs(gen.normal(defaults.PINWHEEL_RADIAL_MEAN, defaults.PINWHEEL_RADIAL_STD, size=n)) \
            + defaults.PINWHEEL_RADIAL_OFFSET
        tangential = gen.normal(0.0, self.noise, size=n)
        angle = 2.0 * np.pi * arm / self.n_partitions + defaults.PINWHEEL_RATE * radial
        cos, sin = np.cos(angle), np.sin(angle)
        points = np.stack([radial * cos - tangential * sin, radial * sin + tangential * cos], axis=1)
        # the arm index is the position; label_of maps it back exactly
        return points, (arm + 0.5) / self.n_partitions


class SwissRollPrior(PriorSpec):
    kind = "swiss_roll"
    default_noise = defaults.SWISS_ROLL_NOISE

    def _generate(self, n, gen):
        u = gen.uniform(0.0, 1.0, size=n)
        angle = 3.0 * np.pi * (0.5 + u)
        points = np.stack([angle * np.cos(angle), angle * np.sin(angle)], axis=1) / (3.0 * np.pi * 1.5)
        points = points + gen.normal(0.0, self.noise, size=points.shape)
        return points, u


class SquarePrior(PriorSpec):
    """Perimeter of [-1, 1]^2, walked clockwise from the top-left corner."""

    kind = "square"
    default_noise = defaults.SQUARE_NOISE

    @staticmethod
    def perimeter_point(u):
        s = 4.0 * np.asarray(u, dtype=np.float64)
        side = np.minimum(np.floor(s), 3).astype(np.int64)
        f = s - side
        x = np.choose(side, [-1.0 + 2.0 * f, np.ones_like(f), 1.0 - 2.0 * f, -np.ones_like(f)])
        y = np.choose(side, [np.ones_like(f), 1.0 - 2.0 * f, -np.ones_like(f), -1.0 + 2.0 * f])
        return np.stack([x, y], axis=-1)

    def _generate(self, n, gen):
        u = gen.uniform(0.0, 1.0, size=n)
        points = self.perimeter_point(u) + gen.normal(0.0, self.noise, size=(n, 2))
        return points, u


class GaussianPrior(PriorSpec):
    """Standard normal; partitions are equal-probability angle sectors (deciles for d=1)."""

    kind = "gaussian"
    analytic = True

    def _generate(self, n, gen):
        points = gen.standard_normal(size=(n, self.dim))
        return points, self.position_of(points)

    def position_of(self, points):
        points = np.asarray(points)
        if self.dim == 1:
            return ndtr(points[:, 0])
        angle = np.arctan2(points[:, 1], points[:, 0])
        return (angle + np.pi) / (2.0 * np.pi)

    def log_density(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(-1, self.dim)
        return -0.5 * np.sum(z * z, axis=1) - 0.5 * self.dim * defaults.LOG_2PI

    def log_density_tensor(self, z):
        z = as_tensor(z)
        return z.square().sum(axis=1) * -0.5 - 0.5 * self.dim * defaults.LOG_2PI


class MixturePrior(PriorSpec):
    """Equal-weight isotropic Gaussians with means spread on a circle."""

    kind = "mixture"
    analytic = True

    def __init__(self, dim=defaults.LATENT_DIM, n_partitions=None, noise=None, components=defaults.MIXTURE_COMPONENTS,
                 sigma=defaults.MIXTURE_SIGMA, radius=defaults.MIXTURE_RADIUS, means=None):
        self.components = components if means is None else len(means)
        super().__init__(dim=dim, n_partitions=self.components, noise=noise)
        self.sigma = sigma
        self.radius = radius
        self.means = self._circle_means() if means is None else np.asarray(means, dtype=np.float64)

    @classmethod
    def from_config(cls, config):
        return cls(dim=config.prior_dim, components=config.mixture_components, sigma=config.mixture_sigma,
                   radius=config.mixture_radius)

    def __repr__(self):
        return "MixturePrior(dim=%d, components=%d, sigma=%g)" % (self.dim, self.components, self.sigma)

    def _circle_means(self):
        k = np.arange(self.components)
        means = np.zeros((self.components, self.dim))
        if self.dim == 1:
            means[:, 0] = np.linspace(-self.radius, self.radius, self.components)
        else:
            angle = 2.0 * np.pi * k / self.components
            means[:, 0] = self.radius * np.cos(angle)
            means[:, 1] = self.radius * np.sin(angle)
        return means

    def _generate(self, n, gen):
        comp = gen.integers(0, self.components, size=n)
        points = self.means[comp] + gen.normal(0.0, self.sigma, size=(n, self.dim))
        return points, (comp + 0.5) / self.components

    def log_density(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(-1, self.dim)
        sq = cdist(z, self.means, "sqeuclidean")
        log_k = -sq / (2.0 * self.sigma ** 2) - 0.5 * self.dim * math.log(2.0 * math.pi * self.sigma ** 2)
        return logsumexp(log_k, axis=1) - math.log(self.components)

    def log_density_tensor(self, z):
        z = as_tensor(z)
        sq = (z.square().sum(axis=1, keepdims=True) - 2.0 * (z @ self.means.T)
              + (self.means ** 2).sum(axis=1)[None, :])
        log_k = sq * (-1.0 / (2.0 * self.sigma ** 2)) - 0.5 * self.dim * math.log(2.0 * math.pi * self.sigma ** 2)
        return t_logsumexp(log_k, axis=1) - math.log(self.components)

    def nearest(self, z):
        z = np.asarray(z, dtype=np.float64).reshape(-1, self.dim)
        # argmin returns the first minimum, so ties go to the lowest index
        return np.argmin(cdist(z, self.means, "sqeuclidean"), axis=1)


def make_prior(kind, **params):
    """Instantiate a prior by config name through ``defaults.PRIOR_CLASSES``."""
    if kind not in defaults.PRIOR_CLASSES:
        raise ContractViolation("unknown prior kind %r (choose from %s)" % (kind, ", ".join(defaults.PRIOR_KINDS)))
    try:
        return load_object(defaults.PRIOR_CLASSES[kind])(**params)
    except TypeError as e:
        raise ValueError("Failed to instantiate prior class '%s': %s" % (defaults.PRIOR_CLASSES[kind], e))


def prior_from_config(config):
    if config.prior_kind not in defaults.PRIOR_CLASSES:
        raise ContractViolation("unknown prior kind %r" % config.prior_kind)
    return load_object(defaults.PRIOR_CLASSES[config.prior_kind]).from_config(config)


def sample_prior(spec, n, seed):
    """``n`` prior points and their partition labels; bit-deterministic in ``seed``."""
    if not isinstance(spec, PriorSpec):
        spec = make_prior(spec)
    return spec.sample(n, seed)


def partition_label(spec, position):
    """Partition id from a generator position (pinwheel: arm id; others: 1-D position in [0, 1))."""
    if isinstance(spec, PinwheelPrior):
        return int(np.clip(int(position), 0, spec.n_partitions - 1))
    if isinstance(spec, GaussianPrior) and np.ndim(position) > 0:
        position = spec.position_of(np.reshape(position, (1, -1)))[0]
    if isinstance(spec, MixturePrior) and np.ndim(position) > 0:
        return int(spec.nearest(position)[0])
    return int(spec.label_of(position))


def sample_partition(spec, labels, seed, max_rounds=100):
    """Prior points whose partition matches each requested label, by rejection."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), spec.dim))
    todo = np.ones(len(labels), dtype=bool)
    for rnd in range(max_rounds):
        if not todo.any():
            return out
        need = int(todo.sum())
        pool, pool_labels = spec.sample(need * spec.n_partitions * 2, derive_seed(seed, rnd))
        for label in np.unique(labels[todo]):
            slots = np.flatnonzero(todo & (labels == label))
            found = pool[pool_labels == label][:len(slots)]
            out[slots[:len(found)]] = found
            todo[slots[:len(found)]] = False
    if todo.any():
        mob_log.warning(f"rejection sampling left {int(todo.sum())} of {len(labels)} points unfilled, prior: {spec.kind}").track_id("").commit()
        raise ContractViolation("could not sample %d points from their partitions" % todo.sum())
    return out


def prior_log_density(spec, z, kde=None):
    """Differentiable log p(z) for a batch: analytic when available, else the KDE."""
    if spec.analytic:
        return spec.log_density_tensor(z)
    if kde is None:
        raise ContractViolation("prior %r needs a fitted KDE for its density" % spec.kind)
    return kde.log_density_tensor(z)
