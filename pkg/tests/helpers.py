# -*- coding: utf-8 -*-
"""Hand-built networks with known outputs."""
import numpy as np

from ddvi_lab.autodiff import Tensor, Tape, as_tensor, numerical_gradient


class StubEncoder(object):
    """q(y_T|x) = N(mu, exp(logvar)) for every x."""

    def __init__(self, mu, logvar, data_dim=1):
        self.mu = np.asarray(mu, dtype=np.float64)
        self.logvar = np.broadcast_to(np.asarray(logvar, dtype=np.float64), self.mu.shape).copy()
        self.latent_dim = len(self.mu)
        self.data_dim = data_dim

    def encode(self, x):
        n = len(x)
        return as_tensor(np.tile(self.mu, (n, 1))), as_tensor(np.tile(self.logvar, (n, 1)))

    def features(self, x):
        return as_tensor(x)


class LinearNoise(object):
    """eps_hat = scale * y_t."""

    def __init__(self, scale):
        self.scale = scale

    def predict_noise(self, y_t, x_feat, t, labels=None):
        return as_tensor(y_t) * self.scale


class OracleNoise(object):
    """Recovers the true forward noise from y_t given the clean rows ``z``."""

    def __init__(self, z, schedule):
        self.z = np.asarray(z, dtype=np.float64)
        self.schedule = schedule

    def predict_noise(self, y_t, x_feat, t, labels=None):
        ab = self.schedule.alpha_bars[np.asarray(t)].reshape(-1, 1)
        y = y_t.data if isinstance(y_t, Tensor) else np.asarray(y_t)
        return as_tensor((y - np.sqrt(ab) * self.z) / np.sqrt(1.0 - ab))


def gradient_pair(loss_fn, param):
    """(tape gradient, finite-difference gradient) of ``loss_fn()`` w.r.t. ``param`` (a Tensor)."""
    original = param.data.copy()
    with Tape() as tape:
        loss = loss_fn()
    (grad,) = tape.gradients(loss, [param])

    def at(values):
        param.data[...] = values
        return float(loss_fn().data)

    numeric = numerical_gradient(at, original.copy())
    param.data[...] = original
    return grad, numeric
