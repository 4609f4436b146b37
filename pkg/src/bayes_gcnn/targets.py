"""Analytic log-densities with the same interface as :class:`GCNPosterior`.

They stand in for the network posterior when checking the samplers against
known answers.  The whole log-density is reported as ``log_lik`` so that it is
the part attenuated by temperature.
"""

from __future__ import annotations

import numpy as np

__all__ = ["GaussianTarget", "GaussianMixture1D"]


class GaussianTarget:
    def __init__(self, mean, cov, init_scale=1.0):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.cov = np.asarray(cov, dtype=np.float64)
        self.prec = np.linalg.inv(self.cov)
        self.dim = self.mean.size
        self.init_scale = init_scale
        _, logdet = np.linalg.slogdet(self.cov)
        self._const = -0.5 * (self.dim * np.log(2 * np.pi) + logdet)

    def initial_point(self, rng):
        return self.mean + self.init_scale * rng.standard_normal(self.dim)

    def log_density(self, theta):
        d = np.asarray(theta) - self.mean
        return float(self._const - 0.5 * d @ self.prec @ d)

    def evaluate(self, theta):
        return {"log_lik": self.log_density(theta), "log_prior": 0.0}

    def grad(self, theta):
        return -self.prec @ (np.asarray(theta) - self.mean)


class GaussianMixture1D:
    """Equal-weight mixture of two unit-free Gaussians at ``-mu`` and ``+mu``."""

    def __init__(self, mu=4.0, sd=0.5, start=None):
        self.mu, self.sd, self.dim = float(mu), float(sd), 1
        self.start = -self.mu if start is None else float(start)

    def initial_point(self, rng):
        return np.array([self.start])

    def log_density(self, theta):
        x = float(np.asarray(theta).ravel()[0])
        a = -0.5 * ((x - self.mu) / self.sd) ** 2
        b = -0.5 * ((x + self.mu) / self.sd) ** 2
        m = max(a, b)
        return m + np.log(np.exp(a - m) + np.exp(b - m)) - np.log(2.0 * self.sd * np.sqrt(2.0 * np.pi))

    def evaluate(self, theta):
        return {"log_lik": self.log_density(theta), "log_prior": 0.0}

    def grad(self, theta):
        x = float(np.asarray(theta).ravel()[0])
        a = -0.5 * ((x - self.mu) / self.sd) ** 2
        b = -0.5 * ((x + self.mu) / self.sd) ** 2
        m = max(a, b)
        wa, wb = np.exp(a - m), np.exp(b - m)
        g = (wa * -(x - self.mu) + wb * -(x + self.mu)) / (self.sd**2 * (wa + wb))
        return np.array([g])
