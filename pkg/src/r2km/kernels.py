"""Linear and Gaussian Gram matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .numerics import as_matrix


@dataclass(frozen=True)
class Linear:
    def __call__(self, x, z):
        return x @ z.T


@dataclass(frozen=True)
class Gaussian:
    """``k(a, b) = exp(-||a - b||^2 / (2 sigma^2))``."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")

    def __call__(self, x, z):
        d2 = sq_distances(x, z)
        return np.exp(-d2 / (2.0 * self.sigma**2))


def sq_distances(x, z):
    xx = np.einsum("ij,ij->i", x, x)
    zz = np.einsum("ij,ij->i", z, z)
    d2 = xx[:, None] + zz[None, :] - 2.0 * (x @ z.T)
    return np.maximum(d2, 0.0)


def gram(x, kind):
    x = as_matrix(x, "x")
    if x.shape[0] == 0:
        raise DimensionError("gram of an empty matrix")
    k = kind(x, x)
    k = 0.5 * (k + k.T)
    if isinstance(kind, Gaussian):
        np.fill_diagonal(k, 1.0)
    return k


def cross_gram(x, z, kind):
    """Pairwise kernel values, shape ``(len(x), len(z))``."""
    x = as_matrix(x, "x")
    z = as_matrix(z, "z")
    if x.shape[1] != z.shape[1]:
        raise DimensionError(
            f"feature dimensions differ: {x.shape[1]} vs {z.shape[1]}"
        )
    return kind(x, z)


def combined_gram(x, sigma):
    """Linear plus Gaussian Gram, the system matrix of R2KM before scaling."""
    return gram(x, Linear()) + gram(x, Gaussian(sigma))


def combined_cross_gram(x, z, sigma):
    return cross_gram(x, z, Linear()) + cross_gram(x, z, Gaussian(sigma))
