"""Random hidden layer of RVFL networks."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .numerics import as_matrix

RNG_NAME = "numpy.random.PCG64"

SELU_SCALE = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772
LEAKY_SLOPE = 0.01


class Activation(enum.IntEnum):
    SELU = 1
    RELU = 2
    SIGMOID = 3
    SINE = 4
    HARDLIM = 5
    TRIBAS = 6
    RADBAS = 7
    SIGN = 8
    LEAKY_RELU = 9

    @classmethod
    def parse(cls, value):
        """Accept an Activation, its 1-based index, or its (case-insensitive) name."""
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().upper().replace("-", "_")
        if key.isdigit():
            return cls(int(key))
        aliases = {"LEAKYRELU": "LEAKY_RELU"}
        try:
            return cls[aliases.get(key, key)]
        except KeyError:
            raise ParameterError(f"unknown activation {value!r}") from None


def rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def activate(kind, x):
    """Apply activation ``kind`` elementwise; scalars in, scalars out."""
    kind = Activation.parse(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind is Activation.SELU:
        out = SELU_SCALE * np.where(x > 0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    elif kind is Activation.RELU:
        out = np.maximum(x, 0.0)
    elif kind is Activation.SIGMOID:
        # split by sign so exp never overflows
        ex = np.exp(-np.abs(x))
        out = np.where(x >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))
    elif kind is Activation.SINE:
        out = np.sin(x)
    elif kind is Activation.HARDLIM:
        out = (x >= 0).astype(np.float64)
    elif kind is Activation.TRIBAS:
        out = np.maximum(0.0, 1.0 - np.abs(x))
    elif kind is Activation.RADBAS:
        out = np.exp(-np.square(x))
    elif kind is Activation.SIGN:
        out = np.sign(x)
    else:
        out = np.where(x > 0, x, LEAKY_SLOPE * x)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class RandomLayer:
    weights: np.ndarray  # (input_dim, hidden_nodes)
    biases: np.ndarray  # (hidden_nodes,)
    activation: Activation
    seed: int

    @property
    def input_dim(self):
        return self.weights.shape[0]

    @property
    def hidden_nodes(self):
        return self.weights.shape[1]


def init_layer(input_dim, hidden_nodes, activation, seed):
    """Draw weights and per-node biases i.i.d. uniform on [-1, 1]."""
    if input_dim < 1 or hidden_nodes < 1:
        raise ParameterError(
            f"layer dimensions must be positive, got {input_dim}x{hidden_nodes}"
        )
    gen = rng(seed)
    weights = gen.uniform(-1.0, 1.0, size=(input_dim, hidden_nodes))
    biases = gen.uniform(-1.0, 1.0, size=hidden_nodes)
    return RandomLayer(weights, biases, Activation.parse(activation), int(seed))


def transform(layer, x):
    x = as_matrix(x, "x")
    if x.shape[1] != layer.input_dim:
        raise DimensionError(
            f"layer expects {layer.input_dim} features, got {x.shape[1]}"
        )
    return np.asarray(activate(layer.activation, x @ layer.weights + layer.biases))
