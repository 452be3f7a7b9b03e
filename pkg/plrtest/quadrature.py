"""
Gauss-Legendre quadrature on [0,1] and the joint grid over [0,1] x {0,1}.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple, Union

import numpy as np

from .errors import ConfigurationError, ShapeError

DEFAULT_RESOLUTION = 64


@lru_cache(maxsize=32)
def _legendre_rule(q: int) -> Tuple[np.ndarray, np.ndarray]:
    # Newton iteration on P_q, started from the usual cosine guesses
    k = np.arange(1, q + 1)
    y = np.cos(np.pi * (k - 0.25) / (q + 0.5))
    dp = np.ones_like(y)
    for _ in range(100):
        p_prev = np.ones_like(y)
        p = y.copy()
        for j in range(2, q + 1):
            p_prev, p = p, ((2 * j - 1) * y * p - (j - 1) * p_prev) / j
        if q == 1:
            dp = np.ones_like(y)
        else:
            dp = q * (y * p - p_prev) / (y * y - 1.0)
        step = p / dp
        y = y - step
        if np.max(np.abs(step)) < 1e-15:
            break
    w = 2.0 / ((1.0 - y * y) * dp * dp)
    order = np.argsort(y)
    return y[order], w[order]


def gauss_legendre_01(q: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the q-point Gauss-Legendre rule mapped to [0,1].

    Exact for polynomials of degree at most 2q-1; weights sum to 1.
    """
    if isinstance(q, bool) or not isinstance(q, (int, np.integer)) or q < 1:
        raise ConfigurationError(f"quadrature size must be a positive integer, got {q!r}")
    y, w = _legendre_rule(int(q))
    return (y + 1.0) / 2.0, w / 2.0


@dataclass(frozen=True, eq=False)
class QuadGrid:
    """Product rule on [0,1] x {0,1}: one Gauss-Legendre slice per label."""

    x: np.ndarray
    z: np.ndarray
    weights: np.ndarray
    resolution: int

    def __post_init__(self):
        if not (self.x.shape == self.z.shape == self.weights.shape):
            raise ShapeError("grid nodes and weights must have equal shapes")
        for a in (self.x, self.z, self.weights):
            a.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.x.size)

    def integrate(self, values: Union[np.ndarray, Callable]) -> float:
        """Sum of weight * value over nodes; ``values`` may be a callable f(x, z)."""
        if callable(values):
            values = values(self.x, self.z)
        values = np.asarray(values, dtype=float)
        if values.shape != self.weights.shape:
            raise ShapeError(f"expected {self.size} node values, got shape {values.shape}")
        return float(self.weights @ values)


def joint_grid(q: int = DEFAULT_RESOLUTION) -> QuadGrid:
    """The q-point rule replicated for z = 0 and z = 1 (total weight 2)."""
    nodes, weights = gauss_legendre_01(q)
    return QuadGrid(
        x=np.concatenate([nodes, nodes]),
        z=np.repeat(np.array([0, 1], dtype=np.intp), nodes.size),
        weights=np.concatenate([weights, weights]),
        resolution=int(q),
    )
