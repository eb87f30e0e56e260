"""Strictly monotone one-to-one maps with derivatives.

Used both for variate transformations (y = g(x)) and for parameter
reparameterizations (nu = g(theta)); the two play by the same
change-of-variables rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SingularityError


@dataclass(frozen=True)
class MonotoneMap:
    """A strictly monotone map with its inverse and derivative.

    ``forward`` and ``inverse`` must be mutual inverses on the relevant
    interval and ``derivative`` must never vanish there.
    """

    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    name: str = "map"

    def __call__(self, x):
        return self.forward(x)

    def deriv_checked(self, x):
        d = np.asarray(self.derivative(x), dtype=float)
        if np.any(d == 0.0) or not np.all(np.isfinite(d)):
            raise SingularityError(f"derivative of '{self.name}' vanishes or blows up")
        return d


def identity_map() -> MonotoneMap:
    return MonotoneMap(lambda x: x, lambda y: y, lambda x: np.ones_like(np.asarray(x, dtype=float)),
                       name="identity")


def log_map() -> MonotoneMap:
    """y = ln x on (0, inf)."""
    return MonotoneMap(np.log, np.exp, lambda x: 1.0 / np.asarray(x, dtype=float), name="log")


def exp_map() -> MonotoneMap:
    """y = exp x on the whole line."""
    return MonotoneMap(np.exp, np.log, np.exp, name="exp")


def affine_map(a: float, b: float) -> MonotoneMap:
    """y = a*x + b with a != 0."""
    if a == 0.0:
        raise SingularityError("affine map needs a nonzero slope")
    return MonotoneMap(lambda x: a * np.asarray(x, dtype=float) + b,
                       lambda y: (np.asarray(y, dtype=float) - b) / a,
                       lambda x: np.full_like(np.asarray(x, dtype=float), a),
                       name=f"affine({a},{b})")
