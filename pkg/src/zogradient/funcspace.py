"""Test-function families with analytic gradients and known third-derivative bounds.

Two closed families are provided:

* :class:`HyperplaneFunction` -- ``g(x) = (delta/d) * sum_i alpha_i * h_i(x_i)``
  with sign vector ``alpha``; the hard ensemble behind the lower bound.
* :class:`CubicFunction` -- ``f(x) = sum_i (k x_i^3/6 + c_i x_i^2/2 + c'_i x_i)``
  whose pure third partial is exactly ``k`` everywhere.

:class:`CustomFunction` wraps arbitrary callables with a user-supplied bound.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

__all__ = [
    "DomainBox",
    "HyperplaneFunction",
    "CubicFunction",
    "CustomFunction",
    "FunctionSpec",
    "evaluate",
    "evaluate_rows",
    "gradient",
    "taylor_central_difference",
    "make_function",
]

COORD_FUNCTIONS = {"identity": (lambda x: x, lambda x: np.ones_like(x))}


def _as_point(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != d:
        raise ValueError(f"expected a point of dimension {d}, got shape {x.shape}")
    return x


def _as_points(x, d):
    # a single point (d,) or a stack of points (m, d)
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != d:
        raise ValueError(f"expected point(s) of dimension {d}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned l-infinity ball ``{x : ||x - center||_inf <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        if center.ndim != 1 or center.size == 0:
            raise ValueError("center must be a non-empty 1-d vector")
        if not np.isfinite(self.radius) or self.radius < 0:
            raise ValueError(f"radius must be finite and >= 0, got {self.radius}")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def centered(cls, d, radius):
        return cls(np.zeros(d), radius)

    @property
    def d(self):
        return self.center.shape[0]

    def contains(self, x, atol=0.0):
        """True if ``x`` (or every row of a stack of points) lies in the box."""
        x = _as_points(x, self.d)
        return bool(np.max(np.abs(x - self.center)) <= self.radius + atol)

    def abs_sup(self):
        """Per-coordinate ``sup |x_i|`` over the box."""
        return np.abs(self.center) + self.radius


@dataclass(frozen=True)
class HyperplaneFunction:
    alpha: np.ndarray
    delta: float
    coord_fn: str = "identity"

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim != 1 or alpha.size == 0 or not np.all(np.abs(alpha) == 1):
            raise ValueError("alpha must be a non-empty vector of +1/-1 entries")
        if not 0 < self.delta <= 0.25:
            raise ValueError(f"delta must lie in (0, 1/4], got {self.delta}")
        if self.coord_fn not in COORD_FUNCTIONS:
            raise ValueError(f"unknown coordinate function {self.coord_fn!r}")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def d(self):
        return self.alpha.shape[0]

    @property
    def third_derivative_bound(self):
        return 0.0

    def coords(self, x):
        """The vector ``H(x) = (h_1(x_1), ..., h_d(x_d))``."""
        return COORD_FUNCTIONS[self.coord_fn][0](_as_points(x, self.d))

    def __call__(self, x):
        value = self.delta / self.d * (self.coords(x) @ self.alpha)
        return value if np.ndim(value) else float(value)

    def grad(self, x):
        dh = COORD_FUNCTIONS[self.coord_fn][1](_as_point(x, self.d))
        return self.delta / self.d * self.alpha * dh


@dataclass(frozen=True)
class CubicFunction:
    k: float
    quad: np.ndarray
    lin: np.ndarray

    def __post_init__(self):
        quad = np.atleast_1d(np.asarray(self.quad, dtype=float))
        lin = np.atleast_1d(np.asarray(self.lin, dtype=float))
        if quad.ndim != 1 or quad.shape != lin.shape or quad.size == 0:
            raise ValueError("quad and lin must be 1-d vectors of equal length")
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        quad.setflags(write=False)
        lin.setflags(write=False)
        object.__setattr__(self, "quad", quad)
        object.__setattr__(self, "lin", lin)
        object.__setattr__(self, "k", float(self.k))

    @classmethod
    def linear(cls, lin):
        lin = np.asarray(lin, dtype=float)
        return cls(0.0, np.zeros_like(lin), lin)

    @classmethod
    def zeros(cls, d, k=0.0):
        return cls(k, np.zeros(d), np.zeros(d))

    @property
    def d(self):
        return self.lin.shape[0]

    @property
    def third_derivative_bound(self):
        return self.k

    def __call__(self, x):
        x = _as_points(x, self.d)
        value = np.sum(self.k * x**3 / 6 + self.quad * x**2 / 2 + self.lin * x, axis=-1)
        return value if np.ndim(value) else float(value)

    def grad(self, x):
        x = _as_point(x, self.d)
        return self.k * x**2 / 2 + self.quad * x + self.lin


@dataclass(frozen=True)
class CustomFunction:
    """User closure with user-vouched gradient and third-derivative bound."""

    fn: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    d: int
    third_derivative_bound: float = field(default=np.inf)

    def __call__(self, x):
        return float(self.fn(_as_point(x, self.d)))

    def grad(self, x):
        return np.asarray(self.grad_fn(_as_point(x, self.d)), dtype=float)


FunctionSpec = Union[HyperplaneFunction, CubicFunction, CustomFunction]


def evaluate(f, x):
    return f(x)


def evaluate_rows(f, X):
    """Values of ``f`` at each row of ``X``."""
    if isinstance(f, (HyperplaneFunction, CubicFunction)):
        return np.asarray(f(X), dtype=float).reshape(-1)
    return np.array([f(row) for row in np.atleast_2d(X)], dtype=float)


def gradient(f, x):
    return f.grad(x)


def taylor_central_difference(f, x, i, h, domain: Optional[DomainBox] = None):
    """Noise-free central difference ``(f(x + h e_i) - f(x - h e_i)) / 2h``.

    For a cubic this equals ``grad(x)_i + h**2 * k / 6`` exactly.
    """
    if not h > 0:
        raise ValueError(f"step must be > 0, got {h}")
    x = _as_point(x, f.d)
    if not 0 <= i < f.d:
        raise IndexError(f"coordinate {i} out of range for d={f.d}")
    step = np.zeros(f.d)
    step[i] = h
    if domain is not None and not (domain.contains(x + step) and domain.contains(x - step)):
        raise ValueError(f"x +/- {h} e_{i} leaves the domain")
    return (f(x + step) - f(x - step)) / (2 * h)


def make_function(family, d, **params):
    """Build a function from config-style parameters (``family=hyperplane|cubic``)."""
    if family == "cubic":
        k = float(params.get("k", 0.0))
        quad = np.broadcast_to(np.asarray(params.get("quad", 0.0), dtype=float), (d,))
        lin = np.broadcast_to(np.asarray(params.get("lin", 0.0), dtype=float), (d,))
        return CubicFunction(k, quad.copy(), lin.copy())
    if family == "hyperplane":
        alpha = np.broadcast_to(np.asarray(params.get("alpha", 1.0), dtype=float), (d,))
        return HyperplaneFunction(alpha.copy(), float(params.get("delta", 0.25)))
    raise ValueError(f"unknown function family {family!r}")
