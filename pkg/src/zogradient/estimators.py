"""Finite-difference gradient estimation from a zero-order oracle.

The estimator spends ``n = floor(T / 2d)`` paired queries per coordinate at
``x* + h e_i`` and ``x* - h e_i`` and averages the central differences.
:class:`FiniteDifferenceEstimator` and :class:`PackingDecoder` wrap the
functional API in scikit-learn's estimator protocol (``get_params``,
``set_params``, ``fit``, fitted attributes with a trailing underscore).
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .funcspace import HyperplaneFunction
from .packing import min_discrepancy_psi

__all__ = [
    "POLICIES",
    "FdmConfig",
    "GradientEstimate",
    "fdm_estimate",
    "optimal_step_chebyshev",
    "optimal_step_gaussian",
    "boundary_step",
    "resolve_step",
    "decode_alpha",
    "FiniteDifferenceEstimator",
    "PackingDecoder",
]

POLICIES = ("fixed", "chebyshev", "gaussian", "boundary")


@dataclass(frozen=True)
class FdmConfig:
    budget: int
    policy: str = "boundary"
    h: Optional[float] = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown step policy {self.policy!r}; expected one of {POLICIES}")
        if self.policy == "fixed" and not (self.h is not None and self.h > 0):
            raise ValueError("fixed policy needs a step h > 0")
        if int(self.budget) < 1:
            raise ValueError(f"budget must be positive, got {self.budget}")

    @classmethod
    def parse(cls, policy, budget):
        """Parse ``fixed:<h>``, ``chebyshev``, ``gaussian`` or ``boundary``."""
        name, _, arg = str(policy).partition(":")
        if name == "fixed":
            try:
                return cls(budget, "fixed", float(arg))
            except ValueError:
                raise ValueError(f"bad fixed step in policy {policy!r}") from None
        if arg:
            raise ValueError(f"policy {name!r} takes no argument")
        return cls(budget, name)

    def pairs_per_dim(self, d):
        return int(self.budget) // (2 * d)

    def __str__(self):
        return f"fixed:{self.h!r}" if self.policy == "fixed" else self.policy


@dataclass(frozen=True)
class GradientEstimate:
    grad_hat: np.ndarray
    queries_used: int
    step_used: float


def optimal_step_chebyshev(d, T, sigma, k):
    """Step minimising ``2 sigma d^1.5 / (h sqrt T) + h^2 d k / 6``: ``cbrt(6 sigma sqrt(d) / (k sqrt(T)))``."""
    if not k > 0:
        raise ValueError("k must be > 0; use the boundary policy for k = 0")
    _check_budget(d, T)
    return (6 * sigma * math.sqrt(d) / (k * math.sqrt(T))) ** (1 / 3)


def optimal_step_gaussian(d, T, sigma, k):
    """Step minimising ``sigma d^1.5 sqrt(2/pi) / (h sqrt T) + h^2 d k / 6``."""
    if not k > 0:
        raise ValueError("k must be > 0; use the boundary policy for k = 0")
    _check_budget(d, T)
    return d ** (1 / 6) * sigma ** (1 / 3) * (18 / math.pi) ** (1 / 6) / (k ** (1 / 3) * T ** (1 / 6))


def boundary_step(x_star, domain):
    """Largest ``c`` with ``x* +/- c e_i`` inside ``domain`` for every ``i``."""
    x = np.asarray(x_star, dtype=float)
    if x.shape != domain.center.shape:
        raise ValueError("x_star and domain dimensions differ")
    offset = x - domain.center
    h = float(np.min(domain.radius - np.abs(offset)))
    if not h > 0:
        raise ValueError(f"x_star is on or outside the domain boundary (h_r = {h:g})")
    return h


def _check_budget(d, T):
    if T < 2 * d:
        raise ValueError(f"budget T={T} is below 2d={2 * d}")


def resolve_step(config, d, sigma, k, x_star=None, domain=None):
    """Step size ``h`` prescribed by ``config.policy``."""
    if config.policy == "fixed":
        return float(config.h)
    if config.policy == "chebyshev":
        return optimal_step_chebyshev(d, config.budget, sigma, k)
    if config.policy == "gaussian":
        return optimal_step_gaussian(d, config.budget, sigma, k)
    if domain is None:
        raise ValueError("boundary policy needs a domain")
    return boundary_step(np.zeros(d) if x_star is None else x_star, domain)


def fdm_estimate(oracle, f, x_star, config, domain=None, k=None):
    """Central finite-difference gradient estimate at ``x_star``.

    Queries are dimension-major: all ``n`` pairs for coordinate 0, then 1, ...
    Leftover budget ``T - 2dn`` is not spent.

    Parameters
    ----------
    oracle : oracle handle
        Supplies ``query_many``; its ``sigma`` feeds the optimal-step policies
        and its ``domain`` is used when ``domain`` is not given.
    f : FunctionSpec or None
        Function passed through to the oracle.
    x_star : array_like, shape (d,)
    config : FdmConfig
    k : float, optional
        Third-derivative bound for the optimal-step policies; defaults to
        ``f.third_derivative_bound``.
    """
    x_star = np.asarray(x_star, dtype=float)
    d = x_star.shape[0]
    _check_budget(d, config.budget)
    if config.budget > oracle.remaining:
        raise ValueError(f"config budget {config.budget} exceeds oracle's remaining {oracle.remaining}")
    domain = oracle.domain if domain is None else domain
    if k is None and config.policy in ("chebyshev", "gaussian"):
        k = f.third_derivative_bound
    h = resolve_step(config, d, oracle.sigma, k, x_star, domain)
    if domain is not None and h > boundary_step(x_star, domain) * (1 + 1e-12):
        raise ValueError(f"step h={h:g} leaves the domain around x_star")
    n = config.pairs_per_dim(d)
    # rows: x + h e_0, x - h e_0, x + h e_1, x - h e_1, ...
    offsets = np.repeat(h * np.eye(d), 2, axis=0)
    offsets[1::2] *= -1
    values = oracle.query_many(f, x_star + offsets, n)
    grad = (values[0::2] - values[1::2]).mean(axis=1) / (2 * h)
    return GradientEstimate(grad, 2 * d * n, h)


def _decode(grads, centers, radius, rng):
    # l1 distance of every estimate to every packing gradient: (n, m)
    dist = np.abs(grads[:, None, :] - centers[None, :, :]).sum(axis=2)
    inside = dist <= radius * (1 + 1e-12)
    hit = inside.any(axis=1)
    guess = rng.integers(centers.shape[0], size=grads.shape[0])
    return np.where(hit, np.argmin(dist, axis=1), guess)


def _centers(packing, delta, x_star):
    x_star = np.zeros(packing.d) if x_star is None else np.asarray(x_star, dtype=float)
    return np.array([HyperplaneFunction(a, delta).grad(x_star) for a in packing.vectors])


def decode_alpha(grad_hat, packing, delta, x_star=None, rng=None):
    """Packing vector whose gradient lies within ``psi/3`` (l1) of ``grad_hat``.

    At most one member can qualify; if none does, a uniformly random member is
    returned. The ``psi/3`` boundary is inclusive.
    """
    psi = min_discrepancy_psi(packing, delta, x_star)
    if not psi > 0:
        raise ValueError("psi = 0: degenerate packing or delta")
    grads = np.asarray(grad_hat, dtype=float).reshape(1, -1)
    if grads.shape[1] != packing.d:
        raise ValueError("grad_hat and packing dimensions differ")
    rng = np.random.default_rng(rng)
    idx = _decode(grads, _centers(packing, delta, x_star), psi / 3, rng)[0]
    return packing.vectors[idx].copy()


class FiniteDifferenceEstimator(BaseEstimator):
    """Central finite differences with a configurable step policy.

    Parameters
    ----------
    budget : int
        Total oracle queries ``T`` (at least ``2d``).
    policy : {'boundary', 'fixed', 'chebyshev', 'gaussian'}
    h : float, optional
        Step for the ``fixed`` policy.
    k : float, optional
        Third-derivative bound override for the optimal-step policies.

    Attributes
    ----------
    grad_ : ndarray of shape (d,)
    step_ : float
    n_queries_ : int
    """

    def __init__(self, budget=100, policy="boundary", h=None, k=None):
        self.budget = budget
        self.policy = policy
        self.h = h
        self.k = k

    def fit(self, oracle, f=None, x_star=None, domain=None):
        if x_star is None:
            if domain is None and oracle.domain is None:
                raise ValueError("x_star is required when no domain is known")
            x_star = (domain or oracle.domain).center
        x_star = check_array(np.asarray(x_star, dtype=float).reshape(1, -1)).ravel()
        config = FdmConfig(self.budget, self.policy, self.h)
        est = fdm_estimate(oracle, f, x_star, config, domain=domain, k=self.k)
        self.grad_ = est.grad_hat
        self.step_ = est.step_used
        self.n_queries_ = est.queries_used
        self.n_features_in_ = x_star.shape[0]
        return self

    def predict(self, X=None):
        """The fitted gradient, repeated for each row of ``X`` if given."""
        check_is_fitted(self, "grad_")
        if X is None:
            return self.grad_.copy()
        X = check_array(X)
        return np.tile(self.grad_, (X.shape[0], 1))

    def score(self, true_grad):
        """Negative l1 error against ``true_grad`` (larger is better)."""
        check_is_fitted(self, "grad_")
        return -float(np.abs(self.grad_ - np.asarray(true_grad, dtype=float)).sum())


class PackingDecoder(BaseEstimator):
    """Maps gradient estimates to packing members within ``psi/3`` in l1.

    Parameters
    ----------
    delta : float
        Hyperplane scale of the ensemble.
    random_state : int, Generator or None
        Source for the uniform fallback guess.

    Attributes
    ----------
    centers_ : ndarray of shape (m, d)
        Gradients of the packing's hyperplane functions at ``x_star``.
    psi_ : float
    radius_ : float
        ``psi_ / 3``.
    classes_ : ndarray of shape (m, d)
        The packing vectors.
    """

    def __init__(self, delta=0.25, random_state=None):
        self.delta = delta
        self.random_state = random_state

    def fit(self, packing, x_star=None):
        self.psi_ = min_discrepancy_psi(packing, self.delta, x_star)
        if not self.psi_ > 0:
            raise ValueError("psi = 0: degenerate packing or delta")
        self.centers_ = _centers(packing, self.delta, x_star)
        self.radius_ = self.psi_ / 3
        self.classes_ = packing.vectors
        self.n_features_in_ = packing.d
        self._rng = np.random.default_rng(self.random_state)
        return self

    def predict_index(self, X, rng=None):
        """Row indices into ``classes_``; ``rng`` overrides the fitted generator."""
        check_is_fitted(self, "centers_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return _decode(X, self.centers_, self.radius_, self._rng if rng is None else rng)

    def predict(self, X):
        return self.classes_[self.predict_index(X)]

    def count_within(self, X):
        """Number of packing gradients within ``psi/3`` of each row."""
        check_is_fitted(self, "centers_")
        X = check_array(X)
        dist = np.abs(X[:, None, :] - self.centers_[None, :, :]).sum(axis=2)
        return (dist <= self.radius_ * (1 + 1e-12)).sum(axis=1)
