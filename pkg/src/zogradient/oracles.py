"""Budgeted stochastic zero-order oracles.

Every oracle answers ``query(f, x)`` with a noisy unbiased value of ``f(x)``
and refuses to answer more than ``budget`` times. Randomness comes from a
``numpy.random.Generator`` supplied by the caller; use :func:`make_rng` to
derive one from a master seed and a tuple of integer keys so that results do
not depend on the order in which trials are executed.
"""
import csv

import numpy as np

from .funcspace import COORD_FUNCTIONS, HyperplaneFunction, evaluate_rows

__all__ = [
    "BudgetExhausted",
    "OracleTranscript",
    "GaussianOracle",
    "AdversarialBernoulliOracle",
    "CustomOracle",
    "make_rng",
    "variance_cap",
]


class BudgetExhausted(RuntimeError):
    """Raised when an oracle is queried beyond its budget ``T``."""


def make_rng(master_seed, *keys):
    """Independent generator for ``(master_seed, *keys)``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(seq))


def variance_cap(domain, sigma, coord_fn="identity"):
    """Per-coordinate ``sup |h_i|`` over ``domain``, checked against ``2 sigma``.

    The Bernoulli oracle has variance at most ``||H(x)||^2 / (4d)``, which is
    bounded by ``sigma**2`` exactly when every ``|h_i| <= 2 sigma`` on the box.

    Raises
    ------
    ValueError
        If some coordinate exceeds ``2 * sigma``.
    """
    if coord_fn != "identity":
        raise NotImplementedError("only identity coordinate functions are supported")
    cap = domain.abs_sup()
    if np.max(cap) > 2 * sigma:
        raise ValueError(
            f"domain reaches |x_i| = {np.max(cap):g} > 2*sigma = {2 * sigma:g}; "
            "oracle variance would exceed sigma^2"
        )
    return cap


class OracleTranscript:
    """Append-only record of answered queries.

    Stored in chunks (one per ``query_many`` call); ``rows()`` flattens them.
    """

    def __init__(self):
        self._chunks = []
        self._n = 0

    def __len__(self):
        return self._n

    def append(self, x, values, coords=None, bits=None):
        start = self._n
        self._chunks.append((start, np.array(x, dtype=float), values, coords, bits))
        self._n += len(values)

    def rows(self):
        """Yield ``(t, x, value, i, b)`` in query order; ``t`` starts at 1."""
        for start, x, values, coords, bits in self._chunks:
            for j, v in enumerate(values):
                i = None if coords is None else int(coords[j])
                b = None if bits is None else int(bits[j])
                yield start + j + 1, x, float(v), i, b

    def values(self):
        if not self._chunks:
            return np.empty(0)
        return np.concatenate([c[2] for c in self._chunks])

    def coords(self):
        return np.concatenate([c[3] for c in self._chunks]) if self._chunks else np.empty(0, int)

    def bits(self):
        return np.concatenate([c[4] for c in self._chunks]) if self._chunks else np.empty(0, int)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "i", "b", "value"])
            for t, _, v, i, b in self.rows():
                w.writerow([t, "" if i is None else i + 1, "" if b is None else b, repr(v)])


class _Oracle:
    kind = None

    def __init__(self, sigma, budget, rng=None, domain=None, record=True):
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        if int(budget) < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        self.sigma = float(sigma)
        self.budget = int(budget)
        self.used = 0
        self.rng = np.random.default_rng() if rng is None else rng
        self.domain = domain
        self.transcript = OracleTranscript() if record else None

    @property
    def remaining(self):
        return self.budget - self.used

    def _check(self, x, n):
        if self.used + n > self.budget:
            raise BudgetExhausted(
                f"{self.kind} oracle: {n} more queries requested, {self.remaining} of {self.budget} left"
            )
        x = np.asarray(x, dtype=float)
        if self.domain is not None and not self.domain.contains(x):
            raise ValueError(f"query point {x} lies outside the domain")
        return x

    def query(self, f, x):
        return float(self.query_many(f, x, 1)[0])

    def query_many(self, f, x, n):
        """Answer ``n`` independent queries at ``x``.

        ``x`` is one point of shape ``(d,)`` (result shape ``(n,)``) or a
        stack of points ``(m, d)`` (result ``(m, n)``), answered row by row:
        all ``n`` queries at ``x[0]`` come first in the transcript.
        """
        n = int(n)
        x = np.asarray(x, dtype=float)
        points = np.atleast_2d(x)
        self._check(points, n * points.shape[0])
        values, coords, bits = self._draw(f, points, n)
        self.used += values.size
        if self.transcript is not None:
            for r, row in enumerate(points):
                self.transcript.append(
                    row,
                    values[r],
                    None if coords is None else coords[r],
                    None if bits is None else bits[r],
                )
        return values if x.ndim == 2 else values[0]

    def _draw(self, f, points, n):
        """Return ``(values, coords, bits)``, each of shape ``(m, n)`` or None."""
        raise NotImplementedError


class GaussianOracle(_Oracle):
    """``phi(x, f) ~ N(f(x), sigma^2)``."""

    kind = "gaussian"

    def _draw(self, f, points, n):
        mean = evaluate_rows(f, points)[:, None]
        return mean + self.sigma * self.rng.standard_normal((points.shape[0], n)), None, None


class CustomOracle(_Oracle):
    """Additive zero-mean noise from ``noise(rng, n)``; caller vouches Var <= sigma^2."""

    kind = "custom"

    def __init__(self, sigma, budget, noise, rng=None, domain=None, record=True):
        super().__init__(sigma, budget, rng=rng, domain=domain, record=record)
        self.noise = noise

    def _draw(self, f, points, n):
        mean = evaluate_rows(f, points)[:, None]
        noise = np.asarray(self.noise(self.rng, points.shape[0] * n), dtype=float)
        return mean + noise.reshape(points.shape[0], n), None, None


class AdversarialBernoulliOracle(_Oracle):
    """Oracle for the hyperplane ensemble ``g_alpha``.

    Each query picks a coordinate ``i`` uniformly, a bit ``b ~ Bernoulli(1/2 +
    alpha_i delta)``, and answers ``+h_i(x_i)/2`` if ``b`` else ``-h_i(x_i)/2``.
    The answer is unbiased for ``g_alpha(x)``. Construction is refused unless
    ``sup |h_i| <= 2 sigma`` over ``domain``.
    """

    kind = "adversarial_bernoulli"

    def __init__(self, alpha, delta, sigma, budget, domain, rng=None, coord_fn="identity", record=True):
        if domain is None:
            raise ValueError("the Bernoulli oracle needs a bounded domain")
        self.target = HyperplaneFunction(alpha, delta, coord_fn)
        if domain.d != self.target.d:
            raise ValueError("domain and alpha dimensions differ")
        variance_cap(domain, sigma, coord_fn)
        super().__init__(sigma, budget, rng=rng, domain=domain, record=record)
        self._p = 0.5 + self.target.alpha * self.target.delta
        self._h = COORD_FUNCTIONS[coord_fn][0]

    @property
    def alpha(self):
        return self.target.alpha

    @property
    def delta(self):
        return self.target.delta

    def _draw(self, f, points, n):
        if f is not None and f is not self.target and not (
            isinstance(f, HyperplaneFunction)
            and f.delta == self.delta
            and np.array_equal(f.alpha, self.alpha)
        ):
            raise ValueError("the Bernoulli oracle only answers for its own g_alpha")
        if points.shape[1] != self.target.d:
            raise ValueError(f"expected points of dimension {self.target.d}")
        m = points.shape[0]
        coords = self.rng.integers(self.target.d, size=(m, n))
        bits = self.rng.random((m, n)) < self._p[coords]
        half = np.take_along_axis(self._h(points), coords, axis=1) / 2
        return np.where(bits, half, -half), coords, bits.astype(np.int8)

    def second_moment(self, x):
        """``||H(x)||^2 / (4d)``, the variance ceiling at ``x``."""
        hx = self.target.coords(x)
        return float(hx @ hx) / (4 * self.target.d)
