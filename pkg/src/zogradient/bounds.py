"""Closed-form rates and information-theoretic bounds for zero-order gradient estimation.

All logarithms are natural. Evaluators are total: vacuous bounds come back as
``0.0`` (minimax lower bound) or as a non-positive number (Fano floor) rather
than raising.
"""
import math
from dataclasses import dataclass
from typing import Optional

from .packing import LOG_RATE

__all__ = [
    "LOG_RATE",
    "LOWER_BOUND_DENOMINATOR",
    "TIGHT_RATE_CONSTANT",
    "OPTIMAL_STEP_CONSTANT",
    "RateInputs",
    "lower_bound_minimax",
    "fdm_upper_bound",
    "fdm_gaussian_exact",
    "gaussian_fdm_error_at_h",
    "gaussian_error_at_optimal_step",
    "bernoulli_kl",
    "kl_transcript_bound",
    "fano_error_floor",
    "folded_gaussian_mean",
]

SQRT_2_OVER_PI = math.sqrt(2 / math.pi)
LOWER_BOUND_DENOMINATOR = 324 * 3 * 16
ERF_AT_OPTIMUM = math.erf(1 / (2 * math.sqrt(math.pi)))
# 2 exp(-pi/4) + erf(1/(2 sqrt(pi))), as stated for the tight Gaussian rate.
TIGHT_RATE_CONSTANT = 2 * math.exp(-math.pi / 4) + ERF_AT_OPTIMUM
# What the exact error actually evaluates to at the Gaussian-optimal step:
# the exponent there is K^2 h^6 T / (72 sigma^2 d) = 1/(4 pi).
OPTIMAL_STEP_CONSTANT = 2 * math.exp(-1 / (4 * math.pi)) + ERF_AT_OPTIMUM


@dataclass(frozen=True)
class RateInputs:
    d: int
    T: int
    sigma: float = 1.0
    k: float = 0.0
    h_r: Optional[float] = None
    delta: float = 0.25

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.T < 2 * self.d:
            raise ValueError(f"T={self.T} is below 2d={2 * self.d}")
        if self.sigma < 0 or self.k < 0:
            raise ValueError("sigma and k must be >= 0")
        if self.h_r is not None and not self.h_r > 0:
            raise ValueError(f"h_r must be > 0, got {self.h_r}")


def lower_bound_minimax(d, T, k=1.0):
    """Explicit minimax lower bound ``sqrt((log(2/sqrt e) d - 3 log 2) k^2 / (15552 T))``.

    Returns 0.0 when the numerator is non-positive (the bound is vacuous,
    which happens for ``d <= 10``).
    """
    num = LOG_RATE * d - 3 * math.log(2)
    if num <= 0:
        return 0.0
    return math.sqrt(num / (LOWER_BOUND_DENOMINATOR * T) * k**2)


def _h_r(inputs):
    if inputs.h_r is None:
        raise ValueError("k = 0 branch needs the boundary step h_r")
    return inputs.h_r


def fdm_upper_bound(inputs):
    """Worst-case l1 error bound of FDM for any oracle with variance <= sigma^2."""
    d, T, s, k = inputs.d, inputs.T, inputs.sigma, inputs.k
    if k > 0:
        return d ** (4 / 3) * T ** (-1 / 3) * (9 * s**2 * k / 2) ** (1 / 3)
    return d**1.5 / math.sqrt(T) * 2 * s / _h_r(inputs)


def fdm_gaussian_exact(inputs, c=1.0):
    """Gaussian-oracle FDM error in closed form.

    ``k = 0``: exact, ``d^1.5 sigma sqrt(2/pi) / (h_r sqrt T)``.
    ``k > 0``: ``d^(4/3) T^(-1/3) (sigma^2 k / 12 pi)^(1/3) * TIGHT_RATE_CONSTANT * c``.
    The exact error at the Gaussian-optimal step is larger than the ``k > 0``
    expression with ``c = 1``; see :func:`gaussian_error_at_optimal_step`.
    """
    d, T, s, k = inputs.d, inputs.T, inputs.sigma, inputs.k
    if k > 0:
        return _rate_scale(d, T, s, k) * TIGHT_RATE_CONSTANT * c
    return d**1.5 / math.sqrt(T) * s / _h_r(inputs) * SQRT_2_OVER_PI


def _rate_scale(d, T, s, k):
    return d ** (4 / 3) * T ** (-1 / 3) * (s**2 * k / (12 * math.pi)) ** (1 / 3)


def gaussian_error_at_optimal_step(inputs):
    """Exact expected l1 error at the Gaussian-optimal step (``k > 0``)."""
    if not inputs.k > 0:
        raise ValueError("needs k > 0")
    return _rate_scale(inputs.d, inputs.T, inputs.sigma, inputs.k) * OPTIMAL_STEP_CONSTANT


def gaussian_fdm_error_at_h(inputs, h):
    """Exact expected l1 error of FDM with step ``h`` under a Gaussian oracle.

    Each coordinate of the estimate is ``N(grad_i + h^2 k / 6, sigma^2 d / (h^2 T))``
    so the error is ``d`` times a folded-Gaussian mean.
    """
    if not h > 0:
        raise ValueError(f"h must be > 0, got {h}")
    d, T = inputs.d, inputs.T
    s = inputs.sigma * math.sqrt(d) / (h * math.sqrt(T))
    return d * folded_gaussian_mean(h**2 * inputs.k / 6, s)


def bernoulli_kl(delta):
    """KL(Bernoulli(1/2 + delta) || Bernoulli(1/2 - delta)) = 2 delta log(1 + 4 delta / (1 - 2 delta))."""
    if not 0 <= delta < 0.5:
        raise ValueError(f"delta must lie in [0, 1/2), got {delta}")
    return 2 * delta * math.log1p(4 * delta / (1 - 2 * delta))


def kl_transcript_bound(T, delta):
    """``16 T delta^2``, valid for ``0 < delta <= 1/4``."""
    if not 0 < delta <= 0.25:
        raise ValueError(f"delta must lie in (0, 1/4], got {delta}")
    return 16 * T * delta**2


def fano_error_floor(d, T, delta):
    """``1 - (16 T delta^2 + log 2) / ((d/2) log(2/sqrt e))``; may be negative."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return 1 - (16 * T * delta**2 + math.log(2)) / (d / 2 * LOG_RATE)


def folded_gaussian_mean(mu, s):
    """``E|Z|`` for ``Z ~ N(mu, s^2)``."""
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    if s == 0:
        return abs(mu)
    return s * math.exp(-(mu**2) / (2 * s**2)) * SQRT_2_OVER_PI + mu * math.erf(mu / (math.sqrt(2) * s))
