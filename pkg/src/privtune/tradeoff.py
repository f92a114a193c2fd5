"""Trade-off functions and conversions between privacy representations.

A trade-off function f maps a type-I error level x in [0, 1] to the
smallest achievable type-II error f(x) for testing one input of a
mechanism against an adjacent one. Two families are provided: the
piecewise-linear curve equivalent to (epsilon, delta)-DP and the Gaussian
curve G_mu. The module also converts between the two representations and
computes the Gaussian-DP parameter induced by noisy iterative training.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import optimize, special

__all__ = [
    "TradeoffCurve",
    "EpsDeltaCurve",
    "GaussianCurve",
    "DpSgdConfig",
    "eval_eps_delta_curve",
    "eval_gdp_curve",
    "fdp_to_eps_delta",
    "gdp_delta_of_eps",
    "gdp_mu_from_eps_delta",
    "gdp_approx_mu",
]

_EPS_BRACKET_HI = 100.0
_EPS_TOL = 1e-9
_VIOLATION_SLACK = 1e-12
_GRID_SIZE = 4097
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _validate_unit_interval(x: np.ndarray | float, name: str) -> np.ndarray:
    """Returns x as an array after checking every entry lies in [0, 1]."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")
    return arr


class TradeoffCurve:
    """Base class for trade-off functions f: [0, 1] -> [0, 1].

    Subclasses implement ``_evaluate`` on a validated float array.
    Instances are callable on scalars or arrays; scalar input returns a
    float, array input returns an array of the same shape.
    """

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray | float) -> np.ndarray | float:
        arr = _validate_unit_interval(x, "x")
        out = self._evaluate(np.atleast_1d(arr))
        if np.isscalar(x) or np.ndim(x) == 0:
            return float(out[0])
        return out.reshape(arr.shape)


@dataclasses.dataclass(frozen=True)
class EpsDeltaCurve(TradeoffCurve):
    """Trade-off curve of an (epsilon, delta)-DP guarantee.

    f(x) = max(0, 1 - delta - e^eps * x, e^-eps * (1 - delta - x)).

    Attributes:
      epsilon: privacy parameter, nonnegative.
      delta: additive slack in [0, 1].
    """

    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        hi = 1.0 - self.delta - math.exp(self.epsilon) * x
        lo = math.exp(-self.epsilon) * (1.0 - self.delta - x)
        return np.maximum(0.0, np.maximum(hi, lo))


@dataclasses.dataclass(frozen=True)
class GaussianCurve(TradeoffCurve):
    """Trade-off curve G_mu of distinguishing N(0, 1) from N(mu, 1).

    G_mu(x) = Phi(Phi^-1(1 - x) - mu), with the endpoints x = 0 and x = 1
    mapped exactly to 1 and 0.

    Attributes:
      mu: Gaussian-DP parameter, nonnegative.
    """

    mu: float

    def __post_init__(self) -> None:
        if self.mu < 0.0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        if self.mu == 0.0:
            return 1.0 - x
        out = np.empty_like(x)
        interior = (x > 0.0) & (x < 1.0)
        out[x == 0.0] = 1.0
        out[x == 1.0] = 0.0
        xi = x[interior]
        out[interior] = special.ndtr(-special.ndtri(xi) - self.mu)
        return out


@dataclasses.dataclass(frozen=True)
class DpSgdConfig:
    """Privacy-relevant parameters of noisy gradient training.

    Attributes:
      sigma: noise multiplier (noise scale divided by clipping norm).
      tau: per-step sampling ratio in (0, 1].
      n_iters: number of iterations, at least 1.
    """

    sigma: float
    tau: float
    n_iters: int

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.n_iters < 1:
            raise ValueError(f"n_iters must be >= 1, got {self.n_iters}")


def eval_eps_delta_curve(
    epsilon: float, delta: float, x: np.ndarray | float
) -> np.ndarray | float:
    """Evaluates the (epsilon, delta)-DP trade-off curve at x."""
    return EpsDeltaCurve(epsilon, delta)(x)


def eval_gdp_curve(mu: float, x: np.ndarray | float) -> np.ndarray | float:
    """Evaluates the Gaussian trade-off curve G_mu at x."""
    return GaussianCurve(mu)(x)


def gdp_delta_of_eps(mu: float, epsilon: float) -> float:
    """Smallest delta for which mu-GDP implies (epsilon, delta)-DP.

    delta(eps) = Phi(-eps/mu + mu/2) - e^eps * Phi(-eps/mu - mu/2),
    evaluated in log space so large epsilon cannot overflow.

    Args:
      mu: Gaussian-DP parameter, positive.
      epsilon: privacy parameter, nonnegative.

    Returns:
      The conversion delta, a value in [0, 1], strictly decreasing in
      epsilon.
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be > 0, got {mu}")
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    first = special.ndtr(-epsilon / mu + mu / 2.0)
    log_second = epsilon + special.log_ndtr(-epsilon / mu - mu / 2.0)
    return max(0.0, float(first - np.exp(log_second)))


def gdp_mu_from_eps_delta(epsilon: float, delta: float) -> float:
    """Unique mu whose conversion delta at the given epsilon equals delta.

    Inverts ``gdp_delta_of_eps`` in mu by bracketed root-finding; the
    round-trip ``gdp_delta_of_eps(result, epsilon)`` matches delta to
    within 1e-9.

    Args:
      epsilon: privacy parameter, positive.
      delta: target conversion delta in (0, 1).

    Returns:
      The Gaussian-DP parameter mu.

    Raises:
      ValueError: if the root is not bracketed by [1e-12, 100].
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    lo, hi = 1e-12, 100.0

    def gap(mu: float) -> float:
        return gdp_delta_of_eps(mu, epsilon) - delta

    if gap(lo) > 0.0 or gap(hi) < 0.0:
        raise ValueError(
            f"no mu in bracket [{lo}, {hi}] matches delta={delta} at "
            f"epsilon={epsilon}"
        )
    return float(optimize.brentq(gap, lo, hi, xtol=1e-12, rtol=8.9e-16))


def gdp_approx_mu(config: DpSgdConfig) -> float:
    """Asymptotic Gaussian-DP parameter of noisy iterative training.

    mu = sqrt(2) * tau * sqrt(N) *
         sqrt(e^(sigma^-2) * Phi(1.5/sigma) + 3*Phi(-0.5/sigma) - 2).

    Args:
      config: training parameters (sigma, tau, n_iters).

    Returns:
      The central-limit Gaussian-DP parameter; scales linearly in tau and
      as sqrt(n_iters).

    Raises:
      ValueError: if sigma is so small that e^(sigma^-2) overflows.
    """
    inv_sq = config.sigma**-2
    if inv_sq > 700.0:
        raise ValueError(
            f"sigma={config.sigma} is out of range: e^(sigma^-2) overflows"
        )
    inner = (
        math.exp(inv_sq) * special.ndtr(1.5 / config.sigma)
        + 3.0 * special.ndtr(-0.5 / config.sigma)
        - 2.0
    )
    return math.sqrt(2.0 * inner) * config.tau * math.sqrt(config.n_iters)


def _max_violation(curve: TradeoffCurve, delta: float, a: float) -> float:
    """Largest amount by which the line 1 - delta - e^a x exceeds the curve.

    The gap (line minus curve) is concave in x because the curve is convex,
    so a coarse grid scan followed by golden-section refinement around the
    best cell finds the maximum.
    """
    slope = math.exp(a)
    xs = np.linspace(0.0, 1.0, _GRID_SIZE)
    gaps = (1.0 - delta - slope * xs) - np.asarray(curve(xs))
    best = int(np.argmax(gaps))
    lo = xs[max(best - 1, 0)]
    hi = xs[min(best + 1, _GRID_SIZE - 1)]

    def gap_at(x: float) -> float:
        return (1.0 - delta - slope * x) - float(curve(x))

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = gap_at(c), gap_at(d)
    while b - a > 1e-12:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = gap_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = gap_at(d)
    return max(float(gaps[best]), fc, fd)


def fdp_to_eps_delta(curve: TradeoffCurve, delta: float) -> float:
    """Smallest epsilon such that the curve dominates the (eps, delta) curve.

    Returns max(0, inf{a : f(x) >= 1 - delta - e^a x for all x}). Gaussian
    curves use the closed-form conversion delta(eps) and bracketed
    root-finding; other curves use bisection on the slope with an inner
    concave maximization of the constraint violation.

    Args:
      curve: the trade-off curve to convert.
      delta: target additive slack in [0, 1].

    Returns:
      The epsilon value, or ``math.inf`` when delta < 1 - f(0).
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    if isinstance(curve, GaussianCurve):
        if curve.mu == 0.0:
            return 0.0
        if delta == 0.0:
            return math.inf
        if delta >= gdp_delta_of_eps(curve.mu, 0.0):
            return 0.0
        return float(
            optimize.brentq(
                lambda e: gdp_delta_of_eps(curve.mu, e) - delta,
                0.0,
                _EPS_BRACKET_HI,
                xtol=_EPS_TOL,
            )
        )
    f0 = float(curve(0.0))
    if delta < 1.0 - f0 - _VIOLATION_SLACK:
        return math.inf
    if _max_violation(curve, delta, 0.0) <= _VIOLATION_SLACK:
        return 0.0
    lo, hi = 0.0, _EPS_BRACKET_HI
    while hi - lo > _EPS_TOL:
        mid = (lo + hi) / 2.0
        if _max_violation(curve, delta, mid) <= _VIOLATION_SLACK:
            hi = mid
        else:
            lo = mid
    return hi
