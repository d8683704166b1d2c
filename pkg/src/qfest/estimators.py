"""Close-pair estimators of the quadratic density functionals.

The estimators turn raw close-pair counts into estimates of the integrals
``q_kl = integral p_X(x)**k * p_Y(x)**l dx`` for k + l = 2:

* ``estimate_q20`` / ``estimate_q11`` use every eligible index pair.
* ``estimate_q20_incomplete`` / ``estimate_q11_incomplete`` restrict to pairs
  whose index separation exceeds a gap, which removes the dependence bias of
  serially dependent samples without further assumptions.
* ``estimate_divergence`` and ``estimate_renyi2`` are plug-in compositions.

``q02`` needs no code of its own: it is ``q20`` applied to the second sample.

Every estimate is ``raw_count / (pair_count * ball_volume)``; the value is
nonnegative and may exceed 1 (it estimates an integral, not a probability).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import core
from .core import as_points, ball_volume


class EstimationError(Exception):
    """Base class for estimator failures that are not argument errors."""


class InsufficientDataError(EstimationError):
    """The sample is too short for the requested estimator."""


class UndefinedEntropyError(EstimationError):
    """No close pairs were found, so -log of the estimate is undefined.

    Raised instead of returning +inf: a silent infinity would poison any
    downstream mean-square aggregation.  It usually means epsilon is too
    small for the sample at hand.
    """


_VALID_KL = {(2, 0), (1, 1), (0, 2)}
_VARIANTS = ("complete", "incomplete")


def log_gap(n: int) -> int:
    """Default index-separation gap, floor(log n)."""
    return int(math.floor(math.log(n)))


def sqrt_gap(n: int) -> int:
    """Alternative index-separation gap, floor(sqrt n)."""
    return int(math.floor(math.sqrt(n)))


@dataclass(frozen=True)
class EstimateConfig:
    """Functional selector (k, l), radius, variant, and gap of one estimate."""

    k: int
    l: int
    epsilon: float
    variant: str = "complete"
    gap: int | None = None

    def __post_init__(self):
        if (self.k, self.l) not in _VALID_KL:
            raise ValueError(f"(k, l) must be one of {sorted(_VALID_KL)}, got {(self.k, self.l)}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValueError(f"epsilon must be finite and > 0, got {self.epsilon!r}")
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")
        if self.variant == "incomplete":
            if self.gap is None or self.gap < 0:
                raise ValueError("incomplete variant requires a nonnegative gap")
        elif self.gap is not None:
            raise ValueError("complete variant takes no gap")


@dataclass(frozen=True)
class FunctionalEstimate:
    """A point estimate together with the count and normalizer behind it."""

    value: float
    raw_count: int
    normalizer: float
    config: EstimateConfig


@dataclass(frozen=True)
class AsymptoticVariance:
    """Long-run variance of the projected kernel of a dependent sample.

    ``sigma2`` is the lag-0 variance plus twice the lag-1..m covariances; it
    is the constant in the 4*sigma2/n limit of the estimators' mean squared
    error.  ``lag_covariances[h]`` stores the lag-h term, so
    ``sigma2 == lag_covariances[0] + 2 * sum(lag_covariances[1:])``.
    ``se`` is the standard error of a Monte Carlo evaluation, when known.
    """

    sigma2: float
    m: int
    lag_covariances: tuple[float, ...]
    se: float | None = None

    def __post_init__(self):
        if len(self.lag_covariances) != self.m + 1:
            raise ValueError(
                f"expected {self.m + 1} lag covariances, got {len(self.lag_covariances)}"
            )
        combined = self.lag_covariances[0] + 2.0 * sum(self.lag_covariances[1:])
        if not math.isclose(combined, self.sigma2, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError(
                f"sigma2={self.sigma2} inconsistent with lag covariances (sum {combined})"
            )


def _resolve_gap(gap, n: int) -> int:
    return log_gap(n) if gap is None else int(gap)


def estimate_q20(x, epsilon) -> FunctionalEstimate:
    """Estimate the integrated squared density of the sample's marginal.

    value = close_pairs_within(x, eps) / (comb(n, 2) * ball_volume).
    """
    pts = as_points(x)
    n = pts.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    config = EstimateConfig(k=2, l=0, epsilon=float(epsilon))
    count = core.count_close_within(pts, config.epsilon)
    normalizer = math.comb(n, 2) * ball_volume(pts.shape[1], config.epsilon).volume
    return FunctionalEstimate(count / normalizer, count, normalizer, config)


def estimate_q11(x, y, epsilon) -> FunctionalEstimate:
    """Estimate the cross functional integral p_X * p_Y from equal-size samples.

    value = close_pairs_between(x, y, eps) / (n**2 * ball_volume).
    """
    xp = as_points(x)
    yp = as_points(y)
    config = EstimateConfig(k=1, l=1, epsilon=float(epsilon))
    count = core.count_close_between(xp, yp, config.epsilon)
    n = xp.shape[0]
    normalizer = float(n) ** 2 * ball_volume(xp.shape[1], config.epsilon).volume
    return FunctionalEstimate(count / normalizer, count, normalizer, config)


def estimate_q20_incomplete(x, epsilon, gap=None) -> FunctionalEstimate:
    """Gap-restricted variant of ``estimate_q20``.

    Only pairs with index separation j - i > gap enter; the normalizer is the
    matching pair count comb(n - gap, 2).  ``gap=None`` uses floor(log n).
    """
    pts = as_points(x)
    n = pts.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    g = _resolve_gap(gap, n)
    if g >= n - 1:
        raise InsufficientDataError(f"gap {g} leaves no index pairs for n={n}")
    config = EstimateConfig(k=2, l=0, epsilon=float(epsilon), variant="incomplete", gap=g)
    count = core.count_close_within_gap(pts, config.epsilon, g)
    normalizer = math.comb(n - g, 2) * ball_volume(pts.shape[1], config.epsilon).volume
    return FunctionalEstimate(count / normalizer, count, normalizer, config)


def estimate_q11_incomplete(x, y, epsilon, gap=None) -> FunctionalEstimate:
    """Gap-restricted variant of ``estimate_q11`` over ordered pairs |j - i| > gap."""
    xp = as_points(x)
    yp = as_points(y)
    n = xp.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    g = _resolve_gap(gap, n)
    if g >= n - 1:
        raise InsufficientDataError(f"gap {g} leaves no index pairs for n={n}")
    config = EstimateConfig(k=1, l=1, epsilon=float(epsilon), variant="incomplete", gap=g)
    count = core.count_close_between_gap(xp, yp, config.epsilon, g)
    normalizer = 2 * math.comb(n - g, 2) * ball_volume(xp.shape[1], config.epsilon).volume
    return FunctionalEstimate(count / normalizer, count, normalizer, config)


def estimate_divergence(
    x, y, epsilon, variant: str = "complete", gap=None, clamp_nonnegative: bool = False
) -> float:
    """Plug-in integrated squared density difference, q20 - 2*q11 + q02.

    All three components use the same epsilon, variant, and gap; q02 is the
    within-sample estimator applied to ``y``.  The raw value may be negative
    in finite samples and is reported as computed; pass
    ``clamp_nonnegative=True`` to floor it at zero.
    """
    if variant == "complete":
        q20 = estimate_q20(x, epsilon).value
        q11 = estimate_q11(x, y, epsilon).value
        q02 = estimate_q20(y, epsilon).value
    elif variant == "incomplete":
        n = as_points(x).shape[0]
        g = _resolve_gap(gap, n)
        q20 = estimate_q20_incomplete(x, epsilon, g).value
        q11 = estimate_q11_incomplete(x, y, epsilon, g).value
        q02 = estimate_q20_incomplete(y, epsilon, g).value
    else:
        raise ValueError(f"variant must be one of {_VARIANTS}, got {variant!r}")
    value = q20 - 2.0 * q11 + q02
    if clamp_nonnegative and value < 0.0:
        return 0.0
    return value


def estimate_renyi2(x, epsilon, variant: str = "complete", gap=None) -> float:
    """Quadratic (collision) entropy estimate, -log of the q20 estimate."""
    if variant == "complete":
        est = estimate_q20(x, epsilon)
    elif variant == "incomplete":
        est = estimate_q20_incomplete(x, epsilon, gap)
    else:
        raise ValueError(f"variant must be one of {_VARIANTS}, got {variant!r}")
    if est.raw_count == 0:
        raise UndefinedEntropyError(
            f"no close pairs at epsilon={epsilon}; entropy estimate undefined"
        )
    return -math.log(est.value)
