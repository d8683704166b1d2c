"""Independent ground truth for the estimators.

Three kinds of oracle live here:

* ``true_q`` / ``epsilon_level_target``: the target integrals, by closed form
  where the marginal family admits one and by adaptive Simpson quadrature
  over a truncated domain otherwise.
* ``sigma2_oracle``: Monte Carlo evaluation of the long-run variance constant
  that appears in the 4*sigma2/n mean-square limit.  Known densities are
  evaluated on simulated paths; analytic lag covariances exist only
  case by case, while this route is uniform and its error is quantifiable.
* ``naive_q*``: plain O(n^2) double-loop re-implementations of the four
  count-based estimators, used as the equality reference in tests. They share
  nothing with the accelerated counting paths except the per-pair arithmetic
  contract (squared distance, coordinate-accumulated, compared to eps**2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_points, ball_volume
from .estimators import (
    AsymptoticVariance,
    EstimateConfig,
    EstimationError,
    FunctionalEstimate,
    InsufficientDataError,
    log_gap,
)
from .processes import (
    ExponentialMarginal,
    NormalMarginal,
    SeededStream,
    paired_generate,
    true_marginal_density,
)


class UnsupportedProcessError(EstimationError):
    """The process has no closed-form marginal, so no truth can be produced."""


# ---------------------------------------------------------------------------
# Adaptive Simpson quadrature
# ---------------------------------------------------------------------------


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-11, max_depth: int = 48):
    """Integrate ``f`` over [a, b] by adaptive Simpson with Richardson extrapolation.

    Returns (value, error_estimate).  Interval halving stops once the local
    Richardson error estimate is below the (per-interval) tolerance or the
    depth limit is hit; the returned error estimate is the sum of the local
    ones and is usually conservative for smooth integrands.
    """
    a = float(a)
    b = float(b)
    if a == b:
        return 0.0, 0.0
    if a > b:
        value, err = adaptive_simpson(f, b, a, tol, max_depth)
        return -value, err
    fa, fb = f(a), f(b)
    mid = 0.5 * (a + b)
    fm = f(mid)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_branch(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_branch(f, a, b, fa, fm, fb, whole, tol, depth):
    mid = 0.5 * (a + b)
    lm = 0.5 * (a + mid)
    rm = 0.5 * (mid + b)
    flm = f(lm)
    frm = f(rm)
    left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0, abs(delta) / 15.0
    lv, le = _simpson_branch(f, a, mid, fa, flm, fm, left, tol / 2.0, depth - 1)
    rv, re = _simpson_branch(f, mid, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    return lv + rv, le + re


# ---------------------------------------------------------------------------
# Truth reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruthReport:
    """True functional values for a pair of marginals.

    ``divergence`` and ``renyi2`` are derived from the stored q-values, so the
    identities divergence == q20 - 2*q11 + q02 and renyi2 == -log(q20) hold
    exactly as stored.
    """

    q20: float
    q11: float
    q02: float
    divergence: float
    renyi2: float
    method: str
    error_bound: float

    def value_for(self, functional: str) -> float:
        """Look up the truth for a named functional."""
        try:
            return getattr(self, functional)
        except AttributeError:
            raise ValueError(f"unknown functional {functional!r}") from None


def _report(q20, q11, q02, method, error_bound) -> TruthReport:
    return TruthReport(
        q20=q20,
        q11=q11,
        q02=q02,
        divergence=q20 - 2.0 * q11 + q02,
        renyi2=-math.log(q20),
        method=method,
        error_bound=error_bound,
    )


def _require_marginal(spec):
    marginal = true_marginal_density(spec)
    if marginal is None:
        raise UnsupportedProcessError(
            f"process {getattr(spec, 'kind', spec)!r} has no closed-form marginal"
        )
    return marginal


def _normal_pair_q11(a: NormalMarginal, b: NormalMarginal) -> float:
    # integral of two normal densities = density of the difference at 0
    var = a.variance + b.variance
    return math.exp(-((a.mean - b.mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def _closed_form(mx, my):
    if isinstance(mx, NormalMarginal) and isinstance(my, NormalMarginal):
        return _normal_pair_q11(mx, mx), _normal_pair_q11(mx, my), _normal_pair_q11(my, my)
    if isinstance(mx, ExponentialMarginal) and isinstance(my, ExponentialMarginal):
        q20 = mx.rate / 2.0
        q11 = mx.rate * my.rate / (mx.rate + my.rate)
        q02 = my.rate / 2.0
        return q20, q11, q02
    return None


def _quadrature_q(mx, my, tol):
    lo_x, hi_x = mx.support()
    lo_y, hi_y = my.support()
    q20, e20 = adaptive_simpson(lambda t: mx.pdf(t) ** 2, lo_x, hi_x, tol)
    q02, e02 = adaptive_simpson(lambda t: my.pdf(t) ** 2, lo_y, hi_y, tol)
    lo, hi = max(lo_x, lo_y), min(hi_x, hi_y)
    if lo < hi:
        q11, e11 = adaptive_simpson(lambda t: mx.pdf(t) * my.pdf(t), lo, hi, tol)
    else:
        q11, e11 = 0.0, 0.0
    return (q20, q11, q02), e20 + e11 + e02


def true_q(spec_x, spec_y=None, method: str = "auto", tol: float = 1e-11) -> TruthReport:
    """True q20/q11/q02 (and derived divergence/entropy) for a process pair.

    With ``spec_y=None`` the same marginal is used on both sides, so q11 and
    q02 coincide with q20 and the divergence is exactly zero.  ``method`` may
    force ``"closed-form"`` or ``"quadrature"``; the default uses the closed
    form when the marginal families admit one.
    """
    mx = _require_marginal(spec_x)
    my = mx if spec_y is None else _require_marginal(spec_y)
    if method not in ("auto", "closed-form", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method != "quadrature":
        closed = _closed_form(mx, my)
        if closed is not None:
            return _report(*closed, method="closed-form", error_bound=0.0)
        if method == "closed-form":
            raise UnsupportedProcessError(
                f"no closed form for marginals {type(mx).__name__}/{type(my).__name__}"
            )
    values, err = _quadrature_q(mx, my, tol)
    return _report(*values, method="quadrature", error_bound=err)


def epsilon_level_target(spec_x, spec_y, epsilon: float, tol: float = 1e-11) -> float:
    """The radius-smoothed target P(d(X, Y) <= eps) / ball_volume for independent X, Y.

    This is what the cross estimator is unbiased for (given enough index
    separation); it converges to q11 as the radius shrinks.  Univariate
    marginals only.
    """
    eps = float(epsilon)
    if not (math.isfinite(eps) and eps > 0.0):
        raise ValueError(f"epsilon must be finite and > 0, got {epsilon!r}")
    mx = _require_marginal(spec_x)
    my = mx if spec_y is None else _require_marginal(spec_y)
    lo, hi = mx.support()

    def integrand(t: float) -> float:
        return mx.pdf(t) * (my.cdf(t + eps) - my.cdf(t - eps))

    prob, _ = adaptive_simpson(integrand, lo, hi, tol)
    return prob / ball_volume(1, eps).volume


# ---------------------------------------------------------------------------
# Long-run variance oracle
# ---------------------------------------------------------------------------


def _lag_covariances(series: np.ndarray, m: int) -> tuple[float, ...]:
    mean = float(series.mean())
    centered = series - mean
    n = centered.size
    covs = [float(np.mean(centered * centered))]
    for h in range(1, m + 1):
        covs.append(float(np.mean(centered[:-h] * centered[h:])) if h < n else 0.0)
    return tuple(covs)


def _combine(covs) -> float:
    return covs[0] + 2.0 * sum(covs[1:])


def sigma2_oracle(
    spec_x,
    functional: tuple[int, int] = (2, 0),
    spec_y=None,
    reps: int = 200_000,
    stream: SeededStream | None = None,
    batches: int = 32,
) -> AsymptoticVariance:
    """Monte Carlo long-run variance of the projected kernel.

    For the one-sample functional the projected kernel is the marginal
    density evaluated along the path; for the cross functional it is
    ``(p_Y(X_t) + p_X(Y_t)) / 2`` along a jointly generated pair of paths.
    The standard error comes from batch means over ``batches`` contiguous
    blocks of one long run.
    """
    if stream is None:
        stream = SeededStream(0)
    reps = int(reps)
    if reps < 4 * batches:
        raise ValueError(f"reps={reps} too small for {batches} batches")

    if functional == (2, 0) or functional == (0, 2):
        spec = spec_x if functional == (2, 0) else spec_y
        if spec is None:
            raise ValueError("functional (0, 2) requires spec_y")
        marginal = _require_marginal(spec)
        path = spec.sample_path(reps, stream.generator())
        series = np.asarray(marginal.pdf(path), dtype=float)
        m = spec.m
    elif functional == (1, 1):
        if spec_y is None:
            raise ValueError("functional (1, 1) requires spec_y")
        mx = _require_marginal(spec_x)
        my = _require_marginal(spec_y)
        x, y = paired_generate(spec_x, spec_y, reps, stream)
        series = 0.5 * (
            np.asarray(my.pdf(x[:, 0]), dtype=float)
            + np.asarray(mx.pdf(y[:, 0]), dtype=float)
        )
        m = max(spec_x.m, spec_y.m)
    else:
        raise ValueError(f"functional must be (2,0), (1,1) or (0,2), got {functional!r}")

    covs = _lag_covariances(series, m)
    sigma2 = _combine(covs)

    batch_len = series.size // batches
    batch_values = [
        _combine(_lag_covariances(series[b * batch_len : (b + 1) * batch_len], m))
        for b in range(batches)
    ]
    spread = float(np.std(batch_values, ddof=1))
    return AsymptoticVariance(
        sigma2=sigma2, m=m, lag_covariances=covs, se=spread / math.sqrt(batches)
    )


# ---------------------------------------------------------------------------
# Reference estimators (always O(n^2), row-at-a-time double loops)
# ---------------------------------------------------------------------------


def _row_sq_dists(p: np.ndarray, pts: np.ndarray) -> np.ndarray:
    diff = pts[:, 0] - p[0]
    s = diff * diff
    for k in range(1, pts.shape[1]):
        diff = pts[:, k] - p[k]
        s = s + diff * diff
    return s


def naive_q20(x, epsilon) -> FunctionalEstimate:
    """Reference double-loop version of ``estimate_q20``."""
    pts = as_points(x)
    n = pts.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    config = EstimateConfig(k=2, l=0, epsilon=float(epsilon))
    eps2 = config.epsilon * config.epsilon
    count = 0
    for i in range(n - 1):
        count += int(np.count_nonzero(_row_sq_dists(pts[i], pts[i + 1 :]) <= eps2))
    normalizer = math.comb(n, 2) * ball_volume(pts.shape[1], config.epsilon).volume
    return FunctionalEstimate(count / normalizer, count, normalizer, config)


def naive_q11(x, y, epsilon) -> FunctionalEstimate:
    """Reference double-loop version of ``estimate_q11``."""
    xp = as_points(x)
    yp = as_points(y)
    if xp.shape[1] != yp.shape[1]:
        raise ValueError("samples have mismatched dimensions")
    if xp.shape[0] != yp.shape[0]:
        raise ValueError("samples must have equal lengths")
    config = EstimateConfig(k=1, l=1, epsilon=float(epsilon))
    eps2 = config.epsilon * config.epsilon
    count = 0
    for i in range(xp.shape[0]):
        count += int(np.count_nonzero(_row_sq_dists(xp[i], yp) <= eps2))
    n = xp.shape[0]
    normalizer = float(n) ** 2 * ball_volume(xp.shape[1], config.epsilon).volume
    return FunctionalEstimate(count / normalizer, count, normalizer, config)


def naive_q20_incomplete(x, epsilon, gap=None) -> FunctionalEstimate:
    """Reference double-loop version of ``estimate_q20_incomplete``."""
    pts = as_points(x)
    n = pts.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    g = log_gap(n) if gap is None else int(gap)
    if g >= n - 1:
        raise InsufficientDataError(f"gap {g} leaves no index pairs for n={n}")
    config = EstimateConfig(k=2, l=0, epsilon=float(epsilon), variant="incomplete", gap=g)
    eps2 = config.epsilon * config.epsilon
    count = 0
    for i in range(n - g - 1):
        count += int(np.count_nonzero(_row_sq_dists(pts[i], pts[i + g + 1 :]) <= eps2))
    normalizer = math.comb(n - g, 2) * ball_volume(pts.shape[1], config.epsilon).volume
    return FunctionalEstimate(count / normalizer, count, normalizer, config)


def naive_q11_incomplete(x, y, epsilon, gap=None) -> FunctionalEstimate:
    """Reference double-loop version of ``estimate_q11_incomplete``."""
    xp = as_points(x)
    yp = as_points(y)
    if xp.shape[1] != yp.shape[1]:
        raise ValueError("samples have mismatched dimensions")
    if xp.shape[0] != yp.shape[0]:
        raise ValueError("samples must have equal lengths")
    n = xp.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    g = log_gap(n) if gap is None else int(gap)
    if g >= n - 1:
        raise InsufficientDataError(f"gap {g} leaves no index pairs for n={n}")
    config = EstimateConfig(k=1, l=1, epsilon=float(epsilon), variant="incomplete", gap=g)
    eps2 = config.epsilon * config.epsilon
    count = 0
    for i in range(n):
        before = yp[: max(i - g, 0)]
        after = yp[i + g + 1 :]
        if before.size:
            count += int(np.count_nonzero(_row_sq_dists(xp[i], before) <= eps2))
        if after.size:
            count += int(np.count_nonzero(_row_sq_dists(xp[i], after) <= eps2))
    normalizer = 2 * math.comb(n - g, 2) * ball_volume(xp.shape[1], config.epsilon).volume
    return FunctionalEstimate(count / normalizer, count, normalizer, config)
