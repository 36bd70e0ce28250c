"""Pathwise roughness estimators: Hölder exponents and graph box dimension.

For a convergent cascade (H > 1/2) the limit path is monofractal: every
point has pointwise Hölder exponent H and the graph has box dimension
2 - H.  These are asymptotic statements about the limit; the estimators
here work on a finite-depth path and recover them by ordinary least
squares over a documented range of dyadic scales (dyadic in the cascade
base b), which is why every estimate travels with its scales, residual,
and the transform that produced it (:class:`DimensionFit`).

All three estimators require a full-resolution path (stride 1): the
oscillation of the stored piecewise-linear interpolant is attained at
grid points, so window extrema are exact, but a decimated path hides
sub-stride oscillation and silently flattens the estimates.

Scale-range rule of thumb baked into the preconditions: the self-similar
structure below a width-b^-j window scales as b^-(n-j)H, so estimates
use j at most n - 6 (exponent) or n - 2 (boxes) to keep within-window
structure resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SamplePath


@dataclass(frozen=True)
class DimensionFit:
    """OLS fit over dyadic scales with its derived estimate.

    ``estimate`` is a documented transform of ``slope``:
    box_dimension: estimate = slope of ln N_j vs j ln b;
    increment_exponent / pointwise_holder: estimate = -slope of the
    mean log_b magnitude vs generation/scale index j.
    """

    kind: str
    scales: np.ndarray
    log_values: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    estimate: float
    zero_increments: int = 0


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    if x.size < 4:
        raise ValueError("need at least 4 scales for a fit")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _require_full_resolution(path: SamplePath) -> None:
    if path.is_decimated:
        raise ValueError("fractal estimators need a full-resolution path; "
                         "rebuild with max_points >= base**depth")


def increment_scaling_exponent(path: SamplePath,
                               p_range: tuple[int, int] = (4, 12)
                               ) -> DimensionFit:
    """Hölder exponent from the decay of generation-p increment sizes.

    The generation-p increment over one b-adic cell factors into
    b^(-pH) times an O(1) subtree mass, so the across-cells mean of
    log_b |increment| falls like -pH + O(1); the fit's negated slope
    estimates H.  Zero increments (possible at finite depth: a subtree
    mass can vanish exactly) are excluded from the mean and counted in
    ``zero_increments``.
    """
    _require_full_resolution(path)
    b = path.params.base
    n = path.depth
    p_lo, p_hi = p_range
    if p_lo < 2 or p_hi > n - 6 or p_hi < p_lo:
        raise ValueError("p_range must sit within [2, depth - 6]")
    v = path.values
    log_b = math.log(b)
    ps, means = [], []
    zeros = 0
    for p in range(p_lo, p_hi + 1):
        step = b ** (n - p)
        incr = v[step::step] - v[:-step:step]
        mags = np.abs(incr)
        nz = mags > 0.0
        zeros += int(mags.size - nz.sum())
        if nz.sum() == 0:
            raise ValueError(f"all generation-{p} increments are zero")
        ps.append(p)
        means.append(float(np.mean(np.log(mags[nz]) / log_b)))
    slope, intercept, r2 = _ols(np.array(ps, dtype=float), np.array(means))
    return DimensionFit(kind="increment_exponent",
                        scales=np.array(ps), log_values=np.array(means),
                        slope=slope, intercept=intercept, r_squared=r2,
                        estimate=-slope, zero_increments=zeros)


def _window_extrema(values: np.ndarray, edges: np.ndarray,
                    grid_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-window (min, max) of the path samples, windows sharing edges.

    ``edges`` are fractional positions in [0, 1]; each window
    [edges[k], edges[k+1]] includes both boundary samples, matching the
    sup of the piecewise-linear interpolant over the closed window.
    """
    idx = np.round(edges * grid_size).astype(np.int64)
    starts = idx[:-1]
    mins = np.minimum.reduceat(values, starts)
    maxs = np.maximum.reduceat(values, starts)
    right = values[idx[1:]]
    return np.minimum(mins, right), np.maximum(maxs, right)


def box_dimension(path: SamplePath,
                  j_range: tuple[int, int] = (4, 12)) -> DimensionFit:
    """Graph box dimension by column counting at sides b^-j.

    For each scale j the graph is covered by squares of side b^-j; the
    count over one width-b^-j column is floor(max/delta) -
    floor(min/delta) + 1 with delta = b^-j (the vertical run of boxes
    the column's range touches), using exact window extrema.  Fits
    ln N_j against j ln b; the slope is the dimension estimate.
    """
    _require_full_resolution(path)
    b = path.params.base
    n = path.depth
    j_lo, j_hi = j_range
    if j_lo < 1 or j_hi > n - 2 or j_hi < j_lo:
        raise ValueError("j_range must sit within [1, depth - 2]")
    v = path.values
    m = b**n
    js, log_counts = [], []
    for j in range(j_lo, j_hi + 1):
        delta = float(b) ** (-j)
        edges = np.arange(b**j + 1) * delta
        mins, maxs = _window_extrema(v, edges, m)
        per_col = (np.floor(maxs / delta) - np.floor(mins / delta)
                   + 1.0)
        count = float(per_col.sum())
        js.append(j)
        log_counts.append(math.log(count))
    x = np.array(js, dtype=float) * math.log(b)
    y = np.array(log_counts)
    slope, intercept, r2 = _ols(x, y)
    return DimensionFit(kind="box_dimension", scales=np.array(js),
                        log_values=y, slope=slope, intercept=intercept,
                        r_squared=r2, estimate=slope)


def box_counts(path: SamplePath, j_range: tuple[int, int] = (4, 12)
               ) -> list[tuple[int, int]]:
    """(j, N_j) pairs as used by :func:`box_dimension`, for serialization."""
    fit = box_dimension(path, j_range)
    return [(int(j), int(round(math.exp(y))))
            for j, y in zip(fit.scales, fit.log_values)]


def pointwise_holder(path: SamplePath, t: float,
                     j_range: tuple[int, int] = (2, 12)) -> DimensionFit:
    """Pointwise Hölder exponent at t from shrinking-ball oscillations.

    Regresses log_b of the oscillation sup - inf over the balls
    |s - t| <= b^-j (clipped to [0, 1]) against j; the negated slope
    estimates the exponent.  The ball endpoints are snapped outward to
    grid points, so the oscillation is that of the stored interpolant
    over a slightly enlarged ball, a conservative choice at these scales.
    """
    _require_full_resolution(path)
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    b = path.params.base
    n = path.depth
    j_lo, j_hi = j_range
    if j_hi > n or j_hi < j_lo:
        raise ValueError("j_range must sit within [1, depth]")
    v = path.values
    m = b**n
    log_b = math.log(b)
    js, log_osc = [], []
    for j in range(j_lo, j_hi + 1):
        r = float(b) ** (-j)
        lo = max(0.0, t - r)
        hi = min(1.0, t + r)
        i_lo = int(math.floor(lo * m))
        i_hi = int(math.ceil(hi * m))
        window = v[i_lo:i_hi + 1]
        osc = float(window.max() - window.min())
        if osc <= 0.0:
            raise ValueError(f"zero oscillation at scale j={j}; "
                             "path is flat near t")
        js.append(j)
        log_osc.append(math.log(osc) / log_b)
    slope, intercept, r2 = _ols(np.array(js, dtype=float),
                                np.array(log_osc))
    return DimensionFit(kind="pointwise_holder", scales=np.array(js),
                        log_values=np.array(log_osc), slope=slope,
                        intercept=intercept, r_squared=r2,
                        estimate=-slope)


def pointwise_holder_profile(path: SamplePath, n_points: int = 64,
                             j_range: tuple[int, int] = (2, 12)
                             ) -> np.ndarray:
    """Pointwise exponent estimates at n_points mid-cell positions.

    Evaluation points (k + 1/2)/n_points avoid 0 and 1; monofractality
    predicts a tight spread around H (the profile's spread, not each
    individual point, is the stable statistic at finite depth).
    """
    ts = (np.arange(n_points) + 0.5) / n_points
    return np.array([pointwise_holder(path, float(t), j_range).estimate
                     for t in ts])
