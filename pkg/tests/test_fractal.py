"""Tests for roughness and dimension estimators on cascade paths."""

import numpy as np
import pytest

from cascadekit.core import CascadeParams, build_path, generate_leaf_signs
from cascadekit.fractal import (
    box_counts,
    box_dimension,
    increment_scaling_exponent,
    pointwise_holder,
    pointwise_holder_profile,
)

DEPTH = 18


def full_path(params, depth=DEPTH):
    field = generate_leaf_signs(params, depth)
    return build_path(field, params, max_points=params.base**depth)


def test_ramp_exactness():
    """H = 1 gives B(t) = t: every estimator must return 1 sharply.

    The increment and box fits are algebraically exact ramps; the
    pointwise fit snaps ball ends outward to the grid, which costs a
    few 1e-3 at shallow scales.
    """
    params = CascadeParams(base=2, hurst=1.0, seed=0)
    path = full_path(params)
    fit = increment_scaling_exponent(path)
    assert abs(fit.estimate - 1.0) <= 1e-12
    assert fit.r_squared >= 1.0 - 1e-12
    assert fit.zero_increments == 0
    dim = box_dimension(path)
    assert abs(dim.estimate - 1.0) <= 1e-12
    point = pointwise_holder(path, 0.37)
    assert abs(point.estimate - 1.0) <= 1e-2


def test_exponent_recovers_h():
    params = CascadeParams(base=2, hurst=0.7, seed=35)
    fit = increment_scaling_exponent(full_path(params))
    assert abs(fit.estimate - 0.7) <= 0.05
    assert fit.kind == "increment_exponent"
    assert fit.r_squared > 0.99
    params95 = CascadeParams(base=2, hurst=0.95, seed=35)
    fit95 = increment_scaling_exponent(full_path(params95))
    assert abs(fit95.estimate - 0.95) <= 0.05


def test_box_dimension_recovers_2_minus_h():
    params = CascadeParams(base=2, hurst=0.7, seed=35)
    dim = box_dimension(full_path(params))
    assert abs(dim.estimate - 1.3) <= 0.1
    assert dim.kind == "box_dimension"
    params95 = CascadeParams(base=2, hurst=0.95, seed=35)
    dim95 = box_dimension(full_path(params95))
    assert abs(dim95.estimate - 1.05) <= 0.1


def test_box_counts_monotone():
    params = CascadeParams(base=2, hurst=0.7, seed=35)
    counts = box_counts(full_path(params))
    js = [j for j, _ in counts]
    ns = [n for _, n in counts]
    assert js == list(range(4, 13))
    assert all(b > a for a, b in zip(ns, ns[1:]))
    # each count is at most b^j boxes per column times the value range
    assert all(n >= 2**j for j, n in counts)


def test_zero_increments_are_counted():
    """Fair-sign block sums hit exactly zero; they are excluded, tallied."""
    params = CascadeParams.symmetric(base=2, seed=0)
    fit = increment_scaling_exponent(full_path(params))
    assert fit.zero_increments > 0
    assert np.isfinite(fit.estimate)
    # symmetric walks scale like the critical case: exponent near 1/2
    assert abs(fit.estimate - 0.5) <= 0.05


def test_pointwise_profile_tightness():
    """64-point profile: tight spread around H for a convergent path."""
    params = CascadeParams(base=2, hurst=0.7, seed=35)
    prof = pointwise_holder_profile(full_path(params))
    assert prof.shape == (64,)
    assert abs(float(np.median(prof)) - 0.7) <= 0.1
    assert float(prof.std()) <= 0.1


def test_pointwise_holder_guards():
    params = CascadeParams(base=2, hurst=0.7, seed=0)
    path = full_path(params, 14)
    with pytest.raises(ValueError):
        pointwise_holder(path, 0.0)
    with pytest.raises(ValueError):
        pointwise_holder(path, 1.0)
    flat = build_path(generate_leaf_signs(CascadeParams(base=2, hurst=1.0,
                                                        seed=0), 14),
                      CascadeParams(base=2, hurst=1.0, seed=0))
    zeroed = type(path)(params=flat.params, depth=flat.depth,
                        values=np.zeros_like(flat.values), kind=flat.kind,
                        stride=flat.stride)
    with pytest.raises(ValueError):
        pointwise_holder(zeroed, 0.5)


def test_estimators_reject_decimated_paths():
    """Decimation erases sub-stride oscillation, so fits must refuse."""
    params = CascadeParams(base=2, hurst=0.7, seed=0)
    field = generate_leaf_signs(params, 18)
    thin = build_path(field, params, max_points=2**12)
    assert thin.is_decimated
    with pytest.raises(ValueError):
        increment_scaling_exponent(thin)
    with pytest.raises(ValueError):
        box_dimension(thin)
    with pytest.raises(ValueError):
        pointwise_holder(thin, 0.5)
    with pytest.raises(ValueError):
        pointwise_holder_profile(thin)


def test_range_preconditions():
    params = CascadeParams(base=2, hurst=0.7, seed=0)
    path = full_path(params, 14)
    with pytest.raises(ValueError):
        increment_scaling_exponent(path, p_range=(1, 8))
    with pytest.raises(ValueError):
        increment_scaling_exponent(path, p_range=(4, 12))  # needs n >= 18
    with pytest.raises(ValueError):
        increment_scaling_exponent(path, p_range=(4, 6))  # < 4 scales
    with pytest.raises(ValueError):
        box_dimension(path, j_range=(4, 13))  # needs j <= n - 2
    with pytest.raises(ValueError):
        box_dimension(path, j_range=(0, 8))
