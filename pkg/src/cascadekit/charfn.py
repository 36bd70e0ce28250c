"""Characteristic function of the limit mass and its density (H > 1/2).

The limit mass Z of a convergent cascade satisfies the distributional
fixed point Z = b^(-H) * sum_j eps_j Z(j), which turns into a functional
equation for the characteristic function phi(t) = E(exp(itZ)):

    phi(t) = [ p_plus * phi(b^(-H) t) + p_minus * phi(-b^(-H) t) ]^b .

Iterating from phi_0(t) = e^{it} (depth-0 mass is the constant 1) walks
the finite-depth characteristic functions phi_n up the argument ladder
{b^(-kH) t, k = n..0}; the sign-flipped partner at each rung is the
complex conjugate (Z_n is real), so one stored value per rung covers the
pair and an n-rung evaluation costs O(n).

Numerical form: the ladder is carried as the deviation g = phi - 1, with
the bottom rung g_0(v) = -2 sin^2(v/2) + i sin(v) and the step

    m  = p_plus * g + p_minus * conj(g)
    g' = sum_{k=1}^{b} C(b, k) m^k        (i.e. (1+m)^b - 1, expanded).

Carrying phi itself loses the real part of the deviation to rounding at
the bottom rungs (the naive float ladder stalls near 1e-5 relative error
and, worse, its successive-depth differences still shrink to machine
epsilon, so a Cauchy test on it certifies garbage).  The deviation form
is machine-accurate at any depth and its Cauchy test is honest.

Inversion: f(x) = (1/2pi) Integral e^{-itx} phi(t) dt, computed as the
Hermitian fold (1/pi) Integral_0^T Re[e^{-itx} phi(t)] dt by trapezoid.
The fold makes the density exactly real, which is how the "imaginary
residue" of the two-sided integral is clipped here.  The t-step is tied
to the x-window width W by dt = 2pi/W (alias period = window), and T
doubles until |phi(T)| < 1e-12.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import CascadeParams, Regime, regime_of
from .moments import limit_z_moments

DEFAULT_DEPTH = 48
MAX_AUTO_DEPTH = 4096
CAUCHY_TOL = 1e-10
TAIL_TOL = 1e-12
T_CAP = float(2**20)
MIN_X_POINTS = 4096


def _require_convergent(params: CascadeParams) -> None:
    if regime_of(params) is not Regime.CONVERGENT:
        raise ValueError("characteristic-function machinery requires the "
                         "convergent regime (1/2 < H <= 1)")


def _deviation_step(g: np.ndarray, p_plus: float, base: int) -> np.ndarray:
    """One rung up the ladder in deviation form: g -> (1+m)^b - 1 expanded."""
    m = p_plus * g + (1.0 - p_plus) * np.conj(g)
    acc = np.zeros_like(m)
    power = np.ones_like(m)
    for k in range(1, base + 1):
        power = power * m
        acc = acc + math.comb(base, k) * power
    return acc


def _ladder(params: CascadeParams, t: np.ndarray, depth: int) -> np.ndarray:
    """phi_depth(t) - 1 for a real argument array, deviation ladder."""
    h = params.hurst
    b = params.base
    p_plus = params.p_plus
    v = t * float(b) ** (-depth * h)
    g = -2.0 * np.sin(0.5 * v) ** 2 + 1j * np.sin(v)
    for _ in range(depth):
        g = _deviation_step(g, p_plus, b)
    return g


def charfn_at(params: CascadeParams, t, depth: int = DEFAULT_DEPTH):
    """phi_depth(t), the characteristic function of the depth-``depth`` mass.

    ``t`` may be a scalar or array; scalar in, complex scalar out.  As
    depth grows this converges to the characteristic function of the
    limit mass Z (geometrically; slower as H approaches 1/2).
    """
    _require_convergent(params)
    if depth < 0:
        raise ValueError("depth must be >= 0")
    t_arr = np.asarray(t, dtype=float)
    out = 1.0 + _ladder(params, np.atleast_1d(t_arr), depth)
    if t_arr.ndim == 0:
        return complex(out[0])
    return out.reshape(t_arr.shape)


def charfn_auto(params: CascadeParams, t, *, tol: float = CAUCHY_TOL,
                start_depth: int = DEFAULT_DEPTH,
                max_depth: int = MAX_AUTO_DEPTH):
    """phi at auto-selected depth: doubles from ``start_depth`` until the
    successive-depth sup-norm difference is below ``tol``.

    Returns (values, depth_used).  Hitting ``max_depth`` without meeting
    the tolerance is reported as a warning, not an error (the returned
    values are then the deepest computed).
    """
    _require_convergent(params)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    depth = start_depth
    prev = 1.0 + _ladder(params, t_arr, depth)
    gap = math.inf
    while depth < max_depth and gap > tol:
        depth_next = min(2 * depth, max_depth)
        cur = 1.0 + _ladder(params, t_arr, depth_next)
        gap = float(np.max(np.abs(cur - prev)))
        prev, depth = cur, depth_next
    if gap > tol:
        warnings.warn(f"characteristic-function ladder stopped at depth "
                      f"{depth} with residual {gap:.3e} > {tol:.1e}",
                      RuntimeWarning, stacklevel=2)
    values = prev if np.asarray(t).ndim else complex(prev[0])
    return values, depth


@dataclass(frozen=True)
class CharFnGrid:
    """phi_n sampled on a symmetric uniform t-grid [-T, T]."""

    params: CascadeParams
    depth: int
    t: np.ndarray
    values: np.ndarray

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.values)))

    def hermitian_defect(self) -> float:
        """sup |phi(-t) - conj(phi(t))| over the grid."""
        return float(np.max(np.abs(self.values[::-1]
                                   - np.conj(self.values))))


def build_charfn_grid(params: CascadeParams, t_max: float, dt: float,
                      depth: int | None = None) -> CharFnGrid:
    """Sample phi on the symmetric grid; ``depth=None`` auto-selects.

    Only t >= 0 is evaluated; the negative half is filled by conjugate
    reflection, so the Hermitian invariant holds by construction and the
    stored pair per ladder rung is explicit in the output too.
    """
    _require_convergent(params)
    if t_max <= 0 or dt <= 0:
        raise ValueError("t_max and dt must be positive")
    n_half = int(round(t_max / dt))
    t_pos = dt * np.arange(n_half + 1)
    if depth is None:
        vals_pos, depth = charfn_auto(params, t_pos)
    else:
        vals_pos = charfn_at(params, t_pos, depth)
    t = np.concatenate([-t_pos[:0:-1], t_pos])
    values = np.concatenate([np.conj(vals_pos[:0:-1]), vals_pos])
    return CharFnGrid(params=params, depth=depth, t=t, values=values)


@dataclass(frozen=True)
class DensityResult:
    """Numerically inverted density of the limit mass on an x-grid."""

    params: CascadeParams
    x: np.ndarray
    density: np.ndarray
    t_max: float
    dt: float
    depth: int
    tail_magnitude: float  # |phi(t_max)|; should be < TAIL_TOL

    def moment(self, k: int) -> float:
        """Integral of x^k f(x) dx over the grid (trapezoid)."""
        return float(np.trapezoid(self.x**k * self.density, self.x))

    def cdf(self) -> np.ndarray:
        """Cumulative integral of the density on the x-grid.

        Not renormalized: total mass stays whatever the inversion gave,
        so normalization defects remain visible to callers.
        """
        steps = np.diff(self.x) * 0.5 * (self.density[1:]
                                         + self.density[:-1])
        return np.concatenate([[0.0], np.cumsum(steps)])


def _auto_t_max(params: CascadeParams, depth: int | None) -> tuple[float, int]:
    """Double T from 16 until |phi(T)| < TAIL_TOL (cap T_CAP)."""
    t_max = 16.0
    while True:
        if depth is None:
            val, used = charfn_auto(params, t_max)
        else:
            val, used = charfn_at(params, t_max, depth), depth
        if abs(val) < TAIL_TOL or t_max >= T_CAP:
            return t_max, used
        t_max *= 2.0


def density_of_z(params: CascadeParams, *, t_max: float | None = None,
                 dt: float | None = None, x_points: int = MIN_X_POINTS,
                 depth: int | None = None,
                 span_sds: float = 14.0) -> DensityResult:
    """Density f of the limit mass Z by Fourier inversion of phi.

    The x-window is mean +- span_sds standard deviations (both exact,
    from the limit moments); dt defaults to 2pi / window-width so the
    aliasing period equals the window; t_max defaults to doubling until
    the tail |phi(T)| < 1e-12.  A non-negligible tail at t_max is
    reported via a warning and the ``tail_magnitude`` field, not raised.
    """
    _require_convergent(params)
    if params.hurst == 1.0:
        raise ValueError("H = 1 gives the deterministic mass Z = 1, "
                         "which has no density")
    m2 = float(limit_z_moments(params, 2)[1])
    sd = math.sqrt(m2 - 1.0)
    x_lo, x_hi = 1.0 - span_sds * sd, 1.0 + span_sds * sd
    width = x_hi - x_lo
    if dt is None:
        dt = 2.0 * math.pi / width
    if t_max is None:
        t_max, _ = _auto_t_max(params, depth)
    n_t = max(2, int(math.ceil(t_max / dt)) + 1)
    t = np.linspace(0.0, t_max, n_t)
    if depth is None:
        phi, depth_used = charfn_auto(params, t)
    else:
        phi = charfn_at(params, t, depth)
        depth_used = depth
    tail = float(abs(phi[-1]))
    if tail >= TAIL_TOL:
        warnings.warn(f"characteristic function tail |phi({t_max:g})| = "
                      f"{tail:.2e} is not negligible; density accuracy "
                      "is degraded", RuntimeWarning, stacklevel=2)

    x = np.linspace(x_lo, x_hi, max(x_points, MIN_X_POINTS))
    weights = np.full(n_t, t[1] - t[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5
    f = np.empty_like(x)
    block = 512
    for i in range(0, x.size, block):
        xb = x[i:i + block]
        kernel = np.exp(-1j * np.outer(t, xb))
        f[i:i + block] = (weights * phi.real) @ kernel.real \
            - (weights * phi.imag) @ kernel.imag
    f /= math.pi
    return DensityResult(params=params, x=x, density=f, t_max=t_max,
                         dt=float(t[1] - t[0]), depth=depth_used,
                         tail_magnitude=tail)


def cf_moments_by_differences(params: CascadeParams, *, h_step: float = 1e-3,
                              depth: int | None = None) -> tuple[float, float]:
    """(E Z, E Z^2) recovered from phi near 0 by central differences.

    Uses the deviation g = phi - 1 directly, so no cancellation against
    the leading 1:  E Z ~ Im g(h)/h,  E Z^2 ~ -2 Re g(h)/h^2, each with
    O(h^2) truncation error; h_step = 1e-3 keeps that below 1e-5 for
    moderate third moments.
    """
    _require_convergent(params)
    t_arr = np.array([h_step])
    if depth is None:
        val, _ = charfn_auto(params, t_arr)
    else:
        val = charfn_at(params, t_arr, depth)
    g = complex(val[0]) - 1.0
    mean = g.imag / h_step
    second = -2.0 * g.real / h_step**2
    return mean, second


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of log |phi(t)| against |t|^(1/H)."""

    params: CascadeParams
    rho: float
    r_squared: float
    n_points: int
    t_lo: float
    t_hi: float
    octave_monotone: bool  # reported, not asserted


def decay_fit(params: CascadeParams, *, t_lo: float | None = None,
              t_hi: float | None = None, n_points: int = 200,
              depth: int | None = None) -> DecayFit:
    """Fit the stretched-exponential tail bound |phi(t)| = O(rho^(|t|^(1/H))).

    The fit window is the range where 1e-12 < |phi| < 1e-2 (auto-located
    by scanning up to the tail cutoff when not supplied); the slope of
    log |phi| against |t|^(1/H) gives rho = exp(slope).  Raises when the
    window holds fewer than 8 usable points.
    """
    _require_convergent(params)
    if t_hi is None:
        t_hi, _ = _auto_t_max(params, depth)
    if t_lo is None:
        t_lo = 0.1
    t = np.geomspace(t_lo, t_hi, n_points)
    if depth is None:
        phi, _ = charfn_auto(params, t)
    else:
        phi = charfn_at(params, t, depth)
    mod = np.abs(phi)
    mask = (mod > 1e-12) & (mod < 1e-2)
    if mask.sum() < 8:
        raise ValueError("insufficient range: fewer than 8 grid points "
                         "with 1e-12 < |phi| < 1e-2")
    ts, ms = t[mask], mod[mask]
    xs = ts ** (1.0 / params.hurst)
    ys = np.log(ms)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0

    octave_ok = True
    lo = float(ts[0])
    while lo * 2.0 <= ts[-1]:
        cur = ms[(ts >= lo) & (ts < 2.0 * lo)]
        nxt = ms[(ts >= 2.0 * lo) & (ts < 4.0 * lo)]
        if cur.size and nxt.size and nxt.max() > cur.max():
            octave_ok = False
            break
        lo *= 2.0
    return DecayFit(params=params, rho=float(math.exp(slope)),
                    r_squared=r2, n_points=int(mask.sum()),
                    t_lo=float(ts[0]), t_hi=float(ts[-1]),
                    octave_monotone=octave_ok)
