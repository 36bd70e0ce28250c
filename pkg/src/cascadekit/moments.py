"""Exact moment computations for the cascade mass and its normalizations.

Everything here is analytic (no Monte Carlo).  The central object is the
terminal mass Z_n = B_n(1), which satisfies the one-step decomposition

    Z_{n+1}  =  b^(-H) * sum_{j=0}^{b-1} eps_j * Z_n(j)

over independent child copies Z_n(j) and fresh signs eps_j.  Raising the
display to the power q and expanding the multinomial gives a forward
recursion for E(Z_n^q) driven only by the sign moments

    E(eps^q) = b^(H-1) for odd q (0 in the symmetric case), 1 for even q.

Four families of quantities are computed:

  * raw moment tables E(Z_n^q)          (:func:`z_moment_recursion`),
  * their n -> infinity limits, H > 1/2 (:func:`limit_z_moments`),
  * normalized moments M_n^(q) = E(X_n(1)^q) for H <= 1/2
                                         (:func:`normalized_moment_recursion`),
  * moments of the rescaled limit mass for H in (1/2, 1]
                                         (:func:`tilde_moment_solver`).

plus the even-moment induction characterizing the standard normal law
(:func:`gaussian_even_moments`) and an exhaustive small-tree oracle
(:func:`brute_force_moments`) that recomputes E(Z_n^q) by enumerating
every sign assignment, used to validate the recursion independently.

Numeric ranges: divergent-regime raw moments grow like b^{nq(1/2-H)} and
overflow float64 quickly, so the recursion runs on log-magnitudes (all
recursion terms are nonnegative) and overflowing entries are flagged.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .core import CapacityError, CascadeParams, Regime, regime_of

#: q_max guards: compositions of q into b parts grow combinatorially.
_QMAX_BINARY = 16
_QMAX_GENERAL = 10


def sigma(params: CascadeParams) -> float:
    """Regime normalization constant for paths and terminal masses.

    convergent: sigma_H = sqrt((b-1) / (b - b^(2-2H)))
    critical:   sqrt(1 - 1/b)
    divergent:  sqrt(1 + (b-1) / (b^(2-2H) - b))
    symmetric:  1
    """
    b = float(params.base)
    reg = regime_of(params)
    if reg is Regime.SYMMETRIC:
        return 1.0
    h = params.hurst
    if reg is Regime.CRITICAL:
        return math.sqrt(1.0 - 1.0 / b)
    if reg is Regime.CONVERGENT:
        return math.sqrt((b - 1.0) / (b - b ** (2.0 - 2.0 * h)))
    return math.sqrt(1.0 + (b - 1.0) / (b ** (2.0 - 2.0 * h) - b))


def epsilon_moment(q: int, params: CascadeParams) -> float:
    """E(eps^q) for one sign draw; q >= 1 integer."""
    if not isinstance(q, int) or q < 1:
        raise ValueError("q must be an integer >= 1")
    if q % 2 == 0:
        return 1.0
    return params.eps_mean


def closed_form_second_moment(params: CascadeParams, n: int) -> float:
    """E(Z_n^2) in closed form, all regimes.

    H != 1/2: ell + b^(n(1-2H)) (1 - ell) with ell = (b-1)/(b - b^(2-2H));
    H  = 1/2: 1 + n (1 - 1/b); symmetric (raw signed count): b^n.
    """
    b = float(params.base)
    reg = regime_of(params)
    if reg is Regime.SYMMETRIC:
        return b**n
    h = params.hurst
    if reg is Regime.CRITICAL:
        return 1.0 + n * (1.0 - 1.0 / b)
    ell = (b - 1.0) / (b - b ** (2.0 - 2.0 * h))
    return ell + b ** (n * (1.0 - 2.0 * h)) * (1.0 - ell)


@dataclass(frozen=True)
class MomentTable:
    """Moments indexed by (n, q), with per-entry status flags.

    ``values[n, q]`` holds the moment (column 0 is a padding column of
    ones so q indexes directly).  ``log_values`` carries log-magnitudes,
    exact even where ``values`` overflowed to inf; such entries have
    ``overflowed[n, q]`` set.  ``undefined`` marks rows outside the
    table's domain (the critical normalization has no n = 0 row).
    """

    params: CascadeParams
    kind: str  # "raw" | "normalized" | "brute_force"
    values: np.ndarray
    log_values: np.ndarray
    overflowed: np.ndarray
    undefined: np.ndarray

    @property
    def n_max(self) -> int:
        return self.values.shape[0] - 1

    @property
    def q_max(self) -> int:
        return self.values.shape[1] - 1

    def value(self, n: int, q: int) -> float:
        if self.undefined[n, q]:
            raise ValueError(f"entry (n={n}, q={q}) is undefined")
        return float(self.values[n, q])

    def entry_flag(self, n: int, q: int) -> str:
        if self.undefined[n, q]:
            return "undefined"
        if self.overflowed[n, q]:
            return "overflow"
        return "finite"

    def rows(self):
        """Yield (n, q, value, flag) for serialization."""
        for n in range(self.n_max + 1):
            for q in range(1, self.q_max + 1):
                if self.undefined[n, q]:
                    continue
                yield n, q, float(self.values[n, q]), self.entry_flag(n, q)


def _check_qmax(base: int, q_max: int) -> None:
    cap = _QMAX_BINARY if base == 2 else _QMAX_GENERAL
    if not 1 <= q_max <= cap:
        raise ValueError(f"q_max must be in [1, {cap}] for base {base}")


@lru_cache(maxsize=None)
def _compositions(base: int, q: int) -> tuple[tuple[float, tuple[int, ...]], ...]:
    """Ordered compositions of q into ``base`` parts with log multinomials."""
    out = []
    log_qfact = math.lgamma(q + 1)
    for cuts in itertools.combinations(range(q + base - 1), base - 1):
        parts = []
        prev = -1
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(q + base - 2 - prev)
        log_coef = log_qfact - sum(math.lgamma(k + 1) for k in parts)
        out.append((log_coef, tuple(parts)))
    return tuple(out)


def _log_eps_moments(params: CascadeParams, q_max: int) -> np.ndarray:
    """log E(eps^k) for k = 0..q_max (log 0 = -inf for odd symmetric)."""
    out = np.zeros(q_max + 1)
    for k in range(1, q_max + 1, 2):
        mean = params.eps_mean
        out[k] = math.log(mean) if mean > 0.0 else -math.inf
    return out


def _finalize_table(params: CascadeParams, kind: str,
                    log_vals: np.ndarray,
                    undefined: np.ndarray | None = None) -> MomentTable:
    with np.errstate(over="ignore"):
        vals = np.exp(log_vals)
    overflowed = np.isinf(vals) & np.isfinite(log_vals)
    if undefined is None:
        undefined = np.zeros_like(overflowed)
    if overflowed.any():
        warnings.warn("moment table has entries beyond float64 range; "
                      "values flagged 'overflow', log magnitudes retained",
                      RuntimeWarning, stacklevel=3)
    vals[:, 0] = 1.0
    return MomentTable(params=params, kind=kind, values=vals,
                       log_values=log_vals, overflowed=overflowed,
                       undefined=undefined)


def z_moment_recursion(params: CascadeParams, n_max: int,
                       q_max: int) -> MomentTable:
    """Forward table of E(Z_n^q) from Z_0 = 1.

    One step applies the multinomial expansion of the one-step
    decomposition: with the composition (k_0 .. k_{b-1}) of q,

      E(Z_{n+1}^q) = b^(-qH) * sum_comp multinom(q; k) *
                     prod_j E(eps^(k_j)) E(Z_n^(k_j)).

    Symmetric params drop the b^(-qH) prefactor (raw signed counts) and
    kill every term with an odd part.  Carried in log space; the q = 1
    column is pinned to 1 exactly (martingale).
    """
    _check_qmax(params.base, q_max)
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    b = params.base
    log_b = math.log(b)
    log_eps = _log_eps_moments(params, q_max)
    prefactor = (0.0 if params.is_symmetric
                 else -params.hurst * log_b)

    log_vals = np.zeros((n_max + 1, q_max + 1))
    for n in range(n_max):
        row = log_vals[n]
        nxt = log_vals[n + 1]
        for q in range(1, q_max + 1):
            if q == 1 and not params.is_symmetric:
                nxt[1] = 0.0  # exact martingale normalization
                continue
            terms = []
            for log_coef, parts in _compositions(b, q):
                t = log_coef + q * prefactor
                for k in parts:
                    t += log_eps[k] + row[k]
                terms.append(t)
            nxt[q] = logsumexp(terms)
    return _finalize_table(params, "raw", log_vals)


def limit_z_moments(params: CascadeParams, q_max: int) -> np.ndarray:
    """E(Z^q) for the almost-sure limit mass Z, convergent regime only.

    Solved order by order: isolating the compositions that contain a
    part equal to q (the b 'diagonal' terms) gives

      E(Z^q) = b^(-qH) S_q / (1 - b^(1-qH) E(eps^q)),

    with S_q the multinomial sum over compositions with all parts < q.
    Entry [0] is E(Z^1) = 1.  Indexing: result[q-1] = E(Z^q).
    """
    if regime_of(params) is not Regime.CONVERGENT:
        raise ValueError("limit moments exist only in the convergent "
                         "regime (1/2 < H <= 1)")
    _check_qmax(params.base, q_max)
    b = params.base
    h = params.hurst
    eps = [1.0] + [epsilon_moment(k, params) for k in range(1, q_max + 1)]
    out = np.empty(q_max + 1)
    out[0] = 1.0  # E(Z^0)
    out[1] = 1.0
    for q in range(2, q_max + 1):
        cross = 0.0
        for log_coef, parts in _compositions(b, q):
            if max(parts) == q:
                continue
            term = math.exp(log_coef)
            for k in parts:
                term *= eps[k] * out[k]
            cross += term
        denom = 1.0 - float(b) ** (1.0 - q * h) * eps[q]
        out[q] = float(b) ** (-q * h) * cross / denom
    return out[1:]


def gaussian_even_moments(p_max: int, exact: bool = False):
    """Even moments M^(2p) of the standard normal via the closed induction.

    M^(2) = 1 and

      M^(2p) = (2^p - 2)^(-1) * sum_{k=1}^{p-1} C(2p, 2k) M^(2k) M^(2p-2k).

    This is the unique bounded-growth solution of the normalized even
    moment fixed point and equals (2p-1)!!.  ``exact=True`` computes in
    rational arithmetic and returns Fractions.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    one = Fraction(1) if exact else 1.0
    moments = [one]  # M^(2)
    for p in range(2, p_max + 1):
        acc = Fraction(0) if exact else 0.0
        for k in range(1, p):
            coef = math.comb(2 * p, 2 * k)
            acc += coef * moments[k - 1] * moments[p - k - 1]
        div = 2**p - 2
        acc = acc / div if exact else acc / float(div)
        moments.append(acc)
    return moments


def normalized_moment_recursion(params: CascadeParams, n_max: int,
                                q_max: int) -> MomentTable:
    """Table of M_n^(q) = E(X_n(1)^q) for the Brownian-limit regimes.

    The normalized walk satisfies the H-free one-step relation

      X_{n+1}(1) = r_n * b^(-1/2) * sum_j eps_j X_n(1)(j),

    with r_n = sqrt(n/(n+1)) in the critical regime and r_n = 1
    otherwise, so the moment recursion needs only the sign moments.
    Start rows: divergent/symmetric at n = 0 with M_0^(q) = sigma^(-q);
    critical at n = 1 (the sqrt(n) divisor is undefined at n = 0; that
    row is flagged undefined).
    """
    reg = regime_of(params)
    if reg is Regime.CONVERGENT:
        raise ValueError("normalized moments apply to H <= 1/2 or symmetric")
    _check_qmax(params.base, q_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    b = params.base
    eps = [1.0] + [epsilon_moment(k, params) for k in range(1, q_max + 1)]
    comp = {q: _compositions(b, q) for q in range(1, q_max + 1)}
    sqrt_b = math.sqrt(b)

    vals = np.zeros((n_max + 1, q_max + 1))
    vals[:, 0] = 1.0
    undefined = np.zeros_like(vals, dtype=bool)

    def step(row: np.ndarray, r_n: float) -> np.ndarray:
        nxt = np.empty_like(row)
        nxt[0] = 1.0
        for q in range(1, q_max + 1):
            acc = 0.0
            for log_coef, parts in comp[q]:
                term = math.exp(log_coef)
                for k in parts:
                    term *= eps[k] * row[k]
                acc += term
            nxt[q] = acc * (r_n / sqrt_b) ** q
        return nxt

    if reg is Regime.CRITICAL:
        undefined[0, 1:] = True
        vals[0, 1:] = np.nan
        s = sigma(params)
        base_row = np.ones(q_max + 1)  # moments of Z_0 = 1
        z1 = step(base_row, 1.0)       # E(Z_1^q), prefactor b^(-q/2)
        vals[1] = z1 / s ** np.arange(q_max + 1)
        start = 1
    else:
        s = sigma(params)
        vals[0] = 1.0 / s ** np.arange(q_max + 1)
        start = 0

    for n in range(start, n_max):
        r_n = math.sqrt(n / (n + 1.0)) if reg is Regime.CRITICAL else 1.0
        vals[n + 1] = step(vals[n], r_n)

    with np.errstate(divide="ignore", invalid="ignore"):
        log_vals = np.where(vals > 0, np.log(np.abs(vals) + (vals == 0)),
                            -np.inf)
    return MomentTable(params=params, kind="normalized", values=vals,
                       log_values=log_vals,
                       overflowed=np.zeros_like(undefined),
                       undefined=undefined)


def tilde_moment_solver(params: CascadeParams, q_max: int) -> np.ndarray:
    """Moments of the rescaled limit mass Z / sigma_H, H in (1/2, 1].

    Same linear solve as :func:`limit_z_moments` after dividing through
    by sigma_H^q; the q = 1 equation is degenerate (both sides carry the
    same factor), so the first moment is seeded directly:

      M~(1) = 1 / sigma_H = sqrt((b - b^(2-2H)) / (b-1)),  M~(2) = 1.

    Indexing: result[q-1] = E((Z/sigma_H)^q).
    """
    if regime_of(params) is not Regime.CONVERGENT:
        raise ValueError("tilde moments exist only in the convergent regime")
    _check_qmax(params.base, q_max)
    b = params.base
    h = params.hurst
    eps = [1.0] + [epsilon_moment(k, params) for k in range(1, q_max + 1)]
    out = np.empty(q_max + 1)
    out[0] = 1.0
    out[1] = 1.0 / sigma(params)
    for q in range(2, q_max + 1):
        cross = 0.0
        for log_coef, parts in _compositions(b, q):
            if max(parts) == q:
                continue
            term = math.exp(log_coef)
            for k in parts:
                term *= eps[k] * out[k]
            cross += term
        denom = 1.0 - float(b) ** (1.0 - q * h) * eps[q]
        out[q] = float(b) ** (-q * h) * cross / denom
    return out[1:]


# ---------------------------------------------------------------------------
# Exhaustive enumeration oracle
# ---------------------------------------------------------------------------

_ENUM_BUDGET = 2**24


def _tree_sign_count(base: int, depth: int) -> int:
    """Number of sign draws in a full depth-``depth`` tree (levels 1..depth)."""
    return (base ** (depth + 1) - base) // (base - 1)


def _rational_p_plus(params: CascadeParams) -> Fraction | None:
    """p_plus as an exact Fraction when b^(H-1) is rational, else None."""
    if params.is_symmetric:
        return Fraction(1, 2)
    h = params.hurst
    if h == int(h):
        k = int(h)
        power = (Fraction(params.base) ** (k - 1))
        return (1 + power) / 2
    return None


def _aggregate_counts(base: int, depth: int) -> np.ndarray:
    """Joint histogram over (#minus signs, signed leaf sum).

    Enumerates every assignment of the tree's signs; returns an integer
    matrix ``counts[k, i]`` = number of assignments with k minus signs
    and leaf signed sum  s = i - b^depth  (i steps over 0..2*b^depth).
    The probability weighting and moment powers are applied afterwards,
    which keeps this part exact and base-independent.
    """
    b = base
    n_signs = _tree_sign_count(b, depth)
    n_assign = 1 << n_signs
    assign = np.arange(n_assign, dtype=np.uint64)

    minus_total = np.zeros(n_assign, dtype=np.int64)
    bold = np.zeros((n_assign, 1), dtype=np.uint8)
    bit_pos = 0
    for level in range(1, depth + 1):
        width = b**level
        cols = ((assign[:, None] >> np.arange(bit_pos, bit_pos + width,
                                              dtype=np.uint64)[None, :])
                & np.uint64(1)).astype(np.uint8)
        minus_total += cols.sum(axis=1, dtype=np.int64)
        bold = np.repeat(bold, b, axis=1) ^ cols
        bit_pos += width
    leaf_sum = (bold.shape[1] - 2 * bold.sum(axis=1, dtype=np.int64))

    counts = np.zeros((n_signs + 1, 2 * b**depth + 1), dtype=np.int64)
    np.add.at(counts, (minus_total, leaf_sum + b**depth), 1)
    return counts


def brute_force_moments(params: CascadeParams, n_max: int, q_max: int, *,
                        arithmetic: str = "auto") -> MomentTable:
    """E(Z_n^q) for n <= n_max by full enumeration of sign assignments.

    Every one of the 2^(#signs) assignments of the depth-n tree is
    expanded; assignments are aggregated exactly (integer counts) by
    their sufficient statistic (#minus signs, signed leaf sum), then the
    probability weights and moment powers are evaluated either in exact
    rational arithmetic (when p_plus and the b^(-nH) scale are rational:
    integer H or symmetric) or in 40-digit arbitrary precision.

    ``arithmetic``: "auto" (rational when possible), "rational"
    (error if impossible), or "mpmath".  This oracle is deliberately
    independent of :func:`z_moment_recursion`: it never uses the
    recursion, only the construction's definition.
    """
    if arithmetic not in ("auto", "rational", "mpmath"):
        raise ValueError("arithmetic must be auto, rational, or mpmath")
    b = params.base
    if 1 << _tree_sign_count(b, n_max) > _ENUM_BUDGET:
        raise CapacityError("enumeration budget exceeded; lower n_max")

    p_rat = _rational_p_plus(params)
    use_rational = (arithmetic in ("auto", "rational")) and p_rat is not None
    if arithmetic == "rational" and not use_rational:
        raise ValueError("rational arithmetic impossible for this H")

    import mpmath as mp

    vals = np.zeros((n_max + 1, q_max + 1))
    vals[:, 0] = 1.0
    vals[0, :] = 1.0  # Z_0 = 1

    for n in range(1, n_max + 1):
        counts = _aggregate_counts(b, n)
        n_signs = _tree_sign_count(b, n)
        sums = np.arange(-(b**n), b**n + 1)

        if use_rational:
            if params.is_symmetric:
                scale = Fraction(1)
            else:
                h_int = int(params.hurst)
                scale = Fraction(b) ** (-n * h_int)
            p_plus, p_minus = p_rat, 1 - p_rat
            weights = {}
            for k in range(n_signs + 1):
                weights[k] = p_plus ** (n_signs - k) * p_minus**k
            for q in range(1, q_max + 1):
                acc = Fraction(0)
                ks, si = np.nonzero(counts)
                for k, i in zip(ks.tolist(), si.tolist()):
                    s = int(sums[i])
                    acc += (int(counts[k, i]) * weights[k]
                            * (scale * s) ** q)
                vals[n, q] = float(acc)
        else:
            with mp.workdps(40):
                if params.is_symmetric:
                    scale = mp.mpf(1)
                    p_plus = mp.mpf(0.5)
                else:
                    scale = mp.power(b, -n * mp.mpf(params.hurst))
                    p_plus = (1 + mp.power(b, mp.mpf(params.hurst) - 1)) / 2
                p_minus = 1 - p_plus
                weights = [p_plus ** (n_signs - k) * p_minus**k
                           for k in range(n_signs + 1)]
                for q in range(1, q_max + 1):
                    acc = mp.mpf(0)
                    ks, si = np.nonzero(counts)
                    for k, i in zip(ks.tolist(), si.tolist()):
                        s = int(sums[i])
                        acc += (int(counts[k, i]) * weights[k]
                                * (scale * s) ** q)
                    vals[n, q] = float(acc)

    with np.errstate(divide="ignore"):
        log_vals = np.where(vals != 0.0, np.log(np.abs(vals) + (vals == 0.0)),
                            -np.inf)
    return MomentTable(params=params, kind="brute_force", values=vals,
                       log_values=log_vals,
                       overflowed=np.zeros(vals.shape, dtype=bool),
                       undefined=np.zeros(vals.shape, dtype=bool))
