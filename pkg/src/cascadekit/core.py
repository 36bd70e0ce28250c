"""Signed b-adic multiplicative cascades: sign fields, paths, samplers.

The construction lives on the b-ary tree over [0, 1].  Every node w of
generation L carries an independent sign eps(w) in {-1, +1} with

    P(eps = +1) = p_plus = (1 + b^(H-1)) / 2,

where H <= 1 is the roughness parameter.  The branch product sign(w) is
the product of eps along the path from the root to w.  The depth-n path
is the normalized correlated random walk

    B_n(k / b^n) = b^(-n*H) * sum_{j < k} sign(w_j),

linearly interpolated between grid points; its terminal value
Z_n = B_n(1) is the total cascade mass and is a martingale in n.

Four regimes are distinguished by H:

  * convergent (1/2 < H <= 1): B_n converges a.s. and in L^q,
  * critical   (H = 1/2):      B_n / (sigma sqrt(n)) has Brownian limits,
  * divergent  (H < 1/2):      B_n / (sigma b^(n(1/2-H))) has Brownian limits,
  * symmetric  (fair signs):   the H -> -infinity limit, p_plus = 1/2;
    raw paths keep unit increments (no b^(-n*H) factor is meaningful).

This module generates sign fields reproducibly, assembles paths, applies
the regime normalizations, checks the structural identities of the
construction, and draws the terminal mass directly (without paths) for
Monte-Carlo use.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dataclass_field
from typing import Sequence

import numpy as np

from . import streams

#: Emission/decimation threshold: paths with more grid cells than this
#: are decimated by an integer stride (values stay exact, never resampled).
DEFAULT_MAX_POINTS = 2**16

#: Memory guard for sign-field generation (one byte per leaf transient).
DEFAULT_MAX_LEAVES = 2**27

#: Leaf chunk size for level expansion at deep levels.
_CHUNK = 2**22

#: Domain tags keeping independent sampler purposes on disjoint streams.
_DOMAIN_TERMINAL = 0x7E51
_DOMAIN_BRANCH = 0x55B7

#: Replica chunk for sample_terminal; part of the determinism contract
#: (changing it reshuffles draws, though not their law).
_TERMINAL_CHUNK = 8192


class CapacityError(RuntimeError):
    """A requested size exceeds the configured desk-scale budget."""


class Regime(enum.Enum):
    CONVERGENT = "convergent"
    CRITICAL = "critical"
    DIVERGENT = "divergent"
    SYMMETRIC = "symmetric"


class PathKind(enum.Enum):
    RAW = "raw"
    NORMALIZED_X = "normalized_x"
    NORMALIZED_TILDE = "normalized_tilde"


@dataclass(frozen=True)
class CascadeParams:
    """Construction parameters: branching base, roughness H, RNG seed.

    ``hurst=None`` selects the symmetric case (fair signs); finite values
    must satisfy hurst <= 1.  ``seed`` is a 64-bit unsigned integer.
    """

    base: int = 2
    hurst: float | None = 0.7
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.base, int) or self.base < 2:
            raise ValueError(f"base must be an integer >= 2, got {self.base!r}")
        if self.hurst is not None:
            h = float(self.hurst)
            if math.isnan(h) or math.isinf(h):
                raise ValueError("hurst must be finite or None (symmetric)")
            if h > 1.0:
                raise ValueError(f"hurst must be <= 1, got {h}")
            object.__setattr__(self, "hurst", h)
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @classmethod
    def symmetric(cls, base: int = 2, seed: int = 0) -> "CascadeParams":
        return cls(base=base, hurst=None, seed=seed)

    @property
    def is_symmetric(self) -> bool:
        return self.hurst is None

    @property
    def p_plus(self) -> float:
        if self.hurst is None:
            return 0.5
        return (1.0 + float(self.base) ** (self.hurst - 1.0)) / 2.0

    @property
    def p_minus(self) -> float:
        return 1.0 - self.p_plus

    @property
    def eps_mean(self) -> float:
        """E(eps) = b^(H-1); zero in the symmetric case."""
        if self.hurst is None:
            return 0.0
        return float(self.base) ** (self.hurst - 1.0)

    def weight_scale(self, depth: int) -> float:
        """b^(-depth*H), the magnitude of one depth-``depth`` increment.

        Computed once per depth from a single power call so every
        increment of a path shares the identical float.  Symmetric paths
        keep unit increments.
        """
        if self.hurst is None:
            return 1.0
        return float(self.base) ** (-(depth * self.hurst))


def regime_of(params: CascadeParams) -> Regime:
    """Classify params into the four phases of the construction."""
    if params.hurst is None:
        return Regime.SYMMETRIC
    if params.hurst > 0.5:
        return Regime.CONVERGENT
    if params.hurst == 0.5:
        return Regime.CRITICAL
    return Regime.DIVERGENT


def epsilon_probabilities(params: CascadeParams) -> tuple[float, float]:
    """(p_plus, p_minus) for one sign draw."""
    p = params.p_plus
    return p, 1.0 - p


@dataclass(frozen=True)
class LeafSignField:
    """Branch-product signs of all generation-``depth`` nodes, bit-packed.

    Bit convention: 0 encodes +1, 1 encodes -1.  ``packed[k]`` holds leaf
    bits 8k..8k+7 (numpy packbits order).  When ``level_packed`` is
    present, entry L-1 holds the raw eps bits of generation L (packed the
    same way); these are needed only by structural checks.
    """

    base: int
    depth: int
    packed: np.ndarray
    level_packed: tuple[np.ndarray, ...] | None = None

    @property
    def n_leaves(self) -> int:
        return self.base**self.depth

    @property
    def has_levels(self) -> bool:
        return self.level_packed is not None

    def leaf_bits(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Unpacked leaf bits (uint8 0/1) for indices [start, stop)."""
        if stop is None:
            stop = self.n_leaves
        return _unpack_range(self.packed, start, stop)

    def leaf_signs(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Leaf branch products as int8 values in {-1, +1}."""
        bits = self.leaf_bits(start, stop)
        return (1 - 2 * bits.astype(np.int8)).astype(np.int8)

    def level_bits(self, level: int) -> np.ndarray:
        """Raw eps bits of generation ``level`` (requires retention)."""
        if self.level_packed is None:
            raise ValueError("per-level signs were not retained; "
                             "generate with retain_levels=True")
        if not 1 <= level <= self.depth:
            raise ValueError(f"level must be in [1, {self.depth}]")
        packed = self.level_packed[level - 1]
        return _unpack_range(packed, 0, self.base**level)

    def branch_bits(self, level: int) -> np.ndarray:
        """Branch-product bits at generation ``level`` (requires retention)."""
        bits = np.zeros(1, dtype=np.uint8)
        for lev in range(1, level + 1):
            bits = np.repeat(bits, self.base) ^ self.level_bits(lev)
        return bits


def _unpack_range(packed: np.ndarray, start: int, stop: int) -> np.ndarray:
    byte_lo, byte_hi = start // 8, (stop + 7) // 8
    bits = np.unpackbits(packed[byte_lo:byte_hi])
    return bits[start - 8 * byte_lo: stop - 8 * byte_lo]


def generate_leaf_signs(params: CascadeParams, depth: int, *,
                        retain_levels: bool = False,
                        max_leaves: int = DEFAULT_MAX_LEAVES) -> LeafSignField:
    """Draw the sign field down to ``depth`` and return the leaf products.

    Each node's sign comes from its own counter-based stream position
    (see :mod:`cascadekit.streams`), so the same (seed, depth) always
    yields the same field and any subtree regenerates identically no
    matter how the tree is traversed.  Expansion is level by level with
    two ping-pong bit arrays, chunked at deep levels.

    Parameters
    ----------
    params : CascadeParams
    depth : int
        Generation n >= 0 of the leaves; the field has b^n entries.
    retain_levels : bool
        Keep the raw per-generation signs (needed by
        :func:`verify_self_similarity` and the consistency checks).
    max_leaves : int
        Capacity guard; b^depth above this raises :class:`CapacityError`.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    b = params.base
    if b**depth > max_leaves:
        raise CapacityError(
            f"b^depth = {b}^{depth} exceeds the leaf budget {max_leaves}")

    seed_state = streams.premix_seed(params.seed)
    threshold = streams.sign_threshold(params.p_plus)

    bold = np.zeros(1, dtype=np.uint8)  # generation 0: empty product = +1
    kept: list[np.ndarray] = []
    for level in range(1, depth + 1):
        count = b**level
        child = np.empty(count, dtype=np.uint8)
        keep_raw = np.empty(count, dtype=np.uint8) if retain_levels else None
        for lo in range(0, count, _CHUNK):
            hi = min(lo + _CHUNK, count)
            fresh = streams.sign_bits(seed_state, b, level, lo, hi - lo,
                                      threshold)
            parents = bold[lo // b: (hi + b - 1) // b]
            child[lo:hi] = np.repeat(parents, b)[: hi - lo] ^ fresh
            if keep_raw is not None:
                keep_raw[lo:hi] = fresh
        bold = child
        if keep_raw is not None:
            kept.append(np.packbits(keep_raw))
    return LeafSignField(
        base=b, depth=depth, packed=np.packbits(bold),
        level_packed=tuple(kept) if retain_levels else None)


@dataclass(frozen=True)
class SamplePath:
    """Piecewise-linear path on the b-adic grid.

    ``values[k]`` is the path at t = k * stride / b^depth.  stride = 1
    for full-resolution paths; decimated paths keep exact values at
    stride multiples (block sums are computed in integer arithmetic, the
    intermediate grid is simply not stored).
    """

    params: CascadeParams
    depth: int
    values: np.ndarray
    kind: PathKind = PathKind.RAW
    stride: int = 1

    @property
    def n_cells(self) -> int:
        return len(self.values) - 1

    @property
    def grid(self) -> np.ndarray:
        """Grid abscissae t_k matching ``values``."""
        denom = self.params.base**self.depth
        return (np.arange(len(self.values)) * self.stride) / denom

    @property
    def is_decimated(self) -> bool:
        return self.stride != 1


def build_path(signs: LeafSignField, params: CascadeParams, *,
               max_points: int = DEFAULT_MAX_POINTS) -> SamplePath:
    """Assemble B_n from a leaf sign field.

    Grid value k is b^(-n*H) times the k-term cumulative sum of leaf
    signs (value 0 at t=0).  The cumulative sum is carried in int64 and
    scaled once, so grid values are correctly rounded products and every
    increment magnitude matches b^(-n*H) to machine precision.

    Fields wider than ``max_points`` cells produce a decimated path: the
    cumulative sum is evaluated every ``stride`` leaves via exact integer
    block sums.
    """
    if signs.base != params.base:
        raise ValueError("sign field and params disagree on base")
    n = signs.depth
    b = params.base
    n_leaves = signs.n_leaves
    scale = params.weight_scale(n)

    stride = 1
    while n_leaves // stride > max_points:
        stride *= b

    if stride == 1:
        csum = np.empty(n_leaves + 1, dtype=np.int64)
        csum[0] = 0
        np.cumsum(signs.leaf_signs(), out=csum[1:])
    else:
        n_blocks = n_leaves // stride
        csum = np.empty(n_blocks + 1, dtype=np.int64)
        csum[0] = 0
        # sum signs per stride block: block_sum = stride - 2 * ones_count
        blk_step = max(1, _CHUNK // stride)
        for blk_lo in range(0, n_blocks, blk_step):
            blk_hi = min(blk_lo + blk_step, n_blocks)
            bits = signs.leaf_bits(blk_lo * stride, blk_hi * stride)
            ones = bits.reshape(blk_hi - blk_lo, stride).sum(axis=1,
                                                             dtype=np.int64)
            csum[blk_lo + 1: blk_hi + 1] = stride - 2 * ones
        np.cumsum(csum[1:], out=csum[1:])
    return SamplePath(params=params, depth=n, values=scale * csum,
                      kind=PathKind.RAW, stride=stride)


def evaluate(path: SamplePath, t) -> np.ndarray | float:
    """Piecewise-linear value(s) of the path at t in [0, 1].

    Exact at stored grid points; the cell midpoint returns the endpoint
    average.  Scalar in, scalar out.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ValueError("t must lie in [0, 1]")
    # position in units of stored cells
    pos = t_arr * (path.params.base**path.depth / path.stride)
    idx = np.minimum(pos.astype(np.int64), path.n_cells - 1)
    frac = pos - idx
    vals = path.values
    out = vals[idx] * (1.0 - frac) + vals[idx + 1] * frac
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def normalize_path(path: SamplePath, params: CascadeParams) -> SamplePath:
    """Apply the regime normalization to a raw path.

    convergent: divide by sigma_H               (kind normalized_tilde)
    critical:   divide by sigma * sqrt(n)       (kind normalized_x)
    divergent:  divide by sigma * b^(n(1/2-H))  (kind normalized_x)
    symmetric:  divide by b^(n/2), sigma = 1    (kind normalized_x)
    """
    from .moments import sigma  # deferred: moments imports this module

    if path.kind is not PathKind.RAW:
        raise ValueError("normalize_path expects a raw path")
    reg = regime_of(params)
    n = path.depth
    s = sigma(params)
    if reg is Regime.CONVERGENT:
        divisor = s
        kind = PathKind.NORMALIZED_TILDE
    elif reg is Regime.CRITICAL:
        if n == 0:
            raise ValueError("critical normalization undefined at depth 0")
        divisor = s * math.sqrt(n)
        kind = PathKind.NORMALIZED_X
    elif reg is Regime.DIVERGENT:
        divisor = s * float(params.base) ** (n * (0.5 - params.hurst))
        kind = PathKind.NORMALIZED_X
    else:  # symmetric
        divisor = float(params.base) ** (n / 2.0)
        kind = PathKind.NORMALIZED_X
    return SamplePath(params=params, depth=n, values=path.values / divisor,
                      kind=kind, stride=path.stride)


@dataclass(frozen=True)
class SelfSimilarityReport:
    """Outcome of the subtree rescaling check."""

    split_depth: int
    subtree_depth: int
    subtrees_checked: int
    max_rel_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_violation <= self.tolerance


def verify_self_similarity(field: LeafSignField, params: CascadeParams,
                           split_depth: int, *,
                           tolerance: float = 1e-10) -> SelfSimilarityReport:
    """Check the subtree rescaling identity of the construction.

    For every node w at generation p = split_depth, the path over the
    cell of w satisfies

        B_{p+n}(t) - B_{p+n}(t_w) = sign(w) * b^(-p*H) * B_n^(w)(s)

    where B_n^(w) is the depth-n path built from the subtree's own signs
    and s is t rescaled to [0, 1].  The identity is algebraic, so the
    relative violation reported is pure float roundoff.  Requires a field
    generated with ``retain_levels=True``.
    """
    if not field.has_levels:
        raise ValueError("self-similarity check needs retained levels")
    p = split_depth
    if not 0 < p < field.depth:
        raise ValueError("split_depth must be strictly inside (0, depth)")
    b = params.base
    n = field.depth - p
    sub_leaves = b**n

    top = field.branch_bits(p)                    # sign(w) bits at gen p
    leaf_bits = field.leaf_bits()
    full = build_path(field, params, max_points=field.n_leaves)
    outer_scale = params.weight_scale(p) if not params.is_symmetric else 1.0

    worst = 0.0
    for j in range(b**p):
        seg = leaf_bits[j * sub_leaves: (j + 1) * sub_leaves]
        # subtree's own signs: divide out the branch product of w
        sub_bits = seg ^ top[j]
        sub_field = LeafSignField(base=b, depth=n, packed=np.packbits(sub_bits))
        sub_path = build_path(sub_field, params, max_points=sub_leaves)
        sign_w = 1.0 - 2.0 * top[j]
        rhs = sign_w * outer_scale * sub_path.values
        lo = j * sub_leaves
        lhs = full.values[lo: lo + sub_leaves + 1] - full.values[lo]
        denom = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)),
                    params.weight_scale(field.depth))
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / denom))
    return SelfSimilarityReport(
        split_depth=p, subtree_depth=n, subtrees_checked=b**p,
        max_rel_violation=worst, tolerance=tolerance)


def enumerate_next_level_mean(field: LeafSignField,
                              params: CascadeParams) -> np.ndarray:
    """E[B_{n+1}(t) | generation-n signs] on the generation-(n+1) grid.

    Exhaustive: every assignment of the b^(n+1) fresh signs is expanded
    with its exact probability.  Exponential in the grid size, so this is
    a small-n oracle for the martingale identity (b=2, n <= 3 in tests);
    guarded at 2^20 assignments.
    """
    b = params.base
    n = field.depth
    m = b ** (n + 1)
    if 2**m > 2**20:
        raise CapacityError(f"2^{m} assignments exceed the enumeration budget")
    parent_signs = field.leaf_signs().astype(np.float64)
    scale = params.weight_scale(n + 1)
    p_plus, p_minus = epsilon_probabilities(params)

    assign = np.arange(2**m, dtype=np.uint32)
    bits = ((assign[:, None] >> np.arange(m, dtype=np.uint32)[None, :])
            & np.uint32(1)).astype(np.int8)
    eps = 1 - 2 * bits
    child = parent_signs[np.repeat(np.arange(b**n), b)][None, :] * eps
    minus_count = bits.sum(axis=1)
    if p_minus == 0.0:
        prob = (minus_count == 0).astype(np.float64)
    else:
        prob = p_plus ** (m - minus_count) * p_minus ** minus_count
    csum = np.concatenate(
        [np.zeros((2**m, 1)), np.cumsum(child, axis=1)], axis=1) * scale
    return prob @ csum


def _terminal_rng(seed: int, domain: int, chunk_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, domain, chunk_index])))


def _terminal_capacity_check(b: int, n: int, reps: int) -> None:
    if n < 0:
        raise ValueError("depth must be >= 0")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    # the count chain multiplies populations by b before each binomial
    if (n + 1) * math.log2(b) > 62:
        raise CapacityError(f"b^(n+1) = {b}^{n + 1} exceeds int64 counts")


def _evolve_counts(rng: np.random.Generator, b: int, p_plus: float,
                   plus: np.ndarray, total: int) -> np.ndarray:
    """One generation of the count chain: plus-node population update.

    Each node spawns b children; a child of a plus node stays plus with
    probability p_plus, a child of a minus node becomes plus with
    probability p_minus.  The two binomial draws are sufficient for the
    joint law of the next generation's sign counts.
    """
    from_plus = rng.binomial(b * plus, p_plus)
    from_minus = rng.binomial(b * (total - plus), 1.0 - p_plus)
    return from_plus + from_minus


def sample_terminal(params: CascadeParams, n: int, reps: int) -> np.ndarray:
    """Independent draws of the terminal mass Z_n = B_n(1).

    Uses the population-count chain over generations instead of explicit
    trees: per generation, the numbers of plus/minus branch products
    evolve by two binomial draws, which reproduces the law of Z_n exactly
    at O(n) cost per replica.  Deterministic given (params.seed, n, reps);
    replicas are generated in fixed-size chunks on disjoint PCG64
    streams, so chunks may run concurrently.

    Symmetric params return the raw signed leaf count (unit increments);
    finite H returns b^(-n*H) times the signed count.
    """
    b = params.base
    _terminal_capacity_check(b, n, reps)
    p_plus = params.p_plus
    scale = params.weight_scale(n)
    out = np.empty(reps, dtype=np.float64)
    for ci, lo in enumerate(range(0, reps, _TERMINAL_CHUNK)):
        hi = min(lo + _TERMINAL_CHUNK, reps)
        rng = _terminal_rng(params.seed, _DOMAIN_TERMINAL, ci)
        plus = np.ones(hi - lo, dtype=np.int64)
        total = 1
        for _ in range(n):
            plus = _evolve_counts(rng, b, p_plus, plus, total)
            total *= b
        out[lo:hi] = scale * (2 * plus - total)
    return out


def sample_terminal_pair(params: CascadeParams, n: int, m: int,
                         reps: int) -> tuple[np.ndarray, np.ndarray]:
    """Joint draws of (Z_n, Z_{n+m}) along one cascade realization.

    Same count chain as :func:`sample_terminal`, recorded at two depths,
    so the pair has the exact joint law of the martingale at times n and
    n+m.  Needed by the residual convergence test.
    """
    b = params.base
    _terminal_capacity_check(b, n + m, reps)
    p_plus = params.p_plus
    scale_n = params.weight_scale(n)
    scale_nm = params.weight_scale(n + m)
    z_n = np.empty(reps, dtype=np.float64)
    z_nm = np.empty(reps, dtype=np.float64)
    for ci, lo in enumerate(range(0, reps, _TERMINAL_CHUNK)):
        hi = min(lo + _TERMINAL_CHUNK, reps)
        rng = _terminal_rng(params.seed, _DOMAIN_TERMINAL, ci)
        plus = np.ones(hi - lo, dtype=np.int64)
        total = 1
        for gen in range(1, n + m + 1):
            plus = _evolve_counts(rng, b, p_plus, plus, total)
            total *= b
            if gen == n:
                z_n[lo:hi] = scale_n * (2 * plus - total)
        z_nm[lo:hi] = scale_nm * (2 * plus - total)
    return z_n, z_nm


def sample_branch_signs(params: CascadeParams, depth: int,
                        reps: int) -> np.ndarray:
    """Monte-Carlo draws of all b^depth branch products at ``depth``.

    Returns an int8 array of shape (reps, b^depth) with values in
    {-1, +1}.  Independent of the field generator streams; used by the
    increment tests, which need fresh top-of-tree signs per replica.
    """
    b = params.base
    if b**depth > 4096:
        raise CapacityError("branch-sign sampling is meant for shallow tops")
    p_plus = params.p_plus
    out = np.empty((reps, b**depth), dtype=np.int8)
    for ci, lo in enumerate(range(0, reps, _TERMINAL_CHUNK)):
        hi = min(lo + _TERMINAL_CHUNK, reps)
        rng = _terminal_rng(params.seed, _DOMAIN_BRANCH, ci)
        bold = np.ones((hi - lo, 1), dtype=np.int8)
        for lev in range(1, depth + 1):
            eps = np.where(rng.random((hi - lo, b**lev)) < p_plus, 1, -1)
            bold = np.repeat(bold, b, axis=1) * eps.astype(np.int8)
        out[lo:hi] = bold
    return out
