"""Reliability of task trees as a function of culture strength.

Two descriptions of the infinite-depth reliability coexist here:

* the largest fixed point of ``r = G_p(1 - G_q(1 - pi*r))``, reached by
  iterating downward from ``r = 1`` (:func:`rho_infinite`);
* the inverse map ``Pi(r)``; reliability at ``pi`` is the largest ``r`` with
  ``Pi(r) = pi`` and local minima of ``Pi`` that are not shadowed by a lower
  value further right are the jumps of ``rho`` (:func:`find_discontinuities`).

The first is the reference computation; the second is what the equilibrium
solvers use because it stays fast arbitrarily close to a jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .branching import INFINITE, BranchingSpec, Depth
from .errors import DomainError

FIXED_POINT_TOL = 1e-12
MAX_ITER = 1_000_000
VECTOR_ITER = 20_000  # array sweeps before stragglers go to the scalar loop
ZERO_FLOOR = 1e-9
R_FLOOR = 1e-6
SCAN_POINTS = 10_000
GOLDEN_TOL = 1e-10
DIFF_STEP = 1e-6
SLOPE_CAP = 1e12
SLOPE_EPS = 1e-12

_INVGOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CriticalPoint:
    """A jump of rho: culture ``pi`` and the right-limit reliability ``r``."""

    pi: float
    r: float


@dataclass(frozen=True)
class ReliabilityCurve:
    points: tuple[tuple[float, float], ...]
    discontinuities: tuple[CriticalPoint, ...] = ()
    depth: Depth = INFINITE

    @property
    def pis(self) -> np.ndarray:
        return np.array([p for p, _ in self.points])

    @property
    def rhos(self) -> np.ndarray:
        return np.array([r for _, r in self.points])

    def discontinuity_flags(self) -> list[bool]:
        """Mark the first sample at or after each jump (if one precedes it)."""
        pis = self.pis
        flags = [False] * len(pis)
        for cp in self.discontinuities:
            idx = int(np.searchsorted(pis, cp.pi - 1e-12, side="left"))
            if 0 < idx < len(pis):
                flags[idx] = True
        return flags


class Slope(NamedTuple):
    value: float
    flag: str  # "ok", "blow-up" or "below-threshold"


def _check_pi(pi: float) -> float:
    if not 0.0 <= pi <= 1.0:
        raise DomainError(f"culture strength {pi!r} outside [0, 1]")
    return float(pi)


def reliability_map(spec: BranchingSpec, pi, r):
    """One layer of the recursion: G_p(1 - G_q(1 - pi*r)), vectorised."""
    return spec.p.evaluate(1.0 - spec.q.evaluate(1.0 - pi * r))


def _layer_with_slope(spec: BranchingSpec, pi, r, dr):
    v = 1.0 - pi * r
    u = 1.0 - spec.q.evaluate(v)
    nxt = spec.p.evaluate(u)
    dnxt = spec.p.derivative(u) * spec.q.derivative(v) * (r + pi * dr)
    return nxt, dnxt


# ---------------------------------------------------------------- finite depth


def rho_finite_array(spec: BranchingSpec, pis, L: int, derivative: bool = False):
    """rho_L on an array of culture strengths, optionally with d rho_L / d pi.

    The derivative is carried forward through the recursion from rho_1' = 0,
    so it is exact up to rounding.
    """
    if int(L) != L or L < 1:
        raise DomainError(f"depth must be a positive integer, got {L!r}")
    pis = np.asarray(pis, dtype=float)
    r = np.ones_like(pis)
    dr = np.zeros_like(pis)
    for _ in range(int(L) - 1):
        r, dr = _layer_with_slope(spec, pis, r, dr)
    return (r, dr) if derivative else r


def rho_finite(spec: BranchingSpec, pi: float, L: int) -> float:
    return float(rho_finite_array(spec, _check_pi(pi), L))


# -------------------------------------------------------------- infinite depth


def _scalar_layer(spec: BranchingSpec, pi: float):
    """Plain-float version of one recursion layer plus its r-derivative."""
    ps = list(zip(spec.p.support, spec.p.probs))
    qs = list(zip(spec.q.support, spec.q.probs))
    if spec.is_regular:
        m, n = ps[0][0], qs[0][0]

        def layer(r):
            v = 1.0 - pi * r
            u = 1.0 - v**n
            return u**m, m * u ** (m - 1) * n * v ** (n - 1) * pi

        return layer

    def layer(r):
        v = 1.0 - pi * r
        gq = dq = 0.0
        for n, w in qs:
            gq += w * v**n
            dq += w * n * v ** (n - 1)
        u = 1.0 - gq
        gp = dp = 0.0
        for m, w in ps:
            gp += w * u**m
            dp += w * m * u ** (m - 1)
        return gp, dp * dq * pi

    return layer


def iterate_fixed_point(spec: BranchingSpec, pi: float) -> tuple[float, int]:
    """Downward iteration from r = 1; returns (rho, iterations used).

    Iterates decrease monotonically, so falling under ``ZERO_FLOOR`` already
    decides the answer is the r = 0 attractor.  A single guarded Newton step
    polishes the stopping iterate when the fixed point is well conditioned.
    At a continuous threshold the iterates decay only like 1/t; when the
    budget runs out the answer comes from the inverse map instead, and the
    iteration count reported is MAX_ITER.
    """
    pi = _check_pi(pi)
    if pi == 1.0:
        return 1.0, 0
    layer = _scalar_layer(spec, pi)
    r = 1.0
    for it in range(1, MAX_ITER + 1):
        nxt, _ = layer(r)
        if nxt < ZERO_FLOOR:
            return 0.0, it
        if abs(nxt - r) < FIXED_POINT_TOL:
            r = nxt
            break
        r = nxt
    else:
        return float(rho_by_inversion(spec, np.array([pi]))[0]), MAX_ITER
    val, slope = layer(r)
    resid = val - r
    if slope < 1.0 - 1e-3 and resid != 0.0:
        cand = r - resid / (slope - 1.0)
        if 0.0 <= r - cand <= 1e-8:
            cval, _ = layer(cand)
            if abs(cval - cand) <= abs(resid):
                r = cand
    return r, it


def rho_infinite(spec: BranchingSpec, pi: float) -> float:
    """Largest fixed point of the reliability recursion (L = infinity)."""
    return iterate_fixed_point(spec, pi)[0]


def rho_infinite_array(spec: BranchingSpec, pis) -> np.ndarray:
    """Vectorised downward iteration; same stopping rules as the scalar path."""
    pis = np.asarray(pis, dtype=float)
    if np.any((pis < 0.0) | (pis > 1.0)):
        raise DomainError("culture strengths must lie in [0, 1]")
    flat = pis.ravel()
    out = np.ones_like(flat)
    active = np.flatnonzero(flat < 1.0)
    r = np.ones(active.size)
    pa = flat[active]
    for _ in range(VECTOR_ITER):
        if active.size == 0:
            break
        nxt = reliability_map(spec, pa, r)
        dead = nxt < ZERO_FLOOR
        done = np.abs(nxt - r) < FIXED_POINT_TOL
        out[active[dead]] = 0.0
        out[active[done & ~dead]] = nxt[done & ~dead]
        keep = ~(dead | done)
        active, r, pa = active[keep], nxt[keep], pa[keep]
    pos = np.flatnonzero((out > 0.0) & (out < 1.0))
    pos = np.setdiff1d(pos, active)
    if pos.size:
        out[pos] = _polish(spec, flat[pos], out[pos])
    # slow points restart in the scalar loop, which is much cheaper per step
    for j in active:
        out[j] = iterate_fixed_point(spec, float(flat[j]))[0]
    return out.reshape(pis.shape)


def _polish(spec: BranchingSpec, pis: np.ndarray, r: np.ndarray) -> np.ndarray:
    val, slope = _layer_with_slope(spec, pis, r, np.zeros_like(r))
    # d/dr of the layer equals (d/dpi with dr=0) * pi / r
    slope = slope * pis / r
    resid = val - r
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = r - resid / (slope - 1.0)
    ok = (slope < 1.0 - 1e-3) & (r - cand >= 0.0) & (r - cand <= 1e-8)
    cval = reliability_map(spec, pis, np.where(ok, cand, r))
    ok &= np.abs(cval - cand) <= np.abs(resid)
    return np.where(ok, cand, r)


# ------------------------------------------------------------- inverse map Pi


def pi_of_r_array(spec: BranchingSpec, r):
    r = np.asarray(r, dtype=float)
    return (1.0 - spec.q.inverse(1.0 - spec.p.inverse(r))) / r


def pi_of_r(spec: BranchingSpec, r: float) -> float:
    if not 0.0 < r <= 1.0:
        raise DomainError(f"reliability {r!r} outside (0, 1]")
    return float(pi_of_r_array(spec, r))


def pi_slope_array(spec: BranchingSpec, r, h: float = DIFF_STEP):
    """Central difference of Pi; one-sided second-order stencil at r + h > 1.

    The step shrinks to r/2 near the origin so the stencil stays in (0, 1].
    """
    r = np.asarray(r, dtype=float)
    flat = np.atleast_1d(r).ravel()
    step = np.minimum(h, 0.5 * flat)
    out = (pi_of_r_array(spec, np.minimum(flat + step, 1.0)) - pi_of_r_array(spec, flat - step)) / (2 * step)
    edge = flat + step > 1.0
    if np.any(edge):
        re, he = flat[edge], step[edge]
        out[edge] = (
            3 * pi_of_r_array(spec, re)
            - 4 * pi_of_r_array(spec, re - he)
            + pi_of_r_array(spec, re - 2 * he)
        ) / (2 * he)
    return out.reshape(r.shape)


def pi_slope_exact_array(spec: BranchingSpec, r):
    """Pi'(r) through the derivatives of the inverse generating functions.

    With u = G_p^{-1}(r) and v = G_q^{-1}(1 - u),
    Pi'(r) = 1 / (r G_p'(u) G_q'(v)) - (1 - v) / r**2.
    At r = 1 with q(1) = 0 the first term is +inf, which is the right limit.
    """
    r = np.asarray(r, dtype=float)
    u = spec.p.inverse(r)
    v = spec.q.inverse(1.0 - u)
    with np.errstate(divide="ignore"):
        return 1.0 / (r * spec.p.derivative(u) * spec.q.derivative(v)) - (1.0 - v) / r**2


def _golden_min(fn, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    a, b = lo, hi
    c = b - _INVGOLD * (b - a)
    d = a + _INVGOLD * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVGOLD * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVGOLD * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class InverseProfile:
    """Pi sampled on (R_FLOOR, 1] with refined minima merged into the grid."""

    r: np.ndarray = field(repr=False)
    pi: np.ndarray = field(repr=False)
    suffix_min: np.ndarray = field(repr=False)
    critical: tuple[CriticalPoint, ...]


@lru_cache(maxsize=64)
def inverse_profile(spec: BranchingSpec, resolution: int = SCAN_POINTS) -> InverseProfile:
    grid = np.linspace(R_FLOOR, 1.0, resolution)
    vals = pi_of_r_array(spec, grid)
    slopes = pi_slope_array(spec, grid)

    def pi_scalar(x):
        return float(pi_of_r_array(spec, x))

    candidates = []
    for i in np.flatnonzero((slopes[:-1] < 0.0) & (slopes[1:] >= 0.0)):
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 2, resolution - 1)]
        r_min = _golden_min(pi_scalar, lo, hi)
        candidates.append((r_min, pi_scalar(r_min)))
    if slopes[-1] < 0.0:
        candidates.append((1.0, 1.0))

    # a local minimum is a jump of rho only if nothing to its right dips lower
    critical = []
    for j, (r_min, p_min) in enumerate(candidates):
        later = vals[grid > r_min + 1e-12]
        later_min = min([p for _, p in candidates[j + 1:]] + ([later.min()] if later.size else []),
                        default=math.inf)
        if p_min < later_min:
            critical.append(CriticalPoint(pi=float(p_min), r=float(r_min)))

    extra = np.array([cp.r for cp in critical if cp.r < 1.0])
    r_all = np.concatenate([grid, extra])
    p_all = np.concatenate([vals, np.array([cp.pi for cp in critical if cp.r < 1.0])])
    order = np.argsort(r_all, kind="stable")
    r_all, p_all = r_all[order], p_all[order]
    suffix = np.minimum.accumulate(p_all[::-1])[::-1]
    return InverseProfile(r=r_all, pi=p_all, suffix_min=suffix, critical=tuple(critical))


def find_discontinuities(spec: BranchingSpec, resolution: int = SCAN_POINTS) -> list[CriticalPoint]:
    """Jumps of rho, ascending in pi; empty when Pi is monotone (simple tasks)."""
    return list(inverse_profile(spec, resolution).critical)


def rho_by_inversion(spec: BranchingSpec, pis, resolution: int = SCAN_POINTS) -> np.ndarray:
    """Largest r with Pi(r) = pi, by bracketing on the profile then bisection.

    Agrees with :func:`rho_infinite` to ~1e-12 but costs the same everywhere,
    including within 1e-9 of a jump where downward iteration crawls.
    Reliabilities below ``R_FLOOR`` are reported as 0.
    """
    prof = inverse_profile(spec, resolution)
    pis = np.asarray(pis, dtype=float)
    flat = pis.ravel()
    idx = np.searchsorted(prof.suffix_min, flat, side="right") - 1
    out = np.zeros_like(flat)
    top = idx >= len(prof.r) - 1
    out[top] = 1.0
    inner = (idx >= 0) & ~top
    if np.any(inner):
        j = idx[inner]
        target = flat[inner]
        lo = prof.r[j].copy()
        hi = prof.r[j + 1].copy()
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = pi_of_r_array(spec, mid) <= target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-16):
                break
        out[inner] = lo
    return out.reshape(pis.shape)


def rho_value(spec: BranchingSpec, pis, depth: Optional[Depth] = None) -> np.ndarray:
    """rho at the given (or the spec's) depth; negative culture maps to 0."""
    depth = spec.depth if depth is None else depth
    pis = np.clip(np.asarray(pis, dtype=float), 0.0, 1.0)
    if depth == INFINITE:
        return rho_by_inversion(spec, pis)
    return rho_finite_array(spec, pis, int(depth))


def rho_slope_array(spec: BranchingSpec, pis, depth: Optional[Depth] = None) -> np.ndarray:
    """d rho / d pi on an array, blow-ups capped at SLOPE_CAP, 0 in the zero region."""
    depth = spec.depth if depth is None else depth
    pis = np.clip(np.asarray(pis, dtype=float), 0.0, 1.0)
    if depth != INFINITE:
        return rho_finite_array(spec, pis, int(depth), derivative=True)[1]
    r = rho_by_inversion(spec, pis)
    out = np.zeros_like(r)
    pos = r > 0.0
    if np.any(pos):
        s = pi_slope_exact_array(spec, r[pos])
        out[pos] = np.where(s < SLOPE_EPS, SLOPE_CAP, 1.0 / np.maximum(s, SLOPE_EPS))
    return out


def rho_derivative(spec: BranchingSpec, pi: float, L: Optional[Depth] = None) -> Slope:
    """d rho / d pi at one culture strength.

    Finite depth: forward-mode derivative through the recursion.  Infinite
    depth: 1 / Pi'(r) at r = rho(pi) (implicit function theorem); a vanishing
    Pi' is capped at 1e12 and flagged ``"blow-up"``, and below the first jump
    the slope is 0 with flag ``"below-threshold"``.
    """
    pi = _check_pi(pi)
    depth = spec.depth if L is None else L
    if depth != INFINITE:
        return Slope(float(rho_finite_array(spec, pi, int(depth), derivative=True)[1]), "ok")
    r = float(rho_by_inversion(spec, pi))
    if r == 0.0:
        return Slope(0.0, "below-threshold")
    s = float(pi_slope_exact_array(spec, r))
    if s < SLOPE_EPS:
        return Slope(SLOPE_CAP, "blow-up")
    return Slope(1.0 / s, "ok")


def sample_curve(spec: BranchingSpec, grid: Sequence[float], L: Optional[Depth] = None) -> ReliabilityCurve:
    depth = spec.depth if L is None else L
    grid = np.asarray(grid, dtype=float)
    if np.any((grid < 0.0) | (grid > 1.0)):
        raise DomainError("curve grid must lie in [0, 1]")
    if depth == INFINITE:
        rhos = rho_infinite_array(spec, grid)
        disc = tuple(find_discontinuities(spec))
    else:
        rhos = rho_finite_array(spec, grid, int(depth))
        disc = ()
    points = tuple((float(p), float(r)) for p, r in zip(grid, rhos))
    return ReliabilityCurve(points=points, discontinuities=disc, depth=depth)
