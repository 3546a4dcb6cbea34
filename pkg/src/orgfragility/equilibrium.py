"""Workers' investment game in corporate culture.

Culture strength is ``baseline + sum_i w_i h(x_i)`` with
``h(x) = (1 - baseline) * x**beta``.  Worker ``i`` earns ``a_i`` times the
(expected) completion probability minus ``c(x_i)``.  With anticipated shocks
a fraction ``psi`` of outcomes see culture reduced additively by ``s ~ f``.

Every first-order condition can be divided through by ``w_i h'(x_i)``, which
leaves ``g(x_i) = c'(x_i) / h'(x_i)`` on one side and a quantity depending on
culture only on the other.  That is what makes the one-dimensional map
``P(pi)`` of the heterogeneous solver well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .branching import INFINITE, BranchingSpec, Depth, regular
from .errors import DomainError, InvalidSpec, LengthMismatch, WeightError
from .reliability import (
    CriticalPoint,
    find_discontinuities,
    rho_slope_array,
    rho_value,
)

WEIGHT_TOL = 1e-9
SCAN_POINTS = 10_000
DEVIATION_POINTS = 1_000
ROOT_TOL = 1e-10
G_UPPER = 1.0 - 1e-12
PAYOFF_TOL = 1e-12


# ------------------------------------------------------------------ primitives


@dataclass(frozen=True)
class CultureMap:
    baseline: float
    weights: tuple[float, ...]
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.baseline < 1.0:
            raise DomainError(f"baseline culture {self.baseline!r} outside [0, 1)")
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta {self.beta!r} outside (0, 1]")
        if not self.weights or any(not w > 0 for w in self.weights):
            raise WeightError("weights must be positive")
        if abs(math.fsum(self.weights) - 1.0) > WEIGHT_TOL:
            raise WeightError(f"weights sum to {math.fsum(self.weights)!r}, not 1")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def k(self) -> int:
        return len(self.weights)

    def h(self, x):
        return (1.0 - self.baseline) * np.asarray(x, dtype=float) ** self.beta

    def h_prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.beta == 1.0:
            return np.full_like(x, 1.0 - self.baseline)
        with np.errstate(divide="ignore"):
            return (1.0 - self.baseline) * self.beta * x ** (self.beta - 1.0)

    def with_baseline(self, baseline: float) -> "CultureMap":
        return replace(self, baseline=baseline)


def uniform_culture(k: int, baseline: float, beta: float = 1.0) -> CultureMap:
    return CultureMap(baseline, (1.0 / k,) * k, beta)


@dataclass(frozen=True)
class Barrier:
    """c(x) = (1 - x)**-alpha - 1.  Note c'(0) = alpha, not 0."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("barrier alpha must be positive")

    def cost(self, x):
        return (1.0 - np.asarray(x, dtype=float)) ** (-self.alpha) - 1.0

    def marginal(self, x):
        return self.alpha * (1.0 - np.asarray(x, dtype=float)) ** (-self.alpha - 1.0)


@dataclass(frozen=True)
class SmoothBarrier:
    """c(x) = ((1 - x)**-alpha - 1)**gamma; gamma >= 2 gives c'(0) = 0."""

    alpha: float
    gamma: float = 2.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("barrier alpha must be positive")
        if not self.gamma >= 2:
            raise DomainError("smooth barrier needs gamma >= 2")

    def cost(self, x):
        return Barrier(self.alpha).cost(x) ** self.gamma

    def marginal(self, x):
        inner = Barrier(self.alpha)
        return self.gamma * inner.cost(x) ** (self.gamma - 1.0) * inner.marginal(x)


CostSpec = Union[Barrier, SmoothBarrier]


@dataclass(frozen=True)
class ShockSpec:
    """With probability psi culture drops by s ~ Uniform[s_lo, s_hi]."""

    psi: float
    s_lo: float
    s_hi: float
    quadrature_nodes: int = 64

    def __post_init__(self):
        if not 0.0 <= self.psi <= 1.0:
            raise DomainError(f"shock probability {self.psi!r} outside [0, 1]")
        if not 0.0 < self.s_lo < self.s_hi:
            raise DomainError("shock support must satisfy 0 < s_lo < s_hi")
        if self.quadrature_nodes < 1:
            raise DomainError("need at least one quadrature node")


@dataclass(frozen=True)
class GameConfig:
    spec: BranchingSpec
    culture: CultureMap
    cost: CostSpec
    benefits: tuple[float, ...]
    shocks: Optional[ShockSpec] = None

    def __post_init__(self):
        if len(self.benefits) != self.culture.k:
            raise LengthMismatch(f"{len(self.benefits)} benefits for {self.culture.k} workers")
        if any(not a >= 0 for a in self.benefits):
            raise DomainError("benefits must be nonnegative")
        object.__setattr__(self, "benefits", tuple(float(a) for a in self.benefits))

    @property
    def k(self) -> int:
        return self.culture.k

    @property
    def psi(self) -> float:
        return 0.0 if self.shocks is None else self.shocks.psi

    def with_baseline(self, baseline: float) -> "GameConfig":
        return replace(self, culture=self.culture.with_baseline(baseline))

    def with_spec(self, spec: BranchingSpec) -> "GameConfig":
        return replace(self, spec=spec)


@dataclass(frozen=True)
class EquilibriumResult:
    x_star: tuple[float, ...]
    pi_star: float
    kind: str  # "zero", "positive" or "partial"
    foc_residuals: tuple[float, ...]
    stable: bool
    payoffs: tuple[float, ...]
    rho_star: float = 0.0
    selected: bool = False

    def to_dict(self) -> dict:
        return {
            "x_star": list(self.x_star),
            "pi_star": self.pi_star,
            "rho_star": self.rho_star,
            "kind": self.kind,
            "foc_residuals": list(self.foc_residuals),
            "stable": self.stable,
            "payoffs": list(self.payoffs),
            "selected": self.selected,
        }


def symmetric_game(
    spec: BranchingSpec,
    k: int,
    baseline: float,
    benefit: float,
    cost: CostSpec,
    shocks: Optional[ShockSpec] = None,
    beta: float = 1.0,
) -> GameConfig:
    return GameConfig(spec, uniform_culture(k, baseline, beta), cost, (benefit,) * k, shocks)


def finite_tree_example(L: int = 10) -> GameConfig:
    """m = n = 2, a = 2, barrier alpha = 0.08, baseline 0, k = L workers."""
    return symmetric_game(regular(2, 2, L), L, 0.0, 2.0, Barrier(0.08))


def default_game(k: int = 50, baseline: float = 0.5) -> GameConfig:
    """Infinite m = n = 2 tree, a = 2, barrier alpha = 0.08, equal weights."""
    return symmetric_game(regular(2, 2), k, baseline, 2.0, Barrier(0.08))


# ------------------------------------------------------------- culture & payoff


def culture_strength(culture: CultureMap, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (culture.k,):
        raise LengthMismatch(f"profile has {x.size} entries for {culture.k} workers")
    if np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("investments must lie in [0, 1]")
    return float(culture.baseline + math.fsum(np.asarray(culture.weights) * culture.h(x)))


def _breaks(config: GameConfig) -> tuple[float, ...]:
    if config.spec.is_infinite:
        return tuple(cp.pi for cp in find_discontinuities(config.spec))
    return ()


@lru_cache(maxsize=16)
def _legendre(n: int):
    return leggauss(n)


def shock_nodes(shocks: ShockSpec, pi0: float, breaks: Sequence[float] = ()):
    """Culture values and weights with E[phi(pi0 - s)] ~= sum(w * phi(values)).

    The shock interval is split wherever ``pi0 - s`` crosses a jump of rho.
    Just above a jump, rho behaves like a square root and its slope like an
    inverse square root, so those pieces use ``s = s_b - t**2`` and are
    smooth in ``t``.  Pieces lying wholly below the first jump contribute 0
    to both rho and its slope and are dropped.
    """
    xs, ws = _legendre(shocks.quadrature_nodes)
    density = 1.0 / (shocks.s_hi - shocks.s_lo)
    cuts = sorted({pi0 - b for b in breaks if shocks.s_lo < pi0 - b < shocks.s_hi})
    edges = [shocks.s_lo] + cuts + [shocks.s_hi]
    # the right end of a piece sits on a jump when it is a cut, or when s_hi lands on one exactly
    at_jump = [False] + [True] * len(cuts) + [any(pi0 - shocks.s_hi == b for b in breaks)]
    first = min(breaks) if breaks else -math.inf
    vals, wts = [], []
    for j, (sa, sb) in enumerate(zip(edges[:-1], edges[1:])):
        if pi0 - sa <= first:
            continue
        singular = at_jump[j + 1]
        if singular:
            tmax = math.sqrt(sb - sa)
            t = 0.5 * tmax * (xs + 1.0)
            vals.append(pi0 - (sb - t * t))
            wts.append(0.5 * tmax * ws * 2.0 * t * density)
        else:
            s = 0.5 * (sb - sa) * xs + 0.5 * (sa + sb)
            vals.append(pi0 - s)
            wts.append(0.5 * (sb - sa) * ws * density)
    if not vals:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(vals), np.concatenate(wts)


def _batched_expectation(fn, shocks: ShockSpec, pis: np.ndarray, breaks) -> np.ndarray:
    """E_s[fn(pi - s)] for each pi, evaluating fn once on all nodes."""
    pieces = [shock_nodes(shocks, float(p), breaks) for p in pis]
    sizes = [len(v) for v, _ in pieces]
    if sum(sizes) == 0:
        return np.zeros(len(pis))
    vals = np.concatenate([v for v, _ in pieces])
    wts = np.concatenate([w for _, w in pieces])
    f = fn(np.clip(vals, 0.0, 1.0)) * wts
    owner = np.repeat(np.arange(len(pis)), sizes)
    return np.bincount(owner, weights=f, minlength=len(pis))


def expected_rho(config: GameConfig, pis) -> np.ndarray:
    """(1 - psi) rho(pi) + psi E[rho(pi - s)] on an array of cultures."""
    pis = np.atleast_1d(np.asarray(pis, dtype=float))
    base = rho_value(config.spec, pis)
    if config.psi == 0.0:
        return base
    shocked = _batched_expectation(lambda v: rho_value(config.spec, v), config.shocks, pis, _breaks(config))
    return (1.0 - config.psi) * base + config.psi * shocked


def expected_slope(config: GameConfig, pis) -> np.ndarray:
    """(1 - psi) rho'(pi) + psi E[rho'(pi - s)], blow-ups capped."""
    pis = np.atleast_1d(np.asarray(pis, dtype=float))
    base = rho_slope_array(config.spec, pis)
    if config.psi == 0.0:
        return base
    shocked = _batched_expectation(lambda v: rho_slope_array(config.spec, v), config.shocks, pis, _breaks(config))
    return (1.0 - config.psi) * base + config.psi * shocked


def utility(config: GameConfig, i: int, x: Sequence[float]) -> float:
    pi = culture_strength(config.culture, x)
    a = config.benefits[i]
    own_cost = float(config.cost.cost(x[i]))
    if config.shocks is None or config.shocks.psi == 0.0:
        return a * float(rho_value(config.spec, pi)) - own_cost
    return a * float(expected_rho(config, pi)[0]) - own_cost


def shock_expectation_theta(config: GameConfig, i: int, x: Sequence[float]) -> float:
    """psi * a_i * E[rho'(pi - s) * d pi / d x_i] at profile x."""
    if config.shocks is None or config.shocks.psi == 0.0:
        return 0.0
    pi = culture_strength(config.culture, x)
    mean_slope = _batched_expectation(
        lambda v: rho_slope_array(config.spec, v), config.shocks, np.array([pi]), _breaks(config)
    )[0]
    dpi = config.culture.weights[i] * float(config.culture.h_prime(x[i]))
    return config.psi * config.benefits[i] * mean_slope * dpi


def marginal_utility(config: GameConfig, i: int, x: Sequence[float]) -> float:
    pi = culture_strength(config.culture, x)
    w, hp = config.culture.weights[i], float(config.culture.h_prime(x[i]))
    benefit = config.benefits[i] * float(expected_slope(config, pi)[0]) * w * hp
    return benefit - float(config.cost.marginal(x[i]))


def _g(config: GameConfig, x):
    return config.cost.marginal(x) / config.culture.h_prime(x)


def g_inverse(config: GameConfig, y) -> np.ndarray:
    """Investment whose marginal cost per unit of culture equals y (vectorised)."""
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.full_like(y, G_UPPER)
    floor = _g(config, np.zeros_like(y)) if config.culture.beta == 1.0 else np.zeros_like(y)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = _g(config, mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(y <= floor, 0.0, 0.5 * (lo + hi))


def _bisect(fn, lo: float, hi: float, tol: float = ROOT_TOL, f_lo: Optional[float] = None) -> float:
    f_lo = fn(lo) if f_lo is None else f_lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = fn(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _groups(config: GameConfig):
    """Distinct (a_i, w_i) classes: returns keys, counts and member index lists."""
    keys: dict[tuple[float, float], list[int]] = {}
    for i, (a, w) in enumerate(zip(config.benefits, config.culture.weights)):
        keys.setdefault((a, w), []).append(i)
    return list(keys.items())


# --------------------------------------------------------- symmetric (finite L)


def solve_symmetric_equilibrium(config: GameConfig, L: Optional[int] = None) -> list[EquilibriumResult]:
    """All symmetric equilibria on a finite tree.

    Roots of the net marginal utility ``M(x)`` on [0, 1) are located on a
    10^4-point grid and refined by bisection; ``x = 0`` is added as a corner
    equilibrium when ``M(0) <= 0``.  The entry flagged ``selected`` is the
    largest stable root paying at least the zero-investment payoff, or the
    corner when no root qualifies.
    """
    depth = config.spec.depth if L is None else L
    if depth == INFINITE:
        raise InvalidSpec("the symmetric solver needs a finite depth")
    if len(set(config.benefits)) != 1 or len(set(config.culture.weights)) != 1:
        raise InvalidSpec("the symmetric solver needs equal benefits and weights")
    cfg = config.with_spec(config.spec.with_depth(int(depth)))
    a, w, k = cfg.benefits[0], cfg.culture.weights[0], cfg.k
    culture = cfg.culture

    def net(xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        pis = culture.baseline + culture.h(xs)
        slope = expected_slope(cfg, pis)
        hp = culture.h_prime(xs)
        gain = np.where(slope == 0.0, 0.0, a * slope * w * hp)
        return gain - cfg.cost.marginal(xs)

    def payoff(xv):
        pi = culture.baseline + float(culture.h(xv))
        return a * float(expected_rho(cfg, pi)[0]) - float(cfg.cost.cost(xv))

    def result(xv, kind, stable):
        pi = culture.baseline + float(culture.h(xv))
        resid = float(net(xv)[0]) if xv > 0 else float(net(0.0)[0])
        return EquilibriumResult(
            x_star=(float(xv),) * k,
            pi_star=pi,
            kind=kind,
            foc_residuals=(resid,) * k,
            stable=stable,
            payoffs=(payoff(xv),) * k,
            rho_star=float(rho_value(cfg.spec, pi)),
        )

    grid = np.linspace(0.0, 1.0, SCAN_POINTS + 1)[:-1]
    vals = net(grid)
    out: list[EquilibriumResult] = []
    if vals[0] <= 0.0:
        out.append(result(0.0, "zero", True))
    for i in range(1, len(grid) - 1):
        lo_v, hi_v = vals[i], vals[i + 1]
        if lo_v == 0.0 and i > 0:
            root = grid[i]
        elif (lo_v > 0) != (hi_v > 0) and hi_v != 0.0:
            root = _refine_root(lambda z: float(net(z)[0]), grid[i], grid[i + 1], lo_v)
        else:
            continue
        out.append(result(root, "positive", bool(lo_v > 0 > hi_v or (lo_v == 0 and vals[i - 1] > 0))))
    # the first grid cell, excluded above so the corner is not double counted
    if vals[0] > 0 > vals[1]:
        root = _refine_root(lambda z: float(net(z)[0]), grid[0], grid[1], vals[0])
        out.insert(0 if not out or out[0].kind != "zero" else 1, result(root, "positive", True))

    zero_payoff = payoff(0.0)
    best = None
    for res in out:
        if res.kind == "positive" and res.stable and res.payoffs[0] >= zero_payoff:
            if best is None or res.x_star[0] > best.x_star[0]:
                best = res
    if best is None:
        best = next((r for r in out if r.kind == "zero"), None)
    return [replace(r, selected=True) if r is best else r for r in out]


def _refine_root(fn, lo: float, hi: float, f_lo: float) -> float:
    root = _bisect(fn, lo, hi, ROOT_TOL, f_lo)
    # keep halving inside the bracket until the residual is small as well
    width = ROOT_TOL
    a, b = max(lo, root - width), min(hi, root + width)
    fa = fn(a)
    while abs(fn(root)) > 1e-10 and b - a > 1e-15:
        root = _bisect(fn, a, b, (b - a) / 1024, fa)
        a, b = max(a, root - (b - a) / 1024), min(b, root + (b - a) / 1024)
        fa = fn(a)
    return root


def selected_equilibrium(results: Sequence[EquilibriumResult]) -> Optional[EquilibriumResult]:
    return next((r for r in results if r.selected), None)


# ------------------------------------------------------ heterogeneous (L = inf)


@lru_cache(maxsize=32)
def _scan_slopes(spec: BranchingSpec, first: float, points: int) -> tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(first, 1.0, points)
    return grid, rho_slope_array(spec, grid)


def culture_response(config: GameConfig, pis) -> tuple[np.ndarray, list]:
    """P(pi) and the per-class investments g^{-1}(...) that produce it."""
    pis = np.atleast_1d(np.asarray(pis, dtype=float))
    slope = expected_slope(config, pis)
    total = np.full_like(pis, config.culture.baseline)
    xs = []
    for (a, w), members in _groups(config):
        x = g_inverse(config, a * w * slope)
        xs.append(x)
        total = total + len(members) * w * config.culture.h(x)
    return total, xs


def _response_on_scan(config: GameConfig, first: float):
    grid, slope = _scan_slopes(config.spec, first, SCAN_POINTS)
    if config.psi != 0.0:
        return grid, culture_response(config, grid)[0]
    total = np.full_like(grid, config.culture.baseline)
    for (a, w), members in _groups(config):
        total = total + len(members) * w * config.culture.h(g_inverse(config, a * w * slope))
    return grid, total


def solve_heterogeneous_equilibrium(config: GameConfig) -> Optional[EquilibriumResult]:
    """Most productive positive-investment equilibrium on the infinite tree.

    Fixed points of ``P(pi)`` at or above the first jump are found by a sign
    scan plus bisection and tried from the largest down; the first whose
    profile survives every unilateral deviation on a 10^3-point grid (and to
    0) is returned.  ``None`` when no fixed point qualifies.
    """
    if not config.spec.is_infinite:
        raise InvalidSpec("the heterogeneous solver works on the infinite tree")
    crit = find_discontinuities(config.spec)
    if not crit:
        raise InvalidSpec("reliability has no discontinuity for this technology")
    first = crit[0].pi
    jumps = [cp.pi for cp in crit[1:]]
    if config.culture.baseline + config.culture.h(1.0) < first:
        return None

    grid, response = _response_on_scan(config, first)
    gap = response - grid

    def gap_at(p: float) -> float:
        return float(culture_response(config, p)[0][0]) - p

    roots = []
    for i in range(len(grid) - 1):
        g0, g1 = gap[i], gap[i + 1]
        if g0 == 0.0:
            roots.append((grid[i], i > 0 and gap[i - 1] > 0))
            continue
        if (g0 > 0) == (g1 > 0) or g1 == 0.0:
            continue
        if any(grid[i] < j <= grid[i + 1] for j in jumps):
            continue
        roots.append((_bisect(gap_at, grid[i], grid[i + 1], 0.0, g0), bool(g0 > 0)))
    if gap[-1] == 0.0:
        roots.append((grid[-1], gap[-2] > 0))

    for pi_root, stable in sorted(roots, reverse=True):
        res = _profile_at(config, pi_root, stable)
        if res is not None and _survives_deviations(config, res):
            return replace(res, selected=True)
    return None


def _profile_at(config: GameConfig, pi_root: float, stable: bool) -> Optional[EquilibriumResult]:
    _, xs = culture_response(config, pi_root)
    x = np.zeros(config.k)
    for ((a, w), members), xg in zip(_groups(config), xs):
        x[members] = xg[0]
    pi = culture_strength(config.culture, x)
    reps = _representatives(config)
    # corners report the (nonpositive) marginal utility; with beta < 1 it is unbounded at 0
    interior_only = config.culture.beta != 1.0
    foc = _expand(
        config, tuple(0.0 if interior_only and x[i] == 0 else marginal_utility(config, i, x) for i in reps)
    )
    payoffs = _expand(config, tuple(utility(config, i, x) for i in reps))
    if np.all(x > 0):
        kind = "positive"
    elif np.all(x == 0):
        kind = "zero"
    else:
        kind = "partial"
    return EquilibriumResult(
        x_star=tuple(float(v) for v in x),
        pi_star=pi,
        kind=kind,
        foc_residuals=foc,
        stable=stable,
        payoffs=payoffs,
        rho_star=float(rho_value(config.spec, pi)),
    )


def _representatives(config: GameConfig) -> list[int]:
    return [members[0] for _, members in _groups(config)]


def _expand(config: GameConfig, values) -> tuple[float, ...]:
    """Copy per-class values to every member (classes share x, a and w)."""
    out = [0.0] * config.k
    for (_, members), v in zip(_groups(config), values):
        for m in members:
            out[m] = float(v)
    return tuple(out)


def _survives_deviations(config: GameConfig, res: EquilibriumResult) -> bool:
    devs = np.linspace(0.0, 1.0, DEVIATION_POINTS + 1)[:-1]
    x = np.asarray(res.x_star)
    for i in _representatives(config):
        others = res.pi_star - config.culture.weights[i] * float(config.culture.h(x[i]))
        pis = others + config.culture.weights[i] * config.culture.h(devs)
        dev_payoff = config.benefits[i] * expected_rho(config, pis) - config.cost.cost(devs)
        if np.max(dev_payoff) > res.payoffs[i] + 1e-9:
            return False
    return True


def check_zero_equilibrium(config: GameConfig) -> bool:
    """True when no worker gains by deviating alone from the all-zero profile."""
    devs = np.linspace(0.0, 1.0, DEVIATION_POINTS + 1)[:-1]
    base = config.culture.baseline
    for i in _representatives(config):
        a, w = config.benefits[i], config.culture.weights[i]
        pis = base + w * config.culture.h(devs)
        payoff = a * expected_rho(config, pis) - config.cost.cost(devs)
        if np.max(payoff) > payoff[0] + PAYOFF_TOL:
            return False
    return True


# ------------------------------------------------------------------ fragility


@dataclass(frozen=True)
class FragilityReport:
    pi_star: float
    rho_star: float
    shocks: tuple[float, ...]
    rho_after: tuple[float, ...]
    nearest_jump: Optional[CriticalPoint] = None
    gamma_gap: Optional[float] = None
    jumps: tuple[CriticalPoint, ...] = field(default=(), repr=False)
    left_limits: tuple[float, ...] = field(default=(), repr=False)

    def epsilon_fragile(self, eps: float) -> bool:
        """Every listed shock larger than eps leaves rho at exactly 0."""
        return all(r == 0.0 for s, r in zip(self.shocks, self.rho_after) if s > eps)

    def eps_gamma_fragile(self, eps: float, gamma: float) -> bool:
        """Some jump of size > gamma lies in (pi* - s, pi*] for every listed s > eps."""
        big = [s for s in self.shocks if s > eps]
        for cp, left in zip(self.jumps, self.left_limits):
            if cp.r - left > gamma and cp.pi <= self.pi_star and all(self.pi_star - s < cp.pi for s in big):
                return True
        return False

    def to_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.shocks, self.rho_after))


def assess_fragility(config: GameConfig, eq: EquilibriumResult, shock_grid: Sequence[float]) -> FragilityReport:
    shocks = tuple(float(s) for s in shock_grid)
    pi = eq.pi_star
    after = rho_value(config.spec, np.array([pi - s for s in shocks])) if shocks else np.zeros(0)
    rho_star = float(rho_value(config.spec, pi))
    jumps = tuple(find_discontinuities(config.spec)) if config.spec.is_infinite else ()
    left = tuple(float(rho_value(config.spec, max(cp.pi - 1e-10, 0.0))) for cp in jumps)
    below = [(cp, lv) for cp, lv in zip(jumps, left) if cp.pi <= pi]
    nearest, gap = None, None
    if below:
        nearest, left_val = below[-1]
        gap = rho_star - left_val
    return FragilityReport(
        pi_star=pi,
        rho_star=rho_star,
        shocks=shocks,
        rho_after=tuple(float(v) for v in after),
        nearest_jump=nearest,
        gamma_gap=gap,
        jumps=jumps,
        left_limits=left,
    )
