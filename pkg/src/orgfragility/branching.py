"""Finite-support pmfs, their generating functions, and tree technologies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import (
    DomainError,
    DuplicateSupport,
    InvalidSpec,
    NegativeProb,
    NoConvergence,
    NonUnitMass,
    NotInvertible,
)

MASS_TOL = 1e-9
MAX_SUPPORT = 64
INVERSE_TOL = 1e-12
INVERSE_MAX_ITER = 200

INFINITE = math.inf
"""Depth marker for trees without leaves."""

Depth = Union[int, float]


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on a finite set of nonnegative integers.

    Build instances through :func:`make_pmf`, which validates the mass.
    """

    support: tuple[int, ...]
    probs: tuple[float, ...]

    @property
    def min_support(self) -> int:
        return self.support[0]

    @property
    def max_support(self) -> int:
        return self.support[-1]

    @property
    def is_degenerate(self) -> bool:
        return len(self.support) == 1

    @property
    def mean(self) -> float:
        return float(sum(k * p for k, p in zip(self.support, self.probs)))

    def evaluate(self, z):
        """Vectorised G(z) = sum_j p(j) z**j with no domain check."""
        z = np.asarray(z, dtype=float)
        if self.is_degenerate:
            return z ** self.support[0]
        out = np.zeros_like(z)
        for k, p in zip(self.support, self.probs):
            out = out + p * z**k
        return out

    def derivative(self, z):
        """Vectorised G'(z)."""
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for k, p in zip(self.support, self.probs):
            if k > 0:
                out = out + p * k * z ** (k - 1)
        return out

    def inverse(self, y):
        """Vectorised G^{-1}(y) on [0, 1]; assumes min support >= 1."""
        y = np.asarray(y, dtype=float)
        if self.is_degenerate:
            return y ** (1.0 / self.support[0])
        lo = np.zeros_like(y)
        hi = np.ones_like(y)
        # 2**-64 is below double resolution on [0, 1]
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = self.evaluate(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def to_dict(self) -> dict:
        return {"support": list(self.support), "probs": list(self.probs)}


def make_pmf(support: Sequence[int], probs: Sequence[float]) -> Pmf:
    if len(support) != len(probs) or len(support) == 0:
        raise DomainError("support and probs must be non-empty and of equal length")
    pairs = []
    for k, p in zip(support, probs):
        if int(k) != k or k < 0:
            raise DomainError(f"support entries must be nonnegative integers, got {k!r}")
        if int(k) > MAX_SUPPORT:
            raise DomainError(f"support entry {k} exceeds the cap of {MAX_SUPPORT}")
        if not p >= 0:
            raise NegativeProb(f"probability {p!r} for support point {k} is negative")
        pairs.append((int(k), float(p)))
    pairs.sort()
    ks = [k for k, _ in pairs]
    if len(set(ks)) != len(ks):
        raise DuplicateSupport(f"support has repeated entries: {sorted(ks)}")
    mass = math.fsum(p for _, p in pairs)
    if abs(mass - 1.0) > MASS_TOL:
        raise NonUnitMass(f"probabilities sum to {mass!r}, not 1")
    return Pmf(tuple(ks), tuple(p for _, p in pairs))


def degenerate(k: int) -> Pmf:
    return make_pmf([k], [1.0])


def gen_fn_eval(pmf: Pmf, z: float) -> float:
    if not 0.0 <= z <= 1.0:
        raise DomainError(f"generating function argument {z!r} outside [0, 1]")
    return float(pmf.evaluate(z))


def gen_fn_inverse(pmf: Pmf, y: float) -> float:
    """Solve G(z) = y for z in [0, 1] by bisection.

    The loop runs until the bracket collapses to double resolution (or 200
    halvings), which is tighter than the 1e-12 residual guarantee and keeps
    the recovered z accurate where G is flat near 0.
    """
    if not 0.0 <= y <= 1.0:
        raise DomainError(f"generating function value {y!r} outside [0, 1]")
    if pmf.min_support == 0:
        raise NotInvertible("pmf places mass on 0, so G(0) != 0")
    if y == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(INVERSE_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if float(pmf.evaluate(mid)) < y:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    if abs(float(pmf.evaluate(z)) - y) > INVERSE_TOL:
        raise NoConvergence(f"bisection for G^-1({y!r}) stalled at residual above {INVERSE_TOL}")
    return z


@dataclass(frozen=True)
class BranchingSpec:
    """Tree technology: input types per task ~ p, providers per type ~ q."""

    p: Pmf
    q: Pmf
    depth: Depth = INFINITE

    def __post_init__(self):
        if self.p.min_support < 1:
            raise InvalidSpec("every task needs at least one input type (p min support >= 1)")
        if self.q.min_support < 1:
            raise InvalidSpec("every input type needs a provider (q min support >= 1)")
        if not (self.depth == INFINITE or (int(self.depth) == self.depth and self.depth >= 1)):
            raise InvalidSpec(f"depth must be a positive integer or INFINITE, got {self.depth!r}")
        if self.depth != INFINITE:
            object.__setattr__(self, "depth", int(self.depth))

    @property
    def is_complex(self) -> bool:
        return self.p.min_support >= 2

    @property
    def is_infinite(self) -> bool:
        return self.depth == INFINITE

    @property
    def is_regular(self) -> bool:
        return self.p.is_degenerate and self.q.is_degenerate

    def with_depth(self, depth: Depth) -> "BranchingSpec":
        return BranchingSpec(self.p, self.q, depth)

    def to_dict(self) -> dict:
        return {
            "p": self.p.to_dict(),
            "q": self.q.to_dict(),
            "depth": "infinite" if self.is_infinite else self.depth,
        }


def regular(m: int, n: int, depth: Depth = INFINITE) -> BranchingSpec:
    """Regular tree: exactly m input types, n providers each."""
    return BranchingSpec(degenerate(m), degenerate(n), depth)
