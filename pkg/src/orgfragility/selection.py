"""Choosing between a simple and a complex project, and leadership culture.

For each baseline culture the organisation compares the simple project,
where nobody invests because reliability is continuous, with the complex
project at its most productive equilibrium.  Output is gross value ``v * rho``
unless ``net_of_costs`` asks for aggregate investment costs to be deducted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .branching import BranchingSpec, regular
from .equilibrium import Barrier, GameConfig, solve_heterogeneous_equilibrium, symmetric_game
from .errors import DomainError, EmptyMenu, InvalidSpec
from .reliability import find_discontinuities, rho_value

THRESHOLD_TOL = 1e-4
COARSE_POINTS = 101


@dataclass(frozen=True)
class ProjectMenu:
    simple_spec: BranchingSpec
    complex_spec: BranchingSpec
    v_simple: float
    v_complex: float
    game: GameConfig  # template: its spec and baseline are replaced per evaluation
    net_of_costs: bool = False

    def __post_init__(self):
        if self.simple_spec.p.min_support != 1 or self.simple_spec.p.max_support != 1:
            raise InvalidSpec("the simple project needs exactly one input type per task")
        if not self.complex_spec.is_complex:
            raise InvalidSpec("the complex project needs at least two input types per task")
        if not (self.v_simple > 0 and self.v_complex > 0):
            raise DomainError("project values must be positive")

    @property
    def values_ordered(self) -> bool:
        """True when the complex project is the more valuable one."""
        return self.v_complex > self.v_simple

    def complex_game(self, baseline: float) -> GameConfig:
        return self.game.with_spec(self.complex_spec).with_baseline(baseline)


@dataclass(frozen=True)
class Thresholds:
    """Baseline cultures where output starts, the complex project takes over,
    and contributions stop.  ``None`` marks a threshold that does not exist."""

    pi1: Optional[float]
    pi2: Optional[float]
    pi3: Optional[float]

    @property
    def ordered(self) -> bool:
        vals = [self.pi1, self.pi2, self.pi3]
        if any(v is None for v in vals):
            return True
        return self.pi1 <= self.pi2 <= self.pi3

    def as_tuple(self):
        return (self.pi1, self.pi2, self.pi3)


@dataclass(frozen=True)
class EnvelopeReport:
    baseline_grid: tuple[float, ...]
    output_no_invest: tuple[float, ...]
    output_equilibrium: tuple[float, ...]
    chosen_project: tuple[str, ...]
    eq_culture: tuple[float, ...]
    thresholds: Thresholds

    def rows(self):
        return list(
            zip(self.baseline_grid, self.output_no_invest, self.output_equilibrium, self.chosen_project, self.eq_culture)
        )

    def jumps(self, fraction: float = 0.25) -> list[int]:
        """Grid indices i where Panel B rises by more than ``fraction`` of its max between i and i+1."""
        out = np.asarray(self.output_equilibrium)
        if out.size < 2 or out.max() <= 0:
            return []
        steps = np.diff(out)
        return [int(i) for i in np.nonzero(steps > fraction * out.max())[0]]


def default_menu(k: int = 100) -> ProjectMenu:
    """m=1,n=2 vs m=n=2, values 1 and 2, a = 0.6, barrier alpha = 0.5.

    The complex project is costlier to sustain here than in the default game,
    which places the switch to it strictly above the point where the simple
    project starts producing.
    """
    game = symmetric_game(regular(2, 2), k, 0.5, 0.6, Barrier(0.5))
    return ProjectMenu(regular(1, 2), regular(2, 2), 1.0, 2.0, game)


def _rho(spec: BranchingSpec, pi: float) -> float:
    return float(rho_value(spec, min(max(pi, 0.0), 1.0)))


def complex_outcome(menu: ProjectMenu, baseline: float, pi3: Optional[float] = None):
    """(value, culture, positive equilibrium or None) for the complex project."""
    if pi3 is None:
        crit = find_discontinuities(menu.complex_spec)
        pi3 = crit[0].pi if crit else None
    eq = None
    if pi3 is not None and baseline < pi3:
        eq = solve_heterogeneous_equilibrium(menu.complex_game(baseline))
        if eq is not None and eq.kind != "positive":
            eq = None
    if eq is None:
        return menu.v_complex * _rho(menu.complex_spec, baseline), baseline, None
    value = menu.v_complex * eq.rho_star
    if menu.net_of_costs:
        value -= math.fsum(float(menu.game.cost.cost(x)) for x in eq.x_star)
    return value, eq.pi_star, eq


def _complex_wins(menu: ProjectMenu, baseline: float, pi3: float) -> bool:
    value, _, eq = complex_outcome(menu, baseline, pi3)
    return eq is not None and value >= menu.v_simple * _rho(menu.simple_spec, baseline)


def _first_true(pred, lo: float, hi: float, points: int = COARSE_POINTS) -> Optional[float]:
    """Smallest point of [lo, hi) where a monotone-ish predicate turns true."""
    grid = np.linspace(lo, hi, points)[:-1]
    prev = None
    for x in grid:
        if pred(float(x)):
            if prev is None:
                return float(x)
            a, b = prev, float(x)
            while b - a > THRESHOLD_TOL:
                mid = 0.5 * (a + b)
                if pred(mid):
                    b = mid
                else:
                    a = mid
            return b
        prev = float(x)
    return None


def find_thresholds(menu: ProjectMenu) -> Thresholds:
    pi1 = _first_true(lambda b: _rho(menu.simple_spec, b) > 0.0, 0.0, 1.0 + 1e-12)
    crit = find_discontinuities(menu.complex_spec)
    pi3 = crit[0].pi if crit else None
    pi2 = None
    if pi3 is not None:
        pi2 = _first_true(lambda b: _complex_wins(menu, b, pi3), 0.0, pi3)
    return Thresholds(pi1, pi2, pi3)


def compute_envelope(menu: ProjectMenu, grid: Sequence[float]) -> EnvelopeReport:
    grid = [float(b) for b in grid]
    if any(not 0.0 <= b <= 1.0 for b in grid) or any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise DomainError("baseline grid must be ascending inside [0, 1]")
    thresholds = find_thresholds(menu)
    panel_a, panel_b, chosen, culture = [], [], [], []
    for b in grid:
        simple = menu.v_simple * _rho(menu.simple_spec, b)
        idle = menu.v_complex * _rho(menu.complex_spec, b)
        panel_a.append(max(simple, idle))
        value, pi_eq, _ = complex_outcome(menu, b, thresholds.pi3)
        if value <= 0.0 and simple <= 0.0:
            chosen.append("none")
            panel_b.append(0.0)
            culture.append(b)
        elif value > simple:
            chosen.append("complex")
            panel_b.append(value)
            culture.append(pi_eq)
        else:
            chosen.append("simple")
            panel_b.append(simple)
            culture.append(b)
    return EnvelopeReport(
        baseline_grid=tuple(grid),
        output_no_invest=tuple(panel_a),
        output_equilibrium=tuple(panel_b),
        chosen_project=tuple(chosen),
        eq_culture=tuple(culture),
        thresholds=thresholds,
    )


def choose_culture(options: Mapping[str, float]) -> str:
    """Label with the strongest baseline culture; ties go to the smallest label."""
    if not options:
        raise EmptyMenu("no culture options to choose from")
    return min(options, key=lambda label: (-options[label], label))
