import math

import numpy as np
import pytest

from orgfragility.branching import regular
from orgfragility.equilibrium import (
    Barrier,
    CultureMap,
    GameConfig,
    ShockSpec,
    SmoothBarrier,
    assess_fragility,
    check_zero_equilibrium,
    culture_response,
    culture_strength,
    default_game,
    expected_rho,
    finite_tree_example,
    g_inverse,
    marginal_utility,
    selected_equilibrium,
    shock_expectation_theta,
    shock_nodes,
    solve_heterogeneous_equilibrium,
    solve_symmetric_equilibrium,
    symmetric_game,
    uniform_culture,
    utility,
)
from orgfragility.errors import DomainError, InvalidSpec, LengthMismatch, WeightError
from orgfragility.reliability import find_discontinuities, rho_finite, rho_infinite, rho_value

SQUARE = regular(2, 2)
PI_CRIT = 27 / 32
R_CRIT = 64 / 81

# Independent 40-digit solutions (mpmath root finding on the closed-form
# recursion and on Pi(r) = (1 - sqrt(1 - sqrt(r))) / r), rounded.
SYM_LOW_ROOT = 0.75039585656175569646
SYM_HIGH_ROOT = 0.85111674607851567502
SYM_RHO10 = 0.88079445883962379715
SYM_PAYOFF = 1.5970008612315730757
SYM_RHO10_SHOCKED = 0.013308893471069010658
HET_GAP = {10: 0.014528385869557954219, 50: 0.0011012816342640623410, 250: 4.8911196723966054888e-05}


# ------------------------------------------------------------------ culture


def test_culture_at_zero_and_full_investment():
    c = uniform_culture(4, 0.3)
    assert culture_strength(c, [0, 0, 0, 0]) == 0.3
    assert culture_strength(c, [1, 1, 1, 1]) == pytest.approx(1.0, abs=1e-15)


def test_culture_weighting():
    c = CultureMap(0.2, (0.5, 0.25, 0.25))
    assert culture_strength(c, [1.0, 0.0, 0.5]) == pytest.approx(0.2 + 0.8 * (0.5 + 0.125))


def test_concave_culture_map():
    c = uniform_culture(2, 0.0, beta=0.5)
    assert culture_strength(c, [0.25, 0.25]) == pytest.approx(0.5)
    assert float(c.h_prime(0.25)) == pytest.approx(1.0)


def test_culture_validation():
    with pytest.raises(WeightError):
        CultureMap(0.5, (0.45, 0.45))
    with pytest.raises(WeightError):
        CultureMap(0.5, (1.5, -0.5))
    with pytest.raises(DomainError):
        CultureMap(1.0, (1.0,))
    with pytest.raises(DomainError):
        CultureMap(0.5, (1.0,), beta=1.5)
    with pytest.raises(LengthMismatch):
        culture_strength(uniform_culture(3, 0.1), [0.1, 0.2])
    with pytest.raises(DomainError):
        culture_strength(uniform_culture(2, 0.1), [0.1, 1.2])


def test_game_validation():
    with pytest.raises(LengthMismatch):
        GameConfig(SQUARE, uniform_culture(3, 0.5), Barrier(0.08), (1.0, 1.0))
    with pytest.raises(DomainError):
        GameConfig(SQUARE, uniform_culture(1, 0.5), Barrier(0.08), (-1.0,))
    with pytest.raises(DomainError):
        ShockSpec(0.5, 0.0, 0.1)
    with pytest.raises(DomainError):
        ShockSpec(1.5, 0.05, 0.1)
    with pytest.raises(DomainError):
        SmoothBarrier(0.1, 1.0)


# -------------------------------------------------------------------- costs


def test_barrier_cost_value():
    # 2**0.08 - 1
    assert float(Barrier(0.08).cost(0.5)) == pytest.approx(0.05701804056138037, abs=1e-15)
    assert float(Barrier(0.08).cost(0.0)) == 0.0


def test_marginal_costs_match_differences():
    h = 1e-6
    for cost in (Barrier(0.08), Barrier(0.5), SmoothBarrier(0.3, 2.0), SmoothBarrier(0.3, 3.5)):
        for x in (0.1, 0.5, 0.9):
            fd = (cost.cost(x + h) - cost.cost(x - h)) / (2 * h)
            assert float(cost.marginal(x)) == pytest.approx(float(fd), rel=1e-6)


def test_smooth_barrier_has_flat_start():
    assert float(SmoothBarrier(0.08).marginal(0.0)) == 0.0
    assert float(Barrier(0.08).marginal(0.0)) == pytest.approx(0.08)


def test_g_inverse_round_trip():
    game = default_game(10)
    xs = np.array([0.0, 0.1, 0.5, 0.9, 0.999])
    g = game.cost.marginal(xs) / game.culture.h_prime(xs)
    assert g_inverse(game, g) == pytest.approx(xs, abs=1e-10)
    assert float(g_inverse(game, 0.01)) == 0.0


# ------------------------------------------------------------------ payoffs


def test_zero_profile_below_threshold_earns_nothing():
    game = default_game(5)
    assert utility(game, 0, [0.0] * 5) == 0.0


def test_payoff_without_shocks():
    game = default_game(5)
    x = [0.8] * 5
    pi = 0.5 + 0.5 * 0.8
    assert utility(game, 2, x) == pytest.approx(2 * rho_infinite(SQUARE, pi) - float(Barrier(0.08).cost(0.8)), abs=1e-12)


def test_zero_shock_probability_is_the_plain_payoff():
    plain = default_game(5)
    zero = GameConfig(plain.spec, plain.culture, plain.cost, plain.benefits, ShockSpec(0.0, 0.05, 0.15))
    for x in ([0.0] * 5, [0.7] * 5, [0.9, 0.1, 0.5, 0.95, 0.3]):
        for i in range(5):
            assert utility(zero, i, x) == utility(plain, i, x)
            assert shock_expectation_theta(zero, i, x) == 0.0


def test_shocked_payoff_matches_fine_integration():
    shocks = ShockSpec(0.3, 0.05, 0.15)
    game = symmetric_game(SQUARE, 4, 0.5, 2.0, Barrier(0.08), shocks)
    x = [0.9] * 4
    pi = culture_strength(game.culture, x)
    s = np.linspace(0.05, 0.15, 400_001)
    vals = rho_value(SQUARE, pi - s)
    mean = np.trapezoid(vals, s) / 0.1
    direct = 0.7 * 2 * rho_infinite(SQUARE, pi) + 0.3 * 2 * mean - float(Barrier(0.08).cost(0.9))
    assert utility(game, 0, x) == pytest.approx(direct, abs=1e-6)


def test_quadrature_handles_the_jump():
    # E[rho'(pi - s)] under a uniform density telescopes to differences of rho,
    # minus the jump from 0 to r_c when the support straddles it
    shocks = ShockSpec(0.5, 0.05, 0.15)
    for pi0 in (0.9, 0.92, 0.95, 0.99):
        vals, wts = shock_nodes(shocks, pi0, (PI_CRIT,))
        from orgfragility.reliability import rho_slope_array

        quad = float(np.sum(wts * rho_slope_array(SQUARE, vals)))
        lo, hi = pi0 - 0.15, pi0 - 0.05
        jump = R_CRIT if lo < PI_CRIT <= hi else 0.0
        exact = (rho_infinite(SQUARE, hi) - rho_infinite(SQUARE, max(lo, 0.0)) - jump) / 0.1
        assert quad == pytest.approx(exact, abs=1e-9)


def test_quadrature_weights_integrate_density():
    shocks = ShockSpec(0.5, 0.05, 0.15, quadrature_nodes=32)
    vals, wts = shock_nodes(shocks, 0.95, ())
    assert wts.sum() == pytest.approx(1.0, abs=1e-14)
    vals, wts = shock_nodes(shocks, 0.95, (PI_CRIT,))
    # the piece below the jump is dropped, the rest keeps its share of the mass
    assert wts.sum() == pytest.approx((0.95 - 0.05 - PI_CRIT) / 0.1, abs=1e-12)


def test_theta_zero_when_shocks_land_in_zero_region():
    game = symmetric_game(SQUARE, 10, 0.5, 2.0, Barrier(0.08), ShockSpec(0.5, 0.05, 0.15))
    assert shock_expectation_theta(game, 0, [0.0] * 10) == 0.0


def test_theta_vanishes_with_organisation_size():
    shocks = ShockSpec(0.5, 0.05, 0.15)
    thetas = []
    for k in (10, 100, 1000, 10_000):
        game = symmetric_game(SQUARE, k, 0.5, 2.0, Barrier(0.08), shocks)
        thetas.append(shock_expectation_theta(game, 0, np.full(k, 0.9)))
    assert all(b < a for a, b in zip(thetas, thetas[1:]))
    assert thetas[-1] < 1e-3 * thetas[0] * 10


def _payoff_difference(game, i, x, h=1e-6):
    up, dn = np.array(x, float), np.array(x, float)
    up[i] += h
    dn[i] -= h
    return (utility(game, i, up) - utility(game, i, dn)) / (2 * h)


def test_marginal_utility_matches_difference_away_from_jump():
    game = symmetric_game(SQUARE, 5, 0.5, 2.0, Barrier(0.08), ShockSpec(0.4, 0.05, 0.15))
    x = [0.99, 0.995, 0.99, 0.985, 0.99]
    assert culture_strength(game.culture, x) - 0.15 > PI_CRIT
    assert marginal_utility(game, 1, x) == pytest.approx(_payoff_difference(game, 1, x), rel=1e-5)


def test_marginal_utility_leaves_out_mass_crossing_the_jump():
    # the first-order condition uses the almost-everywhere slope of rho; the
    # payoff itself also moves with the shock mass carried across the jump
    game = symmetric_game(SQUARE, 5, 0.5, 2.0, Barrier(0.08), ShockSpec(0.4, 0.05, 0.15))
    x = [0.9, 0.8, 0.85, 0.95, 0.9]
    crossing = 2.0 * 0.4 * 0.2 * 0.5 * R_CRIT / 0.1
    gap = _payoff_difference(game, 1, x) - marginal_utility(game, 1, x)
    assert gap == pytest.approx(crossing, rel=1e-5)


# ------------------------------------------------------- symmetric solver


def test_finite_tree_equilibria():
    results = solve_symmetric_equilibrium(finite_tree_example(10))
    kinds = [(r.kind, r.stable) for r in results]
    assert kinds == [("zero", True), ("positive", False), ("positive", True)]
    assert results[1].x_star[0] == pytest.approx(SYM_LOW_ROOT, abs=1e-9)
    sel = selected_equilibrium(results)
    assert sel is results[2]
    assert sel.pi_star == pytest.approx(SYM_HIGH_ROOT, abs=1e-9)
    assert sel.rho_star == pytest.approx(SYM_RHO10, abs=1e-9)
    assert sel.payoffs[0] == pytest.approx(SYM_PAYOFF, abs=1e-9)


def test_symmetric_roots_have_small_residuals():
    for game in (finite_tree_example(10), finite_tree_example(20)):
        for r in solve_symmetric_equilibrium(game):
            if r.kind == "positive":
                assert max(abs(v) for v in r.foc_residuals) < 1e-8


def test_symmetric_solver_without_benefit():
    game = symmetric_game(regular(2, 2, 10), 10, 0.0, 0.0, Barrier(0.08))
    results = solve_symmetric_equilibrium(game)
    assert [r.kind for r in results] == ["zero"]
    assert selected_equilibrium(results).x_star == (0.0,) * 10


def test_symmetric_solver_preconditions():
    with pytest.raises(InvalidSpec):
        solve_symmetric_equilibrium(default_game(5))
    mixed = GameConfig(regular(2, 2, 5), uniform_culture(2, 0.0), Barrier(0.08), (1.0, 2.0))
    with pytest.raises(InvalidSpec):
        solve_symmetric_equilibrium(mixed)


def test_depth_argument_for_symmetric_solver():
    a = selected_equilibrium(solve_symmetric_equilibrium(finite_tree_example(10).with_spec(regular(2, 2)), L=10))
    assert a.pi_star == pytest.approx(SYM_HIGH_ROOT, abs=1e-9)


def test_finite_depth_fragility_deepens():
    after = []
    for L in (10, 20, 40):
        game = finite_tree_example(L)
        eq = selected_equilibrium(solve_symmetric_equilibrium(game))
        after.append(assess_fragility(game, eq, [0.1]).rho_after[0])
    assert after[0] == pytest.approx(SYM_RHO10_SHOCKED, abs=1e-9)
    assert after[0] < 0.02
    assert after[0] >= after[1] >= after[2]
    assert after[2] < 1e-6


def test_anticipated_shocks_raise_finite_equilibrium_culture():
    base = selected_equilibrium(solve_symmetric_equilibrium(finite_tree_example(10)))
    cfg = finite_tree_example(10)
    shocked = GameConfig(cfg.spec, cfg.culture, cfg.cost, cfg.benefits, ShockSpec(0.2, 0.05, 0.15))
    eq = selected_equilibrium(solve_symmetric_equilibrium(shocked))
    assert eq.pi_star > base.pi_star
    assert max(abs(v) for v in eq.foc_residuals) < 1e-8


# --------------------------------------------------- heterogeneous solver


@pytest.mark.parametrize("k", [10, 50, 250])
def test_heterogeneous_fixed_points(k):
    eq = solve_heterogeneous_equilibrium(default_game(k))
    assert eq.kind == "positive"
    assert eq.pi_star - PI_CRIT == pytest.approx(HET_GAP[k], rel=1e-6)
    assert max(abs(v) for v in eq.foc_residuals) < 1e-8
    assert len(set(eq.x_star)) == 1
    assert eq.pi_star == pytest.approx(culture_strength(default_game(k).culture, eq.x_star), abs=1e-10)


def test_culture_approaches_the_jump_as_size_grows():
    gaps = [solve_heterogeneous_equilibrium(default_game(k)).pi_star - PI_CRIT for k in (10, 50, 250)]
    assert all(g > 0 for g in gaps)
    assert gaps[0] > gaps[1] > gaps[2]


def test_heterogeneous_profile_is_a_best_response():
    game = GameConfig(SQUARE, CultureMap(0.5, (0.3, 0.2, 0.2, 0.1, 0.1, 0.1)), Barrier(0.08), (1.0, 2.0, 2.0, 3.0, 0.5, 1.5))
    eq = solve_heterogeneous_equilibrium(game)
    x = list(eq.x_star)
    # same (a, w) means same investment
    assert x[1] == x[2]
    for i in range(6):
        best = eq.payoffs[i]
        assert utility(game, i, x) == pytest.approx(best, abs=1e-12)
        for dev in np.linspace(0, 0.999, 200):
            alt = x.copy()
            alt[i] = float(dev)
            assert utility(game, i, alt) <= best + 1e-9
        if x[i] > 0:
            assert abs(eq.foc_residuals[i]) < 1e-8
        else:
            assert eq.foc_residuals[i] <= 0.0


def test_fixed_point_of_culture_response():
    game = default_game(50)
    eq = solve_heterogeneous_equilibrium(game)
    total, _ = culture_response(game, eq.pi_star)
    assert float(total[0]) == pytest.approx(eq.pi_star, abs=1e-10)


def test_no_productive_equilibrium_when_benefits_are_small():
    for a in (0.0, 0.05):
        assert solve_heterogeneous_equilibrium(symmetric_game(SQUARE, 50, 0.5, a, Barrier(0.08))) is None


def test_heterogeneous_preconditions():
    with pytest.raises(InvalidSpec):
        solve_heterogeneous_equilibrium(finite_tree_example(10))
    with pytest.raises(InvalidSpec):
        solve_heterogeneous_equilibrium(symmetric_game(regular(1, 2), 5, 0.5, 2.0, Barrier(0.08)))


def test_heterogeneous_with_anticipated_shocks():
    game = symmetric_game(SQUARE, 50, 0.5, 2.0, Barrier(0.08), ShockSpec(0.5, 0.05, 0.15))
    eq = solve_heterogeneous_equilibrium(game)
    assert eq.kind == "positive" and eq.pi_star > PI_CRIT
    assert max(abs(v) for v in eq.foc_residuals) < 1e-8


# ------------------------------------------------------------- zero profile


def test_zero_equilibrium_in_large_organisation():
    assert check_zero_equilibrium(default_game(50))


def test_single_agent_leaves_the_zero_profile():
    game = symmetric_game(SQUARE, 1, 0.8, 10.0, Barrier(0.08))
    assert not check_zero_equilibrium(game)


def test_zero_equilibrium_without_benefits():
    assert check_zero_equilibrium(symmetric_game(SQUARE, 5, 0.5, 0.0, Barrier(0.08)))


# ------------------------------------------------------------- fragility


def test_fragility_of_large_organisation():
    game = default_game(250)
    eq = solve_heterogeneous_equilibrium(game)
    assert PI_CRIT < eq.pi_star < 0.85
    rep = assess_fragility(game, eq, [0.0, 0.01, 0.05, 0.1])
    assert rep.rho_after[0] == pytest.approx(eq.rho_star)
    assert rep.rho_after[2] == 0.0
    assert rep.epsilon_fragile(0.04)
    assert rep.nearest_jump.pi == pytest.approx(PI_CRIT)
    assert rep.gamma_gap == pytest.approx(eq.rho_star)
    assert rep.eps_gamma_fragile(0.04, 0.7)
    assert not rep.eps_gamma_fragile(0.04, 0.9)


def test_strong_baseline_is_not_fragile():
    game = default_game(5, baseline=0.95)
    zero = selected_equilibrium([])
    assert zero is None
    from orgfragility.equilibrium import EquilibriumResult

    eq = EquilibriumResult((0.0,) * 5, 0.95, "zero", (0.0,) * 5, True, (0.0,) * 5)
    rep = assess_fragility(game, eq, [0.0, 0.05])
    assert rep.rho_after[1] == pytest.approx(0.9663309992475766, abs=1e-12)
    assert not rep.epsilon_fragile(0.0)
    assert rep.epsilon_fragile(0.05)  # vacuous: no listed shock exceeds 0.05


def test_fragility_on_two_jumps():
    from orgfragility.branching import BranchingSpec, make_pmf

    spec = BranchingSpec(make_pmf([2, 16], [0.7, 0.3]), make_pmf([2, 8], [0.5, 0.5]))
    lo, hi = find_discontinuities(spec)
    game = symmetric_game(spec, 5, 0.5, 2.0, Barrier(0.08))
    from orgfragility.equilibrium import EquilibriumResult

    eq = EquilibriumResult((0.0,) * 5, hi.pi + 0.01, "zero", (0.0,) * 5, True, (0.0,) * 5)
    rep = assess_fragility(game, eq, [0.02, 0.05])
    assert rep.nearest_jump == hi
    left = rho_infinite(spec, hi.pi - 1e-7)
    assert rep.gamma_gap == pytest.approx(rho_infinite(spec, hi.pi + 0.01) - left, abs=1e-5)
    assert rep.rho_after[0] > 0.0
    assert rep.eps_gamma_fragile(0.011, 0.1)
    assert not rep.epsilon_fragile(0.011)


def test_finite_tree_reliability_consistency():
    eq = selected_equilibrium(solve_symmetric_equilibrium(finite_tree_example(10)))
    assert eq.rho_star == pytest.approx(rho_finite(regular(2, 2), eq.pi_star, 10))
    assert math.isclose(float(expected_rho(finite_tree_example(10), eq.pi_star)[0]), eq.rho_star)
