import math

import numpy as np
import pytest

from skyrmelab import profile
from skyrmelab.profile import (
    BracketingError,
    closed_form,
    closed_form_residual,
    ode_residual,
    series_at_zero,
    shoot,
    solve_profile,
    to_angle,
)


def test_closed_form_examples():
    assert closed_form(0.0) == 1.0
    assert closed_form(1.0) == 0.0
    assert closed_form(0.5) == pytest.approx(15 / 23, abs=1e-15)
    with pytest.raises(ValueError):
        closed_form(1.5)
    with pytest.raises(ValueError):
        closed_form(-0.1)


def test_closed_form_residual_at_many_points():
    rho = np.linspace(0, 1, 10002)[1:-1]
    assert np.max(np.abs(closed_form_residual(rho))) <= 1e-12


def test_ode_residual_examples():
    r = 0.5
    res = ode_residual(closed_form(r), profile.closed_form_d1(r), profile.closed_form_d2(r), r)
    assert abs(res) <= 1e-12
    for x in (0.1, 0.5, 0.9):
        assert ode_residual(0.0, 0.0, 0.0, x) == 0.0
    assert ode_residual(1.0, 0.0, 0.0, 0.5) == 0.0


@pytest.mark.parametrize("rho", [0.0, 1.0, -0.2, 1.3])
def test_ode_residual_rejects_singular_points(rho):
    with pytest.raises(ValueError):
        ode_residual(0.5, 0.0, 0.0, rho)


def test_series_examples():
    a = series_at_zero(-8 / 5, 4, 1)
    assert a[0] == 1.0 and a[2] == -1.6
    assert a[4] == pytest.approx(24 / 25, abs=1e-15)
    assert np.all(series_at_zero(0.0, 8, 1)[1:] == 0.0)
    for c in (-2.3, -1.6, 0.7):
        assert np.array_equal(series_at_zero(c, 8, -1), -series_at_zero(c, 8, 1))
    odd = series_at_zero(-1.1, 8, 1)[1::2]
    assert np.all(odd == 0.0)


def test_series_matches_closed_form_taylor_polynomial():
    coeffs = series_at_zero(-8 / 5, 8, 1)
    x = 0.05
    assert np.polynomial.polynomial.polyval(x, coeffs) == pytest.approx(closed_form(x), abs=1e-12)


def test_shoot_examples():
    assert abs(shoot(-1.6).miss) <= 1e-8
    flat = shoot(0.0)
    assert np.all(flat.y.values == 1.0)
    assert flat.miss == pytest.approx(1.0, abs=1e-12)
    assert shoot(-3.0).miss < 0


def test_shoot_rejects_bad_steps():
    with pytest.raises(ValueError):
        shoot(-1.6, eps=2e-3)
    with pytest.raises(ValueError):
        shoot(-1.6, h=0.0)


def test_shoot_reports_divergence():
    # y > 1 makes the nonlinear term push y'' up, so a positive c blows up
    far = shoot(1.0)
    assert far.diverged
    assert far.miss > 0 and math.isfinite(far.miss)


def test_bracket_failure_is_reported(monkeypatch):
    monkeypatch.setattr(profile, "BRACKET", (-0.5, -0.1))
    with pytest.raises(BracketingError):
        solve_profile(h=1e-3, eps=1e-3)


def test_solve_profile_matches_oracle(solved):
    assert solved.c_shoot == pytest.approx(-1.6, abs=1e-6)
    assert np.max(np.abs(solved.y.values - closed_form(solved.rho))) <= 1e-6
    assert solved.residual_sup <= 100 * solved.grid.spacing**2
    i = int(np.argmin(np.abs(solved.rho - 0.5)))
    assert solved.rho[i] == pytest.approx(0.5, abs=1e-12)
    assert solved.y.values[i] == pytest.approx(15 / 23, abs=1e-7)


def test_solution_invariants(solved):
    y = solved.y.values
    assert np.all(np.abs(y) <= 1 + 1e-10)
    assert np.all((y >= 0) & (y <= 1))
    assert solved.is_monotone()
    assert abs(solved.y_at_zero() - 1.0) <= 1e-6
    assert abs(solved.y_at_one()) <= 1e-6


def test_solve_profile_rejects_tiny_tol():
    with pytest.raises(ValueError):
        solve_profile(tol=1e-13)


def test_gap_shrinks_under_refinement():
    gaps = []
    for h in (1e-3, 5e-4, 2e-4):
        p = solve_profile(eps=h, h=h)
        gaps.append(np.max(np.abs(p.y.values - closed_form(p.rho))))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-11


def test_odd_symmetry(solved):
    neg = solved.negate()
    assert np.array_equal(neg.y.values, -solved.y.values)
    assert neg.branch == -1 and neg.is_monotone()
    assert np.array_equal(solve_profile(branch=-1).y.values, -solved.y.values)


def test_angle_profile(solved):
    ang = to_angle(solved)
    h = solved.grid.spacing
    assert np.max(np.abs(np.cos(ang.w.values) - solved.y.values)) <= 1e-12
    assert np.max(np.abs(ang.residual()[1:-1])) <= 100 * h * h
    assert ang.dw.values[0] == pytest.approx(4 / math.sqrt(5), abs=1e-3)
    # w(0) -> 0 and w(1) -> pi/2 by linear extrapolation
    rho, w = solved.rho, ang.w.values
    w0 = w[0] - rho[0] * (w[1] - w[0]) / (rho[1] - rho[0])
    w1 = w[-1] + (1 - rho[-1]) * (w[-1] - w[-2]) / (rho[-1] - rho[-2])
    assert abs(w0) < 1e-6
    assert w1 == pytest.approx(math.pi / 2, abs=1e-6)


def test_angle_profile_of_negative_branch(solved):
    ang = to_angle(solved.negate())
    assert ang.w.values[0] == pytest.approx(math.pi, abs=1e-3)
    assert np.max(np.abs(np.cos(ang.w.values) + solved.y.values)) <= 1e-12


def test_to_angle_rejects_out_of_range(solved):
    bad = profile.ProfileSolution(
        y=solved.y.with_values(solved.y.values * 1.01), dy=solved.dy, c_shoot=solved.c_shoot,
        branch=1, residual_sup=0.0)
    with pytest.raises(ValueError):
        to_angle(bad)


def test_residual_duality(solved):
    h2 = solved.grid.spacing**2
    assert np.max(np.abs(solved.residual()[1:-1])) <= 100 * h2
    assert np.max(np.abs(to_angle(solved).residual()[1:-1])) <= 100 * h2


def test_steepest_slope(solved):
    dy = np.abs(solved.dy.values)
    k = int(np.argmax(dy))
    assert dy[k] == pytest.approx(profile.ORACLE_MAX_SLOPE, abs=1e-6)
    assert solved.rho[k] == pytest.approx(math.sqrt(5) / 3, abs=2e-4)


def test_offset_bounded_by_multiple_of_rho_squared(solved):
    # the structural claim z = O(rho^2); the sharp constant is 8/5, not 1
    z = solved.offset_values()
    ratio = np.abs(z) / solved.rho**2
    assert np.max(ratio) <= 1.6 + 1e-6
    assert ratio[0] == pytest.approx(1.6, abs=1e-4)


def test_oracle_profile_on_grid():
    from skyrmelab.radial_core import make_grid

    p = profile.oracle_profile(make_grid(512), branch=-1)
    assert p.branch == -1 and p.c_shoot == 1.6
    assert p.residual_sup <= 1e-12
