import numpy as np
import pytest

from derham_ns import exterior as ext
from derham_ns import radial, solver
from derham_ns.errors import MeshTooShort, NoBracket, StabilityViolation
from derham_ns.nonlinearity import builtin
from derham_ns.potentials import HeatParams
from derham_ns.radial import RadialProfile, gaussian_profile

# n = 5, gamma = 1, y_max = 20; bisection converged to 1e-13 relative
KAPPA_N5 = 38.00848662631644
C_N5 = 12.503269491421168


def test_rhs_zero_and_constant():
    z = RadialProfile.from_function(3, 10.0, 100, lambda r: 0 * r)
    assert np.all(radial.radial_rhs(z).values == 0)
    c = RadialProfile.from_function(4, 10.0, 100, lambda r: 0 * r + 0.5)
    # no derivatives, only the quadratic source (n+2) v^2 away from the Dirichlet end
    assert np.allclose(radial.radial_rhs(c).values[:-2], 6 * 0.25)


def rhs_error(n, nr):
    v = RadialProfile.from_function(n, 8.0, nr, gaussian_profile(0.7))
    r = v.r
    f = 0.7 * np.exp(-r * r)
    fr, frr = -2 * r * f, (4 * r * r - 2) * f
    with np.errstate(divide="ignore", invalid="ignore"):
        want = frr + np.where(r > 0, (n + 1) / r * fr, (n + 1) * frr) + (n + 2) * f * f + 3 * r * f * fr
    return np.max(np.abs(radial.radial_rhs(v).values - want)[:-1])


def test_rhs_second_order_against_analytic_derivatives():
    e = [rhs_error(3, nr) for nr in (400, 800, 1600)]
    assert e[-1] < 2e-4
    assert np.log2(e[0] / e[1]) > 1.9 and np.log2(e[1] / e[2]) > 1.9


def test_stability_violation():
    v = RadialProfile.from_function(3, 10.0, 200, gaussian_profile(1.0))
    limit = radial.max_stable_dt(3, v.dr, v.nr)
    assert limit <= 0.4 * v.dr ** 2 + 1e-15
    with pytest.raises(StabilityViolation):
        radial.radial_evolve(v, 0.1, 1.01 * limit)


def run(n, A, T, R=20.0, nr=800):
    v = RadialProfile.from_function(n, R, nr, gaussian_profile(A))
    return radial.radial_evolve(v, T, radial.max_stable_dt(n, v.dr, v.nr))


def test_n3_small_data_completes_and_decays():
    res = run(3, 1.0, 0.5)
    assert res.status == "Completed" and res.t_star is None
    assert res.max_v[-1] < res.max_v[0]


@pytest.mark.slow
def test_n5_sweep_blowup_time_decreases():
    ts = [run(5, A, 0.05).t_star for A in (40.0, 80.0, 160.0, 320.0)]
    assert all(t is not None for t in ts)
    assert all(b <= a for a, b in zip(ts, ts[1:]))


@pytest.mark.slow
def test_blowup_time_insensitive_to_outer_radius():
    a = run(5, 160.0, 0.05, R=20.0, nr=800).t_star
    b = run(5, 160.0, 0.05, R=40.0, nr=1600).t_star
    assert abs(a - b) <= 0.01 * a


def test_series_coefficient():
    assert radial.series_coefficient(1.0, 3.5, 5) == 0.0
    assert radial.series_coefficient(1.0, 1.0, 3, coeff=1.0) == pytest.approx((1 - 5) / 10)


def test_gamma_zero_gives_zero_profile():
    p = radial.selfsim_integrate(0.0, 2.0, 10.0)
    assert np.all(p.w == 0) and np.all(p.dw == 0) and p.c == 0.0


def ode_residual(profile, y):
    sol = profile._sol
    h = 1e-3
    dw = lambda s: sol.sol(s)[1]  # noqa: E731
    ddw = (8 * (dw(y + h) - dw(y - h)) - (dw(y + 2 * h) - dw(y - 2 * h))) / (12 * h)
    w, d1 = sol.sol(y)
    return radial.selfsim_residual(y, w, d1, ddw, profile.n, profile.kappa, profile.coeff)


@pytest.mark.parametrize("gamma,kappa,n", [(0.5, 3.0, 5), (1.0, 10.0, 3), (2.0, 1.0, 4)])
def test_integrated_profile_satisfies_ode(gamma, kappa, n):
    p = radial.selfsim_integrate(gamma, kappa, 3.0, n)
    y = np.linspace(0.1, min(p.y[-1], 3.0) - 0.01, 200)
    assert np.max(np.abs(ode_residual(p, y))) <= 1e-8 * max(1.0, np.max(np.abs(p.w)) ** 2)


@pytest.fixture(scope="module")
def shot():
    return radial.selfsim_shoot(1.0, 5, 20.0)


def test_shooting_reproduces_reference(shot):
    assert shot.kappa == pytest.approx(KAPPA_N5, rel=1e-10)
    assert shot.c == pytest.approx(C_N5, rel=1e-6)
    assert shot.matched and shot.residual < 1e-6
    assert shot.w[0] == pytest.approx(1.0, abs=1e-6)
    assert abs(shot.dw[0]) < 1e-2


def test_shot_profile_is_positive_with_quadratic_tail(shot):
    assert np.all(shot.w > 0)
    last = shot.y >= shot.y[-1] / 10
    tail = shot.y[last] ** 2 * shot.w[last]
    assert np.max(np.abs(tail - shot.c)) <= 0.05 * shot.c


def test_no_bracket():
    with pytest.raises(NoBracket):
        radial.selfsim_shoot(1.0, 5, 20.0, kappa_range=(1e-3, 1e-2), scan=5)
    with pytest.raises(ValueError):
        radial.selfsim_shoot(0.0, 5, 20.0)


def test_selfsim_v_solves_radial_equation(shot):
    T, t, dt = 1.0, 0.5, 1e-5
    s = 2 * shot.kappa * (T - t)
    r = np.linspace(0, 2 * np.sqrt(s), 1601)
    prof = lambda tt: RadialProfile(5, r[1], np.asarray(radial.selfsim_v(shot, r, tt, T)))  # noqa: E731
    vt = (prof(t + dt).values - prof(t - dt).values) / (2 * dt)
    rhs = radial.radial_rhs(prof(t)).values
    assert np.max(np.abs(vt - rhs)[:-1]) <= 1e-4 * np.max(np.abs(vt))


def test_lift_zero_and_gradient_structure():
    n, N, L = 3, 16, 3.0
    z = RadialProfile.from_function(n, np.sqrt(n) * L, 200, lambda r: 0 * r)
    assert radial.lift_radial(z, N, L).sup() == 0.0
    L = 6.0
    v = RadialProfile.from_function(n, np.sqrt(n) * L * 1.01, 4000, gaussian_profile(1.0))
    u = radial.lift_radial(v, 32, L)
    # -2 v(r) x is a gradient, so its exterior derivative vanishes
    assert ext.d(u).sup() <= 1e-6 * u.sup()
    with pytest.raises(MeshTooShort):
        radial.lift_radial(RadialProfile.from_function(n, L, 200, lambda r: 0 * r), N, L)


@pytest.mark.slow
def test_lift_then_solve_matches_radial_evolution():
    n, N, L, T = 3, 32, 6.0, 0.2
    v0 = RadialProfile.from_function(n, 12.0, 960, gaussian_profile(1.0))
    u0 = radial.lift_radial(v0, N, L)
    spec = solver.ProblemSpec(n, 1, 0, HeatParams(1.0, T, 21), builtin("ps", n, 1.0), N, L, u0, metric="sup",
                              tol=1e-10)
    res = solver.picard_solve(spec)
    assert res.status is solver.Status.CONVERGED
    rad = radial.radial_evolve(v0, T, radial.max_stable_dt(n, v0.dr, v0.nr)).final
    want = radial.lift_radial(rad, N, L).data
    inner = ext.radius(n, N, L) < 0.5 * L
    assert np.max(np.abs(res.u.data[-1] - want)[:, inner]) <= 1e-3 * np.max(np.abs(want))
