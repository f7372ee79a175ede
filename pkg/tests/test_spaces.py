import numpy as np
import pytest
from scipy import integrate

from derham_ns import cases, spaces
from derham_ns import exterior as ext
from derham_ns.errors import DecayViolation, TooFewTimeSlices
from derham_ns.exterior import GridForm
from derham_ns.potentials import HeatParams, Trajectory
from derham_ns.spaces import NormParams

# empirical embedding constants for the fixed 20-field family (seed 5, n=2, N=32, L=10),
# recorded at build time as max ratio |u|_low / |u|_high rounded up
EMBEDDING = {
    ((0, 0.5, 1.0), (1, 0.5, 1.0)): 0.21,
    ((0, 0.25, 0.5), (0, 0.5, 1.0)): 0.85,
    ((1, 0.5, 1.0), (2, 0.5, 1.5)): 0.064,
}


def gauss2(N=32, L=5.0):
    r2 = ext.radius(2, N, L) ** 2
    return GridForm(2, 0, N, L, np.exp(-r2)[None])


def test_weight():
    assert spaces.weight([0.0, 0.0]) == 1.0
    assert spaces.weight([1.0, 1.0, 1.0]) == pytest.approx(2.0)
    assert spaces.weight_pair(np.zeros(3), np.ones(3)) == pytest.approx(2.0)


def test_norm_params_validation():
    with pytest.raises(ValueError):
        NormParams(lam=0.0)
    with pytest.raises(ValueError):
        NormParams(lam=0.5, lam_prime=0.4)
    with pytest.raises(ValueError):
        NormParams(s=-1)


def test_report_total_is_sum():
    rep = spaces.hoelder_norm(gauss2(), NormParams(1, 0.5, 1.0))
    d = rep.to_dict()
    assert d["total"] == pytest.approx(sum(v for k, v in d.items() if k != "total"))
    assert all(v >= 0 for v in rep.terms.values())


def test_weighted_sup_zero_and_inverse_weight():
    z = GridForm.zeros(2, 0, 16, 3.0)
    assert spaces.weighted_sup_norm(z, NormParams(1, 0.5, 1.0)).total == 0.0
    delta = 1.5
    u = GridForm(2, 0, 32, 6.0, (spaces.grid_weight(2, 32, 6.0) ** -delta)[None])
    val = spaces.weighted_sup_norm(u, NormParams(0, 0.5, delta), check_decay=False).total
    assert abs(val - 1) <= 1e-3


def test_weighted_sup_gaussian_brute_force():
    L = 5.0
    val = spaces.weighted_sup_norm(gauss2(32, L), NormParams(0, 0.5, 2.0)).total
    # dense 10^6-point maximisation of (1 + r^2) exp(-r^2)
    x = np.linspace(-L, L, 1001)
    X, Y = np.meshgrid(x, x, indexing="ij")
    r2 = X ** 2 + Y ** 2
    oracle = np.max((1 + r2) * np.exp(-r2))
    assert abs(val - oracle) <= 1e-6


def test_seminorm_constant_and_gaussian_oracle():
    c = GridForm(2, 0, 16, 3.0, np.full((1, 16, 16), 2.0))
    assert spaces.holder_seminorm(c, 0.5, 1.0, check_decay=False) == 0.0

    u = gauss2(32, 5.0)
    lam, delta = 0.5, 1.0
    got = spaces.holder_seminorm(u, lam, delta)
    # brute force over all ordered grid pairs
    x = ext.axis_coords(32, 5.0)
    X = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    f = u.data.reshape(-1)
    w = np.sqrt(1 + np.sum(X * X, axis=1))
    rx = np.sqrt(np.sum(X * X, axis=1))
    best = 0.0
    for i in range(X.shape[0]):
        dist = np.sqrt(np.sum((X - X[i]) ** 2, axis=1))
        ok = (dist > 0) & (dist <= rx[i] / 2 + 1e-12)
        if ok.any():
            q = np.maximum(w[i], w[ok]) ** (delta + lam) * np.abs(f[i] - f[ok]) / dist[ok] ** lam
            best = max(best, q.max())
    assert abs(got - best) <= 1e-6 * best


def test_seminorm_monotone_in_lambda_on_short_pairs():
    u = gauss2(32, 5.0)
    ps = spaces.pair_set(2, 32, 5.0)
    short = ps.dist < 1.0
    f = u.data.reshape(-1)
    diff = np.abs(f[ps.ix[short]] - f[ps.iy[short]])
    vals = [np.max(ps.wxy[short] ** (1.0 + lam) * diff / ps.dist[short] ** lam)
            for lam in (0.05, 0.1, 0.25, 0.5, 0.75, 1.0)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert np.all(ps.dist <= np.linalg.norm(spaces._flat_points(2, 32, 5.0)[ps.ix], axis=1) / 2 + 1e-12)


def test_sampled_pair_set_for_larger_grids():
    ps = spaces.pair_set(3, 16, 4.0, samples=4096, seed=1)
    assert not ps.exhaustive and ps.ix.size > 0
    X = spaces._flat_points(3, 16, 4.0)
    d = np.linalg.norm(X[ps.ix] - X[ps.iy], axis=1)
    assert np.allclose(d, ps.dist)
    assert np.all((d > 0) & (d <= np.linalg.norm(X[ps.ix], axis=1) / 2 + 1e-12))
    again = spaces.pair_set.__wrapped__(3, 16, 4.0, samples=4096, seed=1)
    assert np.array_equal(ps.ix, again.ix) and np.array_equal(ps.iy, again.iy)


def test_decay_violation():
    u = cases.gaussian(2, 0, 16, 2.0, sigma=2.0)
    with pytest.raises(DecayViolation):
        spaces.hoelder_norm(u, NormParams())


def test_homogeneity_and_triangle():
    fam = spaces.random_decaying_family(2, 32, 10.0, 4, seed=3)
    p = NormParams(1, 0.5, 1.0)
    for u, v in zip(fam[::2], fam[1::2]):
        nu, nv = spaces.hoelder_norm(u, p).total, spaces.hoelder_norm(v, p).total
        assert spaces.hoelder_norm(u * -3.0, p).total == pytest.approx(3 * nu, rel=1e-12)
        assert spaces.hoelder_norm(u + v, p).total <= nu + nv + 1e-12


@pytest.mark.parametrize("pair", list(EMBEDDING))
def test_scale_monotonicity(pair):
    lo, hi = pair
    fam = spaces.random_decaying_family(2, 32, 10.0, 20, seed=5)
    ratios = [spaces.hoelder_norm(u, NormParams(*lo)).total / spaces.hoelder_norm(u, NormParams(*hi)).total
              for u in fam]
    assert max(ratios) <= EMBEDDING[pair]


def test_lp_norm_zero_and_bump_quadrature():
    assert spaces.lp_norm(GridForm.zeros(2, 1, 8, 1.0), 2.0) == 0.0
    N, L = 256, 1.5
    r = ext.radius(2, N, L)
    inside = r < 1
    bump = np.zeros_like(r)
    bump[inside] = np.exp(1 - 1 / (1 - r[inside] ** 2))
    u = GridForm(2, 0, N, L, bump[None])
    for p in (1.0, 2.0, 3.0):
        val, _ = integrate.quad(lambda s: np.exp(p * (1 - 1 / (1 - s * s))) * s, 0, 1, epsabs=1e-14, epsrel=1e-13)
        oracle = (2 * np.pi * val) ** (1 / p)
        assert abs(spaces.lp_norm(u, p) - oracle) <= 1e-6 * oracle


@pytest.mark.parametrize("delta,p", [(2.5, 1.0), (1.5, 2.0), (1.0, 4.0)])
def test_lp_bound_over_family(delta, p):
    # |u|_p <= |w^-delta|_p sup w^delta |u| whenever delta > n/p
    n, N, L = 2, 32, 10.0
    heat = HeatParams(1.0, 1.0, 3)
    c = spaces.weight_lp_constant(n, delta, p)
    for u in spaces.random_decaying_family(n, N, L, 20, seed=5):
        traj = Trajectory.from_slices([u, u * 0.5, u * 0.25], heat)
        top = spaces.sup_norm_T(traj, delta)
        for i in range(3):
            assert spaces.lp_norm(traj.slice(i), p) <= c * top
    with pytest.raises(ValueError):
        spaces.weight_lp_constant(2, 1.0, 2.0)


def test_weight_lp_constant_quadrature():
    n, delta, p = 3, 2.0, 2.0
    val, _ = integrate.quad(lambda r: (1 + r * r) ** (-delta * p / 2) * 4 * np.pi * r * r, 0, np.inf)
    assert spaces.weight_lp_constant(n, delta, p) == pytest.approx(val ** (1 / p), rel=1e-10)


def _traj(fn, nt=9, T=1.0, N=32, L=6.0):
    heat = HeatParams(1.0, T, nt)
    g = np.exp(-ext.radius(2, N, L) ** 2)
    return Trajectory.from_function(2, 0, N, L, heat, lambda xs, t: fn(g, t)[None]), g


def test_aniso_time_constant():
    tr, _ = _traj(lambda g, t: g)
    rep = spaces.aniso_norm(tr, NormParams(1, 0.5, 1.0))
    times = {k: v for k, v in rep.terms.items() if k.endswith("time")}
    assert times and max(times.values()) < 1e-12
    assert all(v < 1e-12 for k, v in rep.terms.items() if ",j=1]" in k)


def test_aniso_linear_in_time_quotient():
    T, lam, delta = 2.0, 0.5, 1.0
    tr, g = _traj(lambda g, t: g * t, T=T)
    rep = spaces.aniso_norm(tr, NormParams(0, lam, delta))
    want = np.max(spaces.grid_weight(2, 32, 6.0) ** delta * np.abs(g)) * T ** (1 - lam / 2)
    assert rep.terms["[a=00,j=0]time"] == pytest.approx(want, rel=1e-12)


def test_aniso_needs_enough_slices():
    tr, _ = _traj(lambda g, t: g, nt=3)
    with pytest.raises(TooFewTimeSlices):
        spaces.aniso_norm(tr, NormParams(1, 0.5, 0.0))


def test_f_norm_is_additive():
    tr, _ = _traj(lambda g, t: g * np.cos(t))
    p = NormParams(0, 0.3, 1.0, lam_prime=0.6, k=1)
    rep = spaces.f_norm(tr, p)
    a = spaces.aniso_k_norm(tr, 2, 0, 0.3, 1.0).total
    b = spaces.aniso_k_norm(tr, 1, 0, 0.6, 1.0).total
    assert rep.total == pytest.approx(a + b, rel=1e-14)
    assert any(k.startswith("lam':") for k in rep.terms) and any(k.startswith("lam:") for k in rep.terms)
    with pytest.raises(ValueError):
        spaces.f_norm(tr, NormParams(0, 0.3, 1.0))


def test_product_lemma_family():
    from derham_ns.verify import PRODUCT_CONSTANT, product_family_ratio

    assert product_family_ratio() <= PRODUCT_CONSTANT
