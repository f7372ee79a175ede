"""Radial reduction of the ps system and its self-similar profiles.

For the 1-form u = -2 v(|x|, t) x the ps nonlinearity (any b) turns the
a = 0 system with f = 0 into the scalar equation

    v_t = v_rr + (n+1)/r v_r + (n+2) v^2 + 3 r v v_r,

and the ansatz v = w(y) / s, s = 2 kappa (T - t), y = r / sqrt(s) gives

    w'' + (n+1)/y w' - kappa y w' + (n+2) w^2 + 3 y w w' - c kappa w = 0

with c = 2 (the value consistent with the ansatz; other values can be set
through ``coeff``).  The radial PDE lives on the node mesh r_i = i dr,
i = 0..nr, including the origin, with v = 0 at r = R.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import exterior as ext
from .errors import MeshTooShort, NoBracket, StabilityViolation
from .exterior import GridForm

BLOWUP_LEVEL = 1e8
DT_FACTOR = 0.4
RK4_REAL_LIMIT = 2.78  # RK4 stability interval on the negative real axis is about [-2.785, 0]
Y0 = 1e-4


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Samples v(r_i) on r_i = i dr, i = 0..nr (r_0 = 0, r_nr = R)."""

    n: int
    dr: float
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.values.ndim != 1 or self.values.size < 17:
            raise ValueError("a radial profile needs at least 16 cells")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("radial profile values must be finite")

    @classmethod
    def from_function(cls, n: int, R: float, nr: int, fn, t: float = 0.0) -> "RadialProfile":
        dr = R / nr
        r = dr * np.arange(nr + 1)
        return cls(n, dr, np.asarray(fn(r), dtype=float), t)

    @property
    def nr(self) -> int:
        return self.values.size - 1

    @property
    def R(self) -> float:
        return self.dr * self.nr

    @property
    def r(self) -> np.ndarray:
        return self.dr * np.arange(self.nr + 1)

    def with_values(self, values: np.ndarray, t: float | None = None) -> "RadialProfile":
        return RadialProfile(self.n, self.dr, values, self.t if t is None else t)


def power_profile(A: float):
    return lambda r: A / (1 + r * r) ** 3


def gaussian_profile(A: float, width: float = 1.0):
    return lambda r: A * np.exp(-(r / width) ** 2)


# ---------------------------------------------------------------------------
# radial PDE

def _rhs_values(v: np.ndarray, n: int, dr: float) -> np.ndarray:
    out = np.zeros_like(v)
    # origin: (n+1) v_r / r -> (n+1) v''(0), v''(0) from the even extension v_{-1} = v_1
    out[0] = (n + 2) * 2 * (v[1] - v[0]) / dr ** 2 + (n + 2) * v[0] ** 2
    r = dr * np.arange(1, v.size - 1)
    vm, vc, vp = v[:-2], v[1:-1], v[2:]
    vr = (vp - vm) / (2 * dr)
    vrr = (vp - 2 * vc + vm) / dr ** 2
    out[1:-1] = vrr + (n + 1) / r * vr + (n + 2) * vc ** 2 + 3 * r * vc * vr
    out[-1] = 0.0  # Dirichlet at R
    return out


def radial_rhs(v: RadialProfile) -> RadialProfile:
    """Time derivative of the radial equation by centred second-order differences."""
    return v.with_values(_rhs_values(v.values, v.n, v.dr))


@lru_cache(maxsize=None)
def _stiffness(n: int, nr: int) -> float:
    """Spectral radius of the linear part times dr^2 (it depends on n and nr only)."""
    m = min(nr, 400)
    A = np.zeros((m, m))
    A[0, 0], A[0, 1] = -2 * (n + 2), 2 * (n + 2)
    for i in range(1, m):
        A[i, i] = -2.0
        A[i, i - 1] = 1 - (n + 1) / (2 * i)
        if i + 1 < m:
            A[i, i + 1] = 1 + (n + 1) / (2 * i)
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def max_stable_dt(n: int, dr: float, nr: int) -> float:
    """Largest admissible step: dt <= 0.4 dr^2 and inside the RK4 stability interval."""
    return min(DT_FACTOR, RK4_REAL_LIMIT / _stiffness(n, nr)) * dr ** 2


@dataclass(frozen=True, eq=False)
class RadialRun:
    status: str  # "Completed" or "BlowUp"
    t_star: float | None
    times: np.ndarray
    max_v: np.ndarray
    snapshots: list[RadialProfile] = field(default_factory=list)

    @property
    def final(self) -> RadialProfile:
        return self.snapshots[-1]


def _nonlinear_dt(v: np.ndarray, n: int, dr: float, cfl: float) -> float:
    """Step bound from the quadratic terms: advection speed 3 r |v| and growth rate 2 (n+2) |v|."""
    r = dr * np.arange(v.size)
    speed = float(np.max(3 * r * np.abs(v)))
    rate = 2 * (n + 2) * float(np.max(np.abs(v)))
    bound = np.inf
    if speed > 0:
        bound = min(bound, cfl * dr / speed)
    if rate > 0:
        bound = min(bound, cfl / rate)
    return bound


def radial_evolve(v0: RadialProfile, T: float, dt: float, snapshot_every: float | None = None,
                  blowup_level: float = BLOWUP_LEVEL, cfl: float = 0.5) -> RadialRun:
    """Classical RK4 march of the radial equation up to T or until max|v| > blowup_level.

    ``dt`` is the largest step.  Steps shrink when the quadratic terms demand
    it (advection CFL and growth rate, scaled by ``cfl``), so a growing
    solution is followed up to the blow-up level instead of being destroyed
    by an explicit-step instability.
    """
    limit = max_stable_dt(v0.n, v0.dr, v0.nr)
    if dt > limit * (1 + 1e-12):
        raise StabilityViolation(f"dt = {dt:.3e} exceeds the explicit limit {limit:.3e} "
                                 f"({limit / v0.dr ** 2:.3f} dr^2)")
    n, dr = v0.n, v0.dr
    f = lambda v: _rhs_values(v, n, dr)  # noqa: E731
    v = v0.values.copy()
    v[-1] = 0.0
    times, maxv = [0.0], [float(np.max(np.abs(v)))]
    snaps = [v0.with_values(v.copy(), t=0.0)]
    next_snap = snapshot_every if snapshot_every else T
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        while t < T * (1 - 1e-14):
            h = min(dt, _nonlinear_dt(v, n, dr, cfl), T - t, max(next_snap - t, 0.0) or dt)
            k1 = f(v)
            k2 = f(v + 0.5 * h * k1)
            k3 = f(v + 0.5 * h * k2)
            k4 = f(v + h * k3)
            v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
            top = float(np.max(np.abs(v)))
            if not np.isfinite(top) or top > blowup_level:
                times.append(t)
                maxv.append(top if np.isfinite(top) else np.inf)
                return RadialRun("BlowUp", t, np.array(times), np.array(maxv), snaps)
            if t >= next_snap * (1 - 1e-12) or t >= T * (1 - 1e-14):
                times.append(t)
                maxv.append(top)
                snaps.append(v0.with_values(v.copy(), t=t))
                next_snap += snapshot_every if snapshot_every else T
    return RadialRun("Completed", None, np.array(times), np.array(maxv), snaps)


# ---------------------------------------------------------------------------
# self-similar ODE

@dataclass(frozen=True, eq=False)
class SelfSimilarProfile:
    n: int
    gamma: float
    kappa: float
    y: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    c: float
    matched: bool = False
    residual: float = float("nan")
    flag: str = "ok"
    coeff: float = 2.0
    y_match: float | None = None

    def value(self, y) -> np.ndarray:
        """w at arbitrary points by cubic Hermite interpolation (w = gamma below the first node)."""
        from scipy.interpolate import CubicHermiteSpline

        spline = CubicHermiteSpline(np.r_[0.0, self.y], np.r_[self.gamma, self.w], np.r_[0.0, self.dw])
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(y <= self.y[-1], spline(np.minimum(y, self.y[-1])), self.c / np.maximum(y, 1e-300) ** 2)


def series_coefficient(gamma: float, kappa: float, n: int, coeff: float = 2.0) -> float:
    """a in w = gamma + a y^2 + O(y^4) near the origin."""
    return (coeff * kappa * gamma - (n + 2) * gamma ** 2) / (2 * (n + 2))


def selfsim_ode(y: float, state, n: int, kappa: float, coeff: float = 2.0):
    w, dw = state
    ddw = -((n + 1) / y - kappa * y + 3 * y * w) * dw - (n + 2) * w * w + coeff * kappa * w
    return [dw, ddw]


def selfsim_residual(y, w, dw, ddw, n: int, kappa: float, coeff: float = 2.0) -> np.ndarray:
    y, w, dw, ddw = map(np.asarray, (y, w, dw, ddw))
    return ddw + ((n + 1) / y - kappa * y + 3 * y * w) * dw + (n + 2) * w * w - coeff * kappa * w


def _start(gamma: float, kappa: float, n: int, coeff: float, y0: float = Y0) -> list[float]:
    a = series_coefficient(gamma, kappa, n, coeff)
    return [gamma + a * y0 ** 2, 2 * a * y0]


OVERFLOW = 1e6


def _events(track: bool):
    def overflow(y, s, *args):
        return OVERFLOW - abs(s[0])
    overflow.terminal = True
    evs = [overflow]
    if track:
        def crossing(y, s, *args):
            return s[0]
        crossing.terminal = True
        crossing.direction = -1

        def minimum(y, s, *args):
            return s[1]
        minimum.terminal = True
        minimum.direction = 1
        evs += [crossing, minimum]
    return evs


def selfsim_integrate(gamma: float, kappa: float, y_max: float, n: int = 5, coeff: float = 2.0,
                      rtol: float = 1e-11, atol: float = 1e-13, y_eval: np.ndarray | None = None,
                      track: bool = False, max_step: float = np.inf) -> SelfSimilarProfile:
    """Forward integration from y0 = 1e-4 with the series start; stops on overflow.

    ``flag`` is "ok", "overflow", or with ``track=True`` also "crossing" (w hits
    zero) and "minimum" (w' turns positive).
    """
    if gamma < 0 or kappa <= 0:
        raise ValueError("need gamma >= 0 and kappa > 0")
    if gamma == 0:
        y = np.linspace(Y0, y_max, 64) if y_eval is None else y_eval
        z = np.zeros_like(y)
        return SelfSimilarProfile(n, 0.0, kappa, y, z, z.copy(), 0.0, True, 0.0, "ok", coeff)
    sol = solve_ivp(selfsim_ode, (Y0, y_max), _start(gamma, kappa, n, coeff), method="DOP853",
                    rtol=rtol, atol=atol, args=(n, kappa, coeff), events=_events(track),
                    dense_output=True, max_step=max_step)
    flag = "ok"
    names = ["overflow", "crossing", "minimum"]
    for name, ev in zip(names, sol.t_events):
        if len(ev):
            flag = name
            break
    y_end = sol.t[-1]
    if y_eval is None:
        y = sol.t
        ws, dws = sol.y
    else:
        y = y_eval[y_eval <= y_end]
        ws, dws = sol.sol(y)
    c = float(y[-1] ** 2 * ws[-1]) if y.size else float("nan")
    prof = SelfSimilarProfile(n, gamma, kappa, np.asarray(y), np.asarray(ws), np.asarray(dws), c,
                              False, float("nan"), flag, coeff)
    object.__setattr__(prof, "_sol", sol)
    return prof


def _classify(gamma: float, kappa: float, n: int, y_max: float, coeff: float) -> str:
    """'down' if w reaches zero first, 'up' if it turns upward, overflows or ends with F > 0."""
    p = selfsim_integrate(gamma, kappa, y_max, n, coeff, track=True)
    if p.flag == "crossing":
        return "down"
    if p.flag in ("minimum", "overflow"):
        return "up"
    y, w, dw = p.y[-1], p.w[-1], p.dw[-1]
    return "up" if y ** 3 * dw + 2 * y ** 2 * w > 0 else "down"


def _asymptotic(y: float, c: float, n: int, kappa: float, coeff: float) -> list[float]:
    """Two-term tail w = c y^-2 + d y^-4 of the decaying branch (coeff = 2)."""
    d = ((2 * n - 4) * c - (n - 4) * c * c) / (2 * kappa) if coeff == 2.0 else 0.0
    return [c / y ** 2 + d / y ** 4, -2 * c / y ** 3 - 4 * d / y ** 5]


def _tail(c: float, y_m: float, y_max: float, n: int, kappa: float, coeff: float, y_eval=None):
    return solve_ivp(selfsim_ode, (y_max, y_m), _asymptotic(y_max, c, n, kappa, coeff), method="DOP853",
                     rtol=1e-11, atol=1e-14, args=(n, kappa, coeff), dense_output=True,
                     t_eval=y_eval)


def selfsim_shoot(gamma: float, n: int, y_max: float, coeff: float = 2.0,
                  kappa_range: tuple[float, float] = (1e-3, 1e3), scan: int = 61,
                  rel_tol: float = 1e-13, points: int = 2001, match_tol: float = 1e-3) -> SelfSimilarProfile:
    """Find kappa with w(0) = gamma, w'(0) = 0 and algebraic decay of w.

    kappa is bisected between the branch whose profile turns upward (the
    growing far-field mode, F = y^3 w' + 2 y^2 w > 0) and the branch whose
    profile crosses zero.  Forward integration can only follow the decaying
    branch up to a moderate y, so beyond the point y_m where the two
    bracketing profiles separate, the profile is continued by integrating
    backward from y_max from the two-term tail c y^-2 + d y^-4, with c fixed
    by continuity of w at y_m.  The mismatch of w' at y_m is reported as
    ``residual`` (relative).
    """
    if gamma <= 0:
        raise ValueError("shooting needs gamma > 0")
    ks = np.geomspace(*kappa_range, scan)
    cls = [_classify(gamma, k, n, y_max, coeff) for k in ks]
    lo = hi = None
    for i in range(scan - 1):
        if cls[i] != cls[i + 1]:
            lo, hi = ks[i], ks[i + 1]
            lo_cls = cls[i]
            break
    if lo is None:
        raise NoBracket(f"no change of branch for kappa in {kappa_range}")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _classify(gamma, mid, n, y_max, coeff) == lo_cls:
            lo = mid
        else:
            hi = mid
    kappa = 0.5 * (lo + hi)

    a = selfsim_integrate(gamma, lo, y_max, n, coeff, track=True)
    b = selfsim_integrate(gamma, hi, y_max, n, coeff, track=True)
    y_common = np.linspace(Y0, min(a.y[-1], b.y[-1]), 4001)
    wa = a._sol.sol(y_common)[0]
    wb = b._sol.sol(y_common)[0]
    sep = np.abs(wa - wb) > 1e-7 * np.maximum(np.abs(wa), 1e-300)
    i_sep = int(np.argmax(sep)) if sep.any() else y_common.size - 1
    # back off to where the forward solution is still trustworthy
    y_m = y_common[max(1, int(0.8 * i_sep))]
    fwd = selfsim_integrate(gamma, kappa, y_m, n, coeff, track=False)
    w_m, dw_m = fwd._sol.sol(y_m)

    def mismatch(c):
        return _tail(c, y_m, y_max, n, kappa, coeff).y[0, -1] - w_m

    c_guess = y_m ** 2 * w_m
    lo_c, hi_c = 0.5 * c_guess, 2.0 * c_guess
    for _ in range(40):
        if mismatch(lo_c) * mismatch(hi_c) < 0:
            break
        lo_c, hi_c = lo_c / 1.5, hi_c * 1.5
    c = brentq(mismatch, lo_c, hi_c, xtol=1e-14, rtol=1e-13)
    tail = _tail(c, y_m, y_max, n, kappa, coeff)
    dw_tail = tail.y[1, -1]
    residual = abs(dw_tail - dw_m) / max(abs(dw_m), 1e-300)

    y = np.geomspace(Y0, y_max, points)
    left = y <= y_m
    w = np.empty_like(y)
    dw = np.empty_like(y)
    w[left], dw[left] = fwd._sol.sol(y[left])
    w[~left], dw[~left] = tail.sol(y[~left])
    c_end = float(y[-1] ** 2 * w[-1])
    return SelfSimilarProfile(n, gamma, kappa, y, w, dw, c_end, residual <= match_tol, float(residual),
                              "ok", coeff, float(y_m))


selsim_shoot = selfsim_shoot


def selfsim_v(profile: SelfSimilarProfile, r, t: float, T: float):
    """v(r, t) = w(r / sqrt(s)) / s with s = 2 kappa (T - t)."""
    s = 2 * profile.kappa * (T - t)
    return profile.value(np.asarray(r) / np.sqrt(s)) / s


# ---------------------------------------------------------------------------
# lifting to the grid

def _window(n: int, N: int, L: float, start: float = 0.75, stop: float = 0.95) -> np.ndarray:
    """Smooth product window: 1 for |x_j| <= start L, 0 for |x_j| >= stop L."""
    def step(s):
        s = np.clip(s, 0.0, 1.0)
        a = np.where(s > 0, np.exp(-1 / np.maximum(s, 1e-300)), 0.0)
        b = np.where(s < 1, np.exp(-1 / np.maximum(1 - s, 1e-300)), 0.0)
        return b / (a + b)
    out = np.ones((N,) * n)
    for x in ext.grid_coords(n, N, L):
        out = out * step((np.abs(x) - start * L) / ((stop - start) * L))
    return out


def lift_radial(v: RadialProfile, N: int, L: float, window: bool = True) -> GridForm:
    """The 1-form u_i = -2 v(|x|) x_i sampled on the grid, optionally window-damped near the box edge."""
    if v.R < math.sqrt(v.n) * L * (1 - 1e-12):
        raise MeshTooShort(f"radial mesh R = {v.R} must reach the box corner sqrt(n) L = {math.sqrt(v.n) * L}")
    spline = CubicSpline(v.r, v.values, bc_type=((1, 0.0), "not-a-knot"))
    rr = ext.radius(v.n, N, L)
    vals = spline(rr)
    if window:
        vals = vals * _window(v.n, N, L)
    comps = [-2 * vals * x for x in ext.grid_coords(v.n, N, L)]
    return GridForm.from_components(v.n, 1, N, L, comps)
