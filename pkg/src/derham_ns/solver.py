"""Mild fixed-point solver for the parabolic system

    du/dt - mu Lap u + N(u) + a dp = f,   a d*p = 0,   a d*u = 0,   u(0) = u0,

on trajectories sampled on a uniform time grid.  The equation is solved in
its integral form u + [P] Psi N(u) = v0 with v0 = [P](Psi f + Psi0 u0),
where Psi is the Duhamel potential, Psi0 the heat flow of the initial
datum and P the Leray projection (used only when a = 1).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import exterior as ext
from . import potentials as pot
from . import spaces
from .exterior import GridForm
from .nonlinearity import NonlinearitySpec, apply_B_array, apply_N_array
from .potentials import HeatParams, Trajectory
from .spaces import NormParams

DIV_TOL = 1e-8
MIN_THETA = 0.125


class Status(str, Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    BLOWUP = "BlowUpSuspected"


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    n: int
    q: int
    a: int
    heat: HeatParams
    nonlinearity: NonlinearitySpec
    N: int
    L: float
    u0: GridForm
    f: Trajectory | None = None
    norms: NormParams = field(default_factory=NormParams)
    tol: float = 1e-10
    max_iter: int = 200
    theta: float = 1.0
    blowup_threshold: float = 1e6
    metric: str = "proxy"
    periodic: bool = False
    linearize_at: Trajectory | None = None

    def __post_init__(self) -> None:
        if self.a not in (0, 1):
            raise ValueError("a must be 0 or 1")
        if not 0 <= self.q <= self.n:
            raise ValueError("q must lie in [0, n]")
        if self.a == 1 and not 1 <= self.q <= self.n - 1:
            raise ValueError("a = 1 requires 1 <= q <= n - 1")
        if (self.nonlinearity.n, self.nonlinearity.q) != (self.n, self.q):
            raise ValueError("nonlinearity was built for a different (n, q)")
        if (self.u0.n, self.u0.q, self.u0.N, self.u0.L) != (self.n, self.q, self.N, self.L):
            raise ValueError("u0 does not match (n, q, N, L)")
        if self.f is not None and (self.f.n, self.f.q, self.f.N, self.f.L, self.f.heat) != (
                self.n, self.q, self.N, self.L, self.heat):
            raise ValueError("f does not match the problem grid and time grid")
        if self.metric not in ("proxy", "sup"):
            raise ValueError("metric must be 'proxy' or 'sup'")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.a == 1:
            scale = self.u0.sup()
            div = ext.d_star(self.u0).sup()
            if div > DIV_TOL * max(scale, 1e-300) and scale > 0:
                raise ValueError(f"a = 1 needs d*u0 = 0, got |d*u0| / |u0| = {div / scale:.2e}")


@dataclass(frozen=True, eq=False)
class SolveResult:
    u: Trajectory
    p: Trajectory | None
    status: Status
    iterations: int
    final_change: float
    t_star: float | None
    history: list[dict]
    diagnostics: dict[str, np.ndarray]
    norms: dict[str, float]
    elapsed: float


# ---------------------------------------------------------------------------

def _project(spec: ProblemSpec, data: np.ndarray) -> np.ndarray:
    return pot.leray_array(data, spec.n, spec.q, spec.N, spec.L) if spec.a == 1 else data


def assemble_rhs(spec: ProblemSpec) -> Trajectory:
    """v0 = [P](Psi f + Psi0 u0)."""
    v = pot.poisson_potential(spec.u0, spec.heat, check_decay=not spec.periodic)
    data = v.data
    if spec.f is not None:
        data = data + pot.volume_potential(spec.f).data
    return v.with_data(_project(spec, data))


def _nonlinear(spec: ProblemSpec, data: np.ndarray) -> np.ndarray:
    if spec.linearize_at is not None:
        return apply_B_array(spec.nonlinearity, spec.linearize_at.data, data, spec.N, spec.L)
    return apply_N_array(spec.nonlinearity, data, spec.N, spec.L)


def fixed_point_map(spec: ProblemSpec, u: Trajectory) -> Trajectory:
    """u -> v0 - [P] Psi N(u) (v0 recomputed; prefer the solver for repeated calls)."""
    return _step(spec, assemble_rhs(spec), u.data)


def _step(spec: ProblemSpec, v0: Trajectory, data: np.ndarray) -> Trajectory:
    nl = _nonlinear(spec, data)
    g = pot.volume_potential(v0.with_data(nl)).data
    return v0.with_data(v0.data - _project(spec, g))


def _metric(spec: ProblemSpec, traj_data: np.ndarray, tau: float) -> float:
    if spec.metric == "sup" or traj_data.size == 0:
        return float(np.max(np.abs(traj_data))) if traj_data.size else 0.0
    p = spec.norms
    return spaces._aniso0(traj_data, p.lam, p.delta, tau, spec.n, spec.N, spec.L).total


def _blowup_time(spec: ProblemSpec, data: np.ndarray) -> float | None:
    flat = np.abs(data.reshape(data.shape[0], -1))
    bad = ~np.all(np.isfinite(flat), axis=1)
    with np.errstate(invalid="ignore"):
        bad |= np.nanmax(np.where(np.isfinite(flat), flat, 0.0), axis=1) > spec.blowup_threshold
    if not bad.any():
        return None
    return float(spec.heat.times[int(np.argmax(bad))])


def _div_ratio(spec: ProblemSpec, data: np.ndarray) -> float:
    if spec.a != 1:
        return 0.0
    ds = ext.d_star_array(data, spec.n, spec.q, spec.N, spec.L)
    num = np.max(np.abs(ds.reshape(ds.shape[0], -1)), axis=1)
    den = np.max(np.abs(data.reshape(data.shape[0], -1)), axis=1)
    ok = den > 0
    return float(np.max(num[ok] / den[ok])) if ok.any() else 0.0


def picard_solve(spec: ProblemSpec, initial: Trajectory | None = None) -> SolveResult:
    """Damped Picard iteration u <- (1 - theta) u + theta (v0 - [P] Psi N(u))."""
    start = time.perf_counter()
    v0 = assemble_rhs(spec)
    tau = spec.heat.tau
    u = v0.data.copy() if initial is None else _project(spec, np.array(initial.data, dtype=float))
    theta = spec.theta
    history: list[dict] = []
    status = Status.MAX_ITER
    change = np.inf
    t_star = None
    prev_res = np.inf
    it = 0
    for it in range(1, spec.max_iter + 1):
        t_star = _blowup_time(spec, u)
        if t_star is not None:
            status = Status.BLOWUP
            it -= 1
            break
        with np.errstate(over="ignore", invalid="ignore"):
            target = _step(spec, v0, u).data
        if not np.all(np.isfinite(target)):
            t_star = _blowup_time(spec, target)
            status = Status.BLOWUP
            break
        res = _metric(spec, u - target, tau)
        if res > prev_res and theta > MIN_THETA:
            theta = max(theta / 2, MIN_THETA)
        prev_res = res
        new = (1 - theta) * u + theta * target
        scale = _metric(spec, new, tau)
        diff = _metric(spec, new - u, tau)
        change = diff / scale if scale > 0 else diff
        u = new
        history.append({"iter": it, "residual": res / scale if scale > 0 else res, "change": change,
                        "theta": theta, "norm": scale, "div_ratio": _div_ratio(spec, u),
                        "sup": float(np.max(np.abs(u)))})
        if change <= spec.tol:
            status = Status.CONVERGED
            break
    if status is Status.BLOWUP:
        u = np.where(np.isfinite(u), u, np.nan)
    traj = v0.with_data(u)
    p = None
    diags: dict[str, np.ndarray] = {"t": spec.heat.times}
    norms: dict[str, float] = {}
    if status is not Status.BLOWUP:
        if spec.a == 1:
            p = recover_pressure(spec, traj)
        diags.update(energy_monitor(spec, traj))
        norms = _final_norms(spec, traj)
    else:
        diags["sup"] = np.max(np.abs(np.nan_to_num(u, nan=np.inf).reshape(spec.heat.nt, -1)), axis=1)
    return SolveResult(traj, p, status, it, float(change), t_star, history, diags, norms,
                       time.perf_counter() - start)


def _final_norms(spec: ProblemSpec, u: Trajectory) -> dict[str, float]:
    p = spec.norms
    out = {"proxy": _metric(spec, u.data, u.tau) if spec.metric == "proxy"
           else spaces._aniso0(u.data, p.lam, p.delta, u.tau, spec.n, spec.N, spec.L).total}
    if p.lam_prime is not None and u.nt >= 2 * p.s + 2:
        out.update({f"F:{k}": v for k, v in spaces.f_norm(u, p, check_decay=False).to_dict().items()})
    return out


# ---------------------------------------------------------------------------
# post-processing

def recover_pressure(spec: ProblemSpec, u: Trajectory) -> Trajectory:
    """p(t) with dp = (I - P)(f - N(u)) and d*p = 0, slice by slice."""
    if spec.a != 1:
        raise ValueError("pressure is only defined for a = 1")
    rhs = -_nonlinear(spec, u.data)
    if spec.f is not None:
        rhs = rhs + spec.f.data
    g = rhs - pot.leray_array(rhs, spec.n, spec.q, spec.N, spec.L)
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    dg = ext.d_array(g, spec.n, spec.q, spec.N, spec.L)
    if scale > 0 and dg.size and float(np.max(np.abs(dg))) > pot.NOT_CLOSED_TOL * scale:
        from .errors import NotClosed
        raise NotClosed("the gradient part of the momentum residual is not closed")
    p = pot.phi_inverse_d_array(g, spec.n, spec.q - 1, spec.N, spec.L)
    return u.with_data(p, q=spec.q - 1)


def _ip(a: np.ndarray, b: np.ndarray, n: int, h: float) -> np.ndarray:
    """Per-slice discrete L^2 pairing of (nt, m, ...) arrays."""
    return np.sum((a * b).reshape(a.shape[0], -1), axis=1) * h ** n


def energy_monitor(spec: ProblemSpec, u: Trajectory) -> dict[str, np.ndarray]:
    """Energy, dissipation and the residual of the energy identity on each slice.

    residual = |dE/dt + 2 D + 2 (N u, u) - 2 (f, u)| with E = |u|^2 and
    D = mu sum_j |d_j u|^2 (discrete L^2 norms, time derivative by second-order
    differences).  For a = 1 the pairing uses the projected nonlinearity.
    """
    n, h = spec.n, 2 * spec.L / spec.N
    data = u.data
    E = _ip(data, data, n, h)
    D = spec.heat.mu * _ip(data, -ext.laplacian_array(data, n, spec.N, spec.L), n, h)
    nl = _project(spec, _nonlinear(spec, data))
    pair = _ip(nl, data, n, h)
    forcing = _ip(spec.f.data, data, n, h) if spec.f is not None else np.zeros_like(E)
    dE = np.gradient(E, u.tau, edge_order=2)
    res = np.abs(dE + 2 * D + 2 * pair - 2 * forcing)
    wsup = np.array([spaces._sup_w(s, spec.norms.delta, n, spec.N, spec.L) for s in data])
    return {"energy": E, "dissipation": D, "nonlinear_pairing": pair, "energy_residual": res,
            "sup": np.max(np.abs(data.reshape(u.nt, -1)), axis=1), "weighted_sup": wsup}


def momentum_residual(spec: ProblemSpec, u: Trajectory, p: Trajectory | None = None) -> Trajectory:
    """du/dt - mu Lap u + N(u) + dp - f with second-order time differences."""
    res = pot.heat_residual(u, spec.f).data + _nonlinear(spec, u.data)
    if p is not None:
        res = res + ext.d_array(p.data, spec.n, spec.q - 1, spec.N, spec.L)
    return u.with_data(res)
