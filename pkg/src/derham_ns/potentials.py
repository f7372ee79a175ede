"""Heat and Newton potentials, the Leray projection and the inverse of d.

Every kernel operator is a Fourier multiplier on the periodic box.  The
pointwise kernels (heat kernel, Newton kernel) are kept for quadrature
cross-checks.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import exterior as ext
from .errors import GridMismatch, NotClosed, SingularPoint, ZeroModeLoss
from .exterior import GridForm

NOT_CLOSED_TOL = 1e-8
ZERO_MODE_TOL = 1e-10


@dataclass(frozen=True)
class HeatParams:
    mu: float
    T: float
    nt: int

    def __post_init__(self) -> None:
        if not self.mu > 0 or not self.T > 0:
            raise ValueError("mu and T must be positive")
        if self.nt < 2:
            raise ValueError("need at least two time slices")

    @property
    def tau(self) -> float:
        return self.T / (self.nt - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """nt slices of a q-form on one grid; ``data`` has shape (nt, m, N, ..., N)."""

    n: int
    q: int
    N: int
    L: float
    heat: HeatParams
    data: np.ndarray

    def __post_init__(self) -> None:
        shape = (self.heat.nt, ext.n_components(self.n, self.q)) + (self.N,) * self.n
        if self.data.shape != shape:
            raise ValueError(f"trajectory shape {self.data.shape} != expected {shape}")

    @classmethod
    def zeros(cls, n: int, q: int, N: int, L: float, heat: HeatParams) -> "Trajectory":
        shape = (heat.nt, ext.n_components(n, q)) + (N,) * n
        return cls(n, q, N, float(L), heat, np.zeros(shape))

    @classmethod
    def from_slices(cls, slices: list[GridForm], heat: HeatParams) -> "Trajectory":
        first = slices[0]
        for s in slices:
            if not s.same_grid(first) or s.q != first.q:
                raise GridMismatch("slices must share grid and degree")
        return cls(first.n, first.q, first.N, first.L, heat, np.stack([s.data for s in slices]))

    @classmethod
    def from_function(cls, n: int, q: int, N: int, L: float, heat: HeatParams,
                      fn: Callable[[list[np.ndarray], float], np.ndarray]) -> "Trajectory":
        xs = ext.grid_coords(n, N, L)
        shape = (ext.n_components(n, q),) + (N,) * n
        data = np.stack([np.broadcast_to(fn(xs, t), shape) for t in heat.times])
        return cls(n, q, N, float(L), heat, data.copy())

    @property
    def nt(self) -> int:
        return self.heat.nt

    @property
    def tau(self) -> float:
        return self.heat.tau

    @property
    def times(self) -> np.ndarray:
        return self.heat.times

    def slice(self, i: int) -> GridForm:
        return GridForm(self.n, self.q, self.N, self.L, self.data[i])

    def with_data(self, data: np.ndarray, q: int | None = None) -> "Trajectory":
        return Trajectory(self.n, self.q if q is None else q, self.N, self.L, self.heat, data)

    def sup(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def slice_sups(self) -> np.ndarray:
        return np.max(np.abs(self.data.reshape(self.nt, -1)), axis=1) if self.data.size else np.zeros(self.nt)


FormLike = Union[GridForm, Trajectory]


# ---------------------------------------------------------------------------
# pointwise kernels

def heat_kernel_eval(x, t: float, mu: float) -> np.ndarray | float:
    """(4 pi mu t)^{-n/2} exp(-|x|^2 / 4 mu t) for t > 0, zero for t <= 0."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if t <= 0:
        return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
    r2 = np.sum(x * x, axis=-1)
    val = (4 * np.pi * mu * t) ** (-n / 2) * np.exp(-r2 / (4 * mu * t))
    return val if x.ndim > 1 else float(val)


def sphere_area(n: int) -> float:
    return 2 * np.pi ** (n / 2) / math.gamma(n / 2)


def newton_kernel_eval(x, n: int | None = None) -> np.ndarray | float:
    """Fundamental solution e of the Laplacian, normalised so that Laplacian(e) = delta."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] if n is None else n
    r = np.sqrt(np.sum(x * x, axis=-1))
    if np.any(r == 0):
        raise SingularPoint("the Newton kernel is singular at the origin")
    if n == 2:
        val = np.log(r) / (2 * np.pi)
    else:
        val = r ** (2 - n) / (sphere_area(n) * (2 - n))
    return val if np.ndim(val) else float(val)


# ---------------------------------------------------------------------------
# heat potentials

def heat_semigroup(u: GridForm, t: float, mu: float) -> GridForm:
    """e^{mu t Laplacian} u as the multiplier exp(-mu |k|^2 t)."""
    if t == 0:
        return u.with_data(u.data.copy())
    mult = np.exp(-mu * t * ext.k_squared(u.n, u.N, u.L))
    return u.with_data(ext.inv(mult * ext.fwd(u.data, u.n), u.n, u.N))


def poisson_potential(u0: GridForm, heat: HeatParams, check_decay: bool = True) -> Trajectory:
    """Heat flow of the initial datum sampled on the time grid; slice 0 is u0 itself."""
    if check_decay:
        ext.check_decay(u0)
    hat = ext.fwd(u0.data, u0.n)
    k2 = ext.k_squared(u0.n, u0.N, u0.L)
    out = np.empty((heat.nt,) + u0.data.shape)
    out[0] = u0.data
    for i, t in enumerate(heat.times[1:], start=1):
        out[i] = ext.inv(np.exp(-heat.mu * t * k2) * hat, u0.n, u0.N)
    return Trajectory(u0.n, u0.q, u0.N, u0.L, heat, out)


def volume_potential(f: Trajectory) -> Trajectory:
    """Duhamel integral of f by the trapezoid rule on the slice grid.

    u_m = E u_{m-1} + tau/2 (E f_{m-1} + f_m) with E = e^{mu tau Laplacian}, u_0 = 0.
    """
    n, N = f.n, f.N
    E = np.exp(-f.heat.mu * f.tau * ext.k_squared(n, N, f.L))
    half = f.tau / 2
    out = np.empty_like(f.data)
    out[0] = 0.0
    acc = np.zeros(f.data.shape[1:-1] + (N // 2 + 1,), dtype=complex)
    prev = ext.fwd(f.data[0], n)
    for m in range(1, f.nt):
        cur = ext.fwd(f.data[m], n)
        acc = E * (acc + half * prev) + half * cur
        out[m] = ext.inv(acc, n, N)
        prev = cur
    return f.with_data(out)


def heat_residual(u: Trajectory, f: Trajectory | None = None) -> Trajectory:
    """H_mu u - f with second-order time differences (both ends one-sided)."""
    dt = np.gradient(u.data, u.tau, axis=0, edge_order=2)
    res = dt - u.heat.mu * ext.laplacian_array(u.data, u.n, u.N, u.L)
    if f is not None:
        res = res - f.data
    return u.with_data(res)


# ---------------------------------------------------------------------------
# Leray projection and the inverse of d

def leray_array(data: np.ndarray, n: int, q: int, N: int, L: float) -> np.ndarray:
    """Projection onto ker d* along range d: symbol d* d / |k|^2; modes with |k| = 0 pass."""
    hat = ext.fwd(data, n)
    k2 = ext.k_squared(n, N, L, zero_nyquist=True)
    zero = k2 == 0
    safe = np.where(zero, 1.0, k2)
    proj = ext.d_star_hat(ext.d_hat(hat, n, q, N, L), n, q + 1, N, L) / safe
    proj = np.where(zero, hat, proj)
    return ext.inv(proj, n, N)


def leray_project(u: FormLike) -> FormLike:
    """Leray-Helmholtz projection of a form or a whole trajectory (slice-wise)."""
    return u.with_data(leray_array(u.data, u.n, u.q, u.N, u.L))


def phi_inverse_d_array(data: np.ndarray, n: int, q: int, N: int, L: float) -> np.ndarray:
    """Co-closed potential of a closed (q+1)-form array (no checks)."""
    hat = ext.fwd(data, n)
    k2 = ext.k_squared(n, N, L, zero_nyquist=True)
    safe = np.where(k2 == 0, 1.0, k2)
    out = ext.d_star_hat(hat, n, q + 1, N, L) / safe
    return ext.inv(out, n, N)


def phi_inverse_d(g: GridForm) -> GridForm:
    """The co-closed q-form u with du = g, for a closed (q+1)-form g."""
    if g.q < 1:
        raise ValueError("phi_inverse_d needs a form of degree >= 1")
    scale = g.sup()
    if scale == 0.0:
        return GridForm.zeros(g.n, g.q - 1, g.N, g.L)
    dg = ext.d_array(g.data, g.n, g.q, g.N, g.L)
    if dg.size and float(np.max(np.abs(dg))) > NOT_CLOSED_TOL * scale:
        raise NotClosed(f"|dg| = {np.max(np.abs(dg)):.3e} exceeds {NOT_CLOSED_TOL:.0e} * |g|")
    mean = np.abs(g.data.reshape(g.m, -1).mean(axis=1))
    if np.max(mean) > ZERO_MODE_TOL:
        warnings.warn(f"nonzero mean {np.max(mean):.3e} cannot be reached by d and is dropped",
                      ZeroModeLoss, stacklevel=2)
    return g.with_data(phi_inverse_d_array(g.data, g.n, g.q - 1, g.N, g.L), q=g.q - 1)
