"""Initial data, forcing and closed-form reference solutions used by the CLI and tests."""
from __future__ import annotations

import numpy as np

from . import exterior as ext
from . import potentials as pot
from .exterior import GridForm
from .potentials import HeatParams, Trajectory


def taylor_green_u(n: int, N: int, L: float, t: float = 0.0, mu: float = 0.0) -> GridForm:
    """(sin x1 cos x2, -cos x1 sin x2, 0, ...) e^{-2 mu t}, a divergence-free 1-form."""
    x = ext.grid_coords(n, N, L)
    decay = np.exp(-2 * mu * t)
    comps = [np.sin(x[0]) * np.cos(x[1]) * decay, -np.cos(x[0]) * np.sin(x[1]) * decay]
    comps += [np.zeros(1)] * (n - 2)
    return GridForm.from_components(n, 1, N, L, comps)


def taylor_green_p(n: int, N: int, L: float, t: float, mu: float) -> np.ndarray:
    """Pressure of the Taylor-Green flow with zero mean."""
    x = ext.grid_coords(n, N, L)
    p = (np.cos(2 * x[0]) + np.cos(2 * x[1])) * np.exp(-4 * mu * t) / 4
    return np.broadcast_to(p, (N,) * n).copy()


def cole_hopf_profile(x: np.ndarray, t: float, mu: float, c: float = 0.8, speed: float = 1.5) -> np.ndarray:
    """Periodic solution U of U_t + speed U U_x = mu U_xx on [-pi, pi).

    With V = speed U, V_t + V V_x = mu V_xx and V = -2 mu phi_x / phi where
    phi = 1 + c cos(x) e^{-mu t} solves the heat equation.
    """
    e = c * np.exp(-mu * t)
    V = 2 * mu * e * np.sin(x) / (1 + e * np.cos(x))
    return V / speed


def cole_hopf_u(n: int, N: int, L: float, t: float, mu: float, c: float = 0.8) -> GridForm:
    """The 1-form (U(x1, t), 0, ...) evolved by the ps nonlinearity (any b)."""
    if not np.isclose(L, np.pi):
        raise ValueError("the Cole-Hopf reference lives on L = pi")
    x = ext.grid_coords(n, N, L)
    comps = [cole_hopf_profile(x[0], t, mu, c)] + [np.zeros(1)] * (n - 1)
    return GridForm.from_components(n, 1, N, L, comps)


def gaussian(n: int, q: int, N: int, L: float, sigma: float = 1.0, amplitude: float = 1.0,
             component: int = 0) -> GridForm:
    """amplitude * exp(-|x|^2 / (4 sigma)) in one component."""
    r2 = ext.radius(n, N, L) ** 2
    data = np.zeros((ext.n_components(n, q),) + (N,) * n)
    data[component] = amplitude * np.exp(-r2 / (4 * sigma))
    return GridForm(n, q, N, float(L), data)


def gaussian_exact(n: int, N: int, L: float, sigma: float, t: float, mu: float) -> np.ndarray:
    """Heat flow of exp(-|x|^2 / 4 sigma) on R^n."""
    r2 = ext.radius(n, N, L) ** 2
    s = sigma + mu * t
    return (sigma / s) ** (n / 2) * np.exp(-r2 / (4 * s))


def random_band_limited(n: int, q: int, N: int, L: float, seed: int = 0, kmax: int | None = None,
                        envelope: float | None = None) -> GridForm:
    """Random smooth q-form with Fourier support |k| < kmax pi/L (default N/4 - 1).

    With ``envelope`` set the field is multiplied by exp(-|x|^2 / envelope^2)
    so that it decays inside the box (no longer strictly band-limited).
    """
    rng = np.random.default_rng(seed)
    kmax = N // 4 - 1 if kmax is None else kmax
    raw = rng.standard_normal((ext.n_components(n, q),) + (N,) * n)
    hat = ext.fwd(raw, n)
    hat[..., ext.k_squared(n, N, L) > (kmax * np.pi / L) ** 2 + 1e-12] = 0
    data = ext.inv(hat, n, N)
    if envelope is not None:
        data = data * np.exp(-(ext.radius(n, N, L) / envelope) ** 2)
    data /= max(np.max(np.abs(data)), 1e-300)
    return GridForm(n, q, N, float(L), data)


def random_solenoidal(n: int, N: int, L: float, seed: int = 0, amplitude: float = 1.0,
                      envelope: float | None = None) -> GridForm:
    """Divergence-free 1-form: the Leray projection of a random (optionally windowed) field."""
    u = random_band_limited(n, 1, N, L, seed=seed, envelope=envelope)
    P = pot.leray_project(u)
    return P * (amplitude / max(P.sup(), 1e-300))


def zero_trajectory(n: int, q: int, N: int, L: float, heat: HeatParams) -> Trajectory:
    return Trajectory.zeros(n, q, N, L, heat)
