"""Discrete estimators for weighted Hölder norms on the grid.

The weight is ``w(x) = sqrt(1 + |x|^2)`` and ``w(x, y) = max(w(x), w(y))``.
Suprema over R^n are replaced by maxima over grid points (or sampled pairs
of grid points for the Hölder seminorm).  Fields living on the periodic box
are assumed to emulate decaying fields on R^n; the estimators refuse fields
that are not small near the box boundary unless ``check_decay=False``.

Vector valued fields (forms) are handled componentwise: every sup is taken
over components as well as points.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import qmc

from . import exterior as ext
from .errors import DecayViolation, TooFewTimeSlices

if TYPE_CHECKING:
    from .potentials import Trajectory

# radius of the ball U around the origin where the classical Hölder norm is taken
U_RADIUS = 0.5
SOBOL_PAIRS = 100_000
DECAY_TOL = 1e-6


@dataclass(frozen=True)
class NormParams:
    s: int = 0
    lam: float = 0.5
    delta: float = 0.0
    lam_prime: float | None = None
    k: int = 0

    def __post_init__(self) -> None:
        if self.s < 0 or self.k < 0:
            raise ValueError("s and k must be nonnegative")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")
        if self.lam_prime is not None and not self.lam < self.lam_prime < 1.0:
            raise ValueError("lambda' must satisfy lambda < lambda' < 1")


@dataclass
class NormReport:
    """Named nonnegative terms of a norm; ``total`` is their sum."""

    terms: dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.terms.values()))

    def add(self, key: str, value: float) -> None:
        self.terms[key] = self.terms.get(key, 0.0) + float(value)

    def merge(self, other: "NormReport", prefix: str) -> None:
        for key, value in other.terms.items():
            self.add(f"{prefix}{key}", value)

    def to_dict(self) -> dict[str, float]:
        out = dict(self.terms)
        out["total"] = self.total
        return out


def weight(x) -> np.ndarray | float:
    """w(x) for points stacked along the last axis."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + np.sum(x * x, axis=-1))


def weight_pair(x, y):
    return np.maximum(weight(x), weight(y))


@lru_cache(maxsize=None)
def grid_weight(n: int, N: int, L: float) -> np.ndarray:
    w = np.sqrt(1.0 + ext.radius(n, N, L) ** 2)
    w.setflags(write=False)
    return w


# ---------------------------------------------------------------------------
# pair sets for the seminorm

@dataclass(frozen=True)
class PairSet:
    """Flat grid-index pairs (x, y) with 0 < |x-y| <= |x|/2, plus w(x,y) and |x-y|."""

    ix: np.ndarray
    iy: np.ndarray
    wxy: np.ndarray
    dist: np.ndarray
    exhaustive: bool


def _flat_points(n: int, N: int, L: float) -> np.ndarray:
    x = ext.axis_coords(N, L)
    mesh = np.meshgrid(*([x] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _finish_pairs(X: np.ndarray, ix: np.ndarray, iy: np.ndarray, exhaustive: bool) -> PairSet:
    dist = np.linalg.norm(X[ix] - X[iy], axis=-1)
    rx = np.linalg.norm(X[ix], axis=-1)
    keep = (dist > 0) & (dist <= rx / 2 + 1e-12)
    ix, iy, dist = ix[keep], iy[keep], dist[keep]
    # deduplicate sampled pairs so the set is stable and compact
    key = np.unique(ix.astype(np.int64) * X.shape[0] + iy, return_index=True)[1]
    ix, iy, dist = ix[key], iy[key], dist[key]
    wxy = np.maximum(weight(X[ix]), weight(X[iy]))
    return PairSet(ix, iy, wxy, dist, exhaustive)


@lru_cache(maxsize=8)
def pair_set(n: int, N: int, L: float, samples: int = SOBOL_PAIRS, seed: int = 0) -> PairSet:
    """Exhaustive ordered pairs for n = 2, N <= 32; otherwise Sobol samples plus nearest neighbours."""
    X = _flat_points(n, N, L)
    P = X.shape[0]
    if n == 2 and N <= 32:
        ix, iy = np.meshgrid(np.arange(P), np.arange(P), indexing="ij")
        return _finish_pairs(X, ix.ravel(), iy.ravel(), True)

    h = 2.0 * L / N
    shape = (N,) * n
    m = max(1, int(np.ceil(np.log2(samples))))
    sob = qmc.Sobol(d=2 * n, scramble=True, seed=seed).random_base2(m)[:samples]
    mi = np.minimum((sob[:, :n] * N).astype(np.int64), N - 1)
    x = -L + h * mi
    r = np.linalg.norm(x, axis=-1, keepdims=True) / 2
    mj = np.rint((x + (2 * sob[:, n:] - 1) * r + L) / h).astype(np.int64)
    ok = np.all((mj >= 0) & (mj < N), axis=-1)
    ix = [np.ravel_multi_index(tuple(mi[ok].T), shape)]
    iy = [np.ravel_multi_index(tuple(mj[ok].T), shape)]

    grid = np.indices(shape).reshape(n, -1)
    for j in range(n):
        for step in (-1, 1):
            nb = grid.copy()
            nb[j] += step
            ok = (nb[j] >= 0) & (nb[j] < N)
            ix.append(np.arange(P)[ok])
            iy.append(np.ravel_multi_index(tuple(nb[:, ok]), shape))
    return _finish_pairs(X, np.concatenate(ix), np.concatenate(iy), False)


@lru_cache(maxsize=8)
def _ball_pairs(n: int, N: int, L: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    X = _flat_points(n, N, L)
    inside = np.flatnonzero(np.linalg.norm(X, axis=-1) <= U_RADIUS + 1e-12)
    a, b = np.meshgrid(inside, inside, indexing="ij")
    a, b = a.ravel(), b.ravel()
    keep = a != b
    a, b = a[keep], b[keep]
    return inside, a, b, np.linalg.norm(X[a] - X[b], axis=-1)


# ---------------------------------------------------------------------------
# spatial norms on raw arrays of shape (m, N, ..., N)

def _maybe_check(data: np.ndarray, n: int, N: int, L: float, check: bool) -> None:
    if not check:
        return
    top = float(np.max(np.abs(data))) if data.size else 0.0
    if top == 0.0:
        return
    mask = ext._shell_mask(n, N, L)
    edge = float(np.max(np.abs(data[..., mask])))
    if edge > DECAY_TOL * top:
        raise DecayViolation(
            f"boundary magnitude {edge / top:.3e} exceeds {DECAY_TOL:.0e}; enlarge L or pass check_decay=False")


def _sup_w(data: np.ndarray, delta: float, n: int, N: int, L: float) -> float:
    if data.size == 0:
        return 0.0
    return float(np.max(grid_weight(n, N, L) ** delta * np.abs(data)))


def _seminorm(data: np.ndarray, lam: float, delta: float, n: int, N: int, L: float) -> float:
    ps = pair_set(n, N, L)
    flat = data.reshape(data.shape[0], -1)
    fac = ps.wxy ** (delta + lam) / ps.dist ** lam
    best = 0.0
    chunk = 1 << 20
    for c in range(flat.shape[0]):
        for s in range(0, ps.ix.size, chunk):
            sl = slice(s, s + chunk)
            diff = np.abs(flat[c, ps.ix[sl]] - flat[c, ps.iy[sl]])
            if diff.size:
                best = max(best, float(np.max(fac[sl] * diff)))
    return best


def _ball_holder(data: np.ndarray, lam: float, n: int, N: int, L: float) -> float:
    inside, a, b, dist = _ball_pairs(n, N, L)
    flat = data.reshape(data.shape[0], -1)
    sup = float(np.max(np.abs(flat[:, inside]))) if inside.size else 0.0
    if a.size == 0:
        return sup
    q = np.abs(flat[:, a] - flat[:, b]) / dist ** lam
    return sup + float(np.max(q))


def _c0(data: np.ndarray, lam: float, delta: float, n: int, N: int, L: float) -> NormReport:
    """C^{0,lam,delta} terms; lam = 0 keeps only the weighted sup."""
    rep = NormReport()
    rep.add("sup", _sup_w(data, delta, n, N, L))
    if lam > 0:
        rep.add("holder_U", _ball_holder(data, lam, n, N, L))
        rep.add("seminorm", _seminorm(data, lam, delta, n, N, L))
    return rep


def _alpha_key(alpha) -> str:
    return "".join(str(a) for a in alpha)


# ---------------------------------------------------------------------------
# public spatial estimators

def weighted_sup_norm(u: ext.GridForm, p: NormParams, check_decay: bool = True) -> NormReport:
    """Sum over |alpha| <= s of max_x w^{delta+|alpha|} |d^alpha u|."""
    _maybe_check(u.data, u.n, u.N, u.L, check_decay)
    rep = NormReport()
    for order in range(p.s + 1):
        for alpha in ext.multi_indices(u.n, order):
            da = ext.partial_array(u.data, alpha, u.n, u.N, u.L)
            rep.add(f"sup[{_alpha_key(alpha)}]", _sup_w(da, p.delta + order, u.n, u.N, u.L))
    return rep


def holder_seminorm(u: ext.GridForm, lam: float, delta: float, check_decay: bool = True) -> float:
    """Weighted Hölder seminorm over pairs with |x - y| <= |x|/2."""
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must lie in (0, 1]")
    _maybe_check(u.data, u.n, u.N, u.L, check_decay)
    return _seminorm(u.data, lam, delta, u.n, u.N, u.L)


def c0_lambda_delta(u: ext.GridForm, lam: float, delta: float, check_decay: bool = True) -> NormReport:
    _maybe_check(u.data, u.n, u.N, u.L, check_decay)
    return _c0(u.data, lam, delta, u.n, u.N, u.L)


def hoelder_norm(u: ext.GridForm, p: NormParams, check_decay: bool = True) -> NormReport:
    """C^{s,lam,delta} = sum over |alpha| <= s of C^{0,lam,delta+|alpha|}(d^alpha u)."""
    _maybe_check(u.data, u.n, u.N, u.L, check_decay)
    rep = NormReport()
    for order in range(p.s + 1):
        for alpha in ext.multi_indices(u.n, order):
            da = ext.partial_array(u.data, alpha, u.n, u.N, u.L)
            rep.merge(_c0(da, p.lam, p.delta + order, u.n, u.N, u.L), f"[{_alpha_key(alpha)}]")
    return rep


def lp_norm(u: ext.GridForm, p: float) -> float:
    """Discrete L^p norm over the box with cell measure h^n (pointwise Euclidean norm of components)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    mag = np.sqrt(np.sum(u.data ** 2, axis=0))
    return float((np.sum(mag ** p) * u.h ** u.n) ** (1.0 / p))


def weight_lp_constant(n: int, delta: float, p: float) -> float:
    """||w^{-delta}||_{L^p(R^n)}, the sharp constant in ||u||_p <= c sup w^delta |u|."""
    from scipy.special import gammaln

    a = delta * p / 2
    if a <= n / 2:
        raise ValueError("need delta > n/p")
    log_int = (n / 2) * np.log(np.pi) + gammaln(a - n / 2) - gammaln(a)
    return float(np.exp(log_int / p))


# ---------------------------------------------------------------------------
# anisotropic (space-time) norms

def time_derivative(data: np.ndarray, tau: float, j: int) -> np.ndarray:
    """j-th time derivative along axis 0 by second-order finite differences."""
    out = data
    for _ in range(j):
        out = np.gradient(out, tau, axis=0, edge_order=2)
    return out


def _time_quotient(data: np.ndarray, delta: float, expo: float, tau: float, n: int, N: int, L: float) -> float:
    nt = data.shape[0]
    if expo == 0 or nt < 2:
        return 0.0
    wd = grid_weight(n, N, L) ** delta
    flat = (data * wd).reshape(nt, -1)
    best = 0.0
    for i in range(nt - 1):
        diff = np.max(np.abs(flat[i + 1:] - flat[i]), axis=1)
        dt = tau * np.arange(1, nt - i)
        best = max(best, float(np.max(diff / dt ** expo)))
    return best


def _aniso0(data: np.ndarray, lam: float, delta: float, tau: float, n: int, N: int, L: float) -> NormReport:
    """C^{s(0,lam,delta)}_T terms for a trajectory array of shape (nt, m, N..)."""
    rep = NormReport()
    # sup over t of the whole C^{0,lam,delta} norm, not of each term separately
    rep.add("space", max((_c0(sl, lam, delta, n, N, L).total for sl in data), default=0.0))
    rep.add("time", _time_quotient(data, delta, lam / 2, tau, n, N, L))
    return rep


class _Derivs:
    """Memoized d_x^alpha d_t^j of a trajectory array."""

    def __init__(self, data: np.ndarray, tau: float, n: int, N: int, L: float):
        self.data, self.tau, self.n, self.N, self.L = data, tau, n, N, L
        self._cache: dict[tuple, np.ndarray] = {}

    def get(self, alpha: tuple[int, ...], j: int) -> np.ndarray:
        key = (alpha, j)
        if key not in self._cache:
            base = ext.partial_array(self.data, alpha, self.n, self.N, self.L) if any(alpha) else self.data
            self._cache[key] = time_derivative(base, self.tau, j)
        return self._cache[key]


def _aniso(der: _Derivs, s: int, lam: float, delta: float, shift: tuple[int, ...]) -> NormReport:
    n = der.n
    rep = NormReport()
    for j in range(s + 1):
        for order in range(2 * (s - j) + 1):
            for alpha in ext.multi_indices(n, order):
                total = tuple(a + b for a, b in zip(alpha, shift))
                arr = der.get(total, j)
                rep.merge(_aniso0(arr, lam, delta + order, der.tau, n, der.N, der.L),
                          f"[a={_alpha_key(alpha)},j={j}]")
    return rep


def _traj_parts(traj: "Trajectory"):
    return traj.data, traj.tau, traj.n, traj.N, traj.L


def aniso_norm(traj: "Trajectory", p: NormParams, check_decay: bool = True) -> NormReport:
    """C^{s(s,lam,delta)}_T: sum over |alpha| + 2j <= 2s of C^{s(0,lam,delta+|alpha|)}_T(d^alpha d_t^j u)."""
    data, tau, n, N, L = _traj_parts(traj)
    if data.shape[0] < 2 * p.s + 2:
        raise TooFewTimeSlices(f"need at least {2 * p.s + 2} slices, have {data.shape[0]}")
    _maybe_check(data, n, N, L, check_decay)
    return _aniso(_Derivs(data, tau, n, N, L), p.s, p.lam, p.delta, (0,) * n)


def aniso_k_norm(traj: "Trajectory", k: int, s: int, lam: float, delta: float,
                 check_decay: bool = True, _der: _Derivs | None = None) -> NormReport:
    """C^{k,s(s,lam,delta)}_T: sum over |beta| <= k of the anisotropic norm of d^beta u with delta+|beta|."""
    data, tau, n, N, L = _traj_parts(traj)
    if data.shape[0] < 2 * s + 2:
        raise TooFewTimeSlices(f"need at least {2 * s + 2} slices, have {data.shape[0]}")
    _maybe_check(data, n, N, L, check_decay)
    der = _der or _Derivs(data, tau, n, N, L)
    rep = NormReport()
    for order in range(k + 1):
        for beta in ext.multi_indices(n, order):
            rep.merge(_aniso(der, s, lam, delta + order, beta), f"[b={_alpha_key(beta)}]")
    return rep


def f_norm(traj: "Trajectory", p: NormParams, check_decay: bool = True) -> NormReport:
    """F-scale norm: C^{k+1,s(s,lam,delta)}_T + C^{k,s(s,lam',delta)}_T."""
    if p.lam_prime is None:
        raise ValueError("the F-norm needs lambda'")
    data, tau, n, N, L = _traj_parts(traj)
    der = _Derivs(data, tau, n, N, L)
    rep = NormReport()
    rep.merge(aniso_k_norm(traj, p.k + 1, p.s, p.lam, p.delta, check_decay, der), "lam:")
    rep.merge(aniso_k_norm(traj, p.k, p.s, p.lam_prime, p.delta, False, der), "lam':")
    return rep


def sup_norm_T(traj: "Trajectory", delta: float = 0.0) -> float:
    """C^{s(0,0,delta)}_T norm: max over space-time of w^delta |u|."""
    data, _, n, N, L = _traj_parts(traj)
    return _sup_w(data, delta, n, N, L)


# ---------------------------------------------------------------------------
# random families for the empirical embedding / product / L^p checks

def random_decaying_family(n: int, N: int, L: float, count: int, seed: int = 0,
                           width: tuple[float, float] = (0.5, 1.0)) -> list[ext.GridForm]:
    """Smooth rapidly decaying scalar fields: random Gaussian bumps with polynomial factors."""
    rng = np.random.default_rng(seed)
    xs = ext.grid_coords(n, N, L)
    out = []
    for _ in range(count):
        total = np.zeros((N,) * n)
        for _ in range(3):
            c = rng.uniform(-1.0, 1.0, n)
            s = rng.uniform(*width)
            r2 = sum((x - cj) ** 2 for x, cj in zip(xs, c))
            poly = 1.0 + sum(rng.normal() * x for x in xs) / 2
            total = total + rng.normal() * poly * np.exp(-r2 / (2 * s * s))
        out.append(ext.GridForm(n, 0, N, float(L), total[None]))
    return out
