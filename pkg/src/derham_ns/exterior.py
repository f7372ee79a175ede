"""Differential forms on a uniform periodic grid over the box [-L, L)^n.

A q-form is stored as an array of shape ``(binomial(n, q), N, ..., N)``; the
component axis is ordered by the lexicographic table of increasing
multi-indices, spatial axes follow x_1, ..., x_n.  All derivatives are
spectral (FFT), so the algebraic identities of the de Rham complex hold to
rounding on band-limited fields.

Sign conventions (Euclidean metric, standard orientation dx_1 ^ ... ^ dx_n):

* ``*dx_I = sign(I, I^c) dx_{I^c}``, hence ``** = (-1)^{q(n-q)}``.
* ``d u = sum_I sum_j d_j u_I dx_j ^ dx_I``.
* ``d* u`` is the L^2 adjoint of d, ``(d* u)_J = -sum_j d_j u_{jJ}``; for 1-forms
  ``d* u = -div u`` and ``d* d + d d* = -Laplacian``.

First derivatives use wavenumbers with the Nyquist mode zeroed so that odd
derivatives of real fields stay real.  The Laplacian uses the full |k|^2.
The two agree on every field without Nyquist content.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import DecayViolation, DegreeOverflow, GridMismatch

MAX_DIM = 6

# relative size of the outer shell used by the wraparound check
SHELL_FRACTION = 0.125


def fft_workers() -> int | None:
    value = os.environ.get("DERHAM_NS_THREADS")
    if not value:
        return None
    return max(1, int(value))


def perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation that sorts ``seq`` (entries distinct)."""
    sign = 1
    s = list(seq)
    for i in range(len(s)):
        for j in range(i + 1, len(s)):
            if s[i] > s[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class MultiIndexTable:
    """Lexicographic list of strictly increasing q-tuples from {0..n-1}.

    Degrees outside [0, n] give an empty table, which is how d_q = 0 for
    q >= n and d*_q = 0 for q <= 0 are represented.
    """

    n: int
    q: int
    indices: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.indices)

    def rank(self, idx: Sequence[int]) -> int:
        return _rank_map(self.n, self.q)[tuple(idx)]

    def labels(self) -> list[str]:
        if self.q == 0:
            return ["1"]
        return ["^".join(f"dx{i + 1}" for i in idx) for idx in self.indices]


@lru_cache(maxsize=None)
def multi_index_table(n: int, q: int) -> MultiIndexTable:
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"space dimension must be in [1, {MAX_DIM}], got {n}")
    if 0 <= q <= n:
        idx = tuple(combinations(range(n), q))
    else:
        idx = ()
    return MultiIndexTable(n, q, idx)


@lru_cache(maxsize=None)
def _rank_map(n: int, q: int) -> dict[tuple[int, ...], int]:
    return {t: r for r, t in enumerate(multi_index_table(n, q).indices)}


def n_components(n: int, q: int) -> int:
    return math.comb(n, q) if 0 <= q <= n else 0


# ---------------------------------------------------------------------------
# grid geometry and wavenumbers

@lru_cache(maxsize=None)
def axis_coords(N: int, L: float) -> np.ndarray:
    h = 2.0 * L / N
    x = -L + h * np.arange(N)
    x.setflags(write=False)
    return x


def grid_coords(n: int, N: int, L: float) -> list[np.ndarray]:
    """Broadcastable coordinate arrays x_1..x_n (each of shape 1 x .. N .. x 1)."""
    x = axis_coords(N, L)
    out = []
    for j in range(n):
        shape = [1] * n
        shape[j] = N
        out.append(x.reshape(shape))
    return out


@lru_cache(maxsize=None)
def radius(n: int, N: int, L: float) -> np.ndarray:
    r2 = sum(c * c for c in grid_coords(n, N, L))
    r = np.sqrt(np.broadcast_to(r2, (N,) * n)).copy()
    r.setflags(write=False)
    return r


@lru_cache(maxsize=None)
def _wavenumbers(n: int, N: int, L: float, zero_nyquist: bool) -> tuple[np.ndarray, ...]:
    """Per-axis wavenumbers laid out for ``rfftn`` over the last n axes."""
    scale = np.pi / L  # fftfreq(N, h) * 2pi == integer * pi/L
    out = []
    for j in range(n):
        if j == n - 1:
            k = sfft.rfftfreq(N, 1.0 / N) * scale
        else:
            k = sfft.fftfreq(N, 1.0 / N) * scale
        if zero_nyquist and N % 2 == 0:
            k = np.where(np.isclose(np.abs(k), (N // 2) * scale), 0.0, k)
        shape = [1] * n
        shape[j] = k.size
        k = k.reshape(shape)
        k.setflags(write=False)
        out.append(k)
    return tuple(out)


def deriv_wavenumbers(n: int, N: int, L: float) -> tuple[np.ndarray, ...]:
    return _wavenumbers(n, N, L, True)


@lru_cache(maxsize=None)
def k_squared(n: int, N: int, L: float, zero_nyquist: bool = False) -> np.ndarray:
    ks = _wavenumbers(n, N, L, zero_nyquist)
    k2 = sum(k * k for k in ks)
    k2 = np.broadcast_to(k2, k2.shape).copy()
    k2.setflags(write=False)
    return k2


def _spatial_axes(n: int) -> tuple[int, ...]:
    return tuple(range(-n, 0))


def fwd(data: np.ndarray, n: int) -> np.ndarray:
    return sfft.rfftn(data, axes=_spatial_axes(n), workers=fft_workers())


def inv(hat: np.ndarray, n: int, N: int) -> np.ndarray:
    return sfft.irfftn(hat, s=(N,) * n, axes=_spatial_axes(n), workers=fft_workers())


def _comp(n: int, c: int) -> tuple:
    return (Ellipsis, c) + (slice(None),) * n


# ---------------------------------------------------------------------------
# the form container

@dataclass(frozen=True, eq=False)
class GridForm:
    n: int
    q: int
    N: int
    L: float
    data: np.ndarray

    def __post_init__(self) -> None:
        if not 2 <= self.n <= MAX_DIM:
            raise ValueError(f"n must be in [2, {MAX_DIM}], got {self.n}")
        shape = (n_components(self.n, self.q),) + (self.N,) * self.n
        if self.data.shape != shape:
            raise ValueError(f"data shape {self.data.shape} != expected {shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("GridForm samples must be finite")

    @classmethod
    def zeros(cls, n: int, q: int, N: int, L: float, dtype=np.float64) -> "GridForm":
        return cls(n, q, N, float(L), np.zeros((n_components(n, q),) + (N,) * n, dtype=dtype))

    @classmethod
    def from_components(cls, n: int, q: int, N: int, L: float, comps) -> "GridForm":
        shape = (N,) * n
        arr = np.stack([np.broadcast_to(np.asarray(c, dtype=float), shape) for c in comps])
        return cls(n, q, N, float(L), arr.copy())

    @property
    def table(self) -> MultiIndexTable:
        return multi_index_table(self.n, self.q)

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def m(self) -> int:
        return self.data.shape[0]

    def coords(self) -> list[np.ndarray]:
        return grid_coords(self.n, self.N, self.L)

    def with_data(self, data: np.ndarray, q: int | None = None) -> "GridForm":
        return GridForm(self.n, self.q if q is None else q, self.N, self.L, data)

    def component(self, idx: Sequence[int]) -> np.ndarray:
        """Coefficient of dx_I for a 1-based multi-index I."""
        return self.data[self.table.rank(tuple(i - 1 for i in idx))]

    def sup(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def same_grid(self, other: "GridForm") -> bool:
        return (self.n, self.N, self.L) == (other.n, other.N, other.L)

    def _check(self, other: "GridForm") -> None:
        if not self.same_grid(other) or self.q != other.q:
            raise GridMismatch("forms live on different grids or degrees")

    def __add__(self, other: "GridForm") -> "GridForm":
        self._check(other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "GridForm") -> "GridForm":
        self._check(other)
        return self.with_data(self.data - other.data)

    def __neg__(self) -> "GridForm":
        return self.with_data(-self.data)

    def __mul__(self, alpha: float) -> "GridForm":
        return self.with_data(self.data * alpha)

    __rmul__ = __mul__

    def __truediv__(self, alpha: float) -> "GridForm":
        return self.with_data(self.data / alpha)


def _same_grid(a: GridForm, b: GridForm) -> None:
    if not a.same_grid(b):
        raise GridMismatch(f"grids differ: {(a.n, a.N, a.L)} vs {(b.n, b.N, b.L)}")


# ---------------------------------------------------------------------------
# Fourier carrier

@dataclass(frozen=True, eq=False)
class SpectralForm:
    """Fourier coefficients c_k of u(x) = sum_k c_k exp(i k.x), k in {-N/2..N/2-1} pi/L.

    ``coeffs`` has the GridForm layout with spatial axes in fftshift order, so
    index i on an axis corresponds to wavenumber (i - N/2) pi/L.
    """

    n: int
    q: int
    N: int
    L: float
    coeffs: np.ndarray

    @property
    def wavenumbers(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * (np.pi / self.L)


def _phase(n: int, N: int) -> np.ndarray:
    # grid starts at x = -L, so fft index m picks up exp(i m pi) = (-1)^m
    m = sfft.fftfreq(N, 1.0 / N)
    s = np.where(m.astype(int) % 2 == 0, 1.0, -1.0)
    out = np.ones((1,) * n)
    for j in range(n):
        shape = [1] * n
        shape[j] = N
        out = out * s.reshape(shape)
    return out


def to_spectral(u: GridForm) -> SpectralForm:
    axes = _spatial_axes(u.n)
    c = sfft.fftn(u.data, axes=axes, workers=fft_workers()) / u.N ** u.n
    c = c * _phase(u.n, u.N)
    return SpectralForm(u.n, u.q, u.N, u.L, sfft.fftshift(c, axes=axes))


def from_spectral(s: SpectralForm) -> GridForm:
    axes = _spatial_axes(s.n)
    c = sfft.ifftshift(s.coeffs, axes=axes) * _phase(s.n, s.N)
    data = sfft.ifftn(c * s.N ** s.n, axes=axes, workers=fft_workers())
    return GridForm(s.n, s.q, s.N, s.L, np.ascontiguousarray(data.real))


# ---------------------------------------------------------------------------
# pointwise exterior algebra on coefficient arrays

@lru_cache(maxsize=None)
def _wedge_table(n: int, p: int, q: int) -> tuple[tuple[int, int, int, int], ...]:
    rows = []
    tp, tq = multi_index_table(n, p), multi_index_table(n, q)
    for a, I in enumerate(tp.indices):
        for b, J in enumerate(tq.indices):
            if set(I) & set(J):
                continue
            K = tuple(sorted(I + J))
            rows.append((a, b, multi_index_table(n, p + q).rank(K), perm_sign(I + J)))
    return tuple(rows)


def wedge_coeffs(a: np.ndarray, p: int, b: np.ndarray, q: int, n: int) -> np.ndarray:
    """Exterior product of coefficient arrays with the component axis first."""
    out = np.zeros((n_components(n, p + q),) + np.broadcast_shapes(a.shape[1:], b.shape[1:]),
                   dtype=np.result_type(a, b))
    for ia, ib, ic, s in _wedge_table(n, p, q):
        out[ic] += s * a[ia] * b[ib]
    return out


@lru_cache(maxsize=None)
def _hodge_table(n: int, q: int) -> tuple[tuple[int, int, int], ...]:
    t = multi_index_table(n, q)
    rows = []
    for r, I in enumerate(t.indices):
        Ic = tuple(i for i in range(n) if i not in I)
        rows.append((r, multi_index_table(n, n - q).rank(Ic), perm_sign(I + Ic)))
    return tuple(rows)


def hodge_coeffs(a: np.ndarray, q: int, n: int) -> np.ndarray:
    out = np.zeros((n_components(n, n - q),) + a.shape[1:], dtype=a.dtype)
    for r, rc, s in _hodge_table(n, q):
        out[rc] = s * a[r]
    return out


def wedge(a: GridForm, b: GridForm) -> GridForm:
    _same_grid(a, b)
    if a.q + b.q > a.n:
        raise DegreeOverflow(f"degree {a.q} + {b.q} exceeds n = {a.n}")
    return a.with_data(wedge_coeffs(a.data, a.q, b.data, b.q, a.n), q=a.q + b.q)


def hodge_star(u: GridForm) -> GridForm:
    return u.with_data(hodge_coeffs(u.data, u.q, u.n), q=u.n - u.q)


# ---------------------------------------------------------------------------
# d, d*, Laplacian

@lru_cache(maxsize=None)
def _d_table(n: int, q: int) -> tuple[tuple[int, int, int, int], ...]:
    """Rows (J, j, I, sign) with dx_j ^ dx_J = sign dx_I, J of degree q."""
    rows = []
    if not 0 <= q < n:
        return ()
    up = multi_index_table(n, q + 1)
    for rJ, J in enumerate(multi_index_table(n, q).indices):
        for j in range(n):
            if j in J:
                continue
            I = tuple(sorted((j,) + J))
            rows.append((rJ, j, up.rank(I), perm_sign((j,) + J)))
    return tuple(rows)


def d_hat(uhat: np.ndarray, n: int, q: int, N: int, L: float) -> np.ndarray:
    """Symbol of d on rfft coefficients; component axis at position -(n+1)."""
    kd = deriv_wavenumbers(n, N, L)
    lead = uhat.shape[: uhat.ndim - n - 1]
    out = np.zeros(lead + (n_components(n, q + 1),) + uhat.shape[-n:], dtype=uhat.dtype)
    for rJ, j, rI, s in _d_table(n, q):
        out[_comp(n, rI)] += (s * 1j) * kd[j] * uhat[_comp(n, rJ)]
    return out


def d_star_hat(uhat: np.ndarray, n: int, q: int, N: int, L: float) -> np.ndarray:
    kd = deriv_wavenumbers(n, N, L)
    lead = uhat.shape[: uhat.ndim - n - 1]
    out = np.zeros(lead + (n_components(n, q - 1),) + uhat.shape[-n:], dtype=uhat.dtype)
    for rJ, j, rI, s in _d_table(n, q - 1):
        out[_comp(n, rJ)] -= (s * 1j) * kd[j] * uhat[_comp(n, rI)]
    return out


def d_array(data: np.ndarray, n: int, q: int, N: int, L: float) -> np.ndarray:
    if not 0 <= q < n:
        lead = data.shape[: data.ndim - n - 1]
        return np.zeros(lead + (n_components(n, q + 1),) + (N,) * n, dtype=data.dtype)
    return inv(d_hat(fwd(data, n), n, q, N, L), n, N)


def d_star_array(data: np.ndarray, n: int, q: int, N: int, L: float) -> np.ndarray:
    if not 0 < q <= n:
        lead = data.shape[: data.ndim - n - 1]
        return np.zeros(lead + (n_components(n, q - 1),) + (N,) * n, dtype=data.dtype)
    return inv(d_star_hat(fwd(data, n), n, q, N, L), n, N)


def d(u: GridForm) -> GridForm:
    """Exterior derivative.  For q >= n the result is the empty (q+1)-form."""
    return u.with_data(d_array(u.data, u.n, u.q, u.N, u.L), q=u.q + 1)


def d_star(u: GridForm) -> GridForm:
    """Codifferential (formal L^2 adjoint of d).  For q = 0 the result is empty."""
    return u.with_data(d_star_array(u.data, u.n, u.q, u.N, u.L), q=u.q - 1)


def laplacian_array(data: np.ndarray, n: int, N: int, L: float) -> np.ndarray:
    return inv(-k_squared(n, N, L) * fwd(data, n), n, N)


def laplacian(u: GridForm) -> GridForm:
    return u.with_data(laplacian_array(u.data, u.n, u.N, u.L))


def multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    """All alpha in Z_{>=0}^n with |alpha| = order, in lexicographic order."""
    return sorted((a for a in product(range(order + 1), repeat=n) if sum(a) == order), reverse=True)


def partial_array(data: np.ndarray, alpha: Sequence[int], n: int, N: int, L: float) -> np.ndarray:
    if not any(alpha):
        return data.copy()
    kd = deriv_wavenumbers(n, N, L)
    mult = 1.0
    for j, a in enumerate(alpha):
        if a:
            mult = mult * (1j * kd[j]) ** a
    return inv(mult * fwd(data, n), n, N)


def partial(u: GridForm, alpha: Sequence[int]) -> GridForm:
    if len(alpha) != u.n:
        raise ValueError("multi-index length must equal n")
    return u.with_data(partial_array(u.data, alpha, u.n, u.N, u.L))


# ---------------------------------------------------------------------------
# vector calculus in n = 3, implemented directly for cross-checks

def grad(f: GridForm) -> GridForm:
    if f.q != 0:
        raise ValueError("grad expects a 0-form")
    comps = [partial_array(f.data[0], tuple(int(i == j) for i in range(f.n)), f.n, f.N, f.L)
             for j in range(f.n)]
    return f.with_data(np.stack(comps), q=1)


def div(u: GridForm) -> GridForm:
    if u.q != 1:
        raise ValueError("div expects a 1-form")
    total = sum(partial_array(u.data[j], tuple(int(i == j) for i in range(u.n)), u.n, u.N, u.L)
                for j in range(u.n))
    return u.with_data(total[None], q=0)


def curl(u: GridForm) -> GridForm:
    """Curl of a 3-D vector field, returned as a 1-form."""
    if u.n != 3 or u.q != 1:
        raise ValueError("curl is defined for 1-forms in n = 3")
    D = lambda c, j: partial_array(u.data[c], tuple(int(i == j) for i in range(3)), 3, u.N, u.L)  # noqa: E731
    return u.with_data(np.stack([D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1)]))


# ---------------------------------------------------------------------------
# truncated free-space checks

@lru_cache(maxsize=None)
def _shell_mask(n: int, N: int, L: float) -> np.ndarray:
    xs = grid_coords(n, N, L)
    edge = np.zeros((N,) * n, dtype=bool)
    for x in xs:
        edge |= np.broadcast_to(np.abs(x) >= (1.0 - SHELL_FRACTION) * L, (N,) * n)
    edge.setflags(write=False)
    return edge


def boundary_magnitude(u: GridForm) -> float:
    """max |u| on the outer shell of the box relative to max |u| overall."""
    top = u.sup()
    if top == 0.0:
        return 0.0
    mask = _shell_mask(u.n, u.N, u.L)
    return float(np.max(np.abs(u.data[:, mask]))) / top


def check_decay(u: GridForm, tol: float = 1e-6) -> None:
    """Raise DecayViolation when the field is not negligible near the box boundary."""
    b = boundary_magnitude(u)
    if b > tol:
        raise DecayViolation(f"boundary magnitude {b:.3e} exceeds {tol:.1e}; enlarge L or use periodic data")
