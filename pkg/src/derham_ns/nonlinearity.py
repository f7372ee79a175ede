"""Bilinear nonlinearities N(u) = M1(Du, u) + d M2(u, u) with Du = du (+) d*u.

``M1`` has shape ``(m_q, m_{q+1} + m_{q-1}, m_q)``: the middle axis lists the
components of du first, then those of d*u.  ``M2`` has shape
``(m_{q-1}, m_q, m_q)``.  Built-in families are generated by evaluating
their exterior-algebra formulas on basis forms, so every nonlinearity runs
through the same tensor contraction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import exterior as ext
from .errors import ShapeMismatch, UnsupportedCombination

BUILTINS = ("lamb", "ps", "zero")


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    n: int
    q: int
    M1: np.ndarray
    M2: np.ndarray
    name: str = "custom"
    b: float | None = None
    _nz1: tuple = field(init=False, repr=False)
    _nz2: tuple = field(init=False, repr=False)

    def __post_init__(self) -> None:
        mq = ext.n_components(self.n, self.q)
        s1 = (mq, ext.n_components(self.n, self.q + 1) + ext.n_components(self.n, self.q - 1), mq)
        s2 = (ext.n_components(self.n, self.q - 1), mq, mq)
        M1 = np.asarray(self.M1, dtype=float)
        M2 = np.asarray(self.M2, dtype=float)
        if M1.shape != s1 or M2.shape != s2:
            raise ShapeMismatch(f"tensor shapes {M1.shape}, {M2.shape} do not match {s1}, {s2}")
        object.__setattr__(self, "M1", M1)
        object.__setattr__(self, "M2", M2)
        # sparse entry lists drive the contraction
        object.__setattr__(self, "_nz1", tuple((int(c), int(a), int(b), float(M1[c, a, b]))
                                              for c, a, b in zip(*np.nonzero(M1))))
        object.__setattr__(self, "_nz2", tuple((int(c), int(a), int(b), float(M2[c, a, b]))
                                              for c, a, b in zip(*np.nonzero(M2))))

    @property
    def is_zero(self) -> bool:
        return not self._nz1 and not self._nz2

    @classmethod
    def zero(cls, n: int, q: int) -> "NonlinearitySpec":
        mq = ext.n_components(n, q)
        s1 = (mq, ext.n_components(n, q + 1) + ext.n_components(n, q - 1), mq)
        s2 = (ext.n_components(n, q - 1), mq, mq)
        return cls(n, q, np.zeros(s1), np.zeros(s2), name="zero")

    def to_dict(self) -> dict:
        return {"n": self.n, "q": self.q, "name": self.name, "b": self.b,
                "M1": self.M1.tolist(), "M2": self.M2.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "NonlinearitySpec":
        return cls(int(doc["n"]), int(doc["q"]), np.array(doc["M1"], dtype=float),
                   np.array(doc["M2"], dtype=float), name=doc.get("name", "custom"), b=doc.get("b"))


# ---------------------------------------------------------------------------
# built-ins

def _unit(n: int, q: int, i: int) -> np.ndarray:
    e = np.zeros(ext.n_components(n, q))
    e[i] = 1.0
    return e


def _lamb_block(n: int) -> np.ndarray:
    """T[c, a, b] with star(star e_a ^ e_b) = sum_c T[c, a, b] e_c, a over 2-forms, b over 1-forms."""
    m1, m2 = n, ext.n_components(n, 2)
    T = np.zeros((m1, m2, m1))
    for a in range(m2):
        sa = ext.hodge_coeffs(_unit(n, 2, a)[:, None], 2, n)
        for b in range(m1):
            w = ext.wedge_coeffs(sa, n - 2, _unit(n, 1, b)[:, None], 1, n)
            T[:, a, b] = ext.hodge_coeffs(w, n - 1, n)[:, 0]
    return T


def builtin(name: str, n: int, b: float | None = None) -> NonlinearitySpec:
    """Named nonlinearities on 1-forms.

    * ``lamb`` (n = 3): star(star du ^ u) + d|u|^2/2, which equals (u.grad)u.
    * ``ps`` (any n >= 2, parameter b): b star(star du ^ u) + (d|u|^2 - (d*u) u)/2.
    * ``zero``: the linear heat problem.
    """
    if not 2 <= n <= ext.MAX_DIM:
        raise UnsupportedCombination(f"n = {n} is outside [2, {ext.MAX_DIM}]")
    if name == "zero":
        return NonlinearitySpec.zero(n, 1)
    if name not in BUILTINS:
        raise UnsupportedCombination(f"unknown built-in nonlinearity {name!r}")
    if name == "lamb" and n != 3:
        raise UnsupportedCombination("the Lamb form is defined for n = 3")
    if name == "ps" and b is None:
        raise UnsupportedCombination("the ps family needs a parameter b")
    m2 = ext.n_components(n, 2)
    M1 = np.zeros((n, m2 + 1, n))
    coef = 1.0 if name == "lamb" else float(b)
    M1[:, :m2, :] = coef * _lamb_block(n)
    if name == "ps":
        # -(d*u) u / 2: the d* slot holds the single 0-form component
        M1[:, m2, :] = -0.5 * np.eye(n)
    M2 = np.zeros((1, n, n))
    M2[0] = 0.5 * np.eye(n)
    return NonlinearitySpec(n, 1, M1, M2, name=name, b=None if name == "lamb" else float(b))


# ---------------------------------------------------------------------------
# evaluation on raw arrays; component axis at -(n+1), any leading axes

def _check(spec: NonlinearitySpec, data: np.ndarray) -> None:
    n = spec.n
    want = ext.n_components(n, spec.q)
    if data.ndim < n + 1 or data.shape[-(n + 1)] != want:
        raise ShapeMismatch(f"array of shape {data.shape} is not a degree-{spec.q} form in n = {n}")


def _Du(spec: NonlinearitySpec, data: np.ndarray, N: int, L: float) -> np.ndarray:
    n, q = spec.n, spec.q
    return np.concatenate([ext.d_array(data, n, q, N, L), ext.d_star_array(data, n, q, N, L)],
                          axis=-(n + 1))


def _m1(spec: NonlinearitySpec, Dv: np.ndarray, w: np.ndarray, out: np.ndarray) -> None:
    n = spec.n
    for c, a, b, val in spec._nz1:
        out[ext._comp(n, c)] += val * Dv[ext._comp(n, a)] * w[ext._comp(n, b)]


def _m2(spec: NonlinearitySpec, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    n = spec.n
    shape = list(v.shape)
    shape[-(n + 1)] = ext.n_components(n, spec.q - 1)
    out = np.zeros(shape, dtype=np.result_type(v, w))
    for c, a, b, val in spec._nz2:
        out[ext._comp(n, c)] += val * v[ext._comp(n, a)] * w[ext._comp(n, b)]
    return out


def apply_N_array(spec: NonlinearitySpec, data: np.ndarray, N: int, L: float) -> np.ndarray:
    _check(spec, data)
    out = np.zeros_like(data)
    if spec.is_zero:
        return out
    if spec._nz1:
        _m1(spec, _Du(spec, data, N, L), data, out)
    if spec._nz2:
        out += ext.d_array(_m2(spec, data, data), spec.n, spec.q - 1, N, L)
    return out


def apply_B_array(spec: NonlinearitySpec, w: np.ndarray, u: np.ndarray, N: int, L: float) -> np.ndarray:
    """Symmetrised bilinear form: B(w, u) = M1(Dw, u) + M1(Du, w) + d(M2(w, u) + M2(u, w))."""
    _check(spec, w)
    _check(spec, u)
    out = np.zeros(np.broadcast_shapes(w.shape, u.shape), dtype=np.result_type(w, u))
    if spec.is_zero:
        return out
    if spec._nz1:
        _m1(spec, _Du(spec, w, N, L), u, out)
        _m1(spec, _Du(spec, u, N, L), w, out)
    if spec._nz2:
        out += ext.d_array(_m2(spec, w, u) + _m2(spec, u, w), spec.n, spec.q - 1, N, L)
    return out


def _grid_check(spec: NonlinearitySpec, u: ext.GridForm) -> None:
    if (u.n, u.q) != (spec.n, spec.q):
        raise ShapeMismatch(f"form of (n, q) = {(u.n, u.q)} given to a spec for {(spec.n, spec.q)}")


def apply_N(spec: NonlinearitySpec, u: ext.GridForm) -> ext.GridForm:
    _grid_check(spec, u)
    return u.with_data(apply_N_array(spec, u.data, u.N, u.L))


def apply_B(spec: NonlinearitySpec, w: ext.GridForm, u: ext.GridForm) -> ext.GridForm:
    _grid_check(spec, w)
    _grid_check(spec, u)
    if not w.same_grid(u):
        raise ShapeMismatch("w and u live on different grids")
    return u.with_data(apply_B_array(spec, w.data, u.data, u.N, u.L))
