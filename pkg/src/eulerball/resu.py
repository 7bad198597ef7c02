"""Rectified spatial units, ideal distances and ideal rotations.

Every rectified unit is a hinge ``max(0, a_d*dist + a_w*r_w + a_v*r_v)``
over the center distance and the two radii, so one coefficient triple per
transition is enough to evaluate it and to differentiate it.  Gradients are
taken with respect to the raw parameter vectors (center, log-radius), which
puts a factor ``r`` on the radius component.

Functions suffixed ``_raw`` work on parameter vectors and are what the
optimizer calls in its inner loops; the unsuffixed ones take :class:`Ball`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from eulerball.geometry import Ball, Rel, _check_dims


class SingularityError(ArithmeticError):
    """Raised when a gradient needs the direction between coincident centers."""


@dataclass(frozen=True)
class Transition:
    src: Rel
    dst: Rel

    def __post_init__(self):
        if (self.src, self.dst) not in _COEFFS:
            raise ValueError(f"{self.src.value}->{self.dst.value} is not an edge of the transition map")

    @property
    def coeffs(self) -> tuple[int, int, int]:
        return _COEFFS[(self.src, self.dst)]

    def __str__(self):
        return f"{self.src.value}->{self.dst.value}"


# (a_dist, a_rw, a_rv) of the hinge argument
_COEFFS = {
    (Rel.D, Rel.O): (1, -1, -1),
    (Rel.O, Rel.D): (-1, 1, 1),
    (Rel.O, Rel.P): (1, 1, -1),
    (Rel.O, Rel.PBAR): (1, -1, 1),
    (Rel.P, Rel.O): (-1, -1, 1),
    (Rel.PBAR, Rel.O): (-1, 1, -1),
}

TRANSITIONS = tuple(Transition(a, b) for a, b in _COEFFS)


def _split(pw: np.ndarray, pv: np.ndarray):
    diff = pw[:-1] - pv[:-1]
    dist = math.sqrt(float(diff @ diff))
    return diff, dist, math.exp(pw[-1]), math.exp(pv[-1])


def hinge_arg(t: Transition, dist: float, rw: float, rv: float) -> float:
    ad, aw, av = t.coeffs
    return ad * dist + aw * rw + av * rv


def resu_raw(t: Transition, pw: np.ndarray, pv: np.ndarray) -> float:
    _, dist, rw, rv = _split(pw, pv)
    return max(0.0, hinge_arg(t, dist, rw, rv))


def resu_grad_raw(t: Transition, pw: np.ndarray, pv: np.ndarray):
    """Return ``(value, grad_w, grad_v)``; the subgradient at the kink is zero."""
    diff, dist, rw, rv = _split(pw, pv)
    arg = hinge_arg(t, dist, rw, rv)
    gw = np.zeros_like(pw)
    gv = np.zeros_like(pv)
    if arg <= 0:
        return 0.0, gw, gv
    if dist == 0:
        raise SingularityError("coincident centers with an active distance term")
    ad, aw, av = t.coeffs
    u = diff / dist
    gw[:-1] = ad * u
    gv[:-1] = -ad * u
    gw[-1] = aw * rw
    gv[-1] = av * rv
    return arg, gw, gv


def resu(t: Transition, w: Ball, v: Ball) -> float:
    _check_dims(w, v)
    return resu_raw(t, w.params, v.params)


def resu_gradient(t: Transition, w: Ball, v: Ball, wrt: str = "w") -> np.ndarray:
    """Gradient of ``resu(t, w, v)`` with respect to the parameters of ``w`` or ``v``."""
    _check_dims(w, v)
    if wrt not in ("w", "v"):
        raise ValueError("wrt must be 'w' or 'v'")
    _, gw, gv = resu_grad_raw(t, w.params, v.params)
    return gw if wrt == "w" else gv


@dataclass(frozen=True)
class IdealSpec:
    """Index ``k`` of ``n_ideal`` distinguished distances inside one status.

    Valid ranges: D uses k = 1..N (k = 1 is exact external tangency),
    O uses k = 0..N+1 (the two ends are the tangent extremes, 1..N are
    interior), P uses k = 0..N (k = 0 internally tangent, k = N concentric).
    """

    relation: Rel
    k: int
    n_ideal: int

    def __post_init__(self):
        if self.n_ideal < 1:
            raise ValueError("ideal count must be >= 1")
        lo, hi = ideal_range(self.relation, self.n_ideal, extremes=True)
        if not lo <= self.k <= hi:
            raise ValueError(f"k={self.k} outside {lo}..{hi} for {self.relation.value} with N={self.n_ideal}")


def ideal_range(rel: Rel, n_ideal: int, extremes: bool = False) -> tuple[int, int]:
    """Inclusive index range for ``rel``.

    With ``extremes=False`` this is the range the optimizer draws from, which
    leaves out the boundary-touching indices of O and P.
    """
    if rel is Rel.D:
        return 1, n_ideal
    if rel is Rel.O:
        return (0, n_ideal + 1) if extremes else (1, n_ideal)
    if rel is Rel.P:
        return (0, n_ideal) if extremes else (1, n_ideal)
    raise ValueError(f"no ideal distances for {rel!r}")


def _ideal_with_partials(spec: IdealSpec, rw: float, rv: float) -> tuple[float, float, float]:
    k, n = spec.k, spec.n_ideal
    if spec.relation is Rel.D:
        return k * (rw + rv), float(k), float(k)
    if spec.relation is Rel.O:
        if rv < rw:
            raise ValueError("O ideal distance needs r_v >= r_w; swap the balls")
        c = 2 * k / (n + 1)
        return c * rw + rv - rw, c - 1.0, 1.0
    if spec.relation is Rel.P:
        if not rv > rw:
            raise ValueError("P ideal distance needs r_v > r_w; swap the balls")
        c = 1.0 - k / n
        return rv - rw - k * (rv - rw) / n, -c, c
    raise ValueError(f"no ideal distances for {spec.relation!r}")


def ideal_distance(spec: IdealSpec, rw: float, rv: float) -> float:
    return _ideal_with_partials(spec, rw, rv)[0]


def ideal_loss_raw(spec: IdealSpec, pw: np.ndarray, pv: np.ndarray):
    """Return ``(loss, grad_w, grad_v, residual)`` of ``(dist - d_ideal)**2``.

    The ideal distance depends on the radii, and that dependence is
    differentiated too.
    """
    diff, dist, rw, rv = _split(pw, pv)
    d, dd_rw, dd_rv = _ideal_with_partials(spec, rw, rv)
    res = dist - d
    gw = np.zeros_like(pw)
    gv = np.zeros_like(pv)
    if res == 0:
        return 0.0, gw, gv, 0.0
    if dist == 0:
        if d != 0:
            raise SingularityError("coincident centers with a nonzero ideal distance")
    else:
        u = diff / dist
        gw[:-1] = 2 * res * u
        gv[:-1] = -2 * res * u
    gw[-1] = -2 * res * dd_rw * rw
    gv[-1] = -2 * res * dd_rv * rv
    return res * res, gw, gv, res


def ideal_loss(spec: IdealSpec, w: Ball, v: Ball) -> float:
    _check_dims(w, v)
    return ideal_loss_raw(spec, w.params, v.params)[0]


def ideal_loss_gradient(spec: IdealSpec, w: Ball, v: Ball, wrt: str = "w") -> np.ndarray:
    _check_dims(w, v)
    if wrt not in ("w", "v"):
        raise ValueError("wrt must be 'w' or 'v'")
    _, gw, gv, _ = ideal_loss_raw(spec, w.params, v.params)
    return gw if wrt == "w" else gv


@lru_cache(maxsize=None)
def rotation_table(m: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Cosines and sines of 2*k*pi/m for k = 1..m (index k-1)."""
    if m < 1:
        raise ValueError("rotation count must be >= 1")
    angles = [2 * k * math.pi / m for k in range(1, m + 1)]
    return tuple(math.cos(a) for a in angles), tuple(math.sin(a) for a in angles)


def rotate(center_w, center_v, p: int, q: int, k: int, m: int) -> np.ndarray:
    """Rotate ``center_w`` about ``center_v`` by ``2*k*pi/m`` in the (p, q) plane."""
    cw = np.asarray(center_w, dtype=float)
    cv = np.asarray(center_v, dtype=float)
    n = cw.size
    if cv.size != n:
        raise ValueError("centers differ in dimension")
    if p == q:
        raise ValueError("rotation axes must differ")
    if not 0 <= p < q < n:
        raise ValueError(f"need 0 <= p < q < n, got p={p}, q={q}, n={n}")
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= M, got k={k}, M={m}")
    cos, sin = rotation_table(m)
    c, s = cos[k - 1], sin[k - 1]
    dp = cw[p] - cv[p]
    dq = cw[q] - cv[q]
    out = cw.copy()
    out[p] = dp * c - dq * s + cv[p]
    out[q] = dp * s + dq * c + cv[q]
    return out
