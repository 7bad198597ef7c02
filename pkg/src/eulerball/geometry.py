"""Balls and the four spatial predicates between them.

A ball in n dimensions is stored as a parameter vector of length n + 1:
the center coordinates followed by the log of the radius, so the radius
is always positive.  Balls are open; the predicate boundaries below are
deliberate (tangent balls are disconnected, internally tangent balls are
part-of).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Rel(str, Enum):
    """Topological status between two balls.

    ``E`` is only ever produced by :func:`classify`; it is never a valid
    target in a relation table.
    """

    D = "D"
    O = "O"  # noqa: E741
    P = "P"
    PBAR = "Pbar"
    E = "E"

    @property
    def inverse(self) -> "Rel":
        return _INVERSE[self]

    @classmethod
    def parse(cls, text: str) -> "Rel":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown relation {text!r}; expected one of D, O, P, Pbar") from None


_INVERSE = {Rel.D: Rel.D, Rel.O: Rel.O, Rel.P: Rel.PBAR, Rel.PBAR: Rel.P, Rel.E: Rel.E}

TARGET_RELATIONS = (Rel.D, Rel.O, Rel.P, Rel.PBAR)


@dataclass(eq=False)
class Ball:
    label: str
    params: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float).copy()
        if self.params.ndim != 1 or self.params.size < 3:
            raise ValueError(f"ball {self.label!r}: params must be a vector of length n+1 with n >= 2")

    @classmethod
    def from_center(cls, label: str, center, radius: float) -> "Ball":
        if radius <= 0:
            raise ValueError("radius must be positive")
        return cls(label, np.append(np.asarray(center, dtype=float), np.log(radius)))

    @property
    def dim(self) -> int:
        return self.params.size - 1

    @property
    def center(self) -> np.ndarray:
        return self.params[:-1]

    @property
    def radius(self) -> float:
        return float(np.exp(self.params[-1]))

    def copy(self) -> "Ball":
        return Ball(self.label, self.params)

    def to_dict(self) -> dict:
        return {"label": self.label, "params": [float(x) for x in self.params]}

    @classmethod
    def from_dict(cls, data: dict) -> "Ball":
        return cls(str(data["label"]), np.asarray(data["params"], dtype=float))

    def __eq__(self, other):
        if not isinstance(other, Ball):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.params, other.params)


def _check_dims(w: Ball, v: Ball) -> None:
    if w.dim != v.dim:
        raise ValueError(f"dimension mismatch: {w.label!r} has n={w.dim}, {v.label!r} has n={v.dim}")


def center_distance(a: Ball, b: Ball) -> float:
    _check_dims(a, b)
    return float(np.linalg.norm(a.center - b.center))


def predicate(rel: Rel, dist: float, rw: float, rv: float) -> bool:
    """Evaluate ``rel(w, v)`` from the center distance and the two radii."""
    if rel is Rel.D:
        return dist >= rw + rv
    if rel is Rel.O:
        # |rw - rv| < dist < rw + rv, written with the same float expressions
        # as D, P and Pbar so the four predicates stay exhaustive after rounding
        return dist < rw + rv and dist + rw > rv and dist + rv > rw
    if rel is Rel.P:
        return dist + rw <= rv
    if rel is Rel.PBAR:
        return dist + rv <= rw
    if rel is Rel.E:
        return dist + rw <= rv and dist + rv <= rw
    raise ValueError(f"unknown relation {rel!r}")


def holds(rel: Rel, w: Ball, v: Ball) -> bool:
    _check_dims(w, v)
    return predicate(Rel(rel), center_distance(w, v), w.radius, v.radius)


def classify_values(dist: float, rw: float, rv: float) -> Rel:
    p = predicate(Rel.P, dist, rw, rv)
    pbar = predicate(Rel.PBAR, dist, rw, rv)
    if p and pbar:
        return Rel.E
    if p:
        return Rel.P
    if pbar:
        return Rel.PBAR
    if predicate(Rel.D, dist, rw, rv):
        return Rel.D
    # jointly exhaustive: anything left is a partial overlap
    return Rel.O


def classify(w: Ball, v: Ball) -> Rel:
    """Return the status holding between ``w`` and ``v`` (``E`` when both P and Pbar hold)."""
    _check_dims(w, v)
    return classify_values(center_distance(w, v), w.radius, v.radius)
