"""Global optimization of topological transitions over a relation table.

The solver keeps all balls in one ``(m, n+1)`` parameter array.  For every
ordered pair with a target it walks the transition map one edge at a time,
running plain gradient descent on the rectified unit of that edge while only
the later ball of the pair moves.  A leg that reaches zero is snapped onto a
randomly drawn ideal distance of its destination status; a step that does not
is followed by a search over discrete rotations of the moving ball about its
partner, keeping whichever placement lowers the global loss.  Rounds repeat,
with a per-ball descent on the global loss between them, until the loss is
zero or the round budget runs out.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from eulerball.geometry import TARGET_RELATIONS, Ball, Rel, classify_values, predicate
from eulerball.resu import (
    IdealSpec,
    SingularityError,
    Transition,
    ideal_loss_raw,
    ideal_range,
    resu_grad_raw,
    resu_raw,
    rotation_table,
)

log = logging.getLogger(__name__)

JITTER = 1e-6
_EPS = np.finfo(float).eps


class RelationTable:
    """Sparse map from ordered label pairs to target relations.

    ``target(a, b)`` also answers for pairs stored the other way round, via
    the inverse relation.
    """

    def __init__(self, labels: Iterable[str], entries=None):
        self.labels = list(labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate ball labels")
        self._known = set(self.labels)
        self.entries: dict[tuple[str, str], Rel] = {}
        for (a, b), rel in (entries or {}).items():
            self.add(a, b, rel)

    def add(self, a: str, b: str, rel) -> None:
        rel = Rel(rel)
        if rel not in TARGET_RELATIONS:
            raise ValueError(f"{rel.value} cannot be a target relation")
        for x in (a, b):
            if x not in self._known:
                raise KeyError(f"label {x!r} does not name a ball")
        if a == b:
            raise ValueError(f"self pair ({a}, {a})")
        if (a, b) in self.entries and self.entries[(a, b)] is not rel:
            raise ValueError(f"conflicting targets for ({a}, {b}): {self.entries[(a, b)].value} and {rel.value}")
        back = self.entries.get((b, a))
        if back is not None and back.inverse is not rel:
            raise ValueError(f"({a}, {b}) = {rel.value} contradicts ({b}, {a}) = {back.value}")
        self.entries[(a, b)] = rel

    def target(self, a: str, b: str) -> Rel | None:
        rel = self.entries.get((a, b))
        if rel is not None:
            return rel
        rel = self.entries.get((b, a))
        return rel.inverse if rel is not None else None

    def degree(self, label: str) -> int:
        return sum(label in pair for pair in self.entries)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        if not isinstance(other, RelationTable):
            return NotImplemented
        return self.labels == other.labels and self.entries == other.entries

    def __repr__(self):
        body = ", ".join(f"{r.value}({a},{b})" for (a, b), r in self.entries.items())
        return f"RelationTable({{{body}}})"

    def to_dict(self) -> dict:
        return {
            "balls": list(self.labels),
            "relations": [{"a": a, "b": b, "rel": r.value} for (a, b), r in self.entries.items()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RelationTable":
        if not isinstance(data, dict) or "balls" not in data:
            raise ValueError("table must be an object with a 'balls' list")
        table = cls([str(x) for x in data["balls"]])
        for item in data.get("relations", []):
            table.add(str(item["a"]), str(item["b"]), Rel.parse(str(item["rel"])))
        return table

    @classmethod
    def from_json(cls, text: str) -> "RelationTable":
        return cls.from_dict(json.loads(text))


@dataclass
class SolverConfig:
    n: int = 2
    n_d: int = 3
    n_o: int = 3
    n_p: int = 3
    m_rot: int = 72
    max_iter: int = 1000
    lr: float = 0.005
    seed: int = 0
    snap_tol: float = 1e-3
    equalize_default: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension n must be >= 2")
        for name in ("n_d", "n_o", "n_p", "m_rot", "max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if not self.snap_tol > 0:
            raise ValueError("snap tolerance must be positive")

    def n_ideal(self, rel: Rel) -> int:
        return {Rel.D: self.n_d, Rel.O: self.n_o, Rel.P: self.n_p, Rel.PBAR: self.n_p}[rel]


@dataclass
class SolveReport:
    balls: list[Ball]
    loss: float
    rounds: int
    satisfied: list[dict]
    seed: int
    unsnapped: list[tuple[str, str]] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.loss == 0

    def ball(self, label: str) -> Ball:
        for b in self.balls:
            if b.label == label:
                return b
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "balls": [b.to_dict() for b in self.balls],
            "loss": float(self.loss),
            "rounds": self.rounds,
            "satisfied": [dict(s) for s in self.satisfied],
            "seed": self.seed,
            "unsnapped": [list(p) for p in self.unsnapped],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolveReport":
        return cls(
            balls=[Ball.from_dict(b) for b in data["balls"]],
            loss=float(data["loss"]),
            rounds=int(data["rounds"]),
            satisfied=[dict(s) for s in data["satisfied"]],
            seed=int(data["seed"]),
            unsnapped=[tuple(p) for p in data.get("unsnapped", [])],
        )

    def __eq__(self, other):
        if not isinstance(other, SolveReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


_NEIGHBORS = {
    Rel.D: (Rel.O,),
    Rel.O: (Rel.D, Rel.P, Rel.PBAR),
    Rel.P: (Rel.O,),
    Rel.PBAR: (Rel.O,),
}


def route(src: Rel, dst: Rel) -> list[Transition]:
    """Shortest walk from ``src`` to ``dst`` on the transition map (at most two legs)."""
    src, dst = Rel(src), Rel(dst)
    if dst is Rel.E:
        raise ValueError("E is not a target relation")
    if src is Rel.E:
        if dst in (Rel.P, Rel.PBAR):
            return []
        src = Rel.P
    if src is dst:
        return []
    if dst in _NEIGHBORS[src]:
        return [Transition(src, dst)]
    return [Transition(src, Rel.O), Transition(Rel.O, dst)]


def sort_by_degree(labels: Sequence[str], table: RelationTable) -> list[str]:
    return sorted(labels, key=lambda x: (-table.degree(x), x))


_CODES = {Rel.D: 0, Rel.O: 1, Rel.P: 2, Rel.PBAR: 3}


def _loss_core(centers: np.ndarray, radii: np.ndarray, entries) -> np.ndarray | float:
    """Sum of squared target violations.

    ``centers`` is ``(..., m, n)``; leading axes batch over candidate
    placements.  Entries are summed one at a time in table order so that a
    batched evaluation is bit-identical to evaluating each placement alone.
    """
    total = np.zeros(centers.shape[:-2])
    for i, j, code in entries:
        diff = centers[..., i, :] - centers[..., j, :]
        dist = np.sqrt((diff * diff).sum(-1))
        ri, rj = radii[i], radii[j]
        if code == 0:
            v = np.maximum(ri + rj - dist, 0.0)
            term = v * v
        elif code == 2:
            v = np.maximum(dist + ri - rj, 0.0)
            term = v * v
        elif code == 3:
            v = np.maximum(dist + rj - ri, 0.0)
            term = v * v
        else:
            out = np.maximum(dist - (ri + rj), 0.0)
            inn = np.maximum(np.maximum(ri - rj, rj - ri) - dist, 0.0)
            term = out * out + inn * inn
            # O is strict on both sides; an exact-boundary miss still counts
            miss = ~((dist < ri + rj) & (dist + ri > rj) & (dist + rj > ri))
            tiny = (_EPS * (ri + rj)) ** 2
            term = np.where(miss & (term == 0), tiny, term)
        total = total + term
    return total


def _violation_grad(code: int, dist: float, ri: float, rj: float):
    """Gradient of one squared violation w.r.t. (dist, r_i, r_j)."""
    if code == 0:
        v = ri + rj - dist
        return (-2 * v, 2 * v, 2 * v) if v > 0 else (0.0, 0.0, 0.0)
    if code == 2:
        v = dist + ri - rj
        return (2 * v, 2 * v, -2 * v) if v > 0 else (0.0, 0.0, 0.0)
    if code == 3:
        v = dist + rj - ri
        return (2 * v, -2 * v, 2 * v) if v > 0 else (0.0, 0.0, 0.0)
    gd = gi = gj = 0.0
    out = dist - (ri + rj)
    if out > 0:
        gd, gi, gj = 2 * out, -2 * out, -2 * out
    inn = abs(ri - rj) - dist
    if inn > 0:
        s = 1.0 if ri > rj else -1.0
        gd, gi, gj = gd - 2 * inn, gi + 2 * inn * s, gj - 2 * inn * s
    return gd, gi, gj


class Solver:
    """Mutable optimization state for one relation table."""

    def __init__(self, table: RelationTable, config: SolverConfig, balls: Sequence[Ball] | None = None):
        self.table = table
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.labels = list(table.labels)
        self.index = {label: i for i, label in enumerate(self.labels)}
        m, n = len(self.labels), config.n
        if balls is None:
            centers = self.rng.uniform(-1.0, 1.0, size=(m, n))
            logr = self.rng.uniform(-0.5, 0.5, size=m)
            self.W = np.column_stack([centers, logr]) if m else np.zeros((0, n + 1))
        else:
            by_label = {b.label: b for b in balls}
            missing = [x for x in self.labels if x not in by_label]
            if missing:
                raise KeyError(f"no ball for labels {missing}")
            self.W = np.array([by_label[x].params for x in self.labels], dtype=float).reshape(m, -1)
            if m and self.W.shape[1] != n + 1:
                raise ValueError(f"balls have n={self.W.shape[1] - 1}, config says n={n}")
        if config.equalize_default:
            self._equalize_defaults()
        self.entries = [(self.index[a], self.index[b], _CODES[r]) for (a, b), r in table.entries.items()]
        self.unsnapped: set[tuple[int, int]] = set()

    def _equalize_defaults(self) -> None:
        # unconstrained pairs get P or Pbar at random, which drives them to E
        filled = RelationTable(self.labels, self.table.entries)
        for a, b in combinations(self.labels, 2):
            if filled.target(a, b) is None:
                filled.add(a, b, Rel.P if self.rng.integers(2) == 0 else Rel.PBAR)
        self.table = filled

    # -- basic quantities -------------------------------------------------

    def radii(self, W=None) -> np.ndarray:
        W = self.W if W is None else W
        return np.exp(W[:, -1])

    def global_loss(self, W=None) -> float:
        W = self.W if W is None else W
        return float(_loss_core(W[:, :-1], self.radii(W), self.entries))

    def relation_holds(self, j: int, k: int, rel: Rel) -> bool:
        d = float(np.linalg.norm(self.W[j, :-1] - self.W[k, :-1]))
        return predicate(rel, d, float(np.exp(self.W[j, -1])), float(np.exp(self.W[k, -1])))

    def status(self, j: int, k: int) -> Rel:
        d = float(np.linalg.norm(self.W[j, :-1] - self.W[k, :-1]))
        return classify_values(d, float(np.exp(self.W[j, -1])), float(np.exp(self.W[k, -1])))

    def _jitter(self, j: int) -> None:
        u = self.rng.normal(size=self.config.n)
        self.W[j, :-1] += JITTER * u / np.linalg.norm(u)

    def _with_jitter(self, j: int, fn):
        try:
            return fn()
        except SingularityError:
            self._jitter(j)
            return fn()

    # -- pieces of the main loop ------------------------------------------

    def rotation_candidates(self, j: int, k: int) -> tuple[list[tuple[int, int, int]], np.ndarray]:
        """All rotated centers of ball ``j`` about ball ``k``, in (p, q, l) order."""
        n, M = self.config.n, self.config.m_rot
        cos, sin = (np.array(t) for t in rotation_table(M))
        cw, cv = self.W[j, :-1], self.W[k, :-1]
        keys, blocks = [], []
        for p, q in combinations(range(n), 2):
            dp = cw[p] - cv[p]
            dq = cw[q] - cv[q]
            block = np.tile(cw, (M, 1))
            block[:, p] = dp * cos - dq * sin + cv[p]
            block[:, q] = dp * sin + dq * cos + cv[q]
            blocks.append(block)
            keys.extend((p, q, l) for l in range(1, M + 1))
        return keys, np.concatenate(blocks)

    def rotation_search(self, j: int, k: int) -> tuple[int, int, int] | None:
        """Move ball ``j`` to the best rotated placement about ``k``; return its key or None."""
        keys, cands = self.rotation_candidates(j, k)
        base = self.W[:, :-1]
        batch = np.broadcast_to(base, (len(cands),) + base.shape).copy()
        batch[:, j, :] = cands
        losses = _loss_core(batch, self.radii(), self.entries)
        current = self.global_loss()
        best = int(np.argmin(losses))
        if losses[best] < current:
            self.W[j, :-1] = cands[best]
            return keys[best]
        return None

    def ideal_step_terms(self, j: int, k: int, rel: Rel, spec: IdealSpec):
        """Residual and gradient (w.r.t. ball ``j``) of the ideal-distance loss."""
        pj, pk = self.W[j], self.W[k]
        if rel is Rel.O:
            if pj[-1] <= pk[-1]:
                _, g, _, res = ideal_loss_raw(spec, pj, pk)
            else:
                _, _, g, res = ideal_loss_raw(spec, pk, pj)
        elif rel is Rel.PBAR:
            _, _, g, res = ideal_loss_raw(spec, pk, pj)
        else:
            _, g, _, res = ideal_loss_raw(spec, pj, pk)
        return res, g

    def snap_to_ideal(self, j: int, k: int, rel: Rel, l: int) -> int:
        """Descend on the ideal loss until ball ``j`` sits at ideal ``l`` of ``rel``; return steps."""
        cfg = self.config
        spec = IdealSpec(Rel.P if rel is Rel.PBAR else rel, l, cfg.n_ideal(rel))
        best, best_res = self.W[j].copy(), np.inf
        steps = 0
        while True:
            try:
                res, g = self._with_jitter(j, lambda: self.ideal_step_terms(j, k, rel, spec))
            except ValueError:
                # radius ordering flipped (E-like pair); nothing sensible to snap to
                break
            ok = self.relation_holds(j, k, rel)
            scale = float(np.exp(self.W[j, -1]) + np.exp(self.W[k, -1]))
            if ok and abs(res) < best_res:
                best, best_res = self.W[j].copy(), abs(res)
            if ok and abs(res) <= cfg.snap_tol * scale:
                self.unsnapped.discard((j, k))
                return steps
            if steps >= cfg.max_iter:
                break
            self.W[j] -= cfg.lr * g
            steps += 1
        if np.isfinite(best_res):
            self.W[j] = best
        self.unsnapped.add((j, k))
        return steps

    def optimize_leg(self, j: int, k: int, t: Transition) -> int:
        """Run one transition leg for the pair (j, k); return the number of descent steps."""
        cfg = self.config
        if resu_raw(t, self.W[j], self.W[k]) == 0:
            return 0
        z = 0
        while True:
            _, g, _ = self._with_jitter(j, lambda: resu_grad_raw(t, self.W[j], self.W[k]))
            self.W[j] -= cfg.lr * g
            if resu_raw(t, self.W[j], self.W[k]) == 0:
                lo, hi = ideal_range(Rel.P if t.dst is Rel.PBAR else t.dst, cfg.n_ideal(t.dst))
                l = int(self.rng.integers(lo, hi + 1))
                self.snap_to_ideal(j, k, t.dst, l)
                return z + 1
            self.rotation_search(j, k)
            z += 1
            if z >= cfg.max_iter:
                log.debug("leg %s on (%s, %s) hit the step cap", t, self.labels[j], self.labels[k])
                return z

    def loss_gradient(self, i: int) -> np.ndarray:
        """Gradient of the global loss w.r.t. ball ``i`` (zero subgradient at kinks)."""
        g = np.zeros(self.config.n + 1)
        radii = self.radii()
        for a, b, code in self.entries:
            if i != a and i != b:
                continue
            diff = self.W[a, :-1] - self.W[b, :-1]
            dist = float(np.sqrt(diff @ diff))
            gd, ga, gb = _violation_grad(code, dist, float(radii[a]), float(radii[b]))
            if gd != 0:
                if dist == 0:
                    raise SingularityError("coincident centers in the global loss")
                u = diff / dist
                g[:-1] += gd * u if i == a else -gd * u
            g[-1] += (ga * radii[a]) if i == a else (gb * radii[b])
        return g

    def descend_all(self, order: Sequence[int]) -> float:
        """Per-ball descent on the global loss, each ball until the loss stops dropping."""
        cfg = self.config
        current = self.global_loss()
        for i in order:
            for _ in range(cfg.max_iter):
                if current == 0:
                    return 0.0
                g = self._with_jitter(i, lambda: self.loss_gradient(i))
                if not g.any():
                    break
                trial = self.W.copy()
                trial[i] -= cfg.lr * g
                new = self.global_loss(trial)
                if not new < current:
                    break
                self.W, current = trial, new
        return current

    def run(self) -> SolveReport:
        cfg = self.config
        order = [self.index[x] for x in sort_by_degree(self.labels, self.table)]
        rounds = 0
        gloss = self.global_loss()
        while rounds < cfg.max_iter and gloss > 0:
            for a in range(len(order) - 1):
                k = order[a]
                for b in range(a + 1, len(order)):
                    j = order[b]
                    target = self.table.target(self.labels[j], self.labels[k])
                    if target is None or self.relation_holds(j, k, target):
                        continue
                    for leg in route(self.status(j, k), target):
                        self.optimize_leg(j, k, leg)
            gloss = self.global_loss()
            if gloss > 0:
                gloss = self.descend_all(order)
            rounds += 1
        return self.report(rounds)

    def report(self, rounds: int) -> SolveReport:
        balls = [Ball(label, self.W[i]) for i, label in enumerate(self.labels)]
        satisfied = []
        for (a, b), rel in self.table.entries.items():
            satisfied.append(
                {"a": a, "b": b, "rel": rel.value, "satisfied": self.relation_holds(self.index[a], self.index[b], rel)}
            )
        unsnapped = sorted((self.labels[j], self.labels[k]) for j, k in self.unsnapped)
        return SolveReport(balls, self.global_loss(), rounds, satisfied, self.config.seed, unsnapped)


def global_loss(balls: Sequence[Ball], table: RelationTable) -> float:
    by_label = {b.label: b for b in balls}
    try:
        W = np.array([by_label[x].params for x in table.labels], dtype=float)
    except KeyError as exc:
        raise KeyError(f"no ball for label {exc.args[0]!r}") from None
    index = {x: i for i, x in enumerate(table.labels)}
    entries = [(index[a], index[b], _CODES[r]) for (a, b), r in table.entries.items()]
    if not len(W):
        return 0.0
    return float(_loss_core(W[:, :-1], np.exp(W[:, -1]), entries))


def _solver_for(balls: Sequence[Ball], table: RelationTable, config: SolverConfig) -> Solver:
    cfg = SolverConfig(**{**config.__dict__, "n": balls[0].dim}) if balls else config
    return Solver(table, cfg, balls)


def _as_index(solver: Solver, x) -> int:
    return solver.index[x] if isinstance(x, str) else int(x)


def optimize_leg(j, k, t: Transition, balls: Sequence[Ball], table: RelationTable, config: SolverConfig, rng=None):
    """Functional wrapper: run one leg for labels/indices ``j``, ``k`` and return new balls."""
    solver = _solver_for(balls, table, config)
    if rng is not None:
        solver.rng = rng
    solver.optimize_leg(_as_index(solver, j), _as_index(solver, k), t)
    return solver.report(0).balls


def snap_to_ideal(j, k, spec: IdealSpec, balls: Sequence[Ball], config: SolverConfig, rel: Rel | None = None):
    """Snap the pair onto ``spec``; ``rel=Rel.PBAR`` snaps ``k`` inside ``j`` instead.

    Returns ``(balls, snapped)``.
    """
    labels = [b.label for b in balls]
    solver = _solver_for(balls, RelationTable(labels), config)
    if spec.relation is Rel.P:
        relation = rel or Rel.P
    else:
        relation = spec.relation
    cfg = solver.config
    if cfg.n_ideal(relation) != spec.n_ideal:
        solver.config = SolverConfig(**{**cfg.__dict__, {Rel.D: "n_d", Rel.O: "n_o"}.get(relation, "n_p"): spec.n_ideal})
    jj, kk = _as_index(solver, j), _as_index(solver, k)
    solver.snap_to_ideal(jj, kk, relation, spec.k)
    return solver.report(0).balls, (jj, kk) not in solver.unsnapped


def rotation_search(j, k, balls: Sequence[Ball], table: RelationTable, config: SolverConfig):
    """Return ``(balls, key)`` after committing the best rotation of ``j`` about ``k``."""
    solver = _solver_for(balls, table, config)
    key = solver.rotation_search(_as_index(solver, j), _as_index(solver, k))
    return solver.report(0).balls, key


def solve(table: RelationTable, config: SolverConfig | None = None, balls: Sequence[Ball] | None = None) -> SolveReport:
    """Learn a ball configuration realizing ``table``; random start from ``config.seed`` unless balls are given."""
    config = config or SolverConfig()
    return Solver(table, config, balls).run()
