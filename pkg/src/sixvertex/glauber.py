"""Single-cell Glauber (Metropolis) dynamics.

A step draws one cell index and one uniform.  If the cell's bounding edges form
a directed cycle they are reversed with probability min(1, w(y)/w(x)); the
ratio only involves the vertices at the cell's corners.

Random numbers come from a counter-based Philox generator and are consumed in
fixed blocks, so the pure-Python :func:`propose_and_step` and the compiled
:func:`run` produce identical chains from the same seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numba as nb
import numpy as np

from .lattice import (
    TYPE_TABLE,
    BoundaryCondition,
    Configuration,
    Weights,
    ground_state_red,
    lattice,
    log_weights_array,
    to_paths,
)

BLOCK = 1 << 16


class RandomStream:
    """Blocks of (cell index, uniform) pairs drawn from a Philox generator."""

    def __init__(self, seed, n_choices: int, stream: int = 0):
        ss = np.random.SeedSequence(seed)
        if stream:
            ss = ss.spawn(stream + 1)[stream]
        self.rng = np.random.Generator(np.random.Philox(ss))
        self.n_choices = n_choices
        self._faces = np.empty(0, dtype=np.int64)
        self._us = np.empty(0)
        self._pos = 0

    def _refill(self):
        self._faces = self.rng.integers(0, self.n_choices, size=BLOCK, dtype=np.int64)
        self._us = self.rng.random(BLOCK)
        self._pos = 0

    def take(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Next k draws, refilling block by block."""
        fs, us = [], []
        while k > 0:
            if self._pos >= self._faces.size:
                self._refill()
            m = min(k, self._faces.size - self._pos)
            fs.append(self._faces[self._pos:self._pos + m])
            us.append(self._us[self._pos:self._pos + m])
            self._pos += m
            k -= m
        if not fs:
            return np.empty(0, np.int64), np.empty(0)
        return np.concatenate(fs), np.concatenate(us)


@dataclass
class Kernel:
    """Lookup tables handed to the compiled step loop."""

    n: int
    face_edges: np.ndarray
    face_ccw: np.ndarray
    face_vertices: np.ndarray
    vertex_edges: np.ndarray
    log_w: np.ndarray  # per vertex type
    n_faces: int
    lazy: bool

    @classmethod
    def build(cls, n: int, boundary: BoundaryCondition, w: Weights, lazy: bool = False) -> "Kernel":
        lat = lattice(n)
        faces = lat.flippable_faces(boundary)
        fe, fc, fv = lat.face_arrays(faces)
        log_w = np.array([math.log(float(x)) for x in w.by_type()])
        return cls(n, fe, fc, fv, lat.vertex_edges, log_w, len(faces), lazy)

    @property
    def n_choices(self) -> int:
        return self.n_faces * (2 if self.lazy else 1)


@nb.njit(cache=True)
def _vertex_logw(bits, ve, v, log_w):
    code = (bits[ve[v, 0]] << 3) | (bits[ve[v, 1]] << 2) | (bits[ve[v, 2]] << 1) | bits[ve[v, 3]]
    t = _TYPE[code]
    return log_w[t]


_TYPE = TYPE_TABLE.astype(np.int64)


@nb.njit(cache=True)
def _try_flip(bits, f, u, fe, fc, fv, ve, log_w):
    """Returns 0 not cyclic, 1 accepted, 2 rejected."""
    aligned = 0
    anti = 0
    m = 0
    for k in range(4):
        e = fe[f, k]
        if e < 0:
            break
        m += 1
        if bits[e] == fc[f, k]:
            aligned += 1
        else:
            anti += 1
    if aligned != m and anti != m:
        return 0
    old = 0.0
    for k in range(4):
        v = fv[f, k]
        if v >= 0:
            old += _vertex_logw(bits, ve, v, log_w)
    for k in range(m):
        bits[fe[f, k]] ^= 1
    new = 0.0
    for k in range(4):
        v = fv[f, k]
        if v >= 0:
            new += _vertex_logw(bits, ve, v, log_w)
    d = new - old
    if d >= 0.0 or u < math.exp(d):
        return 1
    for k in range(m):
        bits[fe[f, k]] ^= 1
    return 2


@nb.njit(cache=True)
def _run_block(bits, faces, us, n_faces, fe, fc, fv, ve, log_w):
    acc = 0
    for s in range(faces.shape[0]):
        f = faces[s]
        if f >= n_faces:
            continue
        if _try_flip(bits, f, us[s], fe, fc, fv, ve, log_w) == 1:
            acc += 1
    return acc


@nb.njit(cache=True)
def _run_until_cross(bits, faces, us, n_faces, fe, fc, fv, ve, log_w, xr, nbr, n, color, count):
    """Steps until a monochromatic cross of ``color`` appears; returns (steps used, hit).

    ``count`` tracks the number of edges of that color; a cross needs at
    least n + 1 of them, so the search only runs past that threshold.
    """
    from_color = count
    for s in range(faces.shape[0]):
        f = faces[s]
        if f >= n_faces:
            continue
        if _try_flip(bits, f, us[s], fe, fc, fv, ve, log_w) == 1:
            for k in range(4):
                e = fe[f, k]
                if e < 0:
                    break
                if (bits[e] == xr[e]) == color:
                    from_color += 1
                else:
                    from_color -= 1
            if from_color >= n + 1:
                if _cross_kernel(bits, xr, ve, nbr, n, color):
                    return s + 1, True, from_color
    return faces.shape[0], False, from_color


from .faultline import _cross as _cross_kernel  # noqa: E402  (compiled helper shared with classification)
from .faultline import CrossChecker  # noqa: E402


@dataclass
class ChainState:
    config: Configuration
    weights: Weights
    stream: RandomStream
    kernel: Kernel
    step_count: int = 0
    accepted: int = 0

    @classmethod
    def start(cls, config: Configuration, weights: Weights, seed, lazy: bool = False, stream: int = 0) -> "ChainState":
        k = Kernel.build(config.n, config.boundary, weights, lazy)
        return cls(config, weights, RandomStream(seed, k.n_choices, stream), k)

    @property
    def bits(self) -> np.ndarray:
        return self.config.bits


def propose_and_step(state: ChainState) -> ChainState:
    """One proposal, written out in plain Python (reference implementation)."""
    k = state.kernel
    (f,), (u,) = state.stream.take(1)
    bits = state.config.bits.copy()
    accepted = state.accepted
    if f < k.n_faces:
        edges = [e for e in k.face_edges[f] if e >= 0]
        ccw = k.face_ccw[f][: len(edges)]
        cur = bits[edges]
        if np.array_equal(cur, ccw) or np.array_equal(cur, 1 - ccw):
            verts = [v for v in k.face_vertices[f] if v >= 0]
            ve = k.vertex_edges
            def logw(b):
                total = 0.0
                for v in verts:
                    L, B, R, T = (int(b[e]) for e in ve[v])
                    total += k.log_w[TYPE_TABLE[(L << 3) | (B << 2) | (R << 1) | T]]
                return total
            new = bits.copy()
            new[edges] ^= 1
            ratio = math.exp(min(0.0, logw(new) - logw(bits)))
            if u < ratio or ratio >= 1.0:
                bits = new
                accepted += 1
    cfg = Configuration(state.config.n, bits, state.config.boundary)
    return ChainState(cfg, state.weights, state.stream, k, state.step_count + 1, accepted)


def advance(state: ChainState, steps: int) -> ChainState:
    """Compiled equivalent of calling :func:`propose_and_step` ``steps`` times."""
    k = state.kernel
    bits = state.config.bits.copy()
    acc = state.accepted
    left = steps
    while left > 0:
        m = min(left, BLOCK)
        faces, us = state.stream.take(m)
        acc += _run_block(bits, faces, us, k.n_faces, k.face_edges, k.face_ccw, k.face_vertices, k.vertex_edges, k.log_w)
        left -= m
    cfg = Configuration(state.config.n, bits, state.config.boundary)
    return ChainState(cfg, state.weights, state.stream, k, state.step_count + steps, acc)


# ----------------------------------------------------------------------
# observables
# ----------------------------------------------------------------------
def _red_fraction(state: ChainState) -> float:
    xr = ground_state_red(state.config.n).bits
    return float((state.bits == xr).mean())


def _path_deviations(state: ChainState) -> list[float]:
    from .ferro import path_deviation

    return [path_deviation(p) for p in to_paths(state.config)]


def _log_weight(state: ChainState) -> float:
    return float(log_weights_array(state.config.type_counts(), state.weights))


def _cross_flags(state: ChainState):
    cc = _cross_checker(state.config.n)
    return cc.red_cross(state.bits), cc.green_cross(state.bits)


_CHECKERS: dict[int, CrossChecker] = {}


def _cross_checker(n: int) -> CrossChecker:
    if n not in _CHECKERS:
        _CHECKERS[n] = CrossChecker(n)
    return _CHECKERS[n]


OBSERVABLES: dict[str, Callable] = {
    "vertex_counts": lambda s: s.config.type_counts().tolist(),
    "red_fraction": _red_fraction,
    "in_CR": lambda s: bool(_cross_flags(s)[0]),
    "in_CG": lambda s: bool(_cross_flags(s)[1]),
    "path_deviations": _path_deviations,
    "path": lambda s: [p.full_steps() for p in to_paths(s.config)],
    "log_weight": _log_weight,
    "accepted": lambda s: s.accepted,
}


def register_observable(name: str, fn: Callable) -> None:
    OBSERVABLES[name] = fn


@dataclass
class Trajectory:
    records: list[dict] = field(default_factory=list)

    def steps(self) -> list[int]:
        return [r["step"] for r in self.records]

    def column(self, name: str) -> list:
        return [r[name] for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


def run(
    state: ChainState,
    steps: int,
    observables: Sequence[str] = ("vertex_counts",),
    thinning: int = 1,
    extra: Optional[dict[str, Callable]] = None,
) -> tuple[ChainState, Trajectory]:
    """Advance ``steps`` proposals, recording observables every ``thinning`` steps.

    The initial state is always recorded.  Determinism comes from the seed the
    state was started with.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if thinning < 1:
        raise ValueError("thinning must be positive")
    table = dict(OBSERVABLES)
    table.update(extra or {})
    unknown = [o for o in observables if o not in table]
    if unknown:
        raise ValueError(f"unknown observable(s): {unknown}; known: {sorted(table)}")
    traj = Trajectory()

    def record(s):
        rec = {"step": s.step_count}
        for o in observables:
            rec[o] = table[o](s)
        traj.records.append(rec)

    record(state)
    done = 0
    while done < steps:
        m = min(thinning, steps - done)
        state = advance(state, m)
        done += m
        record(state)
    return state, traj


# ----------------------------------------------------------------------
# specialised drivers
# ----------------------------------------------------------------------
def first_cross_time(state: ChainState, steps: int, color: str = "green") -> tuple[Optional[int], ChainState]:
    """Steps until a monochromatic cross of ``color`` first appears (None if never within ``steps``)."""
    n = state.config.n
    if not state.config.boundary.is_free:
        raise ValueError("crosses are defined under free boundary only")
    cc = _cross_checker(n)
    want = color == "red"
    k = state.kernel
    bits = state.config.bits.copy()
    count = int(((bits == cc.xr) == want).sum())
    if _cross_kernel(bits, cc.xr, cc.ve, cc.nbr, n, want):
        return 0, state
    used = 0
    hit = False
    while used < steps and not hit:
        m = min(BLOCK, steps - used)
        faces, us = state.stream.take(m)
        s, hit, count = _run_until_cross(
            bits, faces, us, k.n_faces, k.face_edges, k.face_ccw, k.face_vertices, k.vertex_edges, k.log_w,
            cc.xr, cc.nbr, n, want, count,
        )
        used += s
    cfg = Configuration(n, bits, state.config.boundary)
    # the remaining draws of a partly used block are discarded
    out = ChainState(cfg, state.weights, state.stream, k, state.step_count + used, state.accepted)
    return (used if hit else None), out


@nb.njit(cache=True)
def _visit_counts(bits, faces, us, n_faces, fe, fc, fv, ve, log_w, key_w, key_keys, counts):
    """Advance and histogram states by an integer key sum(bits * key_w) looked up in sorted key_keys."""
    for s in range(faces.shape[0]):
        f = faces[s]
        if f < n_faces:
            _try_flip(bits, f, us[s], fe, fc, fv, ve, log_w)
        key = 0
        for e in range(key_w.shape[0]):
            if key_w[e] != 0 and bits[e]:
                key += key_w[e]
        idx = np.searchsorted(key_keys, key)
        counts[idx] += 1


def state_histogram(state: ChainState, steps: int, space) -> tuple[np.ndarray, ChainState]:
    """Visit counts over an enumerated state space, one count per step (the start state excluded)."""
    E = lattice(state.config.n).n_edges
    free = np.flatnonzero(space.bits.min(axis=0) != space.bits.max(axis=0))
    key_w = np.zeros(E, dtype=np.int64)
    if free.size <= 62:
        key_w[free] = 1 << np.arange(free.size, dtype=np.int64)
    else:
        # random linear hash with wraparound; checked for collisions below
        key_w[free] = np.random.default_rng(0x5EED).integers(1, 1 << 62, size=free.size, dtype=np.int64)
    keys = (space.bits.astype(np.int64) * key_w).sum(axis=1)
    order = np.argsort(keys)
    sorted_keys = keys[order]
    if np.any(sorted_keys[1:] == sorted_keys[:-1]):
        raise ValueError("state keys collide on this space")
    counts = np.zeros(space.size, dtype=np.int64)
    k = state.kernel
    bits = state.config.bits.copy()
    left = steps
    while left > 0:
        m = min(left, BLOCK)
        faces, us = state.stream.take(m)
        _visit_counts(bits, faces, us, k.n_faces, k.face_edges, k.face_ccw, k.face_vertices, k.vertex_edges, k.log_w, key_w, sorted_keys, counts)
        left -= m
    hist = np.zeros(space.size, dtype=np.int64)
    hist[order] = counts
    cfg = Configuration(state.config.n, bits, state.config.boundary)
    return hist, ChainState(cfg, state.weights, state.stream, k, state.step_count + steps, state.accepted)


def path_view_flip(config: Configuration, face_index: int) -> Optional[Configuration]:
    """The same move described on lattice paths: swap an EN corner for NE (or back) around the cell.

    Returns None when the cell is not flippable.  Used to check that the edge
    view and the mountain-valley path view coincide.
    """
    lat = lattice(config.n)
    f = lat.faces[face_index]
    kept = {e: int(config.bits[e]) for e in f.edges}
    p, q = f.p, f.q
    bottom = lat.h(q - 1, p) if q >= 1 else None
    right = lat.v(q, p) if p <= config.n - 1 else None
    top = lat.h(q, p) if q <= config.n - 1 else None
    left = lat.v(q, p - 1) if p >= 1 else None
    get = lambda e: None if e is None else kept[e]
    # EN corner: bottom and right kept, top and left not kept
    en = get(bottom) in (1, None) and get(right) in (1, None) and get(top) in (0, None) and get(left) in (0, None)
    ne = get(bottom) in (0, None) and get(right) in (0, None) and get(top) in (1, None) and get(left) in (1, None)
    if not (en or ne):
        return None
    bits = config.bits.copy()
    for e in f.edges:
        bits[e] ^= 1
    return Configuration(config.n, bits, config.boundary)
