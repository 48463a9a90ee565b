"""Planted tethered paths for the ferroelectric bottleneck.

Weights follow the lattice-path reparameterization: a cross (two paths
sharing a vertex) weighs lambda^2, an empty vertex 1, a straight mu and a
corner 1.  As six-vertex weights this is (a, b, c) = (lambda, mu, 1), which
gives the same Gibbs measure on any fixed boundary.

Coordinates: the instance size ``n`` is the largest vertex coordinate, so the
underlying lattice has n + 1 vertices per side and the central path runs
from (0, 0) to (n, n).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numba as nb
import numpy as np

from .glauber import Kernel, RandomStream, _try_flip
from .lattice import (
    BoundaryCondition,
    Configuration,
    LatticePath,
    Weights,
    from_paths,
    lattice,
    to_paths,
)

MISALIGNMENT = 10  # allowance for off-by-a-few alignment between neighbouring paths


@dataclass(frozen=True)
class IndependentPathsSpec:
    n: int
    ell: Optional[int] = None
    d: Optional[int] = None
    overridden: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        over = []
        if self.ell is None:
            object.__setattr__(self, "ell", default_ell(self.n))
        else:
            over.append("ell")
        if self.d is None:
            object.__setattr__(self, "d", default_d(self.n))
        else:
            over.append("d")
        object.__setattr__(self, "overridden", tuple(over))
        if self.ell < 0 or self.d < 1:
            raise ValueError("need ell >= 0 and d >= 1")
        if self.ell and self.ell * self.d >= self.n:
            raise ValueError(f"paths do not fit: ell*d = {self.ell * self.d} >= n = {self.n}")

    @property
    def size(self) -> int:
        """Vertices per side of the underlying lattice."""
        return self.n + 1

    @property
    def labels(self) -> list[int]:
        """Path labels: 0 is the central path, k > 0 below the diagonal, -k above."""
        return [0] + [k for j in range(1, self.ell + 1) for k in (j, -j)]

    def to_dict(self) -> dict:
        return {"n": self.n, "ell": self.ell, "d": self.d, "overridden": list(self.overridden),
                "default_ell": "floor(n^(1/8))", "default_d": "floor(32 n^(3/4))"}


def default_ell(n: int) -> int:
    return int(math.floor(n ** 0.125 + 1e-12))


def default_d(n: int) -> int:
    return int(math.floor(32 * n ** 0.75 + 1e-9))


def default_theta(n: int) -> float:
    return 8 * n ** 0.75


@dataclass(frozen=True)
class Terminal:
    label: int
    start: tuple[int, int]
    end: tuple[int, int]
    entry: tuple[str, int]
    exit: tuple[str, int]


def terminals(spec: IndependentPathsSpec) -> list[Terminal]:
    n, d = spec.n, spec.d
    out = [Terminal(0, (0, 0), (n, n), ("left", 0), ("right", n))]
    for k in range(1, spec.ell + 1):
        # below: enter vertically at (kd, 0), leave horizontally at (n, n - kd)
        out.append(Terminal(k, (k * d, 0), (n, n - k * d), ("bottom", k * d), ("right", n - k * d)))
        # above: the mirror image
        out.append(Terminal(-k, (0, k * d), (n - k * d, n), ("left", k * d), ("top", n - k * d)))
    return out


def build_boundary(spec: IndependentPathsSpec) -> BoundaryCondition:
    N = spec.size
    sides = {s: [0] * N for s in ("left", "right", "bottom", "top")}
    for t in terminals(spec):
        sides[t.entry[0]][t.entry[1]] = 1
        sides[t.exit[0]][t.exit[1]] = 1
    return BoundaryCondition.explicit(N, sides["left"], sides["right"], sides["bottom"], sides["top"],
                                      kind="independent-paths")


def _walk(start, steps: str) -> tuple[tuple[int, int], ...]:
    x, y = start
    pts = [(x, y)]
    for s in steps:
        if s == "E":
            x += 1
        else:
            y += 1
        pts.append((x, y))
    return tuple(pts)


def _configuration(spec: IndependentPathsSpec, step_map: dict[int, str]) -> Configuration:
    paths = []
    for t in terminals(spec):
        verts = _walk(t.start, step_map[t.label])
        if verts[-1] != t.end:
            raise AssertionError(f"path {t.label} ends at {verts[-1]}, not {t.end}")
        paths.append(LatticePath(t.entry, verts, t.exit))
    cfg = from_paths(paths, spec.size, build_boundary(spec))
    cfg.validate()
    return cfg


def staircase_state(spec: IndependentPathsSpec) -> Configuration:
    """Every path a perfect staircase along its own diagonal; paths never meet when d >= 2."""
    steps = {}
    for t in terminals(spec):
        length = t.end[0] - t.start[0]
        # vertical entries turn east first, horizontal entries turn north first;
        # the central path enters horizontally and leaves horizontally, so it starts east
        first = "E" if t.entry[0] == "bottom" or t.label == 0 else "N"
        second = "N" if first == "E" else "E"
        steps[t.label] = (first + second) * length
    return _configuration(spec, steps)


def ground_state(spec: IndependentPathsSpec) -> Configuration:
    """The paths pulled onto the diagonal so neighbours touch at every other vertex.

    The central path zigzags on x - y in {0, 1}.  Path k below climbs its
    entry column to the band x - y in {k, k + 1}, zigzags there, then runs
    east to its exit; path -k runs east along its entry row to the band
    y - x in {k - 1, k}, zigzags, then runs north.  Neighbouring bands share
    one diagonal, on which the two paths meet.
    """
    n, d, ell = spec.n, spec.d, spec.ell
    if ell and 2 * ell * d - ell + 1 > n:
        raise ValueError("ground state does not fit: need 2*ell*d - ell + 1 <= n")
    steps = {0: "EN" * n}
    for k in range(1, ell + 1):
        run = k * d - k
        zig = n - 2 * k * d + k
        steps[k] = "N" * run + "EN" * zig + "E" * run
        run = k * d - k + 1
        zig = n - 2 * k * d + k - 1
        steps[-k] = "E" * run + "NE" * zig + "N" * run
    return _configuration(spec, steps)


def ground_state_steps(spec: IndependentPathsSpec) -> dict[int, str]:
    cfg = ground_state(spec)
    return {lab: p.steps() for lab, p in zip(path_labels(cfg, spec), to_paths(cfg))}


# ----------------------------------------------------------------------
# deviation and the cut S
# ----------------------------------------------------------------------
def path_deviation(path) -> int:
    """max_i |(x_i - x_0) - (y_i - y_0)|: distance from the path's own diagonal.

    Accepts a :class:`LatticePath` or a sequence of lattice points.
    """
    pts = path.vertices if isinstance(path, LatticePath) else tuple(path)
    x0, y0 = pts[0]
    best = 0
    for (xa, ya), (xb, yb) in zip(pts, pts[1:]):
        if (xb - xa, yb - ya) not in ((1, 0), (0, 1)):
            raise ValueError("not a north-east path")
    for x, y in pts:
        best = max(best, abs((x - x0) - (y - y0)))
    return best


def path_labels(config: Configuration, spec: IndependentPathsSpec) -> list[int]:
    by_entry = {t.entry: t.label for t in terminals(spec)}
    return [by_entry[p.entry] for p in to_paths(config)]


def deviations(config: Configuration, spec: IndependentPathsSpec | None = None) -> dict:
    paths = to_paths(config)
    if spec is None:
        return {p.entry: path_deviation(p) for p in paths}
    return {lab: path_deviation(p) for lab, p in zip(path_labels(config, spec), paths)}


def in_cut_S(config: Configuration, theta: float) -> bool:
    """Every path stays within theta of its own diagonal (strictly)."""
    return all(path_deviation(p) < theta for p in to_paths(config))


def _entry_arrays(spec: IndependentPathsSpec):
    ts = terminals(spec)
    sx = np.array([t.start[0] for t in ts], dtype=np.int64)
    sy = np.array([t.start[1] for t in ts], dtype=np.int64)
    came_w = np.array([t.entry[0] == "left" for t in ts], dtype=np.bool_)
    return sx, sy, came_w


@nb.njit(cache=True)
def _trace_devs(bits, N, sx, sy, came_w, out):
    """Deviation of each planted path, following the kept edges as in to_paths."""
    hoff = 0
    voff = N * (N + 1)
    for p in range(sx.shape[0]):
        x = sx[p]
        y = sy[p]
        cw = came_w[p]
        best = 0
        while True:
            dd = abs((x - sx[p]) - (y - sy[p]))
            if dd > best:
                best = dd
            if cw:
                north = bits[voff + (y + 1) * N + x] == 1
            else:
                north = bits[hoff + y * (N + 1) + x + 1] == 0
            if north:
                if y == N - 1:
                    break
                y += 1
                cw = False
            else:
                if x == N - 1:
                    break
                x += 1
                cw = True
        out[p] = best


def deviation_table(bits: np.ndarray, spec: IndependentPathsSpec) -> np.ndarray:
    """Deviations of every labeled path for a batch of bit rows; columns follow :func:`terminals`."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    sx, sy, cw = _entry_arrays(spec)
    out = np.zeros((bits.shape[0], sx.size), dtype=np.int64)
    row = np.zeros(sx.size, dtype=np.int64)
    for r in range(bits.shape[0]):
        _trace_devs(bits[r], spec.size, sx, sy, cw, row)
        out[r] = row
    return out


def cut_mask(bits: np.ndarray, spec: IndependentPathsSpec, theta: float) -> np.ndarray:
    return (deviation_table(bits, spec) < theta).all(axis=1)


def shared_vertices(config: Configuration) -> list[tuple[int, int]]:
    """Vertices visited by two paths (crosses)."""
    seen = {}
    for k, p in enumerate(to_paths(config)):
        for v in p.vertices:
            seen.setdefault(v, []).append(k)
    return sorted(v for v, ks in seen.items() if len(ks) > 1)


# ----------------------------------------------------------------------
# ground-state accounting
# ----------------------------------------------------------------------
@dataclass
class GroundStateAccounting:
    spec: dict
    intersections: int
    straights: int
    per_pair: dict
    per_path_straights: dict
    intersection_lower_bound: int
    straights_band: tuple[int, int]
    intersections_ok: bool
    straights_ok: bool
    log_weight: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def ground_state_accounting(spec: IndependentPathsSpec, lam: float | None = None, mu: float | None = None) -> GroundStateAccounting:
    cfg = ground_state(spec)
    counts = cfg.type_counts()
    crosses = int(counts[0])
    straights = int(counts[2] + counts[3])
    labels = path_labels(cfg, spec)
    paths = dict(zip(labels, to_paths(cfg)))
    per_pair = {}
    for k in range(1, spec.ell + 1):
        for a, b in ((k - 1, k), (-(k - 1), -k)):
            common = set(paths[a].vertices) & set(paths[b].vertices)
            per_pair[f"{a}/{b}"] = len(common)
    per_straight = {lab: p.straights() for lab, p in paths.items()}
    ell, n, d, c = spec.ell, spec.n, spec.d, MISALIGNMENT
    lower = 2 * ell * (n - (2 * ell * d + ell + c))
    lo = 2 * sum(2 * (k * d - c) for k in range(1, ell + 1))
    hi = 2 * sum(2 * (k * d + c) for k in range(1, ell + 1)) + 2  # plus the central path's boundary straights
    lw = None
    if lam is not None and mu is not None:
        lw = 2 * crosses * math.log(lam) + straights * math.log(mu)
    return GroundStateAccounting(
        spec.to_dict(), crosses, straights, per_pair, per_straight, lower, (lo, hi),
        crosses >= lower, lo <= straights <= hi, lw,
    )


# ----------------------------------------------------------------------
# cut mass: analytic components
# ----------------------------------------------------------------------
@dataclass
class CutMassReport:
    spec: dict
    lam: float
    mu: float
    log_entropy_bound: float      # (2l+1)(2n+1) log(1+mu): all paths independent
    log_ground_weight: float      # 2 I log(lam) + St log(mu) counted on the ground state
    log_pi_S_bound: float         # difference of the two
    base: float                   # (1 + mu) / lam
    regime: str                   # "bound" if lam > 1 + mu, "critical" at equality, else "outside"
    breakdown: bool
    asymptotic_exponent: str = "(1+mu)^(4 n^(9/8)(1+o(1))) vs lam^(2 I) mu^(St)"

    def to_dict(self) -> dict:
        return asdict(self)


def cut_mass_bound(spec: IndependentPathsSpec, lam: float, mu: float) -> CutMassReport:
    acc = ground_state_accounting(spec, lam, mu)
    n_paths = 2 * spec.ell + 1
    ent = n_paths * (2 * spec.n + 1) * math.log1p(mu)
    base = (1 + mu) / lam
    if math.isclose(lam, 1 + mu, rel_tol=1e-12, abs_tol=0.0):
        regime = "critical"
    elif lam > 1 + mu:
        regime = "bound"
    else:
        regime = "outside"
    return CutMassReport(spec.to_dict(), lam, mu, ent, acc.log_weight, ent - acc.log_weight, base, regime,
                         breakdown=regime != "bound")


# ----------------------------------------------------------------------
# measurement: escape from S by restricted Glauber
# ----------------------------------------------------------------------
@nb.njit(cache=True)
def _restricted_block(bits, faces, us, n_faces, fe, fc, fv, ve, log_w, N, sx, sy, cw, theta, devs, count):
    """Glauber moves that would leave S are counted and undone; returns (exits, counted steps)."""
    exits = 0
    used = 0
    for s in range(faces.shape[0]):
        f = faces[s]
        if f >= n_faces:
            if count:
                used += 1
            continue
        r = _try_flip(bits, f, us[s], fe, fc, fv, ve, log_w)
        if r == 1:
            _trace_devs(bits, N, sx, sy, cw, devs)
            out = False
            for p in range(devs.shape[0]):
                if devs[p] >= theta:
                    out = True
            if out:
                if count:
                    exits += 1
                for k in range(4):
                    if fe[f, k] < 0:
                        break
                    bits[fe[f, k]] ^= 1
        if count:
            used += 1
    return exits, used


@dataclass
class EscapeEstimate:
    spec: dict
    lam: float
    mu: float
    theta: float
    seed: int
    warmup: int
    steps: int
    exits: int
    estimate: float      # exits / steps, estimates Phi(S)
    stderr_iid: float    # binomial error; ignores autocorrelation

    def to_dict(self) -> dict:
        return asdict(self)


def escape_probability(spec: IndependentPathsSpec, lam: float, mu: float, steps: int, seed: int,
                       theta: float | None = None, warmup: int | None = None, start: Configuration | None = None) -> EscapeEstimate:
    """One-step exit frequency of Glauber dynamics restricted to S.

    Moves leaving S are rejected, so the restricted chain is reversible with
    respect to pi conditioned on S, and the long-run fraction of proposals
    that would exit estimates Phi(S).  Warm-up uses the same restricted chain.
    """
    theta = default_theta(spec.n) if theta is None else theta
    warmup = steps // 10 if warmup is None else warmup
    cfg = start if start is not None else staircase_state(spec)
    if not in_cut_S(cfg, theta):
        raise ValueError("start state is not in S")
    w = Weights.from_lambda_mu(lam, mu)
    ker = Kernel.build(spec.size, cfg.boundary, w)
    stream = RandomStream(seed, ker.n_choices)
    bits = cfg.bits.copy()
    sx, sy, cw = _entry_arrays(spec)
    devs = np.zeros(sx.size, dtype=np.int64)
    exits = used = 0
    for phase, total in ((False, warmup), (True, steps)):
        left = total
        while left > 0:
            m = min(left, 1 << 16)
            faces, us = stream.take(m)
            e, u = _restricted_block(bits, faces, us, ker.n_faces, ker.face_edges, ker.face_ccw, ker.face_vertices,
                                     ker.vertex_edges, ker.log_w, spec.size, sx, sy, cw, theta, devs, phase)
            exits += e
            used += u
            left -= m
    est = exits / used if used else float("nan")
    se = math.sqrt(est * (1 - est) / used) if used else float("nan")
    return EscapeEstimate(spec.to_dict(), lam, mu, theta, seed, warmup, steps, exits, est, se)


# ----------------------------------------------------------------------
# measurement: exact quantities on enumerable instances
# ----------------------------------------------------------------------
@dataclass
class ExactCut:
    spec: dict
    lam: float
    mu: float
    theta: float
    states: int
    pi_S: float
    phi_S: float
    conductance_bound: float   # 1 / (4 Phi(S))
    ground_in_S: bool

    def to_dict(self) -> dict:
        return asdict(self)


def exact_space(spec: IndependentPathsSpec, cap: int = 2_000_000):
    from .exact import enumerate_states

    return enumerate_states(spec.size, build_boundary(spec), cap=cap)


def exact_cut(spec: IndependentPathsSpec, lam, mu, theta: float | None = None, space=None, P=None):
    """Exact pi(S), Phi(S) from the enumerated chain."""
    from .exact import boltzmann, conductance, transition_matrix

    theta = default_theta(spec.n) if theta is None else theta
    space = space if space is not None else exact_space(spec)
    w = Weights.from_lambda_mu(float(lam), float(mu))
    pi = boltzmann(space, w)
    if P is None:
        P = transition_matrix(space, w)
    S = cut_mask(space.bits, spec, theta)
    if not S.any():
        raise ValueError("S is empty at this threshold")
    phi = conductance(P, pi, S)
    gs = in_cut_S(ground_state(spec), theta)
    res = ExactCut(spec.to_dict(), float(lam), float(mu), float(theta), space.size,
                   float(pi[S].sum()), phi, 1.0 / (4 * phi) if phi > 0 else math.inf, gs)
    return res, space, P, pi, S


@dataclass
class MixingCertificate:
    """Evidence that tau(1/4) >= T: a start whose law is still > 1/4 from pi after T - 1 steps."""

    T: int
    start: str
    tv_at_T_minus_1: float
    certified: bool
    tv_trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def mixing_lower_certificate(P, pi, start: np.ndarray, T: int, label: str = "", trace_every: int = 0) -> MixingCertificate:
    """Propagate ``start`` for T - 1 steps with sparse products and report its TV distance to pi.

    Since max_x ||P^t(x, .) - pi|| >= ||nu P^t - pi|| for every start law nu,
    a value above 1/4 at t = T - 1 proves tau(1/4) >= T.
    """
    import scipy.sparse as sp

    M = sp.csr_matrix(P.matrix if hasattr(P, "matrix") else P).T.tocsr()
    nu = np.asarray(start, dtype=float).copy()
    trace = []
    for t in range(1, T):
        nu = M @ nu
        if trace_every and t % trace_every == 0:
            trace.append((t, 0.5 * float(np.abs(nu - pi).sum())))
    tv = 0.5 * float(np.abs(nu - pi).sum())
    return MixingCertificate(T, label, tv, tv > 0.25, trace)


def start_mixing_time(P, pi, start: np.ndarray, eps: float = 0.25, max_t: int = 100_000) -> int | None:
    """Exact min{t : ||nu P^t - pi|| <= eps} for one start law nu (None if not reached by max_t).

    tau(eps) is the maximum of this over point masses, so any start gives a lower bound on it.
    """
    import scipy.sparse as sp

    M = sp.csr_matrix(P.matrix if hasattr(P, "matrix") else P).T.tocsr()
    nu = np.asarray(start, dtype=float).copy()
    for t in range(max_t + 1):
        if 0.5 * float(np.abs(nu - pi).sum()) <= eps:
            return t
        nu = M @ nu
    return None


def single_path_law(spec: IndependentPathsSpec, lam, mu, space=None) -> dict[str, float]:
    """Stationary law of the central path's step string when ell = 0 (exact enumeration)."""
    from .exact import boltzmann

    if spec.ell:
        raise ValueError("single-path law needs ell = 0")
    space = space if space is not None else exact_space(spec)
    pi = boltzmann(space, Weights.from_lambda_mu(float(lam), float(mu)))
    out: dict[str, float] = {}
    for k in range(space.size):
        (p,) = to_paths(space[k])
        s = p.steps()
        out[s] = out.get(s, 0.0) + float(pi[k])
    return out
