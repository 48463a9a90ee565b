"""Exact enumeration and linear algebra for small lattices.

Everything here is brute force: it is the ground truth the Monte Carlo and
analytic modules are checked against.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .lattice import (
    TYPE_TABLE,
    BoundaryCondition,
    Configuration,
    Weights,
    lattice,
    log_weights_array,
    type_counts_array,
    weight_from_counts,
)

DEFAULT_CAP = 10**6


class CapExceeded(RuntimeError):
    pass


class NonErgodic(RuntimeError):
    pass


def _keys(bits: np.ndarray) -> np.ndarray:
    """Packed row keys that sort in the lexicographic order of the bit strings."""
    packed = np.packbits(bits, axis=1)
    return np.ascontiguousarray(packed).view(np.dtype((np.void, packed.shape[1]))).ravel()


def _frontier_enumerate(n: int, boundary: BoundaryCondition, cap: int) -> np.ndarray:
    """Row-major sweep over vertices, branching on undetermined edges.

    At vertex (i, j) the west and south edges are already known, so only the
    east/north pair is chosen, and forced stubs prune immediately.
    """
    lat = lattice(n)
    forced = boundary.forced_bits()
    work_cap = 50 * cap
    states = np.zeros((1, lat.n_edges), dtype=np.uint8)

    def branch(states, e):
        if e in forced:
            states[:, e] = forced[e]
            return states
        k = states.shape[0]
        out = np.repeat(states, 2, axis=0)
        out[1::2, e] = 1
        if out.shape[0] > work_cap:
            raise CapExceeded(f"enumeration frontier exceeds {work_cap} partial states")
        return out

    for j in range(n):
        for i in range(n):
            L, B, R, T = lat.vertex_edges[lat.vertex(i, j)]
            if i == 0:
                states = branch(states, L)
            if j == 0:
                states = branch(states, B)
            s = states[:, L].astype(np.int8) + states[:, B]
            one = s == 1
            # s = 0 -> (R, T) = (0, 0); s = 2 -> (1, 1); s = 1 -> either
            both = np.concatenate([states, states[one]], axis=0)
            m = states.shape[0]
            r = np.where(s == 2, 1, 0).astype(np.uint8)
            t = r.copy()
            r[one] = 1
            t[one] = 0
            r2 = np.concatenate([r, np.zeros(int(one.sum()), np.uint8)])
            t2 = np.concatenate([t, np.ones(int(one.sum()), np.uint8)])
            both[:, R] = r2
            both[:, T] = t2
            keep = np.ones(both.shape[0], dtype=bool)
            if R in forced:
                keep &= both[:, R] == forced[R]
            if T in forced:
                keep &= both[:, T] == forced[T]
            states = both[keep]
            if states.shape[0] > work_cap:
                raise CapExceeded(f"enumeration frontier exceeds {work_cap} partial states")
            del m
    if states.shape[0] > cap:
        raise CapExceeded(f"|Omega| = {states.shape[0]} exceeds cap {cap}")
    return states


def brute_force_states(n: int, boundary: BoundaryCondition, chunk: int = 1 << 20) -> np.ndarray:
    """Independent enumerator: test every assignment of the non-forced edges.

    Only usable when 2^(#free edges) is small (domain-wall n <= 4 has 2^24).
    """
    lat = lattice(n)
    forced = boundary.forced_bits()
    free = np.array([e for e in range(lat.n_edges) if e not in forced], dtype=np.int64)
    nf = free.size
    if nf > 30:
        raise CapExceeded(f"2^{nf} assignments is too many for brute force")
    base = np.zeros(lat.n_edges, dtype=np.uint8)
    for e, b in forced.items():
        base[e] = b
    ve = lat.vertex_edges
    found = []
    shifts = np.arange(nf, dtype=np.int64)
    for start in range(0, 1 << nf, chunk):
        idx = np.arange(start, min(start + chunk, 1 << nf), dtype=np.int64)
        bits = np.broadcast_to(base, (idx.size, lat.n_edges)).copy()
        bits[:, free] = ((idx[:, None] >> shifts) & 1).astype(np.uint8)
        b = bits[:, ve].astype(np.int8)
        ok = (b[..., 0] + b[..., 1] == b[..., 2] + b[..., 3]).all(axis=1)
        found.append(bits[ok])
    out = np.concatenate(found, axis=0)
    return out[np.argsort(_keys(out), kind="stable")]


def asm_count(n: int) -> int:
    """Number of n x n alternating sign matrices, prod (3k+1)!/(n+k)!."""
    num = den = 1
    for k in range(n):
        num *= math.factorial(3 * k + 1)
        den *= math.factorial(n + k)
    return num // den


@dataclass
class StateSpace:
    """All Eulerian orientations with a given boundary, in lexicographic order."""

    n: int
    boundary: BoundaryCondition
    bits: np.ndarray

    def __post_init__(self):
        self.keys = _keys(self.bits)
        order = np.argsort(self.keys, kind="stable")
        self.bits = self.bits[order]
        self.keys = self.keys[order]
        if self.size > 1 and np.any(self.keys[1:] == self.keys[:-1]):
            raise AssertionError("duplicate states in enumeration")

    @property
    def size(self) -> int:
        return self.bits.shape[0]

    def __len__(self):
        return self.size

    def __getitem__(self, k: int) -> Configuration:
        return Configuration(self.n, self.bits[k], self.boundary)

    def __iter__(self):
        return (self[k] for k in range(self.size))

    def index_of_bits(self, bits: np.ndarray) -> np.ndarray:
        """Indices of a batch of bit rows; -1 where the row is not a state."""
        bits = np.atleast_2d(bits).astype(np.uint8)
        k = _keys(bits)
        pos = np.searchsorted(self.keys, k)
        pos = np.minimum(pos, self.size - 1)
        hit = self.keys[pos] == k
        return np.where(hit, pos, -1)

    def index(self, config: Configuration) -> int:
        k = int(self.index_of_bits(config.bits)[0])
        if k < 0:
            raise KeyError("configuration not in state space")
        return k

    @cached_property
    def type_counts(self) -> np.ndarray:
        return type_counts_array(self.bits, self.n)

    @cached_property
    def faces(self):
        return lattice(self.n).flippable_faces(self.boundary)

    @cached_property
    def moves(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """For each flippable face, (sources, targets) of the cycle reversals."""
        out = []
        E = lattice(self.n).n_edges
        for f in self.faces:
            e = np.array(f.edges)
            ccw = np.array(f.ccw, dtype=np.uint8)
            sub = self.bits[:, e]
            cyc = np.flatnonzero((sub == ccw).all(axis=1) | (sub == 1 - ccw).all(axis=1))
            mask = np.zeros(E, dtype=np.uint8)
            mask[e] = 1
            tgt = self.index_of_bits(self.bits[cyc] ^ mask)
            if np.any(tgt < 0):
                raise AssertionError("cycle reversal left the state space")
            out.append((cyc, tgt))
        return out

    def neighbor_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.concatenate([m[0] for m in self.moves]) if self.moves else np.zeros(0, int)
        dst = np.concatenate([m[1] for m in self.moves]) if self.moves else np.zeros(0, int)
        return src, dst


def enumerate_states(n: int, boundary: BoundaryCondition | None = None, cap: int = DEFAULT_CAP) -> StateSpace:
    boundary = boundary or BoundaryCondition.free(n)
    if boundary.n != n:
        raise ValueError("boundary size does not match n")
    return StateSpace(n, boundary, _frontier_enumerate(n, boundary, cap))


# ----------------------------------------------------------------------
# stationary distribution
# ----------------------------------------------------------------------
def log_weights(space: StateSpace, w: Weights) -> np.ndarray:
    return log_weights_array(space.type_counts, w)


def partition_function(space: StateSpace, w: Weights):
    """Z; exact when the weights are exact, a float otherwise."""
    if space.size == 0:
        raise ValueError("empty state space")
    if w.is_exact():
        return sum(weight_from_counts(c, w) for c in space.type_counts)
    lw = log_weights(space, w)
    m = lw.max()
    return float(math.exp(m) * math.fsum(np.exp(lw - m)))


def boltzmann(space: StateSpace, w: Weights):
    """pi as a float array, or a list of Fractions in exact mode."""
    if space.size == 0:
        raise ValueError("empty state space")
    if w.is_exact():
        ws = [weight_from_counts(c, w) for c in space.type_counts]
        Z = sum(ws)
        return [Fraction(x) / Z for x in ws]
    lw = log_weights(space, w)
    p = np.exp(lw - lw.max())
    return p / math.fsum(p)


# ----------------------------------------------------------------------
# transition matrix
# ----------------------------------------------------------------------
@dataclass
class TransitionMatrix:
    space: StateSpace
    weights: Weights
    lazy: bool
    matrix: sp.csr_matrix
    n_faces: int

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def denominator(self) -> int:
        return self.n_faces * (2 if self.lazy else 1)


def _acceptance(space: StateSpace, w: Weights, src, dst) -> np.ndarray:
    lw = log_weights(space, w)
    return np.minimum(1.0, np.exp(lw[dst] - lw[src]))


def transition_matrix(space: StateSpace, w: Weights, lazy: bool = False) -> TransitionMatrix:
    """Glauber/Metropolis kernel: P(x, y) = min(1, w(y)/w(x)) / K for a cell flip x -> y."""
    K = len(space.faces) * (2 if lazy else 1)
    src, dst = space.neighbor_pairs()
    N = space.size
    if K == 0:
        return TransitionMatrix(space, w, lazy, sp.identity(N, format="csr"), 0)
    off = _acceptance(space, w, src, dst) / K
    stay = 1.0 - np.bincount(src, weights=off, minlength=N)
    rows = np.concatenate([src, np.arange(N)])
    cols = np.concatenate([dst, np.arange(N)])
    vals = np.concatenate([off, stay])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    return TransitionMatrix(space, w, lazy, P, len(space.faces))


def rational_transitions(space: StateSpace, w: Weights, lazy: bool = False) -> dict[tuple[int, int], Fraction]:
    """Exact off-diagonal entries; the diagonal is 1 minus the row sum."""
    if not w.is_exact():
        w = Weights.exact(Fraction(w.a), Fraction(w.b), Fraction(w.c))
    if space.size > 5000:
        raise CapExceeded("rational mode is limited to |Omega| <= 5000")
    K = len(space.faces) * (2 if lazy else 1)
    wt = [weight_from_counts(c, w) for c in space.type_counts]
    out = {}
    src, dst = space.neighbor_pairs()
    for x, y in zip(src.tolist(), dst.tolist()):
        r = Fraction(wt[y]) / Fraction(wt[x])
        out[(x, y)] = min(Fraction(1), r) / K
    return out


def detailed_balance_violations(space: StateSpace, w: Weights, lazy: bool = False) -> list[tuple[int, int]]:
    """Pairs with pi(x)P(x,y) != pi(y)P(y,x), checked exactly in rationals."""
    P = rational_transitions(space, w, lazy)
    pi = boltzmann(space, w if w.is_exact() else Weights.exact(Fraction(w.a), Fraction(w.b), Fraction(w.c)))
    bad = []
    for (x, y), pxy in P.items():
        pyx = P.get((y, x), Fraction(0))
        if pi[x] * pxy != pi[y] * pyx:
            bad.append((x, y))
    return bad


def is_ergodic(space: StateSpace) -> bool:
    """Connectivity of the move graph (reversible chain, so weak = strong)."""
    from scipy.sparse.csgraph import connected_components

    if space.size <= 1:
        return True
    src, dst = space.neighbor_pairs()
    g = sp.csr_matrix((np.ones(src.size), (src, dst)), shape=(space.size, space.size))
    k, _ = connected_components(g, directed=False)
    return k == 1


# ----------------------------------------------------------------------
# distances, mixing
# ----------------------------------------------------------------------
def tv_distance(mu, nu) -> float:
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise ValueError("distributions have different supports")
    for d in (mu, nu):
        if abs(d.sum() - 1) > 1e-9 or np.any(d < -1e-15):
            raise ValueError("argument is not a probability vector")
    return 0.5 * float(np.abs(mu - nu).sum())


def worst_tv(Pt: np.ndarray, pi: np.ndarray) -> float:
    return 0.5 * float(np.abs(Pt - pi[None, :]).sum(axis=1).max())


def mixing_time(P, pi=None, eps: float = 0.25, max_t: int = 1 << 40) -> int:
    """Exact tau(eps) = min{t : max_x ||P^t(x,.) - pi|| <= eps} by dense powering.

    Uses repeated squaring to bracket tau, then bisection on the bracket.
    """
    if isinstance(P, TransitionMatrix):
        if pi is None:
            pi = boltzmann(P.space, P.weights)
        if not is_ergodic(P.space):
            raise NonErgodic("move graph is disconnected")
        P = P.dense()
    P = np.asarray(P.toarray() if sp.issparse(P) else P, dtype=float)
    if pi is None:
        pi = stationary(P)
    pi = np.asarray(pi, dtype=float)
    if worst_tv(np.eye(len(pi)), pi) <= eps:
        return 0
    powers = [P]  # powers[k] = P^(2^k)
    t = 1
    while worst_tv(powers[-1], pi) > eps:
        if t >= max_t:
            raise NonErgodic(f"no mixing within {max_t} steps")
        powers.append(powers[-1] @ powers[-1])
        t *= 2
    # tau in (t/2, t]; build it bit by bit from the largest power below
    if t == 1:
        return 1
    acc, acc_t = np.eye(len(pi)), 0
    for k in range(len(powers) - 2, -1, -1):
        cand = acc @ powers[k]
        if worst_tv(cand, pi) > eps:
            acc, acc_t = cand, acc_t + (1 << k)
    return acc_t + 1


def stationary(P: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(P.T)
    k = int(np.argmin(np.abs(vals - 1)))
    v = np.real(vecs[:, k])
    return v / v.sum()


def spectral_gap(P, pi=None) -> float:
    """1 - lambda_2 of a reversible P via the symmetrized matrix."""
    if isinstance(P, TransitionMatrix):
        if pi is None:
            pi = boltzmann(P.space, P.weights)
        P = P.dense()
    P = np.asarray(P.toarray() if sp.issparse(P) else P, dtype=float)
    pi = np.asarray(stationary(P) if pi is None else pi, dtype=float)
    s = np.sqrt(pi)
    A = s[:, None] * P / s[None, :]
    A = 0.5 * (A + A.T)
    ev = np.linalg.eigvalsh(A)
    if ev.size < 2:
        return 1.0
    return float(1.0 - ev[-2])


# ----------------------------------------------------------------------
# conductance
# ----------------------------------------------------------------------
def conductance(P, pi, S) -> float:
    """Phi(S) = sum_{x in S, y not in S} pi(x)P(x,y) / pi(S)."""
    if isinstance(P, TransitionMatrix):
        P = P.matrix
    pi = np.asarray(pi, dtype=float)
    S = np.asarray(S)
    if S.dtype != bool:
        mask = np.zeros(pi.size, dtype=bool)
        mask[S] = True
        S = mask
    if not S.any():
        raise ValueError("conductance of an empty set")
    P = sp.csr_matrix(P)
    out_flow = P[S][:, ~S].sum(axis=1).A1 if sp.issparse(P) else P[S][:, ~S].sum(axis=1)
    return float(np.dot(pi[S], out_flow) / pi[S].sum())


def escape_probability(P, pi, S) -> float:
    """Probability of leaving S in one step from pi conditioned on S, by direct propagation."""
    if isinstance(P, TransitionMatrix):
        P = P.matrix
    pi = np.asarray(pi, dtype=float)
    S = np.asarray(S, dtype=bool)
    start = np.where(S, pi, 0.0)
    start /= start.sum()
    after = sp.csr_matrix(P).T @ start
    return float(after[~S].sum())


@dataclass
class ConductanceResult:
    value: float
    exact: bool
    cut: np.ndarray
    label: str


def min_conductance_exhaustive(P, pi, chunk: int = 1 << 16) -> ConductanceResult:
    """Phi* over every S with 0 < pi(S) <= 1/2; only for |Omega| <= 20."""
    if isinstance(P, TransitionMatrix):
        P = P.dense()
    P = np.asarray(P.toarray() if sp.issparse(P) else P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    N = pi.size
    if N > 20:
        raise CapExceeded("exhaustive conductance needs |Omega| <= 20")
    Q = pi[:, None] * P
    best, best_mask = math.inf, None
    bitpos = np.arange(N)
    for start in range(1, 1 << N, chunk):
        m = np.arange(start, min(start + chunk, 1 << N))
        S = ((m[:, None] >> bitpos) & 1).astype(float)
        piS = S @ pi
        ok = piS <= 0.5 + 1e-15
        if not ok.any():
            continue
        flow = ((S @ Q) * (1.0 - S)).sum(axis=1)
        phi = np.where(ok, flow / np.where(ok, piS, 1.0), np.inf)
        k = int(np.argmin(phi))
        if phi[k] < best:
            best, best_mask = float(phi[k]), S[k].astype(bool)
    return ConductanceResult(best, True, best_mask, "exhaustive")


def min_conductance_over(P, pi, cuts: Iterable[tuple[str, np.ndarray]]) -> ConductanceResult:
    """Smallest Phi(S) over supplied cuts with pi(S) <= 1/2 (complements are tried too).

    This is an upper bound on Phi*, never Phi* itself.
    """
    pi = np.asarray(pi, dtype=float)
    best = ConductanceResult(math.inf, False, np.zeros(pi.size, bool), "none")
    for label, S in cuts:
        S = np.asarray(S, dtype=bool)
        for cand, lab in ((S, label), (~S, f"complement of {label}")):
            if not cand.any() or pi[cand].sum() > 0.5 + 1e-15:
                continue
            phi = conductance(P, pi, cand)
            if phi < best.value:
                best = ConductanceResult(phi, False, cand, lab)
    return best


def fiedler_order(P, pi) -> np.ndarray:
    """States sorted by the second eigenvector of the symmetrized chain."""
    if isinstance(P, TransitionMatrix):
        P = P.dense()
    P = np.asarray(P.toarray() if sp.issparse(P) else P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    s = np.sqrt(pi)
    A = s[:, None] * P / s[None, :]
    A = 0.5 * (A + A.T)
    _, vecs = np.linalg.eigh(A)
    return np.argsort(vecs[:, -2] / s)


def fiedler_sweep_cuts(P, pi) -> list[tuple[str, np.ndarray]]:
    """Level sets of the second eigenvector of the symmetrized chain."""
    order = fiedler_order(P, pi)
    cuts = []
    mask = np.zeros(len(order), dtype=bool)
    for r, k in enumerate(order[:-1]):
        mask[k] = True
        cuts.append((f"fiedler sweep {r + 1}", mask.copy()))
    return cuts


def sweep_conductance(P, pi, order) -> ConductanceResult:
    """Best Phi over the prefixes of ``order`` and their complements, with flows updated incrementally."""
    if isinstance(P, TransitionMatrix):
        P = P.dense()
    P = np.asarray(P.toarray() if sp.issparse(P) else P, dtype=float)
    pi = np.asarray(pi, dtype=float)
    Q = pi[:, None] * P
    Qo = Q[np.ix_(order, order)]
    # flow out of prefix r: sum over i < r <= j of Qo[i, j] = out(prefix) - inside(prefix)
    rows = np.cumsum(Qo.sum(axis=1))
    inside = np.cumsum(np.tril(Qo).sum(axis=1) + np.triu(Qo, 1).sum(axis=0))
    out_flow = (rows - inside)[:-1]
    in_flow = (np.cumsum(Qo.sum(axis=0)) - inside)[:-1]  # flow into the prefix = out of the complement
    mass = np.cumsum(pi[order])[:-1]
    best = ConductanceResult(math.inf, False, np.zeros(pi.size, bool), "none")
    for flows, m, comp in ((out_flow, mass, False), (in_flow, 1.0 - mass, True)):
        ok = (m <= 0.5 + 1e-15) & (m > 0)
        if not ok.any():
            continue
        phi = np.where(ok, flows / np.where(ok, m, 1.0), np.inf)
        r = int(np.argmin(phi))
        if phi[r] < best.value:
            S = np.zeros(pi.size, bool)
            S[order[: r + 1]] = True
            label = f"fiedler sweep {r + 1}"
            if comp:
                S, label = ~S, f"complement of {label}"
            best = ConductanceResult(float(phi[r]), False, S, label)
    return best


def min_conductance(P, pi, extra_cuts: Sequence[tuple[str, np.ndarray]] = ()) -> ConductanceResult:
    """Exhaustive Phi* when |Omega| <= 20; otherwise the best structured/spectral cut (an upper bound)."""
    N = len(pi)
    if N <= 20:
        return min_conductance_exhaustive(P, pi)
    best = min_conductance_over(P, pi, extra_cuts)
    if N <= 6000:
        sw = sweep_conductance(P, pi, fiedler_order(P, pi))
        if sw.value < best.value:
            best = sw
    return best


# ----------------------------------------------------------------------
# rotation symmetry
# ----------------------------------------------------------------------
def rotated_space(space: StateSpace) -> StateSpace:
    """The state space of the rotated boundary, built by rotating every state."""
    rot = np.stack([c.rotated().bits for c in space])
    return StateSpace(space.n, space[0].rotated().boundary if not space.boundary.is_free else space.boundary, rot)
