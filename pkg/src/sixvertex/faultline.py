"""Red/green colorings, monochromatic crosses, dual-lattice fault lines and the Peierls map.

All of this is defined for free boundary conditions only.  Edges (stubs
included) are red where they agree with the all-corner ground state x_R and
green where they agree with x_G.

Dual vertices are the (n+1)^2 cells ``(p, q)`` of :class:`~sixvertex.lattice.Lattice`,
with centers at ``(p - 1/2, q - 1/2)``.  The dual edge through internal vertex
``(i, j)`` is either the NE diagonal ``(i, j)-(i+1, j+1)`` or the NW diagonal
``(i+1, j)-(i, j+1)``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numba as nb
import numpy as np

from .lattice import (
    BoundaryCondition,
    Configuration,
    VertexType,
    Weights,
    ground_state_red,
    lattice,
    weight,
)

RED, GREEN = 1, 0


def _require_free(config: Configuration):
    if not config.boundary.is_free:
        raise ValueError("red/green colorings are only defined under free boundary conditions")


@dataclass(frozen=True, eq=False)
class EdgeColoring:
    n: int
    red: np.ndarray  # bool per flat edge

    def vertex_red_counts(self) -> np.ndarray:
        return self.red[lattice(self.n).vertex_edges].sum(axis=1)

    def check_parity(self) -> None:
        """Even red count at each vertex, and two reds are always rotationally adjacent."""
        ve = lattice(self.n).vertex_edges
        r = self.red[ve]  # columns L, B, R, T
        k = r.sum(axis=1)
        if np.any(k % 2):
            raise AssertionError("odd number of red edges at a vertex")
        two = k == 2
        opposite = (r[:, 0] & r[:, 2]) | (r[:, 1] & r[:, 3])
        if np.any(two & opposite):
            raise AssertionError("two red edges on opposite sides of a vertex")


def color_edges(config: Configuration) -> EdgeColoring:
    _require_free(config)
    return EdgeColoring(config.n, config.bits == ground_state_red(config.n).bits)


# ----------------------------------------------------------------------
# bridges and crosses
# ----------------------------------------------------------------------
def _neighbor_table(n: int) -> np.ndarray:
    """Neighbor vertex across each of the L, B, R, T edges, -1 across stubs."""
    nb_ = np.full((n * n, 4), -1, dtype=np.int64)
    for j in range(n):
        for i in range(n):
            v = j * n + i
            if i > 0:
                nb_[v, 0] = v - 1
            if j > 0:
                nb_[v, 1] = v - n
            if i < n - 1:
                nb_[v, 2] = v + 1
            if j < n - 1:
                nb_[v, 3] = v + n
    return nb_


@nb.njit(cache=True)
def _bridge(bits, xr, ve, nbr, n, color, horizontal):
    """BFS over edges of one color between opposite stub rows."""
    nv = n * n
    seen = np.zeros(nv, dtype=np.bool_)
    queue = np.empty(nv, dtype=np.int64)
    head = 0
    tail = 0
    for t in range(n):
        if horizontal:
            v = t * n
            e = ve[v, 0]
        else:
            v = t
            e = ve[v, 1]
        if (bits[e] == xr[e]) == color and not seen[v]:
            seen[v] = True
            queue[tail] = v
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        if horizontal:
            if v % n == n - 1:
                e = ve[v, 2]
                if (bits[e] == xr[e]) == color:
                    return True
        else:
            if v // n == n - 1:
                e = ve[v, 3]
                if (bits[e] == xr[e]) == color:
                    return True
        for d in range(4):
            w = nbr[v, d]
            if w >= 0 and not seen[w]:
                e = ve[v, d]
                if (bits[e] == xr[e]) == color:
                    seen[w] = True
                    queue[tail] = w
                    tail += 1
    return False


@nb.njit(cache=True)
def _cross(bits, xr, ve, nbr, n, color):
    return _bridge(bits, xr, ve, nbr, n, color, True) and _bridge(bits, xr, ve, nbr, n, color, False)


@nb.njit(cache=True)
def _cross_batch(states, xr, ve, nbr, n):
    m = states.shape[0]
    out = np.zeros((m, 2), dtype=np.bool_)
    for k in range(m):
        out[k, 0] = _cross(states[k], xr, ve, nbr, n, True)
        out[k, 1] = _cross(states[k], xr, ve, nbr, n, False)
    return out


class CrossChecker:
    """Precomputed tables for fast cross detection on raw bit vectors."""

    def __init__(self, n: int):
        self.n = n
        self.xr = ground_state_red(n).bits.copy()
        self.ve = lattice(n).vertex_edges
        self.nbr = _neighbor_table(n)

    def red_cross(self, bits) -> bool:
        return bool(_cross(np.asarray(bits, np.uint8), self.xr, self.ve, self.nbr, self.n, True))

    def green_cross(self, bits) -> bool:
        return bool(_cross(np.asarray(bits, np.uint8), self.xr, self.ve, self.nbr, self.n, False))

    def batch(self, states: np.ndarray) -> np.ndarray:
        """(m, 2) flags: red cross, green cross."""
        return _cross_batch(np.ascontiguousarray(states, dtype=np.uint8), self.xr, self.ve, self.nbr, self.n)


def find_bridge(coloring: EdgeColoring, color: int, horizontal: bool) -> Optional[list[tuple[int, int]]]:
    """A monochromatic bridge as a vertex sequence, or None."""
    n = coloring.n
    lat = lattice(n)
    want = coloring.red if color == RED else ~coloring.red
    nbr = _neighbor_table(n)
    ve = lat.vertex_edges
    if horizontal:
        starts = [lat.vertex(0, t) for t in range(n) if want[lat.h(t, 0)]]
        goal = lambda v: v % n == n - 1 and want[ve[v, 2]]
    else:
        starts = [lat.vertex(t, 0) for t in range(n) if want[lat.v(0, t)]]
        goal = lambda v: v // n == n - 1 and want[ve[v, 3]]
    parent = {v: -1 for v in starts}
    dq = deque(starts)
    while dq:
        v = dq.popleft()
        if goal(v):
            path = []
            while v != -1:
                path.append((v % n, v // n))
                v = parent[v]
            return path[::-1]
        for d in range(4):
            w = int(nbr[v, d])
            if w >= 0 and w not in parent and want[ve[v, d]]:
                parent[w] = v
                dq.append(w)
    return None


def has_cross(coloring: EdgeColoring, color: int) -> bool:
    return find_bridge(coloring, color, True) is not None and find_bridge(coloring, color, False) is not None


# ----------------------------------------------------------------------
# dual lattice
# ----------------------------------------------------------------------
DualVertex = tuple[int, int]


def dual_edge_through(i: int, j: int, diagonal: str) -> tuple[DualVertex, DualVertex]:
    if diagonal == "NE":
        return (i, j), (i + 1, j + 1)
    return (i + 1, j), (i, j + 1)


def crossed_vertex(u: DualVertex, v: DualVertex) -> tuple[int, int]:
    return min(u[0], v[0]), min(u[1], v[1])


@dataclass
class DualGraph:
    """Dual vertices and the diagonal adjacency between them."""

    n: int
    adj: dict[DualVertex, set[DualVertex]] = field(default_factory=dict)

    def add(self, u, v):
        self.adj.setdefault(u, set()).add(v)
        self.adj.setdefault(v, set()).add(u)

    def has_edge(self, u, v) -> bool:
        return v in self.adj.get(u, ())

    def edges(self) -> list[tuple[DualVertex, DualVertex]]:
        return sorted({tuple(sorted((u, v))) for u in self.adj for v in self.adj[u]})

    def components(self) -> list[set[DualVertex]]:
        comps, seen = [], set()
        for s in self.adj:
            if s in seen:
                continue
            comp = {s}
            dq = deque([s])
            while dq:
                u = dq.popleft()
                for w in self.adj[u]:
                    if w not in comp:
                        comp.add(w)
                        dq.append(w)
            seen |= comp
            comps.append(comp)
        return comps


def dual_lattice(n: int) -> DualGraph:
    g = DualGraph(n)
    for p in range(n + 1):
        for q in range(n + 1):
            g.adj.setdefault((p, q), set())
    for j in range(n):
        for i in range(n):
            g.add(*dual_edge_through(i, j, "NE"))
            g.add(*dual_edge_through(i, j, "NW"))
    return g


def separating_diagonals(coloring: EdgeColoring) -> dict[tuple[int, int], str]:
    """Vertex -> diagonal ('NE' or 'NW') for every vertex with two red and two green edges."""
    coloring.check_parity()
    n = coloring.n
    ve = lattice(n).vertex_edges
    out = {}
    for j in range(n):
        for i in range(n):
            L, B, R, T = (int(x) for x in coloring.red[ve[j * n + i]])
            if L + B + R + T != 2:
                continue
            # {W,S} vs {E,N} is split by the NW-SE diagonal, {W,N} vs {S,E} by the NE one
            out[(i, j)] = "NW" if (L and B) or (R and T) else "NE"
    return out


def build_Lx(config: Configuration) -> DualGraph:
    coloring = color_edges(config)
    g = DualGraph(config.n)
    for (i, j), diag in separating_diagonals(coloring).items():
        g.add(*dual_edge_through(i, j, diag))
    return g


def _side_sets(n: int):
    return {
        "horizontal": (lambda u: u[0] == 0, lambda u: u[0] == n),
        "vertical": (lambda u: u[1] == 0, lambda u: u[1] == n),
    }


@dataclass(frozen=True)
class FaultPath:
    """A dual path from one side to the opposite side.

    ``faces`` runs from the start terminal s to the end terminal t.  For an
    almost fault line ``gap`` is the index of the dual edge not in L_x.
    """

    orientation: str
    faces: tuple[DualVertex, ...]
    gap: Optional[int] = None

    @property
    def s(self) -> DualVertex:
        return self.faces[0]

    @property
    def t(self) -> DualVertex:
        return self.faces[-1]

    def __len__(self):
        return len(self.faces) - 1

    def crossed_vertices(self) -> list[tuple[int, int]]:
        return [crossed_vertex(u, v) for u, v in zip(self.faces, self.faces[1:])]

    def steps(self) -> list[tuple[int, int]]:
        return [(v[0] - u[0], v[1] - u[1]) for u, v in zip(self.faces, self.faces[1:])]

    def slr(self) -> str:
        """Non-backtracking encoding: first step S, then S/L/R relative to the previous step."""
        st = self.steps()
        out = ["S"]
        for (dx0, dy0), (dx1, dy1) in zip(st, st[1:]):
            cross = dx0 * dy1 - dy0 * dx1
            out.append("S" if cross == 0 else ("L" if cross > 0 else "R"))
        return "".join(out)

    def pieces(self) -> tuple["FaultPath", "FaultPath"]:
        """For an almost fault line: the sub-walks before and after the gap edge."""
        if self.gap is None:
            raise ValueError("not an almost fault line")
        return (
            FaultPath(self.orientation, self.faces[: self.gap + 1]),
            FaultPath(self.orientation, self.faces[self.gap + 1:]),
        )


def _bfs_path(adj, starts, goal) -> Optional[list]:
    parent = {s: None for s in starts if s in adj}
    dq = deque(parent)
    while dq:
        u = dq.popleft()
        if goal(u):
            path = []
            while u is not None:
                path.append(u)
                u = parent[u]
            return path[::-1]
        for w in adj[u]:
            if w not in parent:
                parent[w] = u
                dq.append(w)
    return None


def find_fault_line(config: Configuration, Lx: DualGraph | None = None) -> Optional[FaultPath]:
    Lx = Lx or build_Lx(config)
    n = config.n
    for orient, (start, end) in _side_sets(n).items():
        starts = sorted(u for u in Lx.adj if start(u))
        path = _bfs_path(Lx.adj, starts, end)
        if path is not None:
            return FaultPath(orient, tuple(path))
    return None


def _component_map(adj, nodes):
    comp = {}
    c = 0
    for s in nodes:
        if s in comp:
            continue
        comp[s] = c
        dq = deque([s])
        while dq:
            u = dq.popleft()
            for w in adj.get(u, ()):
                if w not in comp:
                    comp[w] = c
                    dq.append(w)
        c += 1
    return comp


def _almost_dfs(adj, full_adj, start, end, budget):
    """Exhaustive simple-path search allowing one edge outside L_x."""
    counter = [0]

    def rec(path, on_path, used_gap, gap_idx):
        counter[0] += 1
        if counter[0] > budget:
            raise RuntimeError("search budget exhausted")
        u = path[-1]
        if used_gap and end(u):
            return gap_idx
        for w in sorted(full_adj[u]):
            if w in on_path:
                continue
            in_lx = w in adj.get(u, ())
            if not in_lx and used_gap:
                continue
            path.append(w)
            on_path.add(w)
            r = rec(path, on_path, used_gap or not in_lx, gap_idx if in_lx else len(path) - 2)
            if r is not None:
                return r
            path.pop()
            on_path.discard(w)
        return None

    for s in sorted(full_adj):
        if not start(s):
            continue
        path = [s]
        g = rec(path, {s}, False, None)
        if g is not None:
            return path, g
    return None


def find_almost_fault_line(config: Configuration, Lx: DualGraph | None = None, budget: int = 2_000_000) -> Optional[FaultPath]:
    """A simple dual path between opposite sides with exactly one edge outside L_x.

    Without a fault line the two L_x components glued by the missing edge are
    distinct, so their BFS paths are automatically disjoint and the search is
    linear.  When a fault line exists an exhaustive simple-path search is used.
    """
    Lx = Lx or build_Lx(config)
    n = config.n
    full = dual_lattice(n)
    comp = _component_map(Lx.adj, list(full.adj))
    has_fl = find_fault_line(config, Lx) is not None
    for orient, (start, end) in _side_sets(n).items():
        if has_fl:
            found = _almost_dfs(Lx.adj, full.adj, start, end, budget)
            if found is not None:
                path, g = found
                return FaultPath(orient, tuple(path), g)
            continue
        touch_s = {comp[u] for u in full.adj if start(u)}
        touch_t = {comp[u] for u in full.adj if end(u)}
        for u, v in full.edges():
            if Lx.has_edge(u, v):
                continue
            for x, y in ((u, v), (v, u)):
                if comp[x] in touch_s and comp[y] in touch_t and comp[x] != comp[y]:
                    adj = {k: Lx.adj.get(k, set()) for k in full.adj}
                    p1 = _bfs_path(adj, [w for w in full.adj if start(w) and comp[w] == comp[x]], lambda w: w == x)
                    p2 = _bfs_path(adj, [y], end)
                    return FaultPath(orient, tuple(p1 + p2), len(p1) - 1)
    return None


def all_fault_lines(config: Configuration, Lx: DualGraph | None = None) -> Iterator[FaultPath]:
    """Every simple L_x path between opposite sides, each oriented from bottom/left to top/right.

    Exponential; meant for exhaustive checks on small lattices.
    """
    Lx = Lx or build_Lx(config)
    for orient, (start, end) in _side_sets(config.n).items():
        def rec(path, on_path):
            u = path[-1]
            if end(u) and len(path) > 1:
                yield FaultPath(orient, tuple(path))
            for w in sorted(Lx.adj.get(u, ())):
                if w not in on_path:
                    path.append(w)
                    on_path.add(w)
                    yield from rec(path, on_path)
                    path.pop()
                    on_path.discard(w)

        for s in sorted(Lx.adj):
            if start(s):
                yield from rec([s], {s})


def all_almost_fault_lines(config: Configuration, Lx: DualGraph | None = None) -> Iterator[FaultPath]:
    """Every simple dual path between opposite sides using exactly one edge outside L_x."""
    Lx = Lx or build_Lx(config)
    full = dual_lattice(config.n)
    for orient, (start, end) in _side_sets(config.n).items():
        def rec(path, on_path, gap):
            u = path[-1]
            if end(u) and gap is not None:
                yield FaultPath(orient, tuple(path), gap)
            for w in sorted(full.adj[u]):
                if w in on_path:
                    continue
                in_lx = Lx.has_edge(u, w)
                if not in_lx and gap is not None:
                    continue
                path.append(w)
                on_path.add(w)
                yield from rec(path, on_path, gap if in_lx else len(path) - 2)
                path.pop()
                on_path.discard(w)

        for s in sorted(full.adj):
            if start(s):
                yield from rec([s], {s}, None)


# ----------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------
@dataclass
class FaultReport:
    cls: str  # "C_R", "C_G" or "C_FL"
    almost_fault: bool
    red_cross: bool
    green_cross: bool
    fault_line: Optional[FaultPath]
    almost_fault_line: Optional[FaultPath]
    bridges: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        fp = lambda f: None if f is None else {"orientation": f.orientation, "faces": [list(x) for x in f.faces], "gap": f.gap}
        return {
            "class": self.cls,
            "almost_fault_line": self.almost_fault,
            "red_cross": self.red_cross,
            "green_cross": self.green_cross,
            "fault_line_witness": fp(self.fault_line),
            "almost_fault_line_witness": fp(self.almost_fault_line),
            "bridges": {k: [list(v) for v in p] for k, p in self.bridges.items() if p is not None},
        }


def classify(config: Configuration) -> FaultReport:
    coloring = color_edges(config)
    bridges = {
        f"{c}_{o}": find_bridge(coloring, col, o == "horizontal")
        for c, col in (("red", RED), ("green", GREEN))
        for o in ("horizontal", "vertical")
    }
    rc = bridges["red_horizontal"] is not None and bridges["red_vertical"] is not None
    gc = bridges["green_horizontal"] is not None and bridges["green_vertical"] is not None
    Lx = build_Lx(config)
    fl = find_fault_line(config, Lx)
    afl = find_almost_fault_line(config, Lx)
    members = [name for name, flag in (("C_R", rc), ("C_G", gc), ("C_FL", fl is not None)) if flag]
    if len(members) != 1:
        raise AssertionError(f"state is in {members}, expected exactly one class")
    return FaultReport(members[0], afl is not None, rc, gc, fl, afl, bridges)


@dataclass
class SpaceClassification:
    in_CR: np.ndarray
    in_CG: np.ndarray
    in_FL: np.ndarray
    in_AFL: np.ndarray

    @property
    def middle(self) -> np.ndarray:
        return self.in_FL | self.in_AFL

    @property
    def left(self) -> np.ndarray:
        return self.in_CR & ~self.middle

    @property
    def right(self) -> np.ndarray:
        return self.in_CG & ~self.middle


def classify_space(space) -> SpaceClassification:
    if not space.boundary.is_free:
        raise ValueError("classification needs free boundary conditions")
    cc = CrossChecker(space.n)
    flags = cc.batch(space.bits)
    fl = np.zeros(space.size, bool)
    afl = np.zeros(space.size, bool)
    for k, cfg in enumerate(space):
        Lx = build_Lx(cfg)
        fl[k] = find_fault_line(cfg, Lx) is not None
        afl[k] = find_almost_fault_line(cfg, Lx) is not None
    return SpaceClassification(flags[:, 0].copy(), flags[:, 1].copy(), fl, afl)


@dataclass
class PartitionReport:
    sizes: dict
    overlaps: int
    uncovered: int
    boundary_size: int
    boundary_violations: list

    @property
    def partition_holds(self) -> bool:
        return self.overlaps == 0 and self.uncovered == 0

    @property
    def containment_holds(self) -> bool:
        return not self.boundary_violations


def boundary_subset_check(space, classes: SpaceClassification | None = None, color: str = "red") -> PartitionReport:
    """Check the partition into C_R, C_FL, C_G and that the outer boundary of C_R lies in C_FL or C_AFL."""
    classes = classes or classify_space(space)
    inside = classes.in_CR if color == "red" else classes.in_CG
    k = classes.in_CR.astype(int) + classes.in_CG.astype(int) + classes.in_FL.astype(int)
    src, dst = space.neighbor_pairs()
    sel = inside[src] & ~inside[dst]
    boundary = np.unique(dst[sel])
    bad = [int(b) for b in boundary if not (classes.in_FL[b] or classes.in_AFL[b])]
    return PartitionReport(
        {"C_R": int(classes.in_CR.sum()), "C_G": int(classes.in_CG.sum()), "C_FL": int(classes.in_FL.sum()), "C_AFL": int(classes.in_AFL.sum())},
        int((k > 1).sum()),
        int((k == 0).sum()),
        int(boundary.size),
        bad,
    )


# ----------------------------------------------------------------------
# Peierls map
# ----------------------------------------------------------------------
def _left_edges(n: int, path: FaultPath) -> np.ndarray:
    """Edges strictly on the left of the oriented dual path, as a boolean mask.

    The path is extended to infinity beyond its terminals (downward/upward for a
    vertical path, leftward/rightward for a horizontal one) and membership is a
    crossing-parity test.  Doubled coordinates keep everything integral.
    """
    lat = lattice(n)
    big = 8 * (n + 2)
    pts = [(2 * p - 1, 2 * q - 1) for p, q in path.faces]
    if path.orientation == "vertical":
        pts = [(pts[0][0], -big)] + pts + [(pts[-1][0], big)]
    else:
        # swap roles of x and y so the same westward-ray test finds the north side
        pts = [(-big, pts[0][1])] + pts + [(big, pts[-1][1])]
        pts = [(y, x) for x, y in pts]
    mask = np.zeros(lat.n_edges, dtype=bool)
    for e in range(lat.n_edges):
        (x0, y0), (x1, y1) = lat.edge_endpoints(e)
        mx, my = x0 + x1, y0 + y1
        if path.orientation != "vertical":
            mx, my = my, mx
        crossings = 0
        for (ax, ay), (bx, by) in zip(pts, pts[1:]):
            if (ay > my) != (by > my):
                xi = Fraction(ax) + Fraction((my - ay) * (bx - ax), by - ay)
                if xi < mx:
                    crossings += 1
        # the swap is a reflection: for horizontal paths the left (north) side is the odd one
        mask[e] = crossings % 2 == (0 if path.orientation == "vertical" else 1)
    return mask


def orient_path(path: FaultPath) -> FaultPath:
    """Orient vertical paths bottom-to-top and horizontal ones left-to-right."""
    a, b = path.faces[0], path.faces[-1]
    n_axis = 1 if path.orientation == "vertical" else 0
    if a[n_axis] > b[n_axis]:
        gap = None if path.gap is None else len(path) - 1 - path.gap
        return FaultPath(path.orientation, path.faces[::-1], gap)
    return path


def _check_witness(config: Configuration, path: FaultPath, Lx: DualGraph) -> None:
    n = config.n
    start, end = _side_sets(n)[path.orientation]
    if not (start(path.s) and end(path.t)):
        raise ValueError("witness does not join opposite sides")
    if len(set(path.faces)) != len(path.faces):
        raise ValueError("witness is not simple")
    full = dual_lattice(n)
    missing = []
    for k, (u, v) in enumerate(zip(path.faces, path.faces[1:])):
        if not full.has_edge(u, v):
            raise ValueError("witness steps are not dual edges")
        if not Lx.has_edge(u, v):
            missing.append(k)
    if path.gap is None and missing:
        raise ValueError("witness is not a fault line")
    if path.gap is not None and missing != [path.gap]:
        raise ValueError("witness is not an almost fault line with the stated gap")


def peierls_map(config: Configuration, path: FaultPath) -> Configuration:
    """Reverse every edge on the left of the oriented (almost) fault line."""
    _require_free(config)
    path = orient_path(path)
    _check_witness(config, path, build_Lx(config))
    if path.gap is not None:
        i, j = path.crossed_vertices()[path.gap]
        from .lattice import classify_vertex

        if classify_vertex(config, i, j).weight_class != "c":
            raise ValueError("the map needs a corner vertex at the gap of an almost fault line")
    mask = _left_edges(config.n, path)
    bits = config.bits ^ mask.astype(np.uint8)
    image = Configuration(config.n, bits, config.boundary)
    image.validate()
    return image


def g_weight(slr: str, first: str, a, b):
    """Product of vertex weights along an S/L/R walk starting on a vertex of class ``first``; turns toggle a <-> b."""
    if not slr or slr[0] != "S" or any(ch not in "SLR" for ch in slr):
        raise ValueError(f"malformed walk {slr!r}")
    if first not in ("a", "b"):
        raise ValueError("first vertex class must be 'a' or 'b'")
    cur = first
    out = 1
    for k, ch in enumerate(slr):
        if k and ch in "LR":
            cur = "b" if cur == "a" else "a"
        out = out * (a if cur == "a" else b)
    return out


def expected_amplification(config: Configuration, path: FaultPath, w: Weights):
    """Predicted weight(image)/weight(x) from the vertex classes along the path.

    Fault line: c^|gamma| / g(gamma), with g = g_a or g_b according to the first
    crossed vertex.  Almost fault line: the same for both pieces, times
    w'/c for the corner vertex at the gap, where w' is the weight it takes
    after the map.
    """
    path = orient_path(path)
    from .lattice import classify_vertex

    cls = [classify_vertex(config, i, j).weight_class for i, j in path.crossed_vertices()]
    if path.gap is None:
        return Fraction(w.c) ** len(path) / g_weight(path.slr(), cls[0], Fraction(w.a), Fraction(w.b))
    p1, p2 = path.pieces()
    out = Fraction(1)
    for piece, first in ((p1, cls[0] if len(p1) else None), (p2, cls[path.gap + 1] if len(p2) else None)):
        if len(piece):
            out *= Fraction(w.c) ** len(piece) / g_weight(piece.slr(), first, Fraction(w.a), Fraction(w.b))
    return out


def gap_weight_after(config: Configuration, path: FaultPath, w: Weights):
    """Weight class of the gap vertex in the image of an almost fault line."""
    path = orient_path(path)
    image = peierls_map(config, path)
    from .lattice import classify_vertex

    i, j = path.crossed_vertices()[path.gap]
    return {"a": w.a, "b": w.b, "c": w.c}[classify_vertex(image, i, j).weight_class]


def path_classes_match_g(config: Configuration, path: FaultPath) -> bool:
    """True when the classes along the path follow the turn-toggling rule from its first vertex."""
    path = orient_path(path)
    from .lattice import classify_vertex

    cls = [classify_vertex(config, i, j).weight_class for i, j in path.crossed_vertices()]
    cur = cls[0]
    for k, ch in enumerate(path.slr()):
        if k and ch in "LR":
            cur = "b" if cur == "a" else "a"
        if cls[k] != cur:
            return False
    return True


# ----------------------------------------------------------------------
# exact cut masses
# ----------------------------------------------------------------------
def cut_mass_afe(space, w: Weights, classes: SpaceClassification | None = None) -> dict:
    """Exact masses of the classes and the conductance of the red-side cut."""
    from .exact import boltzmann, conductance, transition_matrix

    classes = classes or classify_space(space)
    pi = np.asarray(boltzmann(space, w) if not w.is_exact() else [float(x) for x in boltzmann(space, w)])
    P = transition_matrix(space, w)
    left = classes.left
    phi_left = conductance(P, pi, left) if left.any() else float("nan")
    mass = lambda m: float(pi[m].sum())
    return {
        "pi_C_R": mass(classes.in_CR),
        "pi_C_G": mass(classes.in_CG),
        "pi_C_FL": mass(classes.in_FL),
        "pi_C_AFL": mass(classes.in_AFL),
        "pi_middle": mass(classes.middle),
        "pi_left": mass(left),
        "pi_right": mass(classes.right),
        "phi_left": phi_left,
        "four_pi_middle": 4 * mass(classes.middle),
        "bound_holds": bool(phi_left <= 4 * mass(classes.middle) + 1e-15) if left.any() else True,
    }


def failure_rate_heuristic(w: Weights, n: int) -> float:
    """Per-run escape heuristic base^n with base (a + b + sqrt(a^2 + 14ab + b^2)) / 2c."""
    a, b, c = float(w.a), float(w.b), float(w.c)
    return ((a + b + math.sqrt(a * a + 14 * a * b + b * b)) / (2 * c)) ** n


# ----------------------------------------------------------------------
# exhaustive check of the Peierls map
# ----------------------------------------------------------------------
@dataclass
class PeierlsCheck:
    fault_line_maps: int
    almost_fault_line_maps: int
    ratio_mismatches: int
    class_mismatches: int
    collisions: int
    skipped_gaps: int  # almost fault lines whose gap vertex is not a corner

    @property
    def holds(self) -> bool:
        return self.ratio_mismatches == 0 and self.class_mismatches == 0 and self.collisions == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["holds"] = self.holds
        return d


def peierls_check(space, w: Weights) -> PeierlsCheck:
    """Apply the map along every (almost) fault line of every state.

    Checks the exact weight ratio weight(image)/weight(x) against the
    predicted amplification, that vertex classes along each path follow the
    turn-toggling rule, and that for a fixed oriented path (and gap) distinct
    preimages have distinct images.
    """
    from .lattice import classify_vertex, weight

    if not w.is_exact():
        w = Weights.exact(Fraction(w.a), Fraction(w.b), Fraction(w.c))
    n_fl = n_afl = bad_ratio = bad_cls = skipped = 0
    images: dict = {}
    for x in space:
        Lx = build_Lx(x)
        wx = Fraction(weight(x, w))
        for f in all_fault_lines(x, Lx):
            f = orient_path(f)
            y = peierls_map(x, f)
            n_fl += 1
            if Fraction(weight(y, w)) / wx != expected_amplification(x, f, w):
                bad_ratio += 1
            if not path_classes_match_g(x, f):
                bad_cls += 1
            images.setdefault((f.orientation, f.faces, None), {}).setdefault(y.key(), set()).add(x.key())
        for f in all_almost_fault_lines(x, Lx):
            f = orient_path(f)
            i, j = f.crossed_vertices()[f.gap]
            if classify_vertex(x, i, j).weight_class != "c":
                skipped += 1
                continue
            y = peierls_map(x, f)
            n_afl += 1
            expect = expected_amplification(x, f, w) * Fraction(gap_weight_after(x, f, w)) / Fraction(w.c)
            if Fraction(weight(y, w)) / wx != expect:
                bad_ratio += 1
            images.setdefault((f.orientation, f.faces, f.gap), {}).setdefault(y.key(), set()).add(x.key())
    collisions = sum(len(pre) - 1 for by_image in images.values() for pre in by_image.values())
    return PeierlsCheck(n_fl, n_afl, bad_ratio, bad_cls, collisions, skipped)
