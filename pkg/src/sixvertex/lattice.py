"""Lattice, configurations, vertex types and Boltzmann weights.

Coordinates put the origin at the lower-left internal vertex, x grows east and
y grows north.  Internal vertices are ``(i, j)`` with ``0 <= i, j < n``.

Edges are stored as orientation bits in two arrays:

* ``h[j, k]`` -- horizontal edge in row ``y = j`` joining ``x = k - 1`` and
  ``x = k``.  Bit 1 means the arrow points east.  ``k = 0`` is the left stub,
  ``k = n`` the right stub.
* ``v[k, i]`` -- vertical edge in column ``x = i`` joining ``y = k - 1`` and
  ``y = k``.  Bit 1 means the arrow points north.  ``k = 0`` is the bottom
  stub, ``k = n`` the top stub.

The flat bit order used everywhere (state keys, serialization) is
``h.ravel()`` followed by ``v.ravel()``, both row-major.  A bit equal to 1 is
exactly an edge kept in the lattice-path picture (edges pointing north or east).

Vertex types follow the path picture::

    A1  crossing         in W, in S, out E, out N   (all four edges kept)
    A2  empty            no kept edge
    B3  horizontal       W -> E
    B4  vertical         S -> N
    C5  corner           W -> N
    C6  corner           S -> E
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

SIDES = ("left", "right", "bottom", "top")


class InvalidConfiguration(ValueError):
    """Raised when an orientation violates the ice rule or a boundary."""


class VertexType(enum.IntEnum):
    A1 = 0
    A2 = 1
    B3 = 2
    B4 = 3
    C5 = 4
    C6 = 5

    @property
    def weight_class(self) -> str:
        return "abc"[self.value // 2]


# (L, B, R, T) packed as L<<3 | B<<2 | R<<1 | T  ->  vertex type, -1 if invalid
TYPE_TABLE = np.full(16, -1, dtype=np.int8)
TYPE_TABLE[0b1111] = VertexType.A1
TYPE_TABLE[0b0000] = VertexType.A2
TYPE_TABLE[0b1010] = VertexType.B3
TYPE_TABLE[0b0101] = VertexType.B4
TYPE_TABLE[0b1001] = VertexType.C5
TYPE_TABLE[0b0110] = VertexType.C6


class Phase(str, enum.Enum):
    FE = "FE"
    AFE = "AFE"
    DO = "DO"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class Weights:
    """Zero-field vertex weights ``(a, b, c)``.

    Entries may be ints, Fractions or floats; Fractions give the exact-rational
    mode used by the enumeration tests.
    """

    a: float | Fraction
    b: float | Fraction
    c: float | Fraction = 1

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise ValueError(f"weights must be strictly positive, got {self}")

    @classmethod
    def exact(cls, a, b, c=1) -> "Weights":
        return cls(Fraction(a), Fraction(b), Fraction(c))

    @classmethod
    def from_lambda_mu(cls, lam, mu) -> "Weights":
        """Reparameterized weights with ``c`` normalized to 1."""
        return cls(lam, mu, 1)

    @property
    def lam(self):
        return self.a / self.c

    @property
    def mu(self):
        return self.b / self.c

    def by_type(self) -> tuple:
        return (self.a, self.a, self.b, self.b, self.c, self.c)

    def delta(self):
        a, b, c = self.a, self.b, self.c
        return (a * a + b * b - c * c) / (2 * a * b)

    def phase(self) -> Phase:
        return classify_phase(self)

    def is_exact(self) -> bool:
        return all(isinstance(x, (int, Fraction)) for x in (self.a, self.b, self.c))


def delta(w: Weights):
    return w.delta()


def classify_phase(w: Weights) -> Phase:
    """Phase from Delta, cross-checked against the linear characterization."""
    d = w.delta()
    a, b, c = w.a, w.b, w.c
    if d > 1:
        by_delta = Phase.FE
    elif d < -1:
        by_delta = Phase.AFE
    elif -1 < d < 1:
        by_delta = Phase.DO
    else:
        by_delta = Phase.BOUNDARY
    if a > b + c or b > a + c:
        by_ineq = Phase.FE
    elif a + b < c:
        by_ineq = Phase.AFE
    elif abs(a - b) < c < a + b:
        by_ineq = Phase.DO
    else:
        by_ineq = Phase.BOUNDARY
    if by_delta != by_ineq:
        # only reachable through float rounding right at a phase boundary
        raise ArithmeticError(f"phase characterizations disagree for {w}: {by_delta} vs {by_ineq}")
    return by_delta


@dataclass(frozen=True)
class Face:
    """A cell of the lattice, possibly a partially enclosed boundary cell.

    ``edges`` are flat edge indices, ``ccw`` the bit value each edge takes when
    the cell boundary is traversed counterclockwise.
    """

    p: int
    q: int
    edges: tuple[int, ...]
    ccw: tuple[int, ...]
    vertices: tuple[int, ...]
    internal: bool


class Lattice:
    """Index tables for the n x n lattice with its 4n boundary stubs."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n
        self.n_h = n * (n + 1)
        self.n_edges = 2 * n * (n + 1)
        self.n_vertices = n * n

        ve = np.empty((n * n, 4), dtype=np.int64)
        for j in range(n):
            for i in range(n):
                ve[self.vertex(i, j)] = (self.h(j, i), self.v(j, i), self.h(j, i + 1), self.v(j + 1, i))
        self.vertex_edges = ve

        self.faces: list[Face] = []
        for q in range(n + 1):
            for p in range(n + 1):
                edges, ccw = [], []
                if q >= 1:
                    edges.append(self.h(q - 1, p)); ccw.append(1)
                if p <= n - 1:
                    edges.append(self.v(q, p)); ccw.append(1)
                if q <= n - 1:
                    edges.append(self.h(q, p)); ccw.append(0)
                if p >= 1:
                    edges.append(self.v(q, p - 1)); ccw.append(0)
                verts = tuple(
                    self.vertex(x, y)
                    for (x, y) in ((p - 1, q - 1), (p, q - 1), (p - 1, q), (p, q))
                    if 0 <= x < n and 0 <= y < n
                )
                internal = 1 <= p <= n - 1 and 1 <= q <= n - 1
                self.faces.append(Face(p, q, tuple(edges), tuple(ccw), verts, internal))

        self.stub_edges = {
            "left": np.array([self.h(j, 0) for j in range(n)]),
            "right": np.array([self.h(j, n) for j in range(n)]),
            "bottom": np.array([self.v(0, i) for i in range(n)]),
            "top": np.array([self.v(n, i) for i in range(n)]),
        }
        self.is_stub = np.zeros(self.n_edges, dtype=bool)
        for idx in self.stub_edges.values():
            self.is_stub[idx] = True

    def h(self, j: int, k: int) -> int:
        return j * (self.n + 1) + k

    def v(self, k: int, i: int) -> int:
        return self.n_h + k * self.n + i

    def vertex(self, i: int, j: int) -> int:
        return j * self.n + i

    def face_index(self, p: int, q: int) -> int:
        return q * (self.n + 1) + p

    def edge_endpoints(self, e: int) -> tuple[tuple[float, float], tuple[float, float]]:
        """Geometric endpoints; stubs reach one unit outside the grid."""
        n = self.n
        if e < self.n_h:
            j, k = divmod(e, n + 1)
            return (k - 1, j), (k, j)
        k, i = divmod(e - self.n_h, n)
        return (i, k - 1), (i, k)

    def edge_midpoint(self, e: int) -> tuple[float, float]:
        (x0, y0), (x1, y1) = self.edge_endpoints(e)
        return (x0 + x1) / 2, (y0 + y1) / 2

    def flippable_faces(self, boundary: "BoundaryCondition") -> list[Face]:
        """Cells eligible for Glauber moves under ``boundary``.

        Fixed boundaries use the (n-1)^2 internal cells.  Under free boundary the
        partially enclosed boundary cells are eligible too, since their stubs are
        unconstrained.
        """
        if boundary.kind == "free" and boundary.boundary_moves:
            return list(self.faces)
        return [f for f in self.faces if f.internal]

    def face_arrays(self, faces: Sequence[Face]):
        """Padded arrays (edges, ccw, vertices) for the compiled kernels."""
        m = len(faces)
        fe = np.full((m, 4), -1, dtype=np.int64)
        fc = np.zeros((m, 4), dtype=np.uint8)
        fv = np.full((m, 4), -1, dtype=np.int64)
        for r, f in enumerate(faces):
            fe[r, : len(f.edges)] = f.edges
            fc[r, : len(f.ccw)] = f.ccw
            fv[r, : len(f.vertices)] = f.vertices
        return fe, fc, fv


@lru_cache(maxsize=None)
def lattice(n: int) -> Lattice:
    return Lattice(n)


@dataclass(frozen=True)
class BoundaryCondition:
    """Stub orientations.  ``stubs`` maps side -> tuple of bits (empty when free)."""

    n: int
    kind: str = "free"
    stubs: Mapping[str, tuple[int, ...]] = field(default_factory=dict)
    boundary_moves: bool = True

    def __post_init__(self):
        if self.kind not in ("free", "domain-wall", "independent-paths", "explicit"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "free":
            if self.stubs:
                raise ValueError("free boundary forces no stubs")
            return
        if set(self.stubs) != set(SIDES):
            raise ValueError("non-free boundaries must force all 4n stubs")
        for side in SIDES:
            bits = self.stubs[side]
            if len(bits) != self.n or any(b not in (0, 1) for b in bits):
                raise ValueError(f"bad stub bits on {side}: {bits}")
        # paths entering (left/bottom bit 1) must equal paths leaving (right/top bit 1)
        entering = sum(self.stubs["left"]) + sum(self.stubs["bottom"])
        leaving = sum(self.stubs["right"]) + sum(self.stubs["top"])
        if entering != leaving:
            raise ValueError(f"boundary admits no Eulerian orientation: {entering} paths in, {leaving} out")

    @classmethod
    def free(cls, n: int, boundary_moves: bool = True) -> "BoundaryCondition":
        return cls(n, "free", {}, boundary_moves)

    @classmethod
    def domain_wall(cls, n: int) -> "BoundaryCondition":
        # left/right stubs point inward, bottom/top point outward
        return cls(n, "domain-wall", {"left": (1,) * n, "right": (0,) * n, "bottom": (0,) * n, "top": (1,) * n})

    @classmethod
    def explicit(cls, n, left, right, bottom, top, kind="explicit") -> "BoundaryCondition":
        stubs = {s: tuple(int(b) for b in bits) for s, bits in zip(SIDES, (left, right, bottom, top))}
        return cls(n, kind, stubs)

    @property
    def is_free(self) -> bool:
        return self.kind == "free"

    def forced_bits(self) -> dict[int, int]:
        """Flat edge index -> forced bit."""
        if self.is_free:
            return {}
        lat = lattice(self.n)
        return {int(e): b for side in SIDES for e, b in zip(lat.stub_edges[side], self.stubs[side])}

    def rotated(self) -> "BoundaryCondition":
        """Boundary of the lattice rotated 90 degrees clockwise."""
        if self.is_free:
            return self
        n = self.n
        s = self.stubs
        # left -> top (bit flips: east becomes south), top -> right, right -> bottom, bottom -> left
        top = tuple(1 - s["left"][n - 1 - t] for t in range(n))
        right = tuple(s["top"][n - 1 - t] for t in range(n))
        bottom = tuple(1 - s["right"][n - 1 - t] for t in range(n))
        left = tuple(s["bottom"][n - 1 - t] for t in range(n))
        return BoundaryCondition.explicit(n, left, right, bottom, top)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if not self.is_free:
            d["stubs"] = {k: list(v) for k, v in self.stubs.items()}
        else:
            d["boundary_moves"] = self.boundary_moves
        return d

    @classmethod
    def from_dict(cls, n: int, d: Mapping) -> "BoundaryCondition":
        if d["kind"] == "free":
            return cls.free(n, d.get("boundary_moves", True))
        return cls(n, d["kind"], {k: tuple(v) for k, v in d["stubs"].items()})


def vertex_codes(bits: np.ndarray, n: int) -> np.ndarray:
    """Packed (L,B,R,T) codes for every internal vertex; works on (..., E) arrays."""
    ve = lattice(n).vertex_edges
    b = bits[..., ve].astype(np.int8)
    return (b[..., 0] << 3) | (b[..., 1] << 2) | (b[..., 2] << 1) | b[..., 3]


def vertex_types_array(bits: np.ndarray, n: int) -> np.ndarray:
    return TYPE_TABLE[vertex_codes(bits, n)]


def type_counts_array(bits: np.ndarray, n: int) -> np.ndarray:
    """(..., 6) counts n_1..n_6 for a batch of states."""
    t = vertex_types_array(bits, n)
    if np.any(t < 0):
        raise InvalidConfiguration("ice rule violated")
    return np.stack([(t == k).sum(axis=-1) for k in range(6)], axis=-1)


@dataclass(frozen=True, eq=False)
class Configuration:
    """An Eulerian orientation of the lattice, stored as a read-only bit vector."""

    n: int
    bits: np.ndarray
    boundary: BoundaryCondition

    def __post_init__(self):
        bits = np.array(self.bits, dtype=np.uint8).ravel()
        if bits.size != 2 * self.n * (self.n + 1):
            raise ValueError("wrong number of edge bits")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_arrays(cls, h, v, boundary: BoundaryCondition | None = None, check=True) -> "Configuration":
        h = np.asarray(h, dtype=np.uint8)
        n = h.shape[0]
        boundary = boundary or BoundaryCondition.free(n)
        cfg = cls(n, np.concatenate([h.ravel(), np.asarray(v, dtype=np.uint8).ravel()]), boundary)
        if check:
            cfg.validate()
        return cfg

    @property
    def h(self) -> np.ndarray:
        return self.bits[: self.n * (self.n + 1)].reshape(self.n, self.n + 1)

    @property
    def v(self) -> np.ndarray:
        return self.bits[self.n * (self.n + 1):].reshape(self.n + 1, self.n)

    @property
    def lattice(self) -> Lattice:
        return lattice(self.n)

    def key(self) -> bytes:
        return np.packbits(self.bits).tobytes()

    def __eq__(self, other):
        return (
            isinstance(other, Configuration)
            and self.n == other.n
            and np.array_equal(self.bits, other.bits)
        )

    def __hash__(self):
        return hash((self.n, self.bits.tobytes()))

    def validate(self) -> None:
        t = vertex_types_array(self.bits, self.n)
        bad = np.flatnonzero(t < 0)
        if bad.size:
            j, i = divmod(int(bad[0]), self.n)
            raise InvalidConfiguration(f"ice rule violated at vertex ({i}, {j})")
        for e, b in self.boundary.forced_bits().items():
            if self.bits[e] != b:
                raise InvalidConfiguration(f"stub edge {e} disagrees with the {self.boundary.kind} boundary")

    def vertex_types(self) -> np.ndarray:
        return vertex_types_array(self.bits, self.n)

    def type_counts(self) -> np.ndarray:
        return type_counts_array(self.bits, self.n)

    def with_bits(self, bits) -> "Configuration":
        return Configuration(self.n, bits, self.boundary)

    def reversed(self) -> "Configuration":
        """All arrows reversed (the boundary is reversed too when fixed)."""
        bits = 1 - self.bits
        b = self.boundary
        if not b.is_free:
            b = BoundaryCondition.explicit(self.n, *[tuple(1 - x for x in b.stubs[s]) for s in SIDES])
        return Configuration(self.n, bits, b)

    def rotated(self) -> "Configuration":
        """Rotate the whole configuration 90 degrees clockwise."""
        n = self.n
        h, v = self.h, self.v
        nh = np.empty((n, n + 1), dtype=np.uint8)
        nv = np.empty((n + 1, n), dtype=np.uint8)
        # h[j, k] (east = 1) becomes v[n - k, j] with east -> south
        for j in range(n):
            for k in range(n + 1):
                nv[n - k, j] = 1 - h[j, k]
        # v[k, i] (north = 1) becomes h[n - 1 - i, k] with north -> east
        for k in range(n + 1):
            for i in range(n):
                nh[n - 1 - i, k] = v[k, i]
        return Configuration.from_arrays(nh, nv, self.boundary.rotated())

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "boundary": self.boundary.to_dict(),
                "edge_order": "h[j,k] row-major then v[k,i] row-major; 1 = east/north",
                "edges": "".join(map(str, self.bits.tolist())),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Configuration":
        d = json.loads(text)
        n = int(d["n"])
        bits = np.array([int(ch) for ch in d["edges"]], dtype=np.uint8)
        cfg = cls(n, bits, BoundaryCondition.from_dict(n, d["boundary"]))
        cfg.validate()
        return cfg


def classify_vertex(config: Configuration, i: int, j: int) -> VertexType:
    n = config.n
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"({i}, {j}) is not an internal vertex")
    L, B, R, T = (int(config.bits[e]) for e in config.lattice.vertex_edges[config.lattice.vertex(i, j)])
    t = TYPE_TABLE[(L << 3) | (B << 2) | (R << 1) | T]
    if t < 0:
        raise InvalidConfiguration(f"ice rule violated at vertex ({i}, {j})")
    return VertexType(int(t))


def weight_from_counts(counts, w: Weights):
    n1, n2, n3, n4, n5, n6 = (int(x) for x in counts)
    return w.a ** (n1 + n2) * w.b ** (n3 + n4) * w.c ** (n5 + n6)


def weight(config: Configuration, w: Weights):
    """Boltzmann weight a^(n1+n2) b^(n3+n4) c^(n5+n6)."""
    return weight_from_counts(config.type_counts(), w)


def reparam_weight(config: Configuration, lam, mu):
    """Path-picture weight: lambda^(2 #crossings) mu^(#straights), empties and corners weigh 1."""
    n1, _, n3, n4, _, _ = (int(x) for x in config.type_counts())
    return lam ** (2 * n1) * mu ** (n3 + n4)


def log_weights_array(counts: np.ndarray, w: Weights) -> np.ndarray:
    la, lb, lc = (math.log(float(x)) for x in (w.a, w.b, w.c))
    counts = np.asarray(counts, dtype=float)
    return (counts[..., 0] + counts[..., 1]) * la + (counts[..., 2] + counts[..., 3]) * lb + (counts[..., 4] + counts[..., 5]) * lc


# ----------------------------------------------------------------------
# ground states
# ----------------------------------------------------------------------
def ground_state_red(n: int) -> Configuration:
    """All-corner state x_R: C5 where i + j is even, C6 elsewhere."""
    j, k = np.indices((n, n + 1))
    h = ((j + k) % 2 == 0).astype(np.uint8)
    k2, i = np.indices((n + 1, n))
    v = ((i + k2) % 2 == 1).astype(np.uint8)
    return Configuration.from_arrays(h, v, BoundaryCondition.free(n))


def ground_state_green(n: int) -> Configuration:
    return ground_state_red(n).reversed()


# ----------------------------------------------------------------------
# lattice paths
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class LatticePath:
    """A north-east path: entry stub, visited vertices, exit stub.

    ``entry`` and ``exit`` are ``(side, offset)`` pairs.
    """

    entry: tuple[str, int]
    vertices: tuple[tuple[int, int], ...]
    exit: tuple[str, int]

    def steps(self) -> str:
        """Step letters between consecutive vertices (E/N), stubs excluded."""
        out = []
        for (x0, y0), (x1, y1) in zip(self.vertices, self.vertices[1:]):
            out.append("E" if x1 == x0 + 1 else "N")
        return "".join(out)

    def full_steps(self) -> str:
        """Steps including the entry and exit stubs."""
        first = "E" if self.entry[0] == "left" else "N"
        last = "E" if self.exit[0] == "right" else "N"
        return first + self.steps() + last

    def straights(self) -> int:
        s = self.full_steps()
        return sum(1 for a, b in zip(s, s[1:]) if a == b)


def to_paths(config: Configuration) -> list[LatticePath]:
    """Extract the kept (north/east) edges as edge-disjoint NE paths.

    At a crossing the path arriving from the west turns north and the one from
    the south turns east, so extracted paths never cross and keep their order.
    Paths are listed from the lower-right entry to the upper-left one.
    """
    n = config.n
    h, v = config.h, config.v
    config.validate()
    entries = [("bottom", i) for i in range(n - 1, -1, -1) if v[0, i]] + [("left", j) for j in range(n) if h[j, 0]]
    paths = []
    for side, off in entries:
        if side == "left":
            x, y, came = 0, off, "W"
        else:
            x, y, came = off, 0, "S"
        verts = []
        while True:
            verts.append((x, y))
            if came == "W":
                go_north = bool(v[y + 1, x])
            else:
                go_north = not h[y, x + 1]
            if go_north:
                if y == n - 1:
                    exit_ = ("top", x)
                    break
                y, came = y + 1, "S"
            else:
                if x == n - 1:
                    exit_ = ("right", y)
                    break
                x, came = x + 1, "W"
        paths.append(LatticePath((side, off), tuple(verts), exit_))
    return paths


def from_paths(paths: Iterable[LatticePath], n: int, boundary: BoundaryCondition | None = None) -> Configuration:
    """Rebuild a configuration from its kept edges; the inverse of :func:`to_paths`."""
    lat = lattice(n)
    bits = np.zeros(lat.n_edges, dtype=np.uint8)

    def use(e):
        if bits[e]:
            raise InvalidConfiguration(f"edge {e} used by two paths")
        bits[e] = 1

    for path in paths:
        side, off = path.entry
        x0, y0 = path.vertices[0]
        if side == "left":
            if (x0, y0) != (0, off):
                raise InvalidConfiguration("path does not start at its entry stub")
            use(lat.h(off, 0))
        elif side == "bottom":
            if (x0, y0) != (off, 0):
                raise InvalidConfiguration("path does not start at its entry stub")
            use(lat.v(0, off))
        else:
            raise InvalidConfiguration(f"paths enter from left or bottom, not {side}")
        for (xa, ya), (xb, yb) in zip(path.vertices, path.vertices[1:]):
            if (xb, yb) == (xa + 1, ya):
                use(lat.h(ya, xb))
            elif (xb, yb) == (xa, ya + 1):
                use(lat.v(yb, xa))
            else:
                raise InvalidConfiguration("paths move one step north or east")
        side, off = path.exit
        xl, yl = path.vertices[-1]
        if side == "right" and (xl, yl) == (n - 1, off):
            use(lat.h(off, n))
        elif side == "top" and (xl, yl) == (off, n - 1):
            use(lat.v(n, off))
        else:
            raise InvalidConfiguration("path does not end at its exit stub")
    cfg = Configuration(n, bits, boundary or BoundaryCondition.free(n))
    cfg.validate()
    return cfg
