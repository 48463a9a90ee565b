"""Weighted non-backtracking walks and their generating function F_n(x, y).

Walks are strings over {S, L, R} starting with S.  Along a walk the vertex
class starts at a or b and toggles at every turn; g_a / g_b multiply the
class weights.  F_n(x, y) sums g_x + g_y over all 3^(n-1) walks, which
regroups as a sum over class strings s in {0,1}^n of 2^h(s) x^|s| y^(n-|s|).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np
import sympy

from .faultline import g_weight

BRUTE_MAX_N = 14


def walk_weight_g(walk: str, first_type: str, a, b):
    """g_a(walk) or g_b(walk): product of class weights, toggling a <-> b at each L or R."""
    return g_weight(walk, first_type, a, b)


def walk_to_points(walk: str) -> list[tuple[int, int]]:
    """Lattice points of a walk from the origin whose first step is north."""
    dx, dy = 0, 1
    x = y = 0
    pts = [(0, 0)]
    for ch in walk:
        if ch == "L":
            dx, dy = -dy, dx
        elif ch == "R":
            dx, dy = dy, -dx
        elif ch != "S":
            raise ValueError(f"bad step {ch!r}")
        x, y = x + dx, y + dy
        pts.append((x, y))
    return pts


def class_string(walk: str, first: str = "a") -> str:
    """Sequence of vertex classes induced by the turn-toggling rule."""
    cur = first
    out = []
    for k, ch in enumerate(walk):
        if k and ch in "LR":
            cur = "b" if cur == "a" else "a"
        out.append(cur)
    return "".join(out)


def all_walks(n: int) -> Iterable[str]:
    for rest in itertools.product("SLR", repeat=n - 1):
        yield "S" + "".join(rest)


def h_changes(s: str) -> int:
    return sum(1 for u, v in zip(s, s[1:]) if u != v)


@dataclass
class BruteResult:
    walk_sum: object
    bitstring_sum: object
    preimages_ok: bool

    @property
    def value(self):
        return self.walk_sum


def F_brute(n: int, x, y) -> BruteResult:
    """Both brute-force forms of F_n, plus the preimage count check.

    The walk sum groups the 3^(n-1) walks by their class string (the class
    string of g_x is determined by the walk, and g_y is its complement), so
    each group contributes (#walks) x^|s| y^(n-|s|) with |s| the number of
    x-class vertices.  The bit-string form uses 2^h(s) directly.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > BRUTE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_MAX_N}")
    # walk side: vectorized class strings for every walk
    codes = np.array(list(itertools.product((0, 1, 2), repeat=n - 1)), dtype=np.int8).reshape(3 ** (n - 1), n - 1)
    # each row is one walk after its leading S (S, L, R -> 0, 1, 2); class of vertex k is the parity of turns so far
    turns = (codes != 0).astype(np.int8)
    cls = np.zeros((turns.shape[0], n), dtype=np.int8)
    if n > 1:
        cls[:, 1:] = np.cumsum(turns, axis=1) % 2
    n_first = (cls == 0).sum(axis=1)  # vertices in the starting class
    groups = {}
    for row in map(bytes, cls):
        groups[row] = groups.get(row, 0) + 1
    counts = np.bincount(n_first, minlength=n + 1)
    walk_sum = 0
    for k in range(n + 1):
        c = int(counts[k])
        if c:
            # g_x puts x on the first-class vertices, g_y puts y there
            walk_sum += c * (x ** k * y ** (n - k) + y ** k * x ** (n - k))
    bit_sum = 0
    for s in itertools.product((0, 1), repeat=n):
        ones = sum(s)
        bit_sum += 2 ** h_changes(s) * x ** ones * y ** (n - ones)
    pre_ok = all(c == 2 ** h_changes(tuple(row)) for row, c in groups.items())
    if walk_sum != bit_sum and not _close(walk_sum, bit_sum):
        raise AssertionError(f"walk and bit-string forms disagree: {walk_sum} vs {bit_sum}")
    return BruteResult(walk_sum, bit_sum, pre_ok)


def _close(u, v, rel=1e-12):
    try:
        return abs(u - v) <= rel * max(abs(u), abs(v))
    except TypeError:
        return False


def F_recurrence_parts(n: int, x, y):
    """(F_{n,0}, F_{n,1}) from F_{k+1,0} = x F_{k,0} + 2x F_{k,1}, F_{k+1,1} = 2y F_{k,0} + y F_{k,1}."""
    if n < 1:
        raise ValueError("n must be positive")
    f0, f1 = x, y
    for _ in range(n - 1):
        f0, f1 = x * f0 + 2 * x * f1, 2 * y * f0 + y * f1
    return f0, f1


def F_recurrence(n: int, x, y):
    f0, f1 = F_recurrence_parts(n, x, y)
    return f0 + f1


def _eig(x, y):
    m = math.sqrt(x * x + 14 * x * y + y * y)
    return m, (x + y - m) / 2, (x + y + m) / 2


def F_closed_form(n: int, x, y):
    """(1/2m)[(x^2+6xy+y^2 + m(x+y)) l2^(n-1) - (x^2+6xy+y^2 - m(x+y)) l1^(n-1)].

    Floats go through math; Fractions/ints are evaluated symbolically with
    sympy so the square root stays exact.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if isinstance(x, (int, Fraction)) and isinstance(y, (int, Fraction)):
        return _closed_form_exact(n, Fraction(x), Fraction(y))
    x, y = float(x), float(y)
    if x <= 0 or y <= 0:
        raise ValueError("x and y must be positive")
    m, l1, l2 = _eig(x, y)
    q = x * x + 6 * x * y + y * y
    return ((q + m * (x + y)) * l2 ** (n - 1) - (q - m * (x + y)) * l1 ** (n - 1)) / (2 * m)


def _closed_form_exact(n: int, x: Fraction, y: Fraction) -> Fraction:
    X, Y = sympy.Rational(x.numerator, x.denominator), sympy.Rational(y.numerator, y.denominator)
    if X <= 0 or Y <= 0:
        raise ValueError("x and y must be positive")
    m = sympy.sqrt(X * X + 14 * X * Y + Y * Y)
    l1, l2 = (X + Y - m) / 2, (X + Y + m) / 2
    q = X * X + 6 * X * Y + Y * Y
    num = sympy.expand((q + m * (X + Y)) * l2 ** (n - 1) - (q - m * (X + Y)) * l1 ** (n - 1))
    val = sympy.expand(sympy.radsimp(num / (2 * m)))
    if not val.is_Rational:
        raise ArithmeticError(f"closed form did not reduce to a rational: {val}")
    return Fraction(int(val.p), int(val.q))


def F_upper_bound(n: int, x, y):
    """3(x + y) l2^(n-1)."""
    if x <= 0 or y <= 0:
        raise ValueError("x and y must be positive")
    _, _, l2 = _eig(float(x), float(y))
    return 3 * (float(x) + float(y)) * l2 ** (n - 1)


def log_F_closed_form(n: int, x: float, y: float) -> float:
    """log F_n for large n without overflow (the l1 term is bounded by the l2 term)."""
    m, l1, l2 = _eig(x, y)
    q = x * x + 6 * x * y + y * y
    r = (l1 / l2) ** (n - 1) if n > 1 else 1.0
    inner = (q + m * (x + y)) - (q - m * (x + y)) * r
    return math.log(inner / (2 * m)) + (n - 1) * math.log(l2)


def log_F_upper_bound(n: int, x: float, y: float) -> float:
    _, _, l2 = _eig(x, y)
    return math.log(3 * (x + y)) + (n - 1) * math.log(l2)


def asymptotic_tightness(x: float, y: float) -> float:
    """lim F_n / bound = (x^2+6xy+y^2 + m(x+y)) / (2m * 3(x+y))."""
    m, _, _ = _eig(x, y)
    return (x * x + 6 * x * y + y * y + m * (x + y)) / (2 * m * 3 * (x + y))


def system_matrix(x, y) -> np.ndarray:
    return np.array([[x, 2 * x], [2 * y, y]], dtype=float)


def eigendecomposition(x: float, y: float):
    """(P, Lambda) with A = P Lambda P^-1 from the explicit eigenvalues (x + y -/+ m)/2."""
    m, l1, l2 = _eig(x, y)
    # eigenvector for l: (2x, l - x)
    P = np.array([[2 * x, 2 * x], [l1 - x, l2 - x]])
    return P, np.diag([l1, l2])


# ----------------------------------------------------------------------
# antiferroelectric parameter condition
# ----------------------------------------------------------------------
@dataclass
class AfeCondition:
    antiferroelectric: bool
    hypothesis: bool  # 3ab + ac + bc < c^2
    conclusion: bool  # a + b + sqrt(a^2 + 14ab + b^2) < 2c
    base: float
    hypothesis_margin: float
    conclusion_margin: float

    @property
    def implication_holds(self) -> bool:
        return (not (self.antiferroelectric and self.hypothesis)) or self.conclusion


def decay_base(a, b, c) -> float:
    a, b, c = float(a), float(b), float(c)
    return (a + b + math.sqrt(a * a + 14 * a * b + b * b)) / (2 * c)


def afe_condition(a, b, c) -> AfeCondition:
    a_, b_, c_ = float(a), float(b), float(c)
    if min(a_, b_, c_) <= 0:
        raise ValueError("weights must be positive")
    hyp = 3 * a * b + a * c + b * c < c * c
    s = a_ + b_ + math.sqrt(a_ * a_ + 14 * a_ * b_ + b_ * b_)
    return AfeCondition(
        antiferroelectric=a + b < c,
        hypothesis=bool(hyp),
        conclusion=s < 2 * c_,
        base=s / (2 * c_),
        hypothesis_margin=float(c * c - (3 * a * b + a * c + b * c)),
        conclusion_margin=2 * c_ - s,
    )


@dataclass
class PeierlsRate:
    base: float
    log_rate: float  # n log(base)
    rate: float      # base^n


def peierls_rate(a, b, c, n: int) -> PeierlsRate:
    """The exponential factor base^n in the bound on pi(C_FL u C_AFL); the polynomial prefactor is left out."""
    if not float(a) + float(b) < float(c):
        raise ValueError("weights are not antiferroelectric")
    base = decay_base(a, b, c)
    return PeierlsRate(base, n * math.log(base), base ** n)
