"""Correlated random walks and weighted tethered lattice paths.

A correlated random walk takes its first step uniformly in {-1, +1}; every
later step repeats the previous one with probability p and reverses otherwise.
With p = mu / (1 + mu) a 2n-step walk conditioned to return to 0 has the same
law as a north-east path from (0, 0) to (n, n) weighted by mu^(#straights):
E steps are +1, N steps are -1, and S_i = x_i - y_i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .lattice import LatticePath


@dataclass(frozen=True)
class CorrelatedWalkSpec:
    """Walk of 2n steps with momentum p (repeat probability)."""

    n: int
    p: float | Fraction

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        if not 0 <= self.p <= 1:
            raise ValueError("momentum p must lie in [0, 1]")

    @classmethod
    def from_mu(cls, n: int, mu) -> "CorrelatedWalkSpec":
        if mu <= 0:
            raise ValueError("mu must be positive")
        return cls(n, mu / (1 + mu))

    @property
    def mu(self):
        if self.p >= 1 or self.p <= 0:
            raise ValueError("mu is only defined for p in (0, 1)")
        return self.p / (1 - self.p)

    @property
    def exact(self) -> bool:
        return isinstance(self.p, (Fraction, int))


# ----------------------------------------------------------------------
# PDF
# ----------------------------------------------------------------------
def _log_pdf_terms(n: int, m: int, p: float) -> np.ndarray:
    """Log of each k-term; the bracket n(1-p)+k(2p-1) is split as (n-k)(1-p) + kp so every piece is nonnegative."""
    k = np.arange(1, n - m + 1, dtype=float)
    lc = (
        gammaln(n + m) - gammaln(k) - gammaln(n + m - k + 1)
        + gammaln(n - m) - gammaln(k) - gammaln(n - m - k + 1)
    )
    with np.errstate(divide="ignore"):
        lp, lq = math.log(p) if p > 0 else -np.inf, math.log1p(-p) if p < 1 else -np.inf
        # (n-k)/k (1-p)^(2k) p^(2n-1-2k): vanishes when k = n, where p's exponent would be -1
        first = np.where(
            k < n,
            np.log(np.maximum(n - k, 1)) - np.log(k) + _xlog(2 * k, lq) + _xlog(2 * n - 1 - 2 * k, lp),
            -np.inf,
        )
        second = _xlog(2 * k - 1, lq) + _xlog(2 * n - 2 * k, lp)
    return lc + np.logaddexp(first, second)


def _xlog(e, logv):
    """e * log v with the convention 0 * log 0 = 0."""
    e = np.asarray(e, dtype=float)
    if np.isneginf(logv):
        return np.where(e == 0, 0.0, -np.inf)
    return e * logv


def log_pdf_exact(spec: CorrelatedWalkSpec, m: int) -> float:
    n, p = spec.n, float(spec.p)
    _check_m(n, m)
    if m == n:
        if p == 0:
            return -math.inf if n > 0 else 0.0
        return math.log(0.5) + (2 * n - 1) * math.log(p)
    return float(logsumexp(_log_pdf_terms(n, m, p)))


def pdf_exact(spec: CorrelatedWalkSpec, m: int):
    """P(S_2n = 2m) from the closed-form sum over the number of turns.

    Exact rationals when p is a Fraction, otherwise evaluated in log space.
    """
    n = spec.n
    _check_m(n, m)
    if n == 0:
        return 1
    if spec.exact:
        p = Fraction(spec.p)
        if m == n:
            return Fraction(1, 2) * p ** (2 * n - 1)
        q = 1 - p
        total = Fraction(0)
        for k in range(1, n - m + 1):
            c = math.comb(n + m - 1, k - 1) * math.comb(n - m - 1, k - 1)
            # n(1-p) + k(2p-1) over k, with p^(2n-1-2k) kept nonnegative by the same split
            part = Fraction(n - k, k) * q ** (2 * k) * (p ** (2 * n - 1 - 2 * k) if k < n else 0)
            part += q ** (2 * k - 1) * p ** (2 * n - 2 * k)
            total += c * part
        return total
    return math.exp(log_pdf_exact(spec, m))


def _check_m(n, m):
    if m < 0 or m > n:
        raise ValueError(f"m must satisfy 0 <= m <= n, got m={m}, n={n}")


def pdf_oracle(spec: CorrelatedWalkSpec) -> dict:
    """Distribution of S_2n by dynamic programming over (position, last step).

    Returns {position: probability} over even positions -2n..2n.
    """
    n = spec.n
    if n > 10**4 and not spec.exact:
        raise ValueError("oracle limited to n <= 10^4")
    if spec.exact:
        return _pdf_oracle_exact(spec)
    p = float(spec.p)
    L = 2 * n
    size = 2 * L + 1
    up = np.zeros(size)    # last step +1
    down = np.zeros(size)  # last step -1
    if L == 0:
        return {0: 1.0}
    up[L + 1] = 0.5
    down[L - 1] = 0.5
    for _ in range(L - 1):
        nu = np.zeros(size)
        nd = np.zeros(size)
        nu[1:] = p * up[:-1] + (1 - p) * down[:-1]
        nd[:-1] = p * down[1:] + (1 - p) * up[1:]
        up, down = nu, nd
    tot = up + down
    return {x - L: float(tot[x]) for x in range(0, size, 2)}


def _pdf_oracle_exact(spec):
    n = spec.n
    p = Fraction(spec.p)
    if n == 0:
        return {0: Fraction(1)}
    state = {(1, 1): Fraction(1, 2), (-1, -1): Fraction(1, 2)}
    for _ in range(2 * n - 1):
        new = {}
        for (x, d), pr in state.items():
            for nd, w in ((d, p), (-d, 1 - p)):
                if w:
                    key = (x + nd, nd)
                    new[key] = new.get(key, 0) + pr * w
        state = new
    out = {x: Fraction(0) for x in range(-2 * n, 2 * n + 1, 2)}
    for (x, _), pr in state.items():
        out[x] += pr
    return out


def log_pdf_oracle(spec: CorrelatedWalkSpec) -> np.ndarray:
    """[log P(S_2n = 2m) for m = 0..n] by the same dynamic program run in log space.

    The float oracle underflows into subnormals far in the tail, where
    rounding can leave 5e-324 in place of a far smaller probability; this
    version keeps full relative accuracy there.
    """
    n = spec.n
    if n == 0:
        return np.zeros(1)
    p = float(spec.p)
    with np.errstate(divide="ignore"):
        lp, lq = math.log(p) if p > 0 else -math.inf, math.log1p(-p) if p < 1 else -math.inf
    L = 2 * n
    size = 2 * L + 1
    up = np.full(size, -math.inf)
    down = np.full(size, -math.inf)
    up[L + 1] = down[L - 1] = math.log(0.5)
    for _ in range(L - 1):
        nu = np.full(size, -math.inf)
        nd = np.full(size, -math.inf)
        nu[1:] = np.logaddexp(lp + up[:-1], lq + down[:-1])
        nd[:-1] = np.logaddexp(lp + down[1:], lq + up[1:])
        up, down = nu, nd
    return np.logaddexp(up, down)[L::2]


def pdf_table(spec: CorrelatedWalkSpec) -> np.ndarray:
    """[P(S_2n = 2m) for m = 0..n] from the closed form."""
    return np.array([pdf_exact(spec, m) for m in range(spec.n + 1)], dtype=float)


# ----------------------------------------------------------------------
# simulation
# ----------------------------------------------------------------------
def simulate(spec: CorrelatedWalkSpec, seed) -> np.ndarray:
    """Positions S_0..S_2n of one walk."""
    rng = np.random.default_rng(seed)
    return simulate_many(spec, 1, rng)[0]


def simulate_many(spec: CorrelatedWalkSpec, samples: int, rng) -> np.ndarray:
    L = 2 * spec.n
    out = np.zeros((samples, L + 1), dtype=np.int64)
    if L == 0:
        return out
    step = np.where(rng.random(samples) < 0.5, 1, -1)
    out[:, 1] = step
    p = float(spec.p)
    for t in range(2, L + 1):
        flip = rng.random(samples) >= p
        step = np.where(flip, -step, step)
        out[:, t] = out[:, t - 1] + step
    return out


def empirical_distribution(spec: CorrelatedWalkSpec, samples: int, seed, chunk: int = 200_000) -> dict:
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    L = 2 * spec.n
    counts = np.zeros(2 * L + 1, dtype=np.int64)
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        end = simulate_many(spec, k, rng)[:, -1]
        counts += np.bincount(end + L, minlength=2 * L + 1)
        done += k
    return {x - L: counts[x] / samples for x in range(0, 2 * L + 1, 2)}


# ----------------------------------------------------------------------
# shape of the distribution
# ----------------------------------------------------------------------
@dataclass
class UnimodalReport:
    unimodal: bool
    first_violation: Optional[int]
    threshold_n: float
    tail_pair_ok: bool


def unimodality_threshold(p: float) -> float:
    """n above which P(S=2(n-1)) >= P(S=2n) is guaranteed by the last-pair comparison."""
    return (1 / (1 - p)) * (p * p / (2 * (1 - p)) + 1 - 2 * p)


def is_unimodal(spec: CorrelatedWalkSpec) -> UnimodalReport:
    """Checks P(S=2m) >= P(S=2m+2) for every m in 0..n-1 and reports the first failure."""
    p = float(spec.p)
    if not 0 < p < 1:
        raise ValueError("unimodality is checked for p in (0, 1)")
    logs = np.array([log_pdf_exact(spec, m) for m in range(spec.n + 1)])
    # relative slack for rounding in log space
    bad = np.flatnonzero(logs[:-1] < logs[1:] - 1e-12)
    first = int(bad[0]) if bad.size else None
    tail_ok = spec.n < 1 or logs[-2] >= logs[-1] - 1e-12
    return UnimodalReport(first is None, first, unimodality_threshold(p), bool(tail_ok))


def return_probability_ratio(spec: CorrelatedWalkSpec) -> float:
    """P(S_2n = 0) * sqrt(mu pi n); tends to 1."""
    mu = float(spec.mu)
    return math.exp(log_pdf_exact(spec, 0) + 0.5 * math.log(mu * math.pi * spec.n))


# ----------------------------------------------------------------------
# smooth bound on the marginals
# ----------------------------------------------------------------------
def _xlogx(x: float) -> float:
    return 0.0 if x == 0 else x * math.log(x)


def log_marginal_bound_f(x: float, n: int, m: int, mu: float) -> float:
    """log f(x), the Stirling-type envelope of the k-th PDF term (without the (mu/(1+mu))^2n factor).

    At the two endpoints the value is fixed by definition: 0 at x = 0 and
    -2(n-m) log mu at x = n - m.
    """
    if not 0 <= x <= n - m:
        raise ValueError(f"x must lie in [0, n - m] = [0, {n - m}]")
    if x == 0:
        return 0.0
    if x == n - m:
        return -2 * (n - m) * math.log(mu)
    a, b = n + m, n - m
    return (
        _xlogx(a) - _xlogx(x) - _xlogx(a - x)
        + _xlogx(b) - _xlogx(x) - _xlogx(b - x)
        - 2 * x * math.log(mu)
    )


def marginal_bound_f(x: float, n: int, m: int, mu: float) -> float:
    return math.exp(log_marginal_bound_f(x, n, m, mu))


def g_log(x: float, n: int, m: int, mu: float) -> float:
    """g(x) = -(2x log(mu x) + (n+m-x) log(n+m-x) + (n-m-x) log(n-m-x)), concave on (0, n-m)."""
    return -(2 * x * math.log(mu * x) + _xlogx(n + m - x) + _xlogx(n - m - x))


def g_prime(x: float, n: int, m: int, mu: float) -> float:
    return math.log(((n - x) ** 2 - m * m) / (mu * x) ** 2)


def g_second(x: float, n: int, m: int) -> float:
    return -2 / x - 1 / (n + m - x) - 1 / (n - m - x)


def critical_point(n: int, m: int, mu: float) -> float:
    """Maximizer of f on (0, n - m).

    For mu != 1 this is n/(1-mu^2) (1 - sqrt(mu^2 + (1-mu^2) m^2/n^2)); it is
    evaluated in the algebraically equal form n (1 - r^2) / (1 + sqrt(mu^2 + (1-mu^2) r^2)),
    r = m/n, which has no cancellation near mu = 1.
    """
    if m >= n or m < 0:
        raise ValueError("critical point needs 0 <= m < n")
    if mu <= 0:
        raise ValueError("mu must be positive")
    if mu == 1:
        return (n * n - m * m) / (2 * n)
    r2 = (m / n) ** 2
    return n * (1 - r2) / (1 + math.sqrt(mu * mu + (1 - mu * mu) * r2))


def critical_point_direct(n: int, m: int, mu: float) -> float:
    """The mu != 1 branch written as n/(1-mu^2) (1 - sqrt(...)), for cross-checking."""
    return n / (1 - mu * mu) * (1 - math.sqrt(mu * mu + (1 - mu * mu) * (m / n) ** 2))


def max_log_marginal(n: int, m: int, mu: float) -> float:
    """h(n) = -log[(mu/(1+mu))^(2n) f(x*)]."""
    xs = critical_point(n, m, mu)
    return -(2 * n * math.log(mu / (1 + mu)) + log_marginal_bound_f(xs, n, m, mu))


def max_log_marginal_symmetric(n: int, m: int, mu: float) -> float:
    """h(n) = (n+m) log[(1+mu)/mu (1 - x*/(n+m))] + (n-m) log[(1+mu)/mu (1 - x*/(n-m))]."""
    xs = critical_point(n, m, mu)
    c = math.log1p(mu) - math.log(mu)
    return (n + m) * (c + math.log1p(-xs / (n + m))) + (n - m) * (c + math.log1p(-xs / (n - m)))


def tail_bound(n: int, m: int, mu: float, eps: float) -> float:
    """exp(-(1 - eps) m^2 / (mu n))."""
    return math.exp(-(1 - eps) * m * m / (mu * n))


@dataclass
class TailCheck:
    n: int
    mu: float
    eps: float
    violations: list
    max_ratio: float

    @property
    def holds(self) -> bool:
        return not self.violations


def verify_tail(spec: CorrelatedWalkSpec, eps: float, ms=None, source: str = "closed") -> TailCheck:
    """Compare P(S_2n = 2m) with the tail bound over m (default: every m <= n^0.9).

    ``source`` is "closed" (closed form in log space) or "oracle" (log-space
    dynamic program, O(n^2)).
    """
    n, mu = spec.n, float(spec.mu)
    if ms is None:
        ms = range(0, int(n ** 0.9) + 1)
    if source == "oracle":
        table = log_pdf_oracle(spec)
        logp = lambda m: float(table[m])
    elif source == "closed":
        logp = lambda m: log_pdf_exact(spec, m)
    else:
        raise ValueError(f"unknown source {source!r}")
    bad, worst = [], 0.0
    for m in ms:
        lp = logp(m)
        lb = -(1 - eps) * m * m / (mu * n)
        worst = max(worst, lp - lb)
        if lp > lb:
            bad.append(m)
    return TailCheck(n, mu, eps, bad, math.exp(worst))


def smallest_n_with_tail(mu: float, eps: float, m_of_n, ns) -> Optional[int]:
    """Smallest tested n from which the bound holds for all larger tested n."""
    ok = [verify_tail(CorrelatedWalkSpec.from_mu(n, mu), eps, [m_of_n(n)]).holds for n in ns]
    first = None
    for n, good in zip(ns, ok):
        if good and first is None:
            first = n
        elif not good:
            first = None
    return first


# ----------------------------------------------------------------------
# tethered paths
# ----------------------------------------------------------------------
def path_deviation_steps(steps: str) -> int:
    """max_i ||(x_i, y_i) - (i/2, i/2)||_1 = max_i |x_i - y_i| for an E/N step string."""
    x = y = 0
    best = 0
    for ch in steps:
        if ch == "E":
            x += 1
        elif ch == "N":
            y += 1
        else:
            raise ValueError(f"not a north-east step: {ch!r}")
        best = max(best, abs(x - y))
    return best


def straights(steps: str) -> int:
    return sum(1 for a, b in zip(steps, steps[1:]) if a == b)


def tethered_log_partition(n: int, mu: float, band: Optional[int] = None, endpoint_straights: bool = False) -> float:
    """log of the mu^(#straights) weight of (0,0)->(n,n) paths, optionally restricted to |x - y| < band."""
    if n == 0:
        return 0.0
    lm = math.log(mu)
    NEG = -np.inf
    xs = np.arange(n + 1)

    def allowed(i):
        ok = (xs <= i) & (i - xs <= n)
        if band is not None:
            ok &= np.abs(2 * xs - i) < band
        return ok

    # E[x], N[x]: log weight of paths at level i = x + y ending at (x, i - x) with last step E / N
    E = np.full(n + 1, NEG)
    N = np.full(n + 1, NEG)
    E[1] = lm if endpoint_straights else 0.0
    N[0] = 0.0
    ok = allowed(1)
    E[~ok] = NEG
    N[~ok] = NEG
    for i in range(2, 2 * n + 1):
        nE = np.full(n + 1, NEG)
        nN = np.full(n + 1, NEG)
        nE[1:] = np.logaddexp(E[:-1] + lm, N[:-1])
        nN[:] = np.logaddexp(N + lm, E)
        ok = allowed(i)
        nE[~ok] = NEG
        nN[~ok] = NEG
        E, N = nE, nN
    last = lm if endpoint_straights else 0.0
    return float(np.logaddexp(E[n] + last, N[n]))


def tethered_deviation_tail(n: int, mu, m: int, endpoint_straights: bool = False):
    """P(deviation >= 2m) under Gamma(mu, n), from weighted path counts on the grid.

    Exact when mu is an int or Fraction.
    """
    if isinstance(mu, (int, Fraction)):
        tot = _grid_weight_exact(n, Fraction(mu), None, endpoint_straights)
        inside = _grid_weight_exact(n, Fraction(mu), 2 * m, endpoint_straights)
        return 1 - Fraction(inside) / tot
    lz = tethered_log_partition(n, mu, None, endpoint_straights)
    lin = tethered_log_partition(n, mu, 2 * m, endpoint_straights)
    return float(-np.expm1(lin - lz))


def _grid_weight_exact(n: int, mu: Fraction, band, endpoint_straights: bool):
    """Sum of mu^(#straights) over grid paths staying in |x - y| < band."""
    inside = lambda x, y: band is None or abs(x - y) < band
    # W[(x, y, d)]: weight of paths from (0, 0) to (x, y) whose last step is d
    W = {}
    if n == 0:
        return Fraction(1)
    if inside(1, 0):
        W[(1, 0, "E")] = mu if endpoint_straights else Fraction(1)
    if inside(0, 1):
        W[(0, 1, "N")] = Fraction(1)
    for s in range(2, 2 * n + 1):
        new = {}
        for x in range(max(0, s - n), min(n, s) + 1):
            y = s - x
            if not inside(x, y):
                continue
            for d, (px, py) in (("E", (x - 1, y)), ("N", (x, y - 1))):
                tot = Fraction(0)
                for pd in ("E", "N"):
                    w = W.get((px, py, pd))
                    if w:
                        tot += w * (mu if pd == d else 1)
                if tot:
                    new[(x, y, d)] = tot
        W = new
    out = W.get((n, n, "N"), 0) + W.get((n, n, "E"), 0) * (mu if endpoint_straights else 1)
    return Fraction(out)


def conditioned_walk_tail(n: int, mu, m: int):
    """P(max_i |S_i| >= 2m | S_2n = 0) for the correlated walk with p = mu/(1+mu).

    Walk-side dynamic program over (time, position, last step, hit flag),
    independent of the grid computation in :func:`tethered_deviation_tail`.
    """
    exact = isinstance(mu, (int, Fraction))
    p = Fraction(mu) / (1 + Fraction(mu)) if exact else mu / (1 + mu)
    L = 2 * n
    if L == 0:
        return Fraction(0) if exact else 0.0
    thr = 2 * m
    if exact:
        st = {}
        for d in (1, -1):
            st[(d, d, abs(d) >= thr)] = Fraction(1, 2)
        for _ in range(L - 1):
            new = {}
            for (x, d, hit), pr in st.items():
                for nd, w in ((d, p), (-d, 1 - p)):
                    nx = x + nd
                    key = (nx, nd, hit or abs(nx) >= thr)
                    new[key] = new.get(key, 0) + pr * w
            st = new
        ret = sum(pr for (x, _, _), pr in st.items() if x == 0)
        hit = sum(pr for (x, _, h), pr in st.items() if x == 0 and h)
        return Fraction(hit) / ret
    size = 2 * L + 1
    # arrays indexed [hit][last step][position]
    A = np.zeros((2, 2, size))
    for d, di in ((1, 0), (-1, 1)):
        A[int(abs(d) >= thr), di, L + d] = 0.5
    pos = np.arange(size) - L
    far = np.abs(pos) >= thr
    for _ in range(L - 1):
        B = np.zeros_like(A)
        for h in range(2):
            # next step +1 lands at index+1, -1 at index-1
            up = p * A[h, 0] + (1 - p) * A[h, 1]
            dn = p * A[h, 1] + (1 - p) * A[h, 0]
            B[h, 0, 1:] += up[:-1]
            B[h, 1, :-1] += dn[1:]
        moved = B[0][:, far].copy()
        B[0][:, far] = 0.0
        B[1][:, far] += moved
        s = B.sum()
        A = B / s
    ret = A[:, :, L].sum()
    return float(A[1, :, L].sum() / ret)


def tethered_sample(n: int, mu: float, seed, endpoint_straights: bool = False) -> str:
    """Exact sample from Gamma(mu, n) as an E/N string: backward DP then forward rolling."""
    if n > 2000:
        raise ValueError("exact sampling limited to n <= 2000")
    rng = np.random.default_rng(seed)
    lm = math.log(mu)
    # B[d][x]: log weight of completions from (x, i - x) given last step d (0 = E, 1 = N), per level i
    tables = []
    end = lm if endpoint_straights else 0.0
    BE = np.full(n + 1, -np.inf)
    BN = np.full(n + 1, -np.inf)
    BE[n] = end
    BN[n] = 0.0
    tables.append((BE, BN))
    for i in range(2 * n - 1, 0, -1):
        nE = np.full(n + 1, -np.inf)
        nN = np.full(n + 1, -np.inf)
        x = np.arange(n + 1)
        valid = (x <= i) & (i - x <= n)
        # from (x, y) step E to x+1, or N to y+1 (same x)
        stepE = np.full(n + 1, -np.inf)
        stepE[:-1] = BE[1:]
        nE = np.logaddexp(stepE + lm, BN)
        nN = np.logaddexp(stepE, BN + lm)
        nE[~valid] = -np.inf
        nN[~valid] = -np.inf
        BE, BN = nE, nN
        tables.append((BE, BN))
    tables = tables[::-1]  # tables[i - 1] is level i
    steps = []
    x, last = 0, None
    for i in range(0, 2 * n):
        cand = []
        for d in ("E", "N"):
            nx = x + (d == "E")
            ny = i + 1 - nx
            if nx > n or ny > n:
                cand.append(-np.inf)
                continue
            bE, bN = tables[i]
            rest = bE[nx] if d == "E" else bN[nx]
            if last is None:
                w = lm if (endpoint_straights and d == "E") else 0.0
            else:
                w = lm if d == last else 0.0
            cand.append(w + rest)
        c = np.array(cand)
        pr = np.exp(c - np.max(c))
        pr /= pr.sum()
        d = "E" if rng.random() < pr[0] else "N"
        steps.append(d)
        x += d == "E"
        last = d
    return "".join(steps)


def tethered_distribution(n: int, mu, endpoint_straights: bool = False) -> dict[str, float]:
    """Every tethered path with its Gamma(mu, n) probability (small n only)."""
    if n > 10:
        raise ValueError("explicit distribution limited to n <= 10")
    from itertools import combinations

    out = {}
    for pos in combinations(range(2 * n), n):
        s = ["N"] * (2 * n)
        for k in pos:
            s[k] = "E"
        s = "".join(s)
        k = straights(s) + (endpoint_straights and (s[0] == "E") + (s[-1] == "E"))
        out[s] = float(mu) ** k
    z = math.fsum(out.values())
    return {k: v / z for k, v in out.items()}


def lattice_path_deviation(path: LatticePath) -> int:
    return path_deviation_steps(path.steps())
