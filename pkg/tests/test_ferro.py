import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sixvertex import ferro
from sixvertex.crw import conditioned_walk_tail, tethered_deviation_tail, tethered_distribution, tail_bound
from sixvertex.exact import boltzmann, enumerate_states, partition_function
from sixvertex.glauber import ChainState, advance, state_histogram
from sixvertex.lattice import Weights, to_paths

SMALL = ferro.IndependentPathsSpec(4, 1, 2)


def test_defaults_and_overrides_recorded():
    assert ferro.default_ell(3**8) == 3 and ferro.default_d(16) == 256
    # the default separation only fits once n > 32^8, so small instances must override it
    with pytest.raises(ValueError):
        ferro.IndependentPathsSpec(10**6)
    t = ferro.IndependentPathsSpec(16, 1, 4)
    assert t.overridden == ("ell", "d") and t.to_dict()["overridden"] == ["ell", "d"]


def test_paths_must_fit():
    with pytest.raises(ValueError):
        ferro.IndependentPathsSpec(8, 2, 4)


def test_terminals_example():
    ts = ferro.terminals(ferro.IndependentPathsSpec(16, 1, 4))
    assert [(t.start, t.end) for t in ts] == [((0, 0), (16, 16)), ((4, 0), (16, 12)), ((0, 4), (12, 16))]
    assert [t.entry[0] for t in ts] == ["left", "bottom", "left"]
    assert [t.exit[0] for t in ts] == ["right", "right", "top"]


def test_single_path_boundary():
    b = ferro.build_boundary(ferro.IndependentPathsSpec(5, 0))
    assert sum(map(sum, b.stubs.values())) == 2
    assert b.stubs["left"][0] == 1 and b.stubs["right"][5] == 1


def test_witness_state_exists_and_is_in_S():
    for spec in (SMALL, ferro.IndependentPathsSpec(16, 1, 4), ferro.IndependentPathsSpec(40, 3, 10)):
        w = ferro.staircase_state(spec)
        w.validate()
        assert ferro.in_cut_S(w, 2)
        assert ferro.shared_vertices(w) == []


def test_deviation_examples():
    stair = [(0, 0)]
    for k in range(8):
        x, y = stair[-1]
        stair.append((x, y + 1) if k % 2 == 0 else (x + 1, y))
    assert ferro.path_deviation(stair) == 1
    corner = [(0, y) for y in range(6)] + [(x, 5) for x in range(1, 6)]
    assert ferro.path_deviation(corner) == 5
    with pytest.raises(ValueError):
        ferro.path_deviation([(0, 0), (1, 1)])


def test_deviation_table_matches_paths():
    sp = ferro.exact_space(SMALL)
    tab = ferro.deviation_table(sp.bits, SMALL)
    for k in range(0, sp.size, 37):
        d = ferro.deviations(sp[k], SMALL)
        assert [d[t.label] for t in ferro.terminals(SMALL)] == list(tab[k])


def test_ground_state_accounting_examples():
    acc = ferro.ground_state_accounting(ferro.IndependentPathsSpec(6, 0))
    assert acc.intersections == 0 and acc.straights == 1
    acc = ferro.ground_state_accounting(ferro.IndependentPathsSpec(64, 1, 8))
    assert acc.intersections >= 74 and acc.intersections_ok and acc.straights_ok


@pytest.mark.parametrize("n,ell,d", [(64, 2, 8), (128, 3, 12), (200, 4, 20)])
def test_ground_state_accounting_bounds(n, ell, d):
    acc = ferro.ground_state_accounting(ferro.IndependentPathsSpec(n, ell, d))
    assert acc.intersections_ok and acc.straights_ok


def test_ground_state_outside_small_S():
    spec = ferro.IndependentPathsSpec(40, 2, 10)
    g = ferro.ground_state(spec)
    assert not ferro.in_cut_S(g, 4)
    assert ferro.in_cut_S(ferro.staircase_state(spec), 4)


@pytest.mark.parametrize("lam,mu", [(3.0, 1.0), (2.0, 0.5), (1.5, 2.0)])
def test_partition_function_exceeds_ground_weight(lam, mu):
    sp = ferro.exact_space(SMALL)
    w = Weights.from_lambda_mu(lam, mu)
    g = ferro.ground_state(SMALL)
    counts = g.type_counts()
    # compare in the lambda^2 / 1 convention: divide out the constant lambda^(n1 - n2)
    lz = math.log(partition_function(sp, w))
    lg = counts[0] * 2 * math.log(lam) + (counts[2] + counts[3]) * math.log(mu) + (counts[1] - counts[0]) * math.log(lam)
    assert lz >= lg - 1e-12


@pytest.mark.parametrize("n", [3, 4, 6])
@pytest.mark.parametrize("mu", [1.0, 2.0, 0.5])
def test_single_path_law_is_gamma(n, mu):
    spec = ferro.IndependentPathsSpec(n, 0)
    law = ferro.single_path_law(spec, 3.0, mu)
    # the six-vertex weight also counts the straight made with the entry and exit stubs
    gamma = tethered_distribution(n, mu, endpoint_straights=True)
    assert set(law) == set(gamma)
    assert max(abs(law[k] - gamma[k]) for k in gamma) < 1e-12
    if mu == 1.0:
        plain = tethered_distribution(n, mu)
        assert max(abs(law[k] - plain[k]) for k in plain) < 1e-12


def test_single_path_glauber_batch_means():
    spec = ferro.IndependentPathsSpec(3, 0)
    sp = ferro.exact_space(spec)
    gamma = tethered_distribution(3, 1.0)
    target = np.array([gamma[to_paths(sp[k])[0].steps()] for k in range(sp.size)])
    st_ = ChainState.start(ferro.staircase_state(spec), Weights.from_lambda_mu(2.0, 1.0), 9)
    batches = []
    for _ in range(20):
        h, st_ = state_histogram(st_, 100_000, sp)
        batches.append(h / h.sum())
    B = np.array(batches)
    se = B.std(axis=0, ddof=1) / np.sqrt(len(B))
    z = np.abs(B.mean(axis=0) - target) / se
    assert z.max() < 4.5


def test_non_intersection_inside_S():
    spec = ferro.IndependentPathsSpec(40, 1, 16)
    theta = 4
    st_ = ChainState.start(ferro.staircase_state(spec), Weights.from_lambda_mu(1.0, 1.0), 4)
    seen = 0
    for _ in range(200):
        st_ = advance(st_, 500)
        if ferro.in_cut_S(st_.config, theta):
            seen += 1
            assert ferro.shared_vertices(st_.config) == []
    assert seen > 0


def test_exact_escape_decreases_with_lambda():
    sp = ferro.exact_space(SMALL)
    phis = [ferro.exact_cut(SMALL, lam, 1.0, theta=2, space=sp)[0].phi_S for lam in (1.5, 3.0, 6.0, 12.0)]
    assert all(a > b for a, b in zip(phis, phis[1:]))


def test_restricted_chain_estimates_conductance():
    res, *_ = ferro.exact_cut(SMALL, 3.0, 1.0, theta=2)
    est = ferro.escape_probability(SMALL, 3.0, 1.0, 400_000, seed=2, theta=2)
    assert abs(est.estimate - res.phi_S) < 5 * est.stderr_iid * 3  # generous: the binomial error ignores correlation


def test_escape_is_reproducible():
    a = ferro.escape_probability(SMALL, 3.0, 1.0, 20_000, seed=5, theta=2)
    b = ferro.escape_probability(SMALL, 3.0, 1.0, 20_000, seed=5, theta=2)
    assert a == b


def test_cut_mass_report_flags_critical_line():
    spec = ferro.IndependentPathsSpec(64, 1, 8)
    assert ferro.cut_mass_bound(spec, 2.0, 1.0).breakdown
    assert ferro.cut_mass_bound(spec, 2.0, 1.0).regime == "critical"
    assert ferro.cut_mass_bound(spec, 1.5, 1.0).regime == "outside"
    rep = ferro.cut_mass_bound(spec, 3.0, 1.0)
    assert not rep.breakdown and rep.base == pytest.approx(2 / 3)


def test_single_path_tail_against_walk_bound():
    n, mu = 100, 1.0
    m = math.ceil(2 * n**0.75)  # deviation >= 4 n^(3/4) = 2m
    p = tethered_deviation_tail(n, mu, m)
    assert p == pytest.approx(conditioned_walk_tail(n, mu, m), rel=1e-10)
    assert p <= tail_bound(n, m, mu, 0.5)


def test_mixing_certificate_logic():
    # two-state chain with known distance: from state 0, ||P^t(0,.) - pi|| = pi(1) |1-p-q|^t
    p, q = 0.02, 0.01
    P = np.array([[1 - p, p], [q, 1 - q]])
    pi = np.array([q, p]) / (p + q)
    c = ferro.mixing_lower_certificate(P, pi, np.array([1.0, 0.0]), 10)
    assert c.tv_at_T_minus_1 == pytest.approx(pi[1] * (1 - p - q) ** 9)
    assert c.certified
