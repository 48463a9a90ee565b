import numpy as np
import pytest
from hypothesis import given, strategies as st

from sixvertex.exact import boltzmann, enumerate_states, tv_distance
from sixvertex.glauber import (
    ChainState,
    advance,
    first_cross_time,
    path_view_flip,
    propose_and_step,
    run,
    state_histogram,
)
from sixvertex.lattice import BoundaryCondition, Weights, ground_state_green, ground_state_red, lattice

SPACE2 = enumerate_states(2)
SPACE3 = enumerate_states(3)


def test_reference_and_compiled_steps_agree():
    w = Weights(1.0, 2.0, 3.0)
    a = ChainState.start(ground_state_red(4), w, seed=11)
    b = ChainState.start(ground_state_red(4), w, seed=11)
    for _ in range(2000):
        a = propose_and_step(a)
    b = advance(b, 2000)
    assert a.config == b.config
    assert a.accepted == b.accepted


@given(st.integers(0, 2**32 - 1), st.integers(1, 3000))
def test_chain_stays_in_state_space(seed, steps):
    st_ = ChainState.start(ground_state_red(3), Weights(1.0, 1.0, 2.0), seed)
    st_ = advance(st_, steps)
    st_.config.validate()
    assert SPACE3.index(st_.config) >= 0


def test_same_seed_same_chain_and_streams_differ():
    w = Weights(1.0, 1.0, 1.0)
    runs = [advance(ChainState.start(ground_state_red(5), w, 7, stream=s), 5000).config for s in (0, 0, 1)]
    assert runs[0] == runs[1]
    assert runs[0] != runs[2]


def test_domain_wall_chain_keeps_boundary():
    cfg = enumerate_states(4, BoundaryCondition.domain_wall(4))[0]
    st_ = advance(ChainState.start(cfg, Weights(1.0, 1.0, 1.0), 3), 10000)
    st_.config.validate()
    lat = lattice(4)
    for side, e in lat.stub_edges.items():
        assert tuple(st_.config.bits[e]) == cfg.boundary.stubs[side]


@pytest.mark.parametrize("abc", [(1.0, 1.0, 1.0), (1.0, 1.0, 3.0), (2.5, 1.0, 1.0)])
def test_histogram_converges_to_boltzmann(abc):
    w = Weights(*abc)
    st_ = ChainState.start(ground_state_red(2), w, seed=5)
    hist, _ = state_histogram(st_, 400_000, SPACE2)
    emp = hist / hist.sum()
    assert tv_distance(emp, boltzmann(SPACE2, w)) < 0.03


def test_path_view_flip_matches_edge_flip():
    lat = lattice(3)
    faces = lat.flippable_faces(BoundaryCondition.free(3))
    for cfg in list(SPACE3)[::37]:
        for f in faces:
            e = list(f.edges)
            sub = cfg.bits[e]
            ccw = np.array(f.ccw, dtype=np.uint8)
            cyclic = np.array_equal(sub, ccw) or np.array_equal(sub, 1 - ccw)
            out = path_view_flip(cfg, lat.faces.index(f))
            if not cyclic:
                assert out is None
            else:
                bits = cfg.bits.copy()
                bits[e] ^= 1
                assert out is not None and np.array_equal(out.bits, bits)


def test_run_records_and_rejects_unknown_observable():
    st_ = ChainState.start(ground_state_red(4), Weights(1.0, 1.0, 1.0), 1)
    st_, traj = run(st_, 1000, ["vertex_counts", "in_CR", "red_fraction"], thinning=250)
    assert traj.steps() == [0, 250, 500, 750, 1000]
    assert traj.column("in_CR")[0] is True
    assert all(sum(c) == 16 for c in traj.column("vertex_counts"))
    with pytest.raises(ValueError):
        run(st_, 10, ["no_such_thing"])


def test_disordered_chain_reaches_green_cross():
    st_ = ChainState.start(ground_state_red(6), Weights(1.0, 1.0, 1.0), 2)
    t, _ = first_cross_time(st_, 10**6, "green")
    assert t is not None and t < 10**6


def test_start_in_green_has_green_cross():
    st_ = ChainState.start(ground_state_green(4), Weights(1.0, 1.0, 1.0), 2)
    t, _ = first_cross_time(st_, 1000, "green")
    assert t == 0
