import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import barrierflow.barrier as bar
from barrierflow.core import GRAVITY


MIRROR = np.array([1.0, -1.0, 1.0])


def _flux(q, g=GRAVITY):
    h = max(q[0], 1e-300)
    return np.array([q[1], q[1] ** 2 / h + 0.5 * g * q[0] ** 2,
                     q[1] * q[2] / h])


def test_rotation_identity():
    q = np.array([1.0, 2.0, 3.0])
    out = bar.rotate(q, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert np.array_equal(out, q)


def test_rotation_quarter_turn():
    q = np.array([1.0, 2.0, 3.0])
    out = bar.rotate(q, np.array([0.0, 1.0]), np.array([-1.0, 0.0]))
    assert np.allclose(out, [1.0, 3.0, -2.0])


@given(
    hu=st.floats(-5, 5), hv=st.floats(-5, 5),
    ang=st.floats(0, 2 * np.pi),
)
@settings(max_examples=300, deadline=None)
def test_rotation_roundtrip(hu, hv, ang):
    n = np.array([np.cos(ang), np.sin(ang)])
    t = np.array([-np.sin(ang), np.cos(ang)])
    q = np.array([1.0, hu, hv])
    r = bar.rotate(q, n, t)
    back = bar.rotate_back(r, n, t)
    assert np.max(np.abs(back - q)) < 1e-13
    # momentum magnitude preserved
    assert abs((r[1] ** 2 + r[2] ** 2) - (hu ** 2 + hv ** 2)) < 1e-12


def test_ghost_state_blocking():
    q = bar.ghost_state(np.array([1.0, 0.2, 0.0]), np.array([0.8, 0.0, 0.0]),
                        1.5)
    assert np.array_equal(q, [0.0, 0.0, 0.0])


def test_ghost_state_overtopping():
    q = bar.ghost_state(np.array([2.0, 0.0, 0.0]), np.array([1.8, 0.0, 0.0]),
                        1.5)
    assert abs(q[0] - 0.3) < 1e-14


def test_ghost_state_boundary_case():
    q = bar.ghost_state(np.array([1.5, 0.0, 0.0]), np.array([1.5, 0.0, 0.0]),
                        1.5)
    assert q[0] == 0.0


def test_ghost_state_momentum_min_abs():
    q = bar.ghost_state(np.array([2.0, 1.0, -3.0]), np.array([1.9, -0.5, 2.0]),
                        1.5)
    assert q[1] == -0.5 and q[2] == 2.0


def test_blocking_zero_transmission():
    ql = np.array([1.0, 0.8, 0.1])
    qu = np.array([1.0, 0.0, 0.0])
    r = bar.redistribute(ql, qu, 0.0, 5.0)
    assert r.blocking
    # the upper side sees its own (trivial) wall problem only
    assert np.max(np.abs(r.plus)) < 1e-14


def test_blocking_symmetric_mirror():
    q = np.array([1.0, 0.0, 0.0])
    r = bar.redistribute(q, q, 0.0, 5.0)
    assert abs(r.minus[0] - r.plus[0]) < 1e-14
    assert abs(r.minus[2] - r.plus[2]) < 1e-14
    assert abs(r.minus[1] - r.plus[1]) < 1e-14


def test_wall_pileup_rest_is_depth():
    assert bar.wall_pileup(1.2, 0.0) == 1.2


def test_wall_pileup_approaching_state():
    # two-shock middle state of q vs its mirror: verify the jump relation
    # F(hm) = delu + 2 (hm - h) sqrt(g/2 (1/hm + 1/h)) = 0
    h, u = 1.2, 1.0
    hm = float(bar.wall_pileup(h, -2.0 * u))
    res = -2.0 * u + 2.0 * (hm - h) * np.sqrt(
        0.5 * GRAVITY * (1.0 / hm + 1.0 / h))
    assert hm > h
    assert abs(res) < 1e-12


def test_wall_pileup_receding_state():
    # receding flow cannot pile above its own depth
    assert bar.wall_pileup(1.2, 2.0) == 1.2


def test_ghost_state_one_side_overtopping():
    # lower surface above the crest, upper below: wet ghost from half the
    # pile-up excess, velocity from the combined momentum
    q = bar.ghost_state(np.array([2.0, 0.0, 0.0]), np.array([1.2, 0.0, 0.0]),
                        1.5)
    assert abs(q[0] - 0.25) < 1e-14
    assert q[1] == 0.0 and q[2] == 0.0


def test_one_side_overtopping_transmits():
    # an incident wave whose pile-up tops the crest sends mass to the
    # upper side even though the upper surface is below the crest
    ql = np.array([1.5, 1.0, 0.3])
    qu = np.array([1.2, -0.2, 0.0])
    r = bar.redistribute(ql, qu, 0.0, 1.3)
    assert not r.blocking
    assert -r.plus[0] > 0.0
    # mass identity still exact
    assert abs((r.plus[0] + r.minus[0]) - (qu[1] - ql[1])) < 1e-12


def test_pileup_below_crest_blocks():
    # surfaces and pile-ups below the crest: pure wall reflections
    ql = np.array([1.2, 0.1, 0.0])
    qu = np.array([1.2, 0.0, 0.0])
    assert float(bar.wall_pileup(1.2, -2.0 * 0.1 / 1.2)) < 1.5
    r = bar.redistribute(ql, qu, 0.0, 1.5)
    assert r.blocking
    assert np.max(np.abs(r.plus)) < 1e-14


def test_rest_above_crest_exact():
    q = np.array([2.0, 0.0, 0.0])
    r = bar.redistribute(q, q, 0.0, 1.3)
    assert np.max(np.abs(r.plus)) == 0.0
    assert np.max(np.abs(r.minus)) == 0.0


def test_no_barrier_limit_equal_states():
    q = np.array([1.0, 0.5, 0.2])
    r = bar.redistribute(q, q, 0.0, 1e-12)
    assert np.max(np.abs(r.plus)) < 1e-10
    assert np.max(np.abs(r.minus)) < 1e-10


@given(
    hl=st.floats(0.05, 3.0), hr=st.floats(0.05, 3.0),
    ul=st.floats(-2.0, 2.0), ur=st.floats(-2.0, 2.0),
    vl=st.floats(-1.0, 1.0), vr=st.floats(-1.0, 1.0),
    beta=st.floats(0.01, 2.0), b=st.floats(-0.5, 0.5),
)
@settings(max_examples=300, deadline=None)
def test_conservation_identity_property(hl, hr, ul, ur, vl, vr, beta, b):
    ql = np.array([hl, hl * ul, hl * vl])
    qu = np.array([hr, hr * ur, hr * vr])
    r = bar.redistribute(ql, qu, b, beta)
    if r.blocking:
        return
    # the mass component of plus+minus equals the mass flux difference
    lhs = (r.plus + r.minus)[0]
    rhs = qu[1] - ql[1]
    assert abs(lhs - rhs) < 1e-10 * (1.0 + abs(rhs))


def test_mirror_parity_fuzz():
    rng = np.random.default_rng(42)
    for _ in range(500):
        ql = np.array([rng.uniform(1e-3, 3), rng.uniform(-2, 2),
                       rng.uniform(-1, 1)])
        qu = np.array([rng.uniform(1e-3, 3), rng.uniform(-2, 2),
                       rng.uniform(-1, 1)])
        beta = rng.uniform(0, 2)
        b = rng.uniform(-0.5, 0.5)
        r = bar.redistribute(ql, qu, b, beta)
        rm = bar.redistribute(qu * MIRROR, ql * MIRROR, b, beta)
        assert np.array_equal(r.plus, rm.minus * MIRROR)
        assert np.array_equal(r.minus, rm.plus * MIRROR)


def test_redistribute_broadcasts():
    rng = np.random.default_rng(3)
    ql = np.stack([rng.uniform(0.1, 3, 20), rng.uniform(-2, 2, 20),
                   rng.uniform(-1, 1, 20)])
    qu = np.stack([rng.uniform(0.1, 3, 20), rng.uniform(-2, 2, 20),
                   rng.uniform(-1, 1, 20)])
    r = bar.redistribute(ql, qu, np.zeros(20), 1.0)
    batch_plus, batch_minus = r.plus, r.minus
    for k in range(20):
        rk = bar.redistribute(ql[:, k], qu[:, k], 0.0, 1.0)
        assert np.allclose(rk.plus, batch_plus[:, k], atol=1e-14)
        assert np.allclose(rk.minus, batch_minus[:, k], atol=1e-14)
