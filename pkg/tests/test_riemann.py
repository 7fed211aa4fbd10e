import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import barrierflow.riemann as R
from barrierflow.core import GRAVITY, physical_flux_x


def _flux(q, g=GRAVITY):
    return physical_flux_x(np.asarray(q, dtype=float), g=g)


def test_special_average_identity():
    h, u, v = R.special_average([1.0, 3.0, 0.0], [1.0, 3.0, 0.0])
    assert (h, u, v) == (1.0, 3.0, 0.0)


def test_special_average_depth_mean():
    h, u, v = R.special_average([4.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    assert h == 2.5 and u == 0.0


def test_special_average_roe_velocity():
    h, u, v = R.special_average([1.0, 1.0, 0.0], [4.0, -4.0, 0.0])
    assert abs(u - (1.0 * 1.0 + 2.0 * (-1.0)) / 3.0) < 1e-15


def test_special_average_dry_raises():
    with pytest.raises(R.DryInput):
        R.special_average([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])


def test_eigen_basis_symmetric():
    b = R.eigen_basis([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], g=1.0)
    assert np.allclose(b.speeds, [-1.0, 0.0, 1.0])


def test_eigen_basis_y_direction():
    b = R.eigen_basis([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], direction="y", g=1.0)
    assert np.allclose(b.speeds, [-1.0, 0.0, 1.0])
    # y-eigenvectors carry the speed in the third component
    assert np.allclose(b.vectors[:, 0], [1.0, 0.0, -1.0])


def test_eigen_basis_supercritical():
    b = R.eigen_basis([1.0, 2.0, 0.0], [1.0, 2.0, 0.0], g=1.0)
    assert np.allclose(b.speeds, [1.0, 2.0, 3.0])


def test_fwave_zero_jump():
    ql = np.array([1.3, 0.4, -0.2])
    basis = R.eigen_basis(ql, ql)
    waves, speeds, am, ap = R.fwave_decompose(ql, ql, 0.0, 0.0, basis)
    assert np.allclose(waves, 0.0) and np.allclose(am, 0.0) and np.allclose(ap, 0.0)


def test_fwave_lake_at_rest():
    ql = np.array([2.0, 0.0, 0.0])
    qr = np.array([1.7, 0.0, 0.0])
    basis = R.eigen_basis(ql, qr)
    waves, speeds, am, ap = R.fwave_decompose(ql, qr, 0.0, 0.3, basis)
    assert np.max(np.abs(am)) < 1e-13 and np.max(np.abs(ap)) < 1e-13


def test_fwave_identity_dam_break():
    ql = np.array([2.0, 0.0, 0.0])
    qr = np.array([1.0, 0.0, 0.0])
    basis = R.eigen_basis(ql, qr)
    waves, speeds, am, ap = R.fwave_decompose(ql, qr, 0.0, 0.0, basis)
    assert np.allclose(am + ap, _flux(qr) - _flux(ql), atol=1e-12)


@given(
    hl=st.floats(0.05, 5.0), hr=st.floats(0.05, 5.0),
    ul=st.floats(-3.0, 3.0), ur=st.floats(-3.0, 3.0),
    vl=st.floats(-2.0, 2.0), vr=st.floats(-2.0, 2.0),
    db=st.floats(-0.5, 0.5),
)
@settings(max_examples=300, deadline=None)
def test_fwave_identity_property(hl, hr, ul, ur, vl, vr, db):
    ql = np.array([hl, hl * ul, hl * vl])
    qr = np.array([hr, hr * ur, hr * vr])
    basis = R.eigen_basis(ql, qr)
    waves, speeds, am, ap = R.fwave_decompose(ql, qr, 0.0, db, basis)
    psi = np.array([0.0, GRAVITY * 0.5 * (hl + hr) * db, 0.0])
    rhs = _flux(qr) - _flux(ql) + psi
    scale = 1.0 + np.abs(rhs).max()
    assert np.max(np.abs((am + ap) - rhs)) < 1e-10 * scale


def test_minmod_examples():
    assert R.minmod(np.array(1.0)) == 1.0
    assert R.minmod(np.array(-0.5)) == 0.0
    assert R.minmod(np.array(0.5)) == 0.5
    assert R.minmod(np.array(2.0)) == 1.0


@given(theta=st.floats(1e-8, 1e8))
@settings(max_examples=500, deadline=None)
def test_minmod_symmetry(theta):
    # phi(1/theta) == phi(theta) / theta for positive ratios
    lhs = R.minmod(np.array(1.0 / theta))
    rhs = R.minmod(np.array(theta)) / theta
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_limit_waves_examples():
    w = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0], [1.0, -1.0, 0.0]])
    assert np.allclose(R.limit_waves(w, w), 1.0)
    assert np.allclose(R.limit_waves(w, -w), 0.0)
    assert np.allclose(R.limit_waves(w, 0.5 * w), 0.5)


def test_second_order_correction_zero_waves():
    c = R.second_order_correction(np.array([-1.0, 0.0, 1.0]), np.zeros((3, 3)),
                                  0.1, 1.0)
    assert np.allclose(c, 0.0)


def test_second_order_correction_unit_cfl():
    speeds = np.array([1.0, 1.0, 1.0])
    waves = np.ones((3, 3))
    c = R.second_order_correction(speeds, waves, 1.0, 1.0)
    assert np.allclose(c, 0.0)


def test_second_order_correction_single_wave():
    speeds = np.array([1.0, 0.0, 0.0])
    waves = np.zeros((3, 3))
    waves[0] = [1.0, 1.0, 0.0]
    c = R.second_order_correction(speeds, waves, 0.5, 1.0)
    assert np.allclose(c, [0.25, 0.25, 0.0])


def test_second_order_correction_cfl_violation():
    with pytest.raises(R.CflViolation):
        R.second_order_correction(np.array([3.0, 0.0, 0.0]), np.zeros((3, 3)),
                                  1.0, 1.0)


def test_fwave_edges_wall_against_high_dry_bed():
    ql = np.array([[1.0], [0.5], [0.0]])
    qr = np.array([[0.0], [0.0], [0.0]])
    waves, speeds, am, ap = R.fwave_edges(ql, qr, np.array([0.0]),
                                          np.array([2.0]))
    # the dry right side acts as a wall: nothing transmitted
    assert np.allclose(ap[:, 0], 0.0)
    assert am[0, 0] < 0.0  # reflection piles mass on the wet side


def test_fwave_edges_inundation():
    ql = np.array([[1.0], [0.0], [0.0]])
    qr = np.array([[0.0], [0.0], [0.0]])
    waves, speeds, am, ap = R.fwave_edges(ql, qr, np.array([0.0]),
                                          np.array([0.2]))
    assert ap[0, 0] < 0.0  # water floods the low dry side


def test_fwave_edges_einfeldt_widens_speeds():
    rngl = np.random.default_rng(5)
    ql = np.stack([rngl.uniform(0.1, 3, 50), rngl.uniform(-2, 2, 50),
                   rngl.uniform(-1, 1, 50)])
    qr = np.stack([rngl.uniform(0.1, 3, 50), rngl.uniform(-2, 2, 50),
                   rngl.uniform(-1, 1, 50)])
    b = np.zeros(50)
    _, sp_roe, _, _ = R.fwave_edges(ql, qr, b, b, average="roe")
    _, sp_ein, _, _ = R.fwave_edges(ql, qr, b, b, average="einfeldt")
    assert np.all(sp_ein[0] <= sp_roe[0] + 1e-14)
    assert np.all(sp_ein[2] >= sp_roe[2] - 1e-14)


def test_fast_path_matches_general_path():
    rngl = np.random.default_rng(11)
    sh = (40, 60)
    ql = np.stack([rngl.uniform(0.05, 3, sh), rngl.uniform(-2, 2, sh),
                   rngl.uniform(-1, 1, sh)])
    qr = np.stack([rngl.uniform(0.05, 3, sh), rngl.uniform(-2, 2, sh),
                   rngl.uniform(-1, 1, sh)])
    bl = rngl.uniform(-0.2, 0.2, sh)
    br = rngl.uniform(-0.2, 0.2, sh)
    # appending one dry edge forces the general path; the wet block must
    # agree bitwise with the all-wet fast path
    qld = np.concatenate([ql, np.zeros((3, sh[0], 1))], axis=2)
    qrd = np.concatenate([qr, np.zeros((3, sh[0], 1))], axis=2)
    bld = np.concatenate([bl, np.zeros((sh[0], 1))], axis=1)
    brd = np.concatenate([br, np.zeros((sh[0], 1))], axis=1)
    for avg in ("roe", "einfeldt"):
        fast = R.fwave_edges(ql, qr, bl, br, average=avg)
        slow = R.fwave_edges(qld, qrd, bld, brd, average=avg)
        for a, b in zip(fast, slow):
            assert np.array_equal(a, b[..., : sh[1]])


def test_limited_corrections_numba_matches_numpy():
    rngl = np.random.default_rng(7)
    waves = rngl.normal(size=(3, 3, 30, 40))
    speeds = rngl.normal(size=(3, 30, 40))
    fast = R.limited_corrections(waves, speeds, 0.001, 0.01, axis=-1)
    saved = R._HAVE_NUMBA
    R._HAVE_NUMBA = False
    try:
        slow = R.limited_corrections(waves, speeds, 0.001, 0.01, axis=-1)
    finally:
        R._HAVE_NUMBA = saved
    assert np.array_equal(fast, slow)
