import numpy as np
import pytest

from barrierflow.core import (
    CellField,
    SolverParams,
    check_state,
    physical_flux_x,
    physical_flux_y,
    total_mass,
    velocity,
)


def test_flux_x_still_water():
    f = physical_flux_x(np.array([2.0, 0.0, 0.0]), g=9.81)
    assert np.allclose(f, [0.0, 19.62, 0.0], atol=1e-14)


def test_flux_x_zero_gravity():
    f = physical_flux_x(np.array([1.0, 0.0, 0.0]), g=0.0)
    assert np.allclose(f, [0.0, 0.0, 0.0])


def test_flux_x_moving():
    f = physical_flux_x(np.array([1.0, 1.0, 2.0]), g=9.81)
    assert np.allclose(f, [1.0, 5.905, 2.0], atol=1e-12)


def test_flux_y_still_water():
    f = physical_flux_y(np.array([2.0, 0.0, 0.0]), g=9.81)
    assert np.allclose(f, [0.0, 0.0, 19.62], atol=1e-14)


def test_flux_y_moving():
    f = physical_flux_y(np.array([1.0, 2.0, 1.0]), g=9.81)
    assert np.allclose(f, [1.0, 2.0, 5.905], atol=1e-12)


def test_flux_dry_cell():
    assert np.allclose(physical_flux_x(np.zeros(3)), 0.0)
    assert np.allclose(physical_flux_y(np.zeros(3)), 0.0)


def test_velocity_guards_dry():
    assert velocity(np.array(0.0), np.array(3.0)) == 0.0
    assert velocity(np.array(2.0), np.array(3.0)) == 1.5


def test_check_state_rejects_negative_depth():
    with pytest.raises(Exception):
        check_state(np.array([-1.0, 0.0, 0.0]))


def test_total_mass_uniform():
    fld = CellField(nx=8, ny=8)
    fld.interior(fld.q_lo)[0] = 1.0
    fld.interior(fld.q_up)[0] = 1.0
    assert abs(total_mass(fld) - 1.0) < 1e-14


def test_total_mass_half_domain():
    fld = CellField(nx=8, ny=8)
    h = fld.interior(fld.q_lo)[0]
    h[:4] = 2.0
    assert abs(total_mass(fld) - 1.0) < 1e-14


def test_total_mass_with_barrier_partition():
    from barrierflow.geometry import BarrierGeometry, intersect_barrier

    tab = intersect_barrier(
        BarrierGeometry(vertices=[(0.0, 0.3), (1.0, 0.653)], beta=1.5), 20, 20)
    fld = CellField(nx=20, ny=20)
    fld.interior(fld.q_lo)[0] = 1.0
    fld.interior(fld.q_up)[0] = 1.0
    assert abs(total_mass(fld, tab) - 1.0) < 1e-13


def test_solver_params_validation():
    with pytest.raises(ValueError):
        SolverParams(order=3)
    with pytest.raises(ValueError):
        SolverParams(average="roe2")
    with pytest.raises(ValueError):
        SolverParams(cfl=1.5)
