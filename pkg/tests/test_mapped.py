import numpy as np
import pytest
from dataclasses import replace

from barrierflow.core import SolverParams
from barrierflow.driver import CartesianSolver, ScenarioConfig
from barrierflow.geometry import BarrierGeometry
from barrierflow.mapped import (
    MappedError,
    MappedSolver,
    OddResolutionForChevron,
    build_mapped_grid,
)


LINEAR = BarrierGeometry(vertices=[(0.0, 0.3), (1.0, 0.653)], beta=1.5)
CHEVRON = BarrierGeometry(vertices=[(0.0, 0.72), (0.5, 0.412), (1.0, 0.72)],
                          beta=1.5)


def dam_cfg(**kw):
    base = dict(nx=20, ny=20, depth=1.2, dam_height=2.0, dam_side="below",
                dam_y=0.2, t_end=0.1)
    base.update(kw)
    return ScenarioConfig(**base)


def test_grid_kind_validation():
    with pytest.raises(MappedError):
        build_mapped_grid("spline", LINEAR, 10)
    with pytest.raises(MappedError):
        build_mapped_grid("chevron", LINEAR, 10)


def test_chevron_needs_even_resolution():
    with pytest.raises(OddResolutionForChevron):
        build_mapped_grid("chevron", CHEVRON, 25)


def test_mapping_hits_barrier_line():
    grid = build_mapped_grid("linear", LINEAR, 40)
    assert abs(grid.ystar - 0.4765) < 1e-13
    for x in (0.0, 0.25, 0.5, 1.0):
        px, py = grid.map_point(x, grid.ystar)
        assert abs(px - x) < 1e-14
        assert abs(py - LINEAR.y_at(x)) < 1e-12


def test_mapping_fixes_boundaries():
    grid = build_mapped_grid("linear", LINEAR, 40)
    for x in (0.0, 0.3, 1.0):
        assert grid.map_point(x, 0.0) == (x, 0.0)
        assert grid.map_point(x, 1.0)[1] == 1.0


def test_mu_lower_branch_halfway():
    grid = build_mapped_grid("linear", LINEAR, 40)
    x = 0.37
    L = LINEAR.y_at(x)
    assert abs(grid.mu(x, grid.ystar * 0.5) - L / 2.0) < 1e-13


def test_areas_positive_and_partition():
    for kind, barrier, n in (("linear", LINEAR, 30), ("chevron", CHEVRON, 30)):
        grid = build_mapped_grid(kind, barrier, n)
        g = 2
        interior = grid.area[g:-g, g:-g]
        assert np.all(interior > 0)
        assert abs(interior.sum() - 1.0) < 1e-12


def test_solver_rejects_bad_configs():
    with pytest.raises(MappedError):
        MappedSolver(dam_cfg(nx=20, ny=30), kind="linear")
    with pytest.raises(MappedError):
        MappedSolver(dam_cfg(bathymetry="island", island_peak=1.3),
                     kind="linear")


def test_identity_reduction_small():
    cfg = dam_cfg(nx=24, ny=24)
    sm = MappedSolver(cfg, kind="linear", use_barrier=False)
    sc = CartesianSolver(cfg)
    for _ in range(10):
        sm.step(sm.compute_dt())
        sc.step(sc.compute_dt())
    assert np.max(np.abs(sm.snapshot_h() - sc.snapshot_h())) < 1e-12


def test_chevron_lake_at_rest():
    cfg = dam_cfg(nx=24, ny=24, dam_side="none", dam_height=None,
                  barrier_vertices=list(CHEVRON.vertices), beta=1.5)
    s = MappedSolver(cfg)
    h0 = s.snapshot_h().copy()
    for _ in range(50):
        s.step(s.compute_dt())
    assert np.max(np.abs(s.snapshot_h() - h0)) < 1e-12


def test_chevron_mirror_symmetry():
    cfg = dam_cfg(nx=24, ny=24, dam_side="above", dam_y=0.8,
                  barrier_vertices=list(CHEVRON.vertices), beta=1.5,
                  bc_bottom="extrapolation")
    s = MappedSolver(cfg)
    for _ in range(60):
        s.step(s.compute_dt())
    h = s.snapshot_h()
    assert np.max(np.abs(h - h[:, ::-1])) == 0.0


def test_mass_conservation_with_barrier():
    cfg = dam_cfg(nx=30, ny=30, barrier_vertices=list(LINEAR.vertices),
                  beta=1.5)
    s = MappedSolver(cfg)
    m0 = s.total_mass()
    for _ in range(100):
        s.step(s.compute_dt())
    assert abs(s.total_mass() - m0) / m0 < 1e-12
