"""State containers and shallow-water flux definitions.

Conserved variables are stored component-first: q[0] = depth h,
q[1] = x-momentum hu, q[2] = y-momentum hv.  All field arrays carry two
ghost layers on each side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81
DRY_TOLERANCE = 1e-6
NGHOST = 2


class CoreError(Exception):
    pass


class InvalidState(CoreError):
    """A conserved state violates a basic sanity requirement."""


def velocity(h, hm, drytol=DRY_TOLERANCE):
    """Momentum-to-velocity division, zero on (near-)dry input."""
    h = np.asarray(h, dtype=float)
    hm = np.asarray(hm, dtype=float)
    wet = h > drytol
    return np.where(wet, hm / np.where(wet, h, 1.0), 0.0)


def physical_flux_x(q, g=GRAVITY, drytol=DRY_TOLERANCE):
    """Flux of (h, hu, hv) in the x direction; dry states yield zero flux."""
    q = np.asarray(q, dtype=float)
    h, hu, hv = q[0], q[1], q[2]
    u = velocity(h, hu, drytol)
    wet = h > drytol
    f = np.zeros_like(q)
    f[0] = np.where(wet, hu, 0.0)
    f[1] = np.where(wet, 0.5 * g * h * h + hu * u, 0.0)
    f[2] = np.where(wet, hv * u, 0.0)
    return f


def physical_flux_y(q, g=GRAVITY, drytol=DRY_TOLERANCE):
    q = np.asarray(q, dtype=float)
    h, hu, hv = q[0], q[1], q[2]
    v = velocity(h, hv, drytol)
    wet = h > drytol
    f = np.zeros_like(q)
    f[0] = np.where(wet, hv, 0.0)
    f[1] = np.where(wet, hu * v, 0.0)
    f[2] = np.where(wet, 0.5 * g * h * h + hv * v, 0.0)
    return f


def check_state(q, drytol=DRY_TOLERANCE):
    """Raise InvalidState for negative depth or momentum on a dry cell."""
    q = np.asarray(q, dtype=float)
    if np.any(q[0] < -1e-14):
        raise InvalidState("negative depth")
    dry = q[0] <= drytol
    if np.any(dry & ((np.abs(q[1]) > 0) | (np.abs(q[2]) > 0))):
        raise InvalidState("momentum on dry cell")


@dataclass
class SolverParams:
    """Numerical parameters shared by the Cartesian and mapped solvers."""

    gravity: float = GRAVITY
    cfl: float = 0.45
    order: int = 2
    average: str = "roe"  # or "einfeldt"
    drytol: float = DRY_TOLERANCE

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if self.average not in ("roe", "einfeldt"):
            raise ValueError(f"unknown average kind {self.average!r}")
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")


@dataclass
class CellField:
    """Cell-centred fields on the unit square with two ghost layers.

    Cut cells carry two states at the same index: ``q_lo`` holds the state
    of the sub-cell below the barrier and ``q_up`` the one above.  On uncut
    cells the two arrays are kept identical.
    """

    nx: int
    ny: int
    q_lo: np.ndarray = field(default=None)  # (3, ny+4, nx+4)
    q_up: np.ndarray = field(default=None)
    b: np.ndarray = field(default=None)  # (ny+4, nx+4)

    def __post_init__(self):
        shape = (3, self.ny + 2 * NGHOST, self.nx + 2 * NGHOST)
        if self.q_lo is None:
            self.q_lo = np.zeros(shape)
        if self.q_up is None:
            self.q_up = self.q_lo.copy()
        if self.b is None:
            self.b = np.zeros(shape[1:])

    @property
    def dx(self):
        return 1.0 / self.nx

    @property
    def dy(self):
        return 1.0 / self.ny

    def interior(self, arr):
        return arr[..., NGHOST:-NGHOST, NGHOST:-NGHOST]

    def cell_centers(self):
        xs = (np.arange(self.nx) + 0.5) * self.dx
        ys = (np.arange(self.ny) + 0.5) * self.dy
        return xs, ys


def total_mass(fld: CellField, table=None):
    """Water volume over the interior; cut cells weight each sub-state by
    its polygon area."""
    cell_area = fld.dx * fld.dy
    h_lo = fld.interior(fld.q_lo)[0]
    mass = float(np.sum(h_lo)) * cell_area
    if table is not None and table.count:
        jj, ii = table.jj, table.ii
        mass -= float(np.sum(h_lo[jj, ii])) * cell_area
        h_up = fld.interior(fld.q_up)[0]
        mass += float(np.sum(h_lo[jj, ii] * table.area[:, 0]))
        mass += float(np.sum(h_up[jj, ii] * table.area[:, 1]))
    return mass
