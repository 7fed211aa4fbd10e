"""Barrier/grid intersection geometry.

The barrier is a zero-width polyline y = f(x) spanning the unit square
from x = 0 to x = 1 (2 or 3 vertices, strictly increasing x).  Cells the
polyline passes through are split into a lower and an upper polygon;
this module computes their areas, centroids, sub-edge lengths, the
in-cell barrier segment, merge targets for small sub-cells and the
least-squares gradient stencils used for second-order reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

SNAP_TOL = 1e-12
AREA_TOL = 1e-12  # relative to the cell area
MAX_STENCIL = 8
# fixed stencil slots: W, E, S, N, SW, SE, NW, NE
STENCIL_OFFSETS = [(-1, 0), (1, 0), (0, -1), (0, 1),
                   (-1, -1), (1, -1), (-1, 1), (1, 1)]
# slot permutation induced by reflecting the domain across x = 1/2
MIRROR_SLOT_PERM = [1, 0, 2, 3, 5, 4, 7, 6]
MAX_RECON = 5


class GeometryError(Exception):
    pass


class BarrierOutsideDomain(GeometryError):
    pass


class DegenerateBarrier(GeometryError):
    pass


class StencilTooSmall(GeometryError):
    pass


class MergeTargetCut(GeometryError):
    """A small sub-cell's merge partner is unusable (small itself or
    outside the grid)."""


@dataclass
class BarrierGeometry:
    """Polyline barrier with crest height ``beta`` above the local bed."""

    vertices: List[Tuple[float, float]]
    beta: float

    def __post_init__(self):
        v = [(float(x), float(y)) for x, y in self.vertices]
        if len(v) not in (2, 3):
            raise DegenerateBarrier("barrier needs 2 or 3 vertices")
        xs = [p[0] for p in v]
        if any(x1 - x0 <= SNAP_TOL for x0, x1 in zip(xs, xs[1:])):
            raise DegenerateBarrier("vertex x-coordinates must strictly increase")
        if abs(xs[0]) > SNAP_TOL or abs(xs[-1] - 1.0) > SNAP_TOL:
            raise BarrierOutsideDomain("barrier must span x=0 to x=1")
        for _, y in v:
            if not 0.0 < y < 1.0:
                raise BarrierOutsideDomain("barrier vertex outside the unit square")
        if self.beta is not None and self.beta <= 0:
            raise DegenerateBarrier("crest height beta must be positive")
        self.vertices = v

    def y_at(self, x):
        """Piecewise-linear barrier elevation y = f(x)."""
        x = np.asarray(x, dtype=float)
        xs = np.array([p[0] for p in self.vertices])
        ys = np.array([p[1] for p in self.vertices])
        return np.interp(x, xs, ys)

    def segments(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))


def shoelace_area(pts):
    """Signed polygon area (counterclockwise positive)."""
    pts = np.asarray(pts, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(pts):
    pts = np.asarray(pts, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * float(np.sum(cross))
    if abs(a) < 1e-300:
        return np.array([np.mean(x), np.mean(y)])
    cx = float(np.sum((x + xn) * cross)) / (6.0 * a)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * a)
    return np.array([cx, cy])


def _dedupe(pts, tol=1e-14):
    """Drop consecutive duplicates and collinear interior points."""
    out = []
    for p in pts:
        if not out or abs(p[0] - out[-1][0]) > tol or abs(p[1] - out[-1][1]) > tol:
            out.append(p)
    if len(out) > 2 and abs(out[0][0] - out[-1][0]) <= tol and abs(out[0][1] - out[-1][1]) <= tol:
        out.pop()
    # remove collinear
    keep = []
    n = len(out)
    for k in range(n):
        a, b, c = out[k - 1], out[k], out[(k + 1) % n]
        cr = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(cr) > 1e-16:
            keep.append(b)
    return keep if len(keep) >= 3 else out


def _segments_cross(p1, p2, q1, q2):
    """Strict interior crossing test for two segments."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


@dataclass
class CutCellTable:
    """Everything the solver needs to know about barrier-cut cells.

    Sub-cell data is indexed ``[m, side]`` with side 0 below and side 1
    above the barrier.  ``edges[m, side]`` holds the sub-edge lengths in
    the order (left, right, bottom, top).
    """

    nx: int
    ny: int
    barrier: BarrierGeometry
    count: int = 0
    ii: np.ndarray = None
    jj: np.ndarray = None
    area: np.ndarray = None        # (m, 2) absolute areas
    frac: np.ndarray = None        # (m, 2) area fractions
    lbar: np.ndarray = None        # (m,)
    emid: np.ndarray = None        # (m, 2) barrier-chord midpoint
    normal: np.ndarray = None      # (m, 2) unit normal, lower -> upper
    tangent: np.ndarray = None     # (m, 2)
    centroid: np.ndarray = None    # (m, 2, 2) [side, xy]
    edges: np.ndarray = None       # (m, 2, 4) sub-edge lengths (L, R, B, T)
    cut_id: np.ndarray = None      # (ny, nx) int, -1 for uncut
    side_grid: np.ndarray = None   # (ny, nx) int8: 0 below, 1 above, 2 cut
    merge_tgt_j: np.ndarray = None  # (m, 2) target row or -1 (same column)
    polygons: list = field(default_factory=list)
    barrier_edges_y: list = field(default_factory=list)  # (j_edge, i) Cartesian
    # least-squares stencils, padded to MAX_STENCIL slots
    st_j: np.ndarray = None
    st_i: np.ndarray = None
    st_side: np.ndarray = None
    st_mask: np.ndarray = None
    st_pinv: np.ndarray = None     # (m, 2, 2, MAX_STENCIL)
    st_rankdef: np.ndarray = None
    # reconstruction points (offsets from the sub-cell centroid)
    rp_off: np.ndarray = None      # (m, 2, MAX_RECON, 2)
    rp_mask: np.ndarray = None

    @property
    def dx(self):
        return 1.0 / self.nx

    @property
    def dy(self):
        return 1.0 / self.ny

    def index_of(self, i, j):
        m = int(self.cut_id[j, i])
        if m < 0:
            raise KeyError(f"cell ({i}, {j}) is not cut")
        return m

    def dump_text(self):
        lines = ["# i j alpha_up alpha_lo l_bar nhat_x nhat_y"]
        for m in range(self.count):
            lines.append(
                "%d %d %.16e %.16e %.16e %.16e %.16e"
                % (
                    self.ii[m], self.jj[m],
                    self.area[m, 1], self.area[m, 0], self.lbar[m],
                    self.normal[m, 0], self.normal[m, 1],
                )
            )
        return "\n".join(lines) + "\n"


def _column_breakpoints(barrier, xa, xb):
    """x breakpoints of the polyline restricted to [xa, xb]."""
    xs = [xa]
    for vx, _ in barrier.vertices[1:-1]:
        if xa + SNAP_TOL < vx < xb - SNAP_TOL:
            xs.append(vx)
    xs.append(xb)
    return xs


def _snap(v, step):
    k = round(v / step)
    return k * step if abs(v - k * step) < SNAP_TOL else v


def _cell_curve(barrier, xa, xb, ya, yb, dy):
    """Clamped barrier curve over one cell: list of (x, f, fclamp)."""
    xs = _column_breakpoints(barrier, xa, xb)
    pts = [(x, _snap(float(barrier.y_at(x)), dy)) for x in xs]
    # insert crossings with the horizontal cell edges
    out = []
    for (x0, f0), (x1, f1) in zip(pts[:-1], pts[1:]):
        out.append((x0, f0))
        crossings = []
        for level in (ya, yb):
            if (f0 - level) * (f1 - level) < 0:
                xc = x0 + (level - f0) * (x1 - x0) / (f1 - f0)
                crossings.append((xc, level))
        out.extend(sorted(crossings))
    out.append(pts[-1])
    return [(x, f, min(max(f, ya), yb)) for x, f in out]


def intersect_barrier(barrier: BarrierGeometry, nx: int, ny: int) -> CutCellTable:
    """Locate barrier-cut cells and compute their split geometry."""
    dx, dy = 1.0 / nx, 1.0 / ny
    cell_area = dx * dy
    tab = CutCellTable(nx=nx, ny=ny, barrier=barrier)

    recs = []
    cut_id = -np.ones((ny, nx), dtype=int)
    side_grid = np.zeros((ny, nx), dtype=np.int8)
    barrier_edges = []

    xs_cells = np.arange(nx) * dx
    for i in range(nx):
        xa, xb = xs_cells[i], xs_cells[i] + dx
        bps = _column_breakpoints(barrier, xa, xb)
        fs = [_snap(float(barrier.y_at(x)), dy) for x in bps]
        fmin, fmax = min(fs), max(fs)
        # degenerate: barrier rides exactly on a grid line over this column
        if fmax - fmin < SNAP_TOL and abs(fmin / dy - round(fmin / dy)) < SNAP_TOL:
            je = int(round(fmin / dy))
            if 0 < je < ny:
                barrier_edges.append((je, i))
            jlo = jhi = -1  # no cut cells in this column
        else:
            jlo = max(int(np.floor(fmin / dy)) - 1, 0)
            jhi = min(int(np.floor(fmax / dy)) + 1, ny - 1)
        for j in range(jlo, jhi + 1) if jlo >= 0 else []:
            ya, yb = j * dy, (j + 1) * dy
            curve = _cell_curve(barrier, xa, xb, ya, yb, dy)
            lower = [(xa, ya), (xb, ya)] + [(x, c) for x, _, c in reversed(curve)]
            lower = _dedupe(lower)
            a_lo = shoelace_area(lower) if len(lower) >= 3 else 0.0
            if a_lo < AREA_TOL * cell_area or a_lo > (1 - AREA_TOL) * cell_area:
                continue
            upper = [(x, c) for x, _, c in curve] + [(xb, yb), (xa, yb)]
            upper = _dedupe(upper)
            a_up = cell_area - a_lo

            # in-cell barrier pieces and chord
            pieces = []
            for (x0, f0, c0), (x1, f1, c1) in zip(curve[:-1], curve[1:]):
                fm = 0.5 * (f0 + f1)
                if ya - SNAP_TOL <= fm <= yb + SNAP_TOL and x1 > x0:
                    inside = (min(f0, f1) >= ya - SNAP_TOL) and (max(f0, f1) <= yb + SNAP_TOL)
                    if inside:
                        pieces.append(((x0, f0), (x1, f1)))
            if not pieces:
                continue
            lbar = sum(np.hypot(p1[0] - p0[0], p1[1] - p0[1]) for p0, p1 in pieces)
            p_first, p_last = pieces[0][0], pieces[-1][1]
            chord = np.array([p_last[0] - p_first[0], p_last[1] - p_first[1]])
            clen = float(np.hypot(*chord))
            if clen < SNAP_TOL:
                continue
            tangent = chord / clen
            nvec = np.array([-tangent[1], tangent[0]])  # points lower -> upper
            emid = 0.5 * np.array([p_first[0] + p_last[0], p_first[1] + p_last[1]])

            cl = curve[0][2]
            cr = curve[-1][2]
            bot_lo = sum(
                p1[0] - p0[0]
                for p0, p1 in zip(curve[:-1], curve[1:])
                if 0.5 * (p0[1] + p1[1]) > ya + SNAP_TOL
            )
            top_up = sum(
                p1[0] - p0[0]
                for p0, p1 in zip(curve[:-1], curve[1:])
                if 0.5 * (p0[1] + p1[1]) < yb - SNAP_TOL
            )
            sub = np.zeros((2, 4))
            sub[0] = [cl - ya, cr - ya, bot_lo, dx - top_up]
            sub[1] = [yb - cl, yb - cr, dx - bot_lo, top_up]
            sub[np.abs(sub) < SNAP_TOL] = 0.0

            recs.append(
                dict(
                    i=i, j=j, a=(a_lo, a_up), lbar=lbar, emid=emid,
                    normal=nvec, tangent=tangent,
                    centroid=(polygon_centroid(lower), polygon_centroid(upper)),
                    edges=sub, polys=(lower, upper),
                )
            )

    m = len(recs)
    tab.count = m
    tab.ii = np.array([r["i"] for r in recs], dtype=int)
    tab.jj = np.array([r["j"] for r in recs], dtype=int)
    tab.area = np.array([r["a"] for r in recs]).reshape(m, 2)
    tab.frac = tab.area / cell_area if m else np.zeros((0, 2))
    tab.lbar = np.array([r["lbar"] for r in recs])
    tab.emid = np.array([r["emid"] for r in recs]).reshape(m, 2)
    tab.normal = np.array([r["normal"] for r in recs]).reshape(m, 2)
    tab.tangent = np.array([r["tangent"] for r in recs]).reshape(m, 2)
    tab.centroid = np.array([r["centroid"] for r in recs]).reshape(m, 2, 2)
    tab.edges = np.array([r["edges"] for r in recs]).reshape(m, 2, 4)
    tab.polygons = [r["polys"] for r in recs]
    for k, r in enumerate(recs):
        cut_id[r["j"], r["i"]] = k
    tab.cut_id = cut_id
    tab.barrier_edges_y = barrier_edges

    # side of every uncut cell: compare the centre against the polyline
    xs = (np.arange(nx) + 0.5) * dx
    ys = (np.arange(ny) + 0.5) * dy
    fline = barrier.y_at(xs)
    side_grid[:] = (ys[:, None] > fline[None, :]).astype(np.int8)
    side_grid[cut_id >= 0] = 2
    tab.side_grid = side_grid

    _reconcile_shared_edges(tab)
    _symmetrize_fields(tab)
    _assign_merge_targets(tab)
    _build_stencils(tab)
    _build_recon_points(tab)
    _symmetrize_stencils(tab)
    return tab


def _reconcile_shared_edges(tab: CutCellTable):
    """Make adjacent cut cells agree bit-exactly on their shared edge.

    Both cells measure the same sub-edge from independent polygon walks;
    the left/lower cell's value wins.
    """
    for k in range(tab.count):
        i, j = int(tab.ii[k]), int(tab.jj[k])
        if i + 1 < tab.nx:
            k2 = tab.cut_id[j, i + 1]
            if k2 >= 0:
                tab.edges[k2, :, 0] = tab.edges[k, :, 1]
        if j + 1 < tab.ny:
            k2 = tab.cut_id[j + 1, i]
            if k2 >= 0:
                tab.edges[k2, :, 2] = tab.edges[k, :, 3]


def _mirror_pairs(tab: CutCellTable):
    """Index pairs (k, k2) of cut cells that map onto each other under the
    reflection x -> 1 - x, when the barrier polyline itself is symmetric.

    Returns None when the barrier is not mirror symmetric or the cut-cell
    list does not pair up cleanly.
    """
    v = tab.barrier.vertices
    vm = [(1.0 - x, y) for x, y in reversed(v)]
    if len(v) != len(vm):
        return None
    for (x0, y0), (x1, y1) in zip(v, vm):
        if abs(x0 - x1) > 1e-12 or abs(y0 - y1) > 1e-12:
            return None
    pairs = []
    for k in range(tab.count):
        i2 = tab.nx - 1 - int(tab.ii[k])
        if int(tab.ii[k]) >= i2:
            continue
        k2 = tab.cut_id[int(tab.jj[k]), i2]
        if k2 < 0:
            return None
        pairs.append((k, int(k2)))
    return pairs


def _symmetrize_fields(tab: CutCellTable):
    """Force bit-exact mirror symmetry of the geometric data for barriers
    that are symmetric about x = 1/2.

    The left and right halves are built by independent polygon walks whose
    floating-point results agree only to roundoff; downstream sign branches
    (upwind selection, blocking toggles) can amplify those last-bit
    differences, so the right half is overwritten with the exact image of
    the left half.
    """
    pairs = _mirror_pairs(tab)
    if pairs is None:
        return
    for k, k2 in pairs:
        tab.area[k2] = tab.area[k]
        tab.frac[k2] = tab.frac[k]
        tab.lbar[k2] = tab.lbar[k]
        tab.edges[k2, :, :] = tab.edges[k][:, [1, 0, 2, 3]]
        tab.normal[k2] = [-tab.normal[k, 0], tab.normal[k, 1]]
        tab.tangent[k2] = [tab.tangent[k, 0], -tab.tangent[k, 1]]
        tab.emid[k2] = [1.0 - tab.emid[k, 0], tab.emid[k, 1]]
        tab.centroid[k2, :, 0] = 1.0 - tab.centroid[k, :, 0]
        tab.centroid[k2, :, 1] = tab.centroid[k, :, 1]
    half = tab.nx // 2
    tab.side_grid[:, tab.nx - half:] = tab.side_grid[:, :half][:, ::-1]


def _symmetrize_stencils(tab: CutCellTable):
    pairs = _mirror_pairs(tab)
    if pairs is None:
        return
    sp = MIRROR_SLOT_PERM
    rp = [0, 2, 1, 3, 4]
    for k, k2 in pairs:
        tab.st_i[k2] = tab.nx - 1 - tab.st_i[k][:, sp]
        tab.st_j[k2] = tab.st_j[k][:, sp]
        tab.st_side[k2] = tab.st_side[k][:, sp]
        tab.st_mask[k2] = tab.st_mask[k][:, sp]
        tab.st_pinv[k2, :, 0, :] = -tab.st_pinv[k][:, 0, sp]
        tab.st_pinv[k2, :, 1, :] = tab.st_pinv[k][:, 1, sp]
        tab.st_rankdef[k2] = tab.st_rankdef[k]
        tab.rp_mask[k2] = tab.rp_mask[k][:, rp]
        tab.rp_off[k2, :, :, 0] = -tab.rp_off[k][:, rp, 0]
        tab.rp_off[k2, :, :, 1] = tab.rp_off[k][:, rp, 1]


def _assign_merge_targets(tab: CutCellTable):
    m = tab.count
    tgt = -np.ones((m, 2), dtype=int)
    for k in range(m):
        i, j = tab.ii[k], tab.jj[k]
        for s, step in ((0, -1), (1, +1)):
            if tab.frac[k, s] < 0.5:
                jn = j + step
                if not 0 <= jn < tab.ny:
                    raise MergeTargetCut(
                        f"small sub-cell at ({i}, {j}) has no in-grid neighbor"
                    )
                kn = tab.cut_id[jn, i]
                if kn >= 0 and tab.frac[kn, s] < 0.5:
                    raise MergeTargetCut(
                        f"merge partner of ({i}, {j}) side {s} is itself small"
                    )
                tgt[k, s] = jn
    tab.merge_tgt_j = tgt


def _blocked(tab, p, q):
    for (v0, v1) in tab.barrier.segments():
        if _segments_cross(p, q, v0, v1):
            return True
    return False


def build_lsq_stencil(tab: CutCellTable, k: int, side: int):
    """Neighbor list for the gradient of cut cell ``k`` on ``side``.

    Candidates are the four edge neighbors plus diagonal cut cells that sit
    along the barrier; a candidate is dropped when it lies outside the grid,
    has no state on this side, or the centroid-to-centroid segment crosses
    the barrier.
    """
    i, j = int(tab.ii[k]), int(tab.jj[k])
    c0 = tab.centroid[k, side]
    out = {}
    for slot, (di, dj) in enumerate(STENCIL_OFFSETS):
        ci, cj = i + di, j + dj
        if not (0 <= ci < tab.nx and 0 <= cj < tab.ny):
            continue
        kn = tab.cut_id[cj, ci]
        if kn >= 0:
            cn = tab.centroid[kn, side]
        else:
            if slot >= 4:  # diagonals only contribute when they are cut cells
                continue
            if tab.side_grid[cj, ci] != side:
                continue
            cn = np.array([(ci + 0.5) * tab.dx, (cj + 0.5) * tab.dy])
        if _blocked(tab, c0, cn):
            continue
        out[slot] = (ci, cj, side, cn)
    if len(out) < 2:
        raise StencilTooSmall(f"cut cell ({i}, {j}) side {side}: {len(out)} neighbors")
    return out


def _build_stencils(tab: CutCellTable):
    m = tab.count
    K = MAX_STENCIL
    tab.st_j = np.zeros((m, 2, K), dtype=int)
    tab.st_i = np.zeros((m, 2, K), dtype=int)
    tab.st_side = np.zeros((m, 2, K), dtype=int)
    tab.st_mask = np.zeros((m, 2, K), dtype=bool)
    tab.st_pinv = np.zeros((m, 2, 2, K))
    tab.st_rankdef = np.zeros((m, 2), dtype=bool)
    scale = max(tab.dx, tab.dy)
    for k in range(m):
        for s in (0, 1):
            nb = build_lsq_stencil(tab, k, s)  # dict slot -> (ci, cj, side, cn)
            c0 = tab.centroid[k, s]
            slots = sorted(nb.keys())
            dr = np.array([nb[sl][3] - c0 for sl in slots])
            u, sv, vt = np.linalg.svd(dr, full_matrices=False)
            if sv[-1] < 1e-10 * scale:
                tab.st_rankdef[k, s] = True
            pinv = vt.T @ np.diag(1.0 / np.maximum(sv, 1e-30)) @ u.T
            for col, sl in enumerate(slots):
                ci, cj, ns, _ = nb[sl]
                tab.st_i[k, s, sl] = ci
                tab.st_j[k, s, sl] = cj
                tab.st_side[k, s, sl] = ns
                tab.st_mask[k, s, sl] = True
                tab.st_pinv[k, s, :, sl] = pinv[:, col]


def _build_recon_points(tab: CutCellTable):
    """Limiter evaluation points: barrier midpoint plus sub-edge midpoints."""
    m = tab.count
    tab.rp_off = np.zeros((m, 2, MAX_RECON, 2))
    tab.rp_mask = np.zeros((m, 2, MAX_RECON), dtype=bool)
    dx, dy = tab.dx, tab.dy
    for k in range(m):
        i, j = tab.ii[k], tab.jj[k]
        xa, ya = i * dx, j * dy
        xb, yb = xa + dx, ya + dy
        f_at = lambda x: float(tab.barrier.y_at(x))
        cl = min(max(f_at(xa), ya), yb)
        cr = min(max(f_at(xb), ya), yb)
        for s in (0, 1):
            # fixed slots: 0 = barrier midpoint, 1..4 = L, R, B, T sub-edge midpoints
            pts = {0: tab.emid[k]}
            lL, lR, lB, lT = tab.edges[k, s]
            if lL > 0:
                pts[1] = np.array([xa, (ya + cl) / 2 if s == 0 else (cl + yb) / 2])
            if lR > 0:
                pts[2] = np.array([xb, (ya + cr) / 2 if s == 0 else (cr + yb) / 2])
            if lB > 0:
                pts[3] = np.array([xa + 0.5 * dx, ya])
            if lT > 0:
                pts[4] = np.array([xa + 0.5 * dx, yb])
            for p, pt in pts.items():
                tab.rp_off[k, s, p] = pt - tab.centroid[k, s]
                tab.rp_mask[k, s, p] = True
