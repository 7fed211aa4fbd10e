"""Cut-cell updates: gradients, slope limiting and cell merging.

Sub-cells smaller than half a cell are merged with the full neighbor
directly above (upper side) or below (lower side); the merged cell is
updated once through every outer sub-edge, length-weighted, and both
members receive the merged value.  Gradients for the second-order
barrier-edge reconstruction come from a least-squares fit over the
barrier-respecting stencil, limited in Barth-Jespersen fashion at the
barrier midpoint and the sub-edge midpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .core import NGHOST
from .geometry import CutCellTable

BJ_EPS = 1e-12


def lsq_gradient(tab: CutCellTable, q_lo, q_up):
    """Least-squares gradients for every cut sub-cell.

    ``q_lo``/``q_up`` are the padded field arrays; returns an array of
    shape (3, m, 2, 2) = (component, cut cell, side, d/dx-d/dy).
    """
    g = NGHOST
    vals_lo = q_lo[:, tab.st_j + g, tab.st_i + g]   # (3, m, 2, K)
    vals_up = q_up[:, tab.st_j + g, tab.st_i + g]
    vals = np.where(tab.st_side[None] == 0, vals_lo, vals_up)
    qc_lo = q_lo[:, tab.jj + g, tab.ii + g]
    qc_up = q_up[:, tab.jj + g, tab.ii + g]
    qc = np.stack([qc_lo, qc_up], axis=-1)          # (3, m, 2)
    dq = (vals - qc[..., None]) * tab.st_mask[None]
    # fixed pairwise reduction over the 8 stencil slots (W,E,S,N,SW,SE,NW,NE):
    # each inner pair maps onto itself under a mirror reflection, so mirrored
    # grids produce bit-identical gradients
    t = tab.st_pinv[None] * dq[:, :, :, None, :]    # (3, m, 2, 2, K)
    grad = (((t[..., 0] + t[..., 1]) + (t[..., 2] + t[..., 3]))
            + ((t[..., 4] + t[..., 5]) + (t[..., 6] + t[..., 7])))
    grad[:, tab.st_rankdef] = 0.0
    return grad, vals, qc


def barth_jespersen(tab: CutCellTable, grad, vals, qc):
    """Per-component limiter factors for the cut-cell gradients.

    The admissible range is spanned by the stencil (including the centre);
    reconstructions are probed at the barrier midpoint and the sub-edge
    midpoints.
    """
    big = 1e300
    masked_hi = np.where(tab.st_mask[None], vals, -big)
    masked_lo = np.where(tab.st_mask[None], vals, big)
    qmax = np.maximum(masked_hi.max(axis=-1), qc)   # (3, m, 2)
    qmin = np.minimum(masked_lo.min(axis=-1), qc)
    dval = np.einsum("cmsd,mspd->cmsp", grad, tab.rp_off)  # (3, m, 2, P)
    up = qmax[..., None] - qc[..., None]
    dn = qmin[..., None] - qc[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(dval > BJ_EPS, up / dval,
                     np.where(dval < -BJ_EPS, dn / dval, 1.0))
    r = np.where(tab.rp_mask[None], np.minimum(1.0, r), 1.0)
    return r.min(axis=-1)   # (3, m, 2)


def reconstruct_barrier_states(tab: CutCellTable, q_lo, q_up):
    """Limited linear reconstruction of both sub-cell states at the
    barrier-edge midpoint.  Returns (q_recon_lo, q_recon_up), each (3, m)."""
    grad, vals, qc = lsq_gradient(tab, q_lo, q_up)
    alpha = barth_jespersen(tab, grad, vals, qc)
    off0 = tab.rp_off[:, :, 0, :]                   # (m, 2, 2)
    dq0 = np.einsum("cmsd,msd->cms", grad, off0) * alpha
    qr = qc + dq0
    qr[0] = np.maximum(qr[0], 0.0)
    return qr[:, :, 0], qr[:, :, 1]


@dataclass
class MergedGroup:
    side: int
    areas: np.ndarray                 # (n_members,)
    cells: List[tuple]                # padded (jp, ip, cut_id or -1)
    cart_edges: List[tuple]           # (orient, j, k, incoming, corr_sign, length)
    bar_edges: List[tuple]            # (cut_id, length)


@dataclass
class CutUpdatePlan:
    groups: List[MergedGroup] = field(default_factory=list)
    # edges whose upwind edge for theta-limiting may sit across the barrier
    flagged_x: List[tuple] = field(default_factory=list)  # (s, j, k, id_l, id_r)
    flagged_y: List[tuple] = field(default_factory=list)
    exlen: np.ndarray = None  # (2, ny+4, nx+3) sub-lengths of x-edges
    eylen: np.ndarray = None  # (2, ny+3, nx+4)


def _padded_side(tab: CutCellTable):
    g = NGHOST
    side = np.full((tab.ny + 2 * g, tab.nx + 2 * g), -1, dtype=np.int8)
    side[g:-g, g:-g] = tab.side_grid
    # reflect into the ghost frame so boundary edges stay usable
    side[:g] = side[2 * g - 1:g - 1:-1] if g > 1 else side[g:g + 1]
    side[g - 1::-1] = side[g:2 * g]
    side[-g:] = side[-g - 1:-2 * g - 1:-1]
    side[:, :g] = side[:, 2 * g - 1:g - 1:-1]
    side[:, -g:] = side[:, -g - 1:-2 * g - 1:-1]
    cid = np.full_like(side, -1, dtype=int)
    cid[g:-g, g:-g] = tab.cut_id
    cid[:g] = cid[2 * g - 1:g - 1:-1]
    cid[-g:] = cid[-g - 1:-2 * g - 1:-1]
    cid[:, :g] = cid[:, 2 * g - 1:g - 1:-1]
    cid[:, -g:] = cid[:, -g - 1:-2 * g - 1:-1]
    return side, cid


def build_update_plan(tab: CutCellTable) -> CutUpdatePlan:
    g = NGHOST
    ny, nx = tab.ny, tab.nx
    dx, dy = tab.dx, tab.dy
    plan = CutUpdatePlan()
    sideP, cidP = _padded_side(tab)
    NY, NX = sideP.shape

    # --- sub-lengths of every edge, per side -----------------------------
    def reflect(idx, n_tot):
        """Padded index -> the interior index it mirrors (wall reflection)."""
        if idx < g:
            return 2 * g - 1 - idx
        if idx >= n_tot - g:
            return 2 * (n_tot - g) - 1 - idx
        return idx

    def edge_len(a_jp, a_ip, b_jp, b_ip, s, orient):
        """Length of the edge between padded cells a (lower index) and b.

        Ghost cells are wall reflections, so the edge is measured in the
        reflected interior frame; an edge whose two cells reflect onto the
        same interior cell lies on the wall itself and takes that cell's
        outer sub-edge length.
        """
        ja, jb = reflect(a_jp, NY), reflect(b_jp, NY)
        ia, ib = reflect(a_ip, NX), reflect(b_ip, NX)
        if orient == "x":
            full = dy
            if (ja, ia) == (jb, ib):  # edge on the left or right wall
                k = cidP[ja, ia]
                if k >= 0:
                    return tab.edges[k, s, 0 if a_ip < g else 1]
                return full if sideP[ja, ia] == s else 0.0
            lo = (ja, ia) if ia < ib else (jb, ib)
            hi = (jb, ib) if ia < ib else (ja, ia)
            e_lo, e_hi = 1, 0  # lo's right edge, hi's left edge
        else:
            full = dx
            if (ja, ia) == (jb, ib):  # edge on the bottom or top wall
                k = cidP[ja, ia]
                if k >= 0:
                    return tab.edges[k, s, 2 if a_jp < g else 3]
                return full if sideP[ja, ia] == s else 0.0
            lo = (ja, ia) if ja < jb else (jb, ib)
            hi = (jb, ib) if ja < jb else (ja, ia)
            e_lo, e_hi = 3, 2  # lo's top edge, hi's bottom edge
        ka, kb = cidP[lo], cidP[hi]
        if ka >= 0:
            return tab.edges[ka, s, e_lo]
        if kb >= 0:
            return tab.edges[kb, s, e_hi]
        if sideP[lo] == s and sideP[hi] == s:
            return full
        return 0.0

    exlen = np.zeros((2, NY, NX - 1))
    eylen = np.zeros((2, NY - 1, NX))
    for s in (0, 1):
        same = (sideP == s) | (cidP >= 0) | (sideP == -1)
        exlen[s] = dy * (same[:, :-1] & same[:, 1:])
        eylen[s] = dx * (same[:-1] & same[1:])
    # overwrite near cut cells with the true sub-lengths
    for m in range(tab.count):
        jp, ip = tab.jj[m] + g, tab.ii[m] + g
        for s in (0, 1):
            exlen[s, jp, ip - 1] = edge_len(jp, ip - 1, jp, ip, s, "x")
            exlen[s, jp, ip] = edge_len(jp, ip, jp, ip + 1, s, "x")
            eylen[s, jp - 1, ip] = edge_len(jp - 1, ip, jp, ip, s, "y")
            eylen[s, jp, ip] = edge_len(jp, ip, jp + 1, ip, s, "y")
    plan.exlen, plan.eylen = exlen, eylen

    # --- merged groups ----------------------------------------------------
    absorbed = {}  # (cut_id, side) -> owner cut_id, for cut merge partners
    for m in range(tab.count):
        for s in (0, 1):
            if tab.merge_tgt_j[m, s] >= 0:
                kn = tab.cut_id[tab.merge_tgt_j[m, s], tab.ii[m]]
                if kn >= 0:
                    absorbed[(kn, s)] = m

    def member_edges(jp, ip, cid, s, mem):
        if cid >= 0:
            lL, lR, lB, lT = tab.edges[cid, s]
        else:
            lL = lR = dy
            lB = lT = dx
        out = []
        if lL > 0:
            out.append(("x", jp, ip - 1, "p", -1.0, lL, mem, 0))
        if lR > 0:
            out.append(("x", jp, ip, "m", +1.0, lR, mem, 1))
        if lB > 0:
            out.append(("y", jp - 1, ip, "p", -1.0, lB, mem, 2))
        if lT > 0:
            out.append(("y", jp, ip, "m", +1.0, lT, mem, 3))
        return out

    for m in range(tab.count):
        for s in (0, 1):
            if (m, s) in absorbed:
                continue
            jp, ip = int(tab.jj[m]) + g, int(tab.ii[m]) + g
            members = [(jp, ip, m)]
            areas = [tab.area[m, s]]
            bar = [(m, tab.lbar[m])]
            jt = tab.merge_tgt_j[m, s]
            if jt >= 0:
                kn = int(tab.cut_id[jt, tab.ii[m]])
                members.append((jt + g, ip, kn))
                if kn >= 0:
                    areas.append(tab.area[kn, s])
                    bar.append((kn, tab.lbar[kn]))
                else:
                    areas.append(dx * dy)
            edges = []
            for mem, (jq, iq, cid) in enumerate(members):
                edges.extend(member_edges(jq, iq, cid, s, mem))
            # drop edges interior to the group (they appear twice)
            keys = [(o, j, k) for (o, j, k, *_) in edges]
            edges = [e for e in edges if keys.count((e[0], e[1], e[2])) == 1]
            plan.groups.append(
                MergedGroup(side=s, areas=np.array(areas), cells=members,
                            cart_edges=edges, bar_edges=bar)
            )

    # --- flagged edges for blocked-upwind limiting ------------------------
    for m in range(tab.count):
        jp, ip = int(tab.jj[m]) + g, int(tab.ii[m]) + g
        for s in (0, 1):
            for k in (ip - 1, ip):  # x-edges of this cell
                if exlen[s, jp, k] <= 0 or not (0 < k < NX - 2):
                    continue
                if exlen[s, jp, k - 1] <= 0 or exlen[s, jp, k + 1] <= 0:
                    plan.flagged_x.append(
                        (s, jp, k, cidP[jp, k], cidP[jp, k + 1])
                    )
            for k in (jp - 1, jp):  # y-edges
                if eylen[s, k, ip] <= 0 or not (0 < k < NY - 2):
                    continue
                if eylen[s, k - 1, ip] <= 0 or eylen[s, k + 1, ip] <= 0:
                    plan.flagged_y.append(
                        (s, k, ip, cidP[k, ip], cidP[k + 1, ip])
                    )
    plan.flagged_x = sorted(set(plan.flagged_x))
    plan.flagged_y = sorted(set(plan.flagged_y))
    return plan


def blocked_edge_correction(waves, speeds, sub_waves, dt, dx):
    """Recompute one edge's correction flux, replacing the upwind waves.

    ``waves``/``speeds``: the edge's own family (3,3)/(3,); ``sub_waves``:
    per-family upwind waves (3,3), already rotated into the sweep frame.
    """
    nrm = np.sum(waves * waves, axis=1)
    dot = np.sum(waves * sub_waves, axis=1)
    theta = np.where(nrm < 1e-14, 1.0, dot / np.where(nrm < 1e-14, 1.0, nrm))
    phi = np.maximum(0.0, np.minimum(1.0, theta))
    nu = dt / dx * np.abs(speeds)
    fac = 0.5 * np.sign(speeds) * (1.0 - nu) * phi
    t = fac[:, None] * waves
    return (t[0] + t[2]) + t[1]  # acoustic pair first, as in the sweep kernel


def merged_cell_update(group: MergedGroup, q_arrays, flux_data, bar_minus,
                       bar_plus, dt, order):
    """One forward-Euler update of a merged (or lone) cut group.

    ``q_arrays``: (q_lo, q_up) padded; ``flux_data``: per-side dicts with
    'amdq_x', 'apdq_x', 'amdq_y', 'apdq_y', 'corr_x', 'corr_y' edge arrays;
    ``bar_minus``/``bar_plus``: (3, n_cut) barrier fluctuations in x-y
    components.  Returns the new merged state (3,).
    """
    s = group.side
    q = q_arrays[s]
    data = flux_data[s]
    atot = float(np.sum(group.areas))
    qm = np.zeros(3)
    for (jq, iq, _), a in zip(group.cells, group.areas):
        qm += a * q[:, jq, iq]
    qm /= atot

    # Fixed reduction tree (per member: (L + R) + (B + T), then members in
    # order): mirrored groups see their left/right terms swapped within one
    # addition only, so both accumulate bit-identically.
    terms = np.zeros((len(group.cells), 4, 3))
    for orient, j, k, inc, csign, length, mem, slot in group.cart_edges:
        if orient == "x":
            fl = data["apdq_x"][:, j, k] if inc == "p" else data["amdq_x"][:, j, k]
            term = length * fl
            if order == 2:
                term = term + csign * length * data["corr_x"][:, j, k]
        else:
            fl = data["apdq_y"][:, j, k] if inc == "p" else data["amdq_y"][:, j, k]
            term = length * fl
            if order == 2:
                term = term + csign * length * data["corr_y"][:, j, k]
        terms[mem, slot] = term
    tot = np.zeros(3)
    for mem in range(len(group.cells)):
        t = terms[mem]
        tot += (t[0] + t[1]) + (t[2] + t[3])
    for cid, lbar in group.bar_edges:
        fl = bar_plus[:, cid] if s == 1 else bar_minus[:, cid]
        tot += lbar * fl
    return qm - dt / atot * tot
