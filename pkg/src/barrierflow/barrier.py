"""Wave redistribution at the zero-width barrier.

States on either side of a barrier edge are rotated into the edge frame
(normal pointing from the lower to the upper side), solved against a
ghost state sitting on the crest, and the resulting waves of the two
ghost problems are redistributed in a merged eigenbasis whose speeds are
the averages of the two single-sided families.

When both surfaces are below the crest, the edge degenerates to two
independent reflecting walls and transmits exactly nothing.  When only
one side tops the crest, the ghost on the crest stays dry and the
merged solve skims off the water above the crest: its fixed point pins
the overtopped surface at the crest level, so transmission is limited
to the excess head rather than the full incident wave.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DRY_TOLERANCE, GRAVITY
from .riemann import fwave_edges


class BarrierError(Exception):
    pass


class SingularRedistribution(BarrierError):
    pass


def rotation_matrix(normal, tangent):
    n = np.asarray(normal, dtype=float)
    t = np.asarray(tangent, dtype=float)
    return np.array([
        [1.0, 0.0, 0.0],
        [0.0, n[0], n[1]],
        [0.0, t[0], t[1]],
    ])


def rotate(q, normal, tangent):
    """Momenta into (normal, tangential) components; q leading axis 3."""
    q = np.asarray(q, dtype=float)
    n = np.asarray(normal, dtype=float)
    t = np.asarray(tangent, dtype=float)
    out = np.empty_like(q)
    out[0] = q[0]
    out[1] = n[..., 0] * q[1] + n[..., 1] * q[2]
    out[2] = t[..., 0] * q[1] + t[..., 1] * q[2]
    return out


def rotate_back(v, normal, tangent):
    v = np.asarray(v, dtype=float)
    n = np.asarray(normal, dtype=float)
    t = np.asarray(tangent, dtype=float)
    out = np.empty_like(v)
    out[0] = v[0]
    out[1] = n[..., 0] * v[1] + t[..., 0] * v[2]
    out[2] = n[..., 1] * v[1] + t[..., 1] * v[2]
    return out


def ghost_state(q_lo, q_up, beta, g=GRAVITY, drytol=DRY_TOLERANCE):
    """Crest-top ghost state from the rotated states on both sides.

    The ghost depth is the smaller side's depth above the crest, clamped
    at zero, so the ghost is dry unless both surfaces top the barrier.
    Momenta take the side value of smaller magnitude; a dry ghost
    carries none.
    """
    q_lo = np.asarray(q_lo, dtype=float)
    q_up = np.asarray(q_up, dtype=float)
    hstar = np.maximum(np.minimum(q_lo[0], q_up[0]) - beta, 0.0)
    pick_lo = np.abs(q_lo[1:]) <= np.abs(q_up[1:])
    mom = np.where(pick_lo, q_lo[1:], q_up[1:])
    wet = hstar > drytol
    out = np.empty_like(q_lo)
    out[0] = np.where(wet, hstar, 0.0)
    out[1] = np.where(wet, mom[0], 0.0)
    out[2] = np.where(wet, mom[1], 0.0)
    return out


@dataclass
class RedistributedWaves:
    """Fluctuations and merged wave family at a barrier edge (edge frame)."""

    minus: np.ndarray       # (3, ...) into the lower side
    plus: np.ndarray        # (3, ...) into the upper side
    waves_lo: np.ndarray    # (3, 3, ...) upwind substitutes, lower side
    waves_up: np.ndarray
    speeds_lo: np.ndarray   # (3, ...)
    speeds_up: np.ndarray
    blocking: np.ndarray    # bool mask


def redistribute(q_lo, q_up, b, beta, g=GRAVITY, average="roe",
                 drytol=DRY_TOLERANCE):
    """Barrier-edge fluctuations from two ghost Riemann problems.

    ``q_lo``/``q_up`` are already rotated into the edge frame (component 1
    is the momentum normal to the barrier, positive towards the upper
    side).  Broadcasts over trailing axes.
    """
    q_lo = np.asarray(q_lo, dtype=float)
    q_up = np.asarray(q_up, dtype=float)
    scalar = q_lo.ndim == 1
    if scalar:
        q_lo = q_lo[:, None]
        q_up = q_up[:, None]
    b = np.broadcast_to(np.asarray(b, dtype=float), q_lo.shape[1:]).copy()
    bstar = b + beta

    blocking = (q_lo[0] < beta) & (q_up[0] < beta)

    # --- blocking branch: independent reflecting walls ------------------
    mirror_lo = q_lo * np.array([1.0, -1.0, 1.0])[:, None]
    mirror_up = q_up * np.array([1.0, -1.0, 1.0])[:, None]
    wv_lo_w, sp_lo_w, minus_w, _ = fwave_edges(q_lo, mirror_lo, b, b, g, average, drytol)
    wv_up_w, sp_up_w, _, plus_w = fwave_edges(mirror_up, q_up, b, b, g, average, drytol)

    # --- overtopping branch: ghost problems + merged redistribution -----
    # Against a dry ghost each sub-problem sees the crest clipped to its
    # own surface, so a side still below the crest meets a zero-depth
    # inundation state and the full flux-difference identity (and thus
    # mass) is preserved; a wet ghost sits on the true crest.
    qstar = ghost_state(q_lo, q_up, beta, g, drytol)
    ghost_wet = qstar[0] > drytol
    bstar_l = np.where(ghost_wet, bstar, np.minimum(bstar, b + q_lo[0]))
    bstar_u = np.where(ghost_wet, bstar, np.minimum(bstar, b + q_up[0]))
    wv_l, sp_l, _, _ = fwave_edges(q_lo, qstar, b, bstar_l, g, average, drytol,
                                   allow_wall=False)
    wv_u, sp_u, _, _ = fwave_edges(qstar, q_up, bstar_u, b, g, average, drytol,
                                   allow_wall=False)
    rhs = ((wv_l[0] + wv_l[2]) + wv_l[1]) + ((wv_u[0] + wv_u[2]) + wv_u[1])
    omega = 0.5 * (sp_l + sp_u)
    hl, hu = q_lo[0], q_up[0]
    vtl = np.where(hl > drytol, q_lo[2] / np.where(hl > drytol, hl, 1.0), 0.0)
    vtu = np.where(hu > drytol, q_up[2] / np.where(hu > drytol, hu, 1.0), 0.0)
    vbar = 0.5 * (vtl + vtu)

    dd = omega[2] - omega[0]
    singular = np.abs(dd) < 1e-12 * (np.abs(omega[0]) + np.abs(omega[2]) + 1e-12)
    dds = np.where(singular, 1.0, dd)
    e1 = (omega[2] * rhs[0] - rhs[1]) / dds
    e3 = (rhs[1] - omega[0] * rhs[0]) / dds
    e2 = rhs[2] - vbar * rhs[0]

    merged = np.zeros_like(wv_l)
    merged[0, 0] = e1
    merged[0, 1] = e1 * omega[0]
    merged[0, 2] = e1 * vbar
    merged[1, 2] = e2
    merged[2, 0] = e3
    merged[2, 1] = e3 * omega[2]
    merged[2, 2] = e3 * vbar

    neg = (omega < 0)[:, None]
    pos = (omega > 0)[:, None]
    mneg = np.where(neg, merged, 0.0)
    mpos = np.where(pos, merged, 0.0)
    minus_o = (mneg[0] + mneg[2]) + mneg[1]
    plus_o = (mpos[0] + mpos[2]) + mpos[1]

    use_wall = blocking | singular
    minus = np.where(use_wall, minus_w, minus_o)
    plus = np.where(use_wall, plus_w, plus_o)
    waves_lo = np.where(use_wall[None, None], wv_lo_w, merged)
    waves_up = np.where(use_wall[None, None], wv_up_w, merged)
    speeds_lo = np.where(use_wall[None], sp_lo_w, omega)
    speeds_up = np.where(use_wall[None], sp_up_w, omega)

    if scalar:
        minus, plus = minus[:, 0], plus[:, 0]
        waves_lo, waves_up = waves_lo[..., 0], waves_up[..., 0]
        speeds_lo, speeds_up = speeds_lo[:, 0], speeds_up[:, 0]
        use_wall = bool(use_wall[0])
    return RedistributedWaves(minus, plus, waves_lo, waves_up,
                              speeds_lo, speeds_up, use_wall)
