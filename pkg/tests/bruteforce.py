"""Independent reference implementations used as test oracles.

Deliberately unoptimized and structured differently from the library: plain
point-in-box membership, explicit cone angles via arccos, linear stepping for
the push search, and no spatial indexing. Tests compare library output
against these.
"""

from __future__ import annotations

import math

import numpy as np


def hand_boxes(pose_r, pose_t, hand, aperture=None):
    """(lo, hi, rotation, translation) local bounds of fingers and base."""
    a = hand.max_aperture if aperture is None else aperture
    t, hh, l, b = hand.finger_thickness, hand.hand_height, hand.finger_length, hand.base_depth
    boxes = [
        (np.array([a / 2, -hh / 2, -l / 2]), np.array([a / 2 + t, hh / 2, l / 2])),
        (np.array([-a / 2 - t, -hh / 2, -l / 2]), np.array([-a / 2, hh / 2, l / 2])),
        (np.array([-a / 2 - t, -hh / 2, -l / 2 - b]), np.array([a / 2 + t, hh / 2, -l / 2])),
    ]
    return boxes


def to_hand(points, pose_r, pose_t):
    return (np.atleast_2d(points) - pose_t) @ pose_r


def bf_in_collision(points, pose_r, pose_t, hand, aperture=None) -> bool:
    local = to_hand(points, pose_r, pose_t)
    for lo, hi in hand_boxes(pose_r, pose_t, hand, aperture):
        inside = ((local > lo) & (local < hi)).all(axis=1)
        if inside.any():
            return True
    return False


def bf_region_mask(points, pose_r, pose_t, hand, aperture=None):
    a = hand.max_aperture if aperture is None else aperture
    local = to_hand(points, pose_r, pose_t)
    lo = np.array([-a / 2, -hand.hand_height / 2, -hand.finger_length / 2])
    hi = -lo
    return ((local >= lo) & (local <= hi)).all(axis=1)


def bf_antipodal(points, normals, pose_r, pose_t, hand, mu, contact_d) -> bool:
    mask = bf_region_mask(points, pose_r, pose_t, hand)
    if not mask.any():
        return False
    local = to_hand(points, pose_r, pose_t)[mask]
    local_n = np.atleast_2d(normals)[mask] @ pose_r
    x = local[:, 0]
    half_angle = math.atan(mu)
    hi_band = x >= x.max() - contact_d
    lo_band = x <= x.min() + contact_d
    cos_to_plus = np.clip(local_n[:, 0], -1.0, 1.0)
    angles_plus = np.arccos(cos_to_plus)
    angles_minus = np.arccos(-cos_to_plus)
    return bool(
        (angles_plus[hi_band] <= half_angle).any()
        and (angles_minus[lo_band] <= half_angle).any()
    )


def bf_grasp_label(points, normals, pose_r, pose_t, hand, mu, contact_d) -> bool:
    if bf_in_collision(points, pose_r, pose_t, hand):
        return False
    return bf_antipodal(points, normals, pose_r, pose_t, hand, mu, contact_d)


def bf_push_forward(points, pose_r, pose_t, hand, step):
    """Literal stepping search; returns the world-frame pose or None."""
    local = to_hand(points, pose_r, pose_t)
    a2 = hand.max_aperture / 2
    h2 = hand.hand_height / 2
    l2 = hand.finger_length / 2
    lat = (np.abs(local[:, 0]) <= a2) & (np.abs(local[:, 1]) <= h2)
    if not lat.any():
        return None
    start = local[lat, 2].min() - l2 - step
    travel = hand.finger_length + hand.base_depth
    approach = pose_r[:, 2]
    best = None
    k = 1
    while k * step <= travel + 1e-12:
        off = start + k * step
        t_k = pose_t + off * approach
        if bf_in_collision(points, pose_r, t_k, hand):
            break
        if bf_region_mask(points, pose_r, t_k, hand).any():
            best = off
        k += 1
    if best is None:
        return None
    return pose_t + best * approach


def bf_heightmap(points, center, cube, res, col_axis, row_axis, h_axis):
    """Max-binning by exhaustive per-cell scan."""
    n = max(1, int(np.ceil(cube / res - 1e-9)))
    origin = np.asarray(center) - cube / 2
    grid = np.zeros((n, n))
    for p in np.atleast_2d(points):
        if np.abs(p - center).max() > cube / 2:
            continue
        col = min(n - 1, int((p[col_axis] - origin[col_axis]) / res))
        row = min(n - 1, int((p[row_axis] - origin[row_axis]) / res))
        h = ((center[h_axis] + cube / 2) - p[h_axis]) / cube
        grid[row, col] = max(grid[row, col], h)
    return grid


def fd_gradient(f, x, eps=1e-6):
    """Central finite differences of scalar f at array x."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = f()
        flat[i] = old - eps
        lo = f()
        flat[i] = old
        gf[i] = (hi - lo) / (2 * eps)
    return g


def rel_err(a, b, floor=1e-8) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.abs(a) + np.abs(b), floor)
    return float((np.abs(a - b) / denom).max())
