"""Pure numpy implementations of the hot kernels.

These are the reference semantics; `_native` (Cython) mirrors them exactly,
including predicate strictness and float arithmetic (no FMA contraction), so
both backends agree on oracle labels. Selected at import by
:mod:`graspfind._kernels` when the compiled module is unavailable or when
``GRASPFIND_BACKEND=python``.

Conventions shared by every pose kernel:

* hand frame: x = closing axis, y = hand-height axis, z = approach axis,
  origin at the closing-region centroid;
* closing region (between the fingers): |x| <= A/2, |y| <= H/2, |z| <= L/2
  (closed bounds);
* finger boxes: A/2 < |x| < A/2 + T, |y| < H/2, |z| < L/2 (strict: a point
  exactly on a box face does not collide);
* base box: |x| < A/2 + T, |y| < H/2, -L/2 - B < z < -L/2 (strict);

with A = max aperture, T = finger thickness, H = hand height, L = finger
length, B = base depth.
"""

from __future__ import annotations

import math

import numpy as np

NO_HIT = np.inf


def _hand_coords(points: np.ndarray, rotation: np.ndarray, translation: np.ndarray):
    d = points - translation[None, :]
    local = d @ rotation
    return local[:, 0], local[:, 1], local[:, 2]


# ---------------------------------------------------------------------------
# raycasting


def raycast_cam(verts_cam, tris, fx, fy, cx, cy, width, height):
    """Per-pixel nearest ray-triangle hit depth for a pinhole camera.

    Vertices are in the camera frame (camera at the origin, optical axis +z).
    The ray for pixel (row v, col u) is ((u+0.5-cx)/fx, (v+0.5-cy)/fy, 1), so
    the returned hit parameter equals the camera-frame z depth. Misses hold
    +inf. Triangles are rasterized over the pixel bounding box of their
    projection, which contains every pixel whose ray can hit them; ties on
    depth keep the lowest triangle index in both backends.
    """
    depth = np.full((height, width), NO_HIT, dtype=np.float64)
    if not len(tris):
        return depth
    v0 = verts_cam[tris[:, 0]]
    v1 = verts_cam[tris[:, 1]]
    v2 = verts_cam[tris[:, 2]]
    for i in range(len(tris)):
        a, b, c = v0[i], v1[i], v2[i]
        zs = np.array([a[2], b[2], c[2]])
        if (zs <= 1e-9).any():
            u_lo, u_hi, v_lo, v_hi = 0, width - 1, 0, height - 1
        else:
            us = np.array([a[0], b[0], c[0]]) / zs * fx + cx - 0.5
            vs = np.array([a[1], b[1], c[1]]) / zs * fy + cy - 0.5
            u_lo = max(0, int(math.floor(us.min())) - 1)
            u_hi = min(width - 1, int(math.ceil(us.max())) + 1)
            v_lo = max(0, int(math.floor(vs.min())) - 1)
            v_hi = min(height - 1, int(math.ceil(vs.max())) + 1)
            if u_lo > u_hi or v_lo > v_hi:
                continue
        uu, vv = np.meshgrid(np.arange(u_lo, u_hi + 1), np.arange(v_lo, v_hi + 1))
        dirs = np.stack(
            [(uu + 0.5 - cx) / fx, (vv + 0.5 - cy) / fy, np.ones_like(uu, dtype=np.float64)],
            axis=-1,
        )
        e1 = b - a
        e2 = c - a
        pvec = np.cross(dirs, e2)
        det = pvec @ e1
        ok = np.abs(det) > 1e-14
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = -a
        u_bar = (pvec @ tvec) * inv
        qvec = np.cross(tvec, e1)
        v_bar = (dirs @ qvec) * inv
        t_hit = (e2 @ qvec) * inv
        ok &= (u_bar >= 0.0) & (u_bar <= 1.0) & (v_bar >= 0.0) & (u_bar + v_bar <= 1.0)
        ok &= t_hit > 1e-9
        window = depth[v_lo:v_hi + 1, u_lo:u_hi + 1]
        np.copyto(window, t_hit, where=ok & (t_hit < window))
    return depth


# ---------------------------------------------------------------------------
# pose evaluation

# eval_pose status codes
EMPTY = 0
COLLISION = 1
NOT_ANTIPODAL = 2
POSITIVE = 3


def eval_pose(surf_pts, surf_nrm, rotation, translation, a2, t_fing, h2, l2, base, cos_phi, contact_d):
    """Oracle status of one hand pose against a dense surface.

    Returns EMPTY (no point in the closing region), COLLISION (a point
    strictly inside a finger or base box), NOT_ANTIPODAL, or POSITIVE.
    The antipodal test closes the fingers onto the points between them:
    contact bands are within `contact_d` of the extreme closing-axis
    coordinates, and each band must contain a normal inside the friction
    cone of its finger (n.x >= cos_phi toward +x, -n.x >= cos_phi toward -x).
    """
    x, y, z = _hand_coords(surf_pts, rotation, translation)
    ax, ay, az = np.abs(x), np.abs(y), np.abs(z)
    finger = (ax > a2) & (ax < a2 + t_fing) & (ay < h2) & (az < l2)
    if finger.any():
        return COLLISION
    base_box = (ax < a2 + t_fing) & (ay < h2) & (z > -l2 - base) & (z < -l2)
    if base_box.any():
        return COLLISION
    region = (ax <= a2) & (ay <= h2) & (az <= l2)
    if not region.any():
        return EMPTY
    xr = x[region]
    nx = (surf_nrm @ rotation[:, 0])[region]
    x_max = xr.max()
    x_min = xr.min()
    hi_ok = (nx[xr >= x_max - contact_d] >= cos_phi).any()
    lo_ok = (-nx[xr <= x_min + contact_d] >= cos_phi).any()
    return POSITIVE if (hi_ok and lo_ok) else NOT_ANTIPODAL


def collision_only(pts, rotation, translation, a2, t_fing, h2, l2, base) -> bool:
    x, y, z = _hand_coords(pts, rotation, translation)
    ax, ay, az = np.abs(x), np.abs(y), np.abs(z)
    if ((ax > a2) & (ax < a2 + t_fing) & (ay < h2) & (az < l2)).any():
        return True
    return bool(((ax < a2 + t_fing) & (ay < h2) & (z > -l2 - base) & (z < -l2)).any())


def _walk_forward(z_region, z_finger, z_base, l2, base, step):
    """Literal stepping search shared by push_offset and label_orientation.

    Inputs are the approach-axis coordinates (relative to the start pose) of
    the points in each lateral footprint. Steps advance from the retracted
    start until the first collision or the travel budget; returns the deepest
    visited offset whose closing region held a point, else NaN.
    """
    if not len(z_region):
        return math.nan
    z_region = np.sort(z_region)
    z_finger = np.sort(z_finger)
    z_base = np.sort(z_base)
    t0 = z_region[0] - l2 - step
    travel_k = int(math.floor((2.0 * l2 + base) / step + 1e-6))
    if travel_k < 1:
        return math.nan
    offs = t0 + step * np.arange(1, travel_k + 1)

    def any_open(arr, lo, hi):
        idx = np.searchsorted(arr, lo, side="right")
        valid = idx < len(arr)
        vals = arr[np.minimum(idx, len(arr) - 1)]
        return valid & (vals < hi)

    def any_closed(arr, lo, hi):
        idx = np.searchsorted(arr, lo, side="left")
        valid = idx < len(arr)
        vals = arr[np.minimum(idx, len(arr) - 1)]
        return valid & (vals <= hi)

    collide = any_open(z_finger, offs - l2, offs + l2)
    collide |= any_open(z_base, offs - l2 - base, offs - l2)
    contact = any_closed(z_region, offs - l2, offs + l2)
    hits = np.nonzero(collide)[0]
    last = hits[0] if len(hits) else travel_k  # steps strictly before the collision
    good = np.nonzero(contact[:last])[0]
    if not len(good):
        return math.nan
    return float(offs[good[-1]])


def push_offset(cloud_pts, rotation, translation, a2, t_fing, h2, l2, base, step):
    """Approach-axis offset of the push-forward pose, or NaN if none exists.

    Starting retracted so the closing region is empty, the hand advances in
    `step` increments; the result is the deepest offset visited before the
    first collision (or the travel budget of finger_length + base_depth)
    whose closing region contains at least one point. Requires
    step < min(finger_length, base_depth) so no contact interval is skipped.
    """
    if not (step > 0.0):
        raise ValueError("step must be positive")
    if step >= min(2.0 * l2, base):
        raise ValueError("step must be below finger_length and base_depth")
    x, y, z = _hand_coords(cloud_pts, rotation, translation)
    ax, ay = np.abs(x), np.abs(y)
    lat_region = (ax <= a2) & (ay <= h2)
    if not lat_region.any():
        return math.nan
    lat_finger = (ax > a2) & (ax < a2 + t_fing) & (ay < h2)
    lat_base = (ax < a2 + t_fing) & (ay < h2)
    return _walk_forward(z[lat_region], z[lat_finger], z[lat_base], l2, base, step)


def label_orientation(
    surf_x, surf_y, surf_z, surf_nx,
    cloud_x, cloud_y, cloud_z,
    samples, out_bits, out_off,
    a2, t_fing, h2, l2, base, cos_phi, contact_d, step,
):
    """Fused per-orientation labeling for a batch of sample points.

    All coordinate arrays are in the rotated (grid-orientation) frame and
    sorted by their y value; `samples` is (S, 3) in the same frame. For each
    sample: push forward against the cloud, then evaluate collision and the
    antipodal condition against the surface at the pushed pose. Writes the
    label bit and the push offset (NaN when the push found no contact).
    """
    if step >= min(2.0 * l2, base):
        raise ValueError("step must be below finger_length and base_depth")
    for s in range(len(samples)):
        sx, sy, sz = samples[s]
        out_bits[s] = 0
        out_off[s] = math.nan

        # push phase against the observed cloud
        i0 = np.searchsorted(cloud_y, sy - h2, side="left")
        i1 = np.searchsorted(cloud_y, sy + h2, side="right")
        cx = cloud_x[i0:i1] - sx
        cz = cloud_z[i0:i1] - sz
        cay = np.abs(cloud_y[i0:i1] - sy)
        cax = np.abs(cx)
        lat_region = (cax <= a2) & (cay <= h2)
        if not lat_region.any():
            continue
        lat_finger = (cax > a2) & (cax < a2 + t_fing) & (cay < h2)
        lat_base = (cax < a2 + t_fing) & (cay < h2)
        off = _walk_forward(
            cz[lat_region], cz[lat_finger], cz[lat_base], l2, base, step
        )
        if math.isnan(off):
            continue
        out_off[s] = off

        # truth phase against the dense surface at the pushed pose
        j0 = np.searchsorted(surf_y, sy - h2, side="left")
        j1 = np.searchsorted(surf_y, sy + h2, side="right")
        gx = surf_x[j0:j1] - sx
        gz = surf_z[j0:j1] - sz - off
        gay = np.abs(surf_y[j0:j1] - sy)
        gax = np.abs(gx)
        gaz = np.abs(gz)
        if ((gax > a2) & (gax < a2 + t_fing) & (gay < h2) & (gaz < l2)).any():
            continue
        if ((gax < a2 + t_fing) & (gay < h2) & (gz > -l2 - base) & (gz < -l2)).any():
            continue
        region = (gax <= a2) & (gay <= h2) & (gaz <= l2)
        if not region.any():
            continue
        xr = gx[region]
        nr = surf_nx[j0:j1][region]
        hi_ok = (nr[xr >= xr.max() - contact_d] >= cos_phi).any()
        lo_ok = (-nr[xr <= xr.min() + contact_d] >= cos_phi).any()
        if hi_ok and lo_ok:
            out_bits[s] = 1


# ---------------------------------------------------------------------------
# convolution lowering (pure copies; both backends are bit-identical)


def im2col(xt: np.ndarray, k: int, out: np.ndarray) -> None:
    """Fill `out` (C*k*k, B*OH*OW) from `xt` (C, B, H, W) for valid stride-1 conv.

    `out` and `xt` may be non-contiguous views (the conv layer blocks over
    batch samples), so rows are assigned individually.
    """
    c, b, h, w = xt.shape
    oh, ow = h - k + 1, w - k + 1
    for ci in range(c):
        for i in range(k):
            for j in range(k):
                row = (ci * k + i) * k + j
                out[row] = xt[ci, :, i:i + oh, j:j + ow].reshape(-1)


def col2im(gcols: np.ndarray, k: int, gxt: np.ndarray) -> None:
    """Accumulate patch gradients (C*k*k, B*OH*OW) into `gxt` (C, B, H, W).

    Accumulation runs in (i, j) order per destination cell, matching the
    compiled kernel bit for bit.
    """
    c, b, h, w = gxt.shape
    oh, ow = h - k + 1, w - k + 1
    for i in range(k):
        for j in range(k):
            for ci in range(c):
                row = (ci * k + i) * k + j
                gxt[ci, :, i:i + oh, j:j + ow] += gcols[row].reshape(b, oh, ow)


# ---------------------------------------------------------------------------
# descriptor binning


def descriptor_fill(x, y, z, nx, ny, nz, a2, h2, l2, size):
    """4-channel grasp descriptor from closing-region points in the hand frame.

    Channel 0: max-binned height along the hand-height axis, normalized to
    [0, 1]; channels 1..3: per-cell mean surface normal, renormalized to unit
    length, mapped from [-1, 1] to [0, 1]. Rows follow the approach axis,
    columns the closing axis. Empty cells are 0 (height) and 0.5 (normals).
    """
    image = np.zeros((4, size, size), dtype=np.float64)
    image[1:] = 0.5
    if not len(x):
        return image
    col = np.minimum((size * (x + a2) / (2.0 * a2)).astype(np.int64), size - 1)
    row = np.minimum((size * (z + l2) / (2.0 * l2)).astype(np.int64), size - 1)
    col = np.maximum(col, 0)
    row = np.maximum(row, 0)
    height = (y + h2) / (2.0 * h2)
    np.maximum.at(image[0], (row, col), height)
    acc = np.zeros((3, size, size), dtype=np.float64)
    np.add.at(acc[0], (row, col), nx)
    np.add.at(acc[1], (row, col), ny)
    np.add.at(acc[2], (row, col), nz)
    norm = np.sqrt((acc * acc).sum(axis=0))
    filled = norm > 1e-12
    for ch in range(3):
        image[ch + 1][filled] = (acc[ch][filled] / norm[filled] + 1.0) / 2.0
    return image
