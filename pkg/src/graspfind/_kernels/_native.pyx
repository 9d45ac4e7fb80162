# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot kernels.

Mirrors :mod:`graspfind._kernels.pyfallback` exactly; see that module for the
semantics and the shared hand-frame conventions. Compiled with
-ffp-contract=off so float results match the fallback's plain mul/add
ordering.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN, ceil, fabs, floor, isnan, sqrt
from libc.stdlib cimport qsort
from libc.string cimport memcpy

cnp.import_array()

NO_HIT = np.inf

EMPTY = 0
COLLISION = 1
NOT_ANTIPODAL = 2
POSITIVE = 3

cdef double HUGE = INFINITY


cdef inline Py_ssize_t _lower_bound(const double[::1] arr, double value) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = arr.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] < value:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _upper_bound(const double[::1] arr, double value) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = arr.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] <= value:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef int _cmp_double(const void* a, const void* b) noexcept nogil:
    cdef double x = (<const double*> a)[0]
    cdef double y = (<const double*> b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


cdef inline int _any_open(const double* arr, Py_ssize_t n, double lo, double hi) noexcept nogil:
    # sorted arr: any value strictly inside (lo, hi)?
    cdef Py_ssize_t a = 0, b = n, mid
    while a < b:
        mid = (a + b) // 2
        if arr[mid] <= lo:
            a = mid + 1
        else:
            b = mid
    return a < n and arr[a] < hi


cdef inline int _any_closed(const double* arr, Py_ssize_t n, double lo, double hi) noexcept nogil:
    # sorted arr: any value inside [lo, hi]?
    cdef Py_ssize_t a = 0, b = n, mid
    while a < b:
        mid = (a + b) // 2
        if arr[mid] < lo:
            a = mid + 1
        else:
            b = mid
    return a < n and arr[a] <= hi


cdef double _walk_forward(double* z_region, Py_ssize_t n_region,
                          double* z_finger, Py_ssize_t n_finger,
                          double* z_base, Py_ssize_t n_base,
                          double l2, double base, double step) noexcept nogil:
    """Literal stepping: deepest pre-collision offset with closing contact."""
    cdef double t0, off, best
    cdef long travel_k, k
    cdef int found = 0
    if n_region == 0:
        return NAN
    qsort(z_region, n_region, sizeof(double), _cmp_double)
    qsort(z_finger, n_finger, sizeof(double), _cmp_double)
    qsort(z_base, n_base, sizeof(double), _cmp_double)
    t0 = z_region[0] - l2 - step
    travel_k = <long>floor((2.0 * l2 + base) / step + 1e-6)
    best = NAN
    for k in range(1, travel_k + 1):
        off = t0 + k * step
        if _any_open(z_finger, n_finger, off - l2, off + l2):
            break
        if _any_open(z_base, n_base, off - l2 - base, off - l2):
            break
        if _any_closed(z_region, n_region, off - l2, off + l2):
            best = off
            found = 1
    return best if found else NAN


# ---------------------------------------------------------------------------
# raycasting


def raycast_cam(const double[:, ::1] verts_cam, const int[:, ::1] tris,
                double fx, double fy, double cx, double cy,
                Py_ssize_t width, Py_ssize_t height):
    depth_arr = np.full((height, width), NO_HIT, dtype=np.float64)
    cdef double[:, ::1] depth = depth_arr
    cdef Py_ssize_t n_tris = tris.shape[0]
    cdef Py_ssize_t i, u, v, u_lo, u_hi, v_lo, v_hi
    cdef double ax, ay, az, bx, by, bz, cx3, cy3, cz3
    cdef double e1x, e1y, e1z, e2x, e2y, e2z
    cdef double dx, dy, dz, px, py, pz, det, inv, ub, vb, th
    cdef double qx, qy, qz, tvx, tvy, tvz
    cdef double umin, umax, vmin, vmax, pu, pv
    cdef int behind
    cdef Py_ssize_t k

    for i in range(n_tris):
        ax = verts_cam[tris[i, 0], 0]; ay = verts_cam[tris[i, 0], 1]; az = verts_cam[tris[i, 0], 2]
        bx = verts_cam[tris[i, 1], 0]; by = verts_cam[tris[i, 1], 1]; bz = verts_cam[tris[i, 1], 2]
        cx3 = verts_cam[tris[i, 2], 0]; cy3 = verts_cam[tris[i, 2], 1]; cz3 = verts_cam[tris[i, 2], 2]

        behind = az <= 1e-9 or bz <= 1e-9 or cz3 <= 1e-9
        if behind:
            u_lo = 0; u_hi = width - 1; v_lo = 0; v_hi = height - 1
        else:
            umin = HUGE; umax = -HUGE; vmin = HUGE; vmax = -HUGE
            for k in range(3):
                pu = verts_cam[tris[i, k], 0] / verts_cam[tris[i, k], 2] * fx + cx - 0.5
                pv = verts_cam[tris[i, k], 1] / verts_cam[tris[i, k], 2] * fy + cy - 0.5
                if pu < umin: umin = pu
                if pu > umax: umax = pu
                if pv < vmin: vmin = pv
                if pv > vmax: vmax = pv
            u_lo = <Py_ssize_t>floor(umin) - 1
            u_hi = <Py_ssize_t>ceil(umax) + 1
            v_lo = <Py_ssize_t>floor(vmin) - 1
            v_hi = <Py_ssize_t>ceil(vmax) + 1
            if u_lo < 0: u_lo = 0
            if v_lo < 0: v_lo = 0
            if u_hi > width - 1: u_hi = width - 1
            if v_hi > height - 1: v_hi = height - 1
            if u_lo > u_hi or v_lo > v_hi:
                continue

        e1x = bx - ax; e1y = by - ay; e1z = bz - az
        e2x = cx3 - ax; e2y = cy3 - ay; e2z = cz3 - az
        tvx = -ax; tvy = -ay; tvz = -az

        for v in range(v_lo, v_hi + 1):
            dy = (v + 0.5 - cy) / fy
            for u in range(u_lo, u_hi + 1):
                dx = (u + 0.5 - cx) / fx
                dz = 1.0
                px = dy * e2z - dz * e2y
                py = dz * e2x - dx * e2z
                pz = dx * e2y - dy * e2x
                det = px * e1x + py * e1y + pz * e1z
                if fabs(det) <= 1e-14:
                    continue
                inv = 1.0 / det
                ub = (px * tvx + py * tvy + pz * tvz) * inv
                if ub < 0.0 or ub > 1.0:
                    continue
                qx = tvy * e1z - tvz * e1y
                qy = tvz * e1x - tvx * e1z
                qz = tvx * e1y - tvy * e1x
                vb = (dx * qx + dy * qy + dz * qz) * inv
                if vb < 0.0 or ub + vb > 1.0:
                    continue
                th = (e2x * qx + e2y * qy + e2z * qz) * inv
                if th <= 1e-9:
                    continue
                if th < depth[v, u]:
                    depth[v, u] = th
    return depth_arr


# ---------------------------------------------------------------------------
# pose evaluation


def eval_pose(const double[:, ::1] surf_pts, const double[:, ::1] surf_nrm,
              const double[:, ::1] rotation, const double[::1] translation,
              double a2, double t_fing, double h2, double l2, double base,
              double cos_phi, double contact_d):
    cdef Py_ssize_t n = surf_pts.shape[0]
    cdef double r00 = rotation[0, 0], r10 = rotation[1, 0], r20 = rotation[2, 0]
    cdef double r01 = rotation[0, 1], r11 = rotation[1, 1], r21 = rotation[2, 1]
    cdef double r02 = rotation[0, 2], r12 = rotation[1, 2], r22 = rotation[2, 2]
    cdef double tx = translation[0], ty = translation[1], tz = translation[2]
    cdef double dx, dy, dz, x, y, z, ax, ay, az, nx
    cdef double x_min = HUGE, x_max = -HUGE
    cdef int any_region = 0, hi_ok = 0, lo_ok = 0
    cdef Py_ssize_t i

    for i in range(n):
        dx = surf_pts[i, 0] - tx; dy = surf_pts[i, 1] - ty; dz = surf_pts[i, 2] - tz
        x = dx * r00 + dy * r10 + dz * r20
        y = dx * r01 + dy * r11 + dz * r21
        z = dx * r02 + dy * r12 + dz * r22
        ax = fabs(x); ay = fabs(y); az = fabs(z)
        if ax > a2 and ax < a2 + t_fing and ay < h2 and az < l2:
            return COLLISION
        if ax < a2 + t_fing and ay < h2 and z > -l2 - base and z < -l2:
            return COLLISION
        if ax <= a2 and ay <= h2 and az <= l2:
            any_region = 1
            if x < x_min: x_min = x
            if x > x_max: x_max = x
    if not any_region:
        return EMPTY
    for i in range(n):
        dx = surf_pts[i, 0] - tx; dy = surf_pts[i, 1] - ty; dz = surf_pts[i, 2] - tz
        x = dx * r00 + dy * r10 + dz * r20
        y = dx * r01 + dy * r11 + dz * r21
        z = dx * r02 + dy * r12 + dz * r22
        if fabs(x) <= a2 and fabs(y) <= h2 and fabs(z) <= l2:
            nx = surf_nrm[i, 0] * r00 + surf_nrm[i, 1] * r10 + surf_nrm[i, 2] * r20
            if x >= x_max - contact_d and nx >= cos_phi:
                hi_ok = 1
            if x <= x_min + contact_d and -nx >= cos_phi:
                lo_ok = 1
            if hi_ok and lo_ok:
                return POSITIVE
    return NOT_ANTIPODAL


def collision_only(const double[:, ::1] pts,
                   const double[:, ::1] rotation, const double[::1] translation,
                   double a2, double t_fing, double h2, double l2, double base):
    cdef Py_ssize_t n = pts.shape[0]
    cdef double r00 = rotation[0, 0], r10 = rotation[1, 0], r20 = rotation[2, 0]
    cdef double r01 = rotation[0, 1], r11 = rotation[1, 1], r21 = rotation[2, 1]
    cdef double r02 = rotation[0, 2], r12 = rotation[1, 2], r22 = rotation[2, 2]
    cdef double tx = translation[0], ty = translation[1], tz = translation[2]
    cdef double dx, dy, dz, x, y, z, ax, ay, az
    cdef Py_ssize_t i
    for i in range(n):
        dx = pts[i, 0] - tx; dy = pts[i, 1] - ty; dz = pts[i, 2] - tz
        x = dx * r00 + dy * r10 + dz * r20
        y = dx * r01 + dy * r11 + dz * r21
        z = dx * r02 + dy * r12 + dz * r22
        ax = fabs(x); ay = fabs(y); az = fabs(z)
        if ax > a2 and ax < a2 + t_fing and ay < h2 and az < l2:
            return True
        if ax < a2 + t_fing and ay < h2 and z > -l2 - base and z < -l2:
            return True
    return False


def push_offset(const double[:, ::1] cloud_pts,
                const double[:, ::1] rotation, const double[::1] translation,
                double a2, double t_fing, double h2, double l2, double base,
                double step):
    if not step > 0.0:
        raise ValueError("step must be positive")
    if step >= min(2.0 * l2, base):
        raise ValueError("step must be below finger_length and base_depth")
    cdef Py_ssize_t n = cloud_pts.shape[0]
    scratch_arr = np.empty(3 * n, dtype=np.float64)
    cdef double[::1] scratch = scratch_arr
    cdef double r00 = rotation[0, 0], r10 = rotation[1, 0], r20 = rotation[2, 0]
    cdef double r01 = rotation[0, 1], r11 = rotation[1, 1], r21 = rotation[2, 1]
    cdef double r02 = rotation[0, 2], r12 = rotation[1, 2], r22 = rotation[2, 2]
    cdef double tx = translation[0], ty = translation[1], tz = translation[2]
    cdef double dx, dy, dz, x, y, z, ax, ay
    cdef Py_ssize_t i, n_region = 0, n_finger = 0, n_base = 0
    cdef double* reg
    cdef double* fin
    cdef double* bas

    with nogil:
        reg = &scratch[0]
        fin = &scratch[n]
        bas = &scratch[2 * n]
        for i in range(n):
            dx = cloud_pts[i, 0] - tx; dy = cloud_pts[i, 1] - ty; dz = cloud_pts[i, 2] - tz
            x = dx * r00 + dy * r10 + dz * r20
            y = dx * r01 + dy * r11 + dz * r21
            z = dx * r02 + dy * r12 + dz * r22
            ax = fabs(x); ay = fabs(y)
            if ax <= a2 and ay <= h2:
                reg[n_region] = z
                n_region += 1
            if ax > a2 and ax < a2 + t_fing and ay < h2:
                fin[n_finger] = z
                n_finger += 1
            if ax < a2 + t_fing and ay < h2:
                bas[n_base] = z
                n_base += 1
    if n_region == 0:
        return NAN
    return _walk_forward(reg, n_region, fin, n_finger, bas, n_base, l2, base, step)


def label_orientation(
    const double[::1] surf_x, const double[::1] surf_y, const double[::1] surf_z,
    const double[::1] surf_nx,
    const double[::1] cloud_x, const double[::1] cloud_y, const double[::1] cloud_z,
    const double[:, ::1] samples,
    cnp.uint8_t[::1] out_bits, double[::1] out_off,
    double a2, double t_fing, double h2, double l2, double base,
    double cos_phi, double contact_d, double step,
):
    if step >= min(2.0 * l2, base):
        raise ValueError("step must be below finger_length and base_depth")
    cdef Py_ssize_t n_samples = samples.shape[0]
    cdef Py_ssize_t n_cloud = cloud_x.shape[0]
    scratch_arr = np.empty(max(1, 3 * n_cloud), dtype=np.float64)
    cdef double[::1] scratch = scratch_arr
    cdef double sx, sy, sz, x, y, z, ax, ay, az, nx
    cdef double off, x_min, x_max
    cdef Py_ssize_t s, i, i0, i1, j0, j1, n_region, n_finger, n_base
    cdef int collision, any_region, hi_ok, lo_ok
    cdef double* reg = &scratch[0]
    cdef double* fin
    cdef double* bas
    if n_cloud > 0:
        fin = &scratch[n_cloud]
        bas = &scratch[2 * n_cloud]
    else:
        fin = reg
        bas = reg

    for s in range(n_samples):
        sx = samples[s, 0]; sy = samples[s, 1]; sz = samples[s, 2]
        out_bits[s] = 0
        out_off[s] = NAN

        # push phase against the observed cloud
        i0 = _lower_bound(cloud_y, sy - h2)
        i1 = _upper_bound(cloud_y, sy + h2)
        n_region = 0
        n_finger = 0
        n_base = 0
        for i in range(i0, i1):
            x = cloud_x[i] - sx
            y = cloud_y[i] - sy
            z = cloud_z[i] - sz
            ax = fabs(x); ay = fabs(y)
            if ax <= a2 and ay <= h2:
                reg[n_region] = z
                n_region += 1
            if ax > a2 and ax < a2 + t_fing and ay < h2:
                fin[n_finger] = z
                n_finger += 1
            if ax < a2 + t_fing and ay < h2:
                bas[n_base] = z
                n_base += 1
        if n_region == 0:
            continue
        off = _walk_forward(reg, n_region, fin, n_finger, bas, n_base, l2, base, step)
        if isnan(off):
            continue
        out_off[s] = off

        # truth phase against the dense surface at the pushed pose
        j0 = _lower_bound(surf_y, sy - h2)
        j1 = _upper_bound(surf_y, sy + h2)
        collision = 0
        any_region = 0
        x_min = HUGE
        x_max = -HUGE
        for i in range(j0, j1):
            x = surf_x[i] - sx
            y = surf_y[i] - sy
            z = surf_z[i] - sz - off
            ax = fabs(x); ay = fabs(y); az = fabs(z)
            if ax > a2 and ax < a2 + t_fing and ay < h2 and az < l2:
                collision = 1
                break
            if ax < a2 + t_fing and ay < h2 and z > -l2 - base and z < -l2:
                collision = 1
                break
            if ax <= a2 and ay <= h2 and az <= l2:
                any_region = 1
                if x < x_min: x_min = x
                if x > x_max: x_max = x
        if collision or not any_region:
            continue
        hi_ok = 0
        lo_ok = 0
        for i in range(j0, j1):
            x = surf_x[i] - sx
            y = surf_y[i] - sy
            z = surf_z[i] - sz - off
            if fabs(x) <= a2 and fabs(y) <= h2 and fabs(z) <= l2:
                nx = surf_nx[i]
                if x >= x_max - contact_d and nx >= cos_phi:
                    hi_ok = 1
                if x <= x_min + contact_d and -nx >= cos_phi:
                    lo_ok = 1
                if hi_ok and lo_ok:
                    break
        if hi_ok and lo_ok:
            out_bits[s] = 1


# ---------------------------------------------------------------------------
# convolution lowering (pure copies; both backends are bit-identical)

ctypedef fused floating:
    float
    double


def im2col(const floating[:, :, :, ::1] xt, Py_ssize_t k, floating[:, ::1] out):
    cdef Py_ssize_t c = xt.shape[0], b = xt.shape[1], h = xt.shape[2], w = xt.shape[3]
    cdef Py_ssize_t oh = h - k + 1, ow = w - k + 1
    cdef Py_ssize_t ci, i, j, bi, r, row, base
    cdef size_t nbytes = ow * sizeof(floating)
    with nogil:
        for ci in range(c):
            for i in range(k):
                for j in range(k):
                    row = (ci * k + i) * k + j
                    for bi in range(b):
                        for r in range(oh):
                            base = (bi * oh + r) * ow
                            memcpy(&out[row, base], &xt[ci, bi, i + r, j], nbytes)


def col2im(const floating[:, ::1] gcols, Py_ssize_t k, floating[:, :, :, ::1] gxt):
    cdef Py_ssize_t c = gxt.shape[0], b = gxt.shape[1], h = gxt.shape[2], w = gxt.shape[3]
    cdef Py_ssize_t oh = h - k + 1, ow = w - k + 1
    cdef Py_ssize_t ci, i, j, bi, r, q, row, base
    with nogil:
        for i in range(k):
            for j in range(k):
                for ci in range(c):
                    row = (ci * k + i) * k + j
                    for bi in range(b):
                        for r in range(oh):
                            base = (bi * oh + r) * ow
                            for q in range(ow):
                                gxt[ci, bi, i + r, j + q] += gcols[row, base + q]


# ---------------------------------------------------------------------------
# descriptor binning


def descriptor_fill(const double[::1] x, const double[::1] y, const double[::1] z,
                    const double[::1] nx, const double[::1] ny, const double[::1] nz,
                    double a2, double h2, double l2, Py_ssize_t size):
    image_arr = np.zeros((4, size, size), dtype=np.float64)
    acc_arr = np.zeros((3, size, size), dtype=np.float64)
    cdef double[:, :, ::1] image = image_arr
    cdef double[:, :, ::1] acc = acc_arr
    cdef Py_ssize_t n = x.shape[0], i, row, col
    cdef double height, norm
    image_arr[1:] = 0.5
    if n == 0:
        return image_arr
    for i in range(n):
        col = <Py_ssize_t>(size * (x[i] + a2) / (2.0 * a2))
        row = <Py_ssize_t>(size * (z[i] + l2) / (2.0 * l2))
        if col < 0: col = 0
        if col > size - 1: col = size - 1
        if row < 0: row = 0
        if row > size - 1: row = size - 1
        height = (y[i] + h2) / (2.0 * h2)
        if height > image[0, row, col]:
            image[0, row, col] = height
        acc[0, row, col] += nx[i]
        acc[1, row, col] += ny[i]
        acc[2, row, col] += nz[i]
    for row in range(size):
        for col in range(size):
            norm = sqrt(acc[0, row, col] * acc[0, row, col]
                        + acc[1, row, col] * acc[1, row, col]
                        + acc[2, row, col] * acc[2, row, col])
            if norm > 1e-12:
                image[1, row, col] = (acc[0, row, col] / norm + 1.0) / 2.0
                image[2, row, col] = (acc[1, row, col] / norm + 1.0) / 2.0
                image[3, row, col] = (acc[2, row, col] / norm + 1.0) / 2.0
    return image_arr
