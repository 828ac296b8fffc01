# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
# distutils: language = c++
"""Compiled voxel kernels.

Mirror of ``fallback.py``; both backends must produce identical results,
so the arithmetic here follows the fallback expression for expression.
"""

from libc.math cimport atan2, fabs, floor, sqrt, INFINITY, M_PI
from libcpp.vector cimport vector

import numpy as np

cimport numpy as cnp

cnp.import_array()

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

cdef int C_UNKNOWN = 0
cdef int C_FREE = 1
cdef int C_OCCUPIED = 2


cdef inline int _start_cell(double x, int n) nogil:
    cdef int i = <int>floor(x)
    if i < 0:
        i = 0
    elif i >= n:
        i = n - 1
    return i


cdef int _walk(double x0, double y0, double z0,
               double x1, double y1, double z1,
               int nx, int ny, int nz,
               vector[int]& out) nogil:
    """Append walked cells as flattened triples; returns cell count."""
    cdef int ci = _start_cell(x0, nx)
    cdef int cj = _start_cell(y0, ny)
    cdef int ck = _start_cell(z0, nz)
    cdef double dx = x1 - x0
    cdef double dy = y1 - y0
    cdef double dz = z1 - z0

    cdef int count = 1
    out.push_back(ci)
    out.push_back(cj)
    out.push_back(ck)

    cdef int step_x = 0, step_y = 0, step_z = 0
    cdef double tmax_x = INFINITY, tmax_y = INFINITY, tmax_z = INFINITY
    cdef double tdel_x = INFINITY, tdel_y = INFINITY, tdel_z = INFINITY

    if dx > 0.0:
        step_x = 1
        tmax_x = (ci + 1.0 - x0) / dx
        tdel_x = 1.0 / dx
    elif dx < 0.0:
        step_x = -1
        tmax_x = (ci - x0) / dx
        tdel_x = -1.0 / dx
    if dy > 0.0:
        step_y = 1
        tmax_y = (cj + 1.0 - y0) / dy
        tdel_y = 1.0 / dy
    elif dy < 0.0:
        step_y = -1
        tmax_y = (cj - y0) / dy
        tdel_y = -1.0 / dy
    if dz > 0.0:
        step_z = 1
        tmax_z = (ck + 1.0 - z0) / dz
        tdel_z = 1.0 / dz
    elif dz < 0.0:
        step_z = -1
        tmax_z = (ck - z0) / dz
        tdel_z = -1.0 / dz

    cdef int ax
    while True:
        ax = 0
        if tmax_y < tmax_x:
            ax = 1
        if ax == 0:
            if tmax_z < tmax_x:
                ax = 2
        else:
            if tmax_z < tmax_y:
                ax = 2
        if ax == 0:
            if tmax_x >= 1.0:
                break
            ci += step_x
            if ci < 0 or ci >= nx:
                break
            tmax_x += tdel_x
        elif ax == 1:
            if tmax_y >= 1.0:
                break
            cj += step_y
            if cj < 0 or cj >= ny:
                break
            tmax_y += tdel_y
        else:
            if tmax_z >= 1.0:
                break
            ck += step_z
            if ck < 0 or ck >= nz:
                break
            tmax_z += tdel_z
        out.push_back(ci)
        out.push_back(cj)
        out.push_back(ck)
        count += 1
    return count


def walk_cells(double x0, double y0, double z0,
               double x1, double y1, double z1,
               int nx, int ny, int nz):
    cdef vector[int] buf
    cdef int n = _walk(x0, y0, z0, x1, y1, z1, nx, ny, nz, buf)
    out = np.empty((n, 3), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] view = out
    cdef int q
    for q in range(n):
        view[q, 0] = buf[3 * q]
        view[q, 1] = buf[3 * q + 1]
        view[q, 2] = buf[3 * q + 2]
    return out


def integrate_rays(cnp.uint8_t[:, :, ::1] states,
                   double ox, double oy, double oz,
                   cnp.float64_t[:, ::1] dirs,
                   cnp.float64_t[::1] t_end,
                   cnp.uint8_t[::1] hit):
    cdef int nx = states.shape[0]
    cdef int ny = states.shape[1]
    cdef int nz = states.shape[2]
    stamp_arr = np.zeros((nx, ny, nz), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] stamp = stamp_arr
    cdef vector[int] touched
    cdef vector[int] buf
    cdef int n = dirs.shape[0]
    cdef int r, m, q, last_free, i, j, k
    cdef double ex, ey, ez

    with nogil:
        for r in range(n):
            ex = ox + dirs[r, 0] * t_end[r]
            ey = oy + dirs[r, 1] * t_end[r]
            ez = oz + dirs[r, 2] * t_end[r]
            buf.clear()
            m = _walk(ox, oy, oz, ex, ey, ez, nx, ny, nz, buf)
            if m <= 1:
                if hit[r] and m == 1:
                    i = buf[0]
                    j = buf[1]
                    k = buf[2]
                    if stamp[i, j, k] == 0:
                        touched.push_back(i)
                        touched.push_back(j)
                        touched.push_back(k)
                    stamp[i, j, k] = C_OCCUPIED
                continue
            last_free = m - 1 if hit[r] else m
            for q in range(1, last_free):
                i = buf[3 * q]
                j = buf[3 * q + 1]
                k = buf[3 * q + 2]
                if stamp[i, j, k] == 0:
                    stamp[i, j, k] = C_FREE
                    touched.push_back(i)
                    touched.push_back(j)
                    touched.push_back(k)
            if hit[r]:
                i = buf[3 * (m - 1)]
                j = buf[3 * (m - 1) + 1]
                k = buf[3 * (m - 1) + 2]
                if stamp[i, j, k] == 0:
                    touched.push_back(i)
                    touched.push_back(j)
                    touched.push_back(k)
                stamp[i, j, k] = C_OCCUPIED

    cdef int n_touched = <int>(touched.size() // 3)
    cells_out = np.empty((n_touched, 3), dtype=np.int32)
    old_out = np.empty(n_touched, dtype=np.uint8)
    new_out = np.empty(n_touched, dtype=np.uint8)
    cdef cnp.int32_t[:, ::1] cv = cells_out
    cdef cnp.uint8_t[::1] ov = old_out
    cdef cnp.uint8_t[::1] nv = new_out
    cdef int n_changed = 0
    cdef cnp.uint8_t new_st, old_st
    for q in range(n_touched):
        i = touched[3 * q]
        j = touched[3 * q + 1]
        k = touched[3 * q + 2]
        new_st = stamp[i, j, k]
        old_st = states[i, j, k]
        if old_st != new_st:
            states[i, j, k] = new_st
            cv[n_changed, 0] = i
            cv[n_changed, 1] = j
            cv[n_changed, 2] = k
            ov[n_changed] = old_st
            nv[n_changed] = new_st
            n_changed += 1
    return (
        cells_out[:n_changed].copy(),
        old_out[:n_changed].copy(),
        new_out[:n_changed].copy(),
    )


cdef int _segment_blocked(cnp.uint8_t[:, :, ::1] states,
                          double x0, double y0, double z0,
                          double x1, double y1, double z1) nogil:
    cdef vector[int] buf
    cdef int m = _walk(x0, y0, z0, x1, y1, z1,
                       states.shape[0], states.shape[1], states.shape[2], buf)
    cdef int q
    for q in range(1, m - 1):
        if states[buf[3 * q], buf[3 * q + 1], buf[3 * q + 2]] == C_OCCUPIED:
            return 1
    return 0


def segment_blocked(cnp.uint8_t[:, :, ::1] states,
                    double x0, double y0, double z0,
                    double x1, double y1, double z1):
    return _segment_blocked(states, x0, y0, z0, x1, y1, z1)


cdef inline double _wrap_pi(double a) nogil:
    return a - 2.0 * M_PI * floor((a + M_PI) / (2.0 * M_PI))


def visible_filter(cnp.uint8_t[:, :, ::1] states,
                   double ox, double oy, double oz,
                   double yaw, double pitch,
                   double half_h, double half_v, double range_vox,
                   cnp.int32_t[:, ::1] targets):
    cdef int n = targets.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] ov = out
    cdef int q
    cdef double tx, ty, tz, dx, dy, dz, dist, dh, dv
    with nogil:
        for q in range(n):
            tx = targets[q, 0] + 0.5
            ty = targets[q, 1] + 0.5
            tz = targets[q, 2] + 0.5
            dx = tx - ox
            dy = ty - oy
            dz = tz - oz
            dist = sqrt(dx * dx + dy * dy + dz * dz)
            if dist > range_vox:
                continue
            if dist > 1e-12:
                dh = _wrap_pi(atan2(dy, dx) - yaw)
                if fabs(dh) > half_h:
                    continue
                dv = atan2(dz, sqrt(dx * dx + dy * dy)) - pitch
                if fabs(dv) > half_v:
                    continue
            if not _segment_blocked(states, ox, oy, oz, tx, ty, tz):
                ov[q] = 1
    return out


def box_state(cnp.uint8_t[:, :, ::1] states,
              double ax_, double ay, double az,
              double bx, double by, double bz,
              double half_w):
    cdef int nx = states.shape[0]
    cdef int ny = states.shape[1]
    cdef int nz = states.shape[2]
    cdef double dx = bx - ax_
    cdef double dy = by - ay
    cdef double dz = bz - az
    cdef double length = sqrt(dx * dx + dy * dy + dz * dz)
    cdef double diag = 1.7320508075688772

    cdef int lo_x = <int>floor(min(ax_, bx) - half_w * diag)
    cdef int hi_x = <int>floor(max(ax_, bx) + half_w * diag)
    cdef int lo_y = <int>floor(min(ay, by) - half_w * diag)
    cdef int hi_y = <int>floor(max(ay, by) + half_w * diag)
    cdef int lo_z = <int>floor(min(az, bz) - half_w * diag)
    cdef int hi_z = <int>floor(max(az, bz) + half_w * diag)
    if lo_x < 0: lo_x = 0
    if lo_y < 0: lo_y = 0
    if lo_z < 0: lo_z = 0
    if hi_x > nx - 1: hi_x = nx - 1
    if hi_y > ny - 1: hi_y = ny - 1
    if hi_z > nz - 1: hi_z = nz - 1

    cdef bint degenerate = length < 1e-12
    cdef double ux = 0.0, uy = 0.0, uz = 0.0
    cdef double vx = 0.0, vy = 0.0, vz = 0.0
    cdef double wx = 0.0, wy = 0.0, wz = 0.0
    cdef double norm
    if not degenerate:
        ux = dx / length
        uy = dy / length
        uz = dz / length
        if fabs(uz) < 0.9:
            vx = uy
            vy = -ux
            vz = 0.0
        else:
            vx = 0.0
            vy = uz
            vz = -uy
        norm = sqrt(vx * vx + vy * vy + vz * vz)
        vx /= norm
        vy /= norm
        vz /= norm
        wx = uy * vz - uz * vy
        wy = uz * vx - ux * vz
        wz = ux * vy - uy * vx

    cdef vector[int] unk
    cdef bint has_occ = False
    cdef int i, j, k
    cdef double cx, cy, cz, s
    cdef cnp.uint8_t st
    with nogil:
        for i in range(lo_x, hi_x + 1):
            cx = i + 0.5 - ax_
            for j in range(lo_y, hi_y + 1):
                cy = j + 0.5 - ay
                for k in range(lo_z, hi_z + 1):
                    cz = k + 0.5 - az
                    if degenerate:
                        if fabs(cx) > half_w or fabs(cy) > half_w or fabs(cz) > half_w:
                            continue
                    else:
                        s = cx * ux + cy * uy + cz * uz
                        if s < 0.0 or s > length:
                            continue
                        if fabs(cx * vx + cy * vy + cz * vz) > half_w:
                            continue
                        if fabs(cx * wx + cy * wy + cz * wz) > half_w:
                            continue
                    st = states[i, j, k]
                    if st == C_OCCUPIED:
                        has_occ = True
                    elif st == C_UNKNOWN:
                        unk.push_back(i)
                        unk.push_back(j)
                        unk.push_back(k)

    if has_occ:
        return 2, np.empty((0, 3), dtype=np.int32)
    cdef int m = <int>(unk.size() // 3)
    if m == 0:
        return 0, np.empty((0, 3), dtype=np.int32)
    out = np.empty((m, 3), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] uv = out
    cdef int q
    for q in range(m):
        uv[q, 0] = unk[3 * q]
        uv[q, 1] = unk[3 * q + 1]
        uv[q, 2] = unk[3 * q + 2]
    return 1, out


def sphere_state(cnp.uint8_t[:, :, ::1] states,
                 double cx, double cy, double cz, double radius):
    cdef int nx = states.shape[0]
    cdef int ny = states.shape[1]
    cdef int nz = states.shape[2]
    cdef int lo_x = <int>floor(cx - radius)
    cdef int hi_x = <int>floor(cx + radius)
    cdef int lo_y = <int>floor(cy - radius)
    cdef int hi_y = <int>floor(cy + radius)
    cdef int lo_z = <int>floor(cz - radius)
    cdef int hi_z = <int>floor(cz + radius)
    if lo_x < 0: lo_x = 0
    if lo_y < 0: lo_y = 0
    if lo_z < 0: lo_z = 0
    if hi_x > nx - 1: hi_x = nx - 1
    if hi_y > ny - 1: hi_y = ny - 1
    if hi_z > nz - 1: hi_z = nz - 1
    cdef double r2 = radius * radius
    cdef bint has_unk = False
    cdef bint has_occ = False
    cdef int i, j, k
    cdef double dx, dy, dz
    cdef cnp.uint8_t st
    with nogil:
        for i in range(lo_x, hi_x + 1):
            if has_occ:
                break
            dx = i + 0.5 - cx
            for j in range(lo_y, hi_y + 1):
                if has_occ:
                    break
                dy = j + 0.5 - cy
                for k in range(lo_z, hi_z + 1):
                    dz = k + 0.5 - cz
                    if dx * dx + dy * dy + dz * dz > r2:
                        continue
                    st = states[i, j, k]
                    if st == C_OCCUPIED:
                        has_occ = True
                        break
                    if st == C_UNKNOWN:
                        has_unk = True
    if has_occ:
        return 2
    return 1 if has_unk else 0


def ray_box_hits(double ox, double oy, double oz,
                 cnp.float64_t[:, ::1] dirs,
                 cnp.float64_t[:, ::1] boxes,
                 double max_range):
    cdef int n = dirs.shape[0]
    cdef int nb = boxes.shape[0]
    best_arr = np.full(n, np.inf, dtype=np.float64)
    cdef cnp.float64_t[::1] best = best_arr
    cdef int r, b, ax
    cdef double t0, t1, d, o, mn, mx, ta, tb, lo, hi
    cdef bint ok
    cdef double origin[3]
    origin[0] = ox
    origin[1] = oy
    origin[2] = oz
    with nogil:
        for r in range(n):
            for b in range(nb):
                t0 = -INFINITY
                t1 = INFINITY
                ok = True
                for ax in range(3):
                    d = dirs[r, ax]
                    o = origin[ax]
                    mn = boxes[b, ax]
                    mx = boxes[b, 3 + ax]
                    if d == 0.0:
                        if not (mn <= o and o <= mx):
                            ok = False
                            break
                        continue
                    ta = (mn - o) / d
                    tb = (mx - o) / d
                    if ta < tb:
                        lo = ta
                        hi = tb
                    else:
                        lo = tb
                        hi = ta
                    if lo > t0:
                        t0 = lo
                    if hi < t1:
                        t1 = hi
                if ok and t1 >= t0 and t0 >= 0.0 and t0 < best[r]:
                    best[r] = t0
    hit = (best_arr <= max_range).astype(np.uint8)
    dist = np.where(hit.astype(bool), best_arr, max_range)
    return dist, hit
