"""Pure-Python voxel kernels.

Reference implementation of the hot inner loops (grid ray walking, scan
integration, visibility filtering, volume collision checks). The compiled
extension in ``_native.pyx`` mirrors these semantics exactly; either backend
may be active at runtime, so any change here must be replicated there.

Coordinates are in grid units: the map point ``p_world`` maps to
``(p_world - origin) / resolution`` and cell ``(i, j, k)`` spans the unit
cube ``[i, i+1) x [j, j+1) x [k, k+1)``.
"""

from __future__ import annotations

import math

import numpy as np

UNKNOWN = 0
FREE = 1
OCCUPIED = 2


def _start_cell(x: float, n: int) -> int:
    i = int(math.floor(x))
    if i < 0:
        i = 0
    elif i >= n:
        i = n - 1
    return i


def walk_cells(x0, y0, z0, x1, y1, z1, nx, ny, nz):
    """Cells crossed by the segment, in path order.

    Starts at the cell containing the segment origin and steps across cell
    boundaries strictly before the segment end (a boundary exactly at the
    endpoint is not crossed). Ties on boundary planes step x before y
    before z. The walk stops at the grid border.
    """
    i = _start_cell(x0, nx)
    j = _start_cell(y0, ny)
    k = _start_cell(z0, nz)
    dx = x1 - x0
    dy = y1 - y0
    dz = z1 - z0

    cells = [(i, j, k)]

    step = [0, 0, 0]
    t_max = [math.inf, math.inf, math.inf]
    t_delta = [math.inf, math.inf, math.inf]
    pos = (x0, y0, z0)
    delta = (dx, dy, dz)
    cell = [i, j, k]
    dims = (nx, ny, nz)
    for ax in range(3):
        d = delta[ax]
        if d > 0.0:
            step[ax] = 1
            t_max[ax] = (cell[ax] + 1.0 - pos[ax]) / d
            t_delta[ax] = 1.0 / d
        elif d < 0.0:
            step[ax] = -1
            t_max[ax] = (cell[ax] - pos[ax]) / d
            t_delta[ax] = -1.0 / d

    while True:
        ax = 0
        if t_max[1] < t_max[ax]:
            ax = 1
        if t_max[2] < t_max[ax]:
            ax = 2
        if t_max[ax] >= 1.0:
            break
        cell[ax] += step[ax]
        if cell[ax] < 0 or cell[ax] >= dims[ax]:
            break
        t_max[ax] += t_delta[ax]
        cells.append((cell[0], cell[1], cell[2]))

    return np.array(cells, dtype=np.int32).reshape(-1, 3)


def integrate_rays(states, ox, oy, oz, dirs, t_end, hit):
    """Apply a batch of rays from one origin to the state grid.

    For a hit ray the last walked cell is the surface cell and every cell
    strictly between the origin cell and it is observed free; for a miss
    every walked cell past the origin cell is free. Occupied proposals win
    over free within the batch. Mutates ``states`` and returns the changed
    cells with their old and new values (unordered).
    """
    nx, ny, nz = states.shape
    stamp = np.zeros(states.shape, dtype=np.uint8)
    touched = []

    n = dirs.shape[0]
    for r in range(n):
        ex = ox + dirs[r, 0] * t_end[r]
        ey = oy + dirs[r, 1] * t_end[r]
        ez = oz + dirs[r, 2] * t_end[r]
        cells = walk_cells(ox, oy, oz, ex, ey, ez, nx, ny, nz)
        m = cells.shape[0]
        if m <= 1:
            if hit[r] and m == 1:
                c = (cells[0, 0], cells[0, 1], cells[0, 2])
                if stamp[c] == 0:
                    touched.append(c)
                stamp[c] = OCCUPIED
            continue
        last_free = m - 1 if hit[r] else m
        for q in range(1, last_free):
            c = (cells[q, 0], cells[q, 1], cells[q, 2])
            if stamp[c] == 0:
                stamp[c] = FREE
                touched.append(c)
        if hit[r]:
            c = (cells[m - 1, 0], cells[m - 1, 1], cells[m - 1, 2])
            if stamp[c] == 0:
                touched.append(c)
            stamp[c] = OCCUPIED

    changed = []
    old_vals = []
    new_vals = []
    for c in touched:
        new = stamp[c]
        old = states[c]
        if old != new:
            states[c] = new
            changed.append(c)
            old_vals.append(old)
            new_vals.append(new)

    cells_arr = np.array(changed, dtype=np.int32).reshape(-1, 3)
    return (
        cells_arr,
        np.array(old_vals, dtype=np.uint8),
        np.array(new_vals, dtype=np.uint8),
    )


def segment_blocked(states, x0, y0, z0, x1, y1, z1):
    """1 if an occupied cell lies strictly between the segment endpoints."""
    nx, ny, nz = states.shape
    cells = walk_cells(x0, y0, z0, x1, y1, z1, nx, ny, nz)
    for q in range(1, cells.shape[0] - 1):
        if states[cells[q, 0], cells[q, 1], cells[q, 2]] == OCCUPIED:
            return 1
    return 0


def _wrap_pi(a: float) -> float:
    return a - 2.0 * math.pi * math.floor((a + math.pi) / (2.0 * math.pi))


def visible_filter(states, ox, oy, oz, yaw, pitch, half_h, half_v, range_vox, targets):
    """Per-target visibility from a sensor pose.

    A target cell is visible when its center is within range, inside both
    angular apertures, and no occupied cell lies strictly between the
    origin and the target center. Unknown cells do not block.
    """
    n = targets.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    for q in range(n):
        tx = targets[q, 0] + 0.5
        ty = targets[q, 1] + 0.5
        tz = targets[q, 2] + 0.5
        dx = tx - ox
        dy = ty - oy
        dz = tz - oz
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        if dist > range_vox:
            continue
        if dist > 1e-12:
            dh = _wrap_pi(math.atan2(dy, dx) - yaw)
            if abs(dh) > half_h:
                continue
            dv = math.atan2(dz, math.sqrt(dx * dx + dy * dy)) - pitch
            if abs(dv) > half_v:
                continue
        if not segment_blocked(states, ox, oy, oz, tx, ty, tz):
            out[q] = 1
    return out


def _perp_axes(ux, uy, uz):
    # Deterministic lateral basis for a segment-aligned box.
    if abs(uz) < 0.9:
        vx = uy * 1.0 - uz * 0.0
        vy = uz * 0.0 - ux * 1.0
        vz = ux * 0.0 - uy * 0.0
    else:
        vx = uy * 0.0 - uz * 0.0
        vy = uz * 1.0 - ux * 0.0
        vz = ux * 0.0 - uy * 1.0
    norm = math.sqrt(vx * vx + vy * vy + vz * vz)
    vx /= norm
    vy /= norm
    vz /= norm
    wx = uy * vz - uz * vy
    wy = uz * vx - ux * vz
    wz = ux * vy - uy * vx
    return vx, vy, vz, wx, wy, wz


def box_state(states, ax, ay, az, bx, by, bz, half_w):
    """Collision state of the segment-aligned box between two points.

    Classifies all cells whose center lies inside the box: returns
    ``(2, empty)`` when any is occupied, ``(1, unknown_cells)`` when any is
    unknown, else ``(0, empty)``.
    """
    nx, ny, nz = states.shape
    dx = bx - ax
    dy = by - ay
    dz = bz - az
    length = math.sqrt(dx * dx + dy * dy + dz * dz)

    lo_x = max(int(math.floor(min(ax, bx) - half_w * 1.7320508075688772)), 0)
    hi_x = min(int(math.floor(max(ax, bx) + half_w * 1.7320508075688772)), nx - 1)
    lo_y = max(int(math.floor(min(ay, by) - half_w * 1.7320508075688772)), 0)
    hi_y = min(int(math.floor(max(ay, by) + half_w * 1.7320508075688772)), ny - 1)
    lo_z = max(int(math.floor(min(az, bz) - half_w * 1.7320508075688772)), 0)
    hi_z = min(int(math.floor(max(az, bz) + half_w * 1.7320508075688772)), nz - 1)

    degenerate = length < 1e-12
    if not degenerate:
        ux = dx / length
        uy = dy / length
        uz = dz / length
        vx, vy, vz, wx, wy, wz = _perp_axes(ux, uy, uz)

    unk = []
    has_occ = False
    for i in range(lo_x, hi_x + 1):
        cx = i + 0.5 - ax
        for j in range(lo_y, hi_y + 1):
            cy = j + 0.5 - ay
            for k in range(lo_z, hi_z + 1):
                cz = k + 0.5 - az
                if degenerate:
                    if abs(cx) > half_w or abs(cy) > half_w or abs(cz) > half_w:
                        continue
                else:
                    s = cx * ux + cy * uy + cz * uz
                    if s < 0.0 or s > length:
                        continue
                    if abs(cx * vx + cy * vy + cz * vz) > half_w:
                        continue
                    if abs(cx * wx + cy * wy + cz * wz) > half_w:
                        continue
                st = states[i, j, k]
                if st == OCCUPIED:
                    has_occ = True
                elif st == UNKNOWN:
                    unk.append((i, j, k))

    if has_occ:
        return 2, np.empty((0, 3), dtype=np.int32)
    if unk:
        return 1, np.array(unk, dtype=np.int32)
    return 0, np.empty((0, 3), dtype=np.int32)


def sphere_state(states, cx, cy, cz, radius):
    """Collision state of the ball around a point (2 occ, 1 unk, 0 free)."""
    nx, ny, nz = states.shape
    lo_x = max(int(math.floor(cx - radius)), 0)
    hi_x = min(int(math.floor(cx + radius)), nx - 1)
    lo_y = max(int(math.floor(cy - radius)), 0)
    hi_y = min(int(math.floor(cy + radius)), ny - 1)
    lo_z = max(int(math.floor(cz - radius)), 0)
    hi_z = min(int(math.floor(cz + radius)), nz - 1)
    r2 = radius * radius
    has_unk = False
    for i in range(lo_x, hi_x + 1):
        dx = i + 0.5 - cx
        for j in range(lo_y, hi_y + 1):
            dy = j + 0.5 - cy
            for k in range(lo_z, hi_z + 1):
                dz = k + 0.5 - cz
                if dx * dx + dy * dy + dz * dz > r2:
                    continue
                st = states[i, j, k]
                if st == OCCUPIED:
                    return 2
                if st == UNKNOWN:
                    has_unk = True
    return 1 if has_unk else 0


def ray_box_hits(ox, oy, oz, dirs, boxes, max_range):
    """First intersection distance of each ray with a set of AABBs.

    World units. Returns per-ray distances (clipped to hits only) and a hit
    flag; rays that meet no box within ``max_range`` are misses.
    """
    n = dirs.shape[0]
    best = np.full(n, math.inf, dtype=np.float64)
    origin = (ox, oy, oz)
    for b in range(boxes.shape[0]):
        t0 = np.full(n, -math.inf)
        t1 = np.full(n, math.inf)
        ok = np.ones(n, dtype=bool)
        for ax in range(3):
            d = dirs[:, ax]
            o = origin[ax]
            mn = boxes[b, ax]
            mx = boxes[b, 3 + ax]
            zero = d == 0.0
            inside = (mn <= o) and (o <= mx)
            if not inside:
                ok &= ~zero
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (mn - o) / d
                tb = (mx - o) / d
            lo = np.minimum(ta, tb)
            hi = np.maximum(ta, tb)
            t0 = np.where(zero, t0, np.maximum(t0, lo))
            t1 = np.where(zero, t1, np.minimum(t1, hi))
        valid = ok & (t1 >= t0) & (t0 >= 0.0)
        best = np.where(valid & (t0 < best), t0, best)
    hit = (best <= max_range).astype(np.uint8)
    dist = np.where(hit.astype(bool), best, max_range)
    return dist, hit
