"""JIT-compiled stepping kernels for the rollout contact phase.

The contact loop is inherently sequential (the disc's position feeds the
next step), so it runs as compiled scalar code. All functions are
numba.njit without fastmath: operations execute in IEEE order exactly as
written, keeping results identical across runs and worker processes.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NO_STEP = -1


@njit(cache=True)
def _seg_dist(px, py, ax, ay, bx, by):
    """Distance and closest point from (px, py) to segment ab."""
    dx = bx - ax
    dy = by - ay
    den = dx * dx + dy * dy
    t = 0.0
    if den > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy) / den
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    cx = ax + t * dx
    cy = ay + t * dy
    ddx = px - cx
    ddy = py - cy
    return np.sqrt(ddx * ddx + ddy * ddy), cx, cy


@njit(cache=True)
def _overlap_interval(ax, ay, bx, by, h, r, out):
    """Open x-interval where a disc centered on y=h overlaps segment ab.
    Writes (lo, hi) into out and returns True, or returns False if the
    segment never comes within r of the line."""
    if (ay - h) * (by - h) <= 0.0:
        if ay == by:
            lo = min(ax, bx) - r
            hi = max(ax, bx) + r
            out[0] = lo
            out[1] = hi
            return True
        x_star = ax + (h - ay) * (bx - ax) / (by - ay)
        d_min = 0.0
    else:
        if abs(ay - h) <= abs(by - h):
            x_star = ax
            d_min = abs(ay - h)
        else:
            x_star = bx
            d_min = abs(by - h)
    if d_min >= r:
        return False

    span = abs(bx - ax) + r
    step = r if r > span else span
    for side in range(2):
        direction = -1.0 if side == 0 else 1.0
        x_in = x_star
        x_out = x_star + direction * step
        d, _, _ = _seg_dist(x_out, h, ax, ay, bx, by)
        while d < r:
            x_in = x_out
            x_out += direction * step
            d, _, _ = _seg_dist(x_out, h, ax, ay, bx, by)
        for _ in range(60):
            mid = 0.5 * (x_in + x_out)
            d, _, _ = _seg_dist(mid, h, ax, ay, bx, by)
            if d < r:
                x_in = mid
            else:
                x_out = mid
        out[side] = x_out
    return True


@njit(cache=True)
def resolve_push_jit(segs, cx, cy, r, slack):
    """Slide the disc along y=cy out of overlap with the segment set.

    Local minimal-translation iterations first; on non-convergence (e.g. a
    closing mouth with no feasible interior) fall back to the union of the
    per-segment overlap intervals and exit at the nearer edge of the merged
    block containing the disc.
    """
    n = segs.shape[0]
    x = cx
    for _ in range(32):
        worst_d = np.inf
        worst_px = 0.0
        worst_py = 0.0
        for i in range(n):
            d, px, py = _seg_dist(x, cy, segs[i, 0], segs[i, 1], segs[i, 2], segs[i, 3])
            if d < worst_d:
                worst_d = d
                worst_px = px
                worst_py = py
        if worst_d >= r:
            return x
        dy = cy - worst_py
        w2 = r * r - dy * dy
        width = np.sqrt(w2) if w2 > 0.0 else 0.0
        direction = 1.0 if x >= worst_px else -1.0
        x = worst_px + direction * (width + slack)

    intervals = np.empty((n, 2))
    count = 0
    buf = np.empty(2)
    for i in range(n):
        if _overlap_interval(segs[i, 0], segs[i, 1], segs[i, 2], segs[i, 3], cy, r, buf):
            intervals[count, 0] = buf[0]
            intervals[count, 1] = buf[1]
            count += 1
    if count == 0:
        return cx
    order = np.argsort(intervals[:count, 0])
    merged_lo = np.empty(count)
    merged_hi = np.empty(count)
    m = 0
    for j in range(count):
        lo = intervals[order[j], 0]
        hi = intervals[order[j], 1]
        if m > 0 and lo <= merged_hi[m - 1]:
            if hi > merged_hi[m - 1]:
                merged_hi[m - 1] = hi
        else:
            merged_lo[m] = lo
            merged_hi[m] = hi
            m += 1
    for j in range(m):
        if merged_lo[j] < cx < merged_hi[j]:
            if (merged_hi[j] - cx) <= (cx - merged_lo[j]):
                return merged_hi[j] + slack
            return merged_lo[j] - slack
    return cx


@njit(cache=True)
def contact_loop(
    b1x, b1y, b2x, b2y, t1x, t1y, t2x, t2y,
    start, T, cx, cy, table_h, r, eps, pen_max, bearing_min,
    t_close_reach, window, slack, obj_x, obj_y,
):
    """Step the disc through the contact phase from `start` to the end of
    the episode. Writes per-step object positions; returns
    (t_touch, grasp_step, final_x) with NO_STEP for absent events."""
    t_touch = NO_STEP
    grasp_step = NO_STEP
    segs = np.empty((3, 4))
    for step in range(start, T + 1):
        f1d, f1x, f1y = _seg_dist(cx, cy, b1x[step], b1y[step], t1x[step], t1y[step])
        f2d, f2x, f2y = _seg_dist(cx, cy, b2x[step], b2y[step], t2x[step], t2y[step])
        fpd, _, _ = _seg_dist(cx, cy, b1x[step], b1y[step], b2x[step], b2y[step])
        dmin = min(f1d, min(f2d, fpd))
        if dmin <= r + eps:
            if t_touch == NO_STEP:
                t_touch = step
            in_window = (
                t_close_reach != NO_STEP
                and t_close_reach <= step <= t_close_reach + window
            )
            if in_window and f1d <= r + eps and f2d <= r + eps:
                pen = max(0.0, max(r - f1d, r - f2d))
                beta1 = np.arctan2(f1y - cy, f1x - cx)
                beta2 = np.arctan2(f2y - cy, f2x - cx)
                diff = beta1 - beta2
                while diff > np.pi:
                    diff -= 2.0 * np.pi
                while diff <= -np.pi:
                    diff += 2.0 * np.pi
                on_table = abs(cy - table_h) < 1e-9
                if abs(diff) >= bearing_min and on_table and pen <= pen_max:
                    grasp_step = step
                    obj_x[step] = cx
                    obj_y[step] = cy
                    return t_touch, grasp_step, cx
            if dmin < r:
                segs[0, 0] = b1x[step]
                segs[0, 1] = b1y[step]
                segs[0, 2] = t1x[step]
                segs[0, 3] = t1y[step]
                segs[1, 0] = b2x[step]
                segs[1, 1] = b2y[step]
                segs[1, 2] = t2x[step]
                segs[1, 3] = t2y[step]
                segs[2, 0] = b1x[step]
                segs[2, 1] = b1y[step]
                segs[2, 2] = b2x[step]
                segs[2, 3] = b2y[step]
                cx = resolve_push_jit(segs, cx, cy, r, slack)
        obj_x[step] = cx
        obj_y[step] = cy
    return t_touch, grasp_step, cx
