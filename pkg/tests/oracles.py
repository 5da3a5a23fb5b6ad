"""Independent oracles used by the tests.

Everything here is deliberately written from first principles, separate from
the package's implementations: a sort-based KNN novelty oracle, a tridiagonal
natural-spline solver, planar inverse kinematics, and the scripted grasp
policy built from it.
"""

import math

import numpy as np


def wrap_pi(angle):
    """Wrap to (-pi, pi] using plain arithmetic."""
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def oracle_component_distance(x, y, metric, lower, upper):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if metric == "wrapped-angle":
        return abs(wrap_pi(float(x[0]) - float(y[0]))) / math.pi
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    zx = (x - lower) / (upper - lower)
    zy = (y - lower) / (upper - lower)
    return math.sqrt(float(np.sum((zx - zy) ** 2)))


def oracle_knn_novelty(query, query_id, ref_points, ref_ids, metric, lower, upper, k):
    """O(n^2)-style oracle: all distances, full sort, mean of the first k."""
    dists = []
    for pt, rid in zip(ref_points, ref_ids):
        if rid == query_id:
            continue
        dists.append(oracle_component_distance(query, pt, metric, lower, upper))
    if not dists:
        return math.inf
    dists.sort()
    take = dists[: min(k, len(dists))]
    return sum(take) / len(take)


def oracle_natural_spline(knot_ts, knot_ys, sample_ts):
    """Natural cubic spline via the classic tridiagonal system for the
    second derivatives, evaluated piecewise."""
    x = np.asarray(knot_ts, dtype=float)
    y = np.asarray(knot_ys, dtype=float)
    n = len(x)
    h = np.diff(x)
    a = np.zeros((n, n))
    b = np.zeros(n)
    a[0, 0] = 1.0
    a[-1, -1] = 1.0
    for i in range(1, n - 1):
        a[i, i - 1] = h[i - 1] / 6.0
        a[i, i] = (h[i - 1] + h[i]) / 3.0
        a[i, i + 1] = h[i] / 6.0
        b[i] = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]
    m = np.linalg.solve(a, b)

    out = []
    for t in np.asarray(sample_ts, dtype=float):
        i = int(np.clip(np.searchsorted(x, t, side="right") - 1, 0, n - 2))
        hi = h[i]
        A = (x[i + 1] - t) / hi
        B = (t - x[i]) / hi
        out.append(
            A * y[i]
            + B * y[i + 1]
            + ((A ** 3 - A) * m[i] + (B ** 3 - B) * m[i + 1]) * hi * hi / 6.0
        )
    return np.asarray(out)


def planar_ik(links, target, heading, elbow=1.0):
    """Joint angles placing the 3-link palm at `target` with `heading`;
    None when unreachable."""
    l1, l2, l3 = links
    wx = target[0] - l3 * math.cos(heading)
    wy = target[1] - l3 * math.sin(heading)
    d2 = wx * wx + wy * wy
    c2 = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if not -1.0 <= c2 <= 1.0:
        return None
    q2 = elbow * math.acos(c2)
    q1 = math.atan2(wy, wx) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    q3 = heading - q1 - q2
    return [wrap_pi(q1), wrap_pi(q2), wrap_pi(q3)]


def scripted_grasp_genome(env):
    """Top-down pick built by inverse kinematics at the desk: hover above the
    disc, descend until the fingers straddle it, close just in time, lift.

    Returns the genome coordinates in [-1, 1]. Independent of any search.
    """
    cfg = env.cfg
    ox, oy = cfg.object_position
    finger = cfg.gripper.finger_length
    heading = -math.pi / 2.0  # fingers pointing straight down
    grasp_pose = (ox, oy + 0.5 * finger)
    # hover high enough that the joint-space spline's bow during the descent
    # leg cannot graze the disc before the pinch
    hover = (ox, grasp_pose[1] + 0.35)
    lift = (ox, grasp_pose[1] + cfg.tolerances.lift_height_min + 0.27)
    waypoints = []
    for pose in (hover, grasp_pose, lift):
        q = planar_ik(cfg.link_lengths, pose, heading)
        assert q is not None, f"oracle pose {pose} unreachable for links {cfg.link_lengths}"
        waypoints.append(q)
    close_steps = math.ceil(
        (cfg.gripper.max_aperture - 2.0 * cfg.obj.radius) / cfg.gripper.close_speed
    )
    # Aperture reaches the disc diameter exactly when the palm hits the
    # grasp waypoint at 2T/3.
    t_grasp = 2 * cfg.timesteps // 3 - close_steps
    assert 0 <= t_grasp <= cfg.timesteps
    coords = [q / math.pi for wp in waypoints for q in wp]
    coords.append(2.0 * t_grasp / cfg.timesteps - 1.0)
    return np.asarray(coords)
