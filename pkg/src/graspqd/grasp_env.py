"""Desk-scale planar arm grasping environment.

A revolute planar arm (default 3 DOF) moves a two-finger gripper in a
vertical plane. A disc rests on a table line; before being grasped it can
only slide along that line. Policies encode three joint-space waypoints
(poses at T/3, 2T/3 and T) plus the timestep at which the gripper starts
closing; motion between waypoints is a natural cubic spline per joint.

Everything is kinematic and deterministic: contact, pushing and the grasp
trigger are resolved geometrically, which keeps every success criterion
analytically checkable. The gripper is modeled as three segments: two
parallel fingers of fixed length extending along the wrist heading, joined
by a palm segment between their bases.

Grasp trigger at a step: both fingers within contact_eps of the disc
surface, on opposing sides (bearing difference >= 120 degrees from the disc
center), within touch_window_steps after the aperture first reaches the
disc diameter, while the disc still rests on the table, with finger
penetration at most penetration_max. Once triggered the disc is rigidly
attached to the gripper frame and the aperture freezes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._kernels import NO_STEP, contact_loop, resolve_push_jit
from .core import (
    METRIC_EUCLIDEAN,
    METRIC_WRAPPED_ANGLE,
    BehaviorComponentSpec,
    BehaviorVector,
    Bounds,
    ConfigurationError,
    Genome,
    quality_from_joint_path,
    require_finite,
    wrap_angle,
)

OPPOSING_BEARING_MIN = 2.0 * math.pi / 3.0  # 120 degrees
_PUSH_SLACK = 1e-9


@dataclass(frozen=True)
class ObjectConfig:
    radius: float = 0.06
    position: tuple | None = None  # None -> (0.6 * reach, table_height)


@dataclass(frozen=True)
class GripperConfig:
    finger_length: float = 0.16
    max_aperture: float = 0.24
    close_speed: float = 0.02  # aperture units per step


@dataclass(frozen=True)
class ToleranceConfig:
    contact_eps: float = 0.01
    penetration_max: float = 0.02
    lift_height_min: float = 0.05
    touch_window_steps: int = 10


@dataclass(frozen=True)
class EnvConfig:
    n_dof: int = 3
    link_lengths: tuple = (0.5, 0.4, 0.3)
    timesteps: int = 300
    table_height: float = -0.4
    obj: ObjectConfig = field(default_factory=ObjectConfig)
    gripper: GripperConfig = field(default_factory=GripperConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)

    def __post_init__(self):
        if self.n_dof < 1:
            raise ConfigurationError("n_dof must be >= 1")
        if len(self.link_lengths) != self.n_dof:
            raise ConfigurationError("link_lengths must have n_dof entries")
        if any(l <= 0 for l in self.link_lengths):
            raise ConfigurationError("link lengths must be positive")
        if self.timesteps < 3:
            raise ConfigurationError("timesteps must be >= 3")
        g, o, tol = self.gripper, self.obj, self.tolerances
        if o.radius <= 0 or g.finger_length <= 0 or g.close_speed <= 0:
            raise ConfigurationError("radius, finger_length and close_speed must be positive")
        if g.max_aperture <= 2.0 * o.radius:
            raise ConfigurationError("max_aperture must exceed the disc diameter")
        if tol.contact_eps < 0 or tol.penetration_max < 0 or tol.lift_height_min < 0:
            raise ConfigurationError("tolerances must be non-negative")
        if tol.touch_window_steps < 0:
            raise ConfigurationError("touch_window_steps must be >= 0")
        pos = self.object_position
        reach = sum(self.link_lengths) + g.finger_length
        if math.hypot(*pos) > reach:
            raise ConfigurationError(f"object at {pos} is outside the arm's reach {reach:.3f}")

    @property
    def object_position(self) -> tuple:
        if self.obj.position is not None:
            return tuple(self.obj.position)
        return (0.6 * sum(self.link_lengths), self.table_height)

    @property
    def n_g(self) -> int:
        # three joint-space waypoints plus the gripper closing time
        return 3 * self.n_dof + 1


@dataclass(frozen=True, eq=False)
class DecodedPolicy:
    """Joint-space waypoints at T/3, 2T/3, T plus the closing timestep."""

    waypoints: np.ndarray  # (3, n_dof) radians
    t_grasp: int

    def __post_init__(self):
        w = np.asarray(self.waypoints, dtype=float)
        if w.ndim != 2 or w.shape[0] != 3:
            raise ConfigurationError(f"expected 3 waypoints, got shape {w.shape}")
        w.flags.writeable = False
        object.__setattr__(self, "waypoints", w)


@dataclass(eq=False)
class RolloutTrace:
    """Per-step kinematic record of one episode."""

    gripper_position: np.ndarray  # (T+1, 2)
    gripper_orientation: np.ndarray  # (T+1,), wrapped to (-pi, pi]
    aperture: np.ndarray  # (T+1,)
    object_position: np.ndarray  # (T+1, 2)
    joint_path: np.ndarray  # (T+1, n_dof)
    t_grasp: int
    t_close_reach: int | None
    t_touch: int | None
    grasp_step: int | None
    grasped: bool
    grasp_stable_at_end: bool


def _pt_segs_batch(a: np.ndarray, b: np.ndarray, p) -> np.ndarray:
    """Distances from static point p to a batch of segments (a[i], b[i])."""
    d = b - a
    den = np.einsum("ij,ij->i", d, d)
    ap = p[None, :] - a
    t = np.einsum("ij,ij->i", ap, d) / np.where(den > 0.0, den, 1.0)
    np.clip(t, 0.0, 1.0, out=t)
    closest = a + t[:, None] * d
    diff = closest - p[None, :]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def resolve_push(segments, cx, cy, r):
    """Slide the disc along the table line out of overlap with the gripper.

    Iteratively clears the deepest-overlapping segment by moving away from
    its closest point (the local minimal-translation direction projected on
    the table line); when that cannot settle, e.g. inside a closing mouth
    with no feasible interior, the exact union of per-segment overlap
    intervals decides the nearer exit. See _kernels.resolve_push_jit.
    """
    segs = np.asarray(segments, dtype=float).reshape(-1, 4)
    return float(resolve_push_jit(segs, float(cx), float(cy), float(r), _PUSH_SLACK))


class PlanarArmEnv:
    """Policy decoding, kinematic rollout and behavior extraction."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        T = cfg.timesteps
        self.links = np.asarray(cfg.link_lengths, dtype=float)
        self.reach = float(self.links.sum() + cfg.gripper.finger_length)
        self.joint_bounds = Bounds.uniform(-math.pi, math.pi, cfg.n_dof)
        self.genome_bounds = Bounds.uniform(-1.0, 1.0, cfg.n_g)
        # Cardinal natural-cubic basis: trajectory = basis @ knot_values.
        knot_times = np.array([0.0, T / 3.0, 2.0 * T / 3.0, float(T)])
        self._spline_basis = CubicSpline(knot_times, np.eye(4), bc_type="natural")(
            np.arange(T + 1, dtype=float)
        )
        self.initial_pose = np.zeros(cfg.n_dof)  # arm extended along +x
        pos_box = Bounds.uniform(-self.reach, self.reach, 2)
        angle = Bounds.uniform(-math.pi, math.pi, 1)
        self.component_specs = (
            BehaviorComponentSpec(0, 2, METRIC_EUCLIDEAN, pos_box),  # object end position
            BehaviorComponentSpec(1, 1, METRIC_WRAPPED_ANGLE, angle),  # mid-episode gripper heading
            BehaviorComponentSpec(2, 2, METRIC_EUCLIDEAN, pos_box),  # gripper position at first touch
            BehaviorComponentSpec(3, 1, METRIC_WRAPPED_ANGLE, angle),  # gripper heading at first touch
        )

    @property
    def n_b(self) -> int:
        return len(self.component_specs)

    def decode(self, genome: Genome) -> DecodedPolicy:
        """Map genome coordinates in [-1, 1] to joint waypoints and t_grasp."""
        cfg = self.cfg
        if len(genome) != cfg.n_g:
            raise ConfigurationError(f"genome length {len(genome)} != policy dimension {cfg.n_g}")
        params = np.clip(genome.params, -1.0, 1.0)
        waypoints = params[: 3 * cfg.n_dof].reshape(3, cfg.n_dof) * math.pi
        t_grasp = int(round((params[-1] + 1.0) / 2.0 * cfg.timesteps))
        return DecodedPolicy(waypoints=waypoints, t_grasp=t_grasp)

    def interpolate(self, q0: np.ndarray, policy: DecodedPolicy) -> np.ndarray:
        """Per-joint natural cubic through (0, q0), (T/3, w1), (2T/3, w2), (T, w3),
        sampled at integer steps 0..T."""
        knots = np.vstack([np.asarray(q0, dtype=float)[None, :], policy.waypoints])
        return self._spline_basis @ knots

    def _aperture_schedule(self, t_grasp: int) -> np.ndarray:
        cfg = self.cfg
        t = np.arange(cfg.timesteps + 1, dtype=float)
        ap = cfg.gripper.max_aperture - cfg.gripper.close_speed * (t - t_grasp)
        return np.clip(ap, 0.0, cfg.gripper.max_aperture)

    def rollout(self, genome: Genome, env_rng=None) -> RolloutTrace:
        """Deterministic kinematic episode; env_rng is reserved for future
        noise studies and unused."""
        cfg = self.cfg
        T = cfg.timesteps
        r = cfg.obj.radius
        eps = cfg.tolerances.contact_eps
        policy = self.decode(genome)
        joint_path = self.interpolate(self.initial_pose, policy)
        require_finite(joint_path, "joint trajectory")

        theta = np.cumsum(joint_path, axis=1)
        palm = np.column_stack([np.cos(theta) @ self.links, np.sin(theta) @ self.links])
        phi = theta[:, -1]
        cos_phi, sin_phi = np.cos(phi), np.sin(phi)
        aperture = self._aperture_schedule(policy.t_grasp)

        closed = aperture <= 2.0 * r
        t_close_reach = int(np.argmax(closed)) if bool(closed.any()) else None

        # Segment endpoints for the scheduled (pre-grasp) aperture.
        u = np.column_stack([cos_phi, sin_phi])
        nperp = np.column_stack([-sin_phi, cos_phi])
        half = (aperture / 2.0)[:, None]
        base1 = palm + half * nperp
        base2 = palm - half * nperp
        tip1 = base1 + cfg.gripper.finger_length * u
        tip2 = base2 + cfg.gripper.finger_length * u

        c = np.array(cfg.object_position, dtype=float)
        table_h = float(c[1])
        obj_x = np.full(T + 1, c[0])
        obj_y = np.full(T + 1, c[1])
        t_touch = None
        grasp_step = None

        # Fast path: with the disc static, find the first step whose gripper
        # comes within touch range; episodes that never do are settled here.
        d1 = _pt_segs_batch(base1, tip1, c)
        d2 = _pt_segs_batch(base2, tip2, c)
        dp = _pt_segs_batch(base1, base2, c)
        near = np.minimum(np.minimum(d1, d2), dp) <= (r + eps)
        if bool(near.any()):
            s0 = int(np.argmax(near))
            touch_step, g_step, _ = contact_loop(
                np.ascontiguousarray(base1[:, 0]), np.ascontiguousarray(base1[:, 1]),
                np.ascontiguousarray(base2[:, 0]), np.ascontiguousarray(base2[:, 1]),
                np.ascontiguousarray(tip1[:, 0]), np.ascontiguousarray(tip1[:, 1]),
                np.ascontiguousarray(tip2[:, 0]), np.ascontiguousarray(tip2[:, 1]),
                s0, T, float(c[0]), float(c[1]), table_h,
                r, eps, cfg.tolerances.penetration_max, OPPOSING_BEARING_MIN,
                NO_STEP if t_close_reach is None else t_close_reach,
                cfg.tolerances.touch_window_steps, _PUSH_SLACK,
                obj_x, obj_y,
            )
            t_touch = None if touch_step == NO_STEP else int(touch_step)
            grasp_step = None if g_step == NO_STEP else int(g_step)

        obj_positions = np.column_stack([obj_x, obj_y])
        grasped = grasp_step is not None
        if grasped:
            # Rigid attachment: constant offset in the gripper frame.
            g = grasp_step
            rel = obj_positions[g] - palm[g]
            attach_local = np.array([
                cos_phi[g] * rel[0] + sin_phi[g] * rel[1],
                -sin_phi[g] * rel[0] + cos_phi[g] * rel[1],
            ])
            after = slice(g + 1, T + 1)
            obj_positions[after, 0] = palm[after, 0] + cos_phi[after] * attach_local[0] - sin_phi[after] * attach_local[1]
            obj_positions[after, 1] = palm[after, 1] + sin_phi[after] * attach_local[0] + cos_phi[after] * attach_local[1]
            aperture = aperture.copy()
            aperture[after] = aperture[g]

        stable = (
            grasped
            and obj_positions[T, 1] >= table_h + cfg.tolerances.lift_height_min
            and aperture[T] <= 2.0 * (r + eps)
        )
        return RolloutTrace(
            gripper_position=palm,
            gripper_orientation=wrap_angle(phi),
            aperture=aperture,
            object_position=obj_positions,
            joint_path=joint_path,
            t_grasp=policy.t_grasp,
            t_close_reach=t_close_reach,
            t_touch=t_touch,
            grasp_step=grasp_step,
            grasped=grasped,
            grasp_stable_at_end=bool(stable),
        )

    def extract_behavior(self, trace: RolloutTrace) -> tuple:
        """Behavior components with their eligibility cascade, plus success.

        Component 0 (object end position) is always defined; component 1
        (gripper heading at T/2) requires a touch; components 2 and 3
        (gripper pose at first touch) require a successful grasp. Values are
        clamped into the declared component bounds before storage.
        """
        cfg = self.cfg
        specs = self.component_specs
        success = trace.grasp_stable_at_end
        touched = trace.t_touch is not None
        comps = [specs[0].bounds.clip(trace.object_position[cfg.timesteps]), None, None, None]
        if touched:
            comps[1] = specs[1].bounds.clip([trace.gripper_orientation[cfg.timesteps // 2]])
        if success:
            comps[2] = specs[2].bounds.clip(trace.gripper_position[trace.t_touch])
            comps[3] = specs[3].bounds.clip([trace.gripper_orientation[trace.t_touch]])
        return BehaviorVector(components=tuple(comps)), success

    def evaluate(self, genome: Genome, env_rng=None):
        """Full evaluation: (behavior, success, quality)."""
        trace = self.rollout(genome, env_rng)
        behavior, success = self.extract_behavior(trace)
        return behavior, success, quality_from_joint_path(trace.joint_path)
