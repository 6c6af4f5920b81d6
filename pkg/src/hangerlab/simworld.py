"""Kinematic 2D hanger-insertion world.

Geometry, in the workcell's vertical plane:

* The T-shirt is a polygon held by the left gripper at its left shoulder.
  Its top edge slopes down from a collar notch to both shoulders; the
  *collar segment* is the chord spanning the notch.  The free (right)
  shoulder is jittered at reset, which tilts and shifts the collar.
* The hanger is a rigid V: two legs from the neck to
  ``(+-leg_half_span, -leg_drop)`` in the hanger frame, plus a hook.
  Leg 1 is the ``+x`` leg.
* A leg is *inside* when its tip lies in the shirt polygon and the leg
  passes through the collar segment.  Before insertion 1, a tip pressed
  into the shirt anywhere else drags the shirt down in the gripper (snag);
  past the slip threshold the shirt is pulled out.
* After insertion 1 the collar rides on the hanger neck: raising the neck
  above its tightest gap lifts the shirt, pressing it below the minimum
  gap pushes the shirt down.  The cloth never moves sideways.

All randomness of an episode (initial jitter, sensor noise) comes from the
PCG64 stream seeded by the episode seed.
"""

from __future__ import annotations

import functools
import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .core import (
    ContractViolation,
    Episode,
    EpisodeType,
    FailureMode,
    Observation,
    Outcome,
    Pose2,
    SimConfig,
    SimState,
    Stage,
    clamp_action,
    make_rng,
    wrap_angle,
)

TERMINAL_EVENTS = ("collision", "pulled_out", "shirt_dropped", "released", "goal", "stall", "hard_cap", "truncated")


@dataclass(frozen=True)
class ClothModel:
    anchor: tuple[float, float]
    collar: np.ndarray  # (2, 2): left and right chord endpoints
    polygon: np.ndarray  # (8, 2), counter-clockwise
    free_shoulder_offset: float
    attached_to_hanger: bool

    @property
    def collar_center(self) -> np.ndarray:
        return self.collar.mean(axis=0)


@dataclass(frozen=True)
class StepEvents:
    collision: bool = False
    shirt_dropped: bool = False
    pulled_out: bool = False
    insertion1: bool = False
    lift_complete: bool = False
    insertion2: bool = False
    released: bool = False
    covered: tuple[bool, bool, bool, bool] = (False, False, False, False)


# ---------------------------------------------------------------- geometry


def insertion_angle(cfg: SimConfig) -> float:
    """Hanger angle at which leg 1 points straight down."""
    return wrap_angle(-math.pi / 2 + math.atan2(cfg.leg_drop, cfg.leg_half_span))


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def hanger_points(pose: Pose2, cfg: SimConfig) -> dict[str, np.ndarray]:
    r = _rot(pose.theta)
    neck = np.array([pose.x, pose.y])
    return {
        "neck": neck,
        "tip1": neck + r @ np.array([cfg.leg_half_span, -cfg.leg_drop]),
        "tip2": neck + r @ np.array([-cfg.leg_half_span, -cfg.leg_drop]),
        "hook": neck + r @ np.array([0.0, cfg.hook_length]),
    }


def hanger_segments(pose: Pose2, cfg: SimConfig) -> np.ndarray:
    p = hanger_points(pose, cfg)
    return np.array([
        [*p["neck"], *p["tip1"]],
        [*p["neck"], *p["tip2"]],
        [*p["neck"], *p["hook"]],
    ])


def sensor_points(pose: Pose2, cfg: SimConfig) -> np.ndarray:
    """Sensor sites: leg 1 inner/outer, then leg 2 inner/outer."""
    p = hanger_points(pose, cfg)
    pts = []
    for tip in (p["tip1"], p["tip2"]):
        for f in cfg.sensor_fractions:
            pts.append(p["neck"] + f * (tip - p["neck"]))
    return np.array(pts)


def cloth_model(state: SimState, cfg: SimConfig) -> ClothModel:
    return _cloth(state.free_shoulder_offset, state.cloth_dy, cfg, state.stage >= Stage.INSERTED1)


def _cloth(offset: float, dy: float, cfg: SimConfig, attached: bool = False) -> ClothModel:
    cx, cy = cfg.collar_x, cfg.collar_y
    w2, dip = cfg.collar_width / 2, cfg.collar_dip
    hw, sd = cfg.shirt_half_width, cfg.shoulder_drop
    cl = (cx - w2 + 0.5 * offset, cy + 0.4 * offset)
    cr = (cx + w2 + 0.5 * offset, cy + 0.6 * offset)
    poly = np.array([
        (cx - hw, cfg.shirt_bottom),
        (cx + hw, cfg.shirt_bottom),
        (cx + hw, cy - sd + offset),
        cr,
        (cr[0] - dip, cr[1] - dip),
        (cl[0] + dip, cl[1] - dip),
        cl,
        (cx - hw, cy - sd),
    ])
    poly[:, 1] += dy
    collar = np.array([cl, cr])
    collar[:, 1] += dy
    anchor = (cx - hw, cy - sd)
    return ClothModel(anchor, collar, poly, offset, attached)


def _inside(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(pts)
    return kernels.points_in_polygon(pts[:, 0], pts[:, 1], poly).astype(bool)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Proper or touching intersection of two closed segments."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    return (
        (d1 == 0 and on_seg(q1, q2, p1))
        or (d2 == 0 and on_seg(q1, q2, p2))
        or (d3 == 0 and on_seg(p1, p2, q1))
        or (d4 == 0 and on_seg(p1, p2, q2))
    )


def segment_hits_box(p1, p2, box) -> bool:
    """Liang-Barsky clip test of a segment against ``(xmin, ymin, xmax, ymax)``."""
    x0, y0 = p1
    dx, dy = p2[0] - x0, p2[1] - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0 - box[0]), (dx, box[2] - x0), (-dy, y0 - box[1]), (dy, box[3] - y0)):
        if p == 0:
            if q < 0:
                return False
        else:
            r = q / p
            if p < 0:
                t0 = max(t0, r)
            else:
                t1 = min(t1, r)
            if t0 > t1:
                return False
    return True


def _clip_segment(p1, p2, box):
    x0, y0 = p1
    dx, dy = p2[0] - x0, p2[1] - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0 - box[0]), (dx, box[2] - x0), (-dy, y0 - box[1]), (dy, box[3] - y0)):
        if p == 0:
            if q < 0:
                return None
        else:
            r = q / p
            if p < 0:
                t0 = max(t0, r)
            else:
                t1 = min(t1, r)
            if t0 > t1:
                return None
    return (x0 + t0 * dx, y0 + t0 * dy), (x0 + t1 * dx, y0 + t1 * dy)


def top_boundary_y(poly: np.ndarray, x: float) -> float | None:
    """Highest polygon boundary point above abscissa ``x`` (None if outside the span)."""
    best = None
    n = len(poly)
    for i in range(n):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
        if x1 == x2:
            continue
        if min(x1, x2) <= x <= max(x1, x2):
            y = y1 + (y2 - y1) * (x - x1) / (x2 - x1)
            if best is None or y > best:
                best = y
    return best


def leg_inside(pose: Pose2, cloth: ClothModel, cfg: SimConfig, leg: int) -> bool:
    p = hanger_points(pose, cfg)
    tip = p["tip1"] if leg == 1 else p["tip2"]
    if not _inside(tip, cloth.polygon)[0]:
        return False
    return segments_intersect(p["neck"], tip, cloth.collar[0], cloth.collar[1])


def coverage(state: SimState, cfg: SimConfig) -> tuple[bool, bool, bool, bool]:
    cloth = cloth_model(state, cfg)
    return tuple(bool(c) for c in _inside(sensor_points(state.hanger, cfg), cloth.polygon))


def _gripper_box(cfg: SimConfig) -> tuple[float, float, float, float]:
    m = cfg.collision_margin
    x0, y0, x1, y1 = cfg.gripper_box
    return (x0 - m, y0 - m, x1 + m, y1 + m)


def in_collision(pose: Pose2, cfg: SimConfig) -> bool:
    box = _gripper_box(cfg)
    return any(segment_hits_box(s[:2], s[2:], box) for s in hanger_segments(pose, cfg))


# ---------------------------------------------------------------- dynamics


def reset(cfg: SimConfig, seed: int, init_kind: EpisodeType | str, *, shoulder_offset: float | None = None,
          hanger_pose: Pose2 | None = None) -> SimState:
    """Initial state for an episode.

    Types I/IV start at the home pose.  Types II/III start from a missed
    first insertion: leg 1 hangs vertically with its tip 0.5-2 cm below the
    collar center, resting just above the right shoulder slope.

    ``shoulder_offset``/``hanger_pose`` override the sampled values, which
    recreates a recorded initialisation exactly.
    """
    kind = EpisodeType(init_kind)
    rng = make_rng(seed)
    r = cfg.shoulder_offset_range
    offset = float(rng.uniform(-r, r))
    depth = float(rng.uniform(cfg.missed_depth_min, cfg.missed_depth_max))
    lateral_jitter = float(rng.uniform(0.0, cfg.missed_lateral_jitter))
    if shoulder_offset is not None:
        offset = float(shoulder_offset)
    if hanger_pose is not None:
        pose = hanger_pose
    elif kind.home_start:
        pose = Pose2(*cfg.home_pose)
    else:
        pose = _missed_insertion_pose(cfg, offset, depth, lateral_jitter)
    return SimState(
        hanger=pose,
        gripper=0.0,
        shirt_held=True,
        free_shoulder_offset=offset,
        snag_displacement=0.0,
        stage=Stage.APPROACH1,
        step_count=0,
        episode_type=kind,
        rng=rng,
    )


def _missed_insertion_pose(cfg: SimConfig, offset: float, depth: float, jitter: float) -> Pose2:
    cloth = _cloth(offset, 0.0, cfg)
    cl, cr = cloth.collar
    shoulder = cloth.polygon[2]
    slope = (cr[1] - shoulder[1]) / (shoulder[0] - cr[0])  # drop per meter to the right
    tip_y = cloth.collar_center[1] - depth
    clearance = 0.008
    lateral = max(cfg.missed_lateral - cfg.missed_lateral_jitter, (cr[1] - tip_y + clearance) / slope) + jitter
    tip = np.array([cr[0] + lateral, tip_y])
    neck = tip + np.array([0.0, cfg.leg_length])
    return Pose2(neck[0], neck[1], insertion_angle(cfg))


def _stage_chain(stage: Stage, pose: Pose2, cloth: ClothModel, held: bool, cfg: SimConfig) -> Stage:
    in1 = leg_inside(pose, cloth, cfg, 1)
    if stage < Stage.INSERTED1 and in1:
        stage = Stage.INSERTED1
    if stage == Stage.INSERTED1 and in1 and pose.y >= cfg.lift_height:
        stage = Stage.LIFTED
    if stage == Stage.LIFTED and in1 and leg_inside(pose, cloth, cfg, 2):
        stage = Stage.INSERTED2
    if stage == Stage.INSERTED2 and not held:
        stage = Stage.RELEASED
    return stage


def stage_of(state: SimState, cfg: SimConfig | None = None) -> Stage:
    """Stage implied by the geometry, never below the stage already reached.

    Inserted1: leg 1 inside.  Lifted: additionally neck at or above
    ``lift_height``.  Inserted2: both legs inside.  Released: Inserted2
    with the shirt let go.
    """
    cfg = cfg or SimConfig()
    return _stage_chain(state.stage, state.hanger, cloth_model(state, cfg), state.shirt_held, cfg)


def _track(current: float, target: float, limit: float) -> float:
    return current + min(max(target - current, -limit), limit)


def step(state: SimState, action_row, cfg: SimConfig) -> tuple[SimState, StepEvents]:
    if state.is_terminal:
        raise ContractViolation(f"cannot step a terminated episode (ended by {state.terminal!r})")
    target = clamp_action(action_row, cfg)

    # rate-limited tracking of the absolute target
    d = np.array([target[0] - state.hanger.x, target[1] - state.hanger.y])
    dist = math.hypot(d[0], d[1])
    if dist > cfg.max_translation_step:
        d *= cfg.max_translation_step / dist
    dtheta = wrap_angle(target[2] - state.hanger.theta)
    dtheta = min(max(dtheta, -cfg.max_rotation_step), cfg.max_rotation_step)
    pose = Pose2(state.hanger.x + d[0], state.hanger.y + d[1], state.hanger.theta + dtheta)
    grip = min(max(_track(state.gripper, target[3], cfg.max_gripper_step), 0.0), 1.0)

    cloth_dy = state.cloth_dy
    snag = state.snag_displacement
    neck_gap = state.neck_gap
    stage = state.stage
    pts = hanger_points(pose, cfg)

    if stage < Stage.INSERTED1:
        cloth = _cloth(state.free_shoulder_offset, cloth_dy, cfg)
        pushed = []
        in1 = leg_inside(pose, cloth, cfg, 1)
        tips = ([] if in1 else [pts["tip1"]]) + [pts["tip2"]]
        for tip in tips:
            if _inside(tip, cloth.polygon)[0]:
                top = top_boundary_y(cloth.polygon, tip[0])
                if top is not None:
                    pushed.append(top - tip[1])
        if pushed and not in1:
            slip = max(pushed) + 1e-6
            cloth_dy -= slip
            snag += slip
        if in1:
            cloth = _cloth(state.free_shoulder_offset, cloth_dy, cfg)
            neck_gap = max(pose.y - cloth.collar_center[1], cfg.neck_min_gap)

    if neck_gap is not None:
        chord_y = _cloth(state.free_shoulder_offset, cloth_dy, cfg).collar_center[1]
        gap = pose.y - chord_y
        neck_gap = min(neck_gap, max(gap, cfg.neck_min_gap))
        if gap > neck_gap:
            cloth_dy += gap - neck_gap
        elif gap < cfg.neck_min_gap:
            cloth_dy -= cfg.neck_min_gap - gap

    cloth = _cloth(state.free_shoulder_offset, cloth_dy, cfg)
    held = state.shirt_held
    new_stage = _stage_chain(stage, pose, cloth, True, cfg)

    released = dropped = False
    if held and grip >= cfg.release_threshold + cfg.release_hysteresis:
        held = False
        if new_stage == Stage.INSERTED2:
            new_stage = Stage.RELEASED
            released = True
        else:
            dropped = True

    collision = in_collision(pose, cfg)
    pulled = snag > cfg.snag_slip_threshold
    covered = tuple(bool(c) for c in _inside(sensor_points(pose, cfg), cloth.polygon))

    terminal = None
    if collision:
        terminal = "collision"
    elif pulled:
        terminal = "pulled_out"
    elif dropped:
        terminal = "shirt_dropped"
    elif released:
        terminal = "released"
    elif state.episode_type.ends_after_first and new_stage >= Stage.INSERTED1:
        terminal = "goal"

    events = StepEvents(
        collision=collision and terminal == "collision",
        shirt_dropped=dropped and terminal == "shirt_dropped",
        pulled_out=pulled and terminal == "pulled_out",
        insertion1=stage < Stage.INSERTED1 <= new_stage,
        lift_complete=stage < Stage.LIFTED <= new_stage,
        insertion2=stage < Stage.INSERTED2 <= new_stage,
        released=released and terminal == "released",
        covered=covered,
    )
    new_state = replace(
        state,
        hanger=pose,
        gripper=grip,
        shirt_held=held,
        snag_displacement=snag,
        stage=new_stage,
        step_count=state.step_count + 1,
        cloth_dy=cloth_dy,
        neck_gap=neck_gap,
        terminal=terminal,
    )
    return new_state, events


def read_sensors(state: SimState, cfg: SimConfig) -> np.ndarray:
    """Noisy coverage readings; consumes four normals from the episode stream."""
    cov = np.array(coverage(state, cfg), dtype=bool)
    level = np.where(cov, cfg.sensor_high, cfg.sensor_low)
    noise = state.rng.standard_normal(4) * cfg.sensor_sigma if cfg.sensor_sigma > 0 else np.zeros(4)
    return np.clip(level + noise, 0.0, 1.0)


# ---------------------------------------------------------------- rendering


@functools.lru_cache(maxsize=16)
def _cell_centers(x0: float, y1: float, width: float, height: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell centers of an ``n x n`` grid, row 0 at the top edge ``y1``."""
    idx = np.arange(n) + 0.5
    xs = x0 + idx * (width / n)
    ys = y1 - idx * (height / n)
    gx, gy = np.meshgrid(xs, ys)
    gx.setflags(write=False)
    gy.setflags(write=False)
    return gx.ravel(), gy.ravel()


def wrist_window(cfg: SimConfig) -> tuple[float, float, float, float]:
    cx, cy = cfg.wrist_center
    h = cfg.wrist_size / 2
    return (cx - h, cy - h, cx + h, cy + h)


def _rasterize(poly, segs, window, n, radius) -> np.ndarray:
    x0, y0, x1, y1 = window
    px, py = _cell_centers(x0, y1, x1 - x0, y1 - y0, n)
    grid = np.zeros((n, n, 2), dtype=np.uint8)
    if poly is not None:
        grid[:, :, 0] = kernels.points_in_polygon(px, py, poly).reshape(n, n)
    if segs is not None:
        grid[:, :, 1] = kernels.points_near_segments(px, py, segs, radius).reshape(n, n)
    return grid


def render_geometry(poly, segs, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize an arbitrary cloth polygon and hanger segments (either may be None).

    A cell is set iff its center is covered.  Hanger strokes are drawn with
    half-width ``max(leg_thickness / 2, cell / 2)`` so they never fall
    between cell centers.
    """
    scene_win = (cfg.x_min, cfg.y_min, cfg.x_max, cfg.y_max)
    cell = (cfg.x_max - cfg.x_min) / cfg.scene_grid
    scene = _rasterize(poly, segs, scene_win, cfg.scene_grid, max(cfg.leg_thickness / 2, cell / 2))
    wcell = cfg.wrist_size / cfg.wrist_grid
    wrist = _rasterize(poly, segs, wrist_window(cfg), cfg.wrist_grid, max(cfg.leg_thickness / 2, wcell / 2))
    return scene, wrist


def render(state: SimState, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    return render_geometry(cloth_model(state, cfg).polygon, hanger_segments(state.hanger, cfg), cfg)


def observe(state: SimState, cfg: SimConfig, instrumented: bool = True) -> Observation:
    """Render and read the sensors.  Always consumes sensor noise so the
    stream does not depend on whether the consumer keeps ``instr``."""
    scene, wrist = render(state, cfg)
    instr = read_sensors(state, cfg)
    proprio = np.array([state.hanger.x, state.hanger.y, state.hanger.theta, state.gripper])
    return Observation(scene, wrist, proprio, instr if instrumented else None)


def collar_trace(state: SimState, cfg: SimConfig) -> list[tuple[float, float]]:
    """Collar outline with its neighbouring shoulder vertices, clipped to the
    wrist window, in window coordinates (``(0, 0)`` bottom-left, ``(1, 1)`` top-right)."""
    poly = cloth_model(state, cfg).polygon
    chain = [poly[7], poly[6], poly[5], poly[4], poly[3], poly[2]]
    win = wrist_window(cfg)
    size = win[2] - win[0]
    out: list[tuple[float, float]] = []
    for a, b in zip(chain[:-1], chain[1:]):
        clipped = _clip_segment(a, b, win)
        if clipped is None:
            continue
        for p in clipped:
            q = ((p[0] - win[0]) / size, (p[1] - win[1]) / size)
            if not out or out[-1] != q:
                out.append(q)
    return out


# ---------------------------------------------------------------- outcomes


_STUCK = {
    Stage.APPROACH1: FailureMode.STUCK_FIRST,
    Stage.INSERTED1: FailureMode.FAILED_LIFT,
    Stage.LIFTED: FailureMode.STUCK_SECOND,
    Stage.INSERTED2: FailureMode.STUCK_SECOND,
}


def classify_outcome(episode: Episode, cfg: SimConfig | None = None) -> Outcome:
    """Map a terminated episode's event/stage trace to its outcome.

    Collisions and drops count toward the first insertion only while the
    stage is still Approach1.  Timeouts map to the stuck mode of the stage
    the episode was in.
    """
    event = episode.terminal_event
    if event not in TERMINAL_EVENTS:
        raise ContractViolation(f"episode has not terminated (event {event!r})")
    stage = episode.final_stage
    if event == "truncated":
        return Outcome.truncated()
    if event == "goal":
        if episode.meta.episode_type.ends_after_first and stage >= Stage.INSERTED1:
            return Outcome.success()
        raise ContractViolation("goal event on an episode type without an early goal")
    if event == "released":
        cov = episode.final_covered
        if stage == Stage.RELEASED and (cov[0] or cov[1]) and (cov[2] or cov[3]):
            return Outcome.success()
        return Outcome.failure(FailureMode.DROP_SECOND)
    if event == "collision":
        first = stage == Stage.APPROACH1
        return Outcome.failure(FailureMode.COLLISION_FIRST if first else FailureMode.COLLISION_SECOND)
    if event == "shirt_dropped":
        first = stage == Stage.APPROACH1
        return Outcome.failure(FailureMode.DROP_FIRST if first else FailureMode.DROP_SECOND)
    if event == "pulled_out":
        return Outcome.failure(FailureMode.PULLED_DROP)
    if stage == Stage.RELEASED:
        raise ContractViolation("timeout recorded after release")
    return Outcome.failure(_STUCK[stage])


class TimeoutMonitor:
    """Stall and hard-cap rules.

    Every stage transition starts a new phase.  A phase stalls once it has
    lasted ``stall_budget`` steps and the mean neck displacement over the
    last ``stall_budget`` steps is below ``progress_threshold``; it hits the
    hard cap after ``hard_cap`` steps regardless of progress.
    """

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.stage = Stage.APPROACH1
        self.phase_steps = 0
        self._window: deque[float] = deque(maxlen=cfg.stall_budget)
        self._sum = 0.0

    def update(self, before: SimState, after: SimState) -> str | None:
        if after.stage != self.stage:
            self.stage = after.stage
            self.phase_steps = 0
            self._window.clear()
            self._sum = 0.0
            return None
        self.phase_steps += 1
        moved = math.hypot(after.hanger.x - before.hanger.x, after.hanger.y - before.hanger.y)
        if len(self._window) == self._window.maxlen:
            self._sum -= self._window[0]
        self._window.append(moved)
        self._sum += moved
        if self.phase_steps >= self.cfg.hard_cap:
            return "hard_cap"
        if self.phase_steps >= self.cfg.stall_budget:
            # recompute exactly; the running sum only gates the check
            if self._sum / len(self._window) < self.cfg.progress_threshold * 1.5:
                if math.fsum(self._window) / len(self._window) < self.cfg.progress_threshold:
                    return "stall"
        return None


def check_polygon_simple(poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(i - j) <= 1 or (i == 0 and j == n - 1):
                continue
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]):
                return False
    return True


__all__ = [
    "ClothModel", "StepEvents", "TimeoutMonitor", "classify_outcome", "cloth_model", "collar_trace",
    "coverage", "hanger_points", "hanger_segments", "in_collision", "insertion_angle", "leg_inside",
    "observe", "read_sensors", "render", "render_geometry", "reset", "sensor_points", "stage_of", "step",
]
