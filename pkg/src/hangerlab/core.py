"""Domain types and numeric conventions shared across the package.

Coordinates are a planar side view of the workcell: ``x`` to the right,
``y`` up, both in meters; angles in radians.  The hanger pose is the pose
of its neck (the point where the hook meets the two legs).  Normalized
units map the workspace box and the angle/gripper ranges onto ``[-1, 1]``.

Flattened observation layout (fixed, row-major C order)::

    scene grid (32, 32, 2) | wrist grid (16, 16, 2) | proprio (4) | instr (4, optional)
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Iterator

import numpy as np

CHUNK_LEN = 16
EXEC_LEN = 8
ACTION_DIM = 4
N_SENSORS = 4


class InvalidArgument(ValueError):
    """Raised for malformed numeric inputs (non-finite values, bad shapes)."""


class ContractViolation(RuntimeError):
    """Raised when an operation is called outside its precondition."""


class ProprioClampWarning(UserWarning):
    """Proprioceptive values fell outside the workspace and were clamped."""


class EpisodeType(str, enum.Enum):
    I = "I"  # home start, full task
    II = "II"  # missed-first-insertion start, full task
    III = "III"  # missed-first-insertion start, ends after insertion 1
    IV = "IV"  # home start, ends after insertion 1

    @property
    def home_start(self) -> bool:
        return self in (EpisodeType.I, EpisodeType.IV)

    @property
    def ends_after_first(self) -> bool:
        return self in (EpisodeType.III, EpisodeType.IV)


class Source(str, enum.Enum):
    SCRIPTED_DEMO = "ScriptedDemo"
    POLICY_ROLLOUT = "PolicyRollout"
    EXPERT_ENHANCEMENT = "ExpertEnhancement"


class Stage(enum.IntEnum):
    APPROACH1 = 0
    INSERTED1 = 1
    LIFTED = 2
    INSERTED2 = 3
    RELEASED = 4


class FailureMode(str, enum.Enum):
    COLLISION_FIRST = "CollisionFirst"
    DROP_FIRST = "DropFirst"
    STUCK_FIRST = "StuckFirst"
    PULLED_DROP = "PulledDrop"
    FAILED_LIFT = "FailedLift"
    STUCK_SECOND = "StuckSecond"
    COLLISION_SECOND = "CollisionSecond"
    DROP_SECOND = "DropSecond"

    @property
    def label(self) -> str:
        return _MODE_LABELS[self]


_MODE_LABELS = {
    FailureMode.COLLISION_FIRST: "Collision [1st insertion]",
    FailureMode.DROP_FIRST: "Drop [1st insertion]",
    FailureMode.STUCK_FIRST: "Stuck [1st insertion]",
    FailureMode.PULLED_DROP: "Pulled drop",
    FailureMode.FAILED_LIFT: "Failed lift",
    FailureMode.STUCK_SECOND: "Stuck [2nd insertion]",
    FailureMode.COLLISION_SECOND: "Collision [2nd insertion]",
    FailureMode.DROP_SECOND: "Drop [2nd insertion]",
}

# Table column order.
FAILURE_MODES: tuple[FailureMode, ...] = tuple(FailureMode)


@dataclass(frozen=True)
class Outcome:
    kind: str  # "success" | "failure" | "truncated"
    mode: FailureMode | None = None

    def __post_init__(self):
        if self.kind not in ("success", "failure", "truncated"):
            raise InvalidArgument(f"unknown outcome kind {self.kind!r}")
        if (self.kind == "failure") != (self.mode is not None):
            raise InvalidArgument("a failure outcome carries exactly one failure mode")

    @classmethod
    def success(cls) -> Outcome:
        return cls("success")

    @classmethod
    def failure(cls, mode: FailureMode) -> Outcome:
        return cls("failure", FailureMode(mode))

    @classmethod
    def truncated(cls) -> Outcome:
        return cls("truncated")

    @property
    def is_success(self) -> bool:
        return self.kind == "success"

    @property
    def is_failure(self) -> bool:
        return self.kind == "failure"

    def to_str(self) -> str:
        return self.mode.value if self.mode is not None else self.kind

    @classmethod
    def from_str(cls, text: str) -> Outcome:
        if text in ("success", "truncated"):
            return cls(text)
        return cls.failure(FailureMode(text))


def wrap_angle(theta: float) -> float:
    """Wrap an angle into ``[-pi, pi)``.

    Odd multiples of pi map to ``-pi``, so ``wrap_angle(3*pi) == -pi``.
    """
    theta = float(theta)
    if not math.isfinite(theta):
        raise InvalidArgument(f"angle must be finite, got {theta}")
    if -math.pi <= theta < math.pi:
        return theta
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    wrapped -= math.pi
    # fmod of a value just below 2*pi can round up to exactly pi
    if wrapped >= math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidArgument("pose coordinates must be finite")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class SimConfig:
    """Every tunable of the simulated workcell.

    Lengths are meters, angles radians, budgets control steps (10 per second).
    """

    # workspace box
    x_min: float = -0.5
    x_max: float = 0.5
    y_min: float = 0.0
    y_max: float = 1.0
    # hanger: legs run from the neck to (+-half_span, -leg_drop) in the hanger frame
    leg_half_span: float = 0.15
    leg_drop: float = 0.08
    leg_thickness: float = 0.008
    hook_length: float = 0.05
    # T-shirt
    collar_x: float = 0.0
    collar_y: float = 0.55
    collar_width: float = 0.08
    collar_dip: float = 0.015
    shirt_half_width: float = 0.22
    shoulder_drop: float = 0.07
    shirt_bottom: float = 0.12
    shoulder_offset_range: float = 0.04  # free shoulder drawn from U[-r, r]
    missed_depth_min: float = 0.005  # Type II/III leg-1 tip below the collar
    missed_depth_max: float = 0.02
    missed_lateral: float = 0.07
    missed_lateral_jitter: float = 0.02
    # instrumentation
    sensor_high: float = 0.9
    sensor_low: float = 0.05
    sensor_sigma: float = 0.02
    sensor_fractions: tuple[float, float] = (0.3, 0.8)
    # contact
    snag_slip_threshold: float = 0.03
    collision_margin: float = 0.005
    gripper_box: tuple[float, float, float, float] = (-0.32, 0.40, -0.14, 0.56)
    neck_min_gap: float = 0.005
    lift_height: float = 0.80
    # actuation, per control step
    max_translation_step: float = 0.015
    max_rotation_step: float = 0.1
    max_gripper_step: float = 0.2
    release_threshold: float = 0.5
    release_hysteresis: float = 0.05
    home_pose: tuple[float, float, float] = (0.18, 0.80, 0.0)
    # timing
    control_hz: int = 10
    stall_budget: int = 600
    hard_cap: int = 1200
    progress_threshold: float = 0.001  # mean hanger displacement per step
    # rendering
    scene_grid: int = 32
    wrist_grid: int = 16
    wrist_center: tuple[float, float] = (0.0, 0.53)
    wrist_size: float = 0.24
    # randomness
    prng: str = "PCG64"
    seed: int = 0

    def __post_init__(self):
        h, l, s = self.sensor_high, self.sensor_low, self.sensor_sigma
        if not (0.0 < h <= 1.0 and 0.0 <= l < 1.0 and s >= 0.0):
            raise InvalidArgument("sensor levels must satisfy 0 < h <= 1, 0 <= l < 1, sigma >= 0")
        if not h > l + 5.0 * s:
            raise InvalidArgument("covered/uncovered readings are not separable: need h > l + 5 sigma")
        if self.stall_budget > self.hard_cap:
            raise InvalidArgument("stall budget exceeds hard cap")
        if self.scene_grid < 8 or self.wrist_grid < 8:
            raise InvalidArgument("grid sizes must be >= 8")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise InvalidArgument("empty workspace")
        lengths = (
            self.leg_half_span, self.leg_drop, self.leg_thickness, self.hook_length,
            self.collar_width, self.shirt_half_width, self.snag_slip_threshold,
            self.max_translation_step, self.max_rotation_step, self.max_gripper_step,
            self.wrist_size,
        )
        if min(lengths) <= 0:
            raise InvalidArgument("all lengths must be positive")
        if self.collar_width < self.leg_thickness:
            raise InvalidArgument("collar narrower than the hanger leg")
        if self.prng != "PCG64":
            raise InvalidArgument(f"unsupported PRNG {self.prng!r}")

    @property
    def leg_length(self) -> float:
        return math.hypot(self.leg_half_span, self.leg_drop)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for k, v in data.items():
            if k not in known:
                raise InvalidArgument(f"unknown SimConfig field {k!r}")
            kwargs[k] = tuple(v) if isinstance(v, list) else v
        return cls(**kwargs)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SimState:
    """Privileged world state.

    ``rng`` is the episode's sensor-noise stream.  It is owned by a single
    episode and excluded from equality; compare ``rng.bit_generator.state``
    when stream equality matters.
    """

    hanger: Pose2
    gripper: float
    shirt_held: bool
    free_shoulder_offset: float
    snag_displacement: float
    stage: Stage
    step_count: int
    episode_type: EpisodeType
    cloth_dy: float = 0.0  # vertical cloth displacement: carried lift minus snag slip
    neck_gap: float | None = None  # tightest neck-to-collar gap since insertion 1
    terminal: str | None = None
    rng: np.random.Generator = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.gripper <= 1.0:
            raise InvalidArgument("gripper opening must lie in [0, 1]")
        if self.step_count < 0:
            raise InvalidArgument("negative step count")

    @property
    def is_terminal(self) -> bool:
        return self.terminal is not None


@dataclass(frozen=True)
class Observation:
    """What a policy sees.

    ``proprio`` holds physical ``[x, y, theta, g]``; :func:`normalize_observation`
    maps it to ``[-1, 1]``.  ``instr`` is present iff the producer is instrumented.
    """

    scene_grid: np.ndarray
    wrist_grid: np.ndarray
    proprio: np.ndarray
    instr: np.ndarray | None = None

    def __post_init__(self):
        if self.proprio.shape != (4,):
            raise InvalidArgument("proprio must have 4 entries")
        if self.instr is not None and np.shape(self.instr) != (N_SENSORS,):
            raise InvalidArgument("instrumentation vector must have exactly 4 entries")

    @property
    def instrumented(self) -> bool:
        return self.instr is not None

    def without_instr(self) -> Observation:
        return Observation(self.scene_grid, self.wrist_grid, self.proprio, None)


def observation_length(cfg: SimConfig, instrumented: bool) -> int:
    n = 2 * cfg.scene_grid**2 + 2 * cfg.wrist_grid**2 + 4
    return n + N_SENSORS if instrumented else n


def _spans(cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([cfg.x_min, cfg.y_min, -math.pi, 0.0])
    hi = np.array([cfg.x_max, cfg.y_max, math.pi, 1.0])
    return lo, hi


def normalize_rows(rows: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Physical ``[x, y, theta, g]`` rows to ``[-1, 1]``."""
    lo, hi = _spans(cfg)
    return 2.0 * (np.asarray(rows, dtype=float) - lo) / (hi - lo) - 1.0


def denormalize_rows(rows: np.ndarray, cfg: SimConfig) -> np.ndarray:
    lo, hi = _spans(cfg)
    return (np.asarray(rows, dtype=float) + 1.0) * 0.5 * (hi - lo) + lo


def normalize_proprio(proprio: np.ndarray, cfg: SimConfig) -> np.ndarray:
    lo, hi = _spans(cfg)
    p = np.asarray(proprio, dtype=float)
    clipped = np.clip(p, lo, hi)
    if np.any(clipped != p):
        warnings.warn(f"proprio {p.tolist()} outside workspace; clamped", ProprioClampWarning, stacklevel=3)
    return normalize_rows(clipped, cfg)


def normalize_observation(obs: Observation, cfg: SimConfig) -> np.ndarray:
    """Flatten an observation into the network feature vector.

    Out-of-range proprio is clamped and reported with a
    :class:`ProprioClampWarning`.
    """
    parts = [
        np.asarray(obs.scene_grid, dtype=float).ravel(),
        np.asarray(obs.wrist_grid, dtype=float).ravel(),
        normalize_proprio(obs.proprio, cfg),
    ]
    if obs.instr is not None:
        parts.append(np.asarray(obs.instr, dtype=float))
    vec = np.concatenate(parts)
    assert vec.size == observation_length(cfg, obs.instrumented)
    return vec


def denormalize_observation(vec: np.ndarray, cfg: SimConfig) -> Observation:
    vec = np.asarray(vec, dtype=float)
    ns, nw = cfg.scene_grid, cfg.wrist_grid
    base = observation_length(cfg, False)
    if vec.size not in (base, base + N_SENSORS):
        raise InvalidArgument(f"feature vector of length {vec.size} matches no observation layout")
    a, b = 2 * ns * ns, 2 * ns * ns + 2 * nw * nw
    scene = vec[:a].reshape(ns, ns, 2).astype(np.uint8)
    wrist = vec[a:b].reshape(nw, nw, 2).astype(np.uint8)
    proprio = denormalize_rows(vec[b : b + 4], cfg)
    instr = vec[base:].copy() if vec.size > base else None
    return Observation(scene, wrist, proprio, instr)


def clamp_action(row, cfg: SimConfig) -> np.ndarray:
    """Clamp a physical action row into the valid action set."""
    row = np.array(row, dtype=float)
    if row.shape != (ACTION_DIM,):
        raise InvalidArgument(f"action row must have 4 entries, got shape {row.shape}")
    if np.any(np.isnan(row)):
        raise InvalidArgument("NaN in action row (policy divergence)")
    row[0] = min(max(row[0], cfg.x_min), cfg.x_max)
    row[1] = min(max(row[1], cfg.y_min), cfg.y_max)
    if not math.isfinite(row[2]):
        raise InvalidArgument("non-finite angle in action row")
    row[2] = wrap_angle(row[2])
    row[3] = min(max(row[3], 0.0), 1.0)
    return row


@dataclass(frozen=True)
class EpisodeMeta:
    episode_type: EpisodeType
    source: Source
    outcome: Outcome
    seed: int
    collar_trace: tuple[tuple[float, float], ...] = ()
    shoulder_offset: float = 0.0
    initial_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    policy_seed: int | None = None
    tag: str = ""


@dataclass
class Episode:
    """A recorded episode, stored column-wise.

    Row ``k`` of every array belongs to control step ``k``: the observation
    seen before acting, the action row sent, and the stage after the step.
    """

    meta: EpisodeMeta
    scene: np.ndarray  # (n, S, S, 2) uint8
    wrist: np.ndarray  # (n, W, W, 2) uint8
    proprio: np.ndarray  # (n, 4)
    instr: np.ndarray | None  # (n, 4) or None
    actions: np.ndarray  # (n, 4)
    stages: np.ndarray  # (n,) int
    terminal_event: str
    final_covered: tuple[bool, bool, bool, bool]

    def __post_init__(self):
        n = len(self.actions)
        if n == 0:
            raise InvalidArgument("an episode needs at least one frame")
        arrays = [self.scene, self.wrist, self.proprio, self.stages]
        if self.instr is not None:
            arrays.append(self.instr)
        if any(len(a) != n for a in arrays):
            raise InvalidArgument("episode columns disagree in length")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def instrumented(self) -> bool:
        return self.instr is not None

    def observation(self, k: int) -> Observation:
        instr = None if self.instr is None else self.instr[k]
        return Observation(self.scene[k], self.wrist[k], self.proprio[k], instr)

    @property
    def frames(self) -> Iterator[tuple[Observation, np.ndarray]]:
        for k in range(len(self)):
            yield self.observation(k), self.actions[k]

    @property
    def final_stage(self) -> Stage:
        return Stage(int(self.stages[-1]))
