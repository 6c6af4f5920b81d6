"""Scripted demonstrator and dataset presets.

The demonstrator is a waypoint controller with privileged access to the
simulator state.  Each control step it emits an absolute setpoint one
rate-limited step toward the current waypoint, plus Gaussian jitter, so
recorded actions look like teleoperated joint targets.

Preset subsets are generated from disjoint seed blocks rather than nested
draws of one pool.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import simworld
from .core import (
    CHUNK_LEN,
    Episode,
    EpisodeMeta,
    EpisodeType,
    InvalidArgument,
    Outcome,
    SimConfig,
    SimState,
    Source,
    Stage,
    wrap_angle,
)

log = logging.getLogger(__name__)

DEFAULT_NOISE = 1.0  # multiples of (2 mm, 2 mm, 0.01 rad)
JITTER_STD = np.array([0.002, 0.002, 0.01])
RETRY_CAP = 5
RETRY_SEED_STRIDE = 10_000  # retries stay inside their 100k type block
DESCEND_GAP = 0.012  # neck height above the collar at full insertion depth
LIFT_MARGIN = 0.04
STREAM_JITTER = 1


class DemoFailure(RuntimeError):
    """The scripted demonstrator failed its own task on every retry."""


def stream(seed: int, tag: int) -> np.random.Generator:
    """Independent PCG64 stream derived from ``(seed, tag)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(tag)])))


def waypoint(state: SimState, cfg: SimConfig) -> np.ndarray:
    """Current target pose ``[x, y, theta, g]`` of the scripted controller."""
    pose = state.hanger
    cloth = simworld.cloth_model(state, cfg)
    cx, cy = cloth.collar_center
    leg = cfg.leg_length
    theta_ins = simworld.insertion_angle(cfg)
    tip1 = simworld.hanger_points(pose, cfg)["tip1"]

    if state.stage == Stage.APPROACH1:
        hover = cy + 0.03
        if tip1[1] < cy + 0.02 and abs(tip1[0] - cx) > 0.02:
            # missed insertion: back out upward before moving sideways
            return np.array([pose.x, pose.y + (hover - tip1[1]), theta_ins, 0.0])
        aligned = abs(pose.x - cx) <= 0.006 and abs(wrap_angle(pose.theta - theta_ins)) <= 0.05
        if not aligned:
            y = max(pose.y, hover + leg) if tip1[1] > cy + 0.01 else pose.y
            return np.array([cx, y, theta_ins, 0.0])
        return np.array([cx, cy + DESCEND_GAP, theta_ins, 0.0])
    if state.stage == Stage.INSERTED1:
        if pose.y - cy > DESCEND_GAP + 0.003:
            return np.array([cx, cy + DESCEND_GAP, theta_ins, 0.0])
        return np.array([cx, cfg.lift_height + LIFT_MARGIN, theta_ins, 0.0])
    if state.stage == Stage.LIFTED:
        return np.array([cx, max(pose.y, cfg.lift_height + LIFT_MARGIN), 0.0, 0.0])
    return np.array([pose.x, pose.y, pose.theta, 1.0])


def expert_action(state: SimState, cfg: SimConfig, rng: np.random.Generator | None = None,
                  noise: float = 0.0) -> np.ndarray:
    wp = waypoint(state, cfg)
    pose = state.hanger
    d = wp[:2] - np.array([pose.x, pose.y])
    dist = math.hypot(*d)
    if dist > cfg.max_translation_step:
        d *= cfg.max_translation_step / dist
    dth = wrap_angle(wp[2] - pose.theta)
    dth = min(max(dth, -cfg.max_rotation_step), cfg.max_rotation_step)
    dg = min(max(wp[3] - state.gripper, -cfg.max_gripper_step), cfg.max_gripper_step)
    row = np.array([pose.x + d[0], pose.y + d[1], pose.theta + dth, state.gripper + dg])
    if noise > 0 and rng is not None:
        row[:3] += rng.standard_normal(3) * JITTER_STD * noise
    row[2] = wrap_angle(row[2])
    row[3] = min(max(row[3], 0.0), 1.0)
    return row


class ExpertPolicy:
    """Scripted expert exposed through the chunked-policy interface.

    It plans a chunk by running the controller forward on a copy of the
    privileged state; the sensor stream is not touched while planning.
    """

    instrumented = True
    privileged = True

    def __init__(self, cfg: SimConfig, noise: float = 0.0):
        self.cfg = cfg
        self.noise = noise

    def plan(self, obs, state: SimState, rng: np.random.Generator) -> np.ndarray:
        rows = []
        sim = state
        for _ in range(CHUNK_LEN):
            if sim.is_terminal:
                rows.append(rows[-1])
                continue
            row = expert_action(sim, self.cfg, rng, self.noise)
            rows.append(row)
            sim, _ = simworld.step(sim, row, self.cfg)
        return np.array(rows)


def run_controller(cfg: SimConfig, state: SimState, act, *, instrumented: bool = True):
    """Drive ``act(state) -> row`` until termination; returns recorded columns."""
    monitor = simworld.TimeoutMonitor(cfg)
    cols = {k: [] for k in ("scene", "wrist", "proprio", "instr", "actions", "stages")}
    event = None
    covered = (False,) * 4
    while event is None:
        obs = simworld.observe(state, cfg)
        row = act(state)
        nxt, ev = simworld.step(state, row, cfg)
        cols["scene"].append(obs.scene_grid)
        cols["wrist"].append(obs.wrist_grid)
        cols["proprio"].append(obs.proprio)
        cols["instr"].append(obs.instr)
        cols["actions"].append(row)
        cols["stages"].append(int(nxt.stage))
        covered = ev.covered
        event = nxt.terminal or monitor.update(state, nxt)
        state = nxt
    return cols, event, covered, state


def _assemble(cols, meta: EpisodeMeta, event: str, covered, instrumented: bool = True) -> Episode:
    return Episode(
        meta=meta,
        scene=np.array(cols["scene"], dtype=np.uint8),
        wrist=np.array(cols["wrist"], dtype=np.uint8),
        proprio=np.array(cols["proprio"], dtype=float),
        instr=np.array(cols["instr"], dtype=float) if instrumented else None,
        actions=np.array(cols["actions"], dtype=float),
        stages=np.array(cols["stages"], dtype=np.int64),
        terminal_event=event,
        final_covered=tuple(bool(c) for c in covered),
    )


def scripted_demo(cfg: SimConfig, seed: int, episode_type: EpisodeType | str,
                  noise: float = DEFAULT_NOISE) -> Episode:
    """One successful scripted demonstration.

    A failed attempt is retried with seed ``seed + k * RETRY_SEED_STRIDE``
    for ``k = 1 .. RETRY_CAP``; :class:`DemoFailure` if all fail.
    """
    kind = EpisodeType(episode_type)
    for attempt in range(RETRY_CAP + 1):
        s = seed + attempt * RETRY_SEED_STRIDE
        ep = _demo_once(cfg, s, kind, noise)
        if ep.meta.outcome.is_success:
            return ep
        log.debug("demo seed %d failed (%s); retrying", s, ep.meta.outcome.to_str())
    raise DemoFailure(f"scripted demo failed for seed {seed} after {RETRY_CAP} retries")


def _demo_once(cfg: SimConfig, seed: int, kind: EpisodeType, noise: float) -> Episode:
    state = simworld.reset(cfg, seed, kind)
    trace = tuple(simworld.collar_trace(state, cfg))
    init = (state.hanger.x, state.hanger.y, state.hanger.theta)
    offset = state.free_shoulder_offset
    jitter = stream(seed, STREAM_JITTER)
    cols, event, covered, _ = run_controller(cfg, state, lambda s: expert_action(s, cfg, jitter, noise))
    meta = EpisodeMeta(kind, Source.SCRIPTED_DEMO, Outcome.truncated(), seed, trace, offset, init)
    ep = _assemble(cols, meta, event, covered)
    ep.meta = replace(meta, outcome=simworld.classify_outcome(ep, cfg))
    return ep


# ---------------------------------------------------------------- datasets


PRESETS: dict[str, tuple[tuple[EpisodeType, int], ...]] = {
    "train180": ((EpisodeType.I, 50), (EpisodeType.II, 120), (EpisodeType.III, 10)),
    "train100": ((EpisodeType.I, 20), (EpisodeType.II, 80)),
    "train50": ((EpisodeType.II, 50),),
}
# disjoint seed blocks; each type gets its own 100k sub-block
PRESET_SEED_BASE = {"train180": 1_000_000, "train100": 2_000_000, "train50": 3_000_000}
TYPE_BLOCK = 100_000


@dataclass(frozen=True)
class DatasetSpec:
    counts: tuple[tuple[EpisodeType, int], ...]
    noise: float = DEFAULT_NOISE
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        for kind, n in self.counts:
            EpisodeType(kind)
            if n < 0:
                raise InvalidArgument("dataset counts must be non-negative")

    @classmethod
    def preset(cls, name: str, noise: float = DEFAULT_NOISE) -> DatasetSpec:
        if name not in PRESETS:
            raise InvalidArgument(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(PRESETS[name], noise=noise, seed=PRESET_SEED_BASE[name], name=name)


@dataclass
class Dataset:
    episodes: list[Episode]
    manifest: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.episodes)

    def counts_by_type(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for ep in self.episodes:
            k = ep.meta.episode_type.value
            out[k] = out.get(k, 0) + 1
        return out


_TYPE_INDEX = {EpisodeType.I: 0, EpisodeType.II: 1, EpisodeType.III: 2, EpisodeType.IV: 3}


def demo_seed(spec: DatasetSpec, kind: EpisodeType, i: int) -> int:
    return spec.seed + _TYPE_INDEX[EpisodeType(kind)] * TYPE_BLOCK + i


def build_dataset(cfg: SimConfig, spec: DatasetSpec) -> Dataset:
    from .persistence import episode_hash

    episodes = []
    for kind, n in spec.counts:
        for i in range(n):
            episodes.append(scripted_demo(cfg, demo_seed(spec, kind, i), kind, spec.noise))
    counts: dict[str, int] = {}
    for kind, n in spec.counts:
        counts[EpisodeType(kind).value] = counts.get(EpisodeType(kind).value, 0) + n
    manifest = {
        "name": spec.name,
        "noise": spec.noise,
        "seed": spec.seed,
        "counts": counts,
        "total": len(episodes),
        "episodes": [
            {
                "index": k,
                "type": ep.meta.episode_type.value,
                "source": ep.meta.source.value,
                "seed": ep.meta.seed,
                "steps": len(ep),
                "hash": episode_hash(ep),
            }
            for k, ep in enumerate(episodes)
        ],
    }
    return Dataset(episodes, manifest)
