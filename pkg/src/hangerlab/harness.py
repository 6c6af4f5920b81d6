"""Rollouts, evaluation campaigns and failure-targeted dataset enhancement."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import simworld
from .core import (
    EXEC_LEN,
    ContractViolation,
    Episode,
    EpisodeMeta,
    EpisodeType,
    FailureMode,
    InvalidArgument,
    Outcome,
    Pose2,
    SimConfig,
    SimState,
    Source,
)
from .expert import Dataset, stream

log = logging.getLogger(__name__)

EVAL_SEED_BASE = 9_000_000
ENHANCE_SEED_STRIDE = 7_919
STREAM_POLICY = 2
MAX_ADDED_PER_INIT = 5
MAX_ATTEMPTS_PER_INIT = 10


@dataclass(frozen=True)
class RolloutConfig:
    """Evaluation campaign settings.  Timeouts come from :class:`SimConfig`."""

    n_rollouts: int = 30
    seed_base: int = EVAL_SEED_BASE
    exec_len: int = EXEC_LEN
    episode_type: EpisodeType = EpisodeType.I

    def __post_init__(self):
        if self.n_rollouts < 1:
            raise InvalidArgument("need at least one rollout")
        if EpisodeType(self.episode_type) is not EpisodeType.I:
            raise InvalidArgument("evaluation rollouts are Type I only")

    @property
    def seeds(self) -> list[int]:
        return [self.seed_base + i for i in range(self.n_rollouts)]


@dataclass(frozen=True)
class InitDescriptor:
    """Everything needed to reset the simulator to a recorded initial state."""

    seed: int
    episode_type: EpisodeType
    shoulder_offset: float
    initial_pose: tuple[float, float, float]

    def reset(self, cfg: SimConfig, seed: int | None = None, kind: EpisodeType | None = None) -> SimState:
        """Reset to this initialisation; ``seed`` only reseeds the noise stream."""
        return simworld.reset(
            cfg,
            self.seed if seed is None else seed,
            self.episode_type if kind is None else kind,
            shoulder_offset=self.shoulder_offset,
            hanger_pose=Pose2(*self.initial_pose),
        )

    def to_dict(self) -> dict:
        return {"seed": self.seed, "episode_type": self.episode_type.value,
                "shoulder_offset": self.shoulder_offset, "initial_pose": list(self.initial_pose)}

    @classmethod
    def from_dict(cls, d: dict) -> InitDescriptor:
        return cls(int(d["seed"]), EpisodeType(d["episode_type"]), float(d["shoulder_offset"]),
                   tuple(float(v) for v in d["initial_pose"]))


# ----------------------------------------------------------------- rollouts


def run_rollout(policy, cfg: SimConfig, seed: int, *, episode_type: EpisodeType = EpisodeType.I,
                init: InitDescriptor | None = None, exec_len: int = EXEC_LEN,
                source: Source = Source.POLICY_ROLLOUT, tag: str = "") -> Episode:
    """Closed-loop rollout: plan a chunk, execute its first ``exec_len`` rows, repeat.

    ``policy.plan(obs, state, rng)`` returns a ``(16, 4)`` physical chunk;
    the privileged state is only meant for the scripted expert.  The
    episode ends on a terminal event, a stall, or the per-phase hard cap.
    """
    kind = EpisodeType(episode_type)
    state = simworld.reset(cfg, seed, kind) if init is None else init.reset(cfg, seed, kind)
    instrumented = bool(policy.instrumented)
    trace = tuple(simworld.collar_trace(state, cfg))
    meta = EpisodeMeta(kind, source, Outcome.truncated(), seed, trace, state.free_shoulder_offset,
                       (state.hanger.x, state.hanger.y, state.hanger.theta), policy_seed=seed, tag=tag)
    rng = stream(seed, STREAM_POLICY)
    monitor = simworld.TimeoutMonitor(cfg)
    cols = {k: [] for k in ("scene", "wrist", "proprio", "instr", "actions", "stages")}
    event = None
    covered = (False,) * 4
    chunk = None
    k = 0
    while event is None:
        obs = simworld.observe(state, cfg, instrumented=instrumented)
        if k % exec_len == 0:
            chunk = np.asarray(policy.plan(obs, state, rng), dtype=float)
            if chunk.shape[0] < exec_len or chunk.shape[1:] != (4,):
                raise ContractViolation(f"policy returned a chunk of shape {chunk.shape}")
        row = chunk[k % exec_len]
        nxt, ev = simworld.step(state, row, cfg)
        cols["scene"].append(obs.scene_grid)
        cols["wrist"].append(obs.wrist_grid)
        cols["proprio"].append(obs.proprio)
        cols["instr"].append(obs.instr)
        cols["actions"].append(np.asarray(row, dtype=float))
        cols["stages"].append(int(nxt.stage))
        covered = ev.covered
        event = nxt.terminal or monitor.update(state, nxt)
        state = nxt
        k += 1
    ep = Episode(
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
    ep.meta = replace(meta, outcome=simworld.classify_outcome(ep, cfg))
    return ep


# --------------------------------------------------------------- evaluation


@dataclass
class EvalRecord:
    """Aggregate of an evaluation campaign.

    ``rollouts`` holds per-rollout metadata; ``episodes`` keeps the full
    recordings in memory and is not persisted.
    """

    tag: str
    N: int
    s: int
    failure_counts: dict[str, int]
    rollouts: list[dict] = field(default_factory=list)
    instrumented: bool | None = None
    episodes: list[Episode] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        counts = {m.value: 0 for m in FailureMode}
        for k, v in self.failure_counts.items():
            counts[FailureMode(k).value] = int(v)
        self.failure_counts = counts
        if self.N < 0 or not 0 <= self.s <= self.N:
            raise InvalidArgument("need 0 <= s <= N")
        if self.s + sum(counts.values()) != self.N:
            raise ContractViolation("successes plus failures must equal N")

    @property
    def failures(self) -> int:
        return self.N - self.s

    @classmethod
    def from_counts(cls, tag: str, s: int, failure_counts: dict | None = None, N: int | None = None) -> EvalRecord:
        """Synthetic record; remaining failures are left unspecified only if they sum up."""
        fc = dict(failure_counts or {})
        total = s + sum(fc.values())
        return cls(tag, total if N is None else N, s, fc)

    def to_dict(self) -> dict:
        return {"tag": self.tag, "N": self.N, "s": self.s, "failure_counts": dict(self.failure_counts),
                "rollouts": self.rollouts, "instrumented": self.instrumented}

    @classmethod
    def from_dict(cls, d: dict) -> EvalRecord:
        return cls(d["tag"], int(d["N"]), int(d["s"]), d["failure_counts"], list(d.get("rollouts", [])),
                   d.get("instrumented"))


def rollout_summary(ep: Episode) -> dict:
    m = ep.meta
    return {
        "seed": m.seed,
        "steps": len(ep),
        "outcome": m.outcome.to_str(),
        "episode_type": m.episode_type.value,
        "shoulder_offset": m.shoulder_offset,
        "initial_pose": list(m.initial_pose),
        "collar_trace": [list(p) for p in m.collar_trace],
    }


def evaluate(policy, cfg: SimConfig, n_rollouts: int | None = None, seeds=None, *, tag: str = "",
             rollout_config: RolloutConfig | None = None, keep_episodes: bool = True) -> EvalRecord:
    """Run ``n_rollouts`` Type-I rollouts and aggregate them."""
    rc = rollout_config or RolloutConfig(n_rollouts if n_rollouts is not None else 30)
    if n_rollouts is not None and n_rollouts < 1:
        raise InvalidArgument("n_rollouts must be >= 1")
    if seeds is None:
        seeds = rc.seeds if n_rollouts is None else [rc.seed_base + i for i in range(n_rollouts)]
    seeds = list(seeds)
    if n_rollouts is not None and len(seeds) != n_rollouts:
        raise InvalidArgument(f"{len(seeds)} seeds given for {n_rollouts} rollouts")
    if not seeds:
        raise InvalidArgument("need at least one rollout")
    episodes, rows = [], []
    s = 0
    counts: dict[str, int] = {}
    for seed in seeds:
        ep = run_rollout(policy, cfg, seed, episode_type=rc.episode_type, exec_len=rc.exec_len, tag=tag)
        out = ep.meta.outcome
        if out.is_success:
            s += 1
        elif out.is_failure:
            counts[out.mode.value] = counts.get(out.mode.value, 0) + 1
        else:
            raise ContractViolation(f"rollout {seed} ended without an outcome")
        rows.append(rollout_summary(ep))
        if keep_episodes:
            episodes.append(ep)
        log.info("%s seed %d: %s in %d steps", tag or "rollout", seed, out.to_str(), len(ep))
    return EvalRecord(tag, len(seeds), s, counts, rows, bool(policy.instrumented),
                      episodes if keep_episodes else None)


# -------------------------------------------------------------- enhancement


def recreate_init(failed: Episode, cfg: SimConfig | None = None) -> InitDescriptor:
    """Initial-state descriptor of a failed rollout; exact in simulation."""
    if not failed.meta.outcome.is_failure:
        raise InvalidArgument("only failed episodes are recreated")
    m = failed.meta
    return InitDescriptor(m.seed, m.episode_type, m.shoulder_offset, tuple(m.initial_pose))


def init_from_rollout(row: dict) -> InitDescriptor:
    """Descriptor from a persisted rollout summary."""
    if not Outcome.from_str(row["outcome"]).is_failure:
        raise InvalidArgument("only failed rollouts are recreated")
    return InitDescriptor(int(row["seed"]), EpisodeType(row.get("episode_type", "I")),
                          float(row["shoulder_offset"]), tuple(float(v) for v in row["initial_pose"]))


def _successful_rollouts(record: EvalRecord, policy, cfg: SimConfig) -> list[Episode]:
    if record.episodes is not None:
        eps = record.episodes
    else:
        # records on disk keep only summaries; rollouts are deterministic, so replay them
        eps = [run_rollout(policy, cfg, int(r["seed"]), tag=record.tag) for r in record.rollouts
               if Outcome.from_str(r["outcome"]).is_success]
        if len(eps) != record.s or not all(e.meta.outcome.is_success for e in eps):
            raise ContractViolation("replayed expert rollouts disagree with the stored record")
    return [e for e in eps if e.meta.outcome.is_success and e.meta.episode_type is EpisodeType.I]


def enhance_dataset(base: Dataset, expert_policy, expert_eval: EvalRecord, student_failures, cfg: SimConfig,
                    *, max_added: int = MAX_ADDED_PER_INIT, max_attempts: int = MAX_ATTEMPTS_PER_INIT) -> Dataset:
    """Teacher-to-student dataset enhancement.

    Appends the expert's successful Type-I evaluation rollouts, then, for
    every student failure, recreates its initialisation and runs expert
    Type-IV rollouts until ``max_added`` succeed or ``max_attempts`` are
    spent.  Successful rollouts are kept as recorded, corrections included.
    ``student_failures`` may hold failed episodes or :class:`InitDescriptor`.
    """
    from .persistence import episode_hash

    if not expert_policy.instrumented:
        raise InvalidArgument("the enhancement expert must be instrumented")
    evals = [replace_source(e, Source.POLICY_ROLLOUT) for e in _successful_rollouts(expert_eval, expert_policy, cfg)]
    targeted: list[Episode] = []
    log_rows = []
    for item in student_failures:
        init = item if isinstance(item, InitDescriptor) else recreate_init(item, cfg)
        attempts, added = [], 0
        for a in range(max_attempts):
            seed = init.seed + (a + 1) * ENHANCE_SEED_STRIDE
            ep = run_rollout(expert_policy, cfg, seed, episode_type=EpisodeType.IV, init=init,
                             source=Source.EXPERT_ENHANCEMENT, tag=expert_eval.tag)
            ok = ep.meta.outcome.is_success
            attempts.append({"seed": seed, "outcome": ep.meta.outcome.to_str(), "steps": len(ep)})
            if ok:
                targeted.append(ep)
                added += 1
                if added >= max_added:
                    break
        log_rows.append({"init": init.to_dict(), "attempts": attempts, "added": added})
    episodes = list(base.episodes) + evals + targeted
    manifest = {
        "name": f"{base.manifest.get('name', 'base')}+enhanced",
        "base": base.manifest.get("name", "base"),
        "counts": {
            "base": len(base.episodes),
            "eval_rollouts": len(evals),
            "targeted": len(targeted),
            "total": len(episodes),
        },
        "total": len(episodes),
        "attempts_log": log_rows,
        "episodes": [
            {"index": k, "type": ep.meta.episode_type.value, "source": ep.meta.source.value,
             "seed": ep.meta.seed, "steps": len(ep), "hash": episode_hash(ep)}
            for k, ep in enumerate(episodes)
        ],
    }
    return Dataset(episodes, manifest)


def replace_source(ep: Episode, source: Source) -> Episode:
    return replace(ep, meta=replace(ep.meta, source=source))
