import numpy as np
import pytest

from hangerlab import simworld
from hangerlab.core import EpisodeType, FailureMode, InvalidArgument, Outcome, SimConfig, Source
from hangerlab.expert import DatasetSpec, ExpertPolicy, build_dataset
from hangerlab.harness import (
    EvalRecord,
    InitDescriptor,
    RolloutConfig,
    enhance_dataset,
    evaluate,
    init_from_rollout,
    recreate_init,
    rollout_summary,
    run_rollout,
)
from hangerlab.persistence import episodes_equal

from stubs import Hold, Jiggle, Scripted

CFG = SimConfig()


class TestRollouts:
    def test_stall_ends_at_budget(self):
        ep = run_rollout(Hold(), CFG, 5)
        assert len(ep) == CFG.stall_budget == 600
        assert ep.terminal_event == "stall"
        assert ep.meta.outcome.mode is FailureMode.STUCK_FIRST

    def test_slow_progress_ends_at_hard_cap(self):
        ep = run_rollout(Jiggle(), CFG, 5)
        assert ep.terminal_event == "hard_cap"
        assert ep.meta.outcome.mode is FailureMode.STUCK_FIRST
        # the first steps travel to the jiggle spot; the phase never changes, so the cap counts every step
        assert len(ep) == CFG.hard_cap == 1200

    def test_expert_rollout_succeeds_and_is_deterministic(self):
        pol = ExpertPolicy(CFG, noise=1.0)
        a, b = run_rollout(pol, CFG, 123), run_rollout(pol, CFG, 123)
        assert a.meta.outcome.is_success
        assert episodes_equal(a, b)

    def test_opening_the_gripper_drops_first(self):
        ep = run_rollout(Scripted(succeed=set()), CFG, 2)
        assert ep.meta.outcome.mode is FailureMode.DROP_FIRST

    def test_modality_follows_policy(self):
        assert run_rollout(Hold(), CFG, 1).instr is None
        assert run_rollout(ExpertPolicy(CFG), CFG, 1).instr is not None

    def test_bad_chunk_shape(self):
        class Short(Hold):
            def plan(self, obs, state, rng):
                return super().plan(obs, state, rng)[:3]

        with pytest.raises(Exception):
            run_rollout(Short(), CFG, 0)

    def test_termination_bound(self):
        # at most (number of insertion phases x hard cap) steps, even for a good policy
        ep = run_rollout(ExpertPolicy(CFG, noise=3.0), CFG, 77)
        assert len(ep) <= 4 * CFG.hard_cap


class TestEvaluate:
    def test_replayed_success_set(self):
        wins = {0, 2, 3, 7, 11, 15, 19}
        rec = evaluate(Scripted(succeed=wins), CFG, 20, tag="replay")
        assert (rec.s, rec.N) == (7, 20)
        assert rec.failure_counts["DropFirst"] == 13
        assert rec.s + sum(rec.failure_counts.values()) == rec.N
        assert [Outcome.from_str(r["outcome"]).is_success for r in rec.rollouts] == [i in wins for i in range(20)]

    def test_zero_rollouts_rejected(self):
        with pytest.raises(InvalidArgument):
            evaluate(Hold(), CFG, 0)
        with pytest.raises(InvalidArgument):
            RolloutConfig(n_rollouts=0)

    def test_type_i_only(self):
        with pytest.raises(InvalidArgument):
            RolloutConfig(episode_type=EpisodeType.II)

    def test_seed_count_must_match(self):
        with pytest.raises(InvalidArgument):
            evaluate(Hold(), CFG, 2, seeds=[1, 2, 3])

    def test_record_invariant(self):
        with pytest.raises(Exception):
            EvalRecord("x", 4, 1, {"StuckFirst": 2})
        rec = EvalRecord.from_counts("y", 3, {"StuckFirst": 2})
        assert rec.N == 5 and rec.failures == 2

    def test_summary_fields(self):
        ep = run_rollout(ExpertPolicy(CFG), CFG, 9)
        row = rollout_summary(ep)
        assert row["steps"] == len(ep) and Outcome.from_str(row["outcome"]).is_success
        assert len(row["collar_trace"]) == len(ep.meta.collar_trace)


class TestRecreate:
    def test_exact_reset(self):
        failed = run_rollout(Hold(), CFG, 31)
        init = recreate_init(failed, CFG)
        fresh = init.reset(CFG)
        ref = simworld.reset(CFG, 31, EpisodeType.I)
        assert fresh == ref
        assert fresh.rng.bit_generator.state == ref.rng.bit_generator.state
        assert tuple(simworld.collar_trace(fresh, CFG)) == failed.meta.collar_trace

    def test_same_init_with_other_noise_seed(self):
        failed = run_rollout(Hold(), CFG, 31)
        init = recreate_init(failed)
        s = init.reset(CFG, seed=999, kind=EpisodeType.IV)
        assert s.free_shoulder_offset == failed.meta.shoulder_offset
        assert (s.hanger.x, s.hanger.y, s.hanger.theta) == tuple(failed.meta.initial_pose)

    def test_success_rejected(self):
        ok = run_rollout(ExpertPolicy(CFG), CFG, 9)
        with pytest.raises(InvalidArgument):
            recreate_init(ok)
        with pytest.raises(InvalidArgument):
            init_from_rollout(rollout_summary(ok))

    def test_descriptor_roundtrip(self):
        init = recreate_init(run_rollout(Hold(), CFG, 4))
        assert InitDescriptor.from_dict(init.to_dict()) == init
        assert init_from_rollout(rollout_summary(run_rollout(Hold(), CFG, 4))) == init


@pytest.fixture(scope="module")
def base():
    return build_dataset(CFG, DatasetSpec(((EpisodeType.I, 2),), seed=5, name="base"))


@pytest.fixture(scope="module")
def failures():
    return [run_rollout(Hold(), CFG, s) for s in (101, 102)]


class TestEnhance:
    def test_always_failing_expert_uses_all_attempts(self, base, failures):
        expert_eval = EvalRecord.from_counts("none", 0, {"DropFirst": 1})
        expert_eval.episodes = []
        ds = enhance_dataset(base, Scripted(succeed=set()), expert_eval, failures[:1], CFG)
        (row,) = ds.manifest["attempts_log"]
        assert len(row["attempts"]) == 10 and row["added"] == 0
        assert len(ds) == len(base)

    def test_always_succeeding_expert_stops_at_five(self, base, failures):
        expert = Scripted()
        expert_eval = evaluate(expert, CFG, 3, tag="expert")
        ds = enhance_dataset(base, expert, expert_eval, failures, CFG)
        assert [len(r["attempts"]) for r in ds.manifest["attempts_log"]] == [5, 5]
        assert ds.manifest["counts"] == {"base": 2, "eval_rollouts": 3, "targeted": 10, "total": 15}
        sources = [e.meta.source for e in ds.episodes]
        assert sources == [Source.SCRIPTED_DEMO] * 2 + [Source.POLICY_ROLLOUT] * 3 + [Source.EXPERT_ENHANCEMENT] * 10
        targeted = ds.episodes[5:]
        assert all(e.meta.episode_type is EpisodeType.IV and e.meta.outcome.is_success for e in targeted)
        # targeted rollouts start from the recreated initialisation
        assert all(e.meta.initial_pose == failures[k // 5].meta.initial_pose for k, e in enumerate(targeted))

    def test_partial_success_capped_at_ten(self, base, failures):
        expert = Scripted(succeed={1, 4, 8})
        expert_eval = EvalRecord.from_counts("none", 0, {"DropFirst": 1})
        expert_eval.episodes = []
        ds = enhance_dataset(base, expert, expert_eval, failures[:1], CFG)
        (row,) = ds.manifest["attempts_log"]
        assert len(row["attempts"]) == 10 and row["added"] == 3
        assert [Outcome.from_str(a["outcome"]).is_success for a in row["attempts"]] == [i in {1, 4, 8} for i in range(10)]

    def test_vision_expert_rejected(self, base):
        with pytest.raises(InvalidArgument):
            enhance_dataset(base, Hold(), EvalRecord.from_counts("x", 0, {}, N=0), [], CFG)

    def test_record_without_episodes_is_replayed(self, base):
        expert = ExpertPolicy(CFG, noise=1.0)
        rec = evaluate(expert, CFG, 2, tag="expert", keep_episodes=False)
        ds = enhance_dataset(base, expert, rec, [], CFG)
        assert ds.manifest["counts"]["eval_rollouts"] == rec.s
