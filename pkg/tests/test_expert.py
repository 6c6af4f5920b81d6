from dataclasses import replace

import numpy as np
import pytest

from hangerlab import expert, simworld
from hangerlab.core import EpisodeType, FailureMode, InvalidArgument, Outcome, SimConfig, Source, Stage
from hangerlab.expert import (
    PRESETS,
    RETRY_CAP,
    RETRY_SEED_STRIDE,
    DatasetSpec,
    DemoFailure,
    ExpertPolicy,
    _demo_once,
    build_dataset,
    demo_seed,
    scripted_demo,
)
from hangerlab.persistence import episode_hash

CFG = SimConfig()


class TestScriptedDemo:
    def test_noise_free_type_i_succeeds(self):
        for seed in range(5):
            ep = scripted_demo(CFG, seed, EpisodeType.I, noise=0.0)
            assert ep.meta.outcome.is_success
            assert ep.final_stage == Stage.RELEASED

    @pytest.mark.parametrize("kind", [EpisodeType.III, EpisodeType.IV])
    def test_early_goal_types_end_after_first_insertion(self, kind):
        ep = scripted_demo(CFG, 11, kind)
        assert ep.terminal_event == "goal"
        assert ep.final_stage == Stage.INSERTED1
        assert ep.meta.outcome.is_success
        # the goal fires on the step that first reaches Inserted1
        assert int(np.sum(ep.stages == Stage.INSERTED1)) == 1

    def test_stage_sequence_monotone(self):
        for kind in EpisodeType:
            ep = scripted_demo(CFG, 3, kind)
            assert np.all(np.diff(ep.stages) >= 0)

    def test_default_noise_success_rate(self):
        # first-attempt successes, i.e. without the retry loop
        wins = sum(_demo_once(CFG, 50_000 + s, EpisodeType.I, 1.0).meta.outcome.is_success for s in range(100))
        assert wins >= 95

    def test_records_instrumentation(self):
        ep = scripted_demo(CFG, 1, "II")
        assert ep.instr is not None and ep.instr.shape == (len(ep), 4)
        assert ep.meta.source is Source.SCRIPTED_DEMO

    def test_deterministic(self):
        assert episode_hash(scripted_demo(CFG, 9, "II")) == episode_hash(scripted_demo(CFG, 9, "II"))

    def test_jitter_changes_actions(self):
        a, b = scripted_demo(CFG, 9, "I", noise=0.0), scripted_demo(CFG, 9, "I", noise=1.0)
        assert episode_hash(a) != episode_hash(b)

    def test_retry_cap(self, monkeypatch):
        tried = []

        def always_fails(cfg, seed, kind, noise):
            tried.append(seed)
            ep = _demo_once(cfg, seed, kind, noise)
            ep.meta = replace(ep.meta, outcome=Outcome.failure(FailureMode.STUCK_FIRST))
            return ep

        monkeypatch.setattr(expert, "_demo_once", always_fails)
        with pytest.raises(DemoFailure):
            scripted_demo(CFG, 7, "I")
        assert tried == [7 + k * RETRY_SEED_STRIDE for k in range(RETRY_CAP + 1)]


class TestExpertPolicy:
    def test_plan_does_not_touch_state(self):
        s = simworld.reset(CFG, 4, EpisodeType.I)
        obs = simworld.observe(s, CFG)  # reading the sensors draws from the episode stream
        before = (s.hanger, s.stage, s.rng.bit_generator.state)
        chunk = ExpertPolicy(CFG, noise=1.0).plan(obs, s, np.random.default_rng(0))
        assert chunk.shape == (16, 4)
        assert (s.hanger, s.stage, s.rng.bit_generator.state) == before


class TestDatasets:
    def test_preset_compositions(self):
        assert {k: {t.value: n for t, n in v} for k, v in PRESETS.items()} == {
            "train180": {"I": 50, "II": 120, "III": 10},
            "train100": {"I": 20, "II": 80},
            "train50": {"II": 50},
        }

    def test_train50_manifest(self):
        ds = build_dataset(CFG, DatasetSpec.preset("train50"))
        assert ds.manifest["counts"] == {"II": 50} and ds.manifest["total"] == 50 == len(ds)
        assert all(e.meta.outcome.is_success for e in ds.episodes)

    def test_empty_spec(self):
        ds = build_dataset(CFG, DatasetSpec((), name="empty"))
        assert len(ds) == 0 and ds.manifest["total"] == 0 and ds.manifest["episodes"] == []

    def test_reproducible(self):
        spec = DatasetSpec(((EpisodeType.I, 2), (EpisodeType.III, 2)), seed=123)
        assert build_dataset(CFG, spec).manifest == build_dataset(CFG, spec).manifest

    def test_preset_seed_ranges_disjoint(self):
        ranges = []
        for name, counts in PRESETS.items():
            spec = DatasetSpec.preset(name)
            for kind, n in counts:
                base = range(demo_seed(spec, kind, 0), demo_seed(spec, kind, n))
                ranges.append({s + k * RETRY_SEED_STRIDE for s in base for k in range(RETRY_CAP + 1)})
        for i, a in enumerate(ranges):
            for b in ranges[i + 1:]:
                assert not a & b

    def test_unknown_preset(self):
        with pytest.raises(InvalidArgument):
            DatasetSpec.preset("train7")

    def test_negative_count(self):
        with pytest.raises(InvalidArgument):
            DatasetSpec(((EpisodeType.I, -1),))
