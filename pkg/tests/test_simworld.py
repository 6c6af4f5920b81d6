import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hangerlab import simworld as sw
from hangerlab.core import (
    ContractViolation,
    Episode,
    EpisodeMeta,
    EpisodeType,
    FailureMode,
    Outcome,
    Pose2,
    SimConfig,
    Source,
    Stage,
)

CFG = SimConfig()


def state_at(pose, kind=EpisodeType.I, seed=0, **kw):
    s = sw.reset(CFG, seed, kind, hanger_pose=pose, shoulder_offset=kw.pop("offset", 0.0))
    return replace(s, **kw)


def inserted_pose(cfg=CFG, offset=0.0, gap=0.012):
    c = sw._cloth(offset, 0.0, cfg).collar_center
    return Pose2(c[0], c[1] + gap, sw.insertion_angle(cfg))


class TestGeometry:
    def test_insertion_angle_points_leg_down(self):
        # -pi/2 + atan(0.08/0.15)
        assert sw.insertion_angle(CFG) == pytest.approx(-1.0808390005411683, abs=1e-15)
        p = sw.hanger_points(Pose2(0.1, 0.7, sw.insertion_angle(CFG)), CFG)
        assert p["tip1"][0] == pytest.approx(0.1, abs=1e-15)
        assert p["tip1"][1] == pytest.approx(0.7 - CFG.leg_length, abs=1e-15)

    def test_points_at_zero_angle(self):
        p = sw.hanger_points(Pose2(0.0, 0.5, 0.0), CFG)
        np.testing.assert_allclose(p["tip1"], [0.15, 0.42], atol=1e-15)
        np.testing.assert_allclose(p["tip2"], [-0.15, 0.42], atol=1e-15)
        np.testing.assert_allclose(p["hook"], [0.0, 0.55], atol=1e-15)

    def test_sensor_sites(self):
        s = sw.sensor_points(Pose2(0.0, 0.5, 0.0), CFG)
        np.testing.assert_allclose(s, [[0.045, 0.476], [0.12, 0.436], [-0.045, 0.476], [-0.12, 0.436]], atol=1e-15)

    @given(st.floats(-0.04, 0.04), st.floats(-0.1, 0.1))
    def test_cloth_simple_ccw_with_collar_on_boundary(self, offset, dy):
        cloth = sw._cloth(offset, dy, CFG)
        poly = cloth.polygon
        assert sw.check_polygon_simple(poly)
        x, y = poly[:, 0], poly[:, 1]
        assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0
        np.testing.assert_array_equal(cloth.collar[0], poly[6])
        np.testing.assert_array_equal(cloth.collar[1], poly[3])
        assert np.linalg.norm(cloth.collar[1] - cloth.collar[0]) >= CFG.leg_thickness

    def test_self_intersecting_polygon_detected(self):
        bow = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
        assert not sw.check_polygon_simple(bow)

    def test_segments_intersect(self):
        assert sw.segments_intersect((0, 0), (1, 1), (0, 1), (1, 0))
        assert not sw.segments_intersect((0, 0), (1, 0), (0, 1), (1, 1))
        assert sw.segments_intersect((0, 0), (1, 0), (1, 0), (2, 5))  # touching endpoint

    def test_segment_box(self):
        box = (0, 0, 1, 1)
        assert sw.segment_hits_box((-1, 0.5), (2, 0.5), box)
        assert not sw.segment_hits_box((-1, 2), (2, 2), box)

    def test_top_boundary(self):
        sq = np.array([[0, 0], [2, 0], [2, 1], [0, 1]], dtype=float)
        assert sw.top_boundary_y(sq, 0.5) == 1.0
        assert sw.top_boundary_y(sq, 3.0) is None


class TestRender:
    def test_square_fill_matches_hand_count(self):
        # square [-0.25, 0.25] x [0.25, 0.75]; cell pitch 1/32, centers at (k + 0.5)/32 - 0.5
        # x-centers inside: k = 8 .. 23 -> 16 columns; rows likewise 16
        sq = np.array([[-0.25, 0.25], [0.25, 0.25], [0.25, 0.75], [-0.25, 0.75]])
        scene, wrist = sw.render_geometry(sq, None, CFG)
        assert scene[:, :, 0].sum() == 256
        assert scene[8:24, 8:24, 0].all()
        assert scene[:, :, 1].sum() == 0
        # wrist window [-0.12, 0.12] x [0.41, 0.65] lies fully inside the square
        assert wrist[:, :, 0].all()

    def test_row_zero_is_top(self):
        band = np.array([[-0.5, 0.9], [0.5, 0.9], [0.5, 1.0], [-0.5, 1.0]])
        scene, _ = sw.render_geometry(band, None, CFG)
        # only row centers above 0.9: 1 - (r + 0.5)/32 > 0.9 -> r = 0, 1, 2
        np.testing.assert_array_equal(scene[:, 0, 0], [1, 1, 1] + [0] * 29)

    def test_horizontal_stroke(self):
        seg = np.array([[-0.5, 0.5 - 1 / 64, 0.5, 0.5 - 1 / 64]])  # on row 16's centers
        scene, _ = sw.render_geometry(None, seg, CFG)
        assert scene[16, :, 1].all()
        # half-width is one half cell, so the neighbouring rows sit exactly 1/32 away
        assert scene[:, :, 1].sum() == 32

    def test_observe_consumes_noise_either_way(self):
        a = sw.reset(CFG, 3, EpisodeType.I)
        b = sw.reset(CFG, 3, EpisodeType.I)
        oa = sw.observe(a, CFG, instrumented=True)
        ob = sw.observe(b, CFG, instrumented=False)
        assert ob.instr is None and oa.instr.shape == (4,)
        assert a.rng.bit_generator.state == b.rng.bit_generator.state


class TestReset:
    def test_deterministic(self):
        a, b = sw.reset(CFG, 42, "II"), sw.reset(CFG, 42, "II")
        assert a == b
        assert a.rng.bit_generator.state == b.rng.bit_generator.state

    def test_home_start(self):
        s = sw.reset(CFG, 1, EpisodeType.I)
        assert (s.hanger.x, s.hanger.y, s.hanger.theta) == CFG.home_pose
        assert s.stage == Stage.APPROACH1 and s.shirt_held and s.gripper == 0.0

    @pytest.mark.parametrize("seed", range(20))
    def test_missed_insertion_start(self, seed):
        s = sw.reset(CFG, seed, EpisodeType.II)
        cloth = sw.cloth_model(s, CFG)
        tip = sw.hanger_points(s.hanger, CFG)["tip1"]
        depth = cloth.collar_center[1] - tip[1]
        assert CFG.missed_depth_min <= depth <= CFG.missed_depth_max + 1e-12
        assert tip[0] > cloth.collar[1][0]
        assert not sw.leg_inside(s.hanger, cloth, CFG, 1)
        assert not sw.in_collision(s.hanger, CFG)
        assert sw.stage_of(s, CFG) == Stage.APPROACH1

    @given(st.integers(0, 10**6))
    @settings(max_examples=50)
    def test_offset_in_range(self, seed):
        s = sw.reset(CFG, seed, EpisodeType.I)
        assert abs(s.free_shoulder_offset) <= CFG.shoulder_offset_range


class TestStep:
    def test_rate_limit(self):
        s = sw.reset(CFG, 0, EpisodeType.I)
        n, _ = sw.step(s, [0.18, 0.5, 0.0, 0.0], CFG)
        assert n.hanger.y == pytest.approx(0.8 - CFG.max_translation_step, abs=1e-15)
        assert n.step_count == 1

    def test_rotation_limit(self):
        s = sw.reset(CFG, 0, EpisodeType.I)
        n, _ = sw.step(s, [0.18, 0.8, 1.0, 0.0], CFG)
        assert n.hanger.theta == pytest.approx(CFG.max_rotation_step, abs=1e-15)

    def test_insertion_stage(self):
        s = state_at(Pose2(0.0, 0.6, sw.insertion_angle(CFG)))
        pose = inserted_pose()
        n = s
        for _ in range(10):  # 15 mm per step from 0.6 down to 0.562
            n, _ = sw.step(n, [pose.x, pose.y, pose.theta, 0.0], CFG)
        assert n.stage == Stage.INSERTED1
        assert n.terminal is None

    def test_type_iv_goal_after_insertion(self):
        pose = inserted_pose()
        s = state_at(Pose2(pose.x, pose.y + 0.01, pose.theta), kind=EpisodeType.IV)
        n, _ = sw.step(s, [pose.x, pose.y, pose.theta, 0.0], CFG)
        assert n.stage >= Stage.INSERTED1 and n.terminal == "goal"

    def test_drop_before_insertion(self):
        s = sw.reset(CFG, 0, EpisodeType.I)
        for _ in range(3):
            s, ev = sw.step(s, [0.18, 0.8, 0.0, 1.0], CFG)
        # 0.2 per step: 0.6 >= 0.55 on the third step
        assert s.terminal == "shirt_dropped" and ev.shirt_dropped and not s.shirt_held

    def test_collision(self):
        s = state_at(Pose2(-0.05, 0.5, 0.0))
        n, ev = sw.step(s, [-0.06, 0.5, 0.0, 0.0], CFG)
        # leg 2 reaches x = -0.21 inside the gripper box
        assert n.terminal == "collision" and ev.collision

    def test_snag_drags_cloth_and_pulls_out(self):
        # push leg 1 straight down onto the right shoulder, away from the collar
        x = 0.16
        top = sw.top_boundary_y(sw._cloth(0.0, 0.0, CFG).polygon, x)
        s = state_at(Pose2(x, top + CFG.leg_length + 0.002, sw.insertion_angle(CFG)))
        events = []
        while s.terminal is None and s.step_count < 20:
            s, ev = sw.step(s, [x, 0.3, sw.insertion_angle(CFG), 0.0], CFG)
            events.append(ev)
        assert s.terminal == "pulled_out"
        assert s.snag_displacement > CFG.snag_slip_threshold
        assert s.cloth_dy < 0

    def test_terminated_state_cannot_step(self):
        s = replace(sw.reset(CFG, 0, EpisodeType.I), terminal="collision")
        with pytest.raises(ContractViolation):
            sw.step(s, [0, 0.5, 0, 0], CFG)

    @given(st.lists(st.tuples(st.floats(-0.5, 0.5), st.floats(0.0, 1.0), st.floats(-3.1, 3.1), st.floats(0, 1)),
                    min_size=1, max_size=40), st.integers(0, 1000), st.sampled_from(list(EpisodeType)))
    @settings(max_examples=60, deadline=None)
    def test_stage_monotone_and_terminal_on_release(self, rows, seed, kind):
        s = sw.reset(CFG, seed, kind)
        for row in rows:
            n, _ = sw.step(s, row, CFG)
            assert n.stage >= s.stage
            assert -math.pi <= n.hanger.theta < math.pi
            if not n.shirt_held:
                assert n.terminal is not None
            s = n
            if s.terminal:
                break


class TestSensors:
    def test_noise_free_levels(self):
        cfg = SimConfig(sensor_sigma=0.0)
        s = sw.reset(cfg, 0, EpisodeType.I)
        np.testing.assert_array_equal(sw.read_sensors(s, cfg), [cfg.sensor_low] * 4)

    def test_covered_reads_high(self):
        pose = inserted_pose(gap=0.012)
        s = state_at(pose, stage=Stage.INSERTED1)
        cov = sw.coverage(s, CFG)
        assert cov[1]  # leg 1 outer site is below the collar, inside the shirt
        r = sw.read_sensors(s, CFG)
        for c, v in zip(cov, r):
            assert abs(v - (CFG.sensor_high if c else CFG.sensor_low)) < 5 * CFG.sensor_sigma
            assert 0.0 <= v <= 1.0


def _episode(event, stages, kind=EpisodeType.I, covered=(False,) * 4):
    n = len(stages)
    meta = EpisodeMeta(kind, Source.POLICY_ROLLOUT, Outcome.truncated(), 0)
    return Episode(meta, np.zeros((n, 32, 32, 2), np.uint8), np.zeros((n, 16, 16, 2), np.uint8),
                   np.zeros((n, 4)), None, np.zeros((n, 4)), np.array(stages), event, covered)


class TestClassify:
    @pytest.mark.parametrize("event,stage,mode", [
        ("collision", Stage.APPROACH1, FailureMode.COLLISION_FIRST),
        ("collision", Stage.INSERTED1, FailureMode.COLLISION_SECOND),
        ("collision", Stage.LIFTED, FailureMode.COLLISION_SECOND),
        ("shirt_dropped", Stage.APPROACH1, FailureMode.DROP_FIRST),
        ("shirt_dropped", Stage.LIFTED, FailureMode.DROP_SECOND),
        ("pulled_out", Stage.APPROACH1, FailureMode.PULLED_DROP),
        ("stall", Stage.APPROACH1, FailureMode.STUCK_FIRST),
        ("hard_cap", Stage.APPROACH1, FailureMode.STUCK_FIRST),
        ("stall", Stage.INSERTED1, FailureMode.FAILED_LIFT),
        ("stall", Stage.LIFTED, FailureMode.STUCK_SECOND),
        ("hard_cap", Stage.INSERTED2, FailureMode.STUCK_SECOND),
    ])
    def test_failure_modes(self, event, stage, mode):
        assert sw.classify_outcome(_episode(event, [0, int(stage)])) == Outcome.failure(mode)

    def test_release_success_needs_both_legs_covered(self):
        ok = _episode("released", [3, 4], covered=(True, False, False, True))
        bad = _episode("released", [3, 4], covered=(True, True, False, False))
        assert sw.classify_outcome(ok).is_success
        assert sw.classify_outcome(bad) == Outcome.failure(FailureMode.DROP_SECOND)

    def test_goal_only_for_early_types(self):
        assert sw.classify_outcome(_episode("goal", [0, 1], EpisodeType.IV)).is_success
        with pytest.raises(ContractViolation):
            sw.classify_outcome(_episode("goal", [0, 1], EpisodeType.I))

    def test_unterminated_rejected(self):
        with pytest.raises(ContractViolation):
            sw.classify_outcome(_episode(None, [0]))


class TestTimeout:
    def _run(self, policy, limit=3000):
        s = sw.reset(CFG, 0, EpisodeType.I)
        mon = sw.TimeoutMonitor(CFG)
        k = 0
        while True:
            n, _ = sw.step(s, policy(s, k), CFG)
            k += 1
            ev = n.terminal or mon.update(s, n)
            s = n
            if ev or k >= limit:
                return ev, k

    def test_stall_at_budget(self):
        ev, k = self._run(lambda s, k: [s.hanger.x, s.hanger.y, s.hanger.theta, 0.0])
        assert (ev, k) == ("stall", 600)

    def test_hard_cap_with_slow_progress(self):
        # 2 mm back and forth in free space: progress, but no stage change
        ev, k = self._run(lambda s, k: [0.18 + (0.002 if k % 2 == 0 else 0.0), 0.8, 0.0, 0.0])
        assert (ev, k) == ("hard_cap", 1200)

    def test_phase_reset_on_stage_change(self):
        mon = sw.TimeoutMonitor(CFG)
        a = sw.reset(CFG, 0, EpisodeType.I)
        for _ in range(599):
            assert mon.update(a, a) is None
        b = replace(a, stage=Stage.INSERTED1)
        assert mon.update(a, b) is None and mon.phase_steps == 0


def test_collar_trace_in_unit_window():
    for seed in range(10):
        tr = sw.collar_trace(sw.reset(CFG, seed, EpisodeType.I), CFG)
        assert len(tr) >= 4
        assert all(0 <= x <= 1 and 0 <= y <= 1 for x, y in tr)
