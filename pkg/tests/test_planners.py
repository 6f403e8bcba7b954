import math

import numpy as np
import pytest

from searchsim.phd import Cluster
from searchsim.planners import (
    PlannerError,
    as_candidates,
    as_score,
    as_select,
    asi_candidates,
    asi_objective,
    asi_score,
    asi_select,
)
from searchsim.sensing import SensorConfig
from searchsim.vehicle import AgentState, ControllerConfig
from searchsim.world import Environment

ENV = Environment()
SENSOR = SensorConfig()
CTRL = ControllerConfig()


def cluster_at(x, y, mass=1.0, spread=1.0):
    return Cluster(center=np.array([x, y], dtype=float), mass=mass, spread=spread)


class TestAsCandidates:
    def test_four_directions(self):
        cands = as_candidates((130.0, 130.0), n_dirs=4, radius=9.0, env=ENV)
        expected = [(139.0, 130.0), (130.0, 139.0), (121.0, 130.0), (130.0, 121.0)]
        assert len(cands) == 4
        for wp, want in zip(cands.waypoints, expected):
            assert np.allclose(wp, want, atol=1e-9)

    def test_corner_degenerates(self):
        cands = as_candidates((0.0, 0.0), n_dirs=4, radius=9.0, env=ENV)
        assert len(cands) <= 2
        for wp in cands.waypoints:
            assert not np.allclose(wp, [0.0, 0.0])

    def test_eight_includes_axes_and_diagonals(self):
        cands = as_candidates((130.0, 130.0), n_dirs=8, radius=9.0, env=ENV)
        assert len(cands) == 8
        d = 9.0 / math.sqrt(2.0)
        for want in [(139.0, 130.0), (130.0, 139.0), (121.0, 130.0), (130.0, 121.0),
                     (130.0 + d, 130.0 + d), (130.0 - d, 130.0 + d),
                     (130.0 - d, 130.0 - d), (130.0 + d, 130.0 - d)]:
            assert any(np.allclose(wp, want, atol=1e-9) for wp in cands.waypoints)

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            as_candidates((10.0, 10.0), n_dirs=5)

    def test_inside_env(self):
        cands = as_candidates((258.0, 1.0), n_dirs=32, radius=9.0, env=ENV)
        assert np.all(cands.waypoints >= 0.0)
        assert np.all(cands.waypoints <= 260.0)


class TestAsiCandidates:
    @pytest.mark.parametrize("spacing,count", [(80.0, 9), (60.0, 16), (40.0, 36), (20.0, 144)])
    def test_counts(self, spacing, count):
        assert len(asi_candidates(ENV, spacing)) == count

    def test_grid_values_at_80(self):
        cands = asi_candidates(ENV, 80.0)
        values = sorted({wp[0] for wp in cands.waypoints})
        assert values == [10.0, 90.0, 170.0]
        assert sorted({wp[1] for wp in cands.waypoints}) == [10.0, 90.0, 170.0]

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            asi_candidates(ENV, 0.0)


class TestAsScore:
    def test_empty(self):
        assert as_score((10.0, 10.0), [], SENSOR) == 0.0

    def test_cluster_at_candidate(self):
        assert as_score((50.0, 50.0), [cluster_at(50.0, 50.0)], SENSOR) == pytest.approx(0.98)

    def test_one_fov_away(self):
        score = as_score((50.0, 50.0), [cluster_at(75.0, 50.0)], SENSOR)
        assert score == pytest.approx(0.98 * math.exp(-0.5), rel=1e-9)

    def test_sums_over_clusters(self):
        clusters = [cluster_at(50.0, 50.0), cluster_at(75.0, 50.0)]
        total = as_score((50.0, 50.0), clusters, SENSOR)
        parts = sum(as_score((50.0, 50.0), [c], SENSOR) for c in clusters)
        assert total == pytest.approx(parts, rel=1e-12)


class TestAsSelect:
    def test_moves_toward_single_cluster(self):
        cands = as_candidates((130.0, 130.0), n_dirs=8, radius=9.0, env=ENV)
        decision = as_select((130.0, 130.0), [cluster_at(200.0, 130.0)], cands, SENSOR)
        assert np.allclose(decision.chosen, [139.0, 130.0], atol=1e-9)
        # exhaustive self-consistency: chosen score beats every other
        assert decision.scores[decision.index] == pytest.approx(decision.scores.max())

    def test_no_clusters_ties_to_first(self):
        cands = as_candidates((130.0, 130.0), n_dirs=8, radius=9.0, env=ENV)
        decision = as_select((130.0, 130.0), [], cands, SENSOR)
        assert decision.index == 0

    def test_symmetric_clusters_tie_to_lowest_index(self):
        clusters = [cluster_at(180.0, 130.0), cluster_at(80.0, 130.0)]
        cands = as_candidates((130.0, 130.0), n_dirs=4, radius=9.0, env=ENV)
        decision = as_select((130.0, 130.0), clusters, cands, SENSOR)
        assert decision.index == 0  # east and west score equal; index order wins

    def test_gain_scaling_preserves_argmax(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            clusters = [cluster_at(*rng.uniform(0, 260, 2)) for _ in range(4)]
            pos = rng.uniform(20, 240, 2)
            cands = as_candidates(pos, n_dirs=8, radius=9.0, env=ENV)
            full = as_select(pos, clusters, cands, SENSOR)
            half = as_select(pos, clusters, cands, SensorConfig(gain=0.49))
            assert full.index == half.index

    def test_chosen_dominates_all(self):
        rng = np.random.default_rng(1)
        clusters = [cluster_at(*rng.uniform(0, 260, 2)) for _ in range(5)]
        cands = as_candidates((100.0, 100.0), n_dirs=16, radius=9.0, env=ENV)
        decision = as_select((100.0, 100.0), clusters, cands, SENSOR)
        assert np.all(decision.scores[decision.index] >= decision.scores)


class TestAsiObjective:
    def test_arithmetic(self):
        assert asi_objective(40.0, 2.5, 100, beta=100.0) == pytest.approx(2.1)

    def test_decreasing_in_cost(self):
        values = [asi_objective(c, 2.5, 100, 100.0) for c in (10.0, 20.0, 30.0)]
        assert values[0] > values[1] > values[2]

    def test_increasing_in_refinement(self):
        values = [asi_objective(40.0, t, 100, 100.0) for t in (1.0, 2.0, 3.0)]
        assert values[0] < values[1] < values[2]

    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            asi_objective(1.0, 1.0, 0, 100.0)


class TestAsiScore:
    def test_no_clusters_nonpositive(self):
        state = AgentState.at_rest((10.0, 10.0))
        score, traj = asi_score((90.0, 10.0), state, [], SENSOR, 100.0, 10, CTRL)
        assert score <= 0.0
        assert traj.arrived

    def test_beta_zero_prefers_nearest(self):
        state = AgentState.at_rest((10.0, 10.0))
        near, _ = asi_score((30.0, 10.0), state, [], SENSOR, 0.0, 10, CTRL)
        far, _ = asi_score((90.0, 10.0), state, [], SENSOR, 0.0, 10, CTRL)
        assert near > far

    def test_rejects_current_position(self):
        state = AgentState.at_rest((10.0, 10.0))
        with pytest.raises(PlannerError):
            asi_score((10.0, 10.0), state, [], SENSOR, 100.0, 10, CTRL)


class TestAsiSelect:
    def test_single_candidate(self):
        state = AgentState.at_rest((10.0, 10.0))
        cands = asi_candidates(ENV, 80.0)
        # keep only one non-degenerate candidate by selecting a 1-point set
        from searchsim.planners import CandidateSet
        single = CandidateSet(np.array([[90.0, 10.0]]), "grid(test)")
        decision = asi_select(state, [], single, SENSOR, cfg=CTRL)
        assert decision.index == 0
        assert decision.trajectory is not None

    def test_cluster_heavy_candidate_wins_with_large_beta(self):
        state = AgentState.at_rest((10.0, 10.0))
        from searchsim.planners import CandidateSet
        cands = CandidateSet(np.array([[90.0, 10.0], [90.0, 90.0]]), "grid(test)")
        clusters = [cluster_at(90.0, 90.0, mass=2.0)]
        decision = asi_select(state, clusters, cands, SENSOR, beta=10_000.0, cfg=CTRL)
        assert np.allclose(decision.chosen, [90.0, 90.0])
        # and with beta = 0 the pure-effort choice is the shorter straight leg
        effort_only = asi_select(state, clusters, cands, SENSOR, beta=0.0, cfg=CTRL)
        assert np.allclose(effort_only.chosen, [90.0, 10.0])

    def test_excludes_current_position(self):
        state = AgentState.at_rest((10.0, 10.0))
        cands = asi_candidates(ENV, 80.0)  # includes (10, 10)
        decision = asi_select(state, [], cands, SENSOR, cfg=CTRL)
        assert decision.scores[0] == -np.inf
        assert not np.allclose(decision.chosen, [10.0, 10.0])

    def test_all_equal_ties_to_first_valid(self):
        state = AgentState.at_rest((130.0, 130.0))
        from searchsim.planners import CandidateSet
        # symmetric legs, no clusters: identical scores, first index wins
        cands = CandidateSet(np.array([[130.0, 180.0], [180.0, 130.0],
                                       [130.0, 80.0], [80.0, 130.0]]), "grid(test)")
        decision = asi_select(state, [], cands, SENSOR, cfg=CTRL)
        assert decision.index == 0
