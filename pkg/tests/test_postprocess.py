"""Test-time filters: thresholding, discretization, trackers, value bounds."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnad.postprocess import (
    MemoryTracker,
    TestTimeConfig,
    ThreatTracker,
    discretize,
    discretize_exact,
    eagerness_transform,
    pointless_threat_filter,
    project_policy,
    threshold,
    value_bounds_filter,
)
from rnad.encoding import public_tensor
from rnad.stratego import (
    BLUE,
    BOMB,
    CAPTAIN,
    COLONEL,
    FLAG,
    GENERAL,
    MARSHAL,
    MINER,
    RED,
    Rules,
    SCOUT,
    SPY,
    custom_position,
    flat,
    to_absolute,
    to_player_centric,
)


def simplex_vectors(n_max=8):
    return (
        st.lists(st.floats(0.0, 1.0), min_size=2, max_size=n_max)
        .filter(lambda xs: sum(xs) > 1e-6)
        .map(lambda xs: np.array(xs) / np.sum(xs))
    )


class TestThreshold:
    def test_golden_case(self):
        got = threshold(np.array([0.5, 0.3, 0.15, 0.05]), 0.1)
        np.testing.assert_allclose(got, [0.5 / 0.95, 0.3 / 0.95, 0.15 / 0.95, 0.0])

    def test_deterministic_unchanged(self):
        np.testing.assert_array_equal(
            threshold(np.array([1.0, 0.0, 0.0]), 0.03), [1.0, 0.0, 0.0]
        )

    def test_all_below_threshold_unchanged(self):
        uniform = np.full(100, 0.01)
        np.testing.assert_array_equal(threshold(uniform, 0.03), uniform)

    @settings(max_examples=60)
    @given(simplex_vectors(), st.floats(0.001, 0.5))
    def test_simplex_and_support(self, policy, eps):
        out = threshold(policy, eps)
        assert abs(out.sum() - 1.0) < 1e-9
        assert np.all(out >= 0.0)
        assert np.all((out > 0) <= (policy > 0))


class TestDiscretize:
    def test_golden_case(self):
        np.testing.assert_allclose(discretize(np.array([0.6, 0.4]), 4), [0.75, 0.25])

    def test_exact_multiples_unchanged(self):
        np.testing.assert_allclose(
            discretize(np.array([0.5, 0.25, 0.25]), 4), [0.5, 0.25, 0.25]
        )
        np.testing.assert_allclose(discretize(np.array([0.5, 0.5]), 2), [0.5, 0.5])

    def test_budget_discards_the_tail(self):
        got = discretize(np.array([0.5, 0.3, 0.15, 0.05]), 4)
        # 0.5 -> 2/4, 0.3 -> 2/4 caps the budget, the rest gets nothing.
        np.testing.assert_allclose(got, [0.5, 0.5, 0.0, 0.0])

    def test_exact_rational_sum(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            policy = rng.dirichlet(np.ones(rng.integers(2, 10)))
            for n in (2, 4, 16, 32):
                exact = discretize_exact(policy, n)
                assert sum(exact, Fraction(0)) == 1
                assert all(f.denominator in (1, n) or n % f.denominator == 0 for f in exact)

    @settings(max_examples=60)
    @given(simplex_vectors(), st.sampled_from([1, 2, 4, 16, 32]))
    def test_multiples_and_support(self, policy, n):
        out = discretize(policy, n)
        assert abs(out.sum() - 1.0) < 1e-12
        scaled = out * n
        np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-9)
        assert np.all((out > 0) <= (policy > 0))


class TestEagerness:
    def test_endpoints(self):
        assert eagerness_transform(0.0, 2.0) == 0.0
        assert eagerness_transform(1.0, 2.0) == 1.0

    def test_golden_value(self):
        assert eagerness_transform(0.5, 2.0) == pytest.approx(0.75)

    def test_identity_at_alpha_one(self):
        for r in (0.0, 0.2, 0.7, 1.0):
            assert eagerness_transform(r, 1.0) == pytest.approx(r)

    def test_monotone_and_dominating(self):
        grid = np.linspace(0, 1, 21)
        vals = [eagerness_transform(r, 2.0) for r in grid]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert all(v >= r for v, r in zip(vals, grid))

    def test_domain_error(self):
        with pytest.raises(ValueError):
            eagerness_transform(1.5, 2.0)


class TestProjection:
    def test_threshold_then_discretize(self):
        got = project_policy(np.array([0.5, 0.3, 0.15, 0.05]), 0.1, 32)
        np.testing.assert_allclose(got, [17 / 32, 11 / 32, 4 / 32, 0.0])

    def test_deterministic_unchanged(self):
        np.testing.assert_array_equal(
            project_policy(np.array([0.0, 1.0]), 0.03, 32), [0.0, 1.0]
        )


class TestConfig:
    def test_defaults_match_published_settings(self):
        cfg = TestTimeConfig()
        assert cfg.eps_tres_deploy == 0.03
        assert cfg.eps_tres_play == 0.03
        assert cfg.n_disc_deploy == 32
        assert cfg.n_disc_play == 16
        assert cfg.alpha_eag == 2.0
        assert cfg.eps_vb == 0.05

    def test_validation(self):
        with pytest.raises(ValueError):
            TestTimeConfig(eps_tres_play=1.5)
        with pytest.raises(ValueError):
            TestTimeConfig(n_disc_play=0)
        with pytest.raises(ValueError):
            TestTimeConfig(alpha_eag=0.5)


def shuttle_position():
    """Red Major can shuttle (5,1)<->(4,1), threatening a revealed Captain."""
    return custom_position(
        {
            (5, 1): (RED, MARSHAL),
            (3, 1): (BLUE, CAPTAIN),
            (9, 9): (RED, FLAG),
            (0, 0): (BLUE, FLAG),
            (0, 8): (BLUE, MINER),
            (1, 8): (BLUE, MINER),
        },
        to_move=RED,
        revealed={(3, 1)},
        rules=Rules(two_square_rule=False),
    )


def full_move(state, src, dst):
    me = state.to_move
    state = state.apply(to_player_centric(me, flat(*src)))
    return state.apply(to_player_centric(me, flat(*dst)))


def uniform_over_legal(state):
    """Full 100-entry policy vector, uniform on the legal actions."""
    legal = state.legal_actions()
    policy = np.zeros(100)
    policy[legal] = 1.0 / len(legal)
    return policy


class TestThreatTracker:
    def _run_cycles(self, n_cycles):
        state = shuttle_position()
        tracker = ThreatTracker(me=RED)
        blue_moves = [((0, 8), (0, 9)), ((0, 9), (0, 8)), ((1, 8), (1, 9)), ((1, 9), (1, 8))]
        bi = 0
        red_at = (5, 1)
        red_to = (4, 1)
        for _ in range(2 * n_cycles):
            before = state
            state = full_move(state, red_at, red_to)
            tracker.observe_own_move(before, state.move_history[-1], state)
            red_at, red_to = red_to, red_at
            state = full_move(state, *blue_moves[bi % 4])
            bi += 1
        return state, tracker

    def test_cycles_counted(self):
        _, tracker = self._run_cycles(3)
        assert max(tracker.cycles.values()) == 3

    def test_fewer_than_three_cycles_unchanged(self):
        state, tracker = self._run_cycles(2)
        state = state.apply(to_player_centric(RED, flat(5, 1)))
        policy = uniform_over_legal(state)
        out = pointless_threat_filter(state, tracker, policy)
        np.testing.assert_array_equal(out, policy)

    def test_rethreat_zeroed_after_three_cycles(self):
        state, tracker = self._run_cycles(3)
        state = state.apply(to_player_centric(RED, flat(5, 1)))
        policy = uniform_over_legal(state)
        out = pointless_threat_filter(state, tracker, policy)
        assert out[to_player_centric(RED, flat(4, 1))] == 0.0
        assert abs(out.sum() - 1.0) < 1e-9

    def test_only_legal_move_left_unchanged(self):
        state, tracker = self._run_cycles(3)
        state = state.apply(to_player_centric(RED, flat(5, 1)))
        # Pretend the policy only supports the re-threatening move.
        policy = np.zeros(100)
        policy[to_player_centric(RED, flat(4, 1))] = 1.0
        out = pointless_threat_filter(state, tracker, policy)
        np.testing.assert_array_equal(out, policy)


class TestMemoryTracker:
    def test_declined_spy_attack_eliminates_spy(self):
        # Blue's unknown piece sits next to red's revealed Marshal; blue moves
        # another piece instead, so that piece cannot be the Spy.
        state = custom_position(
            {
                (4, 4): (RED, MARSHAL),
                (3, 4): (BLUE, SPY),
                (0, 8): (BLUE, MINER),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
            },
            to_move=BLUE,
            revealed={(4, 4)},
        )
        suspect = state.piece_at(flat(3, 4))
        tracker = MemoryTracker()
        nxt = full_move(state, (0, 8), (0, 9))
        tracker.observe_move(state, nxt.move_history[-1])
        assert SPY in tracker.eliminated[suspect]

    def test_declined_general_capture_eliminates_marshal(self):
        # Red's unknown piece declines to take a revealed General with no
        # recapture cover: it is not the Marshal.
        state = custom_position(
            {
                (4, 4): (RED, MARSHAL),
                (3, 4): (BLUE, GENERAL),
                (9, 0): (RED, MINER),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
            },
            to_move=RED,
            revealed={(3, 4)},
        )
        suspect = state.piece_at(flat(4, 4))
        tracker = MemoryTracker()
        nxt = full_move(state, (9, 0), (9, 1))
        tracker.observe_move(state, nxt.move_history[-1])
        assert MARSHAL in tracker.eliminated[suspect]

    def test_recapture_cover_blocks_elimination(self):
        # Same, but a blue piece guards the General's square.
        state = custom_position(
            {
                (4, 4): (RED, MARSHAL),
                (3, 4): (BLUE, GENERAL),
                (2, 4): (BLUE, COLONEL),
                (0, 5): (BLUE, SPY),
                (9, 0): (RED, MINER),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
            },
            to_move=RED,
            revealed={(3, 4)},
        )
        suspect = state.piece_at(flat(4, 4))
        tracker = MemoryTracker()
        nxt = full_move(state, (9, 0), (9, 1))
        tracker.observe_move(state, nxt.move_history[-1])
        assert MARSHAL not in tracker.eliminated.get(suspect, set())

    def test_no_opportunity_no_change(self):
        state = custom_position(
            {
                (4, 4): (RED, MARSHAL),
                (0, 8): (BLUE, MINER),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
            },
            to_move=BLUE,
            revealed={(4, 4)},
        )
        tracker = MemoryTracker()
        nxt = full_move(state, (0, 8), (0, 9))
        tracker.observe_move(state, nxt.move_history[-1])
        assert tracker.eliminated == {}

    def test_attacking_move_triggers_no_elimination(self):
        state = custom_position(
            {
                (4, 4): (RED, MARSHAL),
                (3, 4): (BLUE, SPY),
                (0, 8): (BLUE, MINER),
                (1, 8): (RED, SCOUT),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
            },
            to_move=BLUE,
            revealed={(4, 4)},
        )
        tracker = MemoryTracker()
        nxt = full_move(state, (0, 8), (1, 8))  # blue captures instead
        tracker.observe_move(state, nxt.move_history[-1])
        assert tracker.eliminated == {}

    def test_apply_zeroes_entries_without_renormalizing(self):
        state = custom_position(
            {
                (4, 4): (RED, MARSHAL),
                (3, 4): (BLUE, SPY),
                (0, 8): (BLUE, MINER),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
            },
            to_move=BLUE,
            revealed={(4, 4)},
        )
        suspect = state.piece_at(flat(3, 4))
        tracker = MemoryTracker()
        nxt = full_move(state, (0, 8), (0, 9))
        tracker.observe_move(state, nxt.move_history[-1])
        pub_blue = public_tensor(nxt, BLUE)
        pub_red = public_tensor(nxt, RED)
        # Viewer red: own tensor is red's, opponent tensor is blue's.
        adj_red, adj_blue = tracker.apply(nxt, pub_red, pub_blue, viewer=RED)
        r, c = 3, 4
        assert pub_blue[r, c, SPY] > 0.0
        assert adj_blue[r, c, SPY] == 0.0
        # No renormalization: the other entries are untouched.
        others = [t for t in range(12) if t != SPY]
        np.testing.assert_array_equal(adj_blue[r, c, others], pub_blue[r, c, others])

    def test_probability_one_type_never_zeroed(self):
        tracker = MemoryTracker()
        state = custom_position(
            {
                (3, 4): (BLUE, SPY),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
            },
            to_move=BLUE,
            revealed={(3, 4)},
        )
        suspect = state.piece_at(flat(3, 4))
        tracker.eliminated[suspect] = {SPY}
        pub_blue = public_tensor(state, BLUE)
        pub_red = public_tensor(state, RED)
        _, adj_blue = tracker.apply(state, pub_red, pub_blue, viewer=RED)
        assert adj_blue[3, 4, SPY] == 1.0


def material_value(state, player):
    score = 0.0
    for pid in range(80):
        if state.ptype[pid] < 0 or not state.alive[pid]:
            continue
        worth = float(state.ptype[pid])
        score += worth if state.owner_of(pid) == player else -worth
    return score / 100.0


class TestValueBounds:
    def _blunder_position(self):
        # Red's revealed Marshal can step next to blue's revealed, moved Spy;
        # the Spy then captures it with no recapture available.
        return custom_position(
            {
                (5, 1): (RED, MARSHAL),
                (3, 1): (BLUE, SPY),
                (9, 0): (RED, CAPTAIN),
                (9, 9): (RED, FLAG),
                (9, 8): (RED, BOMB),
                (0, 0): (BLUE, FLAG),
                (0, 5): (BLUE, MINER),
            },
            to_move=RED,
            revealed={(5, 1), (3, 1)},
            moved={(3, 1)},
        )

    def test_marshal_blunder_removed(self):
        state = self._blunder_position()
        state = state.apply(to_player_centric(RED, flat(5, 1)))
        policy = uniform_over_legal(state)
        out = value_bounds_filter(state, policy, material_value, eps_vb=0.05)
        assert out[to_player_centric(RED, flat(4, 1))] == 0.0
        assert abs(out.sum() - 1.0) < 1e-9
        # The safe retreat squares keep support.
        assert out[to_player_centric(RED, flat(6, 1))] > 0.0

    def test_bound_matches_two_ply_enumeration(self):
        from rnad.postprocess import _action_upper_bound

        state = self._blunder_position()
        sel = state.apply(to_player_centric(RED, flat(5, 1)))
        # After Marshal to (4,1), blue's only safe reply is Spy takes Marshal.
        bound = _action_upper_bound(sel, flat(4, 1), RED, material_value)
        after = full_move(state, (5, 1), (4, 1))
        spy_takes = full_move(after, (3, 1), (4, 1))
        assert bound == pytest.approx(material_value(spy_takes, RED), abs=1e-12)

    def test_no_intervention_when_bounds_are_fine(self):
        state = custom_position(
            {
                (5, 0): (RED, MARSHAL),
                (0, 5): (BLUE, MINER),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
            },
            to_move=RED,
            revealed={(5, 0)},
        )
        state = state.apply(to_player_centric(RED, flat(5, 0)))
        policy = uniform_over_legal(state)
        out = value_bounds_filter(state, policy, material_value, eps_vb=0.05)
        np.testing.assert_array_equal(out, policy)

    def test_single_support_never_touched(self):
        state = self._blunder_position()
        state = state.apply(to_player_centric(RED, flat(5, 1)))
        policy = np.zeros(100)
        policy[to_player_centric(RED, flat(4, 1))] = 1.0
        out = value_bounds_filter(state, policy, material_value, eps_vb=0.05)
        np.testing.assert_array_equal(out, policy)

    def test_never_empties_policy(self):
        # Every action is a provable blunder: the filter leaves the policy be.
        state = custom_position(
            {
                (4, 0): (RED, MARSHAL),
                (2, 0): (BLUE, SPY),
                (2, 2): (BLUE, SPY) if False else (BLUE, MINER),
                (9, 9): (RED, FLAG),
                (0, 9): (BLUE, FLAG),
            },
            to_move=RED,
            revealed={(4, 0), (2, 0)},
            moved={(2, 0), (2, 2)},
        )
        state = state.apply(to_player_centric(RED, flat(4, 0)))
        policy = uniform_over_legal(state)
        out = value_bounds_filter(
            state, policy, lambda s, p: -1.0 if s.total_moves > 0 else 1.0, eps_vb=0.05
        )
        assert abs(out.sum() - 1.0) < 1e-9
        np.testing.assert_array_equal(out > 0, policy > 0)
