"""Observation tensor construction: private, public, move and scalar planes."""

import numpy as np
import pytest

from rnad.encoding import (
    NUM_MOVE_PLANES,
    NUM_PLANES,
    OBSERVATION_SHAPE,
    PLANE_GAME_LENGTH,
    PLANE_HALF_ACTION,
    PLANE_LAKES,
    PLANE_MOVES,
    PLANE_NO_ATTACK,
    PLANE_PHASE,
    PLANE_PRIVATE,
    PLANE_PUBLIC_OPPONENT,
    PLANE_PUBLIC_SELF,
    PLANE_SELECTED,
    dump_tensor,
    encode,
    load_tensor,
    move_plane,
    private_tensor,
    public_tensor,
)
from rnad.stratego import (
    BLUE,
    BOMB,
    CAPTAIN,
    DEPLOYMENT_ORDER,
    FLAG,
    GENERAL,
    INITIAL_COUNTS,
    LAKE_MASK,
    MARSHAL,
    MINER,
    MoveRecord,
    RED,
    SCOUT,
    SPY,
    custom_position,
    flat,
    new_game,
    to_player_centric,
)


def full_army_position(to_move=RED, **kwargs):
    """All 80 pieces, deployment order laid out row-major in each camp."""
    pieces = {}
    red_squares = [(r, c) for r in range(6, 10) for c in range(10)]
    blue_squares = [(r, c) for r in range(0, 4) for c in range(10)]
    for sq, t in zip(red_squares, DEPLOYMENT_ORDER):
        pieces[sq] = (RED, t)
    for sq, t in zip(blue_squares, DEPLOYMENT_ORDER):
        pieces[sq] = (BLUE, t)
    return custom_position(pieces, to_move=to_move, **kwargs)


def play_move(state, src, dst):
    me = state.to_move
    state = state.apply(to_player_centric(me, flat(*src)))
    return state.apply(to_player_centric(me, flat(*dst)))


class TestPrivateTensor:
    def test_empty_board_all_zero(self):
        assert not private_tensor(new_game(), RED).any()

    def test_full_deployment_counts(self):
        state = full_army_position()
        for player in (RED, BLUE):
            prv = private_tensor(state, player)
            assert prv.sum() == 40
            for t, n in INITIAL_COUNTS.items():
                assert prv[:, :, t].sum() == n

    def test_red_spy_location(self):
        # (4, 5): next to the lakes but on open ground.
        state = custom_position(
            {
                (4, 5): (RED, SPY),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
                (0, 1): (BLUE, SPY),
            }
        )
        prv = private_tensor(state, RED)
        assert prv[4, 5, SPY] == 1.0
        assert prv.sum() == 2.0


class TestPublicTensor:
    def test_play_start_uniform_over_full_army(self):
        state = full_army_position()
        for player in (RED, BLUE):
            pub = public_tensor(state, player)
            occupied = private_tensor(state, player).sum(axis=2) > 0
            for t, n in INITIAL_COUNTS.items():
                np.testing.assert_allclose(pub[occupied, t], n / 40.0, atol=1e-9)
            assert pub[occupied, FLAG].max() == pytest.approx(1.0 / 40.0)
            assert not pub[~occupied].any()

    def test_one_moved_piece_case(self):
        state = full_army_position()
        state = play_move(state, (6, 8), (5, 8))  # red General steps forward
        pub = public_tensor(state, RED)
        # The moved, unrevealed piece cannot be a Bomb or the Flag; the
        # movable mass (33 unknown movable pieces) splits by remaining counts.
        assert pub[5, 8, FLAG] == 0.0
        assert pub[5, 8, BOMB] == 0.0
        assert pub[5, 8, SCOUT] == pytest.approx(8.0 / 33.0, abs=1e-9)
        assert pub[5, 8, GENERAL] == pytest.approx(1.0 / 33.0, abs=1e-9)

    def test_revealed_piece_is_one_hot(self):
        state = custom_position(
            {
                (5, 4): (RED, MARSHAL),
                (4, 4): (BLUE, CAPTAIN),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
                (0, 1): (BLUE, SPY),
            },
            to_move=RED,
        )
        state = play_move(state, (5, 4), (4, 4))
        pub = public_tensor(state, RED)
        assert pub[4, 4, MARSHAL] == 1.0
        assert pub[4, 4].sum() == 1.0

    def test_long_mover_is_a_known_scout(self):
        state = custom_position(
            {
                (9, 0): (RED, SCOUT),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
                (0, 1): (BLUE, SPY),
            },
            to_move=RED,
        )
        state = play_move(state, (9, 0), (5, 0))
        pub = public_tensor(state, RED)
        assert pub[5, 0, SCOUT] == 1.0
        assert pub[5, 0].sum() == 1.0

    def test_sum_rules_along_random_playout(self):
        rng = np.random.default_rng(2)
        state = new_game()
        checked = 0
        while state.outcome is None and checked < 250:
            state = state.apply(int(rng.choice(state.legal_actions())))
            if state.phase != "play":
                continue
            checked += 1
            for player in (RED, BLUE):
                pub = public_tensor(state, player)
                occupied = private_tensor(state, player).sum(axis=2) > 0
                # Rows of occupied squares are distributions.
                np.testing.assert_allclose(
                    pub[occupied].sum(axis=1), 1.0, atol=1e-9
                )
                assert not pub[~occupied].any()
                # Per-type totals equal on-board counts.
                prv = private_tensor(state, player)
                np.testing.assert_allclose(
                    pub.sum(axis=(0, 1)), prv.sum(axis=(0, 1)), atol=1e-9
                )

    def test_last_unknown_category_inferred(self):
        # Both unknown movable pieces have moved; the remaining never-moved
        # unknown piece must be the Bomb.
        state = custom_position(
            {
                (5, 0): (RED, MINER),
                (5, 4): (RED, CAPTAIN),
                (9, 1): (RED, BOMB),
                (9, 9): (RED, FLAG),
                (0, 0): (BLUE, FLAG),
                (0, 1): (BLUE, SPY),
            },
            to_move=RED,
            moved={(5, 0), (5, 4)},
            revealed={(9, 9)},
        )
        pub = public_tensor(state, RED)
        assert pub[9, 1, BOMB] == pytest.approx(1.0, abs=1e-9)


class TestMovePlane:
    def test_regular_move_red_view(self):
        record = MoveRecord(flat(3, 4), flat(3, 5), RED)
        plane = move_plane(record, RED)
        assert plane[3, 4] == -1.0
        assert plane[3, 5] == 1.0
        assert np.count_nonzero(plane) == 2

    def test_miner_attack_origin_value(self):
        record = MoveRecord(
            flat(2, 2), flat(2, 3), RED, True, MINER, BOMB, "attacker_wins"
        )
        plane = move_plane(record, RED)
        assert plane[2, 2] == pytest.approx(-(2.0 + 3.0 / 12.0))
        assert plane[2, 2] == pytest.approx(-2.25)

    def test_blue_view_is_rotated(self):
        record = MoveRecord(flat(3, 4), flat(3, 5), RED)
        red_view = move_plane(record, RED)
        blue_view = move_plane(record, BLUE)
        np.testing.assert_array_equal(blue_view, np.rot90(red_view, 2))
        assert blue_view[6, 5] == -1.0
        assert blue_view[6, 4] == 1.0


class TestEncode:
    def test_fresh_game_planes(self):
        obs = encode(new_game(), RED)
        assert obs.shape == OBSERVATION_SHAPE
        np.testing.assert_array_equal(obs[:, :, PLANE_LAKES], LAKE_MASK)
        assert np.all(obs[:, :, PLANE_PHASE] == 1.0)
        assert np.all(obs[:, :, PLANE_HALF_ACTION] == 0.0)
        assert np.all(obs[:, :, PLANE_GAME_LENGTH] == 0.0)
        assert np.all(obs[:, :, PLANE_NO_ATTACK] == 0.0)
        assert not obs[:, :, PLANE_PRIVATE:PLANE_GAME_LENGTH].any()
        assert not obs[:, :, PLANE_SELECTED].any()

    def test_public_planes_zero_during_deployment(self):
        state = new_game()
        for _ in range(45):  # red done, blue under way
            state = state.apply(state.legal_actions()[0])
        obs = encode(state, BLUE)
        pub = obs[:, :, PLANE_PUBLIC_OPPONENT : PLANE_PUBLIC_SELF + 12]
        assert not pub.any()
        assert obs[:, :, PLANE_PRIVATE : PLANE_PRIVATE + 12].sum() == 5.0

    def test_move_planes_fill_most_recent_first(self):
        state = full_army_position()
        moves = [((6, 8), (5, 8)), ((3, 8), (4, 8)), ((5, 8), (5, 9))]
        for src, dst in moves:
            state = play_move(state, src, dst)
        obs = encode(state, RED)
        # Plane 0 is the newest move (red (5,8)->(5,9)).
        assert obs[5, 8, PLANE_MOVES] == -1.0
        assert obs[5, 9, PLANE_MOVES] == 1.0
        for k in range(3, NUM_MOVE_PLANES):
            assert not obs[:, :, PLANE_MOVES + k].any()

    def test_selected_piece_plane_and_flag(self):
        state = full_army_position()
        state = state.apply(to_player_centric(RED, flat(6, 8)))
        obs = encode(state, RED)
        assert np.all(obs[:, :, PLANE_HALF_ACTION] == 1.0)
        assert obs[6, 8, PLANE_SELECTED] == 1.0
        assert obs[:, :, PLANE_SELECTED].sum() == 1.0

    def test_counter_ratio_planes(self):
        state = full_army_position(total_moves=500, moves_since_attack=50)
        obs = encode(state, RED)
        assert np.all(obs[:, :, PLANE_GAME_LENGTH] == pytest.approx(0.25))
        assert np.all(obs[:, :, PLANE_NO_ATTACK] == pytest.approx(0.25))

    def test_blue_rotation(self):
        state = full_army_position()
        red_obs = encode(state, RED)
        blue_obs = encode(state, BLUE)
        # Blue's own pieces appear in blue's bottom rows, mirroring red's.
        np.testing.assert_array_equal(
            blue_obs[:, :, PLANE_PRIVATE : PLANE_PRIVATE + 12],
            np.rot90(private_tensor(state, BLUE), 2, axes=(0, 1)),
        )

    def test_mirror_symmetric_position_encodes_identically(self):
        pieces = {}
        placements = [((9, 0), SCOUT), ((8, 1), FLAG), ((7, 3), MARSHAL), ((6, 5), BOMB)]
        for (r, c), t in placements:
            pieces[(r, c)] = (RED, t)
            pieces[(9 - r, 9 - c)] = (BLUE, t)
        state = custom_position(pieces, to_move=RED)
        np.testing.assert_array_equal(encode(state, RED), encode(state, BLUE))

    def test_deterministic(self):
        state = full_army_position()
        a = encode(state, RED)
        b = encode(state, RED)
        np.testing.assert_array_equal(a, b)
        assert dump_tensor(a) == dump_tensor(b)

    def test_plane_count(self):
        assert NUM_PLANES == 82
        assert OBSERVATION_SHAPE == (10, 10, 82)


class TestTensorIO:
    def test_round_trip(self):
        state = full_army_position()
        obs = encode(state, BLUE)
        data = dump_tensor(obs)
        assert len(data) == 10 * 10 * 82 * 4
        np.testing.assert_array_equal(load_tensor(data), obs)

    def test_bad_length_rejected(self):
        with pytest.raises(ValueError):
            load_tensor(b"\x00" * 10)
