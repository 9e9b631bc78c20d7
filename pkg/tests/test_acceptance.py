"""Acceptance gate: every headline criterion at its stated tolerance.

Each test prints one PASS line on success (run with -s to see them inline);
a failure reads as the criterion's FAIL.  The two training criteria are
marked slow: they run real desk-scale training loops.
"""

import math
import time

import numpy as np
import pytest

from rnad import nfg
from rnad.approximator import TabularApproximator
from rnad.efg import kuhn_poker, efg_exploitability
from rnad.encoding import private_tensor, public_tensor
from rnad.envs import EfgEnv, StrategoEnv, tabular_efg_policy
from rnad.harness import MetricsWriter, evaluate, play_episode, run_training
from rnad.learner import (
    Learner,
    LearnerConfig,
    centered_q,
    critic_loss,
    desk_preset,
    neurd_policy_gradient,
)
from rnad.postprocess import (
    discretize_exact,
    eagerness_transform,
    threshold,
    value_bounds_filter,
)
from rnad.stratego import (
    BLUE,
    BOMB,
    CAPTAIN,
    FLAG,
    INITIAL_COUNTS,
    MARSHAL,
    MINER,
    RED,
    SPY,
    custom_position,
    new_game,
    flat,
    to_player_centric,
)
from rnad.vtrace import (
    EstimatorConfig,
    RegInterpolation,
    Step,
    Trajectory,
    empirical_returns,
    vtrace_two_player,
)

from test_learner import build_batch, materialize, neurd_coefficients, neurd_scalar
from test_stratego_engine import ATTACK_CASES, play_move, _random_sparse_position
from test_vtrace import eval_from_obs, make_reg, random_trajectory
from naive_stratego import NaiveGame


def report(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


def skewed(n: int) -> np.ndarray:
    p = np.array([0.999] + [0.001 / (n - 1)] * (n - 1))
    return p / p.sum()


class TestMatchingPenniesGolden:
    def test_first_fixed_point_within_tolerance(self):
        start = time.perf_counter()
        game = nfg.named_game("matching_pennies")
        config = nfg.RNaDConfig(eta=0.2, integrator_step=0.1)
        reg = nfg.JointPolicy(np.array([0.999, 0.001]), np.array([0.999, 0.001]))
        result = nfg.integrate_replicator(game, reg, reg, config)
        np.testing.assert_allclose(result.policy.p1, [0.896, 0.104], atol=0.01)
        np.testing.assert_allclose(result.policy.p2, [0.263, 0.737], atol=0.01)
        assert time.perf_counter() - start < 60.0
        report("matching-pennies golden fixed point")


class TestLyapunovSuite:
    def games(self):
        rng = np.random.default_rng(2024)
        named = [nfg.named_game("matching_pennies"), nfg.named_game("rps")]
        random_games = [
            nfg.NormalFormGame(rng.normal(size=(3, 3))) for _ in range(5)
        ]
        return named + random_games

    def test_monotone_and_two_decades(self):
        for game in self.games():
            n1, n2 = game.actions_p1, game.actions_p2
            config = nfg.RNaDConfig(
                eta=0.2, integrator_step=0.05, outer_iterations=3
            )
            reg = nfg.JointPolicy(skewed(n1), skewed(n2))
            slack = 10 * config.integrator_step**2
            for _ in range(config.outer_iterations):
                result = nfg.integrate_replicator(
                    game, reg, reg, config, record_trajectory=True
                )
                values = [
                    nfg.lyapunov(result.policy, pi) for _, pi in result.trajectory
                ]
                for prev, nxt in zip(values, values[1:]):
                    assert nxt <= prev + slack
                # At least two decades of decay per inner solve, unless the
                # solve started essentially at its fixed point already.
                if values[0] > 1e-12:
                    assert values[-1] <= values[0] * 1e-2
                reg = result.policy
        report("Lyapunov monotonicity and two-decade decay")


class TestNashConvergence:
    def test_exploitability_below_threshold(self):
        for name in ("matching_pennies", "rps"):
            game = nfg.named_game(name)
            n = game.actions_p1
            config = nfg.RNaDConfig(eta=0.2, integrator_step=0.1, outer_iterations=20)
            fps = nfg.rnad_iterate(game, nfg.JointPolicy(skewed(n), skewed(n)), config)
            values = [nfg.exploitability(game, fp) for fp in fps]
            assert values[-1] < 1e-2
            for prev, nxt in zip(values, values[1:]):
                assert nxt < prev or nxt < 1e-6
        report("Nash convergence on matching pennies and RPS")


class TestVtraceTelescoping:
    def test_thousand_random_trajectories(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            traj = random_trajectory(
                rng, length=int(rng.integers(1, 24)), on_policy=True
            )
            result = vtrace_two_player(
                traj, eval_from_obs("pi"), eval_from_obs("value"), make_reg(alpha=0.6)
            )
            returns = empirical_returns(result.transformed_rewards)
            for t, step in enumerate(traj.steps):
                assert (
                    abs(result.values[t, step.mover] - returns[t, step.mover]) < 1e-9
                )
        report("v-trace on-policy telescoping (1000 trajectories)")

    def test_chunked_equals_monolithic_gradients(self):
        env = EfgEnv(kuhn_poker())
        rng = np.random.default_rng(4)
        make = lambda chunk: Learner(
            TabularApproximator(env.num_actions),
            LearnerConfig(batch_size=8, chunk_length=chunk, t_max=8, learning_rate=0.01),
        )
        probe = make(64)
        batch = [
            play_episode(env, probe.snapshot().actor_policy, rng, t_max=8)
            for _ in range(8)
        ]
        reference = make(64)
        reference.step(batch)
        for chunk in (1, 3, 5):
            other = make(chunk)
            other.step(batch)
            for key in reference.approx.params:
                np.testing.assert_allclose(
                    reference.approx.params[key], other.approx.params[key], atol=1e-9
                )
        report("chunked vs monolithic batch gradients")


class TestGradientChecks:
    def test_critic_and_neurd_match_finite_differences(self):
        rng = np.random.default_rng(31)
        batch, estimates = build_batch(rng, lengths=(6, 5, 3))
        cfg = LearnerConfig(learning_rate=0.01)
        approx = TabularApproximator(4)
        materialize(approx, batch, rng)
        _, critic_grad = critic_loss(batch, approx, estimates)
        h = 1e-6
        for key, g in critic_grad.items():
            if key[0] != "value" or not np.any(g):
                continue
            base = approx.params[key][0]
            approx.params[key][0] = base + h
            up, _ = critic_loss(batch, approx, estimates)
            approx.params[key][0] = base - h
            down, _ = critic_loss(batch, approx, estimates)
            approx.params[key][0] = base
            assert g[0] == pytest.approx((up - down) / (2 * h), rel=1e-5, abs=1e-8)
        coefficients = neurd_coefficients(batch, approx, estimates, cfg)
        grad = neurd_policy_gradient(batch, approx, estimates, cfg, gated=False)
        for key, g in grad.items():
            if key[0] != "logits":
                continue
            for j in np.flatnonzero(g):
                base = approx.params[key][j]
                approx.params[key][j] = base + h
                up = neurd_scalar(batch, approx, coefficients)
                approx.params[key][j] = base - h
                down = neurd_scalar(batch, approx, coefficients)
                approx.params[key][j] = base
                assert g[j] == pytest.approx((up - down) / (2 * h), rel=1e-5, abs=1e-8)
        report("critic and NeuRD finite-difference checks")


@pytest.mark.slow
class TestDeskScalePoker:
    def test_exploitability_below_five_percent(self):
        from rnad.cli import kuhn_desk_preset

        start = time.perf_counter()
        game = kuhn_poker()
        env = EfgEnv(game)
        cfg = kuhn_desk_preset()
        learner = Learner(TabularApproximator(env.num_actions), cfg)
        run_training(env, learner, MetricsWriter(), seed=1)
        elapsed = time.perf_counter() - start
        policy = tabular_efg_policy(learner.target, game)
        exploitability = efg_exploitability(game, policy)
        assert elapsed < 1800.0, f"training took {elapsed:.0f}s"
        assert exploitability < 0.05, f"exploitability {exploitability:.4f}"
        report(
            f"desk-scale poker learning (exploitability {exploitability:.4f} "
            f"in {elapsed:.0f}s)"
        )


@pytest.mark.slow
class TestDeskScaleStrategoPipeline:
    def test_train_then_beat_baselines(self):
        """Desk-preset training within its wall-clock budget, then evaluation
        against both scripted baselines with the full test-time stack."""
        from rnad.approximator import ConvApproximator
        from rnad.envs import stratego_value_input

        start = time.perf_counter()
        cfg = desk_preset()
        learner = Learner(
            ConvApproximator(value_input_fn=stratego_value_input), cfg
        )
        run_training(StrategoEnv(), learner, MetricsWriter(), seed=0)
        train_time = time.perf_counter() - start
        assert train_time < 7200.0, f"training took {train_time:.0f}s"

        snapshot = learner.snapshot()
        vs_random = evaluate(snapshot, "random", games=400, seed=17)
        print(f"  vs random: {vs_random.to_dict()}")
        vs_greedy = evaluate(snapshot, "greedy", games=400, seed=18)
        print(f"  vs greedy: {vs_greedy.to_dict()}")
        assert vs_random.win_rate > 0.90, vs_random.to_dict()
        assert vs_greedy.win_rate > 0.60, vs_greedy.to_dict()
        report(
            f"desk-scale pipeline (train {train_time:.0f}s, "
            f"win rate {vs_random.win_rate:.2f} vs random, "
            f"{vs_greedy.win_rate:.2f} vs greedy)"
        )


class TestEngineCorrectness:
    def test_attack_resolution_table(self):
        for attacker, defender, att_alive, def_alive in ATTACK_CASES:
            state = custom_position(
                {
                    (5, 4): (RED, attacker),
                    (4, 4): (BLUE, defender),
                    (9, 9): (RED, FLAG),
                    (9, 8): (RED, SPY) if attacker != SPY else (RED, CAPTAIN),
                    (0, 0): (BLUE, FLAG),
                    (0, 1): (BLUE, SPY) if defender != SPY else (BLUE, CAPTAIN),
                },
                to_move=RED,
            )
            nxt = play_move(state, (5, 4), (4, 4))
            assert bool(nxt.alive[state.piece_at(flat(5, 4))]) == att_alive
            assert bool(nxt.alive[state.piece_at(flat(4, 4))]) == def_alive

    def test_draws_trigger_exactly_at_limits(self):
        base = {
            (7, 0): (RED, MARSHAL),
            (2, 9): (BLUE, MARSHAL),
            (9, 9): (RED, FLAG),
            (0, 0): (BLUE, FLAG),
        }
        state = custom_position(base, to_move=RED, total_moves=1999)
        assert play_move(state, (7, 0), (6, 0)).outcome == "draw"
        state = custom_position(base, to_move=RED, total_moves=1998)
        assert play_move(state, (7, 0), (6, 0)).outcome is None
        state = custom_position(base, to_move=RED, moves_since_attack=199)
        assert play_move(state, (7, 0), (6, 0)).outcome == "draw"
        state = custom_position(base, to_move=RED, moves_since_attack=198)
        assert play_move(state, (7, 0), (6, 0)).outcome is None

    def test_perft_matches_naive_generator_at_three_positions(self):
        from rnad.stratego import perft

        for seed in (21, 22, 23):
            rng = np.random.default_rng(seed)
            spec, naive = _random_sparse_position(rng)
            state = custom_position(spec, to_move=RED)
            for depth in (1, 2, 3):
                assert perft(state, depth) == naive.perft(depth)
        report("engine correctness (attacks, draw limits, perft)")


class TestObservationInvariants:
    def test_sum_rules_over_ten_thousand_states(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 10_000:
            state = new_game()
            while state.outcome is None and checked < 10_000:
                state = state.apply(int(rng.choice(state.legal_actions())))
                if state.phase != "play":
                    continue
                checked += 1
                for player in (RED, BLUE):
                    pub = public_tensor(state, player)
                    prv = private_tensor(state, player)
                    occupied = prv.sum(axis=2) > 0
                    np.testing.assert_allclose(pub[occupied].sum(axis=1), 1.0, atol=1e-9)
                    assert not pub[~occupied].any()
                    np.testing.assert_allclose(
                        pub.sum(axis=(0, 1)), prv.sum(axis=(0, 1)), atol=1e-9
                    )
        report("public-information sum rules over 10^4 states")

    def test_flag_probability_exactly_one_fortieth_at_play_start(self):
        rng = np.random.default_rng(11)
        state = new_game()
        while state.phase == "deployment":
            state = state.apply(int(rng.choice(state.legal_actions())))
        for player in (RED, BLUE):
            pub = public_tensor(state, player)
            prv = private_tensor(state, player)
            occupied = prv.sum(axis=2) > 0
            np.testing.assert_array_equal(pub[occupied, FLAG], 1.0 / 40.0)
        report("flag probability exactly 1/40 at play start")


class TestPostProcessing:
    def test_golden_values_and_exactness(self):
        from fractions import Fraction

        rng = np.random.default_rng(3)
        for _ in range(100):
            policy = rng.dirichlet(np.ones(int(rng.integers(2, 12))))
            for n in (16, 32):
                exact = discretize_exact(policy, n)
                assert sum(exact, Fraction(0)) == 1
                for f in exact:
                    assert (f * n).denominator == 1
        got = threshold(np.array([0.5, 0.3, 0.15, 0.05]), 0.1)
        np.testing.assert_allclose(got, [0.5 / 0.95, 0.3 / 0.95, 0.15 / 0.95, 0.0])
        assert eagerness_transform(0.5, 2.0) == pytest.approx(0.75)
        report("post-processing golden values and exact discretization")

    def test_value_bounds_removes_blunder_never_empties(self):
        def material(state, player):
            total = 0.0
            for pid in range(80):
                if state.ptype[pid] < 0 or not state.alive[pid]:
                    continue
                worth = float(state.ptype[pid])
                total += worth if state.owner_of(pid) == player else -worth
            return total / 100.0

        state = custom_position(
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
        state = state.apply(to_player_centric(RED, flat(5, 1)))
        legal = state.legal_actions()
        policy = np.zeros(100)
        policy[legal] = 1.0 / len(legal)
        out = value_bounds_filter(state, policy, material, eps_vb=0.05)
        assert out[to_player_centric(RED, flat(4, 1))] == 0.0
        assert abs(out.sum() - 1.0) < 1e-9
        assert out.sum() > 0
        report("value bounds removes the constructed blunder")
