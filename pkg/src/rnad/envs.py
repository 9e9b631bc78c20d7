"""Environments: the interface self-play runs against, plus two adapters.

An environment exposes alternating-turn play with integer actions, an
observation per decision point and rewards attached to transitions.  Chance
is resolved internally.  Adapters wrap the explicit extensive-form trees
(used by the small-game learning tests) and the Stratego engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .efg import CHANCE, EfgNode, ExtensiveFormGame
from .encoding import (
    PLANE_HALF_ACTION,
    PLANE_NO_ATTACK,
    PLANE_PHASE,
    PLANE_SELECTED,
    encode,
)
from .stratego.engine import DEPLOYMENT, GameState, Rules, new_game, outcome_reward


class Environment:
    """Two-player alternating-turn environment with terminal or edge rewards."""

    num_actions: int

    def initial(self, rng: np.random.Generator):
        raise NotImplementedError

    def is_terminal(self, state) -> bool:
        raise NotImplementedError

    def mover(self, state) -> int:
        raise NotImplementedError

    def legal_actions(self, state) -> tuple[int, ...]:
        raise NotImplementedError

    def observe(self, state) -> Any:
        """Observation for the player to move."""
        raise NotImplementedError

    def head(self, state) -> str:
        return "selection"

    def step(self, state, action: int, rng: np.random.Generator):
        """Returns (next_state, (reward_p0, reward_p1))."""
        raise NotImplementedError


@dataclass
class EfgEnvState:
    node: EfgNode | None  # None once terminal
    pending_rewards: tuple[float, float]


class EfgEnv(Environment):
    """Plays an explicit game tree; chance nodes are sampled away."""

    def __init__(self, game: ExtensiveFormGame):
        self.game = game
        self.num_actions = max(
            len(actions) for _, actions in game.infostates.values()
        )

    def _advance_chance(
        self, node: EfgNode | None, rewards: np.ndarray, rng: np.random.Generator
    ) -> EfgNode | None:
        while node is not None and node.player == CHANCE:
            k = int(rng.choice(len(node.actions), p=node.chance_probs))
            rewards += np.asarray(node.rewards[k])
            node = node.children[k]
        return node

    def initial(self, rng: np.random.Generator) -> EfgEnvState:
        rewards = np.zeros(2)
        node = self._advance_chance(self.game.root, rewards, rng)
        return EfgEnvState(node, (float(rewards[0]), float(rewards[1])))

    def is_terminal(self, state: EfgEnvState) -> bool:
        return state.node is None

    def mover(self, state: EfgEnvState) -> int:
        return state.node.player - 1

    def legal_actions(self, state: EfgEnvState) -> tuple[int, ...]:
        return tuple(range(len(state.node.actions)))

    def observe(self, state: EfgEnvState) -> str:
        return state.node.infostate

    def step(self, state: EfgEnvState, action: int, rng: np.random.Generator):
        node = state.node
        rewards = np.asarray(node.rewards[action], dtype=float).copy()
        child = node.children[action]
        child = self._advance_chance(child, rewards, rng)
        nxt = EfgEnvState(child, (0.0, 0.0))
        return nxt, (float(rewards[0]), float(rewards[1]))


def stratego_value_input(obs: np.ndarray) -> np.ndarray:
    """Zero the auxiliary value-head inputs exactly as the phase dictates:
    the no-attack ratio during deployment, the selected-piece plane during
    deployment and the piece-selection stage."""
    out = np.array(obs, copy=True)
    deploying = out[0, 0, PLANE_PHASE] == 1.0
    choosing_destination = out[0, 0, PLANE_HALF_ACTION] == 1.0
    if deploying:
        out[:, :, PLANE_NO_ATTACK] = 0.0
    if deploying or not choosing_destination:
        out[:, :, PLANE_SELECTED] = 0.0
    return out


class StrategoEnv(Environment):
    """Full-rules Stratego behind the generic environment interface."""

    num_actions = 100

    def __init__(self, rules: Rules = Rules()):
        self.rules = rules

    def initial(self, rng: np.random.Generator) -> GameState:
        return new_game(self.rules)

    def is_terminal(self, state: GameState) -> bool:
        return state.outcome is not None

    def mover(self, state: GameState) -> int:
        return state.to_move

    def legal_actions(self, state: GameState) -> tuple[int, ...]:
        return tuple(state.legal_actions())

    def observe(self, state: GameState) -> np.ndarray:
        return encode(state, state.to_move)

    def head(self, state: GameState) -> str:
        if state.phase == DEPLOYMENT:
            return "deployment"
        return "displacement" if state.pending_selection is not None else "selection"

    def step(self, state: GameState, action: int, rng: np.random.Generator):
        nxt = state.apply(action)
        rewards = outcome_reward(nxt) if nxt.outcome is not None else (0.0, 0.0)
        return nxt, rewards


def tabular_efg_policy(approx, game: ExtensiveFormGame, project=None) -> dict:
    """Behavior policy per infostate read off an approximator, for exact
    value/exploitability computations on explicit trees."""
    policy = {}
    for infostate, (_, actions) in game.infostates.items():
        legal = tuple(range(len(actions)))
        probs = approx.policy_over_legal(infostate, "selection", legal)
        if project is not None:
            probs = project(probs)
        policy[infostate] = probs
    return policy
