"""A playing agent: network policy plus the full test-time stack.

Per decision the agent adjusts its observation first (eagerness reshaping of
the no-attack ratio, memory-heuristic zeroing of the public planes), then
evaluates the network, then filters the policy: threshold, discretize,
pointless-threat restriction, value bounds.  Trackers live for one match.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approximator import Approximator
from .encoding import (
    PLANE_NO_ATTACK,
    PLANE_PUBLIC_OPPONENT,
    PLANE_PUBLIC_SELF,
    encode,
)
from .envs import StrategoEnv
from .learner import ParamSnapshot
from .postprocess import (
    MemoryTracker,
    TestTimeConfig,
    ThreatTracker,
    discretize,
    eagerness_transform,
    pointless_threat_filter,
    threshold,
    value_bounds_filter,
)
from .stratego.engine import DEPLOYMENT, GameState, MoveRecord, PLAY


@dataclass
class StrategoAgent:
    """One side of one match; not reusable across matches."""

    snapshot: ParamSnapshot
    me: int
    config: TestTimeConfig = TestTimeConfig()

    def __post_init__(self):
        self.threat_tracker = ThreatTracker(me=self.me)
        self.memory_tracker = MemoryTracker()
        # Evaluation plays the converged policy: the target parameters.
        self.net: Approximator = self.snapshot.target

    # -- match-long tracking -----------------------------------------------

    def observe_move(self, before: GameState, record: MoveRecord, after: GameState) -> None:
        """Feed every completed move (both sides) to the trackers."""
        if self.config.use_threat_filter:
            self.threat_tracker.observe_own_move(before, record, after)
            for pid in range(len(after.alive)):
                if before.alive[pid] and not after.alive[pid]:
                    self.threat_tracker.observe_capture(pid)
        if self.config.use_memory:
            self.memory_tracker.observe_move(before, record)

    # -- observation adjustments ---------------------------------------------

    def adjusted_observation(self, state: GameState) -> np.ndarray:
        obs = encode(state, self.me)
        if self.config.use_eagerness:
            r = float(obs[0, 0, PLANE_NO_ATTACK])
            obs[:, :, PLANE_NO_ATTACK] = eagerness_transform(r, self.config.alpha_eag)
        if self.config.use_memory and state.phase == PLAY:
            pub_opp = obs[:, :, PLANE_PUBLIC_OPPONENT : PLANE_PUBLIC_OPPONENT + 12]
            pub_self = obs[:, :, PLANE_PUBLIC_SELF : PLANE_PUBLIC_SELF + 12]
            # Tensors sit in the viewer's orientation; trackers work on the
            # absolute board, so rotate for blue and back.
            if self.me == 1:
                pub_opp = np.rot90(pub_opp, 2, axes=(0, 1))
                pub_self = np.rot90(pub_self, 2, axes=(0, 1))
            adj_self, adj_opp = self.memory_tracker.apply(
                state, pub_self.copy(), pub_opp.copy(), viewer=self.me
            )
            if self.me == 1:
                adj_self = np.rot90(adj_self, 2, axes=(0, 1))
                adj_opp = np.rot90(adj_opp, 2, axes=(0, 1))
            obs[:, :, PLANE_PUBLIC_OPPONENT : PLANE_PUBLIC_OPPONENT + 12] = adj_opp
            obs[:, :, PLANE_PUBLIC_SELF : PLANE_PUBLIC_SELF + 12] = adj_self
        return obs

    def _value_fn(self, state: GameState, player: int) -> float:
        return self.net.evaluate_value(encode(state, player))

    # -- acting ----------------------------------------------------------------

    def policy(self, state: GameState) -> np.ndarray:
        env = StrategoEnv(state.rules)
        legal = state.legal_actions()
        obs = self.adjusted_observation(state)
        head = env.head(state)
        policy = self.net.policy(obs, head, legal)
        deploying = state.phase == DEPLOYMENT
        if self.config.use_threshold:
            eps = self.config.eps_tres_deploy if deploying else self.config.eps_tres_play
            policy = threshold(policy, eps)
        if self.config.use_discretize:
            n = self.config.n_disc_deploy if deploying else self.config.n_disc_play
            policy = discretize(policy, n)
        if not deploying:
            if self.config.use_threat_filter:
                policy = pointless_threat_filter(state, self.threat_tracker, policy)
            if self.config.use_value_bounds and state.pending_selection is not None:
                policy = value_bounds_filter(
                    state, policy, self._value_fn, self.config.eps_vb
                )
        return policy

    def act(self, state: GameState, rng: np.random.Generator) -> int:
        policy = self.policy(state)
        support = np.flatnonzero(policy > 0)
        probs = policy[support]
        return int(support[rng.choice(len(support), p=probs / probs.sum())])
