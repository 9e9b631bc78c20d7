"""Small extensive-form games: exact values, best responses, exploitability.

Games are explicit trees.  Decision nodes carry a player (1 or 2) and an
information-state label; chance nodes carry an outcome distribution.  Rewards
sit on edges, so terminal positions are simply absent children.  Policies are
behavior policies: a mapping from information-state label to a distribution
over that state's actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nfg import SIMPLEX_ATOL, NormalFormGame

CHANCE = 0


class ImperfectRecallError(ValueError):
    """A player's information states are inconsistent with perfect recall."""


@dataclass
class EfgNode:
    """One history.  `children[k] is None` means action k ends the game."""

    player: int
    actions: tuple[str, ...]
    children: list["EfgNode | None"]
    # rewards[k] = (r1, r2) received when action k is taken here.
    rewards: list[tuple[float, float]]
    infostate: str = ""
    chance_probs: np.ndarray | None = None

    def __post_init__(self):
        if len(self.children) != len(self.actions) or len(self.rewards) != len(self.actions):
            raise ValueError("actions, children and rewards must align")
        if self.player == CHANCE:
            probs = np.asarray(self.chance_probs, dtype=float)
            if abs(probs.sum() - 1.0) > SIMPLEX_ATOL or np.any(probs < 0):
                raise ValueError("chance outcome distribution must be on the simplex")
            self.chance_probs = probs
        elif not self.infostate:
            raise ValueError("decision nodes need an information-state label")


@dataclass
class ExtensiveFormGame:
    root: EfgNode
    # infostate -> (player, actions); filled by validation.
    infostates: dict[str, tuple[int, tuple[str, ...]]] = field(default_factory=dict)

    def __post_init__(self):
        self.infostates = {}
        self._validate()

    def _validate(self) -> None:
        # own_sequences[infostate] = the player's (infostate, action) sequence
        # leading to it; perfect recall demands it is unique.
        own_sequences: dict[str, tuple] = {}

        def visit(node: EfgNode, seqs: dict[int, tuple]) -> None:
            if node.player != CHANCE:
                known = self.infostates.get(node.infostate)
                if known is None:
                    self.infostates[node.infostate] = (node.player, node.actions)
                elif known != (node.player, node.actions):
                    raise ImperfectRecallError(
                        f"infostate {node.infostate!r} differs in player or actions"
                    )
                prior = own_sequences.get(node.infostate)
                if prior is None:
                    own_sequences[node.infostate] = seqs[node.player]
                elif prior != seqs[node.player]:
                    raise ImperfectRecallError(
                        f"infostate {node.infostate!r} reached with different "
                        "own-action histories"
                    )
            for k, child in enumerate(node.children):
                if child is None:
                    continue
                next_seqs = dict(seqs)
                if node.player != CHANCE:
                    next_seqs[node.player] = seqs[node.player] + (
                        (node.infostate, node.actions[k]),
                    )
                visit(child, next_seqs)

        visit(self.root, {1: (), 2: ()})

    def legal_actions(self, infostate: str) -> tuple[str, ...]:
        return self.infostates[infostate][1]


Policy = dict[str, np.ndarray]


def uniform_policy(game: ExtensiveFormGame) -> Policy:
    return {
        x: np.full(len(actions), 1.0 / len(actions))
        for x, (_, actions) in game.infostates.items()
    }


def _node_policy(policy: Policy, node: EfgNode) -> np.ndarray:
    if node.player == CHANCE:
        return node.chance_probs
    p = np.asarray(policy[node.infostate], dtype=float)
    if len(p) != len(node.actions):
        raise ValueError(f"policy at {node.infostate!r} has wrong arity")
    if np.any(p < -SIMPLEX_ATOL) or abs(p.sum() - 1.0) > SIMPLEX_ATOL:
        raise ValueError(f"policy at {node.infostate!r} is not on the simplex")
    return p


def efg_policy_value(game: ExtensiveFormGame, policy: Policy) -> tuple[float, float]:
    """Expected (r1, r2) at the root under the joint behavior policy."""

    def value(node: EfgNode) -> np.ndarray:
        p = _node_policy(policy, node)
        total = np.zeros(2)
        for k, prob in enumerate(p):
            if prob == 0.0:
                continue
            step = np.array(node.rewards[k], dtype=float)
            child = node.children[k]
            total += prob * (step + (value(child) if child is not None else 0.0))
        return total

    v = value(game.root)
    return float(v[0]), float(v[1])


def _best_response(game: ExtensiveFormGame, policy: Policy, player: int) -> float:
    """Value for `player` of its exact best response against policy's opponent."""
    # Forward pass: opponent/chance reach probability of every history, and
    # the histories grouped per infostate of `player`.
    members: dict[str, list[tuple[EfgNode, float]]] = {}
    depth_of: dict[str, int] = {}

    def forward(node: EfgNode, reach: float, own_depth: int) -> None:
        if node.player == player:
            members.setdefault(node.infostate, []).append((node, reach))
            depth_of[node.infostate] = own_depth
        p = _node_policy(policy, node) if node.player != player else None
        for k, child in enumerate(node.children):
            if child is None:
                continue
            if node.player == player:
                forward(child, reach, own_depth + 1)
            else:
                forward(child, reach * float(p[k]), own_depth)

    forward(game.root, 1.0, 0)

    choice: dict[str, int] = {}

    def value_under_br(node: EfgNode) -> float:
        """player's value from this history, following fixed BR choices."""
        if node.player == player:
            k = choice[node.infostate]
            child = node.children[k]
            r = node.rewards[k][player - 1]
            return r + (value_under_br(child) if child is not None else 0.0)
        p = _node_policy(policy, node)
        total = 0.0
        for k, prob in enumerate(p):
            if prob == 0.0:
                continue
            r = node.rewards[k][player - 1]
            child = node.children[k]
            total += prob * (r + (value_under_br(child) if child is not None else 0.0))
        return total

    # Deepest own infostates first so every lookup below is already decided.
    for infostate in sorted(members, key=lambda x: -depth_of[x]):
        nodes = members[infostate]
        n_actions = len(nodes[0][0].actions)
        best_k, best_q = 0, -np.inf
        for k in range(n_actions):
            q = 0.0
            for node, reach in nodes:
                child = node.children[k]
                q += reach * (
                    node.rewards[k][player - 1]
                    + (value_under_br(child) if child is not None else 0.0)
                )
            if q > best_q:
                best_k, best_q = k, q
        choice[infostate] = best_k

    return value_under_br(game.root)


def efg_exploitability(game: ExtensiveFormGame, policy: Policy) -> float:
    """Mean best-response gain over both players; zero exactly at Nash."""
    return 0.5 * (_best_response(game, policy, 1) + _best_response(game, policy, 2))


def efg_from_matrix(game: NormalFormGame) -> ExtensiveFormGame:
    """One-shot embedding: player 1 moves, player 2 moves blind, game ends."""
    n1, n2 = game.actions_p1, game.actions_p2
    p2_actions = tuple(f"a{j}" for j in range(n2))

    def p2_node(a1: int) -> EfgNode:
        rewards = [(float(game.payoff[a1, j]), -float(game.payoff[a1, j])) for j in range(n2)]
        return EfgNode(
            player=2,
            actions=p2_actions,
            children=[None] * n2,
            rewards=rewards,
            infostate="p2",
        )

    root = EfgNode(
        player=1,
        actions=tuple(f"a{i}" for i in range(n1)),
        children=[p2_node(i) for i in range(n1)],
        rewards=[(0.0, 0.0)] * n1,
        infostate="p1",
    )
    return ExtensiveFormGame(root)


def kuhn_poker() -> ExtensiveFormGame:
    """Three-card one-bet poker: both ante 1, one bet of 1 allowed."""
    cards = ["J", "Q", "K"]

    def showdown(c1: str, c2: str, pot_each: int) -> tuple[float, float]:
        win = cards.index(c1) > cards.index(c2)
        return (float(pot_each), -float(pot_each)) if win else (-float(pot_each), float(pot_each))

    def deal_node(c1: str, c2: str) -> EfgNode:
        # After p1 checks then p2 bets: p1 folds (-1) or calls (showdown for 2).
        p1_facing_bet = EfgNode(
            player=1,
            actions=("fold", "call"),
            children=[None, None],
            rewards=[(-1.0, 1.0), showdown(c1, c2, 2)],
            infostate=f"1:{c1}:cb",
        )
        # After p1 checks: p2 checks (showdown for 1) or bets.
        p2_after_check = EfgNode(
            player=2,
            actions=("check", "bet"),
            children=[None, p1_facing_bet],
            rewards=[showdown(c1, c2, 1), (0.0, 0.0)],
            infostate=f"2:{c2}:c",
        )
        # After p1 bets: p2 folds (+1 to p1) or calls (showdown for 2).
        p2_facing_bet = EfgNode(
            player=2,
            actions=("fold", "call"),
            children=[None, None],
            rewards=[(1.0, -1.0), showdown(c1, c2, 2)],
            infostate=f"2:{c2}:b",
        )
        return EfgNode(
            player=1,
            actions=("check", "bet"),
            children=[p2_after_check, p2_facing_bet],
            rewards=[(0.0, 0.0), (0.0, 0.0)],
            infostate=f"1:{c1}:",
        )

    deals = [(c1, c2) for c1 in cards for c2 in cards if c1 != c2]
    root = EfgNode(
        player=CHANCE,
        actions=tuple(f"{c1}{c2}" for c1, c2 in deals),
        children=[deal_node(c1, c2) for c1, c2 in deals],
        rewards=[(0.0, 0.0)] * len(deals),
        chance_probs=np.full(len(deals), 1.0 / len(deals)),
    )
    return ExtensiveFormGame(root)


def matching_pennies_efg() -> ExtensiveFormGame:
    return efg_from_matrix(NormalFormGame(np.array([[1.0, -1.0], [-1.0, 1.0]])))
