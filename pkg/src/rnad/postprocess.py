"""Test-time policy adjustments for served and evaluated agents.

Pure filters (thresholding, discretization, eagerness) plus two stateful
heuristics that need match-long trackers: the pointless-threat restriction
and the memory heuristic.  A final value-bounds filter removes actions whose
optimistic two-half-move lookahead still scores clearly below the current
state value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .stratego.board import (
    BOMB,
    COLONEL,
    FLAG,
    GENERAL,
    LAKE_MASK,
    MARSHAL,
    ORTHOGONAL,
    SCOUT,
    SIZE,
    SPY,
    beats,
    flat,
    to_absolute,
    to_player_centric,
    unflat,
)
from .stratego.engine import GameState, IllegalActionError, MoveRecord, PLAY

_EMPTY = -1


@dataclass(frozen=True)
class TestTimeConfig:
    __test__ = False  # keep pytest from collecting this as a test class

    eps_tres_deploy: float = 0.03
    eps_tres_play: float = 0.03
    n_disc_deploy: int = 32
    n_disc_play: int = 16
    alpha_eag: float = 2.0
    eps_vb: float = 0.05
    use_threshold: bool = True
    use_discretize: bool = True
    use_eagerness: bool = True
    use_threat_filter: bool = True
    use_memory: bool = True
    use_value_bounds: bool = True

    def __post_init__(self):
        if not (0.0 < self.eps_tres_deploy < 1.0 and 0.0 < self.eps_tres_play < 1.0):
            raise ValueError("thresholds must lie in (0, 1)")
        if self.n_disc_deploy < 1 or self.n_disc_play < 1:
            raise ValueError("n_disc must be >= 1")
        if self.alpha_eag < 1.0:
            raise ValueError("alpha_eag must be >= 1")


# -- pure filters ------------------------------------------------------------


def threshold(policy: np.ndarray, eps: float) -> np.ndarray:
    """Drop entries below eps and renormalize; unchanged if nothing survives."""
    policy = np.asarray(policy, dtype=float)
    kept = np.where(policy < eps, 0.0, policy)
    total = kept.sum()
    if total <= 0.0:
        return policy.copy()
    return kept / total


def discretize(policy: np.ndarray, n_disc: int) -> np.ndarray:
    """Round probabilities up to multiples of 1/n_disc, largest first, until
    the quantum budget is spent; later entries get the remainder or nothing.

    Computed in integer quanta so the output sums to exactly 1.
    """
    policy = np.asarray(policy, dtype=float)
    order = sorted(range(len(policy)), key=lambda i: (-policy[i], i))
    budget = n_disc
    quanta = [0] * len(policy)
    for i in order:
        if budget == 0 or policy[i] <= 0.0:
            continue
        want = int(np.ceil(policy[i] * n_disc - 1e-9))
        take = min(want, budget)
        quanta[i] = take
        budget -= take
    return np.array([Fraction(q, n_disc) for q in quanta], dtype=float)


def discretize_exact(policy, n_disc: int) -> list[Fraction]:
    """Same procedure, returned as exact rationals."""
    policy = np.asarray(policy, dtype=float)
    order = sorted(range(len(policy)), key=lambda i: (-policy[i], i))
    budget = n_disc
    quanta = [0] * len(policy)
    for i in order:
        if budget == 0 or policy[i] <= 0.0:
            continue
        want = int(np.ceil(policy[i] * n_disc - 1e-9))
        take = min(want, budget)
        quanta[i] = take
        budget -= take
    return [Fraction(q, n_disc) for q in quanta]


def eagerness_transform(r: float, alpha: float) -> float:
    """Shrink the perceived time left before a no-attack draw."""
    if not 0.0 <= r <= 1.0:
        raise ValueError("ratio must lie in [0, 1]")
    return 1.0 - (1.0 - r) ** alpha


def project_policy(policy: np.ndarray, eps: float, n_disc: int) -> np.ndarray:
    """Threshold then discretize; the projection used by fine-tuning."""
    return discretize(threshold(policy, eps), n_disc)


# -- pointless-threat restriction -------------------------------------------


def _region_of(a: int, b: int) -> tuple[int, int]:
    """Anchor of the 2x2 region spanned by two adjacent squares."""
    (r0, c0), (r1, c1) = unflat(a), unflat(b)
    return (min(min(r0, r1), SIZE - 2), min(min(c0, c1), SIZE - 2))


def _known_weaker_neighbors(state: GameState, sq: int, attacker_type: int, me: int) -> list[int]:
    """Opponent pids adjacent to sq with a publicly known type we would beat."""
    r, c = unflat(sq)
    out = []
    for dr, dc in ORTHOGONAL:
        rr, cc = r + dr, c + dc
        if not (0 <= rr < SIZE and 0 <= cc < SIZE):
            continue
        pid = state.piece_at(flat(rr, cc))
        if pid == _EMPTY or state.owner_of(pid) == me:
            continue
        if not state.type_known(pid):
            continue
        if beats(attacker_type, int(state.ptype[pid])) == "attacker_wins":
            out.append(pid)
    return out


@dataclass
class ThreatTracker:
    """Counts completed back-and-forth threat cycles per piece pair and region.

    A cycle is an out-and-back of one of our pieces between two adjacent
    squares while it keeps threatening the same known weaker opponent piece.
    """

    me: int
    cycles: dict = field(default_factory=dict)       # (pid, opp, region) -> count
    half_cycle: dict = field(default_factory=dict)   # pid -> (from, to, opp pids)

    def observe_own_move(self, before: GameState, record: MoveRecord, after: GameState) -> None:
        if record.mover != self.me:
            return
        pid = after.piece_at(record.to_sq)
        if record.was_attack or pid == _EMPTY:
            self.half_cycle.clear()
            return
        threatened = set(
            _known_weaker_neighbors(
                after, record.to_sq, int(after.ptype[pid]), self.me
            )
        )
        pending = self.half_cycle.pop(pid, None)
        if (
            pending is not None
            and pending[0] == record.to_sq
            and pending[1] == record.from_sq
        ):
            # Returned to where the previous threat started: a full cycle
            # against every piece threatened on both legs.
            for opp in pending[2]:
                key = (pid, opp, _region_of(record.from_sq, record.to_sq))
                self.cycles[key] = self.cycles.get(key, 0) + 1
        if threatened:
            self.half_cycle[pid] = (record.from_sq, record.to_sq, threatened)

    def observe_capture(self, pid: int) -> None:
        self.cycles = {k: v for k, v in self.cycles.items() if k[0] != pid and k[1] != pid}
        self.half_cycle.pop(pid, None)

    def banned_destinations(self, state: GameState, pid: int, src: int) -> set[int]:
        """Destinations that would re-threaten after three completed cycles."""
        banned = set()
        attacker_type = int(state.ptype[pid])
        for (p, opp, region), count in self.cycles.items():
            if p != pid or count < 3:
                continue
            if not state.alive[opp]:
                continue
            for dst in state._destinations(pid):
                if _region_of(src, dst) != region:
                    continue
                if opp in _known_weaker_neighbors(state, dst, attacker_type, self.me):
                    banned.add(dst)
        return banned


def pointless_threat_filter(
    state: GameState,
    tracker: ThreatTracker,
    policy: np.ndarray,
) -> np.ndarray:
    """Zero re-threatening destination actions once the cycle budget is spent.

    Applies at the destination half-action; the policy is indexed by
    player-centric action and renormalized unless nothing else is supported.
    """
    if state.phase != PLAY or state.pending_selection is None:
        return policy
    pid = state.piece_at(state.pending_selection)
    banned = tracker.banned_destinations(state, pid, state.pending_selection)
    if not banned:
        return policy
    me = state.to_move
    filtered = policy.copy()
    for idx in range(len(filtered)):
        if filtered[idx] > 0.0 and to_absolute(me, idx) in banned:
            filtered[idx] = 0.0
    total = filtered.sum()
    if total <= 0.0:
        return policy
    return filtered / total


# -- memory heuristic --------------------------------------------------------

# (attacker type it cannot be, defender type, recapture condition applies)
_MEMORY_RULES = (
    (SPY, (MARSHAL,), False),
    (MARSHAL, (GENERAL, COLONEL), True),
    (GENERAL, (COLONEL,), True),
)


@dataclass
class MemoryTracker:
    """Piece-type eliminations implied by declined attacks.

    If a piece sat next to a publicly known Marshal and its owner made a
    non-attacking move, that piece is not the Spy; similar rules eliminate
    the Marshal and the General when a safe high-value capture was declined.
    """

    eliminated: dict = field(default_factory=dict)  # pid -> set of type codes

    def observe_move(self, before: GameState, record: MoveRecord) -> None:
        if record.was_attack:
            return
        mover = record.mover
        for pid in before.piece_ids(mover):
            if not before.alive[pid] or before.type_known(pid):
                continue
            sq = int(before.square[pid])
            if pid == before.piece_at(record.from_sq):
                sq = record.from_sq
            r, c = unflat(sq)
            for attacker_type, defender_types, needs_safety in _MEMORY_RULES:
                if self._had_attack_chance(
                    before, mover, sq, attacker_type, defender_types, needs_safety
                ):
                    self.eliminated.setdefault(pid, set()).add(attacker_type)

    def _had_attack_chance(
        self,
        state: GameState,
        mover: int,
        sq: int,
        attacker_type: int,
        defender_types: tuple[int, ...],
        needs_safety: bool,
    ) -> bool:
        r, c = unflat(sq)
        for dr, dc in ORTHOGONAL:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < SIZE and 0 <= cc < SIZE) or LAKE_MASK[rr, cc]:
                continue
            target = state.piece_at(flat(rr, cc))
            if target == _EMPTY or state.owner_of(target) == mover:
                continue
            if not state.type_known(target):
                continue
            if int(state.ptype[target]) not in defender_types:
                continue
            if needs_safety and _recapture_possible(
                state, flat(rr, cc), attacker_type, mover
            ):
                continue
            return True
        return False

    def apply(self, state: GameState, pub_self: np.ndarray, pub_opp: np.ndarray, viewer: int) -> tuple[np.ndarray, np.ndarray]:
        """Zero eliminated type entries in both public tensors (no renorm)."""
        pub_self = pub_self.copy()
        pub_opp = pub_opp.copy()
        for pid, types in self.eliminated.items():
            if not state.alive[pid]:
                continue
            r, c = unflat(int(state.square[pid]))
            target = pub_self if state.owner_of(pid) == viewer else pub_opp
            for t in types:
                if target[r, c, t] < 1.0:  # a probability-1 type is never zeroed
                    target[r, c, t] = 0.0
        return pub_self, pub_opp


def possible_types(state: GameState, pid: int) -> set[int]:
    """Types a piece could have, judged from public information only."""
    if state.type_known(pid):
        return {int(state.ptype[pid])}
    owner = state.owner_of(pid)
    unrevealed = [0] * 12
    for p in state.piece_ids(owner):
        if state.alive[p] and not state.type_known(p):
            unrevealed[int(state.ptype[p])] += 1
    out = {t for t in range(12) if unrevealed[t] > 0}
    if state.moved[pid]:
        out -= {FLAG, BOMB}
    return out


def _can_reach(state: GameState, pid: int, target_sq: int) -> bool:
    """Could this piece legally land on target_sq (type uncertainty aside)?"""
    src = int(state.square[pid])
    r0, c0 = unflat(src)
    r1, c1 = unflat(target_sq)
    if r0 == r1 and abs(c0 - c1) == 1 or c0 == c1 and abs(r0 - r1) == 1:
        return True
    # Scout ray: same row/column with an empty, lake-free corridor.
    if r0 != r1 and c0 != c1:
        return False
    if SCOUT not in possible_types(state, pid):
        return False
    dr = 0 if r0 == r1 else (1 if r1 > r0 else -1)
    dc = 0 if c0 == c1 else (1 if c1 > c0 else -1)
    r, c = r0 + dr, c0 + dc
    while (r, c) != (r1, c1):
        if LAKE_MASK[r, c] or state.piece_at(flat(r, c)) != _EMPTY:
            return False
        r, c = r + dr, c + dc
    return not LAKE_MASK[r1, c1]


def _recapture_possible(
    state: GameState, square: int, attacker_type: int, attacker_owner: int
) -> bool:
    """Could any enemy piece capture a piece of attacker_type on square?"""
    victim_on_square = state.piece_at(square)
    for pid in state.piece_ids(1 - attacker_owner):
        if not state.alive[pid] or pid == victim_on_square:
            continue
        if not _can_reach(state, pid, square):
            continue
        for t in possible_types(state, pid):
            if t in (FLAG, BOMB):
                continue
            if beats(t, attacker_type) in ("attacker_wins", "both_removed"):
                return True
    return False


# -- value bounds heuristic ---------------------------------------------------

ValueFn = Callable[[GameState, int], float]


def _with_type(state: GameState, pid: int, ptype: int) -> GameState:
    hypo = state._copy()
    hypo.ptype[pid] = ptype
    return hypo


def _terminal_value(state: GameState, player: int) -> float:
    from .stratego.engine import outcome_reward

    rewards = outcome_reward(state)
    return rewards[player]


def _movable_possible_types(state: GameState, pid: int, long_move: bool) -> list[int]:
    types = possible_types(state, pid) - {FLAG, BOMB}
    if long_move:
        types &= {SCOUT}
    return sorted(types)


def _safe_replies(state: GameState, agent: int) -> list[tuple[int, int, int]]:
    """Opponent full moves (pid, src, dst) that are safe on public information.

    Safe means: the piece is already known to be movable, long moves only by
    known Scouts, attacks are guaranteed wins against every consistent private
    configuration, and the piece cannot possibly be captured afterwards.
    """
    opponent = state.to_move
    assert opponent == 1 - agent
    replies = []
    for pid in state.piece_ids(opponent):
        if not state.alive[pid]:
            continue
        known_movable = bool(state.moved[pid]) or (
            state.type_known(pid) and int(state.ptype[pid]) not in (FLAG, BOMB)
        )
        if not known_movable:
            continue
        src = int(state.square[pid])
        r0, c0 = unflat(src)
        for dst in state._destinations(pid):
            r1, c1 = unflat(dst)
            long_move = abs(r1 - r0) + abs(c1 - c0) > 1
            if long_move and not (
                state.long_moved[pid]
                or (state.type_known(pid) and int(state.ptype[pid]) == SCOUT)
            ):
                continue
            mover_types = _movable_possible_types(state, pid, long_move)
            if not mover_types:
                continue
            target = state.piece_at(dst)
            if target != _EMPTY:
                target_types = possible_types(state, target)
                if not all(
                    beats(tp, tq) == "attacker_wins"
                    for tp in mover_types
                    for tq in target_types
                ):
                    continue
            # "Cannot be captured afterwards" under any consistent typing.
            if any(
                _type_could_be_captured_at(state, pid, dst, tp, agent, target)
                for tp in mover_types
            ):
                continue
            replies.append((pid, src, dst))
    return replies


def _type_could_be_captured_at(
    state: GameState, pid: int, dst: int, piece_type: int, agent: int, captured: int
) -> bool:
    """After pid lands on dst as piece_type, could any agent piece remove it?"""
    src = int(state.square[pid])
    for rid in state.piece_ids(agent):
        if not state.alive[rid] or rid == captured:
            continue
        if not _reach_after_move(state, rid, dst, moved_from=src):
            continue
        for t in possible_types(state, rid):
            if t in (FLAG, BOMB):
                continue
            if beats(t, piece_type) in ("attacker_wins", "both_removed"):
                return True
    return False


def _reach_after_move(state: GameState, pid: int, target_sq: int, moved_from: int) -> bool:
    """_can_reach on the board after the replying piece vacated moved_from."""
    src = int(state.square[pid])
    r0, c0 = unflat(src)
    r1, c1 = unflat(target_sq)
    if (r0 == r1 and abs(c0 - c1) == 1) or (c0 == c1 and abs(r0 - r1) == 1):
        return True
    if r0 != r1 and c0 != c1:
        return False
    if SCOUT not in possible_types(state, pid):
        return False
    dr = 0 if r0 == r1 else (1 if r1 > r0 else -1)
    dc = 0 if c0 == c1 else (1 if c1 > c0 else -1)
    r, c = r0 + dr, c0 + dc
    while (r, c) != (r1, c1):
        here = flat(r, c)
        if LAKE_MASK[r, c]:
            return False
        if here != moved_from and state.piece_at(here) != _EMPTY:
            return False
        r, c = r + dr, c + dc
    return not LAKE_MASK[r1, c1]


def _apply_full_move(state: GameState, src: int, dst: int) -> GameState:
    me = state.to_move
    mid = state.apply(to_player_centric(me, src))
    return mid.apply(to_player_centric(me, dst))


def _reply_group_value(
    state_after_a: GameState,
    agent: int,
    replies_of_piece: list[tuple[int, int, int]],
    value_fn: ValueFn,
) -> float:
    """max over the piece's consistent types of min over its safe replies."""
    pid = replies_of_piece[0][0]
    type_sets = set()
    for _, src, dst in replies_of_piece:
        r0, c0 = unflat(src)
        r1, c1 = unflat(dst)
        long_move = abs(r1 - r0) + abs(c1 - c0) > 1
        type_sets.update(_movable_possible_types(state_after_a, pid, long_move))
    best = -np.inf
    for ptype in sorted(type_sets):
        worst = np.inf
        for _, src, dst in replies_of_piece:
            hypo = _with_type(state_after_a, pid, ptype)
            try:
                nxt = _apply_full_move(hypo, src, dst)
            except IllegalActionError:
                continue  # a typing inconsistent with this reply's move shape
            if nxt.outcome is not None:
                val = _terminal_value(nxt, agent)
            else:
                val = value_fn(nxt, agent)
            worst = min(worst, val)
        if worst < np.inf:
            best = max(best, worst)
    return best


def value_bounds_filter(
    state: GameState,
    policy: np.ndarray,
    value_fn: ValueFn,
    eps_vb: float = 0.05,
) -> np.ndarray:
    """Remove supported destination actions whose optimistic two-half-move
    bound sits more than eps_vb below the current state value.

    The bound is optimistic over hidden opponent types (at most the piece we
    attack and one replying piece are unknown) and pessimistic over the
    opponent's publicly safe replies; with no safe reply available the bound
    falls back to the post-move state value itself.  A policy supported on a
    single action is never changed.
    """
    if state.phase != PLAY or state.pending_selection is None:
        return policy
    support = [i for i in range(len(policy)) if policy[i] > 0.0]
    if len(support) <= 1:
        return policy
    agent = state.to_move
    v_now = value_fn(state, agent)
    filtered = policy.copy()
    for idx in support:
        dst = to_absolute(agent, idx)
        bound = _action_upper_bound(state, dst, agent, value_fn)
        if bound + eps_vb < v_now:
            filtered[idx] = 0.0
    total = filtered.sum()
    if total <= 0.0:
        return policy
    return filtered / total


def _action_upper_bound(
    state: GameState, dst: int, agent: int, value_fn: ValueFn
) -> float:
    target = state.piece_at(dst)
    if target == _EMPTY:
        defender_types = [None]
    else:
        defender_types = sorted(possible_types(state, target))
    best = -np.inf
    for d in defender_types:
        base = state if d is None else _with_type(state, target, d)
        after = base.apply(to_player_centric(agent, dst))
        if after.outcome is not None:
            best = max(best, _terminal_value(after, agent))
            continue
        replies = _safe_replies(after, agent)
        if not replies:
            best = max(best, value_fn(after, agent))
            continue
        by_piece: dict[int, list[tuple[int, int, int]]] = {}
        for reply in replies:
            by_piece.setdefault(reply[0], []).append(reply)
        worst = min(
            _reply_group_value(after, agent, group, value_fn)
            for group in by_piece.values()
        )
        best = max(best, worst)
    return best
