"""Full-rules Stratego state machine with deterministic action generation.

A game runs through a deployment phase (each player privately places 40
pieces in a fixed type order) and a play phase in which a full move is split
into two half-actions: select a piece, then choose its destination.  Actions
are indices 0..99, always interpreted relative to the acting player's side of
the board (blue sees the board rotated 180 degrees).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .board import (
    BLUE,
    BOMB,
    DEPLOYMENT_ORDER,
    FLAG,
    HOME_ROWS,
    LAKE_MASK,
    NUM_SQUARES,
    PIECES_PER_PLAYER,
    PLAYER_NAMES,
    RED,
    SCOUT,
    SIZE,
    beats,
    flat,
    square_name,
    parse_square,
    to_absolute,
    to_player_centric,
    unflat,
)

DEPLOYMENT, PLAY = "deployment", "play"
RED_WINS, BLUE_WINS, DRAW = "red_wins", "blue_wins", "draw"

MAX_TOTAL_MOVES = 2000
MAX_MOVES_WITHOUT_ATTACK = 200

_EMPTY = -1


class IllegalActionError(ValueError):
    """An action outside legal_actions, with the violated rule spelled out."""


@dataclass(frozen=True)
class Rules:
    # The two-square rule caps consecutive back-and-forth moves of one piece
    # at three; switching it off reproduces the repetition-permissive variant.
    two_square_rule: bool = True


@dataclass(frozen=True)
class MoveRecord:
    from_sq: int
    to_sq: int
    mover: int
    was_attack: bool = False
    attacker_type: int | None = None
    defender_type: int | None = None
    attack_outcome: str | None = None


@dataclass
class GameState:
    """One position.  apply() returns a fresh state; instances never mutate."""

    rules: Rules
    phase: str
    to_move: int
    # Per-piece data indexed by pid (red 0..39, blue 40..79).
    ptype: np.ndarray
    alive: np.ndarray
    moved: np.ndarray
    long_moved: np.ndarray
    revealed: np.ndarray
    square: np.ndarray          # flat square of each pid, -1 when off board
    pid_at: np.ndarray          # flat board -> pid or -1
    deploy_cursor: np.ndarray   # per player, 0..40
    deploy_square: np.ndarray | None = None  # original placement of each pid
    total_moves: int = 0
    moves_since_attack: int = 0
    pending_selection: int | None = None
    outcome: str | None = None
    move_history: list[MoveRecord] = field(default_factory=list)
    # (pid, square pair, consecutive count) per player for the two-square rule.
    shuffle_track: tuple = (None, None)

    # -- construction ------------------------------------------------------

    @staticmethod
    def new_game(rules: Rules = Rules()) -> "GameState":
        return GameState(
            rules=rules,
            phase=DEPLOYMENT,
            to_move=RED,
            ptype=np.full(2 * PIECES_PER_PLAYER, _EMPTY, dtype=np.int8),
            alive=np.zeros(2 * PIECES_PER_PLAYER, dtype=bool),
            moved=np.zeros(2 * PIECES_PER_PLAYER, dtype=bool),
            long_moved=np.zeros(2 * PIECES_PER_PLAYER, dtype=bool),
            revealed=np.zeros(2 * PIECES_PER_PLAYER, dtype=bool),
            square=np.full(2 * PIECES_PER_PLAYER, _EMPTY, dtype=np.int16),
            pid_at=np.full(NUM_SQUARES, _EMPTY, dtype=np.int8),
            deploy_cursor=np.zeros(2, dtype=np.int16),
            deploy_square=np.full(2 * PIECES_PER_PLAYER, _EMPTY, dtype=np.int16),
        )

    def _copy(self) -> "GameState":
        return replace(
            self,
            ptype=self.ptype.copy(),
            alive=self.alive.copy(),
            moved=self.moved.copy(),
            long_moved=self.long_moved.copy(),
            revealed=self.revealed.copy(),
            square=self.square.copy(),
            pid_at=self.pid_at.copy(),
            deploy_cursor=self.deploy_cursor.copy(),
            deploy_square=self.deploy_square.copy(),
            move_history=list(self.move_history),
        )

    # -- queries -----------------------------------------------------------

    def owner_of(self, pid: int) -> int:
        return RED if pid < PIECES_PER_PLAYER else BLUE

    def piece_ids(self, player: int) -> range:
        base = player * PIECES_PER_PLAYER
        return range(base, base + PIECES_PER_PLAYER)

    def piece_at(self, sq: int) -> int:
        """pid at a flat absolute square, or -1."""
        return int(self.pid_at[sq])

    def type_known(self, pid: int) -> bool:
        """Publicly disclosed: revealed by an attack or moved like a Scout."""
        return bool(self.revealed[pid] or self.long_moved[pid])

    def is_terminal(self) -> bool:
        return self.outcome is not None

    def _destinations(self, pid: int) -> list[int]:
        """Flat absolute destination squares for one piece."""
        t = int(self.ptype[pid])
        if t == FLAG or t == BOMB:
            return []
        player = self.owner_of(pid)
        r, c = unflat(int(self.square[pid]))
        out: list[int] = []
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            while 0 <= rr < SIZE and 0 <= cc < SIZE and not LAKE_MASK[rr, cc]:
                occupant = int(self.pid_at[flat(rr, cc)])
                if occupant != _EMPTY:
                    if self.owner_of(occupant) != player:
                        out.append(flat(rr, cc))
                    break
                out.append(flat(rr, cc))
                if t != SCOUT:
                    break
                rr += dr
                cc += dc
        if self.rules.two_square_rule:
            track = self.shuffle_track[player]
            if track is not None and track[0] == pid and track[2] >= 3:
                src = int(self.square[pid])
                out = [sq for sq in out if {src, sq} != track[1]]
        return out

    def legal_actions(self) -> list[int]:
        """Player-centric action indices for the player to move."""
        if self.outcome is not None:
            return []
        me = self.to_move
        if self.phase == DEPLOYMENT:
            squares = [
                flat(r, c)
                for r in HOME_ROWS[me]
                for c in range(SIZE)
                if self.pid_at[flat(r, c)] == _EMPTY
            ]
        elif self.pending_selection is None:
            squares = [
                int(self.square[pid])
                for pid in self.piece_ids(me)
                if self.alive[pid] and self._destinations(pid)
            ]
        else:
            squares = self._destinations(self.piece_at(self.pending_selection))
        return sorted(to_player_centric(me, sq) for sq in squares)

    def has_movable_piece(self, player: int) -> bool:
        return any(
            self.alive[pid] and self._destinations(pid)
            for pid in self.piece_ids(player)
        )

    # -- transitions -------------------------------------------------------

    def apply(self, action: int) -> "GameState":
        if self.outcome is not None:
            raise IllegalActionError("game is over")
        if not 0 <= action < NUM_SQUARES:
            raise IllegalActionError(f"action {action} out of range 0..99")
        me = self.to_move
        sq = to_absolute(me, action)
        if self.phase == DEPLOYMENT:
            return self._apply_deployment(sq)
        if self.pending_selection is None:
            return self._apply_selection(sq)
        return self._apply_destination(sq)

    def _apply_deployment(self, sq: int) -> "GameState":
        me = self.to_move
        r, _ = unflat(sq)
        if r not in HOME_ROWS[me]:
            raise IllegalActionError(
                f"{square_name(sq)} is outside {PLAYER_NAMES[me]}'s deployment area"
            )
        if self.pid_at[sq] != _EMPTY:
            raise IllegalActionError(f"{square_name(sq)} is already occupied")
        nxt = self._copy()
        cursor = int(nxt.deploy_cursor[me])
        pid = me * PIECES_PER_PLAYER + cursor
        nxt.ptype[pid] = DEPLOYMENT_ORDER[cursor]
        nxt.alive[pid] = True
        nxt.square[pid] = sq
        nxt.deploy_square[pid] = sq
        nxt.pid_at[sq] = pid
        nxt.deploy_cursor[me] = cursor + 1
        if nxt.deploy_cursor[RED] == PIECES_PER_PLAYER and me == RED:
            nxt.to_move = BLUE
        if nxt.deploy_cursor[BLUE] == PIECES_PER_PLAYER:
            nxt.phase = PLAY
            nxt.to_move = RED
        return nxt

    def _apply_selection(self, sq: int) -> "GameState":
        pid = self.piece_at(sq)
        if pid == _EMPTY or self.owner_of(pid) != self.to_move:
            raise IllegalActionError(f"no own piece on {square_name(sq)}")
        t = int(self.ptype[pid])
        if t in (FLAG, BOMB):
            raise IllegalActionError("Flags and Bombs cannot move")
        if not self._destinations(pid):
            raise IllegalActionError(f"piece on {square_name(sq)} has no legal move")
        nxt = self._copy()
        nxt.pending_selection = sq
        return nxt

    def _apply_destination(self, dst: int) -> "GameState":
        src = self.pending_selection
        pid = self.piece_at(src)
        if dst not in self._destinations(pid):
            raise IllegalActionError(
                f"{square_name(src)} -> {square_name(dst)} is not a legal move"
            )
        me = self.to_move
        nxt = self._copy()
        nxt.pending_selection = None
        target = self.piece_at(dst)
        was_attack = target != _EMPTY
        attack_outcome = None
        flag_captured = False

        nxt.moved[pid] = True
        r0, c0 = unflat(src)
        r1, c1 = unflat(dst)
        if abs(r1 - r0) + abs(c1 - c0) > 1:
            nxt.long_moved[pid] = True
        nxt.pid_at[src] = _EMPTY

        if was_attack:
            attacker_t = int(self.ptype[pid])
            defender_t = int(self.ptype[target])
            attack_outcome = beats(attacker_t, defender_t)
            nxt.revealed[pid] = True
            nxt.revealed[target] = True
            flag_captured = defender_t == FLAG
            if attack_outcome == "attacker_wins":
                nxt.alive[target] = False
                nxt.square[target] = _EMPTY
                nxt.pid_at[dst] = pid
                nxt.square[pid] = dst
            elif attack_outcome == "defender_wins":
                nxt.alive[pid] = False
                nxt.square[pid] = _EMPTY
            else:  # both removed
                nxt.alive[pid] = False
                nxt.square[pid] = _EMPTY
                nxt.alive[target] = False
                nxt.square[target] = _EMPTY
                nxt.pid_at[dst] = _EMPTY
            record = MoveRecord(
                src, dst, me, True, attacker_t, defender_t, attack_outcome
            )
        else:
            nxt.pid_at[dst] = pid
            nxt.square[pid] = dst
            record = MoveRecord(src, dst, me, False)

        nxt.move_history.append(record)
        nxt.total_moves = self.total_moves + 1
        nxt.moves_since_attack = 0 if was_attack else self.moves_since_attack + 1

        # Two-square tracking: attacks break any shuffle; a quiet move either
        # extends the tracked pair or starts a new one.
        if was_attack:
            track = None
        else:
            prev = self.shuffle_track[me]
            pair = {src, dst}
            if prev is not None and prev[0] == pid and prev[1] == pair:
                track = (pid, pair, prev[2] + 1)
            else:
                track = (pid, pair, 1)
        tracks = list(self.shuffle_track)
        tracks[me] = track
        nxt.shuffle_track = tuple(tracks)

        opponent = 1 - me
        nxt.to_move = opponent
        if flag_captured:
            nxt.outcome = RED_WINS if me == RED else BLUE_WINS
        elif not nxt.has_movable_piece(opponent):
            nxt.outcome = RED_WINS if me == RED else BLUE_WINS
        elif nxt.total_moves >= MAX_TOTAL_MOVES:
            nxt.outcome = DRAW
        elif nxt.moves_since_attack >= MAX_MOVES_WITHOUT_ATTACK:
            nxt.outcome = DRAW
        return nxt


def new_game(rules: Rules = Rules()) -> GameState:
    return GameState.new_game(rules)


def custom_position(
    pieces: dict[tuple[int, int], tuple[int, int]],
    to_move: int = RED,
    moved: set[tuple[int, int]] = frozenset(),
    revealed: set[tuple[int, int]] = frozenset(),
    long_moved: set[tuple[int, int]] = frozenset(),
    rules: Rules = Rules(),
    total_moves: int = 0,
    moves_since_attack: int = 0,
) -> GameState:
    """Build a play-phase position directly; pieces maps (r, c) -> (player, type).

    Intended for tests and scripted scenarios; per-type counts are validated
    against the piece catalogue.
    """
    from .board import INITIAL_COUNTS  # local import to avoid cycle noise

    state = GameState.new_game(rules)
    state.phase = PLAY
    state.to_move = to_move
    state.total_moves = total_moves
    state.moves_since_attack = moves_since_attack
    state.deploy_cursor[:] = PIECES_PER_PLAYER
    next_pid = {RED: 0, BLUE: PIECES_PER_PLAYER}
    counts: dict[tuple[int, int], int] = {}
    for (r, c), (player, ptype) in pieces.items():
        if LAKE_MASK[r, c]:
            raise ValueError(f"({r},{c}) is a lake square")
        counts[(player, ptype)] = counts.get((player, ptype), 0) + 1
        if counts[(player, ptype)] > INITIAL_COUNTS[ptype]:
            raise ValueError(f"too many pieces of type {ptype} for player {player}")
        pid = next_pid[player]
        next_pid[player] += 1
        sq = flat(r, c)
        state.ptype[pid] = ptype
        state.alive[pid] = True
        state.square[pid] = sq
        state.deploy_square[pid] = sq
        state.pid_at[sq] = pid
        state.moved[pid] = (r, c) in moved or (r, c) in long_moved
        state.revealed[pid] = (r, c) in revealed
        state.long_moved[pid] = (r, c) in long_moved
    return state


def deployment_piece_at(cursor: int) -> int:
    """Type placed at a given position of the fixed deployment order."""
    if not 0 <= cursor < PIECES_PER_PLAYER:
        raise ValueError(f"deployment cursor {cursor} out of range")
    return DEPLOYMENT_ORDER[cursor]


def legal_actions(state: GameState) -> list[int]:
    return state.legal_actions()


def apply_action(state: GameState, action: int) -> GameState:
    return state.apply(action)


def outcome_reward(state: GameState) -> tuple[float, float]:
    """(red, blue) reward of a finished game: +-1 for a win, 0 for a draw."""
    if state.outcome is None:
        raise ValueError("game is not over")
    if state.outcome == RED_WINS:
        return (1.0, -1.0)
    if state.outcome == BLUE_WINS:
        return (-1.0, 1.0)
    return (0.0, 0.0)


def perft(state: GameState, depth: int) -> int:
    """Exhaustive count of legal half-action sequences of the given depth."""
    if depth == 0:
        return 1
    if state.outcome is not None:
        return 0
    return sum(perft(state.apply(a), depth - 1) for a in state.legal_actions())


# -- text serialization ----------------------------------------------------


def state_to_text(state: GameState) -> str:
    """Human-readable board (red upper-case side marker 'r'/'b' prefix)."""
    rows = []
    for r in range(SIZE):
        cells = []
        for c in range(SIZE):
            sq = flat(r, c)
            pid = state.piece_at(sq)
            if LAKE_MASK[r, c]:
                cells.append("~~~")
            elif pid == _EMPTY:
                cells.append("...")
            else:
                side = "r" if state.owner_of(pid) == RED else "b"
                sym = ["F", "S", "2", "3", "4", "5", "6", "7", "8", "9", "10", "B"][
                    int(state.ptype[pid])
                ]
                cells.append(f"{side}{sym:>2}")
        rows.append(" ".join(cells))
    meta = (
        f"phase={state.phase} to_move={PLAYER_NAMES[state.to_move]} "
        f"moves={state.total_moves} quiet={state.moves_since_attack} "
        f"outcome={state.outcome}"
    )
    return "\n".join(rows + [meta])


def moves_to_text(records: list[MoveRecord]) -> str:
    """One move per line: 'from to' in algebraic form."""
    return "\n".join(
        f"{square_name(m.from_sq)} {square_name(m.to_sq)}" for m in records
    )


def replay_lines(state: GameState) -> list[str]:
    """Full transcript: deployments in order, then every move."""
    lines = []
    for player in (RED, BLUE):
        base = player * PIECES_PER_PLAYER
        for cursor in range(int(state.deploy_cursor[player])):
            sq = int(state.deploy_square[base + cursor])
            lines.append(f"deploy {PLAYER_NAMES[player]} {square_name(sq)}")
    for m in state.move_history:
        lines.append(f"move {square_name(m.from_sq)} {square_name(m.to_sq)}")
    return lines


def replay_game(lines: list[str], rules: Rules = Rules()) -> GameState:
    """Rebuild a state from transcript lines produced by replay_lines."""
    state = new_game(rules)
    for line in lines:
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "deploy":
            sq = parse_square(parts[2])
            state = state.apply(to_player_centric(state.to_move, sq))
        elif parts[0] == "move":
            src, dst = parse_square(parts[1]), parse_square(parts[2])
            state = state.apply(to_player_centric(state.to_move, src))
            state = state.apply(to_player_centric(state.to_move, dst))
        else:
            raise ValueError(f"bad transcript line: {line!r}")
    return state
