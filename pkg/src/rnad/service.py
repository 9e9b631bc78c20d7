"""Live match service: session logic and the newline-delimited JSON protocol.

One session runs one match between a human-controlled side and the loaded
agent.  Messages are JSON objects with a "type" field, one per line, over any
bidirectional byte stream (TCP socket, or stdin/stdout for the text client).
The server never sends a piece type of the agent's side unless it is public
knowledge, and action indices are always relative to the receiving player.

During the play phase a full move takes two submissions: the piece square,
then the destination.  While choosing the destination, submitting the
selected piece's own square cancels the selection, and submitting another
selectable piece's square re-selects (both index sets are disjoint from the
legal destinations, so the interpretation is unambiguous).
"""

from __future__ import annotations

import json
import socketserver
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from .agent import StrategoAgent
from .learner import Learner, ParamSnapshot
from .postprocess import TestTimeConfig
from .stratego.board import (
    BLUE,
    PLAYER_NAMES,
    RED,
    SIZE,
    TYPE_SYMBOLS,
    flat,
    to_absolute,
    to_player_centric,
    unflat,
)
from .stratego.engine import (
    DEPLOYMENT,
    GameState,
    IllegalActionError,
    MoveRecord,
    Rules,
    new_game,
    outcome_reward,
    replay_lines,
)

PROTOCOL_VERSION = 1


def _board_view(state: GameState, viewer: int) -> list[list[dict | None]]:
    """Player-centric 10x10 cell grid with only viewer-visible information."""
    grid: list[list[dict | None]] = [[None] * SIZE for _ in range(SIZE)]
    deploying = state.phase == DEPLOYMENT
    for r in range(SIZE):
        for c in range(SIZE):
            sq = to_absolute(viewer, flat(r, c))
            ar, ac = unflat(sq)
            from .stratego.board import LAKE_MASK

            if LAKE_MASK[ar, ac]:
                grid[r][c] = {"lake": True}
                continue
            pid = state.piece_at(sq)
            if pid < 0:
                continue
            owner = state.owner_of(pid)
            if owner == viewer:
                grid[r][c] = {
                    "own": True,
                    "type": TYPE_SYMBOLS[int(state.ptype[pid])],
                    "moved": bool(state.moved[pid]),
                    "revealed": bool(state.type_known(pid)),
                }
            elif not deploying:
                cell = {"own": False, "revealed": bool(state.type_known(pid))}
                if state.type_known(pid):
                    cell["type"] = TYPE_SYMBOLS[int(state.ptype[pid])]
                grid[r][c] = cell
            # Opponent pieces are entirely hidden during deployment.
    return grid


def _public_move(record: MoveRecord, viewer: int) -> dict:
    """A completed move as the viewer may know it."""
    msg = {
        "from": to_player_centric(viewer, record.from_sq),
        "to": to_player_centric(viewer, record.to_sq),
        "mover": PLAYER_NAMES[record.mover],
        "was_attack": record.was_attack,
    }
    if record.was_attack:
        # An attack publicly reveals both types.
        msg["attacker_type"] = TYPE_SYMBOLS[record.attacker_type]
        msg["defender_type"] = TYPE_SYMBOLS[record.defender_type]
        msg["attack_outcome"] = record.attack_outcome
    return msg


@dataclass
class MatchSession:
    """One isolated match; exactly one pending action owner at any time."""

    snapshot: ParamSnapshot
    human_side: int
    test_time: TestTimeConfig = field(default_factory=TestTimeConfig)
    rules: Rules = field(default_factory=Rules)
    seed: int = 0
    match_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        self.state = new_game(self.rules)
        self.agent = StrategoAgent(self.snapshot, 1 - self.human_side, self.test_time)
        self._pre_selection_state: GameState | None = None

    # -- views ---------------------------------------------------------------

    def _acceptable_actions(self) -> list[int]:
        """Engine-legal actions, plus cancel/re-select squares while choosing
        a destination (the selected piece's square and other selectable
        pieces are accepted as session-level inputs)."""
        state = self.state
        actions = {int(a) for a in state.legal_actions()}
        if state.phase != DEPLOYMENT and state.pending_selection is not None:
            actions.add(to_player_centric(self.human_side, state.pending_selection))
            if self._pre_selection_state is not None:
                actions.update(int(a) for a in self._pre_selection_state.legal_actions())
        return sorted(actions)

    def observation_message(self) -> dict:
        state = self.state
        return {
            "type": "observation",
            "match_id": self.match_id,
            "phase": state.phase,
            "to_move": PLAYER_NAMES[state.to_move],
            "half_action": (
                "destination" if state.pending_selection is not None else "selection"
            ),
            "legal_actions": self._acceptable_actions(),
            "pending_selection": (
                to_player_centric(self.human_side, state.pending_selection)
                if state.pending_selection is not None
                else None
            ),
            "board": _board_view(state, self.human_side),
            "total_moves": state.total_moves,
            "moves_since_attack": state.moves_since_attack,
            "your_side": PLAYER_NAMES[self.human_side],
        }

    def game_over_message(self) -> dict:
        state = self.state
        reveal = [
            [
                (
                    {
                        "owner": PLAYER_NAMES[state.owner_of(state.piece_at(flat(r, c)))],
                        "type": TYPE_SYMBOLS[int(state.ptype[state.piece_at(flat(r, c))])],
                    }
                    if state.piece_at(flat(r, c)) >= 0
                    else None
                )
                for c in range(SIZE)
            ]
            for r in range(SIZE)
        ]
        rewards = outcome_reward(state)
        return {
            "type": "game_over",
            "match_id": self.match_id,
            "outcome": state.outcome,
            "your_reward": rewards[self.human_side],
            "final_board": reveal,
            "transcript": replay_lines(state),
        }

    # -- turn driving ----------------------------------------------------------

    def human_to_act(self) -> bool:
        return self.state.outcome is None and self.state.to_move == self.human_side

    def run_agent_turns(self) -> list[dict]:
        """Let the agent act until the human must move or the game ends;
        returns the public messages produced along the way."""
        out: list[dict] = []
        while self.state.outcome is None and self.state.to_move != self.human_side:
            action = self.agent.act(self.state, self.rng)
            before = self.state
            self.state = self.state.apply(action)
            if len(self.state.move_history) > len(before.move_history):
                record = self.state.move_history[-1]
                self.agent.observe_move(before, record, self.state)
                out.append(
                    {
                        "type": "move_made",
                        "match_id": self.match_id,
                        "move": _public_move(record, self.human_side),
                    }
                )
        if self.state.outcome is not None:
            out.append(self.game_over_message())
        return out

    def submit_human_action(self, action: int) -> list[dict]:
        """Apply the human's action; replies with rejection, progress and any
        follow-up agent moves."""
        state = self.state
        if state.outcome is not None:
            return [self._reject("the game is over")]
        if state.to_move != self.human_side:
            return [self._reject("it is not your turn")]
        if not isinstance(action, int) or not 0 <= action < 100:
            return [self._reject("action must be an integer in 0..99")]

        if state.phase != DEPLOYMENT and state.pending_selection is not None:
            handled = self._maybe_reselect(action)
            if handled is not None:
                return handled
        try:
            before = self.state
            applied = state.apply(action)
        except IllegalActionError as err:
            return [self._reject(str(err))]
        if state.phase != DEPLOYMENT and state.pending_selection is None:
            self._pre_selection_state = state
        self.state = applied
        out: list[dict] = []
        if len(applied.move_history) > len(before.move_history):
            record = applied.move_history[-1]
            self.agent.observe_move(before, record, applied)
            out.append(
                {
                    "type": "move_made",
                    "match_id": self.match_id,
                    "move": _public_move(record, self.human_side),
                }
            )
        if applied.outcome is not None:
            out.append(self.game_over_message())
            return out
        out.extend(self.run_agent_turns())
        if self.human_to_act():
            out.append(self.observation_message())
        return out

    def _maybe_reselect(self, action: int) -> list[dict] | None:
        """During destination choice: the selected square cancels, another
        selectable piece re-selects.  Returns None if the action is neither."""
        state = self.state
        selected_idx = to_player_centric(self.human_side, state.pending_selection)
        if action == selected_idx:
            self.state = self._pre_selection_state
            return [self.observation_message()]
        base = self._pre_selection_state
        if base is not None and action in base.legal_actions():
            self.state = base.apply(action)
            self._pre_selection_state = base
            return [self.observation_message()]
        return None

    def _reject(self, reason: str) -> dict:
        return {"type": "action_rejected", "match_id": self.match_id, "reason": reason}


class MatchServer:
    """Transport-independent message dispatch; one session per connection."""

    def __init__(
        self,
        snapshot: ParamSnapshot,
        test_time: TestTimeConfig | None = None,
        rules: Rules | None = None,
        seed: int = 0,
    ):
        self.snapshot = snapshot
        self.test_time = test_time or TestTimeConfig()
        self.rules = rules or Rules()
        self._seed_lock = threading.Lock()
        self._seed = seed

    def _next_seed(self) -> int:
        with self._seed_lock:
            self._seed += 1
            return self._seed

    def open_session(self, message: dict) -> tuple[MatchSession, list[dict]]:
        side = message.get("side", "red")
        if side not in ("red", "blue"):
            raise ValueError("side must be 'red' or 'blue'")
        human_side = RED if side == "red" else BLUE
        session = MatchSession(
            self.snapshot,
            human_side,
            self.test_time,
            self.rules,
            seed=self._next_seed(),
        )
        replies = [
            {
                "type": "match_created",
                "match_id": session.match_id,
                "protocol": PROTOCOL_VERSION,
                "your_side": side,
                "agent_side": PLAYER_NAMES[1 - human_side],
            }
        ]
        replies.extend(session.run_agent_turns())
        if session.human_to_act():
            replies.append(session.observation_message())
        return session, replies

    def handle(self, session: MatchSession | None, message: dict):
        """Returns (session, replies).  Every message gets exactly one reply
        batch; malformed input produces a structured error."""
        if not isinstance(message, dict) or "type" not in message:
            return session, [{"type": "error", "reason": "messages need a 'type' field"}]
        mtype = message["type"]
        if mtype == "hello":
            if session is not None:
                return session, [
                    {"type": "error", "reason": "session already established"}
                ]
            try:
                return self.open_session(message)
            except ValueError as err:
                return None, [{"type": "error", "reason": str(err)}]
        if session is None:
            return None, [{"type": "error", "reason": "say hello first"}]
        if mtype == "observation_request":
            return session, [session.observation_message()]
        if mtype == "submit_action":
            action = message.get("action")
            if not isinstance(action, int) or isinstance(action, bool):
                return session, [session._reject("action must be an integer")]
            return session, session.submit_human_action(action)
        return session, [{"type": "error", "reason": f"unknown message type {mtype!r}"}]


def serve_lines(server: MatchServer, read_line, write_line) -> None:
    """Drive one connection over newline-delimited JSON until EOF."""
    session: MatchSession | None = None
    while True:
        line = read_line()
        if not line:
            return
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            write_line(json.dumps({"type": "error", "reason": "malformed JSON"}))
            continue
        session, replies = server.handle(session, message)
        for reply in replies:
            write_line(json.dumps(reply))
        if session is not None and session.state.outcome is not None:
            # The session stays open for inspection; clients usually hang up.
            pass


class _TcpHandler(socketserver.StreamRequestHandler):
    def handle(self):
        def read_line():
            raw = self.rfile.readline()
            return raw.decode("utf-8") if raw else ""

        def write_line(text: str):
            self.wfile.write((text + "\n").encode("utf-8"))
            self.wfile.flush()

        serve_lines(self.server.match_server, read_line, write_line)


class TcpMatchServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], match_server: MatchServer):
        super().__init__(address, _TcpHandler)
        self.match_server = match_server


def create_ws_app(match_server: MatchServer):
    """Optional WebSocket front (for browsers); one session per connection.

    Requires fastapi; message framing is one JSON object per text frame,
    with the same schema as the TCP transport.
    """
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    app = FastAPI()

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        session = None
        try:
            while True:
                raw = await websocket.receive_text()
                for line in raw.splitlines():
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        message = json.loads(line)
                    except json.JSONDecodeError:
                        await websocket.send_text(
                            json.dumps({"type": "error", "reason": "malformed JSON"})
                        )
                        continue
                    session, replies = match_server.handle(session, message)
                    for reply in replies:
                        await websocket.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            return

    return app


def snapshot_from_checkpoint(path: str) -> ParamSnapshot:
    from .envs import stratego_value_input

    learner = Learner.load(path, value_input_fn=stratego_value_input)
    return learner.snapshot()


def serve(
    checkpoint: str,
    listen: str = "127.0.0.1:7771",
    test_time: TestTimeConfig | None = None,
) -> TcpMatchServer:
    """Start the TCP service; returns the (already running) server object."""
    host, _, port = listen.rpartition(":")
    snapshot = snapshot_from_checkpoint(checkpoint)
    server = TcpMatchServer((host or "127.0.0.1", int(port)), MatchServer(snapshot, test_time))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
