"""Player-centric 10x10x82 observation tensors for the Stratego engine.

Plane layout (channel-last, in this order):

    0        lakes
    1..12    own private piece types, one-hot
    13..24   opponent public type distribution
    25..36   own public type distribution (what the opponent can infer)
    37..76   last 40 moves, most recent first
    77       game-length ratio        (constant plane)
    78       no-attack ratio          (constant plane)
    79       deployment-phase flag    (constant plane)
    80       destination-choice flag  (constant plane)
    81       currently selected piece, one-hot

Blue observations are rotated 180 degrees so both players see their own camp
at the bottom.
"""

from __future__ import annotations

import numpy as np

from .stratego.board import (
    BLUE,
    BOMB,
    FLAG,
    LAKE_MASK,
    NUM_TYPES,
    RED,
    SIZE,
    unflat,
)
from .stratego.engine import (
    DEPLOYMENT,
    GameState,
    MAX_MOVES_WITHOUT_ATTACK,
    MAX_TOTAL_MOVES,
    MoveRecord,
)

NUM_PLANES = 82
PLANE_LAKES = 0
PLANE_PRIVATE = 1
PLANE_PUBLIC_OPPONENT = 13
PLANE_PUBLIC_SELF = 25
PLANE_MOVES = 37
NUM_MOVE_PLANES = 40
PLANE_GAME_LENGTH = 77
PLANE_NO_ATTACK = 78
PLANE_PHASE = 79
PLANE_HALF_ACTION = 80
PLANE_SELECTED = 81

OBSERVATION_SHAPE = (SIZE, SIZE, NUM_PLANES)


def private_tensor(state: GameState, player: int) -> np.ndarray:
    """One-hot own piece types, absolute orientation."""
    out = np.zeros((SIZE, SIZE, NUM_TYPES), dtype=np.float64)
    for pid in state.piece_ids(player):
        if state.alive[pid]:
            r, c = unflat(int(state.square[pid]))
            out[r, c, int(state.ptype[pid])] = 1.0
    return out


def public_tensor(state: GameState, subject_player: int) -> np.ndarray:
    """Per-square type distribution for the subject's pieces, absolute
    orientation.

    The distribution is the exact marginal of a uniform draw over piece-type
    assignments consistent with the public history: pieces disclosed by an
    attack or by a multi-square move are known outright; the unknown movable
    mass splits evenly over moved squares first, and whatever it leaves
    behind shares the never-moved squares with the unknown Bombs and Flags.
    This construction keeps both sum rules exact: rows of occupied squares
    sum to one, per-type totals equal the piece counts still on the board.
    """
    out = np.zeros((SIZE, SIZE, NUM_TYPES), dtype=np.float64)
    unrevealed = np.zeros(NUM_TYPES)
    moved_unknown_squares: list[int] = []
    still_unknown_squares: list[int] = []
    for pid in state.piece_ids(subject_player):
        if not state.alive[pid]:
            continue
        if state.type_known(pid):
            continue
        unrevealed[int(state.ptype[pid])] += 1
        if state.moved[pid]:
            moved_unknown_squares.append(int(state.square[pid]))
        else:
            still_unknown_squares.append(int(state.square[pid]))

    u_movable = unrevealed.copy()
    u_movable[FLAG] = 0.0
    u_movable[BOMB] = 0.0
    total_movable = u_movable.sum()
    n_moved = len(moved_unknown_squares)
    n_still = len(still_unknown_squares)

    if n_moved:
        dist = u_movable / total_movable
        for sq in moved_unknown_squares:
            r, c = unflat(sq)
            out[r, c, :] = dist
    if n_still:
        dist = u_movable * (total_movable - n_moved) / (max(total_movable, 1.0) * n_still)
        dist[FLAG] = unrevealed[FLAG] / n_still
        dist[BOMB] = unrevealed[BOMB] / n_still
        for sq in still_unknown_squares:
            r, c = unflat(sq)
            out[r, c, :] = dist
    for pid in state.piece_ids(subject_player):
        if state.alive[pid] and state.type_known(pid):
            r, c = unflat(int(state.square[pid]))
            out[r, c, int(state.ptype[pid])] = 1.0
    return out


def _move_plane_absolute(record: MoveRecord) -> np.ndarray:
    out = np.zeros((SIZE, SIZE), dtype=np.float32)
    r0, c0 = unflat(record.from_sq)
    r1, c1 = unflat(record.to_sq)
    if record.was_attack:
        out[r0, c0] = -(2.0 + record.attacker_type / 12.0)
    else:
        out[r0, c0] = -1.0
    out[r1, c1] = 1.0
    return out


def move_plane(record: MoveRecord, viewer: int) -> np.ndarray:
    """10x10 encoding of one move as seen by the viewer."""
    plane = _move_plane_absolute(record)
    if viewer == BLUE:
        plane = np.rot90(plane, 2).copy()
    return plane


def encode(state: GameState, player: int) -> np.ndarray:
    """Assemble the full 82-plane observation for one player."""
    obs = np.zeros(OBSERVATION_SHAPE, dtype=np.float32)
    obs[:, :, PLANE_LAKES] = LAKE_MASK
    obs[:, :, PLANE_PRIVATE : PLANE_PRIVATE + NUM_TYPES] = private_tensor(state, player)
    deploying = state.phase == DEPLOYMENT
    if not deploying:
        opponent = 1 - player
        obs[:, :, PLANE_PUBLIC_OPPONENT : PLANE_PUBLIC_OPPONENT + NUM_TYPES] = (
            public_tensor(state, opponent)
        )
        obs[:, :, PLANE_PUBLIC_SELF : PLANE_PUBLIC_SELF + NUM_TYPES] = public_tensor(
            state, player
        )
    history = state.move_history
    for k in range(min(NUM_MOVE_PLANES, len(history))):
        obs[:, :, PLANE_MOVES + k] = _move_plane_absolute(history[-1 - k])
    obs[:, :, PLANE_GAME_LENGTH] = min(state.total_moves / MAX_TOTAL_MOVES, 1.0)
    obs[:, :, PLANE_NO_ATTACK] = min(
        state.moves_since_attack / MAX_MOVES_WITHOUT_ATTACK, 1.0
    )
    obs[:, :, PLANE_PHASE] = 1.0 if deploying else 0.0
    obs[:, :, PLANE_HALF_ACTION] = (
        1.0 if (not deploying and state.pending_selection is not None) else 0.0
    )
    if state.pending_selection is not None:
        r, c = unflat(state.pending_selection)
        obs[r, c, PLANE_SELECTED] = 1.0
    if player == BLUE:
        obs = np.rot90(obs, 2, axes=(0, 1)).copy()
    return obs


def dump_tensor(tensor: np.ndarray) -> bytes:
    """Row-major little-endian float32 bytes, fixed plane order."""
    return np.ascontiguousarray(tensor, dtype="<f4").tobytes()


def load_tensor(data: bytes, shape: tuple[int, ...] = OBSERVATION_SHAPE) -> np.ndarray:
    expected = int(np.prod(shape)) * 4
    if len(data) != expected:
        raise ValueError(f"expected {expected} bytes, got {len(data)}")
    return np.frombuffer(data, dtype="<f4").reshape(shape).copy()
