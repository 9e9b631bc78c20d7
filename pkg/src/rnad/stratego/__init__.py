"""Full-rules Stratego: board constants, engine, notation."""

from .board import (  # noqa: F401
    BLUE,
    BOMB,
    CAPTAIN,
    COLONEL,
    DEPLOYMENT_ORDER,
    FLAG,
    GENERAL,
    HOME_ROWS,
    INITIAL_COUNTS,
    LAKE_MASK,
    LAKE_SQUARES,
    LIEUTENANT,
    MAJOR,
    MARSHAL,
    MINER,
    MOVABLE_TYPES,
    NUM_SQUARES,
    NUM_TYPES,
    PIECES_PER_PLAYER,
    PLAYER_NAMES,
    RED,
    SCOUT,
    SERGEANT,
    SIZE,
    SPY,
    TYPE_NAMES,
    TYPE_SYMBOLS,
    beats,
    flat,
    parse_square,
    rotate,
    square_name,
    to_absolute,
    to_player_centric,
    unflat,
)
from .engine import (  # noqa: F401
    BLUE_WINS,
    DEPLOYMENT,
    DRAW,
    GameState,
    IllegalActionError,
    MAX_MOVES_WITHOUT_ATTACK,
    MAX_TOTAL_MOVES,
    MoveRecord,
    PLAY,
    RED_WINS,
    Rules,
    apply_action,
    custom_position,
    deployment_piece_at,
    legal_actions,
    moves_to_text,
    new_game,
    outcome_reward,
    perft,
    replay_game,
    replay_lines,
    state_to_text,
)
