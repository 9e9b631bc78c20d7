"""Board geometry, piece catalogue and notation for classic Stratego."""

from __future__ import annotations

import numpy as np

RED, BLUE = 0, 1
PLAYER_NAMES = {RED: "red", BLUE: "blue"}

# Type codes; numeric pieces carry their own numeral, Flag/Spy/Bomb bookend them.
FLAG = 0
SPY = 1
SCOUT = 2
MINER = 3
SERGEANT = 4
LIEUTENANT = 5
CAPTAIN = 6
MAJOR = 7
COLONEL = 8
GENERAL = 9
MARSHAL = 10
BOMB = 11

NUM_TYPES = 12
TYPE_SYMBOLS = ["F", "S", "2", "3", "4", "5", "6", "7", "8", "9", "10", "B"]
TYPE_NAMES = [
    "Flag", "Spy", "Scout", "Miner", "Sergeant", "Lieutenant",
    "Captain", "Major", "Colonel", "General", "Marshal", "Bomb",
]

INITIAL_COUNTS = {
    FLAG: 1, SPY: 1, SCOUT: 8, MINER: 5, SERGEANT: 4, LIEUTENANT: 4,
    CAPTAIN: 4, MAJOR: 3, COLONEL: 2, GENERAL: 1, MARSHAL: 1, BOMB: 6,
}
PIECES_PER_PLAYER = 40
assert sum(INITIAL_COUNTS.values()) == PIECES_PER_PLAYER

IMMOBILE_TYPES = (FLAG, BOMB)
MOVABLE_TYPES = tuple(t for t in range(NUM_TYPES) if t not in IMMOBILE_TYPES)

# Fixed deployment order: Flag, the six Bombs, then descending rank, Spy last.
DEPLOYMENT_ORDER: tuple[int, ...] = (
    (FLAG,)
    + (BOMB,) * 6
    + (MARSHAL,)
    + (GENERAL,)
    + (COLONEL,) * 2
    + (MAJOR,) * 3
    + (CAPTAIN,) * 4
    + (LIEUTENANT,) * 4
    + (SERGEANT,) * 4
    + (MINER,) * 5
    + (SCOUT,) * 8
    + (SPY,)
)
assert len(DEPLOYMENT_ORDER) == PIECES_PER_PLAYER

SIZE = 10
NUM_SQUARES = SIZE * SIZE

# The two 2x2 lakes sit on rows 4-5, columns 2-3 and 6-7.
LAKE_SQUARES = frozenset(
    (r, c) for r in (4, 5) for c in (2, 3, 6, 7)
)
LAKE_MASK = np.zeros((SIZE, SIZE), dtype=bool)
for _r, _c in LAKE_SQUARES:
    LAKE_MASK[_r, _c] = True

# Home deployment rows in absolute coordinates; red sits at the bottom.
HOME_ROWS = {RED: range(6, 10), BLUE: range(0, 4)}

ORTHOGONAL = ((-1, 0), (1, 0), (0, -1), (0, 1))


def flat(r: int, c: int) -> int:
    return r * SIZE + c


def unflat(sq: int) -> tuple[int, int]:
    return divmod(sq, SIZE)


def rotate(sq: int) -> int:
    """180-degree board rotation of a flat square index."""
    return NUM_SQUARES - 1 - sq


def to_player_centric(player: int, sq: int) -> int:
    """Absolute flat square -> action index as seen by the player."""
    return sq if player == RED else rotate(sq)


def to_absolute(player: int, index: int) -> int:
    """Player-centric action index -> absolute flat square (an involution)."""
    return index if player == RED else rotate(index)


def square_name(sq: int) -> str:
    """Algebraic name a1..j10; rank 1 is red's back row (absolute row 9)."""
    r, c = unflat(sq)
    return f"{chr(ord('a') + c)}{SIZE - r}"


def parse_square(name: str) -> int:
    name = name.strip().lower()
    col = ord(name[0]) - ord("a")
    rank = int(name[1:])
    if not (0 <= col < SIZE and 1 <= rank <= SIZE):
        raise ValueError(f"bad square name {name!r}")
    return flat(SIZE - rank, col)


def beats(attacker: int, defender: int) -> str:
    """Resolve an attack between two type codes.

    Returns 'attacker_wins', 'defender_wins' or 'both_removed'.  Flag capture
    is attacker_wins; the caller handles the game-over consequence.
    """
    if defender == FLAG:
        return "attacker_wins"
    if defender == BOMB:
        return "attacker_wins" if attacker == MINER else "defender_wins"
    if attacker == SPY and defender == MARSHAL:
        return "attacker_wins"
    if attacker == defender:
        return "both_removed"
    return "attacker_wins" if attacker > defender else "defender_wins"
