"""Replay a transcript file and print the final board as JSON.

The output matches the `final_board` field of the protocol's game_over
message, so clients can verify a downloaded transcript reproduces the
position they were shown.
"""

import json
import sys
from pathlib import Path

from ..stratego.board import PLAYER_NAMES, SIZE, TYPE_SYMBOLS, flat
from ..stratego.engine import replay_game


def board_json(state) -> list:
    return [
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


def main() -> int:
    if len(sys.argv) != 2:
        print("usage: python -m rnad.tools.replay_to_json <transcript>", file=sys.stderr)
        return 2
    lines = Path(sys.argv[1]).read_text().splitlines()
    state = replay_game(lines)
    print(json.dumps(board_json(state)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
