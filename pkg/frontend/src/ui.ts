/**
 * Minimal DOM rendering: a clickable 10x10 grid driven entirely by the
 * board model, a status line, the move list and the end-of-game reveal with
 * a transcript download link.
 */

import type { ClientBoardModel } from "./board.js";
import type { GameClient } from "./client.js";
import { SIZE } from "./board.js";

export function renderBoard(
  root: HTMLElement,
  client: GameClient,
  onChange: () => void,
): void {
  const board = client.board;
  root.replaceChildren();

  const status = document.createElement("div");
  status.className = "status";
  status.textContent = statusLine(board);
  root.appendChild(status);

  const grid = document.createElement("div");
  grid.className = "grid";
  for (let row = 0; row < SIZE; row++) {
    for (let col = 0; col < SIZE; col++) {
      const action = row * SIZE + col;
      const cell = board.cell(action);
      const el = document.createElement("button");
      el.className = "cell";
      if (cell.lake) el.classList.add("lake");
      if (cell.highlighted) el.classList.add("legal");
      if (cell.selected) el.classList.add("selected");
      if (cell.own === true) {
        el.classList.add("own");
        el.textContent = cell.type ?? "";
      } else if (cell.own === false) {
        el.classList.add("opponent");
        // Only a revealed type is ever printed; hidden pieces are markers.
        el.textContent = cell.type ?? "?";
      }
      el.addEventListener("click", () => {
        if (client.click(action)) {
          onChange();
        }
      });
      grid.appendChild(el);
    }
  }
  root.appendChild(grid);

  const moves = document.createElement("ol");
  moves.className = "moves";
  for (const move of board.moves) {
    const item = document.createElement("li");
    item.textContent = `${move.mover}: ${move.from} -> ${move.to}` +
      (move.was_attack ? ` (${move.attacker_type} x ${move.defender_type})` : "");
    moves.appendChild(item);
  }
  root.appendChild(moves);

  if (board.gameOver) {
    const banner = document.createElement("div");
    banner.className = "banner";
    banner.textContent = board.resultBanner();
    root.appendChild(banner);

    const link = document.createElement("a");
    link.download = `match-${board.gameOver.match_id}.txt`;
    link.href = URL.createObjectURL(
      new Blob([board.transcriptText()], { type: "text/plain" }),
    );
    link.textContent = "download transcript";
    root.appendChild(link);
  }
}

function statusLine(board: ClientBoardModel): string {
  if (board.gameOver) {
    return board.resultBanner();
  }
  if (board.phase === "deployment") {
    const piece = board.nextDeploymentPiece();
    return piece
      ? `deployment: place your ${piece} (${board.placedCount}/40)`
      : "waiting for the opponent's deployment";
  }
  return board.halfAction === "selection"
    ? "select a piece"
    : "choose a destination (click the piece again to cancel)";
}
