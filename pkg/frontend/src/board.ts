/**
 * Client-side board state.  Renders only what the server sent: cell views
 * from observation messages, highlights for exactly the server's legal
 * actions, the pending selection and the public move list.  No hidden-type
 * inference happens here.
 */

import type {
  CellView,
  GameOver,
  Observation,
  PublicMove,
  Side,
} from "./protocol.js";

export const SIZE = 10;

/** The fixed deployment order, used only to caption the next placement. */
export const DEPLOYMENT_ORDER: string[] = (() => {
  const order: string[] = ["F"];
  for (let i = 0; i < 6; i++) order.push("B");
  order.push("10", "9", "8", "8");
  for (let i = 0; i < 3; i++) order.push("7");
  for (let i = 0; i < 4; i++) order.push("6");
  for (let i = 0; i < 4; i++) order.push("5");
  for (let i = 0; i < 4; i++) order.push("4");
  for (let i = 0; i < 5; i++) order.push("3");
  for (let i = 0; i < 8; i++) order.push("2");
  order.push("S");
  return order;
})();

export interface BoardCell {
  lake: boolean;
  own: boolean | null; // null when empty
  type: string | null; // only if the server disclosed it
  revealed: boolean;
  highlighted: boolean;
  selected: boolean;
}

export class ClientBoardModel {
  side: Side = "red";
  phase: "deployment" | "play" = "deployment";
  halfAction: "selection" | "destination" = "selection";
  legal = new Set<number>();
  pendingSelection: number | null = null;
  placedCount = 0;
  moves: PublicMove[] = [];
  gameOver: GameOver | null = null;
  private board: (CellView | null)[][] = [];

  applyObservation(obs: Observation): void {
    this.side = obs.your_side;
    this.phase = obs.phase;
    this.halfAction = obs.half_action;
    this.legal = new Set(obs.legal_actions);
    this.pendingSelection = obs.pending_selection;
    this.board = obs.board;
    if (obs.phase === "deployment") {
      this.placedCount = this.countOwnPieces();
    }
  }

  applyMove(move: PublicMove): void {
    this.moves.push(move);
  }

  applyGameOver(message: GameOver): void {
    this.gameOver = message;
  }

  private countOwnPieces(): number {
    let count = 0;
    for (const row of this.board) {
      for (const cell of row) {
        if (cell && cell.own) count += 1;
      }
    }
    return count;
  }

  /** Caption for the piece about to be placed, from the fixed order. */
  nextDeploymentPiece(): string | null {
    if (this.phase !== "deployment" || this.placedCount >= 40) {
      return null;
    }
    return DEPLOYMENT_ORDER[this.placedCount];
  }

  isLegal(action: number): boolean {
    return this.legal.has(action);
  }

  cell(action: number): BoardCell {
    const row = Math.floor(action / SIZE);
    const col = action % SIZE;
    const view = this.board[row]?.[col] ?? null;
    return {
      lake: Boolean(view?.lake),
      own: view === null ? null : Boolean(view.own),
      type: view?.type ?? null,
      revealed: Boolean(view?.revealed),
      highlighted: this.legal.has(action),
      selected: this.pendingSelection === action,
    };
  }

  /** All opponent types currently rendered; hygiene audits compare these
   * against what the server marked as revealed. */
  renderedOpponentTypes(): { action: number; type: string; revealed: boolean }[] {
    const out: { action: number; type: string; revealed: boolean }[] = [];
    for (let action = 0; action < SIZE * SIZE; action++) {
      const cell = this.cell(action);
      if (cell.own === false && cell.type !== null) {
        out.push({ action, type: cell.type, revealed: cell.revealed });
      }
    }
    return out;
  }

  transcriptText(): string {
    return this.gameOver ? this.gameOver.transcript.join("\n") + "\n" : "";
  }

  resultBanner(): string {
    if (!this.gameOver) return "";
    if (this.gameOver.outcome === "draw") return "draw";
    const winner = this.gameOver.outcome === "red_wins" ? "red" : "blue";
    return winner === this.side ? "you win" : `${winner} wins`;
  }
}
