/**
 * Wire protocol for live matches: newline-delimited JSON messages with a
 * "type" field, over any bidirectional byte stream.  Action indices are
 * always 0..99 and relative to the receiving player's side of the board.
 */

export type Side = "red" | "blue";

export interface CellView {
  lake?: boolean;
  own?: boolean;
  /** Piece symbol; present for own pieces and for revealed opponent pieces. */
  type?: string;
  moved?: boolean;
  revealed?: boolean;
}

export interface MatchCreated {
  type: "match_created";
  match_id: string;
  protocol: number;
  your_side: Side;
  agent_side: Side;
}

export interface Observation {
  type: "observation";
  match_id: string;
  phase: "deployment" | "play";
  to_move: Side;
  half_action: "selection" | "destination";
  legal_actions: number[];
  pending_selection: number | null;
  board: (CellView | null)[][];
  total_moves: number;
  moves_since_attack: number;
  your_side: Side;
}

export interface PublicMove {
  from: number;
  to: number;
  mover: Side;
  was_attack: boolean;
  attacker_type?: string;
  defender_type?: string;
  attack_outcome?: string;
}

export interface MoveMade {
  type: "move_made";
  match_id: string;
  move: PublicMove;
}

export interface FinalCell {
  owner: Side;
  type: string;
}

export interface GameOver {
  type: "game_over";
  match_id: string;
  outcome: "red_wins" | "blue_wins" | "draw";
  your_reward: number;
  final_board: (FinalCell | null)[][];
  transcript: string[];
}

export interface ActionRejected {
  type: "action_rejected";
  match_id?: string;
  reason: string;
}

export interface ErrorMessage {
  type: "error";
  reason: string;
}

export type ServerMessage =
  | MatchCreated
  | Observation
  | MoveMade
  | GameOver
  | ActionRejected
  | ErrorMessage
  | { type: string; [key: string]: unknown };

export interface ClientHello {
  type: "hello";
  side: Side;
  name?: string;
}

export interface SubmitAction {
  type: "submit_action";
  action: number;
}

export interface ObservationRequest {
  type: "observation_request";
}

export type ClientMessage = ClientHello | SubmitAction | ObservationRequest;

/** Transport abstraction so the client runs over WebSocket or raw TCP. */
export interface Transport {
  send(text: string): void;
  onLine(handler: (line: string) => void): void;
  close(): void;
}

export function encode(message: ClientMessage): string {
  return JSON.stringify(message);
}

export function decode(line: string): ServerMessage {
  return JSON.parse(line) as ServerMessage;
}

/** Splits a byte stream into newline-delimited frames. */
export class LineSplitter {
  private buffer = "";

  constructor(private readonly emit: (line: string) => void) {}

  push(chunk: string): void {
    this.buffer += chunk;
    for (;;) {
      const index = this.buffer.indexOf("\n");
      if (index < 0) {
        return;
      }
      const line = this.buffer.slice(0, index).trim();
      this.buffer = this.buffer.slice(index + 1);
      if (line.length > 0) {
        this.emit(line);
      }
    }
  }
}

/** Browser transport: one JSON message per WebSocket text frame. */
export class WebSocketTransport implements Transport {
  private handler: (line: string) => void = () => undefined;

  constructor(private readonly socket: WebSocket) {
    const splitter = new LineSplitter((line) => this.handler(line));
    socket.onmessage = (event) => splitter.push(String(event.data) + "\n");
  }

  send(text: string): void {
    this.socket.send(text + "\n");
  }

  onLine(handler: (line: string) => void): void {
    this.handler = handler;
  }

  close(): void {
    this.socket.close();
  }
}
