/**
 * Match client: drives one session over a transport and keeps the board
 * model in sync with server messages.  Interaction is two clicks per move
 * (select, then destination); clicking the selected square again cancels,
 * clicking another selectable piece re-selects.
 */

import { ClientBoardModel } from "./board.js";
import {
  decode,
  encode,
  type GameOver,
  type Observation,
  type ServerMessage,
  type Side,
  type Transport,
} from "./protocol.js";

export class GameClient {
  readonly board = new ClientBoardModel();
  private resolvers: ((message: ServerMessage) => void)[] = [];
  private queue: ServerMessage[] = [];
  lastRejection: string | null = null;
  /** Every action index submitted, with whether it was highlighted legal. */
  readonly submitLog: { action: number; wasHighlighted: boolean }[] = [];

  constructor(private readonly transport: Transport) {
    transport.onLine((line) => this.receive(decode(line)));
  }

  private receive(message: ServerMessage): void {
    switch (message.type) {
      case "observation":
        this.board.applyObservation(message as Observation);
        break;
      case "move_made":
        this.board.applyMove((message as any).move);
        break;
      case "game_over":
        this.board.applyGameOver(message as GameOver);
        break;
      case "action_rejected":
        this.lastRejection = String((message as any).reason);
        break;
    }
    const resolver = this.resolvers.shift();
    if (resolver) {
      resolver(message);
    } else {
      this.queue.push(message);
    }
  }

  next(): Promise<ServerMessage> {
    const queued = this.queue.shift();
    if (queued) {
      return Promise.resolve(queued);
    }
    return new Promise((resolve) => this.resolvers.push(resolve));
  }

  async waitFor<T extends ServerMessage>(
    type: string,
    failOn: string[] = ["error"],
  ): Promise<T> {
    for (;;) {
      const message = await this.next();
      if (message.type === type) {
        return message as T;
      }
      if (failOn.includes(message.type)) {
        throw new Error(`expected ${type}, got ${JSON.stringify(message)}`);
      }
    }
  }

  hello(side: Side): void {
    this.transport.send(encode({ type: "hello", side }));
  }

  submit(action: number): void {
    this.submitLog.push({ action, wasHighlighted: this.board.isLegal(action) });
    this.transport.send(encode({ type: "submit_action", action }));
  }

  /** Click handler: only highlighted squares ever produce a submission.
   * At the destination stage the server also highlights the selected square
   * (cancel) and the other selectable pieces (re-select). */
  click(action: number): boolean {
    if (this.board.gameOver || !this.board.isLegal(action)) {
      return false;
    }
    this.submit(action);
    return true;
  }

  close(): void {
    this.transport.close();
  }
}
