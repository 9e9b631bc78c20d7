/** Browser entry point: connect over WebSocket and run the match loop. */

import { GameClient } from "./client.js";
import { WebSocketTransport } from "./protocol.js";
import { renderBoard } from "./ui.js";

export function start(root: HTMLElement, url: string, side: "red" | "blue"): void {
  const socket = new WebSocket(url);
  socket.onopen = () => {
    const client = new GameClient(new WebSocketTransport(socket));
    const redraw = () => renderBoard(root, client, redraw);
    const pump = async () => {
      for (;;) {
        await client.next();
        redraw();
        if (client.board.gameOver) {
          return;
        }
      }
    };
    client.hello(side);
    void pump();
    redraw();
  };
}
