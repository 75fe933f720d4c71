// Session client: socket lifecycle, sequence-gap detection, and the bounded
// event queue between receive and render.

import { BoundedQueue } from "./queue.js";
import {
  ConfigMsg, HandMsg, PlayEventMsg, ServerMsg, SessionMsg, parseServerMsg,
} from "./protocol.js";

export interface SocketLike {
  send(text: string): void;
  close(): void;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: ((err: unknown) => void) | null;
}

export type ClientState = "connecting" | "live" | "closed";

export class SessionClient {
  state: ClientState = "connecting";
  session: SessionMsg | null = null;
  queue = new BoundedQueue<PlayEventMsg>(256);
  gaps = 0;
  errors: string[] = [];
  private lastSeq = -1;
  private acks: ConfigMsg[] = [];

  constructor(private socket: SocketLike,
              private onSession?: (s: SessionMsg) => void) {
    socket.onmessage = (ev) => this.handle(String(ev.data));
    socket.onclose = () => { this.state = "closed"; };
    socket.onerror = () => { this.state = "closed"; };
  }

  private handle(text: string): void {
    let msg: ServerMsg;
    try {
      msg = parseServerMsg(text);
    } catch {
      this.errors.push("unparseable message");
      return;
    }
    if (msg.type === "session") {
      this.session = msg;
      this.state = "live";
      this.lastSeq = -1;
      if (this.onSession) this.onSession(msg);
    } else if (msg.type === "event") {
      // a gap means frames were lost (e.g. mid-drag reconnect): count it and
      // drop anything that would render out of order
      if (msg.seq <= this.lastSeq) {
        this.gaps++;
        return;
      }
      if (this.lastSeq >= 0 && msg.seq !== this.lastSeq + 1) {
        this.gaps++;
      }
      this.lastSeq = msg.seq;
      this.queue.push(msg);
    } else if (msg.type === "error") {
      this.errors.push(msg.error);
    }
  }

  sendHand(t: number, y: number, z: number): void {
    if (this.state !== "live") return;     // input suspended until reconnected
    const msg: HandMsg = { type: "hand", t, y, z };
    this.socket.send(JSON.stringify(msg));
  }

  sendConfig(msg: ConfigMsg): void {
    if (this.state !== "live") return;
    this.socket.send(JSON.stringify(msg));
  }

  drainEvents(): PlayEventMsg[] {
    return this.queue.drain();
  }

  close(): void {
    this.socket.close();
    this.state = "closed";
  }
}
