// Pointer capture at a fixed cadence: the latest pointer position is sampled
// on a timer (not per mouse event), so the service sees stable frame timing.

import { CanvasMapping } from "./mapping.js";
import { SessionClient } from "./client.js";

export class PointerController {
  private pointer: [number, number] | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private t0 = 0;
  sent = 0;

  constructor(private client: SessionClient, private mapping: CanvasMapping,
              public cadenceHz = 60,
              private now: () => number = () => performance.now()) {}

  pointerAt(px: number, py: number): void {
    this.pointer = [px, py];
  }

  pointerGone(): void {
    this.pointer = null;
  }

  start(): void {
    if (this.timer !== null) return;
    this.t0 = this.now();
    this.timer = setInterval(() => this.tick(), 1000 / this.cadenceHz);
  }

  /** One cadence step; exposed for tests driving logical time. */
  tick(atMs?: number): void {
    if (!this.pointer) return;
    const [px, py] = this.pointer;
    const [y, z] = this.mapping.pointerToHand(px, py);
    const t = ((atMs ?? this.now()) - this.t0) / 1000;
    this.client.sendHand(t, y, z);
    this.sent++;
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
