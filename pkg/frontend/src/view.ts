// Canvas rendering of the play area: note lanes, the true hand position echo,
// the tracked estimate and its trail, the particle cloud, and a HUD line.

import { CanvasMapping } from "./mapping.js";
import type { NoteLane, PlayEventMsg } from "./protocol.js";

export interface Ctx2DLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  set fillStyle(v: string);
  set strokeStyle(v: string);
  set lineWidth(v: number);
  set font(v: string);
  set globalAlpha(v: number);
}

export class PlayView {
  trail: [number, number][] = [];
  lastEvent: PlayEventMsg | null = null;
  rendered = 0;

  constructor(private ctx: Ctx2DLike, public mapping: CanvasMapping,
              public lanes: NoteLane[]) {}

  render(events: PlayEventMsg[], status: string): void {
    const { width, height } = this.mapping;
    const ctx = this.ctx;
    ctx.globalAlpha = 1;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#101418";
    ctx.fillRect(0, 0, width, height);

    const active = this.activeNote();
    for (const lane of this.lanes) {
      const [, topPy] = this.mapping.toPixel(this.mapping.roi.y_min, lane.z_hi);
      const [, botPy] = this.mapping.toPixel(this.mapping.roi.y_min, lane.z_lo);
      ctx.fillStyle = lane.note_id === active ? "#2e4d33" : "#161d24";
      ctx.fillRect(0, topPy, width, botPy - topPy);
      ctx.strokeStyle = "#30404d";
      ctx.lineWidth = 1;
      ctx.strokeRect(0, topPy, width, botPy - topPy);
      ctx.fillStyle = "#8fa3b0";
      ctx.font = "12px monospace";
      ctx.fillText(`note ${lane.note_id}`, 8, (topPy + botPy) / 2);
    }

    for (const event of events) {
      this.lastEvent = event;
      this.trail.push([event.est_pos[0], event.est_pos[1]]);
      if (this.trail.length > 120) this.trail.shift();
      this.rendered++;
    }
    const last = this.lastEvent;
    if (last) {
      if (last.particles) {
        ctx.fillStyle = "#3f6f8f";
        ctx.globalAlpha = 0.6;
        for (const [py_, pz] of last.particles) {
          const [px, py] = this.mapping.toPixel(py_, pz);
          ctx.fillRect(px - 1, py - 1, 2, 2);
        }
        ctx.globalAlpha = 1;
      }
      ctx.strokeStyle = "#53b1fd";
      ctx.lineWidth = 2;
      ctx.beginPath();
      this.trail.forEach(([wy, wz], i) => {
        const [px, py] = this.mapping.toPixel(wy, wz);
        if (i === 0) ctx.moveTo(px, py); else ctx.lineTo(px, py);
      });
      ctx.stroke();

      const [ty, tz] = last.true_pos;
      const [tpx, tpy] = this.mapping.toPixel(ty, tz);
      ctx.strokeStyle = "#e3e8ee";
      ctx.beginPath();
      ctx.arc(tpx, tpy, 7, 0, Math.PI * 2);
      ctx.stroke();

      const [epx, epy] = this.mapping.toPixel(last.est_pos[0], last.est_pos[1]);
      ctx.fillStyle = last.flag === "out-of-range" ? "#d9534f" : "#53fdba";
      ctx.beginPath();
      ctx.arc(epx, epy, 5, 0, Math.PI * 2);
      ctx.fill();

      ctx.fillStyle = "#dfe7ee";
      ctx.font = "13px monospace";
      const note = active === null ? "-" : String(active);
      ctx.fillText(
        `note ${note}  vibrato ${last.osc_rate.toFixed(2)} Hz  ` +
        `v ${(last.doppler_vel * 1000).toFixed(0)} mm/s  ${status}`,
        8, 16);
    } else {
      ctx.fillStyle = "#dfe7ee";
      ctx.font = "13px monospace";
      ctx.fillText(status, 8, 16);
    }
  }

  activeNote(): number | null {
    const e = this.lastEvent;
    if (!e) return null;
    if (e.kind === "note_off") return null;
    return e.note_id ?? null;
  }

  /** Every trail point must map back inside the ROI (inverse transform). */
  trailInsideRoi(): boolean {
    return this.trail.every(([wy, wz]) => {
      const [px, py] = this.mapping.toPixel(wy, wz);
      const [iy, iz] = this.mapping.toWorld(px, py);
      return this.mapping.contains(iy, iz);
    });
  }
}
