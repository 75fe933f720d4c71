// Browser wiring: connect, render, sound, and the lane editor controls.

import { SessionClient, SocketLike } from "./client.js";
import { PointerController } from "./controller.js";
import { CanvasMapping } from "./mapping.js";
import { Ctx2DLike, PlayView } from "./view.js";
import { ToneSynth, WebAudioBackend } from "./audio.js";
import { configMessage, equalLanes } from "./lanes.js";
import type { PlayEventMsg } from "./protocol.js";

function wsUrl(variant: string, lanes: number): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/play?variant=${variant}&lanes=${lanes}`;
}

function main(): void {
  const canvas = document.getElementById("stage") as HTMLCanvasElement;
  const variantSel = document.getElementById("variant") as HTMLSelectElement;
  const laneInput = document.getElementById("lanes") as HTMLInputElement;
  const applyBtn = document.getElementById("apply") as HTMLButtonElement;
  const statusEl = document.getElementById("status") as HTMLElement;
  const ctx = canvas.getContext("2d")! as unknown as Ctx2DLike;

  let client: SessionClient | null = null;
  let view: PlayView | null = null;
  let controller: PointerController | null = null;
  let synth: ToneSynth | null = null;
  let audioCtx: AudioContext | null = null;

  function connect(): void {
    controller?.stop();
    client?.close();
    const variant = variantSel.value;
    const laneCount = parseInt(laneInput.value, 10) || 8;
    const socket = new WebSocket(wsUrl(variant, laneCount)) as unknown as SocketLike;
    client = new SessionClient(socket, (session) => {
      const mapping = new CanvasMapping(session.roi, canvas.width, canvas.height);
      view = new PlayView(ctx, mapping, session.note_map.lanes);
      controller = new PointerController(client!, mapping, 60);
      controller.start();
      statusEl.textContent = `session ${session.id} (${session.variant})`;
    });
  }

  canvas.addEventListener("pointermove", (ev) => {
    const rect = canvas.getBoundingClientRect();
    controller?.pointerAt(ev.clientX - rect.left, ev.clientY - rect.top);
  });
  canvas.addEventListener("pointerleave", () => controller?.pointerGone());
  canvas.addEventListener("pointerdown", () => {
    // browsers demand a user gesture before audio starts
    if (!audioCtx) {
      audioCtx = new AudioContext();
      synth = new ToneSynth(new WebAudioBackend(audioCtx));
    }
    audioCtx.resume();
  });

  applyBtn.addEventListener("click", () => {
    if (!client?.session) return;
    const roi = client.session.roi;
    const laneCount = parseInt(laneInput.value, 10) || 8;
    try {
      client.sendConfig(configMessage(equalLanes(roi.z_min, roi.z_max, laneCount)));
      if (view) view.lanes = equalLanes(roi.z_min, roi.z_max, laneCount);
    } catch (err) {
      statusEl.textContent = String(err);
    }
  });
  variantSel.addEventListener("change", connect);

  function sound(events: PlayEventMsg[]): void {
    if (!synth) return;
    for (const e of events) {
      if (e.kind === "note_on" && e.note_id !== undefined) {
        synth.noteOn(e.note_id, e.velocity ?? 0.5);
      } else if (e.kind === "note_off" && e.note_id !== undefined) {
        synth.noteOff(e.note_id);
      } else if (e.kind === "param_change") {
        synth.param(e.osc_rate, e.pitch);
      }
    }
  }

  function frame(): void {
    if (client && view) {
      const events = client.drainEvents();
      sound(events);
      const state = client.state === "live"
        ? `queue drop ${client.queue.dropped} gaps ${client.gaps}`
        : `${client.state} - input suspended`;
      view.render(events, state);
    }
    requestAnimationFrame(frame);
  }

  connect();
  requestAnimationFrame(frame);
}

window.addEventListener("load", main);
