// Wire types for the play-service WebSocket protocol (JSON text frames).

export interface Roi {
  y_min: number;
  y_max: number;
  z_min: number;
  z_max: number;
}

export interface NoteLane {
  z_lo: number;
  z_hi: number;
  note_id: number;
}

export interface NoteMapMsg {
  mode: "quantized" | "continuous";
  lanes: NoteLane[];
}

export interface SessionMsg {
  type: "session";
  id: string;
  variant: string;
  roi: Roi;
  note_map: NoteMapMsg;
}

export interface PlayEventMsg {
  type: "event";
  seq: number;
  t: number;
  kind: "note_on" | "note_off" | "param_change";
  true_pos: [number, number];
  est_pos: [number, number];
  doppler_vel: number;
  osc_rate: number;
  note_id?: number;
  pitch?: number;
  velocity?: number;
  flag?: string;
  particles?: [number, number][];
}

export interface AckMsg {
  type: "ack";
  what: string;
  lanes?: number;
  mode?: string;
}

export interface ErrorMsg {
  type: "error";
  error: string;
  problems?: string[];
}

export type ServerMsg = SessionMsg | PlayEventMsg | AckMsg | ErrorMsg;

export interface HandMsg {
  type: "hand";
  t: number;
  y: number;
  z: number;
}

export type ConfigMsg = { type: "config" } & NoteMapMsg;

export function parseServerMsg(text: string): ServerMsg {
  const data = JSON.parse(text);
  if (typeof data !== "object" || data === null || typeof data.type !== "string") {
    throw new Error("malformed server message");
  }
  return data as ServerMsg;
}
