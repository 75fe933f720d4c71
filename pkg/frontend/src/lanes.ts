// Note-lane editing: equal splits, local validation mirroring the server's
// rules (contiguous, non-overlapping, sorted), and config-message building.

import type { ConfigMsg, NoteLane, NoteMapMsg } from "./protocol.js";

export function equalLanes(zMin: number, zMax: number, count: number): NoteLane[] {
  if (count < 1) throw new Error("need at least one lane");
  const lanes: NoteLane[] = [];
  for (let i = 0; i < count; i++) {
    lanes.push({
      z_lo: zMin + ((zMax - zMin) * i) / count,
      z_hi: zMin + ((zMax - zMin) * (i + 1)) / count,
      note_id: i,
    });
  }
  return lanes;
}

export function validateLanes(lanes: NoteLane[]): string[] {
  const problems: string[] = [];
  const sorted = [...lanes].sort((a, b) => a.z_lo - b.z_lo);
  sorted.forEach((lane, i) => {
    if (lane.z_hi <= lane.z_lo) problems.push(`lane ${i}: empty span`);
  });
  for (let i = 0; i + 1 < sorted.length; i++) {
    if (sorted[i + 1].z_lo < sorted[i].z_hi - 1e-12) {
      problems.push(`lanes ${i} and ${i + 1} overlap`);
    } else if (sorted[i + 1].z_lo > sorted[i].z_hi + 1e-12) {
      problems.push(`lanes ${i} and ${i + 1} leave a gap`);
    }
  }
  return problems;
}

export function laneIndexFor(lanes: NoteLane[], z: number): number {
  if (lanes.length === 0) return -1;
  if (z <= lanes[0].z_lo) return 0;
  for (let i = 0; i < lanes.length; i++) {
    if (z < lanes[i].z_hi) return i;
  }
  return lanes.length - 1;
}

export function configMessage(lanes: NoteLane[],
                              mode: NoteMapMsg["mode"] = "quantized"): ConfigMsg {
  const problems = validateLanes(lanes);
  if (problems.length > 0) {
    throw new Error(`invalid lanes: ${problems.join("; ")}`);
  }
  return { type: "config", mode, lanes };
}
