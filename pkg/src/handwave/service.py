"""Interactive play sessions: virtual hand positions in, note/telemetry events out.

Each session owns a full processing pipeline (simulate -> image -> enhance ->
track) driven by client-supplied hand positions, plus a note map quantizing
the tracked range into lanes.  Events carry strictly increasing sequence
numbers; note changes apply hysteresis so estimates dithering on a boundary
don't retrigger notes.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .imaging import RoiGrid
from .pipeline import (PipelineSettings, TrackingPipeline, check_variant,
                       simulate_frame, variant_tracker)
from .signal import GaussianNoiseSource


class NoteMapError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class NoteLane:
    z_lo: float
    z_hi: float
    note_id: int


@dataclass
class NoteMap:
    """Contiguous, non-overlapping z subregions, each bound to a note; or a
    continuous pitch axis over the same span."""

    lanes: tuple
    mode: str = "quantized"    # quantized | continuous

    def __post_init__(self):
        if self.mode not in ("quantized", "continuous"):
            raise NoteMapError([f"mode: unknown mode {self.mode!r}"])
        lanes = tuple(sorted(self.lanes, key=lambda l: l.z_lo))
        problems = []
        for i, lane in enumerate(lanes):
            if lane.z_hi <= lane.z_lo:
                problems.append(f"lane {i}: empty span [{lane.z_lo}, {lane.z_hi}]")
        for i in range(len(lanes) - 1):
            a, b = lanes[i], lanes[i + 1]
            if b.z_lo < a.z_hi - 1e-12:
                problems.append(f"lanes {i} and {i + 1} overlap "
                                f"({a.z_hi:.4f} > {b.z_lo:.4f})")
            elif b.z_lo > a.z_hi + 1e-12:
                problems.append(f"lanes {i} and {i + 1} leave a gap "
                                f"({a.z_hi:.4f} .. {b.z_lo:.4f})")
        if problems:
            raise NoteMapError(problems)
        self.lanes = lanes

    @classmethod
    def equal_lanes(cls, z_min: float, z_max: float, count: int,
                    mode: str = "quantized") -> "NoteMap":
        if count < 1:
            raise NoteMapError(["count: need at least one lane"])
        edges = np.linspace(z_min, z_max, count + 1)
        lanes = tuple(NoteLane(float(edges[i]), float(edges[i + 1]), i)
                      for i in range(count))
        return cls(lanes, mode)

    @classmethod
    def from_dict(cls, data: dict) -> "NoteMap":
        lanes = tuple(NoteLane(float(l["z_lo"]), float(l["z_hi"]), int(l["note_id"]))
                      for l in data.get("lanes", ()))
        return cls(lanes, data.get("mode", "quantized"))

    def to_dict(self) -> dict:
        return {"mode": self.mode,
                "lanes": [{"z_lo": l.z_lo, "z_hi": l.z_hi, "note_id": l.note_id}
                          for l in self.lanes]}

    @property
    def z_min(self) -> float:
        return self.lanes[0].z_lo

    @property
    def z_max(self) -> float:
        return self.lanes[-1].z_hi

    def lane_index(self, z: float) -> int:
        """Lane containing z (clamped to the covered span)."""
        if z <= self.z_min:
            return 0
        if z >= self.z_max:
            return len(self.lanes) - 1
        for i, lane in enumerate(self.lanes):
            if z < lane.z_hi:
                return i
        return len(self.lanes) - 1

    def pitch(self, z: float) -> float:
        """Continuous-mode pitch in [0, 1]; 0 at z_min."""
        span = self.z_max - self.z_min
        return float(min(max((z - self.z_min) / span, 0.0), 1.0))


@dataclass
class PlayEvent:
    seq: int
    t: float
    kind: str                      # note_on | note_off | param_change
    true_y: float
    true_z: float
    est_y: float
    est_z: float
    doppler_vel: float
    osc_rate: float
    note_id: int | None = None
    pitch: float | None = None
    velocity: float | None = None  # note_on strike speed, 0..1
    flag: str | None = None        # e.g. "out-of-range"
    particles: list | None = None

    def to_dict(self) -> dict:
        out = {"type": "event", "seq": self.seq, "t": self.t, "kind": self.kind,
               "true_pos": [self.true_y, self.true_z],
               "est_pos": [self.est_y, self.est_z],
               "doppler_vel": self.doppler_vel, "osc_rate": self.osc_rate}
        if self.note_id is not None:
            out["note_id"] = self.note_id
        if self.pitch is not None:
            out["pitch"] = self.pitch
        if self.velocity is not None:
            out["velocity"] = self.velocity
        if self.flag is not None:
            out["flag"] = self.flag
        if self.particles is not None:
            out["particles"] = self.particles
        return out


class SessionError(RuntimeError):
    pass


class Session:
    """One player's pipeline, note state, and event sequencing."""

    def __init__(self, session_id: str, variant: str, settings: PipelineSettings,
                 seed: int = 0, note_map: NoteMap | None = None,
                 noise_scale: float = 0.5, hysteresis: float = 0.1,
                 particle_sample: int = 32):
        check_variant(variant)
        self.id = session_id
        self.variant = variant
        self.settings = settings
        self.seed = seed
        self.noise_scale = noise_scale
        self.hysteresis = hysteresis
        self.particle_sample = particle_sample
        grid = settings.grid
        self.note_map = note_map or NoteMap.equal_lanes(grid.z_min, grid.z_max, 8)
        self.pipeline = TrackingPipeline(variant, settings, seed)
        self._noise_rng = np.random.default_rng(
            np.random.SeedSequence([seed, 0xA0D10]))
        self._noise = GaussianNoiseSource()
        self._seq = itertools.count()
        self.active_note: int | None = None
        self._active_lane: int | None = None
        self._last_t: float | None = None
        self._last_est_z: float | None = None
        self.closed = False

    def configure_notes(self, note_map: NoteMap) -> dict:
        """Swap the lane map; the active note is released on the next frame if
        its lane vanished."""
        self.note_map = note_map
        self._active_lane = None
        return {"type": "ack", "what": "config", "lanes": len(note_map.lanes),
                "mode": note_map.mode}

    def _emit(self, kind: str, t: float, true_pos, result, **extra) -> PlayEvent:
        return PlayEvent(seq=next(self._seq), t=t, kind=kind,
                         true_y=true_pos[0], true_z=true_pos[1],
                         est_y=result.est_y, est_z=result.est_z,
                         doppler_vel=result.est_vel, osc_rate=result.osc_rate,
                         **extra)

    def _lane_change(self, est_z: float) -> int | None:
        """Next lane index under hysteresis, or None to hold the current one."""
        lanes = self.note_map.lanes
        target = self.note_map.lane_index(est_z)
        if self._active_lane is None:
            return target
        if target == self._active_lane:
            return None
        # require penetration 10% of the destination lane's height past the
        # shared boundary, in the direction of travel
        cur = lanes[self._active_lane]
        dest = lanes[target]
        margin = self.hysteresis * (dest.z_hi - dest.z_lo)
        if target > self._active_lane:
            boundary = cur.z_hi + margin if target == self._active_lane + 1 else \
                dest.z_lo + margin
            return target if est_z >= boundary else None
        boundary = cur.z_lo - margin if target == self._active_lane - 1 else \
            dest.z_hi - margin
        return target if est_z <= boundary else None

    def ingest(self, t: float, y: float, z: float) -> list[PlayEvent]:
        """Process one hand position; returns the events it produced."""
        if self.closed:
            raise SessionError(f"session {self.id} is closed")
        if self._last_t is not None and t <= self._last_t:
            raise SessionError(f"non-monotonic time {t} after {self._last_t}")
        grid = self.settings.grid
        out_of_range = not grid.contains(y, z)
        sim_y = min(max(y, grid.y_min), grid.y_max)
        sim_z = min(max(z, grid.z_min), grid.z_max)

        frame = simulate_frame(self.settings, sim_y, sim_z, reflectivity=0.8,
                               velocity=0.0, t=t, noise_scale=self.noise_scale,
                               noise_source=self._noise, rng=self._noise_rng)
        result = self.pipeline.process_frame(frame)
        self._last_t = t

        events: list[PlayEvent] = []
        if not out_of_range and self.note_map.mode == "quantized":
            new_lane = self._lane_change(result.est_z)
            if new_lane is not None and new_lane != self._active_lane:
                if self.active_note is not None:
                    events.append(self._emit("note_off", t, (y, z), result,
                                             note_id=self.active_note))
                strike = 0.0
                if self._last_est_z is not None and self._last_t is not None:
                    vmax = self.settings.chirp.unambiguous_speed()
                    strike = min(abs(result.est_vel) / vmax, 1.0)
                note = self.note_map.lanes[new_lane].note_id
                events.append(self._emit("note_on", t, (y, z), result,
                                         note_id=note, velocity=strike))
                self._active_lane = new_lane
                self.active_note = note

        extra = {}
        if out_of_range:
            extra["flag"] = "out-of-range"
        if self.note_map.mode == "continuous" and not out_of_range:
            extra["pitch"] = self.note_map.pitch(result.est_z)
        if self.pipeline.tracker.position is not None and self.particle_sample:
            pts = self.pipeline.tracker.position.particles.states
            step = max(1, pts.shape[0] // self.particle_sample)
            extra["particles"] = [[float(a), float(b)] for a, b in pts[::step]]
        events.append(self._emit("param_change", t, (y, z), result,
                                 note_id=self.active_note, **extra))
        self._last_est_z = result.est_z
        return events

    def close(self):
        self.closed = True


class SessionManager:
    """Registry of live sessions; no cross-session shared mutable state."""

    def __init__(self, settings_factory):
        """settings_factory(variant) -> PipelineSettings (loads the model for
        enhanced variants; raises if it cannot)."""
        self._factory = settings_factory
        self._sessions: dict[str, Session] = {}
        self._counter = itertools.count(1)

    def create(self, variant: str, seed: int = 0, note_map: NoteMap | None = None,
               noise_scale: float = 0.5, hysteresis: float = 0.1) -> Session:
        check_variant(variant)
        settings = self._factory(variant)
        session_id = f"s{next(self._counter):04d}"
        session = Session(session_id, variant, settings, seed=seed,
                          note_map=note_map, noise_scale=noise_scale,
                          hysteresis=hysteresis)
        self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise SessionError(f"no such session {session_id!r}") from None

    def destroy(self, session_id: str) -> None:
        session = self.get(session_id)
        session.close()
        del self._sessions[session_id]

    def __len__(self):
        return len(self._sessions)


def replay_script(path, session: Session):
    """Drive a session from a JSON-lines script of hand/config messages;
    yields event dicts.  This is the headless stand-in for the UI."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            msg = json.loads(line)
            if msg.get("type") == "hand":
                for event in session.ingest(float(msg["t"]), float(msg["y"]),
                                            float(msg["z"])):
                    yield event.to_dict()
            elif msg.get("type") == "config":
                yield session.configure_notes(NoteMap.from_dict(msg))
            else:
                raise SessionError(f"unknown replay message type {msg.get('type')!r}")
