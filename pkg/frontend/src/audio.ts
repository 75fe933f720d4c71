// Client-side tone generation: one oscillator voice with FM vibrato whose
// rate follows the tracked cross-range oscillation.  Musicality is a demo;
// the contract is note_on/note_off/param semantics.

export interface Voice {
  start(freq: number, gain: number): void;
  stop(): void;
  setFrequency(freq: number): void;
  setVibrato(rateHz: number, depthHz: number): void;
}

export interface AudioBackend {
  createVoice(): Voice;
}

// Equal-tempered pentatonic-ish scale over the lanes, anchored at A3.
export function noteFrequency(noteId: number): number {
  const scale = [0, 2, 4, 7, 9]; // major pentatonic steps
  const octave = Math.floor(noteId / scale.length);
  const step = scale[((noteId % scale.length) + scale.length) % scale.length];
  return 220 * Math.pow(2, (12 * octave + step) / 12);
}

export class WebAudioBackend implements AudioBackend {
  constructor(private ctx: AudioContext) {}

  createVoice(): Voice {
    const ctx = this.ctx;
    let osc: OscillatorNode | null = null;
    let lfo: OscillatorNode | null = null;
    let lfoGain: GainNode | null = null;
    let amp: GainNode | null = null;
    return {
      start(freq: number, gain: number): void {
        this.stop();
        osc = ctx.createOscillator();
        osc.type = "triangle";
        osc.frequency.value = freq;
        amp = ctx.createGain();
        amp.gain.value = 0.0001;
        amp.gain.exponentialRampToValueAtTime(
          Math.max(0.05, gain * 0.4), ctx.currentTime + 0.02);
        lfo = ctx.createOscillator();
        lfo.frequency.value = 0;
        lfoGain = ctx.createGain();
        lfoGain.gain.value = 0;
        lfo.connect(lfoGain).connect(osc.frequency);
        osc.connect(amp).connect(ctx.destination);
        osc.start();
        lfo.start();
      },
      stop(): void {
        if (amp) {
          amp.gain.linearRampToValueAtTime(0.0001, ctx.currentTime + 0.05);
        }
        const o = osc, l = lfo;
        if (o) setTimeout(() => { try { o.stop(); } catch { /* stopped */ } }, 80);
        if (l) setTimeout(() => { try { l.stop(); } catch { /* stopped */ } }, 80);
        osc = null; lfo = null; lfoGain = null; amp = null;
      },
      setFrequency(freq: number): void {
        if (osc) osc.frequency.setTargetAtTime(freq, ctx.currentTime, 0.01);
      },
      setVibrato(rateHz: number, depthHz: number): void {
        if (lfo && lfoGain) {
          lfo.frequency.setTargetAtTime(rateHz, ctx.currentTime, 0.05);
          lfoGain.gain.setTargetAtTime(depthHz, ctx.currentTime, 0.05);
        }
      },
    };
  }
}

/** Note/param event semantics on top of a single voice. */
export class ToneSynth {
  private voice: Voice;
  private activeNote: number | null = null;
  public log: { kind: string; note?: number; freq?: number }[] = [];

  constructor(backend: AudioBackend, private continuous = false) {
    this.voice = backend.createVoice();
  }

  noteOn(noteId: number, velocity: number): void {
    const freq = noteFrequency(noteId);
    this.voice.start(freq, 0.3 + 0.7 * velocity);
    this.activeNote = noteId;
    this.log.push({ kind: "note_on", note: noteId, freq });
  }

  noteOff(noteId: number): void {
    if (this.activeNote === noteId) {
      this.voice.stop();
      this.activeNote = null;
    }
    this.log.push({ kind: "note_off", note: noteId });
  }

  /** Vibrato rate follows the oscillation estimate; continuous mode maps the
   * normalized pitch onto two octaves above A3. */
  param(oscRate: number, pitch?: number): void {
    this.voice.setVibrato(oscRate, oscRate > 0.5 ? 6 : 0);
    if (this.continuous && pitch !== undefined) {
      const freq = 220 * Math.pow(2, 2 * pitch);
      if (this.activeNote === null) {
        this.voice.start(freq, 0.5);
        this.activeNote = -1;
      } else {
        this.voice.setFrequency(freq);
      }
      this.log.push({ kind: "pitch", freq });
    }
  }
}
