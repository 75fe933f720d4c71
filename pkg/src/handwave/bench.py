"""Ground-truth motion profiles, end-to-end benchmark runs, and metrics.

A benchmark run simulates a point target following a scripted motion profile,
feeds every frame through the processing chain of a method variant, and scores
the tracked estimates against the ground truth.  All variants of one seed
consume the identical simulated measurement stream, so comparisons are paired.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .enhancer import FcnnModel, fcnn_forward_batch
from .imaging import RadarImage, get_imager
from .pipeline import (VARIANTS, FeatureExtractor, PipelineSettings,
                       TrackerStage, TrackingPipeline, check_variant,
                       simulate_frame, variant_uses_fcnn)
from .signal import GaussianNoiseSource, PointTarget, simulate_beat


@dataclass(frozen=True)
class Segment:
    """One piece of the piecewise trajectory; velocity is the analytic dz/dt."""

    kind: str                 # hold | ramp | sine_y
    duration: int             # samples
    y0: float
    y1: float
    z0: float
    z1: float
    amp: float = 0.0          # sine_y amplitude
    freq: float = 0.0         # sine_y rate (Hz)

    def evaluate(self, i: int, n: int, dt: float):
        frac = i / n
        if self.kind == "hold":
            return self.y0, self.z0, 0.0
        if self.kind == "ramp":
            y = self.y0 + (self.y1 - self.y0) * frac
            z = self.z0 + (self.z1 - self.z0) * frac
            v = (self.z1 - self.z0) / (n * dt)
            return y, z, v
        if self.kind == "sine_y":
            y = self.y0 + self.amp * math.sin(2.0 * math.pi * self.freq * i * dt)
            return y, self.z0, 0.0
        raise ValueError(f"unknown segment kind {self.kind!r}")


@dataclass
class MotionProfile:
    """Time-indexed ground truth: strictly increasing t, (y, z) position, and
    analytic range velocity."""

    t: np.ndarray
    y: np.ndarray
    z: np.ndarray
    v: np.ndarray
    segments: tuple = ()
    seed: int | None = None

    def __post_init__(self):
        n = self.t.size
        if not (self.y.size == self.z.size == self.v.size == n):
            raise ValueError("profile columns must share a length")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("profile times must be strictly increasing")

    def __len__(self):
        return self.t.size


def profile_from_segments(segments, dt: float, seed: int | None = None) -> MotionProfile:
    ts, ys, zs, vs = [], [], [], []
    t = 0.0
    for seg in segments:
        for i in range(seg.duration):
            y, z, v = seg.evaluate(i, seg.duration, dt)
            ts.append(t)
            ys.append(y)
            zs.append(z)
            vs.append(v)
            t += dt
    return MotionProfile(np.array(ts), np.array(ys), np.array(zs), np.array(vs),
                         tuple(segments), seed)


def reference_profile(seed: int = 0, n_samples: int = 4096,
                      dt: float = 4e-3) -> MotionProfile:
    """The benchmark trajectory: range holds and ramps, cross-range sweeps,
    joint motion, and a sinusoidal cross-range oscillation, with seeded
    amplitude jitter inside safe ROI margins."""
    rng = np.random.default_rng(seed)

    def j(scale=0.1):
        return 1.0 + rng.uniform(-scale, scale)

    z_hi = 0.30 + 0.12 * j()
    z_lo = 0.30 - 0.12 * j()
    y_pos = 0.06 * j()
    y_neg = -0.06 * j()
    y_mid = 0.04 * j()
    osc_amp = 0.03 * j()
    osc_freq = 2.0 * j(0.25)
    weights = [9, 9, 4, 13, 4, 7, 11, 11, 4, 14, 9, 5]
    total_w = sum(weights)
    counts = [max(int(round(w / total_w * n_samples)), 2) for w in weights]
    # absorb the rounding residual into the largest segments, never below 2
    residual = n_samples - sum(counts)
    order = sorted(range(len(counts)), key=lambda i: -counts[i])
    i = 0
    while residual != 0:
        idx = order[i % len(order)]
        step = 1 if residual > 0 else -1
        if counts[idx] + step >= 2:
            counts[idx] += step
            residual -= step
        i += 1

    segs = [
        Segment("hold", counts[0], 0.0, 0.0, 0.30, 0.30),
        Segment("ramp", counts[1], 0.0, 0.0, 0.30, z_hi),
        Segment("hold", counts[2], 0.0, 0.0, z_hi, z_hi),
        Segment("ramp", counts[3], 0.0, 0.0, z_hi, z_lo),
        Segment("hold", counts[4], 0.0, 0.0, z_lo, z_lo),
        Segment("ramp", counts[5], 0.0, y_pos, z_lo, z_lo),
        Segment("ramp", counts[6], y_pos, y_neg, z_lo, z_lo),
        Segment("ramp", counts[7], y_neg, y_mid, z_lo, 0.30 + 0.08 * j()),
        Segment("hold", counts[8], y_mid, y_mid, 0.0, 0.0),
        Segment("sine_y", counts[9], y_mid, y_mid, 0.0, 0.0,
                amp=osc_amp, freq=osc_freq),
        Segment("ramp", counts[10], y_mid, 0.0, 0.0, 0.30),
        Segment("hold", counts[11], 0.0, 0.0, 0.30, 0.30),
    ]
    # holds and the sine ride at the z where the previous segment ended
    fixed = []
    z_cur = 0.30
    y_cur = 0.0
    for seg in segs:
        if seg.kind == "hold":
            seg = replace(seg, y0=y_cur, y1=y_cur, z0=z_cur, z1=z_cur)
        elif seg.kind == "sine_y":
            seg = replace(seg, y0=y_cur, z0=z_cur, z1=z_cur)
        elif seg.kind == "ramp" and seg.z0 == 0.0 and seg.z1 == 0.30:
            seg = replace(seg, z0=z_cur, z1=0.30)
        fixed.append(seg)
        y_cur, z_cur, _ = seg.evaluate(seg.duration - 1, seg.duration, dt)
        if seg.kind == "ramp":
            y_cur, z_cur = seg.y1, seg.z1
    return profile_from_segments(fixed, dt, seed)


# ---------------------------------------------------------------------------
# feature extraction pass (shared across variants of one seed)

def _seed_rngs(seed: int):
    ss = np.random.SeedSequence([int(seed), 0x5EED])
    scene_ss, noise_ss = ss.spawn(2)
    return np.random.default_rng(scene_ss), np.random.default_rng(noise_ss)


def simulate_profile_chirps(profile: MotionProfile, settings: PipelineSettings,
                            seed: int, noise_source=None,
                            alpha_range=(1.0, 3.0), p_range=(0.5, 1.0)):
    """Simulate + compensate all profile frames; returns [N, ch, nk] complex."""
    scene_rng, noise_rng = _seed_rngs(seed)
    source = noise_source if noise_source is not None else GaussianNoiseSource()
    frame_config = replace(settings.chirp, n_chirps=1)
    geometry = settings.geometry
    n = len(profile)
    k = frame_config.wavenumbers()
    pairs = geometry.pairs()
    d = geometry.pair_separations()
    comp = np.exp(-1j * np.outer(d ** 2 / (4.0 * geometry.ref_range), k))
    order = geometry.virtual_order()

    p_draws = scene_rng.uniform(p_range[0], p_range[1], size=n)
    a_draws = scene_rng.uniform(alpha_range[0], alpha_range[1], size=n)
    chirps = np.empty((n, geometry.n_channels, frame_config.n_samples),
                      dtype=np.complex128)
    ty, tz = profile.y, profile.z
    for ch, (tx, rx) in enumerate(pairs):
        r_t = np.hypot(ty - tx, tz)
        r_r = np.hypot(ty - rx, tz)
        amp = p_draws / (r_t * r_r)
        chirps[:, ch, :] = amp[:, None] * np.exp(1j * np.outer(r_t + r_r, k))
    noise = source.sample(chirps.shape, noise_rng)
    chirps += a_draws[:, None, None] * noise
    return chirps[:, order, :] * comp[order][None, :, :]


def extract_features(profile: MotionProfile, settings: PipelineSettings,
                     seed: int, enhanced: bool, noise_source=None,
                     alpha_range=(1.0, 3.0), p_range=(0.5, 1.0)) -> dict:
    """Batched imaging + (optional) enhancement + sequential Doppler/feature
    pass over the whole profile.  Returns per-frame measurement arrays."""
    chirps = simulate_profile_chirps(profile, settings, seed, noise_source,
                                     alpha_range, p_range)
    imager = get_imager(replace(settings.chirp, n_chirps=1),
                        settings.geometry, settings.grid)
    images = imager.reconstruct_batch(chirps)
    enhanced_mags = None
    if enhanced:
        mags = np.abs(images).astype(np.float32)
        enhanced_mags = fcnn_forward_batch(settings.model, mags)

    extractor = FeatureExtractor(settings, enhanced)
    n = len(profile)
    out = {key: np.zeros(n) for key in
           ("measured_y", "measured_z", "doppler_vel", "sample_vel", "peak_mag")}
    warm = np.zeros(n, dtype=bool)
    for i in range(n):
        image = RadarImage(images[i], settings.grid, time=float(profile.t[i]))
        em = enhanced_mags[i] if enhanced else None
        y_m, z_m, v_d, v_s, mag = extractor.step(image, em)
        out["measured_y"][i] = y_m
        out["measured_z"][i] = z_m
        out["doppler_vel"][i] = v_d
        out["sample_vel"][i] = v_s
        out["peak_mag"][i] = mag
        warm[i] = extractor.ring.full and len(extractor.ranges) >= 2
    out["warm"] = warm
    out["t"] = profile.t.copy()
    return out


def track_features(features: dict, variant: str, settings: PipelineSettings,
                   seed: int) -> list[dict]:
    """Run one tracking stage over extracted features; returns track records."""
    check_variant(variant)
    stage = TrackerStage(variant, settings,
                         np.random.SeedSequence([int(seed), VARIANTS.index(variant)]))
    records = []
    n = features["t"].size
    for i in range(n):
        est_y, est_z, v_est, a_z, osc = stage.step(
            float(features["t"][i]),
            float(features["measured_y"][i]), float(features["measured_z"][i]),
            float(features["doppler_vel"][i]), float(features["sample_vel"][i]),
            bool(features["warm"][i]))
        records.append({
            "t": float(features["t"][i]),
            "measured_y": float(features["measured_y"][i]),
            "measured_z": float(features["measured_z"][i]),
            "est_y": est_y, "est_z": est_z,
            "doppler_vel": float(features["doppler_vel"][i]),
            "sample_vel": float(features["sample_vel"][i]),
            "est_vel": v_est, "range_gain": a_z, "osc_rate": osc,
        })
    return records


def rmse(records, profile: MotionProfile) -> tuple[float, float, float]:
    """Root-mean-square tracking error per axis (y, z, v)."""
    if len(records) != len(profile):
        raise ValueError(f"track log holds {len(records)} records, "
                         f"profile {len(profile)} samples")
    est_y = np.array([r["est_y"] for r in records])
    est_z = np.array([r["est_z"] for r in records])
    est_v = np.array([r["est_vel"] for r in records])
    return (float(np.sqrt(np.mean((est_y - profile.y) ** 2))),
            float(np.sqrt(np.mean((est_z - profile.z) ** 2))),
            float(np.sqrt(np.mean((est_v - profile.v) ** 2))))


def run_variant(profile: MotionProfile, variant: str, settings: PipelineSettings,
                seed: int, noise_source=None, alpha_range=(1.0, 3.0),
                p_range=(0.5, 1.0), features: dict | None = None):
    """Full chain for one variant; returns (records, report row)."""
    check_variant(variant)
    if variant_uses_fcnn(variant) and settings.model is None:
        raise ValueError(f"variant {variant!r} requires a trained model")
    if features is None:
        features = extract_features(profile, settings, seed,
                                    variant_uses_fcnn(variant), noise_source,
                                    alpha_range, p_range)
    records = track_features(features, variant, settings, seed)
    r_y, r_z, r_v = rmse(records, profile)
    row = {"variant": variant, "seed": int(seed),
           "rmse_y_m": r_y, "rmse_z_m": r_z, "rmse_v_mps": r_v}
    return records, row


def run_bench(profile_seeds, variants, settings: PipelineSettings,
              noise_source=None, alpha_range=(1.0, 3.0), p_range=(0.5, 1.0),
              latency_frames: int = 64, progress=None) -> dict:
    """Benchmark report over seeds x variants with shared feature passes."""
    variants = [check_variant(v) for v in variants]
    rows = []
    for seed in profile_seeds:
        profile = reference_profile(seed)
        cache = {}
        for variant in variants:
            flag = variant_uses_fcnn(variant)
            if flag not in cache:
                cache[flag] = extract_features(profile, settings, seed, flag,
                                               noise_source, alpha_range, p_range)
            _, row = run_variant(profile, variant, settings, seed,
                                 features=cache[flag])
            rows.append(row)
            if progress:
                progress(row)
    from . import formats
    report = {
        "handwave_version": __version__,
        "seeds": [int(s) for s in profile_seeds],
        "variants": variants,
        "alpha_range": list(alpha_range),
        "p_range": list(p_range),
        "config": {
            "chirp": formats.config_to_dict(settings.chirp),
            "geometry": formats.geometry_to_dict(settings.geometry),
            "grid": formats.grid_to_dict(settings.grid),
            "particles": settings.n_particles,
            "ring": settings.ring_capacity,
            "history": settings.history,
        },
        "rows": rows,
        "summary": summarize(rows),
    }
    for variant in variants:
        report["summary"][variant]["mean_latency_ms"] = measure_latency(
            variant, latency_frames, settings, seed=int(profile_seeds[0]))
    return report


def summarize(rows) -> dict:
    out = {}
    for row in rows:
        agg = out.setdefault(row["variant"],
                             {"rmse_y_m": [], "rmse_z_m": [], "rmse_v_mps": []})
        for key in ("rmse_y_m", "rmse_z_m", "rmse_v_mps"):
            agg[key].append(row[key])
    return {variant: {key: float(np.mean(vals)) for key, vals in agg.items()}
            for variant, agg in out.items()}


def measure_latency(variant: str, frames: int, settings: PipelineSettings,
                    seed: int = 0, warmup: int = 8) -> float:
    """Mean per-frame processing latency (ms) of the streaming chain,
    simulation excluded."""
    if frames < 32:
        raise ValueError("need at least 32 frames for a stable latency figure")
    profile = reference_profile(seed, n_samples=frames + warmup)
    pipeline = TrackingPipeline(variant, settings, seed)
    scene_rng, noise_rng = _seed_rngs(seed)
    source = GaussianNoiseSource()
    latencies = []
    for i in range(len(profile)):
        frame = simulate_frame(settings, float(profile.y[i]), float(profile.z[i]),
                               float(scene_rng.uniform(0.5, 1.0)),
                               float(profile.v[i]), float(profile.t[i]),
                               noise_scale=float(scene_rng.uniform(1.0, 3.0)),
                               noise_source=source, rng=noise_rng)
        result = pipeline.process_frame(frame)
        if i >= warmup:
            latencies.append(result.latency_s)
    return float(np.mean(latencies) * 1000.0)
