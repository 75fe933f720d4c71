"""Per-frame processing chains for the six method variants.

Variants factor into two independent switches: whether the reflectivity image
is enhanced by the trained network before feature extraction, and which
tracking stage consumes the features (none / particle filter / Doppler-
corroborated particle filter).  Feature extraction (peak position, Doppler
velocity, sample velocity) is identical across tracking stages, which lets the
benchmark share one extraction pass per (seed, enhancement) combination —
every method variant of a run scores against the same simulated data, the way
the reference experiments were run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .enhancer import FcnnModel, fcnn_forward_batch
from .imaging import (ImageRing, RadarImage, RangeMigrationImager, RoiGrid,
                      doppler_velocity, get_imager, locate_peak)
from .signal import (ArrayGeometry, BeatFrame, ChirpConfig, GaussianNoiseSource,
                     PointTarget, compensate_multistatic, simulate_beat)
from .tracker import (FilterConfig, OscillationTracker, ParticleFilter,
                      oscillation_rate, sample_velocity)

VARIANTS = ("simple", "pf", "dpf", "fcnn", "fcnn-pf", "fcnn-dpf")


def variant_uses_fcnn(variant: str) -> bool:
    return variant.startswith("fcnn")


def variant_tracker(variant: str) -> str:
    if variant.endswith("dpf"):
        return "dpf"
    if variant.endswith("pf"):
        return "pf"
    return "none"


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return variant


@dataclass
class PipelineSettings:
    """Everything a pipeline needs besides the variant and the seed."""

    chirp: ChirpConfig
    geometry: ArrayGeometry
    grid: RoiGrid
    model: FcnnModel | None = None
    ring_capacity: int = 16          # Doppler image buffer
    history: int = 16                # recent range estimates for sample velocity
    n_particles: int = 256
    gain_y: float = 0.5
    gain_z_base: float = 0.5
    diffusion_std: float = 0.002
    weight_std: float = 0.02
    resampler: str = "multinomial"
    osc_window: int = 64

    def filter_config(self) -> FilterConfig:
        return FilterConfig.position_tracking(
            roi_bounds=[[self.grid.y_min, self.grid.y_max],
                        [self.grid.z_min, self.grid.z_max]],
            n_particles=self.n_particles,
            shift_gain=(self.gain_y, self.gain_z_base),
            diffusion_std=(self.diffusion_std, self.diffusion_std),
            weight_std=(self.weight_std, self.weight_std),
            doppler_base_gain=self.gain_z_base,
            resampler=self.resampler)

    def velocity_filter_config(self) -> FilterConfig:
        vmax = self.chirp.unambiguous_speed()
        return FilterConfig.scalar(-vmax, vmax, shift_gain=0.5,
                                   diffusion_std=0.002, weight_std=0.05)


@dataclass
class FrameResult:
    t: float
    measured_y: float
    measured_z: float
    est_y: float
    est_z: float
    doppler_vel: float
    sample_vel: float
    est_vel: float
    range_gain: float
    osc_rate: float
    peak_mag: float
    latency_s: float = 0.0
    stage_latency: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return {"t": self.t, "measured_y": self.measured_y,
                "measured_z": self.measured_z, "est_y": self.est_y,
                "est_z": self.est_z, "doppler_vel": self.doppler_vel,
                "sample_vel": self.sample_vel, "est_vel": self.est_vel,
                "range_gain": self.range_gain, "osc_rate": self.osc_rate}


class FeatureExtractor:
    """Streaming feature extraction: peak localization plus Doppler velocity
    from the buffered image ring and sample velocity from recent ranges.

    For enhanced chains, the peak comes from the network output and the ring
    stores the complex image masked by the normalized enhanced magnitude, which
    suppresses clutter phase noise in the Doppler spectrum.
    """

    def __init__(self, settings: PipelineSettings, enhanced: bool):
        if enhanced and settings.model is None:
            raise ValueError("enhanced extraction requires a trained model")
        self.settings = settings
        self.enhanced = enhanced
        self.ring = ImageRing(settings.ring_capacity)
        self.ranges: list[float] = []
        self.times: list[float] = []
        self._last = (settings.grid.center[0], settings.grid.center[1])

    def enhance(self, magnitude: np.ndarray) -> np.ndarray:
        model = self.settings.model
        return model.forward(magnitude[None].astype(model.dtype))[0]

    def step(self, image: RadarImage, enhanced_mag: np.ndarray | None = None):
        """Returns (measured_y, measured_z, doppler_vel, sample_vel, peak_mag)."""
        settings = self.settings
        if self.enhanced:
            if enhanced_mag is None:
                enhanced_mag = self.enhance(image.magnitude())
            peak_img = RadarImage(np.asarray(enhanced_mag, dtype=np.float64),
                                  image.grid, image.time)
        else:
            peak_img = image
        peak = locate_peak(peak_img)
        if peak.found:
            self._last = (peak.y, peak.z)
        y_meas, z_meas = self._last

        if self.enhanced:
            mag = np.abs(enhanced_mag)
            top = mag.max()
            mask = mag / top if top > 0 else mag
            ring_img = RadarImage(image.pixels * mask, image.grid, image.time)
        else:
            ring_img = image
        self.ring.push(ring_img)

        if self.ring.full:
            doppler = doppler_velocity(self.ring, y_meas, settings.chirp)
            v_d = doppler.velocity
        else:
            v_d = 0.0

        self.ranges.append(z_meas)
        self.times.append(image.time)
        if len(self.ranges) > settings.history:
            self.ranges.pop(0)
            self.times.pop(0)
        if len(self.ranges) >= 2:
            dt = float(np.mean(np.diff(self.times)))
            v_s = sample_velocity(self.ranges, dt) if dt > 0 else 0.0
        else:
            v_s = 0.0
        return y_meas, z_meas, v_d, v_s, float(peak.magnitude)


class TrackerStage:
    """The per-variant state estimator consuming extracted features."""

    def __init__(self, variant: str, settings: PipelineSettings, seed_seq):
        self.variant = check_variant(variant)
        self.kind = variant_tracker(variant)
        self.settings = settings
        rngs = [np.random.default_rng(s) for s in seed_seq.spawn(3)]
        if self.kind != "none":
            self.position = ParticleFilter(settings.filter_config(), rngs[0])
            self.velocity = ParticleFilter(settings.velocity_filter_config(), rngs[1])
            self.velocity.state = np.array([0.0])
            self.osc = OscillationTracker(settings.osc_window, rng=rngs[2])
        else:
            self.position = None
            self.velocity = None
            self._raw_y: list[float] = []
            self._raw_t: list[float] = []

    def step(self, t, y_meas, z_meas, v_d, v_s, warmed_up: bool):
        """Returns (est_y, est_z, est_vel, range_gain, osc_rate)."""
        settings = self.settings
        if self.kind == "none":
            self._raw_y.append(y_meas)
            self._raw_t.append(t)
            if len(self._raw_y) > settings.osc_window:
                self._raw_y.pop(0)
                self._raw_t.pop(0)
            osc = 0.0
            if len(self._raw_y) == settings.osc_window:
                dt = float(np.mean(np.diff(self._raw_t)))
                if dt > 0:
                    est = oscillation_rate(self._raw_y, dt)
                    osc = est.frequency if est.detected else 0.0
            return y_meas, z_meas, v_d, settings.gain_z_base, osc

        if self.kind == "dpf" and warmed_up:
            state, a_z = self.position.step_corroborated(
                np.array([y_meas, z_meas]), v_d, v_s,
                settings.chirp.start_wavelength, settings.chirp.pri)
        else:
            state = self.position.step(np.array([y_meas, z_meas]))
            a_z = settings.gain_z_base
        v_est = float(self.velocity.step(np.array([v_d]))[0])
        osc = self.osc.update(t, float(state[0]))
        return float(state[0]), float(state[1]), v_est, float(a_z), float(osc)


class TrackingPipeline:
    """Streaming end-to-end chain: beat frame in, tracked state out."""

    def __init__(self, variant: str, settings: PipelineSettings, seed: int = 0):
        self.variant = check_variant(variant)
        self.settings = settings
        if variant_uses_fcnn(variant) and settings.model is None:
            raise ValueError(f"variant {variant!r} requires a trained model")
        self.imager = get_imager(replace(settings.chirp, n_chirps=1),
                                 settings.geometry, settings.grid)
        self.extractor = FeatureExtractor(settings, variant_uses_fcnn(variant))
        self.tracker = TrackerStage(variant, settings,
                                    np.random.SeedSequence([seed, VARIANTS.index(variant)]))
        self.frames = 0

    def process_frame(self, frame: BeatFrame) -> FrameResult:
        """Run one multistatic beat frame through the full chain (first chirp)."""
        timings = {}
        t0 = time.perf_counter()
        compensated = compensate_multistatic(frame)
        timings["compensate"] = time.perf_counter() - t0

        t1 = time.perf_counter()
        image = self.imager.reconstruct(compensated)
        timings["imaging"] = time.perf_counter() - t1

        t2 = time.perf_counter()
        enhanced = None
        if self.extractor.enhanced:
            enhanced = self.extractor.enhance(image.magnitude())
        timings["enhance"] = time.perf_counter() - t2

        t3 = time.perf_counter()
        y_meas, z_meas, v_d, v_s, peak_mag = self.extractor.step(image, enhanced)
        timings["features"] = time.perf_counter() - t3

        t4 = time.perf_counter()
        warmed = self.extractor.ring.full and len(self.extractor.ranges) >= 2
        est_y, est_z, v_est, a_z, osc = self.tracker.step(
            frame.time, y_meas, z_meas, v_d, v_s, warmed)
        timings["tracking"] = time.perf_counter() - t4

        self.frames += 1
        return FrameResult(t=frame.time, measured_y=y_meas, measured_z=z_meas,
                           est_y=est_y, est_z=est_z, doppler_vel=v_d,
                           sample_vel=v_s, est_vel=v_est, range_gain=a_z,
                           osc_rate=osc, peak_mag=peak_mag,
                           latency_s=sum(timings.values()), stage_latency=timings)


def simulate_frame(settings: PipelineSettings, y: float, z: float,
                   reflectivity: float, velocity: float, t: float,
                   noise_scale: float, noise_source, rng) -> BeatFrame:
    """One single-chirp frame of the scene at time t."""
    frame_config = replace(settings.chirp, n_chirps=1)
    return simulate_beat([PointTarget(y, z, reflectivity, velocity)],
                         frame_config, settings.geometry,
                         noise_scale=noise_scale, noise_source=noise_source,
                         rng=rng, time=t)
