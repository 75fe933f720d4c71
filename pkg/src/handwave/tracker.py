"""Shift-resampling particle filter, Doppler corroboration, and the derived
motion features (sample velocity, cross-range oscillation rate).

The filter departs from the textbook sequential-importance-resampling scheme:
after resampling, every particle is shifted toward the newest measurement by
the per-axis weight vector, diffused, and re-weighted by a Gaussian centered
on the *previous* state estimate.  The Doppler-corroborated variant modulates
the range-axis shift weight by how well the Doppler velocity agrees with the
slope of recent range estimates, so single-frame range outliers get ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


@dataclass
class FilterConfig:
    """Tuning for one particle-filter instance of dimension d = len(shift_gain).

    shift_gain: per-axis fraction of (measurement - previous state) applied to
    every particle (the vector a, each entry in [0, 1]).
    diffusion_cov / weight_cov: covariances of the perturbation term and of the
    Gaussian re-weighting kernel.
    bounds: (lo, hi) clamp box, one pair per axis.
    doppler_base_gain: base range-axis gain for Doppler corroboration.
    """

    shift_gain: np.ndarray
    diffusion_cov: np.ndarray
    weight_cov: np.ndarray
    bounds: np.ndarray
    n_particles: int = 256
    doppler_base_gain: float = 0.5
    resampler: str = "multinomial"   # or "systematic"

    def __post_init__(self):
        self.shift_gain = np.atleast_1d(np.asarray(self.shift_gain, dtype=float))
        d = self.shift_gain.size
        self.diffusion_cov = np.atleast_2d(np.asarray(self.diffusion_cov, dtype=float))
        self.weight_cov = np.atleast_2d(np.asarray(self.weight_cov, dtype=float))
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(d, 2)
        if np.any(self.shift_gain < 0) or np.any(self.shift_gain > 1):
            raise ValueError("shift_gain entries must lie in [0, 1]")
        for name, cov in (("diffusion_cov", self.diffusion_cov),
                          ("weight_cov", self.weight_cov)):
            if cov.shape != (d, d):
                raise ValueError(f"{name} must be {d}x{d}")
            if not np.allclose(cov, cov.T):
                raise ValueError(f"{name} must be symmetric")
        # weight_cov must be invertible up front; a singular kernel is a
        # configuration error, not a per-step surprise.
        try:
            self._weight_prec = np.linalg.inv(self.weight_cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("weight_cov is singular") from exc
        eig = np.linalg.eigvalsh(self.weight_cov)
        if np.any(eig <= 0):
            raise ValueError("weight_cov must be positive definite")
        if np.any(np.linalg.eigvalsh(self.diffusion_cov) < 0):
            raise ValueError("diffusion_cov must be positive semi-definite")
        self._diffusion_chol = np.linalg.cholesky(
            self.diffusion_cov + 1e-30 * np.eye(d))
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.resampler not in ("multinomial", "systematic"):
            raise ValueError(f"unknown resampler {self.resampler!r}")

    @property
    def dim(self) -> int:
        return self.shift_gain.size

    @classmethod
    def position_tracking(cls, roi_bounds, n_particles: int = 256,
                          shift_gain=(0.5, 0.5), diffusion_std=(0.002, 0.002),
                          weight_std=(0.02, 0.02), doppler_base_gain: float = 0.5,
                          resampler: str = "multinomial") -> "FilterConfig":
        """2-D (y, z) tracker defaults; stds in meters."""
        return cls(shift_gain=np.asarray(shift_gain, float),
                   diffusion_cov=np.diag(np.square(diffusion_std)),
                   weight_cov=np.diag(np.square(weight_std)),
                   bounds=np.asarray(roi_bounds, float),
                   n_particles=n_particles,
                   doppler_base_gain=doppler_base_gain,
                   resampler=resampler)

    @classmethod
    def scalar(cls, lo: float, hi: float, shift_gain: float = 0.5,
               diffusion_std: float = 0.0, weight_std: float = 1.0,
               n_particles: int = 128) -> "FilterConfig":
        """1-D smoother (velocity, oscillation rate)."""
        return cls(shift_gain=np.array([shift_gain]),
                   diffusion_cov=np.array([[diffusion_std ** 2]]),
                   weight_cov=np.array([[weight_std ** 2]]),
                   bounds=np.array([[lo, hi]]),
                   n_particles=n_particles)


@dataclass
class ParticleSet:
    """Particle states [N, d] with matching weights [N]."""

    states: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.states.shape[0],):
            raise ValueError("weights must have one entry per particle")
        if not np.all(np.isfinite(self.states)) or not np.all(np.isfinite(self.weights)):
            raise ValueError("particle states/weights must be finite")
        if np.any(self.weights < 0) or self.weights.sum() == 0:
            raise ValueError("weights must be nonnegative and not all zero")

    @property
    def n(self) -> int:
        return self.states.shape[0]


def init_particles(cfg: FilterConfig, rng: np.random.Generator) -> ParticleSet:
    """Uniform particles over the clamp box, uniform weights."""
    lo, hi = cfg.bounds[:, 0], cfg.bounds[:, 1]
    states = rng.uniform(lo, hi, size=(cfg.n_particles, cfg.dim))
    return ParticleSet(states, np.full(cfg.n_particles, 1.0 / cfg.n_particles))


def _resample(particles: ParticleSet, cfg: FilterConfig,
              rng: np.random.Generator) -> np.ndarray:
    p = particles.weights / particles.weights.sum()
    if cfg.resampler == "multinomial":
        idx = rng.choice(particles.n, size=cfg.n_particles, p=p)
    else:
        positions = (rng.random() + np.arange(cfg.n_particles)) / cfg.n_particles
        idx = np.searchsorted(np.cumsum(p), positions)
        idx = np.minimum(idx, particles.n - 1)
    return particles.states[idx]


def pf_step(particles: ParticleSet, measurement, state_prev, cfg: FilterConfig,
            rng: np.random.Generator,
            shift_gain: np.ndarray | None = None) -> tuple[ParticleSet, np.ndarray]:
    """One iteration of the shift-resampling particle filter.

    Resamples by weight, shifts every particle by shift_gain * (measurement -
    previous state), adds Gaussian diffusion, re-weights with a Gaussian
    centered on the previous state, and returns the weighted-mean state
    (clamped to the configured box along with the particles).
    """
    r = np.atleast_1d(np.asarray(measurement, dtype=float))
    s_prev = np.atleast_1d(np.asarray(state_prev, dtype=float))
    gain = cfg.shift_gain if shift_gain is None else np.atleast_1d(shift_gain)
    if r.shape != (cfg.dim,) or s_prev.shape != (cfg.dim,):
        raise ValueError("measurement/state dimension mismatch")

    states = _resample(particles, cfg, rng)
    states = states + gain * (r - s_prev)
    if np.any(cfg.diffusion_cov):
        noise = rng.standard_normal((cfg.n_particles, cfg.dim))
        states = states + noise @ cfg._diffusion_chol.T
    states = np.clip(states, cfg.bounds[:, 0], cfg.bounds[:, 1])

    # Gaussian re-weighting about the previous estimate, computed in log space
    # and floored so one far-out cloud cannot zero every weight.
    delta = states - s_prev
    log_w = -0.5 * np.einsum("nd,de,ne->n", delta, cfg._weight_prec, delta)
    log_w -= log_w.max()
    weights = np.exp(log_w)
    weights = np.maximum(weights, 1e-12)

    new_particles = ParticleSet(states, weights)
    s_new = weights @ states / weights.sum()
    s_new = np.clip(s_new, cfg.bounds[:, 0], cfg.bounds[:, 1])
    return new_particles, s_new


def doppler_weight(velocity_gap: float, base_gain: float, wavelength: float,
                   interval: float) -> float:
    """Range-measurement gain as a function of Doppler/sample velocity
    disagreement: base_gain * cos(2 pi T gap / lambda) inside the resolvable
    window, zero beyond it (continuous at the cutoff)."""
    if velocity_gap < 0:
        raise ValueError("velocity gap is a magnitude, must be >= 0")
    cutoff = wavelength / (4.0 * interval)
    if velocity_gap > cutoff:
        return 0.0
    return base_gain * math.cos(2.0 * math.pi * interval * velocity_gap / wavelength)


def dpf_step(particles: ParticleSet, measurement, state_prev, cfg: FilterConfig,
             doppler_vel: float, sample_vel: float, wavelength: float,
             interval: float, rng: np.random.Generator
             ) -> tuple[ParticleSet, np.ndarray, float]:
    """pf_step with the range-axis gain set from Doppler corroboration.

    Returns (particles, state, applied range gain).  The range axis is assumed
    to be the last state dimension.
    """
    gap = abs(doppler_vel - sample_vel)
    a_z = doppler_weight(gap, cfg.doppler_base_gain, wavelength, interval)
    gain = cfg.shift_gain.copy()
    gain[-1] = a_z
    particles, s_new = pf_step(particles, measurement, state_prev, cfg, rng,
                               shift_gain=gain)
    return particles, s_new, a_z


def sample_velocity(ranges, interval: float) -> float:
    """Least-squares slope of recent range estimates against m*interval."""
    z = np.asarray(ranges, dtype=float)
    if z.size < 2:
        raise ValueError("need at least two range samples for a slope")
    t = np.arange(z.size) * interval
    t_c = t - t.mean()
    return float(np.dot(t_c, z - z.mean()) / np.dot(t_c, t_c))


class OscillationEstimate(NamedTuple):
    frequency: float
    detected: bool


def oscillation_rate(values, interval: float, pad_factor: int = 4,
                     floor: float = 1e-8) -> OscillationEstimate:
    """Dominant non-DC frequency of a mean-removed window.

    Magnitude spectrum of the window zero-padded pad_factor times; returns the
    frequency of the largest non-DC bin, or detected=False when the window has
    no appreciable non-DC energy (e.g. a constant input).
    """
    y = np.asarray(values, dtype=float)
    if y.size < 8:
        raise ValueError("oscillation window must hold at least 8 samples")
    if interval <= 0:
        raise ValueError("sample interval must be positive")
    centered = y - y.mean()
    n = pad_factor * y.size
    spectrum = np.abs(np.fft.rfft(centered, n=n))
    threshold = floor * y.size * (np.std(y) + 1e-30)
    if spectrum[1:].size == 0 or spectrum[1:].max() <= threshold:
        return OscillationEstimate(0.0, False)
    best = 1 + int(np.argmax(spectrum[1:]))
    return OscillationEstimate(best / (n * interval), True)


class ParticleFilter:
    """Stateful wrapper owning a particle cloud, its RNG, and the previous
    estimate; one instance per tracked quantity."""

    def __init__(self, cfg: FilterConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.particles = init_particles(cfg, rng)
        self.state = self.particles.states.mean(axis=0)

    def step(self, measurement) -> np.ndarray:
        self.particles, self.state = pf_step(
            self.particles, measurement, self.state, self.cfg, self.rng)
        return self.state

    def step_corroborated(self, measurement, doppler_vel: float, sample_vel: float,
                          wavelength: float, interval: float) -> tuple[np.ndarray, float]:
        self.particles, self.state, a_z = dpf_step(
            self.particles, measurement, self.state, self.cfg,
            doppler_vel, sample_vel, wavelength, interval, self.rng)
        return self.state, a_z


class OscillationTracker:
    """Windowed spectral oscillation-rate estimate smoothed by a scalar
    particle filter."""

    def __init__(self, window: int = 64, max_rate: float = 16.0,
                 rng: np.random.Generator | None = None,
                 smoother: FilterConfig | None = None):
        if window < 8:
            raise ValueError("window must be >= 8")
        self.window = window
        self._times: list[float] = []
        self._values: list[float] = []
        cfg = smoother or FilterConfig.scalar(0.0, max_rate, shift_gain=0.5,
                                              diffusion_std=0.05, weight_std=2.0)
        self._filter = ParticleFilter(cfg, rng or np.random.default_rng())
        self._filter.state = np.array([0.0])
        self.raw = OscillationEstimate(0.0, False)

    def update(self, t: float, value: float) -> float:
        self._times.append(float(t))
        self._values.append(float(value))
        if len(self._values) > self.window:
            self._times.pop(0)
            self._values.pop(0)
        if len(self._values) < self.window:
            return float(self._filter.state[0])
        dt = float(np.mean(np.diff(self._times)))
        if dt <= 0:
            return float(self._filter.state[0])
        self.raw = oscillation_rate(self._values, dt)
        target = self.raw.frequency if self.raw.detected else 0.0
        return float(self._filter.step(np.array([target]))[0])
