"""MIMO-FMCW beat-signal synthesis and multistatic-to-monostatic compensation.

The scene model is a set of ideal point reflectors in the y-z plane above a
vertically facing linear MIMO array.  Each transmit/receive pair contributes a
beat signal whose phase encodes the two-way path length at every wavenumber
sample, plus a per-chirp Doppler phase for a radially moving target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Radar convention (matches the device-constant arithmetic this package
# reproduces; the exact SI value would shift range results by ~0.07%).
SPEED_OF_LIGHT = 3.0e8

MULTISTATIC = "multistatic"
MONOSTATIC = "monostatic-compensated"


def _require_finite_positive(name, value):
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class ChirpConfig:
    """FMCW waveform timing: a linear chirp sampled by the ADC, repeated n_chirps
    times per frame at the pulse repetition interval."""

    start_freq: float = 77e9      # chirp start frequency f0 (Hz)
    slope: float = 1.25e14        # chirp slope (Hz/s)
    adc_rate: float = 2e6         # ADC sampling rate (Hz)
    n_samples: int = 64           # wavenumber samples per chirp
    n_chirps: int = 16            # chirps per frame
    pri: float = 4e-3             # pulse repetition interval (s)

    def __post_init__(self):
        _require_finite_positive("start_freq", self.start_freq)
        _require_finite_positive("slope", self.slope)
        _require_finite_positive("adc_rate", self.adc_rate)
        _require_finite_positive("pri", self.pri)
        if self.n_samples < 1 or self.n_chirps < 1:
            raise ValueError("n_samples and n_chirps must be >= 1")

    @property
    def bandwidth(self) -> float:
        return self.slope * self.n_samples / self.adc_rate

    @property
    def start_wavenumber(self) -> float:
        return 2.0 * math.pi * self.start_freq / SPEED_OF_LIGHT

    @property
    def wavenumber_step(self) -> float:
        return 2.0 * math.pi * self.slope / (SPEED_OF_LIGHT * self.adc_rate)

    @property
    def start_wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.start_freq

    @property
    def center_freq(self) -> float:
        return self.start_freq + self.bandwidth / 2.0

    @property
    def center_wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.center_freq

    def wavenumbers(self) -> np.ndarray:
        """One-way wavenumber of every ADC sample along the chirp."""
        return self.start_wavenumber + self.wavenumber_step * np.arange(self.n_samples)

    def unambiguous_speed(self, interval: float | None = None) -> float:
        """Largest |velocity| resolvable by chirp/frame-to-frame phase stepping."""
        t = self.pri if interval is None else interval
        return self.start_wavelength / (4.0 * t)


@dataclass(frozen=True)
class ArrayGeometry:
    """Linear MIMO array along y at z=0; virtual elements sit at TX/RX midpoints.

    ``ref_range`` (the z0 reference plane) anchors the multistatic phase
    compensation and the cross-range resolution formula; by default it is the
    center of the imaged scene.
    """

    tx_y: tuple[float, ...]
    rx_y: tuple[float, ...]
    ref_range: float = 0.3

    def __post_init__(self):
        if len(self.tx_y) < 1 or len(self.rx_y) < 1:
            raise ValueError("need at least one TX and one RX element")
        for v in (*self.tx_y, *self.rx_y):
            if not math.isfinite(v):
                raise ValueError("element positions must be finite")
        _require_finite_positive("ref_range", self.ref_range)

    @property
    def n_channels(self) -> int:
        return len(self.tx_y) * len(self.rx_y)

    def pairs(self) -> list[tuple[float, float]]:
        """(tx, rx) positions in channel order (TX-major)."""
        return [(t, r) for t in self.tx_y for r in self.rx_y]

    def virtual_y(self) -> np.ndarray:
        """Midpoint position of every TX/RX pair, in channel order."""
        return np.array([(t + r) / 2.0 for t, r in self.pairs()])

    def pair_separations(self) -> np.ndarray:
        """TX-to-RX spacing d_y of every pair, in channel order."""
        return np.array([abs(t - r) for t, r in self.pairs()])

    def virtual_order(self) -> np.ndarray:
        """Channel permutation sorting virtual elements by ascending y."""
        return np.argsort(self.virtual_y(), kind="stable")

    @property
    def aperture(self) -> float:
        """Physical array extent along y (outermost element to outermost element)."""
        ys = (*self.tx_y, *self.rx_y)
        return max(ys) - min(ys)


def default_geometry(config: ChirpConfig | None = None, center_y: float = 0.0,
                     ref_range: float = 0.3) -> ArrayGeometry:
    """Stock 2-TX / 4-RX layout: TX spaced 2*lambda_c, RX spaced lambda_c/2,
    yielding 8 equally spaced virtual elements at lambda_c/4 pitch."""
    lc = (config or ChirpConfig()).center_wavelength
    tx = (center_y - lc, center_y + lc)
    rx = tuple(center_y + lc * m for m in (-0.75, -0.25, 0.25, 0.75))
    return ArrayGeometry(tx_y=tx, rx_y=rx, ref_range=ref_range)


@dataclass(frozen=True)
class PointTarget:
    """Ideal point reflector at (y, z) with radial velocity along z."""

    y: float
    z: float
    reflectivity: float = 1.0
    velocity: float = 0.0

    def __post_init__(self):
        for name, v in (("y", self.y), ("z", self.z),
                        ("reflectivity", self.reflectivity), ("velocity", self.velocity)):
            if not math.isfinite(v):
                raise ValueError(f"target {name} must be finite, got {v!r}")
        if self.z <= 0:
            raise ValueError(f"target z must be > 0, got {self.z!r}")
        if self.reflectivity <= 0:
            raise ValueError(f"target reflectivity must be > 0, got {self.reflectivity!r}")


class GaussianNoiseSource:
    """Complex circular white Gaussian noise with per-sample std ``sigma``."""

    def __init__(self, sigma: float = 1.0):
        if not math.isfinite(sigma) or sigma < 0:
            raise ValueError("sigma must be finite and >= 0")
        self.sigma = sigma

    def sample(self, shape, rng: np.random.Generator) -> np.ndarray:
        scale = self.sigma / math.sqrt(2.0)
        return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


class FileNoiseSource:
    """Replays recorded noise from a ``.beat`` file so real device noise can be
    substituted for the Gaussian default.  Draws a random contiguous window of
    the recording (wrapping) for each request."""

    def __init__(self, path):
        from . import formats
        frame = formats.read_beat(path)
        flat = np.ascontiguousarray(frame.data).ravel()
        if flat.size == 0:
            raise ValueError(f"noise recording {path} is empty")
        self._samples = flat

    def sample(self, shape, rng: np.random.Generator) -> np.ndarray:
        n = int(np.prod(shape))
        start = int(rng.integers(0, self._samples.size))
        idx = (start + np.arange(n)) % self._samples.size
        return self._samples[idx].reshape(shape)


@dataclass
class BeatFrame:
    """Complex beat samples, shape [n_channels, n_samples, n_chirps]."""

    data: np.ndarray
    config: ChirpConfig
    geometry: ArrayGeometry
    layout: str = MULTISTATIC
    time: float = 0.0

    def __post_init__(self):
        expected = (self.geometry.n_channels, self.config.n_samples, self.config.n_chirps)
        if self.data.shape != expected:
            raise ValueError(f"beat data shape {self.data.shape} != {expected}")
        if self.layout not in (MULTISTATIC, MONOSTATIC):
            raise ValueError(f"unknown layout {self.layout!r}")

    def chirp(self, index: int = 0) -> np.ndarray:
        """[n_channels, n_samples] slice of one chirp."""
        return self.data[:, :, index]


def simulate_beat(targets, config: ChirpConfig, geometry: ArrayGeometry,
                  noise_scale: float = 0.0, noise_source=None,
                  rng: np.random.Generator | None = None,
                  time: float = 0.0) -> BeatFrame:
    """Synthesize one multistatic beat frame for a list of point targets.

    Per pair and target: (p / (R_T R_R)) * exp(j[(k0 + dk*n)(R_T + R_R)
    + (4 pi v T_pri / lambda0) * n_c]), with ranges frozen at the frame instant
    (stop-and-hop within the frame; velocity appears only in the chirp-index
    phase).  White noise scaled by ``noise_scale`` is added on top.
    """
    targets = list(targets)
    if not math.isfinite(noise_scale) or noise_scale < 0:
        raise ValueError("noise_scale must be finite and >= 0")
    if not targets and noise_scale == 0:
        raise ValueError("need at least one target or a positive noise_scale")

    k = config.wavenumbers()                                   # [n_k]
    chirp_idx = np.arange(config.n_chirps)                     # [n_c]
    data = np.zeros((geometry.n_channels, config.n_samples, config.n_chirps),
                    dtype=np.complex128)

    if targets:
        ty = np.array([t.y for t in targets])
        tz = np.array([t.z for t in targets])
        tp = np.array([t.reflectivity for t in targets])
        tv = np.array([t.velocity for t in targets])
        doppler_rate = 4.0 * math.pi * tv * config.pri / config.start_wavelength
        chirp_phase = np.exp(1j * np.outer(doppler_rate, chirp_idx))   # [n_t, n_c]
        for ch, (tx, rx) in enumerate(geometry.pairs()):
            r_t = np.hypot(ty - tx, tz)
            r_r = np.hypot(ty - rx, tz)
            amp = tp / (r_t * r_r)
            range_phase = np.exp(1j * np.outer(r_t + r_r, k))          # [n_t, n_k]
            data[ch] = np.einsum("t,tk,tc->kc", amp, range_phase, chirp_phase)

    if noise_scale > 0:
        source = noise_source if noise_source is not None else GaussianNoiseSource()
        if rng is None:
            rng = np.random.default_rng()
        data = data + noise_scale * source.sample(data.shape, rng)

    return BeatFrame(data=data, config=config, geometry=geometry,
                     layout=MULTISTATIC, time=time)


def compensate_multistatic(frame: BeatFrame) -> BeatFrame:
    """Apply the small-baseline phase correction that lets each TX/RX pair be
    treated as a colocated element at its midpoint, then order channels by
    ascending virtual position.

    Multiplies channel samples by exp(-j k d_y^2 / (4 z0)); magnitudes are
    untouched.
    """
    if frame.layout != MULTISTATIC:
        raise ValueError("frame is already monostatic-compensated")
    geometry = frame.geometry
    k = frame.config.wavenumbers()
    d = geometry.pair_separations()
    factor = np.exp(-1j * np.outer(d ** 2 / (4.0 * geometry.ref_range), k))  # [ch, n_k]
    data = frame.data * factor[:, :, None]
    order = geometry.virtual_order()
    return BeatFrame(data=data[order], config=frame.config, geometry=geometry,
                     layout=MONOSTATIC, time=frame.time)
