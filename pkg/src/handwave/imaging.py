"""Range-migration image formation, peak localization, and Doppler extraction.

The imager transforms a monostatic-compensated beat frame into a complex
reflectivity map over the region of interest: a spatial transform across the
virtual array, resampling of the dispersion curve k_z = sqrt(4k^2 - k_y^2)
onto a uniform k_z grid (Stolt), and an inverse transform evaluated directly
on the ROI grid points.  Phase matrices are precomputed per configuration, so
per-frame work is a few small matrix products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .signal import (MONOSTATIC, ArrayGeometry, BeatFrame, ChirpConfig,
                     PointTarget, compensate_multistatic, simulate_beat)


@dataclass(frozen=True)
class RoiGrid:
    """Rectangular y-z region of interest sampled on a uniform grid."""

    y_min: float = -0.1
    y_max: float = 0.1
    z_min: float = 0.1
    z_max: float = 0.5
    n_y: int = 64
    n_z: int = 64

    def __post_init__(self):
        if not (self.y_min < self.y_max and self.z_min < self.z_max):
            raise ValueError("ROI bounds must be ordered")
        if self.z_min <= 0:
            raise ValueError("ROI must lie at positive range")
        if self.n_y < 2 or self.n_z < 2:
            raise ValueError("grid needs at least 2 points per axis")

    def y_axis(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.n_y)

    def z_axis(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.n_z)

    @property
    def cell_y(self) -> float:
        return (self.y_max - self.y_min) / (self.n_y - 1)

    @property
    def cell_z(self) -> float:
        return (self.z_max - self.z_min) / (self.n_z - 1)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.y_min + self.y_max) / 2.0, (self.z_min + self.z_max) / 2.0)

    def contains(self, y: float, z: float) -> bool:
        return self.y_min <= y <= self.y_max and self.z_min <= z <= self.z_max

    def nearest_cell(self, y: float, z: float) -> tuple[int, int]:
        """(row, col) of the grid point closest to (y, z)."""
        col = int(round((y - self.y_min) / self.cell_y))
        row = int(round((z - self.z_min) / self.cell_z))
        return (min(max(row, 0), self.n_z - 1), min(max(col, 0), self.n_y - 1))


@dataclass
class RadarImage:
    """Reflectivity map over an RoiGrid; pixels[row, col] = pixels[z, y]."""

    pixels: np.ndarray
    grid: RoiGrid
    time: float = 0.0

    def __post_init__(self):
        if self.pixels.shape != (self.grid.n_z, self.grid.n_y):
            raise ValueError(
                f"pixels shape {self.pixels.shape} != grid ({self.grid.n_z}, {self.grid.n_y})")

    def magnitude(self) -> np.ndarray:
        return np.abs(self.pixels)


class PeakEstimate(NamedTuple):
    y: float
    z: float
    magnitude: float
    found: bool


def locate_peak(image: RadarImage) -> PeakEstimate:
    """Grid coordinates of the global magnitude maximum.

    Ties break toward the lowest z then lowest y (C-order argmax on a grid
    whose rows ascend in z).  An all-zero image yields found=False instead of
    raising.
    """
    mag = image.magnitude()
    flat = int(np.argmax(mag))
    peak = float(mag.flat[flat])
    if peak == 0.0:
        return PeakEstimate(math.nan, math.nan, 0.0, False)
    row, col = np.unravel_index(flat, mag.shape)
    grid = image.grid
    return PeakEstimate(float(grid.y_axis()[col]), float(grid.z_axis()[row]), peak, True)


def resolution(config: ChirpConfig, geometry: ArrayGeometry) -> tuple[float, float]:
    """(cross-range, range) resolution: lambda_c * z0 / (2 D_y) and c / (2 B)."""
    if geometry.aperture <= 0:
        raise ValueError("geometry has zero aperture")
    if config.bandwidth <= 0:
        raise ValueError("config has zero bandwidth")
    delta_y = config.center_wavelength * geometry.ref_range / (2.0 * geometry.aperture)
    delta_z = 3.0e8 / (2.0 * config.bandwidth)
    return (delta_y, delta_z)


class RangeMigrationImager:
    """Precomputed range-migration operator for one (config, geometry, grid).

    ``stolt_oversample`` sets the uniform k_z grid length to that multiple of
    the per-chirp sample count.  Output images are scaled so a unit-reflectivity
    target at the grid center reconstructs to peak magnitude ~1; the scale is
    calibrated once by imaging exactly that synthetic target.
    """

    def __init__(self, config: ChirpConfig, geometry: ArrayGeometry, grid: RoiGrid,
                 stolt_oversample: int = 4, apodization: str = "rect"):
        self.config = config
        self.geometry = geometry
        self.grid = grid
        self.apodization = apodization

        order = geometry.virtual_order()
        y_virt = geometry.virtual_y()[order]
        n_ch = geometry.n_channels
        if n_ch > 1:
            pitch = float(np.median(np.diff(y_virt)))
            if pitch <= 0:
                raise ValueError("virtual elements must not be colocated")
        else:
            # Degenerate single-channel array: no cross-range information.
            pitch = config.center_wavelength / 4.0

        if apodization == "rect":
            window = np.ones(n_ch)
        elif apodization == "hamming":
            window = np.hamming(n_ch)
        else:
            raise ValueError(f"unknown apodization {apodization!r}")

        k = config.wavenumbers()
        kr = 2.0 * k                                            # two-way wavenumber

        # The ky band covers the angles the ROI geometry can actually produce
        # (with margin), capped at the array's spatial Nyquist; its density sets
        # the alias period of the y inverse (2*pi/step), which must exceed the
        # ROI's y extent or cross-range ghosts fold into the image.
        sin_max = 0.0
        elems = (*geometry.tx_y, *geometry.rx_y)
        for yc in (grid.y_min, grid.y_max):
            for ye in (min(elems), max(elems)):
                dy_ce = abs(yc - ye)
                sin_max = max(sin_max, dy_ce / math.hypot(dy_ce, grid.z_min))
        ky_max = min(1.05 * float(kr[-1]) * sin_max, math.pi / pitch)
        if ky_max <= 0:
            ky_max = math.pi / pitch
        needed = int(math.ceil(1.15 * (grid.y_max - grid.y_min) * ky_max / math.pi))
        n_ky = max(grid.n_y, n_ch, needed, 384)
        ky = np.linspace(-ky_max, ky_max, n_ky)

        # Spatial DFT across the (sorted) virtual channels: S(ky) = sum s* e^{-j ky y'}
        self._forward = np.exp(-1j * np.outer(ky, y_virt)) * window[None, :]

        # Soft roll-off at the ky band edges; a hard cut rings across the
        # image and wobbles the argmax of the very flat cross-range mainlobe.
        edge = 0.2 * ky_max
        ramp = (np.abs(ky) - (ky_max - edge)) / edge
        band_taper = np.where(ramp > 0,
                              0.5 * (1.0 + np.cos(math.pi * np.clip(ramp, 0.0, 1.0))),
                              1.0)

        # Stolt resampling: per ky row the data live on the dispersion curve
        # kz(k) = sqrt(kr^2 - ky^2); resample onto a shared uniform kz grid.
        # 4-point Lagrange interpolation keeps the resampling ripple well below
        # the mainlobe-top curvature, and boundary cells are weighted by their
        # fractional overlap with the occupied band so the curved band edge is
        # not quantized to whole samples.  The kz grid spans the band the ROI
        # can occupy; its spacing stays below pi/z_max so far ranges don't alias.
        kz_hi = float(kr[-1])
        kz_lo = math.sqrt(max(kr[0] ** 2 - ky_max ** 2, 0.0))
        max_step = math.pi / (1.05 * grid.z_max)
        n_kz = stolt_oversample * config.n_samples
        if (kz_hi - kz_lo) / (n_kz - 1) > max_step:
            n_kz = int(math.ceil((kz_hi - kz_lo) / max_step)) + 1
        kz_grid = np.linspace(kz_lo, kz_hi, n_kz)
        step = kz_grid[1] - kz_grid[0]

        # Fuse interpolation taps, quadrature weights, and the kz inverse into
        # one [n_ky, n_k, n_z] operator so per-frame work is batched matmuls.
        inv_z = np.exp(1j * np.outer(grid.z_axis(), kz_grid))         # [n_z, n_kz]
        fused = np.zeros((n_ky, config.n_samples, grid.n_z), dtype=np.complex128)
        for m in range(n_ky):
            ok = kr ** 2 > ky[m] ** 2
            if ok.sum() < 4:
                continue
            curve = np.sqrt(kr[ok] ** 2 - ky[m] ** 2)
            base = int(np.flatnonzero(ok)[0])
            overlap = np.clip(np.minimum(kz_grid + step / 2, curve[-1])
                              - np.maximum(kz_grid - step / 2, curve[0]), 0.0, step) / step
            use = overlap > 0
            if not use.any():
                continue
            pos = np.searchsorted(curve, kz_grid[use], side="right") - 1
            pos = np.clip(pos, 1, curve.size - 3)
            x = kz_grid[use]
            weighted_inv = inv_z[:, use] * (overlap[use] * band_taper[m])[None, :]
            for t in range(4):
                xt = curve[pos - 1 + t]
                w = np.ones_like(x)
                for s in range(4):
                    if s == t:
                        continue
                    xs = curve[pos - 1 + s]
                    w *= (x - xs) / (xt - xs)
                np.add.at(fused[m], base + pos - 1 + t, (weighted_inv * w[None, :]).T)
        self._fused_kz = fused                                         # [n_ky, n_k, n_z]
        self._inv_y = np.exp(1j * np.outer(grid.y_axis(), ky))         # [n_y, n_ky]

        self._scale = None

    def _reconstruct_raw(self, chirps: np.ndarray) -> np.ndarray:
        """chirps: [..., n_ch, n_k] monostatic beat samples -> [..., n_z, n_y]."""
        squeeze = chirps.ndim == 2
        if squeeze:
            chirps = chirps[None]
        spec = np.matmul(self._forward, np.conj(chirps))              # [..., n_ky, n_k]
        sp = np.moveaxis(spec, -2, 0)                                 # [n_ky, ..., n_k]
        ranges = np.matmul(sp, self._fused_kz)                        # [n_ky, ..., n_z]
        ranges = np.moveaxis(ranges, 0, -1)                           # [..., n_z, n_ky]
        images = np.matmul(ranges, self._inv_y.T)                     # [..., n_z, n_y]
        # The chain ran on the conjugated beat signal; conjugating back gives
        # pixel phases that advance as +4 pi v T / lambda0 per frame for a
        # receding target, the convention the Doppler stage expects.
        images = np.conj(images)
        return images[0] if squeeze else images

    @property
    def scale(self) -> float:
        if self._scale is None:
            center_y, center_z = self.grid.center
            frame = simulate_beat([PointTarget(center_y, center_z, 1.0)],
                                  self.config, self.geometry)
            chirp = compensate_multistatic(frame).chirp(0)
            peak = float(np.abs(self._reconstruct_raw(chirp[None])).max())
            if peak == 0:
                raise RuntimeError("calibration target produced an empty image")
            self._scale = 1.0 / peak
        return self._scale

    def reconstruct(self, frame: BeatFrame, chirp: int = 0) -> RadarImage:
        """Image one chirp of a compensated frame."""
        if frame.layout != MONOSTATIC:
            raise ValueError("frame must be monostatic-compensated before imaging")
        pixels = self._reconstruct_raw(frame.chirp(chirp)[None])[0] * self.scale
        return RadarImage(pixels=pixels, grid=self.grid,
                          time=frame.time + chirp * frame.config.pri)

    def reconstruct_batch(self, chirps: np.ndarray, chunk: int = 32) -> np.ndarray:
        """Vectorized imaging of stacked chirps [n_frames, n_ch, n_k].

        Frames are processed in chunks; larger blocks only grow the transform
        temporaries past cache with no throughput gain.
        """
        scale = self.scale
        out = np.empty((chirps.shape[0], self.grid.n_z, self.grid.n_y),
                       dtype=np.complex128)
        for start in range(0, chirps.shape[0], chunk):
            stop = min(start + chunk, chirps.shape[0])
            out[start:stop] = self._reconstruct_raw(chirps[start:stop]) * scale
        return out

    def reconstruct_chirps(self, frame: BeatFrame) -> list[RadarImage]:
        """One image per chirp of the frame, timestamped at the PRI spacing."""
        if frame.layout != MONOSTATIC:
            raise ValueError("frame must be monostatic-compensated before imaging")
        stack = self.reconstruct_batch(np.moveaxis(frame.data, 2, 0))
        return [RadarImage(pixels=stack[i], grid=self.grid,
                           time=frame.time + i * frame.config.pri)
                for i in range(stack.shape[0])]


_imager_cache: dict = {}


def get_imager(config: ChirpConfig, geometry: ArrayGeometry, grid: RoiGrid,
               stolt_oversample: int = 4) -> RangeMigrationImager:
    key = (config, geometry, grid, stolt_oversample)
    imager = _imager_cache.get(key)
    if imager is None:
        imager = RangeMigrationImager(config, geometry, grid, stolt_oversample)
        _imager_cache[key] = imager
    return imager


def rma_reconstruct(frame: BeatFrame, grid: RoiGrid, chirp: int = 0) -> RadarImage:
    """Range-migration image of one chirp (operator cached per configuration)."""
    return get_imager(frame.config, frame.geometry, grid).reconstruct(frame, chirp)


class ImageRing:
    """Fixed-capacity chronological buffer of complex radar images."""

    def __init__(self, capacity: int = 16):
        if capacity < 2:
            raise ValueError("ring capacity must be >= 2")
        self.capacity = capacity
        self._images: list[RadarImage] = []

    def push(self, image: RadarImage) -> None:
        self._images.append(image)
        if len(self._images) > self.capacity:
            self._images.pop(0)

    def __len__(self) -> int:
        return len(self._images)

    @property
    def full(self) -> bool:
        return len(self._images) == self.capacity

    def clear(self) -> None:
        self._images.clear()

    @property
    def grid(self) -> RoiGrid:
        if not self._images:
            raise ValueError("ring is empty")
        return self._images[-1].grid

    def times(self) -> np.ndarray:
        return np.array([im.time for im in self._images])

    def column_stack(self, col: int) -> np.ndarray:
        """[n_buffered, n_z] column col of every buffered image, oldest first."""
        return np.stack([im.pixels[:, col] for im in self._images])


class DopplerEstimate(NamedTuple):
    velocity: float
    spectrum: np.ndarray
    velocities: np.ndarray


def doppler_velocity(ring: ImageRing, y_est: float, config: ChirpConfig) -> DopplerEstimate:
    """Radial velocity from the phase progression of the image column nearest
    y_est across the buffered images.

    FFT across the buffer index, shifted so bin 0 maps to -lambda0/(4 T_eff);
    per velocity bin the squared magnitudes are integrated over z (video pulse
    integration, returned as the square root of the integral) and the argmax
    bin is mapped to velocity.  T_eff is the mean inter-frame interval.
    """
    if not ring.full:
        raise ValueError("image ring must be full before Doppler estimation")
    grid = ring.grid
    if not (grid.y_min <= y_est <= grid.y_max):
        raise ValueError(f"y estimate {y_est!r} outside the imaged ROI")
    col = int(round((y_est - grid.y_min) / grid.cell_y))
    col = min(max(col, 0), grid.n_y - 1)

    times = ring.times()
    t_eff = float(np.mean(np.diff(times)))
    if t_eff <= 0:
        raise ValueError("ring frame times must be strictly increasing")

    stack = ring.column_stack(col)                       # [n, n_z]
    spec = np.fft.fftshift(np.fft.fft(stack, axis=0), axes=0)
    integrated = np.sqrt(np.sum(np.abs(spec) ** 2, axis=1) * grid.cell_z)

    n = stack.shape[0]
    bin_width = config.start_wavelength / (2.0 * n * t_eff)
    velocities = (np.arange(n) - n // 2) * bin_width
    best = int(np.argmax(integrated))
    return DopplerEstimate(float(velocities[best]), integrated, velocities)


def export_png(image: RadarImage, path) -> None:
    """Debug export: magnitude as an 8-bit grayscale PNG, row 0 = z_min."""
    from PIL import Image as PilImage
    mag = image.magnitude()
    peak = mag.max()
    norm = mag / peak if peak > 0 else mag
    PilImage.fromarray((norm * 255.0).astype(np.uint8), mode="L").save(path)
