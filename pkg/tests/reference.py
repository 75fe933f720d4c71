"""Independent reference implementations used as test oracles.

Everything here is deliberately written the slow, obvious way (scalar loops and
direct summation) and never calls the library's own processing path for the
quantity it checks.
"""

import cmath
import math

import numpy as np

C = 3.0e8


def beat_sample(target_y, target_z, reflectivity, velocity, tx, rx,
                f0, slope, adc_rate, pri, n_k, n_c):
    """One beat sample, straight from the two-way path-length model."""
    r_t = math.sqrt((target_y - tx) ** 2 + target_z ** 2)
    r_r = math.sqrt((target_y - rx) ** 2 + target_z ** 2)
    k0 = 2 * math.pi * f0 / C
    dk = 2 * math.pi * slope / (C * adc_rate)
    lambda0 = C / f0
    phase = (k0 + dk * n_k) * (r_t + r_r) + (4 * math.pi * velocity * pri / lambda0) * n_c
    return (reflectivity / (r_t * r_r)) * cmath.exp(1j * phase)


def beat_frame(targets, config, geometry):
    """Noiseless multistatic frame via the scalar sample model above.

    targets: iterable of (y, z, p, v) tuples.
    """
    n_ch = geometry.n_channels
    out = np.zeros((n_ch, config.n_samples, config.n_chirps), dtype=complex)
    for ch, (tx, rx) in enumerate(geometry.pairs()):
        for nk in range(config.n_samples):
            for nc in range(config.n_chirps):
                acc = 0j
                for (y, z, p, v) in targets:
                    acc += beat_sample(y, z, p, v, tx, rx, config.start_freq,
                                       config.slope, config.adc_rate, config.pri,
                                       nk, nc)
                out[ch, nk, nc] = acc
    return out


def backprojection(chirp_samples, virtual_y, config, grid):
    """Matched-filter image: per pixel, coherently sum s(y', k) e^{-j 2 k R}.

    chirp_samples: [n_ch, n_k] monostatic beat samples ordered like virtual_y.
    Returns a [n_z, n_y] complex image (unnormalized).
    """
    k = config.start_wavenumber + config.wavenumber_step * np.arange(config.n_samples)
    y_axis = grid.y_axis()
    z_axis = grid.z_axis()
    image = np.zeros((grid.n_z, grid.n_y), dtype=complex)
    for i, z in enumerate(z_axis):
        # R per (pixel-y, channel): vectorized inner sum keeps this tolerable.
        r = np.sqrt((y_axis[:, None] - virtual_y[None, :]) ** 2 + z ** 2)  # [n_y, n_ch]
        kernel = np.exp(-2j * r[:, :, None] * k[None, None, :])           # [n_y, n_ch, n_k]
        image[i] = np.einsum("ck,yck->y", chirp_samples, kernel)
    return image


def normalized_cross_correlation(a, b):
    """NCC of two magnitude images."""
    a = np.abs(a).ravel()
    b = np.abs(b).ravel()
    a = a - a.mean()
    b = b - b.mean()
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(np.dot(a, b) / denom) if denom > 0 else 0.0


def dft_peak_frequency(samples, sample_interval, pad_factor=1):
    """Frequency of the largest-magnitude bin of an explicitly computed DFT."""
    n = len(samples) * pad_factor
    x = np.asarray(samples, dtype=complex)
    mags = []
    for m in range(n):
        acc = 0j
        for j, v in enumerate(x):
            acc += v * cmath.exp(-2j * math.pi * m * j / n)
        mags.append(abs(acc))
    best = int(np.argmax(mags))
    freq = best / (n * sample_interval)
    if best > n / 2:
        freq -= 1.0 / sample_interval
    return freq


def least_squares_slope(values, interval):
    """Slope of values against m*interval by the textbook normal equations."""
    m = np.arange(len(values), dtype=float)
    t = m * interval
    t_mean = t.mean()
    v_mean = np.mean(values)
    return float(np.sum((t - t_mean) * (np.asarray(values) - v_mean))
                 / np.sum((t - t_mean) ** 2))


def finite_difference_gradients(loss_fn, tensors, step=1e-6):
    """Central finite-difference gradient of loss_fn() w.r.t. every element of
    every tensor in `tensors` (mutated in place, restored afterwards)."""
    grads = []
    for tensor in tensors:
        g = np.zeros_like(tensor)
        it = np.nditer(tensor, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = tensor[idx]
            tensor[idx] = orig + step
            hi = loss_fn()
            tensor[idx] = orig - step
            lo = loss_fn()
            tensor[idx] = orig
            g[idx] = (hi - lo) / (2 * step)
            it.iternext()
        grads.append(g)
    return grads
