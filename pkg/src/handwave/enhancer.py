"""Image-to-image convolutional enhancer: label synthesis, dataset assembly,
from-scratch training, and inference.

The network regresses blurred, noisy reflectivity maps onto ideal narrow
Gaussian spots, which sharpens localization well past the aperture- and
bandwidth-limited resolution and suppresses clutter before the tracking
stages.  Convolutions, backpropagation, and the Adam update are implemented
directly on numpy so the gradients can be checked against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _fastconv
from .imaging import RadarImage, RoiGrid, get_imager
from .signal import (ArrayGeometry, ChirpConfig, GaussianNoiseSource,
                     PointTarget, compensate_multistatic, simulate_beat)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class LabelParams:
    """Gaussian spot widths for the regression targets (meters)."""

    sigma_y: float = 1e-3
    sigma_z: float = 1e-3

    def __post_init__(self):
        if self.sigma_y <= 0 or self.sigma_z <= 0:
            raise ValueError("label widths must be positive")


def make_label(y0: float, z0: float, grid: RoiGrid,
               params: LabelParams = LabelParams()) -> RadarImage:
    """Ideal response image: a Gaussian spot at the true target position.

    pixel(y, z) = exp(-(y-y0)^2/sy^2 - (z-z0)^2/sz^2), rescaled so the grid
    maximum is exactly 1 (off-grid centers would otherwise dim the whole spot).
    """
    if not grid.contains(y0, z0):
        raise ValueError(f"label center ({y0}, {z0}) outside the ROI")
    y = grid.y_axis()
    z = grid.z_axis()
    pix = np.exp(-((y[None, :] - y0) / params.sigma_y) ** 2
                 - ((z[:, None] - z0) / params.sigma_z) ** 2)
    pix /= pix.max()
    return RadarImage(pixels=pix, grid=grid)


# ---------------------------------------------------------------------------
# convolution layers

def _im2col(x, k):
    """x [B, C, H, W] -> [B, C*k*k, H*W] with zero same-padding.

    Built tap by tap with contiguous block copies; the strided-view gather is
    an order of magnitude slower on these shapes.
    """
    b, c, h, w = x.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((b, c, k * k, h, w), dtype=x.dtype)
    for dy in range(k):
        for dx in range(k):
            cols[:, :, dy * k + dx] = xp[:, :, dy:dy + h, dx:dx + w]
    return cols.reshape(b, c * k * k, h * w)


@dataclass
class ConvLayer:
    """Stride-1, zero-padded (shape-preserving) convolution with optional ReLU."""

    weights: np.ndarray   # [out_ch, in_ch, k, k]
    bias: np.ndarray      # [out_ch]
    relu: bool = True

    @property
    def kernel(self) -> int:
        return self.weights.shape[2]

    def _use_fast(self, x) -> bool:
        return _fastconv.AVAILABLE and x.dtype == np.float32

    def forward(self, x, cache=None):
        b, c, h, w = x.shape
        o, ci, k, _ = self.weights.shape
        if ci != c:
            raise ValueError(f"layer expects {ci} input channels, got {c}")
        if self._use_fast(x):
            out = _fastconv.conv_forward(x, self.weights, self.bias)
        else:
            cols = _im2col(x, k)                                  # [B, Ck2, HW]
            out = np.matmul(self.weights.reshape(o, -1), cols)    # [B, O, HW]
            out += self.bias[None, :, None]
            out = out.reshape(b, o, h, w)
        if self.relu:
            if cache is not None:
                cache["mask"] = out > 0
            out = np.maximum(out, 0)
        if cache is not None:
            cache["x"] = x
        return out

    def backward(self, grad_out, cache):
        """Returns (grad_in, grad_w, grad_b); im2col is recomputed from the
        cached input rather than stored (memory over a little extra time)."""
        x = cache["x"]
        b, c, h, w = x.shape
        o, _, k, _ = self.weights.shape
        if self.relu:
            grad_out = grad_out * cache["mask"]
        if self._use_fast(x):
            return _fastconv.conv_backward(x, self.weights,
                                           np.ascontiguousarray(grad_out))
        g = np.ascontiguousarray(grad_out.reshape(b, o, h * w))
        cols = _im2col(x, k)                                      # [B, Ck2, HW]
        grad_w = np.einsum("boh,bih->oi", g, cols, optimize=True)
        grad_w = grad_w.reshape(self.weights.shape)
        grad_b = grad_out.sum(axis=(0, 2, 3))
        # grad wrt input = same-pad convolution of grad_out with the spatially
        # flipped kernels, in/out channels swapped.
        w_rot = self.weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)  # [C, O, k, k]
        gcols = _im2col(grad_out, k)                                  # [B, Ok2, HW]
        grad_in = np.matmul(w_rot.reshape(c, -1), gcols)              # [B, C, HW]
        return grad_in.reshape(b, c, h, w), grad_w, grad_b


@dataclass
class FcnnModel:
    """Stack of shape-preserving conv layers; final layer linear by default."""

    layers: list

    @classmethod
    def build(cls, kernel_sizes=(9, 7, 5, 3), channels=(16, 16, 16),
              final_relu: bool = False, seed: int = 0,
              dtype=np.float32) -> "FcnnModel":
        if len(channels) != len(kernel_sizes) - 1:
            raise ValueError("need one channel width per hidden layer")
        widths = (1, *channels, 1)
        rng = np.random.default_rng(seed)
        layers = []
        for i, k in enumerate(kernel_sizes):
            if k % 2 == 0:
                raise ValueError("kernel sizes must be odd to preserve shape")
            fan_in = widths[i] * k * k
            w = rng.normal(0.0, math.sqrt(2.0 / fan_in),
                           size=(widths[i + 1], widths[i], k, k)).astype(dtype)
            b = np.zeros(widths[i + 1], dtype=dtype)
            last = i == len(kernel_sizes) - 1
            layers.append(ConvLayer(w, b, relu=final_relu if last else True))
        return cls(layers)

    @property
    def dtype(self):
        return self.layers[0].weights.dtype

    def parameters(self):
        for layer in self.layers:
            yield layer.weights
            yield layer.bias

    def forward(self, x, caches=None):
        """x: [B, H, W] (single input channel) -> [B, H, W]."""
        out = x[:, None, :, :].astype(self.dtype, copy=False)
        for layer in self.layers:
            cache = {} if caches is not None else None
            out = layer.forward(out, cache)
            if caches is not None:
                caches.append(cache)
        return out[:, 0, :, :]

    def backward(self, grad, caches):
        """grad: [B, H, W] loss gradient at the output; returns parameter grads
        in parameters() order."""
        g = grad[:, None, :, :].astype(self.dtype, copy=False)
        grads = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            g, gw, gb = self.layers[i].backward(g, caches[i])
            grads[2 * i] = gw
            grads[2 * i + 1] = gb
        return grads

    def astype(self, dtype) -> "FcnnModel":
        return FcnnModel([ConvLayer(l.weights.astype(dtype),
                                    l.bias.astype(dtype), l.relu)
                          for l in self.layers])

    def architecture(self) -> dict:
        return {
            "kernel_sizes": [l.kernel for l in self.layers],
            "channels": [int(l.weights.shape[0]) for l in self.layers[:-1]],
            "final_relu": bool(self.layers[-1].relu),
            "dtype": str(np.dtype(self.dtype)),
        }


def fcnn_forward(model: FcnnModel, image) -> np.ndarray | RadarImage:
    """Enhance one magnitude image (RadarImage or [H, W] array)."""
    if isinstance(image, RadarImage):
        mag = image.magnitude().astype(model.dtype)
        out = model.forward(mag[None])[0]
        return RadarImage(pixels=out.astype(np.float64), grid=image.grid,
                          time=image.time)
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D magnitude image")
    return model.forward(arr[None].astype(model.dtype))[0]


def fcnn_forward_batch(model: FcnnModel, images: np.ndarray,
                       chunk: int = 64) -> np.ndarray:
    """Enhance stacked magnitude images [N, H, W]."""
    out = np.empty_like(images, dtype=model.dtype)
    for start in range(0, images.shape[0], chunk):
        stop = min(start + chunk, images.shape[0])
        out[start:stop] = model.forward(images[start:stop])
    return out


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainSet:
    """Paired feature/label images with per-pair provenance."""

    features: np.ndarray     # [N, H, W] float32 magnitudes
    labels: np.ndarray       # [N, H, W] float32 in [0, 1]
    provenance: list
    grid: RoiGrid
    centers: np.ndarray      # [N, 2] true (y, z), kept for validation scoring

    def __post_init__(self):
        if self.features.shape != self.labels.shape:
            raise ValueError("features and labels must share a shape")
        if len(self.provenance) != self.features.shape[0]:
            raise ValueError("one provenance tag per pair required")

    def __len__(self):
        return self.features.shape[0]

    def subset(self, idx) -> "TrainSet":
        idx = np.asarray(idx)
        return TrainSet(self.features[idx], self.labels[idx],
                        [self.provenance[i] for i in idx], self.grid,
                        self.centers[idx])

    def split(self, val_fraction: float, seed: int = 0):
        """(train, validation) split, shuffled deterministically."""
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(self))
        n_val = int(round(val_fraction * len(self)))
        return self.subset(order[n_val:]), self.subset(order[:n_val])


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * np.square(g)
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


def mse_and_grad(model: FcnnModel, features, labels):
    """Mean-squared error over a batch and its parameter gradients."""
    caches = []
    pred = model.forward(features, caches)
    diff = pred - labels.astype(pred.dtype)
    loss = float(np.mean(diff ** 2))
    grad = (2.0 / diff.size) * diff
    return loss, model.backward(grad, caches)


def fcnn_train(model: FcnnModel, train_set: TrainSet, epochs: int = 30,
               lr=1e-3, batch_size: int = 32, seed: int = 0,
               log=None):
    """Mini-batch Adam on MSE; deterministic under seed.

    ``lr`` may be a float or a per-epoch sequence (simple step decay).
    Returns (model, per-epoch mean loss).  Raises TrainingDiverged with a
    learning-rate diagnostic if the loss goes non-finite.
    """
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    rates = np.full(epochs, lr, dtype=float) if np.isscalar(lr) \
        else np.asarray(lr, dtype=float)
    if rates.size != epochs:
        raise ValueError("need one learning rate per epoch")
    rng = np.random.default_rng(seed)
    opt = Adam(model.parameters(), lr=float(rates[0]))
    losses = []
    feats = train_set.features.astype(model.dtype, copy=False)
    labs = train_set.labels.astype(model.dtype, copy=False)
    for epoch in range(epochs):
        opt.lr = float(rates[epoch])
        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            loss, grads = mse_and_grad(model, feats[idx], labs[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"loss became non-finite in epoch {epoch}; "
                    f"learning rate {opt.lr} is too aggressive for this data")
            opt.step(grads)
            epoch_loss += loss
            n_batches += 1
        losses.append(epoch_loss / n_batches)
        if log is not None:
            log(epoch, losses[-1])
    return model, losses


# ---------------------------------------------------------------------------
# dataset assembly

HIFI_LATTICE_Y = tuple(np.linspace(-0.08, 0.08, 5))
HIFI_LATTICE_Z = tuple(np.linspace(0.14, 0.46, 9))


def hifi_lattice():
    """The 45 fixed (y, z) training locations: 5 cross-range x 9 range."""
    return [(y, z) for z in HIFI_LATTICE_Z for y in HIFI_LATTICE_Y]


def _extended_target(center_y, center_z, reflectivity, rng, radius=0.02):
    """Cluster of 3-5 scatterers inside a disc, standing in for a hand."""
    count = int(rng.integers(3, 6))
    targets = []
    for _ in range(count):
        r = radius * math.sqrt(rng.uniform())
        ang = rng.uniform(0.0, 2.0 * math.pi)
        targets.append(PointTarget(center_y + r * math.cos(ang),
                                   max(center_z + r * math.sin(ang), 1e-3),
                                   reflectivity / count))
    return targets


def build_dataset(n_synthetic: int, n_hifi: int, grid: RoiGrid,
                  config: ChirpConfig, geometry: ArrayGeometry,
                  noise_scale_range=(1.0, 3.0), p_range=(0.5, 1.0),
                  seed: int = 0, label_params: LabelParams = LabelParams(),
                  noise_source=None) -> TrainSet:
    """Simulated training corpus.

    Synthetic pairs: single point targets at uniform-random ROI positions.
    Hi-fi pairs: extended targets (scatterer clusters) cycling through the 45
    fixed lattice locations, standing in for recorded hand captures.  Every
    feature runs through the full simulate -> compensate -> reconstruct chain;
    labels are ideal Gaussian spots at the true centers.
    """
    if n_synthetic < 0 or n_hifi < 0:
        raise ValueError("pair counts must be >= 0")
    alpha_lo, alpha_hi = noise_scale_range
    p_lo, p_hi = p_range
    if alpha_lo > alpha_hi or p_lo > p_hi:
        raise ValueError("ranges must be ordered")
    rng = np.random.default_rng(seed)
    source = noise_source if noise_source is not None else GaussianNoiseSource()
    frame_config = replace(config, n_chirps=1)
    imager = get_imager(frame_config, geometry, grid)

    scenes = []
    provenance = []
    for _ in range(n_synthetic):
        y = rng.uniform(grid.y_min, grid.y_max)
        z = rng.uniform(grid.z_min, grid.z_max)
        p = rng.uniform(p_lo, p_hi)
        scenes.append(((y, z), [PointTarget(y, z, p)]))
        provenance.append("synthetic")
    lattice = hifi_lattice()
    for i in range(n_hifi):
        y, z = lattice[i % len(lattice)]
        p = rng.uniform(p_lo, p_hi)
        scenes.append(((y, z), _extended_target(y, z, p, rng)))
        provenance.append("hifi")

    n = len(scenes)
    chirps = np.empty((n, geometry.n_channels, frame_config.n_samples),
                      dtype=np.complex128)
    centers = np.empty((n, 2))
    labels = np.empty((n, grid.n_z, grid.n_y), dtype=np.float32)
    for i, ((y, z), targets) in enumerate(scenes):
        alpha = rng.uniform(alpha_lo, alpha_hi)
        frame = simulate_beat(targets, frame_config, geometry,
                              noise_scale=alpha, noise_source=source, rng=rng)
        chirps[i] = compensate_multistatic(frame).chirp(0)
        centers[i] = (y, z)
        labels[i] = make_label(y, z, grid, label_params).pixels

    features = np.abs(imager.reconstruct_batch(chirps)).astype(np.float32)
    return TrainSet(features, labels, provenance, grid, centers)
