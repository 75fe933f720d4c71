import math

import numpy as np
import pytest

import reference as ref
from handwave import RoiGrid
from handwave.enhancer import (ConvLayer, FcnnModel, LabelParams, TrainSet,
                               TrainingDiverged, build_dataset, fcnn_forward,
                               fcnn_train, hifi_lattice, make_label,
                               mse_and_grad)
from handwave.signal import GaussianNoiseSource


# ---------------------------------------------------------------------------
# labels

def test_label_center_on_grid_point_is_one(grid):
    y0 = grid.y_axis()[20]
    z0 = grid.z_axis()[40]
    label = make_label(y0, z0, grid)
    assert label.pixels[40, 20] == pytest.approx(1.0)
    assert label.pixels.max() == pytest.approx(1.0)


def test_label_falls_to_inverse_e_at_sigma(grid):
    # place the center on a grid point and pick sigma as a whole cell count
    y0 = grid.y_axis()[20]
    z0 = grid.z_axis()[40]
    sigma_y = 4 * grid.cell_y
    label = make_label(y0, z0, grid, LabelParams(sigma_y=sigma_y, sigma_z=0.01))
    assert label.pixels[40, 24] == pytest.approx(math.exp(-1.0), rel=1e-9)


def test_label_three_db_width(grid):
    # the half-power (amplitude 1/sqrt 2) full width is 1.18 sigma
    fine = RoiGrid(y_min=-0.1, y_max=0.1, z_min=0.1, z_max=0.5,
                   n_y=4001, n_z=11)
    sigma = 0.01
    label = make_label(0.0, 0.3, fine, LabelParams(sigma_y=sigma, sigma_z=0.05))
    row = label.pixels[5]
    above = np.flatnonzero(row >= 1 / math.sqrt(2))
    width = (above[-1] - above[0]) * fine.cell_y
    assert width == pytest.approx(1.1774 * sigma, rel=0.01)


def test_label_bounds_and_argmax_nearest_cell(grid, rng):
    for _ in range(20):
        y0 = float(rng.uniform(grid.y_min, grid.y_max))
        z0 = float(rng.uniform(grid.z_min, grid.z_max))
        label = make_label(y0, z0, grid)
        assert label.pixels.max() == pytest.approx(1.0)
        # mathematically (0, 1]; distant pixels underflow float64 to +0
        assert np.all(label.pixels >= 0)
        assert np.all(label.pixels <= 1.0)
        r, c = np.unravel_index(np.argmax(label.pixels), label.pixels.shape)
        assert (r, c) == grid.nearest_cell(y0, z0)


def test_label_outside_roi_rejected(grid):
    with pytest.raises(ValueError):
        make_label(0.3, 0.3, grid)
    with pytest.raises(ValueError):
        make_label(0.0, 0.05, grid)


# ---------------------------------------------------------------------------
# model mechanics

def test_forward_preserves_shape(rng):
    model = FcnnModel.build(seed=0)
    for h, w in ((64, 64), (32, 48)):
        x = rng.normal(size=(2, h, w)).astype(np.float32)
        assert model.forward(x).shape == (2, h, w)


def test_zero_input_zero_bias_gives_zero_output():
    model = FcnnModel.build(seed=0)
    x = np.zeros((1, 16, 16), dtype=np.float32)
    assert np.allclose(model.forward(x), 0.0)


def test_identity_center_tap_relu_chain():
    # center-tap kernels pass the input through a plain ReLU chain
    layers = []
    for k, relu in ((3, True), (3, True), (3, False)):
        w = np.zeros((1, 1, k, k), dtype=np.float64)
        w[0, 0, k // 2, k // 2] = 1.0
        layers.append(ConvLayer(w, np.zeros(1), relu=relu))
    model = FcnnModel(layers)
    x = np.array([[[-1.0, 0.5], [2.0, -0.25]]])
    out = model.forward(x)
    assert np.allclose(out, np.maximum(x, 0.0))


def test_gradients_match_finite_differences(rng):
    for trial in range(3):
        model = FcnnModel.build(kernel_sizes=(5, 3, 3), channels=(3, 2),
                                seed=trial, dtype=np.float64)
        x = rng.normal(size=(2, 8, 8))
        y = rng.normal(size=(2, 8, 8))
        loss, grads = mse_and_grad(model, x, y)

        def loss_fn():
            return float(np.mean((model.forward(x) - y) ** 2))

        fd = ref.finite_difference_gradients(loss_fn, list(model.parameters()),
                                             step=1e-6)
        for got, want in zip(grads, fd):
            rel = np.abs(got - want) / np.maximum(np.abs(got) + np.abs(want), 1e-8)
            assert rel.max() < 1e-4


def test_fast_path_matches_reference_path(rng, monkeypatch):
    from handwave import _fastconv
    if not _fastconv.AVAILABLE:
        pytest.skip("numba unavailable")
    model = FcnnModel.build(seed=5)
    x = rng.normal(size=(3, 32, 32)).astype(np.float32)
    fast = model.forward(x)
    monkeypatch.setattr(_fastconv, "AVAILABLE", False)
    slow = model.forward(x)
    assert np.allclose(fast, slow, rtol=1e-4, atol=1e-5)


def test_training_memorizes_single_pair(chirp, geometry):
    small = RoiGrid(n_y=16, n_z=16)
    ts = build_dataset(1, 0, small, chirp, geometry,
                       noise_scale_range=(0.0, 0.0), p_range=(1.0, 1.0), seed=3)
    model = FcnnModel.build(kernel_sizes=(5, 3, 3), channels=(8, 8), seed=1)
    rates = [5e-3] * 120 + [1e-3] * 80
    model, losses = fcnn_train(model, ts, epochs=len(rates), lr=rates,
                               batch_size=1, seed=2)
    assert losses[-1] < 0.01 * losses[0]


def test_training_determinism(grid):
    small = RoiGrid(n_y=16, n_z=16)
    rng = np.random.default_rng(3)
    feats = rng.random((8, 16, 16)).astype(np.float32)
    labs = rng.random((8, 16, 16)).astype(np.float32)
    ts = TrainSet(feats, labs, ["synthetic"] * 8, small, np.zeros((8, 2)))

    def run():
        model = FcnnModel.build(kernel_sizes=(3, 3, 3), channels=(4, 4), seed=7)
        model, losses = fcnn_train(model, ts, epochs=3, lr=1e-3, batch_size=4,
                                   seed=11)
        return [p.copy() for p in model.parameters()], losses

    p1, l1 = run()
    p2, l2 = run()
    assert l1 == l2
    for a, b in zip(p1, p2):
        assert np.array_equal(a, b)


def test_diverging_lr_raises(grid):
    small = RoiGrid(n_y=8, n_z=8)
    feats = np.full((4, 8, 8), 1e3, dtype=np.float32)
    labs = np.zeros((4, 8, 8), dtype=np.float32)
    ts = TrainSet(feats, labs, ["synthetic"] * 4, small, np.zeros((4, 2)))
    model = FcnnModel.build(kernel_sizes=(3, 3), channels=(4,), seed=0)
    with pytest.raises(TrainingDiverged):
        fcnn_train(model, ts, epochs=50, lr=1e12, batch_size=4, seed=1)


def test_fcnn_forward_wrapper_shapes(grid, rng):
    from handwave import RadarImage
    model = FcnnModel.build(seed=0)
    image = RadarImage(rng.random((64, 64)), grid)
    out = fcnn_forward(model, image)
    assert isinstance(out, RadarImage)
    assert out.pixels.shape == (64, 64)
    with pytest.raises(ValueError):
        fcnn_forward(model, rng.random((4, 4, 4)))


# ---------------------------------------------------------------------------
# dataset assembly

def test_hifi_lattice_structure():
    points = hifi_lattice()
    assert len(points) == 45
    ys = sorted({round(y, 6) for y, _ in points})
    zs = sorted({round(z, 6) for _, z in points})
    assert ys == [round(v, 6) for v in np.linspace(-0.08, 0.08, 5)]
    assert zs == [round(v, 6) for v in np.linspace(0.14, 0.46, 9)]
    assert np.allclose(np.diff(ys), 0.04)
    assert np.allclose(np.diff(zs), 0.04)


def test_build_dataset_noiseless_feature_matches_label(chirp, geometry, grid):
    ds = build_dataset(1, 0, grid, chirp, geometry,
                       noise_scale_range=(0.0, 0.0), p_range=(1.0, 1.0), seed=5)
    f_cell = np.unravel_index(np.argmax(ds.features[0]), ds.features[0].shape)
    l_cell = np.unravel_index(np.argmax(ds.labels[0]), ds.labels[0].shape)
    assert abs(f_cell[0] - l_cell[0]) <= 1
    assert abs(f_cell[1] - l_cell[1]) <= 1


def test_build_dataset_deterministic(chirp, geometry, grid):
    a = build_dataset(6, 4, grid, chirp, geometry, seed=9,
                      noise_source=GaussianNoiseSource(2.0))
    b = build_dataset(6, 4, grid, chirp, geometry, seed=9,
                      noise_source=GaussianNoiseSource(2.0))
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    assert a.provenance == b.provenance


def test_build_dataset_provenance_split(chirp, geometry, grid):
    ds = build_dataset(3, 5, grid, chirp, geometry, seed=0)
    assert ds.provenance[:3] == ["synthetic"] * 3
    assert ds.provenance[3:] == ["hifi"] * 5
    assert len(ds) == 8
    # hifi centers walk the lattice in order
    lattice = hifi_lattice()
    for i in range(5):
        assert tuple(ds.centers[3 + i]) == pytest.approx(lattice[i])


def test_build_dataset_validates_ranges(chirp, geometry, grid):
    with pytest.raises(ValueError):
        build_dataset(1, 0, grid, chirp, geometry, noise_scale_range=(3.0, 1.0))
    with pytest.raises(ValueError):
        build_dataset(-1, 0, grid, chirp, geometry)
