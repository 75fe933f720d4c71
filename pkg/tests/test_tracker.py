import math

import numpy as np
import pytest

import reference as ref
from handwave.tracker import (FilterConfig, OscillationTracker, ParticleFilter,
                              ParticleSet, doppler_weight, dpf_step,
                              init_particles, oscillation_rate, pf_step,
                              sample_velocity)

ROI = [[-0.1, 0.1], [0.1, 0.5]]


def _cfg(**kw):
    defaults = dict(roi_bounds=ROI, n_particles=64,
                    diffusion_std=(0.0, 0.0), weight_std=(0.02, 0.02))
    defaults.update(kw)
    return FilterConfig.position_tracking(**defaults)


def test_single_particle_full_gain_jumps_to_measurement(rng):
    cfg = _cfg(n_particles=1, shift_gain=(1.0, 1.0))
    s_prev = np.array([0.0, 0.3])
    particles = ParticleSet(np.array([s_prev]), np.array([1.0]))
    r = np.array([0.04, 0.35])
    out, s_new = pf_step(particles, r, s_prev, cfg, rng)
    assert np.allclose(out.states[0], r)
    assert np.allclose(s_new, r)


def test_half_gain_moves_to_midpoint(rng):
    cfg = _cfg(n_particles=1, shift_gain=(0.5, 0.5))
    s_prev = np.array([0.0, 0.3])
    particles = ParticleSet(np.array([s_prev]), np.array([1.0]))
    r = np.array([0.08, 0.42])
    _, s_new = pf_step(particles, r, s_prev, cfg, rng)
    assert np.allclose(s_new, (s_prev + r) / 2)


def test_zero_gain_leaves_particles_in_place(rng):
    cfg = _cfg(shift_gain=(0.0, 0.0))
    states = rng.uniform([-0.1, 0.1], [0.1, 0.5], size=(64, 2))
    weights = np.full(64, 1.0 / 64)
    particles = ParticleSet(states.copy(), weights)
    out, s_new = pf_step(particles, np.array([0.09, 0.49]),
                         np.array([0.0, 0.3]), cfg, rng)
    # every output particle is one of the inputs (resampled, unshifted)
    for row in out.states:
        assert np.any(np.all(np.isclose(states, row), axis=1))
    mean = out.weights @ out.states / out.weights.sum()
    assert np.allclose(s_new, mean)


def test_particle_at_previous_state_gets_unit_weight(rng):
    cfg = _cfg(n_particles=4, shift_gain=(0.0, 0.0))
    s_prev = np.array([0.02, 0.33])
    states = np.array([s_prev, s_prev + 0.01, s_prev - 0.02, s_prev + 0.05])
    particles = ParticleSet(states, np.array([1.0, 0.0, 0.0, 0.0]))
    out, _ = pf_step(particles, s_prev, s_prev, cfg, rng)
    # resampling keeps only the s_prev particle (the one with weight)
    assert np.allclose(out.states, s_prev)
    assert np.allclose(out.weights, 1.0)


def test_shift_preserves_cloud_shape(rng):
    cfg = _cfg(shift_gain=(0.7, 0.3), n_particles=16)
    states = rng.uniform([-0.05, 0.2], [0.05, 0.4], size=(16, 2))
    particles = ParticleSet(states, np.full(16, 1 / 16))
    # equal weights + systematic resampling keeps all 16 distinct particles
    cfg2 = FilterConfig.position_tracking(ROI, n_particles=16,
                                          shift_gain=(0.7, 0.3),
                                          diffusion_std=(0.0, 0.0),
                                          weight_std=(0.02, 0.02),
                                          resampler="systematic")
    out, _ = pf_step(particles, np.array([0.05, 0.25]), np.array([0.0, 0.3]),
                     cfg2, rng)
    diff_in = states[1:] - states[:-1]
    out_sorted = out.states[np.lexsort(out.states.T)]
    in_sorted = states[np.lexsort(states.T)]
    assert np.allclose(out_sorted[1:] - out_sorted[:-1],
                       in_sorted[1:] - in_sorted[:-1], atol=1e-12)


def test_estimate_stays_inside_bounds(rng):
    cfg = _cfg(shift_gain=(1.0, 1.0))
    particles = init_particles(cfg, rng)
    _, s_new = pf_step(particles, np.array([5.0, 5.0]), np.array([0.0, 0.3]),
                       cfg, rng)
    assert -0.1 <= s_new[0] <= 0.1
    assert 0.1 <= s_new[1] <= 0.5


def test_weights_stay_positive_after_flooring(rng):
    cfg = _cfg(weight_std=(1e-4, 1e-4))
    particles = init_particles(cfg, rng)
    out, _ = pf_step(particles, np.array([0.0, 0.3]), np.array([0.0, 0.3]),
                     cfg, rng)
    assert np.all(out.weights > 0)
    assert np.isfinite(out.weights.sum())


def test_weight_scale_invariance(rng):
    cfg = _cfg(shift_gain=(0.0, 0.0))
    states = rng.uniform([-0.1, 0.1], [0.1, 0.5], size=(64, 2))
    w = rng.uniform(0.1, 1.0, size=64)
    r, s_prev = np.array([0.0, 0.3]), np.array([0.0, 0.3])
    _, s_a = pf_step(ParticleSet(states, w), r, s_prev, cfg,
                     np.random.default_rng(5))
    _, s_b = pf_step(ParticleSet(states, 100.0 * w), r, s_prev, cfg,
                     np.random.default_rng(5))
    assert np.allclose(s_a, s_b)


def test_singular_weight_cov_rejected():
    with pytest.raises(ValueError):
        FilterConfig(shift_gain=np.array([0.5, 0.5]),
                     diffusion_cov=np.zeros((2, 2)),
                     weight_cov=np.zeros((2, 2)),
                     bounds=np.asarray(ROI))


def test_gain_out_of_range_rejected():
    with pytest.raises(ValueError):
        _cfg(shift_gain=(1.5, 0.5))


# ---------------------------------------------------------------------------
# sample velocity

def test_sample_velocity_exact_on_linear_data():
    v, z0, dt = 0.12, 0.3, 0.004
    zs = [z0 + v * dt * m for m in range(16)]
    assert sample_velocity(zs, dt) == pytest.approx(v, rel=1e-12)


def test_sample_velocity_zero_on_constant():
    assert sample_velocity([0.25] * 16, 0.004) == 0.0


def test_sample_velocity_cancels_symmetric_perturbation():
    # an alternating +-eps pattern mirrored about the window midpoint has zero
    # covariance with time, so the fitted slope is exactly the true velocity
    v, z0, dt, eps = -0.08, 0.4, 0.004, 0.003
    n = 16
    pattern = [eps * (-1) ** min(m, n - 1 - m) for m in range(n)]
    zs = [z0 + v * dt * m + pattern[m] for m in range(n)]
    direct = ref.least_squares_slope(zs, dt)
    assert sample_velocity(zs, dt) == pytest.approx(direct, rel=1e-12)
    assert sample_velocity(zs, dt) == pytest.approx(v, rel=1e-9)


def test_sample_velocity_needs_two_points():
    with pytest.raises(ValueError):
        sample_velocity([0.3], 0.004)


# ---------------------------------------------------------------------------
# doppler weighting

LAMBDA0 = 3e8 / 77e9
PRI = 4e-3


def test_doppler_weight_peak_at_agreement():
    assert doppler_weight(0.0, 0.5, LAMBDA0, PRI) == 0.5


def test_doppler_weight_cutoff_boundary_continuous():
    cutoff = LAMBDA0 / (4 * PRI)
    at = doppler_weight(cutoff, 0.5, LAMBDA0, PRI)
    above = doppler_weight(cutoff * 1.0000001, 0.5, LAMBDA0, PRI)
    assert at == pytest.approx(0.0, abs=1e-12)
    assert above == 0.0


def test_doppler_weight_beyond_cutoff_zero():
    cutoff = LAMBDA0 / (4 * PRI)
    assert doppler_weight(2 * cutoff, 0.5, LAMBDA0, PRI) == 0.0


def test_doppler_weight_continuity_fine_sweep():
    cutoff = LAMBDA0 / (4 * PRI)
    gaps = np.linspace(0, 1.5 * cutoff, 1001)
    vals = [doppler_weight(g, 0.5, LAMBDA0, PRI) for g in gaps]
    assert max(abs(vals[i + 1] - vals[i]) for i in range(1000)) < 0.01


def test_doppler_weight_rejects_negative_gap():
    with pytest.raises(ValueError):
        doppler_weight(-0.1, 0.5, LAMBDA0, PRI)


def test_dpf_matches_pf_when_velocities_agree(rng):
    cfg = _cfg()
    particles = init_particles(cfg, np.random.default_rng(3))
    r, s_prev = np.array([0.05, 0.35]), np.array([0.0, 0.3])
    p1, s1 = pf_step(ParticleSet(particles.states.copy(), particles.weights.copy()),
                     r, s_prev, cfg, np.random.default_rng(9))
    p2, s2, a_z = dpf_step(ParticleSet(particles.states.copy(),
                                       particles.weights.copy()),
                           r, s_prev, cfg, 0.1, 0.1, LAMBDA0, PRI,
                           np.random.default_rng(9))
    assert a_z == cfg.doppler_base_gain
    assert np.allclose(s1, s2)


def test_dpf_freezes_range_beyond_cutoff(rng):
    cfg = _cfg(n_particles=1, shift_gain=(0.5, 0.5))
    s_prev = np.array([0.0, 0.3])
    particles = ParticleSet(np.array([s_prev]), np.array([1.0]))
    r = np.array([0.06, 0.45])
    _, s_new, a_z = dpf_step(particles, r, s_prev, cfg, 0.2, -0.2,
                             LAMBDA0, PRI, rng)
    assert a_z == 0.0
    assert s_new[1] == pytest.approx(s_prev[1])     # z ignored
    assert s_new[0] == pytest.approx(0.03)          # y still tracks


def test_dpf_outlier_rejection_beats_pf():
    # single-frame range outliers contradicted by the Doppler velocity: the
    # corroborated filter tracks closer to the truth (paired seeded trials)
    wins = 0
    trials = 100
    for trial in range(trials):
        trng = np.random.default_rng(trial)
        cfg = _cfg(n_particles=128, diffusion_std=(0.001, 0.001))
        n = 300
        # slow swell: peak |dz/dt| ~0.16 m/s, inside the resolvable window
        truth_z = 0.3 + 0.03 * np.sin(np.linspace(0, 2 * math.pi, n))
        meas = truth_z + trng.normal(0, 0.004, size=n)
        outliers = trng.choice(np.arange(30, n), size=8, replace=False)
        meas[outliers] += trng.choice([-1, 1], size=8) * 0.12
        v_true = np.gradient(truth_z, PRI)

        def run(use_dpf, seed):
            prng = np.random.default_rng(seed)
            particles = init_particles(cfg, prng)
            s = np.array([0.0, meas[0]])
            errs = []
            zs = []
            for i in range(n):
                r = np.array([0.0, meas[i]])
                zs.append(meas[i])
                if len(zs) > 16:
                    zs.pop(0)
                if use_dpf and len(zs) >= 2:
                    v_s = sample_velocity(zs, PRI)
                    particles_i, s, _ = dpf_step(particles, r, s, cfg,
                                                 v_true[i], v_s, LAMBDA0, PRI,
                                                 prng)
                else:
                    particles_i, s = pf_step(particles, r, s, cfg, prng)
                particles = particles_i
                errs.append((s[1] - truth_z[i]) ** 2)
            return math.sqrt(np.mean(errs))

        if run(True, 1000 + trial) < run(False, 1000 + trial):
            wins += 1
    assert wins > trials * 0.7


# ---------------------------------------------------------------------------
# oscillation rate

def test_oscillation_rate_recovers_sine():
    # a 64-sample window at 250 Hz holds barely one 4 Hz cycle, so the
    # positive/negative lobes leak into each other; the estimate is good to
    # one bin of the analysis window (fs/64), and matches a direct DFT exactly
    fs, f = 250.0, 4.0
    t = np.arange(64) / fs
    x = 0.03 * np.sin(2 * math.pi * f * t)
    est = oscillation_rate(x, 1.0 / fs)
    assert est.detected
    assert abs(est.frequency - f) <= fs / 64
    direct = ref.dft_peak_frequency(x - x.mean(), 1.0 / fs, pad_factor=4)
    assert est.frequency == pytest.approx(abs(direct))


def test_oscillation_rate_exact_with_longer_window():
    # four cycles in the window: the padded-bin estimate is tight
    fs, f = 250.0, 4.0
    t = np.arange(256) / fs
    est = oscillation_rate(0.03 * np.sin(2 * math.pi * f * t), 1.0 / fs)
    assert est.detected
    assert abs(est.frequency - f) <= fs / (4 * 256)


def test_oscillation_amplitude_invariance():
    fs, f = 250.0, 4.0
    t = np.arange(64) / fs
    small = oscillation_rate(0.01 * np.sin(2 * math.pi * f * t), 1 / fs)
    large = oscillation_rate(0.02 * np.sin(2 * math.pi * f * t), 1 / fs)
    assert small.frequency == pytest.approx(large.frequency)


def test_oscillation_constant_input_flags_none():
    est = oscillation_rate(np.full(64, 0.02), 1 / 250.0)
    assert not est.detected
    assert est.frequency == 0.0


def test_oscillation_short_window_rejected():
    with pytest.raises(ValueError):
        oscillation_rate(np.zeros(4), 0.004)


def test_oscillation_tracker_converges():
    fs, f = 250.0, 5.0
    tracker = OscillationTracker(window=64, rng=np.random.default_rng(0))
    est = 0.0
    for i in range(400):
        t = i / fs
        est = tracker.update(t, 0.04 * math.sin(2 * math.pi * f * t))
    assert abs(est - f) < fs / 64
