"""Channels, priors, and observation synthesis."""

import numpy as np
import pytest

from ibsmamp.errors import ConfigurationError
from ibsmamp.kernels import fft_operator
from ibsmamp.operators import materialize_dense
from ibsmamp.rng import generator
from ibsmamp.scenarios import (STREAM_NOISE, BernoulliGaussianPrior,
                               CirculantOperator, QpskPrior,
                               TimeVaryingChannelOperator, ber_qpsk,
                               doppler_preset_4ghz_100kmh_15khz,
                               gen_multipath_channel, gen_sensing_diagonal,
                               mse, mse_db, simulate_observation)


def circulant_dense(n, delays, gains):
    M = np.zeros((n, n), dtype=np.complex128)
    for d, g in zip(delays, gains):
        for i in range(n):
            M[i, (i - d) % n] += g
    return M


def test_doppler_preset_value():
    v, f_c, c, df = 100.0e3 / 3600.0, 4.0e9, 299792458.0, 15.0e3
    want = 2.0 * np.pi * v * f_c / c / df
    assert abs(doppler_preset_4ghz_100kmh_15khz() - want) < 1e-12
    assert abs(want - 0.155248) < 1e-4


def test_sensing_diagonal_profile_law():
    m, n, kappa = 64, 128, 10.0
    diag = gen_sensing_diagonal(m, n, kappa)
    a = diag.singulars
    assert a.shape == (m,)
    assert abs(np.sum(a * a) - n) < 1e-9
    ratios = a[:-1] / a[1:]
    assert np.allclose(ratios, kappa ** (1.0 / m), atol=1e-12)
    assert np.all(np.diff(a) < 0)
    op = diag.operator()
    assert op.shape == (m, m)
    assert np.allclose(op.weights, a)


def test_sensing_diagonal_validation():
    with pytest.raises(ConfigurationError):
        gen_sensing_diagonal(0, 8, 10.0)
    with pytest.raises(ConfigurationError):
        gen_sensing_diagonal(9, 8, 10.0)
    with pytest.raises(ConfigurationError):
        gen_sensing_diagonal(4, 8, 0.5)


def test_circulant_matches_dense_oracle():
    n = 16
    delays = np.array([0, 3, 7])
    gains = np.array([1.0 + 0.5j, -0.25, 0.1j])
    op = CirculantOperator(n, delays, gains)
    M = circulant_dense(n, delays, gains)
    assert np.max(np.abs(materialize_dense(op) - M)) < 1e-12
    rng = generator(4)
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert np.max(np.abs(op.apply_adjoint(u) - M.conj().T @ u)) < 1e-12


def test_circulant_frequency_response_diagonalizes():
    n = 8
    op = CirculantOperator(n, np.array([0, 2]), np.array([1.0, 0.5j]))
    rng = generator(5)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    via_dft = np.fft.ifft(op.freq_response * np.fft.fft(v))
    assert np.max(np.abs(op.apply(v) - via_dft)) < 1e-12


def test_circulant_solve_shifted_matches_dense_solve():
    n = 16
    op = CirculantOperator(n, np.array([0, 1, 5]), np.array([0.9, 0.3j, -0.2]))
    M = circulant_dense(n, op.delays, op.gains)
    rng = generator(6)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v_scale, sigma2 = 0.7, 0.05
    want = np.linalg.solve(v_scale * M @ M.conj().T + sigma2 * np.eye(n), z)
    assert np.max(np.abs(op.solve_shifted(v_scale, sigma2, z) - want)) < 1e-10


def test_channel_tap_validation():
    with pytest.raises(ConfigurationError):
        CirculantOperator(8, np.array([0, 0]), np.array([1.0, 1.0]))
    with pytest.raises(ConfigurationError):
        CirculantOperator(8, np.array([0, 8]), np.array([1.0, 1.0]))
    with pytest.raises(ConfigurationError):
        CirculantOperator(8, np.array([0, 1]), np.array([1.0, 0.0]))
    with pytest.raises(ConfigurationError):
        CirculantOperator(8, np.array([0, 1]), np.array([1.0]))
    with pytest.raises(ConfigurationError):
        TimeVaryingChannelOperator(8, np.array([0]), np.ones((2, 8), complex))


def test_time_varying_channel_matches_dense_oracle():
    n = 12
    delays = np.array([0, 4])
    rng = generator(7)
    tracks = rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))
    op = TimeVaryingChannelOperator(n, delays, tracks)
    M = np.zeros((n, n), dtype=np.complex128)
    for k, d in enumerate(delays):
        for i in range(n):
            M[i, (i - d) % n] += tracks[k, i]
    assert np.max(np.abs(materialize_dense(op) - M)) < 1e-12
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert np.max(np.abs(op.apply_adjoint(u) - M.conj().T @ u)) < 1e-12


def test_multipath_channel_static_draw():
    ch = gen_multipath_channel(64, 4, seed=3)
    assert isinstance(ch.operator(), CirculantOperator)
    assert ch.delays[0] == 0
    assert np.unique(ch.delays).size == 4
    assert abs(np.linalg.norm(ch.gains) - 1.0) < 1e-12
    again = gen_multipath_channel(64, 4, seed=3)
    assert np.array_equal(ch.delays, again.delays)
    assert np.array_equal(ch.gains, again.gains)
    assert not np.array_equal(ch.gains, gen_multipath_channel(64, 4, seed=4).gains)


def test_multipath_channel_doppler_drift_is_phase_only_and_bounded():
    spread = 0.2
    ch = gen_multipath_channel(64, 3, doppler_spread=spread, seed=9)
    op = ch.operator()
    assert isinstance(op, TimeVaryingChannelOperator)
    mags = np.abs(op.gain_tracks)
    assert np.max(np.abs(mags - np.abs(ch.gains)[:, None])) < 1e-12
    drift = np.angle(op.gain_tracks / ch.gains[:, None])
    assert np.max(np.abs(drift)) <= spread + 1e-12
    # Per-sample total tap power stays at the static value.
    assert np.max(np.abs((mags ** 2).sum(axis=0) - np.sum(np.abs(ch.gains) ** 2))) < 1e-12


def test_multipath_channel_validation():
    with pytest.raises(ConfigurationError):
        gen_multipath_channel(8, 0)
    with pytest.raises(ConfigurationError):
        gen_multipath_channel(8, 9)
    with pytest.raises(ConfigurationError):
        gen_multipath_channel(8, 2, doppler_spread=-0.1)


def test_bernoulli_gaussian_prior_stats():
    prior = BernoulliGaussianPrior(rho=0.1)
    assert prior.sigma_s2 == 10.0
    assert prior.power == 1.0
    s = prior.sample(200000, generator(1))
    frac = np.count_nonzero(s) / s.size
    assert abs(frac - 0.1) < 0.005
    assert abs(np.mean(np.abs(s) ** 2) - 1.0) < 0.02
    nz = s[s != 0]
    assert abs(np.mean(np.abs(nz) ** 2) - 10.0) < 0.2


def test_bernoulli_gaussian_prior_validation():
    with pytest.raises(ConfigurationError):
        BernoulliGaussianPrior(rho=0.0)
    with pytest.raises(ConfigurationError):
        BernoulliGaussianPrior(rho=1.5)
    with pytest.raises(ConfigurationError):
        BernoulliGaussianPrior(rho=0.5, sigma_s2=-1.0)


def test_qpsk_prior_constellation():
    prior = QpskPrior()
    assert prior.power == 1.0
    s = prior.sample(4096, generator(2))
    assert np.max(np.abs(np.abs(s) - 1.0)) < 1e-12
    points = set(np.round(s * np.sqrt(2.0), 6))
    assert points == {complex(a, b) for a in (-1, 1) for b in (-1, 1)}


def test_priors_expose_matching_denoisers():
    r = np.array([0.3 + 0.1j, -1.2j])
    bg = BernoulliGaussianPrior(rho=0.2)
    out = bg.denoise(r, 0.5)
    assert out.posterior_mean.shape == r.shape
    out = QpskPrior().denoise(r, 0.5)
    assert out.posterior_mean.shape == r.shape


def test_simulate_observation_noiseless_and_dims():
    n, m = 16, 8
    F = fft_operator(n)
    diag = gen_sensing_diagonal(n, n, 4.0).operator()
    s = QpskPrior().sample(n, generator(3))
    inst = simulate_observation(diag, F, s, None, seed=5)
    assert inst.noise_var == 0.0
    assert np.array_equal(inst.y, diag.apply(F.apply(s)))
    assert inst.source_dim == n
    assert inst.measure_dim == n
    with pytest.raises(ValueError):
        simulate_observation(gen_sensing_diagonal(m, n, 4.0).operator(), F, s, 20.0, 5)
    with pytest.raises(ValueError):
        simulate_observation(diag, F, s[: n - 2], 20.0, 5)


def test_simulate_observation_noise_is_seeded_and_scaled():
    n = 4096
    F = fft_operator(n)
    diag = gen_sensing_diagonal(n, n, 1.0).operator()
    s = QpskPrior().sample(n, generator(4))
    snr_db = 7.0
    a = simulate_observation(diag, F, s, snr_db, seed=6)
    b = simulate_observation(diag, F, s, snr_db, seed=6)
    c = simulate_observation(diag, F, s, snr_db, seed=7)
    assert np.array_equal(a.y, b.y)
    assert not np.array_equal(a.y, c.y)
    assert abs(a.noise_var - 10.0 ** (-snr_db / 10.0)) < 1e-15
    clean = diag.apply(F.apply(s))
    measured = np.mean(np.abs(a.y - clean) ** 2)
    assert abs(measured / a.noise_var - 1.0) < 0.1
    # The draw comes from the dedicated noise stream of the trial seed.
    rng = generator(6, STREAM_NOISE)
    want = (rng.normal(size=n) + 1j * rng.normal(size=n)) * np.sqrt(a.noise_var / 2.0)
    assert np.array_equal(a.y, clean + want)


def test_error_metrics():
    s = np.array([1.0 + 1j, -1.0 + 1j]) / np.sqrt(2.0)
    hit = s.copy()
    assert mse(hit, s) == 0.0
    assert mse_db(0.0) == float("-inf")
    assert abs(mse_db(0.01) + 20.0) < 1e-12
    off = np.array([1.0 + 1j, 1.0 + 1j]) / np.sqrt(2.0)
    assert abs(mse(off, s) - np.mean(np.abs(off - s) ** 2)) < 1e-15
    # One wrong bit out of four.
    assert ber_qpsk(off, s) == 0.25
    with pytest.raises(ValueError):
        mse(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        ber_qpsk(np.zeros(3), np.zeros(4))
