"""Measurement scenarios: sensing diagonals, multipath channels, sources.

A scenario supplies the measurement operator A, the source prior, and the
observation y = A Xi s + noise.  Two families are covered:

* compressed sensing: A is a square diagonal of geometrically decaying
  singulars with condition control kappa;
* multicarrier transmission: A is a p-tap cyclic multipath channel,
  circulant when static, and banded-with-phase-drift when a Doppler
  spread is set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .operators import DiagonalOperator, LinearOperator, _freeze
from .rng import generator

# Per-trial stream tags: one Philox seed, disjoint streams per role.
STREAM_CHANNEL = 1
STREAM_SOURCE = 2
STREAM_NOISE = 3
STREAM_DOPPLER = 4

_DOPPLER_SINUSOIDS = 8


def doppler_preset_4ghz_100kmh_15khz() -> float:
    """Phase excursion (radians per block) for a 4 GHz carrier at 100 km/h
    with 15 kHz subcarrier spacing: 2 pi * (v f_c / c) / delta_f."""
    v = 100.0e3 / 3600.0
    f_c = 4.0e9
    c = 299792458.0
    delta_f = 15.0e3
    return 2.0 * np.pi * (v * f_c / c) / delta_f


@dataclass(frozen=True)
class SensingDiagonal:
    """Geometric singular-value profile: alpha_i / alpha_{i+1} = kappa**(1/m),
    scaled so that sum(alpha**2) = n."""

    m: int
    n: int
    kappa: float
    singulars: np.ndarray = field(repr=False)

    def operator(self) -> DiagonalOperator:
        return DiagonalOperator(self.singulars)


def gen_sensing_diagonal(m: int, n: int, kappa: float) -> SensingDiagonal:
    if m < 1 or n < m:
        raise ConfigurationError(f"need 1 <= m <= n, got m={m}, n={n}")
    if kappa < 1.0:
        raise ConfigurationError(f"kappa must be >= 1, got {kappa}")
    decay = kappa ** (-np.arange(m) / m)
    alphas = decay * np.sqrt(n / np.sum(decay * decay))
    alphas.setflags(write=False)
    return SensingDiagonal(m=m, n=n, kappa=float(kappa), singulars=alphas)


class CirculantOperator(LinearOperator):
    """Static cyclic multipath channel: (A x)[i] = sum_k g_k x[(i - d_k) mod n].

    Diagonalized by the DFT; ``freq_response`` holds the eigenvalues of A,
    so AA^H has eigenvalues |freq_response|**2 exactly.
    """

    __slots__ = ("delays", "gains", "freq_response", "taps_per_row")

    def __init__(self, n: int, delays: np.ndarray, gains: np.ndarray):
        delays = np.asarray(delays, dtype=np.int64)
        gains = np.asarray(gains, dtype=np.complex128)
        _check_taps(n, delays, gains)
        kernel = np.zeros(n, dtype=np.complex128)
        kernel[delays] = gains
        freq = np.fft.fft(kernel)
        for arr in (delays, gains, freq):
            arr.setflags(write=False)
        super().__init__(n, n, self._forward, self._adjoint)
        _freeze(self, delays=delays, gains=gains, freq_response=freq,
                taps_per_row=int(delays.size))

    def _forward(self, v):
        out = np.zeros_like(v, dtype=np.complex128)
        for d, g in zip(self.delays, self.gains):
            out += g * np.roll(v, d)
        return out

    def _adjoint(self, v):
        out = np.zeros_like(v, dtype=np.complex128)
        for d, g in zip(self.delays, self.gains):
            out += np.conj(g) * np.roll(v, -d)
        return out

    def solve_shifted(self, v_scale: float, sigma2: float, z: np.ndarray) -> np.ndarray:
        """(v_scale * A A^H + sigma2 I)^{-1} z via the DFT eigenbasis."""
        gain = v_scale * np.abs(self.freq_response) ** 2 + sigma2
        return np.fft.ifft(np.fft.fft(z) / gain)


class TimeVaryingChannelOperator(LinearOperator):
    """Cyclic multipath channel whose tap gains drift per output sample."""

    __slots__ = ("delays", "gain_tracks", "taps_per_row")

    def __init__(self, n: int, delays: np.ndarray, gain_tracks: np.ndarray):
        delays = np.asarray(delays, dtype=np.int64)
        gain_tracks = np.asarray(gain_tracks, dtype=np.complex128)
        if gain_tracks.shape != (delays.size, n):
            raise ConfigurationError(
                f"gain tracks must have shape ({delays.size}, {n}), got {gain_tracks.shape}")
        _check_taps(n, delays, gain_tracks[:, 0])
        for arr in (delays, gain_tracks):
            arr.setflags(write=False)
        super().__init__(n, n, self._forward, self._adjoint)
        _freeze(self, delays=delays, gain_tracks=gain_tracks, taps_per_row=int(delays.size))

    def _forward(self, v):
        out = np.zeros_like(v, dtype=np.complex128)
        for d, track in zip(self.delays, self.gain_tracks):
            out += track * np.roll(v, d)
        return out

    def _adjoint(self, v):
        out = np.zeros_like(v, dtype=np.complex128)
        for d, track in zip(self.delays, self.gain_tracks):
            out += np.roll(np.conj(track) * v, -d)
        return out


def _check_taps(n, delays, gains):
    if delays.ndim != 1 or delays.size == 0:
        raise ConfigurationError("channel needs at least one tap")
    if np.unique(delays).size != delays.size:
        raise ConfigurationError("tap delays must be distinct")
    if delays.min() < 0 or delays.max() >= n:
        raise ConfigurationError(f"tap delays must lie in [0, {n})")
    if gains.shape != delays.shape:
        raise ConfigurationError("need one gain per delay")
    if np.any(np.abs(gains) == 0):
        raise ConfigurationError("tap gains must be non-zero")


@dataclass(frozen=True)
class MultipathChannel:
    """Tap-domain description of one channel draw."""

    n: int
    delays: np.ndarray = field(repr=False)
    gains: np.ndarray = field(repr=False)
    doppler_spread: float = 0.0
    seed: int = 0

    def operator(self) -> LinearOperator:
        if self.doppler_spread == 0.0:
            return CirculantOperator(self.n, self.delays, self.gains)
        rng = generator(self.seed, STREAM_DOPPLER)
        i = np.arange(self.n)
        freqs = rng.uniform(0.25, 1.0, size=(self.gains.size, _DOPPLER_SINUSOIDS))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(self.gains.size, _DOPPLER_SINUSOIDS))
        # |phase drift| <= doppler_spread: mean of unit sinusoids scaled by the spread.
        drift = self.doppler_spread * np.mean(
            np.sin(2.0 * np.pi * freqs[:, :, None] * i[None, None, :] / self.n
                   + phases[:, :, None]), axis=1)
        tracks = self.gains[:, None] * np.exp(1j * drift)
        return TimeVaryingChannelOperator(self.n, self.delays, tracks)


def gen_multipath_channel(n: int, p: int, doppler_spread: float = 0.0,
                          seed: int = 0) -> MultipathChannel:
    """Draw a p-tap channel: delay 0 plus p-1 distinct random delays,
    i.i.d. complex Gaussian gains normalized to unit total power."""
    if not 1 <= p <= n:
        raise ConfigurationError(f"need 1 <= p <= n, got p={p}, n={n}")
    if doppler_spread < 0:
        raise ConfigurationError(f"doppler_spread must be >= 0, got {doppler_spread}")
    rng = generator(seed, STREAM_CHANNEL)
    if p > 1:
        extra = rng.choice(n - 1, size=p - 1, replace=False) + 1
        delays = np.concatenate([[0], np.sort(extra)])
    else:
        delays = np.zeros(1, dtype=np.int64)
    gains = rng.normal(size=p) + 1j * rng.normal(size=p)
    gains /= np.linalg.norm(gains)
    return MultipathChannel(n=n, delays=delays.astype(np.int64), gains=gains,
                            doppler_spread=float(doppler_spread), seed=seed)


class BernoulliGaussianPrior:
    """Sparse source: each entry is CN(0, sigma_s2) w.p. rho, else zero.

    The default keeps unit per-entry power (rho * sigma_s2 = 1).
    """

    kind = "bernoulli-gaussian"
    supports_ber = False

    def __init__(self, rho: float = 0.1, sigma_s2: float | None = None):
        if not 0.0 < rho <= 1.0:
            raise ConfigurationError(f"rho must lie in (0, 1], got {rho}")
        if sigma_s2 is None:
            sigma_s2 = 1.0 / rho
        if sigma_s2 <= 0:
            raise ConfigurationError(f"sigma_s2 must be positive, got {sigma_s2}")
        self.rho = float(rho)
        self.sigma_s2 = float(sigma_s2)

    @property
    def power(self) -> float:
        return self.rho * self.sigma_s2

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        mask = rng.random(n) < self.rho
        vals = (rng.normal(size=n) + 1j * rng.normal(size=n)) * np.sqrt(self.sigma_s2 / 2.0)
        return np.where(mask, vals, 0.0).astype(np.complex128)

    def denoise(self, r: np.ndarray, v: float):
        from .denoisers import denoise_bernoulli_gaussian
        return denoise_bernoulli_gaussian(r, v, self.rho, self.sigma_s2)

    def __repr__(self):
        return f"BernoulliGaussianPrior(rho={self.rho}, sigma_s2={self.sigma_s2})"


class QpskPrior:
    """Unit-power QPSK: entries uniform over (+-1 +-1j)/sqrt(2), Gray mapped."""

    kind = "qpsk"
    supports_ber = True

    @property
    def power(self) -> float:
        return 1.0

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        bits = rng.integers(0, 2, size=(2, n))
        return ((2.0 * bits[0] - 1.0) + 1j * (2.0 * bits[1] - 1.0)) / np.sqrt(2.0)

    def denoise(self, r: np.ndarray, v: float):
        from .denoisers import denoise_qpsk
        return denoise_qpsk(r, v)

    def __repr__(self):
        return "QpskPrior()"


@dataclass(frozen=True)
class SystemInstance:
    """One simulated observation y = A Xi s + noise with its ground truth."""

    A: LinearOperator
    Xi: LinearOperator
    s_true: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    noise_var: float
    seed: int

    @property
    def source_dim(self) -> int:
        return self.Xi.cols

    @property
    def measure_dim(self) -> int:
        return self.A.rows


def simulate_observation(A: LinearOperator, Xi: LinearOperator, s: np.ndarray,
                         snr_db: float | None, seed: int) -> SystemInstance:
    """Push s through Xi and A and add circular complex noise at the given SNR.

    snr_db = None means noiseless.  The noise draw depends only on
    (seed, STREAM_NOISE), so a fixed seed reproduces y bit-for-bit.
    """
    if A.cols != Xi.rows:
        raise ValueError(f"A expects length {A.cols}, transform produces {Xi.rows}")
    if s.shape[0] != Xi.cols:
        raise ValueError(f"source length {s.shape[0]} != transform cols {Xi.cols}")
    noise_var = 0.0 if snr_db is None else 10.0 ** (-snr_db / 10.0)
    y = A.apply(Xi.apply(s))
    if noise_var > 0.0:
        rng = generator(seed, STREAM_NOISE)
        y = y + (rng.normal(size=y.size) + 1j * rng.normal(size=y.size)) \
            * np.sqrt(noise_var / 2.0)
    return SystemInstance(A=A, Xi=Xi, s_true=np.asarray(s, dtype=np.complex128),
                          y=y, noise_var=noise_var, seed=seed)


def mse(s_hat: np.ndarray, s_true: np.ndarray) -> float:
    """Per-entry mean squared error |s_hat - s_true|^2."""
    if s_hat.shape != s_true.shape:
        raise ValueError(f"shape mismatch: {s_hat.shape} vs {s_true.shape}")
    return float(np.mean(np.abs(s_hat - s_true) ** 2))


def mse_db(value: float) -> float:
    return float(10.0 * np.log10(value)) if value > 0.0 else float("-inf")


def ber_qpsk(s_hat: np.ndarray, s_true: np.ndarray) -> float:
    """Bit error rate of component-wise hard decisions (2 bits per symbol)."""
    if s_hat.shape != s_true.shape:
        raise ValueError(f"shape mismatch: {s_hat.shape} vs {s_true.shape}")
    re_err = np.signbit(s_hat.real) != np.signbit(s_true.real)
    im_err = np.signbit(s_hat.imag) != np.signbit(s_true.imag)
    return float((np.count_nonzero(re_err) + np.count_nonzero(im_err)) / (2.0 * s_true.size))
