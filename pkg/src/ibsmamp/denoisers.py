"""Separable MMSE denoisers for the supported source priors.

Each denoiser sees r = s + CN(0, v) componentwise and returns the
posterior mean together with two scalar summaries: the per-coordinate
average posterior variance and the average derivative of the mean with
respect to the observation (the divergence used by orthogonalization).
For both priors the exact identity divergence = posterior_var / v holds,
which the tests assert.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EXP_CLIP = 700.0


@dataclass(frozen=True)
class DenoiserResult:
    posterior_mean: np.ndarray = field(repr=False)
    posterior_var: float
    divergence: float


def _check_inputs(r: np.ndarray, v: float) -> np.ndarray:
    if v <= 0.0 or not np.isfinite(v):
        raise ValueError(f"noise variance must be positive and finite, got {v}")
    r = np.asarray(r)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("observation must be a non-empty 1-d array")
    return r.astype(np.complex128, copy=False)


def denoise_bernoulli_gaussian(r: np.ndarray, v: float, rho: float,
                               sigma_s2: float) -> DenoiserResult:
    """Posterior mean/variance for s ~ rho CN(0, sigma_s2) + (1 - rho) delta_0.

    The support posterior is pi(r) = 1 / (1 + ((1 - rho) / rho)
    * ((sigma_s2 + v) / v) * exp(-|r|^2 sigma_s2 / (v (sigma_s2 + v)))),
    the mean pi(r) * sigma_s2 / (sigma_s2 + v) * r.
    """
    r = _check_inputs(r, v)
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if sigma_s2 <= 0.0:
        raise ValueError(f"sigma_s2 must be positive, got {sigma_s2}")
    c = sigma_s2 / (sigma_s2 + v)
    beta = c / v
    abs2 = np.abs(r) ** 2
    if rho < 1.0:
        log_odds = np.log((1.0 - rho) / rho) + np.log((sigma_s2 + v) / v) - beta * abs2
        pi = 1.0 / (1.0 + np.exp(np.minimum(log_odds, _EXP_CLIP)))
    else:
        pi = np.ones_like(abs2)
    mean = pi * c * r
    var_per_coord = pi * c * v + pi * (1.0 - pi) * c * c * abs2
    divergence = float(np.mean(c * pi + beta * abs2 * c * pi * (1.0 - pi)))
    return DenoiserResult(posterior_mean=mean,
                          posterior_var=float(np.mean(var_per_coord)),
                          divergence=divergence)


def denoise_qpsk(r: np.ndarray, v: float) -> DenoiserResult:
    """Posterior mean/variance for Gray-mapped QPSK, s in (+-1 +-1j)/sqrt(2).

    Real and imaginary components decouple into binary detections over
    +-1/sqrt(2) in noise of variance v/2, giving the tanh rule
    E[s_re | r] = tanh(sqrt(2) Re(r) / v) / sqrt(2) and likewise for the
    imaginary part.
    """
    r = _check_inputs(r, v)
    b = 1.0 / np.sqrt(2.0)
    t_re = np.tanh(np.sqrt(2.0) * r.real / v)
    t_im = np.tanh(np.sqrt(2.0) * r.imag / v)
    mean = b * (t_re + 1j * t_im)
    var_per_coord = 1.0 - np.abs(mean) ** 2
    return DenoiserResult(posterior_mean=mean,
                          posterior_var=float(np.mean(var_per_coord)),
                          divergence=float(np.mean(var_per_coord)) / v)
