"""Cross-domain iterative estimators: memory AMP and its OAMP oracle.

Both estimators alternate a linear stage that exploits the spectrum of
A A^H with a separable denoiser stage in the source domain, keeping the
two stages orthogonalized so that errors stay uncorrelated across them.

The memory linear stage (``mle_step``) runs the recursion

    gamma_t = theta_t B gamma_{t-1} + xi_t (y - A x_t),
    B = lambda_dagger I - A A^H,

and recombines the lifted output with the iterate history so the signal
gain is exactly one:

    r_t = (back(gamma_t) + sum_i p_{t,i} h_i) / eps_t,
    p_{t,i} = xi_i (prod_{j>i} theta_j) w_{t-i},   eps_t = sum_i p_{t,i}.

``back`` lifts the measurement domain to the domain the history lives in.
For a square transform this is the literal transform-domain recursion;
for a wide transform (m < n) the history is kept in the source domain and
``back = Xi^H A^H`` with the moments renormalized per source coordinate,
which is what keeps the unmeasured subspace recoverable by the prior.

The denoiser stage subtracts its input component (``nle_orthogonalize``),
and consecutive candidates are combined by inverse-covariance damping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .denoisers import DenoiserResult
from .errors import NormalizationError
from .operators import DiagonalOperator, LinearOperator, materialize_dense
from .scenarios import CirculantOperator, SystemInstance, mse, mse_db
from .spectral import SpectralProfile, gram_eigenvalues, spectral_profile

_EPS_MIN = 1e-12


@dataclass(frozen=True)
class MampConfig:
    """Iteration controls shared by the estimators."""

    max_iters: int = 32
    damping_window: int = 3
    theta_schedule: tuple[float, ...] | None = None   # default relax / lambda_dagger
    xi_schedule: tuple[float, ...] | None = None      # default all ones
    relax: float = 1.0            # scales the default theta schedule
    variance_floor: float = 1e-13
    stop_tolerance: float = 1e-12
    stall_patience: int = 3
    stall_improvement: float = 0.01
    stop_on_stall: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.damping_window < 1:
            raise ValueError(f"damping_window must be >= 1, got {self.damping_window}")
        if not 0.0 < self.relax <= 1.0:
            raise ValueError(f"relax must be in (0, 1], got {self.relax}")
        if self.variance_floor <= 0 or self.stop_tolerance <= 0:
            raise ValueError("variance_floor and stop_tolerance must be positive")
        if self.stall_patience < 1:
            raise ValueError(f"stall_patience must be >= 1, got {self.stall_patience}")


@dataclass
class CostMeter:
    """Counts operator applications so tests can audit per-iteration cost."""

    channel_applies: int = 0
    channel_points: int = 0     # sum of taps-per-row * rows over channel applies
    transform_applies: int = 0
    transform_points: int = 0   # sum of n * log2(n_s) over transform applies
    vector_points: int = 0      # elementwise passes (memory sums, denoising)


def _taps_per_row(A: LinearOperator) -> int:
    return getattr(A, "taps_per_row", 1)


def _transform_cost(Xi: LinearOperator) -> float:
    spec = getattr(Xi, "spec", None)
    n = Xi.cols
    n_s = spec.n_s if spec is not None else n
    return n * max(np.log2(n_s), 1.0)


class MampState:
    """Mutable state of the memory linear estimator.

    ``history`` holds the per-iteration estimates h_1, h_2, ... in the
    lifted domain (transform domain for square systems, source domain for
    wide ones), starting from the all-zero h_1.  ``residuals`` caches
    y - forward(h_i) for each history entry.
    """

    def __init__(self, profile: SpectralProfile, y: np.ndarray,
                 forward: Callable[[np.ndarray], np.ndarray],
                 back: Callable[[np.ndarray], np.ndarray],
                 dim: int, noise_var: float,
                 theta: Sequence[float] | None = None,
                 xi: Sequence[float] | None = None,
                 max_iters: int = 32,
                 variance_floor: float = 1e-13,
                 relax: float = 1.0):
        if profile.depth < max_iters:
            raise ValueError(
                f"spectral profile depth {profile.depth} < max_iters {max_iters}")
        self.profile = profile
        self.y = y
        self.forward = forward
        self.back = back
        self.dim = int(dim)
        self.measure_dim = int(y.shape[0])
        self.noise_var = float(noise_var)
        # Moments are renormalized to the lifted dimension so the mean
        # signal gain of r_t is exactly one in that domain.  The scaled
        # form (moments of B / lambda_dagger) keeps every entry bounded;
        # the matching lambda_dagger factor is restored in the vartheta
        # update of mle_step, leaving the products p unchanged.
        self.w = profile.w_scaled * (profile.dim / dim)
        self.trace_gram = profile.trace_gram
        self.lambda_dagger = profile.lambda_dagger
        if theta is None:
            if profile.lambda_dagger <= 0:
                raise ValueError("lambda_dagger must be positive for the default schedule")
            theta = np.full(max_iters, relax / profile.lambda_dagger)
        if xi is None:
            xi = np.ones(max_iters)
        self.theta = np.asarray(theta, dtype=np.float64)
        self.xi = np.asarray(xi, dtype=np.float64)
        if self.theta.size < max_iters or self.xi.size < max_iters:
            raise ValueError("theta/xi schedules shorter than max_iters")
        self.variance_floor = float(variance_floor)
        self.iteration = 0
        self.gamma = np.zeros(self.measure_dim, dtype=np.complex128)
        # Preallocated ring-free buffers: row i holds h_{i+1} and its
        # cached residual y - forward(h_{i+1}).  One matmul against a view
        # replaces per-iteration vstack copies in the memory sum.
        self._hist = np.zeros((max_iters + 1, dim), dtype=np.complex128)
        self._resid = np.zeros((max_iters + 1, self.measure_dim), dtype=np.complex128)
        self._resid[0] = y
        self._count = 1
        self.vartheta = np.zeros(0)
        self.meter: CostMeter | None = None

    def push(self, estimate: np.ndarray, residual: np.ndarray) -> None:
        """Record the post-damping estimate and its cached residual."""
        self._hist[self._count] = estimate
        self._resid[self._count] = residual
        self._count += 1

    def last_candidates(self, k: int) -> list[np.ndarray]:
        start = max(self._count - k, 0)
        return [self._hist[i] for i in range(start, self._count)]

    def last_residuals(self, k: int) -> list[np.ndarray]:
        start = max(self._count - k, 0)
        return [self._resid[i] for i in range(start, self._count)]

    @property
    def history(self) -> list[np.ndarray]:
        return [self._hist[i] for i in range(self._count)]

    @property
    def residuals(self) -> list[np.ndarray]:
        return [self._resid[i] for i in range(self._count)]


def mle_step(state: MampState, A: LinearOperator, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Advance the memory recursion one step and return (r_t, v_gamma).

    r_t has unit mean gain on the true signal in the lifted domain;
    v_gamma is the residual-based estimate of its per-coordinate error
    variance, floored at the configured variance floor.  Raises
    NormalizationError if the gain normalizer degenerates.
    """
    t = state.iteration + 1
    meter = state.meter
    theta_t = float(state.theta[t - 1])
    xi_t = float(state.xi[t - 1])
    resid = state._resid[state._count - 1]
    if t == 1:
        gamma = xi_t * resid
    else:
        gram = A.apply(A.apply_adjoint(state.gamma))
        if meter is not None:
            meter.channel_applies += 2
            meter.channel_points += 2 * _taps_per_row(A) * A.rows
        gamma = theta_t * (state.lambda_dagger * state.gamma - gram) + xi_t * resid
    state.gamma = gamma

    state.vartheta = np.concatenate(
        [state.vartheta * (theta_t * state.lambda_dagger), [xi_t]])
    p = state.vartheta * state.w[t - 1::-1]
    eps = float(p.sum())
    if abs(eps) < _EPS_MIN:
        raise NormalizationError(
            f"gain normalizer eps_gamma = {eps:.3e} degenerated at iteration {t}")

    lifted = state.back(A.apply_adjoint(gamma))
    if meter is not None:
        meter.channel_applies += 1
        meter.channel_points += _taps_per_row(A) * A.rows
    memory = p @ state._hist[:t]
    if meter is not None:
        meter.vector_points += t * state.dim
    r = (lifted + memory) / eps

    # state.forward is responsible for metering its own operator calls.
    fit = y - state.forward(r)
    v_gamma = (np.linalg.norm(fit) ** 2 - state.measure_dim * state.noise_var) \
        / state.trace_gram
    v_gamma = max(float(v_gamma), state.variance_floor)
    state.iteration = t
    return r, v_gamma


def nle_orthogonalize(den: DenoiserResult, r: np.ndarray, v_in: float,
                      variance_floor: float = 1e-13) -> tuple[np.ndarray, float, bool]:
    """Subtract the input component of a denoiser output.

    Returns (s_next, v_phi, stalled).  With p = posterior_var / v_in the
    orthogonalized message is (mean - p r) / (1 - p) with variance
    1 / (1 / posterior_var - 1 / v_in).  A denoiser that did not reduce
    variance (posterior_var >= v_in) passes r through unchanged and
    reports a stall.
    """
    pv = max(den.posterior_var, variance_floor)
    if pv >= v_in:
        return r.copy(), float(v_in), True
    p = pv / v_in
    s_next = (den.posterior_mean - p * r) / (1.0 - p)
    v_phi = max(pv * v_in / (v_in - pv), variance_floor)
    return s_next, float(v_phi), False


def estimate_cross_covariance(A: LinearOperator, y: np.ndarray,
                              candidates: Sequence[np.ndarray], sigma2: float,
                              trace_gram: float,
                              variance_floor: float = 1e-13) -> np.ndarray:
    """Error cross-covariance of measurement-domain candidates from their
    residuals: V_ij = (Re<y - A c_i, y - A c_j> - M sigma2) / tr(A A^H)."""
    residuals = [y - A.apply(c) for c in candidates]
    return _cross_cov_from_residuals(residuals, y.shape[0], sigma2, trace_gram,
                                     variance_floor)


def _cross_cov_from_residuals(residuals: Sequence[np.ndarray], measure_dim: int,
                              sigma2: float, trace_gram: float,
                              variance_floor: float) -> np.ndarray:
    k = len(residuals)
    V = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            val = (np.vdot(residuals[i], residuals[j]).real
                   - measure_dim * sigma2) / trace_gram
            V[i, j] = V[j, i] = val
    lam, vecs = np.linalg.eigh(V)
    V = (vecs * np.maximum(lam, 0.0)) @ vecs.T
    V[np.diag_indices(k)] = np.maximum(V.diagonal(), variance_floor)
    return V


def damping_update(candidates: Sequence[np.ndarray],
                   V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-covariance combination of candidate estimates.

    Solves for zeta = V^{-1} 1 / (1^T V^{-1} 1) on a trace-scaled
    ridge-regularized copy of V, then falls back to the best single
    candidate if the analytic weights do not beat it under the original
    V, so zeta^T V zeta never exceeds min(diag(V)).
    """
    k = len(candidates)
    if V.shape != (k, k):
        raise ValueError(f"V must be {k}x{k}, got {V.shape}")
    ones = np.ones(k)
    ridge = 1e-8 * max(np.trace(V), 0.0) / k
    try:
        raw = np.linalg.solve(V + ridge * np.eye(k), ones)
    except np.linalg.LinAlgError:
        raw = None
    best = int(np.argmin(V.diagonal()))
    zeta = None
    if raw is not None and abs(raw.sum()) > _EPS_MIN:
        zeta = raw / raw.sum()
        if zeta @ V @ zeta > V[best, best]:
            zeta = None
    if zeta is None:
        zeta = np.zeros(k)
        zeta[best] = 1.0
    combined = np.tensordot(zeta, np.vstack(candidates), axes=1)
    return zeta, combined


@dataclass(frozen=True)
class TrajectoryPoint:
    t: int
    mse: float
    mse_db: float
    v_gamma: float
    v_phi: float
    flags: str = ""


@dataclass(frozen=True)
class EstimatorRun:
    points: tuple[TrajectoryPoint, ...]
    s_hat: np.ndarray = field(repr=False)
    stop_reason: str
    meter: CostMeter = field(repr=False)

    @property
    def final_mse(self) -> float:
        return self.points[-1].mse


def run_cd_mamp(instance: SystemInstance, ibs: LinearOperator, prior,
                cfg: MampConfig = MampConfig()) -> EstimatorRun:
    """Full cross-domain memory AMP pipeline on one instance.

    Per iteration: memory linear step, lift to the source domain, denoise,
    orthogonalize, transform back, damp over the trailing window.  ``ibs``
    must act identically to instance.Xi (it is a parameter so equivalent
    constructions of the same transform can be compared bit-for-bit).
    """
    A, y = instance.A, instance.y
    n = ibs.cols
    profile = spectral_profile(A, depth=cfg.max_iters, dim=A.rows)
    meter = CostMeter()
    xi_cost = _transform_cost(ibs)

    def forward(s):
        meter.transform_applies += 1
        meter.transform_points += xi_cost
        meter.channel_applies += 1
        meter.channel_points += _taps_per_row(A) * A.rows
        return A.apply(ibs.apply(s))

    def back(u):
        meter.transform_applies += 1
        meter.transform_points += xi_cost
        return ibs.apply_adjoint(u)

    state = MampState(profile, y, forward, back, dim=n, noise_var=instance.noise_var,
                      theta=cfg.theta_schedule, xi=cfg.xi_schedule,
                      max_iters=cfg.max_iters, variance_floor=cfg.variance_floor,
                      relax=cfg.relax)
    state.meter = meter

    points: list[TrajectoryPoint] = []
    s_hat = np.zeros(n, dtype=np.complex128)
    best_mse = np.inf
    stall_run = 0
    stop_reason = "max-iters"
    for t in range(1, cfg.max_iters + 1):
        r, v_gamma = mle_step(state, A, y)
        den = prior.denoise(r, v_gamma)
        meter.vector_points += n
        s_hat = den.posterior_mean
        cur_mse = mse(s_hat, instance.s_true)
        s_ext, v_phi, stalled = nle_orthogonalize(den, r, v_gamma, cfg.variance_floor)

        window = cfg.damping_window
        if window > 1:
            cands = state.last_candidates(window - 1) + [s_ext]
            resids = state.last_residuals(window - 1) + [y - forward(s_ext)]
        else:
            cands = [s_ext]
            resids = [y - forward(s_ext)]
        V = _cross_cov_from_residuals(resids, state.measure_dim, instance.noise_var,
                                      state.trace_gram, cfg.variance_floor)
        zeta, s_next = damping_update(cands, V)
        resid_next = np.tensordot(zeta, np.vstack(resids), axes=1)
        state.push(s_next, resid_next)
        meter.vector_points += len(cands) * n

        flags = []
        if stalled:
            flags.append("nle-stall")
        if v_gamma <= cfg.variance_floor:
            flags.append("v-floor")
        points.append(TrajectoryPoint(t=t, mse=cur_mse, mse_db=mse_db(cur_mse),
                                      v_gamma=v_gamma, v_phi=v_phi,
                                      flags="|".join(flags)))

        if v_phi < cfg.stop_tolerance:
            stop_reason = "tolerance"
            break
        if stalled or cur_mse > best_mse * (1.0 - cfg.stall_improvement):
            stall_run += 1
        else:
            stall_run = 0
        best_mse = min(best_mse, cur_mse)
        if cfg.stop_on_stall and stall_run >= cfg.stall_patience:
            stop_reason = "stall"
            break
    return EstimatorRun(points=tuple(points), s_hat=s_hat,
                        stop_reason=stop_reason, meter=meter)


def _solve_shifted(A: LinearOperator, v_scale: float, sigma2: float,
                   z: np.ndarray) -> np.ndarray:
    """(v_scale A A^H + sigma2 I)^{-1} z using the operator's structure."""
    if isinstance(A, DiagonalOperator):
        return z / (v_scale * np.abs(A.weights) ** 2 + sigma2)
    if isinstance(A, CirculantOperator):
        return A.solve_shifted(v_scale, sigma2, z)
    dense = materialize_dense(A)
    gram = v_scale * (dense @ dense.conj().T) + sigma2 * np.eye(A.rows)
    return np.linalg.solve(gram, z)


def run_cd_oamp(instance: SystemInstance, prior,
                cfg: MampConfig = MampConfig()) -> EstimatorRun:
    """Cross-domain OAMP with an exact per-iteration LMMSE linear stage.

    Serves as the convergence oracle: one iteration with a Gaussian prior
    is the closed-form LMMSE solution.  Damping is not needed because the
    linear stage is non-recursive.
    """
    A, Xi, y = instance.A, instance.Xi, instance.y
    n = Xi.cols
    lam = gram_eigenvalues(A)
    sigma2 = instance.noise_var
    meter = CostMeter()

    s_msg = np.zeros(n, dtype=np.complex128)
    v_t = prior.power
    points: list[TrajectoryPoint] = []
    s_hat = np.zeros(n, dtype=np.complex128)
    best_mse = np.inf
    stall_run = 0
    stop_reason = "max-iters"
    for t in range(1, cfg.max_iters + 1):
        resid = y - A.apply(Xi.apply(s_msg))
        z = _solve_shifted(A, v_t, sigma2, resid)
        lifted = Xi.apply_adjoint(A.apply_adjoint(z))
        eta = (v_t / n) * float(np.sum(lam / (v_t * lam + sigma2)))
        r = s_msg + (v_t / eta) * lifted
        v_gamma = max(v_t * (1.0 - eta) / eta, cfg.variance_floor)
        den = prior.denoise(r, v_gamma)
        s_hat = den.posterior_mean
        cur_mse = mse(s_hat, instance.s_true)
        s_msg, v_t, stalled = nle_orthogonalize(den, r, v_gamma, cfg.variance_floor)

        flags = "nle-stall" if stalled else ""
        points.append(TrajectoryPoint(t=t, mse=cur_mse, mse_db=mse_db(cur_mse),
                                      v_gamma=v_gamma, v_phi=v_t, flags=flags))
        if v_t < cfg.stop_tolerance:
            stop_reason = "tolerance"
            break
        if stalled or cur_mse > best_mse * (1.0 - cfg.stall_improvement):
            stall_run += 1
        else:
            stall_run = 0
        best_mse = min(best_mse, cur_mse)
        if cfg.stop_on_stall and stall_run >= cfg.stall_patience:
            stop_reason = "stall"
            break
    return EstimatorRun(points=tuple(points), s_hat=s_hat,
                        stop_reason=stop_reason, meter=meter)


def lmmse_estimate_gaussian(instance: SystemInstance, sigma_s2: float) -> np.ndarray:
    """Closed-form LMMSE posterior mean for a pure Gaussian CN(0, sigma_s2) source."""
    z = _solve_shifted(instance.A, sigma_s2, instance.noise_var, instance.y)
    return sigma_s2 * instance.Xi.apply_adjoint(instance.A.apply_adjoint(z))


def lmmse_mse_gaussian(singulars: np.ndarray, sigma_s2: float, sigma2: float,
                       n: int) -> float:
    """Analytic LMMSE mse for a Gaussian source observed through a diagonal A
    after a row-orthonormal m x n transform: the m measured modes shrink,
    the n - m unmeasured ones keep the prior variance."""
    lam = np.asarray(singulars) ** 2
    measured = np.sum(sigma_s2 * sigma2 / (sigma_s2 * lam + sigma2))
    return float((measured + (n - lam.size) * sigma_s2) / n)
