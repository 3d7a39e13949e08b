"""Interleaved block-sparse (IBS) unitary transforms and multicarrier variants.

An IBS transform splits a length-n vector into L = n / n_s contiguous
blocks, runs an n_s-point unitary kernel on each block, keeps m_s = m / L
rows per block, and optionally randomizes two stages:

* block interleave: a seeded permutation per block decides *which* kernel
  rows survive the row selection (variants B_IBS, BW_IBS);
* whole interleave: a seeded permutation reorders the m stacked outputs
  across blocks (variants W_IBS, BW_IBS).

Variant BS has neither randomization.  Every variant is row-orthonormal
(Xi Xi^H = I_m) because the kernels are unitary, row selection keeps
distinct rows, and permutations are unitary.

The ``direction`` field chooses the kernel ("kernel", used when the
transform compresses a source for sensing) or its adjoint
("kernel-adjoint", used when the transform modulates symbols onto a
channel, so that n_s = n with the FFT base reduces to a permuted inverse
DFT).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .kernels import fft_adjoint, fft_forward, fwht_forward, is_power_of_two
from .operators import LinearOperator, _freeze
from .rng import Permutation, make_permutation

VARIANTS = ("BS", "W_IBS", "B_IBS", "BW_IBS")
BASES = ("FFT", "FWHT")
DIRECTIONS = ("kernel", "kernel-adjoint")

_SPEC_FIELDS = ("n", "n_s", "m", "variant", "base", "direction",
                "block_seed_base", "whole_seed")


@dataclass(frozen=True)
class IbsSpec:
    """Complete description of one IBS transform; (de)serializes to JSON."""

    n: int
    n_s: int
    m: int
    variant: str
    base: str = "FFT"
    direction: str = "kernel"
    block_seed_base: int = 0
    whole_seed: int = 0

    def __post_init__(self):
        if not is_power_of_two(self.n):
            raise ConfigurationError(f"n must be a power of two, got {self.n}")
        if not is_power_of_two(self.n_s):
            raise ConfigurationError(f"n_s must be a power of two, got {self.n_s}")
        if self.n_s > self.n:
            raise ConfigurationError(f"n_s={self.n_s} exceeds n={self.n}")
        if not 1 <= self.m <= self.n:
            raise ConfigurationError(f"m={self.m} must lie in [1, n={self.n}]")
        blocks = self.n // self.n_s
        if self.m % blocks != 0:
            raise ConfigurationError(
                f"m={self.m} is not divisible by the block count L={blocks}; "
                "unequal per-block row counts are not supported")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.base not in BASES:
            raise ConfigurationError(f"unknown base {self.base!r}; choose from {BASES}")
        if self.direction not in DIRECTIONS:
            raise ConfigurationError(
                f"unknown direction {self.direction!r}; choose from {DIRECTIONS}")

    @property
    def blocks(self) -> int:
        return self.n // self.n_s

    @property
    def block_rows(self) -> int:
        return self.m // self.blocks

    def to_json(self) -> str:
        return json.dumps({name: getattr(self, name) for name in _SPEC_FIELDS})

    @classmethod
    def from_json(cls, text: str) -> "IbsSpec":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigurationError("IbsSpec JSON must be an object")
        if set(data) != set(_SPEC_FIELDS):
            missing = set(_SPEC_FIELDS) - set(data)
            extra = set(data) - set(_SPEC_FIELDS)
            raise ConfigurationError(
                f"IbsSpec JSON keys mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        return cls(**data)


class IbsOperator(LinearOperator):
    """Row-orthonormal IBS transform built from an IbsSpec.

    Forward runs the kernel on all L blocks in one batched call, gathers
    the selected rows of every block, and applies the whole interleave.
    The adjoint reverses each stage, zero-filling the rows that the
    selection dropped, so ``apply_adjoint`` is the pseudo-inverse of
    ``apply``.
    """

    __slots__ = ("spec", "block_perms", "whole_perm", "_sel", "_kfwd", "_kadj")

    def __init__(self, spec: IbsSpec,
                 block_perms: tuple[Permutation, ...] | None,
                 whole_perm: Permutation | None):
        blocks, n_s, m_s = spec.blocks, spec.n_s, spec.block_rows
        if block_perms is not None:
            if len(block_perms) != blocks:
                raise ConfigurationError(
                    f"need {blocks} block permutations, got {len(block_perms)}")
            if any(p.size != n_s for p in block_perms):
                raise ConfigurationError(f"block permutations must have size n_s={n_s}")
            sel = np.stack([p.indices[:m_s] for p in block_perms])
        else:
            sel = np.broadcast_to(np.arange(m_s, dtype=np.int64), (blocks, m_s)).copy()
        if whole_perm is not None and whole_perm.size != spec.m:
            raise ConfigurationError(f"whole permutation must have size m={spec.m}")
        sel.setflags(write=False)

        if spec.base == "FFT":
            kfwd, kadj = fft_forward, fft_adjoint
        else:
            kfwd, kadj = fwht_forward, fwht_forward
        if spec.direction == "kernel-adjoint":
            kfwd, kadj = kadj, kfwd

        super().__init__(spec.m, spec.n, self._forward, self._adjoint)
        _freeze(self, spec=spec, block_perms=block_perms, whole_perm=whole_perm,
                _sel=sel, _kfwd=kfwd, _kadj=kadj)

    def _forward(self, v: np.ndarray) -> np.ndarray:
        spec = self.spec
        u = self._kfwd(v.reshape(spec.blocks, spec.n_s))
        out = u[np.arange(spec.blocks)[:, None], self._sel].reshape(spec.m)
        if self.whole_perm is not None:
            out = self.whole_perm.apply(out)
        return out

    def _adjoint(self, v: np.ndarray) -> np.ndarray:
        spec = self.spec
        if self.whole_perm is not None:
            v = self.whole_perm.apply_inverse(v)
        z = np.zeros((spec.blocks, spec.n_s), dtype=np.result_type(v.dtype, np.complex128))
        z[np.arange(spec.blocks)[:, None], self._sel] = v.reshape(spec.blocks, spec.block_rows)
        return self._kadj(z).reshape(spec.n)


def assemble_ibs(spec: IbsSpec,
                 block_perms: tuple[Permutation, ...] | None,
                 whole_perm: Permutation | None) -> IbsOperator:
    """Assemble an IBS transform from explicit permutations (or None)."""
    return IbsOperator(spec, block_perms, whole_perm)


def build_ibs_transform(spec: IbsSpec) -> IbsOperator:
    """Build the IBS transform for spec, deriving permutations from its seeds.

    Block l (0-based) draws its permutation from seed block_seed_base + l;
    the whole interleave draws from whole_seed.  Variants ignore the seeds
    of the stages they do not randomize.
    """
    block_perms = None
    if spec.variant in ("B_IBS", "BW_IBS"):
        block_perms = tuple(
            make_permutation(spec.n_s, spec.block_seed_base + l) for l in range(spec.blocks))
    whole_perm = None
    if spec.variant in ("W_IBS", "BW_IBS"):
        whole_perm = make_permutation(spec.m, spec.whole_seed)
    return IbsOperator(spec, block_perms, whole_perm)


def relative_complexity(n: int, n_s: int, p: int = 8) -> tuple[float, float]:
    """Per-iteration cost of an IBS pipeline relative to the full transform.

    Returns (transform_ratio, overall_ratio) as fractions in (0, 1]:

    * transform_ratio: log(n_s) / log(n), the block-transform exponent;
    * overall_ratio: (p + 1 + 2 log2 n_s) / (p + 1 + 2 log2 n), the whole
      per-iteration budget with p channel taps, one vector pass, and a
      forward plus inverse transform.  p defaults to 8, which reproduces
      the reference cost table.
    """
    if not is_power_of_two(n) or not is_power_of_two(n_s):
        raise ConfigurationError(f"n={n} and n_s={n_s} must be powers of two")
    if not 2 <= n_s <= n:
        raise ConfigurationError(f"need 2 <= n_s <= n, got n_s={n_s}, n={n}")
    if p < 0:
        raise ConfigurationError(f"tap count p must be non-negative, got {p}")
    transform_ratio = math.log(n_s) / math.log(n)
    overall_ratio = (p + 1 + 2 * math.log2(n_s)) / (p + 1 + 2 * math.log2(n))
    return transform_ratio, overall_ratio


def _otfs_operator(n: int, doppler_bins: int) -> LinearOperator:
    if not is_power_of_two(doppler_bins) or doppler_bins > n or n % doppler_bins != 0:
        raise ConfigurationError(
            f"doppler_bins={doppler_bins} must be a power of two dividing n={n}")
    delay_bins = n // doppler_bins

    def fwd(v):
        return fft_adjoint(v.reshape(doppler_bins, delay_bins), axis=0).reshape(n)

    def adj(v):
        return fft_forward(v.reshape(doppler_bins, delay_bins), axis=0).reshape(n)

    return LinearOperator(n, n, fwd, adj)


def _afdm_operator(n: int, c1: float, c2: float) -> LinearOperator:
    idx = np.arange(n)
    # Lambda_c = diag(exp(-2j pi c k^2)); the transform applies the adjoints.
    chirp1 = np.exp(2j * np.pi * c1 * idx * idx)
    chirp2 = np.exp(2j * np.pi * c2 * idx * idx)

    def fwd(v):
        return chirp1 * fft_adjoint(chirp2 * v)

    def adj(v):
        return np.conj(chirp2) * fft_forward(np.conj(chirp1) * v)

    return LinearOperator(n, n, fwd, adj)


def build_multicarrier(kind: str, n: int, *, doppler_bins: int | None = None,
                       c1: float = 0.0, c2: float = 0.0, seed: int = 0) -> LinearOperator:
    """Square modulation transforms for the standard multicarrier waveforms.

    kind = "OFDM": inverse unitary DFT.
    kind = "OTFS": inverse DFT across doppler_bins groups, identity within
        each length n/doppler_bins delay segment (inverse-DFT kron identity).
    kind = "AFDM": chirp, inverse DFT, chirp with parameters c1, c2
        (c1 = c2 = 0 collapses to OFDM).
    kind = "IFDM": seeded whole interleave of the inverse unitary DFT,
        built as the degenerate one-block IBS transform.
    """
    if not is_power_of_two(n):
        raise ConfigurationError(f"n must be a power of two, got {n}")
    if kind == "OFDM":
        return _afdm_operator(n, 0.0, 0.0)
    if kind == "OTFS":
        if doppler_bins is None:
            raise ConfigurationError("OTFS needs doppler_bins")
        return _otfs_operator(n, doppler_bins)
    if kind == "AFDM":
        return _afdm_operator(n, c1, c2)
    if kind == "IFDM":
        return build_ibs_transform(IbsSpec(
            n=n, n_s=n, m=n, variant="W_IBS", base="FFT",
            direction="kernel-adjoint", whole_seed=seed))
    raise ConfigurationError(f"unknown multicarrier kind {kind!r}")
