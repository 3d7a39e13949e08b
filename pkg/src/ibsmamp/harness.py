"""Experiment harness: configs, deterministic seed fan-out, CSV/JSON output.

Every experiment is a pure function of (config, master seed).  Trial
seeds are the first ``trials`` raw words of the Philox stream
(master_seed, stream=STREAM_TRIALS); per-trial sub-seeds for the
transform stages come from dedicated streams of the trial seed.  Rows are
merged in trial order regardless of worker count, so output files are
byte-identical for a fixed config.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, UnsupportedMetricError
from .estimators import MampConfig, run_cd_mamp
from .ibs import BASES, VARIANTS, IbsSpec, build_ibs_transform, relative_complexity
from .rng import generator, raw_words
from .scenarios import (BernoulliGaussianPrior, QpskPrior, STREAM_SOURCE, ber_qpsk,
                        gen_multipath_channel, gen_sensing_diagonal, simulate_observation)

SCHEMA_VERSION = 1

STREAM_TRIALS = 10
STREAM_BLOCK_SEEDS = 11
STREAM_WHOLE_SEED = 12

TRAJECTORY_COLUMNS = ("variant", "base", "trial_seed", "t", "mse", "mse_db",
                      "v_gamma", "v_phi", "flags")
CS_SUMMARY_COLUMNS = ("variant", "base", "trials", "mean_final_mse",
                      "mean_final_mse_db", "ci95_half_width")
BER_COLUMNS = ("scheme", "base", "n_s", "snr_db", "trial", "trial_seed", "ber", "symbols")
BER_SUMMARY_COLUMNS = ("scheme", "base", "n_s", "snr_db", "trials", "mean_ber", "symbols")
COMPLEXITY_COLUMNS = ("n", "n_s", "transform_pct", "overall_pct")


def derive_trial_seeds(master_seed: int, trials: int) -> list[int]:
    return [int(w) for w in raw_words(master_seed, trials, stream=STREAM_TRIALS)]


def derive_subseed(seed: int, stream: int) -> int:
    return int(raw_words(seed, 1, stream=stream)[0])


def _check_keys(data: dict, cls) -> None:
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown config keys for {cls.__name__}: {sorted(unknown)}")


def _from_dict(cls, data: dict, overrides: dict | None = None):
    _check_keys(data, cls)
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    try:
        return cls(**merged)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


@dataclass(frozen=True)
class CsMseConfig:
    """Compressed-sensing MSE experiment over the transform variant family."""

    seed: int = 1
    trials: int = 4
    threads: int = 1
    n: int = 8192
    n_s: int = 256
    m: int | None = None            # default n // 2
    kappa: float = 10.0
    snr_db: float = 30.0
    prior: str = "bernoulli-gaussian"
    rho: float = 0.1
    sigma_s2: float | None = None   # default 1 / rho (unit power)
    base: str = "FFT"
    variants: tuple[str, ...] = ("full", "BS", "W_IBS", "B_IBS", "BW_IBS")
    metric: str = "mse"
    max_iters: int = 600
    damping_window: int = 5
    stall_patience: int = 8
    stop_on_stall: bool = False
    relax: float = 0.85

    def __post_init__(self):
        if self.trials < 1 or self.threads < 1:
            raise ConfigurationError("trials and threads must be >= 1")
        if self.base not in BASES:
            raise ConfigurationError(f"unknown base {self.base!r}")
        for v in self.variants:
            if v != "full" and v not in VARIANTS:
                raise ConfigurationError(f"unknown variant {v!r}")
        if self.prior != "bernoulli-gaussian":
            raise ConfigurationError(
                f"cs-mse supports the bernoulli-gaussian prior, got {self.prior!r}")
        if self.metric == "ber":
            raise UnsupportedMetricError(
                "ber is undefined for the bernoulli-gaussian prior; use metric=mse")
        if self.metric != "mse":
            raise ConfigurationError(f"unknown metric {self.metric!r}")
        object.__setattr__(self, "variants", tuple(self.variants))

    @property
    def rows(self) -> int:
        return self.n // 2 if self.m is None else self.m


@dataclass(frozen=True)
class IfdmBerConfig:
    """Multicarrier QPSK BER sweep: full transform vs block-sparse schemes."""

    seed: int = 1
    trials: int = 8
    threads: int = 1
    n: int = 1024
    taps: int = 4
    doppler_spread: float = 0.0
    snr_db_list: tuple[float, ...] = (6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
    n_s_list: tuple[int, ...] = (128, 32)
    bases: tuple[str, ...] = ("FFT", "FWHT")
    include_full: bool = True
    variant: str = "BW_IBS"
    max_iters: int = 32
    damping_window: int = 3
    stall_patience: int = 6

    def __post_init__(self):
        if self.trials < 1 or self.threads < 1:
            raise ConfigurationError("trials and threads must be >= 1")
        for b in self.bases:
            if b not in BASES:
                raise ConfigurationError(f"unknown base {b!r}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if not self.snr_db_list:
            raise ConfigurationError("snr_db_list must be non-empty")
        object.__setattr__(self, "snr_db_list", tuple(float(x) for x in self.snr_db_list))
        object.__setattr__(self, "n_s_list", tuple(int(x) for x in self.n_s_list))
        object.__setattr__(self, "bases", tuple(self.bases))


@dataclass(frozen=True)
class ComplexityConfig:
    """Relative per-iteration cost table for block sizes under one n."""

    seed: int = 1
    trials: int = 1
    threads: int = 1
    n: int = 4096
    n_s_list: tuple[int, ...] = (4096, 128, 32, 8, 4)
    taps: int = 8

    def __post_init__(self):
        object.__setattr__(self, "n_s_list", tuple(int(x) for x in self.n_s_list))


CONFIG_TYPES = {
    "cs-mse": CsMseConfig,
    "ifdm-ber": IfdmBerConfig,
    "complexity": ComplexityConfig,
}


def load_config(experiment: str, path: str | None, overrides: dict | None = None):
    if experiment not in CONFIG_TYPES:
        raise ConfigurationError(f"unknown experiment {experiment!r}")
    data = {}
    if path is not None:
        try:
            raw = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"config {path} must hold a JSON object")
        data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return _from_dict(CONFIG_TYPES[experiment], data, overrides)


def config_hash(cfg) -> str:
    canon = json.dumps(dataclasses.asdict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _mamp_config(cfg) -> MampConfig:
    return MampConfig(max_iters=cfg.max_iters, damping_window=cfg.damping_window,
                      stall_patience=cfg.stall_patience,
                      stop_on_stall=getattr(cfg, "stop_on_stall", True),
                      relax=getattr(cfg, "relax", 1.0))


def _cs_transform_spec(cfg: CsMseConfig, variant: str, trial_seed: int) -> IbsSpec:
    n_s = cfg.n if variant == "full" else cfg.n_s
    real_variant = "BW_IBS" if variant == "full" else variant
    return IbsSpec(n=cfg.n, n_s=n_s, m=cfg.rows, variant=real_variant, base=cfg.base,
                   direction="kernel",
                   block_seed_base=derive_subseed(trial_seed, STREAM_BLOCK_SEEDS),
                   whole_seed=derive_subseed(trial_seed, STREAM_WHOLE_SEED))


def _cs_trial(cfg: CsMseConfig, trial_seed: int) -> list[tuple]:
    prior = BernoulliGaussianPrior(cfg.rho, cfg.sigma_s2)
    diag = gen_sensing_diagonal(cfg.rows, cfg.n, cfg.kappa)
    A = diag.operator()
    s = prior.sample(cfg.n, generator(trial_seed, STREAM_SOURCE))
    rows = []
    for variant in cfg.variants:
        Xi = build_ibs_transform(_cs_transform_spec(cfg, variant, trial_seed))
        instance = simulate_observation(A, Xi, s, cfg.snr_db, trial_seed)
        run = run_cd_mamp(instance, Xi, prior, _mamp_config(cfg))
        for pt in run.points:
            rows.append((variant, cfg.base, trial_seed, pt.t, float(pt.mse),
                         float(pt.mse_db), float(pt.v_gamma), float(pt.v_phi), pt.flags))
    return rows


def run_cs_mse(cfg: CsMseConfig) -> tuple[list[tuple], list[tuple]]:
    """All trajectory rows plus per-variant summary rows."""
    seeds = derive_trial_seeds(cfg.seed, cfg.trials)
    per_trial = _map_trials(_cs_trial, cfg, seeds)
    rows = [row for trial_rows in per_trial for row in trial_rows]
    summary = []
    for variant in cfg.variants:
        finals = []
        for trial_rows in per_trial:
            variant_rows = [r for r in trial_rows if r[0] == variant]
            finals.append(variant_rows[-1][4])
        mean_mse = float(np.mean(finals))
        # Normal-approximation 95% half-width; zero when a single trial
        # leaves no spread to estimate.
        if cfg.trials > 1:
            half = float(1.96 * np.std(finals, ddof=1) / np.sqrt(cfg.trials))
        else:
            half = 0.0
        summary.append((variant, cfg.base, cfg.trials, mean_mse,
                        float(10.0 * np.log10(mean_mse)), half))
    return rows, summary


def _ber_schemes(cfg: IfdmBerConfig) -> list[tuple[str, str, int]]:
    schemes = []
    if cfg.include_full:
        schemes.append(("full", "FFT", cfg.n))
    for base in cfg.bases:
        for n_s in cfg.n_s_list:
            schemes.append((f"ibs-{base.lower()}-{n_s}", base, n_s))
    return schemes


def _ber_trial(cfg: IfdmBerConfig, trial_seed: int) -> list[tuple]:
    prior = QpskPrior()
    rows = []
    channel = gen_multipath_channel(cfg.n, cfg.taps, cfg.doppler_spread, trial_seed)
    A = channel.operator()
    s = prior.sample(cfg.n, generator(trial_seed, STREAM_SOURCE))
    transforms = {}
    for scheme, base, n_s in _ber_schemes(cfg):
        variant = "W_IBS" if scheme == "full" else cfg.variant
        spec = IbsSpec(n=cfg.n, n_s=n_s, m=cfg.n, variant=variant, base=base,
                       direction="kernel-adjoint",
                       block_seed_base=derive_subseed(trial_seed, STREAM_BLOCK_SEEDS),
                       whole_seed=derive_subseed(trial_seed, STREAM_WHOLE_SEED))
        transforms[scheme] = build_ibs_transform(spec)
    for snr_db in cfg.snr_db_list:
        for scheme, base, n_s in _ber_schemes(cfg):
            Xi = transforms[scheme]
            instance = simulate_observation(A, Xi, s, snr_db, trial_seed)
            run = run_cd_mamp(instance, Xi, prior, _mamp_config(cfg))
            rows.append((scheme, base, n_s, float(snr_db), trial_seed,
                         float(ber_qpsk(run.s_hat, s)), cfg.n))
    return rows


def run_ifdm_ber(cfg: IfdmBerConfig) -> tuple[list[tuple], list[tuple]]:
    """Per-trial BER rows plus per-(scheme, snr) summary rows."""
    seeds = derive_trial_seeds(cfg.seed, cfg.trials)
    per_trial = _map_trials(_ber_trial, cfg, seeds)
    rows = []
    for trial, trial_rows in enumerate(per_trial):
        for scheme, base, n_s, snr_db, trial_seed, ber, symbols in trial_rows:
            rows.append((scheme, base, n_s, snr_db, trial, trial_seed, ber, symbols))
    summary = []
    for scheme, base, n_s in _ber_schemes(cfg):
        for snr_db in cfg.snr_db_list:
            matching = [r[6] for r in rows if r[0] == scheme and r[3] == snr_db]
            summary.append((scheme, base, n_s, snr_db, cfg.trials,
                            float(np.mean(matching)), cfg.n * cfg.trials))
    return rows, summary


def run_complexity_table(cfg: ComplexityConfig) -> list[tuple]:
    rows = []
    for n_s in cfg.n_s_list:
        transform_ratio, overall_ratio = relative_complexity(cfg.n, n_s, cfg.taps)
        rows.append((cfg.n, n_s, float(100.0 * transform_ratio),
                     float(100.0 * overall_ratio)))
    return rows


def _map_trials(fn, cfg, seeds: list[int]) -> list[list[tuple]]:
    if cfg.threads <= 1 or len(seeds) <= 1:
        return [fn(cfg, seed) for seed in seeds]
    with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
        futures = [pool.submit(fn, cfg, seed) for seed in seeds]
        return [f.result() for f in futures]


def write_csv(path: Path, columns: tuple[str, ...], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_sidecar(path: Path, experiment: str, cfg) -> None:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "config": dataclasses.asdict(cfg),
        "config_hash": config_hash(cfg),
        "seed_derivation": "philox trial stream %d; block/whole sub-streams %d/%d"
                           % (STREAM_TRIALS, STREAM_BLOCK_SEEDS, STREAM_WHOLE_SEED),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "package": sys.modules["ibsmamp"].__version__,
        },
    }
    path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def run_experiment(experiment: str, cfg, out_dir: str | Path) -> list[Path]:
    """Run one experiment and write its CSV outputs plus a JSON sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if experiment == "cs-mse":
        rows, summary = run_cs_mse(cfg)
        written.append(out / "cs_mse_trajectories.csv")
        write_csv(written[-1], TRAJECTORY_COLUMNS, rows)
        written.append(out / "cs_mse_summary.csv")
        write_csv(written[-1], CS_SUMMARY_COLUMNS, summary)
    elif experiment == "ifdm-ber":
        rows, summary = run_ifdm_ber(cfg)
        written.append(out / "ifdm_ber.csv")
        write_csv(written[-1], BER_COLUMNS, rows)
        written.append(out / "ifdm_ber_summary.csv")
        write_csv(written[-1], BER_SUMMARY_COLUMNS, summary)
    elif experiment == "complexity":
        rows = run_complexity_table(cfg)
        written.append(out / "complexity.csv")
        write_csv(written[-1], COMPLEXITY_COLUMNS, rows)
    else:
        raise ConfigurationError(f"unknown experiment {experiment!r}")
    sidecar = out / f"{experiment.replace('-', '_')}_meta.json"
    write_sidecar(sidecar, experiment, cfg)
    written.append(sidecar)
    return written
