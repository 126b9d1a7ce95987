"""
Seeded ensemble experiments.

An ensemble simulates independent replicates of one process, builds one matrix
variant per replicate and pools the spectra. Replicate r always uses the seed
``derive_seed(master_seed, r)``, so results do not depend on the worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from acvspectra import config as cfg
from acvspectra.errors import ConfigError
from acvspectra.moments.momentcalc import DEFAULT_MC_SAMPLES, MomentReport, beta_limit
from acvspectra.spectra.metrics import dbl_empirical, ks_distance
from acvspectra.spectra.spectra import (
    DensityGrid,
    EmpiricalDistribution,
    eigenvalues_sym,
    esd,
    kde,
    power_moments,
)
from acvspectra.timeseries.estimators import (
    KERNELS,
    KernelSpec,
    SymMatrix,
    build_banded_I,
    build_banded_II,
    build_gamma,
    build_gamma_star,
    build_sigma,
    build_tapered,
)
from acvspectra.timeseries.process import (
    InnovationSpec,
    ProcessSpec,
    ar1_truncation,
    derive_seed,
    process_from_config,
    sample_fU,
    simulate_ma,
)

logger = logging.getLogger(__name__)

MATRIX_VARIANTS = ("gamma", "gamma_star", "banded_I", "banded_II", "tapered", "sigma")
BANDED_VARIANTS = ("banded_I", "banded_II", "tapered")
REFERENCE_STREAM = 2**31 - 1


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One ensemble study.

    ``alpha`` (band as a fraction of n) and ``m_n`` (band width) are mutually
    exclusive and only apply to the banded and tapered variants.
    """

    process: ProcessSpec
    variant: str = "gamma"
    n: int = 1000
    alpha: Optional[float] = None
    m_n: Optional[int] = None
    kernel: str = "bartlett"
    replicates: int = 100
    master_seed: int = 0
    h_max: int = 4
    fu_samples: int = 100_000
    kde_grid: int = 512
    workers: int = 1

    def __post_init__(self) -> None:
        if self.variant not in MATRIX_VARIANTS:
            raise ConfigError(f"variant must be one of {MATRIX_VARIANTS}, got {self.variant!r}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if self.h_max < 1:
            raise ConfigError(f"h_max must be >= 1, got {self.h_max}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.kernel not in KERNELS:
            raise ConfigError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        both = self.alpha is not None and self.m_n is not None
        neither = self.alpha is None and self.m_n is None
        if self.variant in BANDED_VARIANTS and (both or neither):
            raise ConfigError(f"{self.variant} needs exactly one of alpha and m_n")
        if self.variant not in BANDED_VARIANTS and not neither:
            raise ConfigError(f"alpha and m_n do not apply to {self.variant}")
        if self.alpha is not None and not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def band(self) -> Optional[int]:
        """Band parameter m, from m_n or round(alpha * n) (at least 1)."""
        if self.m_n is not None:
            return int(self.m_n)
        if self.alpha is not None:
            return max(1, int(round(self.alpha * self.n)))
        return None

    @classmethod
    def from_config(cls, config: Dict[str, str]) -> "ExperimentConfig":
        """
        Build from flat config keys; ``seed`` is the master seed.

        Raises:
            ConfigError: On missing, malformed or conflicting keys.
        """
        return cls(
            process=process_from_config(config),
            variant=cfg.get_str(config, "variant", "gamma"),
            n=cfg.get_int(config, "n", 1000),
            alpha=cfg.get_float(config, "alpha"),
            m_n=cfg.get_int(config, "m_n"),
            kernel=cfg.get_str(config, "kernel", "bartlett"),
            replicates=cfg.get_int(config, "replicates", 100),
            master_seed=cfg.get_int(config, "seed", 0),
            h_max=cfg.get_int(config, "h_max", 4),
            fu_samples=cfg.get_int(config, "fu_samples", 100_000),
            kde_grid=cfg.get_int(config, "kde_grid", 512),
            workers=cfg.get_int(config, "workers", 1),
        )

    def to_config(self) -> Dict[str, object]:
        out = dict(self.process.to_config())
        out.update({
            "variant": self.variant,
            "n": self.n,
            "kernel": self.kernel,
            "replicates": self.replicates,
            "seed": self.master_seed,
            "h_max": self.h_max,
            "fu_samples": self.fu_samples,
            "kde_grid": self.kde_grid,
        })
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.m_n is not None:
            out["m_n"] = self.m_n
        return out


@dataclass
class EnsembleResult:
    """
    Attributes:
        config: The experiment that produced this result.
        pooled: All eigenvalues of all replicates, equally weighted.
        moments: Long table (replicate, h, value) of (1/n) Tr(A^h).
        summary: Per replicate: dimension, negative-eigenvalue fraction, max eigenvalue.
        reference: Draws of f_X(U) for the simulated process.
        distances: d_BL and KS distance between ``pooled`` and ``reference``.
    """

    config: ExperimentConfig
    pooled: EmpiricalDistribution
    moments: pd.DataFrame
    summary: pd.DataFrame
    reference: EmpiricalDistribution
    distances: Dict[str, float] = field(default_factory=dict)

    def mean_moments(self) -> pd.DataFrame:
        """Ensemble mean and standard error of each trace moment."""
        grouped = self.moments.groupby("h")["value"]
        out = grouped.agg(["mean", "std", "count"]).reset_index()
        out["se"] = out["std"].fillna(0.0) / np.sqrt(out["count"])
        return out[["h", "mean", "se"]]

    def density(self, bandwidth: Any = "auto") -> DensityGrid:
        return kde(self.pooled, bandwidth=bandwidth, grid_size=self.config.kde_grid)


def build_matrix(config: ExperimentConfig, seed: int) -> SymMatrix:
    """Simulate one replicate and build the configured matrix variant."""
    process, n = config.process, config.n
    if config.variant == "sigma":
        return build_sigma(process.acvf(), n)
    if config.variant == "gamma_star":
        return build_gamma_star(simulate_ma(process, 2 * n - 1, seed), n)
    X = simulate_ma(process, n, seed)
    if config.variant == "gamma":
        return build_gamma(X)
    if config.variant == "banded_I":
        return build_banded_I(X, config.band)
    if config.variant == "banded_II":
        return build_banded_II(X, config.band)
    return build_tapered(X, KernelSpec(config.kernel, config.band))


def run_ensemble(config: ExperimentConfig, reference: Optional[EmpiricalDistribution] = None) -> EnsembleResult:
    """
    Simulate every replicate, pool the spectra and compare with f_X(U).

    Args:
        config: The experiment.
        reference: Reference distribution; defaults to ``fu_samples`` draws of
            f_X(U) from a stream reserved for it.

    Returns:
        EnsembleResult: Deterministic given ``config.master_seed``.
    """
    def run_replicate(r: int) -> Tuple[np.ndarray, np.ndarray]:
        eigs = eigenvalues_sym(build_matrix(config, derive_seed(config.master_seed, r)))
        return eigs, power_moments(eigs, config.h_max)

    logger.info("running %d replicates of %s (n=%d, d=%d)", config.replicates, config.variant, config.n, config.process.d)
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        results = list(executor.map(run_replicate, range(config.replicates)))

    spectra = [eigs for eigs, _ in results]
    pooled = EmpiricalDistribution.pooled([esd(eigs) for eigs in spectra])
    moments = pd.DataFrame([
        {"replicate": r, "h": h, "value": float(values[h - 1])}
        for r, (_, values) in enumerate(results)
        for h in range(1, config.h_max + 1)
    ])
    summary = pd.DataFrame({
        "replicate": np.arange(config.replicates),
        "dimension": [eigs.size for eigs in spectra],
        "negative_fraction": [float(np.mean(eigs < 0)) for eigs in spectra],
        "max_eigenvalue": [float(eigs[-1]) for eigs in spectra],
    })
    negative = summary["negative_fraction"].mean()
    if negative > 0:
        logger.info("%s has negative eigenvalues: mean fraction %.4f", config.variant, negative)

    if reference is None:
        reference = sample_fU(config.process.acvf(), config.fu_samples, derive_seed(config.master_seed, REFERENCE_STREAM))
    distances = {
        "dbl_reference": dbl_empirical(pooled, reference).distance,
        "ks_reference": ks_distance(pooled, reference),
    }
    logger.info("d_BL to reference: %.4f", distances["dbl_reference"])
    return EnsembleResult(config, pooled, moments, summary, reference, distances)


def compare(first: EnsembleResult, second: EnsembleResult) -> Dict[str, float]:
    """d_BL and KS distance between the pooled spectra of two ensembles."""
    return {
        "dbl": dbl_empirical(first.pooled, second.pooled).distance,
        "ks": ks_distance(first.pooled, second.pooled),
    }


def run_limit_moments(
    process: ProcessSpec,
    h_max: int,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    n: int = 3000,
    replicates: int = 50,
    workers: int = 1,
) -> Tuple[List[MomentReport], pd.DataFrame]:
    """
    Limit moments beta_{h,d}, h = 1..h_max, next to ensemble trace moments of Gamma_n.

    Returns:
        The MomentReports and a table with columns h, beta_limit, beta_se,
        ensemble_mean, ensemble_se, rel_gap.
    """
    reports = [beta_limit(process.theta, h, mc_samples, seed) for h in range(1, h_max + 1)]
    ensemble = run_ensemble(ExperimentConfig(
        process=process, n=n, replicates=replicates, master_seed=seed,
        h_max=h_max, fu_samples=1_000, workers=workers,
    ))
    means = ensemble.mean_moments().set_index("h")
    table = pd.DataFrame({
        "h": [r.h for r in reports],
        "beta_limit": [r.beta for r in reports],
        "beta_se": [r.se for r in reports],
        "ensemble_mean": [float(means.loc[r.h, "mean"]) for r in reports],
        "ensemble_se": [float(means.loc[r.h, "se"]) for r in reports],
    })
    table["rel_gap"] = (table["ensemble_mean"] - table["beta_limit"]).abs() / table["beta_limit"].abs()
    return reports, table


# --- Figure presets ---

FIGURE1_PANELS = ("gamma", "banded_half", "gamma_star", "banded_m10")


def figure1_configs(master_seed: int = 0, n: int = 1000, replicates: int = 100, workers: int = 1) -> Dict[str, ExperimentConfig]:
    """
    AR(1) with phi = 1/2 and Gaussian innovations: Gamma_n, the Type I band with
    alpha = 1/2, Gamma_n*, the Type I band with m = 10, and Sigma_n as overlay.
    """
    process = ar1_truncation(0.5, innovations=InnovationSpec("gaussian"))
    base = ExperimentConfig(process=process, n=n, replicates=replicates, master_seed=master_seed, workers=workers)
    return {
        "gamma": base,
        "banded_half": replace(base, variant="banded_I", alpha=0.5),
        "gamma_star": replace(base, variant="gamma_star"),
        "banded_m10": replace(base, variant="banded_I", m_n=10),
        "sigma": replace(base, variant="sigma", replicates=1),
    }


@dataclass
class Figure1Result:
    ensembles: Dict[str, EnsembleResult]
    densities: Dict[str, DensityGrid]
    overlay_distance: float


def run_figure1(master_seed: int = 0, n: int = 1000, replicates: int = 100, workers: int = 1) -> Figure1Result:
    """Density grids of the four panels plus the Sigma_n overlay."""
    configs = figure1_configs(master_seed, n, replicates, workers)
    reference = sample_fU(configs["gamma"].process.acvf(), configs["gamma"].fu_samples,
                          derive_seed(master_seed, REFERENCE_STREAM))
    ensembles = {name: run_ensemble(config, reference) for name, config in configs.items()}
    densities = {name: result.density() for name, result in ensembles.items()}
    overlay = compare(ensembles["banded_m10"], ensembles["sigma"])["dbl"]
    logger.info("banded m=10 vs Sigma_n: d_BL %.4f", overlay)
    return Figure1Result(ensembles, densities, overlay)

