"""
Limit moments of autocovariance matrices from word weights.

The h-th limit moment of the sample ACVM of an MA(d) process is

    beta_{h,d} = sum_k p_k^(d) prod_i gamma(i)^{k_i},

where p_k^(d) adds the weights p_w of every word whose offsets have magnitude
counts k. A word weight is a sum over admissible signs b of the volume of a
polytope in [0, 1]^{h+1} cut out by the linear forms of its partition. The
volume depends only on (partition, b), so one Monte Carlo pass over uniform
points evaluates every region at once, and all words, weight classes and
processes of the same h share those points.

Variants of the region:

- ``gamma``: Gamma_n.
- ``gamma_star``: Gamma_n* (no window constraint t_j + step_j <= 1).
- ``banded_I``: Type I band with m_n / n -> alpha; every step is at most alpha.
- ``banded_II``: Type II band; every pi lies in [0, alpha], volume divided by alpha.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad

import acvspectra
from acvspectra.errors import GuardError
from acvspectra.moments.words import (
    H_MAX,
    PairPartition,
    Word,
    WordSystem,
    enumerate_pair_partitions,
    offset_grid,
    partition_system,
    word_label,
)
from acvspectra.timeseries.process import AcvfTable, acvf_table, spectral_density, stream_generator

logger = logging.getLogger(__name__)

D_MAX = 3
MIN_MC_SAMPLES = 1_000
DEFAULT_MC_SAMPLES = 1_000_000
CHUNK = 1 << 15
WORD_TABLE_LIMIT = 100_000
VARIANTS = ("gamma", "gamma_star", "banded_I", "banded_II")


# --- Monte Carlo over partition regions ---

@dataclass(frozen=True)
class _Regions:
    """The closing sign vectors of one partition, stacked for vectorised evaluation."""

    partition: PairPartition
    sign_index: Tuple[int, ...]
    coef: np.ndarray
    signs: np.ndarray
    tau_mask: np.ndarray


@lru_cache(maxsize=None)
def _regions(partition: PairPartition) -> _Regions:
    system = partition_system(partition)
    h = partition.h
    index = tuple(s for s, f in enumerate(system.forms) if f.closes)
    coef = np.array([system.forms[s].coef for s in index], dtype=float).reshape(len(index), 2 * h + 1, h + 1)
    signs = np.array([system.forms[s].sign for s in index], dtype=float).reshape(len(index), h)
    tau_mask = np.zeros(h, dtype=bool)
    tau_mask[np.array(system.tau, dtype=int) - 1] = True
    return _Regions(partition, index, coef, signs, tau_mask)


def _indicators(regions: _Regions, U: np.ndarray, variant: str, alpha: float) -> np.ndarray:
    """(signs, samples) membership of each uniform point in each region."""
    h = regions.partition.h
    values = np.einsum("bej,sj->bes", regions.coef, U)
    t, pi = values[:, :h], values[:, h:]
    inside = np.all((values[:, :2 * h] >= 0.0) & (values[:, :2 * h] <= 1.0), axis=1)
    steps = regions.signs[:, :, None] * (pi[:, :-1] - pi[:, 1:])
    free = ~regions.tau_mask[None, :, None]
    inside &= np.all((steps >= 0.0) | ~free, axis=1)
    if variant != "gamma_star":
        inside &= np.all(t + steps <= 1.0, axis=1)
    if variant == "banded_I":
        inside &= np.all((steps <= alpha) | ~free, axis=1)
    elif variant == "banded_II":
        inside &= np.all(pi[:, :-1] <= alpha, axis=1)
    return inside


@dataclass
class _Estimate:
    mean: np.ndarray
    cov: np.ndarray
    var: np.ndarray


def _integrate(
    h: int,
    items: Sequence[Tuple[_Regions, np.ndarray, np.ndarray]],
    mc_samples: int,
    seed: int,
    variant: str,
    alpha: float,
) -> Tuple[_Estimate, _Estimate]:
    """
    Monte Carlo means of linear functionals of the region indicators.

    Each item is (regions, joint weights (signs, K1), diagonal weights (signs, K2_i)).
    Returns the K1 estimates with their full covariance and the diagonal estimates
    of all items, concatenated in item order, with variances only. Uniform
    points come from stream ``h`` of ``seed``, so every call with the same
    (h, seed, mc_samples) sees the same points.
    """
    if mc_samples < MIN_MC_SAMPLES:
        raise GuardError(f"mc_samples must be >= {MIN_MC_SAMPLES}, got {mc_samples}")
    k1 = items[0][1].shape[1] if items else 0
    widths = [w2.shape[1] for _, _, w2 in items]
    starts = np.cumsum([0] + widths)
    sum1, cross1 = np.zeros(k1), np.zeros((k1, k1))
    sum2, square2 = np.zeros(starts[-1]), np.zeros(starts[-1])
    live = [
        (r, w1, w2, starts[i]) for i, (r, w1, w2) in enumerate(items)
        if r.sign_index and (np.any(w1) or np.any(w2))
    ]

    rng = stream_generator(seed, h)
    remaining = int(mc_samples)
    while remaining > 0:
        size = min(CHUNK, remaining)
        U = rng.random((size, h + 1))
        out1 = np.zeros((size, k1))
        for regions, w1, w2, start in live:
            hits = _indicators(regions, U, variant, alpha).T.astype(float)
            out1 += hits @ w1
            if w2.shape[1]:
                out2 = hits @ w2
                sum2[start:start + w2.shape[1]] += out2.sum(axis=0)
                square2[start:start + w2.shape[1]] += (out2**2).sum(axis=0)
        sum1 += out1.sum(axis=0)
        cross1 += out1.T @ out1
        remaining -= size

    N = float(mc_samples)
    scale = 1.0 / alpha if variant == "banded_II" else 1.0
    mean1, mean2 = sum1 / N, sum2 / N
    cov1 = (cross1 / N - np.outer(mean1, mean1)) / (N - 1.0)
    var2 = np.maximum(square2 / N - mean2**2, 0.0) / (N - 1.0)
    joint = _Estimate(mean1 * scale, cov1 * scale**2, np.diag(cov1) * scale**2)
    diag = _Estimate(mean2 * scale, np.zeros((0, 0)), var2 * scale**2)
    return joint, diag


def _check_variant(variant: str, alpha: float) -> None:
    if variant not in VARIANTS:
        raise GuardError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if not 0.0 < alpha <= 1.0:
        raise GuardError(f"alpha must lie in (0, 1], got {alpha}")


# --- Word weights ---

def _word_weight(
    sys: WordSystem, mc_samples: int, seed: int, variant: str, alpha: float
) -> Tuple[float, float]:
    if mc_samples < MIN_MC_SAMPLES:
        raise GuardError(f"mc_samples must be >= {MIN_MC_SAMPLES}, got {mc_samples}")
    regions = _regions(sys.word.partition)
    mask = sys.system.admissible(np.array(sys.word.offsets, dtype=int))[0]
    weights = mask[list(regions.sign_index)].astype(float)[:, None]
    if not weights.any():
        return 0.0, 0.0
    _, diag = _integrate(sys.word.h, [(regions, np.zeros((weights.shape[0], 0)), weights)],
                         mc_samples, seed, variant, alpha)
    return float(diag.mean[0]), float(math.sqrt(diag.var[0]))


def estimate_pw(sys: WordSystem, mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> Tuple[float, float]:
    """
    Limit weight p_w of a word for Gamma_n, with its Monte Carlo standard error.

    A word whose closing identity fails for every sign returns (0.0, 0.0) without
    sampling.
    """
    return _word_weight(sys, mc_samples, seed, "gamma", 1.0)


def estimate_pw_banded(
    sys: WordSystem,
    alpha: float,
    variant: str = "I",
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> Tuple[float, float]:
    """Word weight for the Type I or Type II band with m_n / n -> alpha."""
    if variant not in ("I", "II"):
        raise GuardError(f"banding variant must be 'I' or 'II', got {variant!r}")
    _check_variant(f"banded_{variant}", alpha)
    return _word_weight(sys, mc_samples, seed, f"banded_{variant}", alpha)


def estimate_pw_star(sys: WordSystem, mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> Tuple[float, float]:
    """Word weight for Gamma_n*, the full-window estimator."""
    return _word_weight(sys, mc_samples, seed, "gamma_star", 1.0)


# --- Weight tables and limit moments ---

def weight_classes(h: int, d: int) -> List[Tuple[int, ...]]:
    """S_{h,d}: all (k_0..k_d) of non-negative integers summing to h."""
    if d == 0:
        return [(h,)]
    return [(k0,) + rest for k0 in range(h, -1, -1) for rest in weight_classes(h - k0, d - 1)]


def _class_matrix(grid: np.ndarray, d: int, classes: List[Tuple[int, ...]]) -> np.ndarray:
    """One-hot (offset rows, classes) by magnitude counts."""
    counts = np.stack([np.sum(np.abs(grid) == i, axis=1) for i in range(d + 1)], axis=1)
    lookup = {k: c for c, k in enumerate(classes)}
    onehot = np.zeros((grid.shape[0], len(classes)))
    onehot[np.arange(grid.shape[0]), [lookup[tuple(row)] for row in counts]] = 1.0
    return onehot


@dataclass(frozen=True)
class WeightTable:
    """
    p_k for every k in S_{h,d}, with the Monte Carlo covariance of the estimates.
    """

    h: int
    d: int
    classes: Tuple[Tuple[int, ...], ...]
    p: np.ndarray
    cov: np.ndarray
    variant: str = "gamma"
    alpha: float = 1.0

    def moment(self, gamma: Sequence[float]) -> Tuple[float, float]:
        """beta = sum_k p_k prod_i gamma(i)^{k_i} and its standard error."""
        g = self.coefficients(gamma)
        return float(g @ self.p), float(math.sqrt(max(g @ self.cov @ g, 0.0)))

    def coefficients(self, gamma: Sequence[float]) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=float)
        if gamma.size != self.d + 1:
            raise GuardError(f"need gamma(0..{self.d}), got {gamma.size} values")
        return np.array([np.prod(gamma ** np.array(k)) for k in self.classes])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "k": [",".join(map(str, k)) for k in self.classes],
            "p": self.p,
            "se": np.sqrt(np.maximum(np.diag(self.cov), 0.0)),
        })


def _check_orders(h: int, d: int, h_max: int, d_max: int) -> None:
    if not 1 <= h <= h_max:
        raise GuardError(f"h must satisfy 1 <= h <= {h_max}, got {h}")
    if not 0 <= d <= d_max:
        raise GuardError(f"d must satisfy 0 <= d <= {d_max}, got {d}")


def _joint_tables(
    h: int,
    ds: Sequence[int],
    mc_samples: int,
    seed: int,
    variant: str,
    alpha: float,
    signatures: Optional[int] = None,
) -> Tuple[List[WeightTable], np.ndarray, Optional[Tuple[list, _Estimate]]]:
    """
    Weight tables for several d from one pass over shared points.

    Returns the tables, the covariance across all their entries (stacked in
    order) and, when ``signatures`` names an index into ``ds``, the per-word
    signature estimates for that d.
    """
    partitions = enumerate_pair_partitions(h, h_max=max(h, H_MAX))
    grids = {d: offset_grid(h, d) for d in ds}
    classes = {d: weight_classes(h, d) for d in ds}
    onehots = {d: _class_matrix(grids[d], d, classes[d]) for d in ds}

    items = []
    word_groups = []
    for partition in partitions:
        regions = _regions(partition)
        system = partition_system(partition)
        blocks = []
        for d in ds:
            admissible = system.admissible(grids[d])[:, list(regions.sign_index)].astype(float)
            blocks.append(admissible.T @ onehots[d])
        w1 = np.concatenate(blocks, axis=1) if blocks else np.zeros((len(regions.sign_index), 0))
        if signatures is None:
            w2 = np.zeros((len(regions.sign_index), 0))
        else:
            d = ds[signatures]
            admissible = system.admissible(grids[d])[:, list(regions.sign_index)]
            if regions.sign_index:
                patterns, inverse = np.unique(admissible, axis=0, return_inverse=True)
            else:
                patterns, inverse = np.zeros((1, 0), dtype=bool), np.zeros(grids[d].shape[0], dtype=int)
            word_groups.append((partition, grids[d], inverse.ravel(), len(patterns)))
            w2 = patterns.T.astype(float)
        items.append((regions, w1, w2))

    joint, diag = _integrate(h, items, mc_samples, seed, variant, alpha)
    tables, start = [], 0
    for d in ds:
        size = len(classes[d])
        tables.append(WeightTable(
            h=h, d=d, classes=tuple(classes[d]),
            p=joint.mean[start:start + size],
            cov=joint.cov[start:start + size, start:start + size],
            variant=variant, alpha=alpha,
        ))
        start += size
    words = (word_groups, diag) if signatures is not None else None
    return tables, joint.cov, words


def limit_weight_table(
    h: int,
    d: int,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    variant: str = "gamma",
    alpha: float = 1.0,
    h_max: int = H_MAX,
    d_max: int = D_MAX,
) -> WeightTable:
    """p_k^(d) = sum over words with magnitude counts k of p_w, for all k in S_{h,d}."""
    _check_orders(h, d, h_max, d_max)
    _check_variant(variant, alpha)
    tables, _, _ = _joint_tables(h, [d], mc_samples, seed, variant, alpha)
    return tables[0]


def gaussian_bound(theta: Sequence[float], h: int) -> float:
    """c_h = 4^h (2h)! / h! * (sum |theta_k|)^{2h}."""
    if h < 1:
        raise GuardError(f"h must be >= 1, got {h}")
    total = float(np.sum(np.abs(np.asarray(theta, dtype=float))))
    return float(4**h * math.factorial(2 * h) // math.factorial(h)) * total ** (2 * h)


def carleman_partial_sums(theta: Sequence[float], H: int = 10) -> np.ndarray:
    """sum_{h <= H'} c_{2h}^{-1/(2h)} for H' = 1..H, evaluated in logs."""
    total = float(np.sum(np.abs(np.asarray(theta, dtype=float))))
    if total <= 0:
        raise GuardError("theta must not vanish")
    terms = []
    for h in range(1, H + 1):
        order = 2 * h
        log_c = order * math.log(4.0) + math.lgamma(2 * order + 1) - math.lgamma(order + 1) + 2 * order * math.log(total)
        terms.append(math.exp(-log_c / order))
    return np.cumsum(terms)


@dataclass(frozen=True)
class MomentReport:
    """
    Limit moment beta_{h,d} with its Monte Carlo error and per-word weights.

    ``words`` rows carry partition, offsets, p_w and se; it is empty when the
    word count exceeds ``WORD_TABLE_LIMIT``.
    """

    h: int
    d: int
    theta: Tuple[float, ...]
    beta: float
    se: float
    c_h: float
    variant: str = "gamma"
    alpha: float = 1.0
    table: Optional[WeightTable] = None
    words: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def within_bound(self) -> bool:
        return abs(self.beta) <= self.c_h + 3.0 * self.se

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "version": acvspectra.__version__,
            "h": self.h,
            "d": self.d,
            "theta": list(self.theta),
            "variant": self.variant,
            "alpha": self.alpha,
            "beta": self.beta,
            "se": self.se,
            "c_h": self.c_h,
            "words": self.words,
        }
        if self.table is not None:
            out["weights"] = self.table.to_frame().to_dict(orient="records")
        return out

    def to_json(self, **kwargs: Any) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _word_rows(word_groups: list, diag: _Estimate) -> List[Dict[str, Any]]:
    rows, start = [], 0
    for partition, grid, inverse, count in word_groups:
        for offsets, sig in zip(grid, inverse):
            column = start + int(sig)
            rows.append({
                "partition": [list(p) for p in partition.pairs],
                "offsets": [int(v) for v in offsets],
                "label": word_label(Word(partition, tuple(offsets))),
                "p_w": float(diag.mean[column]),
                "se": float(math.sqrt(diag.var[column])),
            })
        start += count
    return rows


def beta_limit(
    theta: Sequence[float],
    h: int,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    variant: str = "gamma",
    alpha: float = 1.0,
    h_max: int = H_MAX,
    d_max: int = D_MAX,
    word_table: bool = True,
) -> MomentReport:
    """
    Limit moment beta_{h,d} of the chosen estimator for MA coefficients theta.

    Raises:
        GuardError: When h > h_max, d > d_max or the variant/alpha is invalid.
    """
    theta = tuple(float(v) for v in theta)
    d = len(theta) - 1
    _check_orders(h, d, h_max, d_max)
    _check_variant(variant, alpha)

    word_count = len(enumerate_pair_partitions(h, h_max=max(h, H_MAX))) * (2 * d + 1) ** h
    with_words = word_table and word_count <= WORD_TABLE_LIMIT
    if word_table and not with_words:
        logger.info("skipping per-word table for h=%d, d=%d (more than %d words)", h, d, WORD_TABLE_LIMIT)
    tables, _, words = _joint_tables(h, [d], mc_samples, seed, variant, alpha, signatures=0 if with_words else None)
    table = tables[0]
    beta, se = table.moment(acvf_table(theta).gamma)
    report = MomentReport(
        h=h, d=d, theta=theta, beta=beta, se=se, c_h=gaussian_bound(theta, h),
        variant=variant, alpha=alpha, table=table,
        words=_word_rows(*words) if words is not None else [],
    )
    if not report.within_bound:
        logger.warning("beta_%d = %.6g exceeds the Gaussian bound %.6g", h, beta, report.c_h)
    logger.info("beta_%d(theta=%s, %s) = %.6g +- %.2g", h, theta, variant, beta, se)
    return report


def beta_star_limit(theta: Sequence[float], h: int, mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0, **kwargs: Any) -> MomentReport:
    """Limit moment of Gamma_n*."""
    return beta_limit(theta, h, mc_samples, seed, variant="gamma_star", **kwargs)


def beta_banded_zero(theta: Sequence[float], h: int, h_max: int = H_MAX, d_max: int = D_MAX) -> float:
    """
    Exact limit moment of banded and tapered estimators with m_n / n -> 0.

    Only the partition {i, i+h} contributes; each of its words counts the
    admissible signs, for which every pi-step is forced and the steps must sum
    to zero. No sampling is involved.
    """
    theta = tuple(float(v) for v in theta)
    d = len(theta) - 1
    _check_orders(h, d, h_max, d_max)
    partition = PairPartition(tuple((i, i + h) for i in range(1, h + 1)))
    grid = offset_grid(h, d)
    counts = partition_system(partition).admissible(grid).sum(axis=1)
    gamma = np.array(acvf_table(theta).gamma)
    return float(np.sum(counts * np.prod(gamma[np.abs(grid)], axis=1)))


def beta_fU(acvf: AcvfTable, h: int) -> float:
    """integral_0^1 f_X(t)^h dt by adaptive quadrature."""
    if h < 1:
        raise GuardError(f"h must be >= 1, got {h}")
    value, _ = quad(lambda t: spectral_density(acvf, t) ** h, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10, limit=200)
    return float(value)


@dataclass(frozen=True)
class MonotoneReport:
    """
    beta_{h,d'} for the prefixes theta_0..theta_{d'}, d' = 0..d.

    ``gap_se[i]`` is the joint standard error of beta[i+1] - beta[i];
    ``padding_gap`` is the largest |p^(d')_k - p^(d'+1)_{k,0}| in units of its
    joint standard error (0 when both agree exactly).
    """

    h: int
    betas: np.ndarray
    ses: np.ndarray
    gap_se: np.ndarray
    monotone: bool
    padding_gap: float
    padding_ok: bool


def check_monotone(
    theta_nonneg: Sequence[float],
    h: int,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    h_max: int = H_MAX,
    d_max: int = D_MAX,
) -> MonotoneReport:
    """
    Check beta_{h,d'-1} <= beta_{h,d'} + 3 se along the prefixes of a
    non-negative theta, and the padding identity p^(d)_k = p^(d+1)_{k,0}.

    Raises:
        GuardError: On a negative coefficient or guard violations.
    """
    theta = tuple(float(v) for v in theta_nonneg)
    if any(v < 0 for v in theta):
        raise GuardError(f"theta must be non-negative, got {theta}")
    d = len(theta) - 1
    _check_orders(h, d, h_max, d_max)
    ds = list(range(d + 1))
    tables, cov, _ = _joint_tables(h, ds, mc_samples, seed, "gamma", 1.0)

    starts = np.cumsum([0] + [len(t.classes) for t in tables])
    gradients = []
    for dd, table in enumerate(tables):
        g = np.zeros(cov.shape[0])
        g[starts[dd]:starts[dd + 1]] = table.coefficients(acvf_table(theta[:dd + 1]).gamma)
        gradients.append(g)
    G = np.array(gradients)
    betas = np.array([g @ np.concatenate([t.p for t in tables]) for g in G])
    ses = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", G, cov, G), 0.0))
    diffs = G[1:] - G[:-1]
    gap_se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", diffs, cov, diffs), 0.0))
    monotone = bool(np.all(betas[:-1] <= betas[1:] + 3.0 * gap_se + 1e-12))

    padding_gap = 0.0
    padding_ok = True
    for dd in range(d):
        small, large = tables[dd], tables[dd + 1]
        lookup = {k: c for c, k in enumerate(large.classes)}
        for c, k in enumerate(small.classes):
            padded = lookup[k + (0,)]
            i, j = starts[dd] + c, starts[dd + 1] + padded
            gap = abs(small.p[c] - large.p[padded])
            se = math.sqrt(max(cov[i, i] + cov[j, j] - 2.0 * cov[i, j], 0.0))
            if gap > 3.0 * se + 1e-12:
                padding_ok = False
            if gap > 0:
                padding_gap = max(padding_gap, gap / se if se > 0 else math.inf)
    if not monotone:
        logger.warning("limit moments along the prefixes of %s are not monotone: %s", theta, betas)
    return MonotoneReport(h, betas, ses, gap_se, monotone, padding_gap, padding_ok)
