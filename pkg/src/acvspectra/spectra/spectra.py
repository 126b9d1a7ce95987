"""
Eigenvalues, empirical spectral distributions and density grids.

Every moment here is an eigenvalue power sum: one symmetric eigen-decomposition
serves all orders h, and no matrix power is ever formed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
import scipy.linalg
from sklearn.neighbors import KernelDensity

from acvspectra.errors import GuardError

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12
DEFAULT_GRID_SIZE = 512
DEFAULT_CUT = 3.0


@dataclass(frozen=True)
class EmpiricalDistribution:
    """
    Weighted atoms on the real line.

    Attributes:
        atoms: Sorted ascending.
        weights: Non-negative, summing to 1.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.size == 0:
            raise GuardError("a distribution needs at least one atom")
        if atoms.shape != weights.shape:
            raise GuardError(f"{atoms.size} atoms but {weights.size} weights")
        if not np.all(np.isfinite(atoms)):
            raise GuardError("atoms must be finite")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_TOL * max(1, atoms.size):
            raise GuardError("weights must be non-negative and sum to 1")
        order = np.argsort(atoms, kind="stable")
        atoms, weights = atoms[order], weights[order]
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_samples(cls, values: Union[Sequence[float], np.ndarray]) -> "EmpiricalDistribution":
        """Equal weight 1/n on each value."""
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise GuardError("a distribution needs at least one atom")
        return cls(values, np.full(values.size, 1.0 / values.size))

    @classmethod
    def pooled(cls, parts: Sequence["EmpiricalDistribution"]) -> "EmpiricalDistribution":
        """Mixture with mass proportional to each part's atom count (pooled ESD)."""
        if not parts:
            raise GuardError("nothing to pool")
        atoms = np.concatenate([p.atoms for p in parts])
        return cls.from_samples(atoms)

    def __len__(self) -> int:
        return int(self.atoms.size)

    def moment(self, h: int) -> float:
        return float(np.dot(self.weights, self.atoms**h))

    def mean(self) -> float:
        return self.moment(1)

    def cdf(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """P(atom <= x)."""
        cumulative = np.concatenate([[0.0], np.cumsum(self.weights)])
        idx = np.searchsorted(self.atoms, x, side="right")
        values = np.minimum(cumulative[idx], 1.0)
        return float(values) if np.ndim(x) == 0 else values

    def mass_above(self, x: float) -> float:
        return float(self.weights[self.atoms > x].sum())

    def mass_below(self, x: float) -> float:
        return float(self.weights[self.atoms < x].sum())

    def mass_within(self, center: float, radius: float) -> float:
        return float(self.weights[np.abs(self.atoms - center) <= radius].sum())

    def distinct_atoms(self) -> int:
        return int(np.unique(self.atoms).size)

    def std(self) -> float:
        mean = self.mean()
        return float(np.sqrt(max(np.dot(self.weights, (self.atoms - mean) ** 2), 0.0)))

    def quantile(self, q: float) -> float:
        cumulative = np.cumsum(self.weights)
        idx = int(np.searchsorted(cumulative, q, side="left"))
        return float(self.atoms[min(idx, self.atoms.size - 1)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.atoms, "value": self.weights})


@dataclass(frozen=True)
class DensityGrid:
    """Density estimate on an equispaced grid."""

    grid: np.ndarray
    values: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.grid, "value": self.values})


# --- Eigenvalues and moments ---

def eigenvalues_sym(A) -> np.ndarray:
    """
    All eigenvalues of a real symmetric matrix, ascending.

    LAPACK's symmetric solver (Householder tridiagonalisation followed by an
    implicit-shift/RRR tridiagonal stage) is deterministic for fixed input.

    Args:
        A: SymMatrix or square ndarray.

    Raises:
        GuardError: On non-finite entries, non-square or asymmetric input.
    """
    entries = np.asarray(A, dtype=float)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] == 0:
        raise GuardError(f"expected a non-empty square matrix, got shape {entries.shape}")
    if not np.all(np.isfinite(entries)):
        raise GuardError("matrix has non-finite entries")
    if not np.array_equal(entries, entries.T):
        raise GuardError("matrix is not symmetric")
    return scipy.linalg.eigvalsh(entries, check_finite=False)


def esd(eigs: Sequence[float]) -> EmpiricalDistribution:
    """Empirical spectral distribution: mass 1/n on each eigenvalue."""
    return EmpiricalDistribution.from_samples(np.asarray(eigs, dtype=float))


def power_moments(eigs: np.ndarray, h_max: int) -> np.ndarray:
    """(1/n) sum_i lambda_i^h for h = 1..h_max."""
    eigs = np.asarray(eigs, dtype=float)
    return np.array([np.mean(eigs**h) for h in range(1, h_max + 1)])


def moment_trace(A, h: int) -> float:
    """beta_h(A) = (1/n) Tr(A^h), computed as an eigenvalue power sum."""
    if h < 1:
        raise GuardError(f"h must be >= 1, got {h}")
    return float(np.mean(eigenvalues_sym(A) ** h))


# --- Kernel density grids ---

def silverman_bandwidth(dist: EmpiricalDistribution) -> float:
    """0.9 * min(sd, IQR / 1.34) * n^(-1/5), falling back to sd when the IQR is 0."""
    if dist.distinct_atoms() < 2:
        raise GuardError("automatic bandwidth needs at least two distinct atoms")
    spread = dist.std()
    iqr = dist.quantile(0.75) - dist.quantile(0.25)
    scale = min(spread, iqr / 1.34) if iqr > 0 else spread
    return 0.9 * scale * len(dist) ** (-0.2)


def kde(
    dist: EmpiricalDistribution,
    bandwidth: Optional[Union[float, str]] = "auto",
    grid_size: int = DEFAULT_GRID_SIZE,
    cut: float = DEFAULT_CUT,
) -> DensityGrid:
    """
    Gaussian kernel density estimate of a weighted distribution.

    Args:
        dist: Atoms and weights (a pooled ESD, an f_X(U) sample, ...).
        bandwidth: Positive real, or ``"auto"``/None for Silverman's rule.
        grid_size: Number of equispaced abscissae.
        cut: The grid covers [min atom - cut*bw, max atom + cut*bw].

    Returns:
        DensityGrid: Non-negative values integrating to 1 up to the truncated tails.

    Raises:
        GuardError: For a degenerate distribution with automatic bandwidth, or a
            non-positive bandwidth or grid size.
    """
    if bandwidth is None or bandwidth == "auto":
        bw = silverman_bandwidth(dist)
    else:
        bw = float(bandwidth)
    if not bw > 0:
        raise GuardError(f"bandwidth must be positive, got {bandwidth}")
    if grid_size < 2:
        raise GuardError(f"grid_size must be >= 2, got {grid_size}")

    grid = np.linspace(dist.atoms[0] - cut * bw, dist.atoms[-1] + cut * bw, int(grid_size))
    model = KernelDensity(kernel="gaussian", bandwidth=bw, rtol=1e-8)
    model.fit(dist.atoms[:, None], sample_weight=dist.weights)
    values = np.exp(model.score_samples(grid[:, None]))
    logger.debug("KDE on %d atoms, bandwidth %.4g, grid [%.4g, %.4g]", len(dist), bw, grid[0], grid[-1])
    return DensityGrid(grid=grid, values=values, bandwidth=bw)
