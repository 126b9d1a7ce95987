"""
Autocovariance matrix estimators.

Builders for the sample ACVM Gamma_n, its full-window variant Gamma_n*, the Type I
(banded) and Type II (principal submatrix) band estimators, kernel-tapered
estimators and the population ACVM Sigma_n.

Sample autocovariances always use the divisor n, never n - k; the limit theory
depends on that normalisation. Storage is dense; n <= 4000 is the intended range.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Union

import numpy as np
import pandas as pd
import scipy.linalg

from acvspectra.errors import GuardError
from acvspectra.timeseries.process import AcvfTable, SampleSeries

logger = logging.getLogger(__name__)

KERNELS = ("truncation", "bartlett", "parzen")

SeriesLike = Union[SampleSeries, np.ndarray]


@dataclass(frozen=True)
class SymMatrix:
    """
    Dense real symmetric matrix.

    ``params`` records the builder and its arguments for output metadata.
    """

    entries: np.ndarray
    params: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 1:
            raise GuardError(f"expected a non-empty square matrix, got shape {entries.shape}")
        # enforce exact symmetry from the upper triangle
        upper = np.triu(entries)
        entries = upper + np.triu(entries, 1).T
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def toeplitz(cls, first_column: np.ndarray, **params: Any) -> "SymMatrix":
        return cls(scipy.linalg.toeplitz(np.asarray(first_column, dtype=float)), params)

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return self.entries if dtype is None else self.entries.astype(dtype)

    def to_frame(self) -> pd.DataFrame:
        """Full square matrix, row-major, for CSV export."""
        return pd.DataFrame(self.entries)


@dataclass(frozen=True)
class KernelSpec:
    """
    Lag window K with bandwidth m: lag k gets weight K(k / m).

    All provided kernels have K(0) = 1, are symmetric, vanish for |x| > 1 and
    satisfy |K| <= 1.
    """

    kind: str = "bartlett"
    m: int = 1

    def __post_init__(self) -> None:
        if self.kind not in KERNELS:
            raise GuardError(f"kernel must be one of {KERNELS}, got {self.kind!r}")
        if int(self.m) < 1:
            raise GuardError(f"kernel bandwidth m must be >= 1, got {self.m}")

    def __call__(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        ax = np.abs(np.asarray(x, dtype=float))
        if self.kind == "truncation":
            values = (ax <= 1.0).astype(float)
        elif self.kind == "bartlett":
            values = np.where(ax <= 1.0, 1.0 - ax, 0.0)
        else:
            values = np.where(
                ax <= 0.5,
                1.0 - 6.0 * ax**2 + 6.0 * ax**3,
                np.where(ax <= 1.0, 2.0 * (1.0 - ax) ** 3, 0.0),
            )
        return float(values) if np.ndim(x) == 0 else values

    def lag_weights(self, n: int) -> np.ndarray:
        """K(k / m) for k = 0..n-1."""
        return self(np.arange(n) / float(self.m))


def _values(X: SeriesLike) -> np.ndarray:
    values = X.values if isinstance(X, SampleSeries) else np.asarray(X, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise GuardError("series must be a non-empty vector")
    return values


# --- Sample autocovariances ---

def sample_acvf(X: SeriesLike, k: int) -> float:
    """gamma_hat(k) = n^-1 sum_{i=1}^{n-k} X_i X_{i+k}; 0 once k >= n."""
    x = _values(X)
    if k < 0:
        raise GuardError(f"lag must be >= 0, got {k}")
    n = x.size
    if k >= n:
        return 0.0
    return float(np.dot(x[: n - k], x[k:]) / n)


def sample_acvf_vector(X: SeriesLike) -> np.ndarray:
    """gamma_hat(0..n-1) in one pass."""
    x = _values(X)
    n = x.size
    return np.correlate(x, x, mode="full")[n - 1:] / n


def sample_acvf_star(X: SeriesLike, k: int, n: int) -> float:
    """gamma*(k) = n^-1 sum_{i=1}^{n} X_i X_{i+k} over the full window."""
    x = _values(X)
    if n < 1 or not 0 <= k <= n - 1:
        raise GuardError(f"need 0 <= k <= n-1 and n >= 1, got k={k}, n={n}")
    if x.size < n + k:
        raise GuardError(f"series of length {x.size} too short for gamma*({k}) with n={n}")
    return float(np.dot(x[:n], x[k: k + n]) / n)


def sample_acvf_star_vector(X: SeriesLike, n: int) -> np.ndarray:
    """gamma*(0..n-1); needs the 2n - 1 observations X_1..X_{2n-1}."""
    x = _values(X)
    if n < 1:
        raise GuardError(f"n must be >= 1, got {n}")
    if x.size < 2 * n - 1:
        raise GuardError(f"gamma* with n={n} needs {2 * n - 1} observations, got {x.size}")
    return np.correlate(x[: 2 * n - 1], x[:n], mode="valid") / n


def bartlett_variance(acvf: AcvfTable, k: int, n: int, fourth_moment: float = 3.0) -> float:
    """
    Large-n variance of gamma_hat(k) for a linear process.

    (1/n) [ (eta - 3) gamma(k)^2 + sum_r (gamma(r)^2 + gamma(r+k) gamma(r-k)) ],
    with eta = E[eps^4].
    """
    d = acvf.d
    total = sum(acvf.at(r) ** 2 + acvf.at(r + k) * acvf.at(r - k) for r in range(-d - k, d + k + 1))
    return ((fourth_moment - 3.0) * acvf.at(k) ** 2 + total) / n


# --- Matrix builders ---

def build_gamma(X: SeriesLike) -> SymMatrix:
    """Sample ACVM Gamma_n = ((gamma_hat(|i-j|))), non-negative definite."""
    x = _values(X)
    return SymMatrix.toeplitz(sample_acvf_vector(x), builder="gamma", n=x.size)


def lag_matrix(X: SeriesLike) -> np.ndarray:
    """
    The n x 2n factor A with Gamma_n = A A^T.

    A[i, j] = X_{j-i} / sqrt(n) when 1 <= j - i <= n (1-based), 0 otherwise.
    """
    x = _values(X)
    n = x.size
    A = np.zeros((n, 2 * n))
    rows = np.arange(n)
    for lag in range(1, n + 1):
        A[rows, rows + lag] = x[lag - 1]
    return A / math.sqrt(n)


def build_gamma_star(X: SeriesLike, n: int) -> SymMatrix:
    """Gamma_n* = ((gamma*(|i-j|))); need not be non-negative definite."""
    return SymMatrix.toeplitz(sample_acvf_star_vector(X, n), builder="gamma_star", n=n)


def _check_band(m: int, n: int) -> None:
    if not 1 <= m <= n:
        raise GuardError(f"band parameter m must satisfy 1 <= m <= n={n}, got {m}")


def build_banded_I(X: SeriesLike, m: int) -> SymMatrix:
    """Type I band: Gamma_n with gamma_hat(k) replaced by 0 whenever |k| >= m."""
    x = _values(X)
    _check_band(m, x.size)
    column = sample_acvf_vector(x)
    column[m:] = 0.0
    return SymMatrix.toeplitz(column, builder="banded_I", n=x.size, m=m)


def build_banded_II(X: SeriesLike, m: int) -> SymMatrix:
    """Type II band: the leading m x m principal submatrix of Gamma_n."""
    x = _values(X)
    _check_band(m, x.size)
    column = sample_acvf_vector(x)[:m]
    return SymMatrix.toeplitz(column, builder="banded_II", n=x.size, m=m)


def build_tapered(X: SeriesLike, K: KernelSpec) -> SymMatrix:
    """Tapered ACVM ((K((i-j)/m) gamma_hat(i-j)))."""
    x = _values(X)
    column = sample_acvf_vector(x) * K.lag_weights(x.size)
    return SymMatrix.toeplitz(column, builder="tapered", n=x.size, m=K.m, kernel=K.kind)


def build_sigma(acvf: AcvfTable, n: int) -> SymMatrix:
    """Population ACVM Sigma_n = ((gamma(i-j)))."""
    if n < 1:
        raise GuardError(f"n must be >= 1, got {n}")
    column = np.array([acvf.at(k) for k in range(n)])
    return SymMatrix.toeplitz(column, builder="sigma", n=n)


def min_eigenvalue_floor(A: SymMatrix, rel_tol: float = 1e-9) -> float:
    """Most negative eigenvalue tolerated by the non-negative-definiteness check."""
    return -rel_tol * abs(float(A.entries[0, 0])) * A.n
