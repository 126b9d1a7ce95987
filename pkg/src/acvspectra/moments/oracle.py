"""
Finite-n reference values for the limit moments.

``exact_moment_small`` averages beta_h(Gamma_n) over every Rademacher innovation
vector, which gives E[beta_h] exactly for small n. Limit moments do not depend on
the innovation law, so extrapolating these values in 1/n gives an independent
check on the word-weight calculation.
"""

from __future__ import annotations

import itertools
import logging
import math
from typing import Sequence, Tuple

import numpy as np

from acvspectra.errors import GuardError
from acvspectra.spectra.spectra import moment_trace
from acvspectra.timeseries.estimators import build_gamma
from acvspectra.timeseries.process import ProcessSpec, simulate_ma

logger = logging.getLogger(__name__)

MAX_LENGTH = 22
MAX_ORDER = 4
BATCH = 1 << 14


def _trace_power(G: np.ndarray, h: int) -> np.ndarray:
    """Tr(G^h) for a batch of symmetric matrices, h <= 4."""
    if h == 1:
        return np.trace(G, axis1=1, axis2=2)
    if h == 2:
        return np.sum(G * G, axis=(1, 2))
    G2 = G @ G
    if h == 3:
        return np.sum(G2 * G, axis=(1, 2))
    return np.sum(G2 * G2, axis=(1, 2))


def exact_moment_small(theta: Sequence[float], n: int, h: int) -> float:
    """
    E[(1/n) Tr(Gamma_n^h)] under Rademacher innovations, by full enumeration.

    The first innovation is fixed to +1: flipping every sign leaves Gamma_n
    unchanged, so the remaining 2^(n+d-1) vectors carry the full average.

    Raises:
        GuardError: Unless n >= 1, n + d <= 22 and 1 <= h <= 4.
    """
    theta = np.asarray(theta, dtype=float)
    d = theta.size - 1
    if n < 1 or n + d > MAX_LENGTH:
        raise GuardError(f"need n >= 1 and n + d <= {MAX_LENGTH}, got n={n}, d={d}")
    if not 1 <= h <= MAX_ORDER:
        raise GuardError(f"h must satisfy 1 <= h <= {MAX_ORDER}, got {h}")

    length = n + d
    lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    total = 0.0
    count = 0
    signs = itertools.product((1.0, -1.0), repeat=length - 1)
    while True:
        chunk = list(itertools.islice(signs, BATCH))
        if not chunk:
            break
        eps = np.hstack([np.ones((len(chunk), 1)), np.array(chunk).reshape(len(chunk), length - 1)])
        # X_t = sum_k theta_k eps_{t+d-k}, one row per innovation vector
        X = sum(theta[k] * eps[:, d - k:d - k + n] for k in range(d + 1))
        acvf = np.stack([np.sum(X[:, : n - k] * X[:, k:], axis=1) / n for k in range(n)], axis=1)
        total += float(np.sum(_trace_power(acvf[:, lags], h)))
        count += len(chunk)
    logger.debug("exact moment over %d innovation vectors (n=%d, h=%d)", count, n, h)
    return total / (count * n)


def extrapolate_moment(ns: Sequence[int], values: Sequence[float], degree: int = 2) -> float:
    """
    Intercept of a least-squares polynomial in 1/n through (n, value) pairs.

    Raises:
        GuardError: With fewer than degree + 1 points.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.size < degree + 1:
        raise GuardError(f"need at least {degree + 1} matching points, got {ns.size} and {values.size}")
    return float(np.polynomial.polynomial.polyfit(1.0 / ns, values, degree)[0])


def white_noise_second_moment(n: int) -> float:
    """Closed form of E[beta_2(Gamma_n)] for Rademacher white noise."""
    return 1.0 + 2.0 / n**3 * sum(m * m for m in range(1, n))


def mc_moment(process: ProcessSpec, n: int, h: int, replicates: int, seed: int) -> Tuple[float, float]:
    """Plain Monte Carlo mean of beta_h(Gamma_n) and its standard error."""
    if replicates < 2:
        raise GuardError(f"replicates must be >= 2, got {replicates}")
    values = np.array([
        moment_trace(build_gamma(simulate_ma(process, n, seed, stream=r)), h) for r in range(replicates)
    ])
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(replicates))
