"""
Distances between spectral distributions and matrix-perturbation bounds for them.

The bounded-Lipschitz distance uses Dudley's convention: the supremum of
int f dP - int f dQ over functions with sup-norm <= 1 and Lipschitz constant <= 1.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse
from scipy.optimize import linprog

from acvspectra.errors import GuardError
from acvspectra.spectra.spectra import EmpiricalDistribution

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BLResult:
    """
    Attributes:
        distance: d_BL(P, Q), in [0, 2].
        support: Sorted union of both supports.
        witness: Optimal f on ``support``; |f| <= 1 and adjacent values differ by
            at most the gap between their atoms.
    """

    distance: float
    support: np.ndarray
    witness: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.support, "value": self.witness})


def _signed_masses(P: EmpiricalDistribution, Q: EmpiricalDistribution) -> Tuple[np.ndarray, np.ndarray]:
    """Union support and P - Q mass on each of its points."""
    support = np.unique(np.concatenate([P.atoms, Q.atoms]))
    masses = np.zeros(support.size)
    np.add.at(masses, np.searchsorted(support, P.atoms), P.weights)
    np.add.at(masses, np.searchsorted(support, Q.atoms), -Q.weights)
    return support, masses


class _ConcaveValue:
    """
    Concave piecewise-linear function on [-1, 1].

    Stored as the slope of the first segment, the value at -1 and the breakpoints
    with their slope decrements, split at the maximiser into a left deque (L) and
    a right deque (R). Each side carries a lazy position offset so dilation is O(1).
    """

    def __init__(self) -> None:
        self.left: deque = deque()
        self.right: deque = deque()
        self.left_shift = 0.0
        self.right_shift = 0.0
        self.slope = 0.0
        self.value = 0.0
        self.left_weight = 0.0

    def _mid_slope(self) -> float:
        return self.slope - self.left_weight

    def _pop_left(self, end: bool) -> list:
        item = self.left.pop() if end else self.left.popleft()
        self.left_weight = self.left_weight - item[1] if self.left else 0.0
        return item

    def add_linear(self, c: float) -> None:
        """V += c f."""
        self.slope += c
        self.value -= c
        self._rebalance()

    def _rebalance(self) -> None:
        # afterwards mid >= 0 unless L is empty
        while self._mid_slope() < 0 and self.left:
            pos, w = self._pop_left(end=True)
            self.right.appendleft([pos + self.left_shift - self.right_shift, w])
        while self.right and self.slope - (self.left_weight + self.right[0][1]) >= 0:
            pos, w = self.right.popleft()
            self.left.append([pos + self.right_shift - self.left_shift, w])
            self.left_weight += w

    def argmax_interval(self) -> Tuple[float, float]:
        """Maximising interval [lo, hi]; the function is flat on it."""
        mid = self._mid_slope()
        lo = self.left[-1][0] + self.left_shift if self.left else -1.0
        hi = self.right[0][0] + self.right_shift if self.right else 1.0
        if mid > 0:
            return hi, hi
        if mid < 0:
            return -1.0, -1.0
        return lo, hi

    def maximum(self) -> float:
        lo, _ = self.argmax_interval()
        value, slope, cur = self.value, self.slope, -1.0
        for pos, w in self.left:
            pos += self.left_shift
            if pos > lo:
                break
            value += slope * (pos - cur)
            cur, slope = pos, slope - w
        return value + slope * (lo - cur)

    def _flatten_top(self) -> None:
        """Make the slope between L and R exactly zero by inserting a breakpoint."""
        mid = self._mid_slope()
        if mid > 0:
            if self.right:
                top = self.right[0][0] + self.right_shift
                self.right[0][1] = max(self.right[0][1] - mid, 0.0)
            else:
                top = 1.0
            self.left.append([top - self.left_shift, mid])
            self.left_weight += mid
        elif mid < 0:
            self.right.appendleft([-1.0 - self.right_shift, -mid])
            self.slope = self.left_weight

    def dilate(self, gap: float) -> None:
        """V(f) <- max{V(f') : |f' - f| <= gap, f' in [-1, 1]}."""
        self._flatten_top()
        self.left_shift -= gap
        self.right_shift += gap
        # clip the left end back to -1, integrating the value along the way
        cur, slope = -1.0 - gap, self.slope
        while self.left and self.left[0][0] + self.left_shift <= -1.0:
            pos, w = self._pop_left(end=False)
            pos += self.left_shift
            self.value += slope * (pos - cur)
            cur, slope = pos, slope - w
        self.value += slope * (-1.0 - cur)
        self.slope = slope
        while self.right and self.right[-1][0] + self.right_shift >= 1.0:
            self.right.pop()


def dbl_empirical(P: EmpiricalDistribution, Q: EmpiricalDistribution) -> BLResult:
    """
    Exact bounded-Lipschitz distance between two discrete distributions.

    On the sorted union support the Lipschitz constraint only binds between
    adjacent atoms, so the optimisation is a chain: a backward pass keeps the
    value-to-go as a concave piecewise-linear function of the current f, and a
    forward pass recovers the witness.

    Returns:
        BLResult: distance in [0, 2] and an optimal witness.
    """
    support, masses = _signed_masses(P, Q)
    gaps = np.diff(support)
    size = support.size

    value = _ConcaveValue()
    value.add_linear(float(masses[-1]))
    intervals: List[Tuple[float, float]] = [(0.0, 0.0)] * size
    for i in range(size - 2, -1, -1):
        intervals[i + 1] = value.argmax_interval()
        value.dilate(float(gaps[i]))
        value.add_linear(float(masses[i]))
    intervals[0] = value.argmax_interval()
    distance = max(value.maximum(), 0.0)

    witness = np.empty(size)
    lo, hi = intervals[0]
    witness[0] = min(max(0.0, lo), hi)
    for i in range(1, size):
        lo, hi = intervals[i]
        prev, gap = witness[i - 1], gaps[i - 1]
        witness[i] = min(max(min(max(prev, lo), hi), prev - gap), prev + gap)
    np.clip(witness, -1.0, 1.0, out=witness)

    logger.debug("d_BL over %d support points: %.6g", size, distance)
    return BLResult(distance=float(distance), support=support, witness=witness)


def dbl_empirical_lp(P: EmpiricalDistribution, Q: EmpiricalDistribution) -> BLResult:
    """Same quantity as ``dbl_empirical`` from a generic LP solve (HiGHS)."""
    support, masses = _signed_masses(P, Q)
    size = support.size
    if size == 1:
        witness = np.array([math.copysign(1.0, masses[0]) if masses[0] else 0.0])
        return BLResult(abs(float(masses[0])), support, witness)
    gaps = np.diff(support)
    step = scipy.sparse.diags([-np.ones(size - 1), np.ones(size - 1)], [0, 1], shape=(size - 1, size))
    A_ub = scipy.sparse.vstack([step, -step]).tocsr()
    b_ub = np.concatenate([gaps, gaps])
    result = linprog(
        -masses, A_ub=A_ub, b_ub=b_ub, bounds=(-1.0, 1.0), method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if not result.success:
        raise GuardError(f"bounded-Lipschitz LP failed: {result.message}")
    return BLResult(distance=max(-float(result.fun), 0.0), support=support, witness=result.x)


def dbl_trace_bound(A, B) -> float:
    """sqrt((1/n) Tr (A - B)^2), an upper bound on d_BL of the two ESDs."""
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GuardError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(math.sqrt(np.sum((a - b) ** 2) / a.shape[0]))


def dbl_gram_bound(A: np.ndarray, B: np.ndarray) -> float:
    """
    Bound on d_BL between the ESDs of A A^T and B B^T for p x n factors.

    sqrt((2 / p^2) Tr(A A^T + B B^T) Tr((A - B)(A - B)^T))
    """
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise GuardError(f"shape mismatch: {a.shape} vs {b.shape}")
    p = a.shape[0]
    trace_sum = np.sum(a**2) + np.sum(b**2)
    return float(math.sqrt(2.0 / p**2 * trace_sum * np.sum((a - b) ** 2)))


def truncation_bound(theta_full: Sequence[float], d: int) -> float:
    """
    Asymptotic d_BL bound between the sample ACVM ESDs of a process and its
    truncation at order d: sqrt(2) * sum|theta_k| * sum_{k>d} |theta_k|.
    """
    theta = np.abs(np.asarray(theta_full, dtype=float))
    if d < 0:
        raise GuardError(f"d must be >= 0, got {d}")
    return float(math.sqrt(2.0) * theta.sum() * theta[d + 1:].sum())


def ks_distance(P: EmpiricalDistribution, Q: EmpiricalDistribution) -> float:
    """Sup-norm distance between the two CDFs."""
    support = np.unique(np.concatenate([P.atoms, Q.atoms]))
    return float(np.max(np.abs(P.cdf(support) - Q.cdf(support))))
