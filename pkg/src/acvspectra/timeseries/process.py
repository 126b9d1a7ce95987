"""
Linear (moving-average) processes.

This module defines innovation laws and MA(d) processes, simulates them with
reproducible counter-based random streams, and evaluates the theoretical objects
the limit theory is stated in terms of:

- innovation streams with mean 0 and variance 1 (gaussian, rademacher,
  uniform_scaled, custom_bounded)
- X_t = sum_k theta_k eps_{t-k}, with MA(infinity) realised by truncation
- the autocovariance function gamma(k) and spectral density f_X(t)
- i.i.d. draws of f_X(U), U ~ Uniform(0, 1], the reference limit for Sigma_n
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from acvspectra import config as cfg
from acvspectra.errors import ConfigError, GuardError
from acvspectra.spectra.spectra import EmpiricalDistribution

logger = logging.getLogger(__name__)

LAWS = ("gaussian", "rademacher", "uniform_scaled", "custom_bounded")
DEFAULT_TAIL_TOL = 1e-3
VALIDATION_DRAWS = 100_000

Sampler = Callable[[np.random.Generator, int], np.ndarray]


# --- Random streams ---

def stream_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """
    Counter-based generator for the stream (seed, stream).

    Philox is keyed by the seed sequence, so draw ``i`` of stream ``s`` is a fixed
    function of (seed, s, i) and different streams never share draws.
    """
    sequence = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(master_seed: int, *keys: int) -> int:
    """Stable 63-bit child seed for ``hash(master_seed, keys...)``."""
    sequence = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# --- Innovations ---

@dataclass(frozen=True)
class InnovationSpec:
    """
    Innovation law with mean 0 and variance 1.

    Attributes:
        law: One of ``LAWS``.
        support_bound: Required for ``custom_bounded``; every draw satisfies
            ``|eps| <= support_bound``.
        sampler: Optional ``sampler(rng, size)`` for ``custom_bounded``. Without
            one, the symmetric three-point law on {-B, 0, B} with
            P(+-B) = 1/(2 B^2) is used (needs B >= 1).
    """

    law: str = "gaussian"
    support_bound: Optional[float] = None
    sampler: Optional[Sampler] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.law not in LAWS:
            raise GuardError(f"law must be one of {LAWS}, got {self.law!r}")
        if self.law != "custom_bounded":
            return
        if self.support_bound is None or not self.support_bound > 0:
            raise GuardError(f"custom_bounded needs a positive support_bound, got {self.support_bound}")
        if self.sampler is None and self.support_bound < 1:
            raise GuardError(
                f"three-point law needs support_bound >= 1 to have variance 1, got {self.support_bound}"
            )
        _validate_custom_law(self)

    @property
    def fourth_moment(self) -> float:
        """E[eps^4]; estimated from the validation sample for custom samplers."""
        if self.law == "gaussian":
            return 3.0
        if self.law == "rademacher":
            return 1.0
        if self.law == "uniform_scaled":
            return 9.0 / 5.0
        if self.sampler is None:
            # three-point law: 2 * (1 / (2 B^2)) * B^4
            return float(self.support_bound) ** 2
        draws = _draw(self, stream_generator(0, 0), VALIDATION_DRAWS)
        return float(np.mean(draws**4))


def _draw(spec: InnovationSpec, rng: np.random.Generator, length: int) -> np.ndarray:
    if spec.law == "gaussian":
        return rng.standard_normal(length)
    if spec.law == "rademacher":
        return np.where(rng.random(length) < 0.5, -1.0, 1.0)
    if spec.law == "uniform_scaled":
        root3 = math.sqrt(3.0)
        return rng.uniform(-root3, root3, length)
    if spec.sampler is not None:
        return np.asarray(spec.sampler(rng, length), dtype=float)
    bound = float(spec.support_bound)
    tail = 1.0 / (2.0 * bound * bound)
    u = rng.random(length)
    return np.where(u < tail, -bound, np.where(u < 2.0 * tail, bound, 0.0))


def _validate_custom_law(spec: InnovationSpec) -> None:
    draws = _draw(spec, stream_generator(0, 0), VALIDATION_DRAWS)
    if draws.shape != (VALIDATION_DRAWS,) or not np.all(np.isfinite(draws)):
        raise GuardError("custom sampler must return a finite vector of the requested length")
    if np.max(np.abs(draws)) > spec.support_bound:
        raise GuardError(f"custom sampler exceeded its support bound {spec.support_bound}")
    mean = draws.mean()
    var = draws.var()
    mean_se = math.sqrt(var / VALIDATION_DRAWS)
    var_se = math.sqrt(max(np.mean((draws - mean) ** 4) - var**2, 1e-12) / VALIDATION_DRAWS)
    if abs(mean) > 4.0 * mean_se + 1e-12:
        raise GuardError(f"custom law mean {mean:.4g} is not 0 within 4 standard errors")
    if abs(var - 1.0) > 4.0 * var_se + 1e-12:
        raise GuardError(f"custom law variance {var:.4g} is not 1 within 4 standard errors")


def make_innovations(spec: InnovationSpec, length: int, seed: int, stream: int = 0) -> np.ndarray:
    """
    Draw an i.i.d. innovation run.

    Args:
        spec: Innovation law.
        length: Number of draws (>= 1).
        seed: Master seed; the same (seed, stream) always gives the same run.
        stream: Stream id, so parallel replicates never share draws.

    Returns:
        np.ndarray: ``length`` innovations.

    Raises:
        GuardError: If length is not positive.
    """
    if length < 1:
        raise GuardError(f"length must be >= 1, got {length}")
    return _draw(spec, stream_generator(seed, stream), int(length))


# --- Processes ---

@dataclass(frozen=True)
class ProcessSpec:
    """
    MA(d) process X_t = sum_{k=0}^{d} theta_k eps_{t-k}.

    ``phi``/``tail_tol`` are set when the coefficients came from an AR(1)
    truncation, so the config round-trips and output metadata records d.
    """

    theta: Tuple[float, ...]
    innovations: InnovationSpec = field(default_factory=InnovationSpec)
    nonnegative: bool = False
    phi: Optional[float] = None
    tail_tol: Optional[float] = None

    def __post_init__(self) -> None:
        theta = tuple(float(v) for v in self.theta)
        object.__setattr__(self, "theta", theta)
        if not theta:
            raise GuardError("theta must not be empty")
        if theta[0] == 0.0:
            raise GuardError("theta[0] must be non-zero")
        if not all(math.isfinite(v) for v in theta):
            raise GuardError(f"theta must be finite, got {theta}")
        if self.nonnegative and any(v < 0 for v in theta):
            raise GuardError(f"nonnegative process has a negative coefficient: {theta}")

    @property
    def d(self) -> int:
        return len(self.theta) - 1

    def acvf(self) -> "AcvfTable":
        return acvf_table(self.theta)

    def to_config(self) -> Dict[str, object]:
        """Process keys of the flat config (law, theta or phi/tail_tol, support_bound)."""
        out: Dict[str, object] = {"law": self.innovations.law}
        if self.phi is not None:
            out["phi"] = self.phi
            out["tail_tol"] = self.tail_tol
        else:
            out["theta"] = list(self.theta)
        if self.innovations.support_bound is not None:
            out["support_bound"] = self.innovations.support_bound
        return out


def process_from_config(config: Dict[str, str]) -> ProcessSpec:
    """
    Build a ProcessSpec from flat config keys.

    Exactly one of ``theta`` and ``phi`` must be present.

    Raises:
        ConfigError: On missing or conflicting keys.
    """
    law = cfg.get_str(config, "law", "gaussian")
    bound = cfg.get_float(config, "support_bound")
    try:
        innovations = InnovationSpec(law=law, support_bound=bound)
    except GuardError as exc:
        raise ConfigError(str(exc)) from exc

    theta = cfg.get_float_list(config, "theta")
    phi = cfg.get_float(config, "phi")
    if (theta is None) == (phi is None):
        raise ConfigError("exactly one of 'theta' and 'phi' must be set")
    try:
        if phi is not None:
            tail_tol = cfg.get_float(config, "tail_tol", DEFAULT_TAIL_TOL)
            return ar1_truncation(phi, tail_tol, innovations=innovations)
        return ProcessSpec(theta=tuple(theta), innovations=innovations)
    except GuardError as exc:
        raise ConfigError(str(exc)) from exc


def ar1_truncation(
    phi: float,
    tail_tol: float = DEFAULT_TAIL_TOL,
    innovations: Optional[InnovationSpec] = None,
) -> ProcessSpec:
    """
    Truncate the AR(1) process with coefficient phi to MA(d).

    theta_k = phi^k for k = 0..d, with d the smallest order whose discarded tail
    sum_{k>d} |phi|^k = |phi|^(d+1) / (1 - |phi|) is at most ``tail_tol``.

    Raises:
        GuardError: If |phi| >= 1 or tail_tol <= 0.
    """
    if not abs(phi) < 1:
        raise GuardError(f"|phi| must be < 1, got {phi}")
    if not tail_tol > 0:
        raise GuardError(f"tail_tol must be positive, got {tail_tol}")
    r = abs(phi)
    d = 0
    while r > 0 and r ** (d + 1) / (1.0 - r) > tail_tol:
        d += 1
    theta = tuple(phi**k for k in range(d + 1))
    logger.debug("AR(1) phi=%s truncated at d=%d (tail_tol=%g)", phi, d, tail_tol)
    return ProcessSpec(
        theta=theta,
        innovations=innovations or InnovationSpec(),
        phi=float(phi),
        tail_tol=float(tail_tol),
    )


@dataclass(frozen=True)
class SampleSeries:
    """Simulated path X_1..X_L together with the spec and seed that produced it."""

    values: np.ndarray
    origin: Optional[ProcessSpec] = None
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.shape[0])


def ma_filter(theta: Sequence[float], innovations: np.ndarray) -> np.ndarray:
    """
    Apply the MA filter to an innovation run of length L + d.

    Returns:
        np.ndarray: X of length L with X_t = sum_k theta_k eps_{t+d-k}.
    """
    theta = np.asarray(theta, dtype=float)
    innovations = np.asarray(innovations, dtype=float)
    if theta.size == 0:
        raise GuardError("theta must not be empty")
    if innovations.size < theta.size:
        raise GuardError(f"need at least {theta.size} innovations, got {innovations.size}")
    return np.convolve(innovations, theta, mode="valid")


def simulate_ma(spec: ProcessSpec, length: int, seed: int, stream: int = 0) -> SampleSeries:
    """
    Simulate ``length`` consecutive values of the process.

    An innovation run of length ``length + d`` is drawn from (seed, stream) and
    filtered, so the same arguments reproduce the path bit for bit.
    """
    if length < 1:
        raise GuardError(f"length must be >= 1, got {length}")
    eps = make_innovations(spec.innovations, length + spec.d, seed, stream)
    return SampleSeries(values=ma_filter(spec.theta, eps), origin=spec, seed=seed)


# --- Theoretical second-order structure ---

@dataclass(frozen=True)
class AcvfTable:
    """gamma(0)..gamma(d); gamma(k) = 0 beyond d and gamma(-k) = gamma(k)."""

    gamma: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if not self.gamma:
            raise GuardError("an ACVF table needs gamma(0)")

    @property
    def d(self) -> int:
        return len(self.gamma) - 1

    def at(self, lag: int) -> float:
        lag = abs(int(lag))
        return self.gamma[lag] if lag <= self.d else 0.0

    @property
    def abs_sum(self) -> float:
        """sum_{k=-d}^{d} |gamma(k)|, which bounds the support of f_X(U)."""
        return abs(self.gamma[0]) + 2.0 * sum(abs(g) for g in self.gamma[1:])


def acvf_theoretical(theta: Sequence[float], lag: int) -> float:
    """gamma(lag) = sum_{k=0}^{d-lag} theta_k theta_{lag+k}; 0 when lag > d."""
    if lag < 0:
        raise GuardError(f"lag must be >= 0, got {lag}")
    theta = [float(v) for v in theta]
    d = len(theta) - 1
    if lag > d:
        return 0.0
    return float(sum(theta[k] * theta[lag + k] for k in range(d - lag + 1)))


def acvf_table(theta: Sequence[float]) -> AcvfTable:
    return AcvfTable(tuple(acvf_theoretical(theta, k) for k in range(len(theta))))


def spectral_density(acvf: AcvfTable, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    f_X(t) = sum_{k=-d}^{d} gamma(k) cos(2 pi t k), vectorised over t.
    """
    t_arr = np.asarray(t, dtype=float)
    lags = np.arange(1, acvf.d + 1)
    gamma = np.asarray(acvf.gamma[1:], dtype=float)
    values = acvf.gamma[0] + 2.0 * np.cos(2.0 * np.pi * np.multiply.outer(t_arr, lags)) @ gamma
    return float(values) if np.ndim(t) == 0 else values


def sample_fU(acvf: AcvfTable, count: int, seed: int) -> EmpiricalDistribution:
    """
    ``count`` i.i.d. draws of f_X(U) with U ~ Uniform(0, 1], as an equally
    weighted distribution.
    """
    if count < 1:
        raise GuardError(f"count must be >= 1, got {count}")
    u = 1.0 - stream_generator(seed, 0).random(int(count))
    return EmpiricalDistribution.from_samples(spectral_density(acvf, u))
