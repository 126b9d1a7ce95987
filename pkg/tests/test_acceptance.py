"""
Desk-scale reproduction runs. Deselected by default; run with ``pytest -m slow``.
"""

import math

import numpy as np
import pytest

from acvspectra.harness.experiments import (
    ExperimentConfig,
    compare,
    run_ensemble,
    run_figure1,
    run_limit_moments,
)
from acvspectra.moments.momentcalc import beta_limit, carleman_partial_sums, check_monotone, gaussian_bound
from acvspectra.moments.oracle import exact_moment_small, extrapolate_moment, white_noise_second_moment
from acvspectra.spectra.metrics import dbl_empirical, dbl_gram_bound, dbl_trace_bound
from acvspectra.spectra.spectra import eigenvalues_sym, esd, moment_trace
from acvspectra.timeseries.estimators import build_banded_I, build_gamma, build_gamma_star
from acvspectra.timeseries.process import (
    InnovationSpec,
    ProcessSpec,
    acvf_table,
    ar1_truncation,
    derive_seed,
    sample_fU,
    simulate_ma,
)

pytestmark = pytest.mark.slow

WORKERS = 4


def ensemble(process, **kwargs):
    settings = dict(process=process, n=1000, replicates=100, master_seed=2024, workers=WORKERS)
    settings.update(kwargs)
    return run_ensemble(ExperimentConfig(**settings))


def test_oracle_chain():
    ns = list(range(2, 13))
    values = [exact_moment_small((1.0,), n, 2) for n in ns]
    for n, value in zip(ns, values):
        assert value == pytest.approx(white_noise_second_moment(n), abs=1e-10)
    assert extrapolate_moment(ns[-5:], values[-5:]) == pytest.approx(5.0 / 3.0, rel=0.01)
    report = beta_limit((1.0,), 2, 1_000_000, seed=1)
    assert abs(report.beta - 5.0 / 3.0) <= max(3 * report.se, 0.02 * 5.0 / 3.0)


@pytest.mark.parametrize("theta,h", [((1.0, 1.0), 1), ((1.0, 1.0), 2), ((1.0, 1.0), 3), ((1.0,), 3)])
def test_limit_moment_matches_extrapolated_oracle(theta, h):
    ns = list(range(12, 19))
    values = [exact_moment_small(theta, n, h) for n in ns]
    extrapolated = extrapolate_moment(ns, values, degree=h + 1)
    report = beta_limit(theta, h, 1_000_000, seed=h)
    assert abs(report.beta - extrapolated) <= max(4 * report.se, 0.01 * abs(extrapolated))


def test_banded_limit_matches_half_band_matrix():
    report = beta_limit((1.0,), 2, 1_000_000, seed=2, variant="banded_I", alpha=0.5)
    values = [
        moment_trace(build_banded_I(simulate_ma(ProcessSpec(theta=(1.0,)), 3000, derive_seed(12, r)), 1500), 2)
        for r in range(3)
    ]
    assert np.mean(values) == pytest.approx(report.beta, rel=0.05)
    assert report.beta == pytest.approx(19.0 / 12.0, rel=0.01)


@pytest.mark.parametrize("theta", [(1.0,), (1.0, 1.0), (1.0, 0.5)])
def test_limit_moments_match_ensembles(theta):
    _, table = run_limit_moments(ProcessSpec(theta=theta), 4, mc_samples=1_000_000, seed=3,
                                 n=3000, replicates=50, workers=WORKERS)
    assert (table["rel_gap"] <= 0.05).all(), table


def test_universality():
    gaussian = ensemble(ProcessSpec(theta=(1.0, 0.5), innovations=InnovationSpec("gaussian")))
    rademacher = ensemble(ProcessSpec(theta=(1.0, 0.5), innovations=InnovationSpec("rademacher")), master_seed=2025)
    assert compare(gaussian, rademacher)["dbl"] <= 0.05


def test_consistency_at_zero_band():
    process = ar1_truncation(0.5, innovations=InnovationSpec("gaussian"))
    reference = sample_fU(process.acvf(), 100_000, seed=77)
    banded = ensemble(process, variant="banded_I", m_n=10)
    sigma = ensemble(process, variant="sigma", replicates=1)
    assert dbl_empirical(banded.pooled, reference).distance <= 0.05
    assert dbl_empirical(sigma.pooled, reference).distance <= 0.05


def test_consistency_of_tapered_band():
    process = ar1_truncation(0.5, innovations=InnovationSpec("gaussian"))
    reference = sample_fU(process.acvf(), 100_000, seed=78)
    tapered = ensemble(process, variant="tapered", m_n=30, kernel="bartlett")
    assert dbl_empirical(tapered.pooled, reference).distance <= 0.05


def test_consistency_of_principal_submatrix():
    # a 10 x 10 spectrum quantises f_X(U) into cells of mass 1/10: about (max f - min f) / 40
    process = ar1_truncation(0.5, innovations=InnovationSpec("gaussian"))
    reference = sample_fU(process.acvf(), 100_000, seed=79)
    sub = ensemble(process, variant="banded_II", m_n=10)
    assert dbl_empirical(sub.pooled, reference).distance <= 0.1


def test_degenerate_banded_limit():
    result = ensemble(ProcessSpec(theta=(1.0,)), variant="banded_I", m_n=2, n=2000, replicates=20)
    assert result.pooled.mass_within(1.0, 0.1) >= 0.99


def test_unbounded_support():
    result = ensemble(ProcessSpec(theta=(1.0, 1.0)), n=2000, replicates=50)
    assert (result.summary["max_eigenvalue"] > 4.0).mean() >= 0.95
    for r in range(5):
        eigs = eigenvalues_sym(build_gamma(simulate_ma(ProcessSpec(theta=(1.0, 1.0)), 2000, derive_seed(2024, r))))
        assert esd(eigs).mass_above(4.0) > 0


def test_gamma_star_properties():
    process = ProcessSpec(theta=(1.0, 1.0))
    n, replicates = 1000, 50
    negative, diffs = [], []
    for r in range(replicates):
        x = simulate_ma(process, 2 * n - 1, derive_seed(11, r))
        star = eigenvalues_sym(build_gamma_star(x, n))
        negative.append(np.mean(star < 0))
        diffs.append(np.mean(star**2) - moment_trace(build_gamma(x.values[:n]), 2))
    assert np.mean(negative) >= 0.01
    diffs = np.array(diffs)
    assert diffs.mean() - 3 * diffs.std(ddof=1) / math.sqrt(replicates) >= 0


@pytest.mark.parametrize("h", [2, 3])
def test_monotone_in_order(h):
    report = check_monotone((1.0, 1.0, 1.0), h, 1_000_000, seed=5)
    assert report.monotone
    assert report.padding_ok


def test_gaussian_bound_and_carleman():
    for theta in [(1.0,), (1.0, 1.0), (1.0, 0.5, 0.25)]:
        for h in range(1, 5):
            report = beta_limit(theta, h, 200_000, seed=h, word_table=False)
            assert report.c_h == gaussian_bound(theta, h)
            assert report.beta - 3 * report.se <= report.c_h
        assert np.all(np.isfinite(carleman_partial_sums(theta, 10)))


def test_perturbation_bounds():
    rng = np.random.default_rng(10)
    for _ in range(100):
        M, N = rng.standard_normal((2, 200, 200))
        A = (M + M.T) / math.sqrt(800)
        B = A + rng.uniform(0.01, 0.5) * (N + N.T) / math.sqrt(800)
        distance = dbl_empirical(esd(eigenvalues_sym(A)), esd(eigenvalues_sym(B))).distance
        assert distance <= dbl_trace_bound(A, B) + 1e-9
    for _ in range(100):
        F = rng.standard_normal((50, 80)) / math.sqrt(80)
        G = F + rng.uniform(0.01, 0.5) * rng.standard_normal((50, 80)) / math.sqrt(80)
        distance = dbl_empirical(esd(eigenvalues_sym(F @ F.T)), esd(eigenvalues_sym(G @ G.T))).distance
        assert distance <= dbl_gram_bound(F, G) + 1e-9


def test_sign_flip():
    plus = ensemble(ProcessSpec(theta=(1.0, 0.5)))
    minus = ensemble(ProcessSpec(theta=(1.0, -0.5)), master_seed=2026)
    assert compare(plus, minus)["dbl"] <= 0.05
    for h in range(1, 5):
        a = beta_limit((1.0, 0.5), h, 200_000, seed=h)
        b = beta_limit((1.0, -0.5), h, 200_000, seed=h)
        g = a.table.coefficients(acvf_table((1.0, 0.5)).gamma) - a.table.coefficients(acvf_table((1.0, -0.5)).gamma)
        assert abs(a.beta - b.beta) <= 4 * math.sqrt(max(g @ a.table.cov @ g, 0.0)) + 1e-9


def test_figure1_preset():
    result = run_figure1(master_seed=1, n=1000, replicates=100, workers=WORKERS)
    assert set(result.densities) == {"gamma", "banded_half", "gamma_star", "banded_m10", "sigma"}
    for grid in result.densities.values():
        assert grid.integral() == pytest.approx(1.0, abs=1e-3)
    assert result.overlay_distance <= 0.05
