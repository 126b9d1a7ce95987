import math

import numpy as np
import pytest
from scipy.integrate import quad

from acvspectra.errors import GuardError
from acvspectra.timeseries.process import (
    InnovationSpec,
    ProcessSpec,
    acvf_table,
    acvf_theoretical,
    ar1_truncation,
    derive_seed,
    ma_filter,
    make_innovations,
    sample_fU,
    simulate_ma,
    spectral_density,
)


def test_rademacher_support():
    draws = make_innovations(InnovationSpec("rademacher"), 5, seed=11)
    assert set(np.unique(draws)) <= {-1.0, 1.0}


@pytest.mark.parametrize("law", ["gaussian", "rademacher", "uniform_scaled"])
def test_unit_variance(law):
    draws = make_innovations(InnovationSpec(law), 100_000, seed=3)
    fourth = np.mean(draws**4)
    se = math.sqrt((fourth - 1.0) / draws.size)
    assert abs(draws.var() - 1.0) < 4 * se + 1e-4
    assert abs(draws.mean()) < 4 / math.sqrt(draws.size)


def test_uniform_scaled_is_bounded():
    draws = make_innovations(InnovationSpec("uniform_scaled"), 10_000, seed=1)
    assert np.max(np.abs(draws)) <= math.sqrt(3.0)


def test_same_seed_same_draws():
    spec = InnovationSpec("gaussian")
    np.testing.assert_array_equal(make_innovations(spec, 4, 9), make_innovations(spec, 4, 9))


def test_streams_differ():
    spec = InnovationSpec("gaussian")
    assert not np.array_equal(make_innovations(spec, 4, 9, stream=0), make_innovations(spec, 4, 9, stream=1))


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(5, 1) == derive_seed(5, 1)
    assert derive_seed(5, 1) != derive_seed(5, 2)
    assert 0 <= derive_seed(5, 1) < 2**63


def test_custom_bounded_three_point_law():
    spec = InnovationSpec("custom_bounded", support_bound=2.0)
    draws = make_innovations(spec, 1000, seed=4)
    assert set(np.unique(draws)) <= {-2.0, 0.0, 2.0}
    assert spec.fourth_moment == 4.0


def test_custom_bounded_sampler_out_of_bound():
    with pytest.raises(GuardError):
        InnovationSpec("custom_bounded", support_bound=1.0, sampler=lambda rng, size: rng.uniform(-3, 3, size))


@pytest.mark.parametrize(
    "kwargs",
    [{"law": "cauchy"}, {"law": "custom_bounded"}, {"law": "custom_bounded", "support_bound": 0.5}],
)
def test_innovation_spec_rejects(kwargs):
    with pytest.raises(GuardError):
        InnovationSpec(**kwargs)


def test_identity_filter():
    eps = np.array([0.3, -1.2, 2.0])
    np.testing.assert_array_equal(ma_filter([1.0], eps), eps)


def test_ma1_filter_expansion():
    e0, e1, e2 = 1.0, 10.0, 100.0
    np.testing.assert_allclose(ma_filter([1.0, 1.0], [e0, e1, e2]), [e1 + e0, e2 + e1])


def test_filter_uses_theta_order():
    # X_t = theta_0 eps_t + theta_1 eps_{t-1}
    np.testing.assert_allclose(ma_filter([1.0, 0.5], [2.0, 4.0]), [4.0 + 0.5 * 2.0])


def test_simulate_ma_is_reproducible():
    process = ProcessSpec(theta=(1.0, 0.5))
    a = simulate_ma(process, 50, seed=8)
    b = simulate_ma(process, 50, seed=8)
    np.testing.assert_array_equal(a.values, b.values)
    assert len(a) == 50
    assert a.origin is process


def test_sample_lag_one_acvf():
    process = ProcessSpec(theta=(1.0, 0.5))
    x = simulate_ma(process, 1_000_000, seed=21).values
    gamma1 = np.dot(x[:-1], x[1:]) / x.size
    # Bartlett variance of gamma_hat(1) for this process: (gamma0^2 + 2 gamma1^2 + ...) / n
    se = math.sqrt((1.25**2 + 3 * 0.5**2) / x.size)
    assert abs(gamma1 - 0.5) < 4 * se


@pytest.mark.parametrize(
    "theta",
    [(0.0, 1.0), (), (1.0, float("nan"))],
)
def test_process_spec_rejects(theta):
    with pytest.raises(GuardError):
        ProcessSpec(theta=theta)


def test_nonnegative_flag():
    with pytest.raises(GuardError):
        ProcessSpec(theta=(1.0, -0.5), nonnegative=True)


class TestAr1Truncation:
    def test_half_gives_order_ten(self):
        process = ar1_truncation(0.5, 0.001)
        assert process.d == 10
        assert process.theta[3] == 0.125

    def test_zero_phi_is_white_noise(self):
        assert ar1_truncation(0.0, 0.1).theta == (1.0,)

    @pytest.mark.parametrize("phi,tol", [(0.5, 1e-2), (-0.9, 1e-3), (0.3, 1e-6)])
    def test_tail_within_tolerance(self, phi, tol):
        process = ar1_truncation(phi, tol)
        r = abs(phi)
        assert r ** (process.d + 1) / (1 - r) <= tol

    @pytest.mark.parametrize("phi,tol", [(1.0, 0.1), (-1.2, 0.1), (0.5, 0.0)])
    def test_rejects(self, phi, tol):
        with pytest.raises(GuardError):
            ar1_truncation(phi, tol)


@pytest.mark.parametrize(
    "theta,expected",
    [
        ((1.0, 1.0), (2.0, 1.0, 0.0)),
        ((1.0,), (1.0, 0.0, 0.0)),
        ((1.0, 0.5, 0.25), (1.3125, 0.625, 0.25)),
    ],
)
def test_acvf_theoretical(theta, expected):
    for lag, value in enumerate(expected):
        assert acvf_theoretical(theta, lag) == pytest.approx(value)


def test_acvf_lag_zero_is_power():
    theta = (0.7, -1.1, 0.4, 2.0)
    assert acvf_theoretical(theta, 0) == pytest.approx(sum(v * v for v in theta))


def test_acvf_table_is_even():
    table = acvf_table((1.0, 0.5))
    assert table.at(-1) == table.at(1) == 0.5
    assert table.at(5) == 0.0
    assert table.abs_sum == pytest.approx(2.25)


def test_spectral_density_ma1():
    acvf = acvf_table((1.0, 1.0))
    assert spectral_density(acvf, 1.0) == pytest.approx(4.0)
    assert spectral_density(acvf, 0.5) == pytest.approx(0.0, abs=1e-12)
    t = np.linspace(0.01, 1.0, 7)
    np.testing.assert_allclose(spectral_density(acvf, t), 2 + 2 * np.cos(2 * np.pi * t))


def test_spectral_density_white_noise_is_flat():
    np.testing.assert_allclose(spectral_density(acvf_table((1.0,)), np.linspace(0.1, 1, 5)), 1.0)


def test_spectral_density_integrates_to_variance():
    acvf = ar1_truncation(0.5, 1e-3).acvf()
    integral, _ = quad(lambda t: spectral_density(acvf, t), 0.0, 1.0)
    assert integral == pytest.approx(acvf.gamma[0])
    assert integral == pytest.approx(4.0 / 3.0, abs=2e-3)


def test_sample_fU_white_noise():
    dist = sample_fU(acvf_table((1.0,)), 100, seed=0)
    np.testing.assert_allclose(dist.atoms, 1.0)


def test_sample_fU_ma1_moments():
    dist = sample_fU(acvf_table((1.0, 1.0)), 100_000, seed=2)
    assert dist.atoms.min() >= 0.0 and dist.atoms.max() <= 4.0 + 1e-12
    se1 = math.sqrt(2.0 / len(dist))
    assert abs(dist.mean() - 2.0) < 4 * se1
    # Var f(U)^2 = E f^4 - 36 = 70 - 36
    se2 = math.sqrt(34.0 / len(dist))
    assert abs(dist.moment(2) - 6.0) < 4 * se2
