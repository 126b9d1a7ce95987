import pytest

from acvspectra.errors import GuardError
from acvspectra.moments.oracle import (
    exact_moment_small,
    extrapolate_moment,
    mc_moment,
    white_noise_second_moment,
)
from acvspectra.timeseries.process import InnovationSpec, ProcessSpec


def test_single_observation():
    assert exact_moment_small((1.0,), 1, 1) == pytest.approx(1.0)


def test_two_observations_second_moment():
    assert exact_moment_small((1.0,), 2, 2) == pytest.approx(1.25)


@pytest.mark.parametrize("n", [2, 5, 8, 12])
def test_white_noise_closed_form(n):
    assert exact_moment_small((1.0,), n, 2) == pytest.approx(white_noise_second_moment(n), abs=1e-10)


def test_first_moment_is_variance():
    assert exact_moment_small((1.0, 1.0), 6, 1) == pytest.approx(2.0)


def test_extrapolation_recovers_limit():
    ns = list(range(8, 13))
    values = [exact_moment_small((1.0,), n, 2) for n in ns]
    assert extrapolate_moment(ns, values) == pytest.approx(5.0 / 3.0, rel=0.01)


def test_extrapolate_exact_polynomial():
    ns = [2, 4, 8]
    values = [3.0 + 1.0 / n - 2.0 / n**2 for n in ns]
    assert extrapolate_moment(ns, values) == pytest.approx(3.0)
    with pytest.raises(GuardError):
        extrapolate_moment([2, 4], [1.0, 2.0])


@pytest.mark.parametrize("theta,n,h", [((1.0,), 0, 2), ((1.0,), 23, 2), ((1.0, 1.0), 22, 2), ((1.0,), 4, 5)])
def test_guards(theta, n, h):
    with pytest.raises(GuardError):
        exact_moment_small(theta, n, h)


def test_monte_carlo_agrees_with_enumeration():
    process = ProcessSpec(theta=(1.0, 0.5), innovations=InnovationSpec("rademacher"))
    exact = exact_moment_small(process.theta, 8, 3)
    mean, se = mc_moment(process, 8, 3, replicates=4000, seed=1)
    assert abs(mean - exact) <= 4 * se


def test_gaussian_monte_carlo_matches_rademacher_enumeration():
    theta = (1.0, 1.0)
    exact = exact_moment_small(theta, 8, 1)
    mean, se = mc_moment(ProcessSpec(theta=theta, innovations=InnovationSpec("gaussian")), 8, 1, replicates=4000, seed=2)
    assert exact == pytest.approx(2.0)
    assert abs(mean - exact) <= 4 * se


def test_mc_moment_needs_two_replicates():
    with pytest.raises(GuardError):
        mc_moment(ProcessSpec(theta=(1.0,)), 4, 2, replicates=1, seed=0)
