import math

import numpy as np
import pytest

from slln_lab.libs.distributions import (
    Constant,
    DistributionError,
    MomentNotFiniteError,
    Normal,
    SymmetricPareto,
    TwoPoint,
    Uniform,
    distribution_from_dict,
)

LEVELS = np.array([[0.5, 1.0, 2.0], [1.0, 3.0, 10.0]])


@pytest.mark.parametrize(
    "dist, alpha, expected",
    [
        (Normal(), 2.0, 1.0),
        (Normal(), 1.0, math.sqrt(2 / math.pi)),
        (Normal(), 4.0, 3.0),
        (Normal(sigma=2.0), 2.0, 4.0),
        (Normal(mu=1.0), 2.0, 2.0),
        (TwoPoint.symmetric(v=2.0), 1.5, 2.0**1.5),
        (Uniform(a=-1.0, b=1.0), 2.0, 1 / 3),
        (Uniform(a=0.0, b=2.0), 1.0, 1.0),
        (SymmetricPareto(gamma=3.0), 2.0, 3.0),
        (Constant(c=-2.0), 3.0, 8.0),
    ],
)
def test_abs_moment(dist, alpha, expected):
    assert dist.abs_moment(alpha) == pytest.approx(expected, rel=1e-9)


def test_even_moment_needs_even_order():
    assert Normal().even_moment(4) == pytest.approx(3.0)
    with pytest.raises(DistributionError):
        Normal().even_moment(3)


def test_normal_oracles():
    normal = Normal()

    assert normal.tail_prob(1.959963984540054) == pytest.approx(0.05, rel=1e-9)
    assert normal.tail_prob(0.0) == 1.0
    assert normal.trunc_mean(1.0) == 0.0
    assert normal.trunc_second(50.0) == pytest.approx(1.0, rel=1e-12)
    shifted = Normal(mu=1.0)
    assert shifted.trunc_mean(50.0) == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("quantity", ["tail_prob", "trunc_mean", "trunc_second", "trunc_var"])
@pytest.mark.parametrize(
    "dist",
    [Normal(), Normal(mu=0.5, sigma=2.0), TwoPoint(values=(-1.0, 3.0), probs=(0.75, 0.25)), Uniform(a=-1.0, b=2.0)],
)
def test_evaluate_many_matches_scalar_oracles(dist, quantity):
    expected = np.vectorize(getattr(dist, quantity))(LEVELS)

    assert np.allclose(dist.evaluate_many(quantity=quantity, levels=LEVELS), expected, rtol=1e-12, atol=1e-15)


def test_two_point_oracles():
    dist = TwoPoint(values=(-1.0, 3.0), probs=(0.75, 0.25))

    assert dist.mean == 0.0
    assert dist.variance == pytest.approx(3.0)
    assert not dist.is_symmetric
    assert dist.tail_prob(1.0) == 1.0
    assert dist.tail_prob(2.0) == 0.25
    assert dist.trunc_mean(2.0) == -0.75
    assert dist.trunc_var(2.0) == pytest.approx(0.75 - 0.75**2)
    assert TwoPoint.symmetric(v=1.0).is_symmetric


def test_two_point_probabilities_must_sum_to_one():
    with pytest.raises(DistributionError):
        TwoPoint(values=(0.0, 1.0), probs=(0.5, 0.6))


def test_uniform_truncation():
    dist = Uniform(a=-1.0, b=1.0)

    assert dist.tail_prob(0.5) == pytest.approx(0.5)
    assert dist.trunc_second(0.5) == pytest.approx(1 / 24)
    assert dist.trunc_second(2.0) == pytest.approx(1 / 3)


def test_symmetric_pareto_moments():
    dist = SymmetricPareto(gamma=1.5)

    assert dist.abs_moment(1.5) == math.inf
    assert dist.markov_order() == pytest.approx(1.25)
    assert dist.tail_prob(4.0) == pytest.approx(0.125)
    assert math.isinf(dist.variance)
    with pytest.raises(MomentNotFiniteError):
        SymmetricPareto(gamma=0.8).markov_order()


@pytest.mark.parametrize(
    "dist",
    [Normal(mu=1.0, sigma=2.0), TwoPoint(values=(-1.0, 3.0), probs=(0.75, 0.25)), Uniform(a=0.0, b=3.0)],
)
def test_ppf_is_nondecreasing_inside_support(dist):
    u = np.linspace(0.001, 0.999, 101)
    draws = dist.ppf(u)

    assert (np.diff(draws) >= 0).all()


def test_symmetric_pareto_ppf_tail():
    dist = SymmetricPareto(gamma=2.0, scale=1.0)
    draws = dist.ppf(np.array([0.005, 0.995]))

    assert draws.tolist() == pytest.approx([-10.0, 10.0])


def test_distribution_from_dict():
    assert distribution_from_dict({"family": "normal"}) == Normal()
    assert distribution_from_dict({"family": "two_point", "v": 2}) == TwoPoint.symmetric(v=2.0)
    assert distribution_from_dict({"family": "uniform", "a": -1, "b": 1}) == Uniform()
    assert distribution_from_dict({"family": "symmetric_pareto", "gamma": 3}).to_dict() == {
        "family": "symmetric_pareto",
        "gamma": 3.0,
        "scale": 1.0,
    }
    with pytest.raises(DistributionError):
        distribution_from_dict({"family": "cauchy"})
