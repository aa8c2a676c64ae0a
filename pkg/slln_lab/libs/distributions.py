"""
Marginal laws with analytic moment oracles.

Every law exposes the quantities the series conditions and the truncation inequalities are phrased in:
E|Z|^alpha, E Z^(2q), P(|Z| >= t) and the moments of the truncation Z * 1{|Z| < t}. The inverse CDF feeds the
counter-based samplers, so a single uniform per lattice point determines the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
from scipy import integrate, special, stats

from slln_lab.utils.constants import (
    CONSTANT_STR,
    NORMAL_STR,
    QUAD_ABS_TOLERANCE,
    SYMMETRIC_PARETO_STR,
    TWO_POINT_STR,
    UNIFORM_STR,
)
from slln_lab.utils.helpers import SllnLabError


class DistributionError(SllnLabError):
    pass


class MomentNotFiniteError(SllnLabError):
    pass


# Moment order used for Markov-type tail majorants of light-tailed laws.
LIGHT_TAIL_MARKOV_ORDER: float = 4.0


def _standard_pdf(x: Any) -> Any:
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class DistributionSpec:
    family: str = field(init=False, default="")

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    @property
    def is_symmetric(self) -> bool:
        return False

    def abs_moment(self, alpha: float) -> float:
        """E|Z|^alpha"""
        raise NotImplementedError

    def even_moment(self, order: int) -> float:
        """E Z^order for an even integer order."""
        if order < 0 or order % 2:
            raise DistributionError(f"even_moment needs a nonnegative even order, got {order}")

        return self.abs_moment(float(order))

    def tail_prob(self, t: float) -> float:
        """P(|Z| >= t)"""
        raise NotImplementedError

    def trunc_mean(self, t: float) -> float:
        """E[Z * 1{|Z| < t}]"""
        raise NotImplementedError

    def trunc_second(self, t: float) -> float:
        """E[Z^2 * 1{|Z| < t}]"""
        raise NotImplementedError

    def trunc_var(self, t: float) -> float:
        return max(self.trunc_second(t) - self.trunc_mean(t) ** 2, 0.0)

    def evaluate_many(self, quantity: str, levels: np.ndarray) -> np.ndarray:
        """Evaluate tail_prob, trunc_mean, trunc_second or trunc_var on an array of positive levels."""
        oracle = getattr(self, quantity)
        unique, inverse = np.unique(levels, return_inverse=True)
        evaluated = np.asarray([oracle(float(_level)) for _level in unique], dtype=np.float64)
        return evaluated[inverse].reshape(np.shape(levels))

    def markov_order(self) -> float:
        """A moment order alpha >= 1 with E|Z|^alpha finite, used for tail majorants."""
        return LIGHT_TAIL_MARKOV_ORDER

    def ppf(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF on uniforms in (0, 1)."""
        raise NotImplementedError

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(DistributionSpec):
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", NORMAL_STR)
        if self.sigma <= 0:
            raise DistributionError(f"normal sigma must be positive, got {self.sigma}")

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return self.sigma**2

    @property
    def is_symmetric(self) -> bool:
        return self.mu == 0

    def abs_moment(self, alpha: float) -> float:
        if self.mu == 0:
            return self.sigma**alpha * 2 ** (alpha / 2) * math.gamma((alpha + 1) / 2) / math.sqrt(math.pi)

        value, _ = integrate.quad(
            lambda x: abs(x) ** alpha * stats.norm.pdf(x, loc=self.mu, scale=self.sigma),
            -np.inf,
            np.inf,
            epsabs=QUAD_ABS_TOLERANCE,
        )
        return value

    def _limits(self, t: Any) -> Tuple[Any, Any]:
        return (-t - self.mu) / self.sigma, (t - self.mu) / self.sigma

    def _tail_prob(self, t: Any) -> Any:
        lower, upper = self._limits(t)
        return special.ndtr(-upper) + special.ndtr(lower)

    def _trunc_mean(self, t: Any) -> Any:
        lower, upper = self._limits(t)
        inside = special.ndtr(upper) - special.ndtr(lower)
        return self.mu * inside + self.sigma * (_standard_pdf(lower) - _standard_pdf(upper))

    def _trunc_second(self, t: Any) -> Any:
        lower, upper = self._limits(t)
        inside = special.ndtr(upper) - special.ndtr(lower)
        first = _standard_pdf(lower) - _standard_pdf(upper)
        second = inside + lower * _standard_pdf(lower) - upper * _standard_pdf(upper)
        return self.mu**2 * inside + 2 * self.mu * self.sigma * first + self.sigma**2 * second

    def tail_prob(self, t: float) -> float:
        return 1.0 if t <= 0 else float(self._tail_prob(t))

    def trunc_mean(self, t: float) -> float:
        if t <= 0 or self.is_symmetric:
            return 0.0

        return float(self._trunc_mean(t))

    def trunc_second(self, t: float) -> float:
        return 0.0 if t <= 0 else float(self._trunc_second(t))

    def evaluate_many(self, quantity: str, levels: np.ndarray) -> np.ndarray:
        levels = np.asarray(levels, dtype=np.float64)
        if quantity == "tail_prob":
            return self._tail_prob(levels)

        mean = np.zeros_like(levels) if self.is_symmetric else self._trunc_mean(levels)
        if quantity == "trunc_mean":
            return mean

        if quantity == "trunc_second":
            return self._trunc_second(levels)

        if quantity == "trunc_var":
            return np.maximum(self._trunc_second(levels) - mean**2, 0.0)

        return super().evaluate_many(quantity=quantity, levels=levels)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self.mu + self.sigma * special.ndtri(u)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": NORMAL_STR, "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class TwoPoint(DistributionSpec):
    """Finite discrete law; the name follows the common +-v case, any finite support is accepted."""

    values: Tuple[float, ...] = (-1.0, 1.0)
    probs: Tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", TWO_POINT_STR)
        object.__setattr__(self, "values", tuple(float(_val) for _val in self.values))
        object.__setattr__(self, "probs", tuple(float(_prob) for _prob in self.probs))
        if len(self.values) != len(self.probs) or not self.values:
            raise DistributionError("two_point needs matching non-empty values and probs")

        if min(self.probs) < 0 or not math.isclose(sum(self.probs), 1.0, abs_tol=1e-12):
            raise DistributionError(f"two_point probabilities must be nonnegative and sum to 1, got {self.probs}")

    @classmethod
    def symmetric(cls, v: float) -> TwoPoint:
        return cls(values=(-v, v), probs=(0.5, 0.5))

    def _expect(self, func: Any, mask: Any = None) -> float:
        return math.fsum(
            _prob * func(_val) for _val, _prob in zip(self.values, self.probs) if mask is None or mask(_val)
        )

    @property
    def mean(self) -> float:
        return self._expect(lambda _v: _v)

    @property
    def variance(self) -> float:
        return self._expect(lambda _v: _v**2) - self.mean**2

    @property
    def is_symmetric(self) -> bool:
        support = dict(zip(self.values, self.probs))
        return all(math.isclose(support.get(-_val, 0.0), _prob) for _val, _prob in support.items())

    def abs_moment(self, alpha: float) -> float:
        return self._expect(lambda _v: abs(_v) ** alpha)

    def tail_prob(self, t: float) -> float:
        return self._expect(lambda _v: 1.0, mask=lambda _v: abs(_v) >= t)

    def trunc_mean(self, t: float) -> float:
        if self.is_symmetric:
            return 0.0

        return self._expect(lambda _v: _v, mask=lambda _v: abs(_v) < t)

    def trunc_second(self, t: float) -> float:
        return self._expect(lambda _v: _v**2, mask=lambda _v: abs(_v) < t)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        order = np.argsort(self.values)
        sorted_values = np.asarray(self.values)[order]
        cumulative = np.cumsum(np.asarray(self.probs)[order])
        positions = np.searchsorted(cumulative, u, side="right")
        return sorted_values[np.minimum(positions, len(sorted_values) - 1)]

    def to_dict(self) -> Dict[str, Any]:
        return {"family": TWO_POINT_STR, "values": list(self.values), "probs": list(self.probs)}


@dataclass(frozen=True)
class Uniform(DistributionSpec):
    a: float = -1.0
    b: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", UNIFORM_STR)
        if self.b <= self.a:
            raise DistributionError(f"uniform needs a < b, got [{self.a}, {self.b}]")

    @property
    def mean(self) -> float:
        return (self.a + self.b) / 2

    @property
    def variance(self) -> float:
        return (self.b - self.a) ** 2 / 12

    @property
    def is_symmetric(self) -> bool:
        return self.a == -self.b

    def _power_integral(self, lower: float, upper: float, power: float) -> float:
        """Integral of |x|^power over [lower, upper], split at the origin."""
        if upper <= lower:
            return 0.0

        if lower >= 0:
            return (upper ** (power + 1) - lower ** (power + 1)) / (power + 1)

        if upper <= 0:
            return ((-lower) ** (power + 1) - (-upper) ** (power + 1)) / (power + 1)

        return ((-lower) ** (power + 1) + upper ** (power + 1)) / (power + 1)

    def abs_moment(self, alpha: float) -> float:
        return self._power_integral(self.a, self.b, alpha) / (self.b - self.a)

    def _inside(self, t: float) -> Tuple[float, float]:
        return max(self.a, -t), min(self.b, t)

    def tail_prob(self, t: float) -> float:
        lower, upper = self._inside(t)
        return 1.0 - max(upper - lower, 0.0) / (self.b - self.a)

    def trunc_mean(self, t: float) -> float:
        if self.is_symmetric:
            return 0.0

        lower, upper = self._inside(t)
        if upper <= lower:
            return 0.0

        return (upper**2 - lower**2) / (2 * (self.b - self.a))

    def trunc_second(self, t: float) -> float:
        lower, upper = self._inside(t)
        if upper <= lower:
            return 0.0

        return (upper**3 - lower**3) / (3 * (self.b - self.a))

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self.a + (self.b - self.a) * u

    def to_dict(self) -> Dict[str, Any]:
        return {"family": UNIFORM_STR, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class SymmetricPareto(DistributionSpec):
    """Random sign times a Pareto magnitude: P(|Z| >= t) = (scale / t)^gamma for t >= scale."""

    gamma: float = 1.5
    scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", SYMMETRIC_PARETO_STR)
        if self.gamma <= 0 or self.scale <= 0:
            raise DistributionError(f"symmetric_pareto needs gamma > 0 and scale > 0, got {self.gamma}, {self.scale}")

    @property
    def mean(self) -> float:
        if self.gamma <= 1:
            raise MomentNotFiniteError(f"symmetric_pareto with gamma={self.gamma} has no mean")

        return 0.0

    @property
    def variance(self) -> float:
        return self.abs_moment(2.0)

    @property
    def is_symmetric(self) -> bool:
        return True

    def abs_moment(self, alpha: float) -> float:
        if alpha >= self.gamma:
            return math.inf

        return self.gamma * self.scale**alpha / (self.gamma - alpha)

    def tail_prob(self, t: float) -> float:
        if t <= self.scale:
            return 1.0

        return (self.scale / t) ** self.gamma

    def trunc_mean(self, t: float) -> float:
        return 0.0

    def trunc_second(self, t: float) -> float:
        if t <= self.scale:
            return 0.0

        if self.gamma == 2:
            return 2 * self.scale**2 * math.log(t / self.scale)

        return (
            self.gamma
            * self.scale**self.gamma
            * (t ** (2 - self.gamma) - self.scale ** (2 - self.gamma))
            / (2 - self.gamma)
        )

    def markov_order(self) -> float:
        if self.gamma <= 1:
            raise MomentNotFiniteError(f"symmetric_pareto with gamma={self.gamma} has no moment of order >= 1")

        return min((1 + self.gamma) / 2, LIGHT_TAIL_MARKOV_ORDER)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        folded = 2 * np.minimum(u, 1 - u)
        return np.where(u < 0.5, -1.0, 1.0) * self.scale * folded ** (-1 / self.gamma)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": SYMMETRIC_PARETO_STR, "gamma": self.gamma, "scale": self.scale}


@dataclass(frozen=True)
class Constant(DistributionSpec):
    c: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", CONSTANT_STR)

    @property
    def mean(self) -> float:
        return self.c

    @property
    def variance(self) -> float:
        return 0.0

    @property
    def is_symmetric(self) -> bool:
        return self.c == 0

    def abs_moment(self, alpha: float) -> float:
        if self.c == 0:
            return 0.0 if alpha > 0 else 1.0

        return abs(self.c) ** alpha

    def tail_prob(self, t: float) -> float:
        return 1.0 if abs(self.c) >= t else 0.0

    def trunc_mean(self, t: float) -> float:
        return self.c if abs(self.c) < t else 0.0

    def trunc_second(self, t: float) -> float:
        return self.c**2 if abs(self.c) < t else 0.0

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return np.full(np.shape(u), self.c, dtype=np.float64)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": CONSTANT_STR, "c": self.c}


def distribution_from_dict(data: Dict[str, Any]) -> DistributionSpec:
    family = data.get("family")
    if family == NORMAL_STR:
        return Normal(mu=float(data.get("mu", 0.0)), sigma=float(data.get("sigma", 1.0)))

    if family == TWO_POINT_STR:
        if "v" in data:
            return TwoPoint.symmetric(v=float(data["v"]))

        return TwoPoint(values=tuple(data["values"]), probs=tuple(data["probs"]))

    if family == UNIFORM_STR:
        return Uniform(a=float(data["a"]), b=float(data["b"]))

    if family == SYMMETRIC_PARETO_STR:
        return SymmetricPareto(gamma=float(data["gamma"]), scale=float(data.get("scale", 1.0)))

    if family == CONSTANT_STR:
        return Constant(c=float(data["c"]))

    raise DistributionError(f"Unknown distribution family in {data}")
