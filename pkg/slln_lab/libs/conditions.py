"""
Certified verdicts for the series conditions of the multi-index strong laws.

A finite computation cannot prove convergence, so a verdict is only CONVERGES when an analytic majorant bounds the
omitted tail, and only DIVERGES when a minorant with infinite mass is exhibited. Majorants and minorants are
separable: c * prod_i f_i(n_i), where every one-dimensional factor f_i knows certified bounds on its own tail
sum_{m > N} f_i(m). The mass of such an envelope outside the box {n <= N} is

    c * (prod_i (H_i + T_i) - prod_i H_i),   H_i = sum_{m <= N_i} f_i(m),  T_i = sum_{m > N_i} f_i(m),

which is monotone in every T_i, so bracketing each T_i brackets the tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from slln_lab.libs.distributions import DistributionSpec, MomentNotFiniteError
from slln_lab.libs.lattice import (
    LatticeBox,
    MultiIndex,
    ScalarField,
    first_index,
    increment,
    prefix_sums,
)
from slln_lab.libs.normalization import NormalizationSpec, check_hypotheses, log_floor
from slln_lab.utils.constants import (
    CONVERGES_STR,
    DEFAULT_SERIES_BOX_SIDE,
    DIVERGES_STR,
    INCONCLUSIVE_STR,
    TRUNCATION_BOUND_SLACK,
)
from slln_lab.utils.helpers import SllnLabError, get_logger_with_params

LOGGER = get_logger_with_params(name="conditions")

# |s - 1| below this is treated as the boundary case s = 1 of the integral test.
EXPONENT_TOLERANCE: float = 1e-12
# Explicit summation before the integral test takes over is capped at this many terms.
MAX_EXPLICIT_TAIL_TERMS: int = 10_000_000


class NegativeTermError(SllnLabError):
    def __init__(self, index: MultiIndex, value: float):
        self.index = index
        self.value = value

    def __str__(self) -> str:
        return f"Series term at {self.index} is negative: {self.value}"


class ParameterRangeError(SllnLabError):
    pass


class NotCenteredError(SllnLabError):
    pass


class TruncationBoundError(SllnLabError):
    pass


class NormalizationHypothesisError(SllnLabError):
    pass


class CovarianceError(SllnLabError):
    pass


# Certified tails of one-dimensional factors


def _power_log_integral(a: float, s: float, t: float) -> Tuple[float, float]:
    """
    Bracket for the integral of x^(-s) (ln x)^(-t) over [a, infinity), a > 1.

    Closed forms where they exist; otherwise quadrature in u = ln x, widened by twice the reported error.
    """
    if s < 1 - EXPONENT_TOLERANCE:
        return math.inf, math.inf

    log_a = math.log(a)
    if abs(s - 1) <= EXPONENT_TOLERANCE:
        if t <= 1:
            return math.inf, math.inf

        value = log_a ** (1 - t) / (t - 1)
        return value, value

    if t == 0:
        value = a ** (1 - s) / (s - 1)
        return value, value

    value, error = integrate.quad(
        lambda u: math.exp(-(s - 1) * u) * u ** (-t), log_a, np.inf, epsabs=1e-15, epsrel=1e-12, limit=200
    )
    return max(value - 2 * error, 0.0), value + 2 * error


def power_log_tail(n: int, s: float, t: float) -> Tuple[float, float]:
    """
    Bracket for sum_{m > n} m^(-s) L(m)^(-t).

    Terms are summed explicitly until the envelope is decreasing and L(m) = ln m; the rest follows the
    integral test: integral from M + 1 <= tail past M <= integral from M.
    """
    if s < 1 - EXPONENT_TOLERANCE or (abs(s - 1) <= EXPONENT_TOLERANCE and t <= 1):
        return math.inf, math.inf

    # d/dx log(x^-s (ln x)^-t) < 0  <=>  s ln x + t > 0
    start = max(n, 3)
    if t < 0:
        threshold = -t / s
        if threshold > math.log(n + MAX_EXPLICIT_TAIL_TERMS):
            return 0.0, math.inf

        start = max(start, math.floor(math.exp(threshold)) + 1)

    explicit = 0.0
    if start > n:
        m = np.arange(n + 1, start + 1, dtype=np.float64)
        explicit = math.fsum(m ** (-s) * log_floor(m) ** (-t))

    lower, _ = _power_log_integral(a=start + 1, s=s, t=t)
    _, upper = _power_log_integral(a=start, s=s, t=t)
    return explicit + lower, explicit + upper


class AxisSeries:
    """Nonnegative one-dimensional factor f(m), m >= 1, with certified tail bounds."""

    @property
    def description(self) -> str:
        raise NotImplementedError

    def values(self, m: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tail_bounds(self, n: int) -> Tuple[float, float]:
        """Bracket for sum_{m > n} f(m)."""
        raise NotImplementedError


@dataclass(frozen=True)
class PowerLogAxis(AxisSeries):
    """f(m) = m^(-s) L(m)^(-t)"""

    s: float
    t: float

    @property
    def description(self) -> str:
        return f"m^-{self.s:g} L(m)^-{self.t:g}"

    def values(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        return m ** (-self.s) * log_floor(m) ** (-self.t)

    def tail_bounds(self, n: int) -> Tuple[float, float]:
        return power_log_tail(n=n, s=self.s, t=self.t)


@dataclass(frozen=True)
class BrunkProhorovAxis(AxisSeries):
    """
    f(m) = (m^q - (m-1)^q) / (m^(2qp) L(m)^(2q beta)), the per-axis factor of a_n / b_n^(2q) for identical moments.

    q (m-1)^(q-1) <= m^q - (m-1)^q <= q m^(q-1), so past n the factor sits between q (n/(n+1))^(q-1) and q times
    the power-log envelope with s = 2qp - q + 1 and t = 2q beta.
    """

    q: int
    p: float
    beta: float

    @property
    def description(self) -> str:
        return f"(m^{self.q} - (m-1)^{self.q}) / (m^{2 * self.q * self.p:g} L(m)^{2 * self.q * self.beta:g})"

    def values(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        return (m**self.q - (m - 1) ** self.q) / (m ** (2 * self.q * self.p) * log_floor(m) ** (2 * self.q * self.beta))

    def tail_bounds(self, n: int) -> Tuple[float, float]:
        lower, upper = power_log_tail(n=n, s=2 * self.q * self.p - self.q + 1, t=2 * self.q * self.beta)
        return self.q * (n / (n + 1)) ** (self.q - 1) * lower, self.q * upper


@dataclass(frozen=True)
class GeometricLogAxis(AxisSeries):
    """
    f(m) = |rho|^m m^(-s) L(m)^t with s, t >= 0.

    Past n >= 2 the ratio f(m+1)/f(m) is at most kappa = |rho| (L(n+2)/L(n+1))^t, giving the geometric majorant
    f(n+1) / (1 - kappa) when kappa < 1.
    """

    rho: float
    s: float
    t: float

    @property
    def description(self) -> str:
        return f"|{self.rho:g}|^m m^-{self.s:g} L(m)^{self.t:g}"

    def values(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        return abs(self.rho) ** m * m ** (-self.s) * log_floor(m) ** self.t

    def tail_bounds(self, n: int) -> Tuple[float, float]:
        first = float(self.values(np.asarray([n + 1]))[0])
        if first == 0:
            return 0.0, 0.0

        kappa = abs(self.rho) * (float(log_floor(max(n, 2) + 2)) / float(log_floor(max(n, 2) + 1))) ** self.t
        if kappa >= 1:
            return first, math.inf

        return first, first / (1 - kappa)


@dataclass(frozen=True)
class SeparableEnvelope:
    constant: float
    axes: Tuple[AxisSeries, ...]

    @property
    def description(self) -> str:
        return f"{self.constant:g} * prod[{' ; '.join(_axis.description for _axis in self.axes)}]"

    def values(self, box: LatticeBox) -> np.ndarray:
        result = np.full((1,) * box.r, self.constant, dtype=np.float64)
        for axis, grid in zip(self.axes, box.grids()):
            result = result * axis.values(grid)

        return np.broadcast_to(result, box.shape)

    def outside_mass(self, box: LatticeBox) -> Tuple[float, float]:
        """Bracket for the envelope's mass over lattice points outside the box."""
        if self.constant == 0:
            return 0.0, 0.0

        heads: List[float] = []
        tails: List[Tuple[float, float]] = []
        for axis, side in zip(self.axes, box.shape):
            heads.append(math.fsum(axis.values(np.arange(1, side + 1))))
            tails.append(axis.tail_bounds(n=side))

        return (
            self.constant * _product_excess(heads=heads, tails=[_tail[0] for _tail in tails]),
            self.constant * _product_excess(heads=heads, tails=[_tail[1] for _tail in tails]),
        )


def _product_excess(heads: Sequence[float], tails: Sequence[float]) -> float:
    """prod(H_i + T_i) - prod(H_i) for nonnegative entries, with infinite T_i handled explicitly."""
    totals = [_head + _tail for _head, _tail in zip(heads, tails)]
    if any(_total == 0 for _total in totals):
        return 0.0

    if any(math.isinf(_tail) for _tail in tails):
        return math.inf

    return max(math.prod(totals) - math.prod(heads), 0.0)


class TailKind(Enum):
    SEPARABLE_POWER_LOG = "separable_power_log"
    NONE = "none"


@dataclass(frozen=True)
class TailStrategy:
    """
    How the omitted tail is bounded.

    upper must dominate every term outside the box, lower must be dominated by every such term. With kind NONE
    the report is INCONCLUSIVE unless the partial sum exceeds divergence_bound, a value the full sum would have to
    stay below if it converged.
    """

    kind: TailKind = TailKind.NONE
    upper: Optional[SeparableEnvelope] = None
    lower: Optional[SeparableEnvelope] = None
    divergence_bound: Optional[float] = None


@dataclass(frozen=True)
class SeriesReport:
    partial_sum: float
    tail_lower: float
    tail_upper: float
    verdict: str
    certificate: str

    @property
    def total_lower(self) -> float:
        return self.partial_sum + self.tail_lower

    @property
    def total_upper(self) -> float:
        return self.partial_sum + self.tail_upper

    def to_dict(self) -> Dict[str, Any]:
        return {
            "partial_sum": self.partial_sum,
            "tail_lower": self.tail_lower,
            "tail_upper": self.tail_upper,
            "verdict": self.verdict,
            "certificate": self.certificate,
        }


TermSource = Union[ScalarField, Callable[..., Any]]
TailArgument = Union[TailKind, TailStrategy]


def default_box(r: int) -> LatticeBox:
    side = DEFAULT_SERIES_BOX_SIDE.get(r, DEFAULT_SERIES_BOX_SIDE[max(DEFAULT_SERIES_BOX_SIDE)])
    return LatticeBox(upper=MultiIndex(coords=(side,) * r))


def series_sum(term: TermSource, r: int, box: LatticeBox, tail: TailStrategy) -> SeriesReport:
    """
    Sum a nonnegative multiple series over the box and bound what lies outside it.

    term is either a field over the box or a vectorised function of the 1-based coordinate arrays.
    """
    if box.r != r:
        raise ParameterRangeError(f"Box {box.upper} has dimension {box.r}, expected r={r}")

    values = term.values if isinstance(term, ScalarField) else ScalarField.from_function(box=box, func=term).values
    if values.shape != box.shape:
        raise ParameterRangeError(f"Term field shape {values.shape} does not match box {box.upper}")

    negative = values < 0
    if negative.any():
        index = first_index(negative)
        raise NegativeTermError(index=index, value=float(values[index.array_position()]))

    partial_sum = math.fsum(np.asarray(values, dtype=np.float64).ravel())
    tail_lower, tail_upper = 0.0, math.inf
    notes: List[str] = []

    if tail.kind == TailKind.SEPARABLE_POWER_LOG:
        if tail.upper is not None:
            _, tail_upper = tail.upper.outside_mass(box=box)
            notes.append(f"majorant {tail.upper.description}")

        if tail.lower is not None:
            tail_lower, _ = tail.lower.outside_mass(box=box)
            notes.append(f"minorant {tail.lower.description}")

    if tail.divergence_bound is not None and partial_sum > tail.divergence_bound:
        tail_lower = math.inf
        notes.append(f"partial sum {partial_sum:.6g} exceeds the declared bound {tail.divergence_bound:.6g}")

    tail_upper = max(tail_upper, tail_lower)
    if math.isinf(tail_lower):
        verdict = DIVERGES_STR
    elif math.isfinite(tail_upper):
        verdict = CONVERGES_STR
    else:
        verdict = INCONCLUSIVE_STR

    certificate = "; ".join(notes) if notes else "no tail certificate"
    LOGGER.debug(f"[series] box {box.upper}: partial {partial_sum:.10g}, tail [{tail_lower:.3g}, {tail_upper:.3g}]")
    return SeriesReport(
        partial_sum=partial_sum,
        tail_lower=tail_lower,
        tail_upper=tail_upper,
        verdict=verdict,
        certificate=certificate,
    )


def tail_strategy(
    tail: TailArgument,
    upper: Optional[SeparableEnvelope],
    lower: Optional[SeparableEnvelope],
) -> TailStrategy:
    if isinstance(tail, TailStrategy):
        return tail

    if tail == TailKind.NONE or (upper is None and lower is None):
        return TailStrategy(kind=TailKind.NONE)

    return TailStrategy(kind=TailKind.SEPARABLE_POWER_LOG, upper=upper, lower=lower)


def _require_hypotheses(spec: NormalizationSpec, box: LatticeBox) -> None:
    probe = LatticeBox(upper=MultiIndex(coords=tuple(min(_side, 32) for _side in box.shape)))
    report = check_hypotheses(spec=spec, probe=probe)
    if not (report.monotone and report.tends_to_infinity_along_max):
        raise NormalizationHypothesisError(
            f"Normalization {spec.to_dict()} fails the hypotheses on {probe.upper}: {report.to_dict()}"
        )


def _resolve_box(box: Optional[LatticeBox], r: int) -> LatticeBox:
    return box if box is not None else default_box(r=r)


# Brunk-Prohorov coefficients


def brunk_prohorov_a(moment_field: ScalarField, q: int) -> ScalarField:
    """a_n = Delta[ |n|^(q-1) * sum_{k <= n} E Z_k^(2q) ]"""
    if int(q) != q or q < 1:
        raise ParameterRangeError(f"q must be an integer >= 1, got {q}")

    if (moment_field.values < 0).any():
        index = first_index(moment_field.values < 0)
        raise ParameterRangeError(f"Moments must be nonnegative, first negative at {index}")

    cumulative = prefix_sums(field=moment_field)
    size_power = np.ones((1,) * moment_field.box.r, dtype=cumulative.values.dtype)
    for grid in moment_field.box.grids():
        size_power = size_power * grid.astype(cumulative.values.dtype) ** (int(q) - 1)

    return increment(field=ScalarField(box=moment_field.box, values=size_power * cumulative.values))


def brunk_prohorov_a_1d(moments: Sequence[float], q: int) -> List[float]:
    """a_k = k^(q-1) sum_{j <= k} m_j - (k-1)^(q-1) sum_{j <= k-1} m_j, the one-dimensional sequence."""
    if int(q) != q or q < 1:
        raise ParameterRangeError(f"q must be an integer >= 1, got {q}")

    result: List[float] = []
    running_previous = 0
    for k in range(1, len(moments) + 1):
        running = running_previous + moments[k - 1]
        result.append(k ** (q - 1) * running - (k - 1) ** (q - 1) * running_previous)
        running_previous = running

    return result


def identical_brunk_prohorov_a(box: LatticeBox, q: int, moment: float) -> ScalarField:
    """Closed form prod_i (n_i^q - (n_i - 1)^q) * mu for identical moments."""

    def _closed_form(*grids: np.ndarray) -> np.ndarray:
        values = np.full((1,) * box.r, moment, dtype=np.float64)
        for grid in grids:
            values = values * (grid.astype(np.float64) ** q - (grid.astype(np.float64) - 1) ** q)

        return values

    return ScalarField.from_function(box=box, func=_closed_form)


@dataclass(frozen=True)
class PowerMoments:
    """Moment field scale * |n|^exponent."""

    scale: float
    exponent: float = 0.0

    def field(self, box: LatticeBox) -> ScalarField:
        def _power(*grids: np.ndarray) -> np.ndarray:
            values = np.full((1,) * box.r, self.scale, dtype=np.float64)
            for grid in grids:
                values = values * grid.astype(np.float64) ** self.exponent

            return values

        return ScalarField.from_function(box=box, func=_power)


def check_eq4(
    moments: Union[float, ScalarField],
    q: int,
    spec: NormalizationSpec,
    box: Optional[LatticeBox] = None,
    tail: TailArgument = TailKind.SEPARABLE_POWER_LOG,
    r: int = 2,
) -> SeriesReport:
    """sum_n a_n / b_n^(2q) < infinity, with a_n from brunk_prohorov_a."""
    if int(q) != q or q < 1:
        raise ParameterRangeError(f"q must be an integer >= 1, got {q}")

    upper: Optional[SeparableEnvelope] = None
    if isinstance(moments, ScalarField):
        box = moments.box
        coefficients = brunk_prohorov_a(moment_field=moments, q=q)
    else:
        if moments < 0:
            raise ParameterRangeError(f"Moments must be nonnegative, got {moments}")

        box = _resolve_box(box=box, r=r)
        coefficients = identical_brunk_prohorov_a(box=box, q=q, moment=float(moments))
        params = spec.power_log_params()
        if params is not None:
            _p, _beta = params
            upper = SeparableEnvelope(
                constant=float(moments), axes=tuple(BrunkProhorovAxis(q=int(q), p=_p, beta=_beta) for _ in range(box.r))
            )

    _require_hypotheses(spec=spec, box=box)
    normalization = spec.eval_field(box=box).values.astype(np.float64)
    terms = np.clip(coefficients.values / normalization ** (2 * q), 0.0, None)
    # Identical moments make the term exactly separable, so the envelope is both majorant and minorant.
    return series_sum(
        term=ScalarField(box=box, values=terms),
        r=box.r,
        box=box,
        tail=tail_strategy(tail=tail, upper=upper, lower=upper),
    )


def equal_moment_terms(q: int, spec: NormalizationSpec, box: LatticeBox) -> ScalarField:
    """|n|^(q-1) / b_n^(2q)"""
    normalization = spec.eval_field(box=box).values.astype(np.float64)
    sizes = np.ones(box.shape, dtype=np.float64)
    for grid in box.grids():
        sizes = sizes * grid

    return ScalarField(box=box, values=sizes ** (q - 1) / normalization ** (2 * q))


def check_equal_moment_condition(
    q: int,
    spec: NormalizationSpec,
    box: Optional[LatticeBox] = None,
    tail: TailArgument = TailKind.SEPARABLE_POWER_LOG,
    r: int = 2,
) -> SeriesReport:
    """
    sum_n |n|^(q-1) / b_n^(2q) < infinity: the identical-moment condition.

    For analytic normalizations the term is exactly prod_i n_i^(q-1-2qp) L(n_i)^(-2q beta), so one power-log
    envelope is both majorant and minorant.
    """
    if int(q) != q or q < 1:
        raise ParameterRangeError(f"q must be an integer >= 1, got {q}")

    box = _resolve_box(box=box, r=r)
    _require_hypotheses(spec=spec, box=box)
    envelope: Optional[SeparableEnvelope] = None
    params = spec.power_log_params()
    if params is not None:
        _p, _beta = params
        envelope = SeparableEnvelope(
            constant=1.0,
            axes=tuple(PowerLogAxis(s=2 * q * _p - (q - 1), t=2 * q * _beta) for _ in range(box.r)),
        )

    terms = equal_moment_terms(q=int(q), spec=spec, box=box)
    return series_sum(term=terms, r=box.r, box=box, tail=tail_strategy(tail=tail, upper=envelope, lower=envelope))


MomentSource = Union[float, PowerMoments, ScalarField, DistributionSpec]


def _alpha_moment_field(
    moments: MomentSource, alpha: float, box: LatticeBox
) -> Tuple[ScalarField, Optional[PowerMoments]]:
    if isinstance(moments, ScalarField):
        return moments, None

    if isinstance(moments, DistributionSpec):
        moments = float(moments.abs_moment(alpha))
        if math.isinf(moments):
            raise MomentNotFiniteError(f"E|Z|^{alpha} is infinite")

    if isinstance(moments, (int, float)):
        moments = PowerMoments(scale=float(moments))

    return moments.field(box=box), moments


def alpha_condition_terms(moments: MomentSource, alpha: float, spec: NormalizationSpec, box: LatticeBox) -> ScalarField:
    """E|Z_n|^alpha / b_n^alpha over the box."""
    if not 1 <= alpha <= 2:
        raise ParameterRangeError(f"alpha must lie in [1, 2], got {alpha}")

    moment_field, _ = _alpha_moment_field(moments=moments, alpha=alpha, box=box)
    normalization = spec.eval_field(box=moment_field.box).values.astype(np.float64)
    return ScalarField(box=moment_field.box, values=moment_field.values / normalization**alpha)


def check_alpha_condition(
    moments: MomentSource,
    alpha: float,
    spec: NormalizationSpec,
    box: Optional[LatticeBox] = None,
    tail: TailArgument = TailKind.SEPARABLE_POWER_LOG,
    r: int = 2,
) -> SeriesReport:
    """sum_n E|Z_n|^alpha / b_n^alpha < infinity for 1 <= alpha <= 2."""
    if not 1 <= alpha <= 2:
        raise ParameterRangeError(f"alpha must lie in [1, 2], got {alpha}")

    box = moments.box if isinstance(moments, ScalarField) else _resolve_box(box=box, r=r)
    _require_hypotheses(spec=spec, box=box)
    moment_field, power = _alpha_moment_field(moments=moments, alpha=alpha, box=box)

    envelope: Optional[SeparableEnvelope] = None
    params = spec.power_log_params()
    if power is not None and params is not None:
        _p, _beta = params
        envelope = SeparableEnvelope(
            constant=power.scale,
            axes=tuple(PowerLogAxis(s=alpha * _p - power.exponent, t=alpha * _beta) for _ in range(box.r)),
        )

    terms = alpha_condition_terms(moments=moment_field, alpha=alpha, spec=spec, box=box)
    return series_sum(term=terms, r=box.r, box=box, tail=tail_strategy(tail=tail, upper=envelope, lower=envelope))


def check_measure_alpha_condition(
    alpha: float,
    spec: NormalizationSpec,
    box: Optional[LatticeBox] = None,
    tail: TailArgument = TailKind.SEPARABLE_POWER_LOG,
    r: int = 2,
) -> SeriesReport:
    """sum_n b_n^(-alpha) < infinity, the condition for a stationary centered completely random measure."""
    return check_alpha_condition(moments=1.0, alpha=alpha, spec=spec, box=box, tail=tail, r=r)


def check_brunk_prohorov_1d(
    moments: Union[float, PowerMoments, Sequence[float]],
    q: int,
    spec: Optional[NormalizationSpec] = None,
    length: int = DEFAULT_SERIES_BOX_SIDE[1],
    tail: TailArgument = TailKind.SEPARABLE_POWER_LOG,
) -> SeriesReport:
    """
    One-dimensional condition for a sequence of independent centered xi_k.

    Without a normalization (b_k = k) this is the classical sum_k E xi_k^(2q) / k^(q+1) < infinity; with one it is
    sum_{k >= 2} a_k / b_k^(2q), a_k the one-dimensional Brunk-Prohorov coefficients.
    """
    if int(q) != q or q < 1:
        raise ParameterRangeError(f"q must be an integer >= 1, got {q}")

    if spec is not None:
        if isinstance(moments, (int, float)):
            box = LatticeBox.of(length)
            report = check_eq4(moments=float(moments), q=q, spec=spec, box=box, tail=tail)
            first = float(moments) / spec.eval(MultiIndex.of(1)) ** (2 * q)
            return SeriesReport(
                partial_sum=report.partial_sum - first,
                tail_lower=report.tail_lower,
                tail_upper=report.tail_upper,
                verdict=report.verdict,
                certificate=report.certificate,
            )

        if isinstance(moments, PowerMoments):
            moments = moments.field(box=LatticeBox.of(length)).values.tolist()

        coefficients = np.asarray(brunk_prohorov_a_1d(moments=list(moments), q=q), dtype=np.float64)
        box = LatticeBox.of(len(coefficients))
        normalization = spec.eval_field(box=box).values.astype(np.float64)
        terms = np.clip(coefficients / normalization ** (2 * q), 0.0, None)
        terms[0] = 0.0
        return series_sum(term=ScalarField(box=box, values=terms), r=1, box=box, tail=TailStrategy(kind=TailKind.NONE))

    envelope: Optional[SeparableEnvelope] = None
    if isinstance(moments, (int, float)):
        moments = PowerMoments(scale=float(moments))

    if isinstance(moments, PowerMoments):
        box = LatticeBox.of(length)
        values = moments.field(box=box).values
        envelope = SeparableEnvelope(constant=moments.scale, axes=(PowerLogAxis(s=q + 1 - moments.exponent, t=0.0),))
    else:
        values = np.asarray(moments, dtype=np.float64)
        box = LatticeBox.of(len(values))

    k = np.arange(1, box.size + 1, dtype=np.float64)
    return series_sum(
        term=ScalarField(box=box, values=values / k ** (q + 1)),
        r=1,
        box=box,
        tail=tail_strategy(tail=tail, upper=envelope, lower=envelope),
    )


# Three series of the truncation argument


@dataclass(frozen=True)
class ThreeSeriesReport:
    tail_probability: SeriesReport
    truncated_mean: SeriesReport
    truncated_variance: SeriesReport

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tail_probability": self.tail_probability.to_dict(),
            "truncated_mean": self.truncated_mean.to_dict(),
            "truncated_variance": self.truncated_variance.to_dict(),
        }


def _min_outside(spec: NormalizationSpec, box: LatticeBox) -> float:
    """Smallest b_n over lattice points just outside the box along each axis; the minimum outside for monotone b."""
    candidates = []
    for axis in range(box.r):
        coords = [1] * box.r
        coords[axis] = box.shape[axis] + 1
        candidates.append(spec.eval(MultiIndex(coords=tuple(coords))))

    return min(candidates)


def three_series(
    dist: DistributionSpec,
    spec: NormalizationSpec,
    box: Optional[LatticeBox] = None,
    tail: TailArgument = TailKind.SEPARABLE_POWER_LOG,
    r: int = 2,
) -> ThreeSeriesReport:
    """
    sum P(|Z_n| >= b_n),  sum |E Z_n^(b_n)| / b_n,  sum Var Z_n^(b_n) / b_n^2  for identically distributed Z_n.

    Majorants come from E|Z|^alpha / b_n^alpha (Markov and its truncated analogues); for symmetric laws the
    truncated second moment is nondecreasing in the level, which yields the minorant of the third series.
    """
    if abs(dist.mean) > 1e-12:
        raise NotCenteredError(f"three_series needs a centered law, {dist.to_dict()} has mean {dist.mean}")

    box = _resolve_box(box=box, r=r)
    _require_hypotheses(spec=spec, box=box)
    levels = spec.eval_field(box=box).values.astype(np.float64)

    tail_terms = dist.evaluate_many(quantity="tail_prob", levels=levels)
    if dist.is_symmetric:
        mean_terms = np.zeros(box.shape, dtype=np.float64)
    else:
        mean_terms = np.abs(dist.evaluate_many(quantity="trunc_mean", levels=levels)) / levels

    variance_terms = dist.evaluate_many(quantity="trunc_var", levels=levels) / levels**2

    markov_upper: Optional[SeparableEnvelope] = None
    variance_upper: Optional[SeparableEnvelope] = None
    variance_lower: Optional[SeparableEnvelope] = None
    mean_envelope: Optional[SeparableEnvelope] = None
    params = spec.power_log_params()
    if params is not None:
        _p, _beta = params
        order = dist.markov_order()
        variance_order = min(order, 2.0)

        def _axes(alpha: float) -> Tuple[AxisSeries, ...]:
            return tuple(PowerLogAxis(s=alpha * _p, t=alpha * _beta) for _ in range(box.r))

        markov_upper = SeparableEnvelope(constant=dist.abs_moment(order), axes=_axes(order))
        variance_upper = SeparableEnvelope(constant=dist.abs_moment(variance_order), axes=_axes(variance_order))
        mean_envelope = SeparableEnvelope(constant=0.0, axes=_axes(order)) if dist.is_symmetric else markov_upper
        if dist.is_symmetric:
            variance_lower = SeparableEnvelope(
                constant=dist.trunc_var(_min_outside(spec=spec, box=box)), axes=_axes(2.0)
            )

    return ThreeSeriesReport(
        tail_probability=series_sum(
            term=ScalarField(box=box, values=tail_terms),
            r=box.r,
            box=box,
            tail=tail_strategy(tail=tail, upper=markov_upper, lower=None),
        ),
        truncated_mean=series_sum(
            term=ScalarField(box=box, values=mean_terms),
            r=box.r,
            box=box,
            tail=tail_strategy(
                tail=tail, upper=mean_envelope, lower=mean_envelope if dist.is_symmetric else None
            ),
        ),
        truncated_variance=series_sum(
            term=ScalarField(box=box, values=variance_terms),
            r=box.r,
            box=box,
            tail=tail_strategy(tail=tail, upper=variance_upper, lower=variance_lower),
        ),
    )


# Stationary covariance series


@dataclass(frozen=True)
class CovarianceSpec:
    """
    Covariance R(k) = E[Z_(n+k) Z_n] of a wide-sense stationary field, evaluated on positive lags.

    envelope, when set, is an exact separable description of |R| used for tail certification; support, when set,
    is the lag box outside which R vanishes.
    """

    func: Callable[..., Any]
    r0: float
    envelope: Optional[SeparableEnvelope] = None
    support: Optional[Tuple[int, ...]] = None
    label: str = ""

    @classmethod
    def zero_lag_only(cls, r0: float, r: int) -> CovarianceSpec:
        return cls(func=lambda *grids: 0.0, r0=r0, support=(0,) * r, label="white noise")

    @classmethod
    def geometric(cls, rho: float, r: int, r0: float = 1.0) -> CovarianceSpec:
        def _geometric(*grids: np.ndarray) -> Any:
            exponent = sum(grids)
            return r0 * rho**exponent

        return cls(
            func=_geometric,
            r0=r0,
            envelope=SeparableEnvelope(
                constant=r0, axes=tuple(GeometricLogAxis(rho=rho, s=2.0, t=2.0) for _ in range(r))
            ),
            label=f"geometric rho={rho:g}",
        )

    @classmethod
    def constant(cls, value: float, r: int) -> CovarianceSpec:
        return cls(
            func=lambda *grids: value,
            r0=value,
            envelope=SeparableEnvelope(constant=abs(value), axes=tuple(PowerLogAxis(s=2.0, t=-2.0) for _ in range(r))),
            label=f"constant {value:g}",
        )

    @classmethod
    def moving_average(cls, weights: np.ndarray, innovation_variance: float = 1.0) -> CovarianceSpec:
        """R(k) = sigma^2 sum_l w_l w_(l+k) for a finite kernel; zero past the kernel's extent."""
        weights = np.asarray(weights, dtype=np.float64)
        table = np.zeros(weights.shape, dtype=np.float64)
        for lag in np.ndindex(*weights.shape):
            shifted = weights[tuple(slice(_lag, None) for _lag in lag)]
            base = weights[tuple(slice(0, _side - _lag) for _side, _lag in zip(weights.shape, lag))]
            table[lag] = innovation_variance * math.fsum((shifted * base).ravel())

        def _moving_average(*grids: np.ndarray) -> Any:
            inside = np.ones(np.broadcast_shapes(*(np.shape(_grid) for _grid in grids)), dtype=bool)
            clipped = []
            for grid, side in zip(grids, table.shape):
                inside = inside & (grid < side)
                clipped.append(np.minimum(grid, side - 1))

            return np.where(inside, table[tuple(clipped)], 0.0)

        return cls(
            func=_moving_average,
            r0=float(table[(0,) * weights.ndim]),
            support=tuple(_side - 1 for _side in weights.shape),
            label=f"moving average kernel {weights.shape}",
        )


def covariance_series(
    cov: CovarianceSpec,
    box: Optional[LatticeBox] = None,
    tail: TailArgument = TailKind.SEPARABLE_POWER_LOG,
    r: int = 2,
) -> SeriesReport:
    """sum_n |R(n)| / |n|^2 * prod_i L(n_i)^2 < infinity"""
    box = _resolve_box(box=box, r=r)
    covariances = ScalarField.from_function(box=box, func=cov.func).values.astype(np.float64)
    if (np.abs(covariances) > abs(cov.r0) * (1 + 1e-12)).any():
        raise CovarianceError(f"|R| exceeds R(0)={cov.r0} at {first_index(np.abs(covariances) > abs(cov.r0))}")

    weights = np.ones((1,) * box.r, dtype=np.float64)
    for grid in box.grids():
        weights = weights * log_floor(grid) ** 2 / grid.astype(np.float64) ** 2

    terms = np.abs(covariances) * weights
    strategy: TailStrategy
    if isinstance(tail, TailStrategy):
        strategy = tail
    elif tail == TailKind.NONE:
        strategy = TailStrategy(kind=TailKind.NONE)
    elif cov.support is not None and all(_lag <= _side for _lag, _side in zip(cov.support, box.shape)):
        zero = SeparableEnvelope(constant=0.0, axes=tuple(PowerLogAxis(s=2.0, t=-2.0) for _ in range(box.r)))
        strategy = TailStrategy(kind=TailKind.SEPARABLE_POWER_LOG, upper=zero, lower=zero)
    else:
        strategy = tail_strategy(tail=tail, upper=cov.envelope, lower=cov.envelope)

    report = series_sum(term=ScalarField(box=box, values=terms), r=box.r, box=box, tail=strategy)
    if cov.support is not None and strategy.upper is not None and strategy.upper.constant == 0:
        return SeriesReport(
            partial_sum=report.partial_sum,
            tail_lower=report.tail_lower,
            tail_upper=report.tail_upper,
            verdict=report.verdict,
            certificate=f"R vanishes outside lags {cov.support}, covered by box {box.upper}",
        )

    return report


# Truncation inequalities


@dataclass(frozen=True)
class TruncationReport:
    alpha: float
    level: float
    pairs: Tuple[Tuple[str, float, float], ...] = field(default_factory=tuple)

    def holds(self) -> bool:
        return all(_lhs <= _rhs * (1 + TRUNCATION_BOUND_SLACK) for _, _lhs, _rhs in self.pairs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "level": self.level,
            "pairs": [{"name": _name, "lhs": _lhs, "rhs": _rhs} for _name, _lhs, _rhs in self.pairs],
        }


def verify_truncation_bounds(dist: DistributionSpec, alpha: float, b: float) -> TruncationReport:
    """
    With phi(x) = |x|^alpha and a centered X:
        P(|X| >= b) <= E phi(X) / phi(b)
        |E X 1{|X| < b}| <= b E phi(X) / phi(b)
        E X^2 1{|X| < b} <= b^2 E phi(X) / phi(b)
    """
    if not 1 <= alpha <= 2:
        raise ParameterRangeError(f"alpha must lie in [1, 2], got {alpha}")

    if b <= 0:
        raise ParameterRangeError(f"truncation level must be positive, got {b}")

    if abs(dist.mean) > 1e-12:
        raise NotCenteredError(f"truncation bounds need a centered law, {dist.to_dict()} has mean {dist.mean}")

    moment = dist.abs_moment(alpha)
    if math.isinf(moment):
        raise MomentNotFiniteError(f"E|X|^{alpha} is infinite for {dist.to_dict()}")

    ratio = moment / b**alpha
    report = TruncationReport(
        alpha=alpha,
        level=b,
        pairs=(
            ("tail_probability", dist.tail_prob(b), ratio),
            ("truncated_mean", abs(dist.trunc_mean(b)), b * ratio),
            ("truncated_second_moment", dist.trunc_second(b), b**2 * ratio),
        ),
    )
    if not report.holds():
        raise TruncationBoundError(f"Truncation inequality violated for {dist.to_dict()}: {report.to_dict()}")

    return report
