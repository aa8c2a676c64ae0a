"""
Marked Poisson point processes on rectangular windows [0, T] and the random measure S(A) = sum of marks in A.

Cells follow the half-open unit cube I = (0, 1]^r: the point x belongs to cell n = ceil(x), so a point on an
integer boundary belongs to the lower-indexed cell. Boxes handed to measure_sum are half-open the same way, (a, b].
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from slln_lab.libs.conditions import (
    PowerLogAxis,
    SeparableEnvelope,
    SeriesReport,
    TailArgument,
    TailKind,
    default_box,
    series_sum,
    tail_strategy,
)
from slln_lab.libs.distributions import DistributionSpec, distribution_from_dict
from slln_lab.libs.lattice import LatticeBox, MultiIndex, ScalarField, prefix_sums
from slln_lab.libs.normalization import NormalizationSpec
from slln_lab.utils.constants import (
    HOMOGENEOUS_STR,
    INDEPENDENT_STR,
    POSITION_SCALED_STR,
    SEPARABLE_DENSITY_STR,
)
from slln_lab.utils.helpers import SllnLabError, get_future_results, get_logger_with_params, write_csv_rows

LOGGER = get_logger_with_params(name="pointproc")

CONSTANT_FUNCTION_STR: str = "constant"
LINEAR_FUNCTION_STR: str = "linear"
EXPONENTIAL_FUNCTION_STR: str = "exponential"
CUSTOM_FUNCTION_STR: str = "custom"

MEAN_TOLERANCE: float = 1e-12


class WindowError(SllnLabError):
    pass


class DensityBoundError(SllnLabError):
    pass


class CenteringError(SllnLabError):
    pass


class IntensityError(SllnLabError):
    pass


@dataclass(frozen=True)
class AxisFunction:
    """
    Positive function of one coordinate.

    constant:     c
    linear:       c + slope * x
    exponential:  c * exp(rate * x)
    custom:       func, with a user-declared bound on its supremum
    """

    kind: str
    c: float = 1.0
    slope: float = 0.0
    rate: float = 0.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    declared_bound: float = math.inf

    @classmethod
    def constant(cls, c: float) -> AxisFunction:
        return cls(kind=CONSTANT_FUNCTION_STR, c=c)

    @classmethod
    def linear(cls, c: float, slope: float) -> AxisFunction:
        return cls(kind=LINEAR_FUNCTION_STR, c=c, slope=slope)

    @classmethod
    def exponential(cls, c: float, rate: float) -> AxisFunction:
        return cls(kind=EXPONENTIAL_FUNCTION_STR, c=c, rate=rate)

    @classmethod
    def custom(cls, func: Callable[[np.ndarray], np.ndarray], declared_bound: float) -> AxisFunction:
        return cls(kind=CUSTOM_FUNCTION_STR, func=func, declared_bound=declared_bound)

    def value(self, x: Any) -> Any:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == CONSTANT_FUNCTION_STR:
            return np.full(x.shape, self.c)

        if self.kind == LINEAR_FUNCTION_STR:
            return self.c + self.slope * x

        if self.kind == EXPONENTIAL_FUNCTION_STR:
            return self.c * np.exp(self.rate * x)

        assert self.func is not None
        return np.asarray(self.func(x), dtype=np.float64)

    def integral(self, a: float, b: float) -> float:
        if self.kind == CONSTANT_FUNCTION_STR:
            return self.c * (b - a)

        if self.kind == LINEAR_FUNCTION_STR:
            return self.c * (b - a) + self.slope * (b**2 - a**2) / 2

        if self.kind == EXPONENTIAL_FUNCTION_STR:
            if self.rate == 0:
                return self.c * (b - a)

            return self.c * (math.exp(self.rate * b) - math.exp(self.rate * a)) / self.rate

        value, _ = integrate.quad(lambda _x: float(self.value(_x)), a, b)
        return value

    def bound(self, upper: float) -> float:
        """Supremum over [0, upper]; the declared bound for custom functions."""
        if self.kind == CUSTOM_FUNCTION_STR:
            return self.declared_bound

        return float(max(self.value(0.0), self.value(upper)))

    def global_bound(self) -> float:
        """Supremum over [0, infinity)."""
        if self.kind == CONSTANT_FUNCTION_STR:
            return self.c

        if self.kind == LINEAR_FUNCTION_STR:
            return self.c if self.slope <= 0 else math.inf

        if self.kind == EXPONENTIAL_FUNCTION_STR:
            return self.c if self.rate <= 0 else math.inf

        return self.declared_bound

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "c": self.c, "slope": self.slope, "rate": self.rate}


@dataclass(frozen=True)
class SeparableFunction:
    """prod_i f_i(x_i)"""

    axes: Tuple[AxisFunction, ...]

    @property
    def r(self) -> int:
        return len(self.axes)

    def value(self, positions: np.ndarray) -> np.ndarray:
        positions = np.atleast_2d(positions)
        result = np.ones(positions.shape[0], dtype=np.float64)
        for axis, function in enumerate(self.axes):
            result = result * function.value(positions[:, axis])

        return result

    def integral(self, lower: Sequence[float], upper: Sequence[float]) -> float:
        return math.prod(_func.integral(_a, _b) for _func, _a, _b in zip(self.axes, lower, upper))

    def bound(self, window: Sequence[float]) -> float:
        return math.prod(_func.bound(_side) for _func, _side in zip(self.axes, window))


@dataclass(frozen=True)
class IntensitySpec:
    kind: str
    rate: float = 0.0
    density: Optional[SeparableFunction] = None
    declared_bound: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind == HOMOGENEOUS_STR:
            if self.rate <= 0:
                raise IntensityError(f"homogeneous intensity needs rate > 0, got {self.rate}")

        elif self.kind == SEPARABLE_DENSITY_STR:
            if self.density is None:
                raise IntensityError("separable_density intensity needs a density")

        else:
            raise IntensityError(f"Unknown intensity kind {self.kind}")

    @classmethod
    def homogeneous(cls, rate: float) -> IntensitySpec:
        return cls(kind=HOMOGENEOUS_STR, rate=float(rate))

    @classmethod
    def separable(cls, density: SeparableFunction, declared_bound: Optional[float] = None) -> IntensitySpec:
        return cls(kind=SEPARABLE_DENSITY_STR, density=density, declared_bound=declared_bound)

    def value(self, positions: np.ndarray) -> np.ndarray:
        if self.kind == HOMOGENEOUS_STR:
            return np.full(np.atleast_2d(positions).shape[0], self.rate)

        assert self.density is not None
        return self.density.value(positions)

    def measure(self, lower: Sequence[float], upper: Sequence[float]) -> float:
        """Lambda of the box (lower, upper]."""
        if self.kind == HOMOGENEOUS_STR:
            return self.rate * math.prod(_b - _a for _a, _b in zip(lower, upper))

        assert self.density is not None
        return self.density.integral(lower=lower, upper=upper)

    def bound(self, window: Sequence[float]) -> float:
        if self.kind == HOMOGENEOUS_STR:
            return self.rate

        if self.declared_bound is not None:
            return self.declared_bound

        assert self.density is not None
        return self.density.bound(window=window)


@dataclass(frozen=True)
class MarkKernel:
    """
    Conditional law of the mark y given the position x.

    independent:      y ~ dist
    position_scaled:  y = s(x) * draw, draw ~ dist
    """

    kind: str
    dist: DistributionSpec
    scale: Optional[SeparableFunction] = None

    @classmethod
    def independent(cls, dist: DistributionSpec) -> MarkKernel:
        return cls(kind=INDEPENDENT_STR, dist=dist)

    @classmethod
    def position_scaled(cls, dist: DistributionSpec, scale: SeparableFunction) -> MarkKernel:
        return cls(kind=POSITION_SCALED_STR, dist=dist, scale=scale)

    def _scale(self, positions: np.ndarray) -> np.ndarray:
        if self.kind == INDEPENDENT_STR:
            return np.ones(np.atleast_2d(positions).shape[0])

        assert self.scale is not None
        return self.scale.value(positions)

    def cond_mean(self, positions: np.ndarray) -> np.ndarray:
        return self._scale(positions) * self.dist.mean

    def cond_second(self, positions: np.ndarray) -> np.ndarray:
        return self._scale(positions) ** 2 * (self.dist.variance + self.dist.mean**2)

    def draw(self, positions: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        return self._scale(positions) * np.asarray(self.dist.ppf(uniforms), dtype=np.float64)


@dataclass
class MarkedPointSet:
    window: Tuple[float, ...]
    positions: np.ndarray
    marks: np.ndarray
    seed: Optional[int] = None
    proposed: int = 0
    accepted: int = 0

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, len(self.window))
        self.marks = np.asarray(self.marks, dtype=np.float64).ravel()
        if self.positions.shape[0] != self.marks.shape[0]:
            raise WindowError(f"{self.positions.shape[0]} positions but {self.marks.shape[0]} marks")

        if ((self.positions < 0) | (self.positions > np.asarray(self.window))).any():
            raise WindowError(f"Point outside window {self.window}")

        if not self.accepted:
            self.accepted = len(self.marks)

        cells = _cell_indices(self.positions)
        order = np.lexsort(tuple(cells[:, _axis] for _axis in reversed(range(self.r))))
        self.positions = self.positions[order]
        self.marks = self.marks[order]

    @property
    def r(self) -> int:
        return len(self.window)

    def __len__(self) -> int:
        return len(self.marks)

    def integer_marks(self) -> bool:
        return bool(np.all(self.marks == np.round(self.marks)))


def _cell_indices(positions: np.ndarray) -> np.ndarray:
    return np.ceil(positions).astype(np.int64)


def _uniforms(rng: np.random.Generator, shape: Any) -> np.ndarray:
    """Uniforms strictly inside (0, 1)."""
    return (rng.integers(0, 2**53, size=shape).astype(np.float64) + 0.5) * 2.0**-53


def _check_window(window: Sequence[float]) -> Tuple[float, ...]:
    window = tuple(float(_side) for _side in window)
    if not window or any(_side <= 0 or not math.isfinite(_side) for _side in window):
        raise WindowError(f"Window sides must be positive and finite, got {window}")

    return window


def gen_marked_poisson(
    intensity: IntensitySpec, kernel: MarkKernel, window: Sequence[float], seed: int
) -> MarkedPointSet:
    """
    Poisson process on [0, T] with intensity Lambda and marks drawn from the kernel.

    Candidates come from a homogeneous process at the declared bound and are kept with probability lambda(x)/bound.
    """
    window = _check_window(window)
    rng = np.random.Generator(np.random.Philox(seed))
    bound = intensity.bound(window=window)
    if not math.isfinite(bound) or bound <= 0:
        raise DensityBoundError(f"Intensity needs a finite positive bound on {window}, got {bound}")

    proposed = int(rng.poisson(bound * math.prod(window)))
    positions = np.asarray(window) * (1 - rng.random((proposed, len(window))))
    if intensity.kind == HOMOGENEOUS_STR:
        kept = positions
    else:
        density = intensity.value(positions)
        if (density > bound * (1 + 1e-12)).any():
            worst = int(np.argmax(density))
            raise DensityBoundError(
                f"Density {density[worst]} at {positions[worst].tolist()} exceeds the declared bound {bound}"
            )

        kept = positions[rng.random(proposed) * bound < density]

    marks = kernel.draw(positions=kept, uniforms=_uniforms(rng=rng, shape=kept.shape[0]))
    LOGGER.debug(f"[ppp] seed {seed}: {proposed} proposed, {kept.shape[0]} accepted on window {window}")
    return MarkedPointSet(
        window=window, positions=kept, marks=marks, seed=seed, proposed=proposed, accepted=kept.shape[0]
    )


def measure_sum(pts: MarkedPointSet, lower: Sequence[float], upper: Sequence[float]) -> float:
    """S((a, b]) = sum of marks of points with a < x <= b."""
    lower_arr = np.asarray(lower, dtype=np.float64)
    upper_arr = np.asarray(upper, dtype=np.float64)
    if (lower_arr < 0).any() or (upper_arr > np.asarray(pts.window)).any() or (lower_arr > upper_arr).any():
        raise WindowError(f"Box ({lower}, {upper}] is not inside window {pts.window}")

    inside = np.all((pts.positions > lower_arr) & (pts.positions <= upper_arr), axis=1)
    return math.fsum(pts.marks[inside])


def cell_field(pts: MarkedPointSet, upper: MultiIndex) -> ScalarField:
    """
    Z_n = S(C_n) with C_n = (n - 1, n] over the box {1..N}.

    Integer-valued marks give an integer field, so its prefix sums match measure_sum exactly; float marks agree
    up to rounding.
    """
    if upper.r != pts.r or any(_n > _side for _n, _side in zip(upper.coords, pts.window)):
        raise WindowError(f"Cell box {upper} exceeds window {pts.window}")

    box = LatticeBox(upper=upper)
    box.check_size()
    cells = _cell_indices(pts.positions)
    inside = np.all((cells >= 1) & (cells <= np.asarray(upper.coords)), axis=1)
    integer_valued = pts.integer_marks()
    values = np.zeros(box.shape, dtype=np.int64 if integer_valued else np.float64)
    marks = pts.marks[inside].astype(values.dtype)
    np.add.at(values, tuple((cells[inside] - 1).T), marks)
    return ScalarField(box=box, values=values)


def check_cell_consistency(pts: MarkedPointSet, upper: MultiIndex, rel_tol: float = 1e-9) -> Tuple[bool, float, float]:
    """
    prefix_sums(cell_field)[N] against measure_sum over (0, N]: exact for integer marks, otherwise within rel_tol of
    the total absolute mark mass.

    Returns the verdict with both values.
    """
    cells = cell_field(pts=pts, upper=upper)
    from_cells = prefix_sums(field=cells).values[upper.array_position()]
    direct = measure_sum(pts=pts, lower=(0.0,) * pts.r, upper=tuple(float(_n) for _n in upper.coords))
    if cells.is_integer_valued():
        return bool(from_cells == direct), float(from_cells), direct

    scale = math.fsum(np.abs(pts.marks))
    return abs(float(from_cells) - direct) <= rel_tol * scale, float(from_cells), direct


def ergodic_ratio(pts: MarkedPointSet, corners: Sequence[Sequence[float]]) -> List[Tuple[Tuple[float, ...], float]]:
    """S((0, x]) / vol((0, x]) for every corner x."""
    result: List[Tuple[Tuple[float, ...], float]] = []
    for corner in corners:
        corner = tuple(float(_coord) for _coord in corner)
        volume = math.prod(corner)
        if volume <= 0:
            raise WindowError(f"Corner {corner} spans a zero-volume box")

        result.append((corner, measure_sum(pts=pts, lower=(0.0,) * pts.r, upper=corner) / volume))

    return result


def diagonal_corners(window: Sequence[float], count: int) -> List[Tuple[float, ...]]:
    """Corners (k / count) * T, k = 1..count, along the window diagonal."""
    window = _check_window(window)
    return [tuple(_side * _k / count for _side in window) for _k in range(1, count + 1)]


def expected_measure(
    intensity: IntensitySpec, kernel: MarkKernel, lower: Sequence[float], upper: Sequence[float]
) -> float:
    """E S((a, b]) = integral of E(y|x) over the box against Lambda."""
    if kernel.kind == INDEPENDENT_STR:
        return kernel.dist.mean * intensity.measure(lower=lower, upper=upper)

    assert kernel.scale is not None
    total = kernel.dist.mean
    for axis, (_a, _b) in enumerate(zip(lower, upper)):
        density_axis = intensity.density.axes[axis] if intensity.density is not None else AxisFunction.constant(1.0)
        scale_axis = kernel.scale.axes[axis]
        value, _ = integrate.quad(lambda _x: float(scale_axis.value(_x) * density_axis.value(_x)), _a, _b)
        total *= value

    return total * (intensity.rate if intensity.kind == HOMOGENEOUS_STR else 1.0)


@dataclass(frozen=True)
class ErgodicSweepReport:
    volumes: Tuple[float, ...]
    mean_abs_errors: Tuple[float, ...]
    slope: float
    seeds: Tuple[int, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "volumes": list(self.volumes),
            "mean_abs_errors": list(self.mean_abs_errors),
            "slope": self.slope,
            "seeds": list(self.seeds),
        }


def ergodic_error_sweep(
    intensity: IntensitySpec,
    kernel: MarkKernel,
    windows: Sequence[Sequence[float]],
    seeds: Sequence[int],
    threads: int = 1,
) -> ErgodicSweepReport:
    """
    Mean absolute error of S([0, T]) / vol(T) against its ergodic limit, per window, over a seed sweep.

    slope is the least-squares slope of log error against log volume; it sits near -1/2 when the ratio obeys the law
    of large numbers at the CLT rate.
    """
    volumes: List[float] = []
    errors: List[float] = []
    for window in windows:
        window = _check_window(window)
        volume = math.prod(window)
        limit = expected_measure(intensity=intensity, kernel=kernel, lower=(0.0,) * len(window), upper=window) / volume

        def _error(seed: int, _window: Tuple[float, ...] = window, _limit: float = limit) -> float:
            pts = gen_marked_poisson(intensity=intensity, kernel=kernel, window=_window, seed=seed)
            return abs(ergodic_ratio(pts=pts, corners=[_window])[0][1] - _limit)

        if threads <= 1:
            per_seed = [_error(_seed) for _seed in seeds]
        else:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                futures: Dict[Future, int] = {executor.submit(_error, _seed): _idx for _idx, _seed in enumerate(seeds)}
                per_seed = get_future_results(futures=futures)

        volumes.append(volume)
        errors.append(math.fsum(per_seed) / len(per_seed))

    slope = math.nan
    if len(volumes) >= 2 and all(_err > 0 for _err in errors):
        slope = float(np.polyfit(np.log(volumes), np.log(errors), 1)[0])

    return ErgodicSweepReport(
        volumes=tuple(volumes), mean_abs_errors=tuple(errors), slope=slope, seeds=tuple(int(_s) for _s in seeds)
    )


def _require_centered(kernel: MarkKernel) -> None:
    if abs(kernel.dist.mean) > MEAN_TOLERANCE:
        raise CenteringError(
            f"Mark kernel {kernel.dist.to_dict()} has nonzero conditional mean; center the marks (y - E(y|x)) first"
        )


def _cell_axis_integrals(intensity: IntensitySpec, kernel: MarkKernel, axis: int, side: int) -> np.ndarray:
    """integral over (m - 1, m] of s_axis(x)^2 * f_axis(x) dx, m = 1..side."""
    density_axis = intensity.density.axes[axis] if intensity.density is not None else None
    scale_axis = kernel.scale.axes[axis] if kernel.scale is not None else None
    if scale_axis is None and density_axis is not None:
        return np.asarray([density_axis.integral(_m - 1, _m) for _m in range(1, side + 1)])

    if scale_axis is None:
        return np.ones(side)

    def _integrand(x: float) -> float:
        value = float(scale_axis.value(x)) ** 2
        return value * float(density_axis.value(x)) if density_axis is not None else value

    return np.asarray([integrate.quad(_integrand, _m - 1, _m)[0] for _m in range(1, side + 1)])


def pp_condition_terms(
    intensity: IntensitySpec, kernel: MarkKernel, spec: NormalizationSpec, box: LatticeBox
) -> ScalarField:
    """b_n^(-2) * integral over C_n of E(y^2|x) Lambda(dx)"""
    _require_centered(kernel=kernel)
    if intensity.density is not None and intensity.density.r != box.r:
        raise IntensityError(f"Density has {intensity.density.r} axes, box {box.upper} has {box.r}")

    second = kernel.dist.variance + kernel.dist.mean**2
    constant = second * (intensity.rate if intensity.kind == HOMOGENEOUS_STR else 1.0)
    cell_mass = np.full((1,) * box.r, constant, dtype=np.float64)
    for axis, side in enumerate(box.shape):
        shape = [1] * box.r
        shape[axis] = side
        cell_mass = cell_mass * _cell_axis_integrals(intensity=intensity, kernel=kernel, axis=axis, side=side).reshape(
            shape
        )

    normalization = spec.eval_field(box=box).values.astype(np.float64)
    return ScalarField(box=box, values=np.broadcast_to(cell_mass, box.shape) / normalization**2)


def pp_condition_series(
    intensity: IntensitySpec,
    kernel: MarkKernel,
    spec: NormalizationSpec,
    box: Optional[LatticeBox] = None,
    tail: TailArgument = TailKind.SEPARABLE_POWER_LOG,
    r: int = 2,
) -> SeriesReport:
    """
    sum_n b_n^(-2) * integral over C_n of E(y^2|x) Lambda(dx) < infinity, marks centered.

    Homogeneous intensity with independent marks makes the term exactly lambda sigma^2 / b_n^2. Otherwise the
    cell integral is at most the product of the per-axis suprema of s_i^2 f_i, which bounds the tail from above.
    """
    box = box if box is not None else default_box(r=intensity.density.r if intensity.density is not None else r)
    terms = pp_condition_terms(intensity=intensity, kernel=kernel, spec=spec, box=box)

    upper: Optional[SeparableEnvelope] = None
    lower: Optional[SeparableEnvelope] = None
    params = spec.power_log_params()
    if params is not None:
        _p, _beta = params
        axes = tuple(PowerLogAxis(s=2 * _p, t=2 * _beta) for _ in range(box.r))
        second = kernel.dist.variance + kernel.dist.mean**2
        if intensity.kind == HOMOGENEOUS_STR and kernel.kind == INDEPENDENT_STR:
            upper = lower = SeparableEnvelope(constant=intensity.rate * second, axes=axes)
        else:
            bound = second * (intensity.rate if intensity.kind == HOMOGENEOUS_STR else 1.0)
            for axis in range(box.r):
                if intensity.density is not None:
                    bound *= intensity.density.axes[axis].global_bound()

                if kernel.scale is not None:
                    bound *= kernel.scale.axes[axis].global_bound() ** 2

            if math.isfinite(bound):
                upper = SeparableEnvelope(constant=bound, axes=axes)

    return series_sum(term=terms, r=box.r, box=box, tail=tail_strategy(tail=tail, upper=upper, lower=lower))


def points_to_csv(pts: MarkedPointSet, path: str) -> str:
    """Write x_1..x_r,mark rows and a JSON sidecar with window, seed and thinning counts; returns the sidecar path."""
    write_csv_rows(
        path=path,
        header=[f"x_{_axis + 1}" for _axis in range(pts.r)] + ["mark"],
        rows=[[*(float(_x) for _x in _pos), float(_mark)] for _pos, _mark in zip(pts.positions, pts.marks)],
    )
    sidecar = f"{os.path.splitext(path)[0]}.json"
    with open(sidecar, "w") as fd:
        json.dump(
            {"window": list(pts.window), "seed": pts.seed, "proposed": pts.proposed, "accepted": pts.accepted},
            fd,
            sort_keys=True,
            indent=2,
        )

    return sidecar


def axis_function_from_dict(data: Dict[str, Any]) -> AxisFunction:
    kind = data.get("kind", CONSTANT_FUNCTION_STR)
    if kind == CONSTANT_FUNCTION_STR:
        return AxisFunction.constant(c=float(data["c"]))

    if kind == LINEAR_FUNCTION_STR:
        return AxisFunction.linear(c=float(data["c"]), slope=float(data["slope"]))

    if kind == EXPONENTIAL_FUNCTION_STR:
        return AxisFunction.exponential(c=float(data["c"]), rate=float(data["rate"]))

    raise IntensityError(f"Axis function kind {kind} cannot be read from a config")


def intensity_from_dict(data: Dict[str, Any]) -> IntensitySpec:
    kind = data.get("kind", HOMOGENEOUS_STR)
    if kind == HOMOGENEOUS_STR:
        return IntensitySpec.homogeneous(rate=float(data["rate"]))

    if kind == SEPARABLE_DENSITY_STR:
        density = SeparableFunction(axes=tuple(axis_function_from_dict(_axis) for _axis in data["axes"]))
        return IntensitySpec.separable(density=density, declared_bound=data.get("bound"))

    raise IntensityError(f"Unknown intensity kind {kind}")


def kernel_from_dict(data: Dict[str, Any]) -> MarkKernel:
    kind = data.get("kind", INDEPENDENT_STR)
    dist = distribution_from_dict(data["dist"])
    if kind == INDEPENDENT_STR:
        return MarkKernel.independent(dist=dist)

    if kind == POSITION_SCALED_STR:
        scale = SeparableFunction(axes=tuple(axis_function_from_dict(_axis) for _axis in data["scale"]))
        return MarkKernel.position_scaled(dist=dist, scale=scale)

    raise IntensityError(f"Unknown mark kernel kind {kind}")
