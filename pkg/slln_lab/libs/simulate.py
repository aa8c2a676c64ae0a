"""
Reproducible random fields and Monte Carlo diagnostics of normalized partial sums.

Every random value is a pure function of (seed, replicate, stream, lattice point): a SplitMix64 hash chain turns the
counter into a uniform in (0, 1) and the marginal's inverse CDF turns that into the value. Fields are therefore
identical on every box that contains the point and on every thread schedule.
"""

from __future__ import annotations

import math
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from slln_lab.libs.distributions import DistributionSpec, MomentNotFiniteError, Normal, distribution_from_dict
from slln_lab.libs.lattice import LatticeBox, ScalarField, prefix_sums, shell_labels
from slln_lab.libs.normalization import NormalizationSpec
from slln_lab.utils.constants import (
    IID_STR,
    MAX_FIELD_POINTS,
    MOVING_AVERAGE_STR,
    ORTHO_MARTINGALE_STR,
)
from slln_lab.utils.helpers import SllnLabError, get_future_results, get_logger_with_params, write_csv_rows

LOGGER = get_logger_with_params(name="simulate")

IID_STREAM: int = 0
INNOVATION_STREAM: int = 1 << 20
CENTERING_TOLERANCE: float = 1e-12

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)


class FieldSpecError(SllnLabError):
    pass


class SimulationError(SllnLabError):
    pass


def _splitmix(state: np.ndarray) -> np.ndarray:
    state = (state ^ (state >> np.uint64(30))) * _MIX_1
    state = (state ^ (state >> np.uint64(27))) * _MIX_2
    return state ^ (state >> np.uint64(31))


def counter_uniforms(seed: int, replicate: int, stream: int, coords: Sequence[np.ndarray]) -> np.ndarray:
    """
    Uniforms in (0, 1) keyed by (seed, replicate, stream, coordinates).

    coords are broadcastable integer arrays, one per axis; the result has their broadcast shape.
    """
    with np.errstate(over="ignore"):
        state = np.asarray([seed % 2**64], dtype=np.uint64)
        for key in (replicate, stream):
            state = _splitmix(state + _GOLDEN * np.uint64(key % 2**64))

        state = state.reshape((1,) * max(len(coords), 1))
        for coord in coords:
            state = _splitmix(state + _GOLDEN * np.asarray(coord, dtype=np.uint64))

    return ((state >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class FieldGenSpec:
    """
    Random field construction over a box.

    iid:               Z_n drawn from dist
    ortho_martingale:  Z_n = prod_i xi^(i)_(n_i), independent centered per-axis streams
    moving_average:    Z_n = sum_lag w_lag * eps_(n + lag), eps drawn from dist over the extended box
    """

    kind: str
    box: LatticeBox
    seed: int = 0
    dist: Optional[DistributionSpec] = None
    axis_dists: Tuple[DistributionSpec, ...] = ()
    weights: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind in (IID_STR, MOVING_AVERAGE_STR) and self.dist is None:
            raise FieldSpecError(f"{self.kind} field needs a distribution")

        if self.kind == ORTHO_MARTINGALE_STR:
            if len(self.axis_dists) != self.box.r:
                raise FieldSpecError(f"ortho_martingale needs {self.box.r} per-axis laws, got {len(self.axis_dists)}")

            for axis, dist in enumerate(self.axis_dists):
                if abs(dist.mean) > CENTERING_TOLERANCE:
                    raise FieldSpecError(f"ortho_martingale axis {axis + 1} law {dist.to_dict()} is not centered")

        elif self.kind == MOVING_AVERAGE_STR:
            if self.weights is None or np.ndim(self.weights) != self.box.r or not np.size(self.weights):
                raise FieldSpecError(f"moving_average needs a non-empty kernel with {self.box.r} axes")

            if not np.isfinite(self.weights).all():
                raise FieldSpecError("moving_average kernel weights must be finite")

            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))

        elif self.kind != IID_STR:
            raise FieldSpecError(f"Unknown field kind {self.kind}")

    @classmethod
    def iid(cls, dist: DistributionSpec, box: LatticeBox, seed: int = 0) -> FieldGenSpec:
        return cls(kind=IID_STR, box=box, seed=seed, dist=dist)

    @classmethod
    def ortho_martingale(cls, axis_dists: Sequence[DistributionSpec], box: LatticeBox, seed: int = 0) -> FieldGenSpec:
        return cls(kind=ORTHO_MARTINGALE_STR, box=box, seed=seed, axis_dists=tuple(axis_dists))

    @classmethod
    def moving_average(
        cls, innovation: DistributionSpec, weights: np.ndarray, box: LatticeBox, seed: int = 0
    ) -> FieldGenSpec:
        return cls(kind=MOVING_AVERAGE_STR, box=box, seed=seed, dist=innovation, weights=np.asarray(weights))

    def mean_field_value(self) -> float:
        """E Z_n, identical for every n in all three constructions."""
        if self.kind == IID_STR:
            assert self.dist is not None
            return self.dist.mean

        if self.kind == ORTHO_MARTINGALE_STR:
            return 0.0

        assert self.dist is not None and self.weights is not None
        return self.dist.mean * math.fsum(self.weights.ravel())

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind, "box": list(self.box.shape), "seed": self.seed}
        if self.dist is not None:
            data["dist"] = self.dist.to_dict()

        if self.axis_dists:
            data["axis_dists"] = [_dist.to_dict() for _dist in self.axis_dists]

        if self.weights is not None:
            data["weights"] = self.weights.tolist()

        return data


def gen_iid_field(spec: FieldGenSpec, replicate: int = 0) -> ScalarField:
    assert spec.dist is not None
    uniforms = counter_uniforms(seed=spec.seed, replicate=replicate, stream=IID_STREAM, coords=spec.box.grids())
    return ScalarField(box=spec.box, values=np.asarray(spec.dist.ppf(uniforms), dtype=np.float64))


def axis_stream(spec: FieldGenSpec, axis: int, length: int, replicate: int = 0) -> np.ndarray:
    """xi^(axis)_1 .. xi^(axis)_length of the ortho-martingale construction."""
    coords = np.arange(1, length + 1, dtype=np.uint64)
    uniforms = counter_uniforms(seed=spec.seed, replicate=replicate, stream=1 + axis, coords=[coords])
    return np.asarray(spec.axis_dists[axis].ppf(uniforms), dtype=np.float64)


def gen_ortho_martingale_field(spec: FieldGenSpec, replicate: int = 0) -> ScalarField:
    values = np.ones((1,) * spec.box.r, dtype=np.float64)
    for axis, side in enumerate(spec.box.shape):
        shape = [1] * spec.box.r
        shape[axis] = side
        values = values * axis_stream(spec=spec, axis=axis, length=side, replicate=replicate).reshape(shape)

    return ScalarField(box=spec.box, values=np.broadcast_to(values, spec.box.shape).copy())


def gen_ma_stationary_field(spec: FieldGenSpec, replicate: int = 0) -> ScalarField:
    assert spec.dist is not None and spec.weights is not None
    extended = LatticeBox.of(*(_side + _lags - 1 for _side, _lags in zip(spec.box.shape, spec.weights.shape)))
    extended.check_size()
    uniforms = counter_uniforms(seed=spec.seed, replicate=replicate, stream=INNOVATION_STREAM, coords=extended.grids())
    innovations = np.asarray(spec.dist.ppf(uniforms), dtype=np.float64)

    values = np.zeros(spec.box.shape, dtype=np.float64)
    for lag in np.ndindex(*spec.weights.shape):
        window = tuple(slice(_lag, _lag + _side) for _lag, _side in zip(lag, spec.box.shape))
        values += spec.weights[lag] * innovations[window]

    return ScalarField(box=spec.box, values=values)


def gen_field(spec: FieldGenSpec, replicate: int = 0) -> ScalarField:
    spec.box.check_size()
    if spec.kind == IID_STR:
        return gen_iid_field(spec=spec, replicate=replicate)

    if spec.kind == ORTHO_MARTINGALE_STR:
        return gen_ortho_martingale_field(spec=spec, replicate=replicate)

    return gen_ma_stationary_field(spec=spec, replicate=replicate)


class CenterMode(Enum):
    ANALYTIC_MEAN = "analytic_mean"
    NONE = "none"


@dataclass(frozen=True)
class ShellRecord:
    shell: int
    population: int
    p50: float
    p90: float
    max: float


@dataclass(frozen=True)
class ShellStats:
    records: Tuple[ShellRecord, ...]
    replications: int
    seed: int

    def record(self, shell: int) -> ShellRecord:
        for _record in self.records:
            if _record.shell == shell:
                return _record

        raise KeyError(shell)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "replications": self.replications,
            "seed": self.seed,
            "shells": [
                {"shell_t": _rec.shell, "pop": _rec.population, "p50": _rec.p50, "p90": _rec.p90, "max": _rec.max}
                for _rec in self.records
            ],
        }


def shell_stats_to_csv(stats: ShellStats, path: str) -> None:
    write_csv_rows(
        path=path,
        header=["shell_t", "pop", "p50", "p90", "max", "replications", "seed"],
        rows=[
            [_rec.shell, _rec.population, _rec.p50, _rec.p90, _rec.max, stats.replications, stats.seed]
            for _rec in stats.records
        ],
    )


def _sizes(box: LatticeBox) -> np.ndarray:
    sizes = np.ones((1,) * box.r, dtype=np.float64)
    for grid in box.grids():
        sizes = sizes * grid

    return np.broadcast_to(sizes, box.shape)


def _run_replicates(task: Any, replications: int, threads: int) -> List[Any]:
    if threads <= 1:
        return [task(_rep) for _rep in range(replications)]

    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures: Dict[Future, int] = {executor.submit(task, _rep): _rep for _rep in range(replications)}
        return get_future_results(futures=futures)


def slln_diagnostic(
    gen: FieldGenSpec,
    spec: NormalizationSpec,
    replications: int,
    center: CenterMode = CenterMode.ANALYTIC_MEAN,
    threads: int = 1,
    max_points: int = MAX_FIELD_POINTS,
) -> ShellStats:
    """
    Quantiles over replications of sup_{n in shell t} |S_n - E S_n| / b_n for every dyadic shell of the box.

    Each replicate materializes its own field and prefix sums; shells are reduced with a single sort of the labels.
    """
    if replications < 1:
        raise SimulationError(f"replications must be >= 1, got {replications}")

    box = gen.box
    box.check_size(max_points=max_points)
    labels = shell_labels(box=box).ravel()
    order = np.argsort(labels, kind="stable")
    shells, starts, populations = np.unique(labels[order], return_index=True, return_counts=True)

    normalization = spec.eval_field(box=box).values.astype(np.float64)
    expected = gen.mean_field_value() * _sizes(box=box) if center == CenterMode.ANALYTIC_MEAN else None

    def _shell_sups(replicate: int) -> np.ndarray:
        sums = prefix_sums(field=gen_field(spec=gen, replicate=replicate)).values
        deviations = np.abs(sums - expected if expected is not None else sums) / normalization
        return np.maximum.reduceat(deviations.ravel()[order], starts)

    LOGGER.info(f"[slln] {gen.kind} on {box.upper}, {replications} replications, {threads} threads")
    sups = np.vstack(_run_replicates(task=_shell_sups, replications=replications, threads=threads))
    quantiles = np.quantile(sups, [0.5, 0.9], axis=0)
    records = tuple(
        ShellRecord(
            shell=int(_shell),
            population=int(_pop),
            p50=float(quantiles[0, _col]),
            p90=float(quantiles[1, _col]),
            max=float(sups[:, _col].max()),
        )
        for _col, (_shell, _pop) in enumerate(zip(shells, populations))
    )
    return ShellStats(records=records, replications=replications, seed=gen.seed)


def _marginal(gen: FieldGenSpec) -> DistributionSpec:
    """Law of a single Z_n for the moving-average construction with Normal innovations."""
    assert gen.dist is not None and gen.weights is not None
    if not isinstance(gen.dist, Normal):
        raise SimulationError("moment of a moving-average field is only available for Normal innovations")

    return Normal(
        mu=gen.dist.mu * math.fsum(gen.weights.ravel()),
        sigma=gen.dist.sigma * math.sqrt(math.fsum((gen.weights**2).ravel())),
    )


def _moment_sum(gen: FieldGenSpec, moment: Any) -> float:
    """sum_{k <= n} of a per-point moment, n the box upper corner; moment maps a law to its value."""
    if gen.kind == IID_STR:
        assert gen.dist is not None
        per_point = moment(gen.dist)
    elif gen.kind == ORTHO_MARTINGALE_STR:
        per_point = math.prod(moment(_dist) for _dist in gen.axis_dists)
    else:
        per_point = moment(_marginal(gen=gen))

    if math.isinf(per_point):
        raise MomentNotFiniteError(f"moment of {gen.to_dict()} is infinite")

    return per_point * gen.box.size


def maximal_ratio(gen: FieldGenSpec, q: int, replications: int, threads: int = 1) -> float:
    """
    E max_{k <= n} S_k^(2q) / (|n|^(q-1) sum_{k <= n} E Z_k^(2q)), Monte Carlo over replications, n = box upper.

    0 when the denominator vanishes.
    """
    if int(q) != q or q < 1:
        raise SimulationError(f"q must be an integer >= 1, got {q}")

    if gen.kind == MOVING_AVERAGE_STR and q == 1:
        assert gen.dist is not None and gen.weights is not None
        second = gen.dist.variance * math.fsum((gen.weights**2).ravel()) + gen.mean_field_value() ** 2
        denominator = second * gen.box.size
    else:
        denominator = gen.box.size ** (q - 1) * _moment_sum(gen=gen, moment=lambda _dist: _dist.even_moment(2 * q))

    def _max_power(replicate: int) -> float:
        sums = prefix_sums(field=gen_field(spec=gen, replicate=replicate)).values
        return float(np.max(sums ** (2 * q)))

    maxima = _run_replicates(task=_max_power, replications=replications, threads=threads)
    if denominator == 0:
        return 0.0

    return math.fsum(maxima) / replications / denominator


@dataclass(frozen=True)
class MartingaleRatioReport:
    alpha: float
    ratio: float
    bound: float
    replications: int

    def to_dict(self) -> Dict[str, Any]:
        return {"alpha": self.alpha, "ratio": self.ratio, "bound": self.bound, "replications": self.replications}


def martingale_bound_constant(alpha: float, r: int) -> float:
    """(alpha / (alpha - 1))^(alpha r) * 2^r: Doob's maximal constant per axis times the moment inequality constant."""
    return (alpha / (alpha - 1)) ** (alpha * r) * 2**r


def martingale_maximal_ratio(
    gen: FieldGenSpec, alpha: float, replications: int, threads: int = 1
) -> MartingaleRatioReport:
    """E max_{k <= n} |S_k|^alpha / sum_{k <= n} E|Z_k|^alpha for centered i.i.d. or ortho-martingale fields."""
    if not 1 < alpha <= 2:
        raise SimulationError(f"alpha must lie in (1, 2], got {alpha}")

    if gen.kind == MOVING_AVERAGE_STR:
        raise SimulationError("moving-average fields are not martingale-difference arrays")

    if abs(gen.mean_field_value()) > CENTERING_TOLERANCE:
        raise SimulationError(f"martingale ratio needs a centered field, mean is {gen.mean_field_value()}")

    denominator = _moment_sum(gen=gen, moment=lambda _dist: _dist.abs_moment(alpha))

    def _max_power(replicate: int) -> float:
        sums = prefix_sums(field=gen_field(spec=gen, replicate=replicate)).values
        return float(np.max(np.abs(sums) ** alpha))

    maxima = _run_replicates(task=_max_power, replications=replications, threads=threads)
    ratio = 0.0 if denominator == 0 else math.fsum(maxima) / replications / denominator
    return MartingaleRatioReport(
        alpha=alpha,
        ratio=ratio,
        bound=martingale_bound_constant(alpha=alpha, r=gen.box.r),
        replications=replications,
    )


def field_from_dict(data: Dict[str, Any], box: LatticeBox, seed: int) -> FieldGenSpec:
    kind = data.get("kind", IID_STR)
    if kind == IID_STR:
        return FieldGenSpec.iid(dist=distribution_from_dict(data["dist"]), box=box, seed=seed)

    if kind == ORTHO_MARTINGALE_STR:
        axis_dists = [distribution_from_dict(_dist) for _dist in data["axis_dists"]]
        return FieldGenSpec.ortho_martingale(axis_dists=axis_dists, box=box, seed=seed)

    if kind == MOVING_AVERAGE_STR:
        return FieldGenSpec.moving_average(
            innovation=distribution_from_dict(data["dist"]),
            weights=np.asarray(data["weights"], dtype=np.float64),
            box=box,
            seed=seed,
        )

    raise FieldSpecError(f"Unknown field kind {kind}")


def empirical_lag_covariance(field_values: ScalarField, lag: Tuple[int, ...], mean: float = 0.0) -> float:
    """Sample mean of (Z_(n+lag) - mean)(Z_n - mean) over the pairs inside the box, lag >= 0 coordinatewise."""
    base = field_values.values[tuple(slice(0, _side - _lag) for _side, _lag in zip(field_values.box.shape, lag))]
    shifted = field_values.values[tuple(slice(_lag, None) for _lag in lag)]
    return float(np.mean((shifted - mean) * (base - mean)))
