"""
Multi-index Kronecker lemma: if x_n >= 0, b is monotone and sum x_n / b_n converges, then (1/b_n) sum_{k <= n} x_k -> 0.

For r >= 2 the sign condition cannot be dropped. The signed field x_(1,k) = -k, x_(2,k) = 2k, x_(j,k) = 0 for j > 2 has
vanishing weighted partial sums against b_n = n_1 n_2 for every n_1 >= 2, while the normalized sums equal
(n_2 + 1) / (2 n_1), which has no limit as |n| -> infinity. counterexample_verify checks both identities in exact
rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Tuple

import numpy as np

from slln_lab.libs.lattice import (
    ConvergenceMode,
    LatticeBox,
    MultiIndex,
    ScalarField,
    diagonal,
    first_index,
    increment,
    prefix_sums,
    shell_labels,
)
from slln_lab.libs.normalization import NormalizationSpec
from slln_lab.utils.helpers import SllnLabError, write_csv_rows


class NegativeEntryError(SllnLabError):
    def __init__(self, index: MultiIndex, value: float):
        self.index = index
        self.value = value

    def __str__(self) -> str:
        return f"Kronecker lemma needs nonnegative terms, x{self.index} = {self.value}"


class DimensionError(SllnLabError):
    pass


@dataclass(frozen=True)
class KroneckerReport:
    mode: ConvergenceMode
    series_partial: float
    ratio_curve: Tuple[Tuple[MultiIndex, float], ...]
    series_partials: Tuple[Tuple[MultiIndex, float], ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "series_partial": self.series_partial,
            "ratio_curve": [{"n": str(_idx), "ratio": _val} for _idx, _val in self.ratio_curve],
            "series_partials": [{"n": str(_idx), "partial": _val} for _idx, _val in self.series_partials],
        }


def kronecker_check(x: ScalarField, spec: NormalizationSpec, mode: ConvergenceMode) -> KroneckerReport:
    """
    Partial sums of sum x_k / b_k and the normalized sums (1/b_n) sum_{k <= n} x_k along a path.

    MIN mode follows the diagonal (m, ..., m); MAX mode reports, for every dyadic shell of |n|, the largest
    normalized sum in the shell. Signed input is accepted for r = 1, where the lemma needs no sign condition.
    """
    if x.box.r >= 2 and (x.values < 0).any():
        index = first_index(x.values < 0)
        raise NegativeEntryError(index=index, value=float(x.at(index)))

    normalization = spec.eval_field(box=x.box).values.astype(np.float64)
    weighted = prefix_sums(field=ScalarField(box=x.box, values=x.values.astype(np.float64) / normalization)).values
    ratios = prefix_sums(field=x).values.astype(np.float64) / normalization

    if mode == ConvergenceMode.MIN:
        path = diagonal(box=x.box)
        ratio_curve = tuple((_idx, float(ratios[_idx.array_position()])) for _idx in path)
        series_partials = tuple((_idx, float(weighted[_idx.array_position()])) for _idx in path)
    else:
        labels = shell_labels(box=x.box)
        ratio_points: List[Tuple[MultiIndex, float]] = []
        partial_points: List[Tuple[MultiIndex, float]] = []
        magnitudes = np.abs(ratios)
        for shell in np.unique(labels):
            in_shell = labels == shell
            position = np.unravel_index(np.argmax(np.where(in_shell, magnitudes, -np.inf)), x.box.shape)
            index = MultiIndex(coords=tuple(int(_pos) + 1 for _pos in position))
            ratio_points.append((index, float(ratios[position])))
            partial_points.append((index, float(weighted[position])))

        ratio_curve = tuple(ratio_points)
        series_partials = tuple(partial_points)

    return KroneckerReport(
        mode=mode,
        series_partial=float(weighted[x.box.upper.array_position()]),
        ratio_curve=ratio_curve,
        series_partials=series_partials,
    )


def counterexample_field(upper: MultiIndex) -> ScalarField:
    """x_(1,k) = -k, x_(2,k) = 2k, 0 elsewhere."""
    if upper.r != 2:
        raise DimensionError(f"The signed counterexample lives on r=2, got {upper}")

    box = LatticeBox(upper=upper)
    box.check_size()
    values = np.zeros(box.shape, dtype=np.int64)
    columns = np.arange(1, box.shape[1] + 1, dtype=np.int64)
    values[0, :] = -columns
    if box.shape[0] >= 2:
        values[1, :] = 2 * columns

    return ScalarField(box=box, values=values)


@dataclass(frozen=True)
class CounterexampleRow:
    n1: int
    n2: int
    weighted_sum: Fraction
    ratio: Fraction
    expected_ratio: Fraction


@dataclass(frozen=True)
class CounterexampleReport:
    upper: MultiIndex
    rows: Tuple[CounterexampleRow, ...]
    weighted_sums_zero: bool
    ratio_matches: bool
    delta_is_one: bool
    diagonal_path: Tuple[Tuple[int, float], ...] = field(default_factory=tuple)
    super_diagonal_path: Tuple[Tuple[int, float], ...] = field(default_factory=tuple)
    diagonal_matches: bool = True
    super_diagonal_unbounded: bool = True

    @property
    def path_limits(self) -> Tuple[float, float]:
        """(last diagonal ratio, largest super-diagonal ratio) observed inside the box."""
        diagonal_limit = self.diagonal_path[-1][1] if self.diagonal_path else float("nan")
        witness = max((_ratio for _, _ratio in self.super_diagonal_path), default=float("nan"))
        return diagonal_limit, witness

    @property
    def all_identities_hold(self) -> bool:
        return (
            self.weighted_sums_zero
            and self.ratio_matches
            and self.delta_is_one
            and self.diagonal_matches
            and self.super_diagonal_unbounded
        )

    def to_dict(self) -> Dict[str, Any]:
        diagonal_limit, witness = self.path_limits
        return {
            "upper": str(self.upper),
            "rows": len(self.rows),
            "weighted_sums_zero": self.weighted_sums_zero,
            "ratio_matches": self.ratio_matches,
            "delta_is_one": self.delta_is_one,
            "diagonal_matches": self.diagonal_matches,
            "super_diagonal_unbounded": self.super_diagonal_unbounded,
            "diagonal_limit": diagonal_limit,
            "super_diagonal_witness": witness,
        }


def _exact_prefix_sums(values: np.ndarray) -> np.ndarray:
    for axis in range(values.ndim):
        values = np.cumsum(values, axis=axis)

    return values


def counterexample_verify(upper: MultiIndex) -> CounterexampleReport:
    """
    Exact check of the signed counterexample on 2 <= n_1 <= N_1, 1 <= n_2 <= N_2 with b_n = n_1 n_2.

    Weighted sums use Fractions; normalized sums are integer prefix sums over integer b_n.
    """
    if upper.r != 2 or upper[0] < 2:
        raise DimensionError(f"Counterexample verification needs N >= (2, 1), got {upper}")

    x = counterexample_field(upper=upper)
    box = x.box
    normalization = NormalizationSpec.product().eval_field(box=box)
    delta_is_one = bool((increment(field=normalization).values == 1).all())

    weights = np.empty(box.shape, dtype=object)
    for position in np.ndindex(*box.shape):
        weights[position] = Fraction(int(x.values[position]), int(normalization.values[position]))

    weighted = _exact_prefix_sums(weights)
    sums = prefix_sums(field=x).values

    rows: List[CounterexampleRow] = []
    for n1 in range(2, box.shape[0] + 1):
        for n2 in range(1, box.shape[1] + 1):
            rows.append(
                CounterexampleRow(
                    n1=n1,
                    n2=n2,
                    weighted_sum=weighted[n1 - 1, n2 - 1],
                    ratio=Fraction(int(sums[n1 - 1, n2 - 1]), n1 * n2),
                    expected_ratio=Fraction(n2 + 1, 2 * n1),
                )
            )

    diagonal_path = tuple(
        (_m, float(Fraction(int(sums[_m - 1, _m - 1]), _m * _m))) for _m in range(2, min(box.shape) + 1)
    )
    super_diagonal_path = tuple(
        (_m, float(Fraction(int(sums[_m - 1, _m * _m - 1]), _m**3)))
        for _m in range(2, box.shape[0] + 1)
        if _m * _m <= box.shape[1]
    )
    return CounterexampleReport(
        upper=upper,
        rows=tuple(rows),
        weighted_sums_zero=all(_row.weighted_sum == 0 for _row in rows),
        ratio_matches=all(_row.ratio == _row.expected_ratio for _row in rows),
        delta_is_one=delta_is_one,
        diagonal_path=diagonal_path,
        super_diagonal_path=super_diagonal_path,
        diagonal_matches=all(abs(_ratio - (_m + 1) / (2 * _m)) <= 1e-12 for _m, _ratio in diagonal_path),
        super_diagonal_unbounded=all(_ratio >= _m / 2 for _m, _ratio in super_diagonal_path),
    )


def counterexample_to_csv(report: CounterexampleReport, path: str) -> None:
    write_csv_rows(
        path=path,
        header=["n1", "n2", "weighted_sum", "ratio", "expected_ratio"],
        rows=[
            [_row.n1, _row.n2, str(_row.weighted_sum), str(_row.ratio), str(_row.expected_ratio)]
            for _row in report.rows
        ],
    )
