"""
Multi-indices, lattice rectangles and dense fields over them.

A field over the box {1..N_1} x ... x {1..N_r} is stored as a numpy array of shape (N_1, ..., N_r) in C order,
so the last axis is the fastest varying one. Lattice point n = (n_1, ..., n_r) lives at array position
(n_1 - 1, ..., n_r - 1). Every CSV dump follows the same order.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, Dict, Iterator, List, Sequence, Tuple

import numpy as np

from slln_lab.utils.constants import MAX_FIELD_POINTS
from slln_lab.utils.helpers import SllnLabError, format_float

if TYPE_CHECKING:
    from slln_lab.libs.normalization import NormalizationSpec


class FieldError(SllnLabError):
    pass


class PrefixOverflowError(SllnLabError):
    def __init__(self, index: "MultiIndex"):
        self.index = index

    def __str__(self) -> str:
        return f"Prefix sum left the representable range at {self.index}"


class LevelSetOverflowError(SllnLabError):
    pass


class FieldTooLargeError(SllnLabError):
    pass


class ConvergenceMode(Enum):
    MAX = "max"  # |n| -> infinity
    MIN = "min"  # every coordinate -> infinity


@dataclass(frozen=True)
class MultiIndex:
    coords: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.coords:
            raise FieldError("A multi-index needs at least one coordinate")

        for _coord in self.coords:
            if int(_coord) != _coord or _coord < 1:
                raise FieldError(f"Multi-index coordinates must be positive integers, got {self.coords}")

        object.__setattr__(self, "coords", tuple(int(_coord) for _coord in self.coords))

    @classmethod
    def of(cls, *coords: int) -> MultiIndex:
        return cls(coords=tuple(coords))

    @property
    def r(self) -> int:
        return len(self.coords)

    @property
    def size(self) -> int:
        """|n| = n_1 * ... * n_r"""
        return int(np.prod(self.coords, dtype=object))

    def dominated_by(self, other: MultiIndex) -> bool:
        """Coordinatewise order k <= n."""
        return self.r == other.r and all(_k <= _n for _k, _n in zip(self.coords, other.coords))

    def array_position(self) -> Tuple[int, ...]:
        return tuple(_coord - 1 for _coord in self.coords)

    def __iter__(self) -> Iterator[int]:
        return iter(self.coords)

    def __len__(self) -> int:
        return len(self.coords)

    def __getitem__(self, axis: int) -> int:
        return self.coords[axis]

    def __str__(self) -> str:
        return f"({','.join(str(_coord) for _coord in self.coords)})"


@dataclass(frozen=True)
class LatticeBox:
    upper: MultiIndex

    @classmethod
    def of(cls, *upper: int) -> LatticeBox:
        return cls(upper=MultiIndex.of(*upper))

    @property
    def r(self) -> int:
        return self.upper.r

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.upper.coords

    @property
    def size(self) -> int:
        return self.upper.size

    def contains(self, index: MultiIndex) -> bool:
        return index.dominated_by(self.upper)

    def indices(self) -> Iterator[MultiIndex]:
        """Lattice points in the documented linearization order (last axis fastest)."""
        for position in np.ndindex(*self.shape):
            yield MultiIndex(coords=tuple(_pos + 1 for _pos in position))

    def grids(self) -> Tuple[np.ndarray, ...]:
        """Sparse 1-based coordinate arrays, broadcastable to the box shape."""
        return tuple(np.ogrid[tuple(slice(1, _side + 1) for _side in self.shape)])

    def check_size(self, max_points: int = MAX_FIELD_POINTS) -> None:
        if self.size > max_points:
            raise FieldTooLargeError(f"Box {self.upper} has {self.size} points, above the cap of {max_points}")


class ScalarField:
    def __init__(self, box: LatticeBox, values: np.ndarray, check_finite: bool = True) -> None:
        self.box = box
        self.values: np.ndarray = np.asarray(values)
        if self.values.shape != box.shape:
            raise FieldError(f"Field values have shape {self.values.shape}, box {box.upper} needs {box.shape}")

        if check_finite:
            self.require_finite()

    @classmethod
    def from_function(cls, box: LatticeBox, func: Callable[..., Any]) -> ScalarField:
        """Evaluate a vectorised function of the 1-based coordinate arrays over the box."""
        box.check_size()
        values = np.broadcast_to(np.asarray(func(*box.grids())), box.shape).copy()
        return cls(box=box, values=values)

    @classmethod
    def constant(cls, box: LatticeBox, value: float) -> ScalarField:
        box.check_size()
        return cls(box=box, values=np.full(box.shape, value))

    def require_finite(self) -> None:
        finite = np.isfinite(self.values)
        if not finite.all():
            bad = first_index(~finite)
            raise FieldError(f"Field value at {bad} is not finite: {self.values[bad.array_position()]}")

    def at(self, index: MultiIndex) -> Any:
        if not self.box.contains(index):
            raise FieldError(f"{index} is outside box {self.box.upper}")

        return self.values[index.array_position()]

    def is_integer_valued(self) -> bool:
        return np.issubdtype(self.values.dtype, np.integer)

    def __repr__(self) -> str:
        return f"ScalarField(box={self.box.upper}, dtype={self.values.dtype})"


def first_index(mask: np.ndarray) -> MultiIndex:
    """First lattice point (in linearization order) where the mask is set."""
    position = np.argwhere(mask)[0]
    return MultiIndex(coords=tuple(int(_pos) + 1 for _pos in position))


def _compensated_sweep(values: np.ndarray, axis: int) -> None:
    """In-place Kahan-compensated running sum along one axis, vectorised across the hyperplanes."""
    moved = np.moveaxis(values, axis, 0)
    running = moved[0].copy()
    compensation = np.zeros_like(running)
    for position in range(1, moved.shape[0]):
        term = moved[position] - compensation
        total = running + term
        compensation = (total - running) - term
        running = total
        moved[position] = running


def _integer_prefix_sums(values: np.ndarray) -> np.ndarray:
    """int64 prefix sums; when max|f| * |box| can exceed int64 the sweep runs on exact Python integers first."""
    limits = np.iinfo(np.int64)
    exact = values.astype(object)
    if int(np.abs(exact).max()) * values.size <= limits.max:
        result = values.astype(np.int64)
        for axis in range(values.ndim):
            result = np.cumsum(result, axis=axis)

        return result

    for axis in range(values.ndim):
        exact = np.cumsum(exact, axis=axis)

    outside = ((exact > limits.max) | (exact < limits.min)).astype(bool)
    if outside.any():
        raise PrefixOverflowError(index=first_index(outside))

    return exact.astype(np.int64)


def prefix_sums(field: ScalarField) -> ScalarField:
    """S_n = sum of field[k] over k <= n, one sweep per axis."""
    field.require_finite()
    if field.is_integer_valued():
        return ScalarField(box=field.box, values=_integer_prefix_sums(values=field.values))

    values = field.values.astype(np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        for axis in range(field.box.r):
            _compensated_sweep(values=values, axis=axis)

    finite = np.isfinite(values)
    if not finite.all():
        raise PrefixOverflowError(index=first_index(~finite))

    return ScalarField(box=field.box, values=values)


def increment(field: ScalarField) -> ScalarField:
    """
    Inclusion-exclusion increment: the alternating sum of field[n - m] over m in {0,1}^r.

    Entries with a zero coordinate read as 0; applying a first difference along every axis in turn
    produces exactly the 2^r-term sum.
    """
    field.require_finite()
    values = field.values
    for axis in range(field.box.r):
        values = np.diff(values, axis=axis, prepend=np.zeros_like(values.take([0], axis=axis)))

    return ScalarField(box=field.box, values=values)


def is_monotone(field: ScalarField) -> Tuple[bool, Tuple[MultiIndex, MultiIndex] | None]:
    """
    Check field[k] <= field[n] for k <= n through adjacent comparisons along each axis.

    Returns the verdict and the first violating pair (k, n), ordered by k in linearization order.
    """
    violation: Tuple[MultiIndex, MultiIndex] | None = None
    for axis in range(field.box.r):
        decreasing = np.diff(field.values, axis=axis) < 0
        if not decreasing.any():
            continue

        lower = first_index(decreasing)
        upper_coords = list(lower.coords)
        upper_coords[axis] += 1
        candidate = (lower, MultiIndex(coords=tuple(upper_coords)))
        if violation is None or lower.array_position() < violation[0].array_position():
            violation = candidate

    return violation is None, violation


def level_set(spec: NormalizationSpec, threshold: float, bounding: LatticeBox) -> List[MultiIndex]:
    """A_t = {n : b_n <= threshold}, enumerated inside the bounding box."""
    if threshold <= 0:
        raise FieldError(f"Level set threshold must be positive, got {threshold}")

    below = spec.eval_field(box=bounding).values <= threshold
    on_face = np.zeros(bounding.shape, dtype=bool)
    for axis, side in enumerate(bounding.shape):
        face = [slice(None)] * bounding.r
        face[axis] = side - 1
        on_face[tuple(face)] = True

    if (below & on_face).any():
        raise LevelSetOverflowError(
            f"Level set b_n <= {threshold} reaches the boundary of {bounding.upper} at {first_index(below & on_face)}"
        )

    return [MultiIndex(coords=tuple(int(_pos) + 1 for _pos in _position)) for _position in np.argwhere(below)]


def shell_labels(box: LatticeBox) -> np.ndarray:
    """t = floor(log2 |n|) for every lattice point, exact for |n| < 2^53."""
    sizes = np.ones(box.shape, dtype=np.float64)
    for grid in box.grids():
        sizes = sizes * grid

    _, exponents = np.frexp(sizes)
    return exponents - 1


def dyadic_shells(bounding: LatticeBox) -> List[Tuple[int, List[MultiIndex]]]:
    """Partition of the box into shells {n : 2^t <= |n| < 2^(t+1)}."""
    labels = shell_labels(box=bounding)
    shells: List[Tuple[int, List[MultiIndex]]] = []
    for shell in np.unique(labels):
        members = [
            MultiIndex(coords=tuple(int(_pos) + 1 for _pos in _position)) for _position in np.argwhere(labels == shell)
        ]
        shells.append((int(shell), members))

    return shells


def diagonal(box: LatticeBox) -> List[MultiIndex]:
    return [MultiIndex(coords=(_side,) * box.r) for _side in range(1, min(box.shape) + 1)]


def field_to_csv(field: ScalarField, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    header = [f"n{_axis + 1}" for _axis in range(field.box.r)] + ["value"]
    integer_valued = field.is_integer_valued()
    with open(path, "w", newline="") as fd:
        writer = csv.writer(fd, lineterminator="\n")
        writer.writerow(header)
        for position in np.ndindex(*field.box.shape):
            value = field.values[position]
            writer.writerow([
                *(_pos + 1 for _pos in position),
                int(value) if integer_valued else format_float(float(value)),
            ])


def field_from_csv(path: str) -> ScalarField:
    with open(path, newline="") as fd:
        reader = csv.reader(fd)
        header = next(reader)
        rows = [_row for _row in reader if _row]

    r = len(header) - 1
    if r < 1 or header[-1] != "value":
        raise FieldError(f"{path}: expected header 'n1,...,nr,value', got {header}")

    coords = [tuple(int(_val) for _val in _row[:r]) for _row in rows]
    raw_values: Sequence[str] = [_row[r] for _row in rows]
    box = LatticeBox(upper=MultiIndex(coords=tuple(max(_coord[_axis] for _coord in coords) for _axis in range(r))))
    if len(rows) != box.size or len(set(coords)) != box.size:
        raise FieldError(f"{path}: {len(rows)} rows do not cover box {box.upper} ({box.size} points)")

    parsed: Dict[Tuple[int, ...], Any] = {}
    integer_valued = True
    for coord, raw in zip(coords, raw_values):
        try:
            parsed[coord] = int(raw)
        except ValueError:
            parsed[coord] = float(raw)
            integer_valued = False

    values = np.zeros(box.shape, dtype=np.int64 if integer_valued else np.float64)
    for coord, value in parsed.items():
        values[tuple(_coord - 1 for _coord in coord)] = value

    return ScalarField(box=box, values=values)
