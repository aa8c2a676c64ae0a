from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from slln_lab.libs.lattice import (
    LatticeBox,
    MultiIndex,
    ScalarField,
    field_from_csv,
    increment,
    is_monotone,
    shell_labels,
)
from slln_lab.utils.constants import (
    DELTA_NONNEG_TOLERANCE,
    POWER_LOG_STR,
    PRODUCT_STR,
    TABULATED_STR,
)
from slln_lab.utils.helpers import SllnLabError


class NormalizationError(SllnLabError):
    pass


class LookupOutsideTableError(SllnLabError):
    pass


def log_floor(m: Any) -> Any:
    """L(m) = max(ln m, 1); keeps logarithmic factors positive and nondecreasing from m = 1."""
    return np.maximum(np.log(m), 1.0)


@dataclass(frozen=True)
class NormalizationSpec:
    """
    Normalization family b_n.

    product:   b_n = |n|
    power_log: b_n = |n|^p * prod_i L(n_i)^beta
    tabulated: explicit positive field, looked up inside its box only
    """

    family: str
    p: float = 1.0
    beta: float = 0.0
    table: Optional[ScalarField] = None
    csv_path: str = ""

    def __post_init__(self) -> None:
        if self.family not in (PRODUCT_STR, POWER_LOG_STR, TABULATED_STR):
            raise NormalizationError(f"Unknown normalization family {self.family}")

        if self.family == POWER_LOG_STR and (self.p < 0 or self.beta < 0):
            raise NormalizationError(f"power_log needs p >= 0 and beta >= 0, got p={self.p}, beta={self.beta}")

        if self.family == TABULATED_STR:
            if self.table is None:
                raise NormalizationError("tabulated normalization needs a table")

            if (self.table.values <= 0).any():
                raise NormalizationError("tabulated normalization must be positive everywhere")

    @classmethod
    def product(cls) -> NormalizationSpec:
        return cls(family=PRODUCT_STR)

    @classmethod
    def power_log(cls, p: float, beta: float) -> NormalizationSpec:
        return cls(family=POWER_LOG_STR, p=float(p), beta=float(beta))

    @classmethod
    def tabulated(cls, table: ScalarField, csv_path: str = "") -> NormalizationSpec:
        return cls(family=TABULATED_STR, table=table, csv_path=csv_path)

    @property
    def is_analytic(self) -> bool:
        return self.family != TABULATED_STR

    def power_log_params(self) -> Optional[Tuple[float, float]]:
        """(p, beta) of the analytic families; product is (1, 0)."""
        if self.family == PRODUCT_STR:
            return 1.0, 0.0

        if self.family == POWER_LOG_STR:
            return self.p, self.beta

        return None

    def eval(self, n: MultiIndex) -> float:
        if self.family == PRODUCT_STR:
            return float(n.size)

        if self.family == POWER_LOG_STR:
            coords = np.asarray(n.coords, dtype=np.float64)
            return float(np.prod(coords**self.p) * np.prod(log_floor(coords) ** self.beta))

        assert self.table is not None
        if not self.table.box.contains(n):
            raise LookupOutsideTableError(f"{n} is outside the tabulated box {self.table.box.upper}")

        return float(self.table.at(n))

    def eval_field(self, box: LatticeBox) -> ScalarField:
        if self.family == PRODUCT_STR:
            box.check_size()
            values = np.ones(box.shape, dtype=np.int64)
            for grid in box.grids():
                values = values * grid

            return ScalarField(box=box, values=values)

        if self.family == POWER_LOG_STR:

            def _power_log(*grids: np.ndarray) -> np.ndarray:
                values = np.ones((1,) * box.r, dtype=np.float64)
                for grid in grids:
                    values = values * grid.astype(np.float64) ** self.p * log_floor(grid) ** self.beta

                return values

            return ScalarField.from_function(box=box, func=_power_log)

        assert self.table is not None
        if not box.upper.dominated_by(self.table.box.upper):
            raise LookupOutsideTableError(f"Box {box.upper} exceeds the tabulated box {self.table.box.upper}")

        return ScalarField(box=box, values=self.table.values[tuple(slice(0, _side) for _side in box.shape)].copy())

    def to_dict(self) -> Dict[str, Any]:
        if self.family == PRODUCT_STR:
            return {"family": PRODUCT_STR}

        if self.family == POWER_LOG_STR:
            return {"family": POWER_LOG_STR, "p": self.p, "beta": self.beta}

        return {"family": TABULATED_STR, "csv": self.csv_path}


def normalization_from_dict(data: Dict[str, Any]) -> NormalizationSpec:
    family = data.get("family")
    if family == PRODUCT_STR:
        return NormalizationSpec.product()

    if family == POWER_LOG_STR:
        return NormalizationSpec.power_log(p=data["p"], beta=data["beta"])

    if family == TABULATED_STR:
        return NormalizationSpec.tabulated(table=field_from_csv(data["csv"]), csv_path=data["csv"])

    raise NormalizationError(f"Unknown normalization family in {data}")


@dataclass(frozen=True)
class HypothesesReport:
    monotone: bool
    delta_nonneg: bool
    tends_to_infinity_along_max: bool
    heuristic: bool
    violation: Optional[Tuple[MultiIndex, MultiIndex]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "monotone": self.monotone,
            "delta_nonneg": self.delta_nonneg,
            "tends_to_infinity_along_max": self.tends_to_infinity_along_max,
            "heuristic": self.heuristic,
            "violation": [str(_idx) for _idx in self.violation] if self.violation else None,
        }


def check_hypotheses(spec: NormalizationSpec, probe: LatticeBox) -> HypothesesReport:
    """
    Structural hypotheses of the limit theorems on a probe box: monotonicity, nonnegative increments
    and b_n -> infinity as |n| -> infinity.

    The last flag is analytic for product / power_log and a heuristic for tabulated fields
    (minimum over the outermost dyadic shell must exceed the minimum over the shell before it).
    """
    values = spec.eval_field(box=probe)
    monotone, violation = is_monotone(field=values)
    delta_nonneg = bool((increment(field=values).values >= -DELTA_NONNEG_TOLERANCE).all())

    params = spec.power_log_params()
    if params is not None:
        _p, _beta = params
        # L(max n_i) -> infinity along max-convergence, so beta > 0 alone is enough.
        return HypothesesReport(
            monotone=monotone,
            delta_nonneg=delta_nonneg,
            tends_to_infinity_along_max=_p > 0 or _beta > 0,
            heuristic=False,
            violation=violation,
        )

    labels = shell_labels(box=probe)
    shells = np.unique(labels)
    grows = False
    if len(shells) >= 2:
        outer = values.values[labels == shells[-1]].min()
        inner = values.values[labels == shells[-2]].min()
        grows = bool(outer > inner)

    return HypothesesReport(
        monotone=monotone,
        delta_nonneg=delta_nonneg,
        tends_to_infinity_along_max=grows,
        heuristic=True,
        violation=violation,
    )
