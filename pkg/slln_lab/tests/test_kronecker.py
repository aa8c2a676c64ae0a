import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from slln_lab.libs.kronecker import (
    DimensionError,
    NegativeEntryError,
    counterexample_field,
    counterexample_to_csv,
    counterexample_verify,
    kronecker_check,
)
from slln_lab.libs.lattice import ConvergenceMode, LatticeBox, MultiIndex, ScalarField
from slln_lab.libs.normalization import NormalizationSpec


def test_counterexample_identities_hold_exactly():
    report = counterexample_verify(upper=MultiIndex.of(64, 64))

    assert report.all_identities_hold
    assert len(report.rows) == 63 * 64
    assert all(_row.weighted_sum == 0 for _row in report.rows)
    assert report.rows[0].ratio == Fraction(1, 2)


def test_counterexample_path_witnesses():
    report = counterexample_verify(upper=MultiIndex.of(64, 64))
    diagonal_limit, witness = report.path_limits

    assert diagonal_limit == pytest.approx(65 / 128, abs=1e-12)
    assert [_m for _m, _ in report.super_diagonal_path] == list(range(2, 9))
    assert witness == pytest.approx(65 / 16, abs=1e-12)
    assert report.to_dict()["super_diagonal_unbounded"]


def test_counterexample_field_rows():
    field = counterexample_field(upper=MultiIndex.of(3, 4))

    assert field.values.tolist() == [[-1, -2, -3, -4], [2, 4, 6, 8], [0, 0, 0, 0]]


@pytest.mark.parametrize("upper", [MultiIndex.of(1, 5), MultiIndex.of(4, 4, 4)])
def test_counterexample_needs_two_dimensions(upper):
    with pytest.raises(DimensionError):
        counterexample_verify(upper=upper)


def test_counterexample_csv(tmp_path):
    path = str(tmp_path / "counterexample.csv")
    counterexample_to_csv(report=counterexample_verify(upper=MultiIndex.of(3, 3)), path=path)

    with open(path) as fd:
        rows = list(csv.reader(fd))

    assert rows[0] == ["n1", "n2", "weighted_sum", "ratio", "expected_ratio"]
    assert rows[1] == ["2", "1", "0", "1/2", "1/2"]
    assert len(rows) == 1 + 2 * 3


def test_kronecker_check_min_mode_decays():
    box = LatticeBox.of(40, 40)
    x = ScalarField.from_function(box=box, func=lambda _n1, _n2: 1.0 / (_n1 * _n2))
    report = kronecker_check(x=x, spec=NormalizationSpec.product(), mode=ConvergenceMode.MIN)
    ratios = [_ratio for _, _ratio in report.ratio_curve]

    assert [_idx for _idx, _ in report.ratio_curve][-1] == MultiIndex.of(40, 40)
    assert all(_later < _earlier for _earlier, _later in zip(ratios, ratios[1:]))
    assert report.series_partial == pytest.approx(math.fsum(1 / np.arange(1, 41) ** 2) ** 2, rel=1e-12)
    assert report.to_dict()["mode"] == "min"


def test_kronecker_check_constant_field_ratio_is_one():
    x = ScalarField.constant(box=LatticeBox.of(6, 5), value=1)
    report = kronecker_check(x=x, spec=NormalizationSpec.product(), mode=ConvergenceMode.MIN)

    assert all(_ratio == 1.0 for _, _ratio in report.ratio_curve)
    assert len(report.ratio_curve) == 5


def test_kronecker_check_max_mode_reports_one_point_per_shell():
    x = ScalarField.constant(box=LatticeBox.of(8, 8), value=2.0)
    report = kronecker_check(x=x, spec=NormalizationSpec.product(), mode=ConvergenceMode.MAX)

    assert len(report.ratio_curve) == 7
    assert all(2**_shell <= _idx.size < 2 ** (_shell + 1) for _shell, (_idx, _) in enumerate(report.ratio_curve))
    assert all(_ratio == 2.0 for _, _ratio in report.ratio_curve)


def test_kronecker_check_rejects_signed_multi_index_input():
    x = counterexample_field(upper=MultiIndex.of(4, 4))

    with pytest.raises(NegativeEntryError) as exc:
        kronecker_check(x=x, spec=NormalizationSpec.product(), mode=ConvergenceMode.MIN)

    assert exc.value.index == MultiIndex.of(1, 1)
    assert "(1,1)" in str(exc.value)


def test_kronecker_check_accepts_signed_sequences():
    x = ScalarField(box=LatticeBox.of(4), values=np.array([1.0, -1.0, 1.0, -1.0]))
    report = kronecker_check(x=x, spec=NormalizationSpec.product(), mode=ConvergenceMode.MIN)

    assert [_ratio for _, _ratio in report.ratio_curve] == pytest.approx([1.0, 0.0, 1 / 3, 0.0])
    assert report.series_partial == pytest.approx(1 - 1 / 2 + 1 / 3 - 1 / 4)


def test_kronecker_check_max_mode_shell_envelope_decreases():
    box = LatticeBox.of(32, 32)
    x = ScalarField.from_function(box=box, func=lambda _n1, _n2: 1.0 / (_n1 * _n2))
    report = kronecker_check(x=x, spec=NormalizationSpec.product(), mode=ConvergenceMode.MAX)
    envelope = [abs(_ratio) for _, _ratio in report.ratio_curve]

    assert len(envelope) == 11
    assert envelope[0] == 1.0
    assert all(_later < _earlier for _earlier, _later in zip(envelope, envelope[1:]))


def test_kronecker_check_max_mode_partials_follow_the_ratio_path(rng):
    box = LatticeBox.of(8, 8)
    values = rng.uniform(0.0, 1.0, size=box.shape)
    x = ScalarField(box=box, values=values)
    report = kronecker_check(x=x, spec=NormalizationSpec.product(), mode=ConvergenceMode.MAX)
    sizes = np.outer(np.arange(1, 9), np.arange(1, 9))
    weighted = np.cumsum(np.cumsum(values / sizes, axis=0), axis=1)

    assert [_idx for _idx, _ in report.series_partials] == [_idx for _idx, _ in report.ratio_curve]
    for index, partial in report.series_partials:
        assert partial == pytest.approx(weighted[index.array_position()], rel=1e-12)
