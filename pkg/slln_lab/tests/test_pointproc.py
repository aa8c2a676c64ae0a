import json
import math

import numpy as np
import pytest

from slln_lab.libs.conditions import alpha_condition_terms, check_measure_alpha_condition
from slln_lab.libs.distributions import Constant, Normal, TwoPoint
from slln_lab.libs.lattice import LatticeBox, MultiIndex
from slln_lab.libs.normalization import NormalizationSpec
from slln_lab.libs.pointproc import (
    AxisFunction,
    CenteringError,
    DensityBoundError,
    IntensityError,
    IntensitySpec,
    MarkedPointSet,
    MarkKernel,
    SeparableFunction,
    WindowError,
    cell_field,
    check_cell_consistency,
    diagonal_corners,
    ergodic_error_sweep,
    ergodic_ratio,
    expected_measure,
    gen_marked_poisson,
    intensity_from_dict,
    kernel_from_dict,
    measure_sum,
    points_to_csv,
    pp_condition_series,
    pp_condition_terms,
)
from slln_lab.utils.constants import CONVERGES_STR, INCONCLUSIVE_STR

SEED = 42
WINDOW = (64.0, 64.0)
VOLUME = 64.0 * 64.0


@pytest.fixture
def manual_points():
    return MarkedPointSet(
        window=(4.0, 4.0),
        positions=[[1.0, 1.0], [1.0, 2.5], [4.0, 4.0], [0.5, 0.5]],
        marks=[1, 2, 4, 8],
    )


def test_ergodic_ratio_near_mark_mean():
    pts = gen_marked_poisson(
        intensity=IntensitySpec.homogeneous(rate=2),
        kernel=MarkKernel.independent(dist=TwoPoint(values=(2.0, 4.0), probs=(0.5, 0.5))),
        window=WINDOW,
        seed=SEED,
    )
    ratio = ergodic_ratio(pts=pts, corners=[WINDOW])[0][1]

    assert abs(ratio - 6.0) <= 3 * math.sqrt(2 * 10 * VOLUME) / VOLUME
    consistent, from_cells, direct = check_cell_consistency(pts=pts, upper=MultiIndex.of(64, 64))
    assert consistent
    assert from_cells == direct


def test_ergodic_ratio_of_centered_marks_near_zero():
    pts = gen_marked_poisson(
        intensity=IntensitySpec.homogeneous(rate=2),
        kernel=MarkKernel.independent(dist=TwoPoint.symmetric(v=1.0)),
        window=WINDOW,
        seed=SEED,
    )
    ratio = ergodic_ratio(pts=pts, corners=[WINDOW])[0][1]

    assert abs(ratio) <= 3 * math.sqrt(2 * 1 * VOLUME) / VOLUME


def test_float_marks_are_consistent_within_tolerance():
    pts = gen_marked_poisson(
        intensity=IntensitySpec.homogeneous(rate=1.5),
        kernel=MarkKernel.independent(dist=Normal(mu=1.0)),
        window=(20.0, 10.0),
        seed=SEED,
    )
    consistent, from_cells, direct = check_cell_consistency(pts=pts, upper=MultiIndex.of(20, 10))

    assert consistent
    assert from_cells == pytest.approx(direct, rel=1e-9)


def test_same_seed_same_points():
    intensity = IntensitySpec.homogeneous(rate=1.0)
    kernel = MarkKernel.independent(dist=Normal())
    first = gen_marked_poisson(intensity=intensity, kernel=kernel, window=(10, 10), seed=7)
    again = gen_marked_poisson(intensity=intensity, kernel=kernel, window=(10, 10), seed=7)
    other = gen_marked_poisson(intensity=intensity, kernel=kernel, window=(10, 10), seed=8)

    assert np.array_equal(first.positions, again.positions)
    assert np.array_equal(first.marks, again.marks)
    assert not np.array_equal(first.marks, other.marks)


def test_thinned_count_matches_intensity_measure():
    density = SeparableFunction(axes=(AxisFunction.linear(c=1, slope=0.1), AxisFunction.linear(c=1, slope=0.1)))
    pts = gen_marked_poisson(
        intensity=IntensitySpec.separable(density=density),
        kernel=MarkKernel.independent(dist=Normal()),
        window=(10, 10),
        seed=SEED,
    )

    assert pts.proposed >= pts.accepted == len(pts)
    assert abs(len(pts) - 225) <= 5 * 15
    assert ((pts.positions > 0) & (pts.positions <= 10)).all()


def test_density_above_declared_bound_raises():
    density = SeparableFunction(axes=(AxisFunction.linear(c=1, slope=1), AxisFunction.constant(c=1)))

    with pytest.raises(DensityBoundError):
        gen_marked_poisson(
            intensity=IntensitySpec.separable(density=density, declared_bound=0.5),
            kernel=MarkKernel.independent(dist=Normal()),
            window=(10, 10),
            seed=SEED,
        )

    unbounded = SeparableFunction(axes=(AxisFunction.custom(func=np.exp, declared_bound=math.inf),))
    with pytest.raises(DensityBoundError):
        gen_marked_poisson(
            intensity=IntensitySpec.separable(density=unbounded),
            kernel=MarkKernel.independent(dist=Normal()),
            window=(10,),
            seed=SEED,
        )


def test_half_open_cells(manual_points):
    cells = cell_field(pts=manual_points, upper=MultiIndex.of(4, 4))

    assert cells.is_integer_valued()
    assert cells.at(MultiIndex.of(1, 1)) == 9
    assert cells.at(MultiIndex.of(1, 3)) == 2
    assert cells.at(MultiIndex.of(4, 4)) == 4
    assert measure_sum(pts=manual_points, lower=(0, 0), upper=(1, 1)) == 9
    assert measure_sum(pts=manual_points, lower=(1, 1), upper=(4, 4)) == 4
    assert check_cell_consistency(pts=manual_points, upper=MultiIndex.of(4, 4)) == (True, 15.0, 15.0)


def test_window_errors(manual_points):
    with pytest.raises(WindowError):
        measure_sum(pts=manual_points, lower=(0, 0), upper=(5, 1))

    with pytest.raises(WindowError):
        ergodic_ratio(pts=manual_points, corners=[(0, 2)])

    with pytest.raises(WindowError):
        cell_field(pts=manual_points, upper=MultiIndex.of(5, 4))

    with pytest.raises(WindowError):
        MarkedPointSet(window=(1.0,), positions=[[2.0]], marks=[1.0])

    with pytest.raises(WindowError):
        gen_marked_poisson(
            intensity=IntensitySpec.homogeneous(rate=1),
            kernel=MarkKernel.independent(dist=Normal()),
            window=(4, 0),
            seed=SEED,
        )


def test_diagonal_corners():
    assert diagonal_corners(window=(8, 4), count=4) == [(2.0, 1.0), (4.0, 2.0), (6.0, 3.0), (8.0, 4.0)]


def test_expected_measure():
    lower, upper = (0.0, 0.0), (2.0, 3.0)
    homogeneous = IntensitySpec.homogeneous(rate=2)

    assert expected_measure(
        intensity=homogeneous, kernel=MarkKernel.independent(dist=Normal(mu=3.0)), lower=lower, upper=upper
    ) == pytest.approx(36.0)
    scaled = MarkKernel.position_scaled(
        dist=Normal(mu=1.0), scale=SeparableFunction(axes=(AxisFunction.linear(c=1, slope=1), AxisFunction.constant(1)))
    )
    assert expected_measure(intensity=homogeneous, kernel=scaled, lower=lower, upper=upper) == pytest.approx(24.0)


def test_ergodic_error_decays_at_the_clt_rate():
    report = ergodic_error_sweep(
        intensity=IntensitySpec.homogeneous(rate=2),
        kernel=MarkKernel.independent(dist=Constant(c=1.0)),
        windows=[(4, 4), (8, 8), (16, 16), (32, 32), (64, 64)],
        seeds=list(range(1, 41)),
        threads=4,
    )

    assert report.slope == pytest.approx(-0.5, abs=0.15)
    assert all(_later < _earlier for _earlier, _later in zip(report.mean_abs_errors, report.mean_abs_errors[1:]))


def test_counts_in_disjoint_cells_are_uncorrelated():
    pts = gen_marked_poisson(
        intensity=IntensitySpec.homogeneous(rate=2),
        kernel=MarkKernel.independent(dist=Constant(c=1.0)),
        window=WINDOW,
        seed=SEED,
    )
    counts = cell_field(pts=pts, upper=MultiIndex.of(64, 64)).values.astype(np.float64)

    assert counts.mean() == pytest.approx(2.0, abs=0.15)
    assert abs(np.corrcoef(counts[:, :-1].ravel(), counts[:, 1:].ravel())[0, 1]) < 0.08
    assert abs(np.corrcoef(counts[:-1, :].ravel(), counts[1:, :].ravel())[0, 1]) < 0.08


def test_independent_marks_do_not_depend_on_cell_count():
    pts = gen_marked_poisson(
        intensity=IntensitySpec.homogeneous(rate=2),
        kernel=MarkKernel.independent(dist=Normal()),
        window=WINDOW,
        seed=SEED,
    )
    cells = np.ceil(pts.positions).astype(np.int64) - 1
    linear = cells[:, 0] * int(WINDOW[1]) + cells[:, 1]
    counts = np.bincount(linear, minlength=int(VOLUME))[linear]

    assert abs(np.corrcoef(pts.marks, counts)[0, 1]) < 0.06


def test_ergodic_error_sweep_is_schedule_independent():
    intensity = IntensitySpec.homogeneous(rate=2)
    kernel = MarkKernel.independent(dist=Normal(mu=1.0))
    windows = [(8, 8), (16, 16), (32, 32)]
    serial = ergodic_error_sweep(intensity=intensity, kernel=kernel, windows=windows, seeds=[1, 2, 3, 4])
    parallel = ergodic_error_sweep(intensity=intensity, kernel=kernel, windows=windows, seeds=[1, 2, 3, 4], threads=3)

    assert serial == parallel
    assert serial.volumes == (64.0, 256.0, 1024.0)
    assert math.isfinite(serial.slope)
    assert serial.to_dict()["seeds"] == [1, 2, 3, 4]


@pytest.mark.parametrize(
    "spec",
    [
        NormalizationSpec.product(),
        NormalizationSpec.power_log(p=0.5, beta=0),
        NormalizationSpec.power_log(p=0.5, beta=0.6),
    ],
)
def test_pp_condition_reduces_to_measure_alpha_condition(spec):
    rate, variance = 2.5, 4.0
    box = LatticeBox.of(32, 32)
    intensity = IntensitySpec.homogeneous(rate=rate)
    kernel = MarkKernel.independent(dist=Normal(sigma=2.0))
    terms = pp_condition_terms(intensity=intensity, kernel=kernel, spec=spec, box=box).values
    unit_terms = alpha_condition_terms(moments=1.0, alpha=2.0, spec=spec, box=box).values

    assert np.allclose(terms, rate * variance * unit_terms, rtol=1e-12, atol=0)
    assert (
        pp_condition_series(intensity=intensity, kernel=kernel, spec=spec, box=box).verdict
        == check_measure_alpha_condition(alpha=2.0, spec=spec, box=box).verdict
    )


def test_pp_condition_with_position_scaled_marks():
    box = LatticeBox.of(16, 16)
    density = SeparableFunction(axes=(AxisFunction.constant(c=2), AxisFunction.constant(c=1)))
    scale = SeparableFunction(axes=(AxisFunction.constant(c=3), AxisFunction.constant(c=1)))
    intensity = IntensitySpec.separable(density=density)
    kernel = MarkKernel.position_scaled(dist=Normal(), scale=scale)
    terms = pp_condition_terms(intensity=intensity, kernel=kernel, spec=NormalizationSpec.product(), box=box)

    assert terms.at(MultiIndex.of(2, 3)) == pytest.approx(18.0 / 36.0)
    report = pp_condition_series(intensity=intensity, kernel=kernel, spec=NormalizationSpec.product(), box=box)
    assert report.verdict == CONVERGES_STR
    majorant_only = pp_condition_series(
        intensity=intensity, kernel=kernel, spec=NormalizationSpec.power_log(p=0.5, beta=0), box=box
    )
    assert majorant_only.verdict == INCONCLUSIVE_STR


def test_pp_condition_needs_centered_marks():
    with pytest.raises(CenteringError):
        pp_condition_terms(
            intensity=IntensitySpec.homogeneous(rate=1),
            kernel=MarkKernel.independent(dist=Normal(mu=1.0)),
            spec=NormalizationSpec.product(),
            box=LatticeBox.of(4, 4),
        )


def test_points_csv_and_sidecar(tmp_path, manual_points):
    path = str(tmp_path / "points.csv")
    sidecar = points_to_csv(pts=manual_points, path=path)

    with open(path) as fd:
        lines = fd.read().splitlines()

    with open(sidecar) as fd:
        meta = json.load(fd)

    assert sidecar == str(tmp_path / "points.json")
    assert lines[0] == "x_1,x_2,mark"
    assert len(lines) == 5
    assert meta == {"window": [4.0, 4.0], "seed": None, "proposed": 0, "accepted": 4}


def test_from_dict_parsers():
    assert intensity_from_dict({"rate": 2}) == IntensitySpec.homogeneous(rate=2.0)
    separable = intensity_from_dict(
        {"kind": "separable_density", "axes": [{"c": 1}, {"kind": "exponential", "c": 2, "rate": -0.5}], "bound": 2}
    )
    assert separable.bound(window=(4, 4)) == 2
    assert separable.measure(lower=(0, 0), upper=(1, 1)) == pytest.approx(2 * (1 - math.exp(-0.5)) / 0.5)
    kernel = kernel_from_dict({"kind": "position_scaled", "dist": {"family": "normal"}, "scale": [{"c": 2}, {"c": 1}]})
    assert kernel.cond_second(np.array([[1.0, 1.0]])).tolist() == [4.0]
    with pytest.raises(IntensityError):
        intensity_from_dict({"kind": "cox"})

    with pytest.raises(IntensityError):
        kernel_from_dict({"kind": "hawkes", "dist": {"family": "normal"}})
