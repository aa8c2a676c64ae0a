from __future__ import annotations

import argparse
import math
import os
import sys
from logging import Logger
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from slln_lab.libs.conditions import (
    CovarianceSpec,
    PowerMoments,
    TailKind,
    check_alpha_condition,
    check_brunk_prohorov_1d,
    check_eq4,
    check_equal_moment_condition,
    check_measure_alpha_condition,
    covariance_series,
    three_series,
)
from slln_lab.libs.config import Config, ConfigError
from slln_lab.libs.distributions import distribution_from_dict
from slln_lab.libs.kronecker import counterexample_to_csv, counterexample_verify, kronecker_check
from slln_lab.libs.lattice import (
    ConvergenceMode,
    LatticeBox,
    MultiIndex,
    ScalarField,
    field_from_csv,
    field_to_csv,
    increment,
)
from slln_lab.libs.normalization import NormalizationSpec, normalization_from_dict
from slln_lab.libs.pointproc import (
    check_cell_consistency,
    diagonal_corners,
    ergodic_error_sweep,
    ergodic_ratio,
    gen_marked_poisson,
    intensity_from_dict,
    kernel_from_dict,
    points_to_csv,
    pp_condition_series,
)
from slln_lab.libs.simulate import (
    CenterMode,
    field_from_dict,
    martingale_maximal_ratio,
    maximal_ratio,
    shell_stats_to_csv,
    slln_diagnostic,
)
from slln_lab.utils.constants import (
    ALL_VERBS,
    CONDITION_ALPHA_STR,
    CONDITION_BRUNK_PROHOROV_1D_STR,
    CONDITION_COVARIANCE_STR,
    CONDITION_EQ4_STR,
    CONDITION_EQUAL_MOMENT_STR,
    CONDITION_MEASURE_ALPHA_STR,
    CONDITION_PP_STR,
    CONDITION_THREE_SERIES_STR,
    EXIT_ASSERTION_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    VERB_CHECK_SERIES_STR,
    VERB_COUNTEREXAMPLE_STR,
    VERB_DELTA_STR,
    VERB_KRONECKER_CHECK_STR,
    VERB_SIMULATE_PPP_STR,
    VERB_SIMULATE_SLLN_STR,
)
from slln_lab.utils.helpers import (
    SllnLabError,
    colored_check,
    colored_verdict,
    dump_json,
    get_logger_with_params,
    write_csv_rows,
)


class IdentityCheckError(SllnLabError):
    pass


class VerbRunner:
    """Runs one verb of an experiment config and writes its outputs under output-dir."""

    def __init__(self, config: Config, verb: str, threads: Optional[int] = None, logger: Optional[Logger] = None):
        self.config = config
        self.verb = verb
        self.verb_data: Dict[str, Any] = config.verb_data(verb=verb)
        self.threads: int = threads or int(config.get(verb=verb, key="threads"))
        self.output_dir: str = config.get(verb=verb, key="output-dir")
        self.max_points: int = int(config.get(verb=verb, key="max-points"))
        self.logger = logger or get_logger_with_params(name="slln-lab", config_data=config.data, verb=verb)
        self.log_prefix: str = f"[{verb}]"

    def output_path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def seed(self) -> int:
        seed = self.config.get(verb=self.verb, key="seed")
        if seed is None:
            raise ConfigError(f"{self.verb} needs an explicit 'seed'")

        return int(seed)

    def normalization(self, data: Optional[Dict[str, Any]] = None) -> NormalizationSpec:
        return normalization_from_dict(data or self.verb_data.get("normalization") or {"family": "product"})

    def write_json(self, name: str, data: Dict[str, Any]) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        path = self.output_path(name)
        with open(path, "w") as fd:
            fd.write(dump_json(data))
            fd.write("\n")

        return path

    def run(self) -> int:
        handlers: Dict[str, Callable[[], int]] = {
            VERB_CHECK_SERIES_STR: self.check_series,
            VERB_SIMULATE_SLLN_STR: self.simulate_slln,
            VERB_SIMULATE_PPP_STR: self.simulate_ppp,
            VERB_COUNTEREXAMPLE_STR: self.counterexample,
            VERB_KRONECKER_CHECK_STR: self.kronecker_check,
            VERB_DELTA_STR: self.delta,
        }
        return handlers[self.verb]()

    def _moments(self) -> Union[float, PowerMoments, ScalarField]:
        moments = self.verb_data.get("moments", 1.0)
        if isinstance(moments, dict):
            return PowerMoments(scale=float(moments["scale"]), exponent=float(moments.get("exponent", 0.0)))

        if isinstance(moments, str):
            return field_from_csv(moments)

        return float(moments)

    def _covariance(self, r: int) -> CovarianceSpec:
        data = self.verb_data["covariance"]
        kind = data["kind"]
        if kind == "white_noise":
            return CovarianceSpec.zero_lag_only(r0=float(data.get("r0", 1.0)), r=r)

        if kind == "geometric":
            return CovarianceSpec.geometric(rho=float(data["rho"]), r=r, r0=float(data.get("r0", 1.0)))

        if kind == "constant":
            return CovarianceSpec.constant(value=float(data["value"]), r=r)

        return CovarianceSpec.moving_average(weights=np.asarray(data["weights"], dtype=np.float64))

    def check_series(self) -> int:
        condition = self.verb_data["condition"]
        r = int(self.verb_data.get("r", 2))
        box = LatticeBox.of(*self.verb_data["box"]) if "box" in self.verb_data else None
        if box is not None:
            box.check_size(max_points=self.max_points)

        tail = TailKind(self.verb_data.get("tail", TailKind.SEPARABLE_POWER_LOG.value))
        spec = self.normalization()
        q = int(self.verb_data.get("q", 1))
        alpha = float(self.verb_data.get("alpha", 2.0))
        self.logger.info(f"{self.log_prefix} condition {condition}, normalization {spec.to_dict()}")

        report: Any
        if condition == CONDITION_EQ4_STR:
            moments = self._moments()
            if isinstance(moments, PowerMoments):
                raise ConfigError("eq4 takes an identical moment or a moment-field CSV")

            report = check_eq4(moments=moments, q=q, spec=spec, box=box, tail=tail, r=r)
        elif condition == CONDITION_EQUAL_MOMENT_STR:
            report = check_equal_moment_condition(q=q, spec=spec, box=box, tail=tail, r=r)
        elif condition == CONDITION_ALPHA_STR:
            moments_source: Any = (
                distribution_from_dict(self.verb_data["distribution"])
                if "distribution" in self.verb_data
                else self._moments()
            )
            report = check_alpha_condition(moments=moments_source, alpha=alpha, spec=spec, box=box, tail=tail, r=r)
        elif condition == CONDITION_THREE_SERIES_STR:
            dist = distribution_from_dict(self.verb_data["distribution"])
            report = three_series(dist=dist, spec=spec, box=box, tail=tail, r=r)
        elif condition == CONDITION_COVARIANCE_STR:
            report = covariance_series(cov=self._covariance(r=box.r if box else r), box=box, tail=tail, r=r)
        elif condition == CONDITION_PP_STR:
            report = pp_condition_series(
                intensity=intensity_from_dict(self.verb_data["intensity"]),
                kernel=kernel_from_dict(self.verb_data["kernel"]),
                spec=spec,
                box=box,
                tail=tail,
                r=r,
            )
        elif condition == CONDITION_BRUNK_PROHOROV_1D_STR:
            moments = self._moments()
            if isinstance(moments, ScalarField):
                moments = moments.values.ravel().tolist()

            report = check_brunk_prohorov_1d(
                moments=moments,
                q=q,
                spec=self.normalization() if "normalization" in self.verb_data else None,
                length=int(self.verb_data.get("length", 512)),
                tail=tail,
            )
        elif condition == CONDITION_MEASURE_ALPHA_STR:
            report = check_measure_alpha_condition(alpha=alpha, spec=spec, box=box, tail=tail, r=r)
        else:
            raise ConfigError(f"Unknown condition {condition}")

        result = {"condition": condition, "normalization": spec.to_dict(), "report": report.to_dict()}
        path = self.write_json(name=f"{VERB_CHECK_SERIES_STR}.json", data=result)
        verdicts = (
            [_series["verdict"] for _series in report.to_dict().values()]
            if condition == CONDITION_THREE_SERIES_STR
            else [report.verdict]
        )
        self.logger.info(
            f"{self.log_prefix} {condition}: {', '.join(colored_verdict(_verdict) for _verdict in verdicts)} ({path})"
        )
        print(dump_json(result))
        return EXIT_OK

    def simulate_slln(self) -> int:
        box = LatticeBox.of(*self.verb_data["box"])
        box.check_size(max_points=self.max_points)
        gen = field_from_dict(data=self.verb_data["field"], box=box, seed=self.seed())
        replications = int(self.verb_data["replications"])
        center = CenterMode(self.verb_data.get("center", CenterMode.ANALYTIC_MEAN.value))
        specs = [self.normalization(_data) for _data in self.verb_data.get("normalizations", [])] or [
            self.normalization()
        ]

        summary: Dict[str, Any] = {"field": gen.to_dict(), "replications": replications, "runs": []}
        for idx, spec in enumerate(specs):
            self.logger.info(f"{self.log_prefix} normalization {spec.to_dict()}, {replications} replications")
            stats = slln_diagnostic(
                gen=gen,
                spec=spec,
                replications=replications,
                center=center,
                threads=self.threads,
                max_points=self.max_points,
            )
            csv_path = self.output_path(f"shell-stats-{idx}-{spec.family}.csv")
            shell_stats_to_csv(stats=stats, path=csv_path)
            summary["runs"].append({"normalization": spec.to_dict(), "csv": csv_path, "stats": stats.to_dict()})

        if "maximal-q" in self.verb_data:
            summary["maximal_ratio"] = maximal_ratio(
                gen=gen, q=int(self.verb_data["maximal-q"]), replications=replications, threads=self.threads
            )

        if "martingale-alpha" in self.verb_data:
            summary["martingale_maximal_ratio"] = martingale_maximal_ratio(
                gen=gen,
                alpha=float(self.verb_data["martingale-alpha"]),
                replications=replications,
                threads=self.threads,
            ).to_dict()

        self.write_json(name=f"{VERB_SIMULATE_SLLN_STR}.json", data=summary)
        return EXIT_OK

    def simulate_ppp(self) -> int:
        intensity = intensity_from_dict(self.verb_data["intensity"])
        kernel = kernel_from_dict(self.verb_data["kernel"])
        window = [float(_side) for _side in self.verb_data["window"]]
        seed = self.seed()
        pts = gen_marked_poisson(intensity=intensity, kernel=kernel, window=window, seed=seed)
        points_to_csv(pts=pts, path=self.output_path("points.csv"))

        corners = diagonal_corners(window=window, count=int(self.verb_data.get("corners", 16)))
        ratios = ergodic_ratio(pts=pts, corners=corners)
        write_csv_rows(
            path=self.output_path("ergodic-ratio.csv"),
            header=[f"x_{_axis + 1}" for _axis in range(len(window))] + ["ratio"],
            rows=[[*_corner, _ratio] for _corner, _ratio in ratios],
        )

        summary: Dict[str, Any] = {"points": len(pts), "proposed": pts.proposed, "seed": seed, "window": window}
        if all(_side >= 1 for _side in window):
            upper = MultiIndex(coords=tuple(int(math.floor(_side)) for _side in window))
            consistent, from_cells, direct = check_cell_consistency(pts=pts, upper=upper)
            self.logger.info(f"{self.log_prefix} cell field consistency on {upper}: {colored_check(consistent)}")
            summary["cell_consistency"] = {"upper": str(upper), "from_cells": from_cells, "direct": direct}
            if not consistent:
                self.write_json(name=f"{VERB_SIMULATE_PPP_STR}.json", data=summary)
                raise IdentityCheckError(f"Cell prefix sum {from_cells} differs from the direct sum {direct}")

        if "sweep" in self.verb_data:
            sweep = ergodic_error_sweep(
                intensity=intensity,
                kernel=kernel,
                windows=self.verb_data["sweep"]["windows"],
                seeds=self.verb_data["sweep"]["seeds"],
                threads=self.threads,
            )
            summary["sweep"] = sweep.to_dict()

        self.write_json(name=f"{VERB_SIMULATE_PPP_STR}.json", data=summary)
        return EXIT_OK

    def counterexample(self) -> int:
        report = counterexample_verify(upper=MultiIndex(coords=tuple(self.verb_data["upper"])))
        counterexample_to_csv(report=report, path=self.output_path("counterexample.csv"))
        self.write_json(name=f"{VERB_COUNTEREXAMPLE_STR}.json", data=report.to_dict())
        self.logger.info(
            f"{self.log_prefix} {len(report.rows)} rows on {report.upper}: {colored_check(report.all_identities_hold)}"
        )
        if not report.all_identities_hold:
            raise IdentityCheckError(f"Counterexample identities fail on {report.upper}: {report.to_dict()}")

        return EXIT_OK

    def kronecker_check(self) -> int:
        x = field_from_csv(self.verb_data["field-csv"])
        mode = ConvergenceMode(self.verb_data.get("mode", ConvergenceMode.MAX.value))
        report = kronecker_check(x=x, spec=self.normalization(), mode=mode)
        write_csv_rows(
            path=self.output_path("kronecker-ratio.csv"),
            header=["n", "ratio", "series_partial"],
            rows=[
                [str(_idx), _ratio, _partial]
                for (_idx, _ratio), (_, _partial) in zip(report.ratio_curve, report.series_partials)
            ],
        )
        self.write_json(name=f"{VERB_KRONECKER_CHECK_STR}.json", data=report.to_dict())
        return EXIT_OK

    def delta(self) -> int:
        source = field_from_csv(self.verb_data["input"])
        output = self.verb_data.get("output") or self.output_path("delta.csv")
        field_to_csv(field=increment(field=source), path=output)
        self.logger.info(f"{self.log_prefix} increment of {self.verb_data['input']} written to {output}")
        return EXIT_OK


def run(verb: str, config_path: Optional[str] = None, threads: Optional[int] = None, dump_config: bool = False) -> int:
    """Run one verb; returns the process exit code."""
    logger = get_logger_with_params(name="slln-lab")
    if verb not in ALL_VERBS:
        logger.error(f"Unknown verb {verb}, expected one of {', '.join(ALL_VERBS)}")
        return EXIT_CONFIG_ERROR

    try:
        config = Config(config_path=config_path)
        config.validate(verb=verb)
        if dump_config:
            print(config.dump(verb=verb))
            return EXIT_OK

        return VerbRunner(config=config, verb=verb, threads=threads).run()

    except IdentityCheckError as ex:
        logger.error(f"[{verb}] {ex}")
        return EXIT_ASSERTION_FAILED

    except (ConfigError, FileNotFoundError, OSError, KeyError, ValueError, SllnLabError) as ex:
        logger.error(f"[{verb}] {type(ex).__name__}: {ex}")
        return EXIT_CONFIG_ERROR


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="slln-lab",
        description="Numerical lab for multi-index strong laws",
        epilog=(
            "Logarithmic normalizations use the natural logarithm, L(x) = max(1, ln x); "
            "another base only rescales constants."
        ),
    )
    parser.add_argument("verb", help=f"One of: {', '.join(ALL_VERBS)}")
    parser.add_argument("--config", default=None, help="Experiment config (YAML or JSON); defaults to $SLLN_LAB_CONFIG")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for replications and seed sweeps")
    parser.add_argument("--dump-config", action="store_true", help="Print the effective config and exit")
    args = parser.parse_args(argv)
    return run(verb=args.verb, config_path=args.config, threads=args.threads, dump_config=args.dump_config)


if __name__ == "__main__":
    sys.exit(main())
