import csv
import json
import os

import pytest

from slln_lab.app import VerbRunner, main, run
from slln_lab.libs.config import Config
from slln_lab.libs.lattice import MultiIndex, field_from_csv
from slln_lab.utils.constants import CONVERGES_STR, EXIT_ASSERTION_FAILED, EXIT_CONFIG_ERROR, EXIT_OK


def _read_json(path):
    with open(path) as fd:
        return json.load(fd)


def _read_csv(path):
    with open(path) as fd:
        return list(csv.reader(fd))


@pytest.fixture
def field_csv(manifests_dir):
    return os.path.join(manifests_dir, "field.csv")


def test_counterexample_verb(write_config, output_dir):
    path = write_config({"counterexample": {"upper": [16, 16]}})

    assert main(["counterexample", "--config", path]) == EXIT_OK
    rows = _read_csv(os.path.join(output_dir, "counterexample.csv"))
    assert len(rows) == 1 + 15 * 16
    report = _read_json(os.path.join(output_dir, "counterexample.json"))
    assert report["weighted_sums_zero"]
    assert report["ratio_matches"]


def test_counterexample_verb_reports_failed_identities(mocker, write_config):
    failed = mocker.MagicMock(all_identities_hold=False, rows=(), upper=MultiIndex.of(2, 2))
    failed.to_dict.return_value = {"upper": "(2,2)"}
    mocker.patch("slln_lab.app.counterexample_verify", return_value=failed)
    path = write_config({"counterexample": {"upper": [2, 2]}})

    assert run(verb="counterexample", config_path=path) == EXIT_ASSERTION_FAILED


def test_check_series_verb(write_config, output_dir):
    path = write_config(
        {
            "check-series": {
                "condition": "equal-moment",
                "q": 1,
                "box": [64, 64],
                "normalization": {"family": "power_log", "p": 0.5, "beta": 0.6},
            }
        }
    )

    assert main(["check-series", "--config", path]) == EXIT_OK
    result = _read_json(os.path.join(output_dir, "check-series.json"))
    assert result["condition"] == "equal-moment"
    assert result["report"]["verdict"] == CONVERGES_STR


def test_check_series_three_series(write_config, output_dir):
    path = write_config(
        {"check-series": {"condition": "three-series", "box": [64, 64], "distribution": {"family": "normal"}}}
    )

    assert main(["check-series", "--config", path]) == EXIT_OK
    report = _read_json(os.path.join(output_dir, "check-series.json"))["report"]
    assert report["truncated_mean"]["partial_sum"] == 0.0
    assert all(_series["verdict"] == CONVERGES_STR for _series in report.values())


def test_check_series_divergence_keeps_infinity_as_string(write_config, output_dir):
    path = write_config(
        {
            "check-series": {
                "condition": "measure-alpha",
                "alpha": 1,
                "r": 1,
                "box": [128],
                "normalization": {"family": "product"},
            }
        }
    )

    assert main(["check-series", "--config", path]) == EXIT_OK
    report = _read_json(os.path.join(output_dir, "check-series.json"))["report"]
    assert report["tail_lower"] == "inf"


def test_simulate_slln_verb(write_config, output_dir):
    path = write_config(
        {
            "seed": 7,
            "simulate-slln": {
                "field": {"kind": "iid", "dist": {"family": "normal"}},
                "box": [8, 8],
                "replications": 3,
                "normalizations": [{"family": "product"}, {"family": "power_log", "p": 0.5, "beta": 0}],
                "maximal-q": 1,
            },
        }
    )

    assert main(["simulate-slln", "--config", path, "--threads", "2"]) == EXIT_OK
    rows = _read_csv(os.path.join(output_dir, "shell-stats-0-product.csv"))
    assert rows[0][:2] == ["shell_t", "pop"]
    assert os.path.isfile(os.path.join(output_dir, "shell-stats-1-power_log.csv"))
    summary = _read_json(os.path.join(output_dir, "simulate-slln.json"))
    assert len(summary["runs"]) == 2
    assert summary["maximal_ratio"] > 0


def test_simulate_needs_a_seed(write_config):
    path = write_config(
        {"simulate-slln": {"field": {"dist": {"family": "normal"}}, "box": [4, 4], "replications": 1}}
    )

    assert main(["simulate-slln", "--config", path]) == EXIT_CONFIG_ERROR


def test_simulate_ppp_verb(write_config, output_dir):
    path = write_config(
        {
            "seed": 5,
            "simulate-ppp": {
                "intensity": {"kind": "homogeneous", "rate": 2},
                "kernel": {"dist": {"family": "two_point", "values": [2, 4], "probs": [0.5, 0.5]}},
                "window": [8, 8],
                "corners": 4,
                "sweep": {"windows": [[4, 4], [8, 8]], "seeds": [1, 2]},
            },
        }
    )

    assert main(["simulate-ppp", "--config", path]) == EXIT_OK
    assert _read_csv(os.path.join(output_dir, "points.csv"))[0] == ["x_1", "x_2", "mark"]
    assert _read_json(os.path.join(output_dir, "points.json"))["seed"] == 5
    ratios = _read_csv(os.path.join(output_dir, "ergodic-ratio.csv"))
    assert ratios[0] == ["x_1", "x_2", "ratio"]
    assert len(ratios) == 1 + 4
    summary = _read_json(os.path.join(output_dir, "simulate-ppp.json"))
    assert summary["cell_consistency"]["from_cells"] == summary["cell_consistency"]["direct"]
    assert summary["sweep"]["seeds"] == [1, 2]


def test_kronecker_check_verb(write_config, output_dir, field_csv):
    path = write_config({"kronecker-check": {"field-csv": field_csv, "mode": "min"}})

    assert main(["kronecker-check", "--config", path]) == EXIT_OK
    rows = _read_csv(os.path.join(output_dir, "kronecker-ratio.csv"))
    assert rows[0] == ["n", "ratio", "series_partial"]
    assert [_row[0] for _row in rows[1:]] == ["(1,1)", "(2,2)"]
    assert float(rows[2][1]) == pytest.approx(17 / 4)


def test_delta_verb(write_config, field_csv, tmp_path):
    output = str(tmp_path / "delta" / "increment.csv")
    path = write_config({"delta": {"input": field_csv, "output": output}})

    assert main(["delta", "--config", path]) == EXIT_OK
    assert field_from_csv(path=output).values.tolist() == [[1, 2, 3], [2, 5, 8]]


def test_delta_verb_missing_input(write_config, tmp_path):
    path = write_config({"delta": {"input": str(tmp_path / "missing.csv")}})

    assert main(["delta", "--config", path]) == EXIT_CONFIG_ERROR


def test_unknown_verb_and_missing_config(tmp_path):
    assert main(["plot"]) == EXIT_CONFIG_ERROR
    assert main(["delta", "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG_ERROR


def test_invalid_config_exit_code(write_config):
    path = write_config({"check-series": {"condition": "eq5"}})

    assert main(["check-series", "--config", path]) == EXIT_CONFIG_ERROR


def test_dump_config(capsys, write_config, output_dir):
    path = write_config({"threads": 4, "counterexample": {"upper": [4, 4]}})

    assert main(["counterexample", "--config", path, "--dump-config"]) == EXIT_OK
    effective = json.loads(capsys.readouterr().out)
    assert effective["threads"] == 4
    assert effective["output-dir"] == output_dir
    assert effective["counterexample"] == {"upper": [4, 4]}
    assert not os.path.exists(output_dir)


def test_threads_flag_overrides_config(write_config):
    config = Config(config_path=write_config({"threads": 4, "delta": {"input": "field.csv"}}))

    assert VerbRunner(config=config, verb="delta").threads == 4
    assert VerbRunner(config=config, verb="delta", threads=2).threads == 2


def test_help_names_the_logarithm(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])

    assert exc.value.code == 0
    assert "natural logarithm" in " ".join(capsys.readouterr().out.split())
