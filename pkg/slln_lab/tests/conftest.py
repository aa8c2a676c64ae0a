import os

import numpy as np
import pytest
import yaml

MANIFESTS_DIR = os.path.join(os.path.dirname(__file__), "manifests")


@pytest.fixture(scope="session")
def manifests_dir():
    return MANIFESTS_DIR


@pytest.fixture(scope="function")
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture(scope="function")
def output_dir(tmp_path):
    return str(tmp_path / "output")


@pytest.fixture(scope="function")
def write_config(tmp_path, output_dir):
    """Dump a config dict to YAML under tmp_path; output-dir points at a per-test directory unless given."""

    def _write_config(data, name="config.yaml"):
        data = {"output-dir": output_dir, **data}
        path = tmp_path / name
        with open(path, "w") as fd:
            yaml.safe_dump(data, fd)

        return str(path)

    return _write_config


def pytest_addoption(parser):
    parser.addoption(
        "--record-slln-oracle",
        action="store_true",
        default=False,
        help="Rewrite manifests/slln-oracle.json from the current seed-pinned discrimination run",
    )


@pytest.fixture(scope="session")
def record_slln_oracle(request):
    return request.config.getoption("--record-slln-oracle")
