import json
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shapnarr.ingest import load_csv, load_schema  # noqa: E402
from shapnarr.model import load_model, load_model_files  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"


def fixture_file(name):
    return Path(str(resources.files("shapnarr.fixtures").joinpath(name)))


def stump(feature, threshold, yes_leaf, no_leaf, missing="yes", nodeid=0):
    yes, no = nodeid + 1, nodeid + 2
    return {
        "nodeid": nodeid,
        "split": feature,
        "split_condition": threshold,
        "yes": yes,
        "no": no,
        "missing": yes if missing == "yes" else no,
        "children": [{"nodeid": yes, "leaf": yes_leaf}, {"nodeid": no, "leaf": no_leaf}],
    }


def make_model(dump, names, base=0.0, objective="binary_logistic"):
    meta = {"base_score": base, "feature_names": names, "objective": objective}
    return load_model(json.dumps(dump), json.dumps(meta))


@pytest.fixture(scope="session")
def toy_model():
    """x0<0.5 ? (x1<0.5 ? 0 : 1) : (x1<0.5 ? 2 : 4)"""
    return load_model_files(fixture_file("toy_model.json"), fixture_file("toy_meta.json"))


@pytest.fixture(scope="session")
def titanic_model():
    return load_model_files(fixture_file("titanic_model.json"), fixture_file("titanic_meta.json"))


@pytest.fixture(scope="session")
def titanic_data():
    return load_csv(fixture_file("titanic.csv").read_bytes(), load_schema(fixture_file("titanic_schema.json")))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULT_LINES):
            terminalreporter.write_line(line)
