import os
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def data_dir():
    return pathlib.Path(os.environ.get("ATESA_TEST_DATA_DIR", ROOT / "tests" / "data"))


@pytest.fixture(scope="session")
def fixture_models():
    path = os.environ.get("ATESA_FIXTURE_DIR")
    if not path or not (pathlib.Path(path) / "ate.json").exists():
        pytest.skip("fixture models not built (run ctest, which builds them first)")
    return pathlib.Path(path)


@pytest.fixture(scope="session")
def schema():
    import json

    with open(ROOT / "docs" / "schema" / "analyze_response.schema.json", encoding="utf-8") as f:
        return json.load(f)
