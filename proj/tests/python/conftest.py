import json
import pathlib

import jsonschema
import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]
DATA = ROOT / "data"
SCHEMAS = ROOT / "schemas"


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("RAYATLAS_CACHE", str(tmp_path / "cache"))


@pytest.fixture
def data():
    return DATA


@pytest.fixture
def validate():
    store = {}
    for path in SCHEMAS.glob("*.schema.json"):
        sch = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(sch)
        store[sch["$id"]] = sch

    def check(doc):
        sch = store[doc["schema"]]
        jsonschema.validate(doc, sch, cls=jsonschema.Draft202012Validator)
        return doc

    return check
