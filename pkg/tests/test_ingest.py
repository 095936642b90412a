import json

import pytest
from conftest import fixture_file
from hypothesis import given
from hypothesis import strategies as st

from shapnarr.errors import DataError, SchemaError
from shapnarr.ingest import (
    ColumnSchema,
    load_csv,
    load_schema,
    schema_from_dict,
    schema_to_dict,
    select_background,
)


@pytest.fixture(scope="module")
def schema():
    return load_schema(fixture_file("titanic_schema.json"))


HEADER = "Pclass,Sex,Age,SibSp,Parch,Fare,Embarked\n"


def test_titanic_row_encoding(schema):
    ds = load_csv((HEADER + "1,female,,0,0,71.2833,C\n").encode(), schema)
    row = ds.rows[0]
    assert row[0] == 1.0
    assert row[1] == 0.0
    assert row[2] is None
    assert row[6] == 0.0
    assert ds.source_row_numbers == (2,)


def test_unknown_category_cites_row_and_column(schema):
    text = HEADER + "1,female,30,0,0,10,S\n3,unknown,30,0,0,10,S\n"
    with pytest.raises(DataError) as info:
        load_csv(text.encode(), schema)
    assert info.value.row == 3 and info.value.column == "Sex"


def test_unparseable_number(schema):
    with pytest.raises(DataError, match="Fare"):
        load_csv((HEADER + "1,male,30,0,0,ten,S\n").encode(), schema)
    for bad in ("nan", "inf", "1_000", "0x10"):
        with pytest.raises(DataError):
            load_csv((HEADER + f"1,male,30,0,0,{bad},S\n").encode(), schema)


def test_empty_cell_rejected_under_reject_policy(schema):
    with pytest.raises(DataError, match="Pclass"):
        load_csv((HEADER + ",male,30,0,0,10,S\n").encode(), schema)


def test_header_reordered_to_schema(schema):
    text = "Sex,Pclass,Age,SibSp,Parch,Fare,Embarked\nmale,3,22,1,0,7.25,S\n"
    ds = load_csv(text.encode(), schema)
    assert ds.rows[0] == (3.0, 1.0, 22.0, 1.0, 0.0, 7.25, 2.0)


def test_header_mismatch(schema):
    with pytest.raises(SchemaError):
        load_csv(b"Pclass,Sex\n1,male\n", schema)
    with pytest.raises(SchemaError):
        load_csv((HEADER.strip() + ",Survived\n1,male,3,0,0,1,S,1\n").encode(), schema)


def test_without_header(schema):
    ds = load_csv(b"1,male,3,0,0,1,Q\n", schema, has_header=False)
    assert ds.rows == ((1.0, 1.0, 3.0, 0.0, 0.0, 1.0, 1.0),)


def test_wrong_field_count(schema):
    with pytest.raises(DataError, match="fields"):
        load_csv((HEADER + "1,male,3\n").encode(), schema)


def test_quoted_fields_and_bom():
    cols = [ColumnSchema("name", "categorical", {"a, b": 1.0, "c": 2.0}), ColumnSchema("v")]
    ds = load_csv('\ufeffname,v\n"a, b",2.5\n'.encode(), cols)
    assert ds.rows == ((1.0, 2.5),)


def test_invalid_utf8():
    with pytest.raises(DataError, match="UTF-8"):
        load_csv(b"v\n\xff\n", [ColumnSchema("v")])


def test_titanic_fixture(titanic_data):
    assert len(titanic_data) == 50
    assert all(len(r) == 7 for r in titanic_data.rows)
    # hand spot checks against the CSV text
    assert titanic_data.rows[0] == (1.0, 0.0, 29.0, 0.0, 0.0, 211.3375, 2.0)
    assert titanic_data.rows[1] == (1.0, 1.0, 71.0, 0.0, 0.0, 49.5042, 0.0)
    assert titanic_data.rows[49][6] is None
    assert sum(r[2] is None for r in titanic_data.rows) == 10


def test_schema_validation():
    with pytest.raises(SchemaError):
        ColumnSchema("c", "categorical", {})
    with pytest.raises(SchemaError):
        ColumnSchema("c", "categorical", {"a": 1.0, "b": 1.0})
    with pytest.raises(SchemaError):
        ColumnSchema("c", "ordinal")
    with pytest.raises(SchemaError):
        schema_from_dict({"columns": [{"name": "a"}, {"name": "a"}]})


def test_schema_json_round_trip(schema):
    assert schema_from_dict(json.loads(json.dumps(schema_to_dict(schema)))) == schema


def test_load_is_pure(schema):
    raw = fixture_file("titanic.csv").read_bytes()
    assert load_csv(raw, schema) == load_csv(raw, schema)


def test_categorical_encoding_injective(schema):
    for col in schema:
        if col.kind == "categorical":
            assert len(set(col.category_map.values())) == len(col.category_map)


# --- background selection ----------------------------------------------------


def test_full_background_is_identity(titanic_data):
    assert select_background(titanic_data, 50, seed=3) == list(titanic_data.rows)


def test_background_deterministic(titanic_data):
    assert select_background(titanic_data, 1, seed=5) == select_background(titanic_data, 1, seed=5)


def test_background_seeds_differ(titanic_data):
    assert select_background(titanic_data, 10, seed=1) != select_background(titanic_data, 10, seed=2)


def test_background_range_checked(titanic_data):
    for k in (0, 51, -1):
        with pytest.raises(DataError):
            select_background(titanic_data, k, seed=0)


INDEXED = load_csv(("v\n" + "".join(f"{i}\n" for i in range(50))).encode(), [ColumnSchema("v")])


@given(st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_background_rows_are_distinct_members(k, seed):
    picked = select_background(INDEXED, k, seed)
    assert len(picked) == k
    assert all(r in INDEXED.rows for r in picked)
    assert len(set(picked)) == k
    # returned in dataset order
    assert [r[0] for r in picked] == sorted(r[0] for r in picked)
