import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfcids.dataset import (
    DataError,
    Dataset,
    Feature,
    FeatureSchema,
    MissingFileError,
    SchemaMismatchError,
    apply_normalization,
    fit_normalization,
    kdd99_schema,
    load_dataset,
    load_schema,
    normalize_values,
    sample_by_group,
    sample_indices,
    save_dataset,
)

TWO_CONT = FeatureSchema((Feature("a", "continuous"), Feature("b", "continuous")), label_column="cls")


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_four_row_file(tmp_path):
    p = _write(tmp_path / "d.csv", "a,b,cls\n1,2,x\n3,4,y\n5,?,x\n7,8,y\n")
    d = load_dataset(p, TWO_CONT)
    assert (d.n, d.m) == (4, 2)
    assert np.isnan(d.column("b")[2])
    assert d.classes == ["x", "y"]


def test_header_without_label_is_rejected(tmp_path):
    p = _write(tmp_path / "d.csv", "a,b\n1,2\n")
    with pytest.raises(SchemaMismatchError, match="label"):
        load_dataset(p, TWO_CONT)
    # unlabeled reading is allowed when asked for
    assert load_dataset(p, TWO_CONT, label_required=False).labels is None


def test_header_problems(tmp_path):
    with pytest.raises(SchemaMismatchError, match="lacks schema features"):
        load_dataset(_write(tmp_path / "1.csv", "a,cls\n1,x\n"), TWO_CONT)
    with pytest.raises(SchemaMismatchError, match="not in schema"):
        load_dataset(_write(tmp_path / "2.csv", "a,b,zz,cls\n1,2,3,x\n"), TWO_CONT)
    with pytest.raises(DataError, match="row 3"):
        load_dataset(_write(tmp_path / "3.csv", "a,b,cls\n1,2,x\n1,x\n"), TWO_CONT)
    with pytest.raises(MissingFileError):
        load_dataset(tmp_path / "nope.csv", TWO_CONT)


def test_categorical_and_ordinal_parsing(tmp_path):
    schema = FeatureSchema((Feature("p", "symbolic"), Feature("lvl", "ordinal", ("lo", "mid", "hi"))),
                           label_column="y")
    p = _write(tmp_path / "d.csv", "p,lvl,y\ntcp,lo,n\nudp,huge,n\n?,hi,a\n")
    d = load_dataset(p, schema)
    assert d.column("p").tolist() == ["tcp", "udp", "?"]
    # out-of-list ordinal values are read as missing
    assert d.column("lvl").tolist() == ["lo", "?", "hi"]


def test_label_map_keeps_raw_groups(tmp_path):
    schema = FeatureSchema((Feature("a", "continuous"),), label_column="label",
                           label_map={"neptune": "DoS", "normal": "Normal"}, strip_label_suffix=".")
    p = _write(tmp_path / "d.csv", "a,label\n1,neptune.\n2,normal.\n3,neptune.\n")
    d = load_dataset(p, schema)
    assert d.labels.tolist() == ["DoS", "Normal", "DoS"]
    assert d.groups.tolist() == ["neptune", "normal", "neptune"]
    with pytest.raises(DataError, match="label_map"):
        load_dataset(_write(tmp_path / "e.csv", "a,label\n1,smurf.\n"), schema)


def test_headerless_file(tmp_path):
    p = _write(tmp_path / "d.csv", "1,2,x\n3,4,y\n")
    d = load_dataset(p, TWO_CONT, header=False)
    assert d.n == 2 and d.labels.tolist() == ["x", "y"]


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    schema = FeatureSchema((Feature("a", "continuous"), Feature("s", "symbolic")), label_column="cls")
    a = rng.normal(size=30)
    a[4] = np.nan
    d = Dataset(schema, (a, rng.choice(["u", "v", "?"], 30)), rng.choice(["p", "q"], 30))
    save_dataset(d, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv", schema)
    np.testing.assert_array_equal(back.column("a"), d.column("a"))
    assert back.column("s").tolist() == d.column("s").tolist()
    assert back.labels.tolist() == d.labels.tolist()


def test_schema_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"label_column": "y", "features": [
        {"name": "a", "kind": "continuous"}, {"name": "o", "kind": "ordinal", "categories": ["1", "2"]}]}))
    s = load_schema(p)
    assert s.names == ["a", "o"] and s.label_column == "y"
    assert s.fingerprint() == FeatureSchema.from_dict(s.to_dict()).fingerprint()
    with pytest.raises(MissingFileError, match="nope.json"):
        load_schema(tmp_path / "nope.json")


def test_schema_validation():
    with pytest.raises(DataError):
        Feature("o", "ordinal", ("only",))
    with pytest.raises(DataError):
        Feature("x", "fuzzy")
    with pytest.raises(DataError):
        FeatureSchema((Feature("a", "continuous"), Feature("a", "symbolic")))
    with pytest.raises(DataError, match="reserved"):
        FeatureSchema((Feature("_Z", "continuous"),)).validate_user_names()
    FeatureSchema((Feature("_Zeta", "continuous"),)).validate_user_names()


def test_kdd99_schema():
    s = kdd99_schema()
    assert s.m == 41
    assert set(s.label_map.values()) == {"Normal", "Probe", "DoS", "R2L", "U2R"}
    assert s.label_map["neptune"] == "DoS" and s.label_map["buffer_overflow"] == "U2R"
    assert s["protocol_type"].kind == "symbolic" and s["src_bytes"].kind == "continuous"


# -- normalization --

def _one_col(values):
    return Dataset(FeatureSchema((Feature("v", "continuous"),)), (np.array(values, dtype=float),))


@pytest.mark.parametrize("values, expected", [
    ([2, 8, 5], (2.0, 8.0)),
    ([3, 3, 3], (3.0, 3.0)),
    ([1, np.nan, 4], (1.0, 4.0)),
])
def test_fit_normalization(values, expected):
    assert fit_normalization(_one_col(values)).ranges["v"] == expected


def test_normalize_values():
    np.testing.assert_allclose(normalize_values(np.array([8.0, 5.0, 2.0]), 2, 8), [1.0, 0.5, 0.0])
    assert normalize_values(np.array([3.0]), 3, 3)[0] == 0.0
    # out-of-range operation-phase values clamp into [0, 1]
    np.testing.assert_array_equal(normalize_values(np.array([-4.0, 20.0]), 2, 8), [0.0, 1.0])
    assert np.isnan(normalize_values(np.array([np.nan]), 0, 1)[0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_normalized_training_values_in_unit_interval(values):
    d = _one_col(values)
    out = apply_normalization(d, fit_normalization(d)).column("v")
    assert np.all((out >= 0) & (out <= 1))


def test_normalization_schema_mismatch():
    p = fit_normalization(_one_col([1, 2]))
    other = Dataset(FeatureSchema((Feature("w", "continuous"),)), (np.array([1.0]),))
    with pytest.raises(SchemaMismatchError):
        apply_normalization(other, p)


# -- sampling --

def test_sampling_counts_and_reproducibility():
    tags = np.array(["big"] * 200 + ["small"] * 52 + ["mid"] * 100, dtype=object)
    fractions = {"big": 0.05, "mid": 1.0}
    a = sample_indices(tags, fractions, seed=7)
    b = sample_indices(tags, fractions, seed=7)
    np.testing.assert_array_equal(a, b)
    kept = tags[a]
    assert (kept == "big").sum() == 10
    assert (kept == "small").sum() == 52
    np.testing.assert_array_equal(a[tags[a] == "mid"], np.arange(252, 352))
    assert not np.array_equal(a, sample_indices(tags, fractions, seed=8))


def test_sampling_rounds_half_up():
    tags = np.array(["g"] * 30, dtype=object)
    assert len(sample_indices(tags, {"g": 0.05}, 0)) == 2  # 1.5 -> 2


def test_sampling_errors():
    tags = np.array(["g"] * 5, dtype=object)
    with pytest.raises(ValueError):
        sample_indices(tags, {"g": 1.5}, 0)
    with pytest.raises(ValueError):
        sample_indices(tags, {"g": 0.0}, 0)
    with pytest.raises(ValueError, match="not present"):
        sample_indices(tags, {"h": 0.5}, 0)


def test_sample_by_group_uses_groups():
    d = Dataset(FeatureSchema((Feature("v", "continuous"),)), (np.arange(6.0),),
                labels=np.array(["A"] * 6), groups=np.array(["g1"] * 4 + ["g2"] * 2))
    s = sample_by_group(d, {"g1": 0.5}, seed=0)
    assert s.n == 4 and (s.groups == "g2").sum() == 2
