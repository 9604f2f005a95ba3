import json

import numpy as np
import pytest

import ethlab as el
from ethlab.config import RunConfig, demo_config
from ethlab.io import (dump_json, file_sha256, format_number, load_json,
                       read_array, read_csv, write_array, write_csv,
                       write_series_csv)


class TestArrayContainer:
    def test_matrix_roundtrip_complex(self, tmp_path):
        rng = np.random.Generator(np.random.Philox(key=np.uint64(1)))
        m = rng.standard_normal((17, 17)) + 1j * rng.standard_normal((17, 17))
        path = tmp_path / "m.ethb"
        write_array(path, m)
        back = read_array(path)
        assert back.dtype == np.complex128
        assert np.array_equal(back, m)

    def test_vector_roundtrip_real(self, tmp_path):
        v = np.linspace(0, 1, 37)
        path = tmp_path / "v.ethb"
        write_array(path, v)
        back = read_array(path)
        assert back.dtype == np.float64
        assert np.array_equal(back, v)

    def test_write_is_bit_stable(self, tmp_path):
        v = np.sqrt(np.arange(100, dtype=float))
        p1, p2 = tmp_path / "a.ethb", tmp_path / "b.ethb"
        write_array(p1, v)
        write_array(p2, v)
        assert file_sha256(p1) == file_sha256(p2)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ethb"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(el.ValidationError):
            read_array(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.ethb"
        write_array(path, np.arange(10.0))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(el.ValidationError):
            read_array(path)


class TestCsv:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "x.csv"
        a = np.array([1.0, 2.0, np.pi])
        b = np.array([-1.0, 0.5, 1e-17])
        write_csv(path, ["a", "b"], [a, b])
        header, cols = read_csv(path)
        assert header == ["a", "b"]
        assert np.array_equal(cols[0], a)
        assert np.array_equal(cols[1], b)

    def test_17_significant_digits_and_newlines(self, tmp_path):
        path = tmp_path / "y.csv"
        write_csv(path, ["v"], [np.array([np.pi])])
        raw = path.read_bytes().decode()
        assert "\r" not in raw
        assert raw == "v\n3.1415926535897931\n"

    def test_series_csv_columns(self, tmp_path):
        path = tmp_path / "s.csv"
        t = np.array([0.0, 0.5])
        vals = np.array([1 + 2j, 3 - 4j])
        write_series_csv(path, "t", t, vals)
        header, cols = read_csv(path)
        assert header == ["t", "re", "im"]
        assert np.array_equal(cols[1], vals.real)
        assert np.array_equal(cols[2], vals.imag)

    def test_format_number_integer_passthrough(self):
        assert format_number(42) == "42"
        assert format_number(0.5) == "0.5"


class TestJson:
    def test_deterministic_and_sorted(self, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        dump_json(p1, {"b": 1, "a": [1, 2, {"z": 0, "y": 1}]})
        dump_json(p2, {"a": [1, 2, {"y": 1, "z": 0}], "b": 1})
        assert p1.read_bytes() == p2.read_bytes()

    def test_non_finite_becomes_null(self, tmp_path):
        path = tmp_path / "n.json"
        dump_json(path, {"x": float("nan"), "y": float("inf"), "z": 1.0})
        back = load_json(path)
        assert back == {"x": None, "y": None, "z": 1.0}
        json.loads(path.read_text())  # standard JSON, parses strictly


class TestRunConfig:
    def test_roundtrip_identity(self):
        cfg = demo_config()
        again = RunConfig.from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()
        assert again.config_hash() == cfg.config_hash()

    def test_unknown_top_level_key(self):
        with pytest.raises(el.ValidationError):
            RunConfig.from_dict({"model": {"kind": "ising", "n_sites": 4},
                                 "bogus": 1})

    def test_unknown_nested_key(self):
        with pytest.raises(el.ValidationError):
            RunConfig.from_dict({"model": {"kind": "ising", "n_sites": 4,
                                           "coupling": 2.0}})

    def test_missing_required_key(self):
        with pytest.raises(el.ValidationError):
            RunConfig.from_dict({"model": {"kind": "synthetic"}})

    def test_bad_enum_value(self):
        with pytest.raises(el.ValidationError):
            RunConfig.from_dict({"model": {"kind": "ising", "n_sites": 4,
                                           "boundary": "twisted"}})

    def test_empty_betas_rejected(self):
        with pytest.raises(el.ValidationError):
            RunConfig.from_dict({"model": {"kind": "ising", "n_sites": 4},
                                 "thermal": {"betas": []}})

    def test_hash_changes_with_content(self):
        c1 = demo_config()
        c2 = c1.override(seed=8)
        assert c1.config_hash() != c2.config_hash()

    def test_override_restricted(self):
        with pytest.raises(el.ValidationError):
            demo_config().override(model={})

    def test_with_path_value_scalar_into_list(self):
        cfg = demo_config().with_path_value("thermal.betas", 2.0)
        assert cfg.data["thermal"]["betas"] == [2.0]

    def test_with_path_value_missing_path(self):
        with pytest.raises(el.ValidationError):
            demo_config().with_path_value("model.nonexistent", 1)

    def test_sweep_grid_validation(self):
        with pytest.raises(el.ValidationError):
            RunConfig.from_dict({"model": {"kind": "ising", "n_sites": 4},
                                 "sweep": {"grid": {}}})

    def test_canonical_file_roundtrip(self, tmp_path):
        cfg = demo_config()
        path = tmp_path / "cfg.json"
        path.write_text(cfg.canonical_json())
        again = RunConfig.from_file(path)
        assert again.to_dict() == cfg.to_dict()
