"""File formats: signal text files, run configs, reports, tables."""

import json
import os

import numpy as np
import pytest

from echodeconv.io_formats import (
    FORMAT_VERSION,
    read_run_config,
    read_signal,
    write_json_report,
    write_signal,
    write_table,
)


class TestSignalFiles:
    def test_round_trip_exact(self, tmp_path):
        path = tmp_path / "s.txt"
        samples = np.array([0.1, -2.5e-17, 3.0, 1 / 3])
        write_signal(path, samples, {"sample_rate_hz": 100e6, "description": "probe A"})
        back, meta = read_signal(path)
        np.testing.assert_array_equal(back, samples)  # .17g is lossless
        assert meta["description"] == "probe A"
        assert float(meta["sample_rate_hz"]) == 100e6

    def test_plain_comments_skipped(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("# a free comment\n1.0\n\n2.0\n#key=value\n3.0\n")
        samples, meta = read_signal(path)
        np.testing.assert_array_equal(samples, [1.0, 2.0, 3.0])
        assert meta == {"key": "value"}

    def test_malformed_line_cites_number(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("1.0\n2.0\nbanana\n4.0\n")
        with pytest.raises(ValueError, match="line 3"):
            read_signal(path)

    def test_non_finite_sample_rejected(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("1.0\ninf\n")
        with pytest.raises(ValueError, match="line 2"):
            read_signal(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("# only a comment\n")
        with pytest.raises(ValueError, match="at least one"):
            read_signal(path)

    def test_write_rejects_non_finite(self, tmp_path):
        with pytest.raises(ValueError, match="non-finite"):
            write_signal(tmp_path / "s.txt", [1.0, np.inf])

    def test_write_rejects_equals_in_key(self, tmp_path):
        with pytest.raises(ValueError, match="'='"):
            write_signal(tmp_path / "s.txt", [1.0], {"a=b": 1})

    def test_no_temp_files_left(self, tmp_path):
        write_signal(tmp_path / "s.txt", [1.0, 2.0])
        assert os.listdir(tmp_path) == ["s.txt"]


class TestRunConfig:
    def test_typed_values(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# scene\n"
            "signal_length_N = 2048\n"
            "reflector_density_rho=0.01\n"
            "tau_search=true\n"
            "snr_levels_db=14, 10,7\n"
            "methods=WienerQ,ForWaRD\n"
        )
        cfg = read_run_config(path)
        assert cfg == {
            "signal_length_N": 2048,
            "reflector_density_rho": 0.01,
            "tau_search": True,
            "snr_levels_db": (14.0, 10.0, 7.0),
            "methods": ("WienerQ", "ForWaRD"),
        }

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("taumultiplier=0.1\n")
        with pytest.raises(ValueError, match="'taumultiplier'"):
            read_run_config(path)

    def test_repeated_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("trials=3\ntrials=5\n")
        with pytest.raises(ValueError, match="repeated config key 'trials'"):
            read_run_config(path)

    def test_bad_value_names_key_and_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("trials=3\nalpha=soup\n")
        with pytest.raises(ValueError, match="line 2.*'alpha'"):
            read_run_config(path)

    def test_missing_separator(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("trials\n")
        with pytest.raises(ValueError, match="key=value"):
            read_run_config(path)


class TestJsonReports:
    def test_format_version_injected(self, tmp_path):
        path = tmp_path / "r.json"
        write_json_report(path, {"command": "x"})
        body = json.loads(path.read_text())
        assert body["format_version"] == FORMAT_VERSION

    def test_numpy_values_become_plain_json(self, tmp_path):
        path = tmp_path / "r.json"
        write_json_report(
            path,
            {
                "a": np.float64(0.5),
                "b": np.arange(3),
                "c": np.bool_(True),
                "d": (np.int64(2), 3),
            },
        )
        body = json.loads(path.read_text())
        assert body["a"] == 0.5
        assert body["b"] == [0, 1, 2]
        assert body["c"] is True
        assert body["d"] == [2, 3]

    def test_non_finite_encoded_as_string(self, tmp_path):
        # strict JSON: inf cannot appear as a bare token
        path = tmp_path / "r.json"
        write_json_report(path, {"snr": float("inf")})
        assert json.loads(path.read_text())["snr"] == "inf"

    def test_identical_payload_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        payload = {"z": 1, "a": [1.5, 2.5], "m": {"k": np.float64(3.25)}}
        write_json_report(a, payload)
        write_json_report(b, payload)
        assert a.read_bytes() == b.read_bytes()


class TestTables:
    def test_csv_header_and_rows(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table(path, ("a", "b"), [(1, 0.5), (2, 1.5)])
        lines = path.read_text().splitlines()
        assert lines[0] == "a,b"
        assert lines[1] == "1,0.5"

    def test_gnuplot_header_commented(self, tmp_path):
        path = tmp_path / "t.dat"
        write_table(path, ("x", "y"), [(0, 1.0)], sep=" ")
        lines = path.read_text().splitlines()
        assert lines[0] == "# x y"
        assert lines[1] == "0 1"

    def test_row_width_checked(self, tmp_path):
        with pytest.raises(ValueError, match="row width"):
            write_table(tmp_path / "t.csv", ("a", "b"), [(1,)])

    def test_none_is_blank_and_bools_lowercase(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table(path, ("a", "b", "c"), [(None, True, False)])
        assert path.read_text().splitlines()[1] == ",true,false"
