import json

import numpy as np
import pytest

from cellstring.errors import TelemetryError
from cellstring.telemetry import (config_hash, read_telemetry_csv, telemetry_rate,
                                  write_estimator_trace_csv, write_histogram_csv,
                                  write_json, write_telemetry_csv)


class TestTelemetryRoundTrip:
    def test_lossless_at_17_digits(self, tmp_path):
        rng = np.random.default_rng(0)
        t = np.arange(100) * 0.1
        i = rng.normal(scale=10.0, size=100)
        v = rng.normal(loc=4.0, scale=1e-3, size=100)
        path = tmp_path / "tel.csv"
        write_telemetry_csv(path, t, i, v)
        t2, i2, v2 = read_telemetry_csv(path)
        np.testing.assert_array_equal(t, t2)
        np.testing.assert_array_equal(i, i2)
        np.testing.assert_array_equal(v, v2)

    def test_extreme_values_round_trip(self, tmp_path):
        vals = np.array([1e-300, -1e300, 5.8e-3, 0.1 + 0.2, np.pi])
        path = tmp_path / "tel.csv"
        write_telemetry_csv(path, np.arange(5.0), vals, vals)
        _, i2, _ = read_telemetry_csv(path)
        np.testing.assert_array_equal(vals, i2)

    def test_header_written_for_empty_series(self, tmp_path):
        path = tmp_path / "tel.csv"
        write_telemetry_csv(path, [], [], [])
        assert path.read_text().strip() == "t_s,i_total_a,v_terminal_v"
        t, i, v = read_telemetry_csv(path)
        assert t.size == i.size == v.size == 0

    def test_mismatched_lengths_rejected(self, tmp_path):
        with pytest.raises(TelemetryError):
            write_telemetry_csv(tmp_path / "x.csv", [0.0], [1.0, 2.0], [3.0])


class TestTelemetryParsing:
    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "tel.csv"
        path.write_text("time,current,voltage\n0,1,2\n")
        with pytest.raises(TelemetryError, match="bad header"):
            read_telemetry_csv(path)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "tel.csv"
        path.write_text("t_s,i_total_a,v_terminal_v\n0,1,2\n0.1,oops,2\n")
        with pytest.raises(TelemetryError, match=":3:"):
            read_telemetry_csv(path)

    def test_missing_column_carries_line_number(self, tmp_path):
        path = tmp_path / "tel.csv"
        path.write_text("t_s,i_total_a,v_terminal_v\n0,1\n")
        with pytest.raises(TelemetryError, match=":2:"):
            read_telemetry_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(TelemetryError, match="cannot read"):
            read_telemetry_csv(tmp_path / "nope.csv")

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "tel.csv"
        path.write_text("")
        with pytest.raises(TelemetryError, match="empty file"):
            read_telemetry_csv(path)


class TestRateValidation:
    def test_uniform_grid_accepted(self):
        t = np.arange(1000) * 0.1
        assert telemetry_rate(t) == pytest.approx(10.0, rel=1e-9)

    def test_non_monotonic_rejected_with_position(self):
        t = np.array([0.0, 0.1, 0.1, 0.3])
        with pytest.raises(TelemetryError, match="sample 2"):
            telemetry_rate(t)

    def test_gap_rejected_with_position(self):
        t = np.array([0.0, 0.1, 0.2, 0.4, 0.5])
        with pytest.raises(TelemetryError, match="sample 3"):
            telemetry_rate(t)

    def test_too_short_rejected(self):
        with pytest.raises(TelemetryError, match="at least 2"):
            telemetry_rate(np.array([0.0]))


class TestAuxWriters:
    def test_histogram_csv(self, tmp_path):
        path = tmp_path / "hist.csv"
        write_histogram_csv(path, [0.0, 1.0, 2.0], [3, 4])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "bin_left_ohm,bin_right_ohm,count"
        assert lines[1] == "0,1,3"

    def test_histogram_shape_mismatch(self, tmp_path):
        with pytest.raises(TelemetryError):
            write_histogram_csv(tmp_path / "h.csv", [0.0, 1.0], [1, 2])

    def test_estimator_trace_csv(self, tmp_path):
        path = tmp_path / "trace.csv"
        write_estimator_trace_csv(path, [(0.0, -3e-3, 1.0, 3e-3, 1e-4, 1)])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t_s,v_f,i_f,rs_hat_ohm,p_var,accepted"
        assert lines[1].endswith(",1")

    def test_write_json(self, tmp_path):
        path = tmp_path / "r.json"
        write_json(path, {"a": 1})
        assert json.loads(path.read_text()) == {"a": 1}


class TestConfigHash:
    def test_stable_and_order_independent(self):
        h1 = config_hash({"a": 1, "b": [1, 2]})
        h2 = config_hash({"b": [1, 2], "a": 1})
        assert h1 == h2
        assert len(h1) == 16

    def test_sensitive_to_values(self):
        assert config_hash({"a": 1}) != config_hash({"a": 2})
