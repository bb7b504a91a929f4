import json
import math

import numpy as np
import pytest

from tokenbound.assembly import BoundConfig, TokenTrace, assemble_bound
from tokenbound.harness import TokenProcessSpec, generate_trace
from tokenbound.io import (
    emit_report,
    load_checkpoint_curves,
    load_matrix,
    load_online_loss_curve,
    load_report,
    load_trace,
    save_trace,
)
from tokenbound.smoothing import optimal_alpha


@pytest.fixture
def trace():
    return generate_trace(
        TokenProcessSpec(vocab=8, process_kind="markov_drift", horizon=64, seed=5)
    ).trace


class TestTraceRoundTrip:
    @pytest.mark.parametrize("body", ["text", "binary"])
    def test_records_byte_identical(self, trace, tmp_path, body):
        p = tmp_path / "t.trace"
        save_trace(trace, p, body)
        loaded = load_trace(p)
        assert np.array_equal(loaded.nll_full, trace.nll_full)
        assert np.array_equal(loaded.nll_quant, trace.nll_quant)
        assert np.array_equal(loaded.proxy_mean_quant, trace.proxy_mean_quant)
        assert loaded.vocab == trace.vocab
        assert loaded.alpha_used == trace.alpha_used

    @pytest.mark.parametrize("body", ["text", "binary"])
    def test_file_level_idempotence(self, trace, tmp_path, body):
        p1 = tmp_path / "a.trace"
        p2 = tmp_path / "b.trace"
        save_trace(trace, p1, body)
        save_trace(load_trace(p1), p2, body)
        assert p1.read_bytes() == p2.read_bytes()

    def test_zero_records_rejected(self, tmp_path):
        p = tmp_path / "bad.trace"
        header = json.dumps({"schema_version": 1, "format": "text", "vocab": 8,
                             "alpha_used": 0.05, "num_records": 0,
                             "source": "synthetic", "is_subsample": False,
                             "subsample_size": None, "parent_size": None})
        p.write_text(header + "\n")
        with pytest.raises(ValueError, match="at least one record"):
            load_trace(p)

    def test_schema_mismatch(self, trace, tmp_path):
        p = tmp_path / "t.trace"
        save_trace(trace, p)
        lines = p.read_text().splitlines()
        header = json.loads(lines[0])
        header["schema_version"] = 99
        p.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
        with pytest.raises(ValueError, match="schema version"):
            load_trace(p)

    def test_truncation_detected(self, trace, tmp_path):
        p = tmp_path / "t.trace"
        save_trace(trace, p, "binary")
        data = p.read_bytes()
        p.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="truncated"):
            load_trace(p)

    def test_invariant_violation_names_record(self, tmp_path):
        p = tmp_path / "t.trace"
        cap = math.log(8 / 0.05)
        bad = TokenTrace(8, 0.0, np.array([1.0, 1.0]),
                         np.array([1.0, cap + 5.0]), np.array([1.0, 1.0]))
        # re-label as smoothed to trip the cap check on load
        save_trace(bad, p)
        lines = p.read_text().splitlines()
        header = json.loads(lines[0])
        header["alpha_used"] = 0.05
        p.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
        with pytest.raises(ValueError, match="record 1"):
            load_trace(p)


class TestReports:
    def _report(self, trace):
        c = 0.05
        cfg = BoundConfig(num_params=10, num_tokens=10**4, vocab=trace.vocab,
                          complexity_override=c, literal_mode=False)
        fixed = TokenTrace(trace.vocab, optimal_alpha(c, trace.vocab).alpha,
                           trace.nll_full, trace.nll_quant,
                           trace.proxy_mean_quant)
        return assemble_bound(fixed, cfg)

    def test_json_resums(self, trace):
        rep = self._report(trace)
        payload = load_report(emit_report(rep, "json"))
        assert payload["kind"] == "bound_report"
        total = (payload["empirical_risk_full"] + payload["term_random_guess"]
                 + payload["term_loss_variation"] + payload["term_smoothing"]
                 + payload["term_quant_gap"] + payload["subsample_correction"])
        assert total == pytest.approx(payload["total_bound"], abs=1e-9)

    def test_deterministic(self, trace):
        rep = self._report(trace)
        assert emit_report(rep, "json") == emit_report(rep, "json")
        assert emit_report(rep, "csv") == emit_report(rep, "csv")

    def test_csv_plottable(self, trace):
        text = emit_report(self._report(trace), "csv")
        lines = text.strip().splitlines()
        assert len(lines) == 2
        assert "term_random_guess" in lines[0]

    def test_empty_table(self):
        assert emit_report([], "csv") == "spec\n"

    def test_table_roundtrip(self):
        rows = [{"spec": "a", "value": 1.5}, {"spec": "b", "value": 2.0}]
        payload = load_report(emit_report(rows, "json"))
        assert payload["kind"] == "comparison_table"
        assert payload["rows"] == rows

    def test_nan_refused_naming_field(self):
        with pytest.raises(ValueError, match="bad_field"):
            emit_report({"bad_field": float("nan")})
        with pytest.raises(ValueError, match="arr"):
            emit_report({"arr": np.array([1.0, np.inf])})

    def test_twelve_significant_digits(self):
        text = emit_report({"v": 1.0 / 3.0})
        assert "0.333333333333" in text


class TestCsvIngestion:
    def test_checkpoint_curves(self, tmp_path):
        p = tmp_path / "curves.csv"
        p.write_text(
            "model_size,tokens_seen,loss,sigma\n"
            "100,2000,2.5,0.4\n100,1000,3.0,0.5\n200,1000,2.8,0.3\n"
        )
        curves = load_checkpoint_curves(p)
        assert [c.model_size for c in curves] == [100, 200]
        assert np.array_equal(curves[0].tokens_seen, [1000.0, 2000.0])
        assert np.array_equal(curves[0].extras["sigma"], [0.5, 0.4])

    def test_checkpoint_missing_column(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("model_size,tokens_seen\n1,2\n")
        with pytest.raises(ValueError, match="loss"):
            load_checkpoint_curves(p)

    def test_online_loss_curve(self, tmp_path):
        p = tmp_path / "curve.csv"
        p.write_text("step,online_loss,final_loss\n2,1.5,1.0\n1,2.0,1.0\n")
        curve = load_online_loss_curve(p)
        assert np.array_equal(curve.per_step_online_loss, [2.0, 1.5])

    def test_matrix_formats(self, tmp_path):
        m = np.arange(4.0).reshape(2, 2)
        npy = tmp_path / "m.npy"
        np.save(npy, m)
        assert np.array_equal(load_matrix(npy), m)
        csv = tmp_path / "m.csv"
        np.savetxt(csv, m, delimiter=",")
        assert np.array_equal(load_matrix(csv), m)
