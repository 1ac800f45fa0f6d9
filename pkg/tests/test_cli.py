import json
from pathlib import Path

import numpy as np
import pytest

from picardop.cli import default_config_text, main
from picardop.config import ConfigParseError, NonlinearitySpec, parse_config, validate_config
from picardop.errors import ConfigurationError
from picardop.scenarios import SCENARIOS
from picardop.serialize import csv_text, dataset_from_json, dataset_to_json, dumps_json, fmt

from golden import GOLDEN_PATH, golden_dataset

HEADERS = {
    "truncation.csv": "ell,measured_error,bound,ratio",
    "contraction.csv": "nonlinearity,semigroup,pairs,max_ratio,bound",
    "implementation.csv": "rank,total_error,rho_term,fourier_term,rho_bound",
    "reconstruction.csv": "m,eps_rec_sq",
    "erm.csv": "seed,selected,empirical_risk,heldout_risk,a_N,imp_term,truncation_term,"
               "rademacher_term,concentration_term,bound_total,holds",
    "rademacher.csv": "n,rademacher,std_error,scaled,lemma_bound",
    "plan.csv": "n,ell_n,m_n,ell_clamped,m_clamped,truncation_term,target",
    "trace.csv": "j,e_j,block_risk,envelope_generic,envelope_dissipative,clip_count",
}
SUMMARY_KEYS = {"schema", "scenario", "passed", "seeds", "checks", "metrics", "tables"}

BASE_CONFIG = """
[grid]
dim = 1
points_per_axis = 64
time_nodes = 33

[params]
R = {R}
M = 1.0
L = 0.5
T = 0.5
delta = {delta}
"""


def write(tmp_path, text, name="c.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestValidateConfig:
    def test_valid(self, tmp_path, capsys):
        path = write(tmp_path, BASE_CONFIG.format(R=0.4, delta=0.25))
        report = validate_config(path)
        assert report.ok
        assert "R + T*L*M <= M: 0.65 <= 1  [ok]" in report.lines
        assert main(["validate-config", str(path)]) == 0
        assert "valid" in capsys.readouterr().out

    def test_delta_one(self, tmp_path):
        report = validate_config(write(tmp_path, BASE_CONFIG.format(R=0.4, delta=1.0)))
        assert not report.ok
        assert any("delta < 1" in line and "VIOLATED" in line for line in report.lines)
        assert main(["validate-config", str(tmp_path / "c.ini")]) == 1

    def test_R_equal_M(self, tmp_path):
        report = validate_config(write(tmp_path, BASE_CONFIG.format(R=1.0, delta=0.25)))
        assert any(line.startswith("R + T*L*M <= M: 1.25 <= 1") for line in report.lines)
        assert not report.ok

    def test_missing_file(self, tmp_path):
        assert not validate_config(tmp_path / "absent.ini").ok

    def test_bad_nonlinearity_reported(self, tmp_path):
        text = BASE_CONFIG.format(R=0.4, delta=0.25) + "\n[truth]\nnonlinearity = sin scale=0.9\n"
        report = validate_config(write(tmp_path, text))
        assert not report.ok and any("nonlinearity" in line for line in report.lines)


class TestParseErrors:
    def test_value_error_has_line_and_column(self):
        text = BASE_CONFIG.format(R="abc", delta=0.25)
        with pytest.raises(ConfigParseError) as err:
            parse_config(text, path="x.ini")
        assert (err.value.line, err.value.column) == (8, 5)
        assert str(err.value).startswith("x.ini:8:5:")

    def test_syntax_error_line(self):
        text = "[grid]\ndim = 1\nthis line is junk\n"
        with pytest.raises(ConfigParseError) as err:
            parse_config(text, path="y.ini")
        assert err.value.line == 3

    def test_missing_section_header(self):
        with pytest.raises(ConfigParseError) as err:
            parse_config("dim = 1\n")
        assert err.value.line == 1

    def test_missing_key(self):
        with pytest.raises(ConfigParseError, match="delta"):
            parse_config(BASE_CONFIG.format(R=0.4, delta=0.25).replace("delta = 0.25", ""))

    def test_invalid_params_rejected_at_load(self):
        with pytest.raises(ConfigurationError, match="VIOLATED"):
            parse_config(BASE_CONFIG.format(R=0.4, delta=0.1))

    def test_nonlinearity_spec(self):
        spec = NonlinearitySpec.parse("defocusing alpha=0.5 beta=0.1 p=3")
        assert spec.name == "defocusing" and spec.params == {"alpha": 0.5, "beta": 0.1, "p": 3.0}
        with pytest.raises(ConfigurationError):
            NonlinearitySpec.parse("sin scale")


class TestSerialization:
    def test_fmt(self):
        assert fmt(1 / 3) == "0.333333333333"
        assert fmt(True) == "true" and fmt(np.int64(3)) == "3"

    def test_json_sorted_and_rounded(self):
        text = dumps_json({"b": 1 / 3, "a": [np.float64(2.0), float("nan")]})
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": [2.0, None], "b": 0.333333333333}

    def test_csv_row_length(self):
        with pytest.raises(ConfigurationError):
            csv_text(("a", "b"), [(1,)])

    def test_dataset_round_trip(self):
        ds = golden_dataset()
        back = dataset_from_json(dataset_to_json(ds))
        np.testing.assert_allclose(back.u0, ds.u0, rtol=1e-11)
        np.testing.assert_array_equal(back.queries, ds.queries)
        assert dataset_to_json(back) == dataset_to_json(ds)

    def test_golden_file(self):
        stored = dataset_from_json((Path(__file__).parent / GOLDEN_PATH).read_text())
        fresh = golden_dataset()
        np.testing.assert_array_equal(stored.queries, fresh.queries)
        np.testing.assert_allclose(stored.targets, fresh.targets, rtol=0, atol=1e-10)
        np.testing.assert_allclose(stored.u0, fresh.u0, rtol=0, atol=1e-10)


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.parametrize("scenario", list(SCENARIOS))
def test_default_scenarios_pass_and_are_deterministic(tmp_path, scenario):
    assert main([scenario, "--out", str(tmp_path / "a")]) == 0
    assert main([scenario, "--out", str(tmp_path / "b")]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a == b and a
    for rel, data in a.items():
        if rel.suffix == ".csv":
            assert data.decode().splitlines()[0] == HEADERS[rel.name]
        else:
            summary = json.loads(data)
            assert set(summary) == SUMMARY_KEYS
            assert summary["schema"] == 1 and summary["passed"] is True


class TestCommandLine:
    def test_unknown_scenario(self, capsys):
        assert main(["bogus"]) == 2
        err = capsys.readouterr().err
        assert "truncation-decay" in err and "rollout-propagation" in err

    def test_seed_override_and_env_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("OUTPUT_DIR", str(tmp_path))
        assert main(["truncation-decay", "--seeds", "5,6"]) == 0
        root = tmp_path / "truncation-decay"
        assert {p.name for p in root.iterdir()} == {"seed_5", "seed_6", "summary.json"}
        assert json.loads((root / "summary.json").read_text())["seeds"] == [5, 6]

    def test_failed_check_exit_code(self, tmp_path):
        text = default_config_text("truncation-decay").replace("ratio_max = 0.30", "ratio_max = 0.01")
        cfg = write(tmp_path, text)
        assert main(["truncation-decay", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
        summary = json.loads((tmp_path / "o/truncation-decay/summary.json").read_text())
        assert summary["checks"]["ratio_le_max"] is False

    def test_missing_config(self, tmp_path):
        assert main(["truncation-decay", "--config", str(tmp_path / "none.ini")]) == 1

    def test_library_error_is_reported(self, tmp_path, capsys):
        text = default_config_text("truncation-decay").replace("r0 = 0.3", "r0 = 0.5")
        assert main(["truncation-decay", "--config", str(write(tmp_path, text)), "--out", str(tmp_path)]) == 1
        assert "LawMisconfigurationError" in capsys.readouterr().err
