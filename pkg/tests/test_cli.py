import csv
import io
import json
import math

import pytest

from conefrac.cli import ExperimentConfig, main
from conefrac.exceptions import ConfigError


def _write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_gamma_rows(tmp_path, capsys):
    cfg = _write(tmp_path, {"grid": [[1, 4], [2, 1.5], [2, 0.4]]})
    assert main(["gamma", "--config", cfg]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows[0]["log_gamma_p"]) == pytest.approx(math.log(6), abs=1e-14)
    assert float(rows[1]["log_gamma_p"]) == pytest.approx(math.log(math.pi / 2), abs=1e-14)
    assert rows[2]["status"] == "domain_error" and rows[2]["log_gamma_p"] == ""


def test_csv_cells_round_trip(tmp_path, capsys):
    main(["gamma", "--p", "3", "--alpha", "2.3"])
    value = float(_rows(capsys.readouterr().out)[0]["log_gamma_p"])
    from conefrac.special import log_gamma_p
    assert value == log_gamma_p(3, 2.3)


def test_zonal_table(capsys):
    assert main(["zonal", "--kmax", "2", "--p", "2"]) == 0
    rows = _rows(capsys.readouterr().out)
    coef = {(r["partition"], r["monomial"]): r["coefficient"] for r in rows}
    assert coef[("(2)", "1 1")] == "2/3"
    assert coef[("(1,1)", "1 1")] == "4/3"


def test_verify_pass_and_files(tmp_path):
    cfg = _write(tmp_path, {"suites": ["lemma22", "lemma21"], "seed": 1})
    out = tmp_path / "out"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "verify_lemma22.json").read_text())
    assert report["passed"] and report["seed"] == 1 and report["build"].startswith("conefrac-v")
    assert {"params", "lhs", "rhs", "se", "pass"} <= set(report["cases"][0])
    assert "wall_seconds" in json.loads((out / "verify_lemma22.timing.json").read_text())
    assert _rows((out / "verify_lemma21.csv").read_text())[0]["pass"] == "True"


def test_verify_failure_exit_code(tmp_path):
    # far from q = 1 a large eigenvalue keeps the error ratio near 1, outside the band
    cfg = _write(tmp_path, {"suites": ["lemma22"], "seed": 1,
                            "params": {"lemma22": {"m_min": 1, "eigenvalues": [[3.0]]}}})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert main(["report", "--out", str(tmp_path / "o")]) == 1


def test_verify_determinism_and_env_out(tmp_path, monkeypatch):
    cfg = _write(tmp_path, {"suites": ["lemma41", "eigenfn"], "seed": 5, "n": 5000,
                            "params": {"eigenfn": {"p": 2}}})
    main(["verify", "--config", cfg, "--out", str(tmp_path / "a")])
    monkeypatch.setenv("CONEFRAC_OUT", str(tmp_path / "b"))
    main(["verify", "--config", cfg, "--workers", "2"])
    for name in ("verify_lemma41.json", "verify_eigenfn.json", "verify_eigenfn.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    timing = json.loads((tmp_path / "b" / "verify_eigenfn.timing.json").read_text())
    assert timing["workers"] == 2


@pytest.mark.parametrize("cfg,needle", [
    ({"suites": ["nope"], "seed": 1}, "suites"),
    ({"suites": ["lemma22"]}, "seed"),
    ({"suites": ["lemma22"], "seed": 1, "n": 10}, "'n'"),
    ({"seed": 1}, "suites"),
    ('{"suites": ["lemma22"],\n "seed": 1,,}', "line 2"),
])
def test_config_errors(tmp_path, capsys, cfg, needle):
    path = _write(tmp_path, cfg)
    assert main(["verify", "--config", path]) == 2
    assert needle in capsys.readouterr().err


def test_experiment_config_overrides():
    cfg = ExperimentConfig.from_dict({"suite": "thm31", "seed": 3, "params": {"thm31": {"p": 2}}},
                                     seed=9, workers=4)
    assert cfg.suites == ["thm31"] and cfg.seed == 9
    assert cfg.suite_config("thm31") == {"p": 2, "seed": 9, "workers": 4}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"suites": ["thm31"], "seed": 1, "params": []})


def test_operator_command(tmp_path, capsys):
    cfg = _write(tmp_path, {"kind": "kober2", "params": {"zeta": 1.0, "alpha": 1.0}, "U": [[1.0]],
                            "f": {"density": "matrix_gamma", "p": 1, "shape": 1.0},
                            "n": 1000, "seed": 2, "method": "quadrature"})
    assert main(["operator", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["evaluation"]["value"] == pytest.approx(0.1484955067759, abs=1e-10)
    cfg = _write(tmp_path, {"kind": "kober1", "params": {"zeta": 1.5, "alpha": 2.0},
                            "U": [[1.0, 0.2], [0.2, 0.8]], "f": {"det_power": 0.5},
                            "n": 2000, "seed": 2})
    assert main(["operator", "--config", cfg]) == 0
    est = json.loads(capsys.readouterr().out)["evaluation"]["value"]
    assert est["n"] == 2000 and est["std_error"] > 0
    bad = _write(tmp_path, {"kind": "laplace", "U": [[1.0]], "f": {"det_power": 1}, "seed": 1})
    assert main(["operator", "--config", bad]) == 2


def test_density_and_sample_commands(tmp_path, capsys):
    cfg = _write(tmp_path, {"density": {"density": "matrix_gamma", "p": 1, "shape": 1.0},
                            "points": [[[1.0]]], "s": [2.0, 3.0]})
    assert main(["density", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["log_pdf"][0]["log_pdf"] == pytest.approx(-1.0)
    assert [m["value"] for m in out["m_transform"]] == pytest.approx([1.0, 2.0])
    cfg = _write(tmp_path, {"density": "type1_beta", "p": 2, "a": 2.0, "b": 1.5, "n": 4,
                            "seed": 3})
    assert main(["sample", "--config", cfg]) == 0
    first = capsys.readouterr().out
    assert len(_rows(first)) == 4
    main(["sample", "--config", cfg])
    assert capsys.readouterr().out == first
    assert main(["sample", "--config", _write(tmp_path, {"density": "type1_beta", "p": 1, "a": 2,
                                                         "b": 2})]) == 2


def test_pathway_study_commands(tmp_path, capsys):
    assert main(["pathway-study", "--config", _write(tmp_path, {"study": "lemma22",
                                                                "m_values": [1, 2, 3]})]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows[0]["q"]) == 0.5 and rows[0]["error_ratio"] == ""
    assert float(rows[2]["error_ratio"]) == pytest.approx(2.0, abs=0.4)
    assert main(["pathway-study", "--config", _write(tmp_path, {"study": "lemma21", "p": 2,
                                                                "one_minus_q": [1e-4]})]) == 0
    row = _rows(capsys.readouterr().out)[0]
    assert float(row["rel_error_stirling"]) < 0.01
    assert main(["pathway-study", "--config", _write(tmp_path, {"study": "fourier"})]) == 2


def test_report_needs_directory(tmp_path):
    assert main(["report", "--out", str(tmp_path / "missing")]) == 2


def test_domain_error_exit_code(tmp_path, capsys):
    cfg = {"f": {"density": "matrix_gamma", "p": 2, "shape": 3.0}, "kind": "kober2",
           "params": {"zeta": -3.0, "alpha": 2.0}, "U": [[1, 0], [0, 1]], "n": 2000, "seed": 7}
    assert main(["operator", "--config", _write(tmp_path, cfg)]) == 2
    assert "DomainError" in capsys.readouterr().err
