import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from derham_ns import cases, cli, spaces
from derham_ns.errors import ConfigError, FieldFileError
from derham_ns.io import FieldFile, fmt, load_config, parse_config, read_csv, write_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

GAUSS = {
    "problem": {"n": 2, "q": 1, "a": 0, "mu": 0.5, "T": 0.2, "nt": 6,
                "nonlinearity": {"name": "ps", "b": 0.5},
                "data": {"u0": {"kind": "gaussian", "sigma": 0.5, "amplitude": 0.5, "component": 1}}},
    "grid": {"N": 24, "L": 8.0},
    "norms": {"s": 0, "lambda": 0.5, "delta": 1.0},
    "solver": {"tol": 1e-10},
}


def write_cfg(path, doc):
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def manifest(out):
    return json.loads((Path(out) / "manifest.json").read_text())


def test_config_errors_name_line_and_field():
    text = '{\n  "problem": {"n": 2, "q": 1, "a": 2, "mu": 1.0, "T": 1.0, "nt": 3}\n}'
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "c.json")
    assert "line 2" in str(exc.value) and "problem.a" in str(exc.value)
    with pytest.raises(ConfigError, match="c.json:2"):
        parse_config('{"problem":\n ,}', "c.json")
    with pytest.raises(ConfigError, match="extra|permitted"):
        parse_config(json.dumps({**GAUSS, "bogus": 1}))
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.json")


def test_config_roundtrip():
    cfg = parse_config(json.dumps(GAUSS))
    assert cfg.norms.lam == 0.5
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert json.loads(cfg.to_json())["norms"]["lambda"] == 0.5


def test_field_file_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((3, 3, 6, 6, 6))
    ff = FieldFile(3, 2, 6, 1.5, 0.25, data)
    ff.write(tmp_path / "f.drns")
    back = FieldFile.read(tmp_path / "f.drns")
    assert (back.n, back.q, back.N, back.L, back.T) == (3, 2, 6, 1.5, 0.25)
    assert back.data.tobytes() == data.tobytes()


def test_field_file_layout_x1_fastest():
    data = np.zeros((1, 1, 4, 4))
    data[0, 0, 1, 0] = 1.0  # x1 index 1, x2 index 0
    raw = FieldFile(2, 0, 4, 1.0, 0.0, data).payload()
    payload = np.frombuffer(raw[-16 * 8:], dtype="<f8")
    assert payload[1] == 1.0 and payload.sum() == 1.0


def test_field_file_rejects_bad_headers(tmp_path):
    raw = bytearray(FieldFile(2, 0, 4, 1.0, 0.0, np.zeros((1, 1, 4, 4))).payload())
    bad = bytes(b"XXXX" + raw[4:])
    with pytest.raises(FieldFileError, match="magic"):
        FieldFile.from_bytes(bad)
    wrong = bytearray(raw)
    wrong[4:8] = (7).to_bytes(4, "little")
    with pytest.raises(FieldFileError, match="version"):
        FieldFile.from_bytes(bytes(wrong))
    with pytest.raises(FieldFileError):
        FieldFile.from_bytes(bytes(raw[:-8]))
    with pytest.raises(FieldFileError):
        FieldFile.read(tmp_path / "missing.drns")


def test_csv_uses_round_trip_precision(tmp_path):
    x = 0.1 + 0.2
    assert fmt(x) == "0.30000000000000004" and float(fmt(x)) == x
    assert fmt(None) == "" and fmt(True) == "true"
    write_csv(tmp_path / "t.csv", ["a", "b"], [[1, x]])
    assert read_csv(tmp_path / "t.csv") == [{"a": "1", "b": "0.30000000000000004"}]


def test_cli_zero_problem(tmp_path):
    out = tmp_path / "zero"
    assert cli.main(["solve", "--config", str(CONFIGS / "zero.json"), "--out", str(out)]) == 0
    m = manifest(out)
    assert m["status"] == "Converged" and m["iterations"] == 1
    u = FieldFile.read(out / "u.drns")
    assert u.nt == 6 and np.all(u.data == 0)
    assert (out / "p.drns").exists() and (out / "diagnostics.csv").exists()


def test_cli_taylor_green(tmp_path):
    out = tmp_path / "tg"
    assert cli.main(["solve", "--config", str(CONFIGS / "taylor_green.json"), "--out", str(out)]) == 0
    m = manifest(out)
    assert m["reference_error_u"] <= 1e-6 and m["reference_error_p"] <= 1e-5


@pytest.mark.slow
def test_cli_blowup(tmp_path):
    out = tmp_path / "bu"
    assert cli.main(["solve", "--config", str(CONFIGS / "blowup_n5.json"), "--out", str(out)]) == 3
    m = manifest(out)
    assert m["status"] == "BlowUpSuspected" and 0 < m["t_star"] <= 0.05
    assert not (out / "u.drns").exists()


def test_cli_radial_n3(tmp_path):
    out = tmp_path / "r3"
    assert cli.main(["radial", "--config", str(CONFIGS / "radial_n3.json"), "--out", str(out)]) == 0
    rows = read_csv(out / "radial_sweep.csv")
    assert [r["status"] for r in rows] == ["Completed"] * 3
    prof = read_csv(out / "radial_profiles.csv")
    assert {float(r["t"]) for r in prof} >= {0.0, 0.5}


@pytest.mark.slow
def test_cli_radial_n5_sweep(tmp_path):
    out = tmp_path / "r5"
    assert cli.main(["radial", "--config", str(CONFIGS / "radial_n5.json"), "--out", str(out)]) == 3
    rows = read_csv(out / "radial_sweep.csv")
    ts = [float(r["t_star"]) for r in rows]
    assert all(r["status"] == "BlowUp" for r in rows)
    assert all(b <= a for a, b in zip(ts, ts[1:]))


def test_cli_selfsim_gamma_zero(tmp_path):
    doc = {"problem": {"n": 5, "q": 1, "a": 0, "mu": 1.0, "T": 1.0, "nt": 2},
           "radial": {"gamma": 0.0, "y_max": 10.0}}
    out = tmp_path / "ss"
    assert cli.main(["selfsim", "--config", write_cfg(tmp_path / "c.json", doc), "--out", str(out)]) == 0
    rows = read_csv(out / "profile.csv")
    assert len(rows) == 201
    assert all(float(r["w"]) == 0 and float(r["dw"]) == 0 for r in rows)


def test_cli_norms_zero_and_gaussian(tmp_path):
    doc = {"problem": {"n": 2, "q": 0, "a": 0, "mu": 1.0, "T": 1.0, "nt": 2},
           "norms": {"s": 1, "lambda": 0.5, "delta": 1.0, "lambda_prime": 0.75}}
    cfg = write_cfg(tmp_path / "c.json", doc)
    FieldFile(2, 0, 16, 5.0, 1.0, np.zeros((4, 1, 16, 16))).write(tmp_path / "z.drns")
    assert cli.main(["norms", "--config", cfg, "--field", str(tmp_path / "z.drns"), "--out", str(tmp_path / "z")]) == 0
    rows = read_csv(tmp_path / "z" / "norms.csv")
    assert rows and all(float(r["value"]) == 0 for r in rows)

    g = cases.gaussian(2, 0, 40, 8.0, sigma=0.7)
    FieldFile(2, 0, 40, 8.0, 1.0, np.stack([g.data, 0.5 * g.data, 0.25 * g.data, 0.125 * g.data])
              ).write(tmp_path / "g.drns")
    assert cli.main(["norms", "--config", cfg, "--field", str(tmp_path / "g.drns"), "--out", str(tmp_path / "g")]) == 0
    rows = read_csv(tmp_path / "g" / "norms.csv")
    want = spaces.hoelder_norm(g, spaces.NormParams(1, 0.5, 1.0, 0.75)).to_dict()
    got = {r["term"]: float(r["value"]) for r in rows if r["scope"] == "slice" and r["slice"] == "0"}
    assert got == pytest.approx(want, rel=1e-14)
    scopes = {r["scope"] for r in rows}
    assert {"aniso", "F"} <= scopes
    f_terms = {r["term"]: float(r["value"]) for r in rows if r["scope"] == "F"}
    assert f_terms["total"] == pytest.approx(sum(v for k, v in f_terms.items() if k != "total"))


def test_cli_norms_needs_field(tmp_path):
    doc = {"problem": {"n": 2, "q": 0, "a": 0, "mu": 1.0, "T": 1.0, "nt": 2},
           "norms": {"s": 0, "lambda": 0.5, "delta": 0.0}}
    assert cli.main(["norms", "--config", write_cfg(tmp_path / "c.json", doc), "--out", str(tmp_path)]) == 1


def test_cli_usage_errors(tmp_path):
    assert cli.main(["solve"]) == 1
    assert cli.main(["bogus"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["solve", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_cli_rerun_from_manifest_reproduces_diagnostics(tmp_path):
    out1, out2 = tmp_path / "one", tmp_path / "two"
    assert cli.main(["solve", "--config", write_cfg(tmp_path / "c.json", GAUSS), "--out", str(out1)]) == 0
    cfg2 = write_cfg(tmp_path / "again.json", manifest(out1)["config"])
    assert cli.main(["solve", "--config", cfg2, "--out", str(out2)]) == 0
    assert (out1 / "diagnostics.csv").read_bytes() == (out2 / "diagnostics.csv").read_bytes()
    assert (out1 / "u.drns").read_bytes() == (out2 / "u.drns").read_bytes()


def test_cli_file_initial_data(tmp_path):
    u0 = cases.gaussian(2, 1, 24, 8.0, sigma=0.5, amplitude=0.5, component=1)
    FieldFile(2, 1, 24, 8.0, 0.0, u0.data[None]).write(tmp_path / "u0.drns")
    doc = json.loads(json.dumps(GAUSS))
    doc["problem"]["data"]["u0"] = {"kind": "file", "path": str(tmp_path / "u0.drns")}
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["solve", "--config", write_cfg(tmp_path / "f.json", doc), "--out", str(a)]) == 0
    assert cli.main(["solve", "--config", write_cfg(tmp_path / "g.json", GAUSS), "--out", str(b)]) == 0
    assert np.array_equal(FieldFile.read(a / "u.drns").data, FieldFile.read(b / "u.drns").data)


@pytest.mark.slow
def test_cli_verify(tmp_path, capsys):
    assert cli.main(["verify", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "verify.csv")
    assert rows and all(r["passed"] == "true" for r in rows)
    assert "checks passed" in capsys.readouterr().out


def test_module_entry_point():
    import runpy
    import sys

    argv = sys.argv
    sys.argv = ["derham-ns", "solve"]
    try:
        with pytest.raises(SystemExit) as exc:
            runpy.run_module("derham_ns", run_name="__main__")
    finally:
        sys.argv = argv
    assert exc.value.code == 1
