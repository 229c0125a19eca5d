import json
import subprocess
import sys

import numpy as np
import pytest

from ballistic_lab.cli import main
from ballistic_lab.config import DEFAULTS, load_config, parse_tolerance
from ballistic_lab.exceptions import ValidationError
from ballistic_lab.io import read_csv, write_csv, write_json

DIMER = {"q": 2, "a": [1.0, 1.0], "b": [1.0, -1.0]}


def write_config(path, **doc):
    path.write_text(json.dumps(doc))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().err


def test_bands_free(tmp_path, capsys):
    code, err = run(["bands", "--out", str(tmp_path)], capsys)
    assert code == 0 and err == ""
    header, rows = read_csv(tmp_path / "bands.csv")
    assert header == ["alpha", "beta", "x"]
    assert len(rows) == 1
    assert float(rows[0][0]) == pytest.approx(-2) and float(rows[0][1]) == pytest.approx(2)
    assert rows[0][2] == ""
    report = json.loads((tmp_path / "bands.json").read_text())
    assert report["config"]["operator"] == DEFAULTS["operator"]
    assert report["measure"] == pytest.approx(4)


def test_bands_dimer(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", operator=DIMER)
    assert run(["bands", "--config", cfg, "--out", str(tmp_path)], capsys)[0] == 0
    _, rows = read_csv(tmp_path / "bands.csv")
    assert len(rows) == 2
    r5 = np.sqrt(5)
    np.testing.assert_allclose(
        [[float(v) for v in r[:2]] for r in rows], [[-r5, -1], [1, r5]], atol=1e-12
    )
    assert float(rows[0][2]) == pytest.approx(0.0, abs=1e-9)
    header, dos = read_csv(tmp_path / "dos.csv")
    assert header == ["E", "density", "ids"]
    ids = np.array([float(r[2]) for r in dos])
    assert ids[0] == 0 and ids[-1] == 1 and np.all(np.diff(ids) >= -1e-12)


def test_operator_path(tmp_path, capsys):
    (tmp_path / "op.json").write_text(json.dumps(DIMER))
    cfg = write_config(tmp_path / "c.json", operator="op.json")
    assert run(["bands", "--config", cfg, "--out", str(tmp_path / "o")], capsys)[0] == 0
    assert len(read_csv(tmp_path / "o" / "bands.csv")[1]) == 2


def test_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "operator": {"q": 1,,}\n}')
    code, err = run(["bands", "--config", str(bad)], capsys)
    assert code == 2
    assert err.startswith("error: category=validation message=")
    assert "line 2 column" in err
    assert err.count("\n") == 1


@pytest.mark.parametrize(
    "doc",
    [
        {"operator": {"q": 2, "a": [1.0], "b": [0.0, 0.0]}},
        {"operator": {"q": 1, "a": [-1.0], "b": [0.0]}},
        {"params": {"no_such_key": 1}},
        {"tolerances": {"boundary_tol": -1}},
        {"seed": -3},
        {"surprise": True},
    ],
)
def test_invalid_configs(tmp_path, capsys, doc):
    cfg = write_config(tmp_path / "c.json", **doc)
    code, err = run(["bands", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 2 and "category=validation" in err


def test_missing_config(tmp_path, capsys):
    assert run(["bands", "--config", str(tmp_path / "nope.json")], capsys)[0] == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "c.json", operator=DIMER, params={"horizon": 20, "n_times": 11}
    )
    code, err = run(
        ["transport", "--config", cfg, "--out", str(tmp_path), "--tolerance", "boundary_tol=1e-300"],
        capsys,
    )
    assert code == 3 and "category=numerical" in err


def test_tolerance_override_echo(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", operator=DIMER, params={"k_max": 5})
    argv = ["converge", "--config", cfg, "--out", str(tmp_path), "--tolerance", "curve_floor=1e-9"]
    assert run(argv, capsys)[0] == 0
    rep = json.loads((tmp_path / "convergence.json").read_text())
    assert rep["config"]["tolerances"]["curve_floor"] == 1e-9
    assert rep["gap_open"] == [True]
    assert run(argv[:-1] + ["no_such_tol=1"], capsys)[0] == 2
    assert run(argv[:-1] + ["curve_floor=abc"], capsys)[0] == 2


def test_parse_tolerance():
    assert parse_tolerance("boundary_tol=1e-8") == ("boundary_tol", 1e-8)
    with pytest.raises(ValidationError):
        parse_tolerance("boundary_tol")


def test_seed_override():
    assert load_config("bands", seed=7).seed == 7
    assert load_config("bands").seed == 0


def test_transport_outputs(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "c.json", operator=DIMER, params={"horizon": 100, "n_times": 21}
    )
    assert run(["transport", "--config", cfg, "--out", str(tmp_path)], capsys)[0] == 0
    header, rows = read_csv(tmp_path / "moments.csv")
    assert header == ["t", "p", "moment_p", "norm_X_t_over_t"]
    assert len(rows) == 2 * 22
    assert rows[0][3] == ""  # |X(t)|/t is undefined at t = 0
    rep = json.loads((tmp_path / "transport.json").read_text())
    assert len(rep["reports"]) == 2


def test_random_packet_seeded(tmp_path, capsys):
    doc = dict(operator=DIMER, params={"horizon": 100, "n_times": 9, "packet": {"random": 3}})
    cfg = write_config(tmp_path / "c.json", **doc)
    outs = []
    for seed in ("1", "1", "2"):
        d = tmp_path / f"o{len(outs)}"
        assert run(["transport", "--config", cfg, "--out", str(d), "--seed", seed], capsys)[0] == 0
        outs.append((d / "moments.csv").read_bytes())
    assert outs[0] == outs[1] != outs[2]


def test_spectral_outputs(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "c.json",
        operator=DIMER,
        params={"dirichlet_n": 200, "lyapunov_points": 41, "homogeneity_points": 5},
    )
    assert run(["spectral", "--config", cfg, "--out", str(tmp_path)], capsys)[0] == 0
    header, rows = read_csv(tmp_path / "homogeneity.csv")
    assert header == ["stage", "q", "delta", "min_ratio"] and len(rows) == 5
    rep = json.loads((tmp_path / "spectral.json").read_text())
    assert rep["lyapunov_vanishing_fraction"] == 1.0


def test_spectral_delta_min_check(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", params={"delta_min": 10.0})
    assert run(["spectral", "--config", cfg, "--out", str(tmp_path)], capsys)[0] == 2


def test_xy_outputs(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "c.json",
        operator={"q": 1, "a": [0.5], "b": [0.0]},
        params={"horizon": 40, "n_times": 8, "many_body_length": 4},
    )
    assert run(["xy", "--config", cfg, "--out", str(tmp_path)], capsys)[0] == 0
    header, rows = read_csv(tmp_path / "light_cone.csv")
    assert header == ["t", "d_epsilon", "commutator_norm_samples"] and len(rows) == 8
    rep = json.loads((tmp_path / "velocity.json").read_text())
    assert set(rep) >= {"v_hat", "q_ceiling", "margin", "config"}


def test_determinism_and_threads(tmp_path, capsys, monkeypatch):
    cfg = write_config(tmp_path / "c.json", operator=DIMER, params={"k_max": 6})
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run(["converge", "--config", cfg, "--out", str(a)], capsys)[0] == 0
    assert run(["converge", "--config", cfg, "--out", str(b), "--threads", "1"], capsys)[0] == 0
    monkeypatch.setenv("BALLISTIC_LAB_THREADS", "1")
    assert run(["converge", "--config", cfg, "--out", str(c)], capsys)[0] == 0
    ref = (a / "convergence.csv").read_bytes()
    assert ref == (b / "convergence.csv").read_bytes() == (c / "convergence.csv").read_bytes()
    monkeypatch.setenv("BALLISTIC_LAB_THREADS", "many")
    assert run(["converge", "--config", cfg, "--out", str(c)], capsys)[0] == 2
    assert run(["converge", "--config", cfg, "--out", str(c), "--threads", "0"], capsys)[0] == 2


def test_io_round_trip(tmp_path):
    p = write_csv(tmp_path / "x.csv", ["a", "b"], [(0.1, None), (np.float64(1 / 3), 2)])
    assert read_csv(p) == (["a", "b"], [["0.1", ""], [repr(1 / 3), "2"]])
    q = write_json(tmp_path / "x.json", {"b": np.inf, "a": np.nan, "c": np.arange(2)})
    assert json.loads(q.read_text()) == {"a": None, "b": "inf", "c": [0, 1]}


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "ballistic_lab", "--version"], capture_output=True, text=True
    )
    assert res.returncode == 0 and "ballistic-lab" in res.stdout
