import csv
import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from heatcube import __version__
from heatcube.cli import RECORD_COLUMNS, replay_argv, run
from heatcube.experiments import REPORT_CSV_COLUMNS


def invoke(*argv):
    out = io.StringIO()
    code = run(list(argv), stdout=out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def schema():
    text = resources.files("heatcube").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


@pytest.fixture
def maj3(tmp_path):
    terms = [{"exponents": e, "coeff": 1.0} for e in ([1, 0, 0], [0, 1, 0], [0, 0, 1])]
    path = tmp_path / "maj3.json"
    path.write_text(json.dumps(terms))
    return str(path)


@pytest.fixture
def x1(tmp_path):
    path = tmp_path / "x1.json"
    path.write_text(json.dumps([{"exponents": [1, 0, 0, 0, 0, 0], "coeff": 1.0}]))
    return str(path)


def table_rows(text: str) -> list[list[str]]:
    return list(csv.reader(line for line in text.splitlines() if not line.startswith("#")))


def test_ns_exact_maj3(maj3, schema):
    code, out = invoke("ns-exact", "--n", "3", "--eps", "0.1", "--poly", maj3)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    assert doc["records"][0]["ns"] == pytest.approx(0.136, abs=1e-12)
    assert doc["header"]["version"] == __version__


def test_as_exact_and_sweep_lists(maj3):
    code, out = invoke("as-exact", "--poly", maj3, "--format", "csv")
    assert code == 0
    rows = table_rows(out)
    assert tuple(rows[0]) == RECORD_COLUMNS["as-exact"]
    assert float(rows[1][2]) == pytest.approx(1.5)
    code, out = invoke("ns-exact", "--poly", maj3, "--eps", "0.05,0.1,0.25", "--format", "csv")
    assert len(table_rows(out)) == 4


def test_verify_appendix_example(schema):
    code, out = invoke("verify-appendix", "--n", "4", "--ell", "1", "--k", "0001", "--rotations", "10000", "--seed", "7")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    assert doc["reports"][0]["pass"] is True


def test_gl_sweep_example():
    code, out = invoke(
        "gl-sweep", "--d", "1,2,3", "--n", "6,8", "--eps", "0.02,0.05,0.1", "--seed", "1", "--format", "csv"
    )
    rows = table_rows(out)
    assert tuple(rows[0]) == REPORT_CSV_COLUMNS
    assert len(rows) == 1 + 6 * (3 + 1 + 2)
    assert all(r[1] == "true" for r in rows[1:])
    assert code == 0


def test_output_is_byte_identical():
    args = ("ss", "--n", "5", "--d", "2", "--t", "0.01,0.02", "--trials", "2000", "--seed", "3")
    assert invoke(*args) == invoke(*args)
    args = ("heat-sample", "--n", "4", "--t", "0.02", "--samples", "2000", "--format", "csv")
    assert invoke(*args) == invoke(*args)


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("HEATCUBE_SEED", "123")
    _, out = invoke("rotate", "--n", "3", "--d", "1")
    assert json.loads(out)["header"]["seed"] == 123
    _, out2 = invoke("rotate", "--n", "3", "--d", "1", "--seed", "123")
    assert out == out2


def test_malformed_polynomial_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('[{"exponents": [1, 0], "coeff": 1},\n{"exponents": [1], "coeff": 2}]')
    code, out = invoke("ns-exact", "--poly", str(bad), "--eps", "0.1")
    assert code == 2 and out == ""
    assert "term 1: field 'exponents'" in capsys.readouterr().err
    bad.write_text('[{"exponents": [1, 0], "coeff": 1},\n{"exponents": [1 0]}]')
    code, _ = invoke("ns-exact", "--poly", str(bad), "--eps", "0.1")
    assert code == 2
    assert "line 2" in capsys.readouterr().err
    code, _ = invoke("ns-exact", "--poly", str(tmp_path / "missing.json"), "--eps", "0.1")
    assert code == 2


def test_out_of_range_parameters(capsys, maj3):
    code, _ = invoke("ns-exact", "--poly", maj3, "--eps", "0.7")
    assert code == 2
    assert "0 <= eps <= 1/2" in capsys.readouterr().err
    code, _ = invoke("verify-appendix", "--n", "20", "--ell", "1", "--k", "1")
    assert code == 2
    assert "3 <= n <= 12" in capsys.readouterr().err
    code, _ = invoke("verify-appendix", "--n", "4", "--ell", "1", "--k", "01")
    assert code == 2
    code, _ = invoke("ns-exact", "--eps", "0.1")
    assert code == 2
    code, _ = invoke("ns-exact", "--eps", "a,b", "--n", "3", "--d", "1")
    assert code == 2
    code, _ = invoke("no-such-command")
    assert code == 2


def test_failed_report_exit_code(x1, schema):
    code, out = invoke("verify-transfer", "--poly", x1, "--eps", "0.1", "--rotations", "50")
    assert code == 1
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    rep = doc["reports"][0]
    assert rep["pass"] is False
    assert rep["params"]["seed"] == doc["header"]["seed"]


def test_transfer_sign_mode_and_as(x1):
    code, _ = invoke("verify-transfer", "--poly", x1, "--eps", "0.05,0.1", "--mode", "sign", "--rotations", "50", "--ss-trials", "4000")
    assert code == 0
    code, _ = invoke("verify-transfer-as", "--poly", x1, "--alpha", "0.5,1,2", "--rotations", "50")
    assert code == 0


def test_roots_and_rotate(schema):
    code, out = invoke("roots", "--n", "5", "--d", "3", "--trials", "200")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    assert all(r["roots"] <= 6 for r in doc["records"])
    code, out = invoke("rotate", "--n", "4", "--d", "2", "--format", "csv")
    rows = table_rows(out)
    assert tuple(rows[0]) == RECORD_COLUMNS["rotate"]
    assert json.loads(rows[1][0])


def test_heat_sample_dump(tmp_path, schema):
    dump = tmp_path / "r.csv"
    code, out = invoke("heat-sample", "--n", "4", "--t", "0.01,0.02", "--samples", "1000", "--dump", str(dump))
    assert code == 0
    jsonschema.validate(json.loads(out), schema)
    rows = list(csv.reader(dump.open()))
    assert rows[0] == ["method", "n", "t", "index", "r"]
    assert len(rows) == 1 + 2000


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "heatcube.cli", "ns-exact", "--n", "4", "--d", "1", "--eps", "0.1", "--format", "csv"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith(f"# heatcube {__version__}")


def test_replay_from_header(x1):
    for args in [
        ("verify-transfer", "--poly", x1, "--eps", "0.02,0.1", "--rotations", "50", "--seed", "9"),
        ("gl-sweep", "--d", "2", "--n", "6", "--eps", "0.05", "--rotations", "60", "--ss-trials", "2000", "--format", "csv"),
    ]:
        code, out = invoke(*args)
        if out.startswith("#"):
            header = json.loads(out.splitlines()[1][len("# header: "):])
        else:
            header = json.loads(out)["header"]
        assert invoke(*replay_argv(header)) == (code, out)
