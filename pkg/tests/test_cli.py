import json
import subprocess
import sys
from pathlib import Path

import pytest

from cartomdp.catalog import retry_mdp
from cartomdp.cli import EXIT_ASSUMPTION, EXIT_INPUT, EXIT_OK, EXIT_RESOURCE, main
from cartomdp.model import WeightedMdp, serialize_mdp

MODELS = Path(__file__).resolve().parent.parent / "models"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def retry_file(tmp_path):
    path = tmp_path / "retry.json"
    path.write_text(serialize_mdp(retry_mdp()))
    return str(path)


def test_shipped_models_validate(capsys):
    for path in sorted(MODELS.glob("*.json")):
        code, out, _ = run(capsys, "validate", str(path))
        assert code == EXIT_OK and out.startswith("ok:")


def test_carto_upper_column(capsys, retry_file):
    code, out, err = run(capsys, "carto", retry_file, "--nu1", "1", "--nu2", "2.1", "--nmax", "8", "--alpha", "1e-4")
    assert code == EXIT_OK
    rows = out.splitlines()
    assert rows[0] == "N,lower,upper,alpha,gap_bound"
    for N, row in enumerate(rows[1:], start=1):
        fields = row.split(",")
        assert fields[1] == "0" and fields[2] == f"1/{2**N}"
    assert "bracket" in err


def test_carto_artifacts_are_reproducible(capsys, retry_file, tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        code, _, _ = run(capsys, "carto", retry_file, "--nmax", "3", "--epsilon", "3/10", "--out", str(d))
        assert code == EXIT_OK
        outs.append([(d / f).read_bytes() for f in ("cartography.csv", "cartography.svg", "verdicts.json")])
    assert outs[0] == outs[1]
    verdicts = json.loads(outs[0][2])
    assert verdicts[0]["verdict"] == "solution" and verdicts[0]["strategy"]["kind"] == "composite"


def test_p0_no(capsys, retry_file):
    code, out, _ = run(capsys, "p0", retry_file, "--nu1", "1", "--nu2", "2.1")
    assert code == EXIT_OK
    assert out.splitlines()[0] == "No"
    assert "product_states: 4" in out


def test_evgen_pipeline():
    gen = subprocess.run(
        [sys.executable, "-m", "cartomdp.cli", "evgen", "--T", "4", "--levels", "3", "--seed", "7"],
        capture_output=True,
        text=True,
        check=True,
    )
    runs = [
        subprocess.run(
            [sys.executable, "-m", "cartomdp.cli", "p0", "-", "--nu2", "5"],
            input=gen.stdout,
            capture_output=True,
            text=True,
        )
        for _ in range(2)
    ]
    assert runs[0].returncode == 0 and runs[0].stdout == runs[1].stdout
    assert runs[0].stdout.splitlines()[:2] == ["Yes", "value: 21/10"]


def test_p0_witness_file(capsys, tmp_path):
    model = tmp_path / "ev.json"
    assert main(["evgen", "--T", "3", "--levels", "2", "--seed", "2", "--out", str(model)]) == EXIT_OK
    out = tmp_path / "witness.json"
    code, stdout, _ = run(capsys, "p0", str(model), "--nu2", "10", "--out", str(out))
    assert code == EXIT_OK and stdout.startswith("Yes")
    doc = json.loads(out.read_text())
    assert doc["kind"] == "counter-product" and doc["first"]


def test_ssp_and_assumptions(capsys, retry_file):
    code, out, _ = run(capsys, "ssp", retry_file)
    assert code == EXIT_OK and json.loads(out) == {"s0": "1", "s1": "0", "Goal": "0"}
    code, out, _ = run(capsys, "assumptions", retry_file)
    doc = json.loads(out)
    assert doc["w2"]["all_positive"] and doc["kappa"] == "21/10"
    assert doc["completeness"]["kind"] == "positive-w2"


def test_exit_codes(capsys, tmp_path, retry_file):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    code, _, err = run(capsys, "validate", str(bad))
    assert code == EXIT_INPUT and "1:" in err
    with pytest.raises(SystemExit) as info:
        main(["carto", retry_file, "--nu1", "abc"])
    assert info.value.code == EXIT_INPUT
    mixed = WeightedMdp.build(
        ["a", "b", "Goal"],
        "a",
        "Goal",
        [
            ("a", "x", {"b": 1}, (1, 0)),
            ("b", "y", {"a": 1}, (1, 0)),
            ("a", "z", {"a": 1}, (-1, 0)),
            ("a", "g", {"Goal": 1}, (0, 0)),
        ],
    )
    path = tmp_path / "mixed.json"
    path.write_text(serialize_mdp(mixed))
    code, _, _ = run(capsys, "p0", str(path), "--nu1", "0", "--nu2", "1")
    assert code == EXIT_ASSUMPTION
    code, _, _ = run(capsys, "p0", retry_file, "--budget-nodes", "2")
    assert code == EXIT_RESOURCE
    code, _, err = run(capsys, "p0", str(tmp_path / "missing.json"))
    assert code == EXIT_INPUT
