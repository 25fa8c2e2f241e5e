import csv
import io
import json

import numpy as np
import pytest

from curvedsys.cli import run
from curvedsys.schur import triple_from_json
from curvedsys.systems import Colligation


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_gen_colligation_is_unitary_and_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["gen-colligation", "--dim", "3", "--seed", "1", "--out", str(a)]) == 0
    assert run(["gen-colligation", "--dim", "3", "--seed", "1", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    A = Colligation.from_json(json.loads(a.read_text()))
    assert A.d == 3 and A.unitarity_residual() <= 1e-12


def test_ctot_check_table(capsys):
    assert run(["ctot-check", "--dim", "4", "--seed", "7", "--grid", "512", "--tol", "1e-7"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 40
    assert {r["check"] for r in rows} == {"ctot_inside", "ctot_outside"}
    assert all(r["pass"] == "1" for r in rows)


def test_recover_shift(tmp_path):
    shift, transfer, theta = tmp_path / "shift.json", tmp_path / "transfer.json", tmp_path / "theta.json"
    assert run(["gen-colligation", "--shift", "--out", str(shift)]) == 0
    assert run(["transfer-fn", "--input", str(shift), "--grid", "512", "--probes", "0", "--out", str(transfer)]) == 0
    assert run(["recover", "--input", str(transfer), "--grid", "512", "--out", str(theta)]) == 0
    th = triple_from_json(json.loads(theta.read_text()))
    assert np.max(np.abs(th.theta_plus.values[:, 0, 0] - th.grid.nodes)) <= 1e-5


def test_json_format(capsys):
    assert run(["dual-check", "--dim", "2", "--seed", "3", "--grid", "256", "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert {r["check"] for r in rows} >= {"system_involution", "triple_involution", "dual_spectrum"}


def test_model_and_perturb_checks(tmp_path, capsys):
    model = tmp_path / "model.json"
    assert run(["model-check", "--dim", "2", "--seed", "2", "--grid", "256", "--out-model", str(model)]) == 0
    capsys.readouterr()
    kappa = tmp_path / "kappa.json"
    kappa.write_text(json.dumps({"kappa": [[[0.3, 0.2]]]}))
    assert run(["perturb-check", "--model", str(model), "--kappa", str(kappa), "--probes", "6"]) == 0
    rows = _rows(capsys.readouterr().out)
    checks = {r["check"] for r in rows}
    assert {"resolvent_vs_matrix", "zero_coupling_collapse", "duality_angle"} <= checks


def test_faber_check(capsys):
    assert run(["faber-check", "--dim", "2", "--seed", "4", "--grid", "512"]) == 0
    checks = {r["check"] for r in _rows(capsys.readouterr().out)}
    assert {"cfn_tfn", "mod_cfn", "mod_sys"} <= checks


def test_residual_failure_exit_status(capsys):
    assert run(["ctot-check", "--dim", "2", "--seed", "1", "--probes", "2", "--tol", "0"]) == 1
    assert "exceeds" in capsys.readouterr().err


def test_parse_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run(["ctot-check", "--no-such-flag"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run(["unknown-verb"])
    assert exc.value.code == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(["recover", "--input", str(bad)]) == 2
    bad.write_text(json.dumps({"kind": "colligation", "T": [[[0, 0]]]}))
    assert run(["char-fn", "--input", str(bad)]) == 2
    assert run(["recover"]) == 2


def test_kappa_shape_is_validated(tmp_path):
    kappa = tmp_path / "kappa.json"
    kappa.write_text(json.dumps([[[0.1, 0]], [[0.2, 0]]]))
    assert run(["perturb-check", "--dim", "2", "--grid", "256", "--kappa", str(kappa)]) == 2


def test_thread_cap_does_not_change_output(monkeypatch, capsys):
    outputs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("SMK_THREADS", threads)
        assert run(["ctot-check", "--dim", "3", "--seed", "5", "--probes", "6"]) == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1]
    monkeypatch.setenv("SMK_THREADS", "many")
    assert run(["ctot-check", "--dim", "1", "--probes", "2"]) == 2
