import json
import subprocess
import sys

import numpy as np
import pytest

from afhom.cli import load_config, main, resolve_config, run, selfcheck, threads_from
from afhom.errors import ConfigError
from afhom.fields import read_afh1
from afhom.operator import projector

LAMINATE = {"kind": "laminate", "a_lo": 1.0, "a_hi": 4.0}


def cfg(task, params, integrand=LAMINATE, **extra):
    out = {"task": task, "operator": {"name": "div", "N": 2}, "params": params, "seed": 0}
    if integrand is not None:
        out["integrand"] = integrand
    out.update(extra)
    return out


def summary(path):
    return json.loads((path / "summary.json").read_text())


def test_cell_ppower_example(tmp_path):
    c = cfg("cell", {"xi": [3.0, 4.0], "n": 16, "kind": "periodic"}, {"kind": "ppower", "p": 2})
    assert run(c, out=tmp_path, threads=1) == 0
    assert summary(tmp_path)["result"]["normalized"] == pytest.approx(25.0, rel=1e-12)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "ok" and "summary.json" in man["files"]
    assert man["resolved_solver"]["max_iters"] == 3000


def test_cell_all_kinds_and_dumps(tmp_path):
    c = cfg("cell", {"xi": [0.0, 1.0], "n": 16, "dump_fields": True})
    assert run(c, out=tmp_path, threads=1) == 0
    res = summary(tmp_path)["result"]
    assert res["periodic"]["normalized"] <= res["compact"]["normalized"] + 1e-6
    assert res["relaxed"]["residuals"]["eta_usage"] < 1
    u = read_afh1(tmp_path / "compact_minimizer.afh1")
    assert u.grid.n == 16 and u.components == 2
    assert (tmp_path / "periodic_minimizer.csv").exists()


def test_summary_is_byte_identical(tmp_path):
    c = cfg("homog", {"xi": [0.0, 1.0], "radii": [1, 2], "density": 4})
    assert run(c, out=tmp_path / "a", threads=1) == 0
    assert run(c, out=tmp_path / "b", threads=2) == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    rows = (tmp_path / "a" / "homog.csv").read_text().splitlines()
    assert rows[0] == "xi0,xi1,k,center0,center1,r,normalized_value"
    assert len(rows) == 1 + 3 * 2


@pytest.mark.parametrize("bad,match", [
    ({"bogus": 1}, "unknown key"),
    ({"params": {"xi": [1, 0], "nn": 3}}, "unknown key"),
    ({"params": {}}, "required"),
    ({"params": {"xi": [1, 0], "n": 12}}, "power of two"),
    ({"params": {"xi": [1, 0], "n": "big"}}, "integer"),
    ({"solver": {"max_itr": 3}}, "solver"),
    ({"solver": {"seed": 3}}, "top-level seed"),
    ({"seed": -1}, "seed"),
    ({"task": "fly"}, "unknown task"),
])
def test_invalid_configs_exit_2(tmp_path, capsys, bad, match):
    c = cfg("cell", {"xi": [1.0, 0.0], "n": 8})
    c.update(bad)
    assert run(c, out=tmp_path, threads=1) == 2
    assert match in capsys.readouterr().err


def test_missing_integrand_rejected():
    with pytest.raises(ConfigError, match="integrand"):
        resolve_config(cfg("cell", {"xi": [1.0, 0.0]}, integrand=None))
    # projection needs no integrand
    assert resolve_config(cfg("project", {}, integrand=None))["integrand"] is None


def test_task_mismatch_rejected():
    with pytest.raises(ConfigError, match="subcommand"):
        resolve_config(cfg("cell", {"xi": [1.0, 0.0]}), task="homog")


def test_malformed_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed JSON"):
        load_config(p)
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_threads_resolution(monkeypatch):
    monkeypatch.setenv("AFH_THREADS", "3")
    assert threads_from(None) == 3
    assert threads_from(2) == 2
    monkeypatch.setenv("AFH_THREADS", "x")
    with pytest.raises(ConfigError):
        threads_from(None)


def test_project_task(tmp_path):
    c = cfg("project", {"n": 8, "radius": 4, "dump_fields": True}, integrand=None,
            operator="curl3d")
    assert run(c, out=tmp_path, threads=1) == 0
    res = summary(tmp_path)["result"]
    assert res["rank"] == 2 and res["passed"]
    assert (tmp_path / "projected.afh1").exists()


def test_project_task_flags_rank_drop(tmp_path):
    op = {"N": 2, "d": 1, "l": 1, "matrices": [[[1.0]], [[0.0]]]}
    c = cfg("project", {"n": 8, "radius": 2}, integrand=None, operator=op)
    assert run(c, out=tmp_path, threads=1) == 2
    res = summary(tmp_path)["result"]["constant_rank"]
    assert not res["passed"] and len(res["witnesses"]) == 2


def test_validate_task(tmp_path):
    assert run(cfg("validate", {"samples": 200}), out=tmp_path / "ok", threads=1) == 0
    bad = {"kind": "custom-table", "radii": [0, 1, 1, 2], "values": [0, 1, 3, 4], "c0": 10, "c1": 1}
    assert run(cfg("validate", {"samples": 200}, bad), out=tmp_path / "bad", threads=1) == 2
    assert summary(tmp_path / "bad")["result"]["plip"]["witnesses"]


def test_qcx_task_dumps_witnesses(tmp_path):
    dw = {"kind": "double_well", "zeta": [0.0, 1.0], "delta": 0.01}
    assert run(cfg("qcx", {"xi": [0.0, 0.0], "trials": 100, "n": 8, "envelope_n": 16, "dump_fields": True}, dw),
               out=tmp_path, threads=1) == 0
    res = summary(tmp_path)["result"]
    assert res["jensen"]["violations"] > 0
    assert res["convex_envelope"] <= res["envelope"] + 1e-9 <= res["f_xi"] + 2e-9
    assert (tmp_path / "jensen_witness.afh1").exists()


def test_stoch_task_writes_csv(tmp_path):
    rc = {"kind": "random_checkerboard"}
    c = cfg("stoch", {"xi": [0.0, 1.0], "radii": [1, 2], "seeds": 2, "density": 4, "covariance_pairs": 2,
                      "partitions": 1}, rc, solver={"max_iters": 200, "restarts": 0})
    assert run(c, out=tmp_path, threads=1) == 0
    res = summary(tmp_path)["result"]
    assert res["covariance"]["passed"] and res["subadditivity"]["passed"]
    assert (tmp_path / "stoch.csv").read_text().startswith("seed,xi0,xi1,r,center0,center1,normalized")


def test_recon_and_gamma_tasks(tmp_path):
    assert run(cfg("recon", {"x": [0.25, 0.5], "xi": [1.0, 0.0], "rhos": [0.0625]}), out=tmp_path / "r",
               threads=1) == 0
    assert summary(tmp_path / "r")["result"]["passed"]
    g = cfg("gamma", {"xi": [1.0, 0.0], "k_list": [1, 2], "fhom_value": 2.5, "density": 4})
    assert run(g, out=tmp_path / "g", threads=1) == 0
    assert summary(tmp_path / "g")["result"]["passed"]


def test_subcommand_and_entry_point(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg("cell", {"xi": [1.0, 0.0], "n": 8, "kind": "periodic"})))
    assert main(["cell", "--config", str(p), "--out", str(tmp_path / "o"), "--threads", "1"]) == 0
    proc = subprocess.run([sys.executable, "-m", "afhom", "run", "--config", str(p), "--out", str(tmp_path / "m"),
                           "--seed", "4"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert summary(tmp_path / "m")["seed"] == 4


def test_selfcheck_passes():
    results = selfcheck(verbose=False)
    assert results and all(ok for _, ok, _ in results)


def test_selfcheck_catches_corrupted_projector():
    def corrupted(op, w):
        P = projector(op, w)
        return P + 1e-6 * np.eye(P.shape[0])

    results = selfcheck(proj=corrupted, verbose=False)
    failed = [name for name, ok, _ in results if not ok]
    assert any("idempotence" in n for n in failed)
    assert any("trace" in n for n in failed)
