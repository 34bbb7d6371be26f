import csv
import io
import json
import math

import pytest

from exclusion_lab import __version__
from exclusion_lab.cli import EXIT_BAD_INPUT, EXIT_INVARIANT, EXIT_NUMERICAL, EXIT_OK, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out)


def test_verify_default(capsys):
    code, rep = run_json(capsys, "verify", "--deterministic")
    assert code == EXIT_OK and rep["passed"]
    assert rep["result"]["total_quantum"] == pytest.approx(4.0, abs=1e-12)
    assert rep["result"]["total_toy"] == 3.75
    assert rep["version"] == __version__
    assert {"tau_psd", "exact", "bound"} <= set(rep["tolerances"])
    assert "timestamp" not in rep


def test_verify_has_timestamp_without_flag(capsys):
    _, rep = run_json(capsys, "verify")
    assert "timestamp" in rep


def test_verify_perturbed_plus_fails(capsys):
    code, out, err = run(capsys, "verify", "--perturb-plus", "0.01", "--deterministic")
    rep = json.loads(out)
    assert code == EXIT_INVARIANT and not rep["passed"]
    assert rep["result"]["first_failure"] == "operational_identity[I]"
    assert "operational_identity" in err


def test_verify_tolerance_override(capsys):
    # a loose enough tolerance hides a tiny perturbation
    code, rep = run_json(capsys, "verify", "--perturb-plus", "1e-9", "--tol-exact", "1e-6", "--deterministic")
    assert code == EXIT_OK and rep["tolerances"]["exact"] == 1e-6


def test_sweep_csv(capsys, tmp_path):
    path = tmp_path / "g.csv"
    code, out, _ = run(capsys, "sweep", "--noise", "global", "--grid", "0:1:0.01", "--out", str(path), "--deterministic")
    assert code == EXIT_OK and out == ""
    text = path.read_text()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["mode", "visibility", "ce_total", "ce_0p", "ce_0m", "ce_1p", "ce_1m"]
    data = [r for r in rows[1:] if not r[0].startswith("#")]
    assert len(data) == 101 and float(data[-1][2]) == pytest.approx(4.0, abs=1e-12)
    meta = {r[0]: r[1] for r in rows if r[0].startswith("#")}
    assert float(meta["# threshold"]) == pytest.approx(0.75, abs=1e-6)
    assert meta["# version"] == __version__ and "tau_psd" in meta["# tolerances"]
    assert "# timestamp" not in meta


def test_sweep_per_qubit_threshold(capsys):
    code, out, _ = run(capsys, "sweep", "--noise", "per_qubit", "--grid", "0.8,0.9,1", "--deterministic")
    thr = [l for l in out.splitlines() if l.startswith("# threshold")][0]
    assert code == EXIT_OK and float(thr.split(",")[1]) == pytest.approx(math.sqrt(3) / 2, abs=1e-6)


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep", "--grid", "0:2:0.1"],
        ["sweep", "--noise", "amplitude"],
        ["ncmax", "--ontic-n", "0"],
        ["bilocal", "classical", "--card", "0"],
        ["bilocal", "quantum", "--visibility", "1.5"],
        ["bilocal", "possibilistic", "--eps", "-1"],
        ["bilocal", "teleport"],
        ["verify", "--tol-exact", "nan"],
        ["ncmax", "--model", "/nonexistent/model.json"],
        [],
    ],
)
def test_bad_input_exit_code(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == EXIT_BAD_INPUT


def test_non_finite_model_is_bad_input(capsys, tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"n": 1, "mu0": [1.0], "mu1": [1.0], "muP": [1.0], "muM": [NaN]}')
    code, _, err = run(capsys, "ncmax", "--model", str(path), "--deterministic")
    assert code == EXIT_BAD_INPUT and "non-finite" in err


def test_numerical_anomaly_exit_code(capsys, monkeypatch):
    from exclusion_lab import cli
    from exclusion_lab.qcore import QuantumError

    def broken(*args, **kwargs):
        raise QuantumError("Born probability outside [0, 1]")

    monkeypatch.setattr(cli, "ce_total", broken)
    code, _, err = run(capsys, "verify", "--deterministic")
    assert code == EXIT_NUMERICAL and "numerical anomaly" in err


def test_non_finite_report_is_anomaly(capsys, monkeypatch):
    from exclusion_lab import cli

    real = cli.cmd_bilocal_possibilistic
    monkeypatch.setattr(cli, "cmd_bilocal_possibilistic", lambda cfg: ({**real(cfg)[0], "bad": float("inf")}, True))
    code, _, _ = run(capsys, "bilocal", "possibilistic", "--deterministic")
    assert code == EXIT_NUMERICAL


def test_ncmax_and_model_round_trip(capsys, tmp_path):
    model = tmp_path / "m.json"
    code, rep = run_json(capsys, "ncmax", "--ontic-n", "2", "--restarts", "8", "--seed", "7", "--deterministic", "--emit-model", str(model))
    r = rep["result"]
    assert code == EXIT_OK and r["bound_respected"] and r["analytic_bound"] == 3.75
    assert r["best_found"] == pytest.approx(3.75, abs=1e-6)
    code, rep = run_json(capsys, "ncmax", "--model", str(model), "--deterministic")
    assert code == EXIT_OK and rep["result"]["total"] == r["best_found"]


def test_ncmax_single_state(capsys):
    code, rep = run_json(capsys, "ncmax", "--ontic-n", "1", "--restarts", "2", "--deterministic")
    assert code == EXIT_OK and rep["result"]["best_found"] == pytest.approx(3.0, abs=1e-12)


def test_ncmax_is_byte_reproducible(capsys):
    a = run(capsys, "ncmax", "--ontic-n", "3", "--restarts", "4", "--seed", "2", "--deterministic")[1]
    b = run(capsys, "ncmax", "--ontic-n", "3", "--restarts", "4", "--seed", "2", "--deterministic")[1]
    assert a == b


def test_threads_do_not_change_results(capsys, monkeypatch):
    argv = ("bilocal", "classical", "--card", "2", "--restarts", "4", "--seed", "9", "--deterministic")
    serial = run(capsys, *argv)[1]
    monkeypatch.setenv("EXCLUSION_LAB_THREADS", "4")
    threaded = run(capsys, *argv)[1]
    assert serial == threaded


def test_bilocal_quantum(capsys, tmp_path):
    path = tmp_path / "b.json"
    code, rep = run_json(capsys, "bilocal", "quantum", "--deterministic", "--emit-behavior", str(path))
    r = rep["result"]
    assert code == EXIT_OK and r["ce_total"] == pytest.approx(4.0, abs=1e-12)
    assert len(r["impossible_exclusion_events"]) == 16 and len(r["other_impossible_events"]) == 48
    assert r["eps"] == 1e-9
    code, rep = run_json(capsys, "bilocal", "possibilistic", "--behavior", str(path), "--deterministic")
    assert rep["result"]["verdict"] == "INFEASIBLE"


def test_bilocal_quantum_noisy_has_full_support(capsys):
    code, rep = run_json(capsys, "bilocal", "quantum", "--visibility", "0.9", "--deterministic")
    assert code == EXIT_OK and rep["result"]["n_impossible"] == 0


def test_bilocal_classical(capsys):
    code, rep = run_json(capsys, "bilocal", "classical", "--card", "4", "--restarts", "8", "--deterministic")
    r = rep["result"]
    assert code == EXIT_OK and abs(r["best"] - 3.75) <= 1e-9 and r["bound_respected"]
    assert r["identical_sources"] and r["unbiased_sources"]


def test_bilocal_classical_distinct_sources(capsys):
    code, rep = run_json(capsys, "bilocal", "classical", "--card", "2", "--restarts", "4", "--distinct-sources", "--deterministic")
    assert code == EXIT_OK and rep["result"]["best"] == pytest.approx(4.0, abs=1e-9)
    assert not rep["result"]["bound_respected"]


@pytest.mark.parametrize("source,verdict", [("quantum", "INFEASIBLE"), ("toy", "UNDECIDED-FEASIBLE"), ("uniform", "UNDECIDED-FEASIBLE")])
def test_bilocal_possibilistic(capsys, source, verdict):
    code, rep = run_json(capsys, "bilocal", "possibilistic", "--source", source, "--deterministic")
    assert code == EXIT_OK and rep["result"]["verdict"] == verdict
    if verdict == "INFEASIBLE":
        w = rep["result"]["witness"]
        assert (w["f_a"], w["f_b"], w["t"]) == ([0, 0], [0, 0], "0+")
