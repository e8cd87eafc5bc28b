import json

import numpy as np
import pytest

from hiersparse.cli import build_parser, read_csv, run
from hiersparse.design import DataError

SMALL_TOML = """\
p_list = [4]
s_main_list = [2]
s_int_list = [1]
n_list = [80, 160]
replications = 2
penalties = ["cap:q=2", "lasso"]
"""


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "data.csv"
    assert run(["simulate", "--n", "60", "--p", "4", "--s-main", "2", "--s-int", "1",
                "--seed", "3", "--out", str(out), "--truth-out", str(tmp_path / "truth.json")]) == 0
    return out


# small flag sets so that every command runs in a second or two
COMMANDS = {
    "expand": lambda d: ["expand", "--data", str(d), "--response", "y", "--center"],
    "fit": lambda d: ["fit", "--data", str(d), "--response", "y", "--penalty", "cap:q=2"],
    "path": lambda d: ["path", "--data", str(d), "--response", "y", "--n-lambda", "4"],
    "simulate": lambda d: ["simulate", "--n", "20", "--p", "3", "--s-main", "2", "--s-int", "1"],
    "re-check": lambda d: ["re-check", "--p", "4", "--n", "60", "--seeds", "3", "--budget", "10",
                           "--iters", "50", "--eps", "0.01"],
    "a0-check": lambda d: ["a0-check", "--n", "100", "--p", "4", "--trials", "20"],
    "eigs-check": lambda d: ["eigs-check", "--p", "3", "--n-mc", "2000"],
    "psi-check": lambda d: ["psi-check", "--samples", "20000"],
    "conc-check": lambda d: ["conc-check", "--n-list", "50,500", "--trials", "100"],
    "penalty-check": lambda d: ["penalty-check", "--family", "bien", "--p", "4", "--trials", "50"],
}


@pytest.mark.parametrize("name", sorted(COMMANDS))
def test_byte_identical_under_seed(name, dataset, tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"{name}-{i}.out"
        assert run(COMMANDS[name](dataset) + ["--seed", "11", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] and outs[0]


def test_rate_bench_byte_identical(tmp_path):
    cfg = tmp_path / "small.toml"
    cfg.write_text(SMALL_TOML)
    outs = []
    for i in range(2):
        out, summ = tmp_path / f"r{i}.csv", tmp_path / f"s{i}.json"
        assert run(["rate-bench", "--config", str(cfg), "--seed", "7", "--out", str(out),
                    "--summary", str(summ), "--jobs", str(i + 1)]) == 0
        outs.append((out.read_bytes(), summ.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][0].startswith(b"penalty,n,p,s,rep,l1_error,pe_error,predicted,seed\n")
    assert json.loads(outs[0][1])["config"]["seed"] == 7


def test_seed_changes_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(COMMANDS["simulate"](None) + ["--seed", "1", "--out", str(a)])
    run(COMMANDS["simulate"](None) + ["--seed", "2", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_penalty_check_full_pass(tmp_path, capsys):
    out = tmp_path / "pc.json"
    code = run(["penalty-check", "--family", "cap", "--q", "2", "--p", "5", "--trials", "1000", "--out", str(out)])
    assert code == 0
    assert "1000/1000" in capsys.readouterr().out
    rep = json.loads(out.read_text())
    assert rep["passed"] == 1000 and not any(rep["failures"].values())


def test_penalty_check_sharp_unavailable():
    assert run(["penalty-check", "--family", "block", "--d0", "2", "--sharp", "--trials", "5"]) == 3


def test_mismatched_csv_exit_3(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2,y\n1,2,3\n4,5\n")
    assert run(["fit", "--data", str(bad), "--response", "y", "--lambda", "0.1"]) == 3
    assert run(["fit", "--data", str(tmp_path / "missing.csv"), "--response", "y"]) == 3
    nonnum = tmp_path / "nn.csv"
    nonnum.write_text("x1,x2,y\n1,a,3\n")
    assert run(["expand", "--data", str(nonnum)]) == 3


def test_missing_response_exit_3(dataset):
    assert run(["fit", "--data", str(dataset), "--response", "nope"]) == 3


def test_flag_errors_exit_2(dataset):
    with pytest.raises(SystemExit) as e:
        run(["fit", "--data", str(dataset), "--response", "y", "--penalty", "nope"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        run(["no-such-command"])
    assert e.value.code == 2


def test_strict_nonconvergence_exit_4(dataset, tmp_path):
    args = ["fit", "--data", str(dataset), "--response", "y", "--lambda", "0.01", "--max-iter", "2",
            "--out", str(tmp_path / "f.json")]
    assert run(args) == 0
    assert run(args + ["--strict"]) == 4


def test_fit_output_contents(dataset, tmp_path):
    out = tmp_path / "fit.json"
    assert run(["fit", "--data", str(dataset), "--response", "y", "--lambda", "theory", "--ke", "0.8",
                "--lambda-multiplier", "2", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["converged"] and len(d["theta"]) == 10
    assert d["lambda_rule"]["multiplier"] == 2.0
    truth = json.loads((dataset.parent / "truth.json").read_text())
    assert set(truth["support"]["main"]) <= set(d["support"]["main"])


def test_expand_metadata(dataset, tmp_path):
    out = tmp_path / "e.json"
    assert run(["expand", "--data", str(dataset), "--response", "y", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["p1"] == 10 and d["columns"][4] == "x1:x2"


def test_read_csv_roundtrip(dataset):
    X, y, names = read_csv(dataset, "y")
    assert X.shape == (60, 4) and y.shape == (60,)
    assert names == ["x1", "x2", "x3", "x4"]
    with pytest.raises(DataError):
        read_csv(dataset, "z")


CLAIMS = {
    "fit": "s sqrt(log p1 / n)",
    "rate-bench": "Pe(v) <= 3 ||v||_1",
    "re-check": "RE condition",
    "a0-check": "q1n * q2n",
    "eigs-check": "bounded away from 0",
    "psi-check": "||XY||_psi1 <= 2 K^2",
    "conc-check": "(n delta)^(1/3)",
    "penalty-check": "L2 ||theta_S||_1",
}


@pytest.mark.parametrize("name", sorted(CLAIMS))
def test_help_states_claim(name):
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command").choices[name]
    text = " ".join(sub.format_help().split())
    assert "Claim:" in text and CLAIMS[name] in text


def test_console_script_entry_point():
    from importlib.metadata import entry_points

    eps = [e for e in entry_points(group="console_scripts") if e.name == "hiersparse"]
    assert eps and eps[0].value == "hiersparse.cli:main"


def test_simulated_data_matches_truth(dataset):
    X, y, _ = read_csv(dataset, "y")
    truth = json.loads((dataset.parent / "truth.json").read_text())
    beta = np.asarray(truth["beta"])
    from hiersparse import expand_design

    resid = y - expand_design(X).values @ beta
    assert 0.5 < resid.std() < 1.5
