import io
import subprocess
import sys

import pytest

from featmc.casestudy import MODEL_PATH, PROPS_PATH, corpus_path
from featmc.cli import main, parse_constant, parse_experiment

MODEL = str(corpus_path(*MODEL_PATH))
PROPS = str(corpus_path(*PROPS_PATH))
S1 = ["-c", "min_visib=1", "-c", "max_visib=10", "-c", "current_prob=0.6", "-c", "inspect=10"]


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


@pytest.fixture
def small_model(tmp_path):
    path = tmp_path / "coin.pfm"
    path.write_text(
        'root feature modules m; rewards "time" [step] true : 1; endrewards endfeature\n'
        "module m x : [0..2] init 0;\n"
        "  [step] x=0 -> 0.5:(x'=1) + 0.5:(x'=0);\n"
        "  [step] x=0 -> (x'=2);\n"
        "  [step] x>0 -> true;\n"
        "endmodule\n"
    )
    return path


def test_validate_counts_configurations():
    code, out = run("validate", MODEL, *S1)
    assert code == 0
    assert out.splitlines()[-1] == "valid configurations: 4"


def test_validate_without_scenario_constants(capsys):
    code, _ = run("validate", MODEL)
    assert code == 2
    assert "unresolved constant" in capsys.readouterr().err


def test_check_done_line():
    code, out = run("check", MODEL, PROPS, *S1)
    assert code == 0
    assert "Pmin=? [F s=done] = 1.0" in out.splitlines()


def test_check_missing_file(capsys):
    code, _ = run("check", "missing.pfm", PROPS, *S1)
    assert code == 2
    assert "file not found" in capsys.readouterr().err


def test_diagnostic_position(tmp_path, capsys):
    bad = tmp_path / "bad.pfm"
    bad.write_text("root feature modules m; endfeature\nmodule m\n  x : [0..1] init 0\nendmodule\n")
    assert run("validate", str(bad))[0] == 2
    assert f"{bad}:4:1" in capsys.readouterr().err


def test_no_arguments_is_usage_error():
    assert run()[0] == 1


@pytest.mark.parametrize("argv", [["check", MODEL], ["simulate", MODEL], ["bogus"], ["check", MODEL, PROPS, "--threads", "0"]])
def test_usage_errors(argv):
    assert run(*argv)[0] == 1


@pytest.mark.parametrize("sub", [[], ["validate"], ["check"], ["simulate"], ["export"], ["reproduce"]])
def test_help_exits_zero(sub, capsys):
    assert run(*sub, "--help")[0] == 0
    assert "usage" in capsys.readouterr().out


def test_non_convergence_exit_code(capsys):
    code, _ = run("check", MODEL, PROPS, *S1, "--max-iters", "2")
    assert code == 3
    assert "residual" in capsys.readouterr().err


def test_experiment_csv(small_model, tmp_path):
    props = tmp_path / "p.props"
    props.write_text("const int k;\nPmin=? [F<=k x=1];\nPmax=? [F<=k x=1];\n")
    code, out = run("check", str(small_model), str(props), "--experiment", "k=0:3", "--csv-dir", str(tmp_path / "csv"))
    assert code == 0
    assert "Pmax=? [F<=k x=1] [k=2] = 0.75" in out
    text = (tmp_path / "csv" / "experiment2.csv").read_text().splitlines()
    assert text == ["k,value", "0,0.0", "1,0.5", "2,0.75", "3,0.875"]


def test_unbound_property_skipped(small_model, tmp_path, capsys):
    props = tmp_path / "p.props"
    props.write_text("const int k;\nPmin=? [F<=k x=1];\nPmax=? [F x=1];\n")
    code, out = run("check", str(small_model), str(props))
    assert code == 0
    assert out == "Pmax=? [F x=1] = 1.0\n"
    assert "k" in capsys.readouterr().err


def test_check_stats(small_model, tmp_path):
    props = tmp_path / "p.props"
    props.write_text("Pmax=? [F x=1];\n")
    _, out = run("check", str(small_model), str(props), "--stats")
    assert "states=3" in out.splitlines()


def test_export(small_model, tmp_path):
    code, out = run("export", str(small_model), "--csv", "-", "--dot", str(tmp_path / "m.dot"), "--stats")
    assert code == 0
    assert "source,choice,action,target,probability\n0,0,step,0,1/2\n" in out
    assert "states=3" in out.splitlines()
    assert (tmp_path / "m.dot").read_text().startswith("digraph")


def test_simulate_and_compare(small_model):
    code, out = run(
        "simulate", str(small_model), "--target", "x=1", "--policy", "first", "--trials", "2000", "--seed", "3", "--compare"
    )
    assert code == 0
    fields = dict(line.split(" = ", 1) for line in out.splitlines())
    assert fields["trials"] == "2000"
    assert "checker" in " ".join(fields)


def test_simulate_reward_improper_policy(small_model, capsys):
    # seed 0 picks the move to the absorbing x=2, which never reaches x=1
    code, _ = run("simulate", str(small_model), "--target", "x=1", "--reward", "time", "--policy", "random:0")
    assert code == 2
    assert "almost surely" in capsys.readouterr().err
    code, out = run("simulate", str(small_model), "--target", "x=1", "--reward", "time", "--policy", "first")
    assert code == 0 and "estimate = " in out


def test_simulate_deterministic_across_threads():
    base = ["simulate", MODEL, *S1, "--target", '"unsafe"', "--policy", "random:2", "--trials", "4000", "--seed", "8"]
    assert run(*base, "--threads", "1") == run(*base, "--threads", "3")


def test_state_cap_environment(monkeypatch, capsys):
    monkeypatch.setenv("FEATMC_STATE_CAP", "50")
    code, _ = run("check", MODEL, PROPS, *S1)
    assert code == 2
    assert "cap" in capsys.readouterr().err


def test_state_cap_flag_beats_environment(monkeypatch, small_model):
    monkeypatch.setenv("FEATMC_STATE_CAP", "1")
    assert run("export", str(small_model), "--stats", "--state-cap", "10")[0] == 0


def test_reproduce_unknown_scenario(capsys):
    assert run("reproduce", "arctic")[0] == 2


@pytest.mark.parametrize("text, value", [("inspect=10", ("inspect", "10")), ("current_prob = 0.6", ("current_prob", "0.6"))])
def test_parse_constant(text, value):
    assert parse_constant(text) == value


@pytest.mark.parametrize("text", ["k=0:10", "k=0:100:5"])
def test_parse_experiment(text):
    exp = parse_experiment(text)
    assert exp.name == "k" and exp.start == 0


@pytest.mark.parametrize("text", ["k=5:1", "k", "k=0:3:0", "k=a:b"])
def test_parse_experiment_rejects(text):
    from featmc.cli import UsageError

    with pytest.raises(UsageError):
        parse_experiment(text)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "featmc", "validate", MODEL, *S1], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.endswith("valid configurations: 4\n")
