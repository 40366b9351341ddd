import csv
import io

from featmc.export import export_dot, export_transitions_csv, format_stats

from conftest import compile_text
from small_mdps import explicit_mdp


def test_single_self_loop_dot():
    dot = export_dot(explicit_mdp([[{0: 1}]]))
    assert dot.count("[shape=box") == 1
    assert dot.count("[shape=point") == 1
    assert dot.count('c0 -> s0 [label="1"]') == 1


def test_dirac_row():
    _, mdp = compile_text("root feature modules m; endfeature module m x : [0..1] init 0; [step] true -> (x'=1); endmodule")
    rows = export_transitions_csv(mdp).splitlines()
    assert rows[0] == "source,choice,action,target,probability"
    assert rows[1] == "0,0,step,1,1"


def test_halves_rows():
    text = export_transitions_csv(explicit_mdp([[{0: "1/2", 1: "1/2"}], [{1: 1}]], actions=[["flip"], ["stay"]]))
    assert text.splitlines()[1:3] == ["0,0,flip,0,1/2", "0,0,flip,1,1/2"]


def test_decimal_branch_is_exact():
    _, mdp = compile_text(
        "root feature modules m; endfeature module m x : [0..2] init 0;"
        " [step] x=0 -> 0.59:(x'=1) + 0.41:(x'=2); [step] x>0 -> true; endmodule"
    )
    rows = export_transitions_csv(mdp).splitlines()
    assert rows[1:3] == ["0,0,step,1,59/100", "0,0,step,2,41/100"]


def test_auv_exports(auv1):
    mdp = auv1.mdp
    rows = list(csv.DictReader(io.StringIO(export_transitions_csv(mdp))))
    assert len(rows) == mdp.num_transitions
    keys = [(int(r["source"]), int(r["choice"]), int(r["target"])) for r in rows]
    assert keys == sorted(keys)
    dot = export_dot(mdp)
    assert dot.count("[shape=box") == mdp.num_states
    assert "peripheries=2" in dot


def test_stats_lines(auv1):
    stats = dict(line.split("=") for line in format_stats(auv1.mdp).splitlines())
    assert int(stats["states"]) == auv1.mdp.num_states
    assert int(stats["transitions"]) == auv1.mdp.num_transitions
