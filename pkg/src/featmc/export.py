"""Text exports of a compiled MDP: GraphViz DOT, transitions CSV, key=value stats."""

from __future__ import annotations

import csv
import io

from .compiler import CompiledMdp

TRANSITIONS_HEADER = ("source", "choice", "action", "target", "probability")


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(mdp: CompiledMdp) -> str:
    """States are boxes, choices small intermediate nodes, edges carry probabilities."""
    lines = ["digraph mdp {", "  rankdir=LR;", '  node [fontname="Helvetica"];']
    for s in range(mdp.num_states):
        extra = ", peripheries=2" if s == mdp.initial else ""
        lines.append(f'  s{s} [shape=box, label="{s}: {_dot_escape(mdp.describe(s))}"{extra}];')
    for s in range(mdp.num_states):
        for c in mdp.choices(s):
            action = mdp.actions[c] or ""
            lines.append(f'  c{c} [shape=point, width=0.08, label=""];')
            lines.append(f'  s{s} -> c{c} [arrowhead=none, label="{_dot_escape(action)}"];')
            for t, p in mdp.distribution(c):
                lines.append(f'  c{c} -> s{t} [label="{p}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_transitions_csv(mdp: CompiledMdp) -> str:
    """One row per branch; ``choice`` is the index of the choice within its source state."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRANSITIONS_HEADER)
    for s in range(mdp.num_states):
        for local, c in enumerate(mdp.choices(s)):
            action = mdp.actions[c] or ""
            for t, p in sorted(mdp.distribution(c)):
                writer.writerow((s, local, action, t, str(p)))
    return buf.getvalue()


def format_stats(mdp: CompiledMdp) -> str:
    return "".join(f"{key}={value}\n" for key, value in mdp.stats().items())
