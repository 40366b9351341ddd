"""The bundled AUV pipeline-inspection case study: scenarios, standard analysis, outputs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Mapping

from . import checker
from .checker import CheckOptions, format_value
from .compiler import CompiledMdp, compile_model
from .errors import ModelError
from .language import parse_expression, parse_model, parse_properties, parse_property_file, typecheck
from .language.typecheck import resolve_labels


class ScenarioError(ModelError):
    pass


def corpus_path(*parts: str) -> Path:
    """Path of a bundled corpus file (models/, scenarios/, overrides/)."""
    return Path(str(resources.files("featmc").joinpath("corpus", *parts)))


MODEL_PATH = ("models", "auv.pfm")
PROPS_PATH = ("models", "auv.props")
PUBLISHED_PATH = ("overrides", "published.kv")


@dataclass(frozen=True)
class Scenario:
    name: str
    min_visib: int  # 0.5 m units
    max_visib: int
    current_prob: Fraction
    inspect: int  # metres of pipeline to inspect
    infl_tf: int = 2
    number: int | None = None

    def __post_init__(self):
        if not 0 < self.min_visib < self.max_visib:
            raise ScenarioError(f"scenario {self.name}: need 0 < min_visib < max_visib")
        if not 0 <= self.current_prob <= 1:
            raise ScenarioError(f"scenario {self.name}: current_prob must lie in [0, 1]")
        if self.inspect < 1:
            raise ScenarioError(f"scenario {self.name}: inspect must be at least 1")
        if self.infl_tf < 1:
            raise ScenarioError(f"scenario {self.name}: infl_tf must be at least 1")

    @property
    def label(self) -> str:
        return f"scenario {self.number} ({self.name})" if self.number else self.name

    def overrides(self) -> dict[str, object]:
        return {
            "min_visib": self.min_visib,
            "max_visib": self.max_visib,
            "current_prob": self.current_prob,
            "inspect": self.inspect,
            "infl_tf": self.infl_tf,
        }


def read_kv(path: Path | str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ScenarioError("file not found", source=str(path)) from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ScenarioError(f"line {lineno}: expected key = value", source=str(path))
        key = key.strip()
        if key in out:
            raise ScenarioError(f"line {lineno}: duplicate key {key}", source=str(path))
        out[key] = value.strip()
    return out


def scenario_from_kv(values: Mapping[str, str], default_name: str = "scenario") -> Scenario:
    known = {"name", "number", "min_visib", "max_visib", "current_prob", "inspect", "infl_tf"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ScenarioError(f"unknown scenario key {unknown[0]}")
    missing = sorted({"min_visib", "max_visib", "current_prob", "inspect"} - set(values))
    if missing:
        raise ScenarioError(f"scenario key {missing[0]} missing")
    try:
        return Scenario(
            name=values.get("name", default_name),
            min_visib=int(values["min_visib"]),
            max_visib=int(values["max_visib"]),
            current_prob=Fraction(values["current_prob"]),
            inspect=int(values["inspect"]),
            infl_tf=int(values.get("infl_tf", 2)),
            number=int(values["number"]) if "number" in values else None,
        )
    except ValueError as exc:
        if isinstance(exc, ModelError):
            raise
        raise ScenarioError(f"malformed scenario value: {exc}") from None


def bundled_scenarios() -> list[Scenario]:
    """Bundled scenarios ordered by number."""
    folder = corpus_path("scenarios")
    found = [scenario_from_kv(read_kv(p), p.stem) for p in sorted(folder.glob("*.kv"))]
    return sorted(found, key=lambda s: (s.number is None, s.number or 0, s.name))


def find_scenario(key: str) -> Scenario:
    """Look a scenario up by number, name, or path to a .kv file."""
    for sc in bundled_scenarios():
        if key in (sc.name, str(sc.number), f"scenario{sc.number}"):
            return sc
    path = Path(key)
    if path.suffix == ".kv" or path.exists():
        return scenario_from_kv(read_kv(path), path.stem)
    names = ", ".join(f"{s.number}/{s.name}" for s in bundled_scenarios())
    raise ScenarioError(f"unknown scenario {key!r} (bundled: {names})")


def load_published(path: Path | str | None = None) -> dict[str, str] | None:
    """Constant overrides with the published probabilities, if such a file is present."""
    path = Path(path) if path is not None else corpus_path(*PUBLISHED_PATH)
    if not path.exists():
        return None
    return read_kv(path)


def build_scenario(scenario: Scenario, extra: Mapping[str, object] | None = None) -> tuple[str, dict[str, object]]:
    """Model text and constant overrides for ``scenario``; ``extra`` is applied last."""
    text = corpus_path(*MODEL_PATH).read_text()
    overrides = scenario.overrides()
    overrides.update(extra or {})
    return text, overrides


# --------------------------------------------------------------------------
# standard analysis

STANDARD_QUERIES = {
    "done": "Pmin=? [F s=done]",
    "energy_min": 'R{"energy"}min=? [F s=done]',
    "energy_max": 'R{"energy"}max=? [F s=done]',
    "time_min": 'R{"time"}min=? [F s=done]',
    "time_max": 'R{"time"}max=? [F s=done]',
    "safe": 'Pmin=? [G "safe"]',
    "recovery": 'filter(min, Pmin=? [F<=k "safe"], "unsafe")',
    "unsafe_max": 'filter(max, Pmax=? [F<=k "unsafe"], "safe")',
    "unsafe_avg": 'filter(avg, Pmax=? [F<=k "unsafe"], "safe")',
}
RECOVERY_RANGE = (0, 10)
UNSAFE_RANGE = (0, 100)


@dataclass(frozen=True)
class AnalysisReport:
    scenario: Scenario
    published: bool
    stats: dict[str, int]
    p_done: float
    energy_min: float
    energy_max: float
    time_min: float
    time_max: float
    p_safe: float
    recovery: tuple[tuple[int, float], ...]
    unsafe_max: tuple[tuple[int, float], ...]
    unsafe_avg: tuple[tuple[int, float], ...]
    one_set_done: bool = field(default=False)  # initial state in Pmin[F done]'s one set

    def format(self) -> str:
        sc = self.scenario
        source = "published overrides" if self.published else "bundled defaults (placeholders)"
        lines = [
            f"{sc.label}: min_visib={sc.min_visib} max_visib={sc.max_visib} "
            f"current_prob={format_value(float(sc.current_prob))} inspect={sc.inspect} infl_tf={sc.infl_tf}",
            f"probabilities: {source}",
            " ".join(f"{k}={v}" for k, v in self.stats.items()),
            f"{STANDARD_QUERIES['done']} = {format_value(self.p_done)}",
            f"{STANDARD_QUERIES['energy_min']} = {format_value(self.energy_min)}",
            f"{STANDARD_QUERIES['energy_max']} = {format_value(self.energy_max)}",
            f"{STANDARD_QUERIES['time_min']} = {format_value(self.time_min)}",
            f"{STANDARD_QUERIES['time_max']} = {format_value(self.time_max)}",
            f"{STANDARD_QUERIES['safe']} = {format_value(self.p_safe)}",
            f"{STANDARD_QUERIES['recovery']}, k={RECOVERY_RANGE[0]}..{RECOVERY_RANGE[1]}:",
        ]
        lines += [f"  k={k}: {format_value(v)}" for k, v in self.recovery]
        lines.append(f"{STANDARD_QUERIES['unsafe_max']} / avg, k={UNSAFE_RANGE[0]}..{UNSAFE_RANGE[1]} step 10:")
        for (k, mx), (_, avg) in zip(self.unsafe_max, self.unsafe_avg):
            if k % 10 == 0:
                lines.append(f"  k={k}: max={format_value(mx)} avg={format_value(avg)}")
        return "\n".join(lines) + "\n"


def compile_scenario(scenario: Scenario, extra: Mapping[str, object] | None = None, state_cap: int | None = None):
    text, overrides = build_scenario(scenario, extra)
    model = typecheck(parse_model(text), overrides)
    return model, compile_model(model, state_cap)


def property_labels(model):
    pf = parse_property_file(corpus_path(*PROPS_PATH).read_text())
    return resolve_labels(model, pf.labels)


def run_standard_analysis(
    scenario: Scenario,
    options: CheckOptions | None = None,
    published: Mapping[str, object] | None = None,
    state_cap: int | None = None,
) -> AnalysisReport:
    """Evaluate the standard property suite on one scenario."""
    options = options or CheckOptions()
    model, mdp = compile_scenario(scenario, published, state_cap)
    labels = property_labels(model)
    queries = {key: parse_properties(text + ";")[0] for key, text in STANDARD_QUERIES.items()}

    def value(key):
        return checker.evaluate_property(mdp, queries[key], {}, labels, options).value

    def series(key, bounds):
        return checker.run_experiment(mdp, queries[key], "k", bounds[0], bounds[1], 1, labels, options).series

    done = _done_set(mdp, model)
    _, one = checker.qualitative_reach(mdp, done, checker.MIN)
    return AnalysisReport(
        scenario=scenario,
        published=published is not None,
        stats=mdp.stats(),
        p_done=value("done"),
        energy_min=value("energy_min"),
        energy_max=value("energy_max"),
        time_min=value("time_min"),
        time_max=value("time_max"),
        p_safe=value("safe"),
        recovery=series("recovery", RECOVERY_RANGE),
        unsafe_max=series("unsafe_max", UNSAFE_RANGE),
        unsafe_avg=series("unsafe_avg", UNSAFE_RANGE),
        one_set_done=bool(one[mdp.initial]),
    )


def _done_set(mdp: CompiledMdp, model):
    return mdp.state_set(model.scope().resolver().resolve(parse_expression("s=done")))


# --------------------------------------------------------------------------
# outputs

TABLE2_HEADER = ("scenario", "energy_min", "energy_max", "time_min", "time_max")
FIG6_HEADER = ("k", "max", "avg")


def table2_csv(reports: list[AnalysisReport]) -> str:
    rows = [",".join(TABLE2_HEADER)]
    for r in reports:
        key = str(r.scenario.number) if r.scenario.number else r.scenario.name
        vals = (r.energy_min, r.energy_max, r.time_min, r.time_max)
        rows.append(",".join([key] + [format_value(v) for v in vals]))
    return "\n".join(rows) + "\n"


def fig6_csv(report: AnalysisReport) -> str:
    rows = [",".join(FIG6_HEADER)]
    for (k, mx), (_, avg) in zip(report.unsafe_max, report.unsafe_avg):
        rows.append(f"{k},{format_value(mx)},{format_value(avg)}")
    return "\n".join(rows) + "\n"


def write_outputs(reports: list[AnalysisReport], outdir: Path | str) -> list[Path]:
    """Write report.txt, table2.csv and one fig6_<scenario>.csv per report."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    report = outdir / "report.txt"
    report.write_text("\n".join(r.format() for r in reports))
    written.append(report)
    table = outdir / "table2.csv"
    table.write_text(table2_csv(reports))
    written.append(table)
    for r in reports:
        tag = f"scenario{r.scenario.number}" if r.scenario.number else r.scenario.name
        path = outdir / f"fig6_{tag}.csv"
        path.write_text(fig6_csv(r))
        written.append(path)
    return written


def read_series_csv(path: Path | str) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
