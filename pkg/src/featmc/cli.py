"""Command-line front end: validate, check, simulate, export, reproduce.

Exit codes: 0 success, 1 usage error, 2 model error, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import casestudy, checker, oracle
from .checker import CheckOptions, format_value
from .compiler import compile_model
from .errors import ConvergenceError, ModelError
from .export import export_dot, export_transitions_csv, format_stats
from .features import enumerate_configurations
from .language import parse_expression, parse_model, parse_property_file, print_property, typecheck
from .language.typecheck import resolve_labels, resolve_property

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_CONVERGENCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class Experiment:
    name: str
    start: int
    stop: int
    step: int = 1


@dataclass
class CliConfig:
    subcommand: str
    model: Path | None = None
    properties: Path | None = None
    constants: dict[str, str] = field(default_factory=dict)
    epsilon: float = 1e-6
    max_iters: int = 10**6
    absolute: bool = False
    experiments: list[Experiment] = field(default_factory=list)
    threads: int = 1
    state_cap: int | None = None

    def check_options(self) -> CheckOptions:
        return CheckOptions(self.epsilon, self.max_iters, not self.absolute, self.threads)


def parse_constant(text: str) -> tuple[str, str]:
    name, sep, value = text.partition("=")
    if not sep or not name.strip() or not value.strip():
        raise UsageError(f"constant override {text!r} is not of the form name=value")
    return name.strip(), value.strip()


def parse_experiment(text: str) -> Experiment:
    name, sep, spec = text.partition("=")
    parts = spec.split(":")
    if not sep or not name.strip() or len(parts) not in (2, 3):
        raise UsageError(f"experiment {text!r} is not of the form name=from:to[:step]")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"experiment {text!r}: bounds must be integers") from None
    exp = Experiment(name.strip(), nums[0], nums[1], nums[2] if len(nums) == 3 else 1)
    if exp.step < 1 or exp.start > exp.stop:
        raise UsageError(f"experiment {text!r}: empty range")
    return exp


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be at least 1")
    return value


def _epsilon(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("epsilon must be positive")
    return value


def _add_model_args(p: argparse.ArgumentParser, props: bool = False, props_optional: bool = False):
    p.add_argument("model", type=Path, help="model file (.pfm)")
    if props:
        p.add_argument("properties", type=Path, nargs="?" if props_optional else None, help="property file (.props)")
    p.add_argument("-c", "--const", dest="constants", action="append", default=[], metavar="NAME=VALUE",
                   help="override a constant (repeatable)")
    p.add_argument("--state-cap", type=_positive, help="maximum number of states (default: $FEATMC_STATE_CAP or 10^7)")


def _add_check_args(p: argparse.ArgumentParser):
    p.add_argument("--epsilon", type=_epsilon, default=1e-6, help="convergence threshold (default 1e-6)")
    p.add_argument("--max-iters", type=_positive, default=10**6, help="value-iteration limit (default 10^6)")
    p.add_argument("--absolute", action="store_true", help="absolute instead of relative convergence criterion")
    p.add_argument("--threads", type=_positive, default=1, help="worker threads; output does not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="featmc", description="Model checking of feature-controlled MDPs.")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser, metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("validate", help="parse and typecheck a model, report feature-model statistics")
    _add_model_args(p)

    p = sub.add_parser("check", help="compile a model and evaluate every property")
    _add_model_args(p, props=True)
    _add_check_args(p)
    p.add_argument("--experiment", action="append", default=[], metavar="NAME=FROM:TO[:STEP]",
                   help="sweep an unbound property constant")
    p.add_argument("--csv-dir", type=Path, help="write one k,value CSV per experiment here")
    p.add_argument("--stats", action="store_true", help="also print state-space statistics")

    p = sub.add_parser("simulate", help="Monte-Carlo rollouts under a fixed or uniform policy")
    _add_model_args(p, props=True, props_optional=True)
    p.add_argument("--target", required=True, help='state formula or quoted label, e.g. "s=done"')
    p.add_argument("--reward", help="estimate this reward structure until target instead of reachability")
    p.add_argument("--policy", default="uniform", help="uniform | first | random:SEED (default uniform)")
    p.add_argument("--trials", type=_positive, default=10**4)
    p.add_argument("--max-steps", type=_positive, default=10**4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive, default=1)
    p.add_argument("--samples-csv", type=Path, help="write per-trial outcomes here")
    p.add_argument("--compare", action="store_true", help="also print the checker's value on the induced chain")

    p = sub.add_parser("export", help="write the compiled MDP as DOT and/or transitions CSV")
    _add_model_args(p)
    p.add_argument("--dot", type=Path, help="DOT output file ('-' for stdout)")
    p.add_argument("--csv", type=Path, help="transitions CSV output file ('-' for stdout)")
    p.add_argument("--stats", action="store_true", help="print key=value statistics")

    p = sub.add_parser("reproduce", help="run the AUV case-study analysis")
    p.add_argument("scenarios", nargs="*", help="scenario number, name or .kv path (default: all bundled)")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory (default results/)")
    p.add_argument("--published", type=Path, help="constant overrides with published probabilities "
                   "(default: overrides/published.kv when present)")
    p.add_argument("--state-cap", type=_positive)
    _add_check_args(p)
    return parser


# --------------------------------------------------------------------------
# helpers


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except FileNotFoundError:
        raise ModelError("file not found", source=str(path)) from None
    except OSError as exc:
        raise ModelError(f"cannot read file: {exc.strerror}", source=str(path)) from None


def _with_source(exc: ModelError, path: Path) -> ModelError:
    return exc if exc.source else exc.with_source(str(path))


def _load_model(path: Path, overrides: dict[str, str]):
    text = _read(path)
    try:
        ast = parse_model(text)
        return ast, typecheck(ast, overrides)
    except ModelError as exc:
        raise _with_source(exc, path) from None


def _split_constants(args, model_path: Path, prop_params=()) -> tuple[dict[str, str], dict[str, int]]:
    """Split ``-c`` overrides into model constants and property parameter bindings."""
    pairs = dict(parse_constant(c) for c in args.constants)
    try:
        declared = {c.name for c in parse_model(_read(model_path)).constants}
    except ModelError as exc:
        raise _with_source(exc, model_path) from None
    model_ov, bindings = {}, {}
    for name, value in pairs.items():
        if name in declared or name not in prop_params:
            model_ov[name] = value
        else:
            try:
                bindings[name] = int(value)
            except ValueError:
                raise UsageError(f"property constant {name} needs an integer, got {value!r}") from None
    return model_ov, bindings


def _write(path: Path, text: str, out):
    if str(path) == "-":
        out.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args, out) -> int:
    overrides, _ = _split_constants(args, args.model)
    ast, model = _load_model(args.model, overrides)
    fm = model.feature_model
    configs = enumerate_configurations(fm)
    out.write(f"features: {len(fm.features)}\n")
    out.write(f"modules: {len(model.modules)}\n")
    out.write(f"variables: {len(model.variables)}\n")
    out.write(f"commands: {sum(len(m.commands) for m in model.modules)}\n")
    out.write(f"controller rules: {len(model.controller)}\n")
    out.write(f"initial configuration: {{{', '.join(f for f in fm.leaves() if f in model.initial_config)}}}\n")
    out.write(f"valid configurations: {len(configs)}\n")
    return EXIT_OK


def _props(path: Path):
    text = _read(path)
    try:
        return parse_property_file(text)
    except ModelError as exc:
        raise _with_source(exc, path) from None


def cmd_check(args, out) -> int:
    _read(args.model)  # report a missing model before a missing property file
    pf = _props(args.properties)
    overrides, bindings = _split_constants(args, args.model, pf.parameters)
    experiments = [parse_experiment(e) for e in args.experiment]
    cfg = CliConfig("check", args.model, args.properties, overrides, args.epsilon, args.max_iters,
                    args.absolute, experiments, args.threads, args.state_cap)
    _, model = _load_model(args.model, overrides)
    try:
        labels = resolve_labels(model, pf.labels)
        typed = [resolve_property(p, model, labels, pf.parameters) for p in pf.properties]
    except ModelError as exc:
        raise _with_source(exc, args.properties) from None
    mdp = compile_model(model, cfg.state_cap)
    if args.stats:
        out.write(format_stats(mdp))
    options = cfg.check_options()
    by_name = {e.name: e for e in experiments}
    for e in experiments:
        if e.name not in pf.parameters:
            raise UsageError(f"experiment parameter {e.name} is not a constant of {args.properties}")

    def job(tp):
        free = [p for p in tp.parameters if p not in bindings]
        if not free:
            return "value", checker.evaluate_property(mdp, tp, bindings, labels, options)
        if len(free) == 1 and free[0] in by_name:
            e = by_name[free[0]]
            return "series", (e, checker.run_experiment(mdp, tp, e.name, e.start, e.stop, e.step, labels, options))
        return "skip", free

    # properties are independent; threads change throughput only, never the output
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(job, typed))
    else:
        results = [job(tp) for tp in typed]

    n_exp = 0
    for tp, (kind, res) in zip(typed, results):
        text = print_property(tp.source)
        if kind == "value":
            out.write(f"{text} = {format_value(res.value)}\n")
        elif kind == "series":
            e, series = res
            for k, v in series.series:
                out.write(f"{text} [{e.name}={k}] = {format_value(v)}\n")
            n_exp += 1
            if args.csv_dir:
                rows = "k,value\n" + "".join(f"{k},{format_value(v)}\n" for k, v in series.series)
                _write(args.csv_dir / f"experiment{n_exp}.csv", rows, out)
        else:
            print(f"featmc: skipped {text}: unbound constant(s) {', '.join(res)}; use --experiment or -c",
                  file=sys.stderr)
    return EXIT_OK


def _parse_policy(text: str, mdp) -> oracle.Policy:
    if text == "uniform":
        return oracle.Policy.uniform()
    if text == "first":
        return oracle.Policy.fixed({s: 0 for s in range(mdp.num_states)})
    if text.startswith("random:"):
        try:
            return oracle.Policy.seeded(mdp, int(text.split(":", 1)[1]))
        except ValueError:
            pass
    raise UsageError(f"unknown policy {text!r}; use uniform, first or random:SEED")


def cmd_simulate(args, out) -> int:
    pf = _props(args.properties) if args.properties else None
    overrides, _ = _split_constants(args, args.model)
    _, model = _load_model(args.model, overrides)
    try:
        labels = resolve_labels(model, pf.labels) if pf else {}
        expr = model.scope(labels).resolver().resolve(parse_expression(args.target, allow_labels=True))
    except ModelError as exc:
        raise exc.with_source("--target") if not exc.source else exc from None
    mdp = compile_model(model, args.state_cap)
    target = mdp.state_set(expr, labels)
    policy = _parse_policy(args.policy, mdp)
    if args.reward:
        objective = oracle.CumulatedReward(args.reward, target)
    else:
        objective = oracle.Reach(target)
    est = oracle.simulate_paths(mdp, policy, args.trials, args.max_steps, args.seed, objective,
                                threads=args.threads, keep_samples=args.samples_csv is not None)
    out.write(f"policy = {args.policy}\n")
    out.write(est.format() + "\n")
    if args.compare:
        chain = oracle.induced_chain(mdp, policy)
        if args.reward:
            vec = checker.expected_reward(chain, args.reward, target, checker.MIN)
        else:
            vec = checker.reach_probability(chain, target, checker.MIN)
        out.write(f"checker (induced chain) = {format_value(float(vec[mdp.initial]))}\n")
    if args.samples_csv:
        rows = "trial,value\n" + "".join(f"{i},{format_value(v)}\n" for i, v in enumerate(est.samples))
        _write(args.samples_csv, rows, out)
    return EXIT_OK


def cmd_export(args, out) -> int:
    if not (args.dot or args.csv or args.stats):
        raise UsageError("export: give at least one of --dot, --csv, --stats")
    overrides, _ = _split_constants(args, args.model)
    _, model = _load_model(args.model, overrides)
    mdp = compile_model(model, args.state_cap)
    if args.stats:
        out.write(format_stats(mdp))
    if args.dot:
        _write(args.dot, export_dot(mdp), out)
    if args.csv:
        _write(args.csv, export_transitions_csv(mdp), out)
    return EXIT_OK


def cmd_reproduce(args, out) -> int:
    scenarios = [casestudy.find_scenario(s) for s in args.scenarios] or casestudy.bundled_scenarios()
    published = casestudy.load_published(args.published)
    if args.published and published is None:
        raise ModelError("file not found", source=str(args.published))
    options = CheckOptions(args.epsilon, args.max_iters, not args.absolute, args.threads)
    reports = [casestudy.run_standard_analysis(sc, options, published, args.state_cap) for sc in scenarios]
    casestudy.write_outputs(reports, args.out)
    out.write("\n".join(r.format() for r in reports))
    out.write("\n" + casestudy.table2_csv(reports))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "check": cmd_check,
    "simulate": cmd_simulate,
    "export": cmd_export,
    "reproduce": cmd_reproduce,
}


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.subcommand](args, out)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except BrokenPipeError:  # e.g. piped into head
        sys.stderr.close()
        return EXIT_OK
    except UsageError as exc:
        print(f"featmc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"featmc: error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ModelError as exc:
        print(f"{exc}" if exc.source else f"featmc: error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
