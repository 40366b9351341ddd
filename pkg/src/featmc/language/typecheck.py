"""Name resolution, constant folding and typing of models and properties."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from ..errors import FeatureModelError, TypeCheckError
from .. import features as fm_mod  # module import: features itself imports the language package
from . import syntax as ast
from .evaluate import evaluate_expr

NUMERIC = (ast.INT, ast.DOUBLE)


@dataclass(frozen=True)
class Variable:
    name: str
    module: str
    low: int
    high: int
    init: int


@dataclass(frozen=True)
class TypedBranch:
    prob: Fraction
    updates: tuple[tuple[int, ast.Expr], ...]  # (variable slot, int-typed expression)


@dataclass(frozen=True)
class TypedCommand:
    module: str
    number: int  # position within its module, for diagnostics
    action: str | None
    guard: ast.Expr
    branches: tuple[TypedBranch, ...]
    pos: object = field(default=None, compare=False)

    def describe(self) -> str:
        where = f" at {self.pos}" if self.pos else ""
        return f"command #{self.number + 1} [{self.action or ''}] of module {self.module}{where}"


@dataclass(frozen=True)
class TypedModule:
    name: str
    variables: tuple[int, ...]  # slots
    commands: tuple[TypedCommand, ...]

    @property
    def actions(self) -> frozenset[str]:
        return frozenset(c.action for c in self.commands if c.action is not None)


@dataclass(frozen=True)
class TypedSwitch:
    number: int
    action: str | None
    guard: ast.Expr
    activate: frozenset[str]
    deactivate: frozenset[str]
    pos: object = field(default=None, compare=False)

    def describe(self) -> str:
        where = f" at {self.pos}" if self.pos else ""
        return f"controller command #{self.number + 1} [{self.action or ''}]{where}"


@dataclass(frozen=True)
class TypedReward:
    action: str | None
    transition: bool
    guard: ast.Expr
    value: ast.Expr


@dataclass(frozen=True)
class TypedModel:
    constants: Mapping[str, ast.Value]
    constant_types: Mapping[str, str]
    feature_model: fm_mod.FeatureModel
    initial_config: fm_mod.Configuration
    variables: tuple[Variable, ...]
    modules: tuple[TypedModule, ...]
    controller: tuple[TypedSwitch, ...] | None
    rewards: Mapping[str, tuple[TypedReward, ...]]
    labels: Mapping[str, ast.Expr]
    formulas: Mapping[str, ast.Expr] = field(compare=False, repr=False, default_factory=dict)

    @property
    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def scope(self, labels: Mapping[str, ast.Expr] | None = None, parameters=()) -> "Scope":
        return Scope(self, dict(self.labels) | dict(labels or {}), tuple(parameters))


def _literal(value, pos=None) -> ast.Literal:
    if isinstance(value, bool):
        return ast.Literal(value, pos=pos, type=ast.BOOL)
    if isinstance(value, int):
        return ast.Literal(value, pos=pos, type=ast.INT)
    return ast.Literal(Fraction(value), pos=pos, type=ast.DOUBLE)


def parse_literal(text: str, ctype: str, name: str = "") -> ast.Value:
    """Parse a constant override such as ``10``, ``0.6`` or ``true``."""
    text = text.strip()
    try:
        if ctype == ast.BOOL:
            if text not in ("true", "false"):
                raise ValueError
            return text == "true"
        if ctype == ast.INT:
            return int(text)
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise TypeCheckError(f"value {text!r} for constant {name} is not a valid {ctype}") from None


def _coerce(value, ctype: str, name: str, pos=None):
    if isinstance(value, str):
        return parse_literal(value, ctype, name)
    if ctype == ast.BOOL:
        if isinstance(value, bool):
            return value
    elif ctype == ast.INT:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, Fraction) and value.denominator == 1:
            return int(value)
    else:
        if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(repr(value))
    raise TypeCheckError(f"type mismatch: constant {name} of type {ctype} cannot take value {value!r}", pos)


class Resolver:
    """Resolves identifiers and folds constant sub-expressions."""

    def __init__(
        self,
        const_decls: Mapping[str, ast.ConstDecl],
        formulas: Mapping[str, ast.Expr],
        overrides: Mapping[str, object],
        variables: Mapping[str, int],
        features: frozenset[str],
    ):
        self.const_decls = const_decls
        self.formulas = formulas
        self.overrides = overrides
        self.variables = variables
        self.features = features
        self.constants: dict[str, ast.Value] = {}
        self._formula_cache: dict[str, ast.Expr] = {}
        self._active: list[str] = []
        self.allow_labels: Mapping[str, object] | None = None
        self.parameters: tuple[str, ...] = ()
        self.allow_variables = True
        self.allow_features = True

    def constant(self, name: str, pos=None) -> ast.Value:
        if name in self.constants:
            return self.constants[name]
        if name in self._active:
            raise TypeCheckError(f"cyclic definition involving {name}", pos)
        decl = self.const_decls[name]
        self._active.append(name)
        try:
            if name in self.overrides:
                value = _coerce(self.overrides[name], decl.type, name, decl.pos)
            elif decl.value is not None:
                saved = self.allow_variables, self.allow_features
                self.allow_variables = self.allow_features = False
                try:
                    expr = self.resolve(decl.value)
                finally:
                    self.allow_variables, self.allow_features = saved
                if not isinstance(expr, ast.Literal):
                    raise TypeCheckError(f"constant {name} is not a constant expression", decl.pos)
                value = _coerce(expr.value, decl.type, name, decl.pos)
            else:
                raise TypeCheckError(f"unresolved constant {name}", decl.pos)
        finally:
            self._active.pop()
        self.constants[name] = value
        return value

    def formula(self, name: str, pos=None) -> ast.Expr:
        if name in self._formula_cache:
            return self._formula_cache[name]
        if name in self._active:
            raise TypeCheckError(f"cyclic definition involving {name}", pos)
        self._active.append(name)
        try:
            expr = self.resolve(self.formulas[name])
        finally:
            self._active.pop()
        self._formula_cache[name] = expr
        return expr

    def resolve(self, expr: ast.Expr) -> ast.Expr:
        pos = expr.pos
        if isinstance(expr, ast.Literal):
            return _literal(expr.value, pos)
        if isinstance(expr, ast.Ident):
            name = expr.name
            if name in self.parameters:
                return ast.Ident(name, pos=pos, type=ast.INT)
            if name in self.const_decls:
                return _literal(self.constant(name, pos), pos)
            if name in self.formulas:
                return self.formula(name, pos)
            if name in self.variables:
                if not self.allow_variables:
                    raise TypeCheckError(f"state variable {name} not allowed in a constant expression", pos)
                return ast.Var(name, self.variables[name], pos=pos, type=ast.INT)
            if name in self.features:
                raise TypeCheckError(f"feature {name} used as a value; write active({name})", pos)
            raise TypeCheckError(f"undefined identifier {name}", pos)
        if isinstance(expr, ast.Var):
            return expr
        if isinstance(expr, ast.Active):
            if expr.feature not in self.features:
                raise TypeCheckError(f"undefined feature {expr.feature}", pos)
            if not self.allow_features:
                raise TypeCheckError(f"active({expr.feature}) not allowed in a constant expression", pos)
            return ast.Active(expr.feature, pos=pos, type=ast.BOOL)
        if isinstance(expr, ast.LabelRef):
            if self.allow_labels is None:
                raise TypeCheckError(f'label "{expr.name}" not allowed here', pos)
            if expr.name not in self.allow_labels:
                raise TypeCheckError(f'unknown label "{expr.name}"', pos)
            return ast.LabelRef(expr.name, pos=pos, type=ast.BOOL)
        if isinstance(expr, ast.Unary):
            operand = self.resolve(expr.operand)
            if expr.op == "!":
                self._expect(operand, (ast.BOOL,), "operand of !")
                rtype = ast.BOOL
            else:
                self._expect(operand, NUMERIC, "operand of unary -")
                rtype = operand.type
            return self._fold(ast.Unary(expr.op, operand, pos=pos, type=rtype))
        if isinstance(expr, ast.Binary):
            left, right = self.resolve(expr.left), self.resolve(expr.right)
            op = expr.op
            if op in ("&", "|", "=>"):
                self._expect(left, (ast.BOOL,), f"left operand of {op}")
                self._expect(right, (ast.BOOL,), f"right operand of {op}")
                rtype = ast.BOOL
            elif op in ("=", "!="):
                if (left.type == ast.BOOL) != (right.type == ast.BOOL):
                    raise TypeCheckError(f"type mismatch: cannot compare {left.type} with {right.type}", pos)
                rtype = ast.BOOL
            elif op in ("<", "<=", ">", ">="):
                self._expect(left, NUMERIC, f"left operand of {op}")
                self._expect(right, NUMERIC, f"right operand of {op}")
                rtype = ast.BOOL
            else:
                self._expect(left, NUMERIC, f"left operand of {op}")
                self._expect(right, NUMERIC, f"right operand of {op}")
                if op == "/":
                    rtype = ast.DOUBLE
                else:
                    rtype = ast.INT if left.type == right.type == ast.INT else ast.DOUBLE
            return self._fold(ast.Binary(op, left, right, pos=pos, type=rtype))
        if isinstance(expr, ast.Ite):
            cond = self.resolve(expr.cond)
            self._expect(cond, (ast.BOOL,), "condition of ?:")
            then, other = self.resolve(expr.then), self.resolve(expr.other)
            if then.type == other.type:
                rtype = then.type
            elif then.type in NUMERIC and other.type in NUMERIC:
                rtype = ast.DOUBLE
            else:
                raise TypeCheckError(f"type mismatch: branches of ?: are {then.type} and {other.type}", pos)
            if isinstance(cond, ast.Literal):
                chosen = then if cond.value else other
                return _retype(chosen, rtype)
            return ast.Ite(cond, then, other, pos=pos, type=rtype)
        if isinstance(expr, ast.Call):
            args = tuple(self.resolve(a) for a in expr.args)
            arity = ast.FUNCTIONS[expr.func]
            if arity is not None and len(args) != arity:
                raise TypeCheckError(f"{expr.func} expects {arity} argument(s), got {len(args)}", pos)
            if arity is None and not args:
                raise TypeCheckError(f"{expr.func} expects at least one argument", pos)
            for a in args:
                self._expect(a, NUMERIC, f"argument of {expr.func}")
            if expr.func in ("round", "floor", "ceil"):
                rtype = ast.INT
            elif expr.func == "mod":
                for a in args:
                    self._expect(a, (ast.INT,), "argument of mod")
                rtype = ast.INT
            else:
                rtype = ast.INT if all(a.type == ast.INT for a in args) else ast.DOUBLE
            return self._fold(ast.Call(expr.func, args, pos=pos, type=rtype))
        raise TypeError(f"unexpected node {expr!r}")

    @staticmethod
    def _expect(expr: ast.Expr, types, what: str):
        if expr.type not in types:
            raise TypeCheckError(f"type mismatch: {what} must be {' or '.join(types)}, found {expr.type}", expr.pos)

    @staticmethod
    def _fold(expr: ast.Expr) -> ast.Expr:
        children = [c for c in vars(expr).values() if isinstance(c, ast.Expr)]
        if isinstance(expr, ast.Call):
            children = list(expr.args)
        if not all(isinstance(c, ast.Literal) for c in children):
            return expr
        try:
            value = evaluate_expr(expr)
        except Exception as exc:  # division by zero and friends
            raise TypeCheckError(str(exc), expr.pos) from None
        if expr.type == ast.DOUBLE:
            value = Fraction(value)
        elif expr.type == ast.INT:
            value = int(value)
        return _literal(value, expr.pos)


def _retype(expr: ast.Expr, rtype: str) -> ast.Expr:
    if expr.type == rtype:
        return expr
    if isinstance(expr, ast.Literal):
        return _literal(Fraction(expr.value), expr.pos)
    # an int expression used where a double is expected: promote by * 1.0
    return ast.Binary("*", expr, _literal(Fraction(1)), pos=expr.pos, type=rtype)


@dataclass
class Scope:
    """Resolution context for property state formulas."""

    model: TypedModel
    labels: dict
    parameters: tuple[str, ...]

    def resolver(self) -> Resolver:
        decls = {
            name: ast.ConstDecl(name, self.model.constant_types[name], None)
            for name in self.model.constants
        }
        r = Resolver(
            decls,
            self.model.formulas,
            dict(self.model.constants),
            {v.name: i for i, v in enumerate(self.model.variables)},
            frozenset(self.model.feature_model.features),
        )
        r.allow_labels = self.labels
        r.parameters = self.parameters
        return r


def _check_unique(kind_by_name: dict, name: str, kind: str, pos):
    if name in kind_by_name:
        raise TypeCheckError(f"name {name} declared as both {kind_by_name[name]} and {kind}", pos)
    kind_by_name[name] = kind


def _feature_model(model: ast.ModelAst, resolver_factory) -> tuple[fm_mod.FeatureModel, list[str]]:
    roots = [f for f in model.features if f.root]
    if len(roots) != 1:
        raise TypeCheckError(f"model must declare exactly one root feature, found {len(roots)}")
    groups = {}
    declared = set()
    for f in model.features:
        if f.name in declared:
            raise TypeCheckError(f"feature {f.name} declared twice", f.pos)
        declared.add(f.name)
        if f.group is not None:
            groups[f.name] = (f.group, f.children)
        elif f.children:
            raise TypeCheckError(f"feature {f.name} lists children without a group", f.pos)
    try:
        skeleton = fm_mod.build_feature_model(roots[0].name, groups)
    except FeatureModelError as exc:
        raise TypeCheckError(exc.message, roots[0].pos) from None
    for f in model.features:
        if f.name not in skeleton.index:
            raise TypeCheckError(f"feature {f.name} is not part of the feature tree", f.pos)
    return skeleton, list(skeleton.features)


def typecheck(model: ast.ModelAst, overrides: Mapping[str, object] | None = None) -> TypedModel:
    """Resolve constants, inline formulas, type every expression and build the feature model."""
    overrides = dict(overrides or {})
    const_decls: dict[str, ast.ConstDecl] = {}
    kinds: dict[str, str] = {}
    for c in model.constants:
        _check_unique(kinds, c.name, "constant", c.pos)
        const_decls[c.name] = c
    for name in overrides:
        if name not in const_decls:
            raise TypeCheckError(f"override for undeclared constant {name}")
    formulas = {}
    for f in model.formulas:
        _check_unique(kinds, f.name, "formula", f.pos)
        formulas[f.name] = f.expr

    skeleton, feature_names = _feature_model(model, None)
    for name in feature_names:
        _check_unique(kinds, name, "feature", None)

    module_names = set()
    var_slots: dict[str, int] = {}
    var_owner: dict[str, str] = {}
    for m in model.modules:
        if m.name in module_names:
            raise TypeCheckError(f"module {m.name} declared twice", m.pos)
        module_names.add(m.name)
        for v in m.variables:
            _check_unique(kinds, v.name, "variable", v.pos)
            var_slots[v.name] = len(var_slots)
            var_owner[v.name] = m.name
    for lab in model.labels:
        _check_unique(kinds, lab.name, "label", lab.pos)

    r = Resolver(const_decls, formulas, overrides, var_slots, frozenset(feature_names))
    for name in const_decls:
        r.constant(name)

    def bool_expr(e: ast.Expr, what: str, *, variables=True) -> ast.Expr:
        saved = r.allow_variables
        r.allow_variables = variables
        try:
            out = r.resolve(e)
        finally:
            r.allow_variables = saved
        if out.type != ast.BOOL:
            raise TypeCheckError(f"type mismatch: {what} must be bool, found {out.type}", e.pos)
        return out

    def const_int(e: ast.Expr, what: str) -> int:
        saved = r.allow_variables, r.allow_features
        r.allow_variables = r.allow_features = False
        try:
            out = r.resolve(e)
        finally:
            r.allow_variables, r.allow_features = saved
        if not isinstance(out, ast.Literal) or out.type != ast.INT:
            raise TypeCheckError(f"{what} must be a constant int expression", e.pos)
        return out.value

    # feature model with constraints
    constraints, initial = [], []
    for f in model.features:
        for con in f.constraints:
            if isinstance(con, ast.Requires):
                for name in (con.feature, con.required):
                    if name not in skeleton.index:
                        raise TypeCheckError(f"undefined feature {name}", con.pos)
                con = ast.Binary("=>", ast.Active(con.feature), ast.Active(con.required), pos=con.pos)
            constraints.append(bool_expr(con, "feature constraint", variables=False))
        for e in f.initial:
            initial.append(bool_expr(e, "initial constraint", variables=False))
    try:
        fm = fm_mod.FeatureModel(skeleton.features, skeleton.groups, tuple(constraints), tuple(initial))
        init_config = fm_mod.initial_configuration(fm)
    except FeatureModelError as exc:
        raise TypeCheckError(exc.message, exc.pos) from None

    # module attachment: modules named under a non-root feature only act while it is active
    attached: dict[str, str] = {}
    for f in model.features:
        for mname in f.modules:
            if mname not in module_names:
                raise TypeCheckError(f"feature {f.name} names undeclared module {mname}", f.pos)
            if mname in attached:
                raise TypeCheckError(f"module {mname} attached to features {attached[mname]} and {f.name}", f.pos)
            attached[mname] = f.name
    for m in model.modules:
        if m.name not in attached:
            raise TypeCheckError(f"module {m.name} is not attached to any feature (use 'modules {m.name};')", m.pos)

    variables = []
    for m in model.modules:
        for v in m.variables:
            low = const_int(v.low, f"lower bound of {v.name}")
            high = const_int(v.high, f"upper bound of {v.name}")
            init = const_int(v.init, f"initial value of {v.name}")
            if not low <= init <= high:
                raise TypeCheckError(f"initial value {init} of {v.name} outside [{low}..{high}]", v.pos)
            variables.append(Variable(v.name, m.name, low, high, init))

    modules = []
    for m in model.modules:
        owner = attached[m.name]
        commands = []
        for number, cmd in enumerate(m.commands):
            guard = bool_expr(cmd.guard, "guard")
            if owner != fm.root:
                guard = ast.Binary("&", ast.Active(owner, type=ast.BOOL), guard, pos=cmd.pos, type=ast.BOOL)
            branches = []
            for br in cmd.branches:
                prob = _probability(r, br.prob)
                seen = set()
                updates = []
                for a in br.updates:
                    if a.var not in var_slots:
                        raise TypeCheckError(f"assignment to undeclared variable {a.var}", a.pos)
                    if var_owner[a.var] != m.name:
                        raise TypeCheckError(
                            f"module {m.name} assigns {a.var}, which belongs to module {var_owner[a.var]}", a.pos
                        )
                    if a.var in seen:
                        raise TypeCheckError(f"variable {a.var} assigned twice in one update", a.pos)
                    seen.add(a.var)
                    value = r.resolve(a.expr)
                    if value.type != ast.INT:
                        raise TypeCheckError(
                            f"type mismatch: assignment to int variable {a.var} has type {value.type}", a.pos
                        )
                    updates.append((var_slots[a.var], value))
                branches.append(TypedBranch(prob, tuple(updates)))
            commands.append(TypedCommand(m.name, number, cmd.action, guard, tuple(branches), cmd.pos))
        modules.append(TypedModule(m.name, tuple(var_slots[v.name] for v in m.variables), tuple(commands)))

    controller = None
    if model.controller is not None:
        controller = []
        for number, cmd in enumerate(model.controller.commands):
            guard = bool_expr(cmd.guard, "controller guard")
            if len(cmd.branches) != 1:
                raise TypeCheckError(
                    "controller branch with probability != 1: feature switches cannot be probabilistic", cmd.pos
                )
            br = cmd.branches[0]
            if _probability(r, br.prob) != 1:
                raise TypeCheckError(
                    "controller branch with probability != 1: feature switches cannot be probabilistic", br.pos
                )
            for f in (*br.activate, *br.deactivate):
                if f not in fm.index:
                    raise TypeCheckError(f"undefined feature {f}", br.pos)
            clash = set(br.activate) & set(br.deactivate)
            if clash:
                raise TypeCheckError(f"feature(s) {', '.join(sorted(clash))} both activated and deactivated", br.pos)
            controller.append(
                TypedSwitch(number, cmd.action, guard, frozenset(br.activate), frozenset(br.deactivate), cmd.pos)
            )
        controller = tuple(controller)

    rewards: dict[str, list[TypedReward]] = {}
    for f in model.features:
        for rew in f.rewards:
            items = rewards.setdefault(rew.name, [])
            for item in rew.items:
                guard = bool_expr(item.guard, "reward guard")
                if f.name != fm.root:
                    guard = ast.Binary("&", ast.Active(f.name, type=ast.BOOL), guard, type=ast.BOOL)
                value = r.resolve(item.value)
                if value.type not in NUMERIC:
                    raise TypeCheckError(f"type mismatch: reward value must be numeric, found {value.type}", item.pos)
                items.append(TypedReward(item.action, item.transition, guard, value))

    labels = {lab.name: bool_expr(lab.expr, f'label "{lab.name}"') for lab in model.labels}

    return TypedModel(
        constants=dict(r.constants),
        constant_types={c.name: c.type for c in model.constants},
        feature_model=fm,
        initial_config=init_config,
        variables=tuple(variables),
        modules=tuple(modules),
        controller=controller,
        rewards={k: tuple(v) for k, v in rewards.items()},
        labels=labels,
        formulas=formulas,
    )


def _probability(r: Resolver, expr: ast.Expr | None) -> Fraction:
    if expr is None:
        return Fraction(1)
    saved = r.allow_variables, r.allow_features
    r.allow_variables = r.allow_features = False
    try:
        out = r.resolve(expr)
    except TypeCheckError as exc:
        if "not allowed in a constant expression" in exc.message:
            raise TypeCheckError(f"probability expression not constant: {exc.message}", exc.pos) from None
        raise
    finally:
        r.allow_variables, r.allow_features = saved
    if not isinstance(out, ast.Literal) or out.type not in NUMERIC:
        raise TypeCheckError("probability expression not constant", expr.pos)
    return Fraction(out.value)


# --------------------------------------------------------------------------
# properties


@dataclass(frozen=True)
class TypedProperty:
    """A property whose state formulas are resolved against a model."""

    source: ast.Property  # the untyped AST, for printing
    query: ast.Property  # same shape with resolved expressions
    parameters: tuple[str, ...]  # free experiment parameters


def _param_names(expr: ast.Expr | None) -> set[str]:
    if isinstance(expr, ast.Ident):
        return {expr.name}
    return set()


def resolve_property(
    prop: ast.Property,
    model: TypedModel,
    labels: Mapping[str, ast.Expr] | None = None,
    parameters=(),
) -> TypedProperty:
    """Type a property against ``model``; ``labels`` adds property-file labels."""
    scope = model.scope(labels, parameters)
    r = scope.resolver()

    def state(e: ast.Expr) -> ast.Expr:
        out = r.resolve(e)
        if out.type != ast.BOOL:
            raise TypeCheckError(f"type mismatch: state formula must be bool, found {out.type}", e.pos)
        return out

    def bound(e: ast.Expr | None) -> ast.Expr | None:
        if e is None:
            return None
        if isinstance(e, ast.Ident) and e.name not in model.constants:
            r.parameters = tuple(set(r.parameters) | {e.name})
        out = r.resolve(e)
        if out.type != ast.INT:
            raise TypeCheckError("step bound must be an int", e.pos)
        if isinstance(out, ast.Literal) and out.value < 0:
            raise TypeCheckError("step bound must be non-negative", e.pos)
        return out

    def query(q):
        if isinstance(q, ast.ProbQuery):
            if isinstance(q.path, ast.Globally):
                return ast.ProbQuery(q.mode, ast.Globally(state(q.path.target)), pos=q.pos)
            return ast.ProbQuery(q.mode, ast.Eventually(state(q.path.target), bound(q.path.bound)), pos=q.pos)
        if q.structure not in model.rewards:
            raise TypeCheckError(f'unknown reward structure "{q.structure}"', q.pos)
        return ast.RewardQuery(q.structure, q.mode, state(q.target), pos=q.pos)

    if isinstance(prop, ast.Filter):
        typed = ast.Filter(prop.aggregate, query(prop.query), state(prop.states), pos=prop.pos)
        inner = prop.query
    else:
        typed = query(prop)
        inner = prop
    params = set()
    if isinstance(inner, ast.ProbQuery) and isinstance(inner.path, ast.Eventually):
        params = {p for p in _param_names(inner.path.bound) if p not in model.constants}
    return TypedProperty(prop, typed, tuple(sorted(params)))


def resolve_labels(model: TypedModel, decls) -> dict[str, ast.Expr]:
    """Type property-file label declarations; they may reference model labels."""
    out: dict[str, ast.Expr] = {}
    for decl in decls:
        if decl.name in model.labels or decl.name in out:
            raise TypeCheckError(f'label "{decl.name}" declared twice', decl.pos)
        r = model.scope(out).resolver()
        expr = r.resolve(decl.expr)
        if expr.type != ast.BOOL:
            raise TypeCheckError(f'type mismatch: label "{decl.name}" must be bool', decl.pos)
        out[decl.name] = expr
    return out
