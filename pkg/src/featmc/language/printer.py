"""Pretty-printer producing source text that parses back to an equal AST."""

from __future__ import annotations

from fractions import Fraction

from . import syntax as ast


def format_number(value: Fraction) -> str:
    """Shortest exact decimal for ``value`` if one exists, else ``num/den``."""
    if value.denominator == 1:
        return f"{value.numerator}.0"
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = abs(value) * 10**digits
    whole, frac = divmod(int(scaled), 10**digits)
    sign = "-" if value < 0 else ""
    return f"{sign}{whole}.{frac:0{digits}d}"


def _literal(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    text = format_number(value)
    # a non-decimal rational has no literal form; emit it as a division
    return f"({text})" if "/" in text else text


def _prec(expr: ast.Expr) -> int:
    if isinstance(expr, ast.Ite):
        return ast.ITE_PRECEDENCE
    if isinstance(expr, ast.Binary):
        return ast.BINARY_PRECEDENCE[expr.op]
    if isinstance(expr, ast.Unary):
        return ast.NOT_PRECEDENCE if expr.op == "!" else ast.NEG_PRECEDENCE
    if isinstance(expr, ast.Literal) and not isinstance(expr.value, bool) and expr.value < 0:
        return ast.NEG_PRECEDENCE
    return 100


def _wrap(expr: ast.Expr, min_prec: int) -> str:
    text = print_expr(expr)
    return f"({text})" if _prec(expr) < min_prec else text


def print_expr(expr: ast.Expr) -> str:
    if isinstance(expr, ast.Literal):
        return _literal(expr.value)
    if isinstance(expr, (ast.Ident, ast.Var)):
        return expr.name
    if isinstance(expr, ast.Active):
        return f"active({expr.feature})"
    if isinstance(expr, ast.LabelRef):
        return f'"{expr.name}"'
    if isinstance(expr, ast.Unary):
        if expr.op == "!":
            return "!" + _wrap(expr.operand, ast.NOT_PRECEDENCE + 1)
        return "-" + _wrap(expr.operand, ast.NEG_PRECEDENCE)
    if isinstance(expr, ast.Binary):
        prec = ast.BINARY_PRECEDENCE[expr.op]
        return f"{_wrap(expr.left, prec)}{_spaced(expr.op)}{_wrap(expr.right, prec + 1)}"
    if isinstance(expr, ast.Ite):
        return f"{_wrap(expr.cond, 1)} ? {_wrap(expr.then, 0)} : {_wrap(expr.other, 0)}"
    if isinstance(expr, ast.Call):
        return f"{expr.func}({', '.join(print_expr(a) for a in expr.args)})"
    raise TypeError(f"cannot print {expr!r}")


def _spaced(op: str) -> str:
    return op if op in ("=", "!=", "<", "<=", ">", ">=", "*", "/") else f" {op} "


def _update(updates: tuple[ast.Assignment, ...]) -> str:
    if not updates:
        return "true"
    return " & ".join(f"({a.var}'={print_expr(a.expr)})" for a in updates)


def _switch(branch: ast.SwitchBranch) -> str:
    parts = [f"activate({f})" for f in branch.activate] + [f"deactivate({f})" for f in branch.deactivate]
    return " & ".join(parts) if parts else "true"


def _branches(branches, render) -> str:
    out = []
    for b in branches:
        body = render(b)
        out.append(body if b.prob is None else f"{print_expr(b.prob)}: {body}")
    return " + ".join(out)


def print_model(model: ast.ModelAst) -> str:
    lines: list[str] = []
    for c in model.constants:
        value = "" if c.value is None else f" = {print_expr(c.value)}"
        lines.append(f"const {c.type} {c.name}{value};")
    for f in model.formulas:
        lines.append(f"formula {f.name} = {print_expr(f.expr)};")
    for lab in model.labels:
        lines.append(f'label "{lab.name}" = {print_expr(lab.expr)};')
    for feat in model.features:
        lines.append("")
        if feat.root:
            lines.append("root feature" if feat.name == "root" else f"root feature {feat.name}")
        else:
            lines.append(f"feature {feat.name}")
        if feat.group:
            lines.append(f"    {feat.group} of {', '.join(feat.children)};")
        if feat.modules:
            lines.append(f"    modules {', '.join(feat.modules)};")
        for con in feat.constraints:
            if isinstance(con, ast.Requires):
                lines.append(f"    constraint {con.feature} requires {con.required};")
            else:
                lines.append(f"    constraint {print_expr(con)};")
        for init in feat.initial:
            lines.append(f"    initial constraint {print_expr(init)};")
        for rew in feat.rewards:
            lines.append(f'    rewards "{rew.name}"')
            for item in rew.items:
                head = f"[{item.action or ''}] " if item.transition else ""
                lines.append(f"        {head}{print_expr(item.guard)} : {print_expr(item.value)};")
            lines.append("    endrewards")
        lines.append("endfeature")
    for mod in model.modules:
        lines.append("")
        lines.append(f"module {mod.name}")
        for v in mod.variables:
            lines.append(
                f"    {v.name} : [{print_expr(v.low)}..{print_expr(v.high)}] init {print_expr(v.init)};"
            )
        for cmd in mod.commands:
            lines.append(
                f"    [{cmd.action or ''}] {print_expr(cmd.guard)} -> {_branches(cmd.branches, lambda b: _update(b.updates))};"
            )
        lines.append("endmodule")
    if model.controller is not None:
        lines.append("")
        lines.append("controller")
        for cmd in model.controller.commands:
            lines.append(f"    [{cmd.action or ''}] {print_expr(cmd.guard)} -> {_branches(cmd.branches, _switch)};")
        lines.append("endcontroller")
    return "\n".join(lines) + "\n"


def print_property(prop: ast.Property) -> str:
    if isinstance(prop, ast.Filter):
        return f"filter({prop.aggregate}, {print_property(prop.query)}, {print_expr(prop.states)})"
    if isinstance(prop, ast.RewardQuery):
        return f'R{{"{prop.structure}"}}{prop.mode}=? [F {print_expr(prop.target)}]'
    path = prop.path
    if isinstance(path, ast.Globally):
        body = f"G {print_expr(path.target)}"
    elif path.bound is None:
        body = f"F {print_expr(path.target)}"
    else:
        body = f"F<={print_expr(path.bound)} {print_expr(path.target)}"
    return f"P{prop.mode}=? [{body}]"


def print_property_file(pf: ast.PropertyFile) -> str:
    lines = [f"const int {p};" for p in pf.parameters]
    lines += [f'label "{lab.name}" = {print_expr(lab.expr)};' for lab in pf.labels]
    lines += [print_property(p) + ";" for p in pf.properties]
    return "\n".join(lines) + "\n"
