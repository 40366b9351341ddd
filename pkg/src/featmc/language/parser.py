"""Recursive-descent parser for models and property files.

The grammar is documented in ``docs/grammar.md``.
"""

from __future__ import annotations

from fractions import Fraction

from ..errors import ParseError
from . import syntax as ast
from .lexer import TokenStream

_AGGREGATES = (ast.MIN, ast.MAX, ast.AVG)


class _ExprParser:
    def __init__(self, ts: TokenStream, allow_labels: bool = False):
        self.ts = ts
        self.allow_labels = allow_labels

    # expression := disjunction ['?' expression ':' expression]
    def expr(self) -> ast.Expr:
        pos = self.ts.current.pos
        cond = self.binary(1)
        if self.ts.accept("?"):
            then = self.expr()
            self.ts.expect(":")
            other = self.expr()
            return ast.Ite(cond, then, other, pos=pos)
        return cond

    def binary(self, min_prec: int) -> ast.Expr:
        ts = self.ts
        pos = ts.current.pos
        if ts.at("!"):
            ts.advance()
            operand = self.binary(max(min_prec, ast.NOT_PRECEDENCE + 1))
            left: ast.Expr = ast.Unary("!", operand, pos=pos)
        else:
            left = self.unary()
        while True:
            tok = ts.current
            prec = ast.BINARY_PRECEDENCE.get(tok.text) if tok.kind == "symbol" else None
            if prec is None or prec < min_prec:
                for op in ast.BINARY_PRECEDENCE:
                    ts.at(op)
                return left
            ts.advance()
            right = self.binary(prec + 1)
            left = ast.Binary(tok.text, left, right, pos=tok.pos)

    def unary(self) -> ast.Expr:
        ts = self.ts
        if ts.at("-"):
            pos = ts.advance().pos
            return ast.Unary("-", self.unary(), pos=pos)
        return self.atom()

    def atom(self) -> ast.Expr:
        ts = self.ts
        tok = ts.current
        if ts.at_kind("int"):
            ts.advance()
            return ast.Literal(int(tok.text), pos=tok.pos, type=ast.INT)
        if ts.at_kind("number"):
            ts.advance()
            return ast.Literal(Fraction(tok.text), pos=tok.pos, type=ast.DOUBLE)
        if ts.at("true") or ts.at("false"):
            ts.advance()
            return ast.Literal(tok.text == "true", pos=tok.pos, type=ast.BOOL)
        if ts.at("active"):
            ts.advance()
            ts.expect("(")
            name = ts.expect_ident().text
            ts.expect(")")
            return ast.Active(name, pos=tok.pos)
        if ts.at("("):
            ts.advance()
            inner = self.expr()
            ts.expect(")")
            return inner
        if self.allow_labels and ts.at("${"):
            ts.advance()
            inner = self.expr()
            ts.expect("}")
            return inner
        if self.allow_labels and ts.at_kind("string"):
            ts.advance()
            return ast.LabelRef(tok.text[1:-1], pos=tok.pos)
        if ts.at_kind("ident"):
            ts.advance()
            if tok.text in ast.FUNCTIONS and ts.at("("):
                ts.advance()
                args = [self.expr()]
                while ts.accept(","):
                    args.append(self.expr())
                ts.expect(")")
                return ast.Call(tok.text, tuple(args), pos=tok.pos)
            return ast.Ident(tok.text, pos=tok.pos)
        raise ts.error()


class _ModelParser(_ExprParser):
    def model(self) -> ast.ModelAst:
        ts = self.ts
        consts, formulas, labels, features, modules = [], [], [], [], []
        controller = None
        if ts.at_kind("eof"):
            for kw in ("const", "formula", "label", "root", "feature", "module", "controller"):
                ts.at(kw)
            raise ts.error("empty model")
        while not ts.at_kind("eof"):
            if ts.at("const"):
                consts.append(self.const())
            elif ts.at("formula"):
                pos = ts.advance().pos
                name = ts.expect_ident().text
                ts.expect("=")
                expr = self.expr()
                ts.expect(";")
                formulas.append(ast.FormulaDecl(name, expr, pos=pos))
            elif ts.at("label"):
                labels.append(self.label())
            elif ts.at("root") or ts.at("feature"):
                features.append(self.feature())
            elif ts.at("module"):
                modules.append(self.module())
            elif ts.at("controller"):
                if controller is not None:
                    raise ParseError("duplicate controller block", ts.current.pos)
                controller = self.controller()
            else:
                raise ts.error()
        return ast.ModelAst(
            tuple(consts), tuple(formulas), tuple(labels), tuple(features), tuple(modules), controller
        )

    def const(self) -> ast.ConstDecl:
        ts = self.ts
        pos = ts.expect("const").pos
        ctype = ast.INT
        for t in (ast.INT, ast.DOUBLE, ast.BOOL):
            if ts.accept(t):
                ctype = t
                break
        name = ts.expect_ident().text
        value = None
        if ts.accept("="):
            value = self.expr()
        ts.expect(";")
        return ast.ConstDecl(name, ctype, value, pos=pos)

    def label(self) -> ast.LabelDecl:
        ts = self.ts
        pos = ts.expect("label").pos
        name = ts.expect_kind("string").text[1:-1]
        ts.expect("=")
        expr = self.expr()
        ts.expect(";")
        return ast.LabelDecl(name, expr, pos=pos)

    def _names(self) -> tuple[str, ...]:
        names = [self.ts.expect_ident().text]
        while self.ts.accept(","):
            names.append(self.ts.expect_ident().text)
        return tuple(names)

    def feature(self) -> ast.FeatureDecl:
        ts = self.ts
        pos = ts.current.pos
        root = bool(ts.accept("root"))
        ts.expect("feature")
        if root:
            name = ts.advance().text if ts.at_kind("ident") else "root"
        else:
            name = ts.expect_ident().text
        group, children = None, ()
        modules: tuple[str, ...] = ()
        rewards, constraints, initial = [], [], []
        while not ts.accept("endfeature"):
            if ts.at("all") or ts.at("one"):
                kind = ts.advance().text
                if group is not None:
                    raise ParseError(f"feature {name} declares more than one group", ts.current.pos)
                ts.expect("of")
                group, children = kind, self._names()
                ts.expect(";")
            elif ts.accept("modules"):
                modules = modules + self._names()
                ts.expect(";")
            elif ts.at("rewards"):
                rewards.append(self.rewards())
            elif ts.at("constraint"):
                constraints.append(self.constraint())
            elif ts.at("initial"):
                ts.advance()
                ts.expect("constraint")
                initial.append(self.expr())
                ts.expect(";")
            else:
                ts.at("endfeature")
                raise ts.error()
        return ast.FeatureDecl(
            name, root, group, children, modules, tuple(rewards), tuple(constraints), tuple(initial), pos=pos
        )

    def constraint(self) -> ast.Expr | ast.Requires:
        ts = self.ts
        pos = ts.expect("constraint").pos
        if ts.at_kind("ident") and ts.peek().text == "requires":
            feature = ts.advance().text
            ts.advance()
            required = ts.expect_ident().text
            ts.expect(";")
            return ast.Requires(feature, required, pos=pos)
        expr = self.expr()
        ts.expect(";")
        return expr

    def rewards(self) -> ast.RewardDecl:
        ts = self.ts
        pos = ts.expect("rewards").pos
        name = ts.expect_kind("string").text[1:-1]
        items = []
        while not ts.accept("endrewards"):
            ipos = ts.current.pos
            action, transition = None, False
            if ts.accept("["):
                transition = True
                if ts.at_kind("ident"):
                    action = ts.advance().text
                ts.expect("]")
            guard = self.expr()
            ts.expect(":")
            value = self.expr()
            ts.expect(";")
            items.append(ast.RewardItem(action, transition, guard, value, pos=ipos))
        return ast.RewardDecl(name, tuple(items), pos=pos)

    def module(self) -> ast.ModuleDecl:
        ts = self.ts
        pos = ts.expect("module").pos
        name = ts.expect_ident().text
        variables, commands = [], []
        while not ts.accept("endmodule"):
            if ts.at_kind("ident"):
                variables.append(self.variable())
            elif ts.at("["):
                commands.append(self.command())
            else:
                ts.at("endmodule")
                raise ts.error()
        return ast.ModuleDecl(name, tuple(variables), tuple(commands), pos=pos)

    def variable(self) -> ast.VarDecl:
        ts = self.ts
        tok = ts.expect_ident()
        ts.expect(":")
        ts.expect("[")
        low = self.expr()
        ts.expect("..")
        high = self.expr()
        ts.expect("]")
        init = self.expr() if ts.accept("init") else low
        ts.expect(";")
        return ast.VarDecl(tok.text, low, high, init, pos=tok.pos)

    def _action(self) -> str | None:
        ts = self.ts
        ts.expect("[")
        action = ts.advance().text if ts.at_kind("ident") else None
        ts.expect("]")
        return action

    def command(self) -> ast.Command:
        ts = self.ts
        pos = ts.current.pos
        action = self._action()
        guard = self.expr()
        ts.expect("->")
        branches = [self.branch()]
        while ts.accept("+"):
            branches.append(self.branch())
        ts.expect(";")
        return ast.Command(action, guard, tuple(branches), pos=pos)

    def _bare_update_ahead(self) -> bool:
        ts = self.ts
        if ts.current.text == "true" and ts.current.kind == "keyword":
            return ts.peek().text != ":"
        return ts.current.text == "(" and ts.peek().kind == "ident" and ts.peek(2).text == "'"

    def branch(self) -> ast.Branch:
        ts = self.ts
        pos = ts.current.pos
        prob = None
        if not self._bare_update_ahead():
            prob = self.expr()
            ts.expect(":")
        return ast.Branch(prob, self.update(), pos=pos)

    def update(self) -> tuple[ast.Assignment, ...]:
        ts = self.ts
        if ts.accept("true"):
            return ()
        updates = [self.assignment()]
        while ts.accept("&"):
            updates.append(self.assignment())
        return tuple(updates)

    def assignment(self) -> ast.Assignment:
        ts = self.ts
        pos = ts.expect("(").pos
        var = ts.expect_ident().text
        ts.expect("'")
        ts.expect("=")
        expr = self.expr()
        ts.expect(")")
        return ast.Assignment(var, expr, pos=pos)

    def controller(self) -> ast.ControllerDecl:
        ts = self.ts
        pos = ts.expect("controller").pos
        commands = []
        while not ts.accept("endcontroller"):
            if not ts.at("["):
                ts.at("endcontroller")
                raise ts.error()
            cpos = ts.current.pos
            action = self._action()
            guard = self.expr()
            ts.expect("->")
            branches = [self.switch_branch()]
            while ts.accept("+"):
                branches.append(self.switch_branch())
            ts.expect(";")
            commands.append(ast.SwitchCommand(action, guard, tuple(branches), pos=cpos))
        return ast.ControllerDecl(tuple(commands), pos=pos)

    def switch_branch(self) -> ast.SwitchBranch:
        ts = self.ts
        pos = ts.current.pos
        prob = None
        bare = ts.current.text in ("activate", "deactivate") or (
            ts.current.text == "true" and ts.peek().text != ":"
        )
        if not bare:
            prob = self.expr()
            ts.expect(":")
        activate, deactivate = [], []
        if not ts.accept("true"):
            while True:
                if ts.accept("activate"):
                    target = activate
                elif ts.accept("deactivate"):
                    target = deactivate
                else:
                    raise ts.error()
                ts.expect("(")
                target.append(ts.expect_ident().text)
                ts.expect(")")
                if not ts.accept("&"):
                    break
        return ast.SwitchBranch(prob, tuple(activate), tuple(deactivate), pos=pos)


class _PropertyParser(_ModelParser):
    def file(self) -> ast.PropertyFile:
        ts = self.ts
        params, labels, props = [], [], []
        while not ts.at_kind("eof"):
            if ts.at("const"):
                decl = self.const()
                if decl.type != ast.INT or decl.value is not None:
                    raise ParseError("experiment parameters must be declared as 'const int name;'", decl.pos)
                params.append(decl.name)
            elif ts.at("label"):
                labels.append(self.label())
            else:
                props.append(self.property())
                ts.expect(";")
        return ast.PropertyFile(tuple(params), tuple(labels), tuple(props))

    def property(self) -> ast.Property:
        ts = self.ts
        if ts.at("filter"):
            pos = ts.advance().pos
            ts.expect("(")
            tok = ts.current
            if tok.kind != "ident" or tok.text not in _AGGREGATES:
                raise ParseError(f"unknown aggregate {tok.text!r} (use min, max or avg)", tok.pos)
            ts.advance()
            ts.expect(",")
            query = self.query()
            ts.expect(",")
            states = self.expr()
            ts.expect(")")
            return ast.Filter(tok.text, query, states, pos=pos)
        return self.query()

    def _mode(self, text: str, pos) -> str:
        if text in (ast.MIN, ast.MAX):
            return text
        raise ParseError(f"expected min or max, found {text!r}", pos)

    def query(self) -> ast.ProbQuery | ast.RewardQuery:
        ts = self.ts
        tok = ts.current
        if ts.at_kind("ident") and tok.text in ("Pmin", "Pmax"):
            ts.advance()
            ts.expect("=?")
            ts.expect("[")
            path = self.path()
            ts.expect("]")
            return ast.ProbQuery(tok.text[1:], path, pos=tok.pos)
        if ts.at_kind("ident") and tok.text == "R":
            ts.advance()
            ts.expect("{")
            structure = ts.expect_kind("string").text[1:-1]
            ts.expect("}")
            mtok = ts.expect_ident()
            mode = self._mode(mtok.text, mtok.pos)
            ts.expect("=?")
            ts.expect("[")
            ftok = ts.expect_ident()
            if ftok.text != "F":
                raise ParseError("reward queries support only the F operator", ftok.pos)
            target = self.expr()
            ts.expect("]")
            return ast.RewardQuery(structure, mode, target, pos=tok.pos)
        for expected in ("Pmin", "Pmax", "R", "filter"):
            ts.at(expected)
        raise ts.error()

    def path(self) -> ast.Eventually | ast.Globally:
        ts = self.ts
        tok = ts.expect_ident()
        if tok.text == "G":
            return ast.Globally(self.expr())
        if tok.text == "F":
            bound = None
            if ts.accept("<="):
                btok = ts.current
                if ts.at_kind("int"):
                    bound = ast.Literal(int(ts.advance().text), pos=btok.pos, type=ast.INT)
                else:
                    bound = ast.Ident(ts.expect_ident().text, pos=btok.pos)
            return ast.Eventually(self.expr(), bound)
        raise ParseError(f"unknown path operator {tok.text!r} (use F, F<=k or G)", tok.pos)


def parse_model(text: str) -> ast.ModelAst:
    """Parse model source text into a ``ModelAst``."""
    return _ModelParser(TokenStream(text)).model()


def parse_expression(text: str, allow_labels: bool = False) -> ast.Expr:
    ts = TokenStream(text)
    expr = _ExprParser(ts, allow_labels).expr()
    ts.expect_kind("eof")
    return expr


def parse_property_file(text: str) -> ast.PropertyFile:
    return _PropertyParser(TokenStream(text), allow_labels=True).file()


def parse_properties(text: str) -> list[ast.Property]:
    """Parse a property file and return its queries (label lines are dropped)."""
    return list(parse_property_file(text).properties)
