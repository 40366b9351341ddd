"""AST node types for models and properties.

Every node carries an optional source position that is excluded from
equality, so two parses of the same text compare equal regardless of layout.
Expression nodes additionally carry a ``type`` slot that the type checker
fills in ("int", "double" or "bool"); untyped parser output leaves it None.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from ..errors import Position

INT, DOUBLE, BOOL = "int", "double", "bool"

Value = Union[int, Fraction, bool]


def _pos():
    return field(default=None, compare=False, repr=False, kw_only=True)


def _type():
    return field(default=None, kw_only=True)


# --------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Expr:
    pos: Position | None = _pos()
    type: str | None = _type()


@dataclass(frozen=True)
class Literal(Expr):
    # doubles are carried as exact Fractions
    value: Value


@dataclass(frozen=True)
class Ident(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    """A resolved state variable; ``slot`` indexes the compiled state tuple."""

    name: str
    slot: int


@dataclass(frozen=True)
class Active(Expr):
    feature: str


@dataclass(frozen=True)
class LabelRef(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "!" or "-"
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]


FUNCTIONS = {"round": 1, "floor": 1, "ceil": 1, "min": None, "max": None, "mod": 2}

# binding strength, loosest first; used by the parser and the printer
BINARY_PRECEDENCE = {
    "=>": 1,
    "|": 2,
    "&": 3,
    "=": 5, "!=": 5,
    "<": 6, "<=": 6, ">": 6, ">=": 6,
    "+": 7, "-": 7,
    "*": 8, "/": 8,
}
ITE_PRECEDENCE = 0
NOT_PRECEDENCE = 4
NEG_PRECEDENCE = 9


# --------------------------------------------------------------------------
# model declarations


@dataclass(frozen=True)
class ConstDecl:
    name: str
    type: str
    value: Expr | None
    pos: Position | None = _pos()


@dataclass(frozen=True)
class FormulaDecl:
    name: str
    expr: Expr
    pos: Position | None = _pos()


@dataclass(frozen=True)
class LabelDecl:
    name: str
    expr: Expr
    pos: Position | None = _pos()


@dataclass(frozen=True)
class RewardItem:
    action: str | None
    transition: bool
    guard: Expr
    value: Expr
    pos: Position | None = _pos()


@dataclass(frozen=True)
class RewardDecl:
    name: str
    items: tuple[RewardItem, ...]
    pos: Position | None = _pos()


@dataclass(frozen=True)
class Requires:
    """``constraint a requires b;`` kept distinct from a plain constraint for printing."""

    feature: str
    required: str
    pos: Position | None = _pos()


@dataclass(frozen=True)
class FeatureDecl:
    name: str
    root: bool
    group: str | None  # "all" | "one" | None
    children: tuple[str, ...]
    modules: tuple[str, ...] = ()
    rewards: tuple[RewardDecl, ...] = ()
    constraints: tuple[Expr | Requires, ...] = ()
    initial: tuple[Expr, ...] = ()
    pos: Position | None = _pos()


@dataclass(frozen=True)
class VarDecl:
    name: str
    low: Expr
    high: Expr
    init: Expr
    pos: Position | None = _pos()


@dataclass(frozen=True)
class Assignment:
    var: str
    expr: Expr
    pos: Position | None = _pos()


@dataclass(frozen=True)
class Branch:
    prob: Expr | None  # None: the bare ``-> update`` form, probability 1
    updates: tuple[Assignment, ...]
    pos: Position | None = _pos()


@dataclass(frozen=True)
class Command:
    action: str | None
    guard: Expr
    branches: tuple[Branch, ...]
    pos: Position | None = _pos()


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    variables: tuple[VarDecl, ...]
    commands: tuple[Command, ...]
    pos: Position | None = _pos()


@dataclass(frozen=True)
class SwitchBranch:
    prob: Expr | None
    activate: tuple[str, ...]
    deactivate: tuple[str, ...]
    pos: Position | None = _pos()


@dataclass(frozen=True)
class SwitchCommand:
    action: str | None
    guard: Expr
    branches: tuple[SwitchBranch, ...]
    pos: Position | None = _pos()


@dataclass(frozen=True)
class ControllerDecl:
    commands: tuple[SwitchCommand, ...]
    pos: Position | None = _pos()


@dataclass(frozen=True)
class ModelAst:
    constants: tuple[ConstDecl, ...] = ()
    formulas: tuple[FormulaDecl, ...] = ()
    labels: tuple[LabelDecl, ...] = ()
    features: tuple[FeatureDecl, ...] = ()
    modules: tuple[ModuleDecl, ...] = ()
    controller: ControllerDecl | None = None

    def module(self, name: str) -> ModuleDecl:
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(name)


# --------------------------------------------------------------------------
# properties

MIN, MAX, AVG = "min", "max", "avg"


@dataclass(frozen=True)
class Eventually:
    target: Expr
    bound: Expr | None = None  # step bound of ``F<=k``


@dataclass(frozen=True)
class Globally:
    target: Expr


@dataclass(frozen=True)
class ProbQuery:
    mode: str
    path: Eventually | Globally
    pos: Position | None = _pos()


@dataclass(frozen=True)
class RewardQuery:
    structure: str
    mode: str
    target: Expr
    pos: Position | None = _pos()


@dataclass(frozen=True)
class Filter:
    aggregate: str
    query: ProbQuery | RewardQuery
    states: Expr
    pos: Position | None = _pos()


Property = Union[ProbQuery, RewardQuery, Filter]


@dataclass(frozen=True)
class PropertyFile:
    parameters: tuple[str, ...]
    labels: tuple[LabelDecl, ...]
    properties: tuple[Property, ...]
