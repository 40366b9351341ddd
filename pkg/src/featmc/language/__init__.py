"""Front end: lexer, parser, printer, type checker and evaluator."""

from .evaluate import compile_expr, evaluate_expr, round_half_away
from .parser import parse_expression, parse_model, parse_properties, parse_property_file
from .printer import print_expr, print_model, print_property, print_property_file
from .typecheck import TypedModel, TypedProperty, resolve_labels, resolve_property, typecheck

__all__ = [
    "compile_expr",
    "evaluate_expr",
    "round_half_away",
    "parse_expression",
    "parse_model",
    "parse_properties",
    "parse_property_file",
    "print_expr",
    "print_model",
    "print_property",
    "print_property_file",
    "TypedModel",
    "TypedProperty",
    "resolve_labels",
    "resolve_property",
    "typecheck",
]
