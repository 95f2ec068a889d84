"""gridlambda: a batch spreadsheet formula engine with dynamic arrays,
LET/LAMBDA closures, lambda helper functions, and a numerics kernel."""

from . import functions as _functions  # noqa: F401  (registers builtins)
from .engine import (
    CalcReport,
    DefinedName,
    NameCollision,
    Workbook,
    WorkbookFormatError,
    load_workbook,
    load_workbook_text,
    parse_address,
)
from .evaluator import Environment, EvalContext, TraceSink, apply_closure, evaluate
from .expr import print_expr
from .parser import LexError, ParseError, parse_formula, tokenize
from .values import (
    EMPTY,
    OMITTED,
    Array,
    Closure,
    DateSerial,
    ErrorKind,
    ErrorValue,
    render_cell,
)

__version__ = "0.1.0"

__all__ = [
    "Array",
    "CalcReport",
    "Closure",
    "DateSerial",
    "DefinedName",
    "EMPTY",
    "Environment",
    "ErrorKind",
    "ErrorValue",
    "EvalContext",
    "LexError",
    "NameCollision",
    "OMITTED",
    "ParseError",
    "TraceSink",
    "Workbook",
    "WorkbookFormatError",
    "apply_closure",
    "evaluate",
    "load_workbook",
    "load_workbook_text",
    "parse_address",
    "parse_formula",
    "print_expr",
    "render_cell",
    "tokenize",
]
