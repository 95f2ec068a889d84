"""Runtime value universe: scalars, errors, rectangular arrays, closures.

A scalar is represented by a plain Python value: ``float`` (finite) for
numbers, ``str`` for text, ``bool`` for booleans, and the ``EMPTY``
singleton for a blank cell. Errors are `ErrorValue` instances and arrays
are immutable `Array` objects; both may appear wherever a scalar may.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator


class ErrorKind(enum.Enum):
    DIV0 = "#DIV/0!"
    VALUE = "#VALUE!"
    REF = "#REF!"
    NAME = "#NAME?"
    NUM = "#NUM!"
    NA = "#N/A"
    CALC = "#CALC!"
    SPILL = "#SPILL!"
    CIRCULAR = "#CIRC!"


_ERROR_BY_TEXT = {k.value: k for k in ErrorKind}


@dataclass(frozen=True)
class ErrorValue:
    kind: ErrorKind
    detail: str = field(default="", compare=False)

    def __str__(self) -> str:
        return self.kind.value


DIV0 = ErrorValue(ErrorKind.DIV0)
VALUE_ERROR = ErrorValue(ErrorKind.VALUE)
REF_ERROR = ErrorValue(ErrorKind.REF)
NAME_ERROR = ErrorValue(ErrorKind.NAME)
NUM_ERROR = ErrorValue(ErrorKind.NUM)
NA = ErrorValue(ErrorKind.NA)
CALC_ERROR = ErrorValue(ErrorKind.CALC)
SPILL_ERROR = ErrorValue(ErrorKind.SPILL)
CIRC_ERROR = ErrorValue(ErrorKind.CIRCULAR)


def error_from_text(text: str) -> ErrorValue | None:
    kind = _ERROR_BY_TEXT.get(text.upper())
    return ErrorValue(kind) if kind else None


class _Empty:
    """The value of a blank cell. Coerces to 0, "" or FALSE on use."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EMPTY"


class _Omitted:
    """Placeholder bound to an optional lambda parameter that was not supplied."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OMITTED"


EMPTY = _Empty()
OMITTED = _Omitted()


class DateSerial(float):
    """A day-count number produced by a date function; displays as an ISO date.

    Arithmetic on a DateSerial yields a plain float, so the date rendering
    follows only values that came directly from a date builtin.
    """


class Array:
    """An immutable rectangular 2D block of scalars and errors (rows >= 1, cols >= 1).

    ``origin`` optionally records the grid position (sheet, row, col) of the
    top-left cell when the array was read from a range or spill region; it is
    dropped by any arithmetic.
    """

    __slots__ = ("rows", "n_rows", "n_cols", "origin")

    def __init__(self, rows, origin=None):
        rows = tuple(tuple(r) for r in rows)
        if not rows or not rows[0]:
            raise ValueError("arrays must be at least 1x1")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("array rows must have equal length")
        self.rows = rows
        self.n_rows = len(rows)
        self.n_cols = width
        self.origin = origin

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    def at(self, r: int, c: int):
        return self.rows[r][c]

    def cells(self) -> Iterator:
        for row in self.rows:
            yield from row

    def column(self) -> list:
        """Row-major flattening (the iteration order of SCAN/REDUCE)."""
        return [v for row in self.rows for v in row]

    def is_vector(self) -> bool:
        return self.n_rows == 1 or self.n_cols == 1

    def __eq__(self, other) -> bool:
        return isinstance(other, Array) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self) -> str:
        return f"Array({self.n_rows}x{self.n_cols} {self.rows!r})"

    @staticmethod
    def from_scalar(v) -> "Array":
        return Array(((v,),))

    @staticmethod
    def col(values) -> "Array":
        return Array(tuple((v,) for v in values))

    @staticmethod
    def row(values) -> "Array":
        return Array((tuple(values),))


@dataclass(frozen=True)
class Param:
    name: str
    optional: bool = False


class Closure:
    """A lambda value: parameter list, body expression, captured environment."""

    __slots__ = ("params", "body", "env")

    def __init__(self, params, body, env):
        self.params = tuple(params)
        self.body = body
        self.env = env

    @property
    def min_arity(self) -> int:
        return sum(1 for p in self.params if not p.optional)

    @property
    def max_arity(self) -> int:
        return len(self.params)

    def __repr__(self) -> str:
        return f"Closure({', '.join(p.name for p in self.params)})"


# ---------------------------------------------------------------------------
# Coercions


def number_from_text(text: str):
    """Parse text as a decimal number, or return a #VALUE! error."""
    s = text.strip()
    if not s:
        return VALUE_ERROR
    try:
        x = float(s)
    except ValueError:
        return VALUE_ERROR
    if not math.isfinite(x):
        return VALUE_ERROR
    return x


def coerce_to_number(v):
    """Excel-style numeric coercion: TRUE->1, FALSE->0, blank->0, text parsed."""
    if isinstance(v, bool):
        return 1.0 if v else 0.0
    if isinstance(v, float):
        return v
    if isinstance(v, int):
        return float(v)
    if v is EMPTY or v is OMITTED:
        return 0.0
    if isinstance(v, str):
        return number_from_text(v)
    if isinstance(v, ErrorValue):
        return v
    return VALUE_ERROR


def coerce_to_bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, float)):
        return v != 0
    if v is EMPTY or v is OMITTED:
        return False
    if isinstance(v, str):
        up = v.strip().upper()
        if up == "TRUE":
            return True
        if up == "FALSE":
            return False
        return VALUE_ERROR
    if isinstance(v, ErrorValue):
        return v
    return VALUE_ERROR


def format_number(x: float) -> str:
    """Render a number with up to 15 significant digits, no grouping."""
    if isinstance(x, DateSerial):
        return serial_to_iso(float(x))
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return f"{x:.15g}"


def coerce_to_text(v):
    """Display-text coercion used by ``&`` concatenation and rendering."""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, (int, float)):
        return format_number(float(v) if not isinstance(v, DateSerial) else v)
    if v is EMPTY or v is OMITTED:
        return ""
    if isinstance(v, ErrorValue):
        return v
    return VALUE_ERROR


def render_cell(v) -> str:
    """Boundary rendering of a single computed value."""
    if isinstance(v, ErrorValue):
        return v.kind.value
    if isinstance(v, Closure):
        return ErrorKind.CALC.value
    out = coerce_to_text(v)
    return out if isinstance(out, str) else str(out)


_EPOCH_ORDINAL = 693594  # 1899-12-30 as datetime.date.toordinal()


def serial_to_iso(serial: float) -> str:
    import datetime as _dt

    try:
        return _dt.date.fromordinal(_EPOCH_ORDINAL + int(serial)).isoformat()
    except (OverflowError, ValueError):
        return f"{float(serial):.15g}"


# ---------------------------------------------------------------------------
# Comparison

_TYPE_RANK_NUMBER = 0
_TYPE_RANK_TEXT = 1
_TYPE_RANK_BOOL = 2


def _comparison_key(v):
    if isinstance(v, bool):
        return _TYPE_RANK_BOOL, v
    if isinstance(v, (int, float)):
        return _TYPE_RANK_NUMBER, float(v)
    if isinstance(v, str):
        return _TYPE_RANK_TEXT, v.casefold()
    raise TypeError(f"not comparable: {v!r}")


def compare_scalars(a, b):
    """Three-way compare under Excel ordering: numbers < text < booleans.

    Text comparison is case-insensitive. Blank cells coerce to the zero
    value of the other operand's type. Returns -1/0/1 or an ErrorValue.
    """
    if isinstance(a, ErrorValue):
        return a
    if isinstance(b, ErrorValue):
        return b
    if a is EMPTY or a is OMITTED:
        a = _zero_like(b)
    if b is EMPTY or b is OMITTED:
        b = _zero_like(a)
    try:
        ka, kb = _comparison_key(a), _comparison_key(b)
    except TypeError:
        return VALUE_ERROR
    return (ka > kb) - (ka < kb)


def _zero_like(v):
    if isinstance(v, bool):
        return False
    if isinstance(v, str):
        return ""
    return 0.0


# ---------------------------------------------------------------------------
# Broadcasting and elementwise lifting


def broadcast_shape(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    """Common shape of two operands: equal extents kept, 1 stretches, else max.

    A non-1 mismatch also resolves to the max extent; the out-of-range cells
    become #N/A when the operands are lifted.
    """
    return max(a[0], b[0]), max(a[1], b[1])


def _shape_of(v) -> tuple[int, int]:
    return v.shape if isinstance(v, Array) else (1, 1)


def cell_in(v, shape: tuple[int, int], r: int, c: int):
    """Element of operand ``v`` at broadcast position (r, c), or #N/A."""
    if not isinstance(v, Array):
        return v
    nr, nc = v.shape
    if nr == 1:
        rr = 0
    elif r < nr:
        rr = r
    else:
        return NA
    if nc == 1:
        cc = 0
    elif c < nc:
        cc = c
    else:
        return NA
    return v.rows[rr][cc]


def common_shape(args) -> tuple[int, int]:
    shape = (1, 1)
    for a in args:
        shape = broadcast_shape(shape, _shape_of(a))
    return shape


def lift_elementwise(op: Callable, args) -> object:
    """Broadcast args to a common shape and apply ``op`` per cell.

    Error cells pass through unchanged; if every argument is scalar the
    result is scalar. ``op`` receives scalar (non-error) cells only.
    """
    if not any(isinstance(a, Array) for a in args):
        for a in args:
            if isinstance(a, ErrorValue):
                return a
        return op(*args)
    nr, nc = common_shape(args)
    out = []
    for r in range(nr):
        row = []
        for c in range(nc):
            cells = [cell_in(a, (nr, nc), r, c) for a in args]
            err = next((x for x in cells if isinstance(x, ErrorValue)), None)
            row.append(err if err is not None else op(*cells))
        out.append(tuple(row))
    return Array(out)
