"""Expression evaluation: LET scoping, closures, recursion, operators.

Evaluation is total: every failure mode is returned as an error value, never
raised. Workbook state is reached only through the context's workbook handle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import expr as E
from .values import (
    CALC_ERROR,
    DIV0,
    NAME_ERROR,
    NUM_ERROR,
    OMITTED,
    REF_ERROR,
    VALUE_ERROR,
    Array,
    Closure,
    ErrorValue,
    cell_in,
    coerce_to_bool,
    coerce_to_number,
    coerce_to_text,
    common_shape,
    compare_scalars,
    lift_elementwise,
)


class TraceSink:
    """Counts LET-binding and defined-name evaluations; optionally emits lines."""

    def __init__(self, writer=None):
        self.counters: dict[str, int] = {}
        self.writer = writer

    def record(self, scope: str, name: str):
        key = f"{scope}:{name}"
        count = self.counters.get(key, 0) + 1
        self.counters[key] = count
        if self.writer is not None:
            self.writer(f"EVAL {key} #{count}")

    def count(self, scope: str, name: str) -> int:
        return self.counters.get(f"{scope}:{name}", 0)

    def clear(self):
        self.counters.clear()


_UNEVALUATED = 0
_IN_PROGRESS = 1
_MEMOIZED = 2


class Binding:
    """A LET binding: evaluated on first use, then memoized."""

    __slots__ = ("state", "expr", "env", "value")

    def __init__(self, expr, env):
        self.state = _UNEVALUATED
        self.expr = expr
        self.env = env
        self.value = None

    @staticmethod
    def of_value(value) -> "Binding":
        b = Binding(None, None)
        b.state = _MEMOIZED
        b.value = value
        return b


class Environment:
    """A lexical frame of name -> Binding, chained to a parent frame."""

    __slots__ = ("parent", "frame")

    def __init__(self, parent: "Environment | None" = None):
        self.parent = parent
        self.frame: dict[str, tuple[str, Binding]] = {}

    def define(self, name: str, binding: Binding):
        self.frame[name.casefold()] = (name, binding)

    def lookup(self, name: str):
        key = name.casefold()
        env = self
        while env is not None:
            hit = env.frame.get(key)
            if hit is not None:
                return hit
            env = env.parent
        return None


@dataclass
class EvalContext:
    """Per-evaluation state: caller cell, recursion depth, trace counters."""

    workbook: object = None
    caller: tuple[str, int, int] | None = None  # (sheet, row, col)
    depth_limit: int = 1024
    depth: int = 0
    trace: TraceSink = field(default_factory=TraceSink)

    def current_sheet(self) -> str | None:
        if self.caller is not None:
            return self.caller[0]
        wb = self.workbook
        return wb.default_sheet if wb is not None else None


# Builtin registry, populated by the functions module on import.
# name (casefolded) -> Builtin
BUILTINS: dict[str, "Builtin"] = {}


@dataclass(frozen=True)
class Builtin:
    name: str
    min_args: int
    max_args: int
    impl: object
    raw: bool = False  # raw builtins receive unevaluated argument expressions


def register(name: str, min_args: int, max_args: int, raw: bool = False):
    def deco(fn):
        BUILTINS[name.casefold()] = Builtin(name, min_args, max_args, fn, raw)
        return fn

    return deco


def is_builtin_name(name: str) -> bool:
    return name.casefold() in BUILTINS or name.upper() == "IF"


# ---------------------------------------------------------------------------
# Scalar operator kernels


def _finite_or_num_error(x: float):
    return x if math.isfinite(x) else NUM_ERROR


def _num_add(a, b):
    a, b = coerce_to_number(a), coerce_to_number(b)
    if isinstance(a, ErrorValue):
        return a
    if isinstance(b, ErrorValue):
        return b
    return _finite_or_num_error(a + b)


def _num_sub(a, b):
    a, b = coerce_to_number(a), coerce_to_number(b)
    if isinstance(a, ErrorValue):
        return a
    if isinstance(b, ErrorValue):
        return b
    return _finite_or_num_error(a - b)


def _num_mul(a, b):
    a, b = coerce_to_number(a), coerce_to_number(b)
    if isinstance(a, ErrorValue):
        return a
    if isinstance(b, ErrorValue):
        return b
    return _finite_or_num_error(a * b)


def _num_div(a, b):
    a, b = coerce_to_number(a), coerce_to_number(b)
    if isinstance(a, ErrorValue):
        return a
    if isinstance(b, ErrorValue):
        return b
    if b == 0:
        return DIV0
    return _finite_or_num_error(a / b)


def _num_pow(a, b):
    a, b = coerce_to_number(a), coerce_to_number(b)
    if isinstance(a, ErrorValue):
        return a
    if isinstance(b, ErrorValue):
        return b
    if a == 0 and b == 0:
        return NUM_ERROR
    if a == 0 and b < 0:
        return DIV0
    try:
        out = a ** b
    except (OverflowError, ValueError):
        return NUM_ERROR
    if isinstance(out, complex) or not math.isfinite(out):
        return NUM_ERROR
    return out


def _concat(a, b):
    a, b = coerce_to_text(a), coerce_to_text(b)
    if isinstance(a, ErrorValue):
        return a
    if isinstance(b, ErrorValue):
        return b
    return a + b


def _make_comparison(test):
    def cmp(a, b):
        order = compare_scalars(a, b)
        if isinstance(order, ErrorValue):
            return order
        return test(order)

    return cmp


_BINARY_KERNELS = {
    "+": _num_add,
    "-": _num_sub,
    "*": _num_mul,
    "/": _num_div,
    "^": _num_pow,
    "&": _concat,
    "=": _make_comparison(lambda o: o == 0),
    "<>": _make_comparison(lambda o: o != 0),
    "<": _make_comparison(lambda o: o < 0),
    "<=": _make_comparison(lambda o: o <= 0),
    ">": _make_comparison(lambda o: o > 0),
    ">=": _make_comparison(lambda o: o >= 0),
}


def _num_neg(a):
    a = coerce_to_number(a)
    return a if isinstance(a, ErrorValue) else -a


def _num_percent(a):
    a = coerce_to_number(a)
    return a if isinstance(a, ErrorValue) else a / 100.0


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(expr, env: Environment, ctx: EvalContext):
    match expr:
        case E.NumberLit(value=v):
            return v
        case E.TextLit(value=v):
            return v
        case E.BoolLit(value=v):
            return v
        case E.ErrorLit(value=v):
            return v
        case E.ArrayLit(rows=rows):
            return Array(rows)
        case E.NameRef(name=name):
            return _eval_name(name, env, ctx)
        case E.CellRef():
            return _eval_cell_ref(expr, ctx)
        case E.RangeRef():
            return _eval_range_ref(expr, ctx)
        case E.SpillRef(target=target):
            return _eval_spill_ref(target, env, ctx)
        case E.ImplicitIntersect(inner=inner):
            return _eval_intersect(inner, env, ctx)
        case E.Call(callee=callee, args=args):
            return _eval_call(callee, args, env, ctx)
        case E.Let(bindings=bindings, body=body):
            return _eval_let(bindings, body, env, ctx)
        case E.Lambda(params=params, body=body):
            return Closure(params, body, env)
        case E.BinaryOp(op=op, left=left, right=right):
            lhs = evaluate(left, env, ctx)
            rhs = evaluate(right, env, ctx)
            if isinstance(lhs, Closure) or isinstance(rhs, Closure):
                return VALUE_ERROR
            return lift_elementwise(_BINARY_KERNELS[op], (lhs, rhs))
        case E.UnaryOp(op=op, operand=operand):
            val = evaluate(operand, env, ctx)
            if op == "+":
                return val
            if isinstance(val, Closure):
                return VALUE_ERROR
            return lift_elementwise(_num_neg, (val,))
        case E.PercentPostfix(operand=operand):
            val = evaluate(operand, env, ctx)
            if isinstance(val, Closure):
                return VALUE_ERROR
            return lift_elementwise(_num_percent, (val,))
        case _ if expr is E.OMITTED_ARG:
            return OMITTED
        case _:
            raise TypeError(f"cannot evaluate {expr!r}")


def _eval_name(name: str, env: Environment, ctx: EvalContext):
    hit = env.lookup(name)
    if hit is not None:
        return _resolve_binding(name, hit[1], ctx)
    wb = ctx.workbook
    if wb is not None:
        defined = wb.lookup_name(name)
        if defined is not None:
            ctx.trace.record("name", defined.name)
            return evaluate(defined.expr, Environment(), ctx)
    return ErrorValue(NAME_ERROR.kind, f"unknown name {name!r}")


def _resolve_binding(name: str, binding: Binding, ctx: EvalContext):
    if binding.state == _MEMOIZED:
        return binding.value
    if binding.state == _IN_PROGRESS:
        return ErrorValue(NAME_ERROR.kind, f"binding {name!r} refers to itself")
    binding.state = _IN_PROGRESS
    ctx.trace.record("let", name)
    value = evaluate(binding.expr, binding.env, ctx)
    binding.state = _MEMOIZED
    binding.value = value
    return value


def _eval_let(bindings, body, env: Environment, ctx: EvalContext):
    # Each binding opens a frame chained onto the previous one, so a binding
    # expression sees earlier names only.
    current = env
    for name, value_expr in bindings:
        frame = Environment(current)
        frame.define(name, Binding(value_expr, frame))
        current = frame
    return evaluate(body, current, ctx)


def _eval_cell_ref(ref: E.CellRef, ctx: EvalContext):
    wb = ctx.workbook
    if wb is None:
        return REF_ERROR
    sheet = ref.sheet or ctx.current_sheet()
    return wb.cell_value(sheet, ref.row, ref.col)


def _eval_range_ref(ref: E.RangeRef, ctx: EvalContext):
    wb = ctx.workbook
    if wb is None:
        return REF_ERROR
    sheet = ref.sheet or ctx.current_sheet()
    return wb.range_array(sheet, ref.start.row, ref.start.col, ref.end.row, ref.end.col)


def _eval_spill_ref(target, env: Environment, ctx: EvalContext):
    wb = ctx.workbook
    if wb is None:
        return REF_ERROR
    anchor = _resolve_anchor(target, ctx)
    if isinstance(anchor, ErrorValue):
        return anchor
    arr = wb.spill_array(*anchor)
    if arr is None:
        return ErrorValue(REF_ERROR.kind, "referent is not a spill anchor")
    return arr


def _resolve_anchor(target, ctx: EvalContext, _seen: frozenset = frozenset()):
    """Follow a spill-reference target (cell or defined-name chain) to a cell address."""
    if isinstance(target, E.CellRef):
        sheet = target.sheet or ctx.current_sheet()
        return (sheet, target.row, target.col)
    if isinstance(target, E.NameRef):
        key = target.name.casefold()
        if key in _seen:
            return REF_ERROR
        wb = ctx.workbook
        defined = wb.lookup_name(target.name) if wb is not None else None
        if defined is None:
            return ErrorValue(NAME_ERROR.kind, f"unknown name {target.name!r}")
        return _resolve_anchor(defined.expr, ctx, _seen | {key})
    return REF_ERROR


def _eval_intersect(inner, env: Environment, ctx: EvalContext):
    value = evaluate(inner, env, ctx)
    if isinstance(value, ErrorValue):
        return value
    if not isinstance(value, Array):
        return value
    nr, nc = value.shape
    if nr == 1 and nc == 1:
        return value.at(0, 0)
    if value.origin is None:
        # A computed array has no grid geometry; take the top-left element.
        return value.at(0, 0)
    _, r0, c0 = value.origin
    caller = ctx.caller
    if caller is None:
        return VALUE_ERROR
    _, cr, cc = caller
    if nc == 1:
        return value.at(cr - r0, 0) if r0 <= cr < r0 + nr else VALUE_ERROR
    if nr == 1:
        return value.at(0, cc - c0) if c0 <= cc < c0 + nc else VALUE_ERROR
    if r0 <= cr < r0 + nr and c0 <= cc < c0 + nc:
        return value.at(cr - r0, cc - c0)
    return VALUE_ERROR


def _eval_call(callee, args, env: Environment, ctx: EvalContext):
    if isinstance(callee, E.NameRef):
        # Call position resolves built-ins first (so a LET name like "year"
        # coexists with the YEAR function), then lexical bindings, then
        # workbook names. Defined names can never collide with built-ins.
        name = callee.name
        if name.upper() == "IF":
            return _eval_if(args, env, ctx)
        builtin = BUILTINS.get(name.casefold())
        if builtin is not None:
            return _call_builtin(builtin, args, env, ctx)
        hit = env.lookup(name)
        if hit is not None:
            fn = _resolve_binding(name, hit[1], ctx)
            return _apply_value(fn, args, env, ctx)
        wb = ctx.workbook
        if wb is not None:
            defined = wb.lookup_name(name)
            if defined is not None:
                ctx.trace.record("name", defined.name)
                fn = evaluate(defined.expr, Environment(), ctx)
                return _apply_value(fn, args, env, ctx)
        return ErrorValue(NAME_ERROR.kind, f"unknown function {name!r}")
    fn = evaluate(callee, env, ctx)
    return _apply_value(fn, args, env, ctx)


def _apply_value(fn, args, env: Environment, ctx: EvalContext):
    if isinstance(fn, ErrorValue):
        return fn
    if not isinstance(fn, Closure):
        return ErrorValue(VALUE_ERROR.kind, "call target is not a lambda")
    values = [OMITTED if a is E.OMITTED_ARG else evaluate(a, env, ctx) for a in args]
    return apply_closure(fn, values, ctx)


def apply_closure(closure: Closure, args, ctx: EvalContext):
    """Apply a closure to evaluated arguments, binding omitted optionals."""
    if len(args) > closure.max_arity:
        return ErrorValue(VALUE_ERROR.kind, "too many arguments")
    if len(args) < closure.min_arity:
        return ErrorValue(VALUE_ERROR.kind, "missing required argument")
    if ctx.depth >= ctx.depth_limit:
        return ErrorValue(NUM_ERROR.kind, "recursion limit exceeded")
    frame = Environment(closure.env)
    for i, param in enumerate(closure.params):
        value = args[i] if i < len(args) else OMITTED
        frame.define(param.name, Binding.of_value(value))
    ctx.depth += 1
    try:
        return evaluate(closure.body, frame, ctx)
    finally:
        ctx.depth -= 1


def _call_builtin(builtin: Builtin, args, env: Environment, ctx: EvalContext):
    if not (builtin.min_args <= len(args) <= builtin.max_args):
        return ErrorValue(
            VALUE_ERROR.kind,
            f"{builtin.name} expects {builtin.min_args}..{builtin.max_args} arguments",
        )
    if builtin.raw:
        return builtin.impl(ctx, env, args)
    # Builtins receive error values unfiltered and decide propagation themselves.
    values = [OMITTED if a is E.OMITTED_ARG else evaluate(a, env, ctx) for a in args]
    return builtin.impl(ctx, *values)


def _eval_if(args, env: Environment, ctx: EvalContext):
    if len(args) not in (2, 3):
        return ErrorValue(VALUE_ERROR.kind, "IF expects 2 or 3 arguments")
    cond = evaluate(args[0], env, ctx) if args[0] is not E.OMITTED_ARG else OMITTED
    if isinstance(cond, ErrorValue):
        return cond
    if isinstance(cond, Array):
        # Array condition: both branches evaluate, selection is per cell. An
        # error in a branch cell surfaces only where that branch is selected.
        then_v = _branch_value(args[1] if len(args) > 1 else E.OMITTED_ARG, env, ctx)
        else_v = _branch_value(args[2] if len(args) > 2 else E.OMITTED_ARG, env, ctx)
        operands = (cond, then_v, else_v)
        nr, nc = common_shape(operands)
        out = []
        for r in range(nr):
            row = []
            for c in range(nc):
                cc, tc, ec = (cell_in(v, (nr, nc), r, c) for v in operands)
                row.append(_select_cell(cc, tc, ec))
            out.append(tuple(row))
        return Array(out)
    flag = coerce_to_bool(cond)
    if isinstance(flag, ErrorValue):
        return flag
    if flag:
        return _branch_value(args[1], env, ctx)
    if len(args) > 2:
        return _branch_value(args[2], env, ctx)
    return False


def _branch_value(arg, env: Environment, ctx: EvalContext):
    if arg is E.OMITTED_ARG:
        return False
    return evaluate(arg, env, ctx)


def _select_cell(cond, then_v, else_v):
    flag = coerce_to_bool(cond)
    if isinstance(flag, ErrorValue):
        return flag
    chosen = then_v if flag else else_v
    # Array cells hold scalars and errors only; a lambda cannot be one.
    return CALC_ERROR if isinstance(chosen, Closure) else chosen
