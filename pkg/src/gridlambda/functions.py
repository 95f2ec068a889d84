"""Built-in worksheet functions: helper (lambda-consuming), shaping, math, dates.

Each builtin is total over values: failures come back as error values in or
around the result, never as exceptions.
"""

from __future__ import annotations

import datetime as dt
import math

from . import expr as E
from . import numerics
from .evaluator import apply_closure, evaluate, register
from .values import (
    CALC_ERROR,
    DIV0,
    EMPTY,
    NA,
    NUM_ERROR,
    OMITTED,
    REF_ERROR,
    VALUE_ERROR,
    Array,
    Closure,
    DateSerial,
    ErrorValue,
    cell_in,
    coerce_to_bool,
    coerce_to_number,
    common_shape,
    lift_elementwise,
)

# ---------------------------------------------------------------------------
# Shared helpers


def _as_array(v):
    if isinstance(v, Array):
        return v
    if isinstance(v, Closure):
        return VALUE_ERROR
    if v is OMITTED:
        return VALUE_ERROR
    return Array.from_scalar(v)


def _int_arg(v, default=None):
    """Truncate a numeric argument to int; OMITTED takes the default."""
    if v is OMITTED or v is EMPTY:
        if default is None:
            return VALUE_ERROR
        return default
    n = coerce_to_number(v)
    if isinstance(n, ErrorValue):
        return n
    return math.trunc(n)


def _num_arg(v, default=None):
    if v is OMITTED or v is EMPTY:
        if default is None:
            return VALUE_ERROR
        return default
    return coerce_to_number(v)


def _closure_arg(v, arity):
    if not isinstance(v, Closure):
        return VALUE_ERROR
    if not (v.min_arity <= arity <= v.max_arity):
        return ErrorValue(VALUE_ERROR.kind, f"lambda must accept {arity} argument(s)")
    return v


def _scalar_or_calc(v):
    """Helper-function slices must produce scalars; anything else is #CALC!."""
    if isinstance(v, (Array, Closure)):
        return CALC_ERROR
    return v


def _first_error(cells):
    return next((c for c in cells if isinstance(c, ErrorValue)), None)


# ---------------------------------------------------------------------------
# Lambda helper functions


@register("MAP", 2, 64)
def _map(ctx, *args):
    fn = args[-1]
    arrays = [_as_array(a) for a in args[:-1]]
    err = _first_error(arrays)
    if err is not None:
        return err
    fn = _closure_arg(fn, len(arrays))
    if isinstance(fn, ErrorValue):
        return fn
    nr, nc = common_shape(arrays)
    out = []
    for r in range(nr):
        row = []
        for c in range(nc):
            cells = [cell_in(a, (nr, nc), r, c) for a in arrays]
            err = _first_error(cells)
            if err is not None:
                row.append(err)
                continue
            row.append(_scalar_or_calc(apply_closure(fn, cells, ctx)))
        out.append(tuple(row))
    result = Array(out)
    return result.at(0, 0) if result.shape == (1, 1) else result


@register("BYROW", 2, 2)
def _byrow(ctx, array, fn):
    return _by_axis(ctx, array, fn, axis="row")


@register("BYCOL", 2, 2)
def _bycol(ctx, array, fn):
    return _by_axis(ctx, array, fn, axis="col")


def _by_axis(ctx, array, fn, axis):
    arr = _as_array(array)
    if isinstance(arr, ErrorValue):
        return arr
    fn = _closure_arg(fn, 1)
    if isinstance(fn, ErrorValue):
        return fn
    if axis == "row":
        slices = [Array((row,)) for row in arr.rows]
    else:
        slices = [Array(tuple((row[c],) for row in arr.rows)) for c in range(arr.n_cols)]
    results = [_scalar_or_calc(apply_closure(fn, [s], ctx)) for s in slices]
    if axis == "row":
        return Array.col(results)
    return Array.row(results)


@register("SCAN", 3, 3)
def _scan(ctx, init, array, fn):
    if isinstance(init, ErrorValue):
        return init
    if isinstance(init, (Array, Closure)):
        return VALUE_ERROR
    arr = _as_array(array)
    if isinstance(arr, ErrorValue):
        return arr
    fn = _closure_arg(fn, 2)
    if isinstance(fn, ErrorValue):
        return fn
    acc = init
    out = []
    for row in arr.rows:
        out_row = []
        for cell in row:
            acc = _scalar_or_calc(apply_closure(fn, [acc, cell], ctx))
            out_row.append(acc)
        out.append(tuple(out_row))
    return Array(out)


@register("REDUCE", 3, 3)
def _reduce(ctx, init, array, fn):
    # The accumulator may be an array: REDUCE is the one helper that admits
    # array results, which is what lets a scan-of-rows be built on top of it.
    if isinstance(init, ErrorValue):
        return init
    arr = _as_array(array)
    if isinstance(arr, ErrorValue):
        return arr
    fn = _closure_arg(fn, 2)
    if isinstance(fn, ErrorValue):
        return fn
    acc = init
    for cell in arr.cells():
        acc = apply_closure(fn, [acc, cell], ctx)
        if isinstance(acc, ErrorValue):
            return acc
    return acc


@register("MAKEARRAY", 3, 3)
def _makearray(ctx, rows, cols, fn):
    nr, nc = _int_arg(rows), _int_arg(cols)
    if isinstance(nr, ErrorValue):
        return nr
    if isinstance(nc, ErrorValue):
        return nc
    if nr < 1 or nc < 1:
        return VALUE_ERROR
    fn = _closure_arg(fn, 2)
    if isinstance(fn, ErrorValue):
        return fn
    out = []
    for r in range(1, nr + 1):
        row = [
            _scalar_or_calc(apply_closure(fn, [float(r), float(c)], ctx))
            for c in range(1, nc + 1)
        ]
        out.append(tuple(row))
    return Array(out)


@register("ISOMITTED", 1, 1)
def _isomitted(ctx, v):
    return v is OMITTED


# ---------------------------------------------------------------------------
# Shaping functions


def _stack_block(v):
    if isinstance(v, Array):
        return v
    if isinstance(v, Closure):
        return Array.from_scalar(CALC_ERROR)
    if v is OMITTED:
        return Array.from_scalar(EMPTY)
    return Array.from_scalar(v)


@register("VSTACK", 1, 64)
def _vstack(ctx, *args):
    blocks = [_stack_block(a) for a in args]
    width = max(b.n_cols for b in blocks)
    rows = []
    for b in blocks:
        for row in b.rows:
            rows.append(tuple(row) + (NA,) * (width - len(row)))
    return Array(rows)


@register("HSTACK", 1, 64)
def _hstack(ctx, *args):
    blocks = [_stack_block(a) for a in args]
    height = max(b.n_rows for b in blocks)
    rows = [[] for _ in range(height)]
    for b in blocks:
        for r in range(height):
            if r < b.n_rows:
                rows[r].extend(b.rows[r])
            else:
                rows[r].extend([NA] * b.n_cols)
    return Array(tuple(tuple(r) for r in rows))


@register("TAKE", 2, 3)
def _take(ctx, array, rows=OMITTED, cols=OMITTED):
    return _take_drop(array, rows, cols, mode="take")


@register("DROP", 2, 3)
def _drop(ctx, array, rows=OMITTED, cols=OMITTED):
    return _take_drop(array, rows, cols, mode="drop")


def _take_drop(array, rows, cols, mode):
    arr = _as_array(array)
    if isinstance(arr, ErrorValue):
        return arr
    row_idx = _axis_slice(arr.n_rows, rows, mode)
    if isinstance(row_idx, ErrorValue):
        return row_idx
    col_idx = _axis_slice(arr.n_cols, cols, mode)
    if isinstance(col_idx, ErrorValue):
        return col_idx
    out = tuple(tuple(arr.rows[r][c] for c in col_idx) for r in row_idx)
    origin = None
    if arr.origin is not None:
        sheet, r0, c0 = arr.origin
        origin = (sheet, r0 + row_idx[0], c0 + col_idx[0])
    return Array(out, origin=origin)


def _axis_slice(extent, count, mode):
    """Index list along one axis. Counts beyond the extent error out rather
    than clamp, so model-sizing bugs surface."""
    if count is OMITTED or count is EMPTY:
        return range(extent)
    n = _int_arg(count)
    if isinstance(n, ErrorValue):
        return n
    if n == 0:
        return VALUE_ERROR
    if mode == "take":
        if abs(n) > extent:
            return VALUE_ERROR
        return range(0, n) if n > 0 else range(extent + n, extent)
    if abs(n) >= extent:
        return VALUE_ERROR
    return range(n, extent) if n > 0 else range(0, extent + n)


@register("WRAPROWS", 2, 3)
def _wraprows(ctx, vector, width, pad=OMITTED):
    arr = _as_array(vector)
    if isinstance(arr, ErrorValue):
        return arr
    if not arr.is_vector():
        return VALUE_ERROR
    w = _int_arg(width)
    if isinstance(w, ErrorValue):
        return w
    if w < 1:
        return VALUE_ERROR
    fill = NA if pad is OMITTED else pad
    flat = arr.column()
    rows = []
    for start in range(0, len(flat), w):
        chunk = flat[start:start + w]
        rows.append(tuple(chunk) + (fill,) * (w - len(chunk)))
    return Array(rows)


@register("SEQUENCE", 1, 4)
def _sequence(ctx, rows, cols=OMITTED, start=OMITTED, step=OMITTED):
    nr = _int_arg(rows)
    nc = _int_arg(cols, default=1)
    if isinstance(nr, ErrorValue):
        return nr
    if isinstance(nc, ErrorValue):
        return nc
    if nr < 1 or nc < 1:
        return VALUE_ERROR
    first = _num_arg(start, default=1.0)
    delta = _num_arg(step, default=1.0)
    if isinstance(first, ErrorValue):
        return first
    if isinstance(delta, ErrorValue):
        return delta
    return Array(
        tuple(
            tuple(first + delta * (r * nc + c) for c in range(nc))
            for r in range(nr)
        )
    )


@register("FILTER", 2, 3)
def _filter(ctx, array, include, if_empty=OMITTED):
    arr = _as_array(array)
    if isinstance(arr, ErrorValue):
        return arr
    inc = _as_array(include)
    if isinstance(inc, ErrorValue):
        return inc
    if not inc.is_vector():
        return VALUE_ERROR
    flags = []
    for cell in inc.column():
        if isinstance(cell, ErrorValue):
            return cell
        flag = coerce_to_bool(cell)
        if isinstance(flag, ErrorValue):
            return flag
        flags.append(flag)
    by_rows = inc.n_cols == 1
    extent = arr.n_rows if by_rows else arr.n_cols
    if len(flags) != extent:
        return VALUE_ERROR
    if by_rows:
        rows = [arr.rows[r] for r in range(extent) if flags[r]]
    else:
        keep = [c for c in range(extent) if flags[c]]
        rows = [tuple(row[c] for c in keep) for row in arr.rows] if keep else []
    if not rows or not rows[0]:
        if if_empty is not OMITTED:
            return if_empty
        return ErrorValue(CALC_ERROR.kind, "FILTER selected nothing")
    return Array(rows)


_SORT_RANK = {"number": 0, "text": 1, "bool": 2, "empty": 3, "error": 4}


def _sort_key(cell):
    if isinstance(cell, ErrorValue):
        return (_SORT_RANK["error"], cell.kind.value)
    if isinstance(cell, bool):
        return (_SORT_RANK["bool"], cell)
    if isinstance(cell, (int, float)):
        return (_SORT_RANK["number"], float(cell))
    if isinstance(cell, str):
        return (_SORT_RANK["text"], cell.casefold())
    return (_SORT_RANK["empty"], 0)


@register("SORT", 1, 3)
def _sort(ctx, array, index=OMITTED, order=OMITTED):
    arr = _as_array(array)
    if isinstance(arr, ErrorValue):
        return arr
    idx = _int_arg(index, default=1)
    if isinstance(idx, ErrorValue):
        return idx
    direction = _int_arg(order, default=1)
    if isinstance(direction, ErrorValue):
        return direction
    if direction not in (1, -1) or not (1 <= idx <= arr.n_cols):
        return VALUE_ERROR
    ordered = sorted(
        arr.rows,
        key=lambda row: _sort_key(row[idx - 1]),
        reverse=direction == -1,
    )
    return Array(ordered)


# ---------------------------------------------------------------------------
# Reductions


def _walk_reduction(args, collect_direct, collect_cell):
    for arg in args:
        if isinstance(arg, ErrorValue):
            return arg
        if isinstance(arg, Closure):
            return VALUE_ERROR
        if isinstance(arg, Array):
            for cell in arg.cells():
                if isinstance(cell, ErrorValue):
                    return cell
                collect_cell(cell)
        elif arg is OMITTED or arg is EMPTY:
            continue
        else:
            out = collect_direct(arg)
            if isinstance(out, ErrorValue):
                return out
    return None


def _sum_count(args):
    """Shared SUM/COUNT walk. Direct scalar arguments coerce; cells inside
    arrays count only when they are numbers (Excel's split behavior)."""
    total = 0.0
    count = 0

    def direct(v):
        nonlocal total, count
        n = coerce_to_number(v)
        if isinstance(n, ErrorValue):
            return n
        total += n
        count += 1
        return None

    def cell(v):
        nonlocal total, count
        if isinstance(v, bool) or isinstance(v, str) or v is EMPTY:
            return
        if isinstance(v, (int, float)):
            total += float(v)
            count += 1

    err = _walk_reduction(args, direct, cell)
    if err is not None:
        return err
    return total, count


@register("SUM", 0, 255)
def _sum(ctx, *args):
    out = _sum_count(args)
    if isinstance(out, ErrorValue):
        return out
    return out[0]


@register("COUNT", 1, 255)
def _count(ctx, *args):
    total = 0

    def direct(v):
        nonlocal total
        n = coerce_to_number(v)
        if not isinstance(n, ErrorValue):
            total += 1
        return None

    def cell(v):
        nonlocal total
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            total += 1

    err = _walk_reduction(args, direct, cell)
    if err is not None:
        return err
    return float(total)


@register("AVERAGE", 1, 255)
def _average(ctx, *args):
    out = _sum_count(args)
    if isinstance(out, ErrorValue):
        return out
    total, count = out
    if count == 0:
        return DIV0
    return total / count


# ---------------------------------------------------------------------------
# Integer math, matrix product


def _mod_kernel(a, b):
    a, b = coerce_to_number(a), coerce_to_number(b)
    if isinstance(a, ErrorValue):
        return a
    if isinstance(b, ErrorValue):
        return b
    if b == 0:
        return DIV0
    return a - b * math.floor(a / b)


def _quotient_kernel(a, b):
    a, b = coerce_to_number(a), coerce_to_number(b)
    if isinstance(a, ErrorValue):
        return a
    if isinstance(b, ErrorValue):
        return b
    if b == 0:
        return DIV0
    return float(math.trunc(a / b))


@register("MOD", 2, 2)
def _mod(ctx, a, b):
    return lift_elementwise(_mod_kernel, (a, b))


@register("QUOTIENT", 2, 2)
def _quotient(ctx, a, b):
    return lift_elementwise(_quotient_kernel, (a, b))


@register("MMULT", 2, 2)
def _mmult(ctx, a, b):
    ma, mb = _as_array(a), _as_array(b)
    if isinstance(ma, ErrorValue):
        return ma
    if isinstance(mb, ErrorValue):
        return mb
    for cell in (*ma.cells(), *mb.cells()):
        if isinstance(cell, ErrorValue):
            return cell
        if isinstance(cell, bool) or not isinstance(cell, (int, float)):
            return VALUE_ERROR
    if ma.n_cols != mb.n_rows:
        return VALUE_ERROR
    out = []
    for r in range(ma.n_rows):
        row = []
        for c in range(mb.n_cols):
            row.append(sum(ma.rows[r][k] * mb.rows[k][c] for k in range(ma.n_cols)))
        out.append(tuple(row))
    return Array(out)


# ---------------------------------------------------------------------------
# Date functions. Serial epoch: day 0 = 1899-12-30; serials below 61 (the
# Lotus leap-year anomaly zone) are rejected.

_EPOCH = dt.date(1899, 12, 30)
_MIN_SERIAL = 61


def _serial_to_date(serial):
    n = coerce_to_number(serial)
    if isinstance(n, ErrorValue):
        return n
    days = math.floor(n)
    if days < _MIN_SERIAL:
        return NUM_ERROR
    try:
        return _EPOCH + dt.timedelta(days=days)
    except OverflowError:
        return NUM_ERROR


def _date_to_serial(date: dt.date) -> float:
    return float((date - _EPOCH).days)


def _eomonth_kernel(d, months):
    date = _serial_to_date(d)
    if isinstance(date, ErrorValue):
        return date
    k = _int_arg(months)
    if isinstance(k, ErrorValue):
        return k
    total = date.year * 12 + (date.month - 1) + k
    year, month0 = divmod(total, 12)
    if not (1 <= year <= 9999):
        return NUM_ERROR
    month = month0 + 1
    if month == 12:
        last = dt.date(year, 12, 31)
    else:
        last = dt.date(year, month + 1, 1) - dt.timedelta(days=1)
    serial = _date_to_serial(last)
    if serial < _MIN_SERIAL:
        return NUM_ERROR
    return DateSerial(serial)


def _month_kernel(d):
    date = _serial_to_date(d)
    return date if isinstance(date, ErrorValue) else float(date.month)


def _year_kernel(d):
    date = _serial_to_date(d)
    return date if isinstance(date, ErrorValue) else float(date.year)


@register("EOMONTH", 2, 2)
def _eomonth(ctx, d, months):
    return lift_elementwise(_eomonth_kernel, (d, months))


@register("MONTH", 1, 1)
def _month(ctx, d):
    return lift_elementwise(_month_kernel, (d,))


@register("YEAR", 1, 1)
def _year(ctx, d):
    return lift_elementwise(_year_kernel, (d,))


# ---------------------------------------------------------------------------
# Lookup


@register("INDEX", 2, 3)
def _index(ctx, array, r, c=OMITTED):
    arr = _as_array(array)
    if isinstance(arr, ErrorValue):
        return arr
    i = _int_arg(r)
    if isinstance(i, ErrorValue):
        return i
    if c is OMITTED or c is EMPTY:
        if arr.is_vector():
            flat = arr.column()
            if not (1 <= i <= len(flat)):
                return REF_ERROR
            return flat[i - 1]
        if not (1 <= i <= arr.n_rows):
            return REF_ERROR
        origin = None
        if arr.origin is not None:
            sheet, r0, c0 = arr.origin
            origin = (sheet, r0 + i - 1, c0)
        return Array((arr.rows[i - 1],), origin=origin)
    j = _int_arg(c)
    if isinstance(j, ErrorValue):
        return j
    if not (1 <= i <= arr.n_rows and 1 <= j <= arr.n_cols):
        return REF_ERROR
    return arr.at(i - 1, j - 1)


@register("ROW", 1, 1, raw=True)
def _row(ctx, env, args):
    """Row number(s) of a reference: a scalar for one row, a spilled column
    otherwise. Works through lambda parameters because arrays read from a
    range carry their grid origin."""
    target = args[0]
    if isinstance(target, E.CellRef):
        return float(target.row)
    if isinstance(target, E.RangeRef):
        r1, r2 = target.start.row, target.end.row
        if r1 == r2:
            return float(r1)
        return Array.col([float(r) for r in range(r1, r2 + 1)])
    if isinstance(target, E.Call) and isinstance(target.callee, E.NameRef) \
            and target.callee.name.upper() == "INDEX" and len(target.args) >= 2:
        base = evaluate(target.args[0], env, ctx)
        if isinstance(base, ErrorValue):
            return base
        if not isinstance(base, Array) or base.origin is None:
            return VALUE_ERROR
        i = _int_arg(evaluate(target.args[1], env, ctx))
        if isinstance(i, ErrorValue):
            return i
        if not (1 <= i <= base.n_rows):
            return REF_ERROR
        return float(base.origin[1] + i - 1)
    value = evaluate(target, env, ctx)
    if isinstance(value, ErrorValue):
        return value
    if isinstance(value, Array) and value.origin is not None:
        r0 = value.origin[1]
        if value.n_rows == 1:
            return float(r0)
        return Array.col([float(r) for r in range(r0, r0 + value.n_rows)])
    return VALUE_ERROR


# ---------------------------------------------------------------------------
# Convolution bridge to the numerics kernel


@register("CONVOLVE", 2, 2)
def _convolve(ctx, a, b):
    va = _numeric_vector(a)
    if isinstance(va, ErrorValue):
        return va
    vb = _numeric_vector(b)
    if isinstance(vb, ErrorValue):
        return vb
    out = numerics.convolve_fft(va[0], vb[0])
    values = [float(x) for x in out]
    return Array.col(values) if va[1] else Array.row(values)


def _numeric_vector(v):
    """Coerce a row or column operand to (list of floats, is_column)."""
    arr = _as_array(v)
    if isinstance(arr, ErrorValue):
        return arr
    if not arr.is_vector():
        return VALUE_ERROR
    out = []
    for cell in arr.column():
        n = coerce_to_number(cell)
        if isinstance(n, ErrorValue):
            return n
        out.append(n)
    return out, arr.n_cols == 1 and arr.n_rows > 1


def registry() -> dict:
    """Snapshot of the builtin registry for enumeration (name -> Builtin)."""
    from .evaluator import BUILTINS

    return dict(BUILTINS)
