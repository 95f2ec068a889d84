"""Workbook model: cells, defined names, dependency graph, spill regions.

Recalculation is batch and deterministic: dirty cells and their transitive
dependents evaluate in topological order of the static reference graph;
strongly connected components collapse to #CIRC! cells. Spill placement can
shift cell/anchor relationships mid-pass, so recalculation iterates to a
fixpoint (bounded) re-dirtying readers of any cell whose exposure changed.

Deep lambda recursion needs far more Python stack than the default 8 MB, so
evaluation entry points run inside a worker thread with a large stack.
"""

from __future__ import annotations

import datetime as dt
import sys
import threading
from dataclasses import dataclass, field

from . import functions as _functions  # noqa: F401  (populates the builtin registry)
from . import expr as E
from .evaluator import Environment, EvalContext, TraceSink, evaluate, is_builtin_name
from .parser import ParseError, _cellref_parts, parse_formula, tokenize
from .values import (
    CIRC_ERROR,
    EMPTY,
    NUM_ERROR,
    SPILL_ERROR,
    Array,
    DateSerial,
    ErrorValue,
    error_from_text,
)

Address = tuple[str, int, int]  # (sheet key, row, col)

_STACK_BYTES_PER_FRAME = 4096
_FRAMES_PER_DEPTH = 64
_MAX_PASSES = 64


class NameCollision(ValueError):
    pass


class WorkbookFormatError(ValueError):
    def __init__(self, message: str, path: str, line: int):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass
class DefinedName:
    name: str
    expr: E.Expr


@dataclass
class Cell:
    formula: E.Expr | None = None
    literal: object = None
    value: object = None

    @property
    def has_content(self) -> bool:
        return self.formula is not None or self.literal is not None


@dataclass
class CalcReport:
    evaluated: int = 0
    placements: int = 0
    passes: int = 0
    cycles: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def run_deep(fn, depth_limit: int = 1024):
    """Run ``fn`` on a thread whose stack fits ``depth_limit`` lambda frames."""
    frames = depth_limit * _FRAMES_PER_DEPTH + 50_000
    stack = min(frames * _STACK_BYTES_PER_FRAME + (64 << 20), 1 << 31)
    box: dict = {}

    def target():
        if sys.getrecursionlimit() < frames:
            sys.setrecursionlimit(frames)
        try:
            box["value"] = fn()
        except BaseException as exc:  # re-raised on the calling thread
            box["error"] = exc

    old = threading.stack_size()
    threading.stack_size(stack)
    try:
        worker = threading.Thread(target=target, name="gridlambda-eval")
        worker.start()
    finally:
        threading.stack_size(old)
    worker.join()
    if "error" in box:
        raise box["error"]
    return box.get("value")


def parse_address(text: str, default_sheet: str = "Sheet1") -> tuple[str, int, int]:
    """Parse ``A1`` or ``Sheet!A1`` into (sheet name, row, col)."""
    sheet = default_sheet
    ref = text.strip()
    if "!" in ref:
        sheet, ref = ref.split("!", 1)
    parts = _cellref_parts(ref.strip())
    if parts is None:
        raise ValueError(f"not a cell address: {text!r}")
    _, col, _, row = parts
    return sheet, row, col


class Workbook:
    """A calculation workbook: sheets of cells plus workbook-scoped names."""

    def __init__(self, depth_limit: int = 1024, trace: TraceSink | None = None):
        self.cells: dict[Address, Cell] = {}
        self.sheet_names: dict[str, str] = {}  # key -> display name
        self.names: dict[str, DefinedName] = {}
        self.depth_limit = depth_limit
        self.trace = trace if trace is not None else TraceSink()
        self.default_sheet = "Sheet1"
        self._ensure_sheet("Sheet1")

        self._deps_out: dict[Address, set[Address]] = {}
        self._deps_in: dict[Address, set[Address]] = {}
        self._name_refs: dict[str, set[Address]] = {}  # name key -> referring cells
        self._regions: dict[Address, tuple[int, int]] = {}
        self._member_of: dict[Address, Address] = {}
        self._blocked: set[Address] = set()
        self._dirty: set[Address] = set()

    # -- sheets and addresses

    def _ensure_sheet(self, name: str) -> str:
        key = name.casefold()
        self.sheet_names.setdefault(key, name)
        return key

    def _sheet_key(self, name: str | None) -> str:
        return self._ensure_sheet(name if name else self.default_sheet)

    def address(self, text: str, sheet: str | None = None) -> Address:
        sheet_name, row, col = parse_address(text, sheet or self.default_sheet)
        return (self._sheet_key(sheet_name), row, col)

    # -- content editing

    def set_cell(self, addr: Address | str, content) -> None:
        """Assign a cell: a formula string (leading ``=``), a parsed Expr, or
        a literal scalar. ``None`` clears the cell."""
        if isinstance(addr, str):
            addr = self.address(addr)
        if content is None:
            self.clear_cell(addr)
            return
        cell = self.cells.get(addr)
        if cell is None:
            cell = self.cells[addr] = Cell()
        if isinstance(content, str) and content.lstrip().startswith(("=", "{")):
            content = parse_formula(content)
        if isinstance(content, E.Expr):
            cell.formula = content
            cell.literal = None
        else:
            cell.formula = None
            cell.literal = content
        cell.value = None
        self._rewire(addr)
        self._dirty.add(addr)
        self._touch_layout(addr)

    def clear_cell(self, addr: Address | str) -> None:
        if isinstance(addr, str):
            addr = self.address(addr)
        cell = self.cells.get(addr)
        if cell is None:
            return
        self._unwire(addr)
        for member in self._vacate(addr):
            for reader in self._deps_in.get(member, ()):
                self._dirty.add(reader)
        del self.cells[addr]
        self._dirty.add(addr)
        for reader in self._deps_in.get(addr, ()):
            self._dirty.add(reader)
        self._touch_layout(addr)

    def define_name(self, name: str, content) -> None:
        if _cellref_parts(name) is not None:
            raise NameCollision(f"{name!r} is shaped like a cell reference")
        tokens = tokenize(name)
        if len(tokens) != 1 or tokens[0].kind != "ident":
            raise NameCollision(f"{name!r} is not a valid name")
        if is_builtin_name(name) or name.upper() in ("LET", "LAMBDA"):
            raise NameCollision(f"{name!r} shadows a built-in function")
        if isinstance(content, str):
            content = parse_formula(content)
        elif not isinstance(content, E.Expr):
            content = _literal_expr(content)
        key = name.casefold()
        self.names[key] = DefinedName(name, content)
        # Redefinition dirties every cell whose formula reaches this name.
        for addr in sorted(self._name_refs.get(key, ())):
            self._rewire(addr)
            self._dirty.add(addr)

    def _touch_layout(self, addr: Address) -> None:
        """Content changes can collide with a live region or unblock a failed one."""
        anchor = self._member_of.get(addr)
        if anchor is not None and anchor != addr:
            self._dirty.add(anchor)
        self._dirty.update(self._blocked)

    # -- dependency graph

    def _rewire(self, addr: Address) -> None:
        self._unwire(addr)
        cell = self.cells.get(addr)
        if cell is None or cell.formula is None:
            return
        refs, names = _extract_refs(cell.formula, addr[0], self)
        self._deps_out[addr] = refs
        for ref in refs:
            self._deps_in.setdefault(ref, set()).add(addr)
        for name_key in names:
            self._name_refs.setdefault(name_key, set()).add(addr)

    def _unwire(self, addr: Address) -> None:
        for ref in self._deps_out.pop(addr, ()):
            readers = self._deps_in.get(ref)
            if readers is not None:
                readers.discard(addr)
                if not readers:
                    del self._deps_in[ref]
        for referers in self._name_refs.values():
            referers.discard(addr)

    # -- values seen by the evaluator

    def lookup_name(self, name: str) -> DefinedName | None:
        return self.names.get(name.casefold())

    def cell_value(self, sheet: str, row: int, col: int):
        addr = (self._sheet_key(sheet), row, col)
        cell = self.cells.get(addr)
        if cell is not None and cell.has_content:
            v = cell.value
            if isinstance(v, Array):
                return v.at(0, 0)
            return EMPTY if v is None else v
        anchor = self._member_of.get(addr)
        if anchor is not None:
            arr = self.cells[anchor].value
            if isinstance(arr, Array):
                return arr.at(addr[1] - anchor[1], addr[2] - anchor[2])
        return EMPTY

    def range_array(self, sheet: str, r1: int, c1: int, r2: int, c2: int) -> Array:
        key = self._sheet_key(sheet)
        rows = tuple(
            tuple(self.cell_value(key, r, c) for c in range(c1, c2 + 1))
            for r in range(r1, r2 + 1)
        )
        return Array(rows, origin=(key, r1, c1))

    def spill_array(self, sheet: str, row: int, col: int) -> Array | None:
        addr = (self._sheet_key(sheet), row, col)
        if addr not in self._regions:
            return None
        arr = self.cells[addr].value
        if not isinstance(arr, Array):
            return None
        return Array(arr.rows, origin=addr)

    def spill_region(self, addr: Address | str) -> tuple[int, int] | None:
        if isinstance(addr, str):
            addr = self.address(addr)
        return self._regions.get(addr)

    # -- evaluation

    def _context(self, caller: Address | None) -> EvalContext:
        return EvalContext(
            workbook=self,
            caller=caller,
            depth_limit=self.depth_limit,
            trace=self.trace,
        )

    def evaluate_formula(self, text: str, caller: Address | str | None = None):
        """Evaluate formula text against the workbook (no cell is written)."""
        if isinstance(caller, str):
            caller = self.address(caller)
        expr = text if isinstance(text, E.Expr) else parse_formula(text)

        def go():
            return evaluate(expr, Environment(), self._context(caller))

        return run_deep(go, self.depth_limit)

    def recalculate(self) -> CalcReport:
        return run_deep(self._recalculate, self.depth_limit)

    def _recalculate(self) -> CalcReport:
        report = CalcReport()
        pending = self._dirty
        self._dirty = set()
        circled: set[Address] = set()
        while pending and report.passes < _MAX_PASSES:
            report.passes += 1
            work = self._closure(pending)
            pending = self._run_pass(work, report, circled)
        if pending:
            # The spill layout never settled (mutually blocking anchors).
            for addr in sorted(pending):
                cell = self.cells.get(addr)
                if cell is not None and cell.has_content:
                    self._vacate(addr)
                    cell.value = CIRC_ERROR
                    report.cycles.append(addr)
        return report

    def _closure(self, seeds: set[Address]) -> set[Address]:
        """Seeds plus every transitive dependent, via cells and spill members."""
        seen = set(seeds)
        frontier = list(seeds)
        while frontier:
            addr = frontier.pop()
            readers = set(self._deps_in.get(addr, ()))
            shape = self._regions.get(addr)
            if shape is not None:
                for member in self._region_cells(addr, shape):
                    if member != addr:
                        readers.update(self._deps_in.get(member, ()))
            for reader in readers:
                if reader not in seen:
                    seen.add(reader)
                    frontier.append(reader)
        return {a for a in seen if a in self.cells and self.cells[a].has_content}

    def _effective_preds(self, addr: Address, work: set[Address]) -> set[Address]:
        # A reference to a spill member counts as a reference to its anchor.
        # Self edges stay: a formula reading its own cell (or its own spill
        # output) is a genuine cycle.
        preds = set()
        for dep in self._deps_out.get(addr, ()):
            if dep in work:
                preds.add(dep)
            anchor = self._member_of.get(dep)
            if anchor is not None and anchor in work:
                preds.add(anchor)
        return preds

    def _run_pass(self, work, report: CalcReport, circled: set[Address]) -> set[Address]:
        preds = {a: self._effective_preds(a, work) for a in work}
        sccs = _tarjan_sccs(preds)
        next_dirty: set[Address] = set()
        evaluated: set[Address] = set()
        for component in sccs:
            # Once circular within this recalculation, always circular: a
            # cell whose spill feeds itself must not flip back to placed when
            # vacating it removes the self edge.
            cyclic = (
                len(component) > 1
                or component[0] in preds[component[0]]
                or component[0] in circled
            )
            for addr in sorted(component):
                if cyclic:
                    value = CIRC_ERROR
                    if addr not in circled:
                        report.cycles.append(addr)
                    circled.add(addr)
                else:
                    value = self._evaluate_cell(addr)
                    report.evaluated += 1
                # The cell counts as evaluated before its spill is placed, so
                # a placement that feeds the cell's own inputs re-queues it.
                evaluated.add(addr)
                self._set_cell_result(addr, value, report, evaluated, work, next_dirty)
        return next_dirty

    def _evaluate_cell(self, addr: Address):
        cell = self.cells[addr]
        if cell.formula is None:
            return cell.literal
        try:
            return evaluate(cell.formula, Environment(), self._context(addr))
        except RecursionError:
            return ErrorValue(NUM_ERROR.kind, "evaluation too deeply nested")

    def _set_cell_result(self, addr, value, report, evaluated, work, next_dirty):
        cell = self.cells[addr]
        if isinstance(value, Array):
            result, changed = self._place_spill(addr, value)
            cell.value = result
            if isinstance(result, ErrorValue):
                report.errors.append((addr, result))
            else:
                report.placements += 1
        else:
            changed = self._vacate(addr)
            cell.value = value
            if isinstance(value, ErrorValue):
                report.errors.append((addr, value))
        # Exposure of these addresses changed. Readers already evaluated this
        # pass (or outside the pass entirely) saw stale values and go around
        # again; readers still queued will pick up fresh values in order.
        for member in changed:
            for reader in self._deps_in.get(member, ()):
                if reader not in work or reader in evaluated:
                    next_dirty.add(reader)

    def _region_cells(self, anchor: Address, shape: tuple[int, int]):
        sheet, row, col = anchor
        for r in range(shape[0]):
            for c in range(shape[1]):
                yield (sheet, row + r, col + c)

    def _vacate(self, anchor: Address) -> set[Address]:
        shape = self._regions.pop(anchor, None)
        self._blocked.discard(anchor)
        if shape is None:
            return set()
        members = set(self._region_cells(anchor, shape))
        for member in members:
            if self._member_of.get(member) == anchor:
                del self._member_of[member]
        members.discard(anchor)
        return members

    def _place_spill(self, anchor: Address, arr: Array):
        """Lay out ``arr``'s spill region at ``anchor`` if every non-anchor
        target cell is free. Returns (stored value, changed member set)."""
        old_members = self._vacate(anchor)
        sheet, row, col = anchor
        nr, nc = arr.shape
        blocker = None
        if row + nr - 1 > E.GRID_MAX_ROWS or col + nc - 1 > E.GRID_MAX_COLS:
            blocker = "the grid edge"
        else:
            for member in self._region_cells(anchor, (nr, nc)):
                if member == anchor:
                    continue
                holder = self.cells.get(member)
                if (holder is not None and holder.has_content) or member in self._member_of:
                    blocker = _format_address(member, self.sheet_names)
                    break
        if blocker is not None:
            self._blocked.add(anchor)
            return ErrorValue(SPILL_ERROR.kind, f"blocked by {blocker}"), old_members
        new_members = set()
        for member in self._region_cells(anchor, (nr, nc)):
            if member != anchor:
                self._member_of[member] = anchor
                new_members.add(member)
        self._regions[anchor] = (nr, nc)
        return Array(arr.rows), old_members | new_members


def _format_address(addr: Address, sheet_names: dict[str, str]) -> str:
    sheet, row, col = addr
    return f"{sheet_names.get(sheet, sheet)}!{E.col_to_letters(col)}{row}"


def _literal_expr(value) -> E.Expr:
    if isinstance(value, bool):
        return E.BoolLit(value)
    if isinstance(value, (int, float)):
        return E.NumberLit(float(value))
    if isinstance(value, ErrorValue):
        return E.ErrorLit(value)
    return E.TextLit(str(value))


# ---------------------------------------------------------------------------
# Static reference extraction


def _extract_refs(expr: E.Expr, sheet: str, wb: Workbook):
    """All cell addresses and defined-name keys a formula statically reaches.

    Lexically bound names (LET bindings, lambda parameters) are excluded;
    defined names are expanded transitively with a cycle guard, so lambda
    recursion through a name never produces a self edge.
    """
    addrs: set[Address] = set()
    names: set[str] = set()
    _walk(expr, frozenset(), sheet, wb, addrs, names, frozenset())
    return addrs, names


def _walk(node, bound, sheet, wb, addrs, names, visiting):
    match node:
        case E.CellRef():
            key = wb._sheet_key(node.sheet) if node.sheet else sheet
            addrs.add((key, node.row, node.col))
        case E.RangeRef(start=s, end=t):
            key = wb._sheet_key(node.sheet) if node.sheet else sheet
            for r in range(s.row, t.row + 1):
                for c in range(s.col, t.col + 1):
                    addrs.add((key, r, c))
        case E.SpillRef(target=target):
            _walk_spill_target(target, sheet, wb, addrs, names, visiting)
        case E.NameRef(name=name):
            key = name.casefold()
            if key in bound:
                return
            defined = wb.names.get(key)
            if defined is None:
                return
            names.add(key)
            if key not in visiting:
                _walk(defined.expr, frozenset(), sheet, wb, addrs, names, visiting | {key})
        case E.ImplicitIntersect(inner=inner):
            _walk(inner, bound, sheet, wb, addrs, names, visiting)
        case E.Call(callee=callee, args=args):
            _walk(callee, bound, sheet, wb, addrs, names, visiting)
            for a in args:
                if a is not E.OMITTED_ARG:
                    _walk(a, bound, sheet, wb, addrs, names, visiting)
        case E.Let(bindings=bindings, body=body):
            inner_bound = set(bound)
            for name, value_expr in bindings:
                _walk(value_expr, frozenset(inner_bound), sheet, wb, addrs, names, visiting)
                inner_bound.add(name.casefold())
            _walk(body, frozenset(inner_bound), sheet, wb, addrs, names, visiting)
        case E.Lambda(params=params, body=body):
            inner = frozenset(bound | {p.name.casefold() for p in params})
            _walk(body, inner, sheet, wb, addrs, names, visiting)
        case E.BinaryOp(left=left, right=right):
            _walk(left, bound, sheet, wb, addrs, names, visiting)
            _walk(right, bound, sheet, wb, addrs, names, visiting)
        case E.UnaryOp(operand=operand) | E.PercentPostfix(operand=operand):
            _walk(operand, bound, sheet, wb, addrs, names, visiting)
        case _:
            pass


def _walk_spill_target(target, sheet, wb, addrs, names, visiting):
    if isinstance(target, E.CellRef):
        key = wb._sheet_key(target.sheet) if target.sheet else sheet
        addrs.add((key, target.row, target.col))
    elif isinstance(target, E.NameRef):
        name_key = target.name.casefold()
        if name_key in visiting:
            return
        names.add(name_key)
        defined = wb.names.get(name_key)
        if defined is not None:
            _walk_spill_target(defined.expr, sheet, wb, addrs, names, visiting | {name_key})


# ---------------------------------------------------------------------------
# Strongly connected components (iterative Tarjan, deterministic order)


def _tarjan_sccs(preds: dict[Address, set[Address]]) -> list[list[Address]]:
    """SCCs of the dependency graph, dependencies-first.

    ``preds`` maps node -> prerequisite nodes; the returned component order
    guarantees a node's prerequisites appear in earlier (or the same)
    components.
    """
    index: dict[Address, int] = {}
    low: dict[Address, int] = {}
    on_stack: set[Address] = set()
    stack: list[Address] = []
    out: list[list[Address]] = []
    counter = [0]

    for root in sorted(preds):
        if root in index:
            continue
        call_stack = [(root, iter(sorted(preds[root])))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while call_stack:
            node, it = call_stack[-1]
            advanced = False
            for nxt in it:
                if nxt not in preds:
                    continue
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    call_stack.append((nxt, iter(sorted(preds[nxt]))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            call_stack.pop()
            if call_stack:
                parent = call_stack[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                out.append(component)
    return out


# ---------------------------------------------------------------------------
# Workbook text format
#
#   sheet <name>                 opens a sheet section
#   <A1-address> := <content>    cell assignment (formula or literal)
#   name <identifier> := <formula-or-literal>
#   #                            begins a comment line


def parse_literal(text: str):
    """Literal cell content: number, TRUE/FALSE, error, ISO date, else text."""
    raw = text.strip()
    if raw.upper() in ("TRUE", "FALSE"):
        return raw.upper() == "TRUE"
    err = error_from_text(raw)
    if err is not None:
        return err
    try:
        return float(raw)
    except ValueError:
        pass
    if len(raw) == 10 and raw[4] == "-" and raw[7] == "-":
        try:
            day = dt.date.fromisoformat(raw)
            return DateSerial((day - dt.date(1899, 12, 30)).days)
        except ValueError:
            pass
    return raw


def load_workbook_text(
    text: str,
    path: str = "<workbook>",
    depth_limit: int = 1024,
    trace: TraceSink | None = None,
) -> Workbook:
    wb = Workbook(depth_limit=depth_limit, trace=trace)
    current_sheet = wb.default_sheet
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.lower().startswith("sheet ") and ":=" not in line:
                current_sheet = line[6:].strip()
                wb._ensure_sheet(current_sheet)
                continue
            if ":=" not in line:
                raise WorkbookFormatError("expected ':=' assignment", path, line_no)
            lhs, rhs = line.split(":=", 1)
            lhs = lhs.strip()
            rhs = rhs.strip()
            is_formula = rhs.startswith("=") or rhs.startswith("{")
            if lhs.lower().startswith("name "):
                name = lhs[5:].strip()
                wb.define_name(name, rhs if is_formula else _literal_expr(parse_literal(rhs)))
            else:
                addr = wb.address(lhs, sheet=current_sheet)
                wb.set_cell(addr, rhs if is_formula else parse_literal(rhs))
        except WorkbookFormatError:
            raise
        except (ParseError, NameCollision, ValueError) as exc:
            raise WorkbookFormatError(str(exc), path, line_no) from exc
    return wb


def load_workbook(path, depth_limit: int = 1024, trace: TraceSink | None = None) -> Workbook:
    from pathlib import Path

    p = Path(path)
    return load_workbook_text(
        p.read_text(encoding="utf-8"), path=str(p), depth_limit=depth_limit, trace=trace
    )
