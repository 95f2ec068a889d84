"""Workbook recalculation, spill lifecycle, dependency graph, file format."""

import random

import pytest

from gridlambda import NameCollision, Workbook, WorkbookFormatError, load_workbook_text
from gridlambda.values import DateSerial, EMPTY, ErrorKind, ErrorValue


def kind(v):
    assert isinstance(v, ErrorValue), f"expected an error, got {v!r}"
    return v.kind


def grid_snapshot(wb):
    """Every visible cell value (content cells and spill members)."""
    out = {}
    for addr, cell in wb.cells.items():
        out[addr] = wb.cell_value(*addr)
    for member, anchor in wb._member_of.items():
        out[member] = wb.cell_value(*member)
    return out


# -- recalculation order and determinism --------------------------------------


def test_chain_independent_of_entry_order():
    for order in ([1, 2, 3], [3, 2, 1], [2, 3, 1]):
        wb = Workbook()
        cells = {1: ("A1", "1"), 2: ("A2", "=A1+1"), 3: ("A3", "=A2+1")}
        for k in order:
            addr, content = cells[k]
            wb.set_cell(addr, content if content.startswith("=") else float(content))
        wb.recalculate()
        assert wb.cell_value("Sheet1", 3, 1) == 3.0


def test_recalculate_idempotent():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(4)")
    wb.set_cell("B1", "=SUM(A1#)")
    wb.recalculate()
    first = grid_snapshot(wb)
    report = wb.recalculate()
    assert grid_snapshot(wb) == first
    assert report.evaluated == 0


def test_confluence_under_shuffled_edit_orders():
    edits = [
        ("A1", 5.0),
        ("A2", "=A1*2"),
        ("B1", "=SEQUENCE(3)"),
        ("C1", "=SUM(B1#) + A2"),
        ("D1", "=IF(C1 > 10, A1, B2)"),
        ("E5", "hello"),
    ]
    baseline = None
    rng = random.Random(99)
    for _ in range(6):
        shuffled = edits[:]
        rng.shuffle(shuffled)
        wb = Workbook()
        for addr, content in shuffled:
            wb.set_cell(addr, content)
        wb.recalculate()
        snap = grid_snapshot(wb)
        if baseline is None:
            baseline = snap
        assert snap == baseline


def test_edit_propagates_through_names():
    wb = Workbook()
    wb.define_name("doubled", "=A1 * 2")
    wb.set_cell("A1", 10.0)
    wb.set_cell("B1", "=doubled + 1")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 2) == 21.0
    wb.set_cell("A1", 100.0)
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 2) == 201.0


def test_name_redefinition_dirties_referents():
    wb = Workbook()
    wb.define_name("k", "=1")
    wb.set_cell("A1", "=k + 1")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 1) == 2.0
    wb.define_name("k", "=41")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 1) == 42.0


def test_untaken_branch_still_creates_edge():
    wb = Workbook()
    wb.set_cell("A1", "=IF(TRUE, 1, B9)")
    wb.recalculate()
    assert ("sheet1", 9, 2) in wb._deps_out[("sheet1", 1, 1)]


# -- cycles --------------------------------------------------------------------


def test_two_cycle_both_circ():
    wb = Workbook()
    wb.set_cell("A1", "=A2")
    wb.set_cell("A2", "=A1")
    wb.recalculate()
    assert kind(wb.cell_value("Sheet1", 1, 1)) == ErrorKind.CIRCULAR
    assert kind(wb.cell_value("Sheet1", 2, 1)) == ErrorKind.CIRCULAR


def test_self_reference_circ():
    wb = Workbook()
    wb.set_cell("A1", "=A1+1")
    wb.recalculate()
    assert kind(wb.cell_value("Sheet1", 1, 1)) == ErrorKind.CIRCULAR


def test_downstream_of_cycle_evaluates():
    wb = Workbook()
    wb.set_cell("A1", "=A2")
    wb.set_cell("A2", "=A1")
    wb.set_cell("A3", "=IF(TRUE, 7, A1)")
    wb.set_cell("A4", "=A1+1")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 3, 1) == 7.0
    assert kind(wb.cell_value("Sheet1", 4, 1)) == ErrorKind.CIRCULAR


def test_cycle_resolution_after_breaking_edit():
    wb = Workbook()
    wb.set_cell("A1", "=A2")
    wb.set_cell("A2", "=A1")
    wb.recalculate()
    wb.set_cell("A2", 5.0)
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 1) == 5.0


def test_lambda_recursion_is_not_circular():
    wb = Workbook()
    wb.define_name(
        "Factλ", "=LAMBDA(n, IF(n <= 1, 1, n * Factλ(n - 1)))"
    )
    wb.set_cell("A1", "=Factλ(10)")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 1) == 3628800.0


# -- spill lifecycle -------------------------------------------------------------


def test_spill_placement_and_member_values():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(3)")
    wb.recalculate()
    assert wb.spill_region("A1") == (3, 1)
    assert [wb.cell_value("Sheet1", r, 1) for r in (1, 2, 3)] == [1.0, 2.0, 3.0]


def test_spill_collision_and_unblock():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(3)")
    wb.set_cell("A3", 99.0)
    wb.recalculate()
    v = wb.cell_value("Sheet1", 1, 1)
    assert kind(v) == ErrorKind.SPILL
    assert "A3" in v.detail
    assert wb.spill_region("A1") is None
    wb.clear_cell("A3")
    wb.recalculate()
    assert wb.spill_region("A1") == (3, 1)
    assert wb.cell_value("Sheet1", 3, 1) == 3.0


def test_writing_into_live_region_blocks_anchor():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(3)")
    wb.recalculate()
    wb.set_cell("A2", 7.0)
    wb.recalculate()
    assert kind(wb.cell_value("Sheet1", 1, 1)) == ErrorKind.SPILL
    assert wb.cell_value("Sheet1", 2, 1) == 7.0


def test_one_by_one_spill_is_anchor_alone():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(1)")
    wb.recalculate()
    assert wb.spill_region("A1") == (1, 1)
    assert wb.evaluate_formula("=A1#").shape == (1, 1)


def test_anchor_read_gives_top_left():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(3, 1, 10)")
    wb.set_cell("C1", "=A1")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 3) == 10.0


def test_resize_vacates_stale_members():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(B1)")
    wb.set_cell("B1", 4.0)
    wb.set_cell("C1", "=SUM(A1:A10)")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 3) == 10.0
    wb.set_cell("B1", 2.0)
    wb.recalculate()
    assert wb.spill_region("A1") == (2, 1)
    assert wb.cell_value("Sheet1", 3, 1) is EMPTY
    assert wb.cell_value("Sheet1", 1, 3) == 3.0


def test_no_partial_spills_and_exclusive_membership():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(4)")
    wb.set_cell("B1", "=SEQUENCE(1, 3)")  # spills B1:D1
    wb.recalculate()
    # The two regions are disjoint and every member maps to exactly one anchor.
    assert wb.spill_region("A1") == (4, 1)
    assert wb.spill_region("B1") == (1, 3)
    members = list(wb._member_of.items())
    assert len(dict(members)) == len(members)
    # New content inside B1's region bounces B1 to #SPILL!; the new anchor
    # itself places cleanly. No cell ever belongs to two regions.
    wb.set_cell("C1", "=SEQUENCE(2)")
    wb.recalculate()
    assert kind(wb.cell_value("Sheet1", 1, 2)) == ErrorKind.SPILL
    assert wb.spill_region("B1") is None
    assert wb.spill_region("C1") == (2, 1)
    regions = [
        set(wb._region_cells(anchor, shape)) for anchor, shape in wb._regions.items()
    ]
    for i, a in enumerate(regions):
        for b in regions[i + 1:]:
            assert not (a & b)


def test_spill_beyond_grid_bounds():
    wb = Workbook()
    wb.set_cell("A1048575", "=SEQUENCE(3)")
    wb.recalculate()
    assert kind(wb.cell_value("Sheet1", 1048575, 1)) == ErrorKind.SPILL


def test_spill_dependent_sees_resize():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(3)")
    wb.set_cell("C1", "=SUM(A1#)")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 3) == 6.0
    wb.set_cell("A1", "=SEQUENCE(4)")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 3) == 10.0


# -- spill references -----------------------------------------------------------


def test_spill_ref_through_defined_name():
    wb = Workbook()
    wb.set_cell("F2", "=SEQUENCE(6, 2)")
    wb.define_name("return", "=F2")  # any identifier works as a name
    wb.recalculate()
    arr = wb.evaluate_formula("=return#")
    assert arr.shape == (6, 2)
    totals = wb.evaluate_formula("=BYROW(return#, LAMBDA(x, SUM(x)))")
    assert totals.shape == (6, 1)


def test_spill_ref_on_plain_scalar_is_ref_error():
    wb = Workbook()
    wb.set_cell("A1", 5.0)
    wb.recalculate()
    assert kind(wb.evaluate_formula("=A1#")) == ErrorKind.REF


def test_spill_ref_on_errored_anchor_is_ref_error():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(3)")
    wb.set_cell("A2", 1.0)
    wb.set_cell("B1", "=A1#")
    wb.recalculate()
    assert kind(wb.cell_value("Sheet1", 1, 1)) == ErrorKind.SPILL
    assert kind(wb.cell_value("Sheet1", 1, 2)) == ErrorKind.REF


def test_spill_ref_on_member_is_ref_error():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(3)")
    wb.recalculate()
    assert kind(wb.evaluate_formula("=A2#")) == ErrorKind.REF


# -- implicit intersection -------------------------------------------------------


def test_intersection_by_row():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(10)")
    wb.set_cell("B3", "=@$A$1:$A$10")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 3, 2) == 3.0


def test_intersection_outside_extent_is_value_error():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(10)")
    wb.set_cell("B12", "=@$A$1:$A$10")
    wb.recalculate()
    assert kind(wb.cell_value("Sheet1", 12, 2)) == ErrorKind.VALUE


def test_intersection_by_column_for_row_operand():
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(1, 5, 10)")
    wb.set_cell("C3", "=@$A$1:$E$1")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 3, 3) == 12.0


def test_intersection_single_cell_array():
    wb = Workbook()
    wb.set_cell("B2", "=@{5}")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 2, 2) == 5.0


def test_intersection_scalar_passthrough():
    wb = Workbook()
    wb.set_cell("A1", 9.0)
    wb.set_cell("B1", "=@A1")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 2) == 9.0


# -- defined names ----------------------------------------------------------------


def test_define_name_rejects_cell_shape():
    wb = Workbook()
    with pytest.raises(NameCollision):
        wb.define_name("A1", "=1")


def test_define_name_rejects_builtin_shadow():
    wb = Workbook()
    for bad in ("SUM", "sum", "LET", "lambda", "IF"):
        with pytest.raises(NameCollision):
            wb.define_name(bad, "=1")


def test_names_are_case_insensitive():
    wb = Workbook()
    wb.define_name("Addλ", "=LAMBDA(x, y, x+y)")
    assert wb.evaluate_formula("=ADDΛ(1, 2)") == 3.0


# -- workbook text format ----------------------------------------------------------


def test_workbook_format_roundtrip_semantics():
    text = """
# demo workbook
sheet Main
A1 := 5
A2 := =A1 * 2
B1 := hello world
B2 := TRUE
B3 := #N/A
B4 := 2013-10-01
name Addλ := =LAMBDA(x, y, x + y)
sheet Other
A1 := =Main!A2 + 1
"""
    wb = load_workbook_text(text)
    wb.recalculate()
    assert wb.cell_value("Main", 1, 1) == 5.0
    assert wb.cell_value("Main", 2, 1) == 10.0
    assert wb.cell_value("Main", 1, 2) == "hello world"
    assert wb.cell_value("Main", 2, 2) is True
    assert kind(wb.cell_value("Main", 3, 2)) == ErrorKind.NA
    serial = wb.cell_value("Main", 4, 2)
    assert isinstance(serial, DateSerial) and float(serial) == 41548.0
    assert wb.cell_value("Other", 1, 1) == 11.0


def test_workbook_format_error_carries_line():
    with pytest.raises(WorkbookFormatError) as err:
        load_workbook_text("A1 := =1 +\n", path="bad.wb")
    assert "bad.wb:1" in str(err.value)


def test_workbook_format_missing_assignment():
    with pytest.raises(WorkbookFormatError):
        load_workbook_text("A1 5\n")


def test_array_literal_content_is_formula():
    wb = load_workbook_text("A1 := {1,2;3,4}\n")
    wb.recalculate()
    assert wb.spill_region("A1") == (2, 2)


# -- cross-sheet isolation ----------------------------------------------------


def test_spill_regions_are_per_sheet():
    wb = Workbook()
    wb.set_cell("Data!A1", "=SEQUENCE(3)")
    wb.set_cell("Model!A2", 99.0)  # same rows, different sheet: no collision
    wb.recalculate()
    assert wb.spill_region("Data!A1") == (3, 1)
    assert wb.cell_value("Data", 2, 1) == 2.0
    assert wb.cell_value("Model", 2, 1) == 99.0


def test_cross_sheet_edit_propagates():
    wb = Workbook()
    wb.set_cell("Data!A1", 10.0)
    wb.set_cell("Model!B1", "=Data!A1 * 2")
    wb.recalculate()
    assert wb.cell_value("Model", 1, 2) == 20.0
    wb.set_cell("Data!A1", 7.0)
    wb.recalculate()
    assert wb.cell_value("Model", 1, 2) == 14.0


def test_sheet_names_case_insensitive_but_preserved():
    wb = Workbook()
    wb.set_cell("Data!A1", 1.0)
    wb.recalculate()
    assert wb.cell_value("DATA", 1, 1) == 1.0
    assert wb.sheet_names["data"] == "Data"


# -- spill interaction stress ---------------------------------------------------


def test_spill_depending_on_spill_resizes_through():
    wb = Workbook()
    wb.set_cell("D1", 3.0)
    wb.set_cell("A1", "=SEQUENCE(D1)")
    wb.set_cell("B1", "=A1# * 2")
    wb.set_cell("C1", "=SUM(B1#)")
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 3) == 12.0
    wb.set_cell("D1", 5.0)
    wb.recalculate()
    assert wb.spill_region("A1") == (5, 1)
    assert wb.spill_region("B1") == (5, 1)
    assert wb.cell_value("Sheet1", 1, 3) == 30.0


def test_overlapping_anchors_resolve_deterministically():
    # A2 holds content, so A1's three-row spill is blocked; A2's own spill
    # lands in the (empty) rows beneath it. Same outcome from any edit order.
    for order in (("A1", "A2"), ("A2", "A1")):
        wb = Workbook()
        for addr in order:
            wb.set_cell(addr, "=SEQUENCE(3)")
        wb.recalculate()
        v = wb.cell_value("Sheet1", 1, 1)
        assert isinstance(v, ErrorValue) and v.kind == ErrorKind.SPILL
        assert wb.spill_region("A2") == (3, 1)
        assert wb.cell_value("Sheet1", 4, 1) == 3.0


def test_spill_feeding_itself():
    # Never places: the size input reads the (empty) would-be member, so the
    # formula settles at SEQUENCE(0) -> #VALUE! without a region.
    wb = Workbook()
    wb.set_cell("A1", "=SEQUENCE(A2)")
    wb.recalculate()
    assert kind(wb.cell_value("Sheet1", 1, 1)) == ErrorKind.VALUE
    assert wb.spill_region("A1") is None
    # Places, then covers its own input: circular, and stays circular.
    wb2 = Workbook()
    wb2.set_cell("A1", "=SEQUENCE(2 + 0 * A2)")
    report = wb2.recalculate()
    assert kind(wb2.cell_value("Sheet1", 1, 1)) == ErrorKind.CIRCULAR
    assert report.passes < 10
    wb2.set_cell("A1", "=SEQUENCE(2)")
    wb2.recalculate()
    assert wb2.spill_region("A1") == (2, 1)


def test_array_valued_name_spills_from_cell():
    wb = Workbook()
    wb.define_name("seq", "=SEQUENCE(3)")
    wb.set_cell("A1", "=seq")
    wb.recalculate()
    assert wb.spill_region("A1") == (3, 1)
    assert wb.cell_value("Sheet1", 3, 1) == 3.0


def test_set_cell_accepts_parsed_expr():
    from gridlambda import parse_formula

    wb = Workbook()
    wb.set_cell("A1", parse_formula("=6 * 7"))
    wb.recalculate()
    assert wb.cell_value("Sheet1", 1, 1) == 42.0
