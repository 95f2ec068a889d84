"""Dynamic arrays: spill regions, blockers, dependency-driven recalculation.

Run:  python demos/03_spill_and_recalc.py
"""

from gridlambda import Workbook, render_cell


def show(wb, rows=5, cols=4):
    letters = "ABCD"
    for r in range(1, rows + 1):
        cells = [render_cell(wb.cell_value("Sheet1", r, c + 1)) or "." for c in range(cols)]
        print("   ", "\t".join(f"{v:>8}" for v in cells))
    print()


wb = Workbook()

print("-- one formula, many cells: the result spills into empty neighbours")
wb.set_cell("A1", "=SEQUENCE(4)")
wb.set_cell("B1", "=A1# * 10")
wb.recalculate()
show(wb)

print("-- content in the way blocks the whole spill (never a partial one)")
wb.set_cell("A3", 99)
wb.recalculate()
v = wb.cell_value("Sheet1", 1, 1)
print("    A1 is now:", render_cell(v), "-", v.detail)
show(wb)

print("-- removing the blocker lets the region re-spill on the next recalc")
wb.clear_cell("A3")
wb.recalculate()
show(wb)

print("-- '@' reduces a range to the caller's own row (implicit intersection)")
wb.set_cell("C2", "=@$A$1:$A$4")
wb.set_cell("C9", "=@$A$1:$A$4")
wb.recalculate()
print("    C2 (row 2):", render_cell(wb.cell_value("Sheet1", 2, 3)))
print("    C9 (row 9, no intersection):", render_cell(wb.cell_value("Sheet1", 9, 3)))

print()
print("-- circular references collapse to #CIRC! instead of looping")
wb.set_cell("D1", "=D2")
wb.set_cell("D2", "=D1")
wb.recalculate()
print("    D1:", render_cell(wb.cell_value("Sheet1", 1, 4)))
