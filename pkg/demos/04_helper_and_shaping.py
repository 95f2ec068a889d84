"""Lambda helper functions (SCAN, BYROW, BYCOL, REDUCE) and array shaping.

Reproduces the corkscrew cash balance, the investment-portfolio totals, and
the quarterly-seasonality pipeline end to end.

Run:  python demos/04_helper_and_shaping.py
"""

from gridlambda import Workbook, render_cell

wb = Workbook()
wb.define_name("Addλ", "=LAMBDA(x, y, x + y)")
wb.define_name("Sumλ", "=LAMBDA(x, SUM(x))")

print("-- corkscrew: a running balance without any circular references")
wb.define_name("Revenue", "=105000 * 1.05 ^ SEQUENCE(1, 6, 0)")
wb.define_name("COGS", "{135000,125000,115000,105000,95000,85000}")
balance = wb.evaluate_formula("=SCAN(0, Revenue - COGS, Addλ)")
print("   cash balance:", [round(v) for v in balance.column()])

print()
print("-- portfolio: row totals with BYROW, per-investment totals with BYCOL")
wb.define_name("principal", "{10000, 12000}")
wb.define_name("escalation", "{5%, 4%}")
wb.define_name("value", "=principal * (1 + escalation) ^ SEQUENCE(7, , 0)")
yearly = wb.evaluate_formula("=BYROW(DROP(value, -1) * escalation, Sumλ)")
by_investment = wb.evaluate_formula("=BYCOL(DROP(value, -1) * escalation, Sumλ)")
grand = wb.evaluate_formula("=SUM(BYROW(DROP(value, -1) * escalation, Sumλ))")
print("   yearly returns:   ", [round(v) for v in yearly.column()])
print("   per investment:   ", [round(v) for v in by_investment.column()])
print("   grand total:      ", round(grand))

print()
print("-- presentation block assembled with VSTACK and blank spacer rows")
block = wb.evaluate_formula(
    "=LET(escalatedValue, DROP(value, -1) * escalation,"
    " investmentTotal, BYCOL(escalatedValue, Sumλ),"
    ' blankRow, {"", ""},'
    " VSTACK(blankRow, escalatedValue, blankRow, investmentTotal))"
)
for row in block.rows:
    print("   ", "\t".join(f"{render_cell(v):>10}" for v in row))

print()
print("-- seasonality: drop the label, wrap by year, share-of-total by quarter")
season = wb.evaluate_formula(
    '=LET(sales, {"Qtr", 10, 20, 30, 40, 20, 40, 60, 80},'
    " salesArray, WRAPROWS(DROP(sales, , 1), 4),"
    " BYCOL(salesArray / SUM(salesArray), Sumλ))"
)
print("   quarter weights:", [round(v, 3) for v in season.column()])

print()
print("-- REDUCE with an array accumulator: fold rows into a growing table")
table = wb.evaluate_formula(
    "=REDUCE({1, 1}, SEQUENCE(4), LAMBDA(acc, k,"
    " VSTACK(acc, TAKE(acc, -1) * HSTACK(k, 2))))"
)
for row in table.rows:
    print("   ", [round(v) for v in row])
