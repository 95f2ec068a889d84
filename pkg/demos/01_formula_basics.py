"""Formula basics: parsing, canonical printing, evaluation, broadcasting.

Run:  python demos/01_formula_basics.py
"""

from gridlambda import Workbook, parse_formula, print_expr, render_cell
from gridlambda.values import Array

wb = Workbook()

print("-- scalars and operators")
for src in ["=1 + 2 * 3", "=2^3^2", "=-2^2", "=5%", '="gross" & " margin"', '="ABC" = "abc"']:
    print(f"{src:24} -> {render_cell(wb.evaluate_formula(src))}")

print()
print("-- arrays broadcast elementwise; mismatches fill with #N/A")
for src in ["={1;2} + {10;20}", "=MOD({1;2;3;4;5;6;7;8;9;10}, 3)", "={1;2;3} * {1,10}"]:
    out = wb.evaluate_formula(src)
    rows = out.rows if isinstance(out, Array) else ((out,),)
    print(src)
    for row in rows:
        print("   ", "\t".join(render_cell(v) for v in row))

print()
print("-- errors are ordinary values and flow through arithmetic")
print("=1/0        ->", render_cell(wb.evaluate_formula("=1/0")))
print("={1;#REF!}*2 ->", [render_cell(v) for v in wb.evaluate_formula("={1;#REF!} * 2").column()])

print()
print("-- the printer emits a canonical form that reparses identically")
ast = parse_formula('=LET(x,C5:C15=C3,y,FILTER(D5:D15,x),IF(y<>"",y,"-"))')
text = print_expr(ast)
print(text)
print("round-trips:", parse_formula(text) == ast)
