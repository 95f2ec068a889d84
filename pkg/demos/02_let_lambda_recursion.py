"""LET variables, first-class lambdas, and recursion with a depth limit.

Run:  python demos/02_let_lambda_recursion.py
"""

from gridlambda import TraceSink, Workbook, render_cell

lines = []
wb = Workbook(trace=TraceSink(writer=lines.append))

print("-- LET binds evaluate-once variables; defined names re-evaluate per use")
wb.define_name("pricey", "=SUM(SEQUENCE(1000))")
print("LET result:", wb.evaluate_formula("=LET(x, pricey, x + x + x)"))
print("name result:", wb.evaluate_formula("=pricey + pricey + pricey"))
for line in lines:
    print("  trace:", line)
print("  (the binding fired once; the bare name fired once per reference)")

print()
print("-- a lambda is a value: define once, pass around, call anywhere")
wb.define_name(
    "ExponentialGrowthλ",
    "=LAMBDA(initial, rate, nPeriods,"
    " LET(periods, SEQUENCE(1 + nPeriods, , 0), initial * (1 + rate) ^ periods))",
)
growth = wb.evaluate_formula("=ExponentialGrowthλ(10000, 5%, 12)")
print("growth of 10000 at 5% for 12 periods:")
print("  first:", render_cell(growth.at(0, 0)), " last:", round(growth.at(12, 0), 2))

print()
print("-- recursion: a variable-rate balance that stacks as the calls unwind")
wb.define_name(
    "Growthλ",
    "=LAMBDA(opening, vRate, p, LET(rate, INDEX(vRate, p), closing, opening * (1 + rate), closing))",
)
wb.define_name(
    "Recurλ",
    "=LAMBDA(opening, vRate, [p], LET("
    "np, COUNT(vRate), pp, IF(ISOMITTED(p), 1, p), "
    "closing, Growthλ(opening, vRate, pp), "
    "balance, IF(pp < np, Recurλ(closing, vRate, pp + 1), closing), "
    "VSTACK(opening, balance)))",
)
out = wb.evaluate_formula("=Recurλ(1000, {5%;4%;3%})")
print("Recurλ(1000, {5%;4%;3%}) ->", [round(v, 2) for v in out.column()])

print()
print("-- the recursion depth limit turns runaway recursion into #NUM!")
shallow = Workbook(depth_limit=8)
shallow.define_name("Loopλ", "=LAMBDA(n, IF(n <= 0, 0, Loopλ(n - 1)))")
print("depth 5 with limit 8:   ", render_cell(shallow.evaluate_formula("=Loopλ(5)")))
print("depth 500 with limit 8: ", render_cell(shallow.evaluate_formula("=Loopλ(500)")))
