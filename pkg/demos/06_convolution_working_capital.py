"""Convolution two ways (reverse-diagonal sums vs FFT) and the working-capital
block that consumes it through a worksheet lambda.

Run:  python demos/06_convolution_working_capital.py
"""

import numpy as np

from gridlambda import load_workbook, render_cell
from gridlambda.numerics import convolve_direct, convolve_fft

timing = [0.0, 0.60, 0.25, 0.15]
amounts = [612296.0] * 3 + [363879.0] * 3 + [272909.0] * 3 + [545818.0] * 3

print("-- a cash-receipt profile convolved with monthly billings")
direct = convolve_direct(timing, amounts)
fast = convolve_fft(timing, amounts)
print("   direct (reverse-diagonal sums), months 4..8:",
      [round(v) for v in direct[3:8]])
print("   via radix-2 FFT, same months:              ",
      [round(v) for v in fast[3:8]])
print(f"   max relative gap between the two routes: "
      f"{np.max(np.abs(fast - direct)) / np.max(np.abs(direct)):.2e}")

print()
print("-- the same convolution drives a working-capital corkscrew in formulas")
wb = load_workbook("corpus/modeloff-working-capital/model.wb")
wb.recalculate()
block = [float(v) for v in wb.evaluate_formula("=A1#").column()]
n = len(block) // 4
labels = ("opening", "amounts", "cashChange", "closing")
for i, label in enumerate(labels):
    row = block[i * n:(i + 1) * n]
    print(f"   {label:>10}:", [round(v) for v in row[:6]], "...")
closing = block[3 * n:]
opening = block[:n]
print("   opening[k+1] == closing[k]:",
      all(abs(opening[k + 1] - closing[k]) < 1e-6 for k in range(n - 1)))

print()
print("-- and the monthly timing block that frames the model")
tb = load_workbook("corpus/modeloff-timing/model.wb")
tb.recalculate()
timing_block = tb.evaluate_formula("=A1#")
for label, row in zip(("counter", "start", "end", "year", "quarter"), timing_block.rows):
    print(f"   {label:>8}:", "  ".join(render_cell(v) for v in row[:6]), "...")
