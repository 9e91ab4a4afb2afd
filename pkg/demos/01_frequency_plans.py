"""
Frequency plans
===============

Carrier orderings for one burst, from the linear staircase to a thinned
random selection that skips a jammed band.
"""

import numpy as np

from rasster.waveform import (
    SubbandSet,
    effective_bandwidth,
    effective_step,
    make_linear_plan,
    make_random_full_plan,
    make_sparse_random_plan,
    reference_grid,
)

grid = reference_grid(M=32)
print(f"carriers {grid.f_c / 1e6:.1f} .. {grid.frequency(grid.M - 1) / 1e6:.1f} MHz, step {grid.delta_f / 1e6} MHz")

# Carriers 14..24 are occupied by an interferer.
allowed = SubbandSet.excluding(grid.M, 14, 24)
print("allowed subbands:", allowed.to_list(), "->", allowed.cardinality, "carriers")

sfw = make_linear_plan(grid, 32)
rsf = make_random_full_plan(grid, 32, seed=1)
ras = make_sparse_random_plan(grid, allowed, 16, seed=1)


def staircase(plan, width=32):
    # one text row per pulse, '#' marks the carrier used
    for n, d in enumerate(plan.d[:12]):
        row = ["." if not allowed.contains(i) else " " for i in range(width)]
        row[d] = "#"
        print(f"  {n:2d} |{''.join(row)}|")
    if plan.N > 12:
        print("     ...")


for name, plan in [("linear", sfw), ("random full", rsf), ("thinned random", ras)]:
    print(f"\n{name}: N={plan.N}, B_eff={effective_bandwidth(plan) / 1e6:.1f} MHz, "
          f"step_eff={effective_step(plan) / 1e6:.1f} MHz, pulse energy={plan.pulse_energy:.4f}")
    staircase(plan)

# The thinned plan still spans the full band (both end carriers are in)
# and keeps one adjacent pair, so resolution and ambiguity are unchanged.
# With the same burst power spread over half the pulses, each pulse
# carries twice the energy.
print("\nper-pulse energy gain over the linear plan:", ras.pulse_energy / sfw.pulse_energy)

# Pulses hitting the jammed band
for name, plan in [("linear", sfw), ("random full", rsf), ("thinned random", ras)]:
    hit = np.flatnonzero((plan.d >= 14) & (plan.d <= 24))
    print(f"{name:15s} pulses in the jammed band: {hit.size}")
