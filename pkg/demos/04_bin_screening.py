"""
Screening coarse bins before recovery
=====================================

Only bins whose matched-filter statistic clears a chi-square threshold are
handed to the sparse solver. The threshold comes from a target false alarm
probability.
"""

import math

import numpy as np

from rasster.forward import build_dictionary, inject_noise, synthesize_echoes
from rasster.recovery import bin_statistic, glrt_threshold, screen_bins
from rasster.scene import Target
from rasster.waveform import SubbandSet, make_sparse_random_plan, reference_grid

for p_fa in (1e-1, 1e-2, 1e-3, 1e-6):
    print(f"P_fa={p_fa:g}: gamma={glrt_threshold(p_fa, 0.0, 1):.3f}  (-2 ln P_fa = {-2 * math.log(p_fa):.3f})")

N = 512
plan = make_sparse_random_plan(reference_grid(32), SubbandSet.full(32), N, reuse=True, seed=1)
A = build_dictionary(plan, 1, 1)
gamma = glrt_threshold(1e-3, 0.0, 1)

rng = np.random.default_rng(0)
y_loud, s2 = inject_noise(synthesize_echoes([Target(0, 0, 1.0)], plan, 1, 1), -10.0, rng)
bins = [math.sqrt(s2 / 2) * (rng.standard_normal(N) + 1j * rng.standard_normal(N)) for _ in range(5)]
bins[2] = y_loud
stats = [bin_statistic(A, y, s2) for y in bins]
print("\nbin statistics:", np.round(stats, 2))
print("bins passed to recovery:", screen_bins(stats, gamma).tolist())
