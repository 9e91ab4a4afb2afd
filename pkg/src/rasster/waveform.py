"""Carrier-frequency plans for stepped-frequency pulse trains.

Three plan families are supported:

* ``LINEAR``: classic SFW, pulse ``n`` uses carrier ``n``.
* ``RANDOM_FULL``: RSF, a random permutation of every carrier followed by
  uniform extra draws when there are more pulses than carriers.
* ``SPARSE_RANDOM``: RaSSteR, a random thinned selection restricted to a
  set of allowed subbands (e.g. avoiding an interfering band).

Carrier indices run over ``0 .. M-1``. Every plan carries a total burst
power ``P_t`` that is split evenly over its pulses, so plans with fewer
pulses put more energy into each one.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidGridError, InvalidPlanError, UndefinedMetricError

__all__ = [
    "CarrierGrid",
    "SubbandSet",
    "PlanKind",
    "FrequencyPlan",
    "reference_grid",
    "make_linear_plan",
    "make_random_full_plan",
    "make_partial_random_plan",
    "make_sparse_random_plan",
    "subbands_from_lists",
    "effective_bandwidth",
    "effective_step",
    "interference_pulse_set",
    "plan_to_json",
    "plan_from_json",
    "write_plan_csv",
]


@dataclass(frozen=True)
class CarrierGrid:
    """Available carriers ``f_c + i * delta_f`` for ``i = 0 .. M-1``.

    ``T`` is the pulse repetition interval and ``T_p`` the pulse width
    (both in seconds).
    """

    f_c: float
    delta_f: float
    M: int
    T: float
    T_p: float

    def __post_init__(self):
        if not self.f_c > 0:
            raise InvalidGridError(f"f_c must be positive, got {self.f_c}")
        if not self.delta_f > 0:
            raise InvalidGridError(f"delta_f must be positive, got {self.delta_f}")
        if int(self.M) != self.M or self.M < 2:
            raise InvalidGridError(f"M must be an integer >= 2, got {self.M}")
        if not (0 < self.T_p <= self.T):
            raise InvalidGridError(f"need 0 < T_p <= T, got T_p={self.T_p}, T={self.T}")
        # unambiguous HRRP: delta_f <= 1/T_p, with round-off slack for equality
        if self.delta_f * self.T_p > 1.0 + 1e-12:
            raise InvalidGridError(
                f"delta_f={self.delta_f} exceeds 1/T_p={1.0 / self.T_p}; "
                "range profile would be ambiguous"
            )
        object.__setattr__(self, "M", int(self.M))

    @property
    def bandwidth(self) -> float:
        return (self.M - 1) * self.delta_f

    def frequency(self, d):
        return self.f_c + np.asarray(d) * self.delta_f


def reference_grid(M: int = 60) -> CarrierGrid:
    """UHF grid used throughout the experiments: 690 MHz base, 2.5 MHz step,
    62.5 us PRI and 0.4 us pulses."""
    return CarrierGrid(f_c=690e6, delta_f=2.5e6, M=M, T=62.5e-6, T_p=0.4e-6)


@dataclass(frozen=True)
class SubbandSet:
    """Disjoint, sorted, inclusive integer ranges of allowed carrier indices."""

    intervals: tuple[tuple[int, int], ...]
    M: int

    def __post_init__(self):
        ivs = tuple((int(lo), int(hi)) for lo, hi in self.intervals)
        prev_hi = -1
        for lo, hi in ivs:
            if lo > hi:
                raise InvalidPlanError(f"empty subband [{lo}, {hi}]")
            if lo < 0 or hi > self.M - 1:
                raise InvalidPlanError(f"subband [{lo}, {hi}] outside [0, {self.M - 1}]")
            if lo <= prev_hi:
                raise InvalidPlanError("subbands must be sorted and disjoint")
            prev_hi = hi
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def full(cls, M: int) -> SubbandSet:
        return cls(((0, M - 1),), M)

    @classmethod
    def excluding(cls, M: int, M1: int, M2: int) -> SubbandSet:
        """All carriers except the hostile band ``[M1, M2]``."""
        if not 0 <= M1 <= M2 <= M - 1:
            raise InvalidPlanError(f"need 0 <= M1 <= M2 <= M-1, got M1={M1}, M2={M2}")
        ivs = []
        if M1 > 0:
            ivs.append((0, M1 - 1))
        if M2 < M - 1:
            ivs.append((M2 + 1, M - 1))
        return cls(tuple(ivs), M)

    @property
    def cardinality(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.intervals)

    @property
    def lowest(self) -> int:
        return self.intervals[0][0]

    @property
    def highest(self) -> int:
        return self.intervals[-1][1]

    def indices(self) -> np.ndarray:
        if not self.intervals:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([np.arange(lo, hi + 1) for lo, hi in self.intervals])

    def contains(self, d) -> np.ndarray:
        d = np.asarray(d)
        out = np.zeros(d.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (d >= lo) & (d <= hi)
        return out

    def adjacent_pairs(self) -> np.ndarray:
        """Lower members ``i`` of every allowed pair ``(i, i+1)``."""
        return np.concatenate(
            [np.arange(lo, hi) for lo, hi in self.intervals] or [np.zeros(0, dtype=np.int64)]
        )

    def to_list(self) -> list[list[int]]:
        return [[lo, hi] for lo, hi in self.intervals]


class PlanKind(str, enum.Enum):
    LINEAR = "linear"
    RANDOM_FULL = "random_full"
    SPARSE_RANDOM = "sparse_random"


@dataclass(frozen=True, eq=False)
class FrequencyPlan:
    """Per-pulse carrier indices ``d`` plus the power split over the burst."""

    kind: PlanKind
    d: np.ndarray
    grid: CarrierGrid
    subbands: SubbandSet
    P_t: float = 1.0
    reuse: bool = False
    seed: int | None = None
    pulse_energy: float = field(init=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=np.int64).reshape(-1)
        d.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "kind", PlanKind(self.kind))
        if d.size == 0:
            raise InvalidPlanError("a plan needs at least one pulse")
        if not self.P_t > 0:
            raise InvalidPlanError(f"P_t must be positive, got {self.P_t}")
        if not np.all(self.subbands.contains(d)):
            bad = d[~self.subbands.contains(d)]
            raise InvalidPlanError(f"carrier indices {bad.tolist()} outside the allowed subbands")
        if self.kind is PlanKind.LINEAR and not np.array_equal(d, np.arange(d.size)):
            raise InvalidPlanError("a linear plan must use d_n = n")
        if self.kind is PlanKind.SPARSE_RANDOM and not self.reuse:
            if np.unique(d).size != d.size:
                raise InvalidPlanError("repeated carriers in a plan built without reuse")
        object.__setattr__(self, "pulse_energy", self.P_t / d.size)

    @property
    def N(self) -> int:
        return int(self.d.size)

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.pulse_energy)

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequency(self.d)

    @property
    def burst_energy(self) -> float:
        return math.fsum([self.amplitude**2] * self.N)

    def to_record(self) -> dict:
        g = self.grid
        return {
            "kind": self.kind.value,
            "f_c": g.f_c,
            "delta_f": g.delta_f,
            "M": g.M,
            "N": self.N,
            "T": g.T,
            "T_p": g.T_p,
            "P_t": self.P_t,
            "reuse": self.reuse,
            "subbands": self.subbands.to_list(),
            "seed": self.seed,
            "d": self.d.tolist(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> FrequencyPlan:
        grid = CarrierGrid(rec["f_c"], rec["delta_f"], rec["M"], rec["T"], rec["T_p"])
        subbands = SubbandSet(tuple(tuple(iv) for iv in rec["subbands"]), grid.M)
        plan = cls(
            kind=PlanKind(rec["kind"]),
            d=np.asarray(rec["d"], dtype=np.int64),
            grid=grid,
            subbands=subbands,
            P_t=rec["P_t"],
            reuse=rec.get("reuse", False),
            seed=rec.get("seed"),
        )
        if "N" in rec and rec["N"] != plan.N:
            raise InvalidPlanError(f"record says N={rec['N']} but d has {plan.N} entries")
        return plan


def _rng(seed):
    return np.random.default_rng(seed)


def _seed_value(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


def make_linear_plan(grid: CarrierGrid, N: int, P_t: float = 1.0) -> FrequencyPlan:
    if N > grid.M:
        raise InvalidPlanError(f"linear plan needs N <= M, got N={N}, M={grid.M}")
    if N < 1:
        raise InvalidPlanError("N must be positive")
    return FrequencyPlan(PlanKind.LINEAR, np.arange(N), grid, SubbandSet.full(grid.M), P_t)


def make_random_full_plan(grid: CarrierGrid, N: int, P_t: float = 1.0, seed=None) -> FrequencyPlan:
    """Every carrier once in random order, then ``N - M`` uniform extra draws."""
    M = grid.M
    if N < M:
        raise InvalidPlanError(f"random full-band plan needs N >= M, got N={N}, M={M}")
    rng = _rng(seed)
    d = np.concatenate([rng.permutation(M), rng.integers(0, M, size=N - M)])
    return FrequencyPlan(
        PlanKind.RANDOM_FULL, d, grid, SubbandSet.full(M), P_t, reuse=N > M, seed=_seed_value(seed)
    )


def make_partial_random_plan(grid: CarrierGrid, N: int, P_t: float = 1.0, seed=None) -> FrequencyPlan:
    """RSF variant for ``N < M``: ``N`` distinct carriers drawn uniformly from
    the full band, in random order. For ``N >= M`` this is the full plan."""
    if N >= grid.M:
        return make_random_full_plan(grid, N, P_t, seed)
    rng = _rng(seed)
    d = rng.permutation(grid.M)[:N]
    return FrequencyPlan(
        PlanKind.RANDOM_FULL, d, grid, SubbandSet.full(grid.M), P_t, seed=_seed_value(seed)
    )


def make_sparse_random_plan(
    grid: CarrierGrid,
    subbands: SubbandSet,
    N: int,
    P_t: float = 1.0,
    reuse: bool = False,
    seed=None,
) -> FrequencyPlan:
    """Thinned random plan over ``subbands``.

    The selection always contains the lowest and highest allowed carriers
    (widest effective bandwidth) and, room permitting, one adjacent pair
    picked uniformly among the allowed adjacencies (finest effective step).
    The rest is drawn uniformly from the allowed set, with replacement iff
    ``reuse``. The final pulse order is a uniform random shuffle.
    """
    card = subbands.cardinality
    if card == 0:
        raise InvalidPlanError("no allowed carriers")
    if N < 1:
        raise InvalidPlanError("N must be positive")
    if not reuse and N > card:
        raise InvalidPlanError(f"N={N} exceeds the {card} allowed carriers and reuse is off")
    rng = _rng(seed)
    allowed = subbands.indices()

    chosen = [subbands.lowest]
    if subbands.highest != subbands.lowest:
        chosen.append(subbands.highest)
    chosen = chosen[:N]

    pairs = subbands.adjacent_pairs()
    budget = N - len(chosen)
    if budget > 0 and pairs.size:
        taken = set(chosen)
        cost = np.array([(i not in taken) + (i + 1 not in taken) for i in pairs])
        fits = pairs[cost <= budget]
        if fits.size:
            i = int(rng.choice(fits))
            chosen += [j for j in (i, i + 1) if j not in taken]

    rest = N - len(chosen)
    if reuse:
        extra = rng.choice(allowed, size=rest, replace=True)
    else:
        pool = np.setdiff1d(allowed, chosen)
        extra = rng.choice(pool, size=rest, replace=False)
    d = rng.permutation(np.concatenate([np.asarray(chosen, dtype=np.int64), extra]))
    return FrequencyPlan(
        PlanKind.SPARSE_RANDOM, d, grid, subbands, P_t, reuse=reuse, seed=_seed_value(seed)
    )


def _distinct_frequencies(plan: FrequencyPlan) -> np.ndarray:
    used = np.unique(plan.d)
    if used.size < 2:
        raise UndefinedMetricError("need at least two distinct carriers")
    return used


def effective_bandwidth(plan: FrequencyPlan) -> float:
    """Widest spacing between any two used carriers, in Hz."""
    used = _distinct_frequencies(plan)
    return float(used[-1] - used[0]) * plan.grid.delta_f


def effective_step(plan: FrequencyPlan) -> float:
    """Narrowest spacing between two distinct used carriers, in Hz."""
    used = _distinct_frequencies(plan)
    return float(np.diff(used).min()) * plan.grid.delta_f


def interference_pulse_set(plan: FrequencyPlan, M1: int, M2: int) -> np.ndarray:
    """Indices of pulses whose carrier falls inside ``[M1, M2]``."""
    if not 0 <= M1 <= M2 <= plan.grid.M - 1:
        raise InvalidPlanError(f"need 0 <= M1 <= M2 <= M-1, got M1={M1}, M2={M2}")
    return np.flatnonzero((plan.d >= M1) & (plan.d <= M2))


def plan_to_json(plan: FrequencyPlan, **kwargs) -> str:
    return json.dumps(plan.to_record(), **kwargs)


def plan_from_json(text: str) -> FrequencyPlan:
    return FrequencyPlan.from_record(json.loads(text))


def write_plan_csv(plan: FrequencyPlan, fh=None) -> str | None:
    """Write ``n, d, frequency_hz`` rows. Returns the text if ``fh`` is None."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "d", "frequency_hz"])
    for n, (d, f) in enumerate(zip(plan.d.tolist(), plan.frequencies.tolist())):
        w.writerow([n, d, repr(float(f))])
    return buf.getvalue() if fh is None else None


def subbands_from_lists(intervals: Iterable[Sequence[int]], M: int) -> SubbandSet:
    return SubbandSet(tuple((int(a), int(b)) for a, b in intervals), M)
