"""Empirical checks of the dictionary's recovery guarantees and the hit-rate
metric used in the experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import UndefinedMetricError
from .forward import DictionaryMatrix, dictionary_from_offsets, range_factor, doppler_factor
from .waveform import CarrierGrid, SubbandSet, make_sparse_random_plan

__all__ = [
    "CoherenceReport",
    "mutual_coherence",
    "mutual_coherence_pairwise",
    "coherence_bounds",
    "coherence_report",
    "continuous_offsets",
    "min_singular_values",
    "SparkReport",
    "spark_certify",
    "TailCheck",
    "coherence_tail_bound",
    "coherence_tail_check",
    "hit_rate",
]


@dataclass
class CoherenceReport:
    mu: float
    argmax_pair: tuple[int, int]
    bound_K_coherence: int | None = None
    bound_K_density: int | None = None
    delta: float | None = None


def _difference_map(d, N: int, P: int, Q: int) -> np.ndarray:
    """``|1/N sum_n exp(j2pi(p d_n/P + q n/Q))|`` for p in 0..P-1, q in 0..Q-1.

    Any two columns differ by such a (p, q) up to conjugation, because the
    Doppler phase is periodic in q and |f(-p,-q)| = |f(p,q)|.
    """
    Rc = range_factor(d, P).conj()
    Dc = doppler_factor(N, Q).conj()
    return np.abs(Rc.T @ Dc) / N


def mutual_coherence(A) -> CoherenceReport:
    """Largest normalized inner product between two distinct columns.

    For a :class:`DictionaryMatrix` this uses the P x Q difference map; a
    plain array falls back to the full Gram matrix.
    """
    if not isinstance(A, DictionaryMatrix):
        return mutual_coherence_pairwise(A)
    if A.P * A.Q == 1:
        raise UndefinedMetricError("coherence needs at least two columns")
    F = _difference_map(A.d, A.N, A.P, A.Q)
    F[0, 0] = -1.0
    p, q = np.unravel_index(int(np.argmax(F)), F.shape)
    return CoherenceReport(float(min(F[p, q], 1.0)), (0, int(p * A.Q + q)))


def mutual_coherence_pairwise(A) -> CoherenceReport:
    A = np.asarray(A)
    if A.shape[1] < 2:
        raise UndefinedMetricError("coherence needs at least two columns")
    norms = np.linalg.norm(A, axis=0)
    G = np.abs(A.conj().T @ A) / np.outer(norms, norms)
    np.fill_diagonal(G, -1.0)
    u, v = np.unravel_index(int(np.argmax(G)), G.shape)
    return CoherenceReport(float(min(G[u, v], 1.0)), (int(min(u, v)), int(max(u, v))))


def coherence_bounds(N: int, P: int, Q: int, delta: float, card_I: int) -> tuple[int, int]:
    """Largest target counts allowed by the two coherence conditions:
    concentration ``K <= sqrt(N / (2 (log 2(P-1)(Q-1) - log delta))) / 2 + 1/2``
    and carrier density ``K <= pi |I| / 2 + 1/2``."""
    if N < 1 or P < 2 or Q < 2:
        raise ValueError("need N >= 1 and P, Q >= 2")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if card_I < 1:
        raise ValueError("card_I must be >= 1")
    denom = 2 * (math.log(2 * (P - 1) * (Q - 1)) - math.log(delta))
    k1 = 0.5 * math.sqrt(N / denom) + 0.5
    k2 = math.pi * card_I / 2 + 0.5
    return int(math.floor(k1)), int(math.floor(k2))


def coherence_report(A: DictionaryMatrix, delta: float, card_I: int) -> CoherenceReport:
    rep = mutual_coherence(A)
    rep.bound_K_coherence, rep.bound_K_density = coherence_bounds(A.N, A.P, A.Q, delta, card_I)
    rep.delta = delta
    return rep


def continuous_offsets(rng, N: int, subbands: SubbandSet | None = None, span: float = 1.0) -> np.ndarray:
    """I.i.d. real carrier offsets, uniform over the subbands (each integer
    index owning the cell ``[i, i+1)``) or over ``[0, span)``."""
    if subbands is None:
        return rng.uniform(0.0, span, size=N)
    lo = np.array([a for a, _ in subbands.intervals], dtype=float)
    width = np.array([b - a + 1 for a, b in subbands.intervals], dtype=float)
    k = rng.choice(lo.size, size=N, p=width / width.sum())
    return lo[k] + rng.uniform(0.0, 1.0, size=N) * width[k]


def min_singular_values(A, subsets: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    batch = np.moveaxis(A[:, subsets], 0, 1)
    return np.linalg.svd(batch, compute_uv=False)[:, -1]


@dataclass
class SparkReport:
    N: int
    P: int
    Q: int
    trials: int
    subsets_per_trial: int
    exhaustive: bool
    failures: int
    min_sigma: float
    tolerance: float


def spark_certify(
    N: int,
    P: int,
    Q: int,
    trials: int = 100,
    seed=None,
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None,
    max_subsets: int = 10_000,
) -> SparkReport:
    """Check that every N x N column submatrix is invertible.

    Each trial draws fresh carrier offsets (continuous uniform over
    ``[0, P)`` by default; pass ``sampler`` to override), builds the
    dictionary and tests all ``C(PQ, N)`` submatrices when there are at
    most ``max_subsets`` of them, otherwise ``max_subsets`` random ones.
    A trial fails when any tested submatrix has smallest singular value
    at or below ``1e-8 * sqrt(N)``.
    """
    rng = np.random.default_rng(seed)
    if sampler is None:
        sampler = lambda g, n: continuous_offsets(g, n, span=P)  # noqa: E731
    n_atoms = P * Q
    if N > n_atoms:
        raise ValueError("N exceeds the number of columns")
    total = math.comb(n_atoms, N)
    exhaustive = total <= max_subsets
    if exhaustive:
        all_subsets = np.array(list(combinations(range(n_atoms), N)), dtype=np.int64)
    tol = 1e-8 * math.sqrt(N)
    failures = 0
    worst = np.inf
    for _ in range(trials):
        A = dictionary_from_offsets(sampler(rng, N), P, Q).A
        if exhaustive:
            subsets = all_subsets
        else:
            subsets = np.argsort(rng.random((max_subsets, n_atoms)), axis=1)[:, :N]
        s = min_singular_values(A, subsets)
        smin = float(s.min())
        worst = min(worst, smin)
        failures += smin <= tol
    return SparkReport(N, P, Q, trials, len(subsets) if trials else 0, exhaustive,
                       int(failures), float(worst), tol)


def coherence_tail_bound(N: int, P: int, Q: int, epsilon: float) -> float:
    return 2 * (P - 1) * (Q - 1) * math.exp(-N * epsilon**2 / 2)


@dataclass
class TailCheck:
    epsilon: float
    trials: int
    exceedances: int
    frequency: float
    bound: float
    passed: bool
    mus: np.ndarray = field(repr=False)
    mus_full: np.ndarray = field(repr=False)


def coherence_tail_check(
    N: int,
    P: int,
    Q: int,
    subbands: SubbandSet,
    trials: int,
    epsilon: float,
    seed=None,
    grid: CarrierGrid | None = None,
    iid: bool = False,
) -> TailCheck:
    """Empirical ``P(mu >= epsilon)`` over random plans against the bound
    ``2 (P-1)(Q-1) exp(-N epsilon^2 / 2)``.

    The bound covers the maximum over differences with p >= 1 and q >= 1,
    so that is the statistic tested (``mus``). The full coherence, which
    also includes the pure-range and pure-Doppler differences, is kept in
    ``mus_full`` for reference.

    Plans come from the sparse random generator (reuse switched on when
    N exceeds the allowed carriers) or, with ``iid``, from i.i.d. uniform
    draws over the allowed carriers.
    """
    rng = np.random.default_rng(seed)
    if grid is None:
        grid = CarrierGrid(690e6, 2.5e6, subbands.M, 62.5e-6, 0.4e-6)
    allowed = subbands.indices()
    reuse = N > subbands.cardinality
    mus = np.empty(trials)
    mus_full = np.empty(trials)
    for t in range(trials):
        if iid:
            d = rng.choice(allowed, size=N, replace=True)
        else:
            d = make_sparse_random_plan(grid, subbands, N, reuse=reuse, seed=rng).d
        F = _difference_map(d, N, P, Q)
        mus[t] = F[1:, 1:].max() if P > 1 and Q > 1 else 0.0
        F[0, 0] = 0.0
        mus_full[t] = F.max()
    exceed = int(np.count_nonzero(mus >= epsilon))
    freq = exceed / trials if trials else 0.0
    bound = coherence_tail_bound(N, P, Q, epsilon)
    return TailCheck(epsilon, trials, exceed, freq, bound, freq <= bound, mus, mus_full)


def _cells(items: Iterable) -> list[tuple[int, int]]:
    out = []
    for it in items:
        if hasattr(it, "n_k"):
            out.append((int(it.n_k), int(it.m_k)))
        elif hasattr(it, "p") and hasattr(it, "q"):
            out.append((int(it.p), int(it.q)))
        else:
            a, b = it
            out.append((int(a), int(b)))
    return out


def hit_rate(truth: Sequence, estimate: Sequence, T_r: float = 1, T_d: float = 1) -> float:
    """Fraction of estimates lying within (T_r, T_d) grid cells of some true
    target, normalized by the number of true targets and capped at 1.

    Items may be ``(range_index, doppler_index)`` pairs, scene targets or
    recovered detections.
    """
    tr = _cells(truth)
    if not tr:
        raise UndefinedMetricError("hit rate is undefined without true targets")
    est = _cells(estimate)
    if not est:
        return 0.0
    t = np.array(tr)
    e = np.array(est)
    close = (np.abs(e[:, None, 0] - t[None, :, 0]) <= T_r) & (np.abs(e[:, None, 1] - t[None, :, 1]) <= T_d)
    return min(1.0, float(np.count_nonzero(close.any(axis=1))) / len(tr))
