"""Per-bin sparse recovery: OMP, an exhaustive l0 oracle, support decoding and
GLRT screening of coarse bins."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from .errors import DegenerateSupportError, OracleInfeasibleError
from .forward import DictionaryMatrix, decode_cell
from .scene import GridParams, reflectivity_from_gamma

__all__ = [
    "StopMode",
    "RecoveryConfig",
    "Detection",
    "RecoveryReport",
    "L0Result",
    "default_residual_tol",
    "omp_recover",
    "exhaustive_l0",
    "decode_support",
    "encode_support",
    "chi2_2_tail",
    "glrt_threshold",
    "bin_statistic",
    "screen_bins",
    "report_to_csv",
]


class StopMode(str, enum.Enum):
    FIXED_K = "fixed_k"
    RESIDUAL = "residual"


@dataclass(frozen=True)
class RecoveryConfig:
    k_max: int
    residual_tol: float = 0.0
    mode: StopMode = StopMode.FIXED_K

    def __post_init__(self):
        object.__setattr__(self, "mode", StopMode(self.mode))
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")
        if self.residual_tol < 0:
            raise ValueError("residual_tol must be nonnegative")


def default_residual_tol(sigma2: float, N: int) -> float:
    """Noise-floor stopping radius ``sigma * sqrt(N + 2 sqrt(N log N))``."""
    return math.sqrt(sigma2) * math.sqrt(N + 2 * math.sqrt(N * math.log(max(N, 1))))


@dataclass(frozen=True)
class Detection:
    u: int
    p: int
    q: int
    R: float
    nu: float
    beta: complex | None = None


@dataclass
class RecoveryReport:
    support: list[int]
    coefficients: np.ndarray
    residual_norm: float
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    decoded: list[Detection] = field(default_factory=list)


def _as_ops(A):
    if isinstance(A, DictionaryMatrix):
        norms = A.column_norms()
        return A.shape, A.correlate, A.columns, norms
    A = np.asarray(A)
    norms = np.linalg.norm(A, axis=0)
    return A.shape, (lambda r: A.conj().T @ r), (lambda idx: A[:, np.asarray(idx, dtype=np.int64)]), norms


def _ls_on_support(cols: np.ndarray, y: np.ndarray, support) -> np.ndarray:
    q, r = np.linalg.qr(cols)
    diag = np.abs(np.diag(r))
    if diag.size and diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise DegenerateSupportError("selected columns are linearly dependent", support)
    return linalg.solve_triangular(r, q.conj().T @ y)


def omp_recover(A, y, config: RecoveryConfig, grid: GridParams | None = None,
                amplitude: float = 1.0) -> RecoveryReport:
    """Orthogonal matching pursuit.

    Each step picks the column with the largest normalized correlation to
    the residual (ties go to the lowest index), refits all selected
    coefficients by least squares via QR and updates the residual.
    ``FIXED_K`` runs ``k_max`` steps, stopping early only on an exactly
    explained measurement; ``RESIDUAL`` stops once the residual norm drops
    to ``residual_tol`` or ``k_max`` atoms are in.

    When ``grid`` is given the support is decoded into physical cells,
    dividing coefficients by ``amplitude`` to undo the per-pulse scaling.
    """
    (N, n_atoms), correlate, columns, norms = _as_ops(A)
    y = np.asarray(y, dtype=complex)
    if y.shape != (N,):
        raise ValueError(f"y has shape {y.shape}, expected ({N},)")
    k_max = min(config.k_max, N, n_atoms)
    y_norm = float(np.linalg.norm(y))
    exact = 1e-12 * max(y_norm, np.finfo(float).tiny)

    support: list[int] = []
    coef = np.zeros(0, dtype=complex)
    r = y.copy()
    res = y_norm
    history = [res]
    safe_norms = np.where(norms > 0, norms, np.inf)
    while len(support) < k_max:
        if config.mode is StopMode.RESIDUAL and res <= config.residual_tol:
            break
        if res <= exact:
            break
        score = np.abs(correlate(r)) / safe_norms
        score[support] = -np.inf
        support.append(int(np.argmax(score)))
        cols = columns(support)
        coef = _ls_on_support(cols, y, support)
        r = y - cols @ coef
        res = float(np.linalg.norm(r))
        history.append(res)

    report = RecoveryReport(support, coef, res, len(support), history)
    if grid is not None:
        report.decoded = decode_support(support, grid, coef / amplitude)
    return report


@dataclass
class L0Result:
    support: list[int]
    residual_norm: float
    unique: bool
    n_within_tol: int
    n_degenerate: int


def _subset_residuals(A: np.ndarray, y: np.ndarray, subsets: np.ndarray):
    """Least-squares residual norms for a batch of column subsets (B x K)."""
    As = np.moveaxis(A[:, subsets], 0, 1)  # B x N x K
    q, r = np.linalg.qr(As)
    diag = np.abs(np.diagonal(r, axis1=1, axis2=2))
    scale = np.maximum(diag.max(axis=1), 1.0)
    degenerate = diag.min(axis=1) <= 1e-10 * scale
    coef = np.einsum("bnk,n->bk", q.conj(), y)
    resid = y[None, :] - np.einsum("bnk,bk->bn", q, coef)
    res = np.linalg.norm(resid, axis=1)
    res[degenerate] = np.inf
    return res, degenerate


def exhaustive_l0(A, y, K: int, tol: float | None = None, cap: int = 2_000_000,
                  chunk: int = 20_000) -> L0Result:
    """Best K-column least-squares fit over every K-subset of columns.

    The minimizer is declared unique when it is the only subset whose
    residual is at most ``tol`` (default ``1e-8 * ||y||``). Rank-deficient
    subsets are skipped; any K-subset spanning the same space as a
    degenerate one does at least as well.
    """
    A = np.asarray(A)
    y = np.asarray(y, dtype=complex)
    n_atoms = A.shape[1]
    if tol is None:
        tol = 1e-8 * float(np.linalg.norm(y))
    if K == 0:
        res = float(np.linalg.norm(y))
        return L0Result([], res, True, int(res <= tol), 0)
    total = math.comb(n_atoms, K)
    if total > cap:
        raise OracleInfeasibleError(f"C({n_atoms}, {K}) = {total} subsets exceeds cap {cap}")

    best_res, best = np.inf, None
    within = 0
    n_deg = 0
    it = combinations(range(n_atoms), K)
    while True:
        block = np.fromiter((i for c in _take(it, chunk) for i in c), dtype=np.int64)
        if block.size == 0:
            break
        subsets = block.reshape(-1, K)
        res, deg = _subset_residuals(A, y, subsets)
        n_deg += int(deg.sum())
        within += int(np.count_nonzero(res <= tol))
        j = int(np.argmin(res))
        if res[j] < best_res:
            best_res, best = float(res[j]), subsets[j].tolist()
    if best is None:
        raise DegenerateSupportError("every K-subset is rank deficient")
    return L0Result(best, best_res, within == 1, within, n_deg)


def _take(it, n):
    for _ in range(n):
        try:
            yield next(it)
        except StopIteration:
            return


def encode_support(p, q, Q: int):
    return np.asarray(p) * Q + np.asarray(q)


def decode_support(support: Sequence[int], grid: GridParams, gammas=None) -> list[Detection]:
    """Map column indices to (range cell, Doppler cell, R, nu, beta).

    ``gammas`` are the recovered per-target amplitudes; ``beta`` is left as
    None when they are not supplied.
    """
    out = []
    for i, u in enumerate(support):
        if not 0 <= u < grid.P * grid.Q:
            raise IndexError(f"column {u} outside [0, {grid.P * grid.Q})")
        p, q = decode_cell(int(u), grid.Q)
        R, nu = p * grid.delta_R, q * grid.delta_nu
        beta = None
        if gammas is not None:
            beta = complex(reflectivity_from_gamma(gammas[i], R, grid.f_c))
        out.append(Detection(int(u), int(p), int(q), float(R), float(nu), beta))
    return out


def chi2_2_tail(x, rho: float = 0.0):
    """Right-tail probability of the (noncentral) chi-square with 2 degrees
    of freedom and noncentrality ``rho``."""
    if rho == 0:
        return stats.chi2.sf(x, 2)
    return stats.ncx2.sf(x, 2, rho)


def glrt_threshold(p_fa: float, rho: float, card_I: int, tail_tol: float = 1e-10) -> float:
    """Threshold ``gamma`` with ``chi2_2_tail(gamma, rho) = 1 - (1 - p_fa)^card_I``.

    Solved by bisection after doubling the upper bracket until the tail
    falls below the target.
    """
    if not 0 < p_fa < 1:
        raise ValueError(f"p_fa must lie in (0, 1), got {p_fa}")
    if card_I < 1:
        raise ValueError("card_I must be >= 1")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    target = -math.expm1(card_I * math.log1p(-p_fa))
    if target >= 1.0:
        return 0.0

    lo, hi = 0.0, max(1.0, rho + 2.0)
    while chi2_2_tail(hi, rho) > target:
        lo, hi = hi, 2 * hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        t = chi2_2_tail(mid, rho)
        if abs(t - target) <= tail_tol * target and hi - lo <= 1e-12 * max(1.0, hi):
            break
        if t > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def bin_statistic(A, y, sigma2: float) -> float:
    """GLRT statistic for one unknown on-grid target in a bin:
    ``max_u 2 |a_u^H y|^2 / (||a_u||^2 sigma2)``, chi-square(2) per cell
    under noise only."""
    (N, _), correlate, _, norms = _as_ops(A)
    c = np.abs(correlate(np.asarray(y, dtype=complex))) ** 2
    return float(np.max(2 * c / (norms**2 * sigma2)))


def screen_bins(statistics, gamma: float) -> np.ndarray:
    """Indices of bins whose statistic exceeds ``gamma``."""
    s = np.asarray(statistics, dtype=float)
    if np.any(s < 0):
        raise ValueError("bin statistics must be nonnegative")
    return np.flatnonzero(s > gamma)


def report_to_csv(report: RecoveryReport, fh=None) -> str | None:
    """Rows ``u, p, q, R_m, nu_mps, re_beta, im_beta``."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "p", "q", "R_m", "nu_mps", "re_beta", "im_beta"])
    for det in report.decoded:
        b = det.beta if det.beta is not None else complex("nan")
        w.writerow([det.u, det.p, det.q, repr(det.R), repr(det.nu), repr(b.real), repr(b.imag)])
    return buf.getvalue() if fh is None else None
