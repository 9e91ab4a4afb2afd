"""Sparse delay-Doppler dictionary and measurement synthesis for one coarse bin.

Column ``u = p * Q + q`` of the dictionary holds

    A[n, u] = exp(-j 2 pi (p d_n / P + q n / Q)),

i.e. ``A = [diag(r_0) D, diag(r_1) D, ..., diag(r_{P-1}) D]`` with the range
factor ``R[n, p] = exp(-j 2 pi p d_n / P)`` and the Doppler factor
``D[n, q] = exp(-j 2 pi q n / Q)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CapacityError, UndefinedSNRError
from .scene import Target
from .waveform import FrequencyPlan, interference_pulse_set

DEFAULT_MEMORY_BUDGET = 256 * 2**20  # bytes of dense complex128 storage

__all__ = [
    "DictionaryMatrix",
    "MeasurementSet",
    "range_factor",
    "doppler_factor",
    "dictionary_direct",
    "dictionary_hadamard",
    "build_dictionary",
    "dictionary_from_offsets",
    "encode_cell",
    "decode_cell",
    "sparse_vector",
    "synthesize_echoes",
    "inject_noise",
    "inject_interference",
    "measure",
    "snr_db",
    "sir_db",
    "write_measurements_csv",
]


def range_factor(d, P: int) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    return np.exp(-2j * np.pi * np.outer(d, np.arange(P)) / P)


def doppler_factor(N: int, Q: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.outer(np.arange(N), np.arange(Q)) / Q)


def dictionary_direct(d, P: int, Q: int) -> np.ndarray:
    """Entry-by-entry construction from the summed phase."""
    d = np.asarray(d, dtype=float)
    N = d.size
    p = np.arange(P)[:, None]
    q = np.arange(Q)[None, :]
    phase = p[None] * d[:, None, None] / P + q[None] * np.arange(N)[:, None, None] / Q
    return np.exp(-2j * np.pi * phase).reshape(N, P * Q)


def dictionary_hadamard(R: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Columnwise Hadamard product of the range and Doppler factors."""
    N, P = R.shape
    return (R[:, :, None] * D[:, None, :]).reshape(N, P * D.shape[1])


def encode_cell(p, q, Q: int):
    return np.asarray(p) * Q + np.asarray(q)


def decode_cell(u, Q: int):
    u = np.asarray(u)
    return u // Q, u % Q


@dataclass(eq=False)
class DictionaryMatrix:
    """Range/Doppler factors of the dictionary, with the dense matrix built
    on demand when it fits ``memory_budget``.

    ``correlate`` and ``columns`` work from the factors, so recovery runs
    even when the dense matrix is too large to store.
    """

    R: np.ndarray
    D: np.ndarray
    d: np.ndarray
    plan: FrequencyPlan | None = None
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    @property
    def N(self) -> int:
        return self.R.shape[0]

    @property
    def P(self) -> int:
        return self.R.shape[1]

    @property
    def Q(self) -> int:
        return self.D.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N, self.P * self.Q)

    @property
    def nbytes(self) -> int:
        return self.N * self.P * self.Q * 16

    @property
    def lazy(self) -> bool:
        return self.nbytes > self.memory_budget

    @cached_property
    def A(self) -> np.ndarray:
        if self.lazy:
            raise CapacityError(
                f"dense dictionary needs {self.nbytes} bytes, budget is {self.memory_budget}"
            )
        A = dictionary_hadamard(self.R, self.D)
        A.setflags(write=False)
        return A

    def __array__(self, dtype=None, copy=None):
        return self.A if dtype is None else self.A.astype(dtype)

    def columns(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if "A" in self.__dict__:
            return self.A[:, idx]
        p, q = decode_cell(idx, self.Q)
        return self.R[:, p] * self.D[:, q]

    def column(self, u: int) -> np.ndarray:
        return self.columns([u])[:, 0]

    def correlate(self, r) -> np.ndarray:
        """``A^H r`` as a length ``P*Q`` vector."""
        r = np.asarray(r)
        if "A" in self.__dict__ or not self.lazy:
            return self.A.conj().T @ r
        return (self.R.conj().T @ (r[:, None] * self.D.conj())).reshape(-1)

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x)
        nz = np.flatnonzero(x)
        return self.columns(nz) @ x[nz]

    def column_norms(self) -> np.ndarray:
        return np.full(self.P * self.Q, np.sqrt(self.N))


def dictionary_from_offsets(d, P: int, Q: int, memory_budget: int = DEFAULT_MEMORY_BUDGET,
                            plan: FrequencyPlan | None = None) -> DictionaryMatrix:
    """Dictionary for arbitrary (possibly non-integer) carrier offsets ``d``."""
    if P < 1 or Q < 1:
        raise ValueError(f"P and Q must be >= 1, got P={P}, Q={Q}")
    d = np.asarray(d, dtype=float).reshape(-1)
    return DictionaryMatrix(range_factor(d, P), doppler_factor(d.size, Q), d, plan, memory_budget)


def build_dictionary(plan: FrequencyPlan, P: int, Q: int,
                     memory_budget: int = DEFAULT_MEMORY_BUDGET) -> DictionaryMatrix:
    return dictionary_from_offsets(plan.d, P, Q, memory_budget, plan=plan)


def sparse_vector(targets: Sequence[Target], P: int, Q: int, amplitude: float = 1.0) -> np.ndarray:
    x = np.zeros(P * Q, dtype=complex)
    for t in targets:
        x[t.n_k * Q + t.m_k] += amplitude * t.gamma
    return x


def synthesize_echoes(targets: Sequence[Target], plan: FrequencyPlan, P: int, Q: int) -> np.ndarray:
    """Clean slow-time samples of one coarse bin, scaled by the plan's
    per-pulse amplitude."""
    N = plan.N
    y = np.zeros(N, dtype=complex)
    if not targets:
        return y
    n = np.arange(N)
    d = plan.d.astype(float)
    for t in targets:
        y += t.gamma * np.exp(-2j * np.pi * (t.n_k * d / P + t.m_k * n / Q))
    return plan.amplitude * y


def snr_db(y_clean, sigma2: float) -> float:
    y_clean = np.asarray(y_clean)
    if sigma2 == 0:
        return float("inf")
    return float(10 * np.log10(np.vdot(y_clean, y_clean).real / (y_clean.size * sigma2)))


def sir_db(y_clean, sigma_I2: float | None, n_affected: int) -> float | None:
    if sigma_I2 is None or n_affected == 0:
        return None
    if sigma_I2 == 0:
        return float("inf")
    y_clean = np.asarray(y_clean)
    return float(10 * np.log10(np.vdot(y_clean, y_clean).real / (n_affected * sigma_I2)))


def _cn(rng, var: float, size: int) -> np.ndarray:
    s = np.sqrt(var / 2)
    return s * rng.standard_normal(size) + 1j * s * rng.standard_normal(size)


def inject_noise(y_clean, snr: float, seed=None) -> tuple[np.ndarray, float]:
    """Add circular white Gaussian noise scaled so that
    ``10 log10(||y_clean||^2 / (N sigma2)) == snr``. ``snr=inf`` adds nothing."""
    y_clean = np.asarray(y_clean, dtype=complex)
    energy = np.vdot(y_clean, y_clean).real
    if energy == 0:
        raise UndefinedSNRError("SNR is undefined for an all-zero signal")
    if np.isposinf(snr):
        return y_clean.copy(), 0.0
    sigma2 = energy / (y_clean.size * 10 ** (snr / 10))
    rng = np.random.default_rng(seed)
    return y_clean + _cn(rng, sigma2, y_clean.size), float(sigma2)


def inject_interference(y, y_clean, plan: FrequencyPlan, M1: int, M2: int, sir: float | None,
                        seed=None) -> tuple[np.ndarray, float | None, np.ndarray]:
    """Add circular Gaussian interference on pulses whose carrier lies in
    ``[M1, M2]``.

    Returns ``(y', sigma_I2, lambda_I)``. ``sigma_I2`` is None when no pulse
    is hit or ``sir`` is None (interference disabled).
    """
    y = np.asarray(y, dtype=complex)
    lam = interference_pulse_set(plan, M1, M2)
    if sir is None or lam.size == 0:
        return y.copy(), None, lam
    if np.isposinf(sir):
        return y.copy(), 0.0, lam
    y_clean = np.asarray(y_clean)
    energy = np.vdot(y_clean, y_clean).real
    sigma_I2 = energy / (lam.size * 10 ** (sir / 10))
    rng = np.random.default_rng(seed)
    out = y.copy()
    out[lam] += _cn(rng, sigma_I2, lam.size)
    return out, float(sigma_I2), lam


@dataclass(eq=False)
class MeasurementSet:
    y_clean: np.ndarray
    y: np.ndarray
    sigma2: float
    sigma_I2: float | None
    lambda_I: np.ndarray
    snr_db: float
    sir_db: float | None


def measure(targets: Sequence[Target], plan: FrequencyPlan, P: int, Q: int,
            snr: float = float("inf"), sir: float | None = None,
            band: tuple[int, int] | None = None, seed=None) -> MeasurementSet:
    """Clean echoes plus noise and (optionally) band-limited interference.

    Noise and interference use independent child streams of ``seed``.
    """
    y_clean = synthesize_echoes(targets, plan, P, Q)
    if isinstance(seed, (np.random.Generator, np.random.SeedSequence)):
        noise_seed, intf_seed = seed.spawn(2)
    else:
        noise_seed, intf_seed = np.random.SeedSequence(seed).spawn(2)
    y, sigma2 = inject_noise(y_clean, snr, noise_seed)
    if band is not None and sir is not None:
        y, sigma_I2, lam = inject_interference(y, y_clean, plan, band[0], band[1], sir, intf_seed)
    else:
        sigma_I2, lam = None, np.zeros(0, dtype=np.int64)
    return MeasurementSet(
        y_clean=y_clean, y=y, sigma2=sigma2, sigma_I2=sigma_I2, lambda_I=lam,
        snr_db=snr_db(y_clean, sigma2), sir_db=sir_db(y_clean, sigma_I2, lam.size),
    )


def write_measurements_csv(y, fh=None) -> str | None:
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "re_y", "im_y"])
    for n, v in enumerate(np.asarray(y, dtype=complex).tolist()):
        w.writerow([n, repr(v.real), repr(v.imag)])
    return buf.getvalue() if fh is None else None
