import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rasster.errors import CapacityError, UndefinedSNRError
from rasster.forward import (
    build_dictionary,
    decode_cell,
    dictionary_direct,
    dictionary_from_offsets,
    dictionary_hadamard,
    doppler_factor,
    encode_cell,
    inject_interference,
    inject_noise,
    measure,
    range_factor,
    sir_db,
    snr_db,
    sparse_vector,
    synthesize_echoes,
    write_measurements_csv,
)
from rasster.scene import Target
from rasster.waveform import (
    SubbandSet,
    make_linear_plan,
    make_random_full_plan,
    make_sparse_random_plan,
    reference_grid,
)


def loop_dictionary(d, P, Q):
    """Entry-by-entry oracle with scalar cmath."""
    N = len(d)
    A = np.empty((N, P * Q), dtype=complex)
    for n in range(N):
        for p in range(P):
            for q in range(Q):
                A[n, p * Q + q] = cmath.exp(-2j * math.pi * (p * d[n] / P + q * n / Q))
    return A


def loop_echoes(targets, d, P, Q, amp):
    out = []
    for n in range(len(d)):
        s = 0j
        for t in targets:
            s += t.gamma * cmath.exp(-2j * math.pi * t.n_k * d[n] / P) * cmath.exp(-2j * math.pi * t.m_k * n / Q)
        out.append(amp * s)
    return np.array(out)


def sparse_plan(N, M=32, seed=0, reuse=False):
    return make_sparse_random_plan(reference_grid(M), SubbandSet.full(M), N, reuse=reuse, seed=seed)


# ---- dictionary

def test_single_column_is_ones():
    A = build_dictionary(sparse_plan(6), 1, 1).A
    assert A.shape == (6, 1) and np.all(A == 1)


def test_pure_doppler_column():
    plan = sparse_plan(10)
    A = build_dictionary(plan, 4, 5).A
    n = np.arange(10)
    for q in range(5):
        assert np.allclose(A[:, q], np.exp(-2j * np.pi * q * n / 5), atol=1e-14)


def test_small_direct_vs_hadamard():
    d = [0, 1, 1]
    direct = dictionary_direct(d, 2, 2)
    had = dictionary_hadamard(range_factor(d, 2), doppler_factor(3, 2))
    assert np.abs(direct - had).max() <= 1e-12
    assert np.abs(direct - loop_dictionary(d, 2, 2)).max() <= 1e-12


def test_block_structure():
    d = np.array([3, 0, 7, 5, 1])
    R, D = range_factor(d, 3), doppler_factor(5, 4)
    A = dictionary_hadamard(R, D)
    for p in range(3):
        assert np.allclose(A[:, p * 4:(p + 1) * 4], np.diag(R[:, p]) @ D)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 12), P=st.integers(1, 6), Q=st.integers(1, 6), seed=st.integers(0, 2**31))
def test_dictionary_properties(N, P, Q, seed):
    d = np.random.default_rng(seed).integers(0, 40, size=N)
    A = dictionary_from_offsets(d, P, Q).A
    assert np.allclose(np.abs(A), 1.0, atol=1e-14)
    assert np.allclose(np.linalg.norm(A, axis=0), math.sqrt(N), rtol=1e-13)
    G = A.conj().T @ A
    assert np.allclose(np.abs(G), np.abs(G.T), atol=1e-12)
    assert np.abs(A - loop_dictionary(d.tolist(), P, Q)).max() <= 1e-12


def test_cell_codec_roundtrip():
    u = np.arange(7 * 5)
    p, q = decode_cell(u, 5)
    assert np.array_equal(encode_cell(p, q, 5), u)
    assert decode_cell(5, 5) == (1, 0)


def test_lazy_dictionary_matches_dense():
    plan = sparse_plan(20, seed=4)
    dense = build_dictionary(plan, 6, 7)
    lazy = build_dictionary(plan, 6, 7, memory_budget=16)
    assert lazy.lazy and not dense.lazy
    with pytest.raises(CapacityError):
        lazy.A
    r = np.random.default_rng(0).standard_normal(20) + 1j
    assert np.allclose(lazy.correlate(r), dense.A.conj().T @ r, atol=1e-12)
    assert np.allclose(lazy.columns([0, 13, 41]), dense.A[:, [0, 13, 41]], atol=1e-14)
    x = np.zeros(42, complex)
    x[[3, 17]] = [1, 2j]
    assert np.allclose(lazy.matvec(x), dense.A @ x, atol=1e-12)


# ---- synthesis

def test_echo_examples():
    lin = make_linear_plan(reference_grid(8), 8, P_t=8.0)  # amplitude 1
    assert np.allclose(synthesize_echoes([Target(0, 0, 1.0)], lin, 4, 4), 1.0)
    alt = synthesize_echoes([Target(0, 2, 1.0)], lin, 4, 4)
    assert np.allclose(alt, (-1.0) ** np.arange(8), atol=1e-14)
    assert np.all(synthesize_echoes([], lin, 4, 4) == 0)


def test_echoes_match_loop_oracle():
    plan = make_sparse_random_plan(reference_grid(16), SubbandSet.full(16), 4, P_t=2.0, seed=3)
    ts = [Target(1, 2, 0.5 - 0.3j), Target(4, 0, -1.2j)]
    y = synthesize_echoes(ts, plan, 5, 5)
    ref = loop_echoes(ts, plan.d.tolist(), 5, 5, plan.amplitude)
    assert np.abs(y - ref).max() <= 1e-12 * np.abs(ref).max()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), K=st.integers(1, 5))
def test_echoes_equal_A_times_x(seed, K):
    rng = np.random.default_rng(seed)
    P, Q = 5, 6
    plan = sparse_plan(12, seed=int(rng.integers(1 << 30)))
    cells = rng.choice(P * Q, size=K, replace=False)
    ts = [Target(int(u) // Q, int(u) % Q, complex(*rng.standard_normal(2))) for u in cells]
    A = build_dictionary(plan, P, Q).A
    x = sparse_vector(ts, P, Q, plan.amplitude)
    y = synthesize_echoes(ts, plan, P, Q)
    assert np.linalg.norm(y - A @ x) <= 1e-10 * np.linalg.norm(y)
    assert np.linalg.norm(A @ x) ** 2 <= 12 * np.abs(x).sum() ** 2 * (1 + 1e-12)


# ---- noise and interference

def test_noise_variance_examples():
    y = np.ones(16, complex)
    _, s2 = inject_noise(y, 0.0, seed=0)
    assert s2 == pytest.approx(1.0, rel=1e-15)
    _, s2 = inject_noise(y, -30.0, seed=0)
    assert s2 == pytest.approx(1000.0, rel=1e-13)
    out, s2 = inject_noise(y, float("inf"), seed=0)
    assert s2 == 0.0 and np.array_equal(out, y)


def test_noise_zero_signal():
    with pytest.raises(UndefinedSNRError):
        inject_noise(np.zeros(4), 0.0)


def test_noise_deterministic_and_circular():
    y = np.ones(200_000, complex)
    a, s2 = inject_noise(y, 3.0, seed=5)
    b, _ = inject_noise(y, 3.0, seed=5)
    assert np.array_equal(a, b)
    z = a - y
    assert np.mean(np.abs(z) ** 2) == pytest.approx(s2, rel=0.02)
    assert np.var(z.real) == pytest.approx(s2 / 2, rel=0.02)
    assert abs(np.mean(z * z)) < 0.02 * s2  # circular: E[z^2] = 0


def test_interference_examples():
    g = reference_grid(32)
    rsf = make_random_full_plan(g, 32, P_t=32.0, seed=1)  # amplitude 1
    y = synthesize_echoes([Target(0, 0, 1.0)], rsf, 25, 25)
    assert np.vdot(y, y).real == pytest.approx(32.0)
    out, sI2, lam = inject_interference(y, y, rsf, 14, 24, 10.0, seed=2)
    assert lam.size == 11
    assert sI2 == pytest.approx(32 / 110, rel=1e-14)
    untouched = np.setdiff1d(np.arange(32), lam)
    assert np.array_equal(out[untouched], y[untouched])
    assert np.all(out[lam] != y[lam])

    sb = SubbandSet.excluding(32, 14, 24)
    ras = make_sparse_random_plan(g, sb, 20, seed=3)
    yr = synthesize_echoes([Target(1, 1, 1.0)], ras, 25, 25)
    out, sI2, lam = inject_interference(yr, yr, ras, 14, 24, 10.0, seed=2)
    assert lam.size == 0 and sI2 is None and np.array_equal(out, yr)

    _, sI2, lam = inject_interference(y, y, rsf, 14, 24, 100.0, seed=2)
    assert lam.size * sI2 / np.vdot(y, y).real == pytest.approx(1e-10, rel=1e-12)


@pytest.mark.parametrize("snr,sir", [(-40.0, 100.0), (-17.5, 10.0), (0.0, 10.0), (12.3, -3.0)])
def test_measure_calibration(snr, sir):
    plan = make_random_full_plan(reference_grid(32), 40, seed=0)
    ts = [Target(3, 4, 1.0), Target(7, 1, 1j)]
    ms = measure(ts, plan, 25, 25, snr, sir, (14, 24), seed=9)
    assert abs(ms.snr_db - snr) <= 1e-12
    assert abs(ms.sir_db - sir) <= 1e-12
    assert abs(snr_db(ms.y_clean, ms.sigma2) - snr) <= 1e-12
    assert abs(sir_db(ms.y_clean, ms.sigma_I2, ms.lambda_I.size) - sir) <= 1e-12


def test_measure_seed_forms_agree():
    plan = sparse_plan(16, seed=2)
    ts = [Target(1, 1, 1.0)]
    a = measure(ts, plan, 4, 4, 0.0, None, None, seed=np.random.SeedSequence(7))
    b = measure(ts, plan, 4, 4, 0.0, None, None, seed=7)
    assert np.array_equal(a.y, b.y)
    assert a.sigma_I2 is None and a.sir_db is None


def test_measurements_csv():
    text = write_measurements_csv(np.array([1 + 2j, -0.5j]))
    assert text.splitlines() == ["n,re_y,im_y", "0,1.0,2.0", "1,-0.0,-0.5"]
