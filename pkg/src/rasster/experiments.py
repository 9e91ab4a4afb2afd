"""Configuration-driven experiments: detection maps, Monte Carlo hit-rate
sweeps and guarantee diagnostics.

Every random draw comes from a ``SeedSequence`` keyed on the base seed, a
CRC32 tag naming the stream and the integer coordinates of the draw
(pulse count, trial, SNR/SIR index, ...). Scenes are shared by all schemes
at a given (N, trial), plans are shared across SNR/SIR points, and noise is
independent per (scheme, N, SNR, SIR, trial). Adding a scheme or reordering
trials therefore leaves every other number unchanged.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import zlib
from itertools import combinations
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .diagnostics import coherence_bounds, continuous_offsets, min_singular_values, mutual_coherence, hit_rate
from .errors import ConfigError, InvalidGridError, InvalidPlanError, RassterError
from .forward import DictionaryMatrix, build_dictionary, dictionary_from_offsets, measure
from .recovery import RecoveryConfig, StopMode, default_residual_tol, omp_recover
from .scene import GridParams, Layout, Target, TargetScene, derive_grid, random_scene, scene_from_text
from .waveform import (
    CarrierGrid,
    FrequencyPlan,
    SubbandSet,
    make_linear_plan,
    make_partial_random_plan,
    make_random_full_plan,
    make_sparse_random_plan,
    plan_to_json,
    write_plan_csv,
)

log = logging.getLogger(__name__)

SCHEMES = ("sfw", "rsf", "rasster")

HIT_RATES_COLUMNS = ["scheme", "N", "snr_db", "sir_db", "trials", "mean", "stderr"]
DETECTIONS_COLUMNS = ["scheme", "kind", "bin", "p", "q"]
DIAGNOSTICS_COLUMNS = ["seed", "N", "P", "Q", "mu", "K1", "K2", "spark_failures"]
SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    f_c: float = 690e6
    delta_f: float = 2.5e6
    M: int = 32
    T: float = 62.5e-6
    T_p: float = 0.4e-6


class BandConfig(_Strict):
    M1: int
    M2: int


class SceneConfig(_Strict):
    K: int = 4
    layout: Layout = Layout.SINGLE_BIN
    per_bin: int = 2
    static: bool = False
    bins: Optional[list[int]] = None
    file: Optional[str] = None


class ToleranceConfig(_Strict):
    range: float = 1
    doppler: float = 1


class RecoverySettings(_Strict):
    mode: StopMode = StopMode.FIXED_K
    k_max: int = 8


class RassterConfig(_Strict):
    subbands: Optional[list[tuple[int, int]]] = None
    reuse: Literal["auto", "always", "never"] = "auto"


class DiagnosticsConfig(_Strict):
    delta: float = Field(0.1, gt=0, lt=1)
    spark_max_subsets: int = 10_000
    seeds: int = 10
    bounds_only: bool = False


class ExperimentConfig(_Strict):
    schemes: list[Literal["sfw", "rsf", "rasster"]] = ["rsf", "rasster"]
    grid: GridConfig = GridConfig()
    P: int = Field(25, ge=1)
    Q: int = Field(25, ge=1)
    P_t: float = Field(1.0, gt=0)
    pulses: list[int] = [32]
    interference: Optional[BandConfig] = None
    snr_db: list[float] = [float("inf")]
    sir_db: list[Optional[float]] = [None]
    scene: SceneConfig = SceneConfig()
    tolerance: ToleranceConfig = ToleranceConfig()
    recovery: RecoverySettings = RecoverySettings()
    rasster: RassterConfig = RassterConfig()
    rsf_partial: bool = False
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    trials: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _consistent(self):
        try:
            grid = self.carrier_grid()
            derive_grid(grid, self.P, self.Q)
        except InvalidGridError as exc:
            raise ValueError(f"grid: {exc}") from None
        if self.interference is not None:
            b = self.interference
            if not 0 <= b.M1 <= b.M2 <= self.grid.M - 1:
                raise ValueError(f"interference: need 0 <= M1 <= M2 <= M-1, got {b.M1}, {b.M2}")
        try:
            self.rasster_subbands()
        except InvalidPlanError as exc:
            raise ValueError(f"rasster.subbands: {exc}") from None
        if any(n < 1 for n in self.pulses):
            raise ValueError("pulses: every pulse count must be >= 1")
        if not self.schemes:
            raise ValueError("schemes: at least one scheme is required")
        return self

    def carrier_grid(self) -> CarrierGrid:
        g = self.grid
        return CarrierGrid(g.f_c, g.delta_f, g.M, g.T, g.T_p)

    def grid_params(self) -> GridParams:
        return derive_grid(self.carrier_grid(), self.P, self.Q)

    def band(self) -> tuple[int, int] | None:
        return None if self.interference is None else (self.interference.M1, self.interference.M2)

    def rasster_subbands(self) -> SubbandSet:
        M = self.grid.M
        if self.rasster.subbands is not None:
            return SubbandSet(tuple(self.rasster.subbands), M)
        if self.interference is not None:
            return SubbandSet.excluding(M, self.interference.M1, self.interference.M2)
        return SubbandSet.full(M)


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def load_config(path=None, text: str | None = None, **overrides) -> ExperimentConfig:
    """Parse a YAML config. Unknown keys and inconsistent values raise
    :class:`ConfigError` naming the offending field."""
    if text is None:
        text = Path(path).read_text() if path is not None else ""
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


# ---------------------------------------------------------------- seeding

def _tag(name: str) -> int:
    return zlib.crc32(name.encode())


def stream(base_seed: int, name: str, *coords: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed), _tag(name), *(int(c) for c in coords)])


# ---------------------------------------------------------------- plans

def make_plan(cfg: ExperimentConfig, scheme: str, N: int, seed) -> FrequencyPlan:
    grid = cfg.carrier_grid()
    if scheme == "sfw":
        return make_linear_plan(grid, N, cfg.P_t)
    if scheme == "rsf":
        if cfg.rsf_partial:
            return make_partial_random_plan(grid, N, cfg.P_t, seed)
        return make_random_full_plan(grid, N, cfg.P_t, seed)
    if scheme == "rasster":
        sub = cfg.rasster_subbands()
        reuse = {"auto": N > sub.cardinality, "always": True, "never": False}[cfg.rasster.reuse]
        return make_sparse_random_plan(grid, sub, N, cfg.P_t, reuse=reuse, seed=seed)
    raise ValueError(f"unknown scheme {scheme!r}")


def make_scene(cfg: ExperimentConfig, seed) -> TargetScene:
    gp = cfg.grid_params()
    sc = cfg.scene
    if sc.file is not None:
        return scene_from_text(Path(sc.file).read_text(), gp)
    return random_scene(gp, sc.K, sc.layout, seed, per_bin=sc.per_bin, static=sc.static, bins=sc.bins)


# ---------------------------------------------------------------- per-bin processing

def _recover_bin(cfg: ExperimentConfig, A: DictionaryMatrix, plan: FrequencyPlan, targets: list[Target],
                 snr: float, sir: float | None, seed) -> list[tuple[int, int]]:
    if targets:
        ms = measure(targets, plan, cfg.P, cfg.Q, snr, sir, cfg.band(), seed)
        y, sigma2 = ms.y, ms.sigma2
        k = len(targets)
    else:
        # pure noise at the per-pulse signal level of a unit target
        rng = np.random.default_rng(seed)
        sigma2 = plan.pulse_energy
        y = math.sqrt(sigma2 / 2) * (rng.standard_normal(plan.N) + 1j * rng.standard_normal(plan.N))
        k = 0
    if cfg.recovery.mode is StopMode.FIXED_K and k > 0:
        rc = RecoveryConfig(k_max=k)
    else:
        rc = RecoveryConfig(k_max=cfg.recovery.k_max, mode=StopMode.RESIDUAL,
                            residual_tol=default_residual_tol(sigma2, plan.N))
    rep = omp_recover(A, y, rc)
    return [(int(u) // cfg.Q, int(u) % cfg.Q) for u in rep.support]


def _bin_hits(truth, estimate, tol: ToleranceConfig) -> int:
    if not truth or not estimate:
        return 0
    return min(len(truth), round(hit_rate(truth, estimate, tol.range, tol.doppler) * len(truth)))


# ---------------------------------------------------------------- hit-rate sweep

def _sweep_chunk(args):
    cfg, N, schemes, trial_ids = args
    n_snr, n_sir = len(cfg.snr_db), len(cfg.sir_db)
    out = np.full((len(trial_ids), len(schemes), n_snr, n_sir), np.nan)
    for ti, t in enumerate(trial_ids):
        scene = make_scene(cfg, stream(cfg.seed, "scene", N, t))
        if scene.K == 0:
            raise ConfigError("scene.K: the hit-rate sweep needs at least one target")
        for si, scheme in enumerate(schemes):
            plan = make_plan(cfg, scheme, N, stream(cfg.seed, scheme + "/plan", N, t))
            A = build_dictionary(plan, cfg.P, cfg.Q)
            for a, snr in enumerate(cfg.snr_db):
                for b, sir in enumerate(cfg.sir_db):
                    hits = 0
                    for l_r in scene.bins():
                        targets = scene.in_bin(l_r)
                        seed = stream(cfg.seed, scheme + "/noise", N, a, b, t, l_r)
                        est = _recover_bin(cfg, A, plan, targets, snr, sir, seed)
                        hits += _bin_hits([tg.cell for tg in targets], est, cfg.tolerance)
                    out[ti, si, a, b] = hits / scene.K
    return out


def _feasible_schemes(cfg: ExperimentConfig, N: int) -> list[str]:
    ok = []
    for scheme in cfg.schemes:
        try:
            make_plan(cfg, scheme, N, 0)
        except InvalidPlanError as exc:
            log.warning("skipping scheme=%s N=%d: %s", scheme, N, exc)
            continue
        ok.append(scheme)
    return ok


def _chunks(n: int, k: int) -> list[list[int]]:
    k = max(1, min(k, n))
    edges = np.linspace(0, n, k + 1).astype(int)
    return [list(range(edges[i], edges[i + 1])) for i in range(k)]


def _map_chunks(func, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(func, jobs))


@dataclass
class SweepRow:
    scheme: str
    N: int
    snr_db: float
    sir_db: float | None
    trials: int
    mean: float
    stderr: float


def run_hit_rate_sweep(cfg: ExperimentConfig, threads: int = 1, trial_ids=None) -> list[SweepRow]:
    """Mean and standard error of the hit rate for every (scheme, N, SNR, SIR).

    Infeasible (scheme, N) combinations are skipped with a logged warning.
    ``trial_ids`` overrides ``range(cfg.trials)``; aggregation does not
    depend on the order trials are executed in.
    """
    ids = list(range(cfg.trials)) if trial_ids is None else list(trial_ids)
    rows = []
    for N in cfg.pulses:
        schemes = _feasible_schemes(cfg, N)
        if not schemes:
            continue
        jobs = [(cfg, N, schemes, ch) for ch in _chunks(len(ids), threads * 4 if threads > 1 else 1)]
        jobs = [(c, n, s, [ids[i] for i in ch]) for c, n, s, ch in jobs]
        parts = _map_chunks(_sweep_chunk, jobs, threads)
        hits = np.concatenate(parts, axis=0)
        order = np.argsort(np.concatenate([j[3] for j in jobs]), kind="stable")
        hits = hits[order]
        T = hits.shape[0]
        for si, scheme in enumerate(schemes):
            for a, snr in enumerate(cfg.snr_db):
                for b, sir in enumerate(cfg.sir_db):
                    h = hits[:, si, a, b]
                    mean = math.fsum(h) / T
                    se = float(np.std(h, ddof=1) / math.sqrt(T)) if T > 1 else 0.0
                    rows.append(SweepRow(scheme, N, snr, sir, T, mean, se))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def sweep_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HIT_RATES_COLUMNS)
    for r in rows:
        w.writerow([r.scheme, r.N, _fmt(float(r.snr_db)), _fmt(None if r.sir_db is None else float(r.sir_db)),
                    r.trials, _fmt(r.mean), _fmt(r.stderr)])
    return buf.getvalue()


# ---------------------------------------------------------------- detection map

@dataclass
class DetectionRow:
    scheme: str
    kind: str  # truth | hit | miss | fa
    bin: int
    p: int
    q: int


def run_detection_map(cfg: ExperimentConfig) -> tuple[list[DetectionRow], dict]:
    """Single-realization detections for each scheme at one (N, SNR, SIR).

    Every recovered cell is labelled ``hit`` when it lies within tolerance
    of a true target in the same coarse bin and ``fa`` otherwise; true
    targets with no nearby estimate are ``miss``. An empty scene processes
    one noise-only bin, so anything recovered there is a false alarm.
    """
    if len(cfg.pulses) != 1 or len(cfg.snr_db) != 1 or len(cfg.sir_db) != 1:
        raise ConfigError("pulses/snr_db/sir_db: a detection map needs exactly one value each")
    N, snr, sir = cfg.pulses[0], cfg.snr_db[0], cfg.sir_db[0]
    scene = make_scene(cfg, stream(cfg.seed, "scene", N, 0))
    bins = scene.bins() or [1]
    tol = cfg.tolerance
    rows: list[DetectionRow] = []
    # JSON has no infinity; write non-finite levels as strings
    summary: dict = {"N": N, "snr_db": snr if math.isfinite(snr) else str(snr),
                     "sir_db": sir if sir is None or math.isfinite(sir) else str(sir),
                     "K": scene.K, "schemes": {}}
    for scheme in cfg.schemes:
        try:
            plan = make_plan(cfg, scheme, N, stream(cfg.seed, scheme + "/plan", N, 0))
        except InvalidPlanError as exc:
            log.warning("skipping scheme=%s N=%d: %s", scheme, N, exc)
            summary["schemes"][scheme] = {"skipped": str(exc)}
            continue
        A = build_dictionary(plan, cfg.P, cfg.Q)
        n_hit = n_miss = n_fa = 0
        for l_r in bins:
            targets = scene.in_bin(l_r)
            truth = [t.cell for t in targets]
            est = _recover_bin(cfg, A, plan, targets, snr, sir, stream(cfg.seed, scheme + "/noise", N, 0, 0, 0, l_r))
            for p, q in truth:
                rows.append(DetectionRow(scheme, "truth", l_r, p, q))
            for p, q in est:
                ok = any(abs(p - tp) <= tol.range and abs(q - tq) <= tol.doppler for tp, tq in truth)
                rows.append(DetectionRow(scheme, "hit" if ok else "fa", l_r, p, q))
                n_hit += ok
                n_fa += not ok
            for tp, tq in truth:
                if not any(abs(p - tp) <= tol.range and abs(q - tq) <= tol.doppler for p, q in est):
                    rows.append(DetectionRow(scheme, "miss", l_r, tp, tq))
                    n_miss += 1
        entry = {"hits": n_hit, "misses": n_miss, "false_alarms": n_fa}
        if scene.K:
            entry["hit_rate"] = min(1.0, n_hit / scene.K)
        else:
            entry["all_false_alarm"] = True
        summary["schemes"][scheme] = entry
    return rows, summary


def detections_to_csv(rows: list[DetectionRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DETECTIONS_COLUMNS)
    for r in rows:
        w.writerow([r.scheme, r.kind, r.bin, r.p, r.q])
    return buf.getvalue()


# ---------------------------------------------------------------- diagnostics

@dataclass
class DiagnosticsRow:
    seed: int
    N: int
    P: int
    Q: int
    mu: float | None
    K1: int | None
    K2: int | None
    spark_failures: int | None


def run_diagnostics(cfg: ExperimentConfig) -> list[DiagnosticsRow]:
    """Coherence of the configured RaSSteR plans, a sampled spark check on
    continuous-offset dictionaries of the same shape, and the closed-form
    target-count bounds. ``diagnostics.bounds_only`` skips every matrix."""
    dc = cfg.diagnostics
    sub = cfg.rasster_subbands()
    P, Q = cfg.P, cfg.Q
    rows = []
    for N in cfg.pulses:
        if P >= 2 and Q >= 2:
            K1, K2 = coherence_bounds(N, P, Q, dc.delta, sub.cardinality)
        else:
            K1 = K2 = None
        for s in range(dc.seeds):
            seed = cfg.seed + s
            if dc.bounds_only:
                rows.append(DiagnosticsRow(seed, N, P, Q, None, K1, K2, None))
                continue
            try:
                plan = make_plan(cfg, "rasster", N, stream(seed, "rasster/plan", N, 0))
                mu = mutual_coherence(build_dictionary(plan, P, Q)).mu if P * Q > 1 else None
            except RassterError as exc:
                log.warning("coherence skipped for seed=%d N=%d: %s", seed, N, exc)
                mu = None
            fails = None
            if N <= P * Q:
                rng = np.random.default_rng(stream(seed, "spark", N))
                fails = _spark_trial(rng, N, P, Q, sub, dc.spark_max_subsets)
            else:
                log.warning("spark check skipped for N=%d > P*Q=%d", N, P * Q)
            rows.append(DiagnosticsRow(seed, N, P, Q, mu, K1, K2, fails))
    return rows


def _spark_trial(rng, N, P, Q, sub, max_subsets) -> int:
    """Count singular N x N submatrices for one continuous-offset draw."""
    d = continuous_offsets(rng, N, sub)
    A = dictionary_from_offsets(d, P, Q).A
    n_atoms = P * Q
    if math.comb(n_atoms, N) <= max_subsets:
        subsets = np.array(list(combinations(range(n_atoms), N)), dtype=np.int64)
    else:
        subsets = np.argsort(rng.random((max_subsets, n_atoms)), axis=1)[:, :N]
    smin = min_singular_values(A, subsets)
    return int(np.count_nonzero(smin <= 1e-8 * math.sqrt(N)))


def diagnostics_to_csv(rows: list[DiagnosticsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DIAGNOSTICS_COLUMNS)
    for r in rows:
        w.writerow([r.seed, r.N, r.P, r.Q, _fmt(r.mu), _fmt(r.K1), _fmt(r.K2), _fmt(r.spark_failures)])
    return buf.getvalue()


# ---------------------------------------------------------------- plans on disk

def emit_plans(cfg: ExperimentConfig, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for scheme in cfg.schemes:
        for N in cfg.pulses:
            try:
                plan = make_plan(cfg, scheme, N, cfg.seed)
            except InvalidPlanError as exc:
                log.warning("skipping scheme=%s N=%d: %s", scheme, N, exc)
                continue
            stem = out / f"plan_{scheme}_N{N}"
            stem.with_suffix(".json").write_text(plan_to_json(plan, indent=2) + "\n")
            stem.with_suffix(".csv").write_text(write_plan_csv(plan))
            written += [stem.with_suffix(".json"), stem.with_suffix(".csv")]
    return written


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)
