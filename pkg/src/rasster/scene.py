"""High-resolution range/Doppler grid and on-grid target scenes.

Each coarse range bin of width ``c T_p / 2`` is refined into a ``P x Q``
grid of high-resolution range cells (``delta_R = R_u / P``) and velocity
cells (``delta_nu = nu_u / Q``). Range indices run over ``0 .. P-1``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleSceneError, InvalidGridError
from .waveform import CarrierGrid

C = 3e8  # m/s

__all__ = [
    "C",
    "GridParams",
    "Target",
    "TargetScene",
    "Layout",
    "derive_grid",
    "decode_physical",
    "reflectivity_from_gamma",
    "gamma_from_reflectivity",
    "random_scene",
    "scene_to_text",
    "scene_from_text",
]


@dataclass(frozen=True)
class GridParams:
    P: int
    Q: int
    R_u: float
    nu_u: float
    delta_R: float
    delta_nu: float
    L_r: int
    f_c: float
    cpi: float | None = None


def derive_grid(grid: CarrierGrid, P: int, Q: int, cpi: float | None = None) -> GridParams:
    """Unambiguous spans and cell sizes of the fine grid for ``grid``.

    ``cpi`` is carried along for reporting only; it does not enter any
    of the derived quantities.
    """
    if P < 1 or Q < 1:
        raise InvalidGridError(f"P and Q must be >= 1, got P={P}, Q={Q}")
    if grid.delta_f * grid.T_p > 1.0 + 1e-12:
        raise InvalidGridError("delta_f > 1/T_p")
    R_u = C / (2 * grid.delta_f)
    nu_u = C / (2 * grid.f_c * grid.T)
    # ratio like 62.5/0.4 lands a hair under the integer in binary
    L_r = int(math.floor(grid.T / grid.T_p + 1e-9))
    return GridParams(
        P=int(P), Q=int(Q), R_u=R_u, nu_u=nu_u, delta_R=R_u / P, delta_nu=nu_u / Q,
        L_r=L_r, f_c=grid.f_c, cpi=cpi,
    )


@dataclass(frozen=True)
class Target:
    n_k: int
    m_k: int
    gamma: complex
    coarse_bin: int = 1

    @property
    def cell(self) -> tuple[int, int]:
        return (self.n_k, self.m_k)


@dataclass(frozen=True)
class TargetScene:
    targets: tuple[Target, ...]
    grid: GridParams

    def __post_init__(self):
        ts = tuple(self.targets)
        object.__setattr__(self, "targets", ts)
        g = self.grid
        seen = set()
        for t in ts:
            if not (0 <= t.n_k < g.P and 0 <= t.m_k < g.Q):
                raise InfeasibleSceneError(f"target cell {t.cell} outside the {g.P}x{g.Q} grid")
            if not (1 <= t.coarse_bin <= g.L_r):
                raise InfeasibleSceneError(f"coarse bin {t.coarse_bin} outside [1, {g.L_r}]")
            if not (np.isfinite(t.gamma) and t.gamma != 0):
                raise InfeasibleSceneError(f"target amplitude must be finite and nonzero, got {t.gamma}")
            key = (t.coarse_bin, t.n_k, t.m_k)
            if key in seen:
                raise InfeasibleSceneError(f"two targets share cell {key}")
            seen.add(key)

    @property
    def K(self) -> int:
        return len(self.targets)

    def bins(self) -> list[int]:
        return sorted({t.coarse_bin for t in self.targets})

    def in_bin(self, l_r: int) -> list[Target]:
        return [t for t in self.targets if t.coarse_bin == l_r]


def decode_physical(target: Target, grid: GridParams) -> tuple[float, float]:
    """(range within the coarse bin in m, radial velocity in m/s)."""
    return target.n_k * grid.delta_R, target.m_k * grid.delta_nu


def reflectivity_from_gamma(gamma, R_k, f_c):
    return np.asarray(gamma) * np.exp(1j * 4 * np.pi * f_c * np.asarray(R_k) / C)


def gamma_from_reflectivity(beta, R_k, f_c):
    return np.asarray(beta) * np.exp(-1j * 4 * np.pi * f_c * np.asarray(R_k) / C)


class Layout(str, enum.Enum):
    WIDELY = "widely"
    CLUSTERED = "clustered"
    SINGLE_BIN = "single_bin"


def _place(rng, grid: GridParams, k: int, static: bool) -> list[tuple[int, int]]:
    if static:
        if k > grid.P:
            raise InfeasibleSceneError(f"{k} static targets do not fit in {grid.P} range cells")
        return [(int(p), 0) for p in rng.choice(grid.P, size=k, replace=False)]
    if k > grid.P * grid.Q:
        raise InfeasibleSceneError(f"{k} targets do not fit in a {grid.P}x{grid.Q} grid")
    cells = rng.choice(grid.P * grid.Q, size=k, replace=False)
    return [(int(u) // grid.Q, int(u) % grid.Q) for u in cells]


def random_scene(
    grid: GridParams,
    K: int,
    layout: Layout | str = Layout.SINGLE_BIN,
    seed=None,
    per_bin: int = 2,
    static: bool = False,
    bins: Sequence[int] | None = None,
) -> TargetScene:
    """Random on-grid scene with unit-modulus, uniform-phase amplitudes.

    ``WIDELY`` puts every target in its own coarse bin, ``CLUSTERED`` puts
    ``per_bin`` targets per bin, ``SINGLE_BIN`` puts all of them in one.
    Coarse bins are drawn at random unless ``bins`` is given. ``static``
    pins every target to zero velocity.
    """
    layout = Layout(layout)
    rng = np.random.default_rng(seed)
    if K < 0:
        raise InfeasibleSceneError("K must be nonnegative")
    if K == 0:
        return TargetScene((), grid)

    if layout is Layout.WIDELY:
        counts = [1] * K
    elif layout is Layout.CLUSTERED:
        if per_bin < 1:
            raise InfeasibleSceneError("per_bin must be >= 1")
        counts = [per_bin] * (K // per_bin) + ([K % per_bin] if K % per_bin else [])
    else:
        counts = [K]

    if bins is None:
        if len(counts) > grid.L_r:
            raise InfeasibleSceneError(f"need {len(counts)} coarse bins, only {grid.L_r} exist")
        chosen = sorted(int(b) + 1 for b in rng.choice(grid.L_r, size=len(counts), replace=False))
    else:
        chosen = [int(b) for b in bins]
        if len(chosen) != len(counts):
            raise InfeasibleSceneError(f"layout needs {len(counts)} bins, got {len(chosen)}")

    targets = []
    for l_r, k in zip(chosen, counts):
        cells = _place(rng, grid, k, static)
        phases = rng.uniform(0.0, 2 * np.pi, size=k)
        for (p, q), ph in zip(cells, phases):
            targets.append(Target(p, q, complex(np.exp(1j * ph)), l_r))
    return TargetScene(tuple(targets), grid)


_SCENE_HEADER = ["l_r", "n_k", "m_k", "re_gamma", "im_gamma"]


def scene_to_text(scene: TargetScene) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_SCENE_HEADER)
    for t in scene.targets:
        g = complex(t.gamma)
        w.writerow([t.coarse_bin, t.n_k, t.m_k, repr(g.real), repr(g.imag)])
    return buf.getvalue()


def scene_from_text(text: str, grid: GridParams) -> TargetScene:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != _SCENE_HEADER:
        raise InfeasibleSceneError(f"scene file must start with header {','.join(_SCENE_HEADER)}")
    targets = []
    for row in rows[1:]:
        if not row:
            continue
        l_r, n, m, re, im = row
        targets.append(Target(int(n), int(m), complex(float(re), float(im)), int(l_r)))
    return TargetScene(tuple(targets), grid)
