"""Density of the excursion time average and its conditional law.

Two independent meanders m, m_hat and a Brownian bridge b between their
rescaled endpoints form

    v_t = m_{3t} / sqrt(3)               t in [0, 1/3]
    v_t = b_t                            t in [1/3, 2/3]
    v_t = m_hat_{3(1-t)} / sqrt(3)       t in [2/3, 1]

and a quadratic shift on the middle third gives ``V^c`` with average ``c``.
The density of the excursion average is
``27 sqrt(6 / pi^3) E[rho^c(V^c) 1{V^c >= 0}]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .conditioning import SQRT12, excursion_measures, pair_path
from .montecarlo import (
    AreaEstimate,
    DensityTable,
    WeightedEnsemble,
    check_c_values,
    formula_table,
    run_chunks,
)
from .paths import (
    Path,
    RngStream,
    TimeGrid,
    as_generator,
    barrier,
    check_monitor,
    make_grid,
    sample_bm,
    sample_bridge,
    sample_meander,
    time_average,
    trapezoid,
)

__all__ = [
    "PREFACTOR",
    "DEFAULT_C_GRID",
    "ExcursionTriple",
    "default_grid",
    "sample_triple",
    "build_v",
    "build_Vc",
    "rho_c_weight",
    "rho2_weight",
    "sample_glued_bm",
    "v_summaries",
    "weights_from_summaries",
    "density_excursion_avg",
    "density_table_excursion",
    "sample_conditional_excursion",
]

PREFACTOR = 27.0 * math.sqrt(6.0 / math.pi**3)
DEFAULT_C_GRID = (0.0, 2.5, 0.02)
THIRD, TWO_THIRDS = 1.0 / 3.0, 2.0 / 3.0


def default_grid(n: int = 1024) -> TimeGrid:
    return make_grid(n, [THIRD, TWO_THIRDS])


@dataclass(frozen=True, eq=False)
class ExcursionTriple:
    """Meander ``m`` on the tripled first third, meander ``m_hat`` on the
    reversed tripled last third, and a bridge on the middle third of the
    full grid (NaN elsewhere) pinned at their endpoints over sqrt(3)."""

    m: Path
    m_hat: Path
    bridge: Path

    def __post_init__(self):
        lo = self.bridge.at(THIRD)
        hi = self.bridge.at(TWO_THIRDS)
        if not (
            np.array_equal(lo, self.m.values[..., -1] / math.sqrt(3.0))
            and np.array_equal(hi, self.m_hat.values[..., -1] / math.sqrt(3.0))
        ):
            raise ValueError("bridge endpoints must equal the meander endpoints over sqrt(3)")


def sample_triple(grid: TimeGrid, rng, size: Optional[int] = None) -> ExcursionTriple:
    gen = as_generator(rng)
    _, left = grid.segment(0.0, THIRD)
    _, right = grid.segment(TWO_THIRDS, 1.0, reverse=True)
    m = sample_meander(left, gen, size)
    m_hat = sample_meander(right, gen, size)
    b = sample_bridge(
        grid,
        m.values[..., -1] / math.sqrt(3.0),
        m_hat.values[..., -1] / math.sqrt(3.0),
        (THIRD, TWO_THIRDS),
        gen,
        size,
    )
    return ExcursionTriple(m, m_hat, b)


def build_v(triple: ExcursionTriple, grid: TimeGrid) -> Path:
    left, left_grid = grid.segment(0.0, THIRD)
    mid = slice(grid.index(THIRD), grid.index(TWO_THIRDS) + 1)
    right, right_grid = grid.segment(TWO_THIRDS, 1.0, reverse=True)
    if not triple.m.grid.same_as(left_grid) or not triple.m_hat.grid.same_as(right_grid):
        raise ValueError("meanders must live on the rescaled outer thirds of the grid")
    if not triple.bridge.grid.same_as(grid):
        raise ValueError("bridge must live on the full grid")
    out = np.array(triple.bridge.values)
    out[..., left] = triple.m.values / math.sqrt(3.0)
    out[..., mid] = triple.bridge.values[..., mid]
    out[..., right] = triple.m_hat.values[..., ::-1] / math.sqrt(3.0)
    return Path(grid, out)


def middle_third_profile(grid: TimeGrid) -> np.ndarray:
    """``18 (9 t (1 - t) - 2)`` on [1/3, 2/3], zero outside, scaled to unit trapezoid integral."""
    t = grid.times
    g = np.where((t >= THIRD) & (t <= TWO_THIRDS), 18 * (9 * t * (1 - t) - 2), 0.0)
    g[[grid.index(THIRD), grid.index(TWO_THIRDS)]] = 0.0
    return g / trapezoid(g, t)


def build_Vc(v: Path, c: float) -> Path:
    corr = np.asarray(c - time_average(v))[..., None]
    return Path(v.grid, v.values + middle_third_profile(v.grid) * corr)


def _outer_functional(path: Path):
    """``int_0^{1/3} (w_r + w_{1-r}) dr + (w_{1/3} + w_{2/3}) / 6``."""
    lam, _ = excursion_measures()
    return pair_path(path, lam) / SQRT12


def _gap(path: Path):
    return path.at(TWO_THIRDS) - path.at(THIRD)


def rho_c_weight(path: Path, c: float):
    """``exp(-162 (H - c)^2 - 1.5 (w_{2/3} - w_{1/3})^2)``, without any indicator."""
    out = np.exp(-162.0 * (_outer_functional(path) - c) ** 2 - 1.5 * _gap(path) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def rho2_weight(path: Path):
    out = math.sqrt(3.0) * np.exp(-1.5 * _gap(path) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def excursion_weight(Vc: Path, c: float, monitor: str = "corrected"):
    """``rho^c(V^c)`` times the nonnegativity indicator."""
    floor = barrier(Vc.grid, THIRD, TWO_THIRDS, monitor)
    ok = np.all(Vc.values >= floor, axis=-1)
    out = rho_c_weight(Vc, c) * ok
    return float(out) if np.ndim(out) == 0 else out


def sample_glued_bm(grid: TimeGrid, rng, size: Optional[int] = None) -> Path:
    """Brownian motions on the outer thirds (the last one run backwards from
    t = 1) joined by a Brownian bridge across the middle third."""
    gen = as_generator(rng)
    _, left = grid.segment(0.0, THIRD)
    _, right = grid.segment(TWO_THIRDS, 1.0, reverse=True)
    # outer pieces have duration 1/3: scale unit-time motions by 1/sqrt(3)
    B = sample_bm(left, gen, size).values / math.sqrt(3.0)
    B_hat = sample_bm(right, gen, size).values / math.sqrt(3.0)
    b = sample_bridge(grid, B[..., -1], B_hat[..., -1], (THIRD, TWO_THIRDS), gen, size)
    out = np.array(b.values)
    out[..., grid.segment(0.0, THIRD)[0]] = B
    out[..., grid.segment(TWO_THIRDS, 1.0)[0]] = B_hat[..., ::-1]
    return Path(grid, out)


def v_summaries(v: Path, monitor: str = "corrected") -> dict[str, np.ndarray]:
    grid = v.grid
    g = middle_third_profile(grid)
    floor = barrier(grid, THIRD, TWO_THIRDS, monitor)
    A = np.atleast_1d(time_average(v))
    vals = np.atleast_2d(v.values)
    active = g > 0
    thr = np.max(A[:, None] + (floor[active] - vals[:, active]) / g[active], axis=-1)
    stuck = np.any(vals[:, ~active] < floor[~active], axis=-1)
    return {
        "H": np.atleast_1d(_outer_functional(v)),
        "gap": np.atleast_1d(_gap(v)),
        "A": A,
        "threshold": np.where(stuck, np.inf, thr),
        "v_half": vals[:, grid.index(0.5)] if grid.contains(0.5) else np.full(A.shape, np.nan),
    }


def weights_from_summaries(summ: dict[str, np.ndarray], c) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    H = summ["H"][:, None]
    gap = summ["gap"][:, None]
    expo = -162.0 * (H - c) ** 2 - 1.5 * gap**2
    return np.exp(expo) * (c >= summ["threshold"][:, None])


def sample_v(grid: TimeGrid, rng, size: Optional[int] = None) -> Path:
    return build_v(sample_triple(grid, rng, size), grid)


def simulate_summaries(
    n_paths: int, grid: TimeGrid, rng, n_chunks: int = 1, monitor: str = "corrected"
) -> dict[str, np.ndarray]:
    check_monitor(monitor)

    def fn(k, gen):
        return v_summaries(sample_v(grid, gen, k), monitor)

    return run_chunks(fn, n_paths, rng, n_chunks)


def table_from_summaries(summ: dict[str, np.ndarray], c_values: Sequence[float]) -> DensityTable:
    return formula_table(weights_from_summaries, summ, c_values, PREFACTOR)


def density_table_excursion(
    c_values: Sequence[float],
    n_paths: int,
    grid: TimeGrid,
    rng: Union[RngStream, int],
    n_chunks: int = 1,
    monitor: str = "corrected",
) -> DensityTable:
    c = check_c_values(c_values)
    return table_from_summaries(simulate_summaries(n_paths, grid, rng, n_chunks, monitor), c)


def density_excursion_avg(
    c: float,
    n_paths: int,
    grid: TimeGrid,
    rng: Union[RngStream, int],
    n_chunks: int = 1,
    monitor: str = "corrected",
) -> AreaEstimate:
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    return density_table_excursion([c], n_paths, grid, rng, n_chunks, monitor).estimates()[0]


def sample_conditional_excursion(
    c: float,
    n_paths: int,
    grid: TimeGrid,
    rng: Union[RngStream, int],
    n_chunks: int = 1,
    monitor: str = "corrected",
) -> WeightedEnsemble:
    """Self-normalized ``V^c`` ensemble for the excursion given its average ``c``."""
    if not c > 0:
        raise ValueError("the conditional law is defined for c > 0 only")
    check_monitor(monitor)

    def fn(k, gen):
        return {"v": sample_v(grid, gen, k).values}

    v = Path(grid, run_chunks(fn, n_paths, rng, n_chunks)["v"])
    Vc = build_Vc(v, c)
    w = np.atleast_1d(excursion_weight(Vc, c, monitor))
    total = w.sum()
    if total <= 0:
        raise ValueError(f"all {n_paths} weights are zero at c={c}; increase n_paths")
    keep = w > 0
    return WeightedEnsemble(Vc[keep], w[keep] / total, float(total / n_paths), n_paths, float(c))
