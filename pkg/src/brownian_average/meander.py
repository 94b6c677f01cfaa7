"""Density of the meander time average and its conditional law.

A meander m and an independent Brownian motion are glued into

    u_t = m_{2t} / sqrt(2)                    t in [0, 1/2]
    u_t = m_1 / sqrt(2) + B_{t - 1/2}         t in [1/2, 1]

and shifted on [1/2, 1] by a quadratic profile so that the time average is
exactly ``c``. The density of the meander average at ``c`` is
``sqrt(24/pi) E[exp(-12 (G - c)^2) 1{U^c >= 0}]`` with
``G = int_0^{1/2} (U_r + U_{1/2}) dr``.

Because the profile is nonnegative on [1/2, 1], the event ``U^c >= 0`` is
``c >= threshold(u)`` for a per-path threshold, so one batch of ``u`` paths
serves every ``c`` (common random numbers).
"""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from .conditioning import SQRT3, meander_measures, pair_path
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
    barrier,
    check_monitor,
    make_grid,
    sample_bm,
    sample_meander,
    time_average,
    trapezoid,
)

__all__ = [
    "PREFACTOR",
    "DEFAULT_C_GRID",
    "default_grid",
    "build_u",
    "build_Uc",
    "meander_weight",
    "sample_u",
    "u_summaries",
    "weights_from_summaries",
    "density_meander_avg",
    "density_table_meander",
    "sample_conditional_meander",
]

PREFACTOR = math.sqrt(24.0 / math.pi)
DEFAULT_C_GRID = (0.0, 3.0, 0.02)


def default_grid(n: int = 1024) -> TimeGrid:
    return make_grid(n, [0.5])


def second_half_profile(grid: TimeGrid) -> np.ndarray:
    """``12 t (2 - t) - 9`` on [1/2, 1], zero before, scaled to unit trapezoid integral."""
    t = grid.times
    g = np.where(t >= 0.5, 12 * t * (2 - t) - 9, 0.0)
    g[grid.index(0.5)] = 0.0
    return g / trapezoid(g, t)


def build_u(meander: Path, bm: Path, grid: TimeGrid) -> Path:
    """Glue a meander (read at ``2t``) and a Brownian motion into ``u``.

    ``bm`` is a standard Brownian motion on [0, 1] read at ``2t - 1`` and
    scaled by ``1/sqrt(2)``, which has the law of ``B_{t - 1/2}`` on [1/2, 1].
    """
    left, left_grid = grid.segment(0.0, 0.5)
    right, right_grid = grid.segment(0.5, 1.0)
    if not meander.grid.same_as(left_grid):
        raise ValueError("meander must live on the doubled first half of the grid")
    if not bm.grid.same_as(right_grid):
        raise ValueError("bm must live on the doubled second half of the grid")
    shape = np.broadcast_shapes(meander.values.shape[:-1], bm.values.shape[:-1])
    out = np.empty(shape + (len(grid),))
    out[..., left] = meander.values / math.sqrt(2.0)
    out[..., right] = (meander.values[..., -1:] + bm.values) / math.sqrt(2.0)
    return Path(grid, out)


def build_Uc(u: Path, c: float) -> Path:
    """Shift ``u`` on [1/2, 1] so that its trapezoidal time average equals ``c``."""
    corr = np.asarray(c - time_average(u))[..., None]
    return Path(u.grid, u.values + second_half_profile(u.grid) * corr)


def _first_half_functional(path: Path):
    lam, _ = meander_measures()
    return pair_path(path, lam) / SQRT3


def meander_weight(Uc: Path, c: float, monitor: str = "corrected"):
    """``exp(-12 (G - c)^2)`` if the path stays nonnegative, else 0."""
    G = _first_half_functional(Uc)
    floor = barrier(Uc.grid, 0.5, 1.0, monitor)
    ok = np.all(Uc.values >= floor, axis=-1)
    out = np.exp(-12.0 * (G - c) ** 2) * ok
    return float(out) if np.ndim(out) == 0 else out


def sample_u(grid: TimeGrid, rng, size=None) -> Path:
    _, left_grid = grid.segment(0.0, 0.5)
    _, right_grid = grid.segment(0.5, 1.0)
    m = sample_meander(left_grid, rng, size)
    b = sample_bm(right_grid, rng, size)
    return build_u(m, b, grid)


def u_summaries(u: Path, monitor: str = "corrected") -> dict[str, np.ndarray]:
    """Per-path quantities that determine the weight at every ``c``.

    ``threshold`` is the smallest ``c`` for which ``U^c`` clears the barrier.
    """
    grid = u.grid
    g = second_half_profile(grid)
    floor = barrier(grid, 0.5, 1.0, monitor)
    A = np.atleast_1d(time_average(u))
    vals = np.atleast_2d(u.values)
    active = g > 0
    thr = np.max(A[:, None] + (floor[active] - vals[:, active]) / g[active], axis=-1)
    # first half is never corrected; it must already clear its barrier
    stuck = np.any(vals[:, ~active] < floor[~active], axis=-1)
    thr = np.where(stuck, np.inf, thr)
    return {
        "G": np.atleast_1d(_first_half_functional(u)),
        "A": A,
        "threshold": thr,
        "u_half": vals[:, grid.index(0.5)],
    }


def weights_from_summaries(summ: dict[str, np.ndarray], c) -> np.ndarray:
    """Unnormalized weights, shape ``(n_paths, len(c))``."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    G = summ["G"][:, None]
    return np.exp(-12.0 * (G - c) ** 2) * (c >= summ["threshold"][:, None])


def _summary_fn(grid: TimeGrid, monitor: str):
    def fn(k: int, gen: np.random.Generator) -> dict[str, np.ndarray]:
        return u_summaries(sample_u(grid, gen, k), monitor)

    return fn


def simulate_summaries(
    n_paths: int, grid: TimeGrid, rng, n_chunks: int = 1, monitor: str = "corrected"
) -> dict[str, np.ndarray]:
    check_monitor(monitor)
    return run_chunks(_summary_fn(grid, monitor), n_paths, rng, n_chunks)


def table_from_summaries(summ: dict[str, np.ndarray], c_values: Sequence[float]) -> DensityTable:
    return formula_table(weights_from_summaries, summ, c_values, PREFACTOR)


def density_table_meander(
    c_values: Sequence[float],
    n_paths: int,
    grid: TimeGrid,
    rng: Union[RngStream, int],
    n_chunks: int = 1,
    monitor: str = "corrected",
) -> DensityTable:
    c = check_c_values(c_values)
    summ = simulate_summaries(n_paths, grid, rng, n_chunks, monitor)
    return table_from_summaries(summ, c)


def density_meander_avg(
    c: float,
    n_paths: int,
    grid: TimeGrid,
    rng: Union[RngStream, int],
    n_chunks: int = 1,
    monitor: str = "corrected",
) -> AreaEstimate:
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    table = density_table_meander([c], n_paths, grid, rng, n_chunks, monitor)
    return table.estimates()[0]


def sample_conditional_meander(
    c: float,
    n_paths: int,
    grid: TimeGrid,
    rng: Union[RngStream, int],
    n_chunks: int = 1,
    monitor: str = "corrected",
) -> WeightedEnsemble:
    """Self-normalized ``U^c`` ensemble for the meander given its average ``c``."""
    if not c > 0:
        raise ValueError("the conditional law is defined for c > 0 only")
    check_monitor(monitor)

    def fn(k, gen):
        return {"u": sample_u(grid, gen, k).values}

    u = Path(grid, run_chunks(fn, n_paths, rng, n_chunks)["u"])
    Uc = build_Uc(u, c)
    w = np.atleast_1d(meander_weight(Uc, c, monitor))
    total = w.sum()
    if total <= 0:
        raise ValueError(f"all {n_paths} weights are zero at c={c}; increase n_paths")
    keep = w > 0
    return WeightedEnsemble(Uc[keep], w[keep] / total, float(total / n_paths), n_paths, float(c))
