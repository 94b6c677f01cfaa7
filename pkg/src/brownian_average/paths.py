"""Time grids, paths, random streams and exact samplers on a grid.

All samplers are vectorized: pass ``size=n`` to get ``n`` independent paths
stacked along the first axis of ``Path.values``; ``size=None`` returns a
single path with 1-d values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "TimeGrid",
    "Path",
    "RngStream",
    "as_generator",
    "make_grid",
    "sample_bm",
    "sample_bridge",
    "sample_meander",
    "sample_excursion",
    "time_average",
    "min_value",
    "trapezoid",
    "barrier",
    "MONITORS",
]

GRID_TOL = 1e-12
# -zeta(1/2) / sqrt(2 pi): shift turning discrete barrier monitoring into continuous
BARRIER_SHIFT = 0.5825971579390106
MONITORS = ("grid", "corrected")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing times in [0, 1] with exact endpoints 0 and 1."""

    times: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a grid needs at least two times")
        if times[0] != 0.0 or times[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")
        if np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return self.times.size

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    def find(self, t: float) -> Optional[int]:
        i = int(np.searchsorted(self.times, t - GRID_TOL))
        if i < self.times.size and abs(self.times[i] - t) <= GRID_TOL:
            return i
        return None

    def contains(self, t: float) -> bool:
        return self.find(t) is not None

    def index(self, t: float) -> int:
        i = self.find(t)
        if i is None:
            raise ValueError(f"time {t!r} is not a grid point")
        return i

    def segment(self, t0: float, t1: float, reverse: bool = False) -> tuple[slice, "TimeGrid"]:
        """Grid points in [t0, t1] and their affine image on [0, 1].

        With ``reverse=True`` the image is ``(t1 - t) / (t1 - t0)``, sorted
        ascending, i.e. the segment read backwards in time.
        """
        i0, i1 = self.index(t0), self.index(t1)
        if i1 <= i0:
            raise ValueError("segment must have positive length")
        local = self.times[i0 : i1 + 1]
        if reverse:
            s = ((t1 - local) / (t1 - t0))[::-1]
        else:
            s = (local - t0) / (t1 - t0)
        s = s.copy()
        s[0], s[-1] = 0.0, 1.0
        return slice(i0, i1 + 1), TimeGrid(s)

    def same_as(self, other: "TimeGrid") -> bool:
        return self is other or np.array_equal(self.times, other.times)


@dataclass(frozen=True, eq=False)
class Path:
    """Values of one or more paths on a grid; the last axis runs over times."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape[-1:] != (len(self.grid),):
            raise ValueError(
                f"values have {values.shape[-1:]} points, grid has {len(self.grid)}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def n_paths(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[0]

    def at(self, t: float) -> Union[float, np.ndarray]:
        return self.values[..., self.grid.index(t)]

    def __getitem__(self, item) -> "Path":
        if self.values.ndim == 1:
            raise IndexError("single path cannot be indexed")
        return Path(self.grid, self.values[item])

    def __iter__(self):
        if self.values.ndim == 1:
            yield self
        else:
            for row in self.values:
                yield Path(self.grid, row)


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    ``spawn(i)`` derives statistically independent substreams for parallel
    chunks; the same key always yields the same bits.
    """

    seed: int
    stream_id: int = 0
    subkey: tuple[int, ...] = field(default=())

    def spawn(self, i: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.subkey + (int(i),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            int(self.seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(self.stream_id, *self.subkey)
        )
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng: Union[RngStream, np.random.Generator, int]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def make_grid(n: int, anchors: Sequence[float] = ()) -> TimeGrid:
    """Uniform grid with ``n`` steps merged with exact anchor times."""
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    anchors = [float(a) for a in anchors]
    for a in anchors:
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"anchor {a} outside [0, 1]")
    anchors = [0.0 if a <= GRID_TOL else 1.0 if a >= 1.0 - GRID_TOL else a for a in anchors]
    points: list[float] = []
    for a in sorted(set(anchors)):
        if not points or a - points[-1] > GRID_TOL:
            points.append(a)
    anchors = list(points)
    # anchors win over nearby uniform points so they stay exact
    for t in np.linspace(0.0, 1.0, int(n) + 1):
        if not any(abs(t - a) <= GRID_TOL for a in anchors):
            points.append(float(t))
    return TimeGrid(np.array(sorted(points)))


def trapezoid(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    dt = np.diff(times)
    return 0.5 * np.sum((values[..., 1:] + values[..., :-1]) * dt, axis=-1)


def _shape(size: Optional[int], n: int) -> tuple[int, ...]:
    return (n,) if size is None else (int(size), n)


def _brownian(times: np.ndarray, gen: np.random.Generator, size: Optional[int]) -> np.ndarray:
    dt = np.diff(times)
    z = gen.standard_normal(_shape(size, dt.size)) * np.sqrt(dt)
    out = np.zeros(_shape(size, times.size))
    np.cumsum(z, axis=-1, out=out[..., 1:])
    return out


def _standard_bridge(times: np.ndarray, gen: np.random.Generator, size: Optional[int]) -> np.ndarray:
    """Bridge 0 -> 0 over ``[times[0], times[-1]]``."""
    tau = times - times[0]
    w = _brownian(tau, gen, size)
    out = w - (tau / tau[-1]) * w[..., -1:]
    out[..., -1] = 0.0
    return out


def sample_bm(grid: TimeGrid, rng, size: Optional[int] = None) -> Path:
    return Path(grid, _brownian(grid.times, as_generator(rng), size))


def sample_bridge(
    grid: TimeGrid,
    a=0.0,
    b=0.0,
    span: tuple[float, float] = (0.0, 1.0),
    rng=0,
    size: Optional[int] = None,
) -> Path:
    """Brownian bridge from ``a`` to ``b`` over ``span``.

    ``a`` and ``b`` may be arrays of shape ``(size,)``. Grid points outside
    the span are filled with NaN.
    """
    t0, t1 = span
    if not t0 < t1:
        raise ValueError("span must satisfy t0 < t1")
    i0, i1 = grid.index(t0), grid.index(t1)
    local = grid.times[i0 : i1 + 1]
    frac = (local - t0) / (t1 - t0)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    inner = a + frac * (b - a) + _standard_bridge(local, as_generator(rng), size)
    inner = np.broadcast_to(inner, _shape(size, local.size)).copy()
    inner[..., 0] = a[..., 0]
    inner[..., -1] = b[..., 0]
    out = np.full(_shape(size, len(grid)), np.nan)
    out[..., i0 : i1 + 1] = inner
    return Path(grid, out)


def sample_meander(grid: TimeGrid, rng, size: Optional[int] = None) -> Path:
    """Brownian meander: Rayleigh endpoint r, then a 3-d Bessel bridge 0 -> r."""
    gen = as_generator(rng)
    t = grid.times
    r = gen.rayleigh(size=None if size is None else int(size))
    r = np.asarray(r)[..., None]
    x = r * t + _standard_bridge(t, gen, size)
    y = _standard_bridge(t, gen, size)
    z = _standard_bridge(t, gen, size)
    return Path(grid, np.sqrt(x * x + y * y + z * z))


def sample_excursion(grid: TimeGrid, rng, size: Optional[int] = None) -> Path:
    """Normalized excursion as the norm of a 3-d Brownian bridge 0 -> 0."""
    gen = as_generator(rng)
    t = grid.times
    x = _standard_bridge(t, gen, size)
    y = _standard_bridge(t, gen, size)
    z = _standard_bridge(t, gen, size)
    return Path(grid, np.sqrt(x * x + y * y + z * z))


def time_average(path: Path) -> Union[float, np.ndarray]:
    """Trapezoidal integral of the path over [0, 1]."""
    out = trapezoid(path.values, path.times)
    return float(out) if np.ndim(out) == 0 else out


def min_value(path: Path) -> Union[float, np.ndarray]:
    out = np.min(path.values, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def check_monitor(monitor: str) -> None:
    if monitor not in MONITORS:
        raise ValueError(f"monitor must be one of {MONITORS}, got {monitor!r}")


def barrier(grid: TimeGrid, start: float, stop: float, monitor: str = "corrected") -> np.ndarray:
    """Lower barrier at grid points in ``(start, stop]``, zero elsewhere.

    ``"grid"`` checks nonnegativity at grid points only. ``"corrected"``
    raises the barrier by ``0.5826 sqrt(dt)`` so that monitoring a
    unit-variance diffusion at grid points matches continuous monitoring up
    to o(sqrt(dt)).
    """
    check_monitor(monitor)
    out = np.zeros(len(grid))
    if monitor == "corrected":
        i0, i1 = grid.index(start), grid.index(stop)
        out[i0 + 1 : i1 + 1] = BARRIER_SHIFT * np.sqrt(grid.dt[i0:i1])
    return out
