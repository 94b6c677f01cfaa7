"""Chunked Monte Carlo with reproducible substreams, and result containers."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .paths import Path, RngStream

__all__ = [
    "AreaEstimate",
    "DensityTable",
    "WeightedEnsemble",
    "chunk_sizes",
    "run_chunks",
    "as_stream",
    "BATCH_SIZE",
]

# paths generated per vectorized batch inside a chunk; part of the RNG layout
BATCH_SIZE = 4096


@dataclass(frozen=True)
class AreaEstimate:
    c: float
    density_value: float
    std_error: float
    n_paths: int

    def __post_init__(self):
        if self.density_value < 0 or self.std_error < 0:
            raise ValueError("density and standard error must be nonnegative")


MeanderAreaEstimate = AreaEstimate
ExcursionAreaEstimate = AreaEstimate


@dataclass(frozen=True, eq=False)
class DensityTable:
    c_values: np.ndarray
    densities: np.ndarray
    std_errors: np.ndarray
    method: str = "formula"
    n_paths: int = 0

    def __post_init__(self):
        c = np.asarray(self.c_values, dtype=float)
        d = np.asarray(self.densities, dtype=float)
        s = np.asarray(self.std_errors, dtype=float)
        if not (c.shape == d.shape == s.shape):
            raise ValueError("c_values, densities and std_errors must have equal lengths")
        if np.any(np.diff(c) < 0):
            raise ValueError("c_values must be sorted")
        if np.any(d < 0):
            raise ValueError("densities must be nonnegative")
        if self.method not in ("formula", "kde", "histogram"):
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "c_values", c)
        object.__setattr__(self, "densities", d)
        object.__setattr__(self, "std_errors", s)

    def __len__(self) -> int:
        return self.c_values.size

    def total_mass(self) -> float:
        return float(np.trapezoid(self.densities, self.c_values))

    def estimates(self) -> list[AreaEstimate]:
        return [
            AreaEstimate(float(c), float(d), float(s), self.n_paths)
            for c, d, s in zip(self.c_values, self.densities, self.std_errors)
        ]


@dataclass(frozen=True, eq=False)
class WeightedEnsemble:
    """Paths with self-normalized importance weights.

    ``normalizer`` is the mean unnormalized weight over all proposals,
    including any that were dropped for having zero weight.
    """

    paths: Path
    weights: np.ndarray
    normalizer: float = float("nan")
    n_proposals: int = 0
    c: Optional[float] = field(default=None)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.paths.n_paths,):
            raise ValueError("one weight per path is required")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))

    def expect(self, fn: Callable[[Path], np.ndarray]) -> float:
        return float(np.sum(self.weights * np.asarray(fn(self.paths))))


def as_stream(rng: Union[RngStream, int]) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, np.random.Generator):
        raise TypeError("chunked estimators need an RngStream or an integer seed")
    return RngStream(int(rng))


def chunk_sizes(n: int, n_chunks: int) -> list[int]:
    if n < 1 or n_chunks < 1:
        raise ValueError("n and n_chunks must be positive")
    n_chunks = min(n_chunks, n)
    base, extra = divmod(n, n_chunks)
    return [base + (i < extra) for i in range(n_chunks)]


def run_chunks(
    fn: Callable[[int, np.random.Generator], dict[str, np.ndarray]],
    n_paths: int,
    rng: Union[RngStream, int],
    n_chunks: int = 1,
    max_workers: Optional[int] = None,
    batch_size: int = BATCH_SIZE,
) -> dict[str, np.ndarray]:
    """Run ``fn(k, generator)`` over ``n_paths`` split into chunks.

    Chunk ``i`` draws from ``rng.spawn(i)`` and is processed in batches of at
    most ``batch_size`` paths. Outputs are per-path arrays concatenated in
    chunk order, so results depend only on ``(rng, n_paths, n_chunks)``.
    """
    stream = as_stream(rng)
    sizes = chunk_sizes(n_paths, n_chunks)

    def work(i: int) -> dict[str, np.ndarray]:
        gen = stream.spawn(i).generator()
        parts = []
        left = sizes[i]
        while left > 0:
            k = min(left, batch_size)
            parts.append(fn(k, gen))
            left -= k
        return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}

    if len(sizes) == 1 or max_workers == 1:
        results = [work(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(work, range(len(sizes))))
    return {key: np.concatenate([r[key] for r in results]) for key in results[0]}


def mean_and_se(samples: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    n = samples.shape[axis]
    mean = samples.mean(axis=axis)
    sd = samples.std(axis=axis, ddof=1) if n > 1 else np.zeros_like(mean)
    return mean, sd / np.sqrt(n)


def formula_table(
    weight_fn: Callable[[dict[str, np.ndarray], np.ndarray], np.ndarray],
    summ: dict[str, np.ndarray],
    c_values,
    prefactor: float,
    block: int = 64,
) -> DensityTable:
    """Density table ``prefactor * mean(weights)`` with common random numbers across ``c``."""
    c_values = np.asarray(c_values, dtype=float)
    dens = np.empty_like(c_values)
    se = np.empty_like(c_values)
    for j in range(0, c_values.size, block):
        m, s = mean_and_se(weight_fn(summ, c_values[j : j + block]))
        dens[j : j + block] = prefactor * m
        se[j : j + block] = prefactor * s
    n = next(iter(summ.values())).size
    return DensityTable(c_values, dens, se, "formula", int(n))


def check_c_values(c_values) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c_values, dtype=float))
    if np.any(c < 0):
        raise ValueError("the density is supported on c >= 0; got a negative c")
    return c
