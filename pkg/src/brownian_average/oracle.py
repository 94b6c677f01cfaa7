"""Brute-force checks: rejection sampling, direct density estimates and
Monte Carlo comparisons of the identities the estimators rely on.

Every comparison produces a :class:`ComparisonReport` which passes when
``|lhs - rhs| <= k * combined_se + rel_tol * |rhs|`` (``k = 3``,
``rel_tol = 0`` unless stated).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import erf

from . import excursion as exc
from . import meander as mea
from .conditioning import (
    ConditioningSpec,
    FiniteSignedMeasure,
    Piece,
    brownian_kernel,
    pair_path,
    q_apply,
    q_pair,
    rho_weight,
    transform_Y,
    transform_Z,
)
from .montecarlo import DensityTable, as_stream, mean_and_se, run_chunks
from .paths import (
    BARRIER_SHIFT,
    Path,
    RngStream,
    TimeGrid,
    as_generator,
    make_grid,
    sample_bm,
    sample_bridge,
    sample_excursion,
    sample_meander,
    time_average,
)

__all__ = [
    "ComparisonReport",
    "DensityTable",
    "RejectionResult",
    "LowAcceptanceError",
    "compare",
    "rejection_conditioned_bm",
    "rejection_conditioned_bridge",
    "bm_acceptance_target",
    "bridge_acceptance_target",
    "direct_averages",
    "direct_density",
    "reflected_kde",
    "silverman_bandwidth",
    "lemma_functionals",
    "verify_lemma_abco",
    "verify_lemma_suite",
    "verify_theorem",
    "verify_mean",
    "verify_grid_refinement",
    "gaussian_identity_check",
    "cameron_martin_check",
]

PROCESSES = ("meander", "excursion")


@dataclass(frozen=True)
class ComparisonReport:
    description: str
    lhs: float
    rhs: float
    combined_se: float
    passed: bool
    rel_tol: float = 0.0

    @property
    def z(self) -> float:
        diff = self.lhs - self.rhs
        if self.combined_se == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.combined_se

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def compare(
    description: str,
    lhs: float,
    lhs_se: float,
    rhs: float,
    rhs_se: float = 0.0,
    k: float = 3.0,
    rel_tol: float = 0.0,
    abs_tol: float = 0.0,
) -> ComparisonReport:
    se = math.hypot(float(lhs_se), float(rhs_se))
    ok = abs(lhs - rhs) <= k * se + rel_tol * abs(rhs) + abs_tol
    return ComparisonReport(description, float(lhs), float(rhs), se, bool(ok), rel_tol)


class LowAcceptanceError(RuntimeError):
    pass


# --------------------------------------------------------------------------- rejection


@dataclass(frozen=True, eq=False)
class RejectionResult:
    paths: Path
    n_proposals: int
    n_accepted: int

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposals

    @property
    def rate_se(self) -> float:
        p = self.acceptance_rate
        return math.sqrt(p * (1 - p) / self.n_proposals)


def _reject(propose, grid, epsilon, span_end, n_proposals, rng, min_rate, batch) -> RejectionResult:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < span_end <= 1:
        raise ValueError("span_end must lie in (0, 1]")
    gen = as_generator(rng)
    stop = int(np.searchsorted(grid.times, span_end + 1e-12))
    kept, done = [], 0
    while done < n_proposals:
        k = min(batch, n_proposals - done)
        vals = propose(gen, k)
        ok = np.min(vals[:, :stop], axis=1) >= -epsilon
        kept.append(vals[ok])
        done += k
    accepted = np.concatenate(kept)
    result = RejectionResult(Path(grid, accepted), n_proposals, accepted.shape[0])
    if result.acceptance_rate < min_rate:
        raise LowAcceptanceError(
            f"acceptance rate {result.acceptance_rate:.2e} below floor {min_rate:.1e}; "
            "increase epsilon or the proposal budget"
        )
    return result


def rejection_conditioned_bm(
    grid: TimeGrid,
    epsilon: float,
    span_end: float = 1.0,
    rng=0,
    n_proposals: int = 100_000,
    min_rate: float = 1e-4,
    batch: int = 4096,
) -> RejectionResult:
    """Brownian paths kept when they stay above ``-epsilon`` on the grid points of ``[0, span_end]``."""
    return _reject(
        lambda g, k: sample_bm(grid, g, k).values, grid, epsilon, span_end, n_proposals, rng, min_rate, batch
    )


def rejection_conditioned_bridge(
    grid: TimeGrid,
    epsilon: float,
    rng=0,
    n_proposals: int = 100_000,
    min_rate: float = 1e-4,
    batch: int = 4096,
) -> RejectionResult:
    return _reject(
        lambda g, k: sample_bridge(grid, 0.0, 0.0, (0.0, 1.0), g, k).values,
        grid, epsilon, 1.0, n_proposals, rng, min_rate, batch,
    )


def _effective_epsilon(epsilon: float, dt: Optional[float]) -> float:
    return epsilon if dt is None else epsilon + BARRIER_SHIFT * math.sqrt(dt)


def bm_acceptance_target(epsilon: float, s: float = 1.0, dt: Optional[float] = None) -> float:
    """``P(|B_s| <= epsilon)``; with ``dt`` the barrier is moved for grid-point monitoring."""
    e = _effective_epsilon(epsilon, dt)
    return float(erf(e / math.sqrt(2 * s)))


def bridge_acceptance_target(epsilon: float, dt: Optional[float] = None) -> float:
    e = _effective_epsilon(epsilon, dt)
    return 1.0 - math.exp(-2.0 * e * e)


# --------------------------------------------------------------------- direct densities


def _check_process(process: str) -> None:
    if process not in PROCESSES:
        raise ValueError(f"process must be one of {PROCESSES}, got {process!r}")


def direct_averages(
    process: str, n_paths: int, grid: TimeGrid, rng, n_chunks: int = 1, at: Sequence[float] = ()
) -> dict[str, np.ndarray]:
    """Time averages (and values at the times in ``at``) of directly simulated paths."""
    _check_process(process)
    sampler = sample_meander if process == "meander" else sample_excursion

    def fn(k, gen):
        p = sampler(grid, gen, k)
        out = {"average": np.atleast_1d(time_average(p))}
        for t in at:
            out[f"value_{t}"] = np.atleast_1d(p.at(t))
        return out

    return run_chunks(fn, n_paths, rng, n_chunks)


def silverman_bandwidth(samples: np.ndarray) -> float:
    x = np.asarray(samples, dtype=float)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(x.std(ddof=1), iqr / 1.34)
    return float(0.9 * spread * x.size ** (-0.2))


def reflected_kde(samples: np.ndarray, c_values, bandwidth: float, block: int = 32):
    """Gaussian KDE reflected at 0, with pointwise standard errors."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    x = np.asarray(samples, dtype=float)[:, None]
    c_values = np.asarray(c_values, dtype=float)
    dens = np.empty_like(c_values)
    se = np.empty_like(c_values)
    norm = 1.0 / (bandwidth * math.sqrt(2 * math.pi))
    for j in range(0, c_values.size, block):
        c = c_values[j : j + block]
        k = np.exp(-0.5 * ((c - x) / bandwidth) ** 2) + np.exp(-0.5 * ((c + x) / bandwidth) ** 2)
        m, s = mean_and_se(norm * k)
        dens[j : j + block] = np.where(c >= 0, m, 0.0)
        se[j : j + block] = np.where(c >= 0, s, 0.0)
    return dens, se


def direct_density(
    process: str,
    c_grid: Sequence[float],
    n_paths: int,
    bandwidth: Optional[float] = None,
    grid: Optional[TimeGrid] = None,
    rng=0,
    n_chunks: int = 1,
) -> DensityTable:
    """Reflected-KDE estimate of the time-average density from direct path simulation."""
    if n_paths < 1000:
        raise ValueError("direct_density needs at least 1000 paths")
    if bandwidth is not None and bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    grid = grid or make_grid(1024)
    x = direct_averages(process, n_paths, grid, rng, n_chunks)["average"]
    h = silverman_bandwidth(x) if bandwidth is None else bandwidth
    dens, se = reflected_kde(x, c_grid, h)
    return DensityTable(np.asarray(c_grid, dtype=float), dens, se, "kde", n_paths)


# -------------------------------------------------------------------- change of measure


def _h_measures() -> dict[str, FiniteSignedMeasure]:
    return {
        "exp_pair_const": FiniteSignedMeasure((Piece(0.0, 1.0, 0.5),)),
        "exp_pair_cos": FiniteSignedMeasure((Piece(0.0, 1.0, lambda t: 0.8 * np.cos(2 * np.pi * t)),)),
        "exp_pair_step": FiniteSignedMeasure((Piece(0.0, 0.5, -0.6), Piece(0.5, 1.0, 0.4))),
    }


def lemma_functionals() -> dict[str, Callable[[Path], np.ndarray]]:
    """The fixed suite of six path functionals used to compare the laws of Y and Z."""
    funcs: dict[str, Callable[[Path], np.ndarray]] = {
        "value_at_3/4": lambda p: p.at(0.75),
        "average_squared": lambda p: np.asarray(time_average(p)) ** 2,
        "grid_min": lambda p: np.min(p.values, axis=-1),
    }
    for name, h in _h_measures().items():
        funcs[name] = lambda p, h=h: np.exp(pair_path(p, h))
    return funcs


def _base_sampler(spec: ConditioningSpec):
    if spec.kernel is brownian_kernel:
        return lambda grid, gen, k: sample_bm(grid, gen, k)
    return lambda grid, gen, k: sample_bridge(grid, 0.0, 0.0, (0.0, 1.0), gen, k)


def _measure_grid(spec: ConditioningSpec) -> TimeGrid:
    anchors = {0.75}
    for m in (spec.lam, spec.mu):
        anchors.update(m.breakpoints())
    return make_grid(256, sorted(anchors))


def verify_lemma_abco(
    spec: ConditioningSpec,
    n_paths: int,
    rng: Union[RngStream, int],
    grid: Optional[TimeGrid] = None,
    functionals: Optional[dict[str, Callable[[Path], np.ndarray]]] = None,
    n_chunks: int = 1,
) -> list[ComparisonReport]:
    """Compare ``E[F(Y)]`` with ``E[F(Z) rho(Z)]`` using independent samples of X."""
    grid = grid or _measure_grid(spec)
    funcs = functionals or lemma_functionals()
    stream = as_stream(rng)
    sampler = _base_sampler(spec)

    def lhs_fn(k, gen):
        y = transform_Y(sampler(grid, gen, k), spec)
        return {name: np.broadcast_to(f(y), (k,)).astype(float) for name, f in funcs.items()}

    def rhs_fn(k, gen):
        z = transform_Z(sampler(grid, gen, k), spec)
        rho = rho_weight(z, spec)
        return {name: np.broadcast_to(f(z), (k,)) * rho for name, f in funcs.items()}

    lhs = run_chunks(lhs_fn, n_paths, stream.spawn(0), n_chunks)
    rhs = run_chunks(rhs_fn, n_paths, stream.spawn(1), n_chunks)
    reports = []
    for name in funcs:
        lm, ls = mean_and_se(lhs[name])
        rm, rs = mean_and_se(rhs[name])
        desc = f"{spec.name} conditioning, kappa={spec.kappa:.6g}: E[F(Y)] vs E[F(Z)rho(Z)], F={name}"
        reports.append(compare(desc, lm, ls, rm, rs))
    return reports


def verify_lemma_suite(
    spec_factory: Callable[[float], ConditioningSpec],
    c_values: Sequence[float],
    n_paths: int,
    rng: Union[RngStream, int],
    max_outliers: int = 1,
    n_chunks: int = 1,
) -> tuple[list[ComparisonReport], bool]:
    """All functionals at every ``c``; one retry with doubled paths if too many fail.

    Returns the reports of the last attempt and whether the family passed.
    """
    stream = as_stream(rng)
    n = n_paths
    for attempt in range(2):
        reports = []
        for i, c in enumerate(c_values):
            sub = stream.spawn(attempt).spawn(i)
            reports.extend(verify_lemma_abco(spec_factory(c), n, sub, n_chunks=n_chunks))
        outliers = sum(not r.passed for r in reports)
        if outliers <= max_outliers:
            return reports, True
        n *= 2
    return reports, False


# ---------------------------------------------------------------------- main identities


def _formula_module(which: str):
    _check_process(which)
    return mea if which == "meander" else exc


def _half_value(which: str, summ: dict[str, np.ndarray], grid: TimeGrid, c: np.ndarray) -> np.ndarray:
    """Value at t = 1/2 of the corrected path, per path and per ``c``."""
    if which == "meander":
        return np.broadcast_to(summ["u_half"][:, None], (summ["u_half"].size, c.size))
    g_half = exc.middle_third_profile(grid)[grid.index(0.5)]
    return summ["v_half"][:, None] + g_half * (c - summ["A"][:, None])


def _bin_integrals(which, summ, grid, lo, hi, dc, with_half):
    """Per-path trapezoid integral over [lo, hi] of prefactor * weight(c) (* value at 1/2)."""
    mod = _formula_module(which)
    lo = max(lo, 0.0)
    n = summ["A"].size
    if hi <= lo:
        return np.zeros(n)
    cs = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / dc)) + 1))
    w = mod.weights_from_summaries(summ, cs) * mod.PREFACTOR
    if with_half:
        w = w * _half_value(which, summ, grid, cs)
    return np.trapezoid(w, cs, axis=1)


def verify_theorem(
    which: str,
    n_paths: int,
    n_bins: int = 8,
    grid: Optional[TimeGrid] = None,
    rng: Union[RngStream, int] = 0,
    c_max: float = 2.0,
    dc: float = 0.005,
    edges: Optional[Sequence[float]] = None,
    n_chunks: int = 1,
    monitor: str = "corrected",
) -> list[ComparisonReport]:
    """Bin masses ``E[F(path) 1{average in bin}]`` by direct simulation versus
    the c-integral of the formula, for ``F = 1`` and ``F = value at 1/2``."""
    if edges is None:
        if n_bins < 4:
            raise ValueError("n_bins must be >= 4")
        edges = np.linspace(0.0, c_max, n_bins + 1)
    mod = _formula_module(which)
    grid = grid or mod.default_grid(1024)
    stream = as_stream(rng)
    direct = direct_averages(which, n_paths, grid, stream.spawn(0), n_chunks, at=(0.5,))
    summ = mod.simulate_summaries(n_paths, grid, stream.spawn(1), n_chunks, monitor)
    avg, half = direct["average"], direct["value_0.5"]
    reports = []
    for with_half in (False, True):
        label = "F=value at 1/2" if with_half else "F=1"
        for lo, hi in zip(edges[:-1], edges[1:]):
            inside = (avg >= lo) & (avg < hi)
            lm, ls = mean_and_se(inside * half if with_half else inside.astype(float))
            rm, rs = mean_and_se(_bin_integrals(which, summ, grid, lo, hi, dc, with_half))
            desc = f"{which} bin [{lo:.4g}, {hi:.4g}), {label}: direct vs formula"
            reports.append(compare(desc, float(lm), float(ls), float(rm), float(rs)))
    return reports


def verify_mean(
    which: str,
    n_paths: int,
    grid: Optional[TimeGrid] = None,
    rng: Union[RngStream, int] = 0,
    c_max: Optional[float] = None,
    dc: float = 0.005,
    n_chunks: int = 1,
    monitor: str = "corrected",
) -> ComparisonReport:
    """Mean of the time average: direct simulation versus ``int c p(c) dc``."""
    mod = _formula_module(which)
    grid = grid or mod.default_grid(1024)
    c_max = mod.DEFAULT_C_GRID[1] if c_max is None else c_max
    stream = as_stream(rng)
    avg = direct_averages(which, n_paths, grid, stream.spawn(0), n_chunks)["average"]
    summ = mod.simulate_summaries(n_paths, grid, stream.spawn(1), n_chunks, monitor)
    cs = np.linspace(0.0, c_max, int(round(c_max / dc)) + 1)
    per_path = np.zeros(n_paths)
    for j in range(0, cs.size - 1, 100):
        sub = cs[j : j + 101]
        w = mod.weights_from_summaries(summ, sub) * mod.PREFACTOR
        per_path += np.trapezoid(w * sub, sub, axis=1)
    lm, ls = mean_and_se(avg)
    rm, rs = mean_and_se(per_path)
    return compare(f"{which} mean of the time average: direct vs int c p(c) dc", lm, ls, rm, rs)


def verify_grid_refinement(
    which: str,
    c_values: Sequence[float] = (0.5, 1.0),
    n_paths: int = 100_000,
    coarse_n: int = 256,
    fine_n: int = 2048,
    rng: Union[RngStream, int] = 0,
    n_chunks: int = 1,
    monitor: str = "corrected",
    rel_tol: float = 0.02,
) -> list[ComparisonReport]:
    """Density on a coarse grid versus a fine grid, from the same fine paths."""
    mod = _formula_module(which)
    fine = mod.default_grid(fine_n)
    coarse = mod.default_grid(coarse_n)
    idx = np.array([fine.index(t) for t in coarse.times])
    sample = mod.sample_u if which == "meander" else mod.sample_v
    summarize = mod.u_summaries if which == "meander" else mod.v_summaries

    def fn(k, gen):
        p = sample(fine, gen, k)
        sc = summarize(Path(coarse, p.values[:, idx]), monitor)
        sf = summarize(p, monitor)
        return {**{f"c_{k_}": v for k_, v in sc.items()}, **{f"f_{k_}": v for k_, v in sf.items()}}

    out = run_chunks(fn, n_paths, rng, n_chunks)
    sc = {k[2:]: v for k, v in out.items() if k.startswith("c_")}
    sf = {k[2:]: v for k, v in out.items() if k.startswith("f_")}
    tc = mod.table_from_summaries(sc, c_values)
    tf = mod.table_from_summaries(sf, c_values)
    return [
        compare(
            f"{which} density at c={c:g}: grid n={coarse_n} vs n={fine_n}",
            dc_, sc_, df_, sf_, rel_tol=rel_tol,
        )
        for c, dc_, sc_, df_, sf_ in zip(c_values, tc.densities, tc.std_errors, tf.densities, tf.std_errors)
    ]


# ------------------------------------------------------------------ gaussian identities


def gaussian_identity_check(sigma: float, c: float, n_samples: int, rng) -> ComparisonReport:
    """``E[exp(-(a + c)^2 / 2)]`` for ``a ~ N(0, sigma^2)`` against its closed form."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    a = sigma * as_generator(rng).standard_normal(n_samples)
    lm, ls = mean_and_se(np.exp(-0.5 * (a + c) ** 2))
    s2 = 1.0 + sigma**2
    rhs = math.exp(-0.5 * c * c / s2) / math.sqrt(s2)
    return compare(f"gaussian identity sigma={sigma:g}, c={c:g}", float(lm), float(ls), rhs, 0.0, abs_tol=1e-14)


def cameron_martin_check(
    h: FiniteSignedMeasure,
    n_paths: int,
    grid: Optional[TimeGrid] = None,
    rng: Union[RngStream, int] = 0,
    description: str = "",
) -> ComparisonReport:
    """``E[B_{1/2} exp(<B, h>)]`` versus ``exp(<Qh, h>/2) E[B_{1/2} + Qh(1/2)]``."""
    if grid is None:
        grid = make_grid(512, sorted({0.5, *h.breakpoints()}))
    stream = as_stream(rng)
    b1 = sample_bm(grid, stream.spawn(0).generator(), n_paths)
    b2 = sample_bm(grid, stream.spawn(1).generator(), n_paths)
    lm, ls = mean_and_se(b1.at(0.5) * np.exp(pair_path(b1, h)))
    shift = q_apply(brownian_kernel, h, 0.5)
    scale = math.exp(0.5 * q_pair(brownian_kernel, h, h))
    rm, rs = mean_and_se(scale * (b2.at(0.5) + shift))
    return compare(f"Cameron-Martin shift {description}".strip(), float(lm), float(ls), float(rm), float(rs))


# ------------------------------------------------------------ literal reference formulas


def _segment_integral(path: Path, lo: float, hi: float):
    sl, _ = path.grid.segment(lo, hi)
    return np.trapezoid(path.values[..., sl], path.times[sl], axis=-1)


def bm_split_transform(path: Path, c: float) -> Path:
    """``omega`` on [0, 1/2], plus ``(12 t (2 - t) - 9)(c - int omega)`` on [1/2, 1]."""
    t = path.times
    g = np.where(t >= 0.5, 12 * t * (2 - t) - 9, 0.0)
    corr = np.asarray(c - np.trapezoid(path.values, t, axis=-1))[..., None]
    return Path(path.grid, path.values + g * corr)


def bm_split_density(path: Path, c: float):
    """``sqrt(8) exp(-12 (int_0^{1/2} (w_r + w_{1/2}) dr - c)^2 + 1.5 c^2)``."""
    G = _segment_integral(path, 0.0, 0.5) + 0.5 * path.at(0.5)
    return math.sqrt(8.0) * np.exp(-12.0 * (G - c) ** 2 + 1.5 * c * c)


def bridge_split_transform(path: Path, c: float) -> Path:
    """``omega`` on the outer thirds, plus ``18 (9 t (1 - t) - 2)(c - int omega)`` on the middle third."""
    t = path.times
    g = np.where((t >= 1 / 3) & (t <= 2 / 3), 18 * (9 * t * (1 - t) - 2), 0.0)
    g[[path.grid.index(1 / 3), path.grid.index(2 / 3)]] = 0.0
    corr = np.asarray(c - np.trapezoid(path.values, t, axis=-1))[..., None]
    return Path(path.grid, path.values + g * corr)


def bridge_split_density(path: Path, c: float):
    """``sqrt(27) exp(-162 (H - c)^2 + 6 c^2)`` with ``H`` the outer-thirds functional."""
    H = (
        _segment_integral(path, 0.0, 1 / 3)
        + _segment_integral(path, 2 / 3, 1.0)
        + (path.at(1 / 3) + path.at(2 / 3)) / 6.0
    )
    return math.sqrt(27.0) * np.exp(-162.0 * (H - c) ** 2 + 6.0 * c * c)
