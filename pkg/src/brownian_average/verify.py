"""The verification suite behind ``brownian-average verify``.

Each check group returns :class:`ComparisonReport` objects. A stochastic
group passes when at most one in twenty of its comparisons falls outside
three combined standard errors; otherwise it is rerun once with twice the
paths on fresh substreams and judged on the rerun.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import conditioning as cd
from . import excursion as exc
from . import meander as mea
from . import oracle as orc
from .montecarlo import as_stream
from .paths import RngStream, make_grid, sample_bm, sample_bridge

__all__ = ["GROUPS", "GroupResult", "run_suite", "suite_sizes"]

MEASURE_C = (0.2, 0.5, 1.0)
STRUCTURE_C = 0.5


@dataclass(frozen=True)
class GroupResult:
    name: str
    reports: list
    passed: bool
    attempts: int


def suite_sizes(quick: bool) -> dict[str, int]:
    if quick:
        return {"change_of_measure": 10_000, "bins": 10_000, "bins_grid": 256, "mean": 20_000,
                "density": 20_000, "rejection": 20_000, "refinement": 10_000, "gaussian": 100_000,
                "cameron_martin": 20_000}
    return {"change_of_measure": 200_000, "bins": 100_000, "bins_grid": 1024, "mean": 100_000,
            "density": 100_000, "rejection": 100_000, "refinement": 100_000, "gaussian": 1_000_000,
            "cameron_martin": 200_000}


def _exact(desc: str, value: float, target: float, tol: float) -> orc.ComparisonReport:
    return orc.compare(desc, value, 0.0, target, k=0.0, abs_tol=tol)


def _specs():
    return (("meander", cd.meander_spec), ("excursion", cd.excursion_spec))


def check_inde() -> list[orc.ComparisonReport]:
    out = []
    for name, factory in _specs():
        r = factory(1.0).residuals()
        out.append(_exact(f"{name}: <Q lambda, mu>", r["orthogonality"], 0.0, 1e-10))
        out.append(_exact(f"{name}: <Q lambda, lambda> + <Q mu, mu> - 1", r["normalization"], 0.0, 1e-10))
    return out


def check_constants(seed: int = 0) -> list[orc.ComparisonReport]:
    out = []
    t = np.random.default_rng(seed).uniform(0.0, 1.0, 50)
    for (name, factory), exact in zip(_specs(), (7 / 8, 26 / 27)):
        spec = factory(1.0)
        out.append(_exact(f"{name}: I = <Q lambda, lambda>", cd.q_pair(spec.kernel, spec.lam, spec.lam), exact, 1e-10))
        lam_err = np.max(np.abs(spec.Lambda(t) - cd.q_apply(spec.kernel, spec.lam, t)))
        m_err = np.max(np.abs(spec.M(t) - cd.q_apply(spec.kernel, spec.mu, t)))
        out.append(_exact(f"{name}: max |Lambda - Q lambda| at 50 random t", float(lam_err), 0.0, 1e-8))
        out.append(_exact(f"{name}: max |M - Q mu| at 50 random t", float(m_err), 0.0, 1e-8))
    return out


def _max_rel(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) / np.asarray(b) - 1.0)))


def check_structure(seed: int = 0, c: float = STRUCTURE_C, n_paths: int = 100) -> list[orc.ComparisonReport]:
    """Generic transforms and weights against their closed forms on random paths."""
    gen = np.random.default_rng(seed)
    grid = make_grid(512, [1 / 3, 0.5, 2 / 3])
    out = []

    X = sample_bm(grid, gen, n_paths)
    spec = cd.meander_spec(c)
    Z = cd.transform_Z(X, spec)
    out.append(_exact("meander: max |Z - S|", float(np.max(np.abs(Z.values - orc.bm_split_transform(X, c).values))), 0.0, 1e-12))
    out.append(_exact("meander: max relative |rho - sqrt(8) exp(...)|", _max_rel(cd.rho_weight(Z, spec), orc.bm_split_density(Z, c)), 0.0, 1e-12))

    X = sample_bridge(grid, 0.0, 0.0, (0.0, 1.0), gen, n_paths)
    spec = cd.excursion_spec(c)
    Z = cd.transform_Z(X, spec)
    rho1 = orc.bridge_split_density(Z, c)
    out.append(_exact("excursion: max |Z - Gamma|", float(np.max(np.abs(Z.values - orc.bridge_split_transform(X, c).values))), 0.0, 1e-12))
    out.append(_exact("excursion: max relative |rho - rho_1|", _max_rel(cd.rho_weight(Z, spec), rho1), 0.0, 1e-12))
    factored = rho1 * exc.rho2_weight(Z) * math.exp(-6 * c * c) / 9.0
    out.append(_exact("excursion: max relative |rho^c - rho_1 rho_2 exp(-6c^2)/9|", _max_rel(exc.rho_c_weight(Z, c), factored), 0.0, 1e-12))
    return out


def check_change_of_measure(n: int, stream: RngStream, n_chunks: int) -> tuple[list, bool]:
    reports, ok = [], True
    for i, (_, factory) in enumerate(_specs()):
        rep, good = orc.verify_lemma_suite(factory, MEASURE_C, n, stream.spawn(i), max_outliers=1, n_chunks=n_chunks)
        reports.extend(rep)
        ok = ok and good
    return reports, ok


def check_bins(n: int, grid_n: int, stream: RngStream, n_chunks: int, monitor: str) -> list:
    out = []
    for i, (which, mod) in enumerate((("meander", mea), ("excursion", exc))):
        out.extend(orc.verify_theorem(which, n, 8, mod.default_grid(grid_n), stream.spawn(i), n_chunks=n_chunks, monitor=monitor))
    return out


def check_mean(n: int, grid_n: int, stream: RngStream, n_chunks: int, monitor: str) -> list:
    return [
        orc.verify_mean(which, n, mod.default_grid(grid_n), stream.spawn(i), n_chunks=n_chunks, monitor=monitor)
        for i, (which, mod) in enumerate((("meander", mea), ("excursion", exc)))
    ]


def density_boundary(n: int, grid_n: int, stream: RngStream, n_chunks: int, monitor: str) -> list:
    out = []
    for i, (which, mod) in enumerate((("meander", mea), ("excursion", exc))):
        lo, hi, dc = mod.DEFAULT_C_GRID
        cs = np.linspace(lo, hi, int(round((hi - lo) / dc)) + 1)
        fn = mea.density_table_meander if which == "meander" else exc.density_table_excursion
        table = fn(cs, n, mod.default_grid(grid_n), stream.spawn(i), n_chunks, monitor)
        out.append(_exact(f"{which}: density at c = 0", float(table.densities[0]), 0.0, 0.0))
        out.append(_exact(f"{which}: total mass over [{lo:g}, {hi:g}]", table.total_mass(), 1.0, 0.02))
    return out


def check_rejection(n: int, stream: RngStream) -> list:
    grid = make_grid(1024)
    out = []
    res = orc.rejection_conditioned_bm(grid, 0.1, rng=stream.spawn(0).generator(), n_proposals=n)
    target = orc.bm_acceptance_target(0.1, dt=1.0 / grid.n_steps)
    out.append(orc.compare("BM acceptance above -0.1 vs P(|B_1| <= eps')", res.acceptance_rate, res.rate_se, target))
    res = orc.rejection_conditioned_bridge(grid, 0.3, rng=stream.spawn(1).generator(), n_proposals=n)
    target = orc.bridge_acceptance_target(0.3, dt=1.0 / grid.n_steps)
    out.append(orc.compare("bridge acceptance above -0.3 vs 1 - exp(-2 eps'^2)", res.acceptance_rate, res.rate_se, target))
    return out


def check_refinement(n: int, stream: RngStream, n_chunks: int, monitor: str) -> list:
    out = []
    for i, which in enumerate(("meander", "excursion")):
        out.extend(orc.verify_grid_refinement(which, (0.5, 1.0), n, rng=stream.spawn(i), n_chunks=n_chunks, monitor=monitor))
    return out


def check_gaussian(n: int, stream: RngStream) -> list:
    out = []
    i = 0
    for sigma in (0.0, 0.5, 2.0):
        for c in (0.0, 1.0):
            out.append(orc.gaussian_identity_check(sigma, c, n, stream.spawn(i).generator()))
            i += 1
    return out


def check_cameron_martin(n: int, stream: RngStream) -> list:
    hs = {
        "h = 0.5 dt": cd.FiniteSignedMeasure((cd.Piece(0.0, 1.0, 0.5),)),
        "h = -0.6 on [0,1/2), 0.4 on [1/2,1]": cd.FiniteSignedMeasure((cd.Piece(0.0, 0.5, -0.6), cd.Piece(0.5, 1.0, 0.4))),
        "h = 0.3 dt + 0.5 delta_{1/4}": cd.FiniteSignedMeasure((cd.Piece(0.0, 1.0, 0.3),), ((0.25, 0.5),)),
    }
    return [orc.cameron_martin_check(h, n, rng=stream.spawn(i), description=d) for i, (d, h) in enumerate(hs.items())]


GROUPS = (
    "inde", "constants", "structure", "change_of_measure", "bins", "mean",
    "boundary", "rejection", "refinement", "gaussian", "cameron_martin",
)


def run_suite(
    seed: int,
    quick: bool = False,
    only: Optional[Sequence[str]] = None,
    n_chunks: int = 1,
    monitor: str = "corrected",
    progress: Optional[Callable[[GroupResult], None]] = None,
) -> list[GroupResult]:
    selected = list(GROUPS) if not only else list(only)
    unknown = [g for g in selected if g not in GROUPS]
    if unknown:
        raise ValueError(f"unknown check group(s) {unknown}; choose from {list(GROUPS)}")
    sizes = suite_sizes(quick)
    grid_n = sizes["bins_grid"]
    root = as_stream(seed)

    stochastic: dict[str, Callable[[int, RngStream], list]] = {
        "bins": lambda s, st: check_bins(sizes["bins"] * s, grid_n, st, n_chunks, monitor),
        "mean": lambda s, st: check_mean(sizes["mean"] * s, grid_n, st, n_chunks, monitor),
        "boundary": lambda s, st: density_boundary(sizes["density"] * s, grid_n, st, n_chunks, monitor),
        "rejection": lambda s, st: check_rejection(sizes["rejection"] * s, st),
        "refinement": lambda s, st: check_refinement(sizes["refinement"] * s, st, n_chunks, monitor),
        "gaussian": lambda s, st: check_gaussian(sizes["gaussian"] * s, st),
        "cameron_martin": lambda s, st: check_cameron_martin(sizes["cameron_martin"] * s, st),
    }
    results = []
    for name in GROUPS:
        if name not in selected:
            continue
        stream = root.spawn(GROUPS.index(name))
        if name == "inde":
            res = _judge(name, check_inde(), 0, 1)
        elif name == "constants":
            res = _judge(name, check_constants(seed), 0, 1)
        elif name == "structure":
            res = _judge(name, check_structure(seed), 0, 1)
        elif name == "change_of_measure":
            reports, ok = check_change_of_measure(sizes["change_of_measure"], stream, n_chunks)
            res = GroupResult(name, reports, ok, 1)
        else:
            reports = stochastic[name](1, stream.spawn(0))
            res = _judge(name, reports, len(reports) // 20, 1)
            if not res.passed:
                reports = stochastic[name](2, stream.spawn(1))
                res = _judge(name, reports, len(reports) // 20, 2)
        results.append(res)
        if progress is not None:
            progress(res)
    return results


def _judge(name: str, reports: list, max_outliers: int, attempts: int) -> GroupResult:
    failed = sum(not r.passed for r in reports)
    return GroupResult(name, reports, failed <= max_outliers, attempts)
