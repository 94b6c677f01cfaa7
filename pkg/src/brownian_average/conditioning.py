"""Linear conditioning of Gaussian processes on time-average functionals.

A centered Gaussian process X with covariance q is paired against two signed
measures ``lam`` and ``mu`` satisfying

    <Q lam, mu> = 0,    <Q lam, lam> + <Q mu, mu> = 1,

where ``Q m(t) = int q(t, s) m(ds)``. With ``gamma(w) = <w, lam>``,
``a(w) = <w, mu>``, ``Lambda = Q lam``, ``M = Q mu`` and ``I = <Q lam, lam>``
the processes

    Y = X + (Lambda + M) (kappa - a(X) - gamma(X))
    Z = X + M / (1 - I) (kappa - a(X) - gamma(X))

satisfy ``E[F(Y)] = E[F(Z) rho(Z)]`` with ``rho`` given by :func:`rho_weight`.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .paths import GRID_TOL, Path, trapezoid

__all__ = [
    "CovarianceKernel",
    "Piece",
    "FiniteSignedMeasure",
    "ConditioningSpec",
    "brownian_kernel",
    "bridge_kernel",
    "q_apply",
    "q_pair",
    "pair_path",
    "transform_Y",
    "transform_Z",
    "rho_weight",
    "meander_spec",
    "excursion_spec",
    "meander_measures",
    "excursion_measures",
]

SQRT3 = math.sqrt(3.0)
SQRT12 = math.sqrt(12.0)


@dataclass(frozen=True)
class CovarianceKernel:
    """Symmetric covariance ``q(s, t)``, smooth off the diagonal ``s = t``."""

    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, s, t):
        return self.fn(np.asarray(s, dtype=float), np.asarray(t, dtype=float))


brownian_kernel = CovarianceKernel("brownian", np.minimum)
bridge_kernel = CovarianceKernel("bridge", lambda s, t: np.minimum(s, t) - s * t)


@dataclass(frozen=True)
class Piece:
    """Density ``value`` on ``[lo, hi]``; ``value`` is a constant or a callable."""

    lo: float
    hi: float
    value: Union[float, Callable[[np.ndarray], np.ndarray]] = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if callable(self.value):
            return np.asarray(self.value(t), dtype=float) * np.ones_like(t)
        return np.full_like(t, float(self.value))

    def scaled(self, k: float) -> "Piece":
        if callable(self.value):
            f = self.value
            return Piece(self.lo, self.hi, lambda t: k * f(t))
        return Piece(self.lo, self.hi, k * float(self.value))


@dataclass(frozen=True)
class FiniteSignedMeasure:
    """Absolutely continuous part (a sum of pieces) plus point masses."""

    pieces: tuple[Piece, ...] = ()
    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        pieces = tuple(self.pieces)
        atoms = tuple((float(x), float(m)) for x, m in self.atoms)
        for p in pieces:
            if not 0.0 <= p.lo < p.hi <= 1.0:
                raise ValueError(f"piece [{p.lo}, {p.hi}] not inside [0, 1]")
        locs = sorted(x for x, _ in atoms)
        if any(not 0.0 <= x <= 1.0 for x in locs):
            raise ValueError("atom outside [0, 1]")
        if any(b - a <= GRID_TOL for a, b in zip(locs, locs[1:])):
            raise ValueError("atom locations must be distinct")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def lebesgue(cls, lo: float = 0.0, hi: float = 1.0, value=1.0) -> "FiniteSignedMeasure":
        return cls(pieces=(Piece(lo, hi, value),))

    @classmethod
    def dirac(cls, x: float, mass: float = 1.0) -> "FiniteSignedMeasure":
        return cls(atoms=((x, mass),))

    def density(self, t):
        """Density of the absolutely continuous part (pieces are half-open on the right)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p in self.pieces:
            inside = (t >= p.lo) & ((t < p.hi) | (p.hi == 1.0) & (t <= 1.0))
            out = out + np.where(inside, p(t), 0.0)
        return out

    def breakpoints(self) -> list[float]:
        pts = {0.0, 1.0}
        for p in self.pieces:
            pts.update((p.lo, p.hi))
        pts.update(x for x, _ in self.atoms)
        return sorted(pts)

    def __add__(self, other: "FiniteSignedMeasure") -> "FiniteSignedMeasure":
        merged: dict[float, float] = {}
        for x, m in self.atoms + other.atoms:
            key = next((k for k in merged if abs(k - x) <= GRID_TOL), x)
            merged[key] = merged.get(key, 0.0) + m
        atoms = tuple((x, m) for x, m in sorted(merged.items()) if m != 0.0)
        return FiniteSignedMeasure(self.pieces + other.pieces, atoms)

    def __mul__(self, k: float) -> "FiniteSignedMeasure":
        return FiniteSignedMeasure(
            tuple(p.scaled(k) for p in self.pieces),
            tuple((x, k * m) for x, m in self.atoms),
        )

    __rmul__ = __mul__

    def __neg__(self) -> "FiniteSignedMeasure":
        return self * -1.0

    def __sub__(self, other: "FiniteSignedMeasure") -> "FiniteSignedMeasure":
        return self + (-other)


@functools.lru_cache(maxsize=None)
def _simpson_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Simpson nodes and weights on [0, 1] with ``n`` (even) panels."""
    if n % 2:
        n += 1
    x = np.linspace(0.0, 1.0, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return x, w / (3.0 * n)


def q_apply(kernel: CovarianceKernel, meas: FiniteSignedMeasure, t, n_nodes: int = 64):
    """``Q meas(t) = int q(t, s) meas(ds)``, vectorized over ``t``.

    Each piece is split at ``s = t`` so Simpson's rule never straddles the
    kernel's kink; for piecewise-polynomial densities of degree <= 2 the
    result is exact to rounding.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    x, w = _simpson_rule(n_nodes)
    out = np.zeros_like(t_arr)
    tt = t_arr[:, None]
    for p in meas.pieces:
        mid = np.clip(t_arr, p.lo, p.hi)[:, None]
        for a, b in ((p.lo, mid), (mid, p.hi)):
            length = np.broadcast_to(b - a, tt.shape)
            s = a + length * x
            out += np.sum(kernel(tt, s) * p(s) * w, axis=-1) * length[:, 0]
    for loc, mass in meas.atoms:
        out += mass * kernel(t_arr, loc)
    return float(out[0]) if np.ndim(t) == 0 else out


def q_pair(
    kernel: CovarianceKernel,
    m1: FiniteSignedMeasure,
    m2: FiniteSignedMeasure,
    n_nodes: int = 64,
) -> float:
    """Bilinear form ``int int q(s, t) m1(ds) m2(dt)``.

    The outer integral is split at every breakpoint of ``m1`` so that
    ``Q m1`` is smooth on each panel.
    """
    x, w = _simpson_rule(n_nodes)
    cuts = m1.breakpoints()
    total = 0.0
    for p in m2.pieces:
        edges = [p.lo] + [c for c in cuts if p.lo < c < p.hi] + [p.hi]
        for a, b in zip(edges, edges[1:]):
            s = a + (b - a) * x
            total += (b - a) * float(np.sum(q_apply(kernel, m1, s, n_nodes) * p(s) * w))
    for loc, mass in m2.atoms:
        total += mass * q_apply(kernel, m1, loc, n_nodes)
    return float(total)


def pair_path(path: Path, meas: FiniteSignedMeasure):
    """``<path, meas>``: trapezoid on each density piece plus atom values.

    Piece endpoints and atom locations must be grid points.
    """
    grid = path.grid
    out = np.zeros(path.values.shape[:-1])
    for p in meas.pieces:
        sl = slice(grid.index(p.lo), grid.index(p.hi) + 1)
        t = grid.times[sl]
        out = out + trapezoid(path.values[..., sl] * p(t), t)
    for loc, mass in meas.atoms:
        out = out + mass * path.values[..., grid.index(loc)]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConditioningSpec:
    """One instance of the conditioning problem with its closed-form ``Lambda``, ``M``, ``I``."""

    kernel: CovarianceKernel
    lam: FiniteSignedMeasure
    mu: FiniteSignedMeasure
    kappa: float
    Lambda: Callable[[np.ndarray], np.ndarray]
    M: Callable[[np.ndarray], np.ndarray]
    I: float
    name: str = field(default="custom")

    def residuals(self, n_nodes: int = 64) -> dict[str, float]:
        """Numerical residuals of the orthogonality and normalization conditions."""
        ll = q_pair(self.kernel, self.lam, self.lam, n_nodes)
        mm = q_pair(self.kernel, self.mu, self.mu, n_nodes)
        lm = q_pair(self.kernel, self.lam, self.mu, n_nodes)
        return {"orthogonality": lm, "normalization": ll + mm - 1.0, "I": ll - self.I}

    def validate(self, tol: float = 1e-10) -> None:
        res = self.residuals()
        bad = {k: v for k, v in res.items() if abs(v) > tol}
        if bad:
            raise ValueError(f"{self.name} spec violates conditions: {bad}")
        if not 0.0 <= self.I < 1.0:
            raise ValueError(f"I must lie in [0, 1), got {self.I}")


def _correction(path: Path, spec: ConditioningSpec):
    return spec.kappa - pair_path(path, spec.lam) - pair_path(path, spec.mu)


def transform_Y(path: Path, spec: ConditioningSpec) -> Path:
    t = path.times
    corr = np.asarray(_correction(path, spec))[..., None]
    return Path(path.grid, path.values + (spec.Lambda(t) + spec.M(t)) * corr)


def _require_I(spec: ConditioningSpec) -> None:
    if spec.I >= 1.0:
        raise ValueError(f"I = {spec.I} >= 1; Z and rho are undefined")


def transform_Z(path: Path, spec: ConditioningSpec) -> Path:
    _require_I(spec)
    t = path.times
    corr = np.asarray(_correction(path, spec))[..., None]
    return Path(path.grid, path.values + spec.M(t) / (1.0 - spec.I) * corr)


def rho_weight(path: Path, spec: ConditioningSpec):
    """Radon-Nikodym weight relating the laws of Z and Y; always positive."""
    _require_I(spec)
    one_minus = 1.0 - spec.I
    gamma = pair_path(path, spec.lam)
    expo = -0.5 * (gamma - spec.kappa) ** 2 / one_minus + 0.5 * spec.kappa**2
    return np.exp(expo) / math.sqrt(one_minus)


def meander_measures() -> tuple[FiniteSignedMeasure, FiniteSignedMeasure]:
    lam = FiniteSignedMeasure((Piece(0.0, 0.5, SQRT3),), ((0.5, SQRT3 / 2),))
    mu = FiniteSignedMeasure((Piece(0.5, 1.0, SQRT3),), ((0.5, -SQRT3 / 2),))
    return lam, mu


def excursion_measures() -> tuple[FiniteSignedMeasure, FiniteSignedMeasure]:
    atoms = ((1 / 3, SQRT12 / 6), (2 / 3, SQRT12 / 6))
    lam = FiniteSignedMeasure((Piece(0.0, 1 / 3, SQRT12), Piece(2 / 3, 1.0, SQRT12)), atoms)
    mu = FiniteSignedMeasure(
        (Piece(1 / 3, 2 / 3, SQRT12),), tuple((x, -m) for x, m in atoms)
    )
    return lam, mu


def _meander_Lambda(t):
    t = np.asarray(t, dtype=float)
    return np.where(t <= 0.5, SQRT3 * t * (1 - t / 2), 3 * SQRT3 / 8)


def _meander_M(t):
    t = np.asarray(t, dtype=float)
    return np.where(t <= 0.5, 0.0, SQRT3 * t * (1 - t / 2) - 3 * SQRT3 / 8)


def _excursion_Lambda(t):
    t = np.asarray(t, dtype=float)
    inner = (t > 1 / 3) & (t < 2 / 3)
    return np.where(inner, 2 * SQRT3 / 9, SQRT3 * t * (1 - t))


def _excursion_M(t):
    t = np.asarray(t, dtype=float)
    inner = (t >= 1 / 3) & (t <= 2 / 3)
    return np.where(inner, SQRT3 * t * (1 - t) - 2 * SQRT3 / 9, 0.0)


@functools.lru_cache(maxsize=None)
def _validated(name: str) -> bool:
    # the measures do not depend on c, so one check per process suffices
    base = meander_spec(0.0, validate=False) if name == "meander" else excursion_spec(0.0, validate=False)
    base.validate()
    return True


def meander_spec(c: float, validate: Optional[bool] = None) -> ConditioningSpec:
    """Brownian motion conditioned on its time average ``c``."""
    lam, mu = meander_measures()
    spec = ConditioningSpec(
        brownian_kernel, lam, mu, SQRT3 * float(c), _meander_Lambda, _meander_M, 7 / 8, "meander"
    )
    if validate if validate is not None else __debug__:
        _validated("meander")
    return spec


def excursion_spec(c: float, validate: Optional[bool] = None) -> ConditioningSpec:
    """Brownian bridge conditioned on its time average ``c``."""
    lam, mu = excursion_measures()
    spec = ConditioningSpec(
        bridge_kernel, lam, mu, SQRT12 * float(c), _excursion_Lambda, _excursion_M, 26 / 27, "excursion"
    )
    if validate if validate is not None else __debug__:
        _validated("excursion")
    return spec

