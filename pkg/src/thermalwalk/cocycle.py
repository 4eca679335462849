"""Matrix elements of the limit cocycle against exponential vectors.

For piecewise-constant test functions the weak integral equation reduces to
``Lambda_t = Lambda_0 o E_t`` with ``dE_t/dt = E_t o G(t)`` and
``G(t)(b) = E^{hat f(t)} psi(b) E_{hat g(t)}``, so that on ``[0, T]``

    <u e(f), k_T(a) v e(g)> = exp(int <f, g>) <u, E_T(a) v>,

``E_T = exp(s_1 G_1) o ... o exp(s_m G_m)`` over the common refinement of
the breakpoints of ``f`` and ``g``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gns import GnsSpace
from .generators import EH, HP
from .linalg import SuperOperator, ordered_exp, slice_superop
from .walk import StepFunction, inner_integral

__all__ = [
    "CocycleQuery",
    "semigroup_generator",
    "cocycle_element",
    "cocycle_series",
    "StructureReport",
    "structure_checks",
    "hp_unitarity_residuals",
    "eh_homomorphism_residual",
]


@dataclass(frozen=True, eq=False)
class CocycleQuery:
    psi: SuperOperator
    g: GnsSpace
    a: np.ndarray
    u: np.ndarray
    v: np.ndarray
    f: StepFunction
    gf: StepFunction
    T: float


def semigroup_generator(psi: SuperOperator, g: GnsSpace, x, y) -> SuperOperator:
    """``b -> E^{omega + x} psi(b) E_{omega + y}`` for noise coordinates ``x, y``."""
    dim_h = psi.dim_in
    if psi.dim_out != dim_h * g.dim_gns:
        raise ValueError("psi does not map into B(h (x) hk)")
    return slice_superop(g.hat(x), g.hat(y), dim_h) @ psi


def _intervals(f: StepFunction, gf: StepFunction, T: float, dim: int):
    cuts = sorted({c for c in f.breakpoints() + gf.breakpoints() if c < T} | {0.0, T})
    out = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0:
            continue
        mid = 0.5 * (lo + hi)
        out.append((hi - lo, f.value_at(mid, dim), gf.value_at(mid, dim)))
    return out


def cocycle_element(q: CocycleQuery) -> complex:
    """``<u e(f), k_T(a) v e(g)>``; ``f, g`` may extend beyond ``T``."""
    T = float(q.T)
    if not (np.isfinite(T) and T >= 0):
        raise ValueError(f"horizon must be finite and nonnegative, got {q.T}")
    dim = q.g.dim_noise
    gens = []
    for duration, x, y in _intervals(q.f, q.gf, T, dim):
        gens.append((duration, semigroup_generator(q.psi, q.g, x, y)))
    b = ordered_exp(gens, q.a)
    scale = np.exp(inner_integral(q.f, q.gf))
    return complex(scale * np.vdot(q.u, b @ np.asarray(q.v)))


def cocycle_series(psi: SuperOperator, g: GnsSpace, a, u, v, f: StepFunction, gf: StepFunction, times) -> list[complex]:
    return [cocycle_element(CocycleQuery(psi, g, np.asarray(a), np.asarray(u), np.asarray(v), f, gf, t)) for t in times]


@dataclass
class StructureReport:
    flavor: str
    residuals: dict[str, float]
    tolerances: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(self.residuals[k] <= self.tolerances[k] for k in self.residuals)


def hp_unitarity_residuals(G: np.ndarray, Delta: np.ndarray) -> dict[str, float]:
    """Residuals of ``G + G* + G* Delta G = 0`` and ``G + G* + G Delta G* = 0``."""
    Gs = G.conj().T
    return {
        "isometry": float(np.max(np.abs(G + Gs + Gs @ Delta @ G))),
        "coisometry": float(np.max(np.abs(G + Gs + G @ Delta @ Gs))),
    }


def eh_homomorphism_residual(psi: SuperOperator, Delta: np.ndarray, a, b) -> float:
    """Residual of ``psi(ab) = psi(a)(b (x) I) + (a (x) I) psi(b) + psi(a) Delta psi(b)``."""
    dim_h = psi.dim_in
    m = psi.dim_out // dim_h
    eye = np.eye(m)
    pa, pb = psi.apply(a), psi.apply(b)
    rhs = pa @ np.kron(b, eye) + np.kron(a, eye) @ pb + pa @ Delta @ pb
    return float(np.max(np.abs(psi.apply(a @ b) - rhs)))


def structure_checks(psi: SuperOperator, flavor: str, Delta: np.ndarray, G: np.ndarray | None = None,
                     pairs: int = 50, seed: int = 0, rng=None) -> StructureReport:
    """Unitarity (HP) or homomorphism (EH) structure of a limit generator.

    For HP, ``G`` defaults to ``psi(I)``.  For EH, ``pairs`` random ``(a, b)``
    are drawn from ``rng.complex_matrix`` if given, else from numpy seeded by
    ``seed``.
    """
    dim_h = psi.dim_in
    if flavor == HP:
        if G is None:
            G = psi.apply(np.eye(dim_h))
        res = hp_unitarity_residuals(G, Delta)
        return StructureReport(HP, res, {k: 1e-11 for k in res})
    if flavor != EH:
        raise ValueError(f"unknown flavor {flavor!r}")
    if rng is None:
        gen = np.random.default_rng(seed)
        draw = lambda: gen.uniform(-1, 1, (dim_h, dim_h)) + 1j * gen.uniform(-1, 1, (dim_h, dim_h))  # noqa: E731
    else:
        draw = lambda: rng.complex_matrix(dim_h)  # noqa: E731
    unit = float(np.max(np.abs(psi.apply(np.eye(dim_h)))))
    flip = 0.0
    hom = 0.0
    for _ in range(pairs):
        a, b = draw(), draw()
        flip = max(flip, float(np.max(np.abs(psi.apply(a.conj().T) - psi.apply(a).conj().T))))
        hom = max(hom, eh_homomorphism_residual(psi, Delta, a, b))
    res = {"unital": unit, "flip_adjoint": flip, "homomorphism": hom}
    return StructureReport(EH, res, {"unital": 1e-13, "flip_adjoint": 1e-12, "homomorphism": 1e-11})
