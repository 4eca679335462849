"""State-preserving conditional expectations on ``B(K)`` and their lifts."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gns import DensityMatrix, GnsSpace
from .linalg import SuperOperator, weighted_partial_trace

__all__ = [
    "CHOI_TOL",
    "CondExpectation",
    "LiftedExpectation",
    "VacuumSplit",
    "ValidationReport",
    "build_condexp",
    "pinching",
    "schur_isometry",
    "diagonal_entrywise",
    "validate_condexp",
    "lift_delta",
    "vacuum_split",
    "noise_span_dim",
]

CHOI_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CondExpectation:
    """A conditional expectation ``d`` on ``B(K)``.

    ``kind`` is ``"diagonal"``, ``"block"``, ``"state"`` or ``"pinching"``;
    ``blocks`` records the partition of eigen-indices for pinchings.
    """

    kind: str
    d: SuperOperator
    blocks: tuple[tuple[int, ...], ...] = ()
    description: str = ""

    @property
    def dim(self) -> int:
        return self.d.dim_in

    def __call__(self, X) -> np.ndarray:
        return self.d.apply(X)

    def perp(self, X) -> np.ndarray:
        return np.asarray(X) - self.d.apply(X)


def _check_partition(blocks: Sequence[Sequence[int]], n: int) -> tuple[tuple[int, ...], ...]:
    flat = [int(j) for b in blocks for j in b]
    if any(len(b) == 0 for b in blocks):
        raise ValueError("partition contains an empty block")
    if sorted(flat) != list(range(n)):
        missing = sorted(set(range(n)) - set(flat))
        dup = sorted({j for j in flat if flat.count(j) > 1})
        extra = sorted(set(flat) - set(range(n)))
        raise ValueError(f"malformed partition of {n} indices: missing={missing} duplicated={dup} out_of_range={extra}")
    return tuple(tuple(int(j) for j in b) for b in blocks)


def pinching(basis, blocks: Sequence[Sequence[int]], kind: str = "pinching") -> CondExpectation:
    """``X -> sum_b P_b X P_b`` with ``P_b`` spanned by the listed columns of ``basis``.

    No relation to any density matrix is assumed; use :func:`validate_condexp`.
    """
    B = np.asarray(basis, dtype=np.complex128)
    n = B.shape[0]
    parts = _check_partition(blocks, n)
    projectors = [B[:, list(b)] @ B[:, list(b)].conj().T for b in parts]
    d = SuperOperator.from_function(lambda X: sum(P @ X @ P for P in projectors), n, n)
    return CondExpectation(kind, d, parts, f"pinching onto blocks {[list(b) for b in parts]}")


def schur_isometry(rho: DensityMatrix) -> np.ndarray:
    """``S e_j = e_j (x) e_j`` as an ``n^2 x n`` matrix."""
    E = rho.eigenvectors
    n = rho.dim
    S = np.zeros((n * n, n), dtype=np.complex128)
    for j in range(n):
        S += np.outer(np.kron(E[:, j], E[:, j]), E[:, j].conj())
    return S


def diagonal_entrywise(rho: DensityMatrix, X) -> np.ndarray:
    """``d(X)[j, k] = delta_jk X[j, j]`` in the eigenbasis."""
    Xe = rho.to_eigenbasis(X)
    return rho.from_eigenbasis(np.diag(np.diag(Xe)))


def build_condexp(kind: str, rho: DensityMatrix, blocks: Sequence[Sequence[int]] | None = None) -> CondExpectation:
    n = rho.dim
    if kind == "diagonal":
        S = schur_isometry(rho)
        eye = np.eye(n)
        d = SuperOperator.from_function(lambda X: S.conj().T @ np.kron(X, eye) @ S, n, n)
        return CondExpectation("diagonal", d, tuple((j,) for j in range(n)), "diagonal map of the eigenbasis")
    if kind == "block":
        if blocks is None:
            raise ValueError("block conditional expectation needs a partition")
        ce = pinching(rho.eigenvectors, blocks, kind="block")
        return ce
    if kind == "state":
        r = rho.matrix
        d = SuperOperator.from_function(lambda X: np.trace(r @ X) * np.eye(n), n, n)
        return CondExpectation("state", d, (tuple(range(n)),), "X -> tr(rho X) I")
    raise ValueError(f"unknown conditional expectation kind {kind!r}")


@dataclass
class ValidationReport:
    residuals: dict[str, float]
    tolerances: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(self.row_passed(name) for name in self.residuals)

    def row_passed(self, name: str) -> bool:
        if name == "choi_min_eigenvalue":
            return self.residuals[name] >= -self.tolerances[name]
        return self.residuals[name] <= self.tolerances[name]

    def failures(self) -> list[str]:
        return [name for name in self.residuals if not self.row_passed(name)]


def _random_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(-1, 1, (n, n)) + 1j * rng.uniform(-1, 1, (n, n))


def validate_condexp(d: SuperOperator | CondExpectation, rho: DensityMatrix, pairs: int = 100,
                     seed: int = 0, tol: float = 1e-12, rng=None) -> ValidationReport:
    """Residuals of the conditional-expectation laws for ``d``.

    Module identities are sampled on ``pairs`` random ``(X, Y)``;
    state preservation is evaluated on every matrix unit.  ``rng`` may be any
    object with a ``complex_matrix(n)`` method; otherwise numpy's generator
    seeded by ``seed`` is used.
    """
    if isinstance(d, CondExpectation):
        d = d.d
    n = rho.dim
    if d.dim_in != n or d.dim_out != n:
        raise ValueError(f"conditional expectation acts on dim {d.dim_in}, density matrix on {n}")
    M = d.matrix
    eye = np.eye(n)
    residuals = {
        "idempotency": float(np.max(np.abs(M @ M - M))),
        "unitality": float(np.max(np.abs(d.apply(eye) - eye))),
        "choi_min_eigenvalue": float(np.linalg.eigvalsh(_herm(d.choi())).min()),
    }
    if rng is None:
        gen = np.random.default_rng(seed)
        draw = lambda: _random_matrix(gen, n)  # noqa: E731
    else:
        draw = lambda: rng.complex_matrix(n)  # noqa: E731
    left = right = 0.0
    for _ in range(pairs):
        X, Y = draw(), draw()
        dX, dY = d.apply(X), d.apply(Y)
        mid = dX @ dY
        left = max(left, float(np.max(np.abs(d.apply(dX @ Y) - mid))))
        right = max(right, float(np.max(np.abs(d.apply(X @ dY) - mid))))
    residuals["module_left"] = left
    residuals["module_right"] = right
    r = rho.matrix
    pres = 0.0
    for i in range(n):
        for j in range(n):
            E = np.zeros((n, n), dtype=np.complex128)
            E[i, j] = 1.0
            pres = max(pres, abs(np.trace(r @ d.apply(E)) - np.trace(r @ E)))
    residuals["rho_preservation"] = float(pres)
    tolerances = {name: (CHOI_TOL if name == "choi_min_eigenvalue" else tol) for name in residuals}
    return ValidationReport(residuals, tolerances)


def _herm(A: np.ndarray) -> np.ndarray:
    return (A + A.conj().T) / 2


@dataclass(frozen=True, eq=False)
class LiftedExpectation:
    """``delta = I (x) d`` on ``B(h (x) K)`` and its complement."""

    condexp: CondExpectation
    dim_h: int
    delta: SuperOperator = field(init=False)
    delta_perp: SuperOperator = field(init=False)

    def __post_init__(self):
        n = self.condexp.dim
        dh = self.dim_h
        d = self.condexp.d

        def lifted(T):
            T4 = np.asarray(T).reshape(dh, n, dh, n)
            out = np.empty_like(T4)
            for i in range(dh):
                for j in range(dh):
                    out[i, :, j, :] = d.apply(T4[i, :, j, :])
            return out.reshape(dh * n, dh * n)

        delta = SuperOperator.from_function(lifted, dh * n, dh * n)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "delta_perp", SuperOperator.identity(dh * n) - delta)

    @property
    def dim_K(self) -> int:
        return self.condexp.dim


def lift_delta(d: CondExpectation, dim_h: int) -> LiftedExpectation:
    return LiftedExpectation(d, dim_h)


@dataclass(frozen=True, eq=False)
class VacuumSplit:
    """``Delta`` projects ``h (x) hk`` onto ``h (x) k``; ``Delta_perp`` onto ``h (x) C omega``."""

    Delta: np.ndarray
    Delta_perp: np.ndarray
    dim_h: int


def vacuum_split(g: GnsSpace, dim_h: int) -> VacuumSplit:
    eye = np.eye(dim_h)
    Delta = np.kron(eye, g.noise_projector)
    Delta_perp = np.kron(eye, np.outer(g.omega, g.omega.conj()))
    Delta.setflags(write=False)
    Delta_perp.setflags(write=False)
    return VacuumSplit(Delta, Delta_perp, dim_h)


def noise_span_dim(d: CondExpectation, g: GnsSpace, rtol: float = 1e-10) -> int:
    """``dim span{[d_perp(X)] : tr(rho X) = 0}``."""
    n = g.dim_K
    rho = g.rho
    # basis of ker(rho): matrix units minus their expectation times I
    cols = []
    for i in range(n):
        for j in range(n):
            E = np.zeros((n, n), dtype=np.complex128)
            E[i, j] = 1.0
            X = E - rho.expectation(E) * np.eye(n)
            cols.append(g.embed(d.perp(X)))
    A = np.column_stack(cols)
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * max(1.0, s[0])))
