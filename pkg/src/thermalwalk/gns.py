"""GNS representation of ``B(K)`` for a faithful density matrix.

With ``rho = sum_j lam_j |e_j><e_j|`` the GNS space is realised as
``C^(n*n)`` with orthonormal basis ``b_ij = lam_j^(-1/2) [E_ij]`` (``E_ij``
the matrix units of the eigenbasis, coordinate index ``i*n + j``).  In these
coordinates ``[X]`` has entries ``lam_j^(1/2) X_e[i, j]`` and
``pi(X) = X_e (x) I_n``, where ``X_e`` is ``X`` written in the eigenbasis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .linalg import SuperOperator, kron, slice_map, weighted_partial_trace

__all__ = [
    "FAITHFULNESS_FLOOR",
    "FaithfulnessError",
    "DensityMatrix",
    "GnsSpace",
    "build_gns",
    "embed_class",
    "lift_pi",
    "lift_rho",
    "basis_change_unitary",
]

FAITHFULNESS_FLOOR = 1e-10


class FaithfulnessError(ValueError):
    """Raised when a density matrix has an eigenvalue below the faithfulness floor."""


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > 1e-12))
    return v * (abs(v[k]) / v[k])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A faithful density matrix together with a chosen eigenbasis.

    ``eigenvectors`` holds ``e_j`` as columns; the order of ``eigenvalues``
    and columns is the labelling used everywhere else (``e_0`` first).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    matrix: np.ndarray = field(init=False)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        E = np.asarray(self.eigenvectors, dtype=np.complex128)
        n = lam.shape[0]
        if E.shape != (n, n):
            raise ValueError(f"eigenvector matrix has shape {E.shape}, expected {(n, n)}")
        if np.linalg.norm(E.conj().T @ E - np.eye(n), 2) > 1e-12:
            raise ValueError("eigenvectors are not orthonormal")
        if abs(lam.sum() - 1.0) > 1e-12:
            raise ValueError(f"eigenvalues must sum to 1, got {lam.sum():.17g}")
        for j, value in enumerate(lam):
            if not value >= FAITHFULNESS_FLOOR:
                raise FaithfulnessError(
                    f"density matrix is not faithful: eigenvalue {j} = {value:.6g} "
                    f"is below the floor {FAITHFULNESS_FLOOR:g}"
                )
        lam.setflags(write=False)
        E.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", E)
        m = (E * lam) @ E.conj().T
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @classmethod
    def from_matrix(cls, matrix) -> "DensityMatrix":
        """Diagonalise ``matrix``; eigenvalues descending, ties broken lexicographically."""
        m = np.asarray(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if np.linalg.norm(m - m.conj().T, 2) > 1e-12:
            raise ValueError("density matrix must be Hermitian")
        if abs(np.trace(m) - 1.0) > 1e-12:
            raise ValueError(f"density matrix must have unit trace, got {np.trace(m).real:.17g}")
        lam, E = np.linalg.eigh((m + m.conj().T) / 2)
        vecs = [_canonical_phase(E[:, j]) for j in range(len(lam))]
        order = sorted(
            range(len(lam)),
            key=lambda j: (-round(lam[j], 14), tuple(np.column_stack([vecs[j].real, vecs[j].imag]).ravel())),
        )
        return cls(lam[order], np.column_stack([vecs[j] for j in order]))

    @classmethod
    def from_eigenvalues(cls, eigenvalues: Sequence[float], basis=None) -> "DensityMatrix":
        """Build from eigenvalues (and optionally eigenvector columns).

        Eigenvalues are sorted descending; equal eigenvalues keep their given order.
        """
        lam = np.asarray(eigenvalues, dtype=float)
        n = lam.shape[0]
        E = np.eye(n, dtype=np.complex128) if basis is None else np.asarray(basis, dtype=np.complex128)
        order = sorted(range(n), key=lambda j: -lam[j])
        return cls(lam[order], E[:, order])

    def expectation(self, X) -> complex:
        return complex(np.trace(self.matrix @ np.asarray(X)))

    def to_eigenbasis(self, X) -> np.ndarray:
        E = self.eigenvectors
        return E.conj().T @ np.asarray(X, dtype=np.complex128) @ E

    def from_eigenbasis(self, X) -> np.ndarray:
        E = self.eigenvectors
        return E @ np.asarray(X, dtype=np.complex128) @ E.conj().T


@dataclass(frozen=True, eq=False)
class GnsSpace:
    """GNS data ``(hk, pi, omega)`` for the state ``X -> tr(rho X)``."""

    rho: DensityMatrix

    @property
    def dim_K(self) -> int:
        return self.rho.dim

    @property
    def dim_gns(self) -> int:
        return self.rho.dim**2

    @property
    def weights(self) -> np.ndarray:
        return self.rho.eigenvalues

    def embed(self, X) -> np.ndarray:
        """Coordinates of ``[X]``."""
        X = np.asarray(X, dtype=np.complex128)
        if X.shape != (self.dim_K, self.dim_K):
            raise ValueError(f"expected a {self.dim_K}x{self.dim_K} operator, got shape {X.shape}")
        return (self.rho.to_eigenbasis(X) * np.sqrt(self.weights)[None, :]).reshape(-1)

    def unembed(self, x) -> np.ndarray:
        """Inverse of :meth:`embed` (``[.]`` is bijective for faithful states)."""
        n = self.dim_K
        Xe = np.asarray(x, dtype=np.complex128).reshape(n, n) / np.sqrt(self.weights)[None, :]
        return self.rho.from_eigenbasis(Xe)

    def pi(self, X) -> np.ndarray:
        return kron(self.rho.to_eigenbasis(X), np.eye(self.dim_K))

    @cached_property
    def pi_superop(self) -> SuperOperator:
        return SuperOperator.from_function(self.pi, self.dim_K, self.dim_gns)

    @cached_property
    def omega(self) -> np.ndarray:
        w = self.embed(np.eye(self.dim_K))
        w.setflags(write=False)
        return w

    @cached_property
    def noise_basis(self) -> np.ndarray:
        """Orthonormal basis of ``k``, one column per vector.

        The off-diagonal ``b_ij`` (``i != j``, lexicographic) come first, then
        ``n - 1`` diagonal directions orthogonal to ``omega``.
        """
        n = self.dim_K
        cols = []
        for i in range(n):
            for j in range(n):
                if i != j:
                    v = np.zeros(n * n, dtype=np.complex128)
                    v[i * n + j] = 1.0
                    cols.append(v)
        s = np.sqrt(self.weights)
        Q, _ = np.linalg.qr(np.column_stack([s, np.eye(n)[:, : n - 1]]))
        for c in range(1, n):
            d = Q[:, c].real
            d = d * np.sign(d[np.argmax(np.abs(d))])
            v = np.zeros(n * n, dtype=np.complex128)
            v[[j * n + j for j in range(n)]] = d
            cols.append(v)
        B = np.column_stack(cols) if cols else np.zeros((n * n, 0), dtype=np.complex128)
        B.setflags(write=False)
        return B

    @property
    def dim_noise(self) -> int:
        return self.dim_gns - 1

    @cached_property
    def noise_projector(self) -> np.ndarray:
        P = np.eye(self.dim_gns, dtype=np.complex128) - np.outer(self.omega, self.omega.conj())
        P.setflags(write=False)
        return P

    def noise_vector(self, x) -> np.ndarray:
        """Map coordinates along :attr:`noise_basis` into the GNS space."""
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != (self.dim_noise,):
            raise ValueError(f"noise coordinates must have length {self.dim_noise}, got {x.shape}")
        return self.noise_basis @ x

    def hat(self, x) -> np.ndarray:
        """``omega + x`` for noise coordinates ``x``."""
        return self.omega + self.noise_vector(x)


def build_gns(rho: DensityMatrix) -> GnsSpace:
    return GnsSpace(rho)


def embed_class(g: GnsSpace, X) -> np.ndarray:
    return g.embed(X)


def lift_pi(g: GnsSpace, dim_h: int) -> SuperOperator:
    """``I (x) pi`` as a map ``B(h (x) K) -> B(h (x) hk)``."""
    n = g.dim_K
    U = np.kron(np.eye(dim_h), g.rho.eigenvectors)
    eye = np.eye(n)
    return SuperOperator.from_function(lambda T: np.kron(U.conj().T @ T @ U, eye), dim_h * n, dim_h * n * n)


def lift_rho(g: GnsSpace, dim_h: int) -> SuperOperator:
    """``I (x) rho``: the weighted partial trace as a map ``B(h (x) K) -> B(h)``."""
    rho = g.rho.matrix
    return SuperOperator.from_function(lambda T: weighted_partial_trace(T, rho), dim_h * g.dim_K, dim_h)


def basis_change_unitary(g_e: GnsSpace, g_f: GnsSpace) -> np.ndarray:
    """The unitary ``W[X] = [U* X U]`` with ``U e_j = f_j``, in the coordinates of ``g_e``.

    Equivalently ``W @ g_e.embed(X) == g_f.embed(X)``.
    """
    if not np.allclose(g_e.weights, g_f.weights, rtol=0, atol=1e-12):
        raise ValueError("eigenbases must carry matching eigenvalues")
    U = g_f.rho.eigenvectors @ g_e.rho.eigenvectors.conj().T
    n = g_e.dim_K
    cols = []
    for i in range(n):
        for j in range(n):
            Eij = g_e.rho.from_eigenbasis(np.outer(np.eye(n)[i], np.eye(n)[j]))
            cols.append(g_e.embed(U.conj().T @ Eij @ U) / np.sqrt(g_e.weights[j]))
    return np.column_stack(cols)


def statelift_residual(g: GnsSpace, T, X, Y, dim_h: int) -> float:
    """Max-abs residual of ``E^[X] pi~(T) E_[Y] = rho~((I (x) X)* T (I (x) Y))``."""
    lhs = slice_map(lift_pi(g, dim_h).apply(T), g.embed(X), g.embed(Y), dim_h)
    IX = np.kron(np.eye(dim_h), X)
    IY = np.kron(np.eye(dim_h), Y)
    rhs = weighted_partial_trace(IX.conj().T @ T @ IY, g.rho.matrix)
    return float(np.max(np.abs(lhs - rhs)))
