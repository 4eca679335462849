"""Dense complex linear algebra on finite-dimensional operator spaces.

Operators are plain ``numpy`` arrays of dtype ``complex128``.  Maps between
operator spaces are :class:`SuperOperator` instances acting on
column-stacked coordinates, so that ``A -> X A Y`` has matrix
``kron(Y.T, X)``.

Tensor products always put the system space ``h`` first: an operator on
``h (x) H`` has row index ``i * dim_H + p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "Tolerance",
    "SuperOperator",
    "vec",
    "unvec",
    "kron",
    "ket",
    "dyad",
    "slice_map",
    "slice_superop",
    "weighted_partial_trace",
    "weighted_partial_trace_spectral",
    "ampliation",
    "sandwich",
    "ordered_exp",
    "proxy_norm",
    "is_hermitian",
    "is_unitary",
    "is_psd",
]


@dataclass(frozen=True)
class Tolerance:
    absolute: float = 1e-12
    relative: float = 1e-10

    def __post_init__(self):
        for name in ("absolute", "relative"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"tolerance {name} must be finite and nonnegative, got {value}")

    def close(self, actual, expected) -> bool:
        """``|actual - expected| <= absolute + relative * |expected|`` entrywise."""
        actual = np.asarray(actual)
        expected = np.asarray(expected)
        return bool(np.all(np.abs(actual - expected) <= self.absolute + self.relative * np.abs(expected)))


DEFAULT_TOL = Tolerance()


def _as_complex(A) -> np.ndarray:
    return np.asarray(A, dtype=np.complex128)


def vec(A) -> np.ndarray:
    """Column-stack ``A`` into a 1-d coordinate vector."""
    return _as_complex(A).reshape(-1, order="F")


def unvec(x, rows: int, cols: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    if cols is None:
        cols = rows
    return _as_complex(x).reshape((rows, cols), order="F")


def kron(A, B) -> np.ndarray:
    return np.kron(_as_complex(A), _as_complex(B))


def ket(index: int, dim: int) -> np.ndarray:
    e = np.zeros(dim, dtype=np.complex128)
    e[index] = 1.0
    return e


def dyad(x, y) -> np.ndarray:
    """The rank-one operator ``w -> <y, w> x``."""
    return np.outer(_as_complex(x), _as_complex(y).conj())


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """A linear map ``B(C^dim_in) -> B(C^dim_out)`` on column-stacked coordinates.

    ``matrix`` has shape ``(dim_out**2, dim_in**2)``.
    """

    dim_in: int
    dim_out: int
    matrix: np.ndarray

    def __post_init__(self):
        m = _as_complex(self.matrix)
        if m.shape != (self.dim_out**2, self.dim_in**2):
            raise ValueError(
                f"superoperator matrix has shape {m.shape}, expected "
                f"{(self.dim_out**2, self.dim_in**2)}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], dim_in: int, dim_out: int) -> "SuperOperator":
        """Tabulate a linear map by evaluating it on the matrix units."""
        cols = np.empty((dim_out**2, dim_in**2), dtype=np.complex128)
        for k in range(dim_in**2):
            unit = unvec(ket(k, dim_in**2), dim_in)
            out = _as_complex(fn(unit))
            if out.shape != (dim_out, dim_out):
                raise ValueError(f"map returned shape {out.shape}, expected {(dim_out, dim_out)}")
            cols[:, k] = vec(out)
        return cls(dim_in, dim_out, cols)

    @classmethod
    def identity(cls, dim: int) -> "SuperOperator":
        return cls(dim, dim, np.eye(dim**2, dtype=np.complex128))

    @classmethod
    def zero(cls, dim_in: int, dim_out: int) -> "SuperOperator":
        return cls(dim_in, dim_out, np.zeros((dim_out**2, dim_in**2), dtype=np.complex128))

    def __call__(self, A) -> np.ndarray:
        return self.apply(A)

    def apply(self, A) -> np.ndarray:
        A = _as_complex(A)
        if A.shape != (self.dim_in, self.dim_in):
            raise ValueError(f"operand has shape {A.shape}, expected {(self.dim_in, self.dim_in)}")
        return unvec(self.matrix @ vec(A), self.dim_out)

    def compose(self, first: "SuperOperator") -> "SuperOperator":
        """``self o first``: apply ``first``, then ``self``."""
        if first.dim_out != self.dim_in:
            raise ValueError(f"cannot compose: inner map outputs dim {first.dim_out}, outer expects {self.dim_in}")
        return SuperOperator(first.dim_in, self.dim_out, self.matrix @ first.matrix)

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        return self.compose(other)

    def _check_same(self, other: "SuperOperator"):
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise ValueError("superoperator dimensions differ")

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        self._check_same(other)
        return SuperOperator(self.dim_in, self.dim_out, self.matrix + other.matrix)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        self._check_same(other)
        return SuperOperator(self.dim_in, self.dim_out, self.matrix - other.matrix)

    def __neg__(self) -> "SuperOperator":
        return SuperOperator(self.dim_in, self.dim_out, -self.matrix)

    def __mul__(self, scalar) -> "SuperOperator":
        return SuperOperator(self.dim_in, self.dim_out, scalar * self.matrix)

    __rmul__ = __mul__

    def adjoint_flip(self) -> "SuperOperator":
        """The map ``A -> S(A*)*``; equal to ``self`` iff the map is adjoint-preserving."""
        return SuperOperator.from_function(lambda A: self.apply(A.conj().T).conj().T, self.dim_in, self.dim_out)

    def choi(self) -> np.ndarray:
        """Choi matrix ``sum_ij E_ij (x) S(E_ij)``."""
        d = self.dim_in
        out = np.zeros((d * self.dim_out, d * self.dim_out), dtype=np.complex128)
        for i in range(d):
            for j in range(d):
                E = np.zeros((d, d), dtype=np.complex128)
                E[i, j] = 1.0
                out += np.kron(E, self.apply(E))
        return out


def sandwich(left, right=None) -> SuperOperator:
    """The map ``A -> left A right`` (``right`` defaults to ``left*``)."""
    left = _as_complex(left)
    right = left.conj().T if right is None else _as_complex(right)
    if left.shape[1] != right.shape[0] or left.shape[0] != right.shape[1]:
        raise ValueError("sandwich factors must have transposed shapes")
    return SuperOperator(left.shape[1], left.shape[0], np.kron(right.T, left))


def ampliation(dim_h: int, dim_H: int) -> SuperOperator:
    """The map ``a -> a (x) I_H``."""
    return SuperOperator.from_function(lambda a: np.kron(a, np.eye(dim_H)), dim_h, dim_h * dim_H)


def _split_dim(total: int, dim_h: int) -> int:
    if dim_h <= 0 or total % dim_h:
        raise ValueError(f"operator dimension {total} is not a multiple of dim_h={dim_h}")
    return total // dim_h


def slice_map(T, x, y, dim_h: int) -> np.ndarray:
    """``E^x T E_y`` for ``T`` on ``h (x) H``; antilinear in ``x``, linear in ``y``."""
    T = _as_complex(T)
    x = _as_complex(x)
    y = _as_complex(y)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError("slice_map needs a square operator")
    dim_H = _split_dim(T.shape[0], dim_h)
    if x.shape != (dim_H,) or y.shape != (dim_H,):
        raise ValueError(f"slice vectors must have length {dim_H}")
    T4 = T.reshape(dim_h, dim_H, dim_h, dim_H)
    return np.einsum("p,ipjq,q->ij", x.conj(), T4, y)


def slice_superop(x, y, dim_h: int) -> SuperOperator:
    """:func:`slice_map` for fixed ``x, y`` as a map ``B(h (x) H) -> B(h)``."""
    x = _as_complex(x)
    y = _as_complex(y)
    eye = np.eye(dim_h)
    return sandwich(np.kron(eye, x.conj()[None, :]), np.kron(eye, y[:, None]))


def _check_density(rho: np.ndarray, tol: float = 1e-12) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix must have unit trace, got {tr.real:.17g}")


def weighted_partial_trace(T, rho) -> np.ndarray:
    """``tr_K((I_h (x) rho) T)`` for ``T`` on ``h (x) K``."""
    T = _as_complex(T)
    rho = _as_complex(rho)
    _check_density(rho)
    dim_K = rho.shape[0]
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] % dim_K:
        raise ValueError(f"operator of shape {T.shape} does not act on h (x) K with dim K = {dim_K}")
    dim_h = T.shape[0] // dim_K
    T4 = T.reshape(dim_h, dim_K, dim_h, dim_K)
    return np.einsum("qp,ipjq->ij", rho, T4)


def weighted_partial_trace_spectral(T, weights: Sequence[float], basis) -> np.ndarray:
    """``sum_j w_j E^{e_j} T E_{e_j}`` with ``e_j`` the columns of ``basis``."""
    basis = _as_complex(basis)
    T = _as_complex(T)
    dim_h = _split_dim(T.shape[0], basis.shape[0])
    out = np.zeros((dim_h, dim_h), dtype=np.complex128)
    for w, e in zip(weights, basis.T):
        out += w * slice_map(T, e, e, dim_h)
    return out


def ordered_exp(gens: Sequence[tuple[float, SuperOperator]], a) -> np.ndarray:
    """``exp(s_1 G_1)(exp(s_2 G_2)(... exp(s_m G_m)(a)))``.

    The last interval acts on ``a`` first; an empty list returns ``a``.
    """
    a = _as_complex(a)
    x = vec(a)
    dim = a.shape[0]
    for duration, G in reversed(list(gens)):
        if G.dim_in != G.dim_out or G.dim_in != dim:
            raise ValueError(f"generator acts on dim {G.dim_in}->{G.dim_out}, operand has dim {dim}")
        if not duration > 0:
            raise ValueError(f"interval durations must be positive, got {duration}")
        x = scipy.linalg.expm(duration * G.matrix) @ x
    return unvec(x, dim)


def proxy_norm(S: SuperOperator) -> float:
    """Spectral norm of the coordinate matrix; stands in for the cb norm."""
    return float(np.linalg.norm(S.matrix, 2))


def is_hermitian(A, tol: float = 1e-12) -> bool:
    A = _as_complex(A)
    return bool(np.linalg.norm(A - A.conj().T, 2) <= tol)


def is_unitary(A, tol: float = 1e-12) -> bool:
    A = _as_complex(A)
    eye = np.eye(A.shape[0])
    return bool(np.linalg.norm(A.conj().T @ A - eye, 2) <= tol and np.linalg.norm(A @ A.conj().T - eye, 2) <= tol)


def is_psd(A, tol: float = 1e-12) -> bool:
    A = _as_complex(A)
    if not is_hermitian(A, tol):
        return False
    return bool(np.linalg.eigvalsh((A + A.conj().T) / 2).min() >= -tol)
