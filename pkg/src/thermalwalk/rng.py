"""SplitMix64 counter-based generator for reproducible random draws.

The state is a 64-bit counter advanced by the golden-ratio increment
``0x9E3779B97F4A7C15``; each output is the counter passed through the
finaliser

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

with all arithmetic modulo 2**64.  Doubles in ``[0, 1)`` take the top 53
bits.  Complex matrices are filled in row-major order, real part drawn before
imaginary part, each uniform on ``[-1, 1)``.
"""
from __future__ import annotations

import numpy as np

__all__ = ["SplitMix64"]

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MUL1) & _MASK
        z = ((z ^ (z >> 27)) * _MUL2) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def symmetric(self) -> float:
        return 2.0 * self.uniform() - 1.0

    def complex_scalar(self) -> complex:
        re = self.symmetric()
        return complex(re, self.symmetric())

    def complex_vector(self, n: int) -> np.ndarray:
        return np.array([self.complex_scalar() for _ in range(n)], dtype=np.complex128)

    def complex_matrix(self, rows: int, cols: int | None = None) -> np.ndarray:
        cols = rows if cols is None else cols
        return self.complex_vector(rows * cols).reshape(rows, cols)

    def hermitian(self, n: int) -> np.ndarray:
        A = self.complex_matrix(n)
        return (A + A.conj().T) / 2

    def positive(self, n: int) -> np.ndarray:
        A = self.complex_matrix(n)
        return A @ A.conj().T

    def unitary(self, n: int) -> np.ndarray:
        Q, R = np.linalg.qr(self.complex_matrix(n))
        return Q * (np.diag(R) / np.abs(np.diag(R)))

    def state_kernel(self, rho: np.ndarray) -> np.ndarray:
        """A random ``X`` with ``tr(rho X) = 0``."""
        n = rho.shape[0]
        X = self.complex_matrix(n)
        return X - np.trace(rho @ X) * np.eye(n)
