"""Quantum random walks: slice recursion, dense oracle, and embedded walk elements."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gns import GnsSpace
from .linalg import SuperOperator, slice_map, slice_superop, vec

__all__ = [
    "MAX_STEPS",
    "DENSE_MAX_DIM",
    "StepCountError",
    "StepFunction",
    "WalkQuery",
    "discretize",
    "walk_element",
    "walk_dense_oracle",
    "embedded_walk_element",
    "embedded_walk_series",
    "snap_steps",
]

MAX_STEPS = 10**6
DENSE_MAX_DIM = 512


class StepCountError(RuntimeError):
    """A walk would need more than :data:`MAX_STEPS` steps."""


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Piecewise-constant noise-space function, zero after its horizon.

    ``pieces`` is a sequence of ``(duration, value)`` starting at time 0;
    values are coordinates along :attr:`GnsSpace.noise_basis`.
    """

    pieces: tuple

    def __init__(self, pieces: Sequence, dim: int | None = None):
        clean = []
        for duration, value in pieces:
            duration = float(duration)
            value = np.asarray(value, dtype=np.complex128).reshape(-1)
            if not (duration > 0 and math.isfinite(duration)):
                raise ValueError(f"step durations must be positive and finite, got {duration}")
            if not np.all(np.isfinite(value)):
                raise ValueError("step values must be finite")
            if dim is not None and value.shape != (dim,):
                raise ValueError(f"step value has length {value.size}, expected {dim}")
            value.setflags(write=False)
            clean.append((duration, value))
        if len({v.size for _, v in clean}) > 1:
            raise ValueError("step values have inconsistent lengths")
        object.__setattr__(self, "pieces", tuple(clean))

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls(())

    @property
    def horizon(self) -> float:
        return float(sum(d for d, _ in self.pieces))

    def breakpoints(self) -> list[float]:
        out, t = [0.0], 0.0
        for d, _ in self.pieces:
            t += d
            out.append(t)
        return out

    def value_at(self, t: float, dim: int) -> np.ndarray:
        start = 0.0
        for d, v in self.pieces:
            if start <= t < start + d:
                return np.asarray(v)
            start += d
        return np.zeros(dim, dtype=np.complex128)

    def integral(self, lo: float, hi: float, dim: int) -> np.ndarray:
        """``int_lo^hi f(t) dt`` (exact for piecewise-constant ``f``)."""
        total = np.zeros(dim, dtype=np.complex128)
        start = 0.0
        for d, v in self.pieces:
            end = start + d
            overlap = min(hi, end) - max(lo, start)
            if overlap > 0:
                total += overlap * v
            start = end
        return total


def inner_integral(f: StepFunction, g: StepFunction) -> complex:
    """``int_0^inf <f(t), g(t)> dt``."""
    cuts = sorted(set(f.breakpoints()) | set(g.breakpoints()))
    total = 0j
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        dim = _dim(f, g)
        total += (hi - lo) * complex(np.vdot(f.value_at(mid, dim), g.value_at(mid, dim)))
    return total


def _dim(*fs: StepFunction) -> int:
    for f in fs:
        if f.pieces:
            return f.pieces[0][1].size
    return 0


@dataclass(frozen=True, eq=False)
class WalkQuery:
    a: np.ndarray
    u: np.ndarray
    v: np.ndarray
    f: StepFunction
    g: StepFunction
    tau: float
    t: float


def discretize(f: StepFunction, tau: float, N: int, dim: int | None = None) -> list[np.ndarray]:
    """Cell values ``tau^(-1/2) int_{k tau}^{(k+1) tau} f`` for ``k < N``."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    dim = _dim(f) if dim is None else dim
    scale = tau**-0.5
    return [scale * f.integral(k * tau, (k + 1) * tau, dim) for k in range(N)]


def snap_steps(t: float, tau: float) -> int:
    """``floor(t / tau)``, forgiving rounding just below an integer."""
    if t < 0:
        raise ValueError(f"evaluation time must be nonnegative, got {t}")
    r = t / tau
    n = math.floor(r)
    if r - n > 1 - 1e-9:
        n += 1
    return int(n)


def walk_element(Phi: SuperOperator, a, u, v, xs: Sequence, ys: Sequence) -> complex:
    """``<u (x) x_0 (x) ... , Phi^(n)(a) v (x) y_0 (x) ...>`` by slice recursion.

    Copy ``k`` slices the ``(n-1-k)``-th application of ``Phi``: the first
    interaction is sliced by the last tensor copy.
    """
    if len(xs) != len(ys):
        raise ValueError(f"slice vector lists differ in length: {len(xs)} != {len(ys)}")
    dim_h = Phi.dim_in
    c = np.asarray(a, dtype=np.complex128)
    for x, y in zip(reversed(list(xs)), reversed(list(ys))):
        c = slice_map(Phi.apply(c), x, y, dim_h)
    return complex(np.vdot(u, c @ np.asarray(v)))


def walk_dense_oracle(Phi: SuperOperator, a, n: int) -> np.ndarray:
    """``Phi^(n)(a)`` on ``h (x) H^(x)n``, built by lifting ``Phi`` factorwise.

    ``Phi^(k+1)(a)`` is obtained by applying ``Phi`` to every ``h``-entry of
    ``Phi^(k)(a)`` and inserting the new copy of ``H`` directly after ``h``.
    """
    dim_h = Phi.dim_in
    dim_H = Phi.dim_out // dim_h
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > 3 or dim_h * dim_H**n > DENSE_MAX_DIM:
        raise ValueError(f"dense walk oracle limited to n <= 3 and dimension <= {DENSE_MAX_DIM}")
    T = np.asarray(a, dtype=np.complex128)
    for k in range(n):
        rest = dim_H**k
        T4 = T.reshape(dim_h, rest, dim_h, rest)
        out = np.zeros((dim_h, dim_H, rest, dim_h, dim_H, rest), dtype=np.complex128)
        for p in range(rest):
            for q in range(rest):
                out[:, :, p, :, :, q] = Phi.apply(T4[:, p, :, q]).reshape(dim_h, dim_H, dim_h, dim_H)
        T = out.reshape(dim_h * dim_H * rest, dim_h * dim_H * rest)
    return T


def _hat_lists(g: GnsSpace, f: StepFunction, gg: StepFunction, tau: float, N: int):
    dim = g.dim_noise
    fx = discretize(f, tau, N, dim)
    gy = discretize(gg, tau, N, dim)
    return [g.hat(x) for x in fx], [g.hat(y) for y in gy]


def _cells_needed(f: StepFunction, g: StepFunction, tau: float) -> int:
    return int(math.ceil(max(f.horizon, g.horizon) / tau - 1e-9))


def embedded_walk_element(q: WalkQuery, Phi: SuperOperator, g: GnsSpace) -> complex:
    """``<u e(f), K_t(a) v e(g)>`` for the embedded walk with generator ``Phi`` into ``B(h (x) hk)``."""
    return embedded_walk_series(Phi, g, q.a, q.u, q.v, q.f, q.g, q.tau, [q.t])[0]


def embedded_walk_series(Phi: SuperOperator, g: GnsSpace, a, u, v, f: StepFunction, gf: StepFunction,
                         tau: float, times: Sequence[float]) -> list[complex]:
    """:func:`embedded_walk_element` at several times in one left-to-right sweep.

    The value after ``n`` steps is ``r_n . vec(a)`` times the tail product,
    where ``r_n`` accumulates the per-cell slice maps from cell 0 upwards.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if Phi.dim_out != Phi.dim_in * g.dim_gns:
        raise ValueError("generator does not map into B(h (x) hk)")
    steps = [snap_steps(t, tau) for t in times]
    n_max = max(steps, default=0)
    if n_max > MAX_STEPS:
        raise StepCountError(f"walk needs {n_max} steps, more than the limit {MAX_STEPS}")
    dim_h = Phi.dim_in
    cells = max(n_max, _cells_needed(f, gf, tau))
    xs, ys = _hat_lists(g, f, gf, tau, cells)
    overlaps = np.array([np.vdot(x, y) for x, y in zip(xs, ys)], dtype=np.complex128)
    # tail[n] = prod_{k >= n} <x_k, y_k>
    tail = np.ones(cells + 1, dtype=np.complex128)
    for k in range(cells - 1, -1, -1):
        tail[k] = tail[k + 1] * overlaps[k]

    a_vec = vec(a)
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    # functional b -> <u, b v> as a row vector on column-stacked b
    r = vec(np.outer(u.conj(), v)).reshape(1, -1)
    cache: dict = {}
    want = sorted(set(steps))
    values = {}
    w = 0
    for n in range(n_max + 1):
        while w < len(want) and want[w] == n:
            values[n] = complex((r @ a_vec)[0]) * tail[n]
            w += 1
        if n == n_max:
            break
        key = (xs[n].tobytes(), ys[n].tobytes())
        M = cache.get(key)
        if M is None:
            M = (slice_superop(xs[n], ys[n], dim_h) @ Phi).matrix
            cache[key] = M
        r = r @ M
    return [values[n] for n in steps]
