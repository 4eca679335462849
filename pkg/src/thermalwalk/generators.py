"""Walk generators, their vacuum and thermal modifications, and limit generators.

Superoperators here map ``B(h)`` into ``B(h (x) K)`` (particle side) or into
``B(h (x) hk)`` (GNS side).  The interaction model follows the dipole-type
Hamiltonian ``H_tot(tau) = H_d + tau^(-1/2) H_o``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .condexp import CondExpectation, LiftedExpectation, VacuumSplit, noise_span_dim
from .gns import DensityMatrix, GnsSpace, lift_pi
from .linalg import SuperOperator, ampliation, proxy_norm, sandwich, slice_map, weighted_partial_trace

__all__ = [
    "HP",
    "EH",
    "ModelHypothesisError",
    "InteractionModel",
    "attal_joye_model",
    "check_hypotheses",
    "build_W",
    "build_walk_generator",
    "gns_generator",
    "GeneratorBlocks",
    "modify_vacuum",
    "modify_vacuum_blocks",
    "modify_thermal",
    "modify_thermal_split",
    "limit_psi",
    "thermal_drift",
    "thermal_Psi",
    "hp_G",
    "noise_count",
    "vacuum_reference_generators",
    "attal_joye_coordinates",
    "generator_distance",
    "remainder_term",
]

HP = "HP"
EH = "EH"
HYPOTHESIS_TOL = 1e-12


class ModelHypothesisError(ValueError):
    """``H_d = delta(H_d)`` or ``H_o = delta_perp(H_o)`` fails."""


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0:
        raise ValueError(f"step size tau must be positive, got {tau}")
    return tau


@dataclass(frozen=True, eq=False)
class InteractionModel:
    """System-particle interaction data.

    ``V`` maps ``h`` into ``h (x) K_x`` where ``K_x`` is spanned by the
    eigenvectors of ``rho`` other than ``e_0 = rho.eigenvectors[:, e0_index]``.
    """

    H_sys: np.ndarray
    H_par: np.ndarray
    V: np.ndarray
    rho: DensityMatrix
    flavor: str = HP
    e0_index: int = 0

    def __post_init__(self):
        if self.flavor not in (HP, EH):
            raise ValueError(f"flavor must be {HP!r} or {EH!r}, got {self.flavor!r}")
        for name in ("H_sys", "H_par", "V"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        dh, n = self.dim_h, self.dim_K
        if self.H_sys.shape != (dh, dh) or self.H_par.shape != (n, n):
            raise ValueError("H_sys / H_par have inconsistent shapes")
        if self.V.shape != (dh * (n - 1), dh):
            raise ValueError(f"V must have shape {(dh * (n - 1), dh)}, got {self.V.shape}")
        for name in ("H_sys", "H_par"):
            M = getattr(self, name)
            if np.linalg.norm(M - M.conj().T, 2) > 1e-12:
                raise ValueError(f"{name} must be Hermitian")
        if not 0 <= self.e0_index < n:
            raise ValueError(f"e0_index {self.e0_index} out of range for dim_K = {n}")

    @property
    def dim_h(self) -> int:
        return self.H_sys.shape[0]

    @property
    def dim_K(self) -> int:
        return self.rho.dim

    @property
    def e0(self) -> np.ndarray:
        return self.rho.eigenvectors[:, self.e0_index]

    @property
    def cross_basis(self) -> np.ndarray:
        keep = [j for j in range(self.dim_K) if j != self.e0_index]
        return self.rho.eigenvectors[:, keep]

    @cached_property
    def Q(self) -> np.ndarray:
        """Embedding ``h (x) K_x -> h (x) K``."""
        return np.kron(np.eye(self.dim_h), self.cross_basis)

    @cached_property
    def E_e0(self) -> np.ndarray:
        """``u -> u (x) e_0``."""
        return np.kron(np.eye(self.dim_h), self.e0[:, None])

    @cached_property
    def H_d(self) -> np.ndarray:
        return np.kron(self.H_sys, np.eye(self.dim_K)) + np.kron(np.eye(self.dim_h), self.H_par)

    @cached_property
    def H_o(self) -> np.ndarray:
        A = self.Q @ self.V @ self.E_e0.conj().T
        return A + A.conj().T

    def H_tot(self, tau: float) -> np.ndarray:
        tau = _check_tau(tau)
        return self.H_d + tau**-0.5 * self.H_o

    @property
    def mu(self) -> float:
        """``<e_0, H_par e_0>``."""
        return float(np.real(self.e0.conj() @ self.H_par @ self.e0))

    def with_flavor(self, flavor: str) -> "InteractionModel":
        return InteractionModel(self.H_sys, self.H_par, self.V, self.rho, flavor, self.e0_index)


def attal_joye_model(H_sys, mu, V, rho: DensityMatrix, flavor: str = HP, e0_index: int = 0) -> InteractionModel:
    """Model with ``H_par = sum_j mu_j |e_j><e_j|`` in the eigenbasis of ``rho``."""
    E = rho.eigenvectors
    H_par = (E * np.asarray(mu, dtype=float)) @ E.conj().T
    return InteractionModel(np.asarray(H_sys), H_par, np.asarray(V), rho, flavor, e0_index)


def check_hypotheses(model: InteractionModel, lift: LiftedExpectation, tol: float = HYPOTHESIS_TOL) -> dict[str, float]:
    """Residuals of ``H_d = delta(H_d)`` and ``H_o = delta_perp(H_o)``; raises if either exceeds ``tol``."""
    res = {
        "H_d_diagonal": float(np.max(np.abs(lift.delta.apply(model.H_d) - model.H_d))),
        "H_o_offdiagonal": float(np.max(np.abs(lift.delta_perp.apply(model.H_o) - model.H_o))),
    }
    bad = {k: v for k, v in res.items() if v > tol}
    if bad:
        detail = ", ".join(f"{k} residual {v:.3e}" for k, v in bad.items())
        raise ModelHypothesisError(f"interaction model violates the conditional-expectation hypotheses: {detail}")
    return res


def build_W(model: InteractionModel, tau: float) -> np.ndarray:
    """``exp(-i tau H_tot(tau))``."""
    tau = _check_tau(tau)
    return scipy.linalg.expm(-1j * tau * model.H_tot(tau))


def build_walk_generator(model: InteractionModel, tau: float) -> SuperOperator:
    """``Phi(tau): B(h) -> B(h (x) K)``; ``(a (x) I) W`` for HP, ``W* (a (x) I) W`` for EH."""
    W = build_W(model, tau)
    amp = ampliation(model.dim_h, model.dim_K)
    eye = np.eye(W.shape[0])
    if model.flavor == HP:
        return sandwich(eye, W) @ amp
    return sandwich(W.conj().T, W) @ amp


def gns_generator(Phi: SuperOperator, g: GnsSpace) -> SuperOperator:
    """``pi~ o Phi``."""
    dim_h = Phi.dim_out // g.dim_K
    return lift_pi(g, dim_h) @ Phi


class GeneratorBlocks:
    """Block decomposition of a map into ``B(h (x) hk)`` along ``hk = C omega (+) k``.

    :meth:`blocks` returns ``(b00, b0x, bx0, bxx)`` with ``b0x: h (x) k -> h``
    and so on, using :attr:`GnsSpace.noise_basis` for ``k``.
    """

    def __init__(self, S: SuperOperator, g: GnsSpace):
        self.S = S
        self.g = g
        self.dim_h = S.dim_in
        if S.dim_out != self.dim_h * g.dim_gns:
            raise ValueError("map does not land in B(h (x) hk)")
        self.frame = np.kron(np.eye(self.dim_h), np.column_stack([g.omega, g.noise_basis]))

    def blocks(self, a) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return split_blocks(self.S.apply(a), self.g, self.dim_h, self.frame)

    def reassemble(self, b00, b0x, bx0, bxx) -> np.ndarray:
        return join_blocks(b00, b0x, bx0, bxx, self.g, self.dim_h, self.frame)


def _frame(g: GnsSpace, dim_h: int) -> np.ndarray:
    return np.kron(np.eye(dim_h), np.column_stack([g.omega, g.noise_basis]))


def split_blocks(T, g: GnsSpace, dim_h: int, frame=None):
    frame = _frame(g, dim_h) if frame is None else frame
    m = g.dim_gns
    M = (frame.conj().T @ np.asarray(T) @ frame).reshape(dim_h, m, dim_h, m)
    k = m - 1
    b00 = M[:, 0, :, 0]
    b0x = M[:, 0, :, 1:].reshape(dim_h, dim_h * k)
    bx0 = M[:, 1:, :, 0].reshape(dim_h * k, dim_h)
    bxx = M[:, 1:, :, 1:].reshape(dim_h * k, dim_h * k)
    return b00, b0x, bx0, bxx


def join_blocks(b00, b0x, bx0, bxx, g: GnsSpace, dim_h: int, frame=None) -> np.ndarray:
    frame = _frame(g, dim_h) if frame is None else frame
    m = g.dim_gns
    k = m - 1
    M = np.zeros((dim_h, m, dim_h, m), dtype=np.complex128)
    M[:, 0, :, 0] = b00
    M[:, 0, :, 1:] = np.asarray(b0x).reshape(dim_h, dim_h, k)
    M[:, 1:, :, 0] = np.asarray(bx0).reshape(dim_h, k, dim_h)
    M[:, 1:, :, 1:] = np.asarray(bxx).reshape(dim_h, k, dim_h, k)
    M = M.reshape(dim_h * m, dim_h * m)
    return frame @ M @ frame.conj().T


def modify_vacuum(S: SuperOperator, tau: float, split: VacuumSplit) -> SuperOperator:
    """``m(S, tau)(a) = L (S(a) - a (x) I) L`` with ``L = tau^(-1/2) Delta_perp + Delta``."""
    tau = _check_tau(tau)
    dh = split.dim_h
    L = tau**-0.5 * split.Delta_perp + split.Delta
    amp = ampliation(dh, S.dim_out // dh)
    return sandwich(L, L) @ (S - amp)


def modify_vacuum_blocks(S: SuperOperator, tau: float, g: GnsSpace) -> SuperOperator:
    """Same map as :func:`modify_vacuum`, computed block by block."""
    tau = _check_tau(tau)
    gb = GeneratorBlocks(S, g)
    dh = gb.dim_h
    k = g.dim_noise

    def fn(a):
        b00, b0x, bx0, bxx = gb.blocks(a)
        return gb.reassemble(
            (b00 - a) / tau,
            b0x / np.sqrt(tau),
            bx0 / np.sqrt(tau),
            bxx - np.kron(a, np.eye(k)),
        )

    return SuperOperator.from_function(fn, dh, S.dim_out)


def _prime(Phi: SuperOperator, dim_K: int) -> SuperOperator:
    return Phi - ampliation(Phi.dim_in, dim_K)


def modify_thermal(Phi: SuperOperator, tau: float, lift: LiftedExpectation) -> SuperOperator:
    """``(tau^-1 delta + tau^(-1/2) delta_perp) o Phi'``."""
    tau = _check_tau(tau)
    scale = (1.0 / tau) * lift.delta + tau**-0.5 * lift.delta_perp
    return scale @ _prime(Phi, lift.dim_K)


def modify_thermal_split(Phi: SuperOperator, tau: float, lift: LiftedExpectation) -> SuperOperator:
    """``tau^-1 delta o Phi' + tau^(-1/2) delta_perp o Phi``."""
    tau = _check_tau(tau)
    return (1.0 / tau) * (lift.delta @ _prime(Phi, lift.dim_K)) + tau**-0.5 * (lift.delta_perp @ Phi)


def limit_psi(Psi: SuperOperator, lift: LiftedExpectation, g: GnsSpace, split: VacuumSplit) -> SuperOperator:
    """The limit generator: vacuum-vacuum block of ``pi~ o Psi`` plus the
    vacuum-noise and noise-vacuum blocks of ``pi~ o delta_perp o Psi``.
    The noise-noise (gauge) block is zero by construction."""
    if Psi.dim_out != lift.dim_h * g.dim_K:
        raise ValueError("Psi does not map into B(h (x) K) for this GNS space")
    P = lift_pi(g, lift.dim_h)
    D, Dp = split.Delta, split.Delta_perp
    full = P @ Psi
    off = P @ lift.delta_perp @ Psi
    return sandwich(Dp, Dp) @ full + sandwich(D, Dp) @ off + sandwich(Dp, D) @ off


def thermal_drift(model: InteractionModel, lift: LiftedExpectation) -> np.ndarray:
    """``F' = -i (H_d + H_o) - 1/2 delta(H_o^2)``."""
    H_o = model.H_o
    return -1j * (model.H_d + H_o) - 0.5 * lift.delta.apply(H_o @ H_o)


def thermal_Psi(model: InteractionModel, lift: LiftedExpectation) -> SuperOperator:
    """Closed-form limit of ``n(Phi(tau), tau)`` for the HP or EH walk generator."""
    check_hypotheses(model, lift)
    dh, n = model.dim_h, model.dim_K
    eye = np.eye(n)
    if model.flavor == HP:
        F = thermal_drift(model, lift)
        return SuperOperator.from_function(lambda a: np.kron(a, eye) @ F, dh, dh * n)
    H = model.H_d + model.H_o
    H_o = model.H_o
    dH_o2 = lift.delta.apply(H_o @ H_o)
    delta = lift.delta

    def fn(a):
        A = np.kron(a, eye)
        return -1j * (A @ H - H @ A) + delta.apply(H_o @ A @ H_o) - 0.5 * (A @ dH_o2 + dH_o2 @ A)

    return SuperOperator.from_function(fn, dh, dh * n)


def hp_G(F, lift: LiftedExpectation, g: GnsSpace, split: VacuumSplit) -> np.ndarray:
    """``G = Dp pi~(F) Dp + D pi~(dp(F)) Dp + Dp pi~(dp(F)) D``."""
    P = lift_pi(g, lift.dim_h)
    piF = P.apply(F)
    piFp = P.apply(lift.delta_perp.apply(F))
    D, Dp = split.Delta, split.Delta_perp
    return Dp @ piF @ Dp + D @ piFp @ Dp + Dp @ piFp @ D


def noise_count(d: CondExpectation, g: GnsSpace) -> int:
    """Number of independent noises driving the limit cocycle: ``2 dim{[d_perp(X)]}``."""
    return 2 * noise_span_dim(d, g)


def vacuum_reference_generators(model: InteractionModel) -> tuple[np.ndarray, SuperOperator]:
    """``F`` and the EH generator of the vacuum-state walk, on ``h (x) K`` with ``e_0`` as vacuum."""
    dh, n = model.dim_h, model.dim_K
    V = model.V
    Q, Ee = model.Q, model.E_e0
    VV = V.conj().T @ V
    top = -1j * (model.H_sys + model.mu * np.eye(dh)) - 0.5 * VV
    F = Ee @ top @ Ee.conj().T - 1j * Ee @ V.conj().T @ Q.conj().T - 1j * Q @ V @ Ee.conj().T
    k_eye = np.eye(n - 1)
    Hs = model.H_sys

    def phi(a):
        ak = np.kron(a, k_eye)
        b00 = -1j * (a @ Hs - Hs @ a) + V.conj().T @ ak @ V - 0.5 * (a @ VV + VV @ a)
        b0x = -1j * a @ V.conj().T + 1j * V.conj().T @ ak
        bx0 = -1j * ak @ V + 1j * V @ a
        return Ee @ b00 @ Ee.conj().T + Ee @ b0x @ Q.conj().T + Q @ bx0 @ Ee.conj().T

    return F, SuperOperator.from_function(phi, dh, dh * n)


def attal_joye_coordinates(model: InteractionModel, a, X, Y) -> dict[str, np.ndarray]:
    """Closed-form slices of the limit generator for the diagonal conditional expectation.

    Returns the ``omega-omega``, ``[X]-omega``, ``omega-[Y]`` and ``[X]-[Y]``
    components for trace-zero ``X, Y``.
    """
    dh = model.dim_h
    rho = model.rho.matrix
    a = np.asarray(a, dtype=np.complex128)
    X = np.asarray(X, dtype=np.complex128)
    Y = np.asarray(Y, dtype=np.complex128)
    e0 = model.e0
    eye = np.eye(dh)
    QV = model.Q @ model.V
    VQ = QV.conj().T

    def bra(x):
        return np.kron(eye, np.asarray(x).conj()[None, :])

    def ket(y):
        return np.kron(eye, np.asarray(y)[:, None])

    H_o = model.H_o
    rho_H_o2 = weighted_partial_trace(H_o @ H_o, rho)
    x_part = bra(X @ rho @ e0) @ QV + VQ @ ket(rho @ X.conj().T @ e0)
    y_part = bra(rho @ Y.conj().T @ e0) @ QV + VQ @ ket(Y @ rho @ e0)
    if model.flavor == HP:
        mu = np.real(np.trace(rho @ model.H_par))
        oo = -1j * a @ (model.H_sys + mu * eye) - 0.5 * a @ rho_H_o2
        xo = -1j * a @ x_part
        oy = -1j * a @ y_part
    else:
        Hs = model.H_sys
        sandwiched = weighted_partial_trace(H_o @ np.kron(a, np.eye(model.dim_K)) @ H_o, rho)
        oo = -1j * (a @ Hs - Hs @ a) + sandwiched - 0.5 * (a @ rho_H_o2 + rho_H_o2 @ a)
        xo = -1j * (a @ x_part - x_part @ a)
        oy = -1j * (a @ y_part - y_part @ a)
    return {"omega_omega": oo, "X_omega": xo, "omega_Y": oy, "X_Y": np.zeros((dh, dh), dtype=np.complex128)}


def generator_distance(model: InteractionModel, tau: float, lift: LiftedExpectation, Psi: SuperOperator | None = None) -> float:
    """Proxy norm of ``n(Phi(tau), tau) - Psi``."""
    if Psi is None:
        Psi = thermal_Psi(model, lift)
    return proxy_norm(modify_thermal(build_walk_generator(model, tau), tau, lift) - Psi)


def remainder_term(Phi: SuperOperator, tau: float, lift: LiftedExpectation, g: GnsSpace, split: VacuumSplit) -> SuperOperator:
    """``R`` with ``m(pi~ o Phi, tau) - psi = [Theta blocks] + tau^(1/2) R``."""
    tau = _check_tau(tau)
    P = lift_pi(g, lift.dim_h)
    N = modify_thermal(Phi, tau, lift)
    D, Dp = split.Delta, split.Delta_perp
    dN = P @ lift.delta @ N
    mixed = P @ (np.sqrt(tau) * lift.delta + lift.delta_perp) @ N
    return sandwich(D, Dp) @ dN + sandwich(Dp, D) @ dN + sandwich(D, D) @ mixed


def gauge_residual(psi: SuperOperator, g: GnsSpace, a, X, Y) -> float:
    dim_h = psi.dim_in
    return float(np.max(np.abs(slice_map(psi.apply(a), g.embed(X), g.embed(Y), dim_h))))
