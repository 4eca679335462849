import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crandn, limit_objects, reference_model, three_level_model
from thermalwalk.cocycle import hp_unitarity_residuals
from thermalwalk.condexp import build_condexp, lift_delta
from thermalwalk.generators import (
    EH,
    HP,
    GeneratorBlocks,
    InteractionModel,
    ModelHypothesisError,
    attal_joye_coordinates,
    build_W,
    build_walk_generator,
    check_hypotheses,
    gauge_residual,
    gns_generator,
    hp_G,
    limit_psi,
    modify_thermal,
    modify_thermal_split,
    modify_vacuum,
    modify_vacuum_blocks,
    noise_count,
    remainder_term,
    thermal_drift,
    thermal_Psi,
    vacuum_reference_generators,
)
from thermalwalk.gns import DensityMatrix, build_gns, lift_pi, lift_rho
from thermalwalk.linalg import SuperOperator, ampliation, proxy_norm, slice_map


def random_superop(r, dim_in, dim_out):
    return SuperOperator(dim_in, dim_out, crandn(r, dim_out**2, dim_in**2))


def test_zero_hamiltonian_gives_identity(rho_ref):
    m = InteractionModel(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), rho_ref)
    assert np.allclose(build_W(m, 0.1), np.eye(4))


def test_W_against_eigendecomposition_oracle():
    m = reference_model()
    tau = 0.1
    H = m.H_tot(tau)
    lam, U = np.linalg.eigh(H)
    oracle = (U * np.exp(-1j * tau * lam)) @ U.conj().T
    W = build_W(m, tau)
    assert np.max(np.abs(W - oracle)) <= 1e-12
    assert np.max(np.abs(W.conj().T @ W - np.eye(4))) <= 1e-12


def test_reference_model_blocks():
    m = reference_model()
    assert np.allclose(m.H_o, m.H_o.conj().T)
    # H_o exchanges e_0 with the rest of K
    assert np.allclose(m.H_o, np.kron(np.eye(2), np.array([[0, 1], [1, 0]])))
    assert np.allclose(m.H_d, np.kron(np.diag([1, -1]), np.eye(2)) + np.kron(np.eye(2), np.diag([0, 1])))


def test_tau_must_be_positive():
    m = reference_model()
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            build_W(m, bad)


def test_model_validation(rho_ref):
    with pytest.raises(ValueError):
        InteractionModel(np.eye(2), np.eye(2), np.zeros((3, 2)), rho_ref)
    with pytest.raises(ValueError):
        InteractionModel(np.array([[0, 1], [0, 0]]), np.eye(2), np.zeros((2, 2)), rho_ref)
    with pytest.raises(ValueError):
        InteractionModel(np.eye(2), np.eye(2), np.zeros((2, 2)), rho_ref, flavor="XX")


def test_hypotheses_checked():
    m = reference_model()
    g, lift, _ = limit_objects(m)
    res = check_hypotheses(m, lift)
    assert max(res.values()) <= 1e-12
    bad = InteractionModel(m.H_sys, np.array([[0, 1], [1, 0]]), m.V, m.rho)
    with pytest.raises(ModelHypothesisError, match="H_d_diagonal"):
        thermal_Psi(bad, lift)


def test_walk_generators_at_unit(rng):
    hp = reference_model(HP)
    eh = reference_model(EH)
    assert np.allclose(build_walk_generator(hp, 0.1).apply(np.eye(2)), build_W(hp, 0.1))
    Phi = build_walk_generator(eh, 0.1)
    assert np.allclose(Phi.apply(np.eye(2)), np.eye(4), atol=1e-12)
    a, b = crandn(rng, 2, 2), crandn(rng, 2, 2)
    assert np.max(np.abs(Phi.apply(a @ b) - Phi.apply(a) @ Phi.apply(b))) <= 1e-12


def test_modify_vacuum_examples(gns_ref, rng):
    from thermalwalk.condexp import vacuum_split

    split = vacuum_split(gns_ref, 2)
    amp = ampliation(2, 4)
    assert np.allclose(modify_vacuum(amp, 0.3, split).matrix, 0)
    S = random_superop(rng, 2, 8)
    a = crandn(rng, 2, 2)
    assert np.allclose(modify_vacuum(S, 1.0, split).apply(a), S.apply(a) - np.kron(a, np.eye(4)))
    for tau in (0.5, 0.01):
        diff = modify_vacuum(S, tau, split).matrix - modify_vacuum_blocks(S, tau, gns_ref).matrix
        assert np.max(np.abs(diff)) <= 1e-12 * max(1.0, np.max(np.abs(S.matrix)) / tau)


def test_generator_blocks_reassemble(gns_ref, rng):
    S = random_superop(rng, 2, 8)
    gb = GeneratorBlocks(S, gns_ref)
    a = crandn(rng, 2, 2)
    assert np.allclose(gb.reassemble(*gb.blocks(a)), S.apply(a), atol=1e-12)


def test_modify_thermal_examples(rho_ref, rng):
    lift = lift_delta(build_condexp("diagonal", rho_ref), 2)
    assert np.allclose(modify_thermal(ampliation(2, 2), 0.2, lift).matrix, 0)
    Phi = random_superop(rng, 2, 4)
    assert np.allclose(modify_thermal(Phi, 1.0, lift).matrix, (Phi - ampliation(2, 2)).matrix)
    for tau in (0.7, 0.05):
        a = modify_thermal(Phi, tau, lift).matrix
        b = modify_thermal_split(Phi, tau, lift).matrix
        assert np.max(np.abs(a - b)) <= 1e-13 * max(1.0, np.max(np.abs(a)))


@pytest.mark.parametrize("flavor", [HP, EH])
@pytest.mark.parametrize("builder", [reference_model, three_level_model])
def test_limit_psi_coordinates(flavor, builder, rng):
    m = builder(flavor)
    g, lift, split = limit_objects(m)
    Psi = thermal_Psi(m, lift)
    psi = limit_psi(Psi, lift, g, split)
    n = m.dim_K
    R = lift_rho(g, 2)
    P = lift_pi(g, 2)
    r = m.rho.matrix
    for _ in range(20):
        a = crandn(rng, 2, 2)
        X = crandn(rng, n, n)
        X -= np.trace(r @ X) * np.eye(n)
        Y = crandn(rng, n, n)
        Y -= np.trace(r @ Y) * np.eye(n)
        pa = psi.apply(a)
        assert np.allclose(slice_map(pa, g.omega, g.omega, 2), R.apply(Psi.apply(a)), atol=1e-12)
        IX = np.kron(np.eye(2), X)
        dPa = lift.delta_perp.apply(Psi.apply(a))
        expected = R.apply(IX.conj().T @ dPa)
        assert np.allclose(slice_map(pa, g.embed(X), g.omega, 2), expected, atol=1e-12)
        dX = lift.condexp.perp(X)
        assert np.allclose(slice_map(P.apply(Psi.apply(a)), g.embed(dX), g.omega, 2), expected, atol=1e-12)
        assert gauge_residual(psi, g, a, X, Y) <= 1e-13


def test_zero_Psi_gives_zero_psi(gns_ref, rho_ref):
    from thermalwalk.condexp import vacuum_split

    lift = lift_delta(build_condexp("diagonal", rho_ref), 2)
    psi = limit_psi(SuperOperator.zero(2, 4), lift, gns_ref, vacuum_split(gns_ref, 2))
    assert np.allclose(psi.matrix, 0)


def test_thermal_Psi_at_unit():
    m = reference_model(HP)
    _, lift, _ = limit_objects(m)
    H_o = m.H_o
    F = -1j * (m.H_d + H_o) - 0.5 * lift.delta.apply(H_o @ H_o)
    assert np.allclose(thermal_Psi(m, lift).apply(np.eye(2)), F)
    assert np.allclose(thermal_drift(m, lift), F)
    eh = reference_model(EH)
    assert np.max(np.abs(thermal_Psi(eh, lift).apply(np.eye(2)))) <= 1e-15


@pytest.mark.parametrize("n", [2, 3])
def test_noise_count_values(n):
    lam = np.arange(n, 0, -1, dtype=float)
    rho = DensityMatrix.from_eigenvalues(lam / lam.sum())
    g = build_gns(rho)
    assert noise_count(build_condexp("diagonal", rho), g) == 2 * (n * n - n)
    assert noise_count(build_condexp("state", rho), g) == 2 * (n * n - 1)


def test_vacuum_reference_generators():
    rho = DensityMatrix.from_eigenvalues([0.75, 0.25])
    V = np.array([[1.0, 0.5j], [0.2, -0.3]])
    m = InteractionModel(np.zeros((2, 2)), np.zeros((2, 2)), V, rho)
    F, phi = vacuum_reference_generators(m)
    top = m.E_e0.conj().T @ F @ m.E_e0
    assert np.allclose(top, -0.5 * V.conj().T @ V)
    assert np.allclose(m.Q.conj().T @ F @ m.Q, 0)
    assert np.allclose(phi.apply(np.eye(2)), 0, atol=1e-15)
    # vacuum-case HP structure: F + F* + F* Delta F = 0 with Delta projecting off e_0
    Delta = m.Q @ m.Q.conj().T
    res = hp_unitarity_residuals(F, Delta)
    assert max(res.values()) <= 1e-12


@pytest.mark.parametrize("flavor", [HP, EH])
def test_remainder_term_bounded(flavor):
    m = reference_model(flavor)
    g, lift, split = limit_objects(m)
    norms = []
    for k in range(4, 13, 2):
        tau = 2.0**-k
        Phi = build_walk_generator(m, tau)
        norms.append(proxy_norm(remainder_term(Phi, tau, lift, g, split)))
    assert max(norms) < 10 * norms[0] + 1.0


@pytest.mark.parametrize("flavor", [HP, EH])
def test_main_decomposition_bound(flavor):
    from thermalwalk.condexp import vacuum_split

    m = three_level_model(flavor)
    g, lift, split = limit_objects(m)
    Psi = thermal_Psi(m, lift)
    psi = limit_psi(Psi, lift, g, split)
    P = lift_pi(g, 2)
    prev = None
    for k in (6, 8, 10):
        tau = 2.0**-k
        Phi = build_walk_generator(m, tau)
        lhs = proxy_norm(modify_vacuum(gns_generator(Phi, g), tau, split) - psi)
        theta = proxy_norm(P @ (modify_thermal(Phi, tau, lift) - Psi))
        R = proxy_norm(remainder_term(Phi, tau, lift, g, split))
        assert lhs <= 3 * theta + np.sqrt(tau) * R + 1e-9
        if prev is not None:
            assert lhs < prev
        prev = lhs


@given(st.integers(0, 10**6))
@settings(max_examples=10, deadline=None)
def test_hp_G_unitarity_property(seed):
    r = np.random.default_rng(seed)
    rho = DensityMatrix.from_eigenvalues([0.5, 0.3, 0.2])
    H_sys = crandn(r, 2, 2)
    H_sys = H_sys + H_sys.conj().T
    m = InteractionModel(H_sys, np.diag(r.standard_normal(3)).astype(complex), crandn(r, 4, 2), rho)
    g, lift, split = limit_objects(m)
    G = hp_G(thermal_drift(m, lift), lift, g, split)
    assert max(hp_unitarity_residuals(G, split.Delta).values()) <= 1e-11


@pytest.mark.parametrize("flavor", [HP, EH])
@pytest.mark.parametrize("builder", [reference_model, three_level_model])
def test_attal_joye_closed_forms(flavor, builder, rng):
    m = builder(flavor)
    g, lift, split = limit_objects(m)
    psi = limit_psi(thermal_Psi(m, lift), lift, g, split)
    n = m.dim_K
    r = m.rho.matrix
    for _ in range(20):
        a = crandn(rng, 2, 2)
        X, Y = crandn(rng, n, n), crandn(rng, n, n)
        X -= np.trace(r @ X) * np.eye(n)
        Y -= np.trace(r @ Y) * np.eye(n)
        ref = attal_joye_coordinates(m, a, X, Y)
        pa = psi.apply(a)
        assert np.max(np.abs(slice_map(pa, g.omega, g.omega, 2) - ref["omega_omega"])) <= 1e-12
        assert np.max(np.abs(slice_map(pa, g.embed(X), g.omega, 2) - ref["X_omega"])) <= 1e-12
        assert np.max(np.abs(slice_map(pa, g.omega, g.embed(Y), 2) - ref["omega_Y"])) <= 1e-12
