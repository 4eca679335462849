"""Acceptance criteria A1-A9, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""
import functools
from pathlib import Path

import numpy as np

from conftest import ACCEPTANCE, limit_objects, reference_model, three_level_model
from thermalwalk.cocycle import cocycle_series, structure_checks
from thermalwalk.condexp import build_condexp, validate_condexp
from thermalwalk.config import Experiment, load_config
from thermalwalk.generators import (
    EH,
    HP,
    attal_joye_coordinates,
    attal_joye_model,
    build_W,
    build_walk_generator,
    gauge_residual,
    generator_distance,
    gns_generator,
    hp_G,
    limit_psi,
    noise_count,
    thermal_drift,
    thermal_Psi,
    vacuum_reference_generators,
)
from thermalwalk.gns import DensityMatrix, build_gns, lift_pi, statelift_residual
from thermalwalk.linalg import SuperOperator, proxy_norm, slice_map
from thermalwalk.rng import SplitMix64
from thermalwalk.suites import fit_order, limit_data, run_converge
from thermalwalk.walk import embedded_walk_series, walk_dense_oracle, walk_element

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def criterion(name):
    """Record PASS/FAIL for ``name``; the test body returns a short detail string."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            ACCEPTANCE[name] = (False, "raised before completion")
            detail = fn(*args, **kwargs)
            ACCEPTANCE[name] = (True, detail or "")

        return run

    return wrap


def record_failure(name, detail):
    ACCEPTANCE[name] = (False, detail)


def maxabs(A):
    return float(np.max(np.abs(A)))


def rho_n(n):
    lam = np.arange(n, 0, -1, dtype=float)
    return DensityMatrix.from_eigenvalues(lam / lam.sum())


@criterion("A1 conditional-expectation laws")
def test_A1_condexp_laws():
    worst, choi = 0.0, np.inf
    for n in (2, 3, 4):
        rho = rho_n(n)
        for kind, blocks in (("diagonal", None), ("state", None), ("block", [[0, n - 1]] + [[j] for j in range(1, n - 1)])):
            rep = validate_condexp(build_condexp(kind, rho, blocks), rho, pairs=100, rng=SplitMix64(100 + n))
            choi = min(choi, rep.residuals["choi_min_eigenvalue"])
            worst = max(worst, max(v for k, v in rep.residuals.items() if k != "choi_min_eigenvalue"))
    ok = worst <= 1e-12 and choi >= -1e-10
    if not ok:
        record_failure("A1 conditional-expectation laws", f"max residual {worst:.2e}, min Choi eigenvalue {choi:.2e}")
    assert ok
    return f"max residual {worst:.2e}, min Choi eigenvalue {choi:.2e}"


@criterion("A2 GNS identity")
def test_A2_gns_identity():
    rng = SplitMix64(2)
    worst = mult = unit = 0.0
    smin = np.inf
    for n in (2, 3):
        g = build_gns(rho_n(n))
        P = lift_pi(g, 2)
        N = 2 * n
        for _ in range(100):
            T, X, Y = rng.complex_matrix(N), rng.complex_matrix(n), rng.complex_matrix(n)
            worst = max(worst, statelift_residual(g, T, X, Y, 2))
            S = rng.complex_matrix(N)
            mult = max(mult, maxabs(P.apply(S @ T) - P.apply(S) @ P.apply(T)))
        unit = max(unit, maxabs(P.apply(np.eye(N)) - np.eye(N * n)))
        smin = min(smin, float(np.linalg.svd(P.matrix, compute_uv=False).min()))
    detail = f"statelift {worst:.2e}, multiplicative {mult:.2e}, unital {unit:.2e}, min singular value {smin:.3f}"
    ok = worst <= 1e-12 and mult <= 1e-12 and unit <= 1e-12 and smin >= 1e-10
    if not ok:
        record_failure("A2 GNS identity", detail)
    assert ok
    return detail


def _product(vs):
    out = vs[0]
    for v in vs[1:]:
        out = np.kron(out, v)
    return out


@criterion("A3 walk recursion vs dense oracle")
def test_A3_walk_vs_dense():
    rng = SplitMix64(3)
    m = reference_model()
    g, _, _ = limit_objects(m)
    gens = [SuperOperator(2, 8, rng.complex_matrix(64, 4)) for _ in range(3)]
    for flavor in (HP, EH):
        Phi = build_walk_generator(m.with_flavor(flavor), 0.05)
        gens += [Phi, gns_generator(Phi, g)]
    rel = defining = 0.0
    for Phi in gens:
        dim_H = Phi.dim_out // 2
        a = rng.complex_matrix(2)
        for n in (1, 2, 3):
            dense = walk_dense_oracle(Phi, a, n)
            xs = [rng.complex_vector(dim_H) for _ in range(n)]
            ys = [rng.complex_vector(dim_H) for _ in range(n)]
            u, v = rng.complex_vector(2), rng.complex_vector(2)
            ref = np.vdot(_product([u] + xs), dense @ _product([v] + ys))
            rel = max(rel, abs(walk_element(Phi, a, u, v, xs, ys) - ref) / abs(ref))
            if n < 3:
                big = walk_dense_oracle(Phi, a, n + 1)
                for j in range(dim_H):
                    for k in range(dim_H):
                        x, y = np.eye(dim_H)[j], np.eye(dim_H)[k]
                        lhs = slice_map(big, x, y, 2 * dim_H**n)
                        rhs = walk_dense_oracle(Phi, slice_map(Phi.apply(a), x, y, 2), n)
                        defining = max(defining, maxabs(lhs - rhs))
    detail = f"relative error {rel:.2e}, defining recursion {defining:.2e}"
    ok = rel <= 1e-10 and defining <= 1e-12
    if not ok:
        record_failure("A3 walk recursion vs dense oracle", detail)
    assert ok
    return detail


@criterion("A4 generator rate")
def test_A4_generator_rate():
    taus = [2.0**-k for k in range(6, 13)]
    orders = {}
    for flavor in (HP, EH):
        m = reference_model(flavor)
        _, lift, _ = limit_objects(m)
        Psi = thermal_Psi(m, lift)
        dist = [generator_distance(m, t, lift, Psi) for t in taus]
        orders[flavor] = fit_order(taus, dist)[0]
    detail = ", ".join(f"{k} order {v:.4f}" for k, v in orders.items()) + " (target 0.5 +- 0.1)"
    ok = all(0.4 <= v <= 0.6 for v in orders.values())
    if not ok:
        record_failure("A4 generator rate", detail)
    assert ok, detail
    return detail


@criterion("A5 walk to cocycle convergence")
def test_A5_walk_to_cocycle():
    exp = Experiment(load_config(CONFIGS / "reference.json"))
    assert exp.config.tau_grid == tuple(2.0**-k for k in range(4, 11))
    rows, _, summary, _ = run_converge(exp)
    sup = {}
    for r in rows:
        sup[r.tau] = max(sup.get(r.tau, 0.0), r.error)
    errs = [sup[t] for t in sorted(sup, reverse=True)]
    decreasing = all(x > y for x, y in zip(errs, errs[1:]))
    final = errs[-1]
    # calibration against the fine-tau walk
    data = limit_data(exp)
    a, u, v = exp.observable()
    f, gf = exp.step_function("f"), exp.step_function("g")
    tau = 2.0**-14
    Phi = gns_generator(build_walk_generator(exp.model, tau), exp.gns)
    fine = embedded_walk_series(Phi, exp.gns, a, u, v, f, gf, tau, exp.config.t_grid)
    times = [round(t / tau) * tau for t in exp.config.t_grid]
    coc = cocycle_series(data.psi, exp.gns, a, u, v, f, gf, times)
    oracle = max(abs(x - y) for x, y in zip(fine, coc))
    detail = f"sup errors {', '.join(f'{e:.2e}' for e in errs)}; fine-tau oracle gap {oracle:.2e}"
    ok = decreasing and final <= 5e-3 and oracle <= final
    if not ok:
        record_failure("A5 walk to cocycle convergence", detail)
    assert ok, detail
    return detail


@criterion("A6 thermalisation")
def test_A6_thermalisation():
    rng = SplitMix64(6)
    gauge = 0.0
    counts = {}
    for builder in (reference_model, three_level_model):
        for flavor in (HP, EH):
            m = builder(flavor)
            g, lift, split = limit_objects(m)
            psi = limit_psi(thermal_Psi(m, lift), lift, g, split)
            r = m.rho.matrix
            for _ in range(100):
                a = rng.complex_matrix(2)
                gauge = max(gauge, gauge_residual(psi, g, a, rng.state_kernel(r), rng.state_kernel(r)))
    for n in (2, 3):
        rho = rho_n(n)
        g = build_gns(rho)
        counts[n] = (noise_count(build_condexp("diagonal", rho), g), noise_count(build_condexp("state", rho), g))
    ok = gauge <= 1e-13 and all(counts[n] == (2 * (n * n - n), 2 * (n * n - 1)) for n in counts)
    detail = f"gauge {gauge:.2e}; noise counts (diagonal, state) {counts}"
    if not ok:
        record_failure("A6 thermalisation", detail)
    assert ok
    return detail


@criterion("A7 structure")
def test_A7_structure():
    rng = SplitMix64(7)
    res = {"W": 0.0, "G": 0.0, "eh_unit": 0.0, "eh_hom": 0.0, "walk_unitary": 0.0, "walk_mult": 0.0}
    for builder in (reference_model, three_level_model):
        hp = builder(HP)
        g, lift, split = limit_objects(hp)
        for k in range(4, 13, 4):
            W = build_W(hp, 2.0**-k)
            res["W"] = max(res["W"], maxabs(W.conj().T @ W - np.eye(W.shape[0])))
        G = hp_G(thermal_drift(hp, lift), lift, g, split)
        psi = limit_psi(thermal_Psi(hp, lift), lift, g, split)
        rep = structure_checks(psi, HP, split.Delta, G=G)
        res["G"] = max(res["G"], *rep.residuals.values())
        eh = builder(EH)
        psi_eh = limit_psi(thermal_Psi(eh, lift), lift, g, split)
        rep = structure_checks(psi_eh, EH, split.Delta, pairs=50, rng=rng)
        res["eh_unit"] = max(res["eh_unit"], rep.residuals["unital"])
        res["eh_hom"] = max(res["eh_hom"], rep.residuals["homomorphism"], rep.residuals["flip_adjoint"])
    hp, eh = reference_model(HP), reference_model(EH)
    Phi = build_walk_generator(hp, 0.1)
    for n in (1, 2, 3):
        U = walk_dense_oracle(Phi, np.eye(2), n)
        res["walk_unitary"] = max(res["walk_unitary"], maxabs(U.conj().T @ U - np.eye(U.shape[0])))
    Phi = build_walk_generator(eh, 0.1)
    a, b = rng.complex_matrix(2), rng.complex_matrix(2)
    for n in (1, 2):
        lhs = walk_dense_oracle(Phi, a @ b, n)
        res["walk_mult"] = max(res["walk_mult"], maxabs(lhs - walk_dense_oracle(Phi, a, n) @ walk_dense_oracle(Phi, b, n)))
    tol = {"W": 1e-12, "G": 1e-11, "eh_unit": 1e-13, "eh_hom": 1e-11, "walk_unitary": 1e-11, "walk_mult": 1e-11}
    ok = all(res[k] <= tol[k] for k in res)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in res.items())
    if not ok:
        record_failure("A7 structure", detail)
    assert ok
    return detail


@criterion("A8 closed-form coordinates")
def test_A8_closed_forms():
    rng = SplitMix64(8)
    worst = 0.0
    for builder in (reference_model, three_level_model):
        for flavor in (HP, EH):
            m = builder(flavor)
            g, lift, split = limit_objects(m)
            psi = limit_psi(thermal_Psi(m, lift), lift, g, split)
            r = m.rho.matrix
            for _ in range(20):
                a = rng.complex_matrix(2)
                X, Y = rng.state_kernel(r), rng.state_kernel(r)
                ref = attal_joye_coordinates(m, a, X, Y)
                pa = psi.apply(a)
                got = {
                    "omega_omega": slice_map(pa, g.omega, g.omega, 2),
                    "X_omega": slice_map(pa, g.embed(X), g.omega, 2),
                    "omega_Y": slice_map(pa, g.omega, g.embed(Y), 2),
                    "X_Y": slice_map(pa, g.embed(X), g.embed(Y), 2),
                }
                worst = max(worst, max(maxabs(got[k] - ref[k]) for k in ref))
    ok = worst <= 1e-12
    if not ok:
        record_failure("A8 closed-form coordinates", f"max residual {worst:.2e}")
    assert ok
    return f"max residual {worst:.2e}"


def _vacuum_gap(flavor, eps, n=2):
    lam = [1 - (n - 1) * eps] + [eps] * (n - 1)
    rho = DensityMatrix.from_eigenvalues(lam)
    m = attal_joye_model(np.diag([1.0, -1.0]), [0.0, 1.0], np.eye(2), rho, flavor)
    g, lift, split = limit_objects(m)
    psi = limit_psi(thermal_Psi(m, lift), lift, g, split)
    oo = SuperOperator.from_function(lambda a: slice_map(psi.apply(a), g.omega, g.omega, 2), 2, 2)
    F, phi = vacuum_reference_generators(m)
    E = m.E_e0
    if flavor == HP:
        F00 = E.conj().T @ F @ E
        target = SuperOperator.from_function(lambda a: a @ F00, 2, 2)
    else:
        target = SuperOperator.from_function(lambda a: E.conj().T @ phi.apply(a) @ E, 2, 2)
    return proxy_norm(oo - target)


@criterion("A9 vacuum continuity")
def test_A9_vacuum_continuity():
    eps = [1e-1, 1e-2, 1e-3]
    detail = []
    ok = True
    for flavor in (HP, EH):
        e1, e2, e3 = (_vacuum_gap(flavor, e) for e in eps)
        predicted = e2 + (e2 - e1) / (eps[1] - eps[0]) * (eps[2] - eps[1])
        # gaps at rounding level mean the slice matches exactly
        exact = max(e1, e2, e3) <= 1e-12
        ok &= exact or e3 <= 10 * predicted
        detail.append(f"{flavor} gaps {e1:.2e}, {e2:.2e}, {e3:.2e} (linear prediction {predicted:.2e})")
    detail = "; ".join(detail)
    if not ok:
        record_failure("A9 vacuum continuity", detail)
    assert ok, detail
    return detail
