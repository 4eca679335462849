"""Invariant suites and experiment sweeps driven by an :class:`ExperimentConfig`.

Each check yields a :class:`CheckRow`; a failing computation becomes a failing
row carrying the error text instead of aborting the run.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cocycle import CocycleQuery, cocycle_element, structure_checks
from .condexp import lift_delta, validate_condexp, vacuum_split
from .config import Experiment
from .generators import (
    EH,
    HP,
    build_W,
    build_walk_generator,
    check_hypotheses,
    generator_distance,
    gns_generator,
    gauge_residual,
    hp_G,
    limit_psi,
    noise_count,
    thermal_drift,
    thermal_Psi,
    attal_joye_coordinates,
)
from .gns import lift_pi, lift_rho, statelift_residual
from .linalg import slice_map, weighted_partial_trace
from .rng import SplitMix64
from .walk import StepCountError, embedded_walk_series, snap_steps, walk_dense_oracle, walk_element

__all__ = [
    "CheckRow",
    "LimitData",
    "limit_data",
    "run_checks",
    "thermal_report",
    "ConvergenceRow",
    "RateRow",
    "run_converge",
    "fit_order",
    "thread_count",
]

RANDOM_DRAWS = 100


@dataclass(frozen=True)
class CheckRow:
    suite: str
    identity: str
    residual: float
    tolerance: float
    lower_bound: bool = False  # pass iff residual >= tolerance
    detail: str = ""

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.residual):
            return False
        if self.lower_bound:
            return self.residual >= self.tolerance
        return self.residual <= self.tolerance


def _row(suite, identity, residual, tolerance, **kw) -> CheckRow:
    return CheckRow(suite, identity, float(residual), float(tolerance), **kw)


def _error_row(suite: str, identity: str, exc: Exception, tolerance: float = 0.0) -> CheckRow:
    return CheckRow(suite, identity, math.nan, tolerance, detail=f"{type(exc).__name__}: {exc}")


def _maxabs(A) -> float:
    return float(np.max(np.abs(A))) if np.size(A) else 0.0


@dataclass(frozen=True, eq=False)
class LimitData:
    lift: object
    split: object
    Psi: object
    psi: object


def limit_data(exp: Experiment) -> LimitData:
    lift = lift_delta(exp.condexp, exp.config.dim_h)
    split = vacuum_split(exp.gns, exp.config.dim_h)
    Psi = thermal_Psi(exp.model, lift)
    return LimitData(lift, split, Psi, limit_psi(Psi, lift, exp.gns, split))


def _gns_suite(exp: Experiment, rng: SplitMix64, tol: float) -> list[CheckRow]:
    g, dh, n = exp.gns, exp.config.dim_h, exp.config.dim_K
    N = dh * n
    P = lift_pi(g, dh)
    state = mult = 0.0
    for _ in range(RANDOM_DRAWS):
        T = rng.complex_matrix(N)
        X = rng.complex_matrix(n)
        Y = rng.complex_matrix(n)
        state = max(state, statelift_residual(g, T, X, Y, dh))
        S = rng.complex_matrix(N)
        mult = max(mult, _maxabs(P.apply(S @ T) - P.apply(S) @ P.apply(T)))
    rows = [
        _row("gns", "E^[X] pi~(T) E_[Y] = rho~((I(x)X)* T (I(x)Y))", state, tol),
        _row("gns", "pi~(ST) = pi~(S) pi~(T)", mult, tol),
        _row("gns", "pi~(I) = I", _maxabs(P.apply(np.eye(N)) - np.eye(N * n)), tol),
    ]
    smin = float(np.linalg.svd(P.matrix, compute_uv=False).min())
    rows.append(_row("gns", "pi~ injective (min singular value)", smin, exp.config.tolerance("rank"), lower_bound=True))
    T = rng.complex_matrix(N)
    vac = _maxabs(slice_map(P.apply(T), g.omega, g.omega, dh) - lift_rho(g, dh).apply(T))
    rows.append(_row("gns", "E^omega pi~(T) E_omega = rho~(T)", vac, tol))
    rows.append(_row("gns", "<[X],[Y]> = tr(rho X* Y)", _gns_inner(exp, rng), tol))
    return rows


def _gns_inner(exp: Experiment, rng: SplitMix64) -> float:
    g, r = exp.gns, exp.rho.matrix
    worst = 0.0
    for _ in range(RANDOM_DRAWS):
        X, Y = rng.complex_matrix(g.dim_K), rng.complex_matrix(g.dim_K)
        worst = max(worst, abs(np.vdot(g.embed(X), g.embed(Y)) - np.trace(r @ X.conj().T @ Y)))
    return float(worst)


def _condexp_suite(exp: Experiment, rng: SplitMix64, tol: float) -> list[CheckRow]:
    labels = {
        "idempotency": "d o d = d",
        "unitality": "d(I) = I",
        "choi_min_eigenvalue": "Choi(d) >= 0 (min eigenvalue)",
        "module_left": "d(d(X) Y) = d(X) d(Y)",
        "module_right": "d(X d(Y)) = d(X) d(Y)",
        "rho_preservation": "tr(rho d(X)) = tr(rho X)",
    }
    rep = validate_condexp(exp.condexp, exp.rho, pairs=RANDOM_DRAWS, tol=tol, rng=rng)
    rows = []
    for name, value in rep.residuals.items():
        if name == "choi_min_eigenvalue":
            rows.append(_row("condexp", labels[name], value, -exp.config.tolerance("choi"), lower_bound=True))
        else:
            rows.append(_row("condexp", labels[name], value, tol))
    dh, n = exp.config.dim_h, exp.config.dim_K
    lift = lift_delta(exp.condexp, dh)
    amp = slice_ = 0.0
    r = exp.rho.matrix
    for _ in range(RANDOM_DRAWS):
        a = rng.complex_matrix(dh)
        A = np.kron(a, np.eye(n))
        amp = max(amp, _maxabs(lift.delta.apply(A) - A))
        T1, T2 = rng.complex_matrix(dh * n), rng.complex_matrix(dh * n)
        lhs = weighted_partial_trace(lift.delta.apply(T1) @ T2, r)
        rhs = weighted_partial_trace(T1 @ lift.delta.apply(T2), r)
        slice_ = max(slice_, _maxabs(lhs - rhs))
    rows.append(_row("condexp", "delta(a (x) I) = a (x) I", amp, tol))
    rows.append(_row("condexp", "rho~(delta(T1) T2) = rho~(T1 delta(T2))", slice_, tol))
    return rows


def _walk_suite(exp: Experiment, rng: SplitMix64, tol_rel: float, tol: float) -> list[CheckRow]:
    rows = []
    dh = exp.config.dim_h
    taus = exp.config.tau_grid or (0.1,)
    tau = max(taus)
    for flavor in (HP, EH):
        model = exp.model.with_flavor(flavor)
        try:
            Phi = build_walk_generator(model, tau)
            W = build_W(model, tau)
            rows.append(_row("walk", f"W(tau)* W(tau) = I [{flavor}]", _maxabs(W.conj().T @ W - np.eye(W.shape[0])), tol))
            dim_H = Phi.dim_out // dh
            worst = defining = 0.0
            a = rng.complex_matrix(dh)
            for n in range(1, 4):
                if dh * dim_H**n > 512:
                    break
                dense = walk_dense_oracle(Phi, a, n)
                xs = [rng.complex_vector(dim_H) for _ in range(n)]
                ys = [rng.complex_vector(dim_H) for _ in range(n)]
                u, v = rng.complex_vector(dh), rng.complex_vector(dh)
                X, Y = u, v
                for x, y in zip(xs, ys):
                    X, Y = np.kron(X, x), np.kron(Y, y)
                ref = np.vdot(X, dense @ Y)
                got = walk_element(Phi, a, u, v, xs, ys)
                worst = max(worst, abs(got - ref) / max(abs(ref), 1e-300))
                for j in range(dim_H):
                    for k in range(dim_H):
                        ej, ek = np.eye(dim_H)[j], np.eye(dim_H)[k]
                        lhs = slice_map(dense, ej, ek, dh * dim_H ** (n - 1))
                        rhs = walk_dense_oracle(Phi, slice_map(Phi.apply(a), ej, ek, dh), n - 1)
                        defining = max(defining, _maxabs(lhs - rhs))
            rows.append(_row("walk", f"slice recursion = dense oracle (relative) [{flavor}]", worst, tol_rel))
            rows.append(_row("walk", f"E^x Phi^(n+1)(a) E_y = Phi^(n)(E^x Phi(a) E_y) [{flavor}]", defining, tol))
            if flavor == HP:
                U = walk_dense_oracle(Phi, np.eye(dh), 2)
                rows.append(_row("walk", "Phi^(n)(I) unitary [HP]", _maxabs(U.conj().T @ U - np.eye(U.shape[0])), 1e-11))
            else:
                b = rng.complex_matrix(dh)
                lhs = walk_dense_oracle(Phi, a @ b, 2)
                rhs = walk_dense_oracle(Phi, a, 2) @ walk_dense_oracle(Phi, b, 2)
                rows.append(_row("walk", "Phi^(n)(ab) = Phi^(n)(a) Phi^(n)(b) [EH]", _maxabs(lhs - rhs), 1e-11))
        except Exception as exc:  # noqa: BLE001
            rows.append(_error_row("walk", f"walk generator [{flavor}]", exc))
    return rows


def _structure_suite(exp: Experiment, rng: SplitMix64, tol: float) -> list[CheckRow]:
    rows = []
    lift = lift_delta(exp.condexp, exp.config.dim_h)
    split = vacuum_split(exp.gns, exp.config.dim_h)
    for flavor in (HP, EH):
        model = exp.model.with_flavor(flavor)
        try:
            for name, value in check_hypotheses(model, lift).items():
                label = "H_d = delta(H_d)" if name == "H_d_diagonal" else "H_o = delta_perp(H_o)"
                rows.append(_row("structure", f"{label} [{flavor}]", value, tol))
            Psi = thermal_Psi(model, lift)
            psi = limit_psi(Psi, lift, exp.gns, split)
            if flavor == HP:
                G = hp_G(thermal_drift(model, lift), lift, exp.gns, split)
                rep = structure_checks(psi, HP, split.Delta, G=G)
                rows.append(_row("structure", "G + G* + G* Delta G = 0 [HP]", rep.residuals["isometry"], rep.tolerances["isometry"]))
                rows.append(_row("structure", "G + G* + G Delta G* = 0 [HP]", rep.residuals["coisometry"], rep.tolerances["coisometry"]))
            else:
                rep = structure_checks(psi, EH, split.Delta, pairs=50, rng=rng)
                rows.append(_row("structure", "psi(I) = 0 [EH]", rep.residuals["unital"], rep.tolerances["unital"]))
                rows.append(_row("structure", "psi(a*) = psi(a)^dagger [EH]", rep.residuals["flip_adjoint"], rep.tolerances["flip_adjoint"]))
                rows.append(_row("structure", "psi(ab) = psi(a)(b(x)I) + (a(x)I)psi(b) + psi(a) Delta psi(b) [EH]",
                                 rep.residuals["homomorphism"], rep.tolerances["homomorphism"]))
            vac = 0.0
            for _ in range(10):
                a = rng.complex_matrix(exp.config.dim_h)
                got = slice_map(psi.apply(a), exp.gns.omega, exp.gns.omega, exp.config.dim_h)
                vac = max(vac, _maxabs(got - lift_rho(exp.gns, exp.config.dim_h).apply(Psi.apply(a))))
            rows.append(_row("structure", f"E^omega psi(a) E_omega = rho~(Psi(a)) [{flavor}]", vac, tol))
            if exp.condexp.kind == "diagonal":
                rows.append(_row("structure", f"closed-form slices of psi (diagonal d) [{flavor}]",
                                 _closed_form_residual(exp, model, psi, rng), tol))
        except Exception as exc:  # noqa: BLE001
            rows.append(_error_row("structure", f"limit generator [{flavor}]", exc))
    return rows


def _closed_form_residual(exp: Experiment, model, psi, rng: SplitMix64) -> float:
    g, dh, r = exp.gns, exp.config.dim_h, exp.rho.matrix
    worst = 0.0
    for _ in range(10):
        a = rng.complex_matrix(dh)
        X, Y = rng.state_kernel(r), rng.state_kernel(r)
        ref = attal_joye_coordinates(model, a, X, Y)
        pa = psi.apply(a)
        got = {
            "omega_omega": slice_map(pa, g.omega, g.omega, dh),
            "X_omega": slice_map(pa, g.embed(X), g.omega, dh),
            "omega_Y": slice_map(pa, g.omega, g.embed(Y), dh),
            "X_Y": slice_map(pa, g.embed(X), g.embed(Y), dh),
        }
        worst = max(worst, max(_maxabs(got[k] - ref[k]) for k in ref))
    return worst


def gauge_max(exp: Experiment, psi, rng: SplitMix64, draws: int = RANDOM_DRAWS) -> float:
    r = exp.rho.matrix
    worst = 0.0
    for _ in range(draws):
        a = rng.complex_matrix(exp.config.dim_h)
        worst = max(worst, gauge_residual(psi, exp.gns, a, rng.state_kernel(r), rng.state_kernel(r)))
    return worst


def _thermal_suite(exp: Experiment, rng: SplitMix64) -> list[CheckRow]:
    rows = []
    n = exp.config.dim_K
    lift = lift_delta(exp.condexp, exp.config.dim_h)
    split = vacuum_split(exp.gns, exp.config.dim_h)
    for flavor in (HP, EH):
        try:
            Psi = thermal_Psi(exp.model.with_flavor(flavor), lift)
            psi = limit_psi(Psi, lift, exp.gns, split)
            rows.append(_row("thermal", f"E^[X] psi(a) E_[Y] = 0 for X, Y in ker rho [{flavor}]",
                             gauge_max(exp, psi, rng), exp.config.tolerance("gauge")))
        except Exception as exc:  # noqa: BLE001
            rows.append(_error_row("thermal", f"gauge block [{flavor}]", exc))
    count = noise_count(exp.condexp, exp.gns)
    rows.append(_row("thermal", "noise_count <= 2(n^2 - 1) (count minus bound)", count - 2 * (n * n - 1), 0.0,
                     detail=f"noise_count={count}"))
    return rows


SUITES = ("gns", "condexp", "walk", "structure", "thermal")


def run_checks(exp: Experiment) -> tuple[list[CheckRow], int]:
    """All invariant suites; returns the rows and the exit code (0 iff all pass)."""
    c = exp.config
    tol = c.tolerance("algebraic")
    rows: list[CheckRow] = []
    runners = {
        "gns": lambda rng: _gns_suite(exp, rng, tol),
        "condexp": lambda rng: _condexp_suite(exp, rng, tol),
        "walk": lambda rng: _walk_suite(exp, rng, c.tolerance("walk_relative"), tol),
        "structure": lambda rng: _structure_suite(exp, rng, c.tolerance("structure")),
        "thermal": lambda rng: _thermal_suite(exp, rng),
    }
    for k, name in enumerate(SUITES):
        rng = SplitMix64(c.seeds + k)
        try:
            rows.extend(runners[name](rng))
        except Exception as exc:  # noqa: BLE001
            rows.append(_error_row(name, f"{name} suite", exc))
    return rows, 0 if all(r.passed for r in rows) else 1


def thermal_report(exp: Experiment) -> dict:
    n = exp.config.dim_K
    data = limit_data(exp)
    gauge = gauge_max(exp, data.psi, SplitMix64(exp.config.seeds))
    count = noise_count(exp.condexp, exp.gns)
    bound = 2 * (n * n - 1)
    ok = gauge <= exp.config.tolerance("gauge") and count <= bound
    return {"flavor": exp.config.flavor, "noise_count": count, "bound": bound, "gauge_residual": gauge, "passed": ok}


# ---------------------------------------------------------------- converge


@dataclass(frozen=True)
class ConvergenceRow:
    experiment: str
    tau: float
    t: float
    walk: complex | None
    cocycle: complex | None
    error: float | None
    generator_distance: float
    fitted_order: float
    noise_count: int
    gauge_residual: float
    error_tolerance: float
    gauge_tolerance: float
    status: str = "ok"

    @property
    def error_pass(self) -> bool:
        return self.status == "ok" and self.error is not None and self.error <= self.error_tolerance

    @property
    def gauge_pass(self) -> bool:
        return self.gauge_residual <= self.gauge_tolerance


@dataclass(frozen=True)
class RateRow:
    quantity: str
    order: float
    log_constant: float
    points: int
    low: float
    high: float
    status: str

    @property
    def passed(self) -> bool:
        return self.status in ("in_range", "exact", "fitted")


def fit_order(taus, values) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log(value)`` against ``log(tau)``."""
    x = np.log(np.asarray(taus, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def thread_count() -> int:
    cap = os.environ.get("QRW_THREADS")
    default = os.cpu_count() or 1
    if cap is None:
        return default
    try:
        return max(1, min(int(cap), default))
    except ValueError:
        return 1


def _rate(quantity, taus, values, low, high, floor) -> RateRow:
    if all(v <= floor for v in values):
        return RateRow(quantity, math.nan, math.nan, len(values), low, high, "exact")
    if len(values) < 2 or any(v <= 0 for v in values):
        return RateRow(quantity, math.nan, math.nan, len(values), low, high, "unfittable")
    order, c = fit_order(taus, values)
    if math.isnan(low):
        return RateRow(quantity, order, c, len(values), low, high, "fitted")
    return RateRow(quantity, order, c, len(values), low, high, "in_range" if low <= order <= high else "out_of_range")


def run_converge(exp: Experiment):
    """Walk-versus-cocycle sweep over the tau grid.

    Returns ``(rows, rates, summary, exit_code)``.  Rows are sorted by
    ``(tau, t)``; times are snapped down to multiples of tau.
    """
    c = exp.config
    data = limit_data(exp)
    g, dh = exp.gns, c.dim_h
    a, u, v = exp.observable()
    f, gf = exp.step_function("f"), exp.step_function("g")
    count = noise_count(exp.condexp, g)
    gauge = gauge_max(exp, data.psi, SplitMix64(c.seeds))
    taus = sorted(c.tau_grid, reverse=True)
    def one(tau):
        dist = generator_distance(exp.model, tau, data.lift, data.Psi)
        snapped = [snap_steps(t, tau) * tau for t in c.t_grid]
        try:
            Phi = gns_generator(build_walk_generator(exp.model, tau), g)
            walks = embedded_walk_series(Phi, g, a, u, v, f, gf, tau, c.t_grid)
        except StepCountError:
            return tau, dist, [(t, None, None) for t in snapped]
        return tau, dist, [(t, w, cocycle_element(CocycleQuery(data.psi, g, a, u, v, f, gf, t)))
                           for t, w in zip(snapped, walks)]

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(one, taus))

    dists = {tau: dist for tau, dist, _ in results}
    gen_rate = _rate("generator_distance", list(dists), list(dists.values()),
                     c.tolerance("order_low"), c.tolerance("order_high"), c.tolerance("algebraic"))
    sup = {}
    rows = []
    for tau, dist, items in results:
        for t, w, k in items:
            if w is None:
                rows.append(ConvergenceRow(c.experiment, tau, t, None, None, None, dist, gen_rate.order, count, gauge,
                                           c.tolerance("convergence_final"), c.tolerance("gauge"), "step_limit"))
                continue
            err = abs(w - k)
            sup[tau] = max(sup.get(tau, 0.0), err)
            rows.append(ConvergenceRow(c.experiment, tau, t, w, k, err, dist, gen_rate.order, count, gauge,
                                       c.tolerance("convergence_final"), c.tolerance("gauge")))
    rows.sort(key=lambda r: (r.tau, r.t))
    ok_taus = sorted(sup, reverse=True)
    err_rate = _rate("walk_cocycle_sup_error", ok_taus, [sup[t] for t in ok_taus],
                     math.nan, math.nan, c.tolerance("walk_relative"))
    sups = [sup[t] for t in ok_taus]
    exact = all(s <= c.tolerance("walk_relative") for s in sups)
    decreasing = exact or all(x > y for x, y in zip(sups, sups[1:]))
    final = sups[-1] if sups else math.nan
    step_errors = sum(r.status != "ok" for r in rows)
    summary = {
        "experiment": c.experiment,
        "flavor": c.flavor,
        "taus": len(taus),
        "times": len(c.t_grid),
        "final_tau": ok_taus[-1] if ok_taus else math.nan,
        "final_sup_error": final,
        "final_sup_error_tolerance": c.tolerance("convergence_final"),
        "sup_error_strictly_decreasing": decreasing,
        "generator_order": gen_rate.order,
        "generator_order_status": gen_rate.status,
        "noise_count": count,
        "noise_bound": 2 * (c.dim_K**2 - 1),
        "gauge_residual": gauge,
        "step_limit_rows": step_errors,
    }
    passed = (step_errors == 0 and gen_rate.passed and decreasing and final <= c.tolerance("convergence_final")
              and gauge <= c.tolerance("gauge"))
    summary["passed"] = passed
    return rows, [gen_rate, err_rate], summary, 0 if passed else 1
