"""Experiment configuration: JSON parsing, validation, and object construction.

Complex numbers are written as ``[re, im]`` pairs; plain reals are accepted
on input.  Matrices are lists of rows.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .condexp import CondExpectation, build_condexp, pinching
from .gns import DensityMatrix, FaithfulnessError, GnsSpace, build_gns
from .generators import EH, HP, InteractionModel, attal_joye_model
from .rng import SplitMix64
from .walk import StepFunction

__all__ = ["ConfigError", "ExperimentConfig", "DEFAULT_TOLERANCES", "load_config", "parse_config", "Experiment"]

DEFAULT_TOLERANCES = {
    "algebraic": 1e-12,
    "choi": 1e-10,
    "gauge": 1e-13,
    "structure": 1e-11,
    "walk_relative": 1e-10,
    "rank": 1e-10,
    "order_low": 0.4,
    "order_high": 0.6,
    "convergence_final": 5e-3,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _number(x, path: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        _fail(path, f"expected a number, got {x!r}")
    if not math.isfinite(x):
        _fail(path, "must be finite")
    return float(x)


def _complex(x, path: str) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            _fail(path, "complex numbers are [re, im] pairs")
        return complex(_number(x[0], path + "[0]"), _number(x[1], path + "[1]"))
    return complex(_number(x, path))


def _cmatrix(x, shape: tuple[int, int], path: str) -> tuple:
    if not isinstance(x, list) or len(x) != shape[0]:
        _fail(path, f"expected {shape[0]} rows")
    rows = []
    for i, row in enumerate(x):
        if not isinstance(row, list) or len(row) != shape[1]:
            _fail(f"{path}[{i}]", f"expected {shape[1]} entries")
        rows.append(tuple(_complex(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)))
    return tuple(rows)


def _cvector(x, n: int, path: str) -> tuple:
    if not isinstance(x, list) or len(x) != n:
        _fail(path, f"expected a list of {n} entries")
    return tuple(_complex(v, f"{path}[{i}]") for i, v in enumerate(x))


def _int(x, path: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        _fail(path, f"expected an integer, got {x!r}")
    return x


def _encode(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, tuple):
        return [_encode(e) for e in v]
    if isinstance(v, dict):
        return {k: _encode(e) for k, e in v.items()}
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    dim_h: int
    dim_K: int
    rho_eigenvalues: tuple
    condexp: Any  # "diagonal" | "state" | ("block", blocks) | ("pinching", basis, blocks)
    flavor: str
    H_sys: tuple
    H_par_diagonal: tuple
    V: tuple
    e0_index: int
    tau_grid: tuple
    horizon: float
    t_grid: tuple
    f: tuple
    g: tuple
    seeds: int
    observable: tuple | None = None  # (a, u, v)
    tolerances: tuple = ()  # sorted (name, value) overrides

    def tolerance(self, name: str) -> float:
        return dict(self.tolerances).get(name, DEFAULT_TOLERANCES[name])

    def to_dict(self) -> dict:
        if self.condexp in ("diagonal", "state"):
            ce = self.condexp
        elif self.condexp[0] == "block":
            ce = {"block": [list(b) for b in self.condexp[1]]}
        else:
            ce = {"pinching": {"basis": _encode(self.condexp[1]), "blocks": [list(b) for b in self.condexp[2]]}}
        out = {
            "experiment": self.experiment,
            "dim_h": self.dim_h,
            "dim_K": self.dim_K,
            "rho_eigenvalues": list(self.rho_eigenvalues),
            "condexp": ce,
            "model": {
                "flavor": self.flavor,
                "H_sys": _encode(self.H_sys),
                "H_par_diagonal": list(self.H_par_diagonal),
                "V": _encode(self.V),
                "e0_index": self.e0_index,
            },
            "tau_grid": list(self.tau_grid),
            "horizon": self.horizon,
            "t_grid": list(self.t_grid),
            "f": [[d, _encode(v)] for d, v in self.f],
            "g": [[d, _encode(v)] for d, v in self.g],
            "seeds": self.seeds,
            "tolerances": dict(self.tolerances),
        }
        if self.observable is not None:
            a, u, v = self.observable
            out["observable"] = {"a": _encode(a), "u": _encode(u), "v": _encode(v)}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _steps(x, noise_dim: int, path: str) -> tuple:
    if not isinstance(x, list):
        _fail(path, "expected a list of [duration, value] pieces")
    out = []
    for i, piece in enumerate(x):
        if not isinstance(piece, list) or len(piece) != 2:
            _fail(f"{path}[{i}]", "expected [duration, value]")
        d = _number(piece[0], f"{path}[{i}][0]")
        if d <= 0:
            _fail(f"{path}[{i}][0]", "durations must be positive")
        out.append((d, _cvector(piece[1], noise_dim, f"{path}[{i}][1]")))
    return tuple(out)


def _condexp(x, n: int, path: str):
    if x in ("diagonal", "state"):
        return x
    if isinstance(x, dict) and set(x) == {"block"}:
        return ("block", _partition(x["block"], n, path + ".block"))
    if isinstance(x, dict) and set(x) == {"pinching"}:
        pin = x["pinching"]
        if not isinstance(pin, dict) or set(pin) != {"basis", "blocks"}:
            _fail(path + ".pinching", "expected keys 'basis' and 'blocks'")
        basis = _cmatrix(pin["basis"], (n, n), path + ".pinching.basis")
        B = np.array(basis)
        if np.linalg.norm(B.conj().T @ B - np.eye(n), 2) > 1e-10:
            _fail(path + ".pinching.basis", "columns must be orthonormal")
        return ("pinching", basis, _partition(pin["blocks"], n, path + ".pinching.blocks"))
    _fail(path, "expected 'diagonal', 'state', {'block': [...]} or {'pinching': {...}}")


def _partition(x, n: int, path: str) -> tuple:
    if not isinstance(x, list) or not all(isinstance(b, list) for b in x):
        _fail(path, "expected a list of index lists")
    blocks = tuple(tuple(_int(j, path) for j in b) for b in x)
    flat = sorted(j for b in blocks for j in b)
    if flat != list(range(n)) or any(not b for b in blocks):
        _fail(path, f"must partition the indices 0..{n - 1}")
    return blocks


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        _fail("<root>", "expected a JSON object")
    known = {"experiment", "dim_h", "dim_K", "rho_eigenvalues", "condexp", "model", "tau_grid", "horizon",
             "t_grid", "f", "g", "seeds", "observable", "tolerances"}
    for key in data:
        if key not in known:
            _fail(key, "unknown field")
    for key in ("dim_h", "dim_K", "rho_eigenvalues", "condexp", "model"):
        if key not in data:
            _fail(key, "missing required field")
    dim_h = _int(data["dim_h"], "dim_h")
    dim_K = _int(data["dim_K"], "dim_K")
    if dim_h < 1:
        _fail("dim_h", "must be positive")
    if dim_K < 2:
        _fail("dim_K", "must be at least 2")
    lam = data["rho_eigenvalues"]
    if not isinstance(lam, list) or len(lam) != dim_K:
        _fail("rho_eigenvalues", f"expected {dim_K} eigenvalues")
    lam = tuple(_number(v, f"rho_eigenvalues[{i}]") for i, v in enumerate(lam))
    for i, v in enumerate(lam):
        if v <= 0:
            _fail(f"rho_eigenvalues[{i}]", f"faithfulness violation: eigenvalue {v} is not positive")
    if abs(sum(lam) - 1.0) > 1e-12:
        _fail("rho_eigenvalues", f"must sum to 1 within 1e-12, got {sum(lam):.17g}")
    ce = _condexp(data["condexp"], dim_K, "condexp")

    model = data["model"]
    if not isinstance(model, dict):
        _fail("model", "expected an object")
    for key in model:
        if key not in {"flavor", "H_sys", "H_par_diagonal", "V", "e0_index"}:
            _fail(f"model.{key}", "unknown field")
    flavor = model.get("flavor", HP)
    if flavor not in (HP, EH):
        _fail("model.flavor", f"expected {HP!r} or {EH!r}")
    H_sys = _cmatrix(model.get("H_sys", [[0] * dim_h for _ in range(dim_h)]), (dim_h, dim_h), "model.H_sys")
    Hs = np.array(H_sys)
    if np.linalg.norm(Hs - Hs.conj().T, 2) > 1e-12:
        _fail("model.H_sys", "must be Hermitian")
    mu = model.get("H_par_diagonal", [0] * dim_K)
    if not isinstance(mu, list) or len(mu) != dim_K:
        _fail("model.H_par_diagonal", f"expected {dim_K} reals")
    mu = tuple(_number(v, f"model.H_par_diagonal[{i}]") for i, v in enumerate(mu))
    V = _cmatrix(model.get("V", [[0] * dim_h for _ in range(dim_h * (dim_K - 1))]),
                 (dim_h * (dim_K - 1), dim_h), "model.V")
    e0 = _int(model.get("e0_index", 0), "model.e0_index")
    if not 0 <= e0 < dim_K:
        _fail("model.e0_index", "out of range")

    taus = data.get("tau_grid", [])
    if not isinstance(taus, list):
        _fail("tau_grid", "expected a list")
    taus = tuple(_number(v, f"tau_grid[{i}]") for i, v in enumerate(taus))
    if any(t <= 0 for t in taus):
        _fail("tau_grid", "step sizes must be positive")
    if len(set(taus)) != len(taus):
        _fail("tau_grid", "step sizes must be distinct")
    horizon = _number(data.get("horizon", 1.0), "horizon")
    if horizon < 0:
        _fail("horizon", "must be nonnegative")
    ts = data.get("t_grid", [])
    if not isinstance(ts, list):
        _fail("t_grid", "expected a list")
    ts = tuple(_number(v, f"t_grid[{i}]") for i, v in enumerate(ts))
    if any(t < 0 or t > horizon for t in ts):
        _fail("t_grid", "times must lie in [0, horizon]")
    noise_dim = dim_K * dim_K - 1
    f = _steps(data.get("f", []), noise_dim, "f")
    g = _steps(data.get("g", []), noise_dim, "g")
    seeds = _int(data.get("seeds", 0), "seeds")

    obs = data.get("observable")
    if obs is not None:
        if not isinstance(obs, dict) or set(obs) != {"a", "u", "v"}:
            _fail("observable", "expected keys 'a', 'u', 'v'")
        obs = (
            _cmatrix(obs["a"], (dim_h, dim_h), "observable.a"),
            _cvector(obs["u"], dim_h, "observable.u"),
            _cvector(obs["v"], dim_h, "observable.v"),
        )
    tol = data.get("tolerances", {})
    if not isinstance(tol, dict):
        _fail("tolerances", "expected an object")
    for k, v in tol.items():
        if k not in DEFAULT_TOLERANCES:
            _fail(f"tolerances.{k}", "unknown tolerance")
        if _number(v, f"tolerances.{k}") < 0:
            _fail(f"tolerances.{k}", "must be nonnegative")
    tolerances = tuple(sorted((k, float(v)) for k, v in tol.items()))
    return ExperimentConfig(
        experiment=str(data.get("experiment", "experiment")),
        dim_h=dim_h, dim_K=dim_K, rho_eigenvalues=lam, condexp=ce, flavor=flavor,
        H_sys=H_sys, H_par_diagonal=mu, V=V, e0_index=e0, tau_grid=taus, horizon=horizon,
        t_grid=ts, f=f, g=g, seeds=seeds, observable=obs, tolerances=tolerances,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


@dataclass
class Experiment:
    """Concrete objects built from a validated config."""

    config: ExperimentConfig
    rho: DensityMatrix = field(init=False)
    gns: GnsSpace = field(init=False)
    condexp: CondExpectation = field(init=False)
    model: InteractionModel = field(init=False)

    def __post_init__(self):
        c = self.config
        try:
            self.rho = DensityMatrix.from_eigenvalues(c.rho_eigenvalues)
        except FaithfulnessError as exc:
            raise ConfigError(f"rho_eigenvalues: {exc}") from None
        self.gns = build_gns(self.rho)
        if c.condexp in ("diagonal", "state"):
            self.condexp = build_condexp(c.condexp, self.rho)
        elif c.condexp[0] == "block":
            self.condexp = build_condexp("block", self.rho, c.condexp[1])
        else:
            self.condexp = pinching(np.array(c.condexp[1]), c.condexp[2])
        self.model = attal_joye_model(np.array(c.H_sys), c.H_par_diagonal, np.array(c.V), self.rho, c.flavor, c.e0_index)

    def step_function(self, which: str) -> StepFunction:
        pieces = self.config.f if which == "f" else self.config.g
        return StepFunction([(d, np.array(v)) for d, v in pieces], dim=self.gns.dim_noise)

    def observable(self):
        c = self.config
        if c.observable is not None:
            a, u, v = c.observable
            return np.array(a), np.array(u), np.array(v)
        rng = SplitMix64(c.seeds)
        a = rng.complex_matrix(c.dim_h)
        u = rng.complex_vector(c.dim_h)
        v = rng.complex_vector(c.dim_h)
        return a, u / np.linalg.norm(u), v / np.linalg.norm(v)
