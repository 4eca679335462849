import numpy as np
import pytest

from thermalwalk.condexp import build_condexp, lift_delta, vacuum_split
from thermalwalk.generators import attal_joye_model
from thermalwalk.gns import DensityMatrix, build_gns

# criterion -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name}: {'PASS' if passed else 'FAIL'}  {detail}")


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def rho_ref():
    return DensityMatrix.from_eigenvalues([0.75, 0.25])


@pytest.fixture
def gns_ref(rho_ref):
    return build_gns(rho_ref)


def reference_model(flavor="HP", rho=None):
    rho = DensityMatrix.from_eigenvalues([0.75, 0.25]) if rho is None else rho
    return attal_joye_model(np.diag([1.0, -1.0]), [0, 1], np.eye(2), rho, flavor)


def three_level_model(flavor="HP", seed=7):
    rho = DensityMatrix.from_eigenvalues([0.5, 0.3, 0.2])
    r = np.random.default_rng(seed)
    V = crandn(r, 4, 2) * 0.7
    return attal_joye_model(np.diag([1.0, -1.0]), [0, 1, 2], V, rho, flavor)


def limit_objects(model, kind="diagonal"):
    """(gns, lift, split) for a model's density matrix."""
    g = build_gns(model.rho)
    lift = lift_delta(build_condexp(kind, model.rho), model.dim_h)
    return g, lift, vacuum_split(g, model.dim_h)
