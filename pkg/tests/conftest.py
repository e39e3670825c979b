"""Shared fixtures: small column builders and a per-step energy audit."""

import numpy as np
import pytest

from stefan_enthalpy import stepper
from stefan_enthalpy.core import Material, MeshSpec, SoilColumn, build_column
from stefan_enthalpy.oracles import decp

ENERGY_TOL = 1e-10


def make_column(h, k_f=2.0, k_u=3.0, k_m=2.5, c_f=1.5, c_u=2.0, latent=10.0):
    """Column with explicit element sizes and scalar or per-entry properties."""
    h = np.asarray(h, dtype=float)
    n = h.size

    def per(value, size):
        return np.broadcast_to(np.asarray(value, dtype=float), (size,)).copy()

    return SoilColumn(nodes=np.concatenate([[0.0], np.cumsum(h)]),
                      k_frozen=per(k_f, n), k_mushy=per(k_m, n), k_unfrozen=per(k_u, n),
                      c_frozen=per(c_f, n + 1), c_unfrozen=per(c_u, n + 1),
                      latent_heat=per(latent, n + 1))


def soil(**kw) -> Material:
    base = dict(k_frozen=2.5, k_mushy=2.0, k_unfrozen=1.5,
                c_frozen=2.0e6, c_unfrozen=3.0e6, latent_heat=1.0e8)
    base.update(kw)
    return Material(**base)


def soil_column(n=10, depth=2.0, ratio=1.0, **kw):
    return build_column([(depth, soil(**kw))], MeshSpec(n, ratio))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def energy_audit(monkeypatch):
    """
    Check the discrete energy budget of every time step taken in a test.

    Wraps the step dispatcher and the DECP step so that no run anywhere in
    the suite can silently lose or create energy.
    """
    seen = {"steps": 0}
    advance, decp_step = stepper.advance, decp.decp_step

    def checked_advance(*args, **kwargs):
        state, stats = advance(*args, **kwargs)
        assert stats.energy_defect <= ENERGY_TOL, stats.energy_defect
        seen["steps"] += 1
        return state, stats

    def checked_decp(*args, **kwargs):
        state, audit = decp_step(*args, **kwargs)
        assert audit.relative_defect <= ENERGY_TOL, audit
        seen["steps"] += 1
        return state, audit

    monkeypatch.setattr(stepper, "advance", checked_advance)
    monkeypatch.setattr(decp, "decp_step", checked_decp)
    return seen


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
