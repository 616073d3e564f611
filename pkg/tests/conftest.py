import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_field(grid, rng, max_mode=3):
    """Random combination of low cosine/sine products, not mean-removed."""
    X, Y = grid.mesh()
    f = np.zeros(grid.shape)
    for kx in range(max_mode + 1):
        for ky in range(max_mode + 1):
            a, b = rng.standard_normal(2)
            f += a * np.cos(np.pi * kx * X / grid.Lx) * np.cos(np.pi * ky * Y / grid.Ly)
            f += 0.3 * b * np.sin(np.pi * (kx + 1) * X / grid.Lx) * np.cos(np.pi * ky * Y / grid.Ly)
    return f


def wall_tangent_field(grid, rng, max_mode=3):
    """Smooth velocity whose normal component vanishes on every wall."""
    X, Y = grid.mesh()
    ux = np.zeros(grid.shape)
    uy = np.zeros(grid.shape)
    for kx in range(1, max_mode + 1):
        for ky in range(max_mode + 1):
            a, b = rng.standard_normal(2)
            ux += a * np.sin(np.pi * kx * X / grid.Lx) * np.cos(np.pi * ky * Y / grid.Ly)
            uy += b * np.cos(np.pi * ky * X / grid.Lx) * np.sin(np.pi * kx * Y / grid.Ly)
    return np.stack([ux, uy])


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}
ACCEPTANCE_COUNT = 10


def record_criterion(k: int, ok: bool, text: str) -> None:
    ACCEPTANCE[k] = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {text}"


def pytest_terminal_summary(terminalreporter):
    ran = [r for rs in terminalreporter.stats.values() for r in rs
           if getattr(r, "nodeid", "").startswith("tests/test_acceptance.py")]
    if not ran and not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, ACCEPTANCE_COUNT + 1):
        terminalreporter.write_line(ACCEPTANCE.get(k, f"criterion {k:2d}: FAIL  (not completed)"))
