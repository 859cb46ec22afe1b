import numpy as np
import pytest

from mqforest.data import gen_clustered_sphere, gen_uniform_sphere

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def report(number: int, name: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2} {name}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f" ({detail})"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_uniform():
    return gen_uniform_sphere(2000, 16, seed=3)


@pytest.fixture(scope="session")
def small_clustered():
    data, labels = gen_clustered_sphere(4000, 32, num_clusters=8, spread=0.2, seed=5, intrinsic_dim=6)
    return data


def unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)
