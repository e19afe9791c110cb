import numpy as np
import pytest

from filterprep import HermitianOperator, make_rng


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def small_hamiltonian():
    """n = 2 operator with spectrum strictly inside (0, 1)."""
    rng = make_rng(11)
    h = random_hermitian(4, rng)
    w, v = np.linalg.eigh(h)
    w = 0.2 + 0.6 * (w - w.min()) / (w.max() - w.min())
    return HermitianOperator((v * w) @ v.conj().T, "random n=2")


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Record one 'criterion N: PASS|FAIL detail' line, echoed now and in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
