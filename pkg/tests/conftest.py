import numpy as np
import pytest


def direct_dft2(x):
    """O(N^2) double-sum DFT over the last two axes, written independently of numpy.fft."""
    x = np.asarray(x, dtype=np.complex128)
    h, w = x.shape[-2:]
    out = np.zeros(x.shape, dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            acc = 0j
            for m in range(h):
                for n in range(w):
                    acc = acc + x[..., m, n] * np.exp(-2j * np.pi * (u * m / h + v * n / w))
            out[..., u, v] = acc
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Returns ``record(ok, detail)`` for the criterion named in the test (``test_cN_...``)."""
    n = int(request.node.name.split("_")[1][1:])
    ACCEPTANCE[n] = f"criterion {n}: FAIL (did not finish)"

    def record(ok, detail):
        ACCEPTANCE[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE[n])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
