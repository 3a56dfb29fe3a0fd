import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hcma import kernels

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "benchmarks"))
from bench_kernels import _inputs  # noqa: E402


def _first(x):
    return np.asarray(x[0] if isinstance(x, tuple) else x)


@pytest.mark.parametrize("name", ["geodesic_rev", "jacobi_strip", "jacobi_path", "boundary_newton"])
def test_backends_agree(name):
    args = _inputs()[name]
    a = _first(kernels.compiled_variants()[name](*args))
    b = _first(kernels.numpy_variants()[name](*args))
    assert a.shape == b.shape
    assert np.max(np.abs(a - b)) <= 1e-11 * max(1.0, np.max(np.abs(b)))


def _backend(flag):
    env = dict(os.environ)
    env.pop("HCMA_DISABLE_NUMBA", None)
    if flag is not None:
        env["HCMA_DISABLE_NUMBA"] = flag
    out = subprocess.run([sys.executable, "-c", "import hcma; print(hcma.backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_backend():
    assert _backend("1") == "numpy"
    assert _backend("0") == "numba"
    assert _backend(None) == "numba"
