import math
import os
import subprocess
import sys

import numpy as np
import pytest

from warpein import _backend, _kernels_py


def _run(mod, fixed=0.0):
    t0 = 0.1
    y0 = [math.cosh(t0), math.sinh(t0), math.sinh(t0), math.cosh(t0)]
    return mod.dopri5(y0, t0, 3.0, 0.0, 1e-10, 1e-12, 4.0, 2.0, -5.0, -1.0, 100000, 0.0, fixed, (1, 0, 1, 1))


def test_python_kernel_accuracy():
    status, t, y, starts, hs, rc, nfev = _run(_kernels_py)
    assert status == _kernels_py.DONE and t == 3.0
    assert y[0] == pytest.approx(math.cosh(3.0), rel=1e-9)
    assert len(starts) == len(hs) == len(rc)
    # dense output reproduces the step ends
    np.testing.assert_allclose(_kernels_py.dense_eval(rc[-1], 1.0), y, rtol=1e-14)


@pytest.mark.skipif(not _backend.COMPILED, reason="compiled kernel not built")
@pytest.mark.parametrize("fixed", [0.0, 0.01])
def test_compiled_matches_python(fixed):
    from warpein import _kernels

    ref = _run(_kernels_py, fixed)
    out = _run(_kernels, fixed)
    assert out[0] == ref[0] and out[1] == ref[1] and out[6] == ref[6]
    np.testing.assert_allclose(out[2], ref[2], rtol=1e-13)
    np.testing.assert_allclose(out[4], ref[4], rtol=1e-13)
    np.testing.assert_allclose(out[5], ref[5], rtol=1e-11, atol=1e-14)


def test_pure_python_fallback_switch():
    code = "from warpein import _backend; print(_backend.COMPILED, _backend.kernels.__name__)"
    env = dict(os.environ, WARPEIN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "warpein._kernels_py"]
