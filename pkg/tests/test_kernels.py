import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic_lab import _kernels

needs_numba = pytest.mark.skipif(_kernels.numba is None, reason="numba missing")


def brute_subtree(flat, b, depth):
    """Explicit descendant enumeration."""
    offs = [0]
    for lev in range(depth):
        offs.append(offs[-1] + b**lev)
    out = np.zeros_like(flat)
    for lev in range(depth):
        for i in range(b**lev):
            total = 0.0
            for sub in range(lev, depth):
                span = b ** (sub - lev)
                total += flat[offs[sub] + i * span: offs[sub] + (i + 1) * span].sum()
            out[offs[lev] + i] = total
    return out


@needs_numba
@pytest.mark.parametrize("b,depth", [(2, 1), (2, 5), (4, 3), (8, 2)])
def test_subtree_sums_backends_match_enumeration(b, depth, rng):
    n = (b**depth - 1) // (b - 1)
    flat = rng.random(n)
    expected = brute_subtree(flat, b, depth)
    np.testing.assert_allclose(_kernels.subtree_sums_numpy(flat, b, depth), expected, rtol=1e-13)
    np.testing.assert_allclose(_kernels.subtree_sums_numba(flat, b, depth), expected, rtol=1e-13)


@needs_numba
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_coarsen_and_refine_backends_agree(logn, loggroup, seed):
    rng = np.random.default_rng(seed)
    group = 1 << loggroup
    a = rng.standard_normal((1 << logn) * group)
    np.testing.assert_allclose(_kernels.coarsen_numba(a, group), _kernels.coarsen_numpy(a, group), rtol=1e-13)
    parent = rng.standard_normal(1 << logn)
    np.testing.assert_array_equal(_kernels.refine_add_numba(parent, a), _kernels.refine_add_numpy(parent, a))


@needs_numba
def test_power_iteration_backends_agree(rng):
    A = rng.standard_normal((30, 30))
    B = A @ A.T
    v = np.ones(30)
    r_np = _kernels.power_iteration_numpy(B, v, 1e-12, 5000)
    r_nb = _kernels.power_iteration_numba(B, v, 1e-12, 5000)
    assert r_np[1] == r_nb[1]
    assert r_np[0] == pytest.approx(r_nb[0], rel=1e-12)
    np.testing.assert_allclose(r_np[3], r_nb[3], rtol=1e-10)


def test_power_iteration_history_is_monotone(rng):
    A = rng.standard_normal((40, 40))
    B = A @ A.T
    lam, it, res, hist = _kernels.power_iteration(B, np.ones(40), 1e-10, 10_000)
    assert np.all(np.diff(hist) >= -1e-12 * lam)
    assert lam == pytest.approx(np.linalg.eigvalsh(B)[-1], rel=1e-8)


@pytest.mark.parametrize("flag,expected", [("0", "False"), ("off", "False"), ("1", str(_kernels.numba is not None))])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, DYADIC_LAB_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from dyadic_lab import _kernels; print(_kernels.USE_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


def test_numpy_fallback_runs_full_identity(tmp_path):
    """The whole pipeline under the pure-numpy path reproduces an exact identity."""
    code = (
        "import numpy as np\n"
        "from dyadic_lab import GridSpec, StepFunction, gen_recursive_weight, _kernels\n"
        "from dyadic_lab import shiftops\n"
        "assert not _kernels.USE_NUMBA\n"
        "g = GridSpec(1, 4, 6); rng = np.random.default_rng(0)\n"
        "w = gen_recursive_weight(g, seed=1, delta_max=0.5)\n"
        "t = shiftops.six_terms(w, StepFunction.random(g, rng), StepFunction.random(g, rng))\n"
        "print(t.residual)\n"
    )
    env = dict(os.environ, DYADIC_LAB_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert float(out.stdout) < 1e-12
