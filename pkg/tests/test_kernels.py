import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from itertools import combinations

from hodge_spectra import kernels
from hodge_spectra.meshes import torus2, torus3

needs_ext = pytest.mark.skipif(kernels._ckernels is None, reason="compiled extension not built")


@given(arrays(np.int64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.integers(-3, 3)))
def test_exact_rank_matches_float_rank_on_small_matrices(a):
    # entries are tiny, so the float SVD rank is unambiguous here
    expected = np.linalg.matrix_rank(a.astype(float))
    assert kernels.exact_rank(sp.csr_matrix(a), backend="python") == expected
    assert kernels.exact_rank(sp.csr_matrix(a)) == expected


@given(arrays(np.int64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.integers(-3, 3)))
def test_independent_columns_span_the_column_space(a):
    mask = kernels.independent_columns(sp.csc_matrix(a))
    sub = a[:, mask].astype(float)
    rank_sub = np.linalg.matrix_rank(sub) if mask.any() else 0
    assert rank_sub == mask.sum() == np.linalg.matrix_rank(a.astype(float))


def test_rank_of_rank_deficient_integer_matrix():
    a = np.array([[2, 4, 6], [1, 2, 3], [0, 1, 1]])
    assert kernels.exact_rank(sp.csr_matrix(a)) == 2


def test_large_entries_fall_back_without_overflow():
    # growth beyond int64 safety forces the Python-integer path
    big = 2**40
    a = np.array([[big, 1], [1, big], [big, big + 1]], dtype=np.int64)
    assert kernels.exact_rank(sp.csr_matrix(a)) == 2
    b = np.array([[big, 2 * big], [1, 2]], dtype=np.int64)
    assert kernels.exact_rank(sp.csr_matrix(b)) == 1


@needs_ext
@pytest.mark.parametrize("mesh", [torus2(6), torus3(3)], ids=["torus2", "torus3"])
def test_backends_agree_on_coboundary_pivots(mesh):
    cx = mesh.complex
    for p in range(cx.dim):
        a = kernels.independent_columns(cx.coboundary(p), backend="compiled")
        b = kernels.independent_columns(cx.coboundary(p), backend="python")
        assert np.array_equal(a, b)


@needs_ext
@pytest.mark.parametrize("mesh", [torus2(6), torus3(3)], ids=["torus2", "torus3"])
def test_backends_agree_on_whitney_masses(mesh):
    n = mesh.complex.dim
    g, v = mesh.metric.bary_gram, mesh.metric.volumes
    for p in range(n + 1):
        faces = np.array(list(combinations(range(n + 1), p + 1)))
        a = kernels.whitney_local_mass(g, v, faces, n, backend="compiled")
        b = kernels.whitney_local_mass(g, v, faces, n, backend="python")
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_backend_flag_is_known():
    assert kernels.BACKEND in ("compiled", "python")


def test_pure_backend_selected_by_environment():
    import os
    import subprocess
    import sys

    code = ("from hodge_spectra import BACKEND, betti_numbers; from hodge_spectra.meshes import torus2;"
            "print(BACKEND, betti_numbers(torus2(5).complex))")
    env = dict(os.environ, HODGE_SPECTRA_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split()[0] == "python"
    assert "(1, 2, 1)" in out.stdout
