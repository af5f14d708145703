from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hodge_spectra.complex import (
    OrientedSimplicialComplex, Subdomain, betti_numbers, build_complex, cohomology_summary,
    permutation_sign, point_complex, relative_cohomology_dim, tensor_product_complex,
)
from hodge_spectra.meshes import (
    band_on_sphere, boxes_in_torus3, circle, disk_in_torus, sphere_ico, strip_in_torus,
    torus2, torus3, torus_tensor,
)

TRIANGLES = list(combinations(range(6), 3))


@st.composite
def random_complexes(draw):
    chosen = draw(st.lists(st.sampled_from(TRIANGLES), min_size=1, max_size=12, unique=True))
    flips = draw(st.lists(st.booleans(), min_size=len(chosen), max_size=len(chosen)))
    tops = [(t[1], t[0], t[2]) if f else t for t, f in zip(chosen, flips)]
    return build_complex(tops)


@given(random_complexes())
def test_coboundary_squares_to_zero(cx):
    for p in range(cx.dim - 1):
        assert (cx.coboundary(p + 1) @ cx.coboundary(p)).count_nonzero() == 0


@given(random_complexes())
def test_euler_characteristic_equals_alternating_betti_sum(cx):
    b = betti_numbers(cx)
    assert all(x >= 0 for x in b)
    assert sum((-1) ** p * x for p, x in enumerate(b)) == cx.euler_characteristic


@given(random_complexes())
def test_boundary_is_coboundary_transpose(cx):
    for p in range(cx.dim):
        assert (cx.boundary(p + 1) != cx.coboundary(p).T).nnz == 0


def test_permutation_sign():
    assert permutation_sign((0, 1, 2)) == 1
    assert permutation_sign((1, 0, 2)) == -1
    assert permutation_sign((2, 0, 1)) == 1


@pytest.mark.parametrize("k", [3, 8, 16])
def test_torus_betti(k):
    assert betti_numbers(torus2(k).complex) == (1, 2, 1)


def test_sphere_and_circle_betti():
    assert betti_numbers(sphere_ico(2).complex) == (1, 0, 1)
    assert sphere_ico(2).complex.num_cells(0) == 162
    assert betti_numbers(circle(8).complex) == (1, 1)
    assert circle(8).complex.f_vector == (8, 8)


def test_torus3_betti():
    assert betti_numbers(torus3(3).complex) == (1, 3, 3, 1)


def test_tensor_torus_betti_and_euler():
    m = torus_tensor([16, 16])
    assert m.complex.num_cells(0) == 256
    assert m.complex.euler_characteristic == 0
    assert betti_numbers(m.complex) == (1, 2, 1)


def test_tensor_coboundary_squares_to_zero():
    cx = tensor_product_complex(circle(5).complex, torus2(3).complex)
    for p in range(cx.dim - 1):
        assert abs(cx.coboundary(p + 1) @ cx.coboundary(p)).max() == 0
    assert betti_numbers(cx) == (1, 3, 3, 1)


def test_point_is_tensor_unit():
    a = circle(6).complex
    cx = tensor_product_complex(a, point_complex())
    assert cx.f_vector == a.f_vector
    assert betti_numbers(cx) == betti_numbers(a)


def test_invalid_complexes_are_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        OrientedSimplicialComplex([(0, 1, 2), (2, 1, 0)])
    with pytest.raises(ValueError, match="inconsistent"):
        OrientedSimplicialComplex([(0, 1, 2), (2, 3)])
    with pytest.raises(ValueError, match="repeated"):
        OrientedSimplicialComplex([(0, 0, 2)])
    with pytest.raises(ValueError):
        OrientedSimplicialComplex([])


def test_top_orientation_records_input_order():
    cx = build_complex([(0, 1, 2), (1, 3, 2)])
    assert list(cx.top_orientation) == [1, -1]


def test_boundary_skeleton_of_a_disk():
    cx = build_complex([(0, 1, 2), (0, 2, 3)])
    skel = cx.boundary_skeleton()
    assert len(skel[1]) == 4 and len(skel[0]) == 4


def test_subdomain_closure_and_boundary():
    m = disk_in_torus(16)
    sub = m.subdomain()
    assert betti_numbers(sub.complex) == (1, 0, 0)
    # closed surface has no boundary, the disk does
    assert len(sub.boundary_skeleton[1]) > 0
    assert all(len(x) == 0 for x in m.complex.boundary_skeleton())


@pytest.mark.parametrize("mesh,expected", [
    (disk_in_torus(16), [0, 0, 0]),
    (band_on_sphere(2), [0, 1, 0]),
    (boxes_in_torus3(6), [1, 0, 0, 0]),
])
def test_relative_cohomology_dims(mesh, expected):
    sub = mesh.subdomain()
    got = [relative_cohomology_dim(mesh.complex, sub, p) for p in range(mesh.dim + 1)]
    assert got == expected


def test_relative_cohomology_of_whole_manifold_vanishes():
    m = torus2(4)
    sub = Subdomain(m.complex, np.arange(m.complex.num_cells(2)))
    assert cohomology_summary(m.complex, sub).relative_dims == (0, 0, 0)


def test_relative_cohomology_degree_range():
    m = strip_in_torus(8)
    with pytest.raises(ValueError):
        relative_cohomology_dim(m.complex, m.subdomain(), 3)
