import numpy as np
import pytest
from hypothesis import given, strategies as st

from hodge_spectra.experiments import full_pack
from hodge_spectra.gap import (
    EigenspacePack, SubspacesTooFarError, check_star_hypothesis, n_gap, subspace_isometry,
)
from hodge_spectra.meshes import torus2
from hodge_spectra.metric import ConformalField
from hodge_spectra.spectra import assemble, coexact_spectrum


@pytest.fixture(scope="module")
def base():
    m = torus2(8)
    prob = assemble(m.complex, m.metric, 0)
    rep = coexact_spectrum(prob, 8)
    return m, prob, full_pack(rep, prob.mass, 5)


def test_gap_of_a_form_with_itself_vanishes(base):
    _, _, pack = base
    assert n_gap(pack, pack).gap <= 1e-10


@given(st.sampled_from([1e-2, 1e-3, 0.1]))
def test_scaled_form_gap_is_delta_lambda_n(delta):
    m = torus2(6)
    prob = assemble(m.complex, m.metric, 0)
    pack = full_pack(coexact_spectrum(prob, 6), prob.mass, 5)
    scaled = EigenspacePack(pack.basis, (1 + delta) * pack.values, pack.mass)
    assert n_gap(pack, scaled).gap == pytest.approx(delta * pack.values[-1], rel=1e-10)


def test_gap_is_invariant_under_basis_rotation(base):
    _, prob, pack = base
    # rotating within the first (eigenvalue-0) direction changes nothing; swap signs
    flipped = EigenspacePack(-pack.basis, pack.values, pack.mass)
    assert n_gap(pack, flipped).gap <= 1e-10


def test_conformal_perturbation_gap_is_linear(base):
    m, _, pack = base
    rng = np.random.default_rng(0)
    pert = rng.uniform(-1, 1, m.complex.num_cells(2))
    slopes = []
    for t in (1e-3, 2e-3, 4e-3):
        p2 = assemble(m.complex, m.metric, 0, "absolute", ConformalField(1 + t * pert))
        slopes.append(n_gap(pack, full_pack(coexact_spectrum(p2, 8), p2.mass, 5)).gap / t)
    assert max(slopes) / min(slopes) < 1.1


def test_far_subspaces_raise(base):
    _, prob, _ = base
    rep = coexact_spectrum(prob, 10)
    low = EigenspacePack.lowest(rep.eigenvalues, rep.eigenvectors, prob.mass, 4)
    high = EigenspacePack(rep.eigenvectors[:, 4:8], rep.eigenvalues[4:8], prob.mass)
    with pytest.raises(SubspacesTooFarError):
        subspace_isometry(low, high)


def test_pack_validation(base):
    _, prob, pack = base
    with pytest.raises(ValueError, match="orthonormal"):
        EigenspacePack(2 * pack.basis, pack.values, pack.mass)
    with pytest.raises(ValueError, match="disagree"):
        EigenspacePack(pack.basis, pack.values[:2], pack.mass)
    small = EigenspacePack(pack.basis[:, :2], pack.values[:2], pack.mass)
    with pytest.raises(ValueError, match="dimension mismatch"):
        n_gap(pack, small)


def test_star_hypothesis():
    vals = [0.0, 1.0, 1.0, 3.0, 4.0]
    assert check_star_hypothesis(vals, 3, 1.0, 10.0)
    assert not check_star_hypothesis(vals, 2, 0.5, 10.0)
    assert not check_star_hypothesis(vals, 3, 1.0, 2.0)
    with pytest.raises(ValueError):
        check_star_hypothesis(vals, 5, 0.1, 10.0)
