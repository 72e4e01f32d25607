import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compnet.errors import StabilityError, StructuralError
from compnet.spectral import (
    build_bx,
    build_by,
    perron_property_check,
    predict_transient,
    spectral_radius,
    spectral_report,
    subdominant_modulus,
)
from compnet.topology import (
    Mode,
    build_averaging_matrix,
    perron_weights,
    random_connected_adjacency,
    validate_inference_matrix,
    weak_inference_matrix,
)


@pytest.fixture
def paper_b(cournot_mats):
    A1, A2, C, _ = cournot_mats
    return build_bx(A1, C.C12, C.C2), build_by(A2, C.C21, C.C1)


def test_bx_left_stochastic(paper_b):
    Bx, By = paper_b
    assert Bx.shape == (6, 6)
    assert np.max(np.abs(Bx.sum(axis=0) - 1)) <= 1e-12
    assert np.max(np.abs(By.sum(axis=0) - 1)) <= 1e-12


def test_bx_structure(cournot_mats):
    A1, _, C, _ = cournot_mats
    Bx = build_bx(A1, C.C12, C.C2)
    # independent assembly from the definition
    ref = np.zeros((6, 6))
    ref[:3, :3] = A1.entries
    ref[:3, 3:] = A1.entries @ C.C12
    ref[3:, 3:] = C.C2
    assert np.array_equal(Bx, ref)


def test_bx_decoupled_when_c12_zero(cournot_mats):
    A1 = cournot_mats[0]
    Bx = build_bx(A1, np.zeros((3, 2)), np.eye(2))
    assert np.array_equal(Bx[:3, :3], A1.entries)
    assert np.all(Bx[:3, 3:] == 0) and np.all(Bx[3:, :3] == 0)
    assert np.array_equal(Bx[3:, 3:], np.eye(2))
    p = perron_weights(A1, A1).p1
    assert perron_property_check(Bx, p) <= 1e-10


def test_bx_shape_mismatch(cournot_mats):
    with pytest.raises(StructuralError):
        build_bx(cournot_mats[0], np.zeros((2, 3)), np.eye(3))


def test_perron_property(paper_b):
    Bx, By = paper_b
    assert perron_property_check(Bx, np.array([3, 2, 2]) / 7) <= 1e-10


def test_perron_property_sensitive(paper_b):
    p = np.array([3, 2, 2]) / 7
    p[0] += 0.01
    p /= p.sum()
    assert perron_property_check(paper_b[0], p) > 1e-3


def test_subdominant_paper(paper_b):
    Bx, _ = paper_b
    lam = subdominant_modulus(Bx)
    moduli = np.sort(np.abs(np.linalg.eigvals(Bx)))[::-1]
    assert 0 < lam < 1
    assert lam == pytest.approx(moduli[1], abs=1e-12)


def test_subdominant_rank_one():
    assert subdominant_modulus(np.full((5, 5), 0.2)) == pytest.approx(0.0, abs=1e-12)


def test_subdominant_identity():
    assert subdominant_modulus(np.eye(3)) == pytest.approx(1.0)


def test_subdominant_rejects_non_stochastic():
    with pytest.raises(StabilityError):
        subdominant_modulus(2 * np.eye(2))


@pytest.mark.parametrize("mu, lam, expected", [(0.1, 0.5, 7), (1.0, 0.5, 0), (0.01, 0.9, 88)])
def test_predict_transient(mu, lam, expected):
    assert predict_transient(mu, lam) == expected


def test_predict_transient_unstable():
    with pytest.raises(StabilityError):
        predict_transient(0.1, 1.0)


def test_report_paper(cournot_mats):
    A1, A2, C, _ = cournot_mats
    rep = spectral_report(A1, A2, C)
    assert rep.perron_residual_bx <= 1e-10 and rep.perron_residual_by <= 1e-10
    assert rep.subdominant_bx < 1 and rep.subdominant_by < 1
    assert rep.rho_c1 < 1 and rep.rho_c2 < 1
    assert rep.rho_c2 == pytest.approx(spectral_radius(C.C2))
    assert set(rep.to_dict()) >= {"subdominant_bx", "rho_c1"}


@st.composite
def weak_triples(draw):
    seeds = draw(st.tuples(st.integers(0, 2**31), st.integers(0, 2**31)))
    n1, n2 = draw(st.integers(1, 6)), draw(st.integers(1, 6))
    A1 = build_averaging_matrix(random_connected_adjacency(n1, 0.4, np.random.default_rng(seeds[0])), 1)
    A2 = build_averaging_matrix(random_connected_adjacency(n2, 0.4, np.random.default_rng(seeds[1])), 2)
    into1 = draw(st.lists(st.integers(0, n1 - 1), min_size=1, max_size=n1, unique=True))
    into2 = draw(st.lists(st.integers(0, n2 - 1), min_size=1, max_size=n2, unique=True))
    src = draw(st.integers(0, 10**6))
    C = weak_inference_matrix(A1, A2, {k: [src % n2] for k in into1}, {k: [src % n1] for k in into2},
                              cross_weight=draw(st.floats(0.05, 0.95)))
    return A1, A2, C


@settings(max_examples=60, deadline=None)
@given(weak_triples())
def test_weak_valid_inputs_satisfy_perron_properties(triple):
    A1, A2, C = triple
    assert validate_inference_matrix(C).passed
    p = perron_weights(A1, A2)
    for B, pt in ((build_bx(A1, C.C12, C.C2), p.p1), (build_by(A2, C.C21, C.C1), p.p2)):
        assert np.max(np.abs(B.sum(axis=0) - 1)) <= 1e-12
        assert np.max(np.abs(np.linalg.eigvals(B))) == pytest.approx(1.0, abs=1e-10)
        assert perron_property_check(B, pt) <= 1e-10
    assert spectral_radius(C.C1) < 1 and spectral_radius(C.C2) < 1


@settings(max_examples=40, deadline=None)
@given(weak_triples(), st.integers(0, 2**31))
def test_subdominant_permutation_invariant(triple, seed):
    A1, _, C = triple
    B = build_bx(A1, C.C12, C.C2)
    perm = np.random.default_rng(seed).permutation(B.shape[0])
    assert subdominant_modulus(B[np.ix_(perm, perm)]) == pytest.approx(subdominant_modulus(B), abs=1e-9)
