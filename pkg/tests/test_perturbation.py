import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvedsys.boundary import make_grid
from curvedsys.schur import CharTriple
from curvedsys.systems import char_triple_from_colligation, random_colligation
from curvedsys.model import build_model, model_resolvent
from curvedsys.perturbation import (
    Perturbation, PerturbationError, SpectrumHit, duality_diagnostic, naboko_form, perturbed_operator,
    perturbed_resolvent, spectral_membership, symbol_eigenvalues, theta_kappa,
)

G64 = make_grid("circle", 64)
G256 = make_grid("circle", 256)
G512 = make_grid("circle", 512)


@pytest.fixture(scope="module")
def shift_model():
    return build_model(CharTriple.from_function(G64, lambda z: z))


@pytest.fixture(scope="module")
def matrix_model():
    A = random_colligation(3, 2, seed=1, max_radius=0.8)
    return build_model(char_triple_from_colligation(A, G512))


@pytest.fixture(scope="module")
def outer_model():
    return build_model(CharTriple.from_function(G256, lambda z: np.array([[0.4 * z + 0.1]])))


@pytest.fixture(scope="module")
def outer_model_fine():
    return build_model(CharTriple.from_function(G512, lambda z: np.array([[0.4 * z + 0.1]])))


def test_shift_symbols(shift_model):
    c = 0.3 + 0.2j
    sym = theta_kappa(shift_model, [[c]])
    for z in (0.5, -0.2j):
        assert abs(sym.plus_at(z)[0, 0] - (z - c)) < 1e-14
    for z in (2.0, 1.5j):
        assert abs(sym.minus_at(z)[0, 0] - (1 - c / z)) < 1e-14
    assert sym.analyticity() < 1e-14


def test_zero_coupling_collapses(matrix_model):
    m = matrix_model
    sym = theta_kappa(m, np.zeros((2, 2)))
    assert np.max(np.abs(sym.plus - m.theta.theta_plus.values)) == 0
    assert np.max(np.abs(sym.minus - np.eye(2))) == 0
    f = m.vector(np.ones((m.dim_k, 1)) + 0j)
    for z in (0.3j, 2.0):
        assert np.max(np.abs(perturbed_resolvent(m, np.zeros((2, 2)), f, z) - model_resolvent(m, f, z))) <= 1e-10


def test_shift_eigenvalue_at_coupling(shift_model):
    c = 0.3 + 0.2j
    pert = Perturbation([[c]], shift_model)
    assert abs(perturbed_operator(pert).S[0, 0] - c) < 1e-12
    assert np.allclose(symbol_eigenvalues(pert.symbols), [c], atol=1e-10)
    with pytest.raises(SpectrumHit):
        perturbed_resolvent(shift_model, pert, shift_model.k_basis, c)


@pytest.mark.parametrize("z", [3.0, 0.2j, -0.5, 1.5j])
def test_resolvent_matches_matrix(matrix_model, z):
    m = matrix_model
    rng = np.random.default_rng(0)
    kappa = 0.5 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    pert = Perturbation(kappa, m)
    S = perturbed_operator(pert).S
    c = rng.normal(size=(m.dim_k, 2)) + 0j
    g = perturbed_resolvent(m, pert, m.vector(c), z)
    assert np.max(np.abs(m.coords(g) - np.linalg.solve(S - z * np.eye(m.dim_k), c))) <= 1e-8
    assert np.max(np.abs(g - m.vector(m.coords(g)))) <= 1e-8


def test_eigenvalues_from_symbols(matrix_model):
    rng = np.random.default_rng(7)
    kappa = 0.8 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    pert = Perturbation(kappa, matrix_model)
    ev = np.linalg.eigvals(perturbed_operator(pert).S)
    inside = np.sort_complex(ev[np.abs(ev) < 0.9])
    outside = np.sort_complex(ev[np.abs(ev) > 1.15])
    assert np.allclose(np.sort_complex(symbol_eigenvalues(pert.symbols, "plus")), inside, atol=1e-6)
    assert np.allclose(np.sort_complex(symbol_eigenvalues(pert.symbols, "minus")), outside, atol=1e-6)


def test_naboko_form_examples():
    U = np.array([[0, 1], [1, 0]], dtype=complex)
    assert np.max(np.abs(naboko_form(U, np.ones((2, 2))) - U)) < 1e-14
    assert abs(naboko_form([[0]], [[0.4j]])[0, 0] - 0.4j) < 1e-15
    out = naboko_form(np.diag([0.5, 1.0]), np.eye(2))
    assert np.max(np.abs(out - np.diag([1.25, 1.0]))) < 1e-14


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_naboko_form_ignores_unitary_part(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    T = np.zeros((3, 3), dtype=complex)
    T[0, 0] = np.exp(2j * np.pi * rng.uniform())
    T[1:, 1:] = X / (np.linalg.norm(X, 2) * rng.uniform(1.05, 2.0))
    assert np.max(np.abs(naboko_form(T, np.zeros((3, 3))) - T)) < 1e-14
    S = naboko_form(T, rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    # both defect operators vanish on the unitary summand, so its row and column are untouched
    assert np.max(np.abs(S[:, 0] - T[:, 0])) < 1e-12 and np.max(np.abs(S[0, :] - T[0, :])) < 1e-12


def test_coupling_shape_checked(matrix_model):
    with pytest.raises(PerturbationError):
        Perturbation(np.eye(3), matrix_model)


def test_membership_of_model_space(outer_model_fine):
    m = outer_model_fine
    pert = Perturbation([[-0.5j]], m)
    assert len(symbol_eigenvalues(pert.symbols, "plus")) == 0
    f = m.k_basis[..., :5]
    # every vector of 𝒦 satisfies the N± constraints when the symbols have no zeros
    assert spectral_membership(m, pert, f, "N").member
    rep = spectral_membership(m, pert, f, "M")
    assert not rep.member and rep.residual > 1e-3
    assert set(spectral_membership(m, pert, f, "DM+").parts) == {"D+", "M"}
    with pytest.raises(PerturbationError):
        spectral_membership(m, pert, f, "X")


def test_shift_spectral_components(shift_model):
    m = shift_model
    pert = Perturbation([[0.3]], m)
    # the single eigenvector: not in the Nevanlinna part, but in the singular-like part
    assert not spectral_membership(m, pert, m.k_basis, "N+").member
    assert spectral_membership(m, pert, m.k_basis, "M").member


@pytest.mark.parametrize("kappa", [0.0, 0.3 + 0.2j])
def test_duality_outer(outer_model, kappa):
    # one zero of Θ_{·κ}⁺ in the disk: Ñ has codimension one in 𝒦
    assert len(symbol_eigenvalues(theta_kappa(outer_model, [[kappa]]), "plus")) == 1
    rep = duality_diagnostic(outer_model, [[kappa]])
    assert rep.k_mismatch < 1e-10
    assert rep.dim_n_perp == rep.dim_m_dual == 1
    assert rep.passed, rep


def test_duality_outer_without_zeros(outer_model_fine):
    # Θ_{·κ}⁺ has a zero at |z| ≈ 1.26, so its inverse decays slowly; this needs the finer grid
    rep = duality_diagnostic(outer_model_fine, [[-0.5j]])
    assert rep.dim_n == rep.dim_k and rep.dim_m_dual == 0 and rep.passed


def test_duality_inner_and_constant():
    m = build_model(char_triple_from_colligation(random_colligation(2, 1, seed=3, max_radius=0.8), G256))
    rep = duality_diagnostic(m, [[0.3 + 0.2j]])
    assert rep.dim_n == 0 and rep.dim_m_dual == 2 and rep.passed
    c = build_model(CharTriple.from_function(G256, lambda z: np.array([[0.5]])))
    rep = duality_diagnostic(c, [[0.3]])
    assert rep.dim_m_dual == 0 and rep.dim_n == rep.dim_k and rep.passed
