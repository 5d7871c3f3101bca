import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial.hermite import hermval

from cvgkp.exceptions import InvalidParameterError
from cvgkp.fock import (
    FockOperator,
    commutator,
    commutator_identity_check,
    cps_approx_state,
    fock_to_grid,
    hermite_functions,
    interior_size,
    quadrature_matrices,
    trotter_product_error,
)

STEPS = [4, 8, 16, 32, 64]


def loglog_slope(ns, errs):
    return np.polyfit(np.log(ns), np.log(errs), 1)[0]


def test_quadrature_matrix_elements():
    q, p = quadrature_matrices(4)
    assert q.matrix[0, 1] == pytest.approx(1 / np.sqrt(2))
    assert q.is_hermitian() and p.is_hermitian()
    assert (q @ q).matrix[0, 0].real == pytest.approx(0.5)


@pytest.mark.parametrize("dim", [4, 10, 33])
@pytest.mark.parametrize("hbar", [1.0, 0.5])
def test_canonical_commutator_interior(dim, hbar):
    q, p = quadrature_matrices(dim, hbar)
    c = commutator(q, p)
    k = dim - 2
    np.testing.assert_allclose(c[:k, :k], 1j * hbar * np.eye(k), atol=1e-10)
    # the truncation edge breaks it
    assert abs(c[-1, -1] - 1j * hbar) > 1


def test_quadrature_matrices_reject_small_dim():
    with pytest.raises(InvalidParameterError):
        quadrature_matrices(3)


def test_fock_operator_validation_and_algebra():
    q, p = quadrature_matrices(6)
    with pytest.raises(InvalidParameterError):
        FockOperator(5, q.matrix)
    with pytest.raises(InvalidParameterError):
        q @ quadrature_matrices(7)[0]
    np.testing.assert_allclose((q**2).matrix, (q @ q).matrix)
    np.testing.assert_allclose((2 * q - q).matrix, q.matrix)
    np.testing.assert_allclose((q + p).matrix, q.matrix + p.matrix)


def test_commuting_trotter_is_exact():
    q, _ = quadrature_matrices(40)
    for n in STEPS:
        assert trotter_product_error(q**2, q**3, 0.1, n) < 1e-12


@pytest.mark.parametrize("dim", [20, 40])
def test_symmetric_trotter_slope(dim):
    q, p = quadrature_matrices(dim)
    errs = [trotter_product_error(q**2, p**2, 0.1, n) for n in STEPS]
    assert loglog_slope(STEPS, errs) == pytest.approx(-2.0, abs=0.1)


def test_commutator_product_slope():
    # [q^2, p] = 2iq keeps the series open; the leading error is t^3/N
    q, p = quadrature_matrices(40)
    errs = [trotter_product_error(q**2, p, 0.1, n, "commutator") for n in STEPS]
    assert loglog_slope(STEPS, errs) == pytest.approx(-1.0, abs=0.1)
    assert errs[0] == pytest.approx(0.1**3 / 4, rel=1e-3)


def test_commutator_product_exact_for_heisenberg_pair():
    # displacements close a Heisenberg group, so the product is exact
    q, p = quadrature_matrices(40)
    for n in STEPS:
        assert trotter_product_error(q, p, 0.1, n, "commutator") < 1e-10


def test_trotter_errors():
    q, p = quadrature_matrices(10)
    with pytest.raises(InvalidParameterError):
        trotter_product_error(q, quadrature_matrices(12)[1], 0.1, 4)
    with pytest.raises(InvalidParameterError):
        trotter_product_error(q, p, 0.1, 4, "sixth-order")
    with pytest.raises(InvalidParameterError):
        trotter_product_error(q, p, 0.1, 0)


@pytest.mark.parametrize("m, n, dim, tol", [(1, 1, 40, 1e-9), (1, 3, 50, 1e-8), (2, 2, 60, 1e-8), (3, 1, 60, 1e-8)])
def test_exact_identities(m, n, dim, tol):
    r18, r19 = commutator_identity_check(m, n, dim)
    assert r18 < tol
    assert r19 < tol


def test_identities_need_half_hbar():
    r18, r19 = commutator_identity_check(2, 2, 60, hbar=1.0)
    assert r18 > 1 and r19 > 1


def test_identity_residual_grows_at_truncation_edge():
    q, p = (o.matrix for o in quadrature_matrices(40, 0.5))
    mp = np.linalg.matrix_power
    res = mp(q, 2) + 2 / 3 * commutator(q, commutator(mp(q, 3), mp(p, 2)))
    k = interior_size(40)
    assert np.abs(res[:k, :k]).max() < 1e-9
    assert np.abs(res).max() > 1


def test_cps_vacuum_limit():
    psi = cps_approx_state(0.0)
    np.testing.assert_array_equal(psi[:1], [1])
    assert np.all(psi[1:] == 0)


def test_cps_weight():
    psi = cps_approx_state(0.1)
    assert abs(psi[3]) ** 2 == pytest.approx(0.0075 / 1.0075, rel=1e-12)
    assert np.linalg.norm(psi) == pytest.approx(1.0)


def test_cps_rejects_large_gamma():
    with pytest.raises(InvalidParameterError):
        cps_approx_state(1.0)


@given(st.floats(-0.9, 0.9))
def test_cps_wavefunction(gamma):
    x = np.linspace(-4, 4, 161)
    psi = fock_to_grid(cps_approx_state(gamma), x)
    expected = np.pi**-0.25 * np.exp(-x * x / 2) * (1 + 1j * gamma * (x**3 - 1.5 * x))
    np.testing.assert_allclose(psi * np.sqrt(1 + 0.75 * gamma**2), expected, atol=1e-10)


def test_hermite_functions_against_polynomials():
    from math import factorial

    x = np.linspace(-5, 5, 51)
    h = hermite_functions(12, x)
    for n in range(12):
        c = np.zeros(n + 1)
        c[n] = 1
        ref = hermval(x, c) * np.exp(-x * x / 2) / np.sqrt(2.0**n * factorial(n) * np.sqrt(np.pi))
        np.testing.assert_allclose(h[n], ref, atol=1e-12)


def test_hermite_functions_orthonormal():
    x = np.linspace(-15, 15, 3001)
    h = hermite_functions(40, x)
    gram = h @ h.T * (x[1] - x[0])
    np.testing.assert_allclose(gram, np.eye(40), atol=1e-9)
