"""Truncated number-basis operators.

Quadratures follow ``q = sqrt(hbar/2) (a + a^dag)``, ``p = -i sqrt(hbar/2) (a - a^dag)``
with ``hbar = 1`` unless stated otherwise. Truncation breaks ``[q, p] = i hbar``
in the last row and column, and products of truncated matrices drift further
from the infinite-dimensional values near the edge, so identity and error
checks look only at the interior block of the first three quarters of the
number states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from cvgkp.exceptions import InvalidParameterError

INTERIOR_FRACTION = 0.75


@dataclass(frozen=True, eq=False)
class FockOperator:
    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise InvalidParameterError(f"matrix shape {m.shape} does not match dim {self.dim}")
        object.__setattr__(self, "matrix", m)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=atol))

    def __matmul__(self, other: FockOperator) -> FockOperator:
        return FockOperator(self.dim, self.matrix @ _matrix(other, self.dim))

    def __add__(self, other: FockOperator) -> FockOperator:
        return FockOperator(self.dim, self.matrix + _matrix(other, self.dim))

    def __sub__(self, other: FockOperator) -> FockOperator:
        return FockOperator(self.dim, self.matrix - _matrix(other, self.dim))

    def __mul__(self, scalar) -> FockOperator:
        return FockOperator(self.dim, self.matrix * scalar)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> FockOperator:
        return FockOperator(self.dim, np.linalg.matrix_power(self.matrix, k))


def _matrix(op, dim=None) -> np.ndarray:
    m = op.matrix if isinstance(op, FockOperator) else np.asarray(op, dtype=complex)
    if dim is not None and m.shape != (dim, dim):
        raise InvalidParameterError(f"operator dimensions differ: {m.shape} vs ({dim}, {dim})")
    return m


def interior_size(dim: int) -> int:
    return int(INTERIOR_FRACTION * dim)


def interior_norm(op) -> float:
    """Spectral norm of the interior block."""
    m = _matrix(op)
    k = interior_size(m.shape[0])
    return float(np.linalg.norm(m[:k, :k], 2))


def commutator(a, b) -> np.ndarray:
    a, b = _matrix(a), _matrix(b)
    return a @ b - b @ a


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def quadrature_matrices(dim: int, hbar: float = 1.0) -> tuple[FockOperator, FockOperator]:
    if dim < 4:
        raise InvalidParameterError(f"truncation must be at least 4, got {dim}")
    a = annihilation(dim)
    ad = a.conj().T
    s = np.sqrt(hbar / 2)
    return FockOperator(dim, s * (a + ad)), FockOperator(dim, -1j * s * (a - ad))


def trotter_product_error(A, B, t: float, n_steps: int, formula: str = "symmetric") -> float:
    """Interior spectral-norm error of a product formula.

    ``symmetric`` compares ``exp(it(A+B))`` with
    ``(e^{iAt/2N} e^{iBt/N} e^{iAt/2N})^N``; ``commutator`` compares
    ``exp(t^2 [A, B])`` with ``(e^{iBt/N} e^{iAt/N} e^{-iBt/N} e^{-iAt/N})^(N^2)``.
    """
    a, b = _matrix(A), _matrix(B)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise InvalidParameterError(f"operator dimensions differ: {a.shape} vs {b.shape}")
    if n_steps < 1:
        raise InvalidParameterError(f"n_steps must be positive, got {n_steps}")
    tau = t / n_steps
    if formula == "symmetric":
        exact = expm(1j * t * (a + b))
        half = expm(0.5j * tau * a)
        step = half @ expm(1j * tau * b) @ half
        approx = np.linalg.matrix_power(step, n_steps)
    elif formula == "commutator":
        exact = expm(t * t * commutator(a, b))
        step = expm(1j * tau * b) @ expm(1j * tau * a) @ expm(-1j * tau * b) @ expm(-1j * tau * a)
        approx = np.linalg.matrix_power(step, n_steps**2)
    else:
        raise InvalidParameterError(f"unknown product formula {formula!r}")
    return interior_norm(exact - approx)


def commutator_identity_check(m: int, n: int, dim: int, hbar: float = 0.5) -> tuple[float, float]:
    """Interior residuals of two exact polynomial identities.

    The first builds ``q^(m+1)`` from the nested commutator
    ``-(2/3m) [q^m, [q^3, p^2]]``; the second expresses the symmetrised
    product ``q^m p^n + p^n q^m`` through commutators of lower powers. Both
    coefficient sets assume ``[q, p] = i/2``, which is why ``hbar`` defaults to
    one half; other values leave an O(1) residual.
    """
    if m < 1 or n < 1:
        raise InvalidParameterError(f"m and n must be positive, got {m}, {n}")
    if interior_size(dim) < 1:
        raise InvalidParameterError(f"truncation {dim} leaves no interior block")
    q, p = (op.matrix for op in quadrature_matrices(dim, hbar))
    mp = np.linalg.matrix_power

    lhs18 = mp(q, m + 1)
    rhs18 = -2 / (3 * m) * commutator(mp(q, m), commutator(mp(q, 3), mp(p, 2)))

    lhs19 = mp(q, m) @ mp(p, n) + mp(p, n) @ mp(q, m)
    rhs19 = -4j / ((n + 1) * (m + 1)) * commutator(mp(q, m + 1), mp(p, n + 1))
    for k in range(1, n):
        rhs19 = rhs19 - commutator(mp(p, n - k), commutator(mp(q, m), mp(p, k))) / (n + 1)
    return interior_norm(lhs18 - rhs18), interior_norm(lhs19 - rhs19)


def cps_approx_state(gamma: float, dim: int = 8) -> np.ndarray:
    """Normalised ``|0> + c|3>`` with ``c = i gamma sqrt(3)/2``.

    Its wavefunction is the vacuum Gaussian times ``1 + i gamma (q^3 - 3q/2)``,
    a first-order approximation of the cubic phase state.
    """
    if not abs(gamma) < 1:
        raise InvalidParameterError(f"|gamma| must be below 1, got {gamma}")
    if dim < 4:
        raise InvalidParameterError(f"truncation must be at least 4, got {dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    psi[3] = 1j * gamma * np.sqrt(3) / 2
    return psi / np.linalg.norm(psi)


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Harmonic-oscillator eigenfunctions ``psi_0..psi_{n_max-1}`` at ``x`` (hbar = 1).

    Uses the normalised three-term recurrence, stable for large orders.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-x * x / 2)
    if n_max > 1:
        out[1] = np.sqrt(2) * x * out[0]
    for k in range(2, n_max):
        out[k] = np.sqrt(2 / k) * x * out[k - 1] - np.sqrt((k - 1) / k) * out[k - 2]
    return out


def fock_to_grid(coefficients, x) -> np.ndarray:
    """Position wavefunction of a number-basis state vector."""
    c = np.asarray(coefficients, dtype=complex)
    return np.tensordot(c, hermite_functions(c.size, x), axes=1)
