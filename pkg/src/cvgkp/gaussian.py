"""Multimode Gaussian states in phase space.

States are stored as a mean vector and covariance matrix over interleaved
quadratures ``(q1, p1, ..., qn, pn)`` with ``hbar = 1``, so the vacuum has
covariance ``I / 2``. Gates are Heisenberg-picture affine maps
``x -> S x + d``; applying a gate to a state sends ``mean -> S mean + d`` and
``cov -> S cov S^T``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cvgkp.exceptions import InvalidParameterError, InvalidStateError, NumericalError

VACUUM_VARIANCE = 0.5

SYMMETRY_TOL = 1e-12
SYMPLECTIC_TOL = 1e-10
PHYSICALITY_FLOOR = -1e-10

SINGLE_MODE_GATES = ("displace_q", "displace_p", "displace", "squeeze", "phase", "rotate")
TWO_MODE_GATES = ("bs", "cz", "cx")


def symplectic_form(n_modes: int) -> np.ndarray:
    """Return the ``2n x 2n`` symplectic form for interleaved ordering."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GaussianState:
    """First and second moments of an n-mode Gaussian state.

    Construction checks shapes and symmetry only. Use
    :func:`physicality_check` to test the uncertainty relation.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _frozen(self.mean)
        cov = _frozen(self.cov)
        if mean.ndim != 1 or mean.size % 2:
            raise InvalidStateError(f"mean must be a vector of even length, got shape {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise InvalidStateError(
                f"cov shape {cov.shape} does not match mean length {mean.size}"
            )
        if mean.size and np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
            raise InvalidStateError("covariance matrix is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def reduced(self, modes: Sequence[int]) -> GaussianState:
        """Marginal state on ``modes`` (in the given order)."""
        idx = _quadrature_indices(_check_modes(modes, self.n_modes))
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def quadrature_variance(self, coefficients) -> float:
        """Variance of the linear combination ``c . x`` of quadratures."""
        c = np.asarray(coefficients, dtype=float)
        if c.shape != self.mean.shape:
            raise InvalidParameterError(
                f"coefficient vector has length {c.size}, state has {self.mean.size} quadratures"
            )
        return float(c @ self.cov @ c)

    def allclose(self, other: GaussianState, atol: float = 1e-10) -> bool:
        return (
            self.mean.shape == other.mean.shape
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class SymplecticGate:
    """Affine quadrature map ``x -> S x + d`` with symplectic ``S``."""

    S: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        S = _frozen(self.S)
        d = _frozen(self.d)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
            raise InvalidParameterError(f"S must be square with even size, got {S.shape}")
        if d.shape != (S.shape[0],):
            raise InvalidParameterError(f"displacement length {d.shape} does not match S {S.shape}")
        omega = symplectic_form(S.shape[0] // 2)
        err = np.max(np.abs(S.T @ omega @ S - omega))
        if err > SYMPLECTIC_TOL * max(1.0, np.max(np.abs(S)) ** 2):
            raise InvalidParameterError(f"matrix is not symplectic (error {err:.3g})")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "d", d)

    @property
    def n_modes(self) -> int:
        return self.S.shape[0] // 2

    def inverse(self) -> SymplecticGate:
        omega = symplectic_form(self.n_modes)
        S_inv = -omega @ self.S.T @ omega
        return SymplecticGate(S_inv, -S_inv @ self.d)

    def __matmul__(self, other: SymplecticGate) -> SymplecticGate:
        return compose(self, other)


@dataclass(frozen=True)
class HomodyneOutcome:
    """Result of a homodyne measurement.

    ``conditioned`` is ``None`` when the measured mode was the only one.
    """

    value: float
    conditioned: GaussianState | None


@dataclass(frozen=True)
class PhysicalityReport:
    ok: bool
    min_eigenvalue: float
    asymmetry: float

    def __bool__(self):
        return self.ok


def _check_modes(modes, n_modes) -> list[int]:
    modes = [int(m) for m in np.atleast_1d(modes)]
    if len(set(modes)) != len(modes):
        raise InvalidParameterError(f"duplicate mode indices {modes}")
    for m in modes:
        if not 0 <= m < n_modes:
            raise InvalidParameterError(f"mode index {m} out of range for {n_modes} modes")
    return modes


def _quadrature_indices(modes) -> np.ndarray:
    return np.array([i for m in modes for i in (2 * m, 2 * m + 1)], dtype=int)


def vacuum_state(n: int) -> GaussianState:
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"number of modes must be a positive integer, got {n}")
    n = int(n)
    return GaussianState(np.zeros(2 * n), VACUUM_VARIANCE * np.eye(2 * n))


def tensor_product(*states: GaussianState) -> GaussianState:
    """Product state with the modes of ``states`` concatenated in order."""
    mean = np.concatenate([s.mean for s in states])
    cov = np.zeros((mean.size, mean.size))
    start = 0
    for s in states:
        k = s.mean.size
        cov[start : start + k, start : start + k] = s.cov
        start += k
    return GaussianState(mean, cov)


def identity_gate(n_modes: int) -> SymplecticGate:
    return SymplecticGate(np.eye(2 * n_modes), np.zeros(2 * n_modes))


def _single_mode_block(kind, params):
    """Return the 2x2 matrix and 2-vector of a single-mode gate."""
    zero = np.zeros(2)
    if kind == "displace_q":
        (v,) = params
        return np.eye(2), np.array([v, 0.0])
    if kind == "displace_p":
        (u,) = params
        return np.eye(2), np.array([0.0, u])
    if kind == "displace":
        (alpha,) = params
        alpha = complex(alpha)
        return np.eye(2), np.sqrt(2.0) * np.array([alpha.real, alpha.imag])
    if kind == "squeeze":
        (r,) = params
        return np.diag([np.exp(-r), np.exp(r)]), zero
    if kind == "phase":
        (eta,) = params
        return np.array([[1.0, 0.0], [eta, 1.0]]), zero
    if kind == "rotate":
        (theta,) = params
        c, s = np.cos(theta), np.sin(theta)
        return np.array([[c, -s], [s, c]]), zero
    raise AssertionError(kind)


def _two_mode_block(kind, params):
    """Return the 4x4 matrix on (q1, p1, q2, p2)."""
    if kind == "bs":
        (theta,) = params
        t, r = np.cos(theta / 2), np.sin(theta / 2)
        return np.array(
            [
                [t, 0, r, 0],
                [0, t, 0, r],
                [-r, 0, t, 0],
                [0, -r, 0, t],
            ],
            dtype=float,
        )
    if kind == "cz":
        return np.array(
            [
                [1, 0, 0, 0],
                [0, 1, 1, 0],
                [0, 0, 1, 0],
                [1, 0, 0, 1],
            ],
            dtype=float,
        )
    if kind == "cx":
        return np.array(
            [
                [1, 0, 0, 0],
                [0, 1, 0, -1],
                [1, 0, 1, 0],
                [0, 0, 0, 1],
            ],
            dtype=float,
        )
    raise AssertionError(kind)


def make_gate(kind: str, params=(), targets=0, n_modes: int | None = None) -> SymplecticGate:
    """Build the affine map of a named Gaussian gate.

    Parameters
    ----------
    kind : str
        One of ``displace_q(v)``, ``displace_p(u)``, ``displace(alpha)``,
        ``squeeze(r)``, ``phase(eta)``, ``rotate(theta)``, ``bs(theta)``,
        ``cz`` or ``cx``. Two-mode gates use unit interaction strength; the
        beam splitter has transmissivity ``cos^2(theta / 2)``.
    params : float or sequence
        Gate parameters in the order listed above.
    targets : int or sequence of int
        Mode indices. For ``cx`` the first target is the control.
    n_modes : int, optional
        Size of the register. Defaults to ``max(targets) + 1``.

    Returns
    -------
    SymplecticGate
    """
    params = () if params is None else tuple(np.atleast_1d(params))
    targets = [int(t) for t in np.atleast_1d(targets)]
    if n_modes is None:
        n_modes = max(targets) + 1
    targets = _check_modes(targets, n_modes)

    S = np.eye(2 * n_modes)
    d = np.zeros(2 * n_modes)
    if kind in SINGLE_MODE_GATES:
        if len(targets) != 1:
            raise InvalidParameterError(f"{kind} acts on one mode, got targets {targets}")
        if len(params) != 1:
            raise InvalidParameterError(f"{kind} takes one parameter, got {params}")
        block, shift = _single_mode_block(kind, params)
        idx = _quadrature_indices(targets)
    elif kind in TWO_MODE_GATES:
        if len(targets) != 2:
            raise InvalidParameterError(f"{kind} acts on two modes, got targets {targets}")
        expected = 1 if kind == "bs" else 0
        if len(params) != expected:
            raise InvalidParameterError(f"{kind} takes {expected} parameter(s), got {params}")
        block = _two_mode_block(kind, params)
        shift = np.zeros(4)
        idx = _quadrature_indices(targets)
    else:
        raise InvalidParameterError(f"unknown gate kind {kind!r}")

    S[np.ix_(idx, idx)] = block
    d[idx] = shift
    return SymplecticGate(S, d)


def compose(g2: SymplecticGate, g1: SymplecticGate) -> SymplecticGate:
    """The gate that applies ``g1`` first and then ``g2``."""
    if g1.n_modes != g2.n_modes:
        raise InvalidParameterError("cannot compose gates on different numbers of modes")
    return SymplecticGate(g2.S @ g1.S, g2.S @ g1.d + g2.d)


def apply_gate(state: GaussianState, g: SymplecticGate) -> GaussianState:
    if g.n_modes != state.n_modes:
        raise InvalidParameterError(
            f"gate acts on {g.n_modes} modes but state has {state.n_modes}"
        )
    cov = g.S @ state.cov @ g.S.T
    return GaussianState(g.S @ state.mean + g.d, 0.5 * (cov + cov.T))


def homodyne(state: GaussianState, mode: int, phi: float = 0.0, rng=None, outcome=None) -> HomodyneOutcome:
    """Measure ``x_phi = q cos(phi) + p sin(phi)`` on one mode.

    The outcome is drawn from the Gaussian marginal unless ``outcome`` is
    given, in which case the state is conditioned on that value. The
    measured mode is removed from the returned state.
    """
    (mode,) = _check_modes(mode, state.n_modes)
    # equivalent to rotating the mode by -phi and conditioning on q
    idx = [2 * mode, 2 * mode + 1]
    c = np.array([np.cos(phi), np.sin(phi)])
    mu = float(c @ state.mean[idx])
    var = float(c @ state.cov[np.ix_(idx, idx)] @ c)
    if not var > 0:
        raise NumericalError(f"non-positive marginal variance {var} on mode {mode}")
    if outcome is None:
        rng = np.random.default_rng(rng)
        outcome = rng.normal(mu, np.sqrt(var))
    outcome = float(outcome)

    keep = np.array([k for k in range(state.mean.size) if k // 2 != mode], dtype=int)
    if keep.size == 0:
        return HomodyneOutcome(outcome, None)
    cross = state.cov[np.ix_(keep, idx)] @ c
    gain = cross / var
    mean = state.mean[keep] + gain * (outcome - mu)
    cov = state.cov[np.ix_(keep, keep)] - np.outer(gain, cross)
    return HomodyneOutcome(outcome, GaussianState(mean, 0.5 * (cov + cov.T)))


def _target_indices(state, modes):
    if modes is None:
        return np.arange(state.mean.size)
    return _quadrature_indices(_check_modes(modes, state.n_modes))


def agn_channel(target, xi2: float, modes=None, rng=None):
    """Additive Gaussian noise of variance ``xi2`` per quadrature.

    ``target`` may be a :class:`GaussianState`, a scalar variance, a
    ``(var_q, var_p)`` pair, or any dataclass with ``var_q``/``var_p``
    fields. For a state, passing ``rng`` samples one random displacement
    (a single trajectory) instead of applying the ensemble map to the
    covariance.
    """
    if xi2 < 0:
        raise InvalidParameterError(f"noise variance must be non-negative, got {xi2}")
    if isinstance(target, GaussianState):
        idx = _target_indices(target, modes)
        if rng is not None:
            mean = target.mean.copy()
            mean[idx] += agn_shifts(rng, xi2, idx.size)
            return GaussianState(mean, target.cov)
        cov = target.cov.copy()
        cov[idx, idx] += xi2
        return GaussianState(target.mean, cov)
    if dataclasses.is_dataclass(target) and hasattr(target, "var_q"):
        return dataclasses.replace(target, var_q=target.var_q + xi2, var_p=target.var_p + xi2)
    if isinstance(target, tuple):
        return tuple(v + xi2 for v in target)
    return target + xi2


def agn_shifts(rng, xi2: float, size) -> np.ndarray:
    """Sample displacement errors of an additive Gaussian noise channel."""
    if xi2 < 0:
        raise InvalidParameterError(f"noise variance must be non-negative, got {xi2}")
    return np.random.default_rng(rng).normal(0.0, np.sqrt(xi2), size)


def _check_efficiency(eta):
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"efficiency must lie in [0, 1], got {eta}")


def loss_channel(target, eta: float, modes=None):
    """Pure-loss channel: beam-splitter coupling to a vacuum environment.

    Accepts a :class:`GaussianState` or a scalar peak variance.
    """
    _check_efficiency(eta)
    if not isinstance(target, GaussianState):
        return eta * target + (1.0 - eta) * VACUUM_VARIANCE
    idx = _target_indices(target, modes)
    scale = np.ones(target.mean.size)
    scale[idx] = np.sqrt(eta)
    cov = target.cov * np.outer(scale, scale)
    cov[idx, idx] += (1.0 - eta) * VACUUM_VARIANCE
    return GaussianState(scale * target.mean, cov)


def amplifier_channel(state: GaussianState, gain: float, modes=None) -> GaussianState:
    """Phase-insensitive amplifier with power gain ``gain >= 1``."""
    if gain < 1.0:
        raise InvalidParameterError(f"amplifier gain must be >= 1, got {gain}")
    idx = _target_indices(state, modes)
    scale = np.ones(state.mean.size)
    scale[idx] = np.sqrt(gain)
    cov = state.cov * np.outer(scale, scale)
    cov[idx, idx] += (gain - 1.0) * VACUUM_VARIANCE
    return GaussianState(scale * state.mean, cov)


AMPLIFICATION_MODES = ("pre", "post", "rescale")


def amplify(var: float, eta: float, mode: str = "pre") -> float:
    """Peak variance after loss ``eta`` converted to additive noise.

    ``pre``/``post`` place a phase-insensitive amplifier of gain ``1/eta``
    before/after the loss; ``rescale`` divides the homodyne outcome by
    ``sqrt(eta)`` after the loss.
    """
    if not 0.0 < eta <= 1.0:
        raise InvalidParameterError(f"efficiency must lie in (0, 1], got {eta}")
    if mode == "pre":
        return var + (1.0 - eta)
    if mode == "post":
        return var + (1.0 - eta) / eta
    if mode == "rescale":
        return var + (1.0 - eta) / (2.0 * eta)
    raise InvalidParameterError(f"unknown amplification mode {mode!r}")


def physicality_check(state: GaussianState) -> PhysicalityReport:
    """Test ``cov + (i/2) Omega >= 0`` and symmetry of the covariance."""
    cov = np.asarray(state.cov)
    asym = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
    if not cov.size:
        return PhysicalityReport(True, 0.0, 0.0)
    herm = cov + 0.5j * symplectic_form(state.n_modes)
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (herm + herm.conj().T))))
    ok = asym <= SYMMETRY_TOL and min_eig >= PHYSICALITY_FLOOR
    return PhysicalityReport(ok, min_eig, asym)


def dumps_state(state: GaussianState) -> str:
    """Serialize to the plain-text matrix format.

    Layout: a ``n_modes=<n>`` header, a ``mean`` line followed by one row of
    ``2n`` numbers, then ``cov`` followed by ``2n`` rows (row-major).
    """
    fmt = lambda row: " ".join(f"{x:.17g}" for x in row)  # noqa: E731
    lines = [f"n_modes={state.n_modes}", "mean", fmt(state.mean), "cov"]
    lines += [fmt(row) for row in state.cov]
    return "\n".join(lines) + "\n"


def loads_state(text: str) -> GaussianState:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        key, value = lines[0].split("=")
        if key.strip() != "n_modes" or lines[1] != "mean" or lines[3] != "cov":
            raise ValueError("bad section headers")
        n = int(value)
        mean = np.array(lines[2].split(), dtype=float)
        cov = np.array([row.split() for row in lines[4 : 4 + 2 * n]], dtype=float)
    except (ValueError, IndexError) as exc:
        raise InvalidStateError(f"malformed state text: {exc}") from exc
    if mean.size != 2 * n or len(lines) != 4 + 2 * n:
        raise InvalidStateError("state text does not match its n_modes header")
    return GaussianState(mean, cov)
