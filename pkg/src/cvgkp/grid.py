"""Position-grid wavefunctions for non-Gaussian states.

One-mode states are sampled on ``x0 + dx * arange(n)``; two-mode states use
the same axis for both modes and are stored as an ``n x n`` matrix indexed
``[q1, q2]``. Amplitudes are normalised so that ``sum |psi|^2 dx^d = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from cvgkp.exceptions import GridResolutionError, InvalidParameterError, InvalidStateError
from cvgkp.gkp import SQRT_PI

DEFAULT_DX = 0.05
DEFAULT_EXTENT = 12.0
NORM_TOL = 1e-9
# spectral weight beyond this fraction of the Nyquist momentum counts as aliased
NYQUIST_FRACTION = 0.8
RESOLUTION_TOL = 1e-6
# amplitude at which lattice sums of Gaussian peaks stop
PEAK_TAIL = 1e-15


@dataclass(frozen=True, eq=False)
class GridWavefunction:
    x0: float
    dx: float
    amps: np.ndarray

    def __post_init__(self):
        if not self.dx > 0:
            raise InvalidParameterError(f"grid spacing must be positive, got {self.dx}")
        a = np.array(self.amps, dtype=complex)
        if a.ndim not in (1, 2) or (a.ndim == 2 and a.shape[0] != a.shape[1]):
            raise InvalidStateError(f"amplitudes must be a vector or a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidStateError("amplitudes contain non-finite values")
        norm = np.sum(np.abs(a) ** 2) * self.dx**a.ndim
        if abs(norm - 1) > NORM_TOL:
            raise InvalidStateError(f"wavefunction norm is {norm}, expected 1")
        a.flags.writeable = False
        object.__setattr__(self, "amps", a)

    @classmethod
    def normalized(cls, x0: float, dx: float, amps) -> GridWavefunction:
        a = np.asarray(amps, dtype=complex)
        norm = np.sum(np.abs(a) ** 2) * dx**a.ndim
        if not norm > 0:
            raise InvalidStateError("cannot normalise a zero wavefunction")
        return cls(x0, dx, a / np.sqrt(norm))

    @classmethod
    def from_function(cls, f: Callable, extent: float = DEFAULT_EXTENT, dx: float = DEFAULT_DX) -> GridWavefunction:
        x0, n = grid_axis(extent, dx)
        return cls.normalized(x0, dx, f(x0 + dx * np.arange(n)))

    @property
    def n(self) -> int:
        return self.amps.shape[0]

    @property
    def n_modes(self) -> int:
        return self.amps.ndim

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    def same_grid(self, other: GridWavefunction) -> bool:
        return self.amps.shape == other.amps.shape and np.isclose(self.x0, other.x0) and np.isclose(self.dx, other.dx)

    def with_amps(self, amps, normalize: bool = False) -> GridWavefunction:
        if normalize:
            return GridWavefunction.normalized(self.x0, self.dx, amps)
        return GridWavefunction(self.x0, self.dx, amps)

    def probability(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def overlap(self, other: GridWavefunction) -> complex:
        if not self.same_grid(other):
            raise InvalidParameterError("wavefunctions live on different grids")
        return complex(np.vdot(self.amps, other.amps) * self.dx**self.n_modes)

    def fidelity(self, other: GridWavefunction) -> float:
        return abs(self.overlap(other)) ** 2

    def _single(self):
        if self.n_modes != 1:
            raise InvalidParameterError("operation needs a single-mode wavefunction")

    def momentum_distribution(self) -> tuple[np.ndarray, np.ndarray]:
        """Momentum axis (ascending) and normalised probability density on it."""
        self._single()
        p = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(self.n, self.dx))
        phi = np.fft.fftshift(np.fft.fft(self.amps))
        prob = np.abs(phi) ** 2
        dp = 2 * np.pi / (self.n * self.dx)
        return p, prob / (prob.sum() * dp)

    def moments(self) -> tuple[float, float, float, float]:
        """``(<q>, <p>, var q, var p)``."""
        self._single()
        x, rho = self.x, self.probability() * self.dx
        mq = float(np.sum(x * rho))
        vq = float(np.sum((x - mq) ** 2 * rho))
        p, prob = self.momentum_distribution()
        w = prob * (p[1] - p[0])
        mp = float(np.sum(p * w))
        vp = float(np.sum((p - mp) ** 2 * w))
        return mq, mp, vq, vp

    def position_phase(self, phase: Callable) -> GridWavefunction:
        """Multiply by ``exp(i phase(q))``, a unitary diagonal in position."""
        self._single()
        return self.with_amps(self.amps * np.exp(1j * phase(self.x)))


def grid_axis(extent: float = DEFAULT_EXTENT, dx: float = DEFAULT_DX) -> tuple[float, int]:
    """Origin and size of a symmetric grid ``[-extent, extent]`` containing 0."""
    if not (extent > 0 and dx > 0):
        raise InvalidParameterError("extent and dx must be positive")
    half = int(np.ceil(extent / dx - 1e-9))
    return -half * dx, 2 * half + 1


def dumps_wavefunction(wf: GridWavefunction) -> str:
    lines = [f"x0={wf.x0:.17g} dx={wf.dx:.17g} n={wf.n} modes={wf.n_modes}"]
    lines += [f"{z.real:.17g} {z.imag:.17g}" for z in wf.amps.ravel()]
    return "\n".join(lines) + "\n"


def loads_wavefunction(text: str) -> GridWavefunction:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise InvalidStateError("empty wavefunction text")
    try:
        header = dict(tok.split("=", 1) for tok in lines[0].split())
        x0, dx, n = float(header["x0"]), float(header["dx"]), int(header["n"])
        modes = int(header.get("modes", 1))
        values = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    except (KeyError, ValueError) as exc:
        raise InvalidStateError(f"malformed wavefunction text: {exc}") from None
    if modes not in (1, 2) or values.shape != (n**modes, 2):
        raise InvalidStateError(f"expected {n**modes} amplitude lines of two numbers")
    amps = (values[:, 0] + 1j * values[:, 1]).reshape((n,) * modes)
    return GridWavefunction(x0, dx, amps)


def check_resolution(wf: GridWavefunction, tol: float = RESOLUTION_TOL) -> None:
    """Raise GridResolutionError when the grid is too coarse or too narrow.

    Too coarse means more than ``tol`` of the momentum weight sits close to
    the Nyquist limit ``pi/dx``; too narrow means more than ``tol`` of the
    position weight sits in the outer 2% of the grid.
    """
    p, prob = wf.momentum_distribution()
    dp = p[1] - p[0]
    p_max = np.pi / wf.dx
    high = float(np.sum(prob[np.abs(p) > NYQUIST_FRACTION * p_max]) * dp)
    if high > tol:
        raise GridResolutionError(
            f"{high:.2e} of the momentum weight lies beyond {NYQUIST_FRACTION:.0%} of the Nyquist limit; reduce dx"
        )
    edge = max(1, int(0.02 * wf.n))
    rho = wf.probability() * wf.dx
    outer = float(rho[:edge].sum() + rho[-edge:].sum())
    if outer > tol:
        raise GridResolutionError(f"{outer:.2e} of the position weight lies at the grid edge; widen the grid")


def gaussian_amplitudes(x, var_q: float, mean_q: float = 0.0, mean_p: float = 0.0) -> np.ndarray:
    """Pure Gaussian with position variance ``var_q`` (normalised on the real line)."""
    return (2 * np.pi * var_q) ** -0.25 * np.exp(-((x - mean_q) ** 2) / (4 * var_q) + 1j * mean_p * x)


def gaussian_wavefunction(
    var_q: float = 0.5,
    mean_q: float = 0.0,
    mean_p: float = 0.0,
    extent: float = DEFAULT_EXTENT,
    dx: float = DEFAULT_DX,
) -> GridWavefunction:
    return GridWavefunction.from_function(lambda x: gaussian_amplitudes(x, var_q, mean_q, mean_p), extent, dx)


def db_to_var(db: float) -> float:
    """Variance of the squeezed quadrature at a squeezing level in dB."""
    return 0.5 * 10 ** (-db / 10)


def apply_cubic_phase(wf: GridWavefunction, gamma: float) -> GridWavefunction:
    """``exp(i gamma q^3 / 3)``, mapping ``p -> p + gamma q^2``."""
    return wf.position_phase(lambda x: gamma * x**3 / 3)


def apply_shear(wf: GridWavefunction, eta: float) -> GridWavefunction:
    """Phase gate ``exp(i eta q^2 / 2)``, mapping ``p -> p + eta q``."""
    return wf.position_phase(lambda x: eta * x**2 / 2)


def apply_momentum_kick(wf: GridWavefunction, s: float) -> GridWavefunction:
    """``Z(s) = exp(i s q)``, mapping ``p -> p + s``."""
    return wf.position_phase(lambda x: s * x)


@dataclass(frozen=True)
class CubicTeleportResult:
    """Outcome of the teleported cubic phase gate.

    ``fidelity`` belongs to the selected homodyne ``outcome``;
    ``mean_fidelity`` averages over all outcomes with their probabilities.
    """

    output: GridWavefunction
    outcome: float
    fidelity: float
    mean_fidelity: float
    outcomes: np.ndarray = field(repr=False)
    outcome_density: np.ndarray = field(repr=False)


def cubic_phase_teleport(
    input_state: GridWavefunction,
    gamma: float,
    resource_db: float,
    outcome: float | None = None,
    rng=None,
    check: bool = True,
) -> CubicTeleportResult:
    """Apply ``exp(i gamma q^3 / 3)`` by gate teleportation.

    The resource is the cubic phase gate applied to a vacuum squeezed in p by
    ``resource_db``. The input couples to it through ``exp(+i q1 p2)``, which
    shifts the resource coordinate by the input position, and the resource
    mode is measured in q. For outcome ``m`` the input mode then carries
    ``exp(i gamma (q+m)^3 / 3)``, and the corrections ``P(-2 m gamma)`` and
    ``Z(-m^2 gamma)`` leave the target gate times a broad envelope.

    The outcome is ``outcome`` snapped to the grid when given, otherwise it
    is drawn from the exact marginal by inverse-CDF sampling.
    """
    if input_state.n_modes != 1:
        raise InvalidParameterError("cubic_phase_teleport takes a single-mode input")
    dx, x = input_state.dx, input_state.x
    target = apply_cubic_phase(input_state, gamma)
    if check:
        check_resolution(input_state)
        check_resolution(target)
    offset = input_state.x0 / dx
    if abs(offset - round(offset)) > 1e-6:
        raise InvalidParameterError("input grid origin must be a whole number of grid steps from 0")
    shifts = np.rint(x / dx).astype(int)

    var_res = 0.5 * 10 ** (resource_db / 10)
    half = int(np.ceil((6 * np.sqrt(var_res) + np.abs(x).max()) / dx))
    y = dx * np.arange(-half, half + 1)
    resource = gaussian_amplitudes(y, var_res) * np.exp(1j * gamma * y**3 / 3)

    # joint[i, j] = psi(x_i) R(y_j + x_i); y_j + x_i is grid point j + shifts[i]
    idx = np.arange(y.size)[None, :] + shifts[:, None]
    valid = (idx >= 0) & (idx < y.size)
    joint = input_state.amps[:, None] * np.where(valid, resource[np.clip(idx, 0, y.size - 1)], 0)

    density = np.sum(np.abs(joint) ** 2, axis=0) * dx
    total = density.sum() * dx
    corrected = joint * np.exp(-1j * gamma * (np.outer(x**2, y) + np.outer(x, y**2)))
    norms = np.sum(np.abs(corrected) ** 2, axis=0) * dx
    ov = np.abs(target.amps.conj() @ corrected * dx) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        fid = np.where(norms > 0, ov / norms, 0.0)
    mean_fid = float(np.sum(fid * density) * dx / total)

    if outcome is None:
        cdf = np.cumsum(density) / density.sum()
        j = int(np.searchsorted(cdf, np.random.default_rng(rng).random()))
        j = min(j, y.size - 1)
    else:
        j = int(np.argmin(np.abs(y - outcome)))
    output = GridWavefunction.normalized(input_state.x0, dx, corrected[:, j])
    return CubicTeleportResult(output, float(y[j]), float(fid[j]), mean_fid, y, density / total)


def gkp_amplitudes(x, delta2: float, kappa2: float, logical: int = 0) -> np.ndarray:
    """Unnormalised approximate GKP code word: Gaussian peaks under a Gaussian envelope.

    Peaks sit at ``(2m + logical) sqrt(pi)`` with amplitude variance ``delta2``;
    the envelope has amplitude variance ``1/kappa2``.
    """
    if logical not in (0, 1):
        raise InvalidParameterError(f"logical must be 0 or 1, got {logical}")
    if not (delta2 > 0 and kappa2 > 0):
        raise InvalidParameterError("delta2 and kappa2 must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    # envelope weight exp(-kappa2 c^2 / 2) falls below PEAK_TAIL past c_max
    c_max = np.sqrt(-2 * np.log(PEAK_TAIL) / kappa2)
    m_max = int(np.ceil(c_max / (2 * SQRT_PI))) + 1
    for m in range(-m_max, m_max + 1):
        c = (2 * m + logical) * SQRT_PI
        out += np.exp(-kappa2 * c * c / 2) * np.exp(-((x - c) ** 2) / (2 * delta2))
    return out


def gkp_wavefunction(
    delta2: float, kappa2: float, logical: int = 0, extent: float = DEFAULT_EXTENT, dx: float = DEFAULT_DX
) -> GridWavefunction:
    return GridWavefunction.from_function(lambda x: gkp_amplitudes(x, delta2, kappa2, logical), extent, dx)


def gkp_fidelity(state: GridWavefunction, delta2: float, kappa2: float, logical: int = 0) -> float:
    ref = GridWavefunction.normalized(state.x0, state.dx, gkp_amplitudes(state.x, delta2, kappa2, logical))
    return ref.fidelity(state)


def gkp_overlap(state: GridWavefunction, sigma2_gkp: float, logical: int = 0) -> float:
    """Fidelity with the approximate GKP word whose peaks have variance ``sigma2_gkp``.

    Uses ``kappa^2 = delta^2 = 2 sigma2_gkp``, so each peak's position
    distribution has variance ``sigma2_gkp``. The grid must reach ``5/kappa``.
    """
    if not sigma2_gkp > 0:
        raise InvalidParameterError(f"sigma2_gkp must be positive, got {sigma2_gkp}")
    state._single()
    k2 = 2 * sigma2_gkp
    reach = 5 / np.sqrt(k2)
    if state.x[0] > -reach or state.x[-1] < reach:
        raise GridResolutionError(f"grid must cover |q| <= {reach:.3g} for the GKP envelope")
    if np.sqrt(k2) < 2 * state.dx:
        raise GridResolutionError(f"dx = {state.dx} does not resolve GKP peaks of width {np.sqrt(k2):.3g}")
    return gkp_fidelity(state, k2, k2, logical)


def squeezed_cat(alpha: float, r: float, extent: float = DEFAULT_EXTENT, dx: float = DEFAULT_DX) -> GridWavefunction:
    """``S(r)(|alpha> + |-alpha>)`` for real ``alpha``: two peaks at ``+-sqrt(2) alpha e^-r``."""
    if not alpha > 0:
        raise InvalidParameterError(f"cat amplitude must be positive, got {alpha}")
    a = np.sqrt(2) * alpha * np.exp(-r)
    var = 0.5 * np.exp(-2 * r)
    return GridWavefunction.from_function(
        lambda x: gaussian_amplitudes(x, var, a) + gaussian_amplitudes(x, var, -a), extent, dx
    )


def fitted_gkp_fidelity(state: GridWavefunction, delta2: float) -> float:
    """GKP |0> fidelity with the envelope matched to the state's second moment.

    The approximate code word has ``<q^2> = 1/(2 kappa^2) + delta^2/2`` up to
    exponentially small terms, which fixes ``kappa^2``.
    """
    x, rho = state.x, state.probability() * state.dx
    q2 = float(np.sum(x * x * rho))
    spread = max(q2 - delta2 / 2, delta2)
    return gkp_fidelity(state, delta2, 1 / (2 * spread), 0)


def breed_step(state: GridWavefunction, epsilon: float, window_nodes: int = 8) -> tuple[GridWavefunction, float]:
    """One breeding round on a single-mode state.

    Two copies meet on a balanced beam splitter; mode 2 is measured in p and
    the round succeeds when the outcome lies in ``[-epsilon, epsilon]``. The
    returned state is the centre (p = 0) branch together with the success
    probability of the window.
    """
    if not epsilon > 0:
        raise InvalidParameterError(f"acceptance window must be positive, got {epsilon}")
    state._single()
    x, dx = state.x, state.dx
    spline = CubicSpline(x, state.amps, extrapolate=False)

    def f(z):
        return np.nan_to_num(spline(z))

    u, w = np.meshgrid(x, x, indexing="ij")
    # bs(pi/2): q1' = (q1 + q2)/sqrt2, q2' = (q2 - q1)/sqrt2
    joint = f((u - w) / np.sqrt(2)) * f((u + w) / np.sqrt(2))

    nodes, weights = np.polynomial.legendre.leggauss(window_nodes)
    ps = epsilon * nodes
    branches = joint @ np.exp(-1j * np.outer(x, ps)) * dx / np.sqrt(2 * np.pi)
    density = np.sum(np.abs(branches) ** 2, axis=0) * dx
    accept = float(epsilon * np.sum(weights * density))

    centre = joint.sum(axis=1) * dx / np.sqrt(2 * np.pi)
    return GridWavefunction.normalized(state.x0, dx, centre), accept


@dataclass(frozen=True)
class BreedingResult:
    """State after the last round, per-round success probabilities, and GKP
    fidelities of the input cat (index 0) and of each round's output."""

    state: GridWavefunction
    acceptance: list
    fidelity: list


def breeding_round(
    alpha: float,
    r: float,
    rounds: int,
    epsilon: float = 0.05,
    extent: float = DEFAULT_EXTENT,
    dx: float = DEFAULT_DX,
) -> BreedingResult:
    if rounds < 0:
        raise InvalidParameterError(f"rounds must be non-negative, got {rounds}")
    if not epsilon > 0:
        raise InvalidParameterError(f"acceptance window must be positive, got {epsilon}")
    state = squeezed_cat(alpha, r, extent, dx)
    delta2 = np.exp(-2 * r)
    acceptance, fidelity = [], [fitted_gkp_fidelity(state, delta2)]
    for _ in range(rounds):
        state, p = breed_step(state, epsilon)
        acceptance.append(p)
        fidelity.append(fitted_gkp_fidelity(state, delta2))
    return BreedingResult(state, acceptance, fidelity)


def count_peaks(state: GridWavefunction, threshold: float = 0.1) -> int:
    """Local maxima of ``|psi|^2`` above ``threshold`` times its maximum."""
    rho = state.probability()
    inner = rho[1:-1]
    is_peak = (inner > rho[:-2]) & (inner >= rho[2:]) & (inner > threshold * rho.max())
    return int(is_peak.sum())
