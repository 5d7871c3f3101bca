"""GKP qubits at the resolution of per-quadrature peak variances.

A GKP qubit is reduced to the variances of the Gaussian peaks of its code
words in q and p. Logical errors happen when a displacement carries a peak
past the midpoint to a neighbouring lattice point, so every statistic here is
a Gaussian integral over lattice bins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import erfc

from cvgkp.exceptions import InvalidParameterError
from cvgkp.gaussian import make_gate

SQRT_PI = np.sqrt(np.pi)
QUNAUGHT_SPACING = np.sqrt(2 * np.pi)

# lattice sums stop once a bin contributes less than this
LATTICE_TAIL = 1e-18


@dataclass(frozen=True)
class GkpPeakModel:
    """Peak variances of a GKP state and the spacing of its lattice."""

    var_q: float
    var_p: float
    spacing: float = SQRT_PI

    def __post_init__(self):
        if not (self.var_q > 0 and self.var_p > 0):
            raise InvalidParameterError(f"peak variances must be positive, got {self.var_q}, {self.var_p}")
        if not self.spacing > 0:
            raise InvalidParameterError(f"lattice spacing must be positive, got {self.spacing}")

    @classmethod
    def symmetric(cls, var: float, spacing: float = SQRT_PI) -> GkpPeakModel:
        return cls(var, var, spacing)

    def variance(self, quadrature: str) -> float:
        if quadrature == "q":
            return self.var_q
        if quadrature == "p":
            return self.var_p
        raise InvalidParameterError(f"quadrature must be 'q' or 'p', got {quadrature!r}")


@dataclass(frozen=True)
class BinnedOutcome:
    """A homodyne outcome split into lattice index and residual deviation.

    ``raw == index * spacing + deviation`` holds exactly, with the deviation
    in ``(-spacing/2, spacing/2]`` and ``bit == index % 2``. Fields are
    arrays when produced by the vectorized samplers.
    """

    bit: int | np.ndarray
    deviation: float | np.ndarray
    raw: float | np.ndarray
    index: int | np.ndarray


class HrmStats(NamedTuple):
    p_accept: float
    p_error: float


def _check_variance(var):
    var = np.asarray(var, dtype=float)
    if np.any(~(var > 0)):
        raise InvalidParameterError("variance must be positive")
    return var


def p_fail(var):
    """Probability that a peak of variance ``var`` leaves its central bin.

    Counts only the correct bin as success, which is the usual nearest-bin
    approximation to the misidentification probability. See
    :func:`p_fail_lattice` for the parity-resolved value.
    """
    var = _check_variance(var)
    out = erfc(SQRT_PI / 2 / np.sqrt(2 * var))
    return float(out) if out.ndim == 0 else out


def _interval_mass(lo, hi, sigma):
    """P(lo <= X <= hi) for X ~ N(0, sigma^2), accurate in the tails."""
    z = np.sqrt(2) * sigma
    if lo >= 0:
        return 0.5 * (erfc(lo / z) - erfc(hi / z))
    if hi <= 0:
        return 0.5 * (erfc(-hi / z) - erfc(-lo / z))
    return 1.0 - 0.5 * (erfc(hi / z) + erfc(-lo / z))


def _bin_masses(var, half_width, spacing):
    """Masses of ``[k s - w, k s + w]`` for k = 0, 1, 2, ... (k and -k merged)."""
    sigma = np.sqrt(var)
    masses = [_interval_mass(-half_width, half_width, sigma)]
    k = 1
    while True:
        m = 2 * _interval_mass(k * spacing - half_width, k * spacing + half_width, sigma)
        if m < LATTICE_TAIL:
            break
        masses.append(m)
        k += 1
    return np.array(masses)


def p_fail_lattice(var: float, spacing: float = SQRT_PI) -> float:
    """Exact bit-flip probability: mass landing in any odd-parity bin."""
    (var,) = np.atleast_1d(_check_variance(var))
    masses = _bin_masses(var, spacing / 2, spacing)
    return float(masses[1::2].sum())


def hrm_stats(var: float, zeta: float, spacing: float = SQRT_PI) -> HrmStats:
    """Acceptance and post-selected error rates of a highly reliable measurement.

    An outcome is kept only when its deviation from the nearest lattice point
    is at most ``spacing/2 - zeta``; the returned error rate is conditioned
    on acceptance.
    """
    (var,) = np.atleast_1d(_check_variance(var))
    if not 0 <= zeta < spacing / 2:
        raise InvalidParameterError(f"zeta must lie in [0, {spacing / 2}), got {zeta}")
    masses = _bin_masses(var, spacing / 2 - zeta, spacing)
    p_accept = float(masses.sum())
    if zeta == 0:
        p_accept = 1.0
    p_err = float(masses[1::2].sum())
    return HrmStats(p_accept, p_err / p_accept)


def bin_outcomes(raw, spacing: float = SQRT_PI) -> BinnedOutcome:
    """Vectorized nearest-lattice-point decomposition of homodyne outcomes."""
    if not spacing > 0:
        raise InvalidParameterError(f"lattice spacing must be positive, got {spacing}")
    raw = np.asarray(raw, dtype=float)
    index = np.ceil(raw / spacing - 0.5)
    # repair rounding right at the bin edges
    dev = raw - index * spacing
    index = index + (dev > spacing / 2) - (dev <= -spacing / 2)
    dev = raw - index * spacing
    index = index.astype(np.int64)
    return BinnedOutcome(index % 2, dev, raw, index)


def bin_outcome(raw: float, spacing: float = SQRT_PI) -> BinnedOutcome:
    b = bin_outcomes(float(raw), spacing)
    return BinnedOutcome(int(b.bit), float(b.deviation), float(raw), int(b.index))


def sample_gkp_measurement(model: GkpPeakModel, true_bit: int, rng, size=None, quadrature: str = "q") -> BinnedOutcome:
    """Homodyne readout of a GKP code word with Gaussian peak noise."""
    if true_bit not in (0, 1):
        raise InvalidParameterError(f"true_bit must be 0 or 1, got {true_bit}")
    rng = np.random.default_rng(rng)
    noise = rng.normal(0.0, np.sqrt(model.variance(quadrature)), size)
    raw = true_bit * model.spacing + noise
    if size is None:
        return bin_outcome(raw, model.spacing)
    return bin_outcomes(raw, model.spacing)


def _check_lattices(data, ancilla):
    if data.spacing != ancilla.spacing:
        raise InvalidParameterError(
            f"data and ancilla lattice spacings differ ({data.spacing} vs {ancilla.spacing})"
        )


def sqec_step(data: GkpPeakModel, ancilla: GkpPeakModel, quadrature: str = "q"):
    """One round of single-qubit-level error correction.

    Returns the data qubit's new peak model and the probability that the
    round introduced a logical flip. Correcting q replaces the data's q
    variance with the ancilla's and adds the ancilla's p variance to the
    data's p; correcting p is the mirror image.
    """
    _check_lattices(data, ancilla)
    if quadrature == "q":
        new = GkpPeakModel(ancilla.var_q, data.var_p + ancilla.var_p, data.spacing)
        return new, p_fail(data.var_q + ancilla.var_q)
    if quadrature == "p":
        new = GkpPeakModel(data.var_q + ancilla.var_q, ancilla.var_p, data.spacing)
        return new, p_fail(data.var_p + ancilla.var_p)
    raise InvalidParameterError(f"quadrature must be 'q' or 'p', got {quadrature!r}")


@dataclass(frozen=True)
class SqecTrajectories:
    """Residual data-qubit displacements after sampled SQEC rounds."""

    dev_q: np.ndarray
    dev_p: np.ndarray
    flips: np.ndarray

    @property
    def trials(self) -> int:
        return self.flips.size

    @property
    def flip_rate(self) -> float:
        return float(self.flips.mean())


def sqec_trajectories(data: GkpPeakModel, ancilla: GkpPeakModel, quadrature: str, trials: int, rng) -> SqecTrajectories:
    """Monte Carlo version of :func:`sqec_step`.

    Samples displacement errors of data and ancilla, propagates them through
    the CX coupling, measures the ancilla, bins the outcome and displaces the
    data by the measured deviation. The correction is off by the syndrome's
    lattice multiple, so a flip is recorded when that multiple is odd; the
    returned deviations are the data's residual displacements modulo it.
    """
    _check_lattices(data, ancilla)
    rng = np.random.default_rng(rng)
    s = data.spacing
    sd = np.sqrt([data.var_q, data.var_p, ancilla.var_q, ancilla.var_p])
    errs = rng.normal(0.0, 1.0, (trials, 4)) * sd  # (qD, pD, qA, pA)

    if quadrature == "q":
        # data controls, ancilla is the target; ancilla q is read out
        cx = make_gate("cx", (), (0, 1)).S
        errs = errs @ cx.T
        syndrome = bin_outcomes(errs[:, 2], s)
        errs[:, 0] -= syndrome.deviation
        return SqecTrajectories(errs[:, 0] - syndrome.index * s, errs[:, 1], syndrome.bit == 1)
    if quadrature == "p":
        # ancilla controls, data is the target; ancilla p is read out
        cx = make_gate("cx", (), (1, 0)).S
        errs = errs @ cx.T
        syndrome = bin_outcomes(errs[:, 3], s)
        errs[:, 1] += syndrome.deviation
        return SqecTrajectories(errs[:, 0], errs[:, 1] + syndrome.index * s, syndrome.bit == 1)
    raise InvalidParameterError(f"quadrature must be 'q' or 'p', got {quadrature!r}")


def gaussian_density(x, var):
    return np.exp(-np.square(x) / (2 * var)) / np.sqrt(2 * np.pi * var)


def analog_likelihoods(dm, var: float, spacing: float = SQRT_PI):
    """Likelihoods of the no-flip and flip hypotheses for a measured deviation.

    No flip means the true displacement equals ``dm``; a flip means its
    magnitude is ``spacing - |dm|``.
    """
    (var,) = np.atleast_1d(_check_variance(var))
    dm = np.asarray(dm, dtype=float)
    if np.any(np.abs(dm) > spacing / 2 * (1 + 1e-12)):
        raise InvalidParameterError("measured deviation lies outside the central bin")
    l_noflip = gaussian_density(dm, var)
    l_flip = gaussian_density(spacing - np.abs(dm), var)
    if dm.ndim == 0:
        return float(l_noflip), float(l_flip)
    return l_noflip, l_flip


def analog_log_likelihoods(dm, var: float, spacing: float = SQRT_PI):
    """Logarithms of :func:`analog_likelihoods`, finite where the densities underflow."""
    (var,) = np.atleast_1d(_check_variance(var))
    dm = np.asarray(dm, dtype=float)
    if np.any(np.abs(dm) > spacing / 2 * (1 + 1e-12)):
        raise InvalidParameterError("measured deviation lies outside the central bin")
    const = -0.5 * np.log(2 * np.pi * var)
    ll_noflip = const - np.square(dm) / (2 * var)
    ll_flip = const - np.square(spacing - np.abs(dm)) / (2 * var)
    return ll_noflip, ll_flip
