"""Threshold, capacity and decoding benchmarks.

Monte Carlo work is split into fixed-size blocks of trials. Block ``b`` draws
from a Philox stream keyed by the seed and jumped ``b`` times, so results do
not depend on how many workers run the blocks or in which order they finish.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp
from scipy.stats import binomtest

from cvgkp.exceptions import InvalidParameterError, NumericalError
from cvgkp.gkp import SQRT_PI, analog_log_likelihoods, bin_outcomes, p_fail

BLOCK_SIZE = 1 << 16
SOLVER_RTOL = 1e-9
CONFIDENCE = 0.95


# ---------------------------------------------------------------- threshold


def p_err_cz(var_in):
    """Logical error of a CZ with four GKP corrections.

    Two corrections see ``7 var_in`` and two see ``5 var_in``; the gate fails
    if any of them does.
    """
    var_in = np.asarray(var_in, dtype=float)
    if np.any(~(var_in > 0)):
        raise InvalidParameterError("input variance must be positive")
    ok = (1 - p_fail(7 * var_in)) ** 2 * (1 - p_fail(5 * var_in)) ** 2
    out = np.asarray(1 - ok)
    return float(out) if out.ndim == 0 else out


def var_to_db(var: float) -> float:
    return float(-10 * np.log10(2 * var))


@dataclass(frozen=True)
class ThresholdResult:
    sigma2_star: float
    squeezing_db: float
    p_ft_used: float


def solve_threshold(p_ft: float) -> ThresholdResult:
    """Largest input variance whose CZ error stays at ``p_ft``."""
    if not 0 < p_ft < 1:
        raise InvalidParameterError(f"p_ft must lie in (0, 1), got {p_ft}")
    lo, hi = -60.0, 0.0
    # p_err_cz saturates near 1, so widen the bracket for very loose targets
    while p_err_cz(np.exp(hi)) < p_ft:
        hi += 2.0
        if hi > 40:
            raise NumericalError(f"cannot bracket the threshold for p_ft={p_ft}")
    if p_err_cz(np.exp(lo)) > p_ft:
        raise NumericalError(f"p_ft={p_ft} lies below the smallest representable error")
    # bisect in log variance: an absolute tolerance there is a relative one on var
    log_var = bisect(lambda x: p_err_cz(np.exp(x)) - p_ft, lo, hi, xtol=SOLVER_RTOL, rtol=4 * np.finfo(float).eps)
    var = float(np.exp(log_var))
    return ThresholdResult(var, var_to_db(var), float(p_ft))


# ----------------------------------------------------------------- capacity


def binary_entropy(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    h = np.where((p == 0) | (p == 1), 0.0, h)
    return float(h) if h.ndim == 0 else h


def capacity_rate(sigma):
    """Rate ``1 - 2 H2(p_fail(sigma^2))`` for independent q and p noise."""
    return 1 - 2 * binary_entropy(p_fail(np.square(sigma)))


def entropy_half_root() -> float:
    """Flip probability at which the two entropy terms use up the qubit."""
    return float(bisect(lambda p: binary_entropy(p) - 0.5, 1e-6, 0.5, xtol=1e-14))


def capacity_point() -> float:
    """Noise standard deviation at which :func:`capacity_rate` reaches zero."""
    return float(bisect(lambda s: capacity_rate(s), 0.1, 2.0, xtol=1e-12))


# ------------------------------------------------------------------ RNG plumbing


def block_generator(seed: int, block: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed).jumped(block))


def block_sizes(trials: int, block_size: int = BLOCK_SIZE) -> list[int]:
    if trials < 1:
        raise InvalidParameterError(f"trials must be at least 1, got {trials}")
    full, rest = divmod(trials, block_size)
    return [block_size] * full + ([rest] if rest else [])


def map_blocks(fn, trials: int, seed: int, workers: int = 1, block_size: int = BLOCK_SIZE) -> list:
    """Call ``fn(rng, size)`` on every block and return results in block order."""
    jobs = [(block_generator(seed, b), n) for b, n in enumerate(block_sizes(trials, block_size))]
    if workers <= 1 or len(jobs) == 1:
        return [fn(rng, n) for rng, n in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def wilson_interval(k: int, n: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


# ------------------------------------------------------------ analog decoding


def majority_decode(bits) -> np.ndarray:
    return (np.asarray(bits).sum(axis=-1) >= 2).astype(np.int64)


def analog_decode(bits, deviations, var: float, spacing: float = SQRT_PI) -> np.ndarray:
    """Most likely code word of a three-qubit repetition code from soft GKP readout.

    A code word fixes the flip pattern completely (all read bits that differ
    from it flipped), so the search over patterns reduces to comparing the
    two code words. Ties fall back to the majority vote.
    """
    bits = np.asarray(bits)
    ll0, ll1 = analog_log_likelihoods(deviations, var, spacing)
    flipped = bits == 1
    score0 = np.where(flipped, ll1, ll0).sum(axis=-1)
    score1 = np.where(flipped, ll0, ll1).sum(axis=-1)
    out = (score1 > score0).astype(np.int64)
    tie = score1 == score0
    return np.where(tie, majority_decode(bits), out)


def ml_decode_exhaustive(raw, var: float, spacing: float = SQRT_PI, reach: int = 12) -> np.ndarray:
    """Maximum-likelihood code word with every lattice point kept in the posterior.

    Reference for audits: each mode's likelihood for a logical value sums the
    Gaussian over all lattice points of that parity within ``reach`` spacings
    of the outcome, with no binning.
    """
    raw = np.asarray(raw, dtype=float)
    centre = np.rint(raw / spacing)
    k = centre[..., None] + np.arange(-reach, reach + 1)
    logf = -np.square(raw[..., None] - k * spacing) / (2 * var)
    parity = np.mod(k, 2).astype(bool)
    lp0 = logsumexp(np.where(parity, -np.inf, logf), axis=-1).sum(axis=-1)
    lp1 = logsumexp(np.where(parity, logf, -np.inf), axis=-1).sum(axis=-1)
    return (lp1 > lp0).astype(np.int64)


@dataclass(frozen=True)
class DecodingComparison:
    """Logical error counts of both decoders on the same trials."""

    sigma: float
    trials: int
    binary_errors: int
    analog_errors: int
    binary_only: int
    analog_only: int

    @property
    def p_logical_binary(self) -> float:
        return self.binary_errors / self.trials

    @property
    def p_logical_analog(self) -> float:
        return self.analog_errors / self.trials

    @property
    def binary_interval(self) -> tuple[float, float]:
        return wilson_interval(self.binary_errors, self.trials)

    @property
    def analog_interval(self) -> tuple[float, float]:
        return wilson_interval(self.analog_errors, self.trials)

    @property
    def joint_standard_error(self) -> float:
        """Standard error of the paired rate difference."""
        d = (self.binary_only - self.analog_only) / self.trials
        disc = (self.binary_only + self.analog_only) / self.trials
        return float(np.sqrt(max(disc - d * d, 0.0) / self.trials))

    @property
    def z_score(self) -> float:
        """Paired (McNemar) z statistic for binary errors exceeding analog ones."""
        disc = self.binary_only + self.analog_only
        if disc == 0:
            return 0.0
        return float((self.binary_only - self.analog_only) / np.sqrt(disc))

    def __iter__(self):
        yield self.p_logical_binary
        yield self.p_logical_analog


def _sample_codeword_zero(rng, n, sigma):
    raw = rng.normal(0.0, sigma, (n, 3))
    return raw, bin_outcomes(raw)


def analog_vs_binary_mc(sigma: float, trials: int, seed: int, workers: int = 1) -> DecodingComparison:
    """Logical error rates of majority-vote and analog decoding on shared samples.

    Logical zero is sent; by symmetry of the noise this is enough.
    """
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    var = sigma * sigma

    def block(rng, n):
        _, b = _sample_codeword_zero(rng, n, sigma)
        wrong_b = majority_decode(b.bit) != 0
        wrong_a = analog_decode(b.bit, b.deviation, var) != 0
        return (
            int(wrong_b.sum()),
            int(wrong_a.sum()),
            int((wrong_b & ~wrong_a).sum()),
            int((wrong_a & ~wrong_b).sum()),
        )

    counts = np.array(map_blocks(block, trials, seed, workers), dtype=np.int64).sum(axis=0)
    return DecodingComparison(float(sigma), int(trials), *(int(c) for c in counts))


def ml_decode_patterns(bits, deviations, var: float, spacing: float = SQRT_PI) -> np.ndarray:
    """Brute-force search over all eight flip patterns.

    Patterns that do not map the read bits onto a code word are skipped; the
    most likely surviving pattern names the decoded code word.
    """
    bits = np.asarray(bits)
    ll0, ll1 = analog_log_likelihoods(deviations, var, spacing)
    best = np.full(bits.shape[:-1], -np.inf)
    decoded = np.zeros(bits.shape[:-1], dtype=np.int64)
    for pattern in itertools.product((0, 1), repeat=3):
        e = np.array(pattern)
        word = bits ^ e
        consistent = np.all(word == word[..., :1], axis=-1)
        score = np.where(e == 1, ll1, ll0).sum(axis=-1)
        better = consistent & (score > best)
        best = np.where(better, score, best)
        decoded = np.where(better, word[..., 0], decoded)
    return decoded


AUDIT_ORACLES = ("patterns", "lattice")


def audit_analog_decoder(sigma: float, trials: int, seed: int, oracle: str = "patterns") -> int:
    """Number of trials where the analog decoder disagrees with a reference decoder.

    ``patterns`` is the eight-pattern brute-force search over the same
    per-mode likelihoods; ``lattice`` keeps every lattice point in the
    posterior and so also measures the cost of the nearest-peak likelihoods.
    """
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    if oracle not in AUDIT_ORACLES:
        raise InvalidParameterError(f"unknown audit oracle {oracle!r}")
    var = sigma * sigma

    def block(rng, n):
        raw, b = _sample_codeword_zero(rng, n, sigma)
        if oracle == "patterns":
            ref = ml_decode_patterns(b.bit, b.deviation, var)
        else:
            ref = ml_decode_exhaustive(raw, var)
        return int(np.sum(analog_decode(b.bit, b.deviation, var) != ref))

    return sum(map_blocks(block, trials, seed))
