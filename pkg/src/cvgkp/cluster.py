"""Continuous-variable cluster states and one-way gates on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from cvgkp.exceptions import InvalidParameterError
from cvgkp.gaussian import (
    GaussianState,
    SymplecticGate,
    apply_gate,
    compose,
    homodyne,
    identity_gate,
    make_gate,
    tensor_product,
    vacuum_state,
)


@dataclass(frozen=True)
class ClusterGraph:
    """Undirected unit-weight graph on modes ``0..n-1``."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameterError(f"graph needs at least one vertex, got n={self.n}")
        normalized = set()
        for e in self.edges:
            i, j = (int(x) for x in e)
            if i == j:
                raise InvalidParameterError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidParameterError(f"edge ({i}, {j}) out of range for n={self.n}")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> ClusterGraph:
        return cls(n, frozenset(tuple(e) for e in edges))

    @classmethod
    def path(cls, n: int) -> ClusterGraph:
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def star(cls, n: int) -> ClusterGraph:
        return cls.from_edges(n, [(0, i) for i in range(1, n)])

    def neighbors(self, i: int) -> list[int]:
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def random_graph(n: int, p_edge: float, rng) -> ClusterGraph:
    """Erdos-Renyi graph, used for fuzzing the canonical construction."""
    rng = np.random.default_rng(rng)
    i, j = np.triu_indices(n, 1)
    keep = rng.random(i.size) < p_edge
    return ClusterGraph.from_edges(n, zip(i[keep], j[keep]))


def dumps_graph(graph: ClusterGraph) -> str:
    lines = [f"n={graph.n}"] + [f"{i} {j}" for i, j in graph.sorted_edges()]
    return "\n".join(lines) + "\n"


def loads_graph(text: str) -> ClusterGraph:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("n="):
        raise InvalidParameterError("graph text must start with an 'n=<count>' header")
    try:
        n = int(lines[0][2:])
        edges = []
        for ln in lines[1:]:
            a, b = ln.split()
            edges.append((int(a), int(b)))
    except ValueError as exc:
        raise InvalidParameterError(f"malformed graph text: {exc}") from None
    return ClusterGraph.from_edges(n, edges)


@dataclass(frozen=True, eq=False)
class Nullifier:
    """Linear combination ``c . x`` of interleaved quadratures (q1, p1, ...)."""

    coefficients: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 1 or c.size % 2 or not np.any(c):
            raise InvalidParameterError("nullifier coefficients must be a nonzero vector of even length")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @property
    def n_modes(self) -> int:
        return self.coefficients.size // 2


def nullifiers(graph: ClusterGraph) -> list[Nullifier]:
    """One nullifier ``p_i - sum_{j in N(i)} q_j`` per vertex."""
    out = []
    for i in range(graph.n):
        c = np.zeros(2 * graph.n)
        c[2 * i + 1] = 1.0
        nb = graph.neighbors(i)
        for j in nb:
            c[2 * j] = -1.0
        label = f"p{i}" + "".join(f"-q{j}" for j in nb)
        out.append(Nullifier(c, label))
    return out


def _coefficient_matrix(state: GaussianState, nulls: Sequence[Nullifier]) -> np.ndarray:
    C = np.array([n.coefficients for n in nulls], dtype=float).reshape(len(nulls), -1)
    if C.shape[1] != 2 * state.n_modes:
        raise InvalidParameterError(
            f"nullifiers act on {C.shape[1] // 2} modes but the state has {state.n_modes}"
        )
    return C


def nullifier_covariance(state: GaussianState, nulls: Sequence[Nullifier]) -> np.ndarray:
    """Covariance matrix ``C cov C^T`` of a set of nullifiers."""
    C = _coefficient_matrix(state, nulls)
    return C @ state.cov @ C.T


def nullifier_variances(state: GaussianState, nulls: Sequence[Nullifier]) -> np.ndarray:
    C = _coefficient_matrix(state, nulls)
    return np.einsum("ij,jk,ik->i", C, state.cov, C)


def squeezed_vacua(n: int, r: float, quadrature: str = "p") -> GaussianState:
    """Product of ``n`` vacua squeezed in ``quadrature`` to variance ``exp(-2r)/2``."""
    if r < 0:
        raise InvalidParameterError(f"squeezing must be non-negative, got {r}")
    sign = {"q": 1.0, "p": -1.0}[quadrature]
    single = apply_gate(vacuum_state(1), make_gate("squeeze", sign * r))
    return tensor_product(*[single] * n)


def canonical_cluster_gate(graph: ClusterGraph) -> SymplecticGate:
    g = identity_gate(graph.n)
    for i, j in graph.sorted_edges():
        g = compose(make_gate("cz", (), (i, j), graph.n), g)
    return g


def build_canonical_cluster(graph: ClusterGraph, r: float) -> GaussianState:
    """p-squeezed vacua on every vertex joined by a CZ on every edge."""
    return apply_gate(squeezed_vacua(graph.n, r, "p"), canonical_cluster_gate(graph))


# Time-multiplexed 1D chain. Modes are ordered A_0, B_0, A_1, B_1, ...; A is
# q-squeezed and B is p-squeezed. The first balanced beam splitter makes an
# EPR pair in every time bin, the B rail is delayed by one bin, and a second
# balanced beam splitter couples A_{k+1} with B_k.


def timemux_chain_gate(n_pairs: int) -> SymplecticGate:
    if n_pairs < 2:
        raise InvalidParameterError(f"the chain needs at least two time bins, got {n_pairs}")
    n = 2 * n_pairs
    g = identity_gate(n)
    for k in range(n_pairs):
        g = compose(make_gate("bs", np.pi / 2, (2 * k, 2 * k + 1), n), g)
    for k in range(n_pairs - 1):
        g = compose(make_gate("bs", np.pi / 2, (2 * k + 2, 2 * k + 1), n), g)
    return g


def timemux_1d_chain(n_pairs: int, r: float) -> GaussianState:
    if r < 0:
        raise InvalidParameterError(f"squeezing must be non-negative, got {r}")
    gate = timemux_chain_gate(n_pairs)
    sq_q = apply_gate(vacuum_state(1), make_gate("squeeze", r))
    sq_p = apply_gate(vacuum_state(1), make_gate("squeeze", -r))
    inputs = tensor_product(*[sq_q, sq_p] * n_pairs)
    return apply_gate(inputs, gate)


def timemux_chain_nullifiers(n_pairs: int) -> list[Nullifier]:
    """The squeezed input quadratures expressed in output quadratures.

    Row ``4k`` of the inverse circuit map gives q of A_k and row ``4k+3``
    gives p of B_k, so these combinations carry only the squeezed noise
    ``exp(-2r)/2`` whatever the entanglement in between.
    """
    s_inv = timemux_chain_gate(n_pairs).inverse().S
    out = []
    for k in range(n_pairs):
        out.append(Nullifier(s_inv[4 * k], f"qA{k}"))
        out.append(Nullifier(s_inv[4 * k + 3], f"pB{k}"))
    return out


def _shift(state: GaussianState, index: int, amount: float) -> GaussianState:
    mean = state.mean.copy()
    mean[index] += amount
    return GaussianState(mean, state.cov)


def oneway_target(bases: Sequence[float]) -> SymplecticGate:
    """Ideal single-mode map realised by :func:`oneway_gate`.

    Each measurement in ``p + m q`` implements ``F P(m)`` with ``F`` the
    Fourier rotation, so four steps of ``(1, 0, 0, 0)`` give ``F^4 P(1) = P(1)``.
    """
    g = identity_gate(1)
    f = make_gate("rotate", np.pi / 2)
    for m in bases:
        g = compose(f, compose(make_gate("phase", m), g))
    return g


def _prepare_oneway(input_state, bases, r):
    if input_state.n_modes != 1:
        raise InvalidParameterError("one-way gates take a single-mode input")
    bases = [float(m) for m in bases]
    if len(bases) not in (1, 4):
        raise InvalidParameterError(f"only 1- or 4-step gates are supported, got {len(bases)}")
    L = len(bases)
    state = tensor_product(input_state, squeezed_vacua(L, r, "p"))
    return bases, apply_gate(state, canonical_cluster_gate(ClusterGraph.path(L + 1)))


def _deferred_feedforward(n_modes: int, k: int, m: float) -> SymplecticGate:
    """Coherent version of measuring ``p_k + m q_k`` and correcting with the outcome.

    Shifts q of mode k+1 and p of mode k+2 by minus the measured quadrature.
    The generator is (p_k + m q_k)(q_{k+2} - p_{k+1}); it commutes with the
    measured quadrature, so tracing mode k out afterwards reproduces the
    outcome-averaged effect of measurement plus feedforward.
    """
    c = np.zeros(2 * n_modes)
    c[2 * k], c[2 * k + 1] = m, 1.0
    g = np.zeros(2 * n_modes)
    g[2 * k + 3] = -1.0
    if k + 2 < n_modes:
        g[2 * k + 4] = 1.0
    K = np.outer(c, g) + np.outer(g, c)
    Omega = np.kron(np.eye(n_modes), [[0.0, 1.0], [-1.0, 0.0]])
    # Omega K is nilpotent of order two, so the exponential truncates
    return SymplecticGate(np.eye(2 * n_modes) + Omega @ K, np.zeros(2 * n_modes))


def oneway_channel(input_state: GaussianState, bases: Sequence[float], r: float) -> GaussianState:
    """Outcome-averaged output of :func:`oneway_gate`.

    With feedforward the protocol is a deterministic Gaussian channel: the
    ideal map from :func:`oneway_target` plus noise from the finite squeezing
    of the cluster modes.
    """
    bases, state = _prepare_oneway(input_state, bases, r)
    n = state.n_modes
    for k, m in enumerate(bases):
        state = apply_gate(state, _deferred_feedforward(n, k, m))
    return state.reduced([n - 1])


def oneway_gate(input_state: GaussianState, bases: Sequence[float], r: float, rng=None) -> GaussianState:
    """Run a one-way gate on a linear cluster by homodyne measurement.

    The single-mode input is attached by CZ to a chain of ``len(bases)``
    p-squeezed modes. Mode ``k`` is measured in ``p + m_k q``; the outcome
    ``s`` is cancelled by ``X(-s)`` on the next mode and, because that mode is
    already CZ-coupled onward, by ``Z(-s)`` on the one after. The returned
    state is the last mode of the chain, conditioned on the sampled
    outcomes; see :func:`oneway_channel` for the ensemble average.
    """
    bases, state = _prepare_oneway(input_state, bases, r)
    rng = np.random.default_rng(rng)
    for m in bases:
        phi = np.arctan2(1.0, m)
        res = homodyne(state, 0, phi, rng)
        s = np.hypot(1.0, m) * res.value
        state = _shift(res.conditioned, 0, -s)
        if state.n_modes > 1:
            state = _shift(state, 3, -s)
    return state
