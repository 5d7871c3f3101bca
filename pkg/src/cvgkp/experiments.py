"""Experiment configuration, dispatch and CSV reports.

A configuration file is flat ``key = value`` text. Blank lines and ``#``
comments are ignored, list values are comma separated, and every key must
belong to the schema of the chosen experiment. Keys shared by all
experiments are ``experiment``, ``seed``, ``trials`` and ``workers``; the
rest are listed in :data:`SCHEMAS`.

Reports start with a ``#`` provenance line naming the package version,
experiment, seed and the SHA-256 of the resolved configuration, followed by
a header row and the data. Floats use Python's shortest round-trip
representation, which does not depend on the locale.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from cvgkp import __version__
from cvgkp import bench, cluster, fock, gkp, grid
from cvgkp.exceptions import ConfigError, InvalidParameterError

REQUIRED = object()


class Param(NamedTuple):
    kind: str  # int, float or floats
    default: object = REQUIRED
    check: Callable | None = None
    note: str = ""


def _positive(v):
    return np.all(np.asarray(v) > 0)


def _probability(v):
    return np.all((np.asarray(v) > 0) & (np.asarray(v) < 1))


def _non_negative(v):
    return np.all(np.asarray(v) >= 0)


SCHEMAS: dict[str, dict[str, Param]] = {
    "threshold": {
        "p_ft": Param("floats", REQUIRED, _probability, "target CZ error rates, one row each"),
    },
    "pfail_curve": {
        "sigma_min": Param("float", 0.1, _positive),
        "sigma_max": Param("float", 0.6, _positive),
        "sigma_step": Param("float", 0.05, _positive),
    },
    "capacity": {
        "sigma_min": Param("float", 0.1, _positive),
        "sigma_max": Param("float", 0.8, _positive),
        "sigma_step": Param("float", 0.05, _positive),
    },
    "analog_vs_binary": {
        "sigmas": Param("floats", REQUIRED, _positive, "noise standard deviations"),
        "audit_trials": Param("int", 10000, _positive, "trials checked against reference decoders"),
    },
    "sqec_chain": {
        "var_data": Param("float", REQUIRED, _positive, "initial data peak variance, both quadratures"),
        "var_ancilla": Param("float", REQUIRED, _positive, "ancilla peak variance, both quadratures"),
        "rounds": Param("int", 2, _positive, "alternating q and p corrections"),
    },
    "hrm_sweep": {
        "sigma": Param("float", REQUIRED, _positive),
        "zeta_min": Param("float", 0.0, _non_negative),
        "zeta_max": Param("float", 0.8, _non_negative),
        "zeta_step": Param("float", 0.1, _positive),
    },
    "cluster_verify": {
        "r": Param("float", REQUIRED, _non_negative, "squeezing parameter"),
        "n_graphs": Param("int", 50, _positive),
        "n_max": Param("int", 8, _positive),
        "p_edge": Param("float", 0.5, lambda v: 0 <= v <= 1),
        "chain_pairs": Param("int", 8, lambda v: v >= 2),
    },
    "decomp_check": {
        "dim": Param("int", 40, lambda v: v >= 8),
        "t": Param("float", 0.1, _positive),
        "steps": Param("floats", (4, 8, 16, 32, 64), _positive),
        "identity_dim": Param("int", 60, lambda v: v >= 8),
    },
    "breed": {
        "alpha": Param("float", REQUIRED, _positive),
        "r": Param("float", REQUIRED, _non_negative),
        "rounds": Param("int", 3, _positive),
        "epsilon": Param("float", 0.05, _positive, "homodyne acceptance half-width"),
        "extent": Param("float", grid.DEFAULT_EXTENT, _positive),
        "dx": Param("float", grid.DEFAULT_DX, _positive),
    },
    "cubic": {
        "gamma": Param("float", REQUIRED),
        "resource_db": Param("floats", REQUIRED, _positive),
        "outcome": Param("float", 0.0, None, "homodyne outcome used for the selected-branch fidelity"),
        "input_var": Param("float", 0.5, _positive),
        "input_mean_q": Param("float", 0.0),
        "input_mean_p": Param("float", 0.0),
    },
}

DEFAULT_TRIALS = {"analog_vs_binary": 100000, "sqec_chain": 100000, "hrm_sweep": 100000}
COMMON_KEYS = ("experiment", "seed", "trials", "workers")
EXPERIMENTS = tuple(SCHEMAS)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    trials: int = 1
    output_path: str | None = None
    workers: int = 1

    def canonical_text(self) -> str:
        """Resolved settings that determine the report, one sorted line each."""
        items = dict(self.parameters, experiment=self.experiment, seed=self.seed, trials=self.trials)
        return "".join(f"{k}={_format_value(items[k])}\n" for k in sorted(items))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key or None)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key)
        out[key] = value
    return out


def _convert(key: str, kind: str, raw):
    if not isinstance(raw, str):
        return tuple(float(v) for v in raw) if kind == "floats" else raw
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "floats":
            vals = tuple(float(v) for v in raw.split(",") if v.strip())
            if not vals:
                raise ValueError("empty list")
            return vals
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot read {raw!r} as {kind}", key) from exc
    raise AssertionError(kind)


def _int_setting(key, raw, minimum):
    value = _convert(key, "int", raw)
    if value < minimum:
        raise ConfigError(f"{key} must be at least {minimum}, got {value}", key)
    return value


def build_config(
    experiment: str,
    raw: dict | None = None,
    seed: int | None = None,
    trials: int | None = None,
    output_path: str | None = None,
    workers: int | None = None,
) -> ExperimentConfig:
    """Validate raw settings against the experiment schema.

    Explicit ``seed``, ``trials`` and ``workers`` arguments override the
    corresponding keys in ``raw``.
    """
    raw = dict(raw or {})
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}", "experiment")
    named = raw.pop("experiment", experiment)
    if named != experiment:
        raise ConfigError(f"config is for {named!r}, not {experiment!r}", "experiment")

    seed_raw = raw.pop("seed", 0) if seed is None else seed
    trials_raw = raw.pop("trials", DEFAULT_TRIALS.get(experiment, 1)) if trials is None else trials
    workers_raw = raw.pop("workers", 1) if workers is None else workers
    raw.pop("seed", None), raw.pop("trials", None), raw.pop("workers", None)
    seed_val = _int_setting("seed", seed_raw, 0)
    if seed_val >= 2**64:
        raise ConfigError(f"seed must fit in 64 bits, got {seed_val}", "seed")
    trials_val = _int_setting("trials", trials_raw, 1)
    workers_val = _int_setting("workers", workers_raw, 1)

    schema = SCHEMAS[experiment]
    for key in raw:
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for experiment {experiment!r}", key)
    params = {}
    for key, spec in schema.items():
        if key in raw:
            value = _convert(key, spec.kind, raw[key])
        elif spec.default is REQUIRED:
            raise ConfigError(f"missing required key {key!r} for experiment {experiment!r}", key)
        else:
            value = _convert(key, spec.kind, spec.default)
        if not np.all(np.isfinite(value)):
            raise ConfigError(f"key {key!r} must be finite", key)
        if spec.check is not None and not spec.check(value):
            raise ConfigError(f"key {key!r} is out of range: {value!r}", key)
        params[key] = value
    return ExperimentConfig(experiment, params, seed_val, trials_val, output_path, workers_val)


def load_config(path, experiment: str, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", "config") from exc
    return build_config(experiment, parse_config_text(text), **overrides)


# ------------------------------------------------------------------ experiments


def _grid_values(lo, hi, step):
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    if n < 1:
        raise ConfigError(f"empty range from {lo} to {hi}", "sigma_max")
    # rounding keeps 0.1 + 4 * 0.05 printing as 0.3
    return [round(lo + i * step, 12) for i in range(n)]


def _threshold(cfg):
    rows = []
    for p_ft in cfg.parameters["p_ft"]:
        t = bench.solve_threshold(p_ft)
        rows.append((p_ft, t.sigma2_star, t.squeezing_db, bench.p_err_cz(t.sigma2_star)))
    return ("p_ft", "sigma2_star", "squeezing_db", "p_err_at_star"), rows


def _pfail_curve(cfg):
    p = cfg.parameters
    rows = []
    for s in _grid_values(p["sigma_min"], p["sigma_max"], p["sigma_step"]):
        rows.append((s, s * s, gkp.p_fail(s * s), gkp.p_fail_lattice(s * s)))
    return ("sigma", "variance", "p_fail", "p_fail_lattice"), rows


def _capacity(cfg):
    p = cfg.parameters
    rows = [("curve", s, gkp.p_fail(s * s), bench.capacity_rate(s)) for s in _grid_values(p["sigma_min"], p["sigma_max"], p["sigma_step"])]
    s = bench.capacity_point()
    rows.append(("critical", s, gkp.p_fail(s * s), bench.capacity_rate(s)))
    return ("kind", "sigma", "p_fail", "rate"), rows


def _analog_vs_binary(cfg):
    audit = cfg.parameters["audit_trials"]
    rows = []
    for sigma in cfg.parameters["sigmas"]:
        r = bench.analog_vs_binary_mc(sigma, cfg.trials, cfg.seed, cfg.workers)
        rows.append(
            (
                sigma,
                r.trials,
                r.p_logical_binary,
                *r.binary_interval,
                r.p_logical_analog,
                *r.analog_interval,
                r.binary_only,
                r.analog_only,
                r.z_score,
                audit,
                bench.audit_analog_decoder(sigma, audit, cfg.seed, "patterns"),
                bench.audit_analog_decoder(sigma, audit, cfg.seed, "lattice"),
            )
        )
    columns = (
        "sigma", "trials", "p_binary", "binary_low", "binary_high", "p_analog", "analog_low", "analog_high",
        "binary_only_errors", "analog_only_errors", "z_score", "audit_trials", "pattern_mismatches", "lattice_mismatches",
    )  # fmt: skip
    return columns, rows


def sqec_monte_carlo(data, ancilla, quadrature, trials, seed, workers=1):
    """Sampled residual variances and flip count of one SQEC round."""

    def block(rng, n):
        t = gkp.sqec_trajectories(data, ancilla, quadrature, n, rng)
        return float(np.sum(t.dev_q**2)), float(np.sum(t.dev_p**2)), int(t.flips.sum())

    parts = bench.map_blocks(block, trials, seed, workers)
    sq = sum(p[0] for p in parts)
    sp = sum(p[1] for p in parts)
    flips = sum(p[2] for p in parts)
    return sq / trials, sp / trials, flips


def _sqec_chain(cfg):
    p = cfg.parameters
    model = gkp.GkpPeakModel.symmetric(p["var_data"])
    anc = gkp.GkpPeakModel.symmetric(p["var_ancilla"])
    rows = []
    for k in range(p["rounds"]):
        quad = "qp"[k % 2]
        new, p_flip = gkp.sqec_step(model, anc, quad)
        mc_q, mc_p, flips = sqec_monte_carlo(model, anc, quad, cfg.trials, (cfg.seed + k) % 2**64, cfg.workers)
        rate = flips / cfg.trials
        se = np.sqrt(p_flip * (1 - p_flip) / cfg.trials)
        rows.append((k, quad, new.var_q, new.var_p, p_flip, mc_q, mc_p, rate, se))
        model = new
    return ("round", "quadrature", "var_q", "var_p", "p_flip", "mc_var_q", "mc_var_p", "mc_flip_rate", "flip_se"), rows


def _hrm_sweep(cfg):
    p = cfg.parameters
    sigma, s = p["sigma"], gkp.SQRT_PI
    zetas = _grid_values(p["zeta_min"], p["zeta_max"], p["zeta_step"])
    if zetas[-1] >= s / 2:
        raise ConfigError(f"zeta_max must stay below {s / 2}", "zeta_max")

    def block(rng, n):
        b = gkp.bin_outcomes(rng.normal(0.0, sigma, n))
        dev = np.abs(b.deviation)
        acc = np.array([np.sum(dev <= s / 2 - z) for z in zetas])
        err = np.array([np.sum((dev <= s / 2 - z) & (b.bit == 1)) for z in zetas])
        return acc, err

    parts = bench.map_blocks(block, cfg.trials, cfg.seed, cfg.workers)
    acc = sum(a for a, _ in parts)
    err = sum(e for _, e in parts)
    rows = []
    for z, a, e in zip(zetas, acc, err):
        stats = gkp.hrm_stats(sigma * sigma, z)
        mc_err = float(e / a) if a else float("nan")
        rows.append((z, stats.p_accept, stats.p_error, a / cfg.trials, mc_err))
    return ("zeta", "p_accept", "p_error", "mc_p_accept", "mc_p_error"), rows


def _cluster_verify(cfg):
    p = cfg.parameters
    r = p["r"]
    target = 0.5 * np.exp(-2 * r)
    rows = []

    def stats(state, nulls):
        cov = cluster.nullifier_covariance(state, nulls)
        diag = np.diag(cov)
        off = cov - np.diag(diag)
        return float(np.max(np.abs(diag / target - 1))), float(np.abs(off).max(initial=0.0))

    for i in range(p["n_graphs"]):
        rng = bench.block_generator(cfg.seed, i)
        n = int(rng.integers(1, p["n_max"] + 1))
        g = cluster.random_graph(n, p["p_edge"], rng)
        dev, off = stats(cluster.build_canonical_cluster(g, r), cluster.nullifiers(g))
        rows.append(("graph", i, n, len(g.edges), dev, off))
    n_pairs = p["chain_pairs"]
    chain = cluster.timemux_1d_chain(n_pairs, r)
    dev, off = stats(chain, cluster.timemux_chain_nullifiers(n_pairs))
    rows.append(("timemux_chain", 0, 2 * n_pairs, 0, dev, off))
    return ("kind", "index", "n_modes", "n_edges", "max_rel_deviation", "max_offdiag"), rows


def _decomp_check(cfg):
    p = cfg.parameters
    steps = [int(s) for s in p["steps"]]
    q, pp = fock.quadrature_matrices(p["dim"])
    rows = []
    for name, a, b in (("symmetric", q**2, pp**2), ("commutator", q**2, pp)):
        errs = [fock.trotter_product_error(a, b, p["t"], n, name) for n in steps]
        rows += [(f"{name}_error", str(n), e) for n, e in zip(steps, errs)]
        rows.append((f"{name}_slope", "", float(np.polyfit(np.log(steps), np.log(errs), 1)[0])))
    for m, n in ((1, 1), (1, 2), (1, 3), (2, 2)):
        r18, r19 = fock.commutator_identity_check(m, n, p["identity_dim"])
        rows.append(("power_identity_residual", f"{m}:{n}", r18))
        rows.append(("symmetrised_identity_residual", f"{m}:{n}", r19))
    return ("quantity", "argument", "value"), rows


def _breed(cfg):
    p = cfg.parameters
    state = grid.squeezed_cat(p["alpha"], p["r"], p["extent"], p["dx"])
    delta2 = np.exp(-2 * p["r"])
    rows = [(0, 1.0, grid.fitted_gkp_fidelity(state, delta2), grid.count_peaks(state))]
    for k in range(1, p["rounds"] + 1):
        state, acc = grid.breed_step(state, p["epsilon"])
        rows.append((k, acc, grid.fitted_gkp_fidelity(state, delta2), grid.count_peaks(state)))
    return ("round", "acceptance", "gkp_fidelity", "peaks"), rows


def _cubic(cfg):
    p = cfg.parameters
    inp = grid.gaussian_wavefunction(p["input_var"], p["input_mean_q"], p["input_mean_p"])
    rows = []
    for db in p["resource_db"]:
        res = grid.cubic_phase_teleport(inp, p["gamma"], db, outcome=p["outcome"])
        rows.append((p["gamma"], db, res.outcome, res.fidelity, res.mean_fidelity))
    return ("gamma", "resource_db", "outcome", "fidelity", "mean_fidelity"), rows


RUNNERS = {
    "threshold": _threshold,
    "pfail_curve": _pfail_curve,
    "capacity": _capacity,
    "analog_vs_binary": _analog_vs_binary,
    "sqec_chain": _sqec_chain,
    "hrm_sweep": _hrm_sweep,
    "cluster_verify": _cluster_verify,
    "decomp_check": _decomp_check,
    "breed": _breed,
    "cubic": _cubic,
}


def compute_table(config: ExperimentConfig) -> tuple[tuple[str, ...], list[tuple]]:
    try:
        return RUNNERS[config.experiment](config)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc


def _format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    return str(v)


def format_csv(config: ExperimentConfig, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# cvgkp {__version__} experiment={config.experiment} seed={config.seed} config_sha256={config.digest()}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_value(v) for v in row])
    return buf.getvalue()


def run_experiment(config: ExperimentConfig) -> str:
    """Run the configured experiment and return its CSV report.

    The report is also written to ``config.output_path`` when that is set.
    """
    text = format_csv(config, *compute_table(config))
    if config.output_path:
        Path(config.output_path).write_text(text)
    return text


def read_report(text: str) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a report, skipping provenance comments."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]
