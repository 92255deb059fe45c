"""Seeded Monte Carlo scenarios: noise sweeps, shift-invariant recovery,
channel synchronisation, practical shaping filters, failure audits and
quadrature oracles.

Every scenario is driven by a :class:`ScenarioConfig` (plain JSON on disk)
and writes CSV tables plus a JSON run manifest.  Noise for trial ``j`` at
SNR index ``i`` is drawn from ``SeedSequence(seed, spawn_key=(i, j))``, so
every waveform family sees the same noise realisations and the aggregates
do not depend on how trials are scheduled across threads.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import AuditFailed, DegenerateRootsWarning, IllConditionedVandermondeWarning
from .filters import ChebyshevI, IdealOnGrid, write_response_csv
from .recovery import RecoveryConfig, match_delays, recover_stream
from .sampler import ChannelConfig, add_noise, sample_analytic, sample_quadrature
from .signal_model import (TWO_PI, FiniteStream, IndexSet, InfiniteStream, PulseShape,
                           fourier_series)
from .waveforms import (CosSin, Direct, PulseSequence, SoSDelayed, audit_row_deletions,
                        build_mixing_matrix, cyclic_generator, draw_pm1_sequence,
                        failure_robust_spec, spec_to_dict, write_waveform_csv)

SCENARIOS = ("snr_sweep", "si_recovery", "sync_sweep", "filter_order", "failure_audit",
             "waveform_dump", "oracle_check")
NOISELESS_TOL = 1e-7


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment.  Delays are given in units of ``period_T``."""

    scenario: str
    K: int = 5
    p: int | None = None
    period_T: float = 1.0
    delays: tuple = ()
    amplitudes: tuple = ()
    pulse: dict = field(default_factory=lambda: {"kind": "dirac"})
    families: tuple = ("tones",)
    estimator: str = "annihilating_filter"
    snr_db: tuple = ()
    trials: int = 1000
    seed: int = 0
    out: str = "results"
    # rectangular pulse-sequence family: explicit +-1 generator or a seed to draw one
    sequence: tuple | None = None
    sequence_seed: int = 0
    extent: int | None = None
    # shift-invariant streams
    periods: int = 1
    amplitude_sigma: float = 0.0
    # synchronisation sweep
    delta_max: tuple = ()
    compensate: bool = False
    # practical shaping filters: "ideal" or a Chebyshev order
    filters: tuple = ()
    ripple_db: float = 3.0
    # failure audit
    audit_N: int = 9
    audit_p: int = 18
    max_failed: int = 6
    audit_max_deleted: int = 9
    generator_seeds: tuple | None = None
    failed_channels: tuple = ()
    # oracle / waveform dump
    pulses: tuple = ()
    points_per_period: int = 2 ** 14
    oracle_tol: float = 1e-6
    sifting_tol: float = 1e-10
    dump_points: int = 512
    threads: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.scenario in ("snr_sweep", "si_recovery", "filter_order") and not self.snr_db:
            raise ValueError(f"{self.scenario} needs a nonempty SNR grid")
        for name in ("delays", "amplitudes", "families", "snr_db", "delta_max", "filters",
                     "failed_channels", "pulses"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("sequence", "generator_seeds"):
            if getattr(self, name) is not None:
                object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def channels(self) -> int:
        return self.K if self.p is None else self.p

    @property
    def L(self) -> int:
        return len(self.delays)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snr_db"] = [_snr_text(s) for s in self.snr_db]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        if "snr_db" in d:
            d["snr_db"] = tuple(_snr_value(s) for s in d["snr_db"])
        return cls(**d)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def config_hash(self) -> str:
        d = self.to_dict()
        for volatile in ("out", "threads"):
            d.pop(volatile)
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _snr_value(s) -> float:
    if isinstance(s, str):
        if s.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        return float(s)
    return float(s)


def _snr_text(s) -> str | float:
    return "inf" if s == math.inf else float(s)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return ScenarioConfig.from_dict(json.load(fh))


def save_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# built-in presets for the standard studies

def preset(name: str) -> ScenarioConfig:
    """Built-in configurations: ``fig7``, ``fig8``, ``fig9``, ``si``, ``sync``, ``fig13``, ``oracle``, ``dump``."""
    snr = tuple(float(s) for s in range(5, 61, 5))
    if name == "fig8":
        return ScenarioConfig("snr_sweep", K=5, delays=(0.256, 0.38), amplitudes=(1.0, 0.8),
                              families=("tones", "rectangular", "sos"), snr_db=snr,
                              sequence_seed=0)
    if name == "fig9":
        return ScenarioConfig("snr_sweep", K=21, delays=FIG9_DELAYS, amplitudes=(1.0,) * 10,
                              families=("tones", "sos"), snr_db=snr)
    if name == "si":
        return ScenarioConfig("si_recovery", K=8, delays=(0.213, 0.452, 0.664, 0.745),
                              amplitudes=(1.0, 0.9, 0.7, 0.6), families=("sos",),
                              estimator="esprit_si", periods=25, amplitude_sigma=0.1,
                              snr_db=snr, trials=200)
    if name == "sync":
        return ScenarioConfig("sync_sweep", K=9, delays=(0.213, 0.452, 0.664, 0.745),
                              amplitudes=(1.0, 0.9, 0.7, 0.6), families=("tones",),
                              snr_db=(math.inf, 40.0, 60.0),
                              delta_max=(0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.03, 0.05),
                              compensate=True, trials=200)
    if name == "fig13":
        return ScenarioConfig("filter_order", K=5, delays=(0.256, 0.46), amplitudes=(1.0, 0.8),
                              families=("rectangular",), snr_db=tuple(range(10, 51, 5)),
                              sequence_seed=0, filters=("ideal", 4, 6, 10),
                              extent=64)
    if name == "fig7":
        return ScenarioConfig("failure_audit", K=9, audit_N=9, audit_p=18, max_failed=6,
                              audit_max_deleted=9, generator_seeds=AUDIT_GENERATOR_SEEDS,
                              delays=(0.213, 0.452, 0.664, 0.745),
                              amplitudes=(1.0, 0.9, 0.7, 0.6),
                              failed_channels=(0, 3, 5, 9, 12, 16), trials=1)
    if name == "oracle":
        return ScenarioConfig("oracle_check", K=5, delays=(0.256, 0.38, 0.61),
                              amplitudes=(1.0, 0.8, -0.5), families=("tones", "rectangular", "sos"),
                              sequence_seed=0, trials=1,
                              pulses=({"kind": "dirac"},
                                      {"kind": "gaussian", "sigma": 0.01},
                                      {"kind": "rectangle", "width": 0.04}))
    if name == "dump":
        return ScenarioConfig("waveform_dump", K=5, families=("tones", "rectangular", "sos"),
                              sequence_seed=0, filters=("ideal", 4, 6, 10),
                              trials=1)
    raise ValueError(f"unknown preset {name!r}")


# seeds accepted by draw_pm1_sequence for the N = 9, p = 18 dual-generator design
AUDIT_GENERATOR_SEEDS = (2, 3)
# ten unit-amplitude Diracs spread over the period
FIG9_DELAYS = (0.043, 0.131, 0.209, 0.302, 0.398, 0.487, 0.571, 0.668, 0.757, 0.861)


# ---------------------------------------------------------------------------
# building blocks

def trial_seed(master: int, *key: int) -> int:
    """Counter-based seed for one trial (independent of execution order)."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def pulse_from_config(d: dict, T: float) -> PulseShape:
    """Pulse parameters in the config are in units of ``T``."""
    d = dict(d)
    kind = d.pop("kind")
    if kind == "dirac":
        return PulseShape.dirac()
    if kind == "rectangle":
        return PulseShape.rectangle(d["width"] * T)
    if kind == "gaussian":
        trunc = d.get("truncation_halfwidth")
        return PulseShape.gaussian(d["sigma"] * T, None if trunc is None else trunc * T)
    if kind == "tabulated":
        return PulseShape.tabulated(d["samples"], d["step"] * T)
    raise ValueError(f"unknown pulse kind {kind!r}")


def make_stream(cfg: ScenarioConfig) -> FiniteStream:
    T = cfg.period_T
    return FiniteStream(T, np.asarray(cfg.delays) * T, np.asarray(cfg.amplitudes),
                        pulse_from_config(cfg.pulse, T))


def rectangular_sequence(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.sequence is not None:
        return np.asarray(cfg.sequence, dtype=float)
    return draw_pm1_sequence(cfg.K, cfg.sequence_seed)[0]


def make_filter(entry, cfg: ScenarioConfig, kset: IndexSet):
    """``"ideal"`` or a Chebyshev type I order with cutoff ``2 pi/T * floor(K/2)``."""
    if entry == "ideal":
        return None
    cutoff = TWO_PI / cfg.period_T * (cfg.K // 2)
    return ChebyshevI(int(entry), cfg.ripple_db, cutoff)


def make_family(family: str, cfg: ScenarioConfig, kset: IndexSet | None = None,
                shaping_filter=None):
    """Mixing spec for a waveform family label."""
    kset = kset or IndexSet.symmetric(cfg.K)
    T = cfg.period_T
    if family == "tones":
        return CosSin(kset, T)
    if family == "direct":
        return Direct(kset, T)
    if family == "sos":
        return SoSDelayed(kset, np.ones(kset.K), cfg.channels, T)
    if family == "rectangular":
        alpha = cyclic_generator(rectangular_sequence(cfg))
        return PulseSequence(kset, alpha, shaping_filter=shaping_filter, T=T, extent=cfg.extent)
    raise ValueError(f"unknown waveform family {family!r}")


def filter_label(entry) -> str:
    return "ideal" if entry == "ideal" else f"chebyshev{int(entry)}"


def aggregate_errors(errors: np.ndarray) -> dict:
    """Standard deviation, mean square and mean of all delay errors (units of ``T``)."""
    e = np.asarray(errors, dtype=float).ravel()
    return {"error_std": float(np.std(e)), "error_mse": float(np.mean(e ** 2)),
            "error_bias": float(np.mean(e))}


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _chunks(n: int, threads: int):
    size = max(1, math.ceil(n / max(threads, 1)))
    return [range(lo, min(n, lo + size)) for lo in range(0, n, size)]


def noisy_trial_errors(c0, S, stream, rcfg: RecoveryConfig, snr, seeds, threads=1,
                       true_delays=None) -> np.ndarray:
    """Delay errors (units of ``T``) for one noise level; one row per trial."""
    T = stream.period_T
    kset = S.kset
    true = np.asarray(stream.delays if true_delays is None else true_delays)

    def run(idx):
        rows = []
        for j in idx:
            c = add_noise(c0, snr, seeds[j])
            res = recover_stream(c, S, stream.pulse, kset, rcfg)
            rows.append(np.concatenate([match_delays(d, true, T)[1] for d in res.delays]) / T)
        return rows

    parts = _map(run, _chunks(len(seeds), threads), threads)
    return np.array([r for part in parts for r in part])


# ---------------------------------------------------------------------------
# output

def _header(cfg: ScenarioConfig, noise_model: str) -> dict:
    return {"scenario": cfg.scenario, "config_hash": cfg.config_hash(), "seed": cfg.seed,
            "noise_model": noise_model, "version": __version__}


NOISE_NOTE = ("white gaussian on samples; variance = mean |c|^2 / 10^(snr/10); "
              "real when samples are real, else circular complex")


def write_table(path, columns, rows, header: dict) -> None:
    with open(path, "w", newline="") as fh:
        for k in sorted(header):
            fh.write(f"# {k}={header[k]}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v == math.inf:
            return "inf"
        return repr(v)
    return v


def read_table(path) -> list:
    """Rows of a table written by :func:`write_table` as dicts of strings."""
    with open(path, newline="") as fh:
        body = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(body))


def _sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_manifest(cfg: ScenarioConfig, files, summary: dict) -> str:
    path = os.path.join(cfg.out, f"{cfg.scenario}_manifest.json")
    # out and threads do not affect the results, so they stay out of the manifest
    config = {k: v for k, v in cfg.to_dict().items() if k not in ("out", "threads")}
    doc = {"scenario": cfg.scenario, "config": config, "config_hash": cfg.config_hash(),
           "version": __version__, "noise_model": NOISE_NOTE,
           "files": {os.path.basename(f): _sha256(f) for f in files}, "summary": summary}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


@dataclass
class RunResult:
    """Rows produced by a scenario plus the files written (when ``out`` is set)."""

    scenario: str
    rows: list
    summary: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    ok: bool = True


def _finish(cfg, name, columns, rows, summary, noise_model=NOISE_NOTE, write=True, ok=True):
    result = RunResult(cfg.scenario, rows, summary, ok=ok)
    if write:
        os.makedirs(cfg.out, exist_ok=True)
        path = os.path.join(cfg.out, name)
        write_table(path, columns, rows, _header(cfg, noise_model))
        result.files = [path, write_manifest(cfg, [path], summary)]
    return result


def _quiet():
    ctx = warnings.catch_warnings()
    ctx.__enter__()
    warnings.simplefilter("ignore", DegenerateRootsWarning)
    warnings.simplefilter("ignore", IllConditionedVandermondeWarning)
    return ctx


# ---------------------------------------------------------------------------
# scenarios

SWEEP_COLUMNS = ["snr_db", "family", "estimator", "error_std", "error_mse", "error_bias", "trials"]


def run_snr_sweep(cfg: ScenarioConfig, write: bool = True) -> RunResult:
    """Delay-estimation error versus SNR for every waveform family."""
    stream = make_stream(cfg)
    rcfg = RecoveryConfig(cfg.estimator, cfg.L)
    rows = []
    ctx = _quiet()
    try:
        for family in cfg.families:
            S = build_mixing_matrix(make_family(family, cfg))
            c0 = sample_analytic(stream, S)
            rows += _sweep_rows(cfg, c0, S, stream, rcfg, {"family": family})
    finally:
        ctx.__exit__(None, None, None)
    return _finish(cfg, "snr_sweep.csv", SWEEP_COLUMNS, rows, _curves(rows, "family"),
                   write=write)


def _sweep_rows(cfg, c0, S, stream, rcfg, labels, true_delays=None):
    rows = []
    for i, snr in enumerate(cfg.snr_db):
        n = 1 if snr == math.inf else cfg.trials
        seeds = [trial_seed(cfg.seed, i, j) for j in range(n)]
        err = noisy_trial_errors(c0, S, stream, rcfg, snr, seeds, cfg.threads, true_delays)
        rows.append(dict(labels, snr_db=snr, estimator=rcfg.estimator, trials=n,
                         **aggregate_errors(err)))
    return rows


def _curves(rows, key) -> dict:
    out = {}
    for r in rows:
        out.setdefault(str(r[key]), {})[_snr_text(r["snr_db"])] = r["error_std"]
    return {"error_std": out}


def si_stream(cfg: ScenarioConfig, trial_key: int) -> InfiniteStream:
    """Common delays; per-period amplitudes ``N(mean, sigma^2)`` drawn from the trial seed."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(10**6, trial_key)))
    mean = np.asarray(cfg.amplitudes, dtype=float)
    amps = mean + cfg.amplitude_sigma * rng.standard_normal((cfg.periods, mean.size))
    T = cfg.period_T
    return InfiniteStream.shift_invariant(T, np.asarray(cfg.delays) * T, amps,
                                          pulse_from_config(cfg.pulse, T))


SI_COLUMNS = ["snr_db", "method", "family", "error_std", "error_mse", "error_bias", "trials",
              "smoothing_used"]


def run_si_recovery(cfg: ScenarioConfig, write: bool = True) -> RunResult:
    """Per-period (standard) versus joint ESPRIT (SI) recovery over ``cfg.periods`` periods.

    Each trial draws fresh amplitudes; both methods see the same samples.
    Smoothing is switched on automatically when the amplitude vectors span
    fewer than ``L`` dimensions.
    """
    family = cfg.families[0]
    S = build_mixing_matrix(make_family(family, cfg))
    T = cfg.period_T
    L = cfg.L
    true = np.asarray(cfg.delays) * T
    standard = RecoveryConfig("annihilating_filter", L)
    joint = RecoveryConfig("esprit_si", L)
    pulse = pulse_from_config(cfg.pulse, T)
    rows = []
    ctx = _quiet()
    try:
        for i, snr in enumerate(cfg.snr_db):
            n = 1 if snr == math.inf else cfg.trials

            def run(idx):
                out = []
                for j in idx:
                    stream = si_stream(cfg, j)
                    c = add_noise(sample_analytic(stream, S), snr, trial_seed(cfg.seed, i, j))
                    r_std = recover_stream(c, S, pulse, S.kset, standard)
                    r_si = recover_stream(c, S, pulse, S.kset, joint)
                    e_std = np.concatenate([match_delays(d, true, T)[1] for d in r_std.delays])
                    e_si = match_delays(r_si.delays[0], true, T)[1]
                    out.append((e_std / T, e_si / T, r_si.diagnostics["smoothing"]))
                return out

            parts = [x for part in _map(run, _chunks(n, cfg.threads), cfg.threads) for x in part]
            e_std = np.concatenate([p[0] for p in parts])
            e_si = np.concatenate([p[1] for p in parts])
            smooth = sum(p[2] for p in parts)
            rows.append(dict(snr_db=snr, method="standard", family=family, trials=n,
                             smoothing_used=0, **aggregate_errors(e_std)))
            rows.append(dict(snr_db=snr, method="si", family=family, trials=n,
                             smoothing_used=smooth, **aggregate_errors(e_si)))
    finally:
        ctx.__exit__(None, None, None)
    return _finish(cfg, "si_recovery.csv", SI_COLUMNS, rows, _curves(rows, "method"),
                   write=write)


def sync_offsets(p: int, delta_max: float, rng: np.random.Generator) -> np.ndarray:
    """First channel at 0, last at ``delta_max``, the rest uniform on ``[0, delta_max]``."""
    o = rng.uniform(0.0, delta_max, p)
    o[0] = 0.0
    o[-1] = delta_max
    return o


SYNC_COLUMNS = ["delta_max", "snr_db", "compensated", "error_std", "error_mse", "error_bias",
                "trials"]


def run_sync_sweep(cfg: ScenarioConfig, write: bool = True) -> RunResult:
    """Delay error versus the maximal channel offset, uncompensated (and compensated control)."""
    stream = make_stream(cfg)
    S = build_mixing_matrix(make_family(cfg.families[0], cfg))
    T = cfg.period_T
    L = cfg.L
    rows = []
    modes = (False, True) if cfg.compensate else (False,)
    ctx = _quiet()
    try:
        for d_i, dmax in enumerate(cfg.delta_max):
            for s_i, snr in enumerate(cfg.snr_db):
                n = 1 if snr == math.inf and dmax == 0 else cfg.trials

                def run(idx):
                    out = {False: [], True: []}
                    for j in idx:
                        seed = trial_seed(cfg.seed, d_i, s_i, j)
                        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
                        offs = sync_offsets(S.p, dmax * T, rng)
                        chan = ChannelConfig(offsets=offs, snr_db=None if snr == math.inf else snr,
                                             rng_seed=seed, delta_max=dmax * T)
                        c = sample_analytic(stream, S, config=chan)
                        for comp in modes:
                            rc = RecoveryConfig(cfg.estimator, L,
                                                known_offsets=tuple(offs) if comp else None)
                            res = recover_stream(c, S, stream.pulse, S.kset, rc)
                            out[comp].append(match_delays(res.delays[0], stream.delays, T)[1] / T)
                    return out

                parts = _map(run, _chunks(n, cfg.threads), cfg.threads)
                for comp in modes:
                    err = np.concatenate([e for part in parts for e in part[comp]])
                    rows.append(dict(delta_max=float(dmax), snr_db=snr, compensated=comp,
                                     trials=n, **aggregate_errors(err)))
    finally:
        ctx.__exit__(None, None, None)
    return _finish(cfg, "sync_sweep.csv", SYNC_COLUMNS, rows, {}, write=write)


FILTER_COLUMNS = ["snr_db", "filter", "error_std", "error_mse", "error_bias", "trials",
                  "max_leakage"]


def run_filter_order(cfg: ScenarioConfig, write: bool = True) -> RunResult:
    """Rectangular pulse sequences shaped by the ideal filter and Chebyshev filters."""
    stream = make_stream(cfg)
    kset = IndexSet.symmetric(cfg.K)
    rcfg = RecoveryConfig(cfg.estimator, cfg.L)
    rows = []
    ctx = _quiet()
    try:
        for entry in cfg.filters:
            spec = make_family("rectangular", cfg, kset, make_filter(entry, cfg, kset))
            S = build_mixing_matrix(spec)
            inset = np.isin(S.ext_indices, kset.indices)
            leak = float(np.max(np.abs(S.extended[:, ~inset]))) if np.any(~inset) else 0.0
            c0 = sample_analytic(stream, S)
            for r in _sweep_rows(cfg, c0, S, stream, rcfg, {"filter": filter_label(entry)}):
                r["max_leakage"] = leak
                rows.append(r)
    finally:
        ctx.__exit__(None, None, None)
    return _finish(cfg, "filter_order.csv", FILTER_COLUMNS, rows, _curves(rows, "filter"),
                   write=write)


AUDIT_COLUMNS = ["p_e", "subsets_checked", "exhaustive", "worst_condition",
                 "worst_log10_condition", "first_failure"]


def run_failure_audit(cfg: ScenarioConfig, write: bool = True) -> RunResult:
    """Worst-case conditioning after deleting channels from the dual-generator design.

    The design must stay full rank for up to ``max_failed`` deletions
    (otherwise :class:`AuditFailed` propagates); the table continues up to
    ``audit_max_deleted`` to show where rank is lost.  A noiseless recovery
    with ``failed_channels`` removed is reported in the summary.
    """
    N, p = cfg.audit_N, cfg.audit_p
    T = cfg.period_T
    if cfg.generator_seeds is not None:
        b1 = draw_pm1_sequence(N, cfg.generator_seeds[0])[0]
        b2 = draw_pm1_sequence(N, cfg.generator_seeds[1])[0]
        spec, report = failure_robust_spec(N, cfg.K, p, cfg.max_failed, b1, b2, T=T)
        report.seeds = tuple(cfg.generator_seeds)
    else:
        spec, report = failure_robust_spec(N, cfg.K, p, cfg.max_failed, seed=cfg.seed, T=T)
    S = build_mixing_matrix(spec)
    full = audit_row_deletions(S.entries, cfg.audit_max_deleted)
    rows = []
    for pe in range(cfg.audit_max_deleted + 1):
        fail = full.first_failure[pe]
        rows.append({"p_e": pe, "subsets_checked": full.subsets_checked[pe],
                     "exhaustive": full.exhaustive[pe], "worst_condition": full.worst_condition[pe],
                     "worst_log10_condition": full.worst_log10_condition(pe),
                     "first_failure": "" if fail is None else " ".join(map(str, fail))})
    summary = {"generator_seeds": list(report.seeds), "max_failed": cfg.max_failed,
               "design_ok": report.ok, "alpha": spec.alpha.tolist()}
    if cfg.delays:
        stream = make_stream(cfg)
        chan = ChannelConfig(failed=frozenset(cfg.failed_channels))
        res = recover_stream(sample_analytic(stream, S, config=chan), S, stream.pulse, S.kset,
                             RecoveryConfig(cfg.estimator, cfg.L))
        err = match_delays(res.delays[0], stream.delays, T)[1] / T
        summary["failed_channels"] = list(cfg.failed_channels)
        summary["recovery_max_error"] = float(np.max(np.abs(err)))
    return _finish(cfg, "failure_audit.csv", AUDIT_COLUMNS, rows, summary,
                   noise_model="noiseless", write=write, ok=report.ok)


ORACLE_COLUMNS = ["pulse", "family", "quantity", "method", "max_rel_deviation", "tolerance",
                  "richardson_error", "passed"]


def run_oracle_check(cfg: ScenarioConfig, write: bool = True) -> RunResult:
    """Analytic samples and Fourier coefficients against numerical integration.

    Fourier coefficients are integrated through the ``Direct`` family (whose
    channel ``k`` integrates ``x(t) exp(-j 2 pi k t / T) / T``).
    """
    T = cfg.period_T
    kset = IndexSet.symmetric(cfg.K)
    rows = []
    pulses = cfg.pulses or (cfg.pulse,)
    for pd in pulses:
        pulse = pulse_from_config(pd, T)
        stream = FiniteStream(T, np.asarray(cfg.delays) * T, np.asarray(cfg.amplitudes), pulse)
        tol = cfg.sifting_tol if pulse.is_dirac else cfg.oracle_tol
        method = "sifting" if pulse.is_dirac else "quadrature"
        targets = [("fourier", Direct(kset, T))] + [(f, make_family(f, cfg, kset))
                                                    for f in cfg.families]
        for label, spec in targets:
            S = build_mixing_matrix(spec)
            a = sample_analytic(stream, S).values[:, 0]
            q = sample_quadrature(stream, spec, points_per_period=cfg.points_per_period)
            dev = float(np.max(np.abs(a - q.values[:, 0])) / max(np.max(np.abs(a)), 1e-300))
            rows.append({"pulse": pd["kind"], "family": "direct" if label == "fourier" else label,
                         "quantity": "fourier_coefficients" if label == "fourier" else "samples",
                         "method": method, "max_rel_deviation": dev, "tolerance": tol,
                         "richardson_error": float(q.provenance.get("richardson_error", 0.0)),
                         "passed": dev <= tol})
    ok = all(r["passed"] for r in rows)
    summary = {"passed": ok, "worst": max(r["max_rel_deviation"] for r in rows)}
    return _finish(cfg, "oracle_check.csv", ORACLE_COLUMNS, rows, summary,
                   noise_model="noiseless", write=write, ok=ok)


def run_waveform_dump(cfg: ScenarioConfig, write: bool = True) -> RunResult:
    """Waveforms of every family over one period, shaping-filter responses and mixing matrices."""
    T = cfg.period_T
    kset = IndexSet.symmetric(cfg.K)
    t = np.arange(cfg.dump_points) * T / cfg.dump_points
    files, rows = [], []
    os.makedirs(cfg.out, exist_ok=True) if write else None
    for family in cfg.families:
        spec = make_family(family, cfg, kset)
        S = build_mixing_matrix(spec)
        rows.append({"family": family, "p": S.p, "condition_number": S.condition_number,
                     "spec": spec_to_dict(spec)})
        if write:
            path = os.path.join(cfg.out, f"waveform_{family}.csv")
            write_waveform_csv(path, spec, t)
            files.append(path)
    omega = np.linspace(0.0, 4 * TWO_PI / T * max(cfg.K // 2, 1), cfg.dump_points)
    for entry in cfg.filters:
        filt = make_filter(entry, cfg, kset)
        if filt is None:
            from .waveforms import mirror
            filt = IdealOnGrid(mirror(kset), T)
        if write:
            path = os.path.join(cfg.out, f"response_{filter_label(entry)}.csv")
            write_response_csv(path, filt, omega)
            files.append(path)
    result = RunResult(cfg.scenario, rows, {"families": [r["family"] for r in rows]})
    if write:
        result.files = files + [write_manifest(cfg, files, result.summary)]
    return result


RUNNERS = {"snr_sweep": run_snr_sweep, "si_recovery": run_si_recovery,
           "sync_sweep": run_sync_sweep, "filter_order": run_filter_order,
           "failure_audit": run_failure_audit, "oracle_check": run_oracle_check,
           "waveform_dump": run_waveform_dump}


def run(cfg: ScenarioConfig, write: bool = True) -> RunResult:
    return RUNNERS[cfg.scenario](cfg, write)


# ---------------------------------------------------------------------------
# comparing curves

def _snr_at(snr, err, levels):
    """SNR at which a curve reaches each error level (log-error interpolation).

    The curve is replaced by its running minimum so it is non-increasing
    and the inverse is single valued.
    """
    env = np.minimum.accumulate(np.log10(err))
    return np.interp(-np.log10(levels), -env, snr, left=np.nan, right=np.nan)


def equivalent_snr_gap(snr_db, err_a, err_b, n_levels: int = 64, snr_range=None):
    """Horizontal distance (dB) between two error-versus-SNR curves at matched error levels.

    Error levels are spaced geometrically over the range both curves cover
    (restricted to ``snr_range`` when given).  At each level the SNR each
    curve needs is interpolated; the gap is ``snr_b - snr_a``, positive when
    curve ``b`` needs more SNR (is worse).

    Returns:
        ``(levels, gaps)``.
    """
    snr = np.asarray(snr_db, dtype=float)
    a = np.asarray(err_a, dtype=float)
    b = np.asarray(err_b, dtype=float)
    keep = np.isfinite(snr)
    if snr_range is not None:
        keep &= (snr >= snr_range[0]) & (snr <= snr_range[1])
    snr, a, b = snr[keep], a[keep], b[keep]
    ea, eb = np.minimum.accumulate(a), np.minimum.accumulate(b)
    hi = min(ea[0], eb[0])
    lo = max(ea[-1], eb[-1])
    if not hi > lo:
        return np.empty(0), np.empty(0)
    levels = np.geomspace(hi, lo, n_levels)
    gaps = _snr_at(snr, b, levels) - _snr_at(snr, a, levels)
    return levels, gaps


def median_gap(snr_db, err_a, err_b, **kw) -> float:
    """Median of :func:`equivalent_snr_gap` over the matched error levels."""
    _, gaps = equivalent_snr_gap(snr_db, err_a, err_b, **kw)
    gaps = gaps[np.isfinite(gaps)]
    return float(np.median(gaps)) if gaps.size else math.nan
