"""Experiment orchestration: Monte Carlo drops, CDFs/quantiles, the
communication-sensing trade-off region sweep and deterministic file outputs.

All randomness derives from (master_seed, drop_id, stream tag), so a run is
byte-reproducible.  Outputs are long-format CSVs
(drop_id, mode, entity_id, metric, value) plus a JSON manifest holding the
fully resolved configuration.
"""

import csv
import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import streams
from .errors import CfIsacError, ConfigurationError, DegenerateLinkError, DomainError
from .scenario import ScenarioConfig, build_scenario
from .comm_metrics import PowerAllocation, achievable_rate
from .sensing import (
    build_glrt_workspace,
    effective_snr,
    receive_snr,
    sample_symbols,
    sensing_rate,
    target_channel_stack,
    transmit_signals,
)
from .channels import sample_realization
from . import power_control as pc

MODE_ORDER = ["upc", "sopc_comm", "sopc_sense", "jopc_cp", "jopc_sp"]
_KNOWN_MODES = {"upc", "sopc", "jopc_cp", "jopc_sp"}


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    n_drops: int = 100
    modes: list = field(default_factory=lambda: ["upc", "sopc", "jopc_cp", "jopc_sp"])
    gamma0: float = 0.0          # SINR floor for jopc_sp
    gamma_bar0: float = 0.0      # effective-SNR floor for jopc_cp
    threshold_grid: list = field(default_factory=lambda: [0.5])
    T_grid: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    quantile: float = 0.10
    output_dir: str = "."
    master_seed: int = 0
    bisection_tol: float = 1e-3
    sca_tol: float = 1e-4
    sca_max_iters: int = 30

    def validate(self):
        self.scenario.validate()
        if self.n_drops < 1:
            raise ConfigurationError("n_drops must be at least 1")
        if not self.modes:
            raise ConfigurationError("at least one mode is required")
        unknown = set(self.modes) - _KNOWN_MODES
        if unknown:
            raise ConfigurationError(f"unknown modes: {sorted(unknown)}")
        if not (0.0 < self.quantile < 1.0):
            raise ConfigurationError("quantile must lie in (0, 1)")
        if not self.threshold_grid or not self.T_grid:
            raise ConfigurationError("grids must be nonempty")
        if any(not (0.0 < f < 1.0) for f in self.threshold_grid):
            raise ConfigurationError("threshold fractions must lie in (0, 1)")
        if any(not (0.0 <= t <= 1.0) for t in self.T_grid):
            raise ConfigurationError("time shares must lie in [0, 1]")
        if self.gamma0 < 0 or self.gamma_bar0 < 0:
            raise ConfigurationError("QoS floors must be nonnegative")
        return self


@dataclass
class DropRecord:
    drop_id: int
    mode: str
    allocation: PowerAllocation
    status: str
    objective: float
    sinr: np.ndarray          # per UE
    rate: np.ndarray          # per UE, bit/s (unscaled by time shares)
    esnr: np.ndarray          # per region
    sensing_rate: np.ndarray  # per region, bit/s
    receive_snr: np.ndarray   # per region (one channel realization)
    elapsed: float


def empirical_cdf(values):
    """Right-continuous empirical CDF as (sorted values, probabilities i/n)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("empirical CDF of an empty sample")
    x = np.sort(values)
    p = np.arange(1, x.size + 1) / x.size
    return x, p


def quantile(values, q):
    """Order statistic at index ceil(q n) (lowest value attaining CDF >= q)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("quantile of an empty sample")
    if not (0.0 < q < 1.0):
        raise DomainError("quantile level must lie in (0, 1)")
    x = np.sort(values)
    return float(x[int(np.ceil(q * x.size)) - 1])


# ---------------------------------------------------------------------------
# Per-drop pipeline.
# ---------------------------------------------------------------------------


def _drop_seed(config, drop_id):
    return (config.master_seed, drop_id)


def _qos(config, mode, **kw):
    return pc.QosProblemSpec(mode=mode, bisection_tol=config.bisection_tol,
                             sca_tol=config.sca_tol,
                             sca_max_iters=config.sca_max_iters, **kw)


def _mode_metrics(stats, alloc, terms, realization, x_data, x_sens):
    scenario = stats.scenario
    cfg = scenario.config
    sinr = terms.sinr(alloc, cfg.sigma_z_sq)
    rate = achievable_rate(sinr, cfg.tau_c, cfg.tau_p, cfg.bandwidth_B)
    esnr = effective_snr(alloc, stats.quadratic, cfg.sigma_z_sq)
    s_rate = sensing_rate(esnr, cfg.tau_s, cfg.tau_c, cfg.bandwidth_B)
    signals = transmit_signals(scenario, stats.geometry, stats.estimation,
                               realization, alloc, x_data, x_sens)
    rsnr = np.full(cfg.S, np.nan)
    for i in range(cfg.S):
        stack = target_channel_stack(scenario, stats.geometry, signals, i)
        workspace = build_glrt_workspace(stack, cfg.sigma_z_sq)
        try:
            rsnr[i] = receive_snr(workspace, stats.geometry.R[i])
        except DegenerateLinkError:
            pass
    return sinr, rate, esnr, s_rate, rsnr


def run_drop(config, drop_id):
    """All requested modes on one drop; returns (records, stats, allocations)."""
    seed = _drop_seed(config, drop_id)
    scenario = build_scenario(config.scenario, seed=seed)
    stats = pc.build_drop_stats(scenario, streams.stream(seed, streams.BEAM_COVARIANCE))
    cfg = scenario.config
    realization = sample_realization(
        scenario, stats.correlation, stats.estimation, stats.pilots, stats.geometry,
        np.ones(cfg.S, dtype=bool), streams.stream(seed, streams.CHANNELS),
    )
    x_data, x_sens = sample_symbols(cfg.K, cfg.S, scenario.n_tx, cfg.tau_s,
                                    streams.stream(seed, streams.SENSING))

    results = {}
    if "upc" in config.modes:
        t0 = time.perf_counter()
        alloc = pc.upc(scenario)
        results["upc"] = (alloc, "optimal", float(stats.terms.sinr(
            alloc, cfg.sigma_z_sq).min()), time.perf_counter() - t0)
    if "sopc" in config.modes:
        t0 = time.perf_counter()
        comm_res, sense_res = pc.sopc(_qos(config, pc.COMM_ONLY, T=1.0), stats)
        dt = time.perf_counter() - t0
        results["sopc_comm"] = (comm_res.allocation, comm_res.status,
                                comm_res.objective, dt / 2)
        results["sopc_sense"] = (sense_res.allocation, sense_res.status,
                                 sense_res.objective, dt / 2)
    if "jopc_cp" in config.modes:
        extra = [results["sopc_comm"][0]] if "sopc_comm" in results else []
        t0 = time.perf_counter()
        res = pc.jopc(_qos(config, pc.COMM_PRIORITIZED, gamma_bar0=config.gamma_bar0),
                      stats, extra_starts=extra)
        results["jopc_cp"] = (res.allocation, res.status, res.objective,
                              time.perf_counter() - t0)
    if "jopc_sp" in config.modes:
        extra = [results["sopc_sense"][0]] if "sopc_sense" in results else []
        t0 = time.perf_counter()
        res = pc.jopc(_qos(config, pc.SENSING_PRIORITIZED, gamma0=config.gamma0),
                      stats, extra_starts=extra)
        results["jopc_sp"] = (res.allocation, res.status, res.objective,
                              time.perf_counter() - t0)

    records = []
    for mode in MODE_ORDER:
        if mode not in results:
            continue
        alloc, status, objective, elapsed = results[mode]
        terms = stats.terms_comm if mode == "sopc_comm" else stats.terms
        sinr, rate, esnr, s_rate, rsnr = _mode_metrics(
            stats, alloc, terms, realization, x_data, x_sens)
        records.append(DropRecord(
            drop_id=drop_id, mode=mode, allocation=alloc, status=status,
            objective=objective, sinr=sinr, rate=rate, esnr=esnr,
            sensing_rate=s_rate, receive_snr=rsnr, elapsed=elapsed,
        ))
    return records, stats, {m: r[0] for m, r in results.items()}


# ---------------------------------------------------------------------------
# Output files.
# ---------------------------------------------------------------------------


def _fmt(v):
    return f"{v:.17g}"


def _record_rows(rec):
    rows = [(rec.drop_id, rec.mode, -1, "objective", _fmt(rec.objective)),
            (rec.drop_id, rec.mode, -1, "status", rec.status)]
    for k, v in enumerate(rec.sinr):
        rows.append((rec.drop_id, rec.mode, k, "sinr", _fmt(v)))
    for k, v in enumerate(rec.rate):
        rows.append((rec.drop_id, rec.mode, k, "rate", _fmt(v)))
    for i, v in enumerate(rec.esnr):
        rows.append((rec.drop_id, rec.mode, i, "esnr", _fmt(v)))
    for i, v in enumerate(rec.sensing_rate):
        rows.append((rec.drop_id, rec.mode, i, "sensing_rate", _fmt(v)))
    for i, v in enumerate(rec.receive_snr):
        rows.append((rec.drop_id, rec.mode, i, "receive_snr", _fmt(v)))
    return rows


def _prepare_output(config):
    import os
    os.makedirs(config.output_dir, exist_ok=True)
    probe = os.path.join(config.output_dir, ".write_probe")
    with open(probe, "w") as fh:
        fh.write("ok")
    os.remove(probe)


def _write_manifest(config, path, files):
    manifest = {
        "package": "cfisac",
        "config": asdict(config),
        "files": sorted(files),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(config):
    """Run all drops and modes; write run.csv and manifest.json; return records."""
    import os
    config.validate()
    _prepare_output(config)
    records = []
    for d in range(config.n_drops):
        try:
            recs, _, _ = run_drop(config, d)
            records.extend(recs)
        except CfIsacError as exc:  # partial failures recorded, not fatal
            records.append(DropRecord(
                drop_id=d, mode="error", allocation=None, status=f"error:{exc}",
                objective=np.nan, sinr=np.zeros(0), rate=np.zeros(0),
                esnr=np.zeros(0), sensing_rate=np.zeros(0),
                receive_snr=np.zeros(0), elapsed=0.0,
            ))
    csv_path = os.path.join(config.output_dir, "run.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["drop_id", "mode", "entity_id", "metric", "value"])
        for rec in records:
            writer.writerows(_record_rows(rec))
    _write_manifest(config, os.path.join(config.output_dir, "manifest.json"),
                    ["run.csv"])
    return records


def write_cdfs(config, records=None):
    """Per-mode empirical CDFs of the UE rates and region sensing rates."""
    import os
    config.validate()
    if records is None:
        records = run_experiment(config)
    _prepare_output(config)
    path = os.path.join(config.output_dir, "cdf.csv")
    modes = [m for m in MODE_ORDER
             if any(r.mode == m for r in records)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "metric", "value", "probability"])
        for mode in modes:
            recs = [r for r in records if r.mode == mode]
            for metric, getter in [("rate", lambda r: r.rate),
                                   ("sensing_rate", lambda r: r.sensing_rate)]:
                pooled = np.concatenate([getter(r) for r in recs])
                pooled = pooled[np.isfinite(pooled)]
                if pooled.size == 0:
                    continue
                x, p = empirical_cdf(pooled)
                for v, prob in zip(x, p):
                    writer.writerow([mode, metric, _fmt(v), _fmt(prob)])
    _write_manifest(config, os.path.join(config.output_dir, "manifest.json"),
                    ["cdf.csv"])
    return path


# ---------------------------------------------------------------------------
# Communication-sensing trade-off region.
# ---------------------------------------------------------------------------


def _blend(comm_alloc, sense_alloc, share, scenario, free_mask):
    b = (np.sqrt(1.0 - share) * comm_alloc.to_b()
         + np.sqrt(share) * sense_alloc.to_b())
    b = pc._sanitize(b, scenario, free_mask)
    cfg = scenario.config
    return PowerAllocation.from_b(b, cfg.K, cfg.S, scenario.n_tx)


def cs_region(config):
    """Boundary points of the achievable (comm rate, sensing rate) region.

    The separate-design branch sweeps the time share T; the joint branch
    contributes its two corner runs plus, per threshold fraction f, a
    comm-prioritized run whose sensing floor is f times the quantile sensing
    level achieved by the separate sensing design.  Levels with fewer than
    half the drops feasible are dropped.  Returns a dict of point lists and
    writes region.csv.
    """
    import os
    config.validate()
    _prepare_output(config)
    cfg = config.scenario
    prelog = (cfg.tau_c - cfg.tau_p) / cfg.tau_c * cfg.bandwidth_B

    drops = []
    for d in range(config.n_drops):
        seed = _drop_seed(config, d)
        scenario = build_scenario(cfg, seed=seed)
        stats = pc.build_drop_stats(scenario,
                                    streams.stream(seed, streams.BEAM_COVARIANCE))
        comm_res, sense_res = pc.sopc(_qos(config, pc.COMM_ONLY, T=1.0), stats)
        cp = pc.jopc(_qos(config, pc.COMM_PRIORITIZED, gamma_bar0=0.0), stats,
                     extra_starts=[comm_res.allocation])
        sp = pc.jopc(_qos(config, pc.SENSING_PRIORITIZED, gamma0=0.0), stats,
                     extra_starts=[sense_res.allocation])
        sig = cfg.sigma_z_sq
        drops.append({
            "stats": stats,
            "comm_alloc": comm_res.allocation,
            "sense_alloc": sense_res.allocation,
            "gamma_c": comm_res.objective,
            "gbar_s": sense_res.objective,
            "gamma_cp": cp.objective,
            "gbar_cp": float(effective_snr(cp.allocation, stats.quadratic, sig).min()),
            "gamma_sp": float(stats.terms.sinr(sp.allocation, sig).min()),
            "gbar_sp": sp.objective,
        })

    q = config.quantile

    def qv(key):
        return quantile([d[key] for d in drops], q)

    def comm_rate(gamma, share=1.0):
        return share * prelog * np.log2(1.0 + gamma)

    def sense_rate(gbar, share=1.0):
        return share * cfg.bandwidth_B * np.log2(1.0 + gbar)

    sopc_points = []
    for T in config.T_grid:
        sopc_points.append((
            T,
            comm_rate(qv("gamma_c"), 1.0 - T),
            sense_rate(qv("gbar_s"), T),
        ))

    jopc_points = [
        ("corner_cp", comm_rate(qv("gamma_cp")), sense_rate(qv("gbar_cp"))),
        ("corner_sp", comm_rate(qv("gamma_sp")), sense_rate(qv("gbar_sp"))),
    ]
    gbar_ref = qv("gbar_s")
    for f in config.threshold_grid:
        floor = f * gbar_ref
        rates, gbars = [], []
        for d in drops:
            stats = d["stats"]
            scenario = stats.scenario
            comm_mask, sense_mask = pc.free_masks(scenario)
            starts = [
                _blend(d["comm_alloc"], d["sense_alloc"], f, scenario,
                       comm_mask | sense_mask),
                d["comm_alloc"],
            ]
            res = pc.jopc(_qos(config, pc.COMM_PRIORITIZED, gamma_bar0=floor),
                          stats, extra_starts=starts)
            if res.status != pc.OPTIMAL:
                continue
            sig = scenario.config.sigma_z_sq
            rates.append(res.objective)
            gbars.append(float(effective_snr(res.allocation, stats.quadratic,
                                             sig).min()))
        if len(rates) < 0.5 * config.n_drops:
            continue
        jopc_points.append((
            f"threshold_{f:g}",
            comm_rate(quantile(rates, q)),
            sense_rate(quantile(gbars, q)),
        ))

    path = os.path.join(config.output_dir, "region.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["branch", "parameter", "comm_rate", "sensing_rate"])
        for label, r, s in jopc_points:
            writer.writerow(["jopc", label, _fmt(r), _fmt(s)])
        for T, r, s in sopc_points:
            writer.writerow(["sopc", _fmt(T), _fmt(r), _fmt(s)])
    _write_manifest(config, os.path.join(config.output_dir, "manifest.json"),
                    ["region.csv"])
    return {"jopc": jopc_points, "sopc": sopc_points}
