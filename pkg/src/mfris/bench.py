"""Benchmark harness: scenario files, seeded Monte Carlo sweeps, CSV result
tables, run manifests, and summary statistics.

Scenario files are flat "dotted.key = value" text; see the shipped
scenarios/ directory for the full key schema.
"""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from .architectures import FeasibleSet
from .channels import GeometryScene, generate_channels
from .core import (Architecture, ConfigError, MfrisError, Strategy,
                   SystemConfig, dbm_to_watt, sum_rate)
from .optimizer import (SolverOptions, alternating_optimize, exhaustive_oracle,
                        optimize_precoder)

SWEEP_VARS = ("p_total_dbm", "n_elements")


@dataclass
class Scenario:
    name: str
    n_antennas: int
    n_users: int
    n_elements: int
    p_total_dbm: float
    noise_rx_dbm: float
    noise_ris_dbm: float
    beta_max: float
    architectures: list[Architecture]
    strategy: Strategy
    sweep_var: str
    sweep_values: list[float]
    n_trials: int
    base_seed: int
    scene: GeometryScene
    options: SolverOptions
    phase_bits: int = 0
    amp_levels: int = 0
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sweep_values:
            raise ConfigError("sweep.values: list must be non-empty")
        if list(self.sweep_values) != sorted(set(self.sweep_values)):
            raise ConfigError("sweep.values: list must be strictly increasing")
        if self.n_trials < 1:
            raise ConfigError("n_trials: must be >= 1")
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep.variable: must be one of {SWEEP_VARS}")


def _parse_value(key: str, text: str):
    parts = [p.strip() for p in text.split(",")] if "," in text else [text.strip()]
    out = []
    for p in parts:
        try:
            out.append(int(p))
            continue
        except ValueError:
            pass
        try:
            out.append(float(p))
            continue
        except ValueError:
            out.append(p)
    return out if len(out) > 1 else out[0]


def parse_scenario(path: str) -> Scenario:
    """Parse one scenario file; raises ConfigError naming the offending key."""
    entries: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            if key in entries:
                raise ConfigError(f"{key}: duplicate key")
            entries[key] = _parse_value(key, val.strip())
    return scenario_from_dict(entries)


def _pop(entries: dict, key: str, default=None, required: bool = False):
    if key in entries:
        return entries.pop(key)
    if required:
        raise ConfigError(f"{key}: missing required key")
    return default


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


def scenario_from_dict(entries: dict) -> Scenario:
    raw = dict(entries)
    entries = dict(entries)
    try:
        name = str(_pop(entries, "name", required=True))
        sweep_var = str(_pop(entries, "sweep.variable", required=True))
        sweep_values = [float(v) for v in _as_list(_pop(entries, "sweep.values", required=True))]
        archs = [Architecture(str(a)) for a in _as_list(_pop(entries, "architectures", required=True))]
        n_trials = int(_pop(entries, "n_trials", 1))
        base_seed = int(_pop(entries, "base_seed", 0))

        n_users = int(_pop(entries, "cfg.n_users", required=True))
        user_pos = []
        for k in range(1, n_users + 1):
            pos = _pop(entries, f"scene.user_pos.{k}", required=True)
            user_pos.append([float(x) for x in _as_list(pos)])

        scene_kwargs = dict(
            bs_pos=[float(x) for x in _as_list(_pop(entries, "scene.bs_pos", required=True))],
            ris_pos=[float(x) for x in _as_list(_pop(entries, "scene.ris_pos", required=True))],
            user_pos=user_pos,
        )
        for f in ("ris_rotation", "pl_exp_direct", "pl_exp_bs_ris",
                  "pl_exp_ris_user", "pathloss_ref_db", "rician_k_direct",
                  "rician_k_bs_ris", "rician_k_ris_user"):
            v = _pop(entries, f"scene.{f}")
            if v is not None:
                scene_kwargs[f] = float(v)
        scene = GeometryScene(**scene_kwargs)

        opt_kwargs = {}
        opt_fields = {f.name: f.type for f in fields(SolverOptions)}
        for key in list(entries):
            if key.startswith("options."):
                fname = key[len("options."):]
                if fname not in opt_fields:
                    raise ConfigError(f"{key}: unknown solver option")
                v = entries.pop(key)
                if fname == "power_split_grid":
                    opt_kwargs[fname] = tuple(float(x) for x in _as_list(v))
                elif fname == "profile_block":
                    opt_kwargs[fname] = str(v)
                elif fname in ("tol", "profile_step_init", "backtrack_factor"):
                    opt_kwargs[fname] = float(v)
                else:
                    opt_kwargs[fname] = int(v)
        options = SolverOptions(**opt_kwargs)

        noise_rx_dbm = float(_pop(entries, "cfg.noise_rx_dbm", required=True))
        scenario = Scenario(
            name=name,
            n_antennas=int(_pop(entries, "cfg.n_antennas", required=True)),
            n_users=n_users,
            n_elements=int(_pop(entries, "cfg.n_elements", required=True)),
            p_total_dbm=float(_pop(entries, "cfg.p_total_dbm", required=True)),
            noise_rx_dbm=noise_rx_dbm,
            noise_ris_dbm=float(_pop(entries, "cfg.noise_ris_dbm", noise_rx_dbm)),
            beta_max=float(_pop(entries, "cfg.beta_max", 1.0)),
            architectures=archs,
            strategy=Strategy(str(_pop(entries, "cfg.strategy", "es"))),
            sweep_var=sweep_var,
            sweep_values=sweep_values,
            n_trials=n_trials,
            base_seed=base_seed,
            scene=scene,
            options=options,
            phase_bits=int(_pop(entries, "cfg.phase_bits", 0)),
            amp_levels=int(_pop(entries, "cfg.amp_levels", 0)),
            raw=raw,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    if entries:
        raise ConfigError(f"{sorted(entries)[0]}: unknown key")
    return scenario


def build_config(scenario: Scenario, architecture: Architecture,
                 sweep_value: float) -> SystemConfig:
    """Resolve the per-row SystemConfig for one architecture and sweep point."""
    p_total = dbm_to_watt(scenario.p_total_dbm)
    n_elements = scenario.n_elements
    if scenario.sweep_var == "p_total_dbm":
        p_total = dbm_to_watt(sweep_value)
    else:
        n_elements = int(sweep_value)
    amplifying = architecture.amplifying
    return SystemConfig(
        n_antennas=scenario.n_antennas,
        n_users=scenario.n_users,
        n_elements=n_elements,
        p_total=p_total,
        p_bs=p_total / 2.0 if amplifying else p_total,
        p_ris=p_total / 2.0 if amplifying else 0.0,
        noise_rx=dbm_to_watt(scenario.noise_rx_dbm),
        noise_ris=dbm_to_watt(scenario.noise_ris_dbm) if amplifying else 0.0,
        beta_max=scenario.beta_max if amplifying else 1.0,
        architecture=architecture,
        strategy=scenario.strategy,
        phase_bits=scenario.phase_bits,
    )


def run_row(scenario: Scenario, architecture: Architecture,
            sweep_value: float, trial: int) -> dict:
    """Run one (architecture, sweep value, trial) cell."""
    seed = scenario.base_seed + trial
    row = {
        "scenario": scenario.name,
        "architecture": architecture.value,
        "strategy": scenario.strategy.value,
        "sweep_var": scenario.sweep_var,
        "sweep_value": sweep_value,
        "trial": trial,
        "seed": seed,
    }
    t0 = time.perf_counter()
    try:
        cfg = build_config(scenario, architecture, sweep_value)
        channels = generate_channels(cfg, scenario.scene, seed)
        fset = FeasibleSet.from_config(cfg)
        if scenario.amp_levels:
            fset = replace(fset, amp_levels=scenario.amp_levels)
        w, prof, report = alternating_optimize(channels, cfg, fset,
                                               scenario.options, seed)
    except MfrisError as exc:
        row.update(sum_rate_bps_hz=None, rates=[None] * scenario.n_users,
                   p_bs_w=None, p_ris_w=None, iterations=None,
                   status=f"error:{exc}", wall_time_s=time.perf_counter() - t0)
        return row
    trace = np.asarray(report.objective_trace)
    row.update(
        sum_rate_bps_hz=float(trace[-1]),
        rates=[float(r) for r in report.final_rates],
        p_bs_w=float(report.extra["p_bs"]),
        p_ris_w=float(report.extra["p_ris"]),
        iterations=int(report.iterations),
        status="ok",
        wall_time_s=time.perf_counter() - t0,
        # smallest step of the best-so-far trace; not a CSV column, but kept
        # on the row so monotonicity can be audited across whole sweeps
        trace_min_step=float(np.min(np.diff(trace))) if trace.size > 1 else 0.0,
    )
    return row


def _cells(scenario: Scenario):
    for arch in scenario.architectures:
        for value in scenario.sweep_values:
            for trial in range(scenario.n_trials):
                yield arch, value, trial


def run_scenario(scenario: Scenario, jobs: int = 1) -> list[dict]:
    """Run all cells; rows come back in deterministic cell order."""
    cells = list(_cells(scenario))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_row, [scenario] * len(cells),
                                 *zip(*cells), chunksize=1))
    else:
        rows = [run_row(scenario, *cell) for cell in cells]
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_header(n_users: int) -> list[str]:
    return (["scenario", "architecture", "strategy", "sweep_var", "sweep_value",
             "trial", "seed", "sum_rate_bps_hz"]
            + [f"rate_user_{k}" for k in range(1, n_users + 1)]
            + ["p_bs_w", "p_ris_w", "iterations", "status", "wall_time_s"])


def rows_to_csv(rows: list[dict], n_users: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(n_users))
    for row in rows:
        writer.writerow(
            [_fmt(row[c]) for c in ("scenario", "architecture", "strategy",
                                    "sweep_var", "sweep_value", "trial", "seed",
                                    "sum_rate_bps_hz")]
            + [_fmt(r) for r in row["rates"]]
            + [_fmt(row[c]) for c in ("p_bs_w", "p_ris_w", "iterations",
                                      "status", "wall_time_s")])
    return buf.getvalue()


def manifest(scenario: Scenario, rows: list[dict]) -> dict:
    """Everything needed to regenerate any CSV row bit-identically."""
    return {
        "version": __version__,
        "scenario": {k: v for k, v in sorted(scenario.raw.items())},
        "rows": [
            {"index": i, "architecture": r["architecture"],
             "sweep_var": r["sweep_var"], "sweep_value": r["sweep_value"],
             "trial": r["trial"], "seed": r["seed"]}
            for i, r in enumerate(rows)
        ],
    }


def summarize(rows: list[dict]) -> list[dict]:
    """Per (architecture, sweep value): mean/std/count of sum rate.

    Failed rows are excluded and counted; all-failed groups are dropped.
    """
    if not rows:
        raise ValueError("no rows to summarize")
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["architecture"], row["sweep_value"]), []).append(row)
    out = []
    for (arch, value), members in sorted(groups.items()):
        ok = [r for r in members if r["status"] == "ok"]
        failed = len(members) - len(ok)
        if not ok:
            out.append({"architecture": arch, "sweep_value": value,
                        "sweep_var": members[0]["sweep_var"], "n_ok": 0,
                        "n_failed": failed, "mean_sum_rate": None,
                        "std_sum_rate": None})
            continue
        rates = np.array([float(r["sum_rate_bps_hz"]) for r in ok])
        out.append({
            "architecture": arch,
            "sweep_value": value,
            "sweep_var": members[0]["sweep_var"],
            "n_ok": len(ok),
            "n_failed": failed,
            "mean_sum_rate": float(rates.mean()),
            "std_sum_rate": float(rates.std(ddof=0)),
        })
    if all(r["n_ok"] == 0 for r in out):
        raise ValueError("every group failed; nothing to summarize")
    return out


def summary_to_csv(summary: list[dict]) -> str:
    buf = io.StringIO()
    cols = ["architecture", "sweep_var", "sweep_value", "n_ok", "n_failed",
            "mean_sum_rate", "std_sum_rate"]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in summary:
        writer.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def read_results_csv(path: str) -> tuple[list[dict], int]:
    """Load a results CSV back into row dicts; returns (rows, n_users)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        n_users = sum(1 for c in cols if c.startswith("rate_user_"))
        rows = []
        for rec in reader:
            row = dict(rec)
            row["sweep_value"] = float(rec["sweep_value"])
            row["trial"] = int(rec["trial"])
            row["seed"] = int(rec["seed"])
            row["sum_rate_bps_hz"] = (float(rec["sum_rate_bps_hz"])
                                      if rec["sum_rate_bps_hz"] else None)
            row["rates"] = [float(rec[f"rate_user_{k}"]) if rec[f"rate_user_{k}"] else None
                            for k in range(1, n_users + 1)]
            rows.append(row)
    return rows, n_users


def oracle_check(scenario: Scenario) -> list[dict]:
    """Exhaustive-search comparison on a small discrete instance.

    For every trial seed, reports the oracle rate, the AO rate, and their
    ratio; the oracle must dominate on every seed.
    """
    if scenario.phase_bits <= 0 or scenario.amp_levels <= 0:
        raise ConfigError("cfg.phase_bits: oracle-check needs discrete phases and amplitudes")
    results = []
    arch = scenario.architectures[0]
    for trial in range(scenario.n_trials):
        seed = scenario.base_seed + trial
        cfg = build_config(scenario, arch, scenario.sweep_values[0])
        cfg = replace(cfg, p_bs=cfg.p_total, p_ris=0.0)
        channels = generate_channels(cfg, scenario.scene, seed)
        fset = FeasibleSet(architecture=arch, beta_max=cfg.beta_max,
                           phase_bits=cfg.phase_bits,
                           amp_levels=scenario.amp_levels)
        _, _, oracle_rate = exhaustive_oracle(
            channels, cfg, fset, 2 ** cfg.phase_bits, scenario.amp_levels,
            scenario.options)
        _, prof_ao, _ = alternating_optimize(channels, cfg, fset,
                                             scenario.options, seed)
        # score the AO profile with the oracle's cold-start precoder solve so
        # the comparison isolates the profile choice; the profile is in the
        # enumerated discrete set, so oracle >= ao holds by construction
        w_ao = optimize_precoder(channels, prof_ao, cfg, None, scenario.options)
        ao_rate = float(sum_rate(w_ao, channels, prof_ao, cfg))
        results.append({"trial": trial, "seed": seed, "oracle": oracle_rate,
                        "ao": ao_rate,
                        "ratio": ao_rate / oracle_rate if oracle_rate > 0 else 1.0})
    return results
