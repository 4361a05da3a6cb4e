"""Batch execution over (protocol, t_d, seed) and per-run output files."""

from __future__ import annotations

import csv
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ScenarioConfig, dump_config
from .invariants import check_trace
from .kernel import RunResult, Simulator
from .metrics import battery_stats, ccdf, connected_components

log = logging.getLogger(__name__)

DIFFUSION_HEADER = ["time_s", "mean_fraction"]
COMPONENTS_HEADER = ["component_id", "size"]
CCDF_HEADER = ["threshold", "fraction"]
BATTERY_HEADER = ["node", "final_level_or_discharge_time"]
TRACE_HEADER = ["time", "node", "kind", "payload"]


def run_dirname(protocol: str, t_d: float, seed: int) -> str:
    return f"{protocol}_td{t_d:g}_seed{seed}"


def simulate(cfg: ScenarioConfig, protocol: str, t_d: float, seed: int, check_invariants: bool = False) -> RunResult:
    sim = Simulator(
        cfg.sim_config(t_d, seed, check_invariants),
        protocol,
        cfg.scenario,
        cfg.params_for(t_d),
        cfg.battery,
    )
    return sim.run()


def battery_values(result: RunResult) -> tuple[np.ndarray, str]:
    """Final levels, or normalised discharge times when every node died."""
    if len(result.death_time) and not result.alive.any():
        duration = result.config.duration
        return result.death_time / duration, "discharge_time"
    return result.battery, "final_level"


def summarize(cfg: ScenarioConfig, result: RunResult) -> dict:
    alive = np.flatnonzero(result.alive).tolist()
    scope = alive if alive else list(range(result.config.node_count))
    comps = connected_components(result.graph, scope)
    values, measure = battery_values(result)
    stats = battery_stats(values.tolist()) if len(values) else None
    diffusion = result.diffusion
    return {
        "scenario": cfg.name,
        "protocol": result.protocol,
        "t_d": result.config.t_d,
        "seed": result.config.seed,
        "node_count": result.config.node_count,
        "duration_s": result.config.duration,
        "alive_nodes": len(alive),
        "component_count": comps.count,
        "largest_fraction": comps.largest_fraction,
        "battery_measure": measure,
        "battery_mean": stats.mean if stats else None,
        "battery_median": stats.median if stats else None,
        "battery_variance": stats.variance if stats else None,
        "final_diffusion": diffusion[-1][1] if diffusion else None,
        "counters": result.counters,
    }


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_outputs(cfg: ScenarioConfig, result: RunResult, out: Path, violations: Optional[list] = None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    single = cfg.single(result.protocol, result.config.t_d, result.config.seed)
    (out / "config.yaml").write_text(dump_config(single))

    _write_csv(out / "diffusion.csv", DIFFUSION_HEADER, ((f"{t:g}", repr(f)) for t, f in result.diffusion))

    alive = np.flatnonzero(result.alive).tolist() or list(range(result.config.node_count))
    comps = connected_components(result.graph, alive)
    _write_csv(out / "components.csv", COMPONENTS_HEADER, ((k, size) for k, (size, _) in enumerate(comps.components)))

    _write_csv(out / "ccdf.csv", CCDF_HEADER, ((repr(t), repr(f)) for t, f in ccdf(result.reach.probabilities())))

    values, _ = battery_values(result)
    _write_csv(out / "battery.csv", BATTERY_HEADER, ((i, repr(float(v))) for i, v in enumerate(values)))

    if result.trace:
        _write_csv(out / "trace.csv", TRACE_HEADER, (ev.row() for ev in result.trace))

    summary = summarize(cfg, result)
    if violations is not None:
        summary["invariant_violations"] = len(violations)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


@dataclass(frozen=True)
class RunOutcome:
    protocol: str
    t_d: float
    seed: int
    ok: bool
    summary: Optional[dict] = None
    error: Optional[str] = None
    violations: tuple[str, ...] = ()


def run_one(cfg: ScenarioConfig, protocol: str, t_d: float, seed: int, out_root: Path) -> RunOutcome:
    try:
        result = simulate(cfg, protocol, t_d, seed, check_invariants=cfg.trace)
        violations = None
        if cfg.trace:
            found = check_trace(result.trace, protocol, t_d, cfg.protocol_params.res_th)
            violations = [str(v) for v in found] + list(result.violations)
        summary = write_outputs(cfg, result, out_root / run_dirname(protocol, t_d, seed), violations)
        return RunOutcome(protocol, t_d, seed, True, summary, violations=tuple(violations or ()))
    except Exception:  # a failing run must not take the batch down
        return RunOutcome(protocol, t_d, seed, False, error=traceback.format_exc())


def run_batch(cfg: ScenarioConfig, jobs: int = 1, out: Optional[Path] = None) -> tuple[int, list[RunOutcome]]:
    """Run every combination; exit status 0 iff all runs completed."""
    out_root = Path(out if out is not None else cfg.output)
    out_root.mkdir(parents=True, exist_ok=True)
    combos = cfg.grid()
    if jobs > 1 and len(combos) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_one, cfg, p, td, s, out_root) for p, td, s in combos]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [run_one(cfg, p, td, s, out_root) for p, td, s in combos]
    failed = 0
    for o in outcomes:
        name = run_dirname(o.protocol, o.t_d, o.seed)
        if o.ok:
            log.info("%s: %d component(s), diffusion %s", name, o.summary["component_count"], o.summary["final_diffusion"])
            for v in o.violations:
                log.warning("%s: %s", name, v)
        else:
            failed += 1
            log.error("%s failed:\n%s", name, o.error)
    return (1 if failed else 0), outcomes
