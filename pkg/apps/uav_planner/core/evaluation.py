"""
Evaluation
Solver comparison tables normalized to the exact optimum, omega and K sweeps, runtime tables
"""
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, Field

from core.config import AcoConfig, EnergyParams
from core.executor import SolveExecutor, build_jobs
from core.instances import Instance
from core.models import SolveReport
from services.reports import write_reports, write_table

logger = structlog.get_logger(__name__)

REFERENCE = "exact"
SUMMARY_NAME = "mean"
OMEGA_SWEEP = (0.0, 0.3, 0.6, 0.9)


class ComparisonRow(BaseModel):
    instance: str
    K: int
    energies: Dict[str, float]
    ratios: Dict[str, float]
    wall_clock: Dict[str, float] = Field(default_factory=dict)


class ComparisonTable(BaseModel):
    """Per-instance rows plus one summary row of means"""

    solvers: List[str]
    rows: List[ComparisonRow]
    summary: ComparisonRow
    reports: List[SolveReport] = Field(default_factory=list)

    def all_rows(self) -> List[ComparisonRow]:
        return [*self.rows, self.summary]

    def mean_ratio(self, solver: str) -> float:
        return self.summary.ratios[solver]

    def records(self) -> List[Dict[str, object]]:
        """Flat rows for CSV output"""
        out = []
        for row in self.all_rows():
            record: Dict[str, object] = {"instance": row.instance, "K": row.K}
            for solver in self.solvers:
                record[f"{solver}_energy"] = row.energies[solver]
                record[f"{solver}_ratio"] = row.ratios[solver]
                record[f"{solver}_wall_clock"] = row.wall_clock.get(solver)
            out.append(record)
        return out

    def columns(self) -> List[str]:
        cols = ["instance", "K"]
        for solver in self.solvers:
            cols += [f"{solver}_energy", f"{solver}_ratio", f"{solver}_wall_clock"]
        return cols


def _ordered_solvers(solvers: Sequence[str]) -> List[str]:
    ordered = [REFERENCE]
    ordered += [s for s in solvers if s != REFERENCE and s not in ordered]
    return ordered


def tabulate(reports: Sequence[SolveReport], solvers: Sequence[str]) -> ComparisonTable:
    """Group reports per instance and normalize energies by the exact one"""
    by_instance: Dict[str, Dict[str, SolveReport]] = defaultdict(dict)
    for report in reports:
        by_instance[report.instance_name][report.solver] = report

    rows = []
    for name, per_solver in by_instance.items():
        optimum = per_solver[REFERENCE].energy
        rows.append(
            ComparisonRow(
                instance=name,
                K=len(per_solver[REFERENCE].tour),
                energies={s: per_solver[s].energy for s in solvers},
                ratios={s: per_solver[s].energy / optimum for s in solvers},
                wall_clock={s: per_solver[s].wall_clock for s in solvers},
            )
        )

    ks = sorted({row.K for row in rows})
    summary = ComparisonRow(
        instance=SUMMARY_NAME,
        K=ks[0] if len(ks) == 1 else 0,
        energies={s: float(np.mean([r.energies[s] for r in rows])) for s in solvers},
        ratios={s: float(np.mean([r.ratios[s] for r in rows])) for s in solvers},
        wall_clock={s: float(np.mean([r.wall_clock[s] for r in rows])) for s in solvers},
    )
    return ComparisonTable(solvers=list(solvers), rows=rows, summary=summary, reports=list(reports))


def evaluate(
    instances: Mapping[str, Instance],
    params: EnergyParams,
    policy_arrays: Optional[Dict[str, np.ndarray]] = None,
    baselines: Sequence[str] = ("greedy", "aco"),
    aco: Optional[AcoConfig] = None,
    workers: Optional[int] = None,
) -> ComparisonTable:
    """
    Compare the policy (when given) and baselines against the exact solver

    Instances may have any K; the policy runs without retraining.
    """
    solvers = list(baselines)
    if policy_arrays is not None and "drl" not in solvers:
        solvers.insert(0, "drl")
    solvers = _ordered_solvers(solvers)

    executor = SolveExecutor(params, aco, policy_arrays, workers)
    reports = executor.run(build_jobs(dict(instances), solvers))
    table = tabulate(reports, solvers)
    logger.info("evaluation_finished", instances=len(table.rows), mean_ratios=table.summary.ratios)
    return table


class SweepResult(BaseModel):
    ratio_rows: List[Dict[str, object]]
    runtime_rows: List[Dict[str, object]]
    tables: Dict[str, ComparisonTable]
    reports: List[SolveReport]


RATIO_COLUMNS = ["omega", "K", "solver", "mean_ratio", "instances"]
RUNTIME_COLUMNS = ["K", "solver", "mean_wall_clock", "instances"]


def compare(
    instances: Mapping[str, Instance],
    params: EnergyParams,
    omegas: Sequence[float] = OMEGA_SWEEP,
    solvers: Sequence[str] = ("greedy", "aco"),
    policy_arrays: Optional[Dict[str, np.ndarray]] = None,
    aco: Optional[AcoConfig] = None,
    workers: Optional[int] = None,
) -> SweepResult:
    """
    Mean ratio per (omega, K, solver) and mean wall clock per (K, solver)

    A corpus mixing several K yields the K sweep; several omegas yield the
    omega sweep.
    """
    by_k: Dict[int, Dict[str, Instance]] = defaultdict(dict)
    for name, instance in instances.items():
        by_k[instance.K][name] = instance

    ratio_rows: List[Dict[str, object]] = []
    timings: Dict[tuple, List[float]] = defaultdict(list)
    tables: Dict[str, ComparisonTable] = {}
    reports: List[SolveReport] = []
    for omega in omegas:
        weighted = params.with_omega(omega)
        for K in sorted(by_k):
            table = evaluate(by_k[K], weighted, policy_arrays, solvers, aco, workers)
            tables[f"omega={omega:g},K={K}"] = table
            reports.extend(table.reports)
            for solver in table.solvers:
                ratio_rows.append(
                    {
                        "omega": float(omega),
                        "K": K,
                        "solver": solver,
                        "mean_ratio": table.mean_ratio(solver),
                        "instances": len(table.rows),
                    }
                )
                timings[(K, solver)].extend(row.wall_clock[solver] for row in table.rows)

    runtime_rows = [
        {"K": K, "solver": solver, "mean_wall_clock": float(np.mean(values)), "instances": len(values)}
        for (K, solver), values in sorted(timings.items())
    ]
    return SweepResult(ratio_rows=ratio_rows, runtime_rows=runtime_rows, tables=tables, reports=reports)


def write_sweep(result: SweepResult, out_dir: str | Path):
    """ratios.csv, runtime.csv and reports.csv under `out_dir`"""
    out_dir = Path(out_dir)
    write_table(out_dir / "ratios.csv", RATIO_COLUMNS, result.ratio_rows)
    write_table(out_dir / "runtime.csv", RUNTIME_COLUMNS, result.runtime_rows)
    write_reports(out_dir / "reports.csv", result.reports)
