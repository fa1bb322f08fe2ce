"""
CSV Reports
Versioned solve-report rows, generic result tables and the training log
"""
import csv
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import structlog

from core.config import EnergyParams, settings
from core.energy import total_weighted_energy
from core.errors import StorageError
from core.instances import Instance
from core.models import SolveReport, Tour

logger = structlog.get_logger(__name__)

REPORT_COLUMNS = [
    "schema_version",
    "instance",
    "solver",
    "K",
    "omega",
    "seed",
    "params_hash",
    "tour",
    "energy",
    "ground_intra",
    "ground_ch_tx",
    "uav_flight",
    "uav_collect",
    "wall_clock",
]

TRAINING_LOG_COLUMNS = ["step", "mean_reward", "mean_energy", "grad_norm", "critic_loss", "eval_ratio"]

_FLOAT_COLUMNS = {"omega", "energy", "ground_intra", "ground_ch_tx", "uav_flight", "uav_collect", "wall_clock"}


def format_float(value: Optional[float]) -> str:
    """Shortest decimal that reads back as the identical double (at most 17 digits)"""
    if value is None:
        return ""
    return repr(float(value))


def report_row(report: SolveReport) -> Dict[str, Any]:
    b = report.breakdown
    return {
        "schema_version": settings.CSV_SCHEMA_VERSION,
        "instance": report.instance_name,
        "solver": report.solver,
        "K": len(report.tour),
        "omega": format_float(report.fingerprint.omega),
        "seed": report.fingerprint.seed,
        "params_hash": report.fingerprint.params_hash,
        "tour": report.tour.as_string(),
        "energy": format_float(b.total_weighted),
        "ground_intra": format_float(b.ground_intra),
        "ground_ch_tx": format_float(b.ground_ch_tx),
        "uav_flight": format_float(b.uav_flight),
        "uav_collect": format_float(b.uav_collect),
        "wall_clock": format_float(report.wall_clock),
    }


def write_table(path: str | Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(columns))
            writer.writeheader()
            count = 0
            for row in rows:
                writer.writerow({k: (format_float(v) if isinstance(v, float) else v) for k, v in row.items()})
                count += 1
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e}") from e
    logger.info("table_written", path=str(path), rows=count)


def read_table(path: str | Path) -> List[Dict[str, str]]:
    try:
        with open(path, newline="") as f:
            return list(csv.DictReader(f))
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e}") from e


def write_reports(path: str | Path, reports: Iterable[SolveReport]):
    write_table(path, REPORT_COLUMNS, (report_row(r) for r in reports))


def read_reports(path: str | Path) -> List[Dict[str, Any]]:
    """Report rows with numeric columns parsed"""
    rows = []
    for raw in read_table(path):
        if int(raw["schema_version"]) != settings.CSV_SCHEMA_VERSION:
            raise StorageError(f"{path}: unsupported schema version {raw['schema_version']}")
        row: Dict[str, Any] = dict(raw)
        for column in _FLOAT_COLUMNS:
            row[column] = float(raw[column])
        row["K"] = int(raw["K"])
        row["seed"] = int(raw["seed"])
        row["tour"] = Tour.parse(raw["tour"])
        rows.append(row)
    return rows


def recompute_mismatches(
    rows: List[Dict[str, Any]],
    instances: Mapping[str, Instance],
    params: EnergyParams,
    rtol: float = 1e-9,
) -> List[Dict[str, Any]]:
    """Rows whose energy differs from a fresh evaluation of their tour"""
    bad = []
    for row in rows:
        instance = instances[row["instance"]]
        expected = total_weighted_energy(params.with_omega(row["omega"]), instance, row["tour"]).total_weighted
        if abs(expected - row["energy"]) > rtol * abs(expected):
            bad.append({**row, "expected": expected})
    return bad


class TrainingLog:
    """Append-only CSV of per-step training statistics"""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def start(self):
        write_table(self.path, TRAINING_LOG_COLUMNS, [])

    def append(self, row: Mapping[str, Any]):
        if not self.path.exists():
            self.start()
        try:
            with open(self.path, "a", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=TRAINING_LOG_COLUMNS)
                writer.writerow({k: format_float(v) if isinstance(v, float) else v for k, v in row.items()})
        except OSError as e:
            raise StorageError(f"Cannot append to {self.path}: {e}") from e

    def read(self) -> List[Dict[str, Optional[float]]]:
        rows = []
        for raw in read_table(self.path):
            rows.append({k: (float(v) if v not in ("", None) else None) for k, v in raw.items()})
        return rows

    def truncate_after(self, step: int):
        """Drop rows logged after `step` (used when resuming)"""
        if not self.path.exists():
            self.start()
            return
        kept = [row for row in read_table(self.path) if int(row["step"]) <= step]
        write_table(self.path, TRAINING_LOG_COLUMNS, kept)
