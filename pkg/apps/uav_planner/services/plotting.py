"""
Plotting
Static SVG figures: tour over the clustered field, ratio sweeps and the training curve
"""
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import structlog  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402
from pydantic import BaseModel  # noqa: E402

from core.errors import ContractError, StorageError  # noqa: E402
from core.instances import Instance  # noqa: E402
from core.models import SolveReport  # noqa: E402
from core.validation import validate_tour  # noqa: E402

logger = structlog.get_logger(__name__)


class TrajectoryPlot(BaseModel):
    """What was drawn, for consistency checks against the report"""

    path: str
    segments: int
    polyline_length: float
    heads: Dict[int, List[float]]


def _save(fig, path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", bbox_inches="tight")
    except OSError as e:
        raise StorageError(f"Cannot write plot {path}: {e}") from e
    finally:
        plt.close(fig)
    logger.info("plot_written", path=str(path))


def emit_trajectory_plot(report: SolveReport, instance: Instance, path: str | Path) -> TrajectoryPlot:
    """Clusters with their boxes, chosen CHs, the depot and the closed tour"""
    validate_tour(instance, report.tour)
    path = Path(path)
    polyline = report.tour.path(instance)

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.set_title(f"{report.solver}  omega={report.fingerprint.omega:g}  E={report.energy:.1f} J")

    for k, center in enumerate(instance.centers):
        ax.add_patch(
            Rectangle(
                (center[0] - instance.zeta, center[1] - instance.zeta),
                2 * instance.zeta,
                2 * instance.zeta,
                fill=False,
                edgecolor="lightgrey",
                linewidth=0.8,
            )
        )
        nodes = instance.nodes[k]
        ax.scatter(nodes[:, 0], nodes[:, 1], s=10, color="tab:blue", alpha=0.6)

    heads = {cluster: instance.nodes[cluster, node].tolist() for cluster, node in report.tour.visits}
    head_xy = np.array(list(heads.values()))
    ax.scatter(head_xy[:, 0], head_xy[:, 1], s=60, color="tab:red", edgecolor="k", zorder=3, label="CH")
    ax.scatter([instance.depot[0]], [instance.depot[1]], s=90, marker="s", color="gold", edgecolor="k", zorder=3, label="depot")
    ax.plot(polyline[:, 0], polyline[:, 1], "-", color="tab:green", linewidth=1.5, label="UAV")

    ax.set_xlim(0, instance.area_size)
    ax.set_ylim(-0.02 * instance.area_size, instance.area_size)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, path)

    return TrajectoryPlot(
        path=str(path),
        segments=len(polyline) - 1,
        polyline_length=float(np.linalg.norm(np.diff(polyline, axis=0), axis=1).sum()),
        heads=heads,
    )


def plot_ratio_sweep(rows: Sequence[Mapping[str, object]], path: str | Path, axis: str = "omega", fixed: Optional[float] = None):
    """
    Mean ratio vs `axis` ("omega" or "K"), one line per solver

    With axis="K" and several omegas in `rows`, pass `fixed` to pick one omega.
    """
    if axis not in ("omega", "K"):
        raise ContractError(f"axis must be 'omega' or 'K', got {axis!r}")
    series: Dict[str, Dict[float, List[float]]] = defaultdict(lambda: defaultdict(list))
    for row in rows:
        if axis == "K" and fixed is not None and float(row["omega"]) != fixed:
            continue
        series[str(row["solver"])][float(row[axis])].append(float(row["mean_ratio"]))

    fig, ax = plt.subplots(figsize=(6, 4))
    for solver, points in sorted(series.items()):
        xs = sorted(points)
        ax.plot(xs, [np.mean(points[x]) for x in xs], marker="o", label=solver)
    ax.axhline(1.0, color="grey", linewidth=0.8, linestyle="--")
    ax.set_xlabel("omega" if axis == "omega" else "K")
    ax.set_ylabel("energy / optimum")
    ax.legend(fontsize=8)
    _save(fig, Path(path))


def plot_training_curve(rows: Sequence[Mapping[str, Optional[float]]], path: str | Path):
    """Mean reward and gradient norm per step, evaluation ratio where logged"""
    steps = [r["step"] for r in rows if r.get("mean_reward") is not None]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    top.plot(steps, [r["mean_reward"] for r in rows if r.get("mean_reward") is not None], linewidth=0.8)
    top.set_ylabel("mean normalized reward")

    bottom.plot(steps, [r["grad_norm"] for r in rows if r.get("mean_reward") is not None], linewidth=0.8, label="grad norm")
    evals = [(r["step"], r["eval_ratio"]) for r in rows if r.get("eval_ratio") is not None]
    if evals:
        ratio_ax = bottom.twinx()
        ratio_ax.plot(*zip(*evals), color="tab:red", marker="o", label="eval ratio")
        ratio_ax.set_ylabel("eval ratio vs exact")
    bottom.set_xlabel("step")
    bottom.set_ylabel("grad norm")
    _save(fig, Path(path))
