"""
Solve Executor
Runs named solvers on instances, timing each solve and fanning jobs out to worker processes
"""
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from core.config import AcoConfig, EnergyParams, settings
from core.energy import build_report
from core.errors import UsageError
from core.exact import brute_force, solve_exact
from core.heuristics import solve_aco, solve_greedy
from core.instances import Instance
from core.models import SolveReport
from core.policy import PolicyParams, greedy_tour

logger = structlog.get_logger(__name__)

SOLVER_NAMES = ("exact", "greedy", "aco", "drl", "brute_force")


class SolveJob(BaseModel):
    """One (instance, solver) pair"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    instance_name: str
    instance: Instance
    solver: str


def solve_drl(instance: Instance, params: EnergyParams, policy: PolicyParams) -> SolveReport:
    """Greedy-decoded policy tour"""
    return build_report("drl", params, instance, greedy_tour(instance, policy, params))


class SolveExecutor:
    """Executes solve jobs with one configuration of energy, ACO and policy"""

    def __init__(
        self,
        params: EnergyParams,
        aco: Optional[AcoConfig] = None,
        policy_arrays: Optional[Dict[str, np.ndarray]] = None,
        workers: Optional[int] = None,
    ):
        self.params = params
        self.aco = aco or AcoConfig()
        self.policy_arrays = policy_arrays
        self.workers = workers or settings.WORKERS
        self._policy: Optional[PolicyParams] = None

    def _solver(self, name: str) -> Callable[[Instance], SolveReport]:
        if name == "exact":
            return lambda instance: solve_exact(instance, self.params)
        if name == "brute_force":
            return lambda instance: brute_force(instance, self.params)
        if name == "greedy":
            return lambda instance: solve_greedy(instance, self.params)
        if name == "aco":
            return lambda instance: solve_aco(instance, self.params, self.aco)
        if name == "drl":
            if self.policy_arrays is None:
                raise UsageError("Solver 'drl' requires a checkpoint")
            if self._policy is None:
                self._policy = PolicyParams.from_arrays(self.policy_arrays, requires_grad=False)
            return lambda instance: solve_drl(instance, self.params, self._policy)
        raise UsageError(f"Unknown solver '{name}', choose from {', '.join(SOLVER_NAMES)}")

    def execute(self, job: SolveJob) -> SolveReport:
        """Run one job; wall clock covers the solver call only"""
        solver = self._solver(job.solver)
        started = time.perf_counter()
        report = solver(job.instance)
        elapsed = time.perf_counter() - started
        logger.info(
            "job_finished",
            instance=job.instance_name,
            solver=job.solver,
            energy=report.energy,
            wall_clock=elapsed,
        )
        return report.with_timing(elapsed, job.instance_name)

    def run(self, jobs: Sequence[SolveJob]) -> List[SolveReport]:
        """Execute jobs in order, across a process pool when more than one worker is configured"""
        for job in jobs:
            self._solver(job.solver)
        if self.workers <= 1 or len(jobs) < 2:
            return [self.execute(job) for job in jobs]

        logger.info("executing_jobs", jobs=len(jobs), workers=self.workers)
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(_execute_job, [(self.params, self.aco, self.policy_arrays, job) for job in jobs]))


def _execute_job(args) -> SolveReport:
    params, aco, policy_arrays, job = args
    return SolveExecutor(params, aco, policy_arrays, workers=1).execute(job)


def build_jobs(instances: Dict[str, Instance], solvers: Sequence[str]) -> List[SolveJob]:
    """Instance-major job list"""
    return [SolveJob(instance_name=name, instance=instance, solver=solver) for name, instance in instances.items() for solver in solvers]
