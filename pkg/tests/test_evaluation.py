"""
Solve executor and evaluation harness tests
"""
import pytest

from core.config import AcoConfig, EnergyParams
from core.errors import UsageError
from core.evaluation import REFERENCE, SUMMARY_NAME, compare, evaluate, tabulate, write_sweep
from core.executor import SolveExecutor, SolveJob, build_jobs
from core.instances import generate, list_instance_files, load
from core.policy import PolicyParams
from services.reports import read_reports, read_table

FAST_ACO = AcoConfig(n_ants=5, n_iterations=10)


@pytest.fixture
def corpus(tmp_corpus):
    return {path.stem: load(path) for path in list_instance_files(tmp_corpus)}


class TestExecutor:
    def test_jobs_are_instance_major(self, small_instance, table_instance):
        jobs = build_jobs({"a": small_instance, "b": table_instance}, ["exact", "greedy"])
        assert [(j.instance_name, j.solver) for j in jobs] == [("a", "exact"), ("a", "greedy"), ("b", "exact"), ("b", "greedy")]

    def test_execute_records_timing(self, energy_params, small_instance):
        report = SolveExecutor(energy_params, workers=1).execute(SolveJob(instance_name="x", instance=small_instance, solver="greedy"))
        assert report.instance_name == "x"
        assert report.wall_clock >= 0.0

    def test_unknown_solver(self, energy_params, small_instance):
        with pytest.raises(UsageError):
            SolveExecutor(energy_params, workers=1).run([SolveJob(instance_name="x", instance=small_instance, solver="lkh")])

    def test_drl_needs_policy(self, energy_params, small_instance):
        with pytest.raises(UsageError):
            SolveExecutor(energy_params, workers=1).run([SolveJob(instance_name="x", instance=small_instance, solver="drl")])

    def test_drl_with_policy(self, energy_params, small_instance, tiny_policy):
        policy, _ = tiny_policy
        executor = SolveExecutor(energy_params, policy_arrays=policy.to_arrays(), workers=1)
        report = executor.run([SolveJob(instance_name="x", instance=small_instance, solver="drl")])[0]
        assert report.solver == "drl"
        assert len(report.tour) == small_instance.K

    @pytest.mark.slow
    def test_pool_matches_inline(self, energy_params, corpus):
        jobs = build_jobs(corpus, ["exact", "greedy"])
        inline = SolveExecutor(energy_params, workers=1).run(jobs)
        pooled = SolveExecutor(energy_params, workers=2).run(jobs)
        assert [r.tour for r in pooled] == [r.tour for r in inline]


class TestEvaluate:
    def test_exact_ratio_is_one(self, energy_params, corpus, tiny_policy):
        policy, _ = tiny_policy
        table = evaluate(corpus, energy_params, policy.to_arrays(), ("greedy", "aco"), FAST_ACO, workers=1)

        assert table.solvers == [REFERENCE, "drl", "greedy", "aco"]
        assert len(table.all_rows()) == len(corpus) + 1
        assert table.summary.instance == SUMMARY_NAME
        for row in table.all_rows():
            assert row.ratios[REFERENCE] == pytest.approx(1.0)
            assert all(ratio >= 1.0 - 1e-9 for ratio in row.ratios.values())

    def test_records_match_columns(self, energy_params, corpus):
        table = evaluate(corpus, energy_params, None, ("greedy",), workers=1)
        assert table.solvers == [REFERENCE, "greedy"]
        for record in table.records():
            assert list(record) == table.columns()

    def test_evaluate_on_other_cluster_count(self, energy_params, tiny_policy):
        """A policy trained at one K decodes instances of another"""
        policy, _ = tiny_policy
        instances = {f"k6_{i}": generate(6, 3, seed=i) for i in range(2)}
        table = evaluate(instances, energy_params, policy.to_arrays(), ("greedy",), workers=1)
        assert table.summary.K == 6
        assert table.mean_ratio("drl") >= 1.0 - 1e-9

    def test_tabulate_groups_by_instance(self, energy_params, corpus):
        reports = SolveExecutor(energy_params, workers=1).run(build_jobs(corpus, ["exact", "greedy"]))
        table = tabulate(reports, ["exact", "greedy"])
        assert [row.instance for row in table.rows] == list(corpus)


    @pytest.mark.slow
    def test_colony_beats_greedy_at_seven_clusters(self):
        instances = {f"k7_{i}": generate(7, 20, seed=100 + i) for i in range(5)}
        table = evaluate(instances, EnergyParams(omega=0.5), None, ("greedy", "aco"), AcoConfig(), workers=1)
        assert table.mean_ratio("aco") <= table.mean_ratio("greedy")

class TestCompare:
    def test_sweep_rows(self, energy_params, corpus):
        mixed = {**corpus, "k2": generate(2, 4, seed=1)}
        result = compare(mixed, energy_params, omegas=[0.0, 0.6], solvers=("greedy",), workers=1)

        assert len(result.ratio_rows) == 2 * 2 * 2
        assert {row["K"] for row in result.runtime_rows} == {2, 3}
        assert {(row["omega"], row["K"]) for row in result.ratio_rows} == {(0.0, 2), (0.0, 3), (0.6, 2), (0.6, 3)}
        assert all(row["mean_ratio"] >= 1.0 - 1e-9 for row in result.ratio_rows)
        assert len(result.reports) == 2 * len(mixed) * 2

    def test_write_sweep(self, tmp_path, energy_params, corpus):
        result = compare(corpus, energy_params, omegas=[0.3], solvers=("greedy",), workers=1)
        write_sweep(result, tmp_path / "sweep")

        ratios = read_table(tmp_path / "sweep" / "ratios.csv")
        assert [row["solver"] for row in ratios] == ["exact", "greedy"]
        assert float(ratios[0]["mean_ratio"]) == 1.0
        assert len(read_table(tmp_path / "sweep" / "runtime.csv")) == 2
        reports = read_reports(tmp_path / "sweep" / "reports.csv")
        assert all(row["omega"] == 0.3 for row in reports)

    def test_omega_changes_the_optimum(self, corpus):
        params = EnergyParams()
        ground_only = compare(corpus, params, omegas=[1.0], solvers=("greedy",), workers=1)
        uav_only = compare(corpus, params, omegas=[0.0], solvers=("greedy",), workers=1)
        assert ground_only.reports[0].energy != uav_only.reports[0].energy


def _best_wall_clock(executor, instances, solver, repeats=3):
    """Sum over instances of the fastest of `repeats` timed solves"""
    total = 0.0
    for name, instance in instances.items():
        job = SolveJob(instance_name=name, instance=instance, solver=solver)
        total += min(executor.execute(job).wall_clock for _ in range(repeats))
    return total


@pytest.mark.slow
def test_runtime_ordering_at_ten_clusters():
    """greedy < drl < aco in wall clock; the subset DP also finishes ahead of the colony at this size"""
    instances = {f"k10_{i}": generate(10, 20, zeta=80.0, seed=i) for i in range(3)}
    policy = PolicyParams.init(64, 0)
    executor = SolveExecutor(EnergyParams(), AcoConfig(), policy.to_arrays(), workers=1)

    timings = {solver: _best_wall_clock(executor, instances, solver) for solver in ("greedy", "drl", "aco", "exact")}

    assert timings["greedy"] < timings["drl"] < timings["aco"]
    assert timings["drl"] / len(instances) < 1.0
    assert timings["exact"] < timings["aco"]
