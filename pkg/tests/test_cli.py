"""
Command-line tests
Exit codes, file outputs and configuration precedence through main()
"""
import pytest

from core.config import EnergyParams
from core.instances import generate, load, save
from main import main
from services.reports import read_reports, read_table, recompute_mismatches

pytestmark = pytest.mark.integration


def _generate(out_dir, count=3, K=3, N=4, seed=0):
    return main(["generate", "--K", str(K), "--N", str(N), "--count", str(count), "--seed", str(seed), "--out-dir", str(out_dir)])


def _train(tmp_path):
    checkpoint = tmp_path / "model.npz"
    code = main(
        [
            "train", "--K", "3", "--N", "4", "--batch-size", "2", "--steps", "2", "--embed-dim", "8",
            "--eval-every", "1", "--eval-size", "2", "--checkpoint", str(checkpoint), "--log", str(tmp_path / "log.csv"),
            "--workers", "1",
        ]
    )
    assert code == 0
    return checkpoint


class TestGenerate:
    def test_zero_count_writes_nothing(self, tmp_path):
        assert _generate(tmp_path / "out", count=0) == 0
        assert not (tmp_path / "out").exists()

    def test_files_are_reproducible(self, tmp_path):
        _generate(tmp_path / "a")
        _generate(tmp_path / "b")
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == ["instance_K3_0000.yml", "instance_K3_0001.yml", "instance_K3_0002.yml"]
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_invalid_sizes(self, tmp_path):
        assert _generate(tmp_path / "out", N=1) == 2

    def test_impossible_layout(self, tmp_path):
        assert main(["generate", "--K", "40", "--count", "1", "--out-dir", str(tmp_path)]) == 4

    @pytest.mark.parametrize("flag", ["--seed", "--count"])
    def test_negative_value_is_usage_error(self, tmp_path, flag):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--K", "4", "--N", "5", flag, "-1", "--out-dir", str(tmp_path)])
        assert exc.value.code == 2
        assert not any(tmp_path.iterdir())


class TestSolve:
    def test_reports_recompute(self, tmp_path, energy_params):
        _generate(tmp_path / "corpus")
        out = tmp_path / "reports.csv"
        code = main(["solve", str(tmp_path / "corpus"), "--solver", "exact", "--solver", "greedy", "--out", str(out), "--workers", "1"])

        assert code == 0
        rows = read_reports(out)
        assert len(rows) == 6
        instances = {p.stem: load(p) for p in (tmp_path / "corpus").iterdir()}
        assert recompute_mismatches(rows, instances, energy_params) == []

    def test_repeat_runs_agree(self, tmp_path):
        _generate(tmp_path / "corpus", count=2)
        for name in ("first.csv", "second.csv"):
            main(["solve", str(tmp_path / "corpus"), "--solver", "exact", "--out", str(tmp_path / name), "--workers", "1"])
        first, second = read_reports(tmp_path / "first.csv"), read_reports(tmp_path / "second.csv")
        assert [(r["tour"], r["energy"]) for r in first] == [(r["tour"], r["energy"]) for r in second]

    def test_drl_without_checkpoint(self, tmp_path):
        _generate(tmp_path / "corpus", count=1)
        assert main(["solve", str(tmp_path / "corpus"), "--solver", "drl", "--out", str(tmp_path / "r.csv")]) == 2

    def test_missing_checkpoint_file(self, tmp_path):
        _generate(tmp_path / "corpus", count=1)
        code = main(
            ["solve", str(tmp_path / "corpus"), "--solver", "drl", "--checkpoint", str(tmp_path / "none.npz"), "--out", str(tmp_path / "r.csv")]
        )
        assert code == 5

    def test_invalid_instance_file(self, tmp_path):
        (tmp_path / "bad.yml").write_text("version: 1\nK: [oops\n")
        assert main(["solve", str(tmp_path / "bad.yml"), "--solver", "greedy", "--out", str(tmp_path / "r.csv")]) == 3

    def test_brute_force_over_budget(self, tmp_path):
        save(generate(8, 20, zeta=40.0, seed=1), tmp_path / "big.yml")
        assert main(["solve", str(tmp_path / "big.yml"), "--solver", "brute_force", "--out", str(tmp_path / "r.csv")]) == 4

    def test_invalid_omega_flag(self, tmp_path):
        _generate(tmp_path / "corpus", count=1)
        assert main(["solve", str(tmp_path / "corpus"), "--solver", "greedy", "--omega", "2", "--out", str(tmp_path / "r.csv")]) == 3

    def test_config_file_overrides_flags(self, tmp_path):
        _generate(tmp_path / "corpus", count=1)
        config = tmp_path / "config.yml"
        config.write_text("energy:\n  omega: 0.7\n")
        out = tmp_path / "r.csv"
        main(["solve", str(tmp_path / "corpus"), "--solver", "greedy", "--omega", "0.2", "--config", str(config), "--out", str(out)])
        assert read_reports(out)[0]["omega"] == 0.7

    def test_energy_flag(self, tmp_path):
        _generate(tmp_path / "corpus", count=1)
        out = tmp_path / "r.csv"
        main(["solve", str(tmp_path / "corpus"), "--solver", "greedy", "--energy", "altitude=80", "--omega", "0.2", "--out", str(out)])
        row = read_reports(out)[0]
        assert row["omega"] == 0.2
        assert row["params_hash"] == EnergyParams(altitude=80.0, omega=0.2).fingerprint()

    def test_negative_aco_seed(self, tmp_path):
        _generate(tmp_path / "corpus", count=1)
        with pytest.raises(SystemExit) as exc:
            main(["solve", str(tmp_path / "corpus"), "--solver", "aco", "--aco-seed", "-3", "--out", str(tmp_path / "r.csv")])
        assert exc.value.code == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--bogus"])
        assert exc.value.code == 2


class TestPolicyCommands:
    def test_train_evaluate_and_plot(self, tmp_path):
        checkpoint = _train(tmp_path)
        assert checkpoint.exists()

        out = tmp_path / "eval.csv"
        code = main(["evaluate", "--checkpoint", str(checkpoint), "--K", "4", "--count", "2", "--baselines", "greedy", "--out", str(out), "--workers", "1"])
        assert code == 0
        rows = read_table(out)
        assert len(rows) == 3
        assert float(rows[-1]["exact_ratio"]) == 1.0
        assert float(rows[-1]["drl_ratio"]) >= 1.0 - 1e-9

        _generate(tmp_path / "corpus", count=1)
        instance = next((tmp_path / "corpus").iterdir())
        svg = tmp_path / "tour.svg"
        assert main(["plot", "--instance", str(instance), "--solver", "drl", "--checkpoint", str(checkpoint), "--out", str(svg)]) == 0
        assert svg.exists()
        assert main(["plot", "--training-log", str(tmp_path / "log.csv"), "--out", str(tmp_path / "curve.svg")]) == 0

    def test_evaluate_needs_instances(self, tmp_path):
        checkpoint = _train(tmp_path)
        assert main(["evaluate", "--checkpoint", str(checkpoint), "--out", str(tmp_path / "e.csv")]) == 2


class TestCompare:
    def test_sweep_outputs(self, tmp_path):
        _generate(tmp_path / "corpus", count=2)
        _generate(tmp_path / "corpus", count=1, K=2, seed=5)
        out_dir = tmp_path / "sweep"
        code = main(
            ["compare", str(tmp_path / "corpus"), "--omegas", "0,0.5", "--solvers", "greedy", "--out-dir", str(out_dir), "--plot", "--workers", "1"]
        )

        assert code == 0
        ratios = read_table(out_dir / "ratios.csv")
        assert len(ratios) == 2 * 2 * 2
        assert (out_dir / "runtime.csv").exists()
        assert (out_dir / "ratios_omega.svg").exists()
        assert main(["plot", "--ratios", str(out_dir / "ratios.csv"), "--axis", "K", "--omega", "0.5", "--out", str(tmp_path / "k.svg")]) == 0

    def test_unknown_solver(self, tmp_path):
        _generate(tmp_path / "corpus", count=1)
        assert main(["compare", str(tmp_path / "corpus"), "--solvers", "lkh", "--out-dir", str(tmp_path / "s")]) == 2
