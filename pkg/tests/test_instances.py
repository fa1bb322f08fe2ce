"""
Instance generation, persistence and validation tests
"""
import numpy as np
import pytest

from core.errors import ConfigError, ConstraintViolationError, GenerationError, InstanceFormatError, InstanceValidationError, StorageError
from core.instances import (
    Instance,
    derive_seed,
    generate,
    generate_corpus,
    list_instance_files,
    load,
    save,
)
from core.models import Tour
from core.validation import TourValidator, check_instance, validate_instance


def test_generation_is_deterministic():
    assert generate(4, 20, seed=42) == generate(4, 20, seed=42)
    assert generate(4, 20, seed=42) != generate(4, 20, seed=43)


def test_generated_shapes(table_instance):
    assert table_instance.K == 4
    assert table_instance.N == 20
    assert table_instance.nodes.shape == (4, 20, 2)
    np.testing.assert_array_equal(table_instance.depot_xy, [500.0, 0.0])


def test_node_arrays_are_read_only(small_instance):
    with pytest.raises(ValueError):
        small_instance.nodes[0, 0, 0] = 1.0


def test_generated_instances_satisfy_layout_invariants():
    for seed in range(1000):
        instance = generate(4, 5, seed=seed)
        assert check_instance(instance)["valid"], seed


def test_generation_reports_infeasible_layouts():
    with pytest.raises(GenerationError):
        generate(30, 3, zeta=100.0, seed=0, max_attempts=2000)


def test_generation_rejects_bad_sizes():
    with pytest.raises(GenerationError):
        generate(3, 1, seed=0)
    with pytest.raises(GenerationError):
        generate(0, 5, seed=0)


def test_derive_seed_separates_streams():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(0, i) for i in range(100)}) == 100
    assert derive_seed(0, 1) != derive_seed(1, 0)
    assert 0 <= derive_seed(7, 2**31) < 2**63


def test_negative_seed_is_rejected():
    with pytest.raises(ConfigError):
        derive_seed(3, -1)
    with pytest.raises(ConfigError):
        generate(3, 4, seed=-5)


def test_corpus_uses_derived_seeds():
    corpus = generate_corpus(3, 3, 4, seed=9)
    assert [inst.seed for inst in corpus] == [derive_seed(9, i) for i in range(3)]


def test_save_and_load(tmp_path, table_instance):
    path = tmp_path / "instance.yml"
    save(table_instance, path)
    loaded = load(path)

    assert loaded == table_instance
    np.testing.assert_array_equal(loaded.nodes, table_instance.nodes)


def test_load_rejects_overlapping_clusters(tmp_path):
    nodes = np.array([[[150.0, 150.0], [160.0, 160.0]], [[250.0, 250.0], [260.0, 260.0]]])
    overlapping = Instance.from_arrays(nodes, centers=np.array([[200.0, 200.0], [300.0, 300.0]]))
    path = tmp_path / "overlap.yml"
    save(overlapping, path)

    with pytest.raises(InstanceValidationError):
        load(path)


def test_load_rejects_truncated_file(tmp_path, small_instance):
    path = tmp_path / "instance.yml"
    save(small_instance, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])

    with pytest.raises(InstanceFormatError):
        load(path)


def test_load_reports_declared_size_mismatch(tmp_path, small_instance):
    path = tmp_path / "instance.yml"
    save(small_instance, path)
    path.write_text(path.read_text().replace("K: 3", "K: 4"))

    with pytest.raises(InstanceFormatError) as exc:
        load(path)
    assert exc.value.field == "K"
    assert exc.value.line is not None


def test_load_rejects_unknown_version(tmp_path, small_instance):
    path = tmp_path / "instance.yml"
    save(small_instance, path)
    path.write_text(path.read_text().replace("version: 1", "version: 9"))

    with pytest.raises(InstanceFormatError):
        load(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(StorageError):
        load(tmp_path / "missing.yml")


def test_list_instance_files(tmp_corpus):
    files = list_instance_files(tmp_corpus)
    assert [f.name for f in files] == [f"instance_{i:04d}.yml" for i in range(5)]
    assert list_instance_files(files[0]) == [files[0]]


def test_node_outside_box_is_rejected(small_instance):
    nodes = np.array(small_instance.nodes)
    nodes[1, 0] = np.array(small_instance.centers[1]) + small_instance.zeta + 5.0
    with pytest.raises(InstanceValidationError):
        validate_instance(small_instance.with_nodes(nodes))


class TestTourValidator:
    def test_valid_tour(self, small_instance):
        result = TourValidator(small_instance).check(Tour.from_pairs([(2, 0), (0, 1), (1, 2)]))
        assert result["valid"]

    @pytest.mark.parametrize(
        "pairs",
        [
            [(0, 0), (1, 0)],
            [(0, 0), (1, 0), (1, 1)],
            [(0, 0), (1, 0), (3, 0)],
            [(0, 0), (1, 0), (2, 3)],
        ],
    )
    def test_invalid_tours(self, small_instance, pairs):
        validator = TourValidator(small_instance)
        assert not validator.check(Tour.from_pairs(pairs))["valid"]
        with pytest.raises(ConstraintViolationError):
            validator.validate(Tour.from_pairs(pairs))

    def test_tour_string_round_trip(self):
        tour = Tour.from_pairs([(2, 0), (0, 11), (1, 3)])
        assert Tour.parse(tour.as_string()) == tour

    def test_malformed_tour_string(self):
        with pytest.raises(ConstraintViolationError):
            Tour.parse("0:1>oops")
