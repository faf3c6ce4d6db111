import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisy_meta.episodes import (DatasetFormatError, NoiseSpec, TaskSpec, corrupted_count,
                                 generate_benchmark, generate_synthetic, inject_symmetric_noise,
                                 load_csv_dataset, sample_task, save_csv_dataset, ExampleSet,
                                 SplitDataset)


def _split_with_sizes(sizes, seed=0):
    rng = np.random.default_rng(seed)
    y = np.concatenate([np.full(n, c) for c, n in enumerate(sizes)]).astype(np.int64)
    ex = ExampleSet(rng.standard_normal((y.size, 3)), y, np.arange(y.size), y.copy())
    return SplitDataset("train", ex)


def test_epsilon_zero_is_identity():
    d = _split_with_sizes([5, 5, 5])
    out = inject_symmetric_noise(d, NoiseSpec(0.0, 1))
    assert np.array_equal(out.examples.y, d.examples.y)


def test_sixty_percent_of_ten():
    d = _split_with_sizes([10, 10, 10, 10])
    out = inject_symmetric_noise(d, NoiseSpec(0.6, 3))
    e = out.examples
    labels = set(d.classes)
    for c in labels:
        members = e.ground_truth == c
        flipped = members & (e.y != e.ground_truth)
        assert flipped.sum() == 6
        assert set(e.y[flipped]) <= labels - {c}


def test_two_class_split_flips_to_other():
    d = _split_with_sizes([8, 8])
    e = inject_symmetric_noise(d, NoiseSpec(0.5, 0)).examples
    flipped = e.y != e.ground_truth
    assert np.all(e.y[flipped] == 1 - e.ground_truth[flipped])


def test_single_class_rejected():
    with pytest.raises(ValueError):
        inject_symmetric_noise(_split_with_sizes([6]), NoiseSpec(0.3, 0))


def test_noise_moves_examples_between_pools():
    d = _split_with_sizes([10, 10, 10])
    out = inject_symmetric_noise(d, NoiseSpec(0.6, 1))
    for c, idx in out.classes.items():
        assert np.all(out.examples.y[idx] == c)
    assert out.noisy_fraction() == pytest.approx(0.6)


def test_rounding_is_half_even():
    assert corrupted_count(0.5, 5) == 2
    assert corrupted_count(0.5, 7) == 4
    assert corrupted_count(0.3, 7) == 2


@settings(max_examples=40, deadline=None)
@given(sizes=st.lists(st.integers(1, 40), min_size=2, max_size=6),
       eps=st.sampled_from([0.0, 0.1, 0.3, 0.5, 0.6, 1.0]), seed=st.integers(0, 1000))
def test_noise_count_property(sizes, eps, seed):
    d = _split_with_sizes(sizes, seed)
    e = inject_symmetric_noise(d, NoiseSpec(eps, seed)).examples
    for c, n in enumerate(sizes):
        members = e.ground_truth == c
        assert int(np.sum(members & (e.y != c))) == corrupted_count(eps, n)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(1.5)
    assert NoiseSpec(0.3).p == pytest.approx(0.7)


def test_sample_task_shapes(small_benchmark):
    train, _ = small_benchmark
    t = sample_task(train, TaskSpec(5, 5, 15), 0)
    assert len(t.support) == 25 and len(t.query) == 75
    assert len(set(t.way_ids)) == 5
    assert not set(t.support.source_id) & set(t.query.source_id)
    assert sorted(set(t.support.y)) == [1, 2, 3, 4, 5]
    # relabelling is consistent between support and query
    for j, c in enumerate(t.way_ids, start=1):
        assert np.all(t.support.ground_truth[t.support.y == j] == c)
        assert np.all(t.query.ground_truth[t.query.y == j] == c)


def test_sample_task_q0_and_determinism(small_benchmark):
    train, _ = small_benchmark
    t = sample_task(train, TaskSpec(3, 2, 0), 4)
    assert len(t.query) == 0
    a = sample_task(train, TaskSpec(5, 5, 15), 99)
    b = sample_task(train, TaskSpec(5, 5, 15), 99)
    assert np.array_equal(a.support.x, b.support.x) and a.way_ids == b.way_ids


def test_sample_task_errors(small_benchmark):
    train, _ = small_benchmark
    with pytest.raises(ValueError):
        sample_task(train, TaskSpec(9, 1, 0), 0)
    with pytest.raises(ValueError):
        sample_task(train, TaskSpec(2, 20, 20), 0)
    with pytest.raises(ValueError):
        TaskSpec(1, 1, 0)


def test_synthetic_generation():
    d = generate_synthetic(4, 3, 10.0, 0.0, 5, 0)
    for c, idx in d.classes.items():
        assert np.all(d.examples.x[idx] == d.examples.x[idx[0]])
    assert np.array_equal(d.examples.y, d.examples.ground_truth)
    again = generate_synthetic(4, 3, 10.0, 0.0, 5, 0)
    assert np.array_equal(d.examples.x, again.examples.x)


def test_synthetic_separable_nearest_mean():
    train = generate_synthetic(6, 8, 50.0, 0.5, 20, 1)
    held = generate_synthetic(6, 8, 50.0, 0.5, 20, 1)  # same means
    # fresh within-class draws around the same means
    rng = np.random.default_rng(5)
    means = np.stack([train.examples.x[idx].mean(axis=0) for idx in train.classes.values()])
    x = held.examples.x + 0.5 * rng.standard_normal(held.examples.x.shape)
    pred = np.argmin(((x[:, None, :] - means[None]) ** 2).sum(-1), axis=1)
    assert np.all(pred == held.examples.y)


def test_signal_dims_zero_out_mean_tail():
    d = generate_synthetic(5, 6, 10.0, 0.0, 1, 0, signal_dims=2)
    assert np.all(d.examples.x[:, 2:] == 0.0)


def test_benchmark_splits_disjoint():
    train, test = generate_benchmark(5, 3, 4, 5.0, 1.0, 10, 0)
    assert not set(train.classes) & set(test.classes)
    assert train.split == "train" and test.split == "test"


def test_csv_roundtrip(tmp_path):
    d = generate_synthetic(3, 4, 5.0, 1.0, 6, 2)
    p = tmp_path / "d.csv"
    save_csv_dataset(d, p)
    back = load_csv_dataset(p, "train")
    assert np.array_equal(back.examples.x, d.examples.x)
    assert {c: list(v) for c, v in back.classes.items()} == {c: list(v) for c, v in d.classes.items()}


def test_csv_pools(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,0.5,2\n1,1.5,3\n2,0.0,1\n")
    d = load_csv_dataset(p, "test")
    assert {c: len(v) for c, v in d.classes.items()} == {1: 2, 2: 1}
    assert list(d.examples.source_id) == [0, 1, 2]


@pytest.mark.parametrize("content, fragment", [
    ("", "no data rows"),
    ("1,0.5\n2,0.5,0.7\n", "row 2"),
    ("1,abc\n", "row 1"),
    ("x,1.0\n", "row 1"),
])
def test_csv_errors(tmp_path, content, fragment):
    p = tmp_path / "bad.csv"
    p.write_text(content)
    with pytest.raises(DatasetFormatError, match=fragment):
        load_csv_dataset(p)


def test_csv_missing_file(tmp_path):
    with pytest.raises(DatasetFormatError):
        load_csv_dataset(tmp_path / "missing.csv")
