import numpy as np

from trajkit.ensembles import (
    iter_blocks,
    reduce_blocks,
    trajectory_rng,
    trajectory_seed,
)


def test_seed_is_pure_function_of_master_and_index():
    assert trajectory_seed(42, 7) == trajectory_seed(42, 7)
    seeds = {trajectory_seed(42, i) for i in range(200)}
    assert len(seeds) == 200
    assert trajectory_seed(43, 7) != trajectory_seed(42, 7)


def test_chunked_draws_match_sequential_singles():
    # the engines pre-draw uniforms in chunks; the stream must not depend
    # on the call partitioning
    a = trajectory_rng(123)
    b = trajectory_rng(123)
    chunked = np.concatenate([a.random(17), a.random(3), a.random(80)])
    singles = np.array([b.random() for _ in range(100)])
    assert np.array_equal(chunked, singles)


def test_blocks_cover_range_independent_of_workers():
    blocks = iter_blocks(1000, 256)
    assert blocks == [(0, 256), (256, 512), (512, 768), (768, 1000)]
    flat = [i for s, e in blocks for i in range(s, e)]
    assert flat == list(range(1000))


def test_mean_of_constant_is_exact():
    blocks = [{"c": np.ones((256, 5))}, {"c": np.ones((144, 5))}]
    mean, stderr = reduce_blocks(blocks, 400)
    assert np.all(mean["c"] == 1.0)
    assert np.all(stderr["c"] == 0.0)


def test_single_trajectory_stderr_is_nan():
    mean, stderr = reduce_blocks([{"x": np.full((1, 3), 2.5)}], 1)
    assert np.all(mean["x"] == 2.5)
    assert np.all(np.isnan(stderr["x"]))


def test_stderr_scales_as_inverse_sqrt_n():
    rng = np.random.default_rng(0)
    data = rng.standard_normal((800, 4))
    full, _ = reduce_blocks([{"x": data}], 800)
    _, se_full = reduce_blocks([{"x": data}], 800)
    _, se_half = reduce_blocks([{"x": data[:400]}], 400)
    ratio = se_half["x"] / se_full["x"]
    assert np.all(ratio > 1.2) and np.all(ratio < 1.7)  # ~ sqrt(2)


def test_reduction_order_fixed_for_fixed_block_size():
    rng = np.random.default_rng(1)
    data = rng.standard_normal((300, 2))
    blocks_a = [{"x": data[:256]}, {"x": data[256:]}]
    mean_a, se_a = reduce_blocks(blocks_a, 300)
    mean_b, se_b = reduce_blocks(blocks_a, 300)
    assert np.array_equal(mean_a["x"], mean_b["x"])
    assert np.array_equal(se_a["x"], se_b["x"])
