import math

import numpy as np
import pytest

from hmcdist import corpus
from hmcdist.sampling import PathSampler, sample_paths, sample_run, splitmix64, trial_seed


def test_single_state_chain_is_deterministic():
    assert sample_run(corpus.singleton(), 5, 123).symbols == ("a",) * 5


def test_first_symbol_is_the_initial_observation():
    h = corpus.fig3()[0]
    assert {sample_run(h, 1, s).symbols for s in range(20)} == {("a",)}


def test_runs_are_reproducible_and_seed_dependent():
    h = corpus.fig3()[0]
    a, b = sample_run(h, 200, 42), sample_run(h, 200, 42)
    assert a == b
    assert a.symbols != sample_run(h, 200, 43).symbols
    assert all(h.obs[s] == x for s, x in zip(a.states, a.symbols))


def test_known_stream_prefix_is_stable():
    # pins the generator so that seeds mean the same thing across releases
    assert "".join(sample_run(corpus.fig3()[0], 20, 3).symbols) == "abaabbaaaaaaababab" + "ba"


def test_splitmix64_reference_values():
    # first outputs of SplitMix64 seeded with 0 (reference implementation)
    state, out = 0, []
    for _ in range(3):
        out.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert out == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_trial_seeds_are_distinct_and_order_free():
    seeds = [trial_seed(7, i) for i in range(1000)]
    assert len(set(seeds)) == 1000
    assert trial_seed(7, 500) == seeds[500]


def test_block_sampling_equals_one_shot():
    h = corpus.fig1()[0]
    seeds = [trial_seed(1, i) for i in range(7)]
    whole = sample_paths(h, 1000, seeds)
    s = PathSampler(h, seeds)
    parts = np.concatenate([s.next(1), s.next(333), s.next(0), s.next(666)], axis=1)
    assert np.array_equal(whole, parts)
    assert np.array_equal(whole[3], sample_paths(h, 1000, [seeds[3]])[0])


def test_symbol_frequency_within_three_sigma():
    n = 100_000
    run = sample_run(corpus.fig3()[0], n, 2024)
    hits = sum(1 for x in run.symbols[1:] if x == "a")
    p = 0.75
    sigma = math.sqrt((n - 1) * p * (1 - p))
    assert abs(hits - p * (n - 1)) <= 3 * sigma


def test_invalid_arguments():
    with pytest.raises(ValueError):
        sample_paths(corpus.singleton(), 0, [1])
    with pytest.raises(ValueError):
        sample_run(corpus.singleton(), 3, -1)
