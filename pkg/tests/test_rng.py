import numpy as np
import pytest
from scipy import stats

from sweatpp.rng import RandomStreams, seed_rng
from sweatpp.validation import check_random_state


def test_child_is_pure_function_of_seed_and_index():
    a = seed_rng(12345).child(3).random(1000)
    b = seed_rng(12345).child(3).random(1000)
    np.testing.assert_array_equal(a, b)


def test_children_differ():
    s = seed_rng(12345)
    assert not np.array_equal(s.child(0).random(1000), s.child(1).random(1000))


def test_root_differs_from_children():
    s = seed_rng(7)
    assert not np.array_equal(s.root.random(100), s.child(0).random(100))


def test_children_range():
    s = seed_rng(9)
    kids = s.children(2, 5)
    assert len(kids) == 3
    np.testing.assert_array_equal(kids[0].random(5), s.child(2).random(5))


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_seed_range(seed):
    with pytest.raises(ValueError):
        RandomStreams(seed)


def test_full_64_bit_seed():
    seed_rng(2**64 - 1).root.random()


def test_uniformity_chi_square():
    u = seed_rng(2024).root.random(1_000_000)
    counts, _ = np.histogram(u, bins=100, range=(0, 1))
    assert stats.chisquare(counts).pvalue > 0.001


def test_check_random_state():
    g = np.random.default_rng(1)
    assert check_random_state(g) is g
    assert check_random_state(5).random() == np.random.default_rng(5).random()
    with pytest.raises(ValueError):
        check_random_state("seed")
