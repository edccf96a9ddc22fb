import numpy as np
import pytest

from apps.core import rng
from apps.core.exceptions import InvalidConfig


def test_substream_replays():
    first = rng.substream(42, rng.STREAM, 7).standard_normal(5)
    second = rng.substream(42, rng.STREAM, 7).standard_normal(5)
    assert np.array_equal(first, second)


def test_key_paths_give_different_streams():
    a = rng.substream(42, rng.STREAM, 7).standard_normal(5)
    b = rng.substream(42, rng.MIXTURE, 7).standard_normal(5)
    c = rng.substream(43, rng.STREAM, 7).standard_normal(5)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_key_for_is_stable_64_bit():
    key = rng.key_for('exp-00001')
    assert key == rng.key_for('exp-00001')
    assert key != rng.key_for('exp-00002')
    assert 0 <= key < rng.SEED_LIMIT


def test_derive_seed_is_a_valid_seed():
    seed = rng.derive_seed(0, rng.PPOS_MC, rng.key_for('a'))
    assert rng.validate_seed(seed) == seed
    assert seed != rng.derive_seed(0, rng.PPOS_MC, rng.key_for('b'))


@pytest.mark.parametrize('seed', [-1, 2 ** 64, 1.5, True, '3'])
def test_validate_seed_rejects(seed):
    with pytest.raises(InvalidConfig):
        rng.validate_seed(seed)
