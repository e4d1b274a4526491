import numpy as np

from qlogic_gfactor.streams import derive_seed, substream


def test_derived_seeds_are_collision_free() -> None:
    seeds = {derive_seed(20240611, "campaign/replica", index) for index in range(10_000)}
    assert len(seeds) == 10_000
    assert all(0 <= seed < 2**64 for seed in seeds)


def test_paths_separate_streams() -> None:
    assert derive_seed(1, "campaign/cycle", 0) != derive_seed(1, "campaign/replica", 0)
    assert derive_seed(1, "sweep", 3) != derive_seed(2, "sweep", 3)


def test_substreams_are_reproducible() -> None:
    first = substream(99, "readout/chain", 1).random(16)
    second = substream(99, "readout/chain", 1).random(16)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, substream(99, "readout/chain", 0).random(16))
