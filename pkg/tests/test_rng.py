import numpy as np

from graspfind.rng import Rng


def test_same_seed_same_stream():
    a = Rng(123).uniform(size=100)
    b = Rng(123).uniform(size=100)
    assert np.array_equal(a, b)


def test_different_seeds_differ():
    assert not np.array_equal(Rng(1).uniform(size=10), Rng(2).uniform(size=10))


def test_child_streams_reproducible_and_independent():
    root = Rng(99)
    a = root.child("worker/0").uniform(size=50)
    b = root.child("worker/1").uniform(size=50)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, Rng(99).child("worker/0").uniform(size=50))


def test_child_independent_of_parent_consumption():
    r1 = Rng(5)
    r1.uniform(size=1000)
    assert np.array_equal(
        r1.child("x").uniform(size=10), Rng(5).child("x").uniform(size=10)
    )


def test_known_value_pinned_for_cross_platform_stability():
    # PCG64 with a fixed seed; value frozen at first test authoring
    v = Rng(0).uniform()
    assert abs(v - 0.6369616873214543) < 1e-15


def test_unit_vectors_are_unit():
    rng = Rng(4)
    for _ in range(100):
        assert abs(np.linalg.norm(rng.unit_vector()) - 1.0) < 1e-12
