from __future__ import annotations

import copy

import numpy as np

from heatquant.rng import RngStream


def test_same_key_same_draws():
    assert np.array_equal(RngStream(1, 2).uniform(100), RngStream(1, 2).uniform(100))


def test_streams_differ():
    assert not np.array_equal(RngStream(1, 2).uniform(10), RngStream(1, 3).uniform(10))
    assert not np.array_equal(RngStream(1, 2).uniform(10), RngStream(2, 2).uniform(10))


def test_child_independent_of_parent_position():
    a = RngStream(5, 1)
    b = RngStream(5, 1)
    b.uniform(1000)
    assert np.array_equal(a.child(3).uniform(10), b.child(3).uniform(10))
    assert not np.array_equal(a.child(3).uniform(10), a.child(4).uniform(10))


def test_copy_continues_from_same_position():
    a = RngStream(7, 0)
    a.uniform(17)
    for b in (a.copy(), copy.copy(a), copy.deepcopy(a)):
        assert np.array_equal(b.uniform(5), a.copy().uniform(5))


def test_uniform_range_and_scalar():
    r = RngStream(0, 0)
    u = r.uniform((1000, 3))
    assert u.shape == (1000, 3) and u.min() >= 0 and u.max() < 1
    assert isinstance(r.uniform(), float)
