from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvego.space import (
    DomainError,
    MixedSpace,
    allocate_categories,
    category_count,
    decode_category,
    encode_categories,
    encode_category,
    lhs_initial_doe,
)


def test_category_count():
    assert category_count(MixedSpace(((0, 1),), (2, 2))) == 4
    assert category_count(MixedSpace(((0, 1),), (3, 3))) == 9
    assert category_count(MixedSpace(((0, 1),), (4, 2, 3))) == 24
    assert category_count(MixedSpace(((0, 1),), ())) == 1


def test_row_major_encoding():
    sp = MixedSpace(((0, 1),), (3, 3))
    assert encode_category((0, 0), sp) == 0
    assert encode_category((0, 2), sp) == 2
    assert encode_category((1, 0), sp) == 3
    assert encode_category((2, 2), sp) == 8
    assert decode_category(5, sp) == (1, 2)


def test_encoding_rejects_bad_levels():
    sp = MixedSpace(((0, 1),), (2, 2))
    with pytest.raises(DomainError):
        encode_category((2, 0), sp)
    with pytest.raises(DomainError):
        decode_category(4, sp)


@given(st.lists(st.integers(1, 5), min_size=1, max_size=4), st.data())
def test_encode_decode_roundtrip(levels, data):
    sp = MixedSpace(((0, 1),), tuple(levels))
    c = data.draw(st.integers(0, sp.m - 1))
    z = decode_category(c, sp)
    assert encode_category(z, sp) == c
    assert encode_categories(np.array([z]), sp)[0] == c


def test_space_validation():
    with pytest.raises(DomainError):
        MixedSpace(((1.0, 0.0),), (2,))
    with pytest.raises(DomainError):
        MixedSpace(((0.0, 1.0),), (0,))


def test_unit_roundtrip():
    sp = MixedSpace(((0.0, 100.0), (-1.0, 1.0)), (2,))
    X = np.array([[25.0, 0.5], [100.0, -1.0]])
    np.testing.assert_allclose(sp.to_unit(X), [[0.25, 0.75], [1.0, 0.0]])
    np.testing.assert_allclose(sp.from_unit(sp.to_unit(X)), X)


@given(st.integers(1, 200), st.integers(1, 30), st.integers(0, 2**31))
def test_allocation_is_balanced(n, m, seed):
    cats = allocate_categories(n, m, np.random.default_rng(seed))
    counts = np.bincount(cats, minlength=m)
    assert counts.sum() == n
    assert counts.max() - counts.min() <= 1
    assert counts.min() == n // m


def test_lhs_branin_design_has_five_per_category():
    sp = MixedSpace(((0, 1), (0, 1)), (2, 2))
    X, Z = lhs_initial_doe(sp, 20, 3)
    assert X.shape == (20, 2) and Z.shape == (20, 2)
    assert np.all(np.bincount(encode_categories(Z, sp), minlength=4) == 5)


@settings(max_examples=30)
@given(st.integers(3, 60), st.integers(1, 4), st.integers(0, 1000))
def test_lhs_one_sample_per_stratum(n, q, seed):
    sp = MixedSpace(tuple((0.0, 2.0) for _ in range(q)), (3,))
    X, Z = lhs_initial_doe(sp, n, seed)
    U = sp.to_unit(X)
    for k in range(q):
        strata = np.floor(U[:, k] * n).astype(int)
        assert sorted(strata) == list(range(n))
    assert all(sp.contains(x, z) for x, z in zip(X, Z))


def test_lhs_is_reproducible():
    sp = MixedSpace(((0, 1), (0, 1)), (3, 3))
    a = lhs_initial_doe(sp, 27, 11)
    b = lhs_initial_doe(sp, 27, 11)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_lhs_warns_below_category_count():
    sp = MixedSpace(((0, 1),), (3, 3))
    with pytest.warns(UserWarning):
        lhs_initial_doe(sp, 5, 0)
    with pytest.raises(DomainError):
        lhs_initial_doe(sp, 0, 0)
