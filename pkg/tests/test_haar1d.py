import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic_lab import (CellIndex, DyadicError, GridSpec, ResolutionError, StepFunction, Weight,
                        gen_power_weight, gen_recursive_weight, inner, inner_w)
from dyadic_lab import haar1d

from conftest import brute_inner


def intervals(M):
    return [CellIndex(l, (k,)) for l in range(M) for k in range(1 << l)]


def lex_haar(I: CellIndex, R: int) -> np.ndarray:
    """Haar function built directly on lexicographic cells, left half positive."""
    v = np.zeros(1 << R)
    span = 1 << (R - I.level)
    lo = I.pos[0] * span
    v[lo:lo + span // 2] = 1.0
    v[lo + span // 2:lo + span] = -1.0
    return v / np.sqrt(I.measure)


def test_haar_root_values():
    np.testing.assert_array_equal(haar1d.haar(CellIndex.root(1), GridSpec(1, 0, 1)).values, [1.0, -1.0])


def test_haar_matches_direct_construction():
    g = GridSpec(1, 4, 6)
    for I in intervals(5):
        np.testing.assert_allclose(haar1d.haar(I, g).values, lex_haar(I, 6), rtol=1e-15)


def test_haar_beyond_resolution_rejected():
    with pytest.raises(ResolutionError):
        haar1d.haar(CellIndex(2, (0,)), GridSpec(1, 1, 2))
    with pytest.raises(DyadicError):
        haar1d.haar(CellIndex.root(2), GridSpec(2, 1, 2))


def test_avg_fn_pairs_to_average(rng, grid1):
    f = StepFunction.random(grid1, rng, grid1.R)
    for I in intervals(4):
        assert inner(haar1d.avg_fn(I, grid1), f) == pytest.approx(f.values.reshape(1 << I.level, -1)[I.pos[0]].mean())


@pytest.mark.parametrize("M", [3, 6])
def test_unweighted_gram_is_identity(M):
    g = GridSpec(1, M, M + 1)
    basis = [StepFunction.constant(g)] + [haar1d.haar(I, g) for I in intervals(M)]
    gram = np.array([[brute_inner(a, b) for b in basis] for a in basis])
    np.testing.assert_allclose(gram, np.eye(len(basis)), atol=1e-12)


@pytest.mark.parametrize("make", [lambda g: gen_recursive_weight(g, seed=5, delta_max=0.8),
                                  lambda g: gen_power_weight(-0.7, g)])
def test_weighted_gram_is_identity(make):
    g = GridSpec(1, 6, 7)
    w = make(g)
    basis = [haar1d.weighted_haar(w, I) for I in intervals(6)]
    gram = np.array([[brute_inner(a, b, w) for b in basis] for a in basis])
    np.testing.assert_allclose(gram, np.eye(len(basis)), atol=1e-9)
    for h in basis:
        assert abs(brute_inner(h, StepFunction.constant(g), w)) < 1e-12


def test_weighted_haar_two_one_example():
    w = Weight(GridSpec(1, 0, 1), [2.0, 1.0])
    h = haar1d.weighted_haar(w, CellIndex.root(1))
    assert inner_w(h, h, w) == pytest.approx(1.0, rel=1e-14)
    assert inner_w(h, StepFunction.constant(w.grid), w) == pytest.approx(0.0, abs=1e-14)


def test_weighted_haar_unit_weight_is_haar_up_to_sign():
    g = GridSpec(1, 3, 4)
    w = Weight(g, np.ones(g.ncells))
    for I in intervals(3):
        np.testing.assert_allclose(haar1d.weighted_haar(w, I).values, haar1d.haar(I, g).values, atol=1e-15)


def test_haar_coeff_examples():
    g = GridSpec(1, 1, 2)
    left = StepFunction(g, [1.0, 1.0, 0.0, 0.0])
    assert haar1d.haar_coeff(left, CellIndex.root(1)) == pytest.approx(0.5)
    assert np.all(haar1d.haar_coeffs(StepFunction.constant(g, 4.0)) == 0)
    w = Weight(GridSpec(1, 0, 1), [2.0, 1.0])
    assert haar1d.haar_coeff(w, CellIndex.root(1)) == pytest.approx(0.5)


def test_haar_coeffs_match_brute_inner(rng, grid1):
    f = StepFunction.random(grid1, rng, grid1.R)
    c = haar1d.haar_coeffs(f)
    for i, I in enumerate(intervals(grid1.M)):
        assert c[i] == pytest.approx(brute_inner(f, haar1d.haar(I, grid1)), abs=1e-13)


def test_disbalanced_examples():
    w = Weight(GridSpec(1, 0, 1), [2.0, 1.0])
    p = haar1d.disbalanced(w, CellIndex.root(1))
    assert p.C == pytest.approx(np.sqrt(4 / 3), rel=1e-15)
    assert p.D == pytest.approx(1 / 3, rel=1e-15)
    one = haar1d.disbalanced(Weight(GridSpec(1, 0, 1), [1.0, 1.0]), CellIndex.root(1))
    assert (one.C, one.D) == (1.0, 0.0)
    scaled = haar1d.disbalanced(Weight(GridSpec(1, 0, 1), [6.0, 3.0]), CellIndex.root(1))
    assert scaled.C == pytest.approx(np.sqrt(3) * p.C) and scaled.D == pytest.approx(p.D)


def test_disbalanced_all_matches_single(rng):
    g = GridSpec(1, 4, 6)
    w = gen_recursive_weight(g, seed=11, delta_max=0.7)
    C, D = haar1d.disbalanced_all(w)
    for i, I in enumerate(intervals(4)):
        p = haar1d.disbalanced(w, I)
        assert C[i] == pytest.approx(p.C, rel=1e-13)
        assert D[i] == pytest.approx(p.D, rel=1e-12, abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.95), st.booleans())
def test_disbalanced_decomposition_and_c_estimates(seed, dmax, minus_left):
    g = GridSpec(1, 4, 6, minus_left=minus_left)
    rng = np.random.default_rng(seed)
    w = gen_recursive_weight(g, seed=seed, delta_max=dmax) if dmax > 0 else Weight(g, rng.uniform(0.1, 3, g.ncells))
    test_g = StepFunction.random(g, rng, g.R)
    C, D = haar1d.disbalanced_all(w, g.M + 1)
    for i, K in enumerate(intervals(g.M)):
        lhs = inner_w(haar1d.haar(K, g), test_g, w)
        rhs = C[i] * inner_w(haar1d.weighted_haar(w, K), test_g, w) + D[i] * inner_w(haar1d.avg_fn(K, g), test_g, w)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)
        assert C[i] >= 0
        bound = 2 * np.sqrt(w.level_means(K.level)[K.pos[0]])
        assert C[i] <= bound
        minus = CellIndex(K.level + 1, (2 * K.pos[0] + (0 if minus_left else 1),))
        assert C[haar1d.heap_index(minus)] <= bound
        kids = w.level_means(K.level + 1)[2 * K.pos[0]:2 * K.pos[0] + 2]
        assert abs(D[i]) <= kids.max() / w.level_means(K.level)[K.pos[0]] + 1e-12


def test_reconstruct_examples():
    g = GridSpec(1, 3, 4)
    const = haar1d.reconstruct(haar1d.CoefficientMap(3, 2.5, np.zeros(7)), g)
    np.testing.assert_array_equal(const.values, 2.5)
    one = haar1d.reconstruct(haar1d.CoefficientMap(3, 0.0, np.eye(7)[0]), g)
    np.testing.assert_allclose(one.values, haar1d.haar(CellIndex.root(1), g).values)


@pytest.mark.parametrize("minus_left", [True, False])
def test_reconstruct_roundtrip(rng, minus_left):
    g = GridSpec(1, 6, 8, minus_left=minus_left)
    f = StepFunction.random(g, rng, g.M)
    back = haar1d.reconstruct(haar1d.analyze(f), g)
    np.testing.assert_allclose(back.values, f.values, atol=1e-10)


def test_coefficient_map_json(rng):
    cm = haar1d.CoefficientMap(3, 0.25, rng.standard_normal(7))
    data = json.loads(cm.to_json())
    assert set(data) == {"M", "coeffs", "avg"}
    back = haar1d.CoefficientMap.from_json(cm.to_json())
    np.testing.assert_array_equal(back.coeffs, cm.coeffs)
    assert back[CellIndex(2, (3,))] == cm.coeffs[6]
    data["coeffs"].pop()
    with pytest.raises(DyadicError):
        haar1d.CoefficientMap.from_dict(data)
