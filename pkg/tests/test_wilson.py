import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic_lab import (CellIndex, DyadicError, GridSpec, StepFunction, Weight, gen_power_weight,
                        gen_recursive_weight, inner_w, norm, norm_w)
from dyadic_lab import haar1d, shiftops, wilson

from conftest import brute_inner


def cube_set(cells):
    return frozenset((c.level, c.pos) for c in cells)


def all_cubes(d, level):
    return [CellIndex(level, pos) for pos in itertools.product(range(1 << level), repeat=d)]


def test_build_pairs_d1():
    (p,) = wilson.build_pairs(CellIndex.root(1))
    assert [c.pos for c in p.E1] == [(0,)] and [c.pos for c in p.E2] == [(1,)]


def test_build_pairs_d2_structure():
    pairs = wilson.build_pairs(CellIndex.root(2))
    assert len(pairs) == 3
    top = pairs[0]
    assert {c.pos[0] for c in top.E1} == {0} and {c.pos[0] for c in top.E2} == {1}
    for half, p in zip((0, 1), pairs[1:]):
        assert {c.pos[0] for c in p.E} == {half}
        assert [c.pos[1] for c in p.E1] == [0] and [c.pos[1] for c in p.E2] == [1]


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_lemma_properties_exhaustive(d):
    for I in all_cubes(d, 1 if d < 4 else 0) + [CellIndex.root(d)]:
        pairs = wilson.build_pairs(I)
        assert len(pairs) == 2**d - 1
        kids = cube_set(I.children())
        for p in pairs:
            E1, E2 = cube_set(p.E1), cube_set(p.E2)
            assert len(E1) == len(E2) > 0
            assert E1 <= kids and E2 <= kids
            assert not E1 & E2
        for p, q in itertools.permutations(pairs, 2):
            Ep, Eq = cube_set(p.E), cube_set(q.E)
            assert (Ep <= cube_set(q.E1) or Ep <= cube_set(q.E2) or Eq <= cube_set(p.E1)
                    or Eq <= cube_set(p.E2) or not Ep & Eq)
        assert cube_set(pairs[0].E) == kids


def test_flat_index_roundtrip():
    g = GridSpec(3, 2, 3)
    for n in range(g.ncoeffs):
        I, a = wilson.index_of(g, n)
        assert wilson.flat_index(g, I, a) == n


def test_unit_weight_d1_formula():
    g = GridSpec(1, 2, 3)
    h = wilson.wilson_haar(None, CellIndex.root(1), 0, g)
    np.testing.assert_allclose(h.values, [-1, -1, -1, -1, 1, 1, 1, 1], atol=1e-15)
    hw = wilson.wilson_haar(Weight(g, np.ones(8)), CellIndex.root(1), 0)
    np.testing.assert_allclose(hw.values, h.values, atol=1e-15)


def gram(basis, w=None):
    return np.array([[brute_inner(a, b, w) for b in basis] for a in basis])


@pytest.mark.parametrize("d,M", [(1, 6), (2, 3)])
def test_unweighted_gram_and_roundtrip(d, M, rng):
    g = GridSpec(d, M, M + 1)
    basis = [StepFunction.constant(g)] + [wilson.wilson_haar(None, I, a, g) for I, a in wilson.indices(g)]
    np.testing.assert_allclose(gram(basis), np.eye(len(basis)), atol=1e-9)
    f = StepFunction.random(g, rng, M)
    back = wilson.reconstruct(f.integral(), wilson.coeffs(f), g)
    np.testing.assert_allclose(back.values, f.values, atol=1e-10)


@pytest.mark.parametrize("d,M", [(1, 6), (2, 3)])
def test_weighted_gram(d, M):
    g = GridSpec(d, M, M + 1)
    w = gen_recursive_weight(g, seed=8, delta_max=0.8)
    basis = [wilson.wilson_haar(w, I, a) for I, a in wilson.indices(g)]
    np.testing.assert_allclose(gram(basis, w), np.eye(len(basis)), atol=1e-9)
    one = StepFunction.constant(g)
    assert max(abs(brute_inner(h, one, w)) for h in basis) < 1e-12


def test_weighted_gram_random_pairs_d2(rng):
    g = GridSpec(2, 3, 5)
    w = Weight(g, rng.uniform(0.05, 4.0, g.ncells))
    idx = wilson.indices(g)
    for _ in range(50):
        (I, a), (J, b) = (idx[k] for k in rng.integers(0, len(idx), 2))
        val = inner_w(wilson.wilson_haar(w, I, a), wilson.wilson_haar(w, J, b), w)
        assert val == pytest.approx(float((I, a) == (J, b)), abs=1e-12)


def test_multiplier_examples(rng):
    g = GridSpec(2, 3, 4)
    f = StepFunction.random(g, rng, 3)
    centred = f.values - f.integral()
    np.testing.assert_allclose(wilson.multiplier(np.ones(g.ncoeffs), f).values, centred, atol=1e-12)
    np.testing.assert_allclose(wilson.multiplier(-np.ones(g.ncoeffs), f).values, -centred, atol=1e-12)
    s = wilson.random_signs(2, 3, 0)
    twice = wilson.multiplier(s, wilson.multiplier(s, f))
    np.testing.assert_allclose(twice.values, centred, atol=1e-12)


def test_paraproduct_single_index(rng):
    g = GridSpec(2, 2, 4)
    f = StepFunction.random(g, rng, 4)
    n = 7
    I, a = wilson.index_of(g, n)
    sym = np.zeros(g.ncoeffs)
    sym[n] = 2.5
    out = wilson.paraproduct_d((1, 0), sym, f)
    fhat = brute_inner(f, wilson.wilson_haar(None, I, a, g))
    np.testing.assert_allclose(out.values, 2.5 * fhat * wilson.set_indicator_avg(I, a, g).values, atol=1e-13)
    with pytest.raises(DyadicError):
        wilson.paraproduct_d((1, 1), sym, f)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_multiplier_resolution_and_adjoint(seed, d):
    g = GridSpec(d, 2, 3)
    rng = np.random.default_rng(seed)
    f, gf = StepFunction.random(g, rng, 2), StepFunction.random(g, rng, 2)
    total = (wilson.paraproduct_d((0, 0), wilson.set_averages(gf), f).values
             + wilson.paraproduct_d((0, 1), wilson.coeffs(gf), f).values
             + wilson.paraproduct_d((1, 0), wilson.coeffs(gf), f).values)
    np.testing.assert_allclose(total, gf.values * f.values - gf.integral() * f.integral(), atol=1e-12)
    b = rng.standard_normal(g.ncoeffs)
    u, v = StepFunction.random(g, rng, 3), StepFunction.random(g, rng, 3)
    lhs = brute_inner(wilson.paraproduct_d((1, 0), b, u), v)
    assert lhs == pytest.approx(brute_inner(u, wilson.paraproduct_d((0, 1), b, v)), rel=1e-10, abs=1e-13)


def test_product_formula_examples(rng):
    g = GridSpec(2, 3, 5)
    f = StepFunction.random(g, rng, 3)
    fc = wilson.coeffs(f)
    one = StepFunction.constant(g)
    for n in (0, 5, 20):
        J, b = wilson.index_of(g, n)
        assert wilson.product_formula_rhs(one, f, J, b) == pytest.approx(fc[n], abs=1e-13)
        assert wilson.product_formula_rhs(f, StepFunction.constant(g, 1.7), J, b) == pytest.approx(1.7 * fc[n], abs=1e-13)


def test_product_formula_random_d2(rng):
    g = GridSpec(2, 3, 5)
    f, gf = StepFunction.random(g, rng, 3), StepFunction.random(g, rng, 3)
    direct = [brute_inner(f * gf, wilson.wilson_haar(None, J, b, g)) for J, b in wilson.indices(g)]
    rhs = [wilson.product_formula_rhs(f, gf, J, b) for J, b in wilson.indices(g)]
    np.testing.assert_allclose(rhs, direct, atol=1e-12)


def test_disbalanced_unit_weight():
    g = GridSpec(2, 2, 3)
    w = Weight(g, np.ones(g.ncells))
    for J, b in wilson.indices(g):
        C, D = wilson.disbalanced_d(w, J, b)
        assert C == pytest.approx(1.0) and D == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_disbalanced_pointwise_identity_and_estimate(d):
    g = GridSpec(d, 2, 3)
    w = gen_recursive_weight(g, seed=d, delta_max=0.9)
    for J, b in wilson.indices(g):
        C, D = wilson.disbalanced_d(w, J, b)
        rhs = C * wilson.wilson_haar(w, J, b).values + D * wilson.set_indicator_avg(J, b, g).values
        np.testing.assert_allclose(wilson.wilson_haar(None, J, b, g).values, rhs, atol=1e-12)
        E = wilson.build_pairs(J)[b]
        wE = sum(w.level_means(J.level + 1)[c.zpos] for c in E.E) / len(E.E)
        wJ = w.level_means(J.level)[J.zpos]
        assert C**2 <= 4 * wE * (1 + 1e-12)
        assert 4 * wE <= 2 ** (d + 1) * wJ * (1 + 1e-12)


@pytest.mark.parametrize("minus_left", [True, False])
def test_disbalanced_d1_matches_haar1d(minus_left):
    g = GridSpec(1, 4, 5, minus_left=minus_left)
    w = gen_power_weight(-0.4, g)
    s = haar1d.orientation(g)
    for J, b in wilson.indices(g):
        C, D = wilson.disbalanced_d(w, J, b)
        p = haar1d.disbalanced(w, J)
        assert C == pytest.approx(p.C, rel=1e-13)
        assert D == pytest.approx(s * p.D, rel=1e-12, abs=1e-15)


def test_disbalanced_pairing_identity(rng):
    g = GridSpec(2, 3, 5)
    w = gen_power_weight(0.8, g)
    assert wilson.disbalanced_residual(w, StepFunction.random(g, rng, 5)) < 1e-12


def d1_terms_without_shift(w, phi, gf):
    """Six terms for sigma = 1 in d=1 from haar1d primitives, summing each K against itself."""
    g = w.grid
    winv = w.inverse_weight
    vals = dict.fromkeys(shiftops.TERM_NAMES, 0.0)
    for l in range(g.M):
        for k in range(1 << l):
            K = CellIndex(l, (k,))
            hw = haar1d.weighted_haar(w, K)
            hwi = haar1d.weighted_haar(winv, K)
            avgK = haar1d.avg_fn(K, g)
            dw, di = haar1d.disbalanced(w, K), haar1d.disbalanced(winv, K)
            G1 = dw.C * inner_w(hw, gf, w)
            G2 = dw.D * inner_w(avgK, gf, w)
            phiK, isqK = brute_inner(phi, avgK), brute_inner(w.isqrt, avgK)
            a = haar1d.haar_coeff(w.isqrt * phi, K)
            b = haar1d.haar_coeff(phi, K) * isqK
            c = haar1d.haar_coeff(w.isqrt, K) * phiK
            a11 = di.C * inner_w(w.sqrt * phi, hwi, winv)
            a12 = di.D * brute_inner(w.isqrt * phi, avgK)
            c21 = di.C * inner_w(w.sqrt, hwi, winv) * phiK
            c22 = di.D * isqK * phiK
            parts = {"a": a, "b": b, "c": c, "a11": a11, "a12": a12, "c21": c21, "c22": c22}
            for name, (p, q) in shiftops.TERM_MAP.items():
                vals[name] += parts[p] * (G1 if q == "G1" else G2)
    return vals


def test_d1_unit_signs_match_haar1d_oracle(rng):
    g = GridSpec(1, 4, 6)
    w = gen_recursive_weight(g, seed=21, delta_max=0.7)
    phi, gf = StepFunction.random(g, rng, 4), StepFunction.random(g, rng, 6)
    t = wilson.six_terms_multiplier(w, np.ones(g.ncoeffs), phi, gf)
    oracle = d1_terms_without_shift(w, phi, gf)
    for name in shiftops.TERM_NAMES:
        assert getattr(t, name) == pytest.approx(oracle[name], rel=1e-10, abs=1e-13)
    Pphi = shiftops.paraproduct(1, 0, haar1d.haar_coeffs(w.isqrt), phi)
    lhs = inner_w(StepFunction(g, Pphi.values - Pphi.integral()), gf, w)
    assert t.lhs == pytest.approx(lhs, rel=1e-12)
    assert t.residual < 1e-9 and t.split_residual < 1e-9


def test_six_terms_unit_weight_vanish(rng):
    g = GridSpec(2, 2, 4)
    w = Weight(g, np.ones(g.ncells))
    s = wilson.random_signs(2, 2, 1)
    phi, gf = StepFunction.random(g, rng, 2), StepFunction.random(g, rng, 4)
    t = wilson.six_terms_multiplier(w, s, phi, gf)
    assert abs(t.lhs) < 1e-14 and abs(t.signed_sum) < 1e-14
    for name in ("C1", "A2", "B2", "C2", "A12", "A21", "A22", "C21", "C22"):
        assert abs(getattr(t, name)) < 1e-14
    # the two Haar-coefficient terms survive and cancel each other
    expected = float(np.sum(s.values * wilson.coeffs(phi) * wilson.coeffs(gf)))
    assert t.A1 == pytest.approx(expected) and t.B1 == pytest.approx(expected) and t.A11 == pytest.approx(expected)


def test_fifty_random_identity_cases_d2():
    g = GridSpec(2, 3, 5)
    worst = 0.0
    for trial in range(50):
        rng = np.random.default_rng(trial)
        w = (gen_recursive_weight(g, seed=trial, delta_max=0.9) if trial % 2
             else gen_power_weight(rng.uniform(-0.9, 0.9), g))
        sigma = wilson.random_signs(2, 3, trial)
        t = wilson.six_terms_multiplier(w, sigma, StepFunction.random(g, rng, 3), StepFunction.random(g, rng, 3))
        worst = max(worst, t.residual, t.split_residual)
    assert worst <= 1e-9


def test_term_factors_match(rng):
    g = GridSpec(2, 2, 4)
    w = gen_recursive_weight(g, seed=3, delta_max=0.5)
    s = wilson.random_signs(2, 2, 3)
    phi, gf = StepFunction.random(g, rng, 2), StepFunction.random(g, rng, 4)
    t = wilson.six_terms_multiplier(w, s, phi, gf)
    for name, (P, G) in wilson.term_factors(w, s, phi.zvalues[None], gf.zvalues[None]).items():
        assert float(P[0] @ G[0]) == pytest.approx(getattr(t, name), rel=1e-12, abs=1e-14)


def test_target_norm_identity(rng):
    g = GridSpec(2, 3, 4)
    w = gen_power_weight(-0.5, g)
    s = wilson.random_signs(2, 3, 9)
    phi = StepFunction.random(g, rng, 3)
    assert norm(wilson.target_operator(w, s, phi)) == pytest.approx(norm_w(wilson.target_function(w, s, phi), w))


def test_sign_pattern_json_and_validation():
    s = wilson.random_signs(2, 2, 4)
    data = json.loads(s.to_json())
    assert data["d"] == 2 and data["M"] == 2 and len(data["entries"]) == 15
    assert all(len(row) == 5 for row in data["entries"])
    back = wilson.SignPattern.from_json(s.to_json())
    np.testing.assert_array_equal(back.values, s.values)
    data["entries"][0][-1] = 0.5
    with pytest.raises(DyadicError):
        wilson.SignPattern.from_dict(data)
    data["entries"].pop()
    with pytest.raises(DyadicError):
        wilson.WilsonSymbol.from_dict(data)
