import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import addressing_label, brute_split, cube, cube_weights
from greedytree.distributions import ProductDistribution, sample_input
from greedytree.exceptions import (
    ArityMismatchError,
    ConflictingRestrictionError,
    InfeasibleEpsilonError,
    InvalidSpecError,
    UnsupportedTargetError,
)
from greedytree.targets import (
    AddressingTarget,
    CodedAddressing,
    DisjointParityAddressing,
    JuntaTable,
    Restriction,
    RestrictedTarget,
    address_pmf,
    disjoint_blocks,
    enumerate_address_pmf,
    enumerate_mean,
    expectation,
    free_address_count,
    junta_distance,
    make_agnostic_restriction,
    parity,
    random_junta,
    target_from_spec,
)
from greedytree.tree import reference_tree


def _random_sets(rng, k, n):
    return rng.integers(0, 2, size=(k, n)).astype(bool)


def test_fck_layout_and_arity():
    f = DisjointParityAddressing(2, 3)
    assert f.n_addr == 2 * 3 * 3 and f.arity == 18 + 8
    assert list(f.variable_kinds()).count("memory") == 8
    # x_{i,j} lives at i*c*k + j, so group i is a contiguous block
    sets = disjoint_blocks(2, 3)
    assert sets[1, 6:12].all() and not sets[1, :6].any()
    assert f.memory_index(5) == 18 + 5


def test_fck_eval_matches_definition(rng):
    for c, k in [(1, 2), (2, 2), (1, 3)]:
        f = DisjointParityAddressing(c, k)
        X = rng.integers(0, 2, size=(300, f.arity)).astype(np.uint8)
        expected = [addressing_label(x, f.sets) for x in X]
        np.testing.assert_array_equal(f.eval_batch(X), expected)
        np.testing.assert_array_equal(f.addresses(X), AddressingTarget(f.sets).addresses(X))


def test_addresses_use_msb_first():
    f = DisjointParityAddressing(1, 2)
    x = np.zeros(f.arity, dtype=np.uint8)
    x[0] = 1  # z_1 = 1, z_2 = 0 -> address 0b10
    assert f.addresses(x)[0] == 2


def test_mean_and_split_means_match_cube(rng):
    for sets in (disjoint_blocks(1, 2), _random_sets(rng, 2, 4), _random_sets(rng, 3, 5)):
        f = AddressingTarget(sets)
        X = cube(f.arity)
        labels = np.array([addressing_label(x, sets) for x in X], dtype=float)
        for _ in range(3):
            D = ProductDistribution(rng.uniform(0.15, 0.85, size=f.arity), delta=0.15)
            w = cube_weights(X, D.biases)
            mean, mu0, mu1 = f.split_means(D.biases)
            assert mean == pytest.approx(float(w @ labels), abs=1e-12)
            assert f.mean(D.biases) == pytest.approx(mean, abs=1e-12)
            for i in range(f.arity):
                _, _, b0, b1 = brute_split(labels, X, w, i)
                assert mu0[i] == pytest.approx(b0, abs=1e-12)
                assert mu1[i] == pytest.approx(b1, abs=1e-12)


def test_pmf_three_routes_agree(rng):
    f = DisjointParityAddressing(2, 3)
    generic = AddressingTarget(f.sets)
    for _ in range(5):
        D = ProductDistribution(rng.uniform(0.1, 0.9, size=f.arity), delta=0.1)
        a = address_pmf(f, D)
        np.testing.assert_allclose(a, generic.pmf(D.biases[: f.n_addr]), atol=1e-14)
        np.testing.assert_allclose(a, enumerate_address_pmf(f, D), atol=1e-12)
        assert a.sum() == pytest.approx(1.0)


def test_pmf_with_restriction(rng):
    f = CodedAddressing(3, 2, _random_sets(rng, 2, 6))
    D = ProductDistribution(rng.uniform(0.2, 0.8, size=f.arity), delta=0.2)
    pi = [(0, 1), (3, 0)]
    np.testing.assert_allclose(address_pmf(f, D, pi), enumerate_address_pmf(f, D, pi), atol=1e-12)
    with pytest.raises(ArityMismatchError):
        address_pmf(f, ProductDistribution.uniform(3))


def test_enumeration_cap():
    f = DisjointParityAddressing(3, 3)
    with pytest.raises(UnsupportedTargetError):
        enumerate_address_pmf(f, ProductDistribution.uniform(f.arity), cap=10)
    with pytest.raises(UnsupportedTargetError):
        enumerate_mean(f, np.full(f.arity, 0.5), cap=10)


def test_junta_table_and_helpers(rng):
    f = JuntaTable(4, (1, 3), [0, 1, 1, 0])
    X = cube(4)
    np.testing.assert_array_equal(f.eval_batch(X), X[:, 1] ^ X[:, 3])
    p = parity(4, (1, 3))
    np.testing.assert_array_equal(p.eval_batch(X), f.eval_batch(X))
    b = rng.uniform(0.1, 0.9, size=4)
    assert f.mean(b) == pytest.approx(enumerate_mean(f, b), abs=1e-12)
    g = random_junta(6, 3, 0)
    assert g.eval_batch(cube(6)).shape == (64,)
    np.testing.assert_array_equal(random_junta(6, 3, 0).eval_batch(cube(6)), g.eval_batch(cube(6)))


def test_restriction_behaviour():
    r = Restriction(((2, 1), (0, 0)))
    assert r.as_dict() == {2: 1, 0: 0}
    assert r.extend((1, 1)).indices() == [2, 0, 1]
    with pytest.raises(ConflictingRestrictionError):
        r.union([(2, 0)])
    np.testing.assert_array_equal(r.apply([1, 1, 0]), [0, 1, 1])
    assert r.to_list() == [[2, 1], [0, 0]]


def test_restricted_target(rng):
    base = DisjointParityAddressing(1, 2)
    pi = Restriction(((base.memory_index(0), 1), (base.memory_index(3), 0)))
    f = RestrictedTarget(base, pi)
    X = cube(base.arity)
    labels = np.array([addressing_label(pi.apply(x), base.sets) for x in X], dtype=float)
    np.testing.assert_array_equal(f.eval_batch(X), labels)
    D = ProductDistribution(rng.uniform(0.2, 0.8, size=base.arity), delta=0.2)
    w = cube_weights(X, D.biases)
    assert expectation(f, D) == pytest.approx(float(w @ labels), abs=1e-12)
    mean, mu0, mu1 = f.split_means(D.biases)
    for i in range(base.arity):
        _, _, b0, b1 = brute_split(labels, X, w, i)
        assert mu0[i] == pytest.approx(b0, abs=1e-12) and mu1[i] == pytest.approx(b1, abs=1e-12)
    g = f.restrict([(0, 1)])
    assert isinstance(g, RestrictedTarget) and len(g.restriction) == 3


def test_free_address_count_values():
    assert free_address_count(6, 0.25) == 8
    assert free_address_count(6, 0.125) == 4
    assert free_address_count(4, 1.0) == 8
    with pytest.raises(InfeasibleEpsilonError):
        free_address_count(2, 0.5)
    with pytest.raises(InfeasibleEpsilonError):
        free_address_count(6, 0.0)


@pytest.mark.parametrize("seed", [None, 3])
def test_agnostic_partition(seed):
    base = DisjointParityAddressing(1, 6)
    pi, part, g = make_agnostic_restriction(base, 0.25, seed)
    sets = [set(part.A0), set(part.A1), set(part.Afree)]
    assert set().union(*sets) == set(range(64))
    assert sum(len(s) for s in sets) == 64
    assert len(part.Afree) == 8 and len(part.A0) == len(part.A1) == 28
    forced = pi.as_dict()
    assert all(forced[base.memory_index(a)] == 0 for a in part.A0)
    assert all(forced[base.memory_index(a)] == 1 for a in part.A1)
    assert g.accept == frozenset(part.A1)


def test_junta_distance_closed_form_and_enumeration(rng):
    base = DisjointParityAddressing(1, 3)
    pi, part, g = make_agnostic_restriction(base, 1.0)
    f = RestrictedTarget(base, pi)
    D = ProductDistribution(rng.uniform(0.2, 0.8, size=base.arity), delta=0.2)
    X = cube(base.arity)
    w = cube_weights(X, D.biases)
    brute = float(w @ (f.eval_batch(X) != g.eval_batch(X)))
    assert junta_distance(f, g, D) == pytest.approx(brute, abs=1e-12)
    # pmf-weighted closed form: free addresses disagree when their memory bit is 1
    pmf = address_pmf(base, D)
    expected = sum(pmf[a] * D.biases[base.memory_index(a)] for a in part.Afree)
    assert junta_distance(f, g, D) == pytest.approx(expected, abs=1e-12)
    assert junta_distance(f, f, D) == 0.0


def test_junta_distance_generic_route(rng):
    f = random_junta(8, 3, 1)
    g = random_junta(8, 3, 2)
    D = ProductDistribution(rng.uniform(0.2, 0.8, size=8), delta=0.2)
    X = cube(8)
    w = cube_weights(X, D.biases)
    assert junta_distance(f, g, D) == pytest.approx(float(w @ (f.eval_batch(X) != g.eval_batch(X))))


def test_reference_tree_is_exact(rng):
    for f in (DisjointParityAddressing(1, 2), CodedAddressing(2, 2, _random_sets(rng, 2, 4))):
        tree = reference_tree(f)
        X = sample_input(ProductDistribution.uniform(f.arity), 0, size=2000)
        np.testing.assert_array_equal(tree.predict(X), f.eval_batch(X))
        assert tree.depth == f.n_addr + 1


def test_target_specs():
    f = target_from_spec({"family": "fck", "c": 2, "k": 2})
    assert isinstance(f, DisjointParityAddressing) and f.arity == 12
    g = target_from_spec({"family": "fcks", "c": 2, "k": 2, "sets": [[0, 1], [2, 3]]})
    assert g.sets[1, 2] and g.n_addr == 4
    r = target_from_spec({"family": "restricted", "base": {"family": "fck", "c": 1, "k": 2},
                          "restriction": [[4, 1]]})
    assert isinstance(r, RestrictedTarget)
    j = target_from_spec({"family": "junta", "base": {"family": "fck", "c": 1, "k": 3}, "epsilon": 1.0})
    assert j.memory_values is not None
    assert target_from_spec({"family": "dictator", "n": 3, "i": 2}).eval([0, 0, 1]) == 1
    for bad in ({"family": "fcks", "c": 1, "k": 2, "sets": [[0]]}, {"family": "nope"}, {"c": 1},
                {"family": "fck", "c": 0, "k": 2}, {"family": "fcks", "c": 1, "k": 1, "sets": [[5]]}):
        with pytest.raises(InvalidSpecError):
            target_from_spec(bad)


def test_eval_rejects_wrong_arity():
    with pytest.raises(ArityMismatchError):
        DisjointParityAddressing(1, 2).eval_batch(np.zeros((2, 3)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**9), k=st.integers(1, 3), n=st.integers(1, 7))
def test_pmf_transform_matches_enumeration_property(seed, k, n):
    rng = np.random.default_rng(seed)
    f = AddressingTarget(_random_sets(rng, k, n))
    D = ProductDistribution(rng.uniform(0.05, 0.95, size=f.arity), delta=0.05)
    np.testing.assert_allclose(address_pmf(f, D), enumerate_address_pmf(f, D), atol=1e-12)
