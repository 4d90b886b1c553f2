import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_dynkin import (
    Kernel,
    KernelMenu,
    TimeGrid,
    additive_tree,
    enumerate_policies,
    inf_expectation,
    measure_of,
    mutually_singular,
    one_step_inf_expectation,
    paste_policies,
    policy_expectation,
)
from robust_dynkin.ambiguity import leaf_probabilities, policy_choices, policy_partitions
from robust_dynkin.errors import (
    DepthMismatch,
    EmptyMenu,
    EnumerationTooLarge,
    IncompletePolicy,
    OverlappingPartition,
    ValidationError,
)
from robust_dynkin.runner import pasting_formula

from conftest import binary

FAIR, SKEW = Kernel(0, (0.5, 0.5)), Kernel(1, (0.9, 0.1))


def two_kernel_menu(tree):
    return KernelMenu.uniform(tree, [FAIR, SKEW])


def test_measure_of():
    tree = binary(1)
    np.testing.assert_array_equal(measure_of(tree, KernelMenu.single(tree), {0: 0}).leaf_prob, [0.5, 0.5])
    tree = binary(2)
    menu = KernelMenu(tree, {0: [SKEW], 1: [FAIR], 2: [FAIR]})
    # product along paths: 0.9*0.5, 0.9*0.5, 0.1*0.5, 0.1*0.5
    np.testing.assert_allclose(measure_of(tree, menu, {0: 0, 1: 0, 2: 0}).leaf_prob,
                               [0.45, 0.45, 0.05, 0.05], atol=1e-15)
    with pytest.raises(IncompletePolicy):
        measure_of(tree, menu, {0: 0, 1: 0})


def test_measure_mass_consistency():
    tree = additive_tree(TimeGrid(1.0, 3), [1, 0, -1])
    rng = np.random.default_rng(0)
    menu = KernelMenu(tree, {int(u): [Kernel(0, tuple(rng.dirichlet(np.ones(3))))] for u in tree.internal})
    m = measure_of(tree, menu, {int(u): 0 for u in tree.internal})
    for u in tree.internal:
        assert m.node_prob[list(tree.children[u])].sum() == pytest.approx(m.node_prob[u], abs=1e-15)
    assert m.leaf_prob.sum() == pytest.approx(1.0, abs=1e-12)


def test_one_step_examples():
    assert one_step_inf_expectation([FAIR, SKEW], [1, 3]) == (pytest.approx(1.2), 1)
    value, idx = one_step_inf_expectation([Kernel(0, (0.2, 0.8))], [1.0, 2.0])
    assert (value, idx) == (pytest.approx(1.8), 0)
    value, idx = one_step_inf_expectation([FAIR, SKEW, Kernel(2, (0.3, 0.7))], [4.1, 4.1])
    assert idx == 0 and value == pytest.approx(4.1, abs=1e-14)
    with pytest.raises(EmptyMenu):
        one_step_inf_expectation([], [1.0])


weights_st = st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3)


@st.composite
def menus_and_values(draw):
    k = draw(st.integers(1, 4))
    rows = [np.array(draw(weights_st)) for _ in range(k)]
    w = np.array([r / r.sum() for r in rows])
    v = np.array(draw(st.lists(st.floats(-10, 10), min_size=3, max_size=3)))
    return w, v


@given(menus_and_values(), st.lists(st.floats(0, 5), min_size=3, max_size=3), st.floats(-5, 5))
def test_one_step_monotone_and_translation(mv, bump, c):
    w, v = mv
    base, _ = one_step_inf_expectation(w, v)
    higher, _ = one_step_inf_expectation(w, v + np.array(bump))
    assert higher >= base - 1e-12
    shifted, _ = one_step_inf_expectation(w, v + c)
    assert shifted == pytest.approx(base + c, abs=1e-9)


@given(menus_and_values(), menus_and_values(), st.floats(0, 1))
def test_one_step_concave(mv1, mv2, lam):
    w, x = mv1
    _, y = mv2
    mix, _ = one_step_inf_expectation(w, lam * x + (1 - lam) * y)
    a, _ = one_step_inf_expectation(w, x)
    b, _ = one_step_inf_expectation(w, y)
    assert mix >= lam * a + (1 - lam) * b - 1e-9


def test_policy_expectation(e2):
    tree, _, menu = e2
    assert policy_expectation(tree, menu, {0: 1}, [1, 3]) == pytest.approx(1.2)
    assert policy_expectation(tree, menu, {0: 0}, [7, 7]) == pytest.approx(7)
    # a kernel that never reaches node 2's subtree: changes there do not matter
    tree2 = binary(2)
    menu2 = KernelMenu(tree2, {0: [Kernel(0, (1.0, 0.0))], 1: [FAIR], 2: [FAIR, SKEW]})
    vals = [1, 2, 3, 4]
    assert policy_expectation(tree2, menu2, {0: 0, 1: 0, 2: 0}, vals) == \
        policy_expectation(tree2, menu2, {0: 0, 1: 0, 2: 1}, vals)


def test_enumerate_policies_counts_and_order():
    tree = binary(2)
    assert len(list(enumerate_policies(tree, KernelMenu.single(tree)))) == 1
    menu = two_kernel_menu(tree)
    pols = list(enumerate_policies(tree, menu))
    assert len(pols) == 8
    assert [tuple(p.values()) for p in pols] == list(itertools.product(range(2), repeat=3))
    with pytest.raises(EnumerationTooLarge):
        list(enumerate_policies(tree, menu, cap=7))
    # partitions cover the space without overlap
    parts = policy_partitions(tree, menu, 4)
    joined = [tuple(p.values()) for pre in parts for p in enumerate_policies(tree, menu, prefix=pre)]
    assert sorted(joined) == sorted(tuple(p.values()) for p in pols)
    # vectorised choices agree with the iterator
    choices = policy_choices(tree, menu)
    assert [tuple(r) for r in choices] == [tuple(p.values()) for p in pols]
    probs = leaf_probabilities(tree, menu, choices)
    for j, p in enumerate(pols):
        np.testing.assert_allclose(probs[:, j], measure_of(tree, menu, p).leaf_prob, atol=1e-15)


def random_menu(rng, tree, max_kernels=3, sparse=0.3):
    menus = {}
    for u in tree.internal:
        arity = len(tree.children[u])
        ks = []
        for k in range(int(rng.integers(1, max_kernels + 1))):
            w = rng.dirichlet(np.ones(arity))
            if rng.random() < sparse:
                w = np.zeros(arity)
                w[rng.integers(arity)] = 1.0
            ks.append(Kernel(k, tuple(w / w.sum())))
        menus[int(u)] = ks
    return KernelMenu(tree, menus)


@pytest.mark.parametrize("seed", range(8))
def test_tower_property_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    tree = additive_tree(TimeGrid(1.0, int(rng.integers(1, 4))), [1, -1] if seed % 2 else [1, 0, -1])
    if len(tree.internal) > 10:
        tree = binary(3)
    menu = random_menu(rng, tree)
    xi = rng.uniform(-5, 5, len(tree.leaves))
    values, _ = inf_expectation(tree, menu, xi)
    brute = min(policy_expectation(tree, menu, p, xi) for p in enumerate_policies(tree, menu))
    assert values[0] == pytest.approx(brute, abs=1e-12)


def test_paste_identity_and_restore():
    tree = binary(2)
    menu = two_kernel_menu(tree)
    base = {0: 1, 1: 0, 2: 1}
    assert paste_policies(tree, base, [([1, 2], base)], 1) == base
    other = {0: 0, 1: 1, 2: 0}
    pasted = paste_policies(tree, base, [([1], other)], 1)
    assert pasted == {0: 1, 1: 1, 2: 1}
    restored = paste_policies(tree, pasted, [([1], base)], 1)
    np.testing.assert_array_equal(measure_of(tree, menu, restored).node_prob, measure_of(tree, menu, base).node_prob)


def test_paste_measure_example():
    # N=2, s=1: patch node 1 with a policy picking the skewed kernel there
    tree = binary(2)
    menu = two_kernel_menu(tree)
    base = {0: 1, 1: 0, 2: 0}
    patch = {0: 0, 1: 1, 2: 0}
    got = measure_of(tree, menu, paste_policies(tree, base, [([1], patch)], 1)).leaf_prob
    # by hand: P(node1)=0.9 under base, then patch kernel (0.9, 0.1); node 2 keeps (0.5, 0.5)
    np.testing.assert_allclose(got, [0.81, 0.09, 0.05, 0.05], atol=1e-15)
    np.testing.assert_allclose(pasting_formula(tree, menu, base, [([1], patch)], 1), got, atol=1e-15)


def test_paste_errors():
    tree = binary(2)
    base = {0: 0, 1: 0, 2: 0}
    with pytest.raises(OverlappingPartition):
        paste_policies(tree, base, [([1], base), ([1, 2], base)], 1)
    with pytest.raises(DepthMismatch):
        paste_policies(tree, base, [([3], base)], 1)


def test_mutual_singularity():
    tree = additive_tree(TimeGrid(1.0, 1), [2, 1, -1, -2])
    vol = KernelMenu(tree, {0: [Kernel(1, (0.5, 0.5, 0, 0)), Kernel(2, (0, 0, 0.5, 0.5))]})
    assert mutually_singular(tree, vol, {0: 0}, {0: 1})
    assert not mutually_singular(tree, vol, {0: 0}, {0: 0})
    drift = two_kernel_menu(binary(1))
    assert not mutually_singular(drift.tree, drift, {0: 0}, {0: 1})


def test_menu_validation():
    tree = binary(1)
    with pytest.raises(ValidationError):
        KernelMenu(tree, {0: [Kernel(0, (0.6, 0.6))]})
    with pytest.raises(ValidationError):
        KernelMenu(tree, {0: [Kernel(0, (1.0,))]})
    with pytest.raises(EmptyMenu):
        KernelMenu(tree, {0: []})


def test_paste_missing_patch_entry():
    tree = binary(2)
    with pytest.raises(IncompletePolicy) as info:
        paste_policies(tree, {0: 0, 1: 0, 2: 0}, [([2], {0: 0, 1: 0})], 1)
    assert info.value.witness == 2
