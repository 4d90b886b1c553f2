import numpy as np
import pytest

from robust_dynkin import PayoffSpec, StopPair, TimeGrid, additive_tree, check_payoff_bound, eval_g, eval_psi, eval_R
from robust_dynkin.errors import BoundViolated, MissingTableEntry, ValidationError
from robust_dynkin.payoff import payoff_values, reward_table, validate_payoff

from conftest import binary


def test_eval_g_families():
    tree = binary(2)
    lin = PayoffSpec("linear", {"g": [0, 0, 0], "L": [0, 0, 0], "U": [1, 0, 0]})
    assert all(eval_g(lin, tree, u) == 0 for u in range(len(tree)))
    table = PayoffSpec.table(L=[0] * 7, U=[0] * 7, g={u: 0.7 if u == 3 else 0.0 for u in range(7)})
    assert eval_g(table, tree, 3) == 0.7
    asian = PayoffSpec("asian_put", {"K": 1.0})
    assert eval_g(asian, tree, 4) == 0.0
    partial = PayoffSpec.table(L=[0] * 7, U=[0] * 7, g={0: 1.0})
    with pytest.raises(MissingTableEntry):
        eval_g(partial, tree, 3)


def test_eval_R_ties_and_order():
    tree = binary(1)
    spec = PayoffSpec.table(L=[5, 0, 0], U=[2, 0, 0])
    assert eval_R(spec, tree, 1, StopPair(0, 0)) == 5.0      # tie pays L
    assert eval_R(spec, tree, 1, StopPair(1, 0)) == 2.0      # gamma < tau pays U


def test_eval_R_running_reward():
    tree = additive_tree(TimeGrid(2.0, 4), [1, -1])         # dt = 0.5
    leaf = int(tree.leaves[0])
    anc2 = tree.ancestor_at(leaf, 2)
    n = len(tree)
    L = np.zeros(n)
    L[anc2] = 1.0
    spec = PayoffSpec.table(L=L.tolist(), U=(L + 10).tolist(), g=[1.0] * n)
    # oracle: direct sum of g * dt over depths 0, 1 plus L at depth 2
    path = tree.ancestors(leaf)
    expected = sum(1.0 * 0.5 for _ in path[:2]) + L[path[2]]
    assert expected == 2.0
    assert eval_R(spec, tree, leaf, StopPair(2, 3)) == expected


def test_R_depends_only_on_first_stop():
    tree = binary(3)
    rng = np.random.default_rng(1)
    n = len(tree)
    L = rng.uniform(-2, 0, n)
    spec = PayoffSpec.table(L=L.tolist(), U=(L + 1).tolist())
    for leaf in tree.leaves:
        for tau in range(4):
            assert eval_R(spec, tree, int(leaf), StopPair(tau, tau)) == eval_R(spec, tree, int(leaf), StopPair(tau, 3))


@pytest.mark.parametrize("L, U, psi", [(-3, 1, 3), (0, 0, 0), (1, 2, 2)])
def test_psi(L, U, psi):
    tree = binary(1)
    spec = PayoffSpec.table(L=[L, 0, 0], U=[U, 0, 0])
    assert eval_psi(spec, tree, 0) == psi


def test_payoff_bound(e1):
    tree, spec, _ = e1
    assert check_payoff_bound(spec, tree) <= 0
    # constant obstacles L = U = c: slack |c| - max(-c, c, 0) = 0
    for c in (-2.0, 0.0, 3.5):
        assert check_payoff_bound(PayoffSpec.table(L=[c] * 3, U=[c] * 3), tree) == 0.0
    rng = np.random.default_rng(0)
    tree3 = binary(3)
    n = len(tree3)
    d = np.sort(rng.uniform(-5, 5, (n, 2)), axis=1)
    spec = PayoffSpec.table(L=d[:, 0].tolist(), U=d[:, 1].tolist(), g=rng.uniform(-1, 1, n).tolist())
    assert check_payoff_bound(spec, tree3) <= 0


def test_payoff_bound_detects_broken_envelope():
    tree = binary(1)
    values = payoff_values(PayoffSpec.table(L=[1, 1, 1], U=[2, 2, 2]), tree)
    broken = type(values)(values.g, values.L, values.U * 0 - 10, values.dt)
    with pytest.raises(BoundViolated):
        check_payoff_bound(None, tree, values=broken)


def test_reward_table_matches_eval_R():
    tree = binary(2)
    rng = np.random.default_rng(3)
    n = len(tree)
    d = np.sort(rng.uniform(-5, 5, (n, 2)), axis=1)
    spec = PayoffSpec.table(L=d[:, 0].tolist(), U=d[:, 1].tolist(), g=rng.uniform(-1, 1, n).tolist())
    R = reward_table(payoff_values(spec, tree), tree)
    for i, leaf in enumerate(tree.leaves):
        for a in range(3):
            for b in range(3):
                assert R[i, a, b] == pytest.approx(eval_R(spec, tree, int(leaf), StopPair(a, b)), abs=1e-15)


def test_validation():
    tree = binary(1)
    with pytest.raises(ValidationError, match="node 0"):
        validate_payoff(payoff_values(PayoffSpec.table(L=[3, 0, 0], U=[1, 0, 0]), tree), tree)
    ok = payoff_values(PayoffSpec.table(L=[0, 1, 2], U=[1, 1, 3]), tree)
    validate_payoff(ok, tree)
    with pytest.raises(ValidationError, match="leaves"):
        validate_payoff(ok, tree, "triplet")
    with pytest.raises(ValidationError):
        validate_payoff(payoff_values(PayoffSpec.table(L=[0, 1, 2], U=[1, 1, 2], g=[1, 0, 0]), tree), tree, "triplet")
    with pytest.raises(ValidationError, match="bound"):
        validate_payoff(payoff_values(PayoffSpec.table(L=[0, 1, 9], U=[1, 1, 9]), tree), tree, "triplet", bound=5)


def test_families_path_dependent():
    tree = binary(2)
    asian = payoff_values(PayoffSpec("asian_put", {"K": 1.0, "spread": 0.5}), tree)
    leaf = tree.children[tree.children[0][0]][0]            # path 0, 1, 2 -> mean 1
    assert asian.L[leaf] == 0.0
    assert asian.U[leaf] == 0.5
    look = payoff_values(PayoffSpec("lookback_spread", {"K": 0.5, "rate": 0.2}), tree)
    down_up = tree.children[tree.children[0][1]][0]         # path 0, -1, 0 -> max 0
    assert look.L[down_up] == -0.5 and look.g[down_up] == 0.2
    collapsed = payoff_values(PayoffSpec("asian_put", {"K": 1.0, "collapse_terminal": True}), tree)
    np.testing.assert_array_equal(collapsed.L[tree.leaves], collapsed.U[tree.leaves])
    with pytest.raises(ValidationError):
        PayoffSpec("mystery")
