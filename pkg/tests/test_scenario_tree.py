import json

import numpy as np
import pytest

from robust_dynkin import ScenarioTree, TimeGrid, additive_tree, build_tree, nodes_at_depth, path_of
from robust_dynkin.errors import DepthOutOfRange, EmptyBranching, SizeLimit, UnknownNode, ValidationError

from conftest import binary


def test_time_grid():
    grid = TimeGrid(2.0, 4)
    assert grid.dt == 0.5
    np.testing.assert_array_equal(grid.times, [0, 0.5, 1.0, 1.5, 2.0])
    with pytest.raises(ValidationError):
        TimeGrid(1.0, 0)
    with pytest.raises(ValidationError):
        TimeGrid(0.0, 2)


def test_smallest_tree():
    tree = binary(1)
    assert len(tree) == 3
    assert tree.children[0] == (1, 2)
    assert tree.states[1, 0] == 1.0 and tree.states[2, 0] == -1.0


@pytest.mark.parametrize("N, incs, nodes, leaves", [
    (2, [1, -1], 7, 4),
    (3, [1, 0, -1], 40, 27),     # 1 + 3 + 9 + 27
])
def test_node_counts(N, incs, nodes, leaves):
    tree = additive_tree(TimeGrid(1.0, N), incs)
    assert len(tree) == nodes
    assert len(tree.leaves) == leaves
    assert sum(len(nodes_at_depth(tree, k)) for k in range(N + 1)) == nodes


def test_path_of():
    tree = binary(2)
    np.testing.assert_array_equal(path_of(tree, 0), [[0.0]])
    leaf = tree.children[tree.children[0][0]][0]      # (+1, +1)
    np.testing.assert_array_equal(path_of(tree, leaf)[:, 0], [0, 1, 2])
    for u in range(1, len(tree)):
        p = tree.parent[u]
        np.testing.assert_array_equal(path_of(tree, u), np.vstack([path_of(tree, p), tree.states[u]]))
    with pytest.raises(UnknownNode):
        path_of(tree, 99)


def test_nodes_at_depth():
    tree = binary(2)
    assert nodes_at_depth(tree, 0) == [0]
    assert nodes_at_depth(tree, 2) == [3, 4, 5, 6]
    assert all(tree.is_leaf(u) for u in nodes_at_depth(tree, 2))
    with pytest.raises(DepthOutOfRange):
        nodes_at_depth(tree, 3)


def test_structural_invariants():
    tree = additive_tree(TimeGrid(1.0, 3), [1, 0, -1])
    for u in range(1, len(tree)):
        p = tree.parent[u]
        assert tree.depth[u] == tree.depth[p] + 1
        assert p < u


def test_path_dependent_generator_and_errors():
    # children depend on the whole history: no recombination
    tree = build_tree(TimeGrid(1.0, 2), lambda k, path: [path[-1] + 1, path[-1] - path.max()])
    assert len(tree) == 7
    with pytest.raises(EmptyBranching):
        build_tree(TimeGrid(1.0, 2), lambda k, path: [] if k == 1 else [path[-1] + 1])
    with pytest.raises(SizeLimit):
        additive_tree(TimeGrid(1.0, 5), [1, -1], max_nodes=10)


def test_env_cap(monkeypatch):
    monkeypatch.setenv("RDG_MAX_NODES", "5")
    with pytest.raises(SizeLimit):
        binary(2)


def test_json_round_trip_exact():
    tree = build_tree(TimeGrid(1.0, 2), lambda k, path: [path[-1] + 0.1, path[-1] - 1 / 3], dim=1)
    data = json.loads(json.dumps(tree.to_dict()))
    back = ScenarioTree.from_nodes(TimeGrid(data["grid"]["T"], data["grid"]["N"]), data["nodes"])
    np.testing.assert_array_equal(back.states, tree.states)
    assert back.children == tree.children


def test_rejects_bad_nodes():
    grid = TimeGrid(1.0, 1)
    nodes = [{"id": 0, "depth": 0, "state": [0.0], "parent": None, "children": [1]},
             {"id": 1, "depth": 1, "state": [1.0], "parent": 0, "children": [0]}]
    with pytest.raises(ValidationError):
        ScenarioTree.from_nodes(grid, nodes)
    nodes = [{"id": 0, "depth": 0, "state": [0.5], "parent": None, "children": [1]},
             {"id": 1, "depth": 1, "state": [1.0], "parent": 0, "children": []}]
    with pytest.raises(ValidationError):
        ScenarioTree.from_nodes(grid, nodes)
