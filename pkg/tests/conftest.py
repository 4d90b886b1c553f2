import pytest

from robust_dynkin import Kernel, KernelMenu, PayoffSpec, TimeGrid, additive_tree


def binary(N, T=1.0):
    return additive_tree(TimeGrid(T, N), [1.0, -1.0])


@pytest.fixture
def e1():
    """N=1 binary, single fair kernel, L(root)=0, U(root)=2, leaves (1, 3)."""
    tree = binary(1)
    payoff = PayoffSpec.table(L=[0, 1, 3], U=[2, 1, 3])
    return tree, payoff, KernelMenu.single(tree)


@pytest.fixture
def e2(e1):
    tree, payoff, _ = e1
    menu = KernelMenu(tree, {0: [Kernel(0.0, (0.5, 0.5)), Kernel(1.0, (0.9, 0.1))]})
    return tree, payoff, menu


@pytest.fixture
def e3():
    tree = binary(2)
    payoff = PayoffSpec.table(L=[0, 10, 10, 0, 0, 0, 0], U=[12, 11, 11, 0, 0, 0, 0])
    return tree, payoff, KernelMenu.single(tree)


# one line per acceptance criterion, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
