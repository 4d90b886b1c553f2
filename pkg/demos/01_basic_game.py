"""
A two-date robust Dynkin game
=============================

One binomial step, two priors for the up-move probability.  Player 1
collects ``L`` by stopping first; Player 2 pays ``U`` to stop first.
"""

import numpy as np

from robust_dynkin import (
    Kernel,
    KernelMenu,
    PayoffSpec,
    TimeGrid,
    additive_tree,
    backward_induction,
    extract_gamma_star,
    extract_p_star,
    extract_tau_star,
)

# a root with two children: state +1 and state -1
tree = additive_tree(TimeGrid(1.0, 1), [1.0, -1.0])
print("nodes:", len(tree), "leaves:", tree.leaves)

# obstacles per node: the leaves pay 1 and 3 to whoever is holding the claim
payoff = PayoffSpec.table(L=[0, 1, 3], U=[2, 1, 3])

# Nature may pick the fair coin or a coin heavily tilted towards the cheap leaf
menu = KernelMenu(tree, {0: [Kernel(0.0, (0.5, 0.5)), Kernel(1.0, (0.9, 0.1))]})

sol = backward_induction(tree, payoff, menu)
print("value at the root:", sol.value)          # 0.9 * 1 + 0.1 * 3 = 1.2
print("continuation at the root:", sol.cont[0])
print("worst-case kernel per node:", extract_p_star(sol))

# with a single fair kernel the continuation is 2, which hits U: Player 2 stops at once
fair = backward_induction(tree, payoff, KernelMenu.single(tree))
print("fair-coin value:", fair.value)
print("Player 2 stop depths:", extract_gamma_star(fair).depth_histogram(tree))
print("Player 1 stop depths:", extract_tau_star(fair).depth_histogram(tree))
np.testing.assert_allclose([sol.value, fair.value], [1.2, 2.0])
