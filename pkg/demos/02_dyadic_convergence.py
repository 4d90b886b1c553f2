"""
Restricting Player 1 to a dyadic grid
=====================================

With ``2**n`` grid points Player 1 may only stop at the tree dates that
follow a dyadic time.  Coarse grids can only hurt Player 1, and once the
grid is as fine as the tree the value is recovered exactly.
"""

from robust_dynkin import KernelMenu, PayoffSpec, TimeGrid, additive_tree, backward_induction_grid, convergence_report
from robust_dynkin.solver import grid_eligible

tree = additive_tree(TimeGrid(1.0, 2), [1.0, -1.0])

# an attractive stop at the middle date, nothing at maturity
payoff = PayoffSpec.table(L=[0, 10, 10, 0, 0, 0, 0], U=[12, 11, 11, 0, 0, 0, 0])
menu = KernelMenu.single(tree)

for n in range(3):
    print(f"n={n}: eligible depths {grid_eligible(tree, n).nonzero()[0].tolist()}")

# rows are (n, V^n at the root, full value minus V^n)
for row in convergence_report(tree, payoff, menu, n_max=2):
    print("n=%d  V^n=%g  gap=%g" % row)

# on the coarsest grid the middle date is off limits, so Player 1 waits for a zero payoff
coarse = backward_induction_grid(tree, payoff, menu, 0)
print("values on the coarse grid:", coarse.v.tolist())

# a tree with three dates per unit shows the rounding to the next tree date
tree3 = additive_tree(TimeGrid(1.0, 3), [1.0, -1.0])
print("N=3, n=1 eligible depths:", grid_eligible(tree3, 1).nonzero()[0].tolist())
