"""
Volatility uncertainty on an Euler lattice
==========================================

Each volatility level opens its own block of children, so the priors it
induces live on disjoint sets of paths.  We price an Asian-put style game
on the lattice and look at how path increments scale with the window.
"""

from robust_dynkin import PayoffSpec, SdeSpec, backward_induction, build_lattice, check_increment_scaling
from robust_dynkin.ambiguity import measure_of
from robust_dynkin.solver import extract_gamma_star, extract_tau_star

spec = SdeSpec(horizon=1.0, steps=3, controls=[0.5, 1.0], kappa=1.0,
               drift={"family": "constant", "value": -0.5})
tree, menu = build_lattice(spec)
print("lattice nodes:", len(tree), "children per node:", len(tree.children[0]))
print("kernels at the root:")
for k in menu.kernels(0):
    print("  sigma=%s weights=%s" % (k.label, [float(w) for w in k.weights]))

low = {int(u): 0 for u in tree.internal}
high = {int(u): 1 for u in tree.internal}
overlap = measure_of(tree, menu, low).support & measure_of(tree, menu, high).support
print("paths charged by both constant-volatility priors:", len(overlap))

# Player 1 holds a put on the running mean, Player 2 can cancel for a fee of 0.3
payoff = PayoffSpec("asian_put", {"K": 0.0, "shift": 0.0, "spread": 0.3})
sol = backward_induction(tree, payoff, menu)
print("game value:", round(sol.value, 6))
print("Player 1 stop depths:", extract_tau_star(sol).depth_histogram(tree))
print("Player 2 stop depths:", extract_gamma_star(sol).depth_histogram(tree))

# E[max |X_r - X_0|] over the window, divided by sqrt(window)
rows = check_increment_scaling(SdeSpec(horizon=1.0, steps=8, controls=[0.5, 1.0], kappa=1.0), [4, 2, 1])
for delta, mean, ratio in rows:
    print(f"delta={delta:.3f}  E max increment={mean:.4f}  ratio={ratio:.4f}")
