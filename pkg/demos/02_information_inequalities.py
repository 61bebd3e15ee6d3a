"""Classical information inequalities evaluated on grid densities.

Each check returns an ``InequalityReport`` with both sides and the margin.
"""
import numpy as np

from stablefisher import (DensityGrid, Grid, StableLaw, TailModel, convolve,
                          information_inequalities,
                          stable_density, three_convolution_fisher, uniform_density)

g = Grid.symmetric(16.0, 2 ** 14)
x = g.nodes()
phi = np.exp(-x * x / 2) / np.sqrt(2 * np.pi)
gauss = DensityGrid(g, phi, TailModel(), -x * phi)
cauchy = stable_density(StableLaw(1.0)).density

for name, d in (("gaussian", gauss), ("cauchy", cauchy)):
    print(name)
    for r in information_inequalities(d, d):
        print(f"  {r.name:<24} lhs={r.lhs:.6g} rhs={r.rhs:.6g} ok={r.satisfied}")

# A single uniform has infinite information, yet three of them convolved do not.
u = uniform_density(0.0, 1.0, 2 ** -12)
r = three_convolution_fisher(u, u, u)
print(f"I(U*U*U) = {r.lhs:.5f} (bound {r.rhs:g})")

u2 = convolve(u, u)
r = three_convolution_fisher(u, u, u2)
print(f"I(U*U*(U*U)) = {r.lhs:.5f} (bound {r.rhs:g})")
