"""Stable densities on a grid, their scores and Fisher information.

Run with ``python3 demos/01_stable_densities.py``.
"""
import numpy as np

from stablefisher import StableLaw, fisher, score_bounds, stable_density

# The Cauchy law has a closed form, which makes a good sanity check.
sd = stable_density(StableLaw(1.0))
x = sd.grid.nodes()
m = np.abs(x) <= 20
exact = 1 / (np.pi * (1 + x[m] ** 2))
print("cauchy sup error on [-20, 20]:", np.max(np.abs(sd.values[m] - exact)))
print("cauchy Fisher information (exact 1/2):", fisher(sd.density))

# Skewed laws: |score| stays between c1/(1+|x|) and c2/(1+|x|).
for alpha, beta in [(1.5, 0.0), (1.5, 0.5), (0.8, 0.3)]:
    sd = stable_density(StableLaw(alpha, beta))
    b = score_bounds(sd)
    print(f"alpha={alpha} beta={beta}: I={fisher(sd.density):.6f}  c1={b.c1:.4f} c2={b.c2:.4f}")

# Scaling rule I(bX) = I(X) / b^2, checked on a symmetric law.
law = StableLaw(1.2)
i1 = fisher(stable_density(law).density)
i2 = fisher(stable_density(StableLaw(1.2, 0.0, 2.0 ** 1.2)).density)
print("I(X) / I(2X):", i1 / i2)
