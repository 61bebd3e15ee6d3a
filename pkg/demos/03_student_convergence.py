"""Normalized sums of Student-t(1.5) variables approach their stable limit.

The limit law and normalizing constants are fitted from the characteristic
function near zero; the table then tracks relative Fisher information.
"""
from stablefisher import SourceModel, calibrate_limit, convergence_experiment

src = SourceModel.student_t(1.5)
law, norm = calibrate_limit(src)
print(f"fitted limit: alpha={law.alpha:.4f} c={law.c:.6f}")

rows = convergence_experiment(src, [2, 4, 8, 16, 32, 64])
print(f"{'n':>4} {'I(Z_n)':>10} {'I(Z_n || S)':>12} {'sup gap':>10}")
for r in rows:
    print(f"{r.n:>4} {r.fisher:>10.5f} {r.rel_fisher:>12.5f} {r.sup_density_gap:>10.2e}")

# The Cauchy law is a fixed point: nothing moves.
rows = convergence_experiment(SourceModel.cauchy(), [1, 2, 4, 8])
print("cauchy max relative Fisher:", max(abs(r.rel_fisher) for r in rows))
