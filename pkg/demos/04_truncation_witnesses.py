"""Splitting a heavy-tailed summand into a bounded core and a tail.

With delta_n the tail mass, the sum is a binomial mixture over how many
summands landed in the tail. The reports check the uniform bounds that make
the Fisher information of Z_n stay bounded.
"""
from stablefisher import (SourceModel, binomial_reconstruction, fisher_boundedness_witness,
                          calibrate_limit, truncate, verify_lemma71, verify_lemma72)

src = SourceModel.student_t(1.5)
_, norm = calibrate_limit(src)
trs = [truncate(src, n, norm) for n in (8, 16, 32, 64)]
for t in trs:
    print(f"n={t.n:>3} delta_n={t.delta_n:.5f} n*delta_n={t.n * t.delta_n:.4f}")

r = verify_lemma71(trs)
print(f"core constant ratio {r.lhs:.3f} (bound {r.rhs:g}) ok={r.satisfied}")
r = verify_lemma72(trs, lambda n: n, trs[0].alpha / 2, 0.5)
print(f"envelope constant {r.rhs:.4f} ok={r.satisfied}")

_, _, err = binomial_reconstruction(trs[0])
print("binomial reconstruction L1 error:", err)

r = fisher_boundedness_witness(src, (8, 16, 32))
print(f"{r.name}: lhs={r.lhs:.5g} rhs={r.rhs:.5g} ok={r.satisfied}")
