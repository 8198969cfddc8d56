"""From Lambda variables to Bethe roots, vectors and determinant scalar products.

Run with ``python3 tutorials/02_roots_and_overlaps.py``.
"""

import itertools

import numpy as np

from gaudin import (
    bethe_roots,
    bethe_vector,
    build_system,
    canonical_projection,
    determinant_overlap,
    direct_overlap,
    direct_projection,
    gamma_residuals,
    lambdas_from_roots,
    roots_from_lambdas,
    solve_common,
)
from gaudin.fock import ed_reference
from gaudin.roots import conjugation_defect, round_trip_error

system = build_system([0.0, 1.0, 2.3, 3.1], (0.3, 0.4, 0.5))
state = solve_common(system)[9]
print(f"state {state.label}: Lambda = {np.round(state.lambdas_cap, 6)}")

# Lambda_i is the logarithmic derivative at eps_i of the polynomial whose zeros
# are the roots, so the roots follow from a linear solve plus root finding.
roots = roots_from_lambdas(system, state.lambdas_cap)
print("roots:", np.round(roots.roots, 6))
print(f"round trip {round_trip_error(system, state.lambdas_cap, roots):.1e}, "
      f"conjugation defect {conjugation_defect(roots):.1e}")

# The roots satisfy the usual root-form Bethe equations.
roots = bethe_roots(system, state)
print(f"root-form residual {np.abs(gamma_residuals(system, roots)).max():.1e}")

# The product of raising operators at the roots is an eigenvector.
v = bethe_vector(system, roots).normalized()
ed = ed_reference(system, np.sqrt([2.0, 3.0, 4.0, 5.0]))
print(f"best |cosine| with an exact eigenvector: {np.abs(ed.vectors.conj().T @ v).max():.12f}")

# Amplitudes on the canonical basis come from small determinants of Lambda alone.
print("\nup set   determinant            Fock amplitude")
for up in [(), (0,), (1, 3), (0, 1, 2, 3)]:
    a = canonical_projection(system, state.lambdas_cap, up)
    b = direct_projection(system, roots, up)
    print(f"{str(up):9s} {a:.10f}  {b:.10f}")

# The same determinant gives the pairing of two arbitrary (off-shell) states.
rng = np.random.default_rng(0)
za = rng.normal(size=4) + 0.5j
zb = rng.normal(size=4) - 0.7j
det = determinant_overlap(system, lambdas_from_roots(system, za), lambdas_from_roots(system, zb))
print(f"\noff-shell pairing: determinant {det:.10f}")
print(f"                   contraction {direct_overlap(system, za, zb):.10f}")

total = sum(
    abs(canonical_projection(system, state.lambdas_cap, up)) ** 2
    for m in range(5)
    for up in itertools.combinations(range(4), m)
)
print(f"\nsum of |amplitude|^2 = {total:.10f}, squared Fock norm = {bethe_vector(system, roots).norm() ** 2:.10f}")
