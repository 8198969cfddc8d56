"""Quench dynamics from a product state, by eigenbasis expansion.

Run with ``python3 tutorials/03_quench.py``.
"""

import numpy as np

from gaudin import QuenchSpec, build_system, eigen_expand, evolve_observable, solve_all, solve_common
from gaudin.dynamics import direct_series

# One spin in a transverse field precesses: <S^z>(t) = cos(B_x t) / 2.
rabi = build_system([0.0], (1.0, 0.0, 0.0))
spec = QuenchSpec((0,), (1.0,), ("sz", 0), (0.0, 10.0, 11))
series = evolve_observable(rabi, spec, eigen_expand(rabi, (0,), solve_all(rabi)))
print("t     <S^z>     cos(t)/2")
for t, v in zip(spec.time_grid(), series):
    print(f"{t:4.1f}  {v:+.6f}  {0.5 * np.cos(t):+.6f}")

# Four spins, central-spin Hamiltonian H = R_0, starting from |up down up down>.
system = build_system([0.0, 1.0, 2.3, 3.1], (0.3, 0.4, 0.5))
spec = QuenchSpec((0, 2), (1.0, 0.0, 0.0, 0.0), ("sz", 0), (0.0, 20.0, 201))
expansion = eigen_expand(system, spec.initial_up_set, solve_common(system))
print(f"\nsum |c_n|^2 = {expansion.weight_sum:.12f}")
print("largest weights:", np.round(np.sort(np.abs(expansion.coefficients) ** 2)[::-1][:4], 4))

values = evolve_observable(system, spec, expansion)
oracle = direct_series(system, spec)
print(f"max deviation from direct propagation: {np.abs(values - oracle).max():.1e}")
print(f"central spin: <S^z>(0) = {values[0]:+.4f}, time average = {values.mean():+.4f}")
