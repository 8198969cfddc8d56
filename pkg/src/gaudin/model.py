"""Problem definition for a spin-1/2 rational Gaudin magnet.

A system is ``n`` spins with distinct real inhomogeneities ``epsilons`` and a
uniform magnetic field ``(bx, by, bz)``. Site ``k`` couples to site ``j`` with
strength ``1 / (eps_k - eps_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dc_field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigError, DuplicateEpsilon, EmptySystem

GAP_TOL = 1e-9


@dataclass(frozen=True)
class FieldParams:
    """Field constants derived from ``(bx, by, bz)``.

    ``b_plus = bx + i by`` is the constant added to the Gaudin raising
    operator, ``b_minus`` its conjugate.
    """

    b_plus: complex
    b_minus: complex
    b_perp_sq: float
    b_mag: float
    b_z: float


@dataclass(frozen=True)
class SpinSystem:
    epsilons: tuple[float, ...]
    field: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gap_tol: float = dc_field(default=GAP_TOL, compare=False)

    @property
    def n(self) -> int:
        return len(self.epsilons)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @cached_property
    def eps(self) -> np.ndarray:
        arr = np.array(self.epsilons, dtype=float)
        arr.flags.writeable = False
        return arr

    @cached_property
    def couplings(self) -> np.ndarray:
        """Matrix ``C[i, j] = 1 / (eps_i - eps_j)`` with a zero diagonal."""
        diff = self.eps[:, None] - self.eps[None, :]
        np.fill_diagonal(diff, 1.0)
        c = 1.0 / diff
        np.fill_diagonal(c, 0.0)
        c.flags.writeable = False
        return c

    @cached_property
    def coupling_sums(self) -> np.ndarray:
        """Row sums ``sum_{j != i} 1 / (eps_i - eps_j)``."""
        s = self.couplings.sum(axis=1)
        s.flags.writeable = False
        return s

    @cached_property
    def params(self) -> FieldParams:
        return field_params(self)


def build_system(
    epsilons: Sequence[float],
    field: Sequence[float] = (0.0, 0.0, 0.0),
    gap_tol: float = GAP_TOL,
) -> SpinSystem:
    """Validate inputs and return a :class:`SpinSystem`.

    Raises:
        EmptySystem: no sites were given.
        DuplicateEpsilon: two inhomogeneities are closer than ``gap_tol``.
    """
    eps = [float(e) for e in epsilons]
    if not eps:
        raise EmptySystem("at least one site is required")
    if len(field) != 3:
        raise ConfigError(f"field must have three components, got {len(field)}")
    b = tuple(float(x) for x in field)
    if not all(np.isfinite(eps)) or not all(np.isfinite(b)):
        raise ConfigError("epsilons and field must be finite")
    if len(eps) > 1:
        srt = np.sort(eps)
        gaps = np.diff(srt)
        k = int(np.argmin(gaps))
        if gaps[k] <= gap_tol:
            raise DuplicateEpsilon(
                f"epsilons {float(srt[k])!r} and {float(srt[k + 1])!r} are closer than gap_tol={gap_tol:g}"
            )
    return SpinSystem(tuple(eps), b, gap_tol)  # type: ignore[arg-type]


def field_params(system: SpinSystem) -> FieldParams:
    bx, by, bz = system.field
    b_plus = complex(bx, by)
    b_perp_sq = bx * bx + by * by
    return FieldParams(
        b_plus=b_plus,
        b_minus=b_plus.conjugate(),
        b_perp_sq=b_perp_sq,
        b_mag=float(np.sqrt(b_perp_sq + bz * bz)),
        b_z=bz,
    )
