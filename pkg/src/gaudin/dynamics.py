"""Quench dynamics from canonical product states.

The initial state has the spins of ``initial_up_set`` up and all others down.
It is expanded on the Bethe eigenbasis using the canonical projection
determinants, and observables are evolved under ``H = sum_k alpha_k R_k``
with energies ``E = sum_k alpha_k r_k`` read off the ``Lambda`` variables.
Bethe vectors are normalised numerically in Fock space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg

from .bethe import COMMON, BetheSolution, bethe_roots, charge_eigenvalues, to_common
from .errors import (
    BadUpSet,
    ConfigError,
    IncompleteBasis,
    NonHermitianObservable,
    ZeroInPlaneField,
)
from .fock import (
    FockVector,
    basis_state,
    bethe_vector,
    conserved_charges,
    hermiticity_defect,
    spin_component,
    up_set_index,
)
from .model import SpinSystem
from .overlap import canonical_projection

OBSERVABLES = {"sz": "z", "sx": "x", "sy": "y"}
COMPLETENESS_TOL = 1e-6
IMAG_TOL = 1e-10


def parse_observable(text: str) -> tuple[str, int]:
    """``"sz:0"`` -> ``("sz", 0)``."""
    kind, _, site = text.partition(":")
    if kind not in OBSERVABLES or not site.strip().lstrip("-").isdigit():
        raise ConfigError(f"observable must look like 'sz:0', 'sx:1' or 'sy:2', got {text!r}")
    return kind, int(site)


def parse_bits(text: str, n: int) -> tuple[int, ...]:
    """Bit string with character ``k`` for site ``k`` -> tuple of up sites."""
    text = text.strip()
    if len(text) != n or set(text) - {"0", "1"}:
        raise BadUpSet(f"expected a {n}-character string of 0/1, got {text!r}")
    return tuple(k for k, ch in enumerate(text) if ch == "1")


@dataclass(frozen=True)
class QuenchSpec:
    initial_up_set: tuple[int, ...]
    weights: tuple[float, ...]
    observable: tuple[str, int] = ("sz", 0)
    times: tuple[float, float, int] = (0.0, 10.0, 101)

    def __post_init__(self):
        if self.observable[0] not in OBSERVABLES:
            raise ConfigError(f"unknown observable {self.observable[0]!r}")
        if int(self.times[2]) < 1:
            raise ConfigError("the time grid needs at least one point")

    def time_grid(self) -> np.ndarray:
        t0, t1, steps = self.times
        return np.linspace(t0, t1, int(steps))


@dataclass(frozen=True)
class EigenExpansion:
    """Initial state written on the Bethe eigenbasis.

    Attributes:
        labels: seed labels of the eigenstates, in input order.
        charges: ``(m, n)`` charge eigenvalues ``r_k`` per state.
        energies: ``charges @ weights``.
        coefficients: ``c = <n|psi_0>`` with ``|n>`` of unit Fock norm.
        projections: raw determinant values ``<psi_0|{lambda}>``.
        log_norms: log of the Fock norm of each unnormalised Bethe vector.
        vectors: ``(2**n, m)`` normalised Bethe vectors.
        projection_defect: largest ``|det - amplitude| / norm`` over states.
    """

    initial_up_set: tuple[int, ...]
    labels: tuple[str, ...]
    charges: np.ndarray
    energies: np.ndarray
    coefficients: np.ndarray
    projections: np.ndarray
    log_norms: np.ndarray
    vectors: np.ndarray
    projection_defect: float

    @property
    def weight_sum(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))


def default_weights(n: int) -> tuple[float, ...]:
    """Central-spin Hamiltonian ``H = R_0``."""
    return (1.0,) + (0.0,) * (n - 1)


def eigen_expand(
    system: SpinSystem,
    initial_up_set: Sequence[int],
    solutions: Sequence[BetheSolution],
    weights: Sequence[float] | None = None,
) -> EigenExpansion:
    """Expand a canonical product state on a complete set of Bethe states.

    Raises:
        ZeroInPlaneField: ``|B_perp| = 0``.
        IncompleteBasis: wrong number of solutions, or ``sum |c|^2`` off by
            more than 1e-6.
    """
    if system.params.b_perp_sq == 0.0:
        raise ZeroInPlaneField("the eigenbasis expansion uses common-frame Bethe states")
    if len(solutions) != system.dim:
        raise IncompleteBasis(f"need {system.dim} eigenstates, got {len(solutions)}")
    up = tuple(sorted(int(k) for k in initial_up_set))
    basis_state(system, up)  # validates the sites
    index = up_set_index(up)
    w = np.asarray(default_weights(system.n) if weights is None else weights, dtype=float)
    sols = [s if s.frame == COMMON else None for s in solutions]
    if any(s is None for s in sols):
        sols = to_common(system, solutions)

    m = len(sols)
    vectors = np.empty((system.dim, m), dtype=complex)
    log_norms = np.empty(m)
    proj = np.empty(m, dtype=complex)
    charges = np.empty((m, system.n))
    defect = 0.0
    for a, sol in enumerate(sols):
        vec = bethe_vector(system, bethe_roots(system, sol))
        vectors[:, a] = vec.normalized()
        log_norms[a] = vec.log_norm()
        proj[a] = canonical_projection(system, sol.lambdas_cap, up)
        norm = np.exp(log_norms[a])
        defect = max(defect, abs(proj[a] - vec.amplitude(index)) / norm)
        charges[a] = charge_eigenvalues(system, sol)
    coeffs = np.conj(proj) / np.exp(log_norms)
    total = float(np.sum(np.abs(coeffs) ** 2))
    if abs(total - 1.0) > COMPLETENESS_TOL:
        raise IncompleteBasis(f"sum |c_n|^2 = {total:.12g} differs from 1")
    return EigenExpansion(
        initial_up_set=up,
        labels=tuple(s.label for s in sols),
        charges=charges,
        energies=charges @ w,
        coefficients=coeffs,
        projections=proj,
        log_norms=log_norms,
        vectors=vectors,
        projection_defect=float(defect),
    )


def observable_operator(system: SpinSystem, kind: str, site: int):
    if kind not in OBSERVABLES:
        raise ConfigError(f"unknown observable {kind!r}")
    return spin_component(system, OBSERVABLES[kind], site)


def _real_series(values: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.abs(values).max(initial=0.0)))
    if np.abs(values.imag).max(initial=0.0) > IMAG_TOL * scale:
        raise NonHermitianObservable(
            f"expectation values have imaginary parts up to {np.abs(values.imag).max():.3g}"
        )
    return values.real.copy()


def evolve_observable(system: SpinSystem, spec: QuenchSpec, expansion: EigenExpansion) -> np.ndarray:
    """``O(t) = sum_{n,m} conj(c_n) c_m exp(-i (E_m - E_n) t) <n|O|m>`` on ``spec.time_grid()``."""
    if tuple(sorted(spec.initial_up_set)) != expansion.initial_up_set:
        raise ConfigError("the expansion was built for a different initial state")
    op = observable_operator(system, *spec.observable)
    if hermiticity_defect(op) > 0.0:
        raise NonHermitianObservable(f"{spec.observable} is not Hermitian")
    energies = expansion.charges @ np.asarray(spec.weights, dtype=float)
    v = expansion.vectors
    o_nm = v.conj().T @ (op @ v)
    t = spec.time_grid()
    amps = expansion.coefficients[None, :] * np.exp(-1j * t[:, None] * energies[None, :])
    values = np.einsum("tn,nm,tm->t", amps.conj(), o_nm, amps)
    return _real_series(values)


@lru_cache(maxsize=8)
def _spectral(system: SpinSystem, weights: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray]:
    h = sum(w * r.toarray() for w, r in zip(weights, conserved_charges(system)))
    return scipy.linalg.eigh(h)


def direct_propagate(system: SpinSystem, weights: Sequence[float], initial: FockVector, t: float) -> FockVector:
    """``exp(-i H t) |initial>`` from the dense spectral decomposition of ``H``."""
    energies, vecs = _spectral(system, tuple(float(w) for w in weights))
    psi = initial.to_dense()
    out = vecs @ (np.exp(-1j * energies * t) * (vecs.conj().T @ psi))
    return FockVector(out)


def direct_series(system: SpinSystem, spec: QuenchSpec) -> np.ndarray:
    """Oracle for :func:`evolve_observable` by explicit propagation."""
    psi0 = basis_state(system, spec.initial_up_set)
    op = observable_operator(system, *spec.observable)
    values = []
    for t in spec.time_grid():
        psi = direct_propagate(system, spec.weights, psi0, t).to_dense()
        values.append(np.vdot(psi, op @ psi))
    return _real_series(np.asarray(values))
