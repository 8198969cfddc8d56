"""Determinant formulas for scalar products of common-frame Bethe states.

Two products are covered, both valid off shell:

* the dual pairing ``<{mu}|{lambda}>``, where the bra is built from the
  lowering operators ``S^-(mu_i)`` acting on the all-up state. The ``mu`` are
  *not* complex conjugated, so for complex roots this is not the Hermitian
  inner product of two Bethe vectors;
* projections ``<up_{i_1} ... up_{i_M}|{lambda}>`` onto canonical basis states.

Each has a ``direct_*`` counterpart that evaluates the same number by brute
force in Fock space. Results that can over- or underflow are available in
``(phase, log_abs)`` form, like :func:`numpy.linalg.slogdet`.
"""

from __future__ import annotations

from itertools import combinations
from typing import Sequence

import mpmath
import numpy as np

from .errors import BadUpSet, ZeroInPlaneField
from .fock import apply_raisings, bethe_vector, up_set_index
from .model import SpinSystem
from .roots import as_root_array


_LD = np.longdouble
_CLD = np.clongdouble


def overlap_matrix(eps: np.ndarray, lambda_sum: np.ndarray, dtype=complex) -> np.ndarray:
    """``J_aa = sum_{b != a} 1/(eps_a - eps_b) - lambda_sum_a``, ``J_ab = 1/(eps_a - eps_b)``.

    With ``dtype=np.clongdouble`` the entries are formed in extended
    precision from the given doubles.
    """
    real = _LD if np.dtype(dtype) == np.dtype(_CLD) else float
    eps = np.asarray(eps, dtype=real)
    m = eps.size
    diff = eps[:, None] - eps[None, :]
    np.fill_diagonal(diff, 1)
    j = (1 / diff).astype(dtype)
    np.fill_diagonal(j, 0)
    j[np.diag_indices(m)] = j.sum(axis=1) - np.asarray(lambda_sum, dtype=dtype)
    return j


def log_det(m: np.ndarray) -> tuple[complex, float]:
    """``(phase, log|det m|)`` by partially pivoted LU in the dtype of ``m``.

    Written out because LAPACK has no extended-precision routines. Close
    pairs of ``eps`` put entries of size ``1/gap`` in the overlap matrix whose
    leading parts cancel in the determinant, so the extra digits matter.
    """
    a = np.array(m, copy=True)
    n = a.shape[0]
    phase = 1 + 0j
    log_abs = 0.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        piv = a[p, k]
        if piv == 0:
            return 0j, -np.inf
        if p != k:
            a[[k, p]] = a[[p, k]]
            phase = -phase
        mag = abs(piv)
        phase *= complex(piv / mag)
        log_abs += float(np.log(mag))
        if k + 1 < n:
            factors = a[k + 1 :, k] / piv
            a[k + 1 :, k + 1 :] -= factors[:, None] * a[k, k + 1 :][None, :]
    return phase / abs(phase), log_abs


EXTENDED_COND = 1e4
EXTENDED_DPS = 50


def _mp_log_det(eps: np.ndarray, lambda_sum: Sequence) -> tuple[complex, float]:
    n = eps.size
    with mpmath.workdps(EXTENDED_DPS):
        e = [mpmath.mpf(float(x)) for x in eps]
        j = mpmath.matrix(n, n)
        for a in range(n):
            for b in range(n):
                if a != b:
                    j[a, b] = 1 / (e[a] - e[b])
            j[a, a] = sum(1 / (e[a] - e[b]) for b in range(n) if b != a) - lambda_sum[a]
        det = mpmath.det(j)
        if det == 0:
            return 0j, -np.inf
        return complex(det / abs(det)), float(mpmath.log(abs(det)))


def overlap_log_det(eps, lambda_parts: Sequence[np.ndarray]) -> tuple[complex, float]:
    """``(phase, log|det J|)`` with ``lambda_sum`` the sum of ``lambda_parts``.

    Close pairs of ``eps`` make the matrix ill-conditioned through cancelling
    entries of size ``1/gap``. Well-conditioned matrices use the
    extended-precision LU; above condition number ``EXTENDED_COND`` the
    determinant is taken with ``EXTENDED_DPS`` digits.
    """
    eps = np.asarray(eps, dtype=float)
    parts = [np.asarray(x, dtype=complex) for x in lambda_parts]
    if eps.size == 0:
        return 1 + 0j, 0.0
    cond = np.linalg.cond(overlap_matrix(eps, sum(parts)))
    if np.isfinite(cond) and cond <= EXTENDED_COND:
        return log_det(overlap_matrix(eps, sum(x.astype(_CLD) for x in parts), _CLD))
    with mpmath.workdps(EXTENDED_DPS):
        lam = [sum(mpmath.mpc(complex(x[a])) for x in parts) for a in range(eps.size)]
        return _mp_log_det(eps, lam)


def _log_prefactor(b_plus: complex, power: int) -> tuple[complex, float]:
    if power == 0:
        return 1.0 + 0j, 0.0
    if b_plus == 0:
        return 0j, -np.inf
    return (b_plus / abs(b_plus)) ** power, power * float(np.log(abs(b_plus)))


def _from_log(phase: complex, log_abs: float) -> complex:
    if phase == 0:
        return 0j
    return complex(phase * np.exp(log_abs))


def log_determinant_overlap(system: SpinSystem, lam_a, lam_b) -> tuple[complex, float]:
    """``(phase, log|value|)`` of ``(B0+)^n det J`` with ``lambda_sum = Lambda^a + Lambda^b``."""
    p = system.params
    if p.b_perp_sq == 0.0:
        raise ZeroInPlaneField("the determinant overlap needs a nonzero transverse field")
    la = np.asarray(lam_a, dtype=complex)
    lb = np.asarray(lam_b, dtype=complex)
    if la.shape != (system.n,) or lb.shape != (system.n,):
        raise ValueError(f"expected two lists of {system.n} Lambda values")
    sign, logdet = overlap_log_det(system.eps, [la, lb])
    ph, lg = _log_prefactor(p.b_plus, system.n)
    return complex(sign * ph), float(logdet + lg)


def determinant_overlap(system: SpinSystem, lam_a, lam_b) -> complex:
    """Dual pairing of two off-shell states given by their ``Lambda`` variables."""
    return _from_log(*log_determinant_overlap(system, lam_a, lam_b))


def direct_overlap(system: SpinSystem, roots_a, roots_b) -> complex:
    """All-up amplitude of ``prod_{nu in a u b} S^+(nu) |down...down>``."""
    nu = np.concatenate([as_root_array(roots_a), as_root_array(roots_b)])
    vec = apply_raisings(system, nu)
    return vec.amplitude(system.dim - 1)


def permanent(m: np.ndarray) -> complex:
    """Ryser's formula; exponential cost, intended for small matrices."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if n == 0:
        return 1.0 + 0j
    total = 0j
    for size in range(1, n + 1):
        for cols in combinations(range(n), size):
            total += (-1) ** size * np.prod(m[:, cols].sum(axis=1))
    return complex((-1) ** n * total)


def permanent_sum_overlap(system: SpinSystem, roots_a, roots_b) -> complex:
    """``(B0+)^n`` times the sum over ``n``-subsets of ``nu`` of Cauchy permanents.

    Explicit combinatorial form of the dual pairing; cost grows like
    ``C(2n, n) 2^n``.
    """
    nu = np.concatenate([as_root_array(roots_a), as_root_array(roots_b)])
    n = system.n
    total = 0j
    for subset in combinations(range(nu.size), n):
        ell = nu[list(subset)]
        total += permanent(1.0 / (ell[:, None] - system.eps[None, :]))
    return complex(system.params.b_plus**n * total)


def _check_up_set(system: SpinSystem, up_set: Sequence[int]) -> list[int]:
    try:
        sites = [int(k) for k in up_set]
    except (TypeError, ValueError):
        raise BadUpSet(f"up_set must be integer site indices, got {up_set!r}") from None
    if len(set(sites)) != len(sites):
        raise BadUpSet(f"repeated site in up_set {sites}")
    if any(not 0 <= k < system.n for k in sites):
        raise BadUpSet(f"up_set {sites} has sites outside [0, {system.n})")
    return sites


def log_canonical_projection(system: SpinSystem, lam, up_set: Sequence[int]) -> tuple[complex, float]:
    """``(phase, log|value|)`` of ``<up_set|{lambda}>`` from the ``Lambda`` variables."""
    sites = _check_up_set(system, up_set)
    lam_cap = np.asarray(lam, dtype=complex)
    if lam_cap.shape != (system.n,):
        raise ValueError(f"expected {system.n} Lambda values, got shape {lam_cap.shape}")
    m = len(sites)
    p = system.params
    if m < system.n and p.b_perp_sq == 0.0:
        raise ZeroInPlaneField("projections below the all-up state need a nonzero transverse field")
    ph, lg = _log_prefactor(p.b_plus, system.n - m)
    if m == 0:
        return ph, lg
    sign, logdet = overlap_log_det(system.eps[sites], [lam_cap[sites]])
    return complex(sign * ph), float(logdet + lg)


def canonical_projection(system: SpinSystem, lam, up_set: Sequence[int]) -> complex:
    """Amplitude of the canonical state with ``up_set`` up in the Bethe state ``lam``."""
    return _from_log(*log_canonical_projection(system, lam, up_set))


def direct_projection(system: SpinSystem, roots, up_set: Sequence[int]) -> complex:
    """Same amplitude, read off the explicitly constructed Bethe vector."""
    sites = _check_up_set(system, up_set)
    return bethe_vector(system, roots).amplitude(up_set_index(sites))
