"""Exact Fock-space engine on the ``2**n`` bitmask basis.

Basis index ``s`` has spin ``k`` up when bit ``k`` of ``s`` is set, so the
fully down-polarised reference state is index 0 and the all-up state is
index ``2**n - 1``. Operators are ``scipy.sparse`` CSR matrices; the
exact-diagonalisation oracle densifies them (dimensions up to 4096).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import (
    DegenerateSpectrum,
    DimensionMismatch,
    SiteOutOfRange,
    SpectralCollision,
    ZeroInPlaneField,
)
from .model import SpinSystem
from .roots import as_root_array

HERMITIAN_TOL = 1e-14
DEGENERACY_TOL = 1e-10

_KINDS = ("raise", "lower", "z")


def basis_bits(n: int) -> np.ndarray:
    """Occupation table of shape ``(2**n, n)``: entry ``[s, k]`` is bit ``k`` of ``s``."""
    return (np.arange(1 << n)[:, None] >> np.arange(n)) & 1


def up_set_index(up_set: Sequence[int]) -> int:
    idx = 0
    for k in up_set:
        idx |= 1 << int(k)
    return idx


def _check_site(system: SpinSystem, site: int) -> int:
    site = int(site)
    if not 0 <= site < system.n:
        raise SiteOutOfRange(f"site {site} outside [0, {system.n})")
    return site


@lru_cache(maxsize=32)
def _local_ops(n: int) -> tuple[tuple[sp.csr_matrix, ...], ...]:
    dim = 1 << n
    idx = np.arange(dim)
    raise_ops, lower_ops, z_ops = [], [], []
    for k in range(n):
        bit = 1 << k
        down = idx[(idx & bit) == 0]
        ones = np.ones(down.size, dtype=complex)
        raise_ops.append(sp.csr_matrix((ones, (down | bit, down)), shape=(dim, dim)))
        lower_ops.append(sp.csr_matrix((ones, (down, down | bit)), shape=(dim, dim)))
        diag = np.where(idx & bit, 0.5, -0.5).astype(complex)
        z_ops.append(sp.diags(diag, format="csr"))
    return tuple(raise_ops), tuple(lower_ops), tuple(z_ops)


def local_operator(system: SpinSystem, kind: str, site: int) -> sp.csr_matrix:
    """Single-site generator ``S^+``, ``S^-`` or ``S^z`` acting on ``site``."""
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    site = _check_site(system, site)
    return _local_ops(system.n)[_KINDS.index(kind)][site].copy()


def _ops(n: int, dtype) -> tuple[tuple[sp.csr_matrix, ...], ...]:
    ops = _local_ops(n)
    if np.dtype(dtype) == np.dtype(complex):
        return ops
    # entries are 0, +-1/2 and 1, so the cast is exact
    return tuple(tuple(op.astype(dtype) for op in group) for group in ops)


def _couplings(system: SpinSystem, dtype) -> np.ndarray:
    if np.dtype(dtype) == np.dtype(complex):
        return system.couplings
    eps = system.eps.astype(np.longdouble)
    diff = eps[:, None] - eps[None, :]
    np.fill_diagonal(diff, 1)
    out = 1 / diff
    np.fill_diagonal(out, 0)
    return out


def spin_component(system: SpinSystem, axis: str, site: int, dtype=complex) -> sp.csr_matrix:
    """Cartesian spin component ``S^x``, ``S^y`` or ``S^z`` of one site."""
    site = _check_site(system, site)
    up, down, z = (ops[site] for ops in _ops(system.n, dtype))
    if axis == "x":
        return ((up + down) * 0.5).tocsr()
    if axis == "y":
        return ((up - down) * (-0.5j)).tocsr()
    if axis == "z":
        return z.copy()
    raise ValueError(f"axis must be 'x', 'y' or 'z', got {axis!r}")


def spin_dot(system: SpinSystem, i: int, j: int, dtype=complex) -> sp.csr_matrix:
    up, down, z = _ops(system.n, dtype)
    return (z[i] @ z[j] + 0.5 * (up[i] @ down[j] + down[i] @ up[j])).tocsr()


def zeeman(system: SpinSystem, site: int | None = None, dtype=complex) -> sp.csr_matrix:
    """``B . S_site``, or ``B . S_tot`` when ``site`` is None."""
    bx, by, bz = system.field
    sites = range(system.n) if site is None else [_check_site(system, site)]
    out = sp.csr_matrix((system.dim, system.dim), dtype=dtype)
    for k in sites:
        out = out + bx * spin_component(system, "x", k, dtype)
        out = out + by * spin_component(system, "y", k, dtype)
        out = out + bz * spin_component(system, "z", k, dtype)
    return out.tocsr()


def conserved_charge(system: SpinSystem, k: int, dtype=complex) -> sp.csr_matrix:
    """Central-spin charge ``R_k = B.S_k + sum_{j != k} S_k.S_j / (eps_k - eps_j)``.

    ``dtype=np.clongdouble`` assembles the matrix in extended precision. This
    is for checking the charge algebra: in double precision, rounding the
    couplings alone leaves commutators of order ``1e-16 * max|coupling|**2``.
    """
    k = _check_site(system, k)
    cpl = _couplings(system, dtype)
    out = zeeman(system, k, dtype)
    for j in range(system.n):
        if j != k:
            out = out + cpl[k, j] * spin_dot(system, k, j, dtype)
    return out.tocsr()


def conserved_charges(system: SpinSystem, dtype=complex) -> list[sp.csr_matrix]:
    return [conserved_charge(system, k, dtype) for k in range(system.n)]


def _check_spectral(system: SpinSystem, u: complex) -> np.ndarray:
    dist = np.abs(u - system.eps)
    if dist.min() <= system.gap_tol:
        k = int(np.argmin(dist))
        raise SpectralCollision(f"u={u!r} collides with eps[{k}]={system.eps[k]!r}")
    return 1.0 / (u - system.eps)


def gaudin_operator(system: SpinSystem, kind: str, u: complex) -> sp.csr_matrix:
    """Generators of the field-shifted Gaudin algebra at spectral parameter ``u``.

    ``raise``: ``B0+ + sum_i S^+_i / (u - eps_i)``
    ``lower``: ``B0- + sum_i S^-_i / (u - eps_i)``
    ``z``:     ``-B_z - sum_i S^z_i / (u - eps_i)``
    """
    weights = _check_spectral(system, u)
    ops = _local_ops(system.n)[_KINDS.index(kind)]
    p = system.params
    const = {"raise": p.b_plus, "lower": p.b_minus, "z": -p.b_z}[kind]
    sign = -1.0 if kind == "z" else 1.0
    out = const * sp.identity(system.dim, dtype=complex, format="csr")
    for w, op in zip(weights, ops):
        out = out + (sign * w) * op
    return out.tocsr()


def gaudin_raising(system: SpinSystem, u: complex) -> sp.csr_matrix:
    return gaudin_operator(system, "raise", u)


def transfer_matrix(system: SpinSystem, u: complex) -> sp.csr_matrix:
    """``S^z(u)^2 + (S^+(u) S^-(u) + S^-(u) S^+(u)) / 2`` built from the generators."""
    sz = gaudin_operator(system, "z", u)
    sp_ = gaudin_operator(system, "raise", u)
    sm = gaudin_operator(system, "lower", u)
    return (sz @ sz + 0.5 * (sp_ @ sm + sm @ sp_)).tocsr()


def transfer_matrix_from_charges(system: SpinSystem, u: complex) -> sp.csr_matrix:
    """Pole expansion ``sum_k 2 R_k / (u - eps_k) + gamma(u)`` of the transfer matrix.

    The regular part is the scalar
    ``B0+ B0- + B_z^2 + (3/4) sum_k 1 / (u - eps_k)^2``.
    """
    weights = _check_spectral(system, u)
    p = system.params
    scalar = p.b_plus * p.b_minus + p.b_z**2 + 0.75 * np.sum(weights**2)
    out = scalar * sp.identity(system.dim, dtype=complex, format="csr")
    for k, w in enumerate(weights):
        out = out + (2.0 * w) * conserved_charge(system, k)
    return out.tocsr()


def is_hermitian(op, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_defect(op) < tol


def hermiticity_defect(op) -> float:
    diff = op - op.conj().T
    if sp.issparse(diff):
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0
    return float(np.abs(diff).max())


def commutator_norm(a, b) -> float:
    """Frobenius norm of ``ab - ba``."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    c = a @ b - b @ a
    if sp.issparse(c):
        return float(np.sqrt(np.sum(np.abs(c.data) ** 2)))
    return float(np.linalg.norm(c))


@dataclass(frozen=True)
class FockVector:
    """Amplitudes over the bitmask basis, stored as ``amplitudes * exp(log_scale)``."""

    amplitudes: np.ndarray
    log_scale: float = 0.0

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n(self) -> int:
        return self.dim.bit_length() - 1

    def to_dense(self) -> np.ndarray:
        return self.amplitudes * np.exp(self.log_scale)

    def amplitude(self, index: int) -> complex:
        return complex(self.amplitudes[index] * np.exp(self.log_scale))

    def log_norm(self) -> float:
        return float(np.log(np.linalg.norm(self.amplitudes)) + self.log_scale)

    def norm(self) -> float:
        return float(np.exp(self.log_norm()))

    def normalized(self) -> np.ndarray:
        return self.amplitudes / np.linalg.norm(self.amplitudes)

    def rescaled(self) -> FockVector:
        """Same vector with the largest amplitude brought to unit modulus."""
        peak = np.abs(self.amplitudes).max()
        if peak == 0.0:
            return self
        return FockVector(self.amplitudes / peak, self.log_scale + float(np.log(peak)))


def basis_state(system: SpinSystem, up_set: Sequence[int] = ()) -> FockVector:
    for k in up_set:
        _check_site(system, k)
    amps = np.zeros(system.dim, dtype=complex)
    amps[up_set_index(up_set)] = 1.0
    return FockVector(amps)


def apply_raisings(system: SpinSystem, params: Sequence[complex], start: FockVector | None = None) -> FockVector:
    """``prod_p S^+(params[p]) |start>`` with per-factor rescaling."""
    vec = basis_state(system) if start is None else start
    amps, log_scale = vec.amplitudes, vec.log_scale
    for u in params:
        amps = gaudin_raising(system, u) @ amps
        peak = np.abs(amps).max()
        if peak > 0.0:
            amps = amps / peak
            log_scale += float(np.log(peak))
    return FockVector(amps, log_scale)


def bethe_vector(system: SpinSystem, roots) -> FockVector:
    """Common-frame Bethe state ``prod_{p=1..n} S^+(lambda_p) |down...down>``.

    The result is normalised to unit max-modulus; the discarded factor is
    kept in ``log_scale``.
    """
    lam = as_root_array(roots)
    if lam.size != system.n:
        raise ValueError(f"expected {system.n} roots, got {lam.size}")
    if system.params.b_perp_sq == 0.0:
        raise ZeroInPlaneField("common-frame Bethe states need a nonzero transverse field")
    return apply_raisings(system, lam)


class EDState(NamedTuple):
    energy: float
    vector: FockVector
    charges: np.ndarray


@dataclass(frozen=True)
class EDSpectrum:
    """Full spectrum of ``H = sum_k weights[k] R_k``, sorted by energy.

    ``vectors[:, a]`` is the normalised eigenvector of ``energies[a]`` and
    ``charges[a, k]`` its expectation value of ``R_k``.
    """

    weights: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    charges: np.ndarray

    def __len__(self) -> int:
        return self.energies.size

    def __getitem__(self, a: int) -> EDState:
        return EDState(float(self.energies[a]), FockVector(self.vectors[:, a].copy()), self.charges[a])

    def __iter__(self) -> Iterator[EDState]:
        return (self[a] for a in range(len(self)))


def _degenerate_clusters(energies: np.ndarray, tol: float) -> list[np.ndarray]:
    breaks = np.flatnonzero(np.diff(energies) > tol) + 1
    return [c for c in np.split(np.arange(energies.size), breaks) if c.size > 1]


def ed_reference(system: SpinSystem, weights: Sequence[float]) -> EDSpectrum:
    """Dense exact diagonalisation of a weighted sum of conserved charges.

    Near-degenerate energy clusters are re-diagonalised with a fixed generic
    combination of the charges so that every returned vector is a joint
    eigenvector of all ``R_k``.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (system.n,):
        raise DimensionMismatch(f"expected {system.n} weights, got shape {w.shape}")
    charges_ops = [r.toarray() for r in conserved_charges(system)]
    h = sum(wk * r for wk, r in zip(w, charges_ops))
    energies, vectors = scipy.linalg.eigh(h)
    clusters = _degenerate_clusters(energies, DEGENERACY_TOL)
    if clusters:
        warnings.warn(
            f"{len(clusters)} near-degenerate energy cluster(s); separating by charge vectors",
            DegenerateSpectrum,
            stacklevel=2,
        )
        generic = np.random.default_rng(20180705).normal(size=system.n)
        g = sum(gk * r for gk, r in zip(generic, charges_ops))
        for c in clusters:
            sub = vectors[:, c]
            _, rot = scipy.linalg.eigh(sub.conj().T @ g @ sub)
            vectors[:, c] = sub @ rot
    charges = np.stack(
        [np.real(np.einsum("ia,ij,ja->a", vectors.conj(), r, vectors)) for r in charges_ops], axis=1
    )
    return EDSpectrum(w, energies, vectors, charges)


def match_charge_vectors(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Optimal one-to-one matching of rows of ``a`` to rows of ``b``.

    Returns ``(cols, dist)`` where row ``i`` of ``a`` is matched to row
    ``cols[i]`` of ``b`` at Euclidean distance ``dist[i]``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    d = cdist(a, b)
    rows, cols = linear_sum_assignment(d)
    order = np.argsort(rows)
    cols = cols[order]
    return cols, d[np.arange(a.shape[0]), cols]
