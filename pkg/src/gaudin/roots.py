"""Conversion between eigenvalue-based variables and explicit Bethe roots.

For a set of roots ``lambda_p`` the variables
``Lambda_i = sum_p 1 / (eps_i - lambda_p)`` are the logarithmic derivative
of ``Q(z) = prod_p (z - lambda_p)`` at the nodes ``eps_i``. Going back from
``Lambda`` to roots means finding the monic ``Q`` whose log-derivative takes
the prescribed values at every node. Writing ``Q`` in the Lagrange basis on
the nodes,

    Q(z) = A(z) * (1 + sum_j w_j / (z - eps_j)),   A(z) = prod_j (z - eps_j),

the ``n`` conditions ``Q'(eps_i) = Lambda_i Q(eps_i)`` become the linear
system ``J w = -1`` with ``J_ii = sum_{k != i} 1/(eps_i - eps_k) - Lambda_i``
and ``J_ij = 1/(eps_i - eps_j)``. The roots are then the eigenvalues of the
generalised companion matrix ``diag(eps) - w 1^T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import mpmath
import numpy as np

from .errors import CoincidentRoots, RoundTripFailure, SingularConversion, SpectralCollision
from .model import SpinSystem

ROUND_TRIP_TOL = 1e-8
COND_LIMIT = 1e12
ROOT_GAP = 1e-10
REAL_SNAP = 1e-9
ROOT_UNCERTAINTY = 1e-10
EXTENDED_DPS = 60


@dataclass(frozen=True)
class RootSet:
    roots: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.roots, dtype=complex).ravel()
        object.__setattr__(self, "roots", arr)

    def __len__(self) -> int:
        return self.roots.size

    def __iter__(self):
        return iter(self.roots)


def as_root_array(roots) -> np.ndarray:
    if isinstance(roots, RootSet):
        return roots.roots
    return np.asarray(roots, dtype=complex).ravel()


def _check_separated(system: SpinSystem, lam: np.ndarray) -> None:
    if lam.size == 0:
        return
    dist = np.abs(lam[:, None] - system.eps[None, :])
    if dist.min() <= system.gap_tol:
        p, i = np.unravel_index(np.argmin(dist), dist.shape)
        raise SpectralCollision(f"root {lam[p]!r} collides with eps[{i}]={system.eps[i]!r}")


def _check_distinct(lam: np.ndarray) -> None:
    if lam.size < 2:
        return
    d = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(d, np.inf)
    if d.min() <= ROOT_GAP:
        p, q = np.unravel_index(np.argmin(d), d.shape)
        raise CoincidentRoots(f"roots {p} and {q} coincide: {lam[p]!r}")


def lambdas_from_roots(system: SpinSystem, rootset) -> np.ndarray:
    """``Lambda_i = sum_p 1 / (eps_i - lambda_p)`` as a complex array."""
    lam = as_root_array(rootset)
    _check_separated(system, lam)
    return (1.0 / (system.eps[:, None] - lam[None, :])).sum(axis=1)


def _weights(nodes: np.ndarray, target: np.ndarray) -> np.ndarray:
    m = nodes.size
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    jm = (1.0 / diff).astype(np.result_type(nodes, target, float))
    np.fill_diagonal(jm, 0.0)
    jm[np.diag_indices(m)] = jm.sum(axis=1) - target
    # column equilibration before the condition estimate
    scale = np.abs(jm).max(axis=0)
    scale[scale == 0.0] = 1.0
    scaled = jm / scale
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularConversion(f"Lambda -> roots system is singular (cond ~ {cond:.3g})")
    return np.linalg.solve(scaled, -np.ones(m)) / scale


def lagrange_weights(system: SpinSystem, lambdas) -> np.ndarray:
    """Solve ``J w = -1`` for the Lagrange-basis weights of ``Q``."""
    return _weights(system.eps, np.asarray(lambdas))


def _refine(nodes: np.ndarray, z: np.ndarray, target: np.ndarray, iters: int = 8) -> np.ndarray:
    """Newton on ``z -> sum_p 1/(nodes - z_p)``; keeps the best iterate seen."""

    def miss(z):
        return (1.0 / (nodes[:, None] - z[None, :])).sum(axis=1) - target

    r = miss(z)
    best = np.abs(r).max()
    for _ in range(iters):
        if not best > 0.0:
            break
        jac = 1.0 / (nodes[:, None] - z[None, :]) ** 2
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        zn = z + step
        rn = miss(zn)
        err = np.abs(rn).max()
        if not err < best:
            break
        z, r, best = zn, rn, err
    return z


def _node_roots(nodes: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Roots of the monic ``Q`` with ``Q'/Q = target`` at ``nodes``."""
    w = _weights(nodes, target).astype(complex)
    z = np.linalg.eigvals(np.diag(nodes).astype(complex) - np.outer(w, np.ones(nodes.size)))
    for _ in range(2):
        d = z[:, None] - nodes[None, :]
        f = 1.0 + (w / d).sum(axis=1)
        fp = -(w / d**2).sum(axis=1)
        z = z - np.where(fp != 0, f / np.where(fp != 0, fp, 1.0), 0.0)
    return _refine(nodes.astype(complex), z, target.astype(complex))


def _mobius_roots(eps: np.ndarray, target: np.ndarray, c: float) -> np.ndarray:
    """Same problem after ``x = 1/(z - c)``.

    With ``y_i = 1/(eps_i - c)`` one has
    ``(n y_i - Lambda_i) / y_i**2 = sum_p 1/(y_i - x_p)``, so roots far from
    the nodes become roots near zero, where the Lagrange basis is accurate.
    """
    y = 1.0 / (eps - c)
    x = _node_roots(y, (eps.size * y - target) / y**2)
    if np.any(np.abs(x) <= ROOT_GAP):
        raise SingularConversion("a root sits at the Mobius pole")
    return c + 1.0 / x


def _snap_real(z: np.ndarray) -> np.ndarray:
    z = z.copy()
    near = np.abs(z.imag) < REAL_SNAP * (1.0 + np.abs(z.real))
    z[near] = z[near].real
    return z


def root_uncertainty(system: SpinSystem, lambdas, rootset) -> float:
    """First-order estimate of how far the roots move when every ``Lambda``
    changes by one unit of double-precision rounding.

    Large when all roots sit far from the nodes: the values at the nodes then
    barely depend on some root directions.
    """
    z = as_root_array(rootset)
    jac = 1.0 / (system.eps[:, None] - z[None, :]) ** 2
    smin = np.linalg.svd(jac, compute_uv=False)[-1]
    ulp = np.finfo(float).eps * max(1.0, float(np.abs(np.asarray(lambdas, dtype=complex)).max()))
    return np.inf if smin == 0.0 else float(ulp / smin)


def _mp_refine(e: list, target: list, z0: np.ndarray, iters: int = 40) -> list | None:
    """Mixed-precision Newton: residual in mpmath, correction from a double Jacobian.

    Each step shrinks the error by roughly ``cond(J) * 1e-16``, so this only
    converges while the Jacobian is comfortably invertible in double.
    """
    n = len(e)
    lam = [mpmath.mpc(complex(x)) for x in z0]
    ef = np.array([float(x) for x in e])
    tol = mpmath.mpf(10) ** (-(2 * mpmath.mp.dps) // 3)
    prev = None
    for _ in range(iters):
        f = np.array([complex(sum(1 / (e[i] - z) for z in lam) - target[i]) for i in range(n)])
        zf = np.array([complex(z) for z in lam])
        jac = 1.0 / (ef[:, None] - zf[None, :]) ** 2
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        size = float(np.abs(step).max())
        if prev is not None and size > 0.5 * prev:
            return None
        prev = size
        lam = [lam[p] + mpmath.mpc(complex(step[p])) for p in range(n)]
        if size <= tol * (1 + max(abs(complex(x)) for x in lam)):
            return lam
    return None


def _mp_newton(e: list, target: list, z0: np.ndarray, iters: int = 30) -> list | None:
    """Newton on ``sum_p 1/(e_i - z_p) = target_i`` in the current mpmath precision."""
    fast = _mp_refine(e, target, z0)
    if fast is not None:
        return fast
    n = len(e)
    lam = [mpmath.mpc(complex(x)) for x in z0]
    # leaves room for a Jacobian condition number up to 10**(dps/3)
    tol = mpmath.mpf(10) ** (-(2 * mpmath.mp.dps) // 3)
    for _ in range(iters):
        f = mpmath.matrix([sum(1 / (e[i] - z) for z in lam) - target[i] for i in range(n)])
        jac = mpmath.matrix(n, n)
        for i in range(n):
            for p in range(n):
                jac[i, p] = 1 / (e[i] - lam[p]) ** 2
        try:
            step = mpmath.lu_solve(jac, -f)
        except ZeroDivisionError:
            return None
        lam = [lam[p] + step[p] for p in range(n)]
        if mpmath.norm(step, mpmath.inf) <= tol * (1 + max(abs(x) for x in lam)):
            return lam
    return None


def _mp_eig(e: list, target: list) -> list:
    n = len(e)
    jm = mpmath.matrix(n, n)
    for i in range(n):
        for j in range(n):
            if i != j:
                jm[i, j] = 1 / (e[i] - e[j])
        jm[i, i] = sum(1 / (e[i] - e[k]) for k in range(n) if k != i) - target[i]
    try:
        w = mpmath.lu_solve(jm, mpmath.matrix([-1] * n))
    except ZeroDivisionError:
        raise SingularConversion("Lambda -> roots system is exactly singular") from None
    comp = mpmath.matrix(n, n)
    for i in range(n):
        for j in range(n):
            comp[i, j] = (e[i] if i == j else 0) - w[i]
    return list(mpmath.eig(comp, left=False, right=False))


def roots_extended(system: SpinSystem, lambdas, dps: int = EXTENDED_DPS, start=None) -> list:
    """Roots for ``lambdas`` computed with ``dps`` digits, as mpmath numbers.

    ``lambdas`` may hold floats or mpmath numbers; the latter keep precision
    beyond double when the caller has it. With a ``start`` guess (for
    instance the double-precision roots) Newton on ``lambda -> Lambda`` is
    tried first; otherwise, or if it fails, the Lagrange solve and companion
    eigenvalues are done in extended precision.
    """
    n = system.n
    if len(lambdas) != n:
        raise ValueError(f"expected {n} Lambda values, got {len(lambdas)}")
    with mpmath.workdps(dps):
        e = [mpmath.mpf(float(x)) for x in system.eps]
        target = [mpmath.mpmathify(x) for x in lambdas]
        lam = None if start is None else _mp_newton(e, target, as_root_array(start))
        if lam is None:
            lam = _mp_newton(e, target, np.array([complex(x) for x in _mp_eig(e, target)]))
        if lam is None:
            raise SingularConversion("extended-precision conversion did not converge")
        return [+x for x in lam]


def round_roots(lam: list, real_input: bool) -> np.ndarray:
    z = np.array([complex(x) for x in lam])
    return _snap_real(z) if real_input else z


def double_precision_roots(system: SpinSystem, lam_cap: np.ndarray) -> tuple[np.ndarray | None, float, Exception | None]:
    """Best of the direct and Mobius-mapped double-precision routes."""
    eps = system.eps
    pad = np.ptp(eps) + 1.0
    routes = [
        lambda: _node_roots(eps, lam_cap),
        lambda: _mobius_roots(eps, lam_cap, eps.min() - pad),
        lambda: _mobius_roots(eps, lam_cap, eps.max() + pad),
    ]
    best, best_err, failure = None, np.inf, None
    for route in routes:
        try:
            z = _refine(eps.astype(complex), route(), lam_cap.astype(complex))
        except SingularConversion as exc:
            failure = exc
            continue
        if not np.iscomplexobj(lam_cap):
            z = _snap_real(z)
        try:
            err = round_trip_error(system, lam_cap, RootSet(z))
        except SpectralCollision:
            continue
        if err < best_err:
            best, best_err = z, err
        if err <= 1e-14:
            break
    return best, best_err, failure


def roots_from_lambdas(system: SpinSystem, lambdas, round_trip_tol: float = ROUND_TRIP_TOL) -> RootSet:
    """Reconstruct the ``n`` Bethe roots whose ``Lambda`` values are ``lambdas``.

    The direct Lagrange solve is tried first. When roots lie far from the
    nodes its weights blow up, so two Mobius-mapped solves with poles left
    and right of the nodes are also tried and the best round trip wins.
    If the result is still ill-determined in double precision (see
    :func:`root_uncertainty`) the conversion is redone in extended precision.

    Raises:
        SingularConversion: every route is numerically singular, i.e. some
            roots escaped to infinity.
        RoundTripFailure: recomputed ``Lambda`` differ from the input by more
            than ``round_trip_tol`` relative to ``max(1, |Lambda|_inf)``.
    """
    lam_cap = np.asarray(lambdas)
    if lam_cap.shape != (system.n,):
        raise ValueError(f"expected {system.n} Lambda values, got shape {lam_cap.shape}")
    best, best_err, failure = double_precision_roots(system, lam_cap)
    if best is None or best_err > 1e-12 or root_uncertainty(system, lam_cap, best) > ROOT_UNCERTAINTY:
        try:
            z = round_roots(roots_extended(system, list(lam_cap), start=best), not np.iscomplexobj(lam_cap))
            err = round_trip_error(system, lam_cap, RootSet(z))
            if best is None or err <= max(best_err, round_trip_tol):
                best, best_err = z, err
        except (SingularConversion, SpectralCollision) as exc:
            failure = exc
    if best is None:
        raise failure or SingularConversion("no conversion route produced roots")
    # a root whose pull on every Lambda is below tolerance is not determined: it sits at infinity
    pull = np.abs(1.0 / (system.eps[:, None] - best[None, :])).max(axis=0)
    if pull.min() < round_trip_tol * max(1.0, float(np.abs(lam_cap).max())):
        raise SingularConversion(f"a root escaped to infinity (|lambda| ~ {np.abs(best).max():.3g})")
    if not best_err <= round_trip_tol:
        raise RoundTripFailure(f"Lambda round trip error {best_err:.3g} exceeds {round_trip_tol:g}")
    return RootSet(best)


def round_trip_error(system: SpinSystem, lambdas, rootset) -> float:
    lam_cap = np.asarray(lambdas)
    back = lambdas_from_roots(system, rootset)
    return float(np.abs(back - lam_cap).max() / max(1.0, np.abs(lam_cap).max()))


def conjugation_defect(rootset) -> float:
    """Worst mismatch when pairing every root with its nearest conjugate partner.

    Greedy matching; a root may pair with itself (distance ``2 |Im|``), which
    is how real roots are accounted for.
    """
    z = list(as_root_array(rootset))
    worst = 0.0
    while z:
        r = z.pop(0)
        target = np.conj(r)
        own = 2.0 * abs(r.imag)
        if z:
            dists = np.abs(np.asarray(z) - target)
            k = int(np.argmin(dists))
            if dists[k] < own:
                worst = max(worst, float(dists[k]))
                z.pop(k)
                continue
        worst = max(worst, own)
    return worst


def gamma(system: SpinSystem, rootset) -> np.ndarray:
    """``Gamma_p = -B_z + 1/2 sum_i 1/(lambda_p - eps_i) + sum_{q != p} 1/(lambda_q - lambda_p)``."""
    lam = as_root_array(rootset)
    _check_separated(system, lam)
    _check_distinct(lam)
    d = lam[None, :] - lam[:, None]  # d[p, q] = lambda_q - lambda_p
    np.fill_diagonal(d, np.inf)
    return (
        -system.params.b_z
        + 0.5 * (1.0 / (lam[:, None] - system.eps[None, :])).sum(axis=1)
        + (1.0 / d).sum(axis=1)
    )


def _cauchy_ratio(system: SpinSystem, lam: np.ndarray) -> np.ndarray:
    """``prod_k (eps_k - lambda_p) / prod_{q != p} (lambda_q - lambda_p)`` per root ``p``."""
    num = system.eps[None, :] - lam[:, None]
    den = lam[None, :] - lam[:, None]
    np.fill_diagonal(den, 1.0)
    # ratios of long products: accumulate in logs to avoid overflow
    log_num = np.log(num.astype(complex)).sum(axis=1)
    log_den = np.log(den.astype(complex)).sum(axis=1)
    return np.exp(log_num - log_den)


def gamma_residuals(system: SpinSystem, rootset) -> np.ndarray:
    """Residuals of the root-form Bethe equations.

    ``Gamma_p + (|B_perp|^2 / 2) prod_k (eps_k - lambda_p) / prod_{q != p} (lambda_q - lambda_p)``
    vanishes for every ``p`` exactly when the roots define an eigenstate.
    """
    lam = as_root_array(rootset)
    g = gamma(system, lam)
    return g + 0.5 * system.params.b_perp_sq * _cauchy_ratio(system, lam)


def lagrange_unit_sum(epsilons: Sequence[float], rootset, i: int) -> complex:
    """``sum_p prod_{k != i} (eps_k - lambda_p) / prod_{q != p} (lambda_q - lambda_p)``.

    Equal to one for any distinct roots and any nodes.
    """
    eps = np.asarray(epsilons, dtype=float)
    lam = as_root_array(rootset)
    if lam.size != eps.size:
        raise ValueError("need as many roots as nodes")
    _check_distinct(lam)
    others = np.delete(eps, i)
    num = np.prod(others[None, :] - lam[:, None], axis=1)
    den = lam[None, :] - lam[:, None]
    np.fill_diagonal(den, 1.0)
    return complex(np.sum(num / np.prod(den, axis=1)))


def _is_extended(roots) -> bool:
    return not isinstance(roots, (RootSet, np.ndarray)) and any(
        isinstance(x, (mpmath.mpf, mpmath.mpc)) for x in roots
    )


def _gamma_terms_mp(system: SpinSystem, lam: list) -> tuple[list, list]:
    """``Gamma_p`` and the Cauchy ratio per root, in the current mpmath precision."""
    e = [mpmath.mpf(float(x)) for x in system.eps]
    bz = mpmath.mpf(system.params.b_z)
    n = len(lam)
    g, ratio = [], []
    for p in range(n):
        others = [lam[q] for q in range(n) if q != p]
        g.append(-bz + sum(1 / (lam[p] - x) for x in e) / 2 + sum(1 / (q - lam[p]) for q in others))
        ratio.append(mpmath.fprod(x - lam[p] for x in e) / mpmath.fprod(q - lam[p] for q in others))
    return g, ratio


def zero_sum_identity(system: SpinSystem, rootset, eps_subset: Sequence[int]) -> complex:
    """``sum_p Gamma_p / prod_{j in subset} (lambda_p - eps_j)``; zero on shell for ``|subset| >= 2``.

    ``rootset`` may also be a list of mpmath numbers (see
    :func:`roots_extended`); the sum is then formed in that precision.
    Close pairs of ``eps_j`` make the terms large and cancelling, so the
    double-precision value has a rounding floor of roughly
    ``1e-14 * max|Gamma_p| / min|prod_j (lambda_p - eps_j)|``.
    """
    subset = [int(k) for k in eps_subset]
    if len(subset) < 2 or len(set(subset)) != len(subset):
        raise ValueError("subset must contain at least two distinct sites")
    if _is_extended(rootset):
        lam = list(rootset)
        with mpmath.workdps(max(mpmath.mp.dps, EXTENDED_DPS)):
            g, _ = _gamma_terms_mp(system, lam)
            sub = [mpmath.mpf(float(system.eps[k])) for k in subset]
            total = sum(g[p] / mpmath.fprod(lam[p] - x for x in sub) for p in range(len(lam)))
            return complex(total)
    lam = as_root_array(rootset)
    g = gamma(system, lam)
    den = np.prod(lam[:, None] - system.eps[subset][None, :], axis=1)
    return complex(np.sum(g / den))


def zero_sum_floor(system: SpinSystem, rootset, eps_subset: Sequence[int]) -> float:
    """Rounding-error estimate for the double-precision :func:`zero_sum_identity`."""
    subset = [int(k) for k in eps_subset]
    lam = as_root_array(rootset)
    to_eps = np.abs(lam[:, None] - system.eps[None, :])
    d = np.abs(lam[None, :] - lam[:, None])
    np.fill_diagonal(d, np.inf)
    size = abs(system.params.b_z) + 0.5 * (1 / to_eps).sum(axis=1) + (1 / d).sum(axis=1)
    slope = 0.5 * (1 / to_eps**2).sum(axis=1) + (1 / d**2).sum(axis=1)
    den = np.prod(np.abs(lam[:, None] - system.eps[subset][None, :]), axis=1)
    eps64 = np.finfo(float).eps
    return float(np.sum(8 * eps64 * (size + slope * (1 + np.abs(lam))) / den))


def site_pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))
