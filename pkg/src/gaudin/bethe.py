"""Quadratic Bethe equations in eigenvalue-based variables.

Every eigenstate is labelled by ``n`` real numbers ``Lambda_i`` solving

    F_i = Lambda_i^2 - sum_{j != i} (Lambda_i - Lambda_j) / (eps_i - eps_j)
          + 2 b Lambda_i - c = 0,

with ``(b, c) = (B_z, |B_perp|^2)`` in the common frame (unrotated reference
state) and ``(b, c) = (|B|, 0)`` in the frame whose quantisation axis follows
the field. The two frames differ by the uniform shift
``Lambda_rotated = Lambda_common + B_z - |B|``.

All ``2**n`` rotated-frame solutions are found by continuation in the field
magnitude: at a large field every spin is either aligned (``Lambda ~ 0``) or
anti-aligned (``Lambda ~ -2|B|``), which seeds one path per bit string.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Mapping, Sequence

import mpmath
import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ConfigError,
    ContinuationStall,
    DuplicateSolution,
    NoConvergence,
    SingularJacobian,
    WrongFrame,
    ZeroField,
)
from .model import SpinSystem
from .roots import (
    EXTENDED_DPS,
    ROOT_UNCERTAINTY,
    RootSet,
    double_precision_roots,
    round_roots,
    root_uncertainty,
    roots_extended,
    site_pairs,
    zero_sum_floor,
    zero_sum_identity,
)

COMMON = "common"
ROTATED = "rotated"
FRAMES = (COMMON, ROTATED)

_EPS64 = np.finfo(float).eps
_LD = np.longdouble
COND_LIMIT = 1e14


@dataclass(frozen=True)
class SolverOptions:
    newton_tol: float = 1e-12
    max_newton_iter: int = 50
    b_start_factor: float = 4.0
    step_shrink: float = 0.5
    min_step: float = 1e-8
    initial_step: float = 0.2
    max_step: float = 0.5
    duplicate_tol: float = 1e-6

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"solver option {f.name} must be positive")
        if not self.step_shrink < 1:
            raise ConfigError("step_shrink must be below 1")

    @classmethod
    def from_dict(cls, data: Mapping | None) -> SolverOptions:
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown solver options: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BetheSolution:
    """One eigenstate in eigenvalue-based form.

    ``label`` is the continuation seed: character ``k`` is ``"1"`` when site
    ``k`` started anti-aligned with the field. ``residual`` is the max-norm
    of the quadratic equations of ``frame``.
    """

    frame: str
    lambdas_cap: np.ndarray
    label: str
    residual: float


def _frame_coeffs(system: SpinSystem, frame: str) -> tuple[float, float]:
    p = system.params
    if frame == COMMON:
        return p.b_z, p.b_perp_sq
    if frame == ROTATED:
        if p.b_mag == 0.0:
            raise ZeroField("the rotated frame needs a nonzero field")
        return p.b_mag, 0.0
    raise WrongFrame(f"unknown frame {frame!r}")


def _residual(lam, cmat, b, c):
    """Batched residual; ``lam`` has shape ``(..., n)``."""
    diff = lam[..., :, None] - lam[..., None, :]
    return lam * lam - (diff * cmat).sum(axis=-1) + 2 * b * lam - c


def _residual_ld(system: SpinSystem, lam: np.ndarray, b: float, c: float) -> np.ndarray:
    """Residual evaluated in extended precision, returned as float64.

    Complex (off-shell) input is evaluated in ordinary complex arithmetic.
    """
    if np.iscomplexobj(lam):
        return _residual(np.asarray(lam), system.couplings, b, c)
    cm = system.couplings.astype(_LD)
    return _residual(np.asarray(lam, dtype=_LD), cm, _LD(b), _LD(c)).astype(float)


def _floor(system: SpinSystem, lam: np.ndarray, b: float) -> np.ndarray:
    """Residual change caused by rounding every ``Lambda`` to double precision."""
    a = np.abs(system.couplings)
    al = np.abs(lam)
    diag = np.abs(2 * lam - system.coupling_sums + 2 * b)
    return 4 * _EPS64 * (diag * al + al @ a.T + a.sum(axis=1) * al)


def _jacobian(system: SpinSystem, lam: np.ndarray, b: float) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    n = system.n
    jac = np.broadcast_to(system.couplings, lam.shape[:-1] + (n, n)).copy()
    idx = np.arange(n)
    jac[..., idx, idx] = 2 * lam - system.coupling_sums + 2 * b
    return jac


def residual_common(system: SpinSystem, lambdas_cap) -> np.ndarray:
    b, c = _frame_coeffs(system, COMMON)
    return _residual_ld(system, lambdas_cap, b, c)


def residual_rotated(system: SpinSystem, lambdas_cap) -> np.ndarray:
    b, c = _frame_coeffs(system, ROTATED)
    return _residual_ld(system, lambdas_cap, b, c)


def residual(system: SpinSystem, frame: str, lambdas_cap) -> np.ndarray:
    b, c = _frame_coeffs(system, frame)
    return _residual_ld(system, lambdas_cap, b, c)


def jacobian(system: SpinSystem, frame: str, lambdas_cap) -> np.ndarray:
    """Analytic Jacobian: diagonal ``2 Lambda_i - sum_j C_ij + 2b``, off-diagonal ``C_ij``."""
    b, _ = _frame_coeffs(system, frame)
    return _jacobian(system, lambdas_cap, b)


def _refine_batch(
    system: SpinSystem,
    lam0: np.ndarray,
    b: float,
    c: float,
    tol: float,
    max_iter: int,
    check_cond: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Damped Newton on many rows at once, iterate carried in extended precision.

    Returns ``(lam, res, ok)``: float64 solutions, residual max-norms and the
    convergence mask.
    """
    cm = system.couplings.astype(_LD)
    bl, cl = _LD(b), _LD(c)
    lam = np.array(lam0, dtype=_LD, ndmin=2)
    m = lam.shape[0]
    f = _residual(lam, cm, bl, cl)
    fnorm = np.abs(f).max(axis=1)
    active = np.ones(m, dtype=bool)
    for _ in range(max_iter + 1):
        rounded = lam.astype(float)
        # a margin below the target leaves room for the final rounding to double
        done = np.all(np.abs(f) <= 0.1 * np.maximum(tol, _floor(system, rounded, b)), axis=1)
        active &= ~done
        if not active.any():
            break
        rows = np.flatnonzero(active)
        jac = _jacobian(system, rounded[rows], b)
        if check_cond:
            cond = np.linalg.cond(jac)
            bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
            if bad.any():
                raise SingularJacobian(f"Jacobian condition estimate {np.max(cond):.3g} exceeds {COND_LIMIT:g}")
        try:
            step = np.linalg.solve(jac, f[rows].astype(float)[..., None])[..., 0].astype(_LD)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from None
        alpha = np.ones(rows.size, dtype=_LD)
        pending = np.ones(rows.size, dtype=bool)
        for _halving in range(30):
            trial = lam[rows[pending]] - alpha[pending, None] * step[pending]
            ft = _residual(trial, cm, bl, cl)
            fn = np.abs(ft).max(axis=1)
            better = fn < fnorm[rows[pending]]
            idx = np.flatnonzero(pending)[better]
            lam[rows[idx]] = trial[better]
            f[rows[idx]] = ft[better]
            fnorm[rows[idx]] = fn[better]
            pending[np.flatnonzero(pending)[better]] = False
            if not pending.any():
                break
            alpha[pending] *= 0.5
        # rows whose residual cannot decrease any further have stagnated
        active[rows[pending]] = False
    rounded = lam.astype(float)
    res_final = _residual_ld(system, rounded, b, c)
    ok = np.all(np.abs(res_final) <= np.maximum(tol, _floor(system, rounded, b)), axis=1)
    return rounded, np.abs(res_final).max(axis=1), ok


def newton_refine(
    system: SpinSystem,
    frame: str,
    lambdas_cap0: Sequence[float],
    options: SolverOptions | None = None,
    label: str = "",
) -> BetheSolution:
    """Polish an approximate solution with damped Newton iterations.

    Converged means every residual component is below ``newton_tol`` or, for
    states with very large ``|Lambda|``, below the change produced by
    rounding ``Lambda`` to double precision.

    Raises:
        NoConvergence: not converged after ``max_newton_iter`` iterations.
        SingularJacobian: Jacobian condition estimate above 1e14.
    """
    opts = options or SolverOptions()
    b, c = _frame_coeffs(system, frame)
    lam0 = np.asarray(lambdas_cap0, dtype=float)
    if lam0.shape != (system.n,) or not np.all(np.isfinite(lam0)):
        raise ValueError(f"initial guess must be {system.n} finite reals")
    lam, res, ok = _refine_batch(system, lam0, b, c, opts.newton_tol, opts.max_newton_iter, check_cond=True)
    if not ok[0]:
        raise NoConvergence(f"residual {res[0]:.3g} after {opts.max_newton_iter} iterations")
    return BetheSolution(frame, lam[0], label, float(res[0]))


def seed_labels(n: int) -> list[str]:
    """Bit-string labels in integer order; character ``k`` is bit ``k``."""
    return ["".join(str((s >> k) & 1) for k in range(n)) for s in range(1 << n)]


def start_field(system: SpinSystem, options: SolverOptions) -> float:
    eps = system.eps
    spread = float(eps.max() - eps.min())
    coupling = float(np.abs(system.couplings).sum(axis=1).max())
    return options.b_start_factor * max(system.params.b_mag, spread + system.n, coupling)


def _nearest_distance(lam: np.ndarray) -> np.ndarray:
    if lam.shape[0] < 2:
        return np.full(lam.shape[0], np.inf)
    dist, _ = cKDTree(lam).query(lam, k=2, p=np.inf)
    return dist[:, 1]


def _continue(system: SpinSystem, lam: np.ndarray, b0: float, b1: float, opts: SolverOptions) -> np.ndarray:
    """Track rows of ``lam`` (solutions at field ``b0``) down to field ``b1``."""
    cm = system.couplings
    s, s_end = np.log(b0), np.log(b1)
    h = opts.initial_step
    while s > s_end:
        hh = min(h, s - s_end)
        b = np.exp(s)
        b_new = b1 if hh == s - s_end else np.exp(s - hh)
        jac = _jacobian(system, lam, b)
        tangent = -np.linalg.solve(jac, (2 * lam)[..., None])[..., 0]
        pred = lam + tangent * (b_new - b)
        corr = pred
        for _ in range(6):
            f = _residual(corr, cm, b_new, 0.0)
            corr = corr - np.linalg.solve(_jacobian(system, corr, b_new), f[..., None])[..., 0]
        f = _residual(corr, cm, b_new, 0.0)
        converged = np.all(np.abs(f) <= np.maximum(1e-9, 64 * _floor(system, corr, b_new)), axis=1)
        drift = np.abs(corr - pred).max(axis=1)
        safe = drift < 0.25 * _nearest_distance(lam)
        if np.all(converged & safe & np.all(np.isfinite(corr), axis=1)):
            lam = corr
            s -= hh
            h = min(h / opts.step_shrink**0.5, opts.max_step)
        else:
            h *= opts.step_shrink
            if h < opts.min_step:
                raise ContinuationStall(f"step fell below {opts.min_step:g} at |B| = {b:.6g}")
    return lam


def solve_all(system: SpinSystem, options: SolverOptions | None = None, threads: int = 1) -> list[BetheSolution]:
    """All ``2**n`` rotated-frame solutions at the system's field magnitude.

    Raises:
        ZeroField: ``|B| = 0``.
        ContinuationStall: a continuation step shrank below ``min_step``.
        DuplicateSolution: two paths ended closer than ``duplicate_tol``.
        NoConvergence: the seeds or the final polish failed to converge.
    """
    opts = options or SolverOptions()
    b_target, _ = _frame_coeffs(system, ROTATED)
    n = system.n
    b0 = start_field(system, opts)
    bits = (np.arange(1 << n)[:, None] >> np.arange(n)) & 1
    seeds = -2.0 * b0 * bits.astype(float)

    def track(rows: np.ndarray) -> np.ndarray:
        lam, res, ok = _refine_batch(system, seeds[rows], b0, 0.0, opts.newton_tol, opts.max_newton_iter)
        if not ok.all():
            raise NoConvergence(f"seed refinement failed at |B| = {b0:.6g} (residual {res.max():.3g})")
        return _continue(system, lam, b0, b_target, opts)

    chunks = np.array_split(np.arange(1 << n), max(1, min(int(threads), 1 << n)))
    if len(chunks) == 1:
        tracked = [track(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            tracked = list(pool.map(track, chunks))
    lam = np.concatenate(tracked)
    lam, res, ok = _refine_batch(system, lam, b_target, 0.0, opts.newton_tol, opts.max_newton_iter)
    lam = lam + 0.0  # no negative zeros in the output
    if not ok.all():
        raise NoConvergence(f"final polish failed (worst residual {res.max():.3g})")
    near = _nearest_distance(lam)
    if near.min() <= opts.duplicate_tol:
        raise DuplicateSolution(f"two solutions within {near.min():.3g} of each other")
    labels = seed_labels(n)
    sols = [BetheSolution(ROTATED, lam[s], labels[s], float(res[s])) for s in range(1 << n)]
    return sorted(sols, key=lambda sol: sol.label)


def frame_shift(system: SpinSystem) -> float:
    """``|B| - B_z``: add to rotated-frame values to get common-frame values."""
    p = system.params
    return p.b_mag - p.b_z


def shift_frame(system: SpinSystem, solution: BetheSolution) -> BetheSolution:
    """Move a solution to the other frame; the residual is recomputed there."""
    if solution.frame == ROTATED:
        target, lam = COMMON, solution.lambdas_cap + frame_shift(system)
    elif solution.frame == COMMON:
        target, lam = ROTATED, solution.lambdas_cap - frame_shift(system)
    else:
        raise WrongFrame(f"unknown frame {solution.frame!r}")
    res = float(np.abs(residual(system, target, lam)).max())
    return BetheSolution(target, lam, solution.label, res)


def to_common(
    system: SpinSystem, solutions: Iterable[BetheSolution], options: SolverOptions | None = None
) -> list[BetheSolution]:
    """Shift rotated solutions to the common frame and polish them there."""
    opts = options or SolverOptions()
    sols = [s if s.frame == COMMON else shift_frame(system, s) for s in solutions]
    if not sols:
        return []
    b, c = _frame_coeffs(system, COMMON)
    lam, res, ok = _refine_batch(
        system, np.stack([s.lambdas_cap for s in sols]), b, c, opts.newton_tol, opts.max_newton_iter
    )
    if not ok.all():
        raise NoConvergence(f"common-frame polish failed (worst residual {res.max():.3g})")
    return [BetheSolution(COMMON, lam[i], s.label, float(res[i])) for i, s in enumerate(sols)]


def solve_common(system: SpinSystem, options: SolverOptions | None = None, threads: int = 1) -> list[BetheSolution]:
    return to_common(system, solve_all(system, options, threads), options)


def charge_eigenvalues(system: SpinSystem, solution: BetheSolution) -> np.ndarray:
    """Eigenvalues ``r_k = -B_z/2 + (1/4) sum_{j != k} 1/(eps_k - eps_j) - Lambda_k / 2``."""
    if solution.frame != COMMON:
        raise WrongFrame("charge eigenvalues are read off common-frame solutions")
    return -0.5 * system.params.b_z + 0.25 * system.coupling_sums - 0.5 * np.asarray(solution.lambdas_cap)


def energy(system: SpinSystem, solution: BetheSolution, weights: Sequence[float]) -> float:
    return float(np.dot(np.asarray(weights, dtype=float), charge_eigenvalues(system, solution)))


def extended_polish(system: SpinSystem, solution: BetheSolution, dps: int = EXTENDED_DPS, iters: int = 12) -> list:
    """Newton on the quadratic equations with ``dps`` digits, as mpmath numbers."""
    b, c = _frame_coeffs(system, solution.frame)
    n = system.n
    with mpmath.workdps(dps):
        e = [mpmath.mpf(float(x)) for x in system.eps]
        cm = [[0 if i == j else 1 / (e[i] - e[j]) for j in range(n)] for i in range(n)]
        cs = [sum(row) for row in cm]
        bm, cc = mpmath.mpf(b), mpmath.mpf(c)
        lam = [mpmath.mpf(float(x)) for x in np.real(solution.lambdas_cap)]
        tol = mpmath.mpf(10) ** (8 - dps)

        def miss(lam):
            return [lam[i] ** 2 - sum((lam[i] - lam[j]) * cm[i][j] for j in range(n)) + 2 * bm * lam[i] - cc for i in range(n)]

        # cheap pass: corrections from the double Jacobian
        fast, prev = list(lam), None
        for _ in range(3 * iters):
            f = np.array([float(x) for x in miss(fast)])
            try:
                step = np.linalg.solve(_jacobian(system, np.array([float(x) for x in fast]), b), -f)
            except np.linalg.LinAlgError:
                break
            size = float(np.abs(step).max())
            if not np.isfinite(size) or (prev is not None and size > 0.5 * prev):
                break
            prev = size
            fast = [fast[i] + mpmath.mpf(float(step[i])) for i in range(n)]
            if size <= tol * (1 + max(abs(float(x)) for x in fast)):
                return fast
        for _ in range(iters):
            f = mpmath.matrix(miss(lam))
            jac = mpmath.matrix(cm)
            for i in range(n):
                jac[i, i] = 2 * lam[i] - cs[i] + 2 * bm
            step = mpmath.lu_solve(jac, -f)
            lam = [lam[i] + step[i] for i in range(n)]
            if mpmath.norm(step, mpmath.inf) <= tol * (1 + max(abs(x) for x in lam)):
                return lam
    raise NoConvergence(f"extended-precision polish of {solution.label!r} did not converge")


def bethe_roots_extended(system: SpinSystem, solution: BetheSolution, dps: int = EXTENDED_DPS) -> list:
    """On-shell roots as mpmath numbers, from ``Lambda`` polished to ``dps`` digits."""
    if solution.frame != COMMON:
        raise WrongFrame("Bethe roots are defined for common-frame solutions")
    lam = np.asarray(solution.lambdas_cap, dtype=float)
    start, _, _ = double_precision_roots(system, lam)
    return roots_extended(system, extended_polish(system, solution, dps), dps, start=start)


def bethe_roots(system: SpinSystem, solution: BetheSolution) -> RootSet:
    """On-shell Bethe roots of a common-frame solution.

    Roots far from every ``eps_i`` are fixed by ``Lambda`` only to a few
    digits in double precision. In that case ``Lambda`` is re-polished and
    converted with extended precision so the roots satisfy the root-form
    equations to double accuracy.
    """
    if solution.frame != COMMON:
        raise WrongFrame("Bethe roots are defined for common-frame solutions")
    lam = np.asarray(solution.lambdas_cap, dtype=float)
    z, err, _ = double_precision_roots(system, lam)
    if z is not None and err <= 1e-12 and root_uncertainty(system, lam, z) <= ROOT_UNCERTAINTY:
        return RootSet(z)
    ext = extended_polish(system, solution)
    return RootSet(round_roots(roots_extended(system, ext, start=z), True))


def zero_sum_defects(system: SpinSystem, solution: BetheSolution, floor_limit: float = 1e-9) -> np.ndarray:
    """``|zero_sum_identity|`` for every pair of sites, on this solution's roots.

    Pairs whose double-precision rounding floor exceeds ``floor_limit`` are
    re-evaluated on extended-precision roots.
    """
    rs = bethe_roots(system, solution)
    pairs = site_pairs(system.n)
    out = np.empty(len(pairs))
    ext = None
    for k, pair in enumerate(pairs):
        if zero_sum_floor(system, rs, pair) <= floor_limit:
            out[k] = abs(zero_sum_identity(system, rs, pair))
            continue
        if ext is None:
            ext = bethe_roots_extended(system, solution)
        out[k] = abs(zero_sum_identity(system, ext, pair))
    return out
