"""Command line front end.

Every subcommand reads a JSON config (``--config``; a built-in four-spin demo
when omitted) and writes JSON or CSV to ``--out`` or stdout. A run manifest
goes next to the output as ``<out>.manifest.json``.

Exit codes: 0 success, 2 bad input or configuration, 3 solver failure,
4 failed verification, 5 field geometry unsupported by the request (e.g. a
zero transverse field for common-frame states). Failures print
``{"code": ..., "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import bethe, dynamics, fock, overlap, roots
from .config import (
    RunConfig,
    RunManifest,
    config_to_dict,
    csv_series,
    dumps,
    load_config,
    log_value,
    parse_floats,
    plain,
)
from .errors import ConfigError, GaudinError, VerificationFailure
from .model import SpinSystem, build_system

MATCH_TOL = 1e-8
RESIDUAL_TOL = 1e-10
COMMUTATOR_TOL = 1e-12
SUM_RULE_TOL = 1e-13
SINGLE_SPIN_TOL = 1e-12
QUENCH_TOL = 1e-8


def _weights(args, n: int) -> tuple[float, ...]:
    if args.weights is None:
        return dynamics.default_weights(n)
    return parse_floats(args.weights, n, "weights")


def _solutions(cfg: RunConfig, threads: int) -> tuple[list[bethe.BetheSolution], list[bethe.BetheSolution]]:
    rotated = bethe.solve_all(cfg.system, cfg.solver, threads)
    return rotated, bethe.to_common(cfg.system, rotated, cfg.solver)


def _lambdas(args, cfg: RunConfig, text: str | None, label: str | None, threads: int) -> np.ndarray:
    n = cfg.system.n
    if text is not None:
        return np.array(parse_floats(text, n, "Lambda values"))
    if label is None:
        raise ConfigError("give either explicit Lambda values or a state label")
    _, common = _solutions(cfg, threads)
    for sol in common:
        if sol.label == label:
            return sol.lambdas_cap
    raise ConfigError(f"no state with label {label!r}; labels are {n}-character bit strings")


def cmd_spectrum(args, cfg: RunConfig, manifest: RunManifest) -> str:
    system = cfg.system
    w = np.asarray(_weights(args, system.n))
    rotated, common = _solutions(cfg, args.threads)
    records = []
    for rot, com in zip(rotated, common):
        charges = bethe.charge_eigenvalues(system, com)
        records.append(
            {
                "label": rot.label,
                "lambdas_rotated": rot.lambdas_cap,
                "lambdas_common": com.lambdas_cap,
                "charges": charges,
                "energy": float(w @ charges),
                "residuals": {"rotated": rot.residual, "common": com.residual},
            }
        )
    manifest.extra["states"] = len(records)
    return dumps(records)


def _check(name: str, value: float, tol: float, detail: str = "") -> dict:
    return {"name": name, "value": float(value), "tol": tol, "pass": bool(value < tol), "detail": detail}


def _single_spin_checks(system: SpinSystem) -> list[dict]:
    one = build_system(system.epsilons[:1], system.field)
    p = one.params
    sols = bethe.solve_common(one)
    lam = sorted(float(s.lambdas_cap[0]) for s in sols)
    expect = sorted([-p.b_z - p.b_mag, -p.b_z + p.b_mag])
    charges = sorted(float(bethe.charge_eigenvalues(one, s)[0]) for s in sols)
    return [
        _check("single_spin_lambda", max(abs(a - b) for a, b in zip(lam, expect)), SINGLE_SPIN_TOL),
        _check(
            "single_spin_charge",
            max(abs(a - b) for a, b in zip(charges, [-p.b_mag / 2, p.b_mag / 2])),
            SINGLE_SPIN_TOL,
        ),
    ]


def verify_system(system: SpinSystem, options: bethe.SolverOptions, threads: int = 1, perturb: float = 0.0) -> list[dict]:
    """ED matching, residuals and charge algebra for one system."""
    n = system.n
    checks = []
    rotated = bethe.solve_all(system, options, threads)
    common = bethe.to_common(system, rotated, options)
    if perturb:
        first = common[0]
        bad = first.lambdas_cap.copy()
        bad[0] += perturb
        common[0] = bethe.BetheSolution(first.frame, bad, first.label, first.residual)
    charges = np.array([bethe.charge_eigenvalues(system, s) for s in common])
    ed = fock.ed_reference(system, np.sqrt(np.arange(2.0, n + 2)))  # generic weights avoid ties
    _, dist = fock.match_charge_vectors(charges, ed.charges)
    worst = int(np.argmax(dist))
    checks.append(_check("ed_match", dist.max(), MATCH_TOL, f"worst state {common[worst].label}"))
    res_rot = max(float(np.abs(bethe.residual(system, bethe.ROTATED, s.lambdas_cap)).max()) for s in rotated)
    res_com = [float(np.abs(bethe.residual(system, bethe.COMMON, s.lambdas_cap)).max()) for s in common]
    worst = int(np.argmax(res_com))
    checks.append(_check("residual_rotated", res_rot, RESIDUAL_TOL))
    checks.append(_check("residual_common", max(res_com), RESIDUAL_TOL, f"worst state {common[worst].label}"))
    ops = fock.conserved_charges(system)
    comm = max((fock.commutator_norm(ops[i], ops[j]) for i, j in roots.site_pairs(n)), default=0.0)
    checks.append(_check("charge_commutators", comm, COMMUTATOR_TOL))
    sum_rule = sum(ops) - fock.zeeman(system)
    checks.append(_check("charge_sum_rule", float(np.linalg.norm(sum_rule.toarray())), SUM_RULE_TOL))
    return checks


def cmd_verify(args, cfg: RunConfig, manifest: RunManifest) -> str:
    system = cfg.system
    if not 1 <= args.nmax <= 10:
        raise ConfigError("--nmax must lie in [1, 10]")
    if args.nmax == 1:
        checks = _single_spin_checks(system)
    else:
        if system.n > args.nmax:
            raise ConfigError(f"system has {system.n} spins, above --nmax {args.nmax}")
        checks = verify_system(system, cfg.solver, args.threads, args.perturb)
    ok = all(c["pass"] for c in checks)
    report = {"n": system.n, "pass": ok, "checks": checks}
    manifest.extra["pass"] = ok
    text = dumps(report)
    if not ok:
        failed = ", ".join(f"{c['name']} ({c['detail'] or 'value ' + format(c['value'], '.3g')})" for c in checks if not c["pass"])
        exc = VerificationFailure(f"failed checks: {failed}")
        exc.report = text
        raise exc
    return text


def cmd_roots(args, cfg: RunConfig, manifest: RunManifest) -> str:
    system = cfg.system
    if args.lambdas is not None:
        lam = np.array(parse_floats(args.lambdas, system.n, "Lambda values"))
        rs = roots.roots_from_lambdas(system, lam)
        return dumps({"lambdas": lam, "roots": rs.roots, "round_trip": roots.round_trip_error(system, lam, rs)})
    _, common = _solutions(cfg, args.threads)
    records = []
    for sol in common:
        rs = bethe.bethe_roots(system, sol)
        records.append(
            {
                "label": sol.label,
                "lambdas_common": sol.lambdas_cap,
                "roots": rs.roots,
                "round_trip": roots.round_trip_error(system, sol.lambdas_cap, rs),
                "conjugation_defect": roots.conjugation_defect(rs),
                "gamma_residual": float(np.abs(roots.gamma_residuals(system, rs)).max()),
            }
        )
    return dumps(records)


def cmd_overlap(args, cfg: RunConfig, manifest: RunManifest) -> str:
    a = _lambdas(args, cfg, args.lambdas_a, args.label_a, args.threads)
    b = _lambdas(args, cfg, args.lambdas_b, args.label_b, args.threads)
    out = log_value(*overlap.log_determinant_overlap(cfg.system, a, b))
    return dumps({"lambdas_a": a, "lambdas_b": b, **out})


def cmd_project(args, cfg: RunConfig, manifest: RunManifest) -> str:
    system = cfg.system
    lam = _lambdas(args, cfg, args.lambdas, args.label, args.threads)
    up = dynamics.parse_bits(args.up, system.n)
    out = log_value(*overlap.log_canonical_projection(system, lam, up))
    return dumps({"lambdas": lam, "up_set": list(up), **out})


def cmd_quench(args, cfg: RunConfig, manifest: RunManifest) -> str:
    system = cfg.system
    up = dynamics.parse_bits(args.initial, system.n)
    spec = dynamics.QuenchSpec(
        initial_up_set=up,
        weights=_weights(args, system.n),
        observable=dynamics.parse_observable(args.observable),
        times=(args.t0, args.tmax, args.steps),
    )
    _, common = _solutions(cfg, args.threads)
    expansion = dynamics.eigen_expand(system, up, common, spec.weights)
    values = dynamics.evolve_observable(system, spec, expansion)
    manifest.extra["weight_sum_deviation"] = abs(expansion.weight_sum - 1.0)
    manifest.extra["projection_defect"] = expansion.projection_defect
    if args.check:
        dev = float(np.abs(values - dynamics.direct_series(system, spec)).max())
        manifest.extra["oracle_deviation"] = dev
        if not dev < QUENCH_TOL:
            raise VerificationFailure(f"eigenbasis series deviates from direct propagation by {dev:.3g}")
    return csv_series(spec.time_grid(), values)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (default: built-in 4-spin demo)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for the solver")

    parser = argparse.ArgumentParser(prog="gaudin", description="Spin-1/2 Gaudin magnets in arbitrary fields.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="all eigenstates with charges and energies")
    p.add_argument("--weights", help="comma-separated alpha_k for H = sum alpha_k R_k (default 1,0,...,0)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify", parents=[common], help="check the solver against exact diagonalization")
    p.add_argument("--nmax", type=int, default=10, help="largest system size accepted; 1 runs single-spin checks")
    p.add_argument("--perturb", type=float, default=0.0, help="shift one Lambda by this amount (negative control)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("roots", parents=[common], help="Bethe roots of every eigenstate or of given Lambdas")
    p.add_argument("--lambdas", help="comma-separated Lambda values to convert")
    p.set_defaults(func=cmd_roots)

    p = sub.add_parser("overlap", parents=[common], help="determinant scalar product of two states")
    p.add_argument("--lambdas-a")
    p.add_argument("--lambdas-b")
    p.add_argument("--label-a")
    p.add_argument("--label-b")
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("project", parents=[common], help="amplitude of a canonical basis state")
    p.add_argument("--lambdas")
    p.add_argument("--label")
    p.add_argument("--up", required=True, help="bit string, character k = 1 if spin k is up")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("quench", parents=[common], help="time series of a local spin after a quench")
    p.add_argument("--initial", required=True, help="bit string of the initial product state")
    p.add_argument("--weights", help="comma-separated alpha_k (default 1,0,...,0)")
    p.add_argument("--observable", default="sz:0", help="sz:k, sx:k or sy:k")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--tmax", type=float, default=10.0)
    p.add_argument("--steps", type=int, default=101)
    p.add_argument("--check", action="store_true", help="compare with direct propagation")
    p.set_defaults(func=cmd_quench)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    manifest = RunManifest(
        command=args.command,
        config_path=args.config,
        options={k: v for k, v in vars(args).items() if k not in {"func", "command"}},
    )
    func: Callable = args.func
    code = 0
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = load_config(args.config)
        manifest.extra["resolved_config"] = config_to_dict(cfg)
        text = func(args, cfg, manifest)
    except VerificationFailure as exc:
        text = getattr(exc, "report", None)
        code = exc.exit_code
        sys.stderr.write(json.dumps({"code": exc.code, "message": str(exc)}) + "\n")
        manifest.extra["error"] = {"code": exc.code, "message": str(exc)}
    except GaudinError as exc:
        sys.stderr.write(json.dumps({"code": exc.code, "message": str(exc)}) + "\n")
        return exc.exit_code
    if text is not None:
        _emit(text, args.out)
        if args.out is not None:
            manifest.outputs.append(args.out)
    if args.out is not None:
        Path(args.out + ".manifest.json").write_text(json.dumps(plain(manifest.finish()), indent=2) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
