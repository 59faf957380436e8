"""Command-line entry point: ``ergoqca {enumerate,verify,spectrum,mix,run,lemmas}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dynamics, gates, lattice, readout, walk
from .errors import ErgoError

TOL_NORMAL = 1e-12
TOL_NUMERIC = 1e-10


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        _atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, Fraction):
        return str(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _horizon(text: str) -> float | None:
    if text.lower() in ("inf", "infinity", "none"):
        return None
    value = float(text)
    if not math.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"T must be positive or 'inf', got {text!r}")
    return value


def _dims(args) -> lattice.Dims:
    return lattice.Dims(args.h, args.c)


def _load_circuit(path: str | None, h: int) -> gates.Circuit:
    if path is None:
        return gates.Circuit(h=h, layers=({},))
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read circuit file {path!r}: {exc.strerror}") from exc
    return gates.parse_circuit(text)


# ------------------------------------------------------------ subcommands


def cmd_enumerate(args) -> int:
    _emit(lattice.lattice(_dims(args)).export_csv(), args.out)
    return 0


def verify_report(dims: lattice.Dims, M: int = 2, circuit: gates.Circuit | None = None, steps: int | None = None) -> dict:
    lat = lattice.lattice(dims)
    fr = dynamics.build_reduced_f(dims, M)
    brute = {a.front for a in lattice.brute_force_configs(dims)} if dims.c**dims.h <= 10**6 else None
    weights_ok = all(
        fw == bw for fw, bw in (lattice.weight_sums(a, dims) for a in lat.configs)
    )
    report = {
        "h": dims.h,
        "c": dims.c,
        "M": M,
        "n_configs": len(lat.configs),
        "closure_violations": len(lattice.closure_violations(dims)),
        "matches_validity_filter": None if brute is None else brute == set(lat.index),
        "normality_defect": dynamics.normality_defect(fr),
        "block_balance_defect": dynamics.block_balance_defect(fr),
        "off_grade_mass": dynamics.off_grade_mass(fr),
        "weight_identity": weights_ok,
        "crosscheck": None,
    }
    if dims.h * dims.c <= dynamics.FULL_MODE_MAX_CELLS:
        # without a flagged circuit a wrap leaves the data unchanged, so windings merge (M = 1)
        if circuit is None:
            circuit = gates.Circuit(h=dims.h, layers=({},))
            program = gates.Program(dims)
            m_check = 1
        else:
            circuit = gates.attach_flags(circuit)
            program = gates.place(circuit, dims, 0)
            m_check = M
        n = 2 * M * dims.g if steps is None else steps
        cc = dynamics.crosscheck_reduced(dims, program, circuit.initial_bits("0" * circuit.n_in), n, m_check)
        report["crosscheck"] = {
            "M": m_check,
            "steps": n,
            "flagged": bool(circuit.flags),
            "max_deviation": cc.max_deviation,
            "orthogonality_defect": cc.orthogonality_defect,
        }
    checks = [
        report["closure_violations"] == 0,
        report["matches_validity_filter"] in (True, None),
        report["normality_defect"] <= TOL_NORMAL,
        report["block_balance_defect"] <= TOL_NUMERIC,
        report["off_grade_mass"] <= TOL_NUMERIC,
        weights_ok,
    ]
    if report["crosscheck"] is not None:
        checks.append(report["crosscheck"]["max_deviation"] <= TOL_NUMERIC)
        if report["crosscheck"]["flagged"]:
            checks.append(report["crosscheck"]["orthogonality_defect"] <= TOL_NUMERIC)
    report["ok"] = all(checks)
    return report


def cmd_verify(args) -> int:
    circuit = _load_circuit(args.circuit, args.h) if args.circuit else None
    report = verify_report(_dims(args), args.M, circuit, args.steps)
    _emit(_json(report), args.out)
    return 0 if report["ok"] else 1


def cmd_spectrum(args) -> int:
    fr = dynamics.build_reduced_f(_dims(args), args.M)
    sd = dynamics.spectral(fr)
    f_moduli = np.sort(np.linalg.svd(fr.dense(), compute_uv=False))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "h_eigenvalue", "f_modulus"])
    for i, (lam, mod) in enumerate(zip(sd.eigenvalues, f_moduli)):
        writer.writerow([i, _fmt(lam), _fmt(mod)])
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_mix(args) -> int:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["N", "a", "delta", "eps", "T", "tv", "fourier_bound", "satisfied"])
    ok = True
    for N in args.N:
        rep = walk.verify_mixing(walk.CycleWalk(N, args.a), args.delta, args.eps)
        ok &= rep.satisfied
        T = "inf" if rep.T is None else _fmt(rep.T)
        writer.writerow([N, _fmt(args.a), _fmt(args.delta), _fmt(args.eps), T, _fmt(rep.tv), _fmt(rep.bound), int(rep.satisfied)])
    _emit(buf.getvalue(), args.out)
    return 0 if ok else 1


def cmd_run(args) -> int:
    dims = _dims(args)
    circuit = _load_circuit(args.circuit, args.h)
    spec = readout.ExperimentSpec(
        dims=dims, m=args.m, circuit=circuit, x=args.x, T=args.T, shots=args.shots,
        seed=args.seed, init=args.init, M=args.M, eps=args.eps,
    )
    report = readout.run_experiment(spec)
    if args.out:
        out = Path(args.out)
        _atomic_write(out / "report.json", report.to_json())
        if args.shots_csv:
            _atomic_write(out / "shots.csv", report.shots_csv())
    else:
        sys.stdout.write(report.to_json())
    return 0


def lemma_report(dims: lattice.Dims, eps_values, M: int = 2) -> dict:
    fr = dynamics.build_reduced_f(dims, M)
    space = fr.space
    a = lattice.staircase_config(dims)
    psi = space.basis_vector(space.index_of(a))
    f = fr.dense()
    ftf = f.conj().T @ f
    vec = ftf @ psi
    bounds = dynamics.angle_bounds(ftf, psi)
    rows = []
    for eps in eps_values:
        s = dynamics.spectral_mass(fr, psi, eps)
        lit = bounds.mass_lower_literal(eps**2) if eps > 0 else bounds.image_mass_lower
        cor = bounds.mass_lower(eps**2) if eps > 0 else bounds.image_mass_lower
        rows.append({
            "eps": eps,
            "s_eps": s,
            "s_eps_schur": dynamics.spectral_mass_schur(f, psi, eps),
            "bound_literal": lit,
            "bound_corrected": cor,
            "literal_holds": s >= lit - 1e-12,
            "corrected_holds": s >= cor - 1e-12,
        })
    return {
        "h": dims.h,
        "c": dims.c,
        "staircase": list(a.front),
        "expect_ftf": float(np.real(np.vdot(psi, vec))),
        "norm_ftf": float(np.linalg.norm(vec)),
        "alpha": bounds.alpha,
        "L": bounds.L,
        "image_mass_lower": bounds.image_mass_lower,
        "s_0": dynamics.spectral_mass(fr, psi, 0.0),
        "masses": rows,
    }


def cmd_lemmas(args) -> int:
    report = lemma_report(_dims(args), args.eps, args.M)
    _emit(_json(report), args.out)
    ok = abs(report["expect_ftf"] - 0.5) <= TOL_NORMAL and report["s_0"] >= 0.5 - TOL_NORMAL
    ok &= all(r["corrected_holds"] for r in report["masses"])
    return 0 if ok else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergoqca", description="Ergodic brickwork QCA toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def cylinder(p, need_m=False):
        p.add_argument("--h", type=int, required=True, help="columns (qubits), even")
        p.add_argument("--c", type=int, required=True, help="cyclic rows, even, > 2h")
        p.add_argument("--out", help="output path (stdout if omitted)")
        if need_m:
            p.add_argument("--m", type=int, required=True, help="output region rows 1..m")

    p = sub.add_parser("enumerate", help="export valid clock configurations as CSV")
    cylinder(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("verify", help="closure, normality, grading and full-model crosscheck")
    cylinder(p)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--circuit", help="circuit file; flags are attached and it is placed at row 0")
    p.add_argument("--steps", type=int, help="crosscheck steps (default 2N)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("spectrum", help="eigenvalues of H = F + F^dagger as CSV")
    cylinder(p)
    p.add_argument("--M", type=int, default=2)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("mix", help="cycle walk mixing at the prescribed waiting time")
    p.add_argument("--N", type=int, nargs="+", required=True)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("run", help="end-to-end readout experiment")
    cylinder(p, need_m=True)
    p.add_argument("--circuit", help="circuit file (default: empty circuit, flags only)")
    p.add_argument("--x", default="", help="input bitstring")
    p.add_argument("--T", type=_horizon, default=None, help="averaging horizon or 'inf'")
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=("flat", "staircase"), default="staircase")
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--shots-csv", action="store_true", help="also write shots.csv (needs --out)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("lemmas", help="staircase angle and spectral-mass battery")
    cylinder(p)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--eps", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    p.set_defaults(func=cmd_lemmas)
    return parser


def _error(kind: str, message: str, stage: str | None = None) -> None:
    payload = {"error": kind, "message": message}
    if stage:
        payload["stage"] = stage
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def _thread_limit():
    raw = os.environ.get("ERGO_QCA_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"ERGO_QCA_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"ERGO_QCA_THREADS must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "shots_csv", False) and not args.out:
        _error("UsageError", "--shots-csv requires --out")
        return 2
    try:
        limiter = _thread_limit()
        try:
            return args.func(args)
        finally:
            if limiter is not None:
                limiter.unregister()
    except UsageError as exc:
        _error("UsageError", str(exc))
        return 2
    except ErgoError as exc:
        _error(type(exc).__name__, str(exc), exc.stage)
        return 1
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
