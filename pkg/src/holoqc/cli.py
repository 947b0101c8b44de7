"""Command-line entry point: ``holoqc <command> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import numpy as np

from .connection import ConnectionError_, curvature
from .expr import ExprSyntaxError
from .fock import FockError
from .holalg import ClosureConfig, holonomy_algebra, irreducibility_check, membership
from .matcore import BranchCutError, DEFAULT_RANK_TOL, logm_unitary
from .models import BUILTIN_NAMES, ModelError, builtin_connection, load_model
from .transport import Loop, LoopError, rect_loop, transport

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_UNSTABLE = 0, 1, 2
DEFAULT_POINT = "0.8,0.5,0.6,0.4"


class UsageError(Exception):
    pass


def matrix_to_json(X: np.ndarray) -> list:
    """Row-major ``[[[re, im], ...], ...]``."""
    X = np.asarray(X, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in X]


def _format_matrix(X: np.ndarray, digits: int = 6) -> str:
    def cell(z):
        re, im = round(z.real, digits) + 0.0, round(z.imag, digits) + 0.0
        return f"{re:+.{digits}f}{im:+.{digits}f}i"

    return "\n".join("  [" + "  ".join(cell(z) for z in row) + "]" for row in np.asarray(X, complex))


def _parse_floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()], dtype=float)
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}; expected comma-separated numbers") from None


def _load(args):
    if args.model_file:
        spec = load_model(args.model_file, seed=args.seed)
        return spec.connection(), spec
    return builtin_connection(args.model, cutoff=args.cutoff)


def _point(args, conn) -> np.ndarray:
    text = args.point
    if text is None:
        if conn.d != 4:
            raise UsageError(f"model has {conn.d} coordinates; pass --point")
        text = DEFAULT_POINT
    p = _parse_floats(text, "point")
    if len(p) != conn.d:
        raise UsageError(f"point has {len(p)} coordinates, model needs {conn.d} ({', '.join(conn.names)})")
    return p


def _config(args) -> ClosureConfig:
    return ClosureConfig(depth_cap=args.depth, rank_tol=args.rank_tol, seed=args.seed)


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps({"schema": SCHEMA_VERSION, **payload}, indent=2))
    else:
        print(text)


def cmd_algebra(args) -> int:
    conn, _ = _load(args)
    p = _point(args, conn)
    rep = holonomy_algebra(conn, p, _config(args))
    verdict = irreducibility_check(rep, conn.d)
    center_iI = membership(rep.structure.center, 1j * np.eye(conn.n)) if rep.structure and rep.structure.center_dim else None
    payload = {
        "command": "algebra",
        "model": conn.name,
        "point": p.tolist(),
        "dim": rep.dim,
        "depth_used": rep.depth_used,
        "history": rep.history,
        "stabilized": rep.stabilized,
        "center_dim": rep.center_dim,
        "derived_dim": rep.derived_dim,
        "ideal_dims": rep.ideal_dims,
        "center_identity_residual": center_iI,
        "irreducible": verdict.irreducible,
        "commentary": verdict.commentary,
        "warnings": rep.warnings,
        "basis": [matrix_to_json(X) for X in rep.span.basis],
    }
    lines = [
        f"model {conn.name} at {p.tolist()}",
        f"dim {rep.dim}  (history {rep.history}, depth used {rep.depth_used}, "
        f"{'stabilized' if rep.stabilized else 'NOT stabilized'})",
        f"center {rep.center_dim}  derived {rep.derived_dim}  ideals {rep.ideal_dims}",
        verdict.commentary,
    ]
    lines += [f"warning: {w}" for w in rep.warnings]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if rep.stabilized else EXIT_UNSTABLE


def cmd_curvature(args) -> int:
    conn, _ = _load(args)
    p = _point(args, conn)
    F = curvature(conn, p)
    comps = [(conn.names[i], conn.names[j], X) for i, j, X in F.components()]
    payload = {
        "command": "curvature",
        "model": conn.name,
        "point": p.tolist(),
        "components": [{"i": a, "j": b, "matrix": matrix_to_json(X)} for a, b, X in comps],
    }
    blocks = [f"F[{a},{b}]\n{_format_matrix(X)}" for a, b, X in comps if np.max(np.abs(X)) > 0]
    text = "\n".join([f"model {conn.name} at {p.tolist()}"] + (blocks or ["curvature vanishes"]))
    _emit(args, payload, text)
    return EXIT_OK


def _loop(args, conn) -> Loop:
    if args.loop and args.rect:
        raise UsageError("give either --loop or --rect, not both")
    if args.loop:
        try:
            with open(args.loop) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read loop file: {exc}") from None
        return Loop.from_json(data)
    if args.rect:
        parts = [t.strip() for t in args.rect.split(",")]
        if len(parts) != 3:
            raise UsageError("--rect expects i,j,eps")
        try:
            i, j = (conn.names.index(x) if x in conn.names else int(x) for x in parts[:2])
            eps = float(parts[2])
        except ValueError:
            raise UsageError(f"cannot parse --rect {args.rect!r}") from None
        if eps <= 0 or not (0 <= i < conn.d and 0 <= j < conn.d) or i == j:
            raise UsageError("--rect needs two distinct coordinates and eps > 0")
        return rect_loop(_point(args, conn), i, j, eps)
    raise UsageError("transport needs --loop FILE or --rect i,j,eps")


def cmd_transport(args) -> int:
    conn, _ = _load(args)
    loop = _loop(args, conn)
    result = transport(conn, loop, steps=args.steps)
    rep = holonomy_algebra(conn, loop.start, _config(args))
    try:
        X = logm_unitary(result.gamma)
        residual: Optional[float] = membership(rep.span, X)
    except BranchCutError:
        X, residual = None, None
    payload = {
        "command": "transport",
        "model": conn.name,
        "base": loop.start.tolist(),
        "gamma": matrix_to_json(result.gamma),
        "steps": result.steps,
        "unitarity_drift": result.unitarity_drift,
        "log_gamma": matrix_to_json(X) if X is not None else None,
        "algebra_dim": rep.dim,
        "membership_residual": residual,
    }
    res_text = f"{residual:.3e}" if residual is not None else "n/a (eigenvalue at -1)"
    text = "\n".join([
        f"holonomy of {conn.name} around loop at {loop.start.tolist()}",
        _format_matrix(result.gamma),
        f"steps {result.steps}  unitarity drift {result.unitarity_drift:.3e}",
        f"membership residual vs dim-{rep.dim} algebra: {res_text}",
    ])
    _emit(args, payload, text)
    return EXIT_OK


def cmd_verify_paper(args) -> int:
    from .verify import verify_paper

    report = verify_paper(fock=args.fock, seed=args.seed, cutoff=args.cutoff)
    _emit(args, {"command": "verify-paper", **report.to_json()}, report.text())
    return EXIT_OK if report.passed else EXIT_UNSTABLE


def cmd_fock_compare(args) -> int:
    from .fock import FockSpace, compare_with_reference, oracle_connection
    from .models import builtin_two_qubit
    from .verify import FOCK_POINT

    ref = builtin_two_qubit().connection()
    p = _parse_floats(args.point, "point") if args.point else np.array(FOCK_POINT)
    if len(p) != 4:
        raise UsageError("fock-compare needs a 4-coordinate point (r2, theta2, r3, theta3)")
    oracle = oracle_connection(FockSpace(2, args.cutoff), "two-qubit")
    rows = compare_with_reference(oracle, ref, [p])
    text = "\n".join(
        f"{r['coefficient']:<10} max|dev| {r['max_abs_dev']:.3e}  (cutoff {r['cutoff']})" for r in rows
    )
    _emit(args, {"command": "fock-compare", "rows": rows}, text)
    return EXIT_OK


COMMANDS = {
    "algebra": cmd_algebra,
    "curvature": cmd_curvature,
    "transport": cmd_transport,
    "verify-paper": cmd_verify_paper,
    "fock-compare": cmd_fock_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--model", default="two-qubit-optical", choices=BUILTIN_NAMES, help="built-in model")
    src.add_argument("--model-file", help="JSON model file")
    common.add_argument("--point", help="comma-separated base point")
    common.add_argument("--depth", type=int, default=6, help="covariant-derivative depth cap")
    common.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--steps", type=int, default=64, help="initial transport steps per segment")
    common.add_argument("--cutoff", type=int, default=24, help="Fock cutoff per mode")

    parser = argparse.ArgumentParser(prog="holoqc", description="Holonomy algebras of non-abelian connections.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("algebra", parents=[common], help="holonomy algebra at a point")
    sub.add_parser("curvature", parents=[common], help="curvature components at a point")
    t = sub.add_parser("transport", parents=[common], help="holonomy along a loop")
    t.add_argument("--loop", help="loop JSON file")
    t.add_argument("--rect", help="coordinate rectangle at --point: i,j,eps (names or indices)")
    v = sub.add_parser("verify-paper", parents=[common], help="reproduce the two-qubit claims")
    v.add_argument("--fock", action="store_true", help="include the Fock-space oracle rows")
    sub.add_parser("fock-compare", parents=[common], help="oracle vs printed coefficients")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ModelError, ExprSyntaxError, LoopError, FockError, ConnectionError_, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
