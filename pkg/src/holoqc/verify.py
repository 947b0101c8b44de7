"""Reproduction of the optical two-qubit holonomy claims as a table of checks."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .connection import bianchi_residual, covariant_field, curvature, curvature_field
from .holalg import ClosureConfig, holonomy_algebra, irreducibility_check, membership
from .matcore import logm_unitary
from .models import ModelSpec, builtin_two_qubit

BASE_POINT = (0.8, 0.5, 0.6, 0.4)
# squeezing up to 0.8 needs a larger cutoff before the frame stops leaking
HIGH_SQUEEZE_CUTOFF = 48
HIGH_SQUEEZE_POINTS = ((0.8, 0.5, 0.6, 0.4), (0.8, -1.0, 0.8, 2.0))
FOCK_POINT = (0.5, 0.3, 0.4, 0.7)
CURVATURE_TOL = 1e-6
COVARIANT_TOL = 1e-6
CENTER_TOL = 1e-8
GATE_TOL = 1e-10
BIANCHI_TOL = 1e-5
FOCK_ENTRY_TOL = 1e-3
DISCREPANCY_MIN = 1e-3


@dataclass
class Row:
    name: str
    passed: bool
    value: float | int | str | None = None
    threshold: float | str | None = None
    detail: str = ""
    kind: str = "check"

    def __post_init__(self):
        # numpy scalars would not survive json.dumps
        self.passed = bool(self.passed)
        if isinstance(self.value, np.generic):
            self.value = self.value.item()

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if self.kind == "discrepancy":
            tag += " (discrepancy)"
        value = f"{self.value:.3e}" if isinstance(self.value, float) else self.value
        bits = [f"{tag:<20} {self.name}"]
        if value is not None:
            bits.append(f"value={value}")
        if self.threshold is not None:
            bits.append(f"limit={self.threshold}")
        if self.detail:
            bits.append(self.detail)
        return "  ".join(bits)


@dataclass
class VerifyReport:
    rows: list[Row] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def find(self, name: str) -> Row:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"passed": self.passed, "rows": [asdict(r) for r in self.rows]}

    def text(self) -> str:
        return "\n".join(r.line() for r in self.rows)


def _max_dev_over(points, f) -> float:
    return float(max(np.max(np.abs(f(p))) for p in points))


def _nested_covariant(conn, spec: ModelSpec, of: tuple[str, str], directions: tuple[str, ...]):
    field_ = curvature_field(conn, spec.index(of[0]), spec.index(of[1]))
    for k in directions:
        field_ = covariant_field(conn, field_, spec.index(k))
    return field_


def check_curvature(spec: ModelSpec, points) -> list[Row]:
    conn = spec.connection()
    rows = []
    listed = set()
    for (a, b), ref in spec.curvature_ref.items():
        i, j = spec.index(a), spec.index(b)
        listed.update({(i, j), (j, i)})
        dev = _max_dev_over(points, lambda p: curvature(conn, p)[i, j] - ref.evaluate(spec.bindings(p)))
        rows.append(Row(f"F[{a},{b}] vs printed", dev <= CURVATURE_TOL, dev, CURVATURE_TOL))
    others = [(i, j) for i in range(spec.d) for j in range(i + 1, spec.d) if (i, j) not in listed]
    if others:
        dev = _max_dev_over(points, lambda p: np.array([curvature(conn, p)[i, j] for i, j in others]))
        names = ", ".join(f"{spec.coordinates[i]},{spec.coordinates[j]}" for i, j in others)
        rows.append(Row("unlisted F components vanish", dev <= CURVATURE_TOL, dev, CURVATURE_TOL, names))
    return rows


def check_covariant(spec: ModelSpec, points) -> list[Row]:
    """Compare every printed covariant derivative; disagreeing variants become discrepancy rows."""
    conn = spec.connection()
    groups: dict[tuple, list] = {}
    for ref in spec.covariant_ref:
        groups.setdefault((ref.of, ref.directions), []).append(ref)
    rows = []
    for (of, directions), refs in groups.items():
        field_ = _nested_covariant(conn, spec, of, directions)
        values = [(p, field_(p)) for p in points]
        devs = {
            r.label: float(max(np.max(np.abs(v - r.matrix.evaluate(spec.bindings(p)))) for p, v in values))
            for r in refs
        }
        name = "".join(f"D[{k}]" for k in reversed(directions)) + f" F[{of[0]},{of[1]}]"
        if len(refs) == 1:
            dev = devs[refs[0].label]
            rows.append(Row(f"{name} vs printed", dev <= COVARIANT_TOL, dev, COVARIANT_TOL))
            continue
        matching = [label for label, dev in devs.items() if dev <= COVARIANT_TOL]
        detail = "; ".join(f"{label}: max dev {dev:.2e}" for label, dev in devs.items())
        rows.append(Row(
            f"{name} variants",
            len(matching) == 1 and max(devs.values()) > DISCREPANCY_MIN,
            matching[0] if len(matching) == 1 else "none" if not matching else "ambiguous",
            COVARIANT_TOL,
            detail,
            kind="discrepancy",
        ))
    return rows


def check_ddf_discrepancy(spec: ModelSpec, points) -> Row:
    """The printed diagonal term of the second theta2 derivative versus the structure equation."""
    conn = spec.connection()
    field_ = _nested_covariant(conn, spec, ("r2", "theta2"), ("theta2", "theta2"))
    worst_printed, worst_oracle = 0.0, 0.0
    for p in points:
        v = field_(p)[0, 0]
        r2 = p[spec.index("r2")]
        worst_printed = max(worst_printed, abs(v - 2j * np.sinh(r2) ** 3))
        worst_oracle = max(worst_oracle, abs(v - 2j * np.sinh(2 * r2) ** 3))
    detected = worst_printed > DISCREPANCY_MIN and worst_oracle <= COVARIANT_TOL
    return Row(
        "DDF diagonal term",
        detected,
        "printed: sinh^3 r2 / oracle: sinh^3 2r2",
        None,
        f"dev vs printed {worst_printed:.2e}, dev vs structure equation {worst_oracle:.2e}",
        kind="discrepancy",
    )


def check_algebra(spec: ModelSpec, p0=BASE_POINT) -> list[Row]:
    conn = spec.connection()
    rows = []
    rep0 = holonomy_algebra(conn, p0, ClosureConfig(depth_cap=0))
    ok0 = (rep0.dim, rep0.center_dim, rep0.derived_dim) == (4, 1, 3)
    rows.append(Row(
        "curvature-only span su(2)+u(1)", ok0, rep0.dim, 4,
        f"center {rep0.center_dim}, derived {rep0.derived_dim}",
    ))
    rep = holonomy_algebra(conn, p0)
    center_res = membership(rep.structure.center, 1j * np.eye(rep.n)) if rep.structure else 1.0
    ok = (
        rep.dim == 7 and rep.depth_used <= 2 and rep.center_dim == 1
        and center_res <= CENTER_TOL and rep.ideal_dims == [3, 3]
    )
    rows.append(Row(
        "full closure su(2)+su(2)+u(1)", ok, rep.dim, 7,
        f"depth {rep.depth_used}, history {rep.history}, ideals {rep.ideal_dims}, "
        f"center residual of iI {center_res:.1e}",
    ))
    verdict = irreducibility_check(rep, conn.d)
    rows.append(Row("connection not irreducible", not verdict.irreducible, None, None, verdict.commentary))
    for gate_name, gate in spec.gates.items():
        X = logm_unitary(gate.evaluate({}))
        res = membership(rep.span, X)
        rows.append(Row(f"{gate_name} in holonomy algebra", res <= GATE_TOL, res, GATE_TOL))
    return rows


def check_bianchi(spec: ModelSpec, points) -> Row:
    conn = spec.connection()
    worst = max(bianchi_residual(conn, p) for p in points)
    return Row("Bianchi identity", worst <= BIANCHI_TOL, worst, BIANCHI_TOL)


def check_fock(spec: ModelSpec, cutoff: int = 24) -> list[Row]:
    from .fock import FockSpace, compare_with_reference, oracle_connection

    rows = []
    oracle = oracle_connection(FockSpace(2, cutoff), "two-qubit")
    table = compare_with_reference(oracle, spec.connection(), [FOCK_POINT])
    worst = max(r["max_abs_dev"] for r in table)
    rows.append(Row(
        "Fock oracle A vs printed", worst <= FOCK_ENTRY_TOL, worst, FOCK_ENTRY_TOL,
        f"cutoff {cutoff} at {list(FOCK_POINT)}",
    ))
    high = oracle_connection(FockSpace(2, max(cutoff, HIGH_SQUEEZE_CUTOFF)), "two-qubit")
    table = compare_with_reference(high, spec.connection(), HIGH_SQUEEZE_POINTS)
    worst = max(r["max_abs_dev"] for r in table)
    rows.append(Row(
        "Fock oracle A vs printed, r = 0.8", worst <= FOCK_ENTRY_TOL, worst, FOCK_ENTRY_TOL,
        f"cutoff {high.frame.space.cutoff}",
    ))
    rep = holonomy_algebra(oracle, FOCK_POINT)
    center_res = membership(rep.structure.center, 1j * np.eye(4)) if rep.structure else 1.0
    ok = rep.dim == 7 and rep.center_dim == 1 and center_res <= CENTER_TOL and rep.ideal_dims == [3, 3]
    rows.append(Row(
        "Fock oracle algebra structure", ok, rep.dim, 7,
        f"cutoff {cutoff} at {list(FOCK_POINT)}, ideals {rep.ideal_dims}, center residual {center_res:.1e}",
    ))
    single = oracle_connection(FockSpace(1, cutoff), "single")
    rep1 = holonomy_algebra(single, (0.3, 0.2, 0.25, 0.6))
    rows.append(Row("single-qubit oracle algebra u(2)", rep1.dim == 4, rep1.dim, 4, f"cutoff {cutoff}"))
    return rows


def verify_paper(fock: bool = False, seed: int = 0, points: int = 20, cutoff: int = 24) -> VerifyReport:
    spec = builtin_two_qubit()
    pts = spec.sample_points(points, seed)
    report = VerifyReport()
    report.rows += check_curvature(spec, pts)
    report.rows += check_covariant(spec, pts)
    report.rows.append(check_ddf_discrepancy(spec, pts))
    report.rows += check_algebra(spec)
    report.rows.append(check_bianchi(spec, pts))
    if fock:
        report.rows += check_fock(spec, cutoff)
    return report


__all__ = ["Row", "VerifyReport", "verify_paper", "check_curvature", "check_covariant",
           "check_ddf_discrepancy", "check_algebra", "check_bianchi", "check_fock",
           "BASE_POINT", "FOCK_POINT", "HIGH_SQUEEZE_CUTOFF", "HIGH_SQUEEZE_POINTS"]
