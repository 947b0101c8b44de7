"""Model registry, model file format and the built-in two-qubit optical connection.

A model file is JSON::

    {
      "name": "abelian-demo",
      "fiber_dim": 1,
      "coordinates": ["x", "y"],
      "coefficients": {"x": [["0"]], "y": [["i*x"]]},
      "domain": {"x": [-1, 1]},            # optional sampling box
      "reference": {...}                     # optional, see below
    }

``reference`` may hold ``curvature`` (``"a,b"`` -> matrix), ``covariant``
(list of ``{"directions": [...], "of": "a,b", "matrix": ..., "label": ...}``
with directions applied innermost first) and ``gates`` (name -> matrix).
Matrices are lists of rows of expression strings; ``"0"`` entries are skipped
at evaluation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import jsonschema
import numpy as np

from .connection import ConnectionField
from .expr import Expr, ExprSyntaxError, Num, compile_expr, free_variables, parse_expr, to_source
from .matcore import antihermitian_defect

ANTIHERMITIAN_TOL = 1e-9
LOAD_CHECK_POINTS = 100

MATRIX_SCHEMA = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"type": ["string", "number"]}},
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["name", "fiber_dim", "coordinates", "coefficients"],
    "properties": {
        "name": {"type": "string"},
        "fiber_dim": {"type": "integer", "minimum": 1},
        "coordinates": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
        },
        "coefficients": {"type": "object", "additionalProperties": MATRIX_SCHEMA},
        "domain": {
            "type": "object",
            "additionalProperties": {
                "type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"},
            },
        },
        "reference": {
            "type": "object",
            "properties": {
                "curvature": {"type": "object", "additionalProperties": MATRIX_SCHEMA},
                "covariant": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["directions", "of", "matrix"],
                        "properties": {
                            "directions": {"type": "array", "items": {"type": "string"}},
                            "of": {"type": "string"},
                            "matrix": MATRIX_SCHEMA,
                            "label": {"type": "string"},
                        },
                    },
                },
                "gates": {"type": "object", "additionalProperties": MATRIX_SCHEMA},
            },
        },
    },
}


class ModelError(ValueError):
    """Schema, parse or invariant violation while loading a model."""


class ExprMatrix:
    """An ``n x n`` matrix of parsed expressions."""

    def __init__(self, rows: Sequence[Sequence[Union[str, float]]], where: str = ""):
        self.n = len(rows)
        if any(len(r) != self.n for r in rows):
            raise ModelError(f"{where}: matrix must be square, got rows of lengths {[len(r) for r in rows]}")
        self.entries: dict[tuple[int, int], Expr] = {}
        for a, row in enumerate(rows):
            for b, src in enumerate(row):
                src = str(src) if not isinstance(src, str) else src
                try:
                    e = parse_expr(src)
                except ExprSyntaxError as exc:
                    raise ModelError(f"{where}[{a}][{b}]: {exc} in {src!r}") from exc
                if isinstance(e, Num) and e.value == 0.0:
                    continue
                self.entries[(a, b)] = e
        self._compiled = {ab: compile_expr(e) for ab, e in self.entries.items()}

    def variables(self) -> set[str]:
        out = set()
        for e in self.entries.values():
            out |= free_variables(e)
        return out

    def evaluate(self, bindings: Mapping[str, float]) -> np.ndarray:
        M = np.zeros((self.n, self.n), dtype=complex)
        for (a, b), f in self._compiled.items():
            M[a, b] = f(bindings)
        return M

    def evaluate_many(self, bindings: Mapping[str, np.ndarray], count: int) -> np.ndarray:
        """Vectorized evaluation with array-valued bindings; shape ``(count, n, n)``."""
        M = np.zeros((count, self.n, self.n), dtype=complex)
        for (a, b), f in self._compiled.items():
            M[:, a, b] = f(bindings)
        return M

    def to_rows(self) -> list[list[str]]:
        rows = [["0"] * self.n for _ in range(self.n)]
        for (a, b), e in self.entries.items():
            rows[a][b] = to_source(e)
        return rows


@dataclass
class CovariantReference:
    directions: tuple[str, ...]
    of: tuple[str, str]
    matrix: ExprMatrix
    label: str = ""


@dataclass
class ModelSpec:
    name: str
    n: int
    coordinates: tuple[str, ...]
    coefficients: dict[str, ExprMatrix]
    domain: dict[str, tuple[float, float]] = field(default_factory=dict)
    curvature_ref: dict[tuple[str, str], ExprMatrix] = field(default_factory=dict)
    covariant_ref: list[CovariantReference] = field(default_factory=list)
    gates: dict[str, ExprMatrix] = field(default_factory=dict)
    partials: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def d(self) -> int:
        return len(self.coordinates)

    def bindings(self, p) -> dict[str, float]:
        return {name: float(x) for name, x in zip(self.coordinates, p)}

    def coefficient_array(self, p) -> np.ndarray:
        b = self.bindings(p)
        return np.stack([self.coefficients[c].evaluate(b) for c in self.coordinates])

    def coefficient_batch(self, P: np.ndarray) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        b = {name: P[:, k] for k, name in enumerate(self.coordinates)}
        return np.stack([self.coefficients[c].evaluate_many(b, len(P)) for c in self.coordinates], axis=1)

    def connection(self) -> ConnectionField:
        return ConnectionField(
            self.d, self.n, self.coefficient_array, self.coordinates, self.partials, self.name,
            self.coefficient_batch,
        )

    def index(self, coord: str) -> int:
        try:
            return self.coordinates.index(coord)
        except ValueError:
            raise ModelError(f"unknown coordinate {coord!r}") from None

    def sample_points(self, count: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        lo = np.array([self.domain.get(c, (-1.0, 1.0))[0] for c in self.coordinates])
        hi = np.array([self.domain.get(c, (-1.0, 1.0))[1] for c in self.coordinates])
        return lo + (hi - lo) * rng.random((count, self.d))

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "fiber_dim": self.n,
            "coordinates": list(self.coordinates),
            "coefficients": {c: self.coefficients[c].to_rows() for c in self.coordinates},
        }
        if self.domain:
            out["domain"] = {c: list(v) for c, v in self.domain.items()}
        ref: dict[str, Any] = {}
        if self.curvature_ref:
            ref["curvature"] = {f"{a},{b}": m.to_rows() for (a, b), m in self.curvature_ref.items()}
        if self.covariant_ref:
            ref["covariant"] = [
                {"directions": list(c.directions), "of": ",".join(c.of), "matrix": c.matrix.to_rows(),
                 "label": c.label}
                for c in self.covariant_ref
            ]
        if self.gates:
            ref["gates"] = {k: m.to_rows() for k, m in self.gates.items()}
        if ref:
            out["reference"] = ref
        return out


def _pair(text: str) -> tuple[str, str]:
    parts = [t.strip() for t in text.split(",")]
    if len(parts) != 2:
        raise ModelError(f"expected 'a,b' coordinate pair, got {text!r}")
    return parts[0], parts[1]


def model_from_dict(data: Mapping[str, Any], check: bool = True, seed: int = 0) -> ModelSpec:
    """Build a :class:`ModelSpec` from parsed JSON, running load-time checks."""
    try:
        jsonschema.validate(data, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(x) for x in exc.absolute_path)
        raise ModelError(f"schema violation at '{path}': {exc.message}") from exc

    n = data["fiber_dim"]
    coords = tuple(data["coordinates"])
    if len(set(coords)) != len(coords):
        raise ModelError("duplicate coordinate names")
    if "i" in coords:
        raise ModelError("'i' is the imaginary unit and cannot name a coordinate")
    missing = set(coords) - set(data["coefficients"])
    extra = set(data["coefficients"]) - set(coords)
    if missing or extra:
        raise ModelError(f"coefficients must match coordinates (missing {sorted(missing)}, extra {sorted(extra)})")

    def matrix(rows, where):
        m = ExprMatrix(rows, where)
        if m.n != n:
            raise ModelError(f"{where}: expected {n}x{n} matrix, got {m.n}x{m.n}")
        unknown = m.variables() - set(coords)
        if unknown:
            raise ModelError(f"{where}: unbound variable(s) {sorted(unknown)}")
        return m

    coefficients = {c: matrix(data["coefficients"][c], f"coefficients.{c}") for c in coords}
    domain = {c: (float(v[0]), float(v[1])) for c, v in data.get("domain", {}).items()}
    ref = data.get("reference", {})
    curvature_ref = {}
    for key, rows in ref.get("curvature", {}).items():
        a, b = _pair(key)
        curvature_ref[(a, b)] = matrix(rows, f"reference.curvature.{key}")
    covariant_ref = [
        CovariantReference(tuple(c["directions"]), _pair(c["of"]),
                           matrix(c["matrix"], f"reference.covariant[{k}]"), c.get("label", ""))
        for k, c in enumerate(ref.get("covariant", []))
    ]
    gates = {k: matrix(rows, f"reference.gates.{k}") for k, rows in ref.get("gates", {}).items()}
    spec = ModelSpec(data["name"], n, coords, coefficients, domain, curvature_ref, covariant_ref, gates)
    for a, b in curvature_ref:
        spec.index(a), spec.index(b)
    for c in covariant_ref:
        for name in c.directions + c.of:
            spec.index(name)
    if check:
        check_model(spec, LOAD_CHECK_POINTS, seed)
    return spec


def check_model(spec: ModelSpec, count: int = LOAD_CHECK_POINTS, seed: int = 0):
    """Anti-Hermiticity of every coefficient at ``count`` sampled points."""
    for p in spec.sample_points(count, seed):
        try:
            A = spec.coefficient_array(p)
        except Exception as exc:
            raise ModelError(f"evaluation failed at {p.tolist()}: {exc}") from exc
        if not np.all(np.isfinite(A)):
            raise ModelError(f"non-finite coefficient at {p.tolist()}")
        for k, c in enumerate(spec.coordinates):
            defect = antihermitian_defect(A[k])
            if defect > ANTIHERMITIAN_TOL:
                S = A[k] + A[k].conj().T
                a, b = np.unravel_index(np.argmax(np.abs(S)), S.shape)
                raise ModelError(
                    f"coefficient A_{c} is not anti-Hermitian at {np.round(p, 6).tolist()}: "
                    f"entry [{a}][{b}] vs [{b}][{a}] defect {defect:.3e}"
                )


def load_model(source: Union[str, Path, Mapping[str, Any]], check: bool = True, seed: int = 0) -> ModelSpec:
    """Load a model from a JSON file path or an already-parsed mapping."""
    if isinstance(source, Mapping):
        return model_from_dict(source, check, seed)
    path = Path(source)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON: {exc}") from exc
    return model_from_dict(data, check, seed)


# -- built-in two-qubit optical model -------------------------------------

TWO_QUBIT_COORDS = ("r2", "theta2", "r3", "theta3")


def outer_pair() -> tuple[np.ndarray, np.ndarray]:
    """``(E41 - E14, E14 + E41)``: the outer-corner shapes of the two-qubit coefficients at zero phase."""
    E14 = np.zeros((4, 4), complex)
    E14[0, 3] = 1.0
    E41 = E14.T.copy()
    return E41 - E14, E14 + E41


def _sparse(n: int, entries: Mapping[tuple[int, int], str]) -> list[list[str]]:
    """Rows from 1-based ``(row, col) -> expr`` entries."""
    rows = [["0"] * n for _ in range(n)]
    for (a, b), src in entries.items():
        rows[a - 1][b - 1] = src
    return rows


def _diag(weights: Sequence[float], factor: str) -> dict[tuple[int, int], str]:
    out = {}
    for k, w in enumerate(weights, start=1):
        if w == 0:
            continue
        coef = "" if w == 1 else ("-" if w == -1 else f"{w:g}*")
        out[(k, k)] = f"{coef}{factor}"
    return out


def _two_qubit_data() -> dict[str, Any]:
    cosh2 = "(2*cosh(r2)^2 - 1)"
    A_r2 = {(1, 4): "-exp(-i*theta2)", (4, 1): "exp(i*theta2)"}
    A_r3 = {(2, 3): f"-exp(-i*theta3)*{cosh2}", (3, 2): f"exp(i*theta3)*{cosh2}"}
    A_t2 = {
        (1, 4): "exp(-i*theta2)*i/2*sinh(2*r2)",
        (4, 1): "exp(i*theta2)*i/2*sinh(2*r2)",
        **_diag((1, 2, 2, 3), "i/2*(cosh(2*r2) - 1)"),
    }
    A_t3 = {
        (2, 3): "exp(-i*theta3)*i/2*cosh(2*r2)*sin(2*r3)",
        (3, 2): "exp(i*theta3)*i/2*cosh(2*r2)*sin(2*r3)",
        **_diag((0, 1, -1, 0), "i*sin(r3)^2"),
    }
    F_r2r3 = {(2, 3): "-exp(-i*theta3)*2*sinh(2*r2)", (3, 2): "exp(i*theta3)*2*sinh(2*r2)"}
    F_r2t2 = _diag((0, 1, 1, 2), "2*i*sinh(2*r2)")
    F_r2t3 = {
        (2, 3): "exp(-i*theta3)*i*sin(2*r3)*sinh(2*r2)",
        (3, 2): "exp(i*theta3)*i*sin(2*r3)*sinh(2*r2)",
    }
    F_r3t3 = _diag((0, -1, 1, 0), "i*sin(2*r3)*sinh(2*r2)^2")
    DF_t2 = {(1, 4): "-exp(-i*theta2)*2*sinh(2*r2)^2", (4, 1): "exp(i*theta2)*2*sinh(2*r2)^2"}
    DF_r2 = {
        (1, 4): "exp(-i*theta2)*(-4*i*sinh(2*r2))",
        (4, 1): "exp(i*theta2)*(-4*i*sinh(2*r2))",
        **_diag((0, 1, 1, 2), "4*i*cosh(2*r2)"),
    }
    offdiag_ddf = {
        (1, 4): "exp(-i*theta2)*2*i*sinh(2*r2)^2*cosh(2*r2)",
        (4, 1): "exp(i*theta2)*2*i*sinh(2*r2)^2*cosh(2*r2)",
    }
    # diagonal term exactly as printed, and the structure-equation value
    DDF_printed = {**offdiag_ddf, **_diag((1, 0, 0, -1), "2*i*sinh(r2)^3")}
    DDF_oracle = {**offdiag_ddf, **_diag((1, 0, 0, -1), "2*i*sinh(2*r2)^3")}
    s2 = "1/sqrt(2)"
    sqrt_swap = {(1, 1): "1", (2, 2): s2, (2, 3): f"-i*{s2}", (3, 2): f"-i*{s2}", (3, 3): s2, (4, 4): "1"}
    return {
        "name": "two-qubit-optical",
        "fiber_dim": 4,
        "coordinates": list(TWO_QUBIT_COORDS),
        "coefficients": {
            "r2": _sparse(4, A_r2),
            "theta2": _sparse(4, A_t2),
            "r3": _sparse(4, A_r3),
            "theta3": _sparse(4, A_t3),
        },
        "domain": {"r2": [0.0, 1.2], "theta2": [-3.14159, 3.14159], "r3": [-1.5, 1.5],
                   "theta3": [-3.14159, 3.14159]},
        "reference": {
            "curvature": {
                "r2,r3": _sparse(4, F_r2r3),
                "r2,theta2": _sparse(4, F_r2t2),
                "r2,theta3": _sparse(4, F_r2t3),
                "r3,theta3": _sparse(4, F_r3t3),
            },
            "covariant": [
                {"directions": ["theta2"], "of": "r2,theta2", "matrix": _sparse(4, DF_t2),
                 "label": "D_theta2 F_r2theta2"},
                {"directions": ["r2"], "of": "r2,theta2", "matrix": _sparse(4, DF_r2),
                 "label": "D_r2 F_r2theta2"},
                {"directions": ["theta2", "theta2"], "of": "r2,theta2", "matrix": _sparse(4, DDF_printed),
                 "label": "D_theta2 D_theta2 F_r2theta2 (as printed)"},
                {"directions": ["theta2", "theta2"], "of": "r2,theta2", "matrix": _sparse(4, DDF_oracle),
                 "label": "D_theta2 D_theta2 F_r2theta2 (structure equation)"},
            ],
            "gates": {"sqrt_swap": _sparse(4, sqrt_swap)},
        },
    }


def _two_qubit_partials(p: np.ndarray) -> np.ndarray:
    """Hand-derived ``out[j, i] = d_j A_i`` for the two-qubit model."""
    r2, t2, r3, t3 = (float(x) for x in p)
    s, c = np.sinh(2 * r2), np.cosh(2 * r2)
    e2m, e2p = np.exp(-1j * t2), np.exp(1j * t2)
    e3m, e3p = np.exp(-1j * t3), np.exp(1j * t3)
    Z = np.zeros((4, 4), dtype=complex)

    def pq(a, b, em, ep):
        P = Z.copy()
        P[a, b], P[b, a] = -em, ep
        Q = Z.copy()
        Q[a, b], Q[b, a] = em, ep
        return P, Q

    P2, Q2 = pq(0, 3, e2m, e2p)
    P3, Q3 = pq(1, 2, e3m, e3p)
    D123 = np.diag([1, 2, 2, 3]).astype(complex)
    Dz = np.diag([0, 1, -1, 0]).astype(complex)
    s3, c3 = np.sin(2 * r3), np.cos(2 * r3)

    out = np.zeros((4, 4, 4, 4), dtype=complex)
    R2, T2, R3, T3 = 0, 1, 2, 3
    # A_r2 = P2
    out[T2, R2] = 1j * Q2
    # A_theta2 = Q2 (i/2) s + D123 (i/2)(c - 1)
    out[R2, T2] = Q2 * 1j * c + D123 * 1j * s
    out[T2, T2] = -0.5 * s * P2
    # A_r3 = P3 cosh(2 r2)
    out[R2, R3] = P3 * 2 * s
    out[T3, R3] = 1j * Q3 * c
    # A_theta3 = Q3 (i/2) c sin(2 r3) + Dz i sin(r3)^2
    out[R2, T3] = Q3 * 1j * s * s3
    out[R3, T3] = Q3 * 1j * c * c3 + Dz * 1j * s3
    out[T3, T3] = -0.5 * c * s3 * P3
    return out


def two_qubit_json() -> dict[str, Any]:
    """The built-in two-qubit model in file form."""
    return _two_qubit_data()


def builtin_two_qubit() -> ModelSpec:
    """Analytic two-qubit optical connection with reference curvature data."""
    spec = model_from_dict(_two_qubit_data(), check=True)
    spec.partials = _two_qubit_partials
    return spec


def abelian_demo() -> ModelSpec:
    """``n = 1`` model with ``A_x = 0``, ``A_y = i x``; curvature ``F_xy = i``."""
    return model_from_dict({
        "name": "abelian-demo",
        "fiber_dim": 1,
        "coordinates": ["x", "y"],
        "coefficients": {"x": [["0"]], "y": [["i*x"]]},
    })


def _fock_two_qubit(cutoff: int):
    from .fock import FockSpace, oracle_connection
    return oracle_connection(FockSpace(2, cutoff), "two-qubit")


def _fock_single_qubit(cutoff: int):
    from .fock import FockSpace, oracle_connection
    return oracle_connection(FockSpace(1, cutoff), "single")


BUILTIN_NAMES = ("two-qubit-optical", "abelian-demo", "fock-two-qubit", "fock-single-qubit")


def builtin_connection(name: str, cutoff: int = 24) -> tuple[ConnectionField, Optional[ModelSpec]]:
    """Connection for a registry name, with its :class:`ModelSpec` when expression-backed."""
    if name == "two-qubit-optical":
        spec = builtin_two_qubit()
        return spec.connection(), spec
    if name == "abelian-demo":
        spec = abelian_demo()
        return spec.connection(), spec
    if name == "fock-two-qubit":
        return _fock_two_qubit(cutoff), None
    if name == "fock-single-qubit":
        return _fock_single_qubit(cutoff), None
    raise ModelError(f"unknown model {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
