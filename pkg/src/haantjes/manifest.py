"""Structure manifests: charts, named tensor fields, candidate bundles.

Manifests are TOML files.  Components are listed with explicit 1-based index
keys, either dotted ("2.1") or nested tables; scalars may use a bare string.

::

    [chart]
    dim = 2
    lower = [-2.0, -2.0]
    upper = [2.0, 2.0]
    base_point = [0.1, 0.2]
    label = "u"

    [fields.A]
    valence = "scalar"
    components = "u1"

    [fields.K2]
    valence = "(1,1)"
    [fields.K2.components]
    "1.1" = "u2"
    "1.2" = "0"
    "2.1" = "0"
    "2.2" = "u1"

    [candidate]
    A = "A"
    K = ["identity", "K2"]
    xi = "xi"          # optional

    [checks]
    tolerance = 1e-8
    points = 50
    seed = 42
    run = ["commute", "square-closed"]   # optional; default: full pipeline
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from .certify import HaantjesCandidate
from .chart import ChartBox
from .errors import EvalError, HaantjesError, ParseError, SchemaError
from .expr import parse_expr
from .fields import TensorField, Valence, identity_field

__all__ = ["CheckConfig", "Manifest", "load_manifest", "loads_manifest"]

_RANKS = {
    Valence.SCALAR: 0,
    Valence.VECTOR: 1,
    Valence.ONEFORM: 1,
    Valence.OP: 2,
    Valence.BILINEAR: 3,
}


@dataclass
class CheckConfig:
    tolerance: float = 1e-8
    points: int = 50
    seed: int = 42
    run: tuple = ()  # empty means the full pipeline


@dataclass
class Manifest:
    chart: ChartBox
    fields: dict
    candidate: HaantjesCandidate | None
    checks: CheckConfig
    simulate: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    sha256: str = ""
    name: str = ""


def _require(table, key, path):
    if key not in table:
        raise SchemaError(f"{path}: missing required key {key!r}")
    return table[key]


def _parse_component(src, dim, path):
    if not isinstance(src, str):
        raise SchemaError(f"{path}: component must be an expression string, got {src!r}")
    try:
        return parse_expr(src, dim=dim)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc.message}", exc.offset, exc.expected) from exc
    except HaantjesError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _flatten_keys(table, prefix=""):
    flat = {}
    for key, value in table.items():
        dotted = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            flat.update(_flatten_keys(value, dotted))
        else:
            flat[dotted] = value
    return flat


def _load_field(name, table, chart):
    path = f"fields.{name}"
    valence = _require(table, "valence", path)
    if valence not in _RANKS:
        raise SchemaError(f"{path}: unknown valence {valence!r}")
    rank = _RANKS[valence]
    n = chart.dim
    comps_src = _require(table, "components", path)
    if rank == 0:
        if isinstance(comps_src, dict):
            comps_src = comps_src.get("1", None)
        e = _parse_component(comps_src, n, path)
        return TensorField(chart, valence, np.array(e, dtype=object))
    if not isinstance(comps_src, dict):
        raise SchemaError(f"{path}: components must be an index-keyed table")
    flat = _flatten_keys(comps_src)
    expected = n**rank
    if len(flat) != expected:
        raise SchemaError(f"{path}: expected {expected} components, got {len(flat)}")
    arr = np.empty((n,) * rank, dtype=object)
    for key, src in flat.items():
        parts = key.split(".")
        if len(parts) != rank or not all(p.isdigit() for p in parts):
            raise SchemaError(f"{path}: bad component key {key!r} for valence {valence}")
        idx = tuple(int(p) - 1 for p in parts)
        if not all(0 <= i < n for i in idx):
            raise SchemaError(f"{path}: component index {key!r} out of range for dim {n}")
        arr[idx] = _parse_component(src, n, f"{path}.{key}")
    if any(c is None for c in arr.flat):
        raise SchemaError(f"{path}: duplicate or missing component indices")
    return TensorField(chart, valence, arr)


def _probe_points(chart):
    """Corner-adjacent interior points (capped at 8) plus the base point."""
    lo = np.asarray(chart.lower)
    hi = np.asarray(chart.upper)
    mid = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    pts = [chart.base]
    for k in range(min(2**chart.dim, 8)):
        signs = np.array([1.0 if (k >> i) & 1 else -1.0 for i in range(chart.dim)])
        pts.append(mid + 0.9 * signs * half)
    return pts


def _probe_fields(fields, chart):
    for name, f in fields.items():
        for p in _probe_points(chart):
            try:
                f.jet_at(p)
            except EvalError as exc:
                raise EvalError(f"fields.{name}: undefined inside the chart box: {exc}") from exc


def _build_candidate(table, fields, chart):
    a_name = _require(table, "A", "candidate")
    if a_name not in fields:
        raise SchemaError(f"candidate: unknown field {a_name!r}")
    A = fields[a_name]
    if A.valence != Valence.SCALAR:
        raise SchemaError(f"candidate: A must be a scalar field, {a_name!r} is {A.valence}")
    k_names = _require(table, "K", "candidate")
    if not isinstance(k_names, list) or not k_names:
        raise SchemaError("candidate: K must be a non-empty list of field names")
    K_list = []
    for name in k_names:
        if name == "identity":
            K_list.append(identity_field(chart))
            continue
        if name not in fields:
            raise SchemaError(f"candidate: unknown field {name!r}")
        K = fields[name]
        if K.valence != Valence.OP:
            raise SchemaError(f"candidate: {name!r} must have valence (1,1)")
        K_list.append(K)
    full = len(K_list) == chart.dim
    eye = np.eye(chart.dim)
    k1_defect = max(
        float(np.max(np.abs(K_list[0].value_at(p) - eye))) for p in _probe_points(chart)
    )
    if full and k1_defect > 1e-12:
        raise SchemaError("candidate: K[0] must be the identity for a full certification")
    xi = F = None
    if "xi" in table:
        name = table["xi"]
        if name not in fields:
            raise SchemaError(f"candidate: unknown field {name!r}")
        xi = fields[name]
        if xi.valence != Valence.VECTOR:
            raise SchemaError(f"candidate: xi must be a vector field, {name!r} is {xi.valence}")
    if "F" in table:
        name = table["F"]
        if name not in fields:
            raise SchemaError(f"candidate: unknown field {name!r}")
        F = fields[name]
        if F.valence != Valence.SCALAR:
            raise SchemaError(f"candidate: F must be a scalar field, {name!r} is {F.valence}")
    return HaantjesCandidate(chart=chart, A=A, K_list=tuple(K_list), xi=xi, F=F)


def loads_manifest(data: bytes, name=""):
    """Parse and fully validate manifest bytes."""
    try:
        doc = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"manifest is not valid TOML: {exc}") from exc
    chart_tab = _require(doc, "chart", "manifest")
    try:
        chart = ChartBox(
            dim=int(_require(chart_tab, "dim", "chart")),
            lower=tuple(chart_tab.get("lower", ())),
            upper=tuple(chart_tab.get("upper", ())),
            base_point=tuple(chart_tab.get("base_point", ())),
            label=chart_tab.get("label", "u"),
        )
    except HaantjesError as exc:
        raise SchemaError(f"chart: {exc}") from exc
    fields = {}
    for fname, ftab in doc.get("fields", {}).items():
        if not isinstance(ftab, dict):
            raise SchemaError(f"fields.{fname}: must be a table")
        fields[fname] = _load_field(fname, ftab, chart)
    _probe_fields(fields, chart)
    candidate = None
    if "candidate" in doc:
        candidate = _build_candidate(doc["candidate"], fields, chart)
    checks_tab = doc.get("checks", {})
    checks = CheckConfig(
        tolerance=float(checks_tab.get("tolerance", 1e-8)),
        points=int(checks_tab.get("points", 50)),
        seed=int(checks_tab.get("seed", 42)),
        run=tuple(checks_tab.get("run", ())),
    )
    if checks.points < 1:
        raise SchemaError("checks.points must be positive")
    if checks.tolerance <= 0:
        raise SchemaError("checks.tolerance must be positive")
    return Manifest(
        chart=chart,
        fields=fields,
        candidate=candidate,
        checks=checks,
        simulate=dict(doc.get("simulate", {})),
        expected=dict(doc.get("expected", {})),
        sha256=hashlib.sha256(data).hexdigest(),
        name=name,
    )


def load_manifest(path_or_name):
    """Load a manifest file, or a packaged scenario by name."""
    from . import scenarios

    p = Path(path_or_name)
    if not p.exists():
        packaged = scenarios.find(str(path_or_name))
        if packaged is None:
            raise SchemaError(
                f"{path_or_name!r} is neither a readable file nor a packaged scenario "
                f"(known: {', '.join(scenarios.names())})"
            )
        return loads_manifest(packaged, name=str(path_or_name))
    return loads_manifest(p.read_bytes(), name=p.stem)
