"""Problem files and machine-readable reports.

A problem file is a JSON document:

    {
      "dimension": 2,
      "objective": "-x1^2 - x2",
      "constraints": {
        "finite":     ["x1", ...],                       and/or
        "parametric": {"h": "...", "t_dim": 1,
                        "box": {"lower": [0], "upper": [1]}, "grid": 129},
        "polyhedral": {"normals": [[1,0],[0,1]], "offsets": [0,0]}
      },
      "inner_map":  ["x1", "x2 - x1^2"],                  (optional)
      "equality":   ["x1 - x2"],                          (optional)
      "candidate":  [0, 0],                               (optional)
      "options":    {"eps0": 1.0, ...}                    (optional)
    }

``constraints`` may combine "finite" with "parametric" (the union family);
"polyhedral" stands alone.  Omitting ``constraints`` altogether means the
problem has no inequality constraints (the A = whole-space case of the
equality branch).  Everything is schema-validated before any computation
and unknown keys are rejected.

Reports are emitted with every float at 17 significant digits, so
parse(emit(report)) round-trips bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .expr import ParseError, parse
from .geometry import Polyhedron
from .model import FiniteFamily, IndexSet, ParametricFamily, PolyhedralFamily, Problem
from .options import OPTION_KEYS

__all__ = ["ProblemFileError", "LoadedProblem", "load_problem", "emit_json"]


class ProblemFileError(Exception):
    def __init__(self, message, where="$"):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class LoadedProblem:
    problem: Problem
    candidate: np.ndarray | None
    options: dict  # raw option overrides from the file
    grid: int | None  # parametric base grid, exposed for --grid overrides
    notes: tuple


def _require(cond, message, where):
    if not cond:
        raise ProblemFileError(message, where)


def _check_keys(obj, allowed, where):
    unknown = set(obj) - set(allowed)
    _require(not unknown, f"unknown keys {sorted(unknown)}", where)


def _parse_expr(src, arity_x, arity_t, where):
    _require(isinstance(src, str), "expected an expression string", where)
    try:
        return parse(src, arity_x, arity_t)
    except ParseError as err:
        raise ProblemFileError(f"bad expression {src!r}: {err}", where) from err


def _number_list(values, where, length=None):
    _require(isinstance(values, list) and values, "expected a nonempty array of numbers", where)
    out = []
    for i, v in enumerate(values):
        _require(isinstance(v, (int, float)) and not isinstance(v, bool), "expected a number", f"{where}[{i}]")
        out.append(float(v))
    if length is not None:
        _require(len(out) == length, f"expected {length} entries", where)
    return out


def load_problem(source) -> LoadedProblem:
    """Load and validate a problem file (path, JSON text, or mapping)."""
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            try:
                with open(source, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as err:
                raise ProblemFileError(f"cannot read {source}: {err}") from err
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ProblemFileError(f"malformed JSON: {err}") from err
    _require(isinstance(doc, dict), "top level must be an object", "$")
    _check_keys(
        doc,
        ("dimension", "objective", "constraints", "inner_map", "equality", "candidate", "options"),
        "$",
    )
    _require("dimension" in doc and "objective" in doc, "dimension and objective are required", "$")
    p = doc["dimension"]
    _require(isinstance(p, int) and p >= 1, "dimension must be a positive integer", "$.dimension")

    inner_map = None
    q = p
    if "inner_map" in doc:
        raw = doc["inner_map"]
        _require(isinstance(raw, list) and raw, "inner_map must be a nonempty array", "$.inner_map")
        inner_map = tuple(
            _parse_expr(s, p, 0, f"$.inner_map[{i}]") for i, s in enumerate(raw)
        )
        q = len(inner_map)

    objective = _parse_expr(doc["objective"], p, 0, "$.objective")
    family, grid = _load_constraints(doc.get("constraints"), q)

    equality = None
    if "equality" in doc:
        raw = doc["equality"]
        _require(isinstance(raw, list) and raw, "equality must be a nonempty array", "$.equality")
        equality = tuple(_parse_expr(s, p, 0, f"$.equality[{i}]") for i, s in enumerate(raw))

    candidate = None
    if "candidate" in doc:
        candidate = np.array(_number_list(doc["candidate"], "$.candidate", length=p))

    raw_options = {}
    if "options" in doc:
        opts = doc["options"]
        _require(isinstance(opts, dict), "options must be an object", "$.options")
        _check_keys(opts, OPTION_KEYS, "$.options")
        int_keys = ("max_steps", "refine_depth", "k_max", "lipschitz_samples")
        for key, value in opts.items():
            _require(
                isinstance(value, (int, float)) and not isinstance(value, bool),
                "option values must be numbers",
                f"$.options.{key}",
            )
            raw_options[key] = int(value) if key in int_keys else float(value)

    notes = []
    if "k_max" in raw_options:
        notes.append(f"countable families truncated at k <= {raw_options['k_max']}")
    try:
        problem = Problem(p, objective, family, inner_map, equality)
    except ValueError as err:
        raise ProblemFileError(str(err), "$") from err
    return LoadedProblem(problem, candidate, raw_options, grid, tuple(notes))


def _load_constraints(raw, q):
    if raw is None:
        return None, None
    _require(isinstance(raw, dict) and raw, "constraints must be a nonempty object", "$.constraints")
    _check_keys(raw, ("finite", "parametric", "polyhedral"), "$.constraints")
    if "polyhedral" in raw:
        _require(
            len(raw) == 1, "polyhedral constraints cannot be combined", "$.constraints"
        )
        spec = raw["polyhedral"]
        _require(isinstance(spec, dict), "expected an object", "$.constraints.polyhedral")
        _check_keys(spec, ("normals", "offsets"), "$.constraints.polyhedral")
        _require(
            "normals" in spec and "offsets" in spec,
            "normals and offsets are required",
            "$.constraints.polyhedral",
        )
        normals = spec["normals"]
        _require(
            isinstance(normals, list) and normals, "expected a nonempty array", "$.constraints.polyhedral.normals"
        )
        rows = [
            _number_list(row, f"$.constraints.polyhedral.normals[{j}]", length=q)
            for j, row in enumerate(normals)
        ]
        offsets = _number_list(spec["offsets"], "$.constraints.polyhedral.offsets", length=len(rows))
        try:
            poly = Polyhedron(np.array(rows), np.array(offsets))
        except Exception as err:
            raise ProblemFileError(str(err), "$.constraints.polyhedral") from err
        return PolyhedralFamily(poly), None

    finite_members = []
    if "finite" in raw:
        members = raw["finite"]
        _require(isinstance(members, list) and members, "expected a nonempty array", "$.constraints.finite")
        finite_members = [
            _parse_expr(s, q, 0, f"$.constraints.finite[{i}]") for i, s in enumerate(members)
        ]

    if "parametric" not in raw:
        tags = tuple(f"phi{i}" for i in range(len(finite_members)))
        return FiniteFamily(tuple(finite_members), tags), None

    spec = raw["parametric"]
    where = "$.constraints.parametric"
    _require(isinstance(spec, dict), "expected an object", where)
    _check_keys(spec, ("h", "t_dim", "box", "grid"), where)
    for key in ("h", "t_dim", "box", "grid"):
        _require(key in spec, f"{key} is required", where)
    t_dim = spec["t_dim"]
    _require(isinstance(t_dim, int) and t_dim >= 1, "t_dim must be a positive integer", f"{where}.t_dim")
    h = _parse_expr(spec["h"], q, t_dim, f"{where}.h")
    box = spec["box"]
    _require(isinstance(box, dict), "expected an object", f"{where}.box")
    _check_keys(box, ("lower", "upper"), f"{where}.box")
    lower = _number_list(box.get("lower"), f"{where}.box.lower", length=t_dim)
    upper = _number_list(box.get("upper"), f"{where}.box.upper", length=t_dim)
    grid = spec["grid"]
    _require(isinstance(grid, int) and grid >= 2, "grid must be an integer >= 2", f"{where}.grid")
    try:
        index = IndexSet.box(lower, upper, grid)
    except ValueError as err:
        raise ProblemFileError(str(err), f"{where}.box") from err
    tags = tuple(f"phi{i}" for i in range(len(finite_members)))
    family = ParametricFamily(h, index, tuple(finite_members), tags)
    return family, grid


# ---------------------------------------------------------------------------
# JSON emission with 17-significant-digit floats


def _emit(value, out):
    if value is None or isinstance(value, bool):
        out.append("null" if value is None else ("true" if value else "false"))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            out.append(json.dumps(str(v)))
        else:
            out.append(format(v, ".17g"))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, dict):
        out.append("{")
        for i, (k, v) in enumerate(value.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k)))
            out.append(": ")
            _emit(v, out)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        out.append("[")
        items = value.tolist() if isinstance(value, np.ndarray) else value
        for i, v in enumerate(items):
            if i:
                out.append(", ")
            _emit(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(value)!r}")


def emit_json(value) -> str:
    """Serialize a report with floats at 17 significant digits (round-trip exact)."""
    out = []
    _emit(value, out)
    return "".join(out)
