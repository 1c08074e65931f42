"""JSON problem interchange and report serialization.

Problem files carry either a high-level constraint model (kind "constraint")
or a field instance (kind "linsat").  Serialization is canonical: sorted
keys, two-space indent, rationals encoded as "numerator/denominator", field
elements as plain integers with the field order in the header.  Loading
validates against the shipped JSON Schemas and load(save(load(x))) is
byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Optional, Union

import jsonschema

from .errors import ProblemFormatError
from .gadgets import Gadget
from .gf import FieldOrder
from .instance import LinsatInstance
from .model import ConstraintModel, IntConstraint, IntExpr, IntMonomial, Relation, SetConstraint

FORMAT_VERSION = 1

_SCHEMA_NAMES = (
    "problem",
    "transform_report",
    "analysis_report",
    "solve_result",
    "estimate_report",
    "gadget",
)
_schema_cache: dict = {}


def load_schema(name: str) -> dict:
    if name not in _SCHEMA_NAMES:
        raise ProblemFormatError(f"unknown schema {name!r}")
    if name not in _schema_cache:
        text = resources.files("linsat.schemas").joinpath(f"{name}.schema.json").read_text()
        _schema_cache[name] = json.loads(text)
    return _schema_cache[name]


def validate(data: dict, schema_name: str):
    schema = load_schema(schema_name)
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path
        )
        raise ProblemFormatError(f"{schema_name} schema violation at {path}: {e.message}", field=path)


def dumps_canonical(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def frac_str(f) -> str:
    f = Fraction(f)
    return f"{f.numerator}/{f.denominator}"


def parse_frac(s: str) -> Fraction:
    return Fraction(s)


# -- expressions ------------------------------------------------------------


def expr_to_json(expr: IntExpr) -> dict:
    terms = []
    for mono, coeff in sorted(expr.terms.items(), key=lambda kv: kv[0].vars):
        terms.append(
            {"monomial": [[vid, exp] for vid, exp in mono.vars], "coefficient": frac_str(coeff)}
        )
    return {"constant": frac_str(expr.const), "terms": terms}


def expr_from_json(model: ConstraintModel, data: dict) -> IntExpr:
    terms = {}
    for t in data["terms"]:
        mono = IntMonomial(tuple((int(v), int(e)) for v, e in t["monomial"]))
        for vid, _ in mono.vars:
            model.var(vid)  # existence check
        terms[mono] = parse_frac(t["coefficient"])
    return IntExpr(model, terms, parse_frac(data["constant"]))


# -- models ------------------------------------------------------------------


def model_to_json(model: ConstraintModel) -> dict:
    constraints = []
    for c in model.constraints:
        if isinstance(c, IntConstraint):
            constraints.append(
                {
                    "type": "relational",
                    "expr": expr_to_json(c.expr),
                    "relation": c.relation.value,
                    "mod": c.modulus,
                    "weight": frac_str(c.weight),
                }
            )
        else:
            constraints.append(
                {
                    "type": "membership",
                    "expr": expr_to_json(c.expr),
                    "values": list(c.values),
                    "mod": c.modulus,
                    "weight": frac_str(c.weight),
                }
            )
    return {
        "variables": [
            {"id": v.id, "name": v.name, "lower": v.lower, "upper": v.upper}
            for v in model.variables
        ],
        "objectives": [
            {"expr": expr_to_json(o.expr), "weight": frac_str(o.weight), "origin": o.origin}
            for o in model.objectives
        ],
        "constraints": constraints,
    }


def model_from_json(data: dict) -> ConstraintModel:
    model = ConstraintModel()
    for v in data["variables"]:
        if v["id"] != len(model.variables):
            raise ProblemFormatError(
                f"variable ids must be sequential; got {v['id']}", field="variables"
            )
        model.new_var(v["name"], v["lower"], v["upper"])
    for o in data["objectives"]:
        expr = expr_from_json(model, o["expr"])
        model.add_objective(expr, weight=parse_frac(o["weight"]), origin=o.get("origin", "objective"))
    for c in data["constraints"]:
        expr = expr_from_json(model, c["expr"])
        weight = parse_frac(c["weight"])
        if c["type"] == "relational":
            model.constraints.append(
                IntConstraint(expr, Relation(c["relation"]), c["mod"], weight)
            )
        else:
            model.constraints.append(
                SetConstraint(expr, tuple(c["values"]), c["mod"], weight)
            )
    return model


# -- instances ------------------------------------------------------------------


def instance_to_json(inst: LinsatInstance) -> dict:
    return {
        "order": inst.p,
        "merge": inst.merge,
        "variables": [{"id": v.id, "name": v.name} for v in inst.variables],
        "constraints": [
            {
                "coefficients": [[vid, coef] for vid, coef in c.coeffs],
                "rhs": [[value, weight] for value, weight in c.rhs],
                "provenance": list(c.provenance),
            }
            for c in inst.constraints
        ],
    }


def instance_from_json(data: dict) -> LinsatInstance:
    inst = LinsatInstance(FieldOrder(data["order"]), merge=data.get("merge", "scaled"))
    for v in data["variables"]:
        if v["id"] != len(inst.variables):
            raise ProblemFormatError(
                f"variable ids must be sequential; got {v['id']}", field="variables"
            )
        inst.new_var(v["name"])
    p = inst.p
    for ci, c in enumerate(data["constraints"]):
        coeffs = tuple((int(v), int(x)) for v, x in c["coefficients"])
        rhs = tuple((int(v), int(w)) for v, w in c["rhs"])
        for vid, coef in coeffs:
            if not 0 <= vid < len(inst.variables):
                raise ProblemFormatError(f"constraint {ci}: unknown variable {vid}")
            if not 1 <= coef < p:
                raise ProblemFormatError(f"constraint {ci}: coefficient {coef} out of range")
        for value, weight in rhs:
            if not 0 <= value < p:
                raise ProblemFormatError(f"constraint {ci}: member value {value} out of range")
            if weight < 1:
                raise ProblemFormatError(f"constraint {ci}: weight {weight} must be positive")
        inst._insert(coeffs, rhs, tuple(c.get("provenance", [])))
    return inst


# -- problem files -----------------------------------------------------------------


@dataclass
class ProblemFile:
    kind: str  # "constraint" | "linsat"
    problem: Union[ConstraintModel, LinsatInstance]
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        payload = (
            model_to_json(self.problem)
            if self.kind == "constraint"
            else instance_to_json(self.problem)
        )
        out = {"format": FORMAT_VERSION, "kind": self.kind, "problem": payload}
        if self.metadata:
            out["metadata"] = self.metadata
        return out


def problem_from_json(data: dict) -> ProblemFile:
    validate(data, "problem")
    kind = data["kind"]
    if kind == "constraint":
        problem = model_from_json(data["problem"])
    else:
        problem = instance_from_json(data["problem"])
    return ProblemFile(kind, problem, data.get("metadata", {}))


def wrap(problem, metadata: Optional[dict] = None) -> ProblemFile:
    if isinstance(problem, ConstraintModel):
        return ProblemFile("constraint", problem, metadata or {})
    if isinstance(problem, LinsatInstance):
        return ProblemFile("linsat", problem, metadata or {})
    raise ProblemFormatError(f"cannot serialize {type(problem).__name__}")


def load_problem(path) -> ProblemFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ProblemFormatError(f"{path}: not valid JSON ({e})") from e
    return problem_from_json(data)


def save_problem(path, problem, metadata: Optional[dict] = None):
    pf = problem if isinstance(problem, ProblemFile) else wrap(problem, metadata)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(pf.to_json()))


# -- gadget serialization -------------------------------------------------------------


def gadget_to_json(g: Gadget) -> dict:
    return {
        "name": g.name,
        "order": g.order.p,
        "arity": g.arity,
        "aux_count": g.aux_count,
        "constraints": [
            {"coefficients": list(coeffs), "members": list(members), "weight": weight}
            for coeffs, members, weight in g.constraints
        ],
        "s_yes": g.s_yes,
        "s_no": g.s_no,
        "kind": g.kind,
    }


def gadget_from_json(data: dict) -> Gadget:
    validate(data, "gadget")
    return Gadget(
        data["name"],
        FieldOrder(data["order"]),
        data["arity"],
        data["aux_count"],
        tuple(
            (tuple(c["coefficients"]), tuple(c["members"]), c["weight"])
            for c in data["constraints"]
        ),
        data["s_yes"],
        data["s_no"],
        data["kind"],
    )


# -- shipped fixtures ----------------------------------------------------------------


def _fx_and_gadget() -> ProblemFile:
    inst = LinsatInstance(2)
    x1 = inst.new_var("x1")
    x2 = inst.new_var("x2")
    inst.add_constraint(x1 == 1)
    inst.add_constraint(x2 == 1)
    inst.add_constraint(x1 + x2 == 0)
    return ProblemFile("linsat", inst, {"name": "and_gadget"})


def _fx_repetition3() -> ProblemFile:
    inst = LinsatInstance(2)
    x0 = inst.new_var("x0")
    x1 = inst.new_var("x1")
    inst.add_constraint(x0 == 0)
    inst.add_constraint(x1 == 0)
    inst.add_constraint(x0 + x1 == 0)
    return ProblemFile("linsat", inst, {"name": "repetition3"})


def _fx_maxcut_triangle() -> ProblemFile:
    inst = LinsatInstance(2)
    xs = [inst.new_var(f"x{i}") for i in range(3)]
    for u, v in ((0, 1), (1, 2), (2, 0)):
        inst.add_constraint(xs[u] + xs[v] == 1)
    return ProblemFile("linsat", inst, {"name": "maxcut_triangle"})


def _fx_duplicate_pair() -> ProblemFile:
    inst = LinsatInstance(2, merge="none")
    x0 = inst.new_var("x0")
    inst.new_var("x1")
    inst.add_constraint(x0 == 1)
    inst.add_constraint(x0 == 1)
    return ProblemFile("linsat", inst, {"name": "duplicate_pair"})


def _fx_triangle_colouring() -> ProblemFile:
    model = ConstraintModel()
    xs = [model.new_var(f"x{i}", 0, 2) for i in range(3)]
    for u, v in ((0, 1), (1, 2), (2, 0)):
        model.add_constraint(xs[u] != xs[v])
    return ProblemFile("constraint", model, {"name": "triangle_colouring"})


def _fx_knapsack() -> ProblemFile:
    model = ConstraintModel()
    sizes = (3, 4, 5)
    values = (5, 4, 3)
    capacity = 7
    xs = [model.new_binary_var(f"x{i}") for i in range(3)]
    model.add_constraint(
        sum(x * s for x, s in zip(xs, sizes)) <= capacity, weight=2 * sum(values)
    )
    model.add_objective(sum(x * v for x, v in zip(xs, values)))
    return ProblemFile("constraint", model, {"name": "knapsack"})


def _fx_vertex_cover() -> ProblemFile:
    model = ConstraintModel()
    xs = [model.new_binary_var(f"x{i}") for i in range(3)]
    model.add_objective(sum(x for x in xs), minimize=True)
    for u, v in ((0, 1), (1, 2)):
        model.add_boolean_constraint(xs[u] | xs[v], weight=2)
    return ProblemFile("constraint", model, {"name": "vertex_cover"})


FIXTURE_BUILDERS = {
    "and_gadget": _fx_and_gadget,
    "repetition3": _fx_repetition3,
    "maxcut_triangle": _fx_maxcut_triangle,
    "duplicate_pair": _fx_duplicate_pair,
    "triangle_colouring": _fx_triangle_colouring,
    "knapsack": _fx_knapsack,
    "vertex_cover": _fx_vertex_cover,
}


def fixture(name: str) -> ProblemFile:
    try:
        return FIXTURE_BUILDERS[name]()
    except KeyError:
        raise ProblemFormatError(f"unknown fixture {name!r}") from None


def fixture_path(name: str):
    """Path to the shipped JSON file for a fixture."""
    if name not in FIXTURE_BUILDERS:
        raise ProblemFormatError(f"unknown fixture {name!r}")
    return resources.files("linsat.fixtures").joinpath(f"{name}.json")


def write_fixtures(directory):
    """Regenerate all fixture files (canonical bytes) into a directory."""
    import pathlib

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, builder in FIXTURE_BUILDERS.items():
        (directory / f"{name}.json").write_text(dumps_canonical(builder().to_json()))
