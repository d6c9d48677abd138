"""Deterministic build artifacts: the initialization plan and the glue.

The plan is the machine-readable counterpart of the glue listing: one
creation step per resolved device in dependency order, plus the table of
runtime-forwardable keys with their persisted defaults.  Serialization
is canonical (fixed field order, key table sorted by name), so repeated
configures produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .devices import Info, default_device_name
from .errors import PlanError
from .graph import ResolvedGraph
from .keys import (
    ArgSpec,
    Bool,
    Enum,
    Int,
    KeySpec,
    Literal,
    Stage,
    Text,
    ValueType,
)

PLAN_FORMAT = "fplan/1"


@dataclass(frozen=True)
class PlanKey:
    """ArgSpec metadata plus the persisted default for one runtime key."""

    name: str
    stage: str  # "both" or "runtime"
    kind: str
    type_tag: str
    names: tuple[str, ...]
    doc: str
    default: Literal | None
    allowed: tuple[str, ...] = ()

    def to_spec(self) -> KeySpec:
        vt: ValueType
        if self.type_tag == "bool":
            vt = Bool()
        elif self.type_tag == "int":
            vt = Int()
        elif self.type_tag == "text":
            vt = Text()
        elif self.type_tag == "enum":
            vt = Enum(self.allowed)
        else:
            raise PlanError(f"unknown value type tag {self.type_tag!r}")
        arg = ArgSpec(self.kind, vt, self.names, self.doc, self.default)
        stage = Stage.BOTH if self.stage == "both" else Stage.RUNTIME_ONLY
        return KeySpec(self.name, arg, stage)


@dataclass(frozen=True)
class PlanStep:
    var: str
    factory_id: str
    module_name: str
    args: tuple[str, ...]
    key_args: tuple[str, ...]


@dataclass(frozen=True)
class PlanDocument:
    app_name: str
    build_dir: str
    key_table: tuple[PlanKey, ...]
    steps: tuple[PlanStep, ...]
    jobs: tuple[str, ...]


def _plan_key(spec: KeySpec, resolved_value: Literal | None) -> PlanKey:
    arg = spec.arg
    allowed = tuple(sorted(arg.value_type.allowed)) if isinstance(arg.value_type, Enum) else ()
    return PlanKey(
        name=spec.name,
        stage="both" if spec.stage is Stage.BOTH else "runtime",
        kind=arg.kind,
        type_tag=arg.value_type.tag,
        names=arg.names,
        doc=arg.doc,
        default=resolved_value,
        allowed=allowed,
    )


def emit_plan(g: ResolvedGraph, info: Info, specs: Sequence[KeySpec]) -> PlanDocument:
    """One step per resolved node in topological order; variables are the
    lowercased module name plus a 1-based occurrence index."""
    order = g.topo_order()
    counts: dict[str, int] = {}
    var_of: dict[int, str] = {}
    steps = []
    for node in order:
        base = default_device_name(node.module_name)
        counts[base] = counts.get(base, 0) + 1
        var = f"{base}{counts[base]}"
        var_of[id(node)] = var
        steps.append(
            PlanStep(
                var=var,
                factory_id=node.device.connect.factory_id,
                module_name=node.module_name,
                args=tuple(var_of[id(a)] for a in node.args),
                key_args=node.device.connect.key_args,
            )
        )
    key_table = tuple(
        _plan_key(s, info.keys.value(s.name) if s.name in info.keys else None)
        for s in sorted(specs, key=lambda s: s.name)
        if s.stage.covers_runtime()
    )
    return PlanDocument(
        app_name=g.app_name,
        build_dir=str(info.build_dir),
        key_table=key_table,
        steps=tuple(steps),
        jobs=tuple(var_of[id(r)] for r in g.roots),
    )


def render_glue(plan: PlanDocument) -> str:
    """One creation line per step, mirroring the application structure."""
    lines = []
    for step in plan.steps:
        parts = list(step.args)
        parts += [f'{k}=lookup("{k}")' for k in step.key_args]
        lines.append(f"let {step.var} = {step.module_name}.create({', '.join(parts)})")
    lines.append(f"run {' '.join(plan.jobs)}")
    return "\n".join(lines) + "\n"


def emit_glue(g: ResolvedGraph, info: Info, specs: Sequence[KeySpec]) -> str:
    return render_glue(emit_plan(g, info, specs))


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def serialize_plan(plan: PlanDocument) -> str:
    doc = {
        "format": PLAN_FORMAT,
        "app": plan.app_name,
        "build_dir": plan.build_dir,
        "keys": [
            {
                "name": k.name,
                "stage": k.stage,
                "kind": k.kind,
                "type": k.type_tag,
                "allowed": list(k.allowed),
                "names": list(k.names),
                "doc": k.doc,
                "default": k.default,
            }
            for k in plan.key_table
        ],
        "steps": [
            {
                "var": s.var,
                "factory": s.factory_id,
                "module": s.module_name,
                "args": list(s.args),
                "keys": list(s.key_args),
            }
            for s in plan.steps
        ],
        "jobs": list(plan.jobs),
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _field(obj: Mapping, name: str, where: str):
    if name not in obj:
        raise PlanError(f"{where}: missing field {name!r}")
    return obj[name]


def parse_plan(text: str) -> PlanDocument:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise PlanError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise PlanError("plan document must be an object")
    if _field(doc, "format", "plan") != PLAN_FORMAT:
        raise PlanError(f"unsupported plan format {doc.get('format')!r}")
    keys = []
    for i, k in enumerate(_field(doc, "keys", "plan")):
        where = f"keys[{i}]"
        keys.append(
            PlanKey(
                name=_field(k, "name", where),
                stage=_field(k, "stage", where),
                kind=_field(k, "kind", where),
                type_tag=_field(k, "type", where),
                names=tuple(_field(k, "names", where)),
                doc=_field(k, "doc", where),
                default=_field(k, "default", where),
                allowed=tuple(_field(k, "allowed", where)),
            )
        )
    steps = []
    for i, s in enumerate(_field(doc, "steps", "plan")):
        where = f"steps[{i}]"
        steps.append(
            PlanStep(
                var=_field(s, "var", where),
                factory_id=_field(s, "factory", where),
                module_name=_field(s, "module", where),
                args=tuple(_field(s, "args", where)),
                key_args=tuple(_field(s, "keys", where)),
            )
        )
    plan = PlanDocument(
        app_name=_field(doc, "app", "plan"),
        build_dir=_field(doc, "build_dir", "plan"),
        key_table=tuple(keys),
        steps=tuple(steps),
        jobs=tuple(_field(doc, "jobs", "plan")),
    )
    validate_plan(plan)
    return plan


def validate_plan(plan: PlanDocument) -> None:
    """Single pass: every referenced var must be defined by an earlier step."""
    defined: set[str] = set()
    for i, step in enumerate(plan.steps):
        if step.var in defined:
            raise PlanError(f"steps[{i}]: variable {step.var!r} defined twice")
        for a in step.args:
            if a not in defined:
                raise PlanError(
                    f"steps[{i}]: argument {a!r} is not defined by an earlier step"
                )
        defined.add(step.var)
    for j in plan.jobs:
        if j not in defined:
            raise PlanError(f"job {j!r} is not a plan step")
