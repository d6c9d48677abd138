"""Configuration graphs: derivation, switch resolution, sharing, ordering.

The full graph mirrors the registered expression trees: one device node
per device-leaf occurrence, one switch node per conditional, edges in
argument order.  Resolving evaluates every switch against the resolved
keys and then deduplicates structurally equal devices bottom-up, so that
equal devices share their state and their initialization.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from . import dsl
from .devices import ConfigurableDevice
from .errors import ConfigureError, DefinitionError, ModwireError
from .keys import (
    KeySpec,
    KeyValue,
    ResolvedKeys,
    Stage,
    eval_value,
    keys_mentioned,
    render_value,
)

# ---------------------------------------------------------------------------
# Full graph (pre-resolution)
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class FullDeviceNode:
    device: ConfigurableDevice
    name: str  # instance name; generative devices get a fresh suffix
    args: tuple["FullNode", ...]


@dataclass(eq=False)
class FullSwitchNode:
    scrutinee: KeyValue
    cases: tuple[tuple[object, "FullNode"], ...]
    default: "FullNode | None"
    args: tuple["FullNode", ...]
    is_if: bool


FullNode = FullDeviceNode | FullSwitchNode


@dataclass(eq=False)
class AppNode:
    app_name: str
    jobs: tuple[FullNode, ...]


@dataclass(eq=False)
class FullGraph:
    app_name: str
    root: AppNode

    def nodes(self) -> Iterator[FullNode]:
        """Preorder traversal; every occurrence is a distinct node."""

        def walk(n: FullNode) -> Iterator[FullNode]:
            yield n
            for a in n.args:
                yield from walk(a)
            if isinstance(n, FullSwitchNode):
                for _, b in n.cases:
                    yield from walk(b)
                if n.default is not None:
                    yield from walk(n.default)

        for job in self.root.jobs:
            yield from walk(job)

    def device_nodes(self) -> list[FullDeviceNode]:
        return [n for n in self.nodes() if isinstance(n, FullDeviceNode)]

    def switch_nodes(self) -> list[FullSwitchNode]:
        return [n for n in self.nodes() if isinstance(n, FullSwitchNode)]


def _flatten_apply(e: dsl.ImplExpr) -> tuple[dsl.ImplExpr, list[dsl.ImplExpr]]:
    args: list[dsl.ImplExpr] = []
    while isinstance(e, dsl.Apply):
        args.append(e.arg)
        e = e.fn
    args.reverse()
    return e, args


def build_graph(app: dsl.AppConfig) -> FullGraph:
    """Derive the application structure from the registered expression
    trees; generative device occurrences receive fresh instance names."""
    counter = {"n": 0}

    def instance_name(dev: ConfigurableDevice) -> str:
        if not dev.generative:
            return dev.name
        counter["n"] += 1
        return f"{dev.name}~{counter['n']}"

    def node_of(e: dsl.ImplExpr) -> FullNode:
        head, arg_exprs = _flatten_apply(e)
        args = tuple(node_of(a) for a in arg_exprs)
        if isinstance(head, dsl.Device):
            return FullDeviceNode(head.dev, instance_name(head.dev), args)
        if isinstance(head, dsl.If):
            cases = ((True, node_of(head.then_impl)), (False, node_of(head.else_impl)))
            return FullSwitchNode(head.cond, cases, None, args, is_if=True)
        if isinstance(head, dsl.Match):
            cases = tuple((lit, node_of(b)) for lit, b in head.cases)
            default = None if head.default is None else node_of(head.default)
            return FullSwitchNode(head.scrutinee, cases, default, args, is_if=False)
        raise DefinitionError(f"unexpected expression head: {head!r}")

    root = AppNode(app.name, tuple(node_of(j) for j in app.jobs))
    return FullGraph(app.name, root)


def collect_keys(g: FullGraph) -> tuple[KeySpec, ...]:
    """All keys the application declares, sorted by name.

    Two distinct specs under one name, or one flag name claimed by two
    keys, are definition errors.
    """
    by_name: dict[str, KeySpec] = {}
    flags: dict[str, str] = {}

    def add(spec: KeySpec) -> None:
        seen = by_name.get(spec.name)
        if seen is None:
            for n in spec.arg.names:
                owner = flags.get(n)
                if owner is not None:
                    raise DefinitionError(
                        f"flag name {n!r} is claimed by keys {owner!r} and {spec.name!r}"
                    )
                flags[n] = spec.name
            by_name[spec.name] = spec
        elif seen != spec:
            raise DefinitionError(
                f"key name {spec.name!r} is declared twice with different specs"
            )

    for node in g.nodes():
        if isinstance(node, FullDeviceNode):
            for k in node.device.keys:
                add(k)
            for k in sorted(keys_mentioned(node.device.packages), key=lambda s: s.name):
                add(k)
        else:
            for k in sorted(keys_mentioned(node.scrutinee), key=lambda s: s.name):
                add(k)
    return tuple(by_name[n] for n in sorted(by_name))


# ---------------------------------------------------------------------------
# Resolved graph
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ResolvedNode:
    device: ConfigurableDevice
    name: str
    key_readings: tuple[tuple[str, object], ...]
    args: tuple["ResolvedNode", ...]

    @property
    def module_name(self) -> str:
        return self.device.module_name


@dataclass(eq=False)
class ResolvedGraph:
    app_name: str
    roots: tuple[ResolvedNode, ...]
    _order: list[ResolvedNode] = field(default_factory=list, repr=False)

    def nodes(self) -> list[ResolvedNode]:
        return list(self.topo_order())

    def topo_order(self) -> list[ResolvedNode]:
        if not self._order:
            self._order = topo_order(self)
        return self._order

    def edges(self) -> list[tuple[ResolvedNode, ResolvedNode]]:
        return [(n, a) for n in self.topo_order() for a in n.args]

    def canonical_text(self) -> str:
        """Stable rendering used to compare graphs structurally."""
        order = self.topo_order()
        index = {id(n): i for i, n in enumerate(order)}
        lines = []
        for i, n in enumerate(order):
            readings = ",".join(f"{k}={v!r}" for k, v in n.key_readings)
            args = ",".join(str(index[id(a)]) for a in n.args)
            lines.append(f"{i}:{n.name}|{n.module_name}|{readings}|{args}")
        roots = ",".join(str(index[id(r)]) for r in self.roots)
        lines.append(f"roots:{roots}")
        return "\n".join(lines)


def _reading_of(spec: KeySpec, resolved: ResolvedKeys) -> object:
    # Runtime-only keys may be absent from a configure-phase resolution.
    return resolved.value(spec.name) if spec.name in resolved else None


def select_switches(g: FullGraph, resolved: ResolvedKeys) -> list[ResolvedNode]:
    """Replace every switch by its selected branch, keeping one resolved
    node per device occurrence (no sharing yet)."""

    def check_stage(scrutinee: KeyValue) -> None:
        for spec in keys_mentioned(scrutinee):
            if spec.stage is Stage.RUNTIME_ONLY:
                raise ConfigureError(
                    f"cannot switch on runtime-only key '{spec.name}'"
                )

    def go(node: FullNode, extra: tuple[ResolvedNode, ...]) -> ResolvedNode:
        if isinstance(node, FullSwitchNode):
            check_stage(node.scrutinee)
            value = eval_value(node.scrutinee, resolved)
            if node.is_if and not isinstance(value, bool):
                raise ConfigureError(
                    f"condition {render_value(node.scrutinee)} evaluated to "
                    f"{value!r}, expected a boolean"
                )
            selected = None
            for lit, branch in node.cases:
                if lit == value and type(lit) is type(value):
                    selected = branch
                    break
            if selected is None:
                selected = node.default
            if selected is None:
                raise ConfigureError(
                    f"no case of {render_value(node.scrutinee)} matches "
                    f"{value!r} and there is no default branch"
                )
            own = tuple(go(a, ()) for a in node.args)
            return go(selected, own + extra)
        args = tuple(go(a, ()) for a in node.args) + extra
        dev = node.device
        if len(args) != dsl.arity(dev.ty):
            raise ModwireError(
                f"internal: device '{node.name}' resolved with {len(args)} "
                f"argument(s), arity is {dsl.arity(dev.ty)}"
            )
        readings = tuple(
            (k.name, _reading_of(k, resolved))
            for k in sorted(dev.keys, key=lambda s: s.name)
        )
        return ResolvedNode(dev, node.name, readings, args)

    return [go(job, ()) for job in g.root.jobs]


def dedup(roots: Sequence[ResolvedNode], app_name: str = "app") -> ResolvedGraph:
    """Bottom-up hash-consing: nodes with equal name, module, key readings,
    and argument identities collapse into one.  Idempotent."""
    interned: dict[tuple, ResolvedNode] = {}

    def intern(n: ResolvedNode) -> ResolvedNode:
        args = tuple(intern(a) for a in n.args)
        key = (n.name, n.module_name, n.key_readings, tuple(id(a) for a in args))
        node = interned.get(key)
        if node is None:
            node = ResolvedNode(n.device, n.name, n.key_readings, args)
            interned[key] = node
        return node

    return ResolvedGraph(app_name, tuple(intern(r) for r in roots))


def resolve(g: FullGraph, resolved: ResolvedKeys) -> ResolvedGraph:
    """Switch elimination followed by deduplication to fixpoint."""
    return dedup(select_switches(g, resolved), g.app_name)


def _depths(roots: Sequence[ResolvedNode]) -> dict[int, int]:
    depths: dict[int, int] = {}

    def depth(n: ResolvedNode) -> int:
        got = depths.get(id(n))
        if got is not None:
            return got
        d = 1 + max((depth(a) for a in n.args), default=-1)
        depths[id(n)] = d
        return d

    for r in roots:
        depth(r)
    return depths


def topo_order(g: ResolvedGraph) -> list[ResolvedNode]:
    """Arguments before their users; ties broken by (depth, name,
    module_name), which makes the order stable across runs."""
    seen: dict[int, ResolvedNode] = {}

    def collect(n: ResolvedNode) -> None:
        if id(n) in seen:
            return
        seen[id(n)] = n
        for a in n.args:
            collect(a)

    for r in g.roots:
        collect(r)
    depths = _depths(g.roots)
    order = sorted(
        seen.values(), key=lambda n: (depths[id(n)], n.name, n.module_name)
    )
    pos = {id(n): i for i, n in enumerate(order)}
    for n in order:
        for a in n.args:
            if pos[id(a)] >= pos[id(n)]:
                raise ModwireError("internal: topological order violated")
    return order


# ---------------------------------------------------------------------------
# DOT rendering
# ---------------------------------------------------------------------------


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _render_reading(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def to_dot(g: FullGraph | ResolvedGraph) -> str:
    """Graphviz rendering: devices as boxes, switches as ellipses, edges in
    argument order.  Emission follows the deterministic node order, so the
    output is byte-stable."""
    if isinstance(g, ResolvedGraph):
        return _resolved_dot(g)
    return _full_dot(g)


def _label(parts: Sequence[str]) -> str:
    return "\\n".join(_dot_escape(p) for p in parts)


def _resolved_dot(g: ResolvedGraph) -> str:
    order = g.topo_order()
    ids = {id(n): f"n{i}" for i, n in enumerate(order)}
    lines = [f"digraph {g.app_name} {{"]
    for n in order:
        parts = [n.module_name, f"name={n.name}"]
        parts += [f"{k}={_render_reading(v)}" for k, v in n.key_readings if v is not None]
        lines.append(f'  {ids[id(n)]} [shape=box, label="{_label(parts)}"];')
    for n in order:
        for a in n.args:
            lines.append(f"  {ids[id(n)]} -> {ids[id(a)]};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _full_sort_entries(g: FullGraph) -> list[tuple[FullNode | AppNode, int, str, str]]:
    """(node, depth, sort-name, module) for every node plus the app root."""
    entries = []
    depths: dict[int, int] = {}

    def children(n) -> list:
        if isinstance(n, AppNode):
            return list(n.jobs)
        kids = list(n.args)
        if isinstance(n, FullSwitchNode):
            kids += [b for _, b in n.cases]
            if n.default is not None:
                kids.append(n.default)
        return kids

    def depth(n) -> int:
        got = depths.get(id(n))
        if got is not None:
            return got
        d = 1 + max((depth(c) for c in children(n)), default=-1)
        depths[id(n)] = d
        return d

    for node in g.nodes():
        if isinstance(node, FullDeviceNode):
            entries.append((node, depth(node), node.name, node.device.module_name))
        else:
            names = ",".join(sorted(k.name for k in keys_mentioned(node.scrutinee)))
            entries.append((node, depth(node), f"[{names}]", ""))
    entries.append((g.root, depth(g.root), g.root.app_name, ""))
    entries.sort(key=lambda e: (e[1], e[2], e[3]))
    return entries


def _full_dot(g: FullGraph) -> str:
    entries = _full_sort_entries(g)
    ids = {id(n): f"n{i}" for i, (n, *_rest) in enumerate(entries)}
    lines = [f"digraph {g.app_name} {{"]
    for node, *_rest in entries:
        nid = ids[id(node)]
        if isinstance(node, AppNode):
            lines.append(f'  {nid} [shape=diamond, label="{_dot_escape(node.app_name)}"];')
        elif isinstance(node, FullDeviceNode):
            parts = [node.device.module_name, f"name={node.name}"]
            if node.device.keys:
                names = ",".join(sorted(k.name for k in node.device.keys))
                parts.append(f"keys={names}")
            lines.append(f'  {nid} [shape=box, label="{_label(parts)}"];')
        else:
            names = ",".join(sorted(k.name for k in keys_mentioned(node.scrutinee)))
            lines.append(f'  {nid} [shape=ellipse, label="{_dot_escape(names)}"];')
    for node, *_rest in entries:
        nid = ids[id(node)]
        if isinstance(node, AppNode):
            for j in node.jobs:
                lines.append(f"  {nid} -> {ids[id(j)]};")
            continue
        for a in node.args:
            lines.append(f"  {nid} -> {ids[id(a)]};")
        if isinstance(node, FullSwitchNode):
            for lit, b in node.cases:
                lines.append(
                    f'  {nid} -> {ids[id(b)]} [label="{_dot_escape(_render_reading(lit))}"];'
                )
            if node.default is not None:
                lines.append(f'  {nid} -> {ids[id(node.default)]} [label="default"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Fingerprinting
# ---------------------------------------------------------------------------


def _render_spec(spec: KeySpec) -> str:
    arg = spec.arg
    allowed = ""
    if hasattr(arg.value_type, "allowed"):
        allowed = ",".join(sorted(arg.value_type.allowed))
    return (
        f"{spec.name}|{spec.stage.value}|{arg.kind}|{arg.value_type.tag}|{allowed}|"
        f"{arg.default!r}|{','.join(arg.names)}|{arg.doc}"
    )


def fingerprint(g: FullGraph, specs: Sequence[KeySpec]) -> str:
    """Hash of the application structure and its key specs; used to detect
    config edits between configure and later commands."""

    def render(n: FullNode) -> str:
        if isinstance(n, FullDeviceNode):
            keys = ",".join(sorted(k.name for k in n.device.keys))
            inner = ",".join(render(a) for a in n.args)
            return (
                f"dev({n.name};{n.device.module_name};{dsl.render_type(n.device.ty)};"
                f"{keys};{render_value(n.device.packages)};[{inner}])"
            )
        cases = ",".join(f"{lit!r}:{render(b)}" for lit, b in n.cases)
        default = "" if n.default is None else render(n.default)
        args = ",".join(render(a) for a in n.args)
        return (
            f"switch({render_value(n.scrutinee)};{cases};{default};[{args}])"
        )

    text = g.app_name + "\n"
    text += "\n".join(render(j) for j in g.root.jobs) + "\n"
    text += "\n".join(_render_spec(s) for s in specs)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
