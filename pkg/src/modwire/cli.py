"""Command-line driver: configure, describe, build, run, graph, clean.

A config definition is a Python file (default ``config.py``) that builds
implementation expressions and calls ``register``.  ``configure``
resolves keys and the graph and writes the persisted keys, the plan, the
glue listing, and the resolved DOT rendering into the build directory;
``run`` executes the plan through the factory registry.

Exit codes: 0 ok, 2 flag parse, 3 definition/type error, 4 key
resolution, 5 stale or missing configuration, 6 hook or device failure,
7 unregistered factory.
"""

from __future__ import annotations

import runpy
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import dsl, keys as keymod
from .devices import Info, aggregate_packages
from .errors import (
    ConfigureError,
    DefinitionError,
    DeviceStartError,
    FlagParseError,
    HookError,
    KeyResolutionError,
    ModwireError,
    PlanError,
    StaleConfigError,
    TypeMismatch,
    UnregisteredFactoryError,
    UnresolvedKey,
)
from .graph import FullGraph, build_graph, collect_keys, fingerprint, resolve, to_dot
from .keys import (
    ArgSpec,
    Bool,
    Int,
    KeySpec,
    Literal,
    Phase,
    ResolvedKeys,
    Stage,
    Text,
    parse_flags,
    resolve_keys,
)
from .plan import PlanDocument, emit_plan, parse_plan, render_glue, serialize_plan
from .runtime import instantiate, start_jobs

KEYS_FILE = "keys.cfg"
PLAN_FILE = "plan.fplan"
GLUE_FILE = "main.glue"
DOT_FILE = "app.dot"

_KEYS_HEADER = "# modwire-keys/1"

USAGE = """\
usage: modwire [--config FILE] [--build-dir DIR] COMMAND [FLAGS]

commands:
  configure   resolve keys and the graph; write plan, glue, DOT, keys.cfg
  describe    show the application name, build dir, and key values
  build       run device configure/build hooks in dependency order
  run         execute the generated plan with the bundled runtime
  graph       print the configuration graph as DOT (--stage full|resolved)
  clean       run device clean hooks and remove generated files
"""


def reset_definitions() -> None:
    """Clear the definition-time registries before loading a config file."""
    keymod.reset_declared_keys()
    dsl.reset_registered_apps()


def load_config(path: Path) -> dsl.AppConfig:
    if not path.exists():
        raise DefinitionError(f"config definition {str(path)!r} not found")
    reset_definitions()
    try:
        runpy.run_path(str(path), run_name="modwire_config")
    except ModwireError:
        raise
    except Exception as e:  # noqa: BLE001 - config files are user code
        raise DefinitionError(f"config definition failed to load: {e}") from e
    apps = dsl.registered_apps()
    if len(apps) != 1:
        raise DefinitionError(
            f"config definition must register exactly one application, got {len(apps)}"
        )
    return apps[0]


# ---------------------------------------------------------------------------
# Persisted key values (keys.cfg)
# ---------------------------------------------------------------------------


@dataclass
class PersistedConfig:
    app_name: str
    fingerprint: str
    entries: dict[str, tuple[str, Literal, str]]  # name -> (type tag, value, source)

    def values(self) -> dict[str, Literal]:
        return {name: value for name, (_tag, value, _src) in self.entries.items()}


def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def write_persisted(path: Path, app_name: str, fp: str, resolved: ResolvedKeys) -> None:
    lines = [_KEYS_HEADER, f"# app\t{app_name}", f"# fingerprint\t{fp}"]
    for entry in resolved:
        tag = entry.spec.arg.value_type.tag
        value = entry.spec.arg.value_type.render(entry.value)
        lines.append(
            f"{entry.spec.name}\t{tag}\t{_escape(value)}\t{entry.source.value}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_persisted(path: Path) -> PersistedConfig:
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != _KEYS_HEADER:
        raise StaleConfigError(f"{path}: not a persisted key file")
    app_name = ""
    fp = ""
    entries: dict[str, tuple[str, Literal, str]] = {}
    for n, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        if line.startswith("# app\t"):
            app_name = line.split("\t", 1)[1]
            continue
        if line.startswith("# fingerprint\t"):
            fp = line.split("\t", 1)[1]
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise StaleConfigError(f"{path}:{n}: expected 4 tab-separated fields")
        name, tag, raw, source = fields
        raw = _unescape(raw)
        value: Literal
        if tag == "bool":
            if raw not in ("true", "false"):
                raise StaleConfigError(f"{path}:{n}: bad boolean {raw!r}")
            value = raw == "true"
        elif tag == "int":
            try:
                value = int(raw, 10)
            except ValueError:
                raise StaleConfigError(f"{path}:{n}: bad integer {raw!r}") from None
        elif tag in ("text", "enum"):
            value = raw
        else:
            raise StaleConfigError(f"{path}:{n}: unknown value type {tag!r}")
        if source not in ("default", "persisted", "cli"):
            raise StaleConfigError(f"{path}:{n}: unknown source {source!r}")
        entries[name] = (tag, value, source)
    return PersistedConfig(app_name, fp, entries)


# ---------------------------------------------------------------------------
# Shared derivation
# ---------------------------------------------------------------------------


@dataclass
class Derived:
    app: dsl.AppConfig
    graph: FullGraph
    specs: tuple[KeySpec, ...]
    fingerprint: str


def derive(app: dsl.AppConfig) -> Derived:
    g = build_graph(app)
    specs = collect_keys(g)
    return Derived(app, g, specs, fingerprint(g, specs))


def _load_persisted_checked(build_dir: Path, d: Derived) -> PersistedConfig | None:
    path = build_dir / KEYS_FILE
    if not path.exists():
        return None
    persisted = read_persisted(path)
    if persisted.fingerprint != d.fingerprint:
        raise StaleConfigError(
            "config definition changed since configure; run configure again"
        )
    return persisted


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_configure(d: Derived, argv: Sequence[str], build_dir: Path) -> int:
    cli = parse_flags(argv, d.specs)
    resolved = resolve_keys(d.specs, cli, persisted=None, phase=Phase.CONFIGURE)
    rg = resolve(d.graph, resolved)
    packages = tuple(aggregate_packages(rg, resolved))
    info = Info(d.app.name, build_dir, resolved, packages)
    plan = emit_plan(rg, info, d.specs)
    info = replace(info, device_names=tuple(s.var for s in plan.steps))
    build_dir.mkdir(parents=True, exist_ok=True)
    write_persisted(build_dir / KEYS_FILE, d.app.name, d.fingerprint, resolved)
    (build_dir / PLAN_FILE).write_text(serialize_plan(plan), encoding="utf-8")
    (build_dir / GLUE_FILE).write_text(render_glue(plan), encoding="utf-8")
    (build_dir / DOT_FILE).write_text(to_dot(rg), encoding="utf-8")
    return 0


def _pad(label: str) -> str:
    return f"{label:<11}"


def _describe_lines(d: Derived, build_dir_arg: str, persisted: PersistedConfig | None,
                    verbose: bool) -> list[str]:
    lines = [f"{_pad('Name')}{d.app.name}", f"{_pad('Build-dir')}{build_dir_arg}"]
    shown: list[tuple[str, str, str]] = []
    for spec in d.specs:
        if persisted is not None and spec.name in persisted.entries:
            _tag, value, source = persisted.entries[spec.name]
            shown.append((spec.name, spec.arg.value_type.render(value), source))
        elif spec.arg.default is not None or spec.arg.kind == "flag":
            shown.append(
                (spec.name, spec.arg.value_type.render(spec.arg.default), "default")
            )
        else:
            shown.append((spec.name, "<unset>", "required"))
    for i, (name, value, source) in enumerate(shown):
        label = _pad("Keys") if i == 0 else " " * 11
        lines.append(f"{label}{name}={value} ({source})")
    if verbose:
        values = {
            name: value
            for name, (_tag, value, _src) in (persisted.entries if persisted else {}).items()
        }
        resolved = resolve_keys(d.specs, {}, values, Phase.CONFIGURE)
        rg = resolve(d.graph, resolved)
        for i, pkg in enumerate(aggregate_packages(rg, resolved)):
            label = _pad("Packages") if i == 0 else " " * 11
            lines.append(f"{label}{pkg.render()}")
    return lines


def cmd_describe(d: Derived, argv: Sequence[str], build_dir: Path,
                 build_dir_arg: str) -> int:
    verbose = False
    for tok in argv:
        if tok == "--verbose":
            verbose = True
        else:
            raise FlagParseError(f"unknown flag {tok!r}")
    persisted = _load_persisted_checked(build_dir, d)
    for line in _describe_lines(d, build_dir_arg, persisted, verbose):
        print(line)
    return 0


def _resolution_from_persisted(d: Derived, persisted: PersistedConfig) -> ResolvedKeys:
    return resolve_keys(d.specs, {}, persisted.values(), Phase.CONFIGURE)


def _build_info(d: Derived, build_dir: Path, resolved: ResolvedKeys):
    rg = resolve(d.graph, resolved)
    packages = tuple(aggregate_packages(rg, resolved))
    plan = emit_plan(rg, Info(d.app.name, build_dir, resolved, packages), d.specs)
    info = Info(
        d.app.name,
        build_dir,
        resolved,
        packages,
        tuple(s.var for s in plan.steps),
    )
    return rg, plan, info


def cmd_build(d: Derived, argv: Sequence[str], build_dir: Path) -> int:
    if argv:
        raise FlagParseError(f"unknown flag {argv[0]!r}")
    persisted = _load_persisted_checked(build_dir, d)
    if persisted is None:
        raise StaleConfigError("no persisted configuration; run configure first")
    resolved = _resolution_from_persisted(d, persisted)
    rg, plan, info = _build_info(d, build_dir, resolved)
    nodes = rg.topo_order()
    for hook_name in ("configure_hook", "build_hook"):
        for node, step in zip(nodes, plan.steps):
            hook = getattr(node.device, hook_name)
            if hook is None:
                continue
            try:
                hook(info, node.device, step.var)
            except Exception as e:  # noqa: BLE001 - reported with the device name
                raise HookError(step.var, e) from e
    return 0


def cmd_run(d: Derived, argv: Sequence[str], build_dir: Path) -> int:
    plan_path = build_dir / PLAN_FILE
    if not plan_path.exists():
        raise StaleConfigError("no plan found; run configure first")
    plan = parse_plan(plan_path.read_text(encoding="utf-8"))
    persisted = _load_persisted_checked(build_dir, d)
    if persisted is None:
        raise StaleConfigError("no persisted configuration; run configure first")

    runtime_specs = [k.to_spec() for k in plan.key_table]
    runtime_names = {s.name for s in runtime_specs}
    rejection_specs = [
        _persisted_only_spec(name, tag, value)
        for name, (tag, value, _src) in sorted(persisted.entries.items())
        if name not in runtime_names
    ]
    all_specs = runtime_specs + rejection_specs
    cli = parse_flags(argv, all_specs)
    resolved = resolve_keys(all_specs, cli, persisted.values(), Phase.RUNTIME)

    config_resolution = _resolution_from_persisted(d, persisted)
    rg = resolve(d.graph, config_resolution)
    packages = tuple(aggregate_packages(rg, config_resolution))
    info = Info(
        plan.app_name,
        build_dir,
        resolved,
        packages,
        tuple(s.var for s in plan.steps),
    )
    handles = instantiate(plan, info, resolved.values_by_name())
    try:
        start_jobs(plan, handles)
    except KeyboardInterrupt:
        return 0
    return 0


def _persisted_only_spec(name: str, tag: str, value: Literal) -> KeySpec:
    vt = {"bool": Bool(), "int": Int()}.get(tag, Text())
    return KeySpec(name, ArgSpec("opt", vt, (name,), "", value), Stage.CONFIGURE_ONLY)


def cmd_graph(d: Derived, argv: Sequence[str], build_dir: Path) -> int:
    stage = "full"
    output: str | None = None
    rest: list[str] = []
    i = 0
    argv = list(argv)
    while i < len(argv):
        tok = argv[i]
        name, eq, inline = tok.partition("=")
        if name in ("--stage", "--output"):
            if eq:
                value = inline
                i += 1
            else:
                if i + 1 >= len(argv):
                    raise FlagParseError(f"flag {tok!r} expects a value")
                value = argv[i + 1]
                i += 2
            if name == "--stage":
                stage = value
            else:
                output = value
        else:
            rest.append(tok)
            i += 1
    if stage not in ("full", "resolved"):
        raise FlagParseError(f"bad stage {stage!r}: expected 'full' or 'resolved'")
    if stage == "full":
        dot = to_dot(d.graph)
    else:
        persisted = _load_persisted_checked(build_dir, d)
        cli = parse_flags(rest, d.specs)
        values = persisted.values() if persisted else None
        resolved = resolve_keys(d.specs, cli, values, Phase.CONFIGURE)
        dot = to_dot(resolve(d.graph, resolved))
    if output is None:
        sys.stdout.write(dot)
    else:
        Path(output).write_text(dot, encoding="utf-8")
    return 0


def cmd_clean(d: Derived | None, argv: Sequence[str], build_dir: Path) -> int:
    if argv:
        raise FlagParseError(f"unknown flag {argv[0]!r}")
    if d is not None:
        try:
            persisted = _load_persisted_checked(build_dir, d)
        except StaleConfigError:
            persisted = None
        try:
            resolved = (
                _resolution_from_persisted(d, persisted)
                if persisted is not None
                else resolve_keys(d.specs, {}, None, Phase.CONFIGURE)
            )
            rg, plan, info = _build_info(d, build_dir, resolved)
            for node, step in zip(rg.topo_order(), plan.steps):
                if node.device.clean_hook is None:
                    continue
                try:
                    node.device.clean_hook(info, node.device, step.var)
                except Exception as e:  # noqa: BLE001
                    raise HookError(step.var, e) from e
        except (KeyResolutionError, ConfigureError) as e:
            print(f"modwire: skipping clean hooks: {e}", file=sys.stderr)
    for name in (PLAN_FILE, GLUE_FILE, KEYS_FILE, DOT_FILE):
        (build_dir / name).unlink(missing_ok=True)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _extract_global(argv: list[str], name: str) -> str | None:
    """Pull ``--name VALUE`` or ``--name=VALUE`` out of argv, wherever it is."""
    value = None
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == f"--{name}":
            if i + 1 >= len(argv):
                raise FlagParseError(f"flag {tok!r} expects a value")
            value = argv[i + 1]
            del argv[i : i + 2]
        elif tok.startswith(f"--{name}="):
            value = tok.split("=", 1)[1]
            del argv[i : i + 1]
        else:
            i += 1
    return value


_EXIT_CODES: list[tuple[type, int]] = [
    (FlagParseError, 2),
    (TypeMismatch, 3),
    (DefinitionError, 3),
    (KeyResolutionError, 4),
    (ConfigureError, 4),
    (UnresolvedKey, 4),
    (StaleConfigError, 5),
    (PlanError, 5),
    (HookError, 6),
    (DeviceStartError, 6),
    (UnregisteredFactoryError, 7),
    (ModwireError, 3),
]


def main(argv: Sequence[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        build_dir_arg = _extract_global(args, "build-dir") or "."
        config_arg = _extract_global(args, "config") or "config.py"
        if not args:
            sys.stderr.write(USAGE)
            return 2
        command, rest = args[0], args[1:]
        build_dir = Path(build_dir_arg)
        if command == "clean":
            try:
                d = derive(load_config(Path(config_arg)))
            except ModwireError as e:
                print(f"modwire: skipping clean hooks: {e}", file=sys.stderr)
                d = None
            return cmd_clean(d, rest, build_dir)
        if command not in ("configure", "describe", "build", "run", "graph"):
            sys.stderr.write(f"modwire: unknown command {command!r}\n{USAGE}")
            return 2
        d = derive(load_config(Path(config_arg)))
        if command == "configure":
            return cmd_configure(d, rest, build_dir)
        if command == "describe":
            return cmd_describe(d, rest, build_dir, build_dir_arg)
        if command == "build":
            return cmd_build(d, rest, build_dir)
        if command == "run":
            return cmd_run(d, rest, build_dir)
        return cmd_graph(d, rest, build_dir)
    except ModwireError as e:
        for cls, code in _EXIT_CODES:
            if isinstance(e, cls):
                print(f"modwire: {e}", file=sys.stderr)
                return code
        raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
