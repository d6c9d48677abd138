"""Staged command-line configuration keys.

A key couples a CLI argument spec with a stage (configure-time,
runtime, or both).  Key readings compose applicatively: ``pure`` lifts
a constant or function, ``app`` applies one computation to another, and
``eval_value`` runs the tree against a set of resolved keys.  Resolution
itself follows a fixed precedence: explicit CLI flag, then persisted
value from an earlier configure, then the declared default.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .errors import (
    ConfigureError,
    DefinitionError,
    FlagParseError,
    KeyResolutionError,
    UnresolvedKey,
)

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_IDENT_RE = re.compile(r"[a-z_][a-z0-9_]*\Z")
_FLAG_NAME_RE = re.compile(r"[a-z0-9][a-z0-9-]*\Z")

# Flag names claimed by the CLI driver itself.
RESERVED_FLAG_NAMES = frozenset({"build-dir", "config", "stage", "output", "verbose"})


def is_identifier(name: str) -> bool:
    return bool(_IDENT_RE.match(name))


def check_identifier(name: str, what: str) -> str:
    if not is_identifier(name):
        raise DefinitionError(
            f"{what} must be a lowercase identifier ([a-z_][a-z0-9_]*), got {name!r}"
        )
    return name


class Stage(enum.Enum):
    CONFIGURE_ONLY = "configure"
    RUNTIME_ONLY = "runtime"
    BOTH = "both"

    def covers_configure(self) -> bool:
        return self is not Stage.RUNTIME_ONLY

    def covers_runtime(self) -> bool:
        return self is not Stage.CONFIGURE_ONLY


class Phase(enum.Enum):
    CONFIGURE = "configure"
    RUNTIME = "runtime"


class Source(enum.Enum):
    DEFAULT = "default"
    PERSISTED = "persisted"
    CLI = "cli"


# ---------------------------------------------------------------------------
# Value types and literals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bool:
    tag = "bool"

    def check(self, value: object) -> bool:
        return isinstance(value, bool)

    def parse(self, text: str) -> bool:
        if text == "true":
            return True
        if text == "false":
            return False
        raise KeyResolutionError(f"expected 'true' or 'false', got {text!r}")

    def render(self, value: object) -> str:
        return "true" if value else "false"


@dataclass(frozen=True)
class Int:
    tag = "int"

    def check(self, value: object) -> bool:
        return (
            isinstance(value, int)
            and not isinstance(value, bool)
            and INT64_MIN <= value <= INT64_MAX
        )

    def parse(self, text: str) -> int:
        try:
            value = int(text, 10)
        except ValueError:
            raise KeyResolutionError(f"expected a decimal integer, got {text!r}") from None
        if not (INT64_MIN <= value <= INT64_MAX):
            raise KeyResolutionError(f"integer {text} is out of the signed 64-bit range")
        return value

    def render(self, value: object) -> str:
        return str(value)


@dataclass(frozen=True)
class Text:
    tag = "text"

    def check(self, value: object) -> bool:
        return isinstance(value, str)

    def parse(self, text: str) -> str:
        return text

    def render(self, value: object) -> str:
        return str(value)


@dataclass(frozen=True)
class Enum:
    allowed: frozenset[str]
    tag = "enum"

    def __init__(self, allowed: Iterable[str]):
        object.__setattr__(self, "allowed", frozenset(allowed))
        if not self.allowed:
            raise DefinitionError("enum value type needs at least one member")

    def check(self, value: object) -> bool:
        return isinstance(value, str) and value in self.allowed

    def parse(self, text: str) -> str:
        if text not in self.allowed:
            members = ", ".join(sorted(self.allowed))
            raise KeyResolutionError(f"value {text!r} is not one of: {members}")
        return text

    def render(self, value: object) -> str:
        return str(value)


ValueType = Bool | Int | Text | Enum
Literal = bool | int | str


# ---------------------------------------------------------------------------
# Argument specs and key declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArgSpec:
    """How one key is read from the command line.

    ``kind`` is one of ``opt`` (has a default), ``required``, or ``flag``
    (boolean presence, defaulting to false).
    """

    kind: str
    value_type: ValueType
    names: tuple[str, ...]
    doc: str = ""
    default: Literal | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("opt", "required", "flag"):
            raise DefinitionError(f"unknown argument kind {self.kind!r}")
        if not self.names:
            raise DefinitionError("argument spec needs at least one flag name")
        for n in self.names:
            if not _FLAG_NAME_RE.match(n):
                raise DefinitionError(f"invalid flag name {n!r}")
            if n in RESERVED_FLAG_NAMES:
                raise DefinitionError(f"flag name {n!r} is reserved by the CLI")
        if self.kind == "flag":
            if not isinstance(self.value_type, Bool):
                raise DefinitionError("flag arguments are always boolean")
            if self.default is None:
                object.__setattr__(self, "default", False)
        if self.kind == "opt":
            if self.default is None:
                raise DefinitionError("opt arguments need a default value")
            if not self.value_type.check(self.default):
                raise DefinitionError(
                    f"default {self.default!r} is not a valid {self.value_type.tag} value"
                )
        if self.kind == "required" and self.default is not None:
            raise DefinitionError("required arguments cannot carry a default")

    def flag_rendering(self) -> str:
        return ", ".join(("-" if len(n) == 1 else "--") + n for n in self.names)


def opt(value_type: ValueType, default: Literal, names: Sequence[str], doc: str = "") -> ArgSpec:
    return ArgSpec("opt", value_type, tuple(names), doc, default)


def required(value_type: ValueType, names: Sequence[str], doc: str = "") -> ArgSpec:
    return ArgSpec("required", value_type, tuple(names), doc)


def flag(names: Sequence[str], doc: str = "") -> ArgSpec:
    return ArgSpec("flag", Bool(), tuple(names), doc)


@dataclass(frozen=True)
class KeySpec:
    name: str
    arg: ArgSpec
    stage: Stage = Stage.BOTH


# Keys declared since the last reset; duplicate names or flag names are
# definition-time errors.  The CLI resets this before loading a config file.
_declared: dict[str, KeySpec] = {}
_declared_flags: dict[str, str] = {}


def reset_declared_keys() -> None:
    _declared.clear()
    _declared_flags.clear()


def declared_keys() -> tuple[KeySpec, ...]:
    return tuple(_declared.values())


def create_key(name: str, arg: ArgSpec, stage: Stage = Stage.BOTH) -> KeySpec:
    """Declare a new key; the name and all flag names must be unused."""
    check_identifier(name, "key name")
    if name in _declared:
        raise DefinitionError(f"duplicate key name {name!r}")
    for n in arg.names:
        owner = _declared_flags.get(n)
        if owner is not None:
            raise DefinitionError(f"flag name {n!r} already used by key {owner!r}")
    spec = KeySpec(name, arg, stage)
    _declared[name] = spec
    for n in arg.names:
        _declared_flags[n] = name
    return spec


# ---------------------------------------------------------------------------
# Applicative key computations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pure:
    value: object


@dataclass(frozen=True)
class Read:
    key: KeySpec


@dataclass(frozen=True)
class App:
    fn: "KeyValue"
    arg: "KeyValue"


KeyValue = Pure | Read | App


def pure(value: object) -> Pure:
    return Pure(value)


def value_of(key: KeySpec) -> Read:
    return Read(key)


def app(fn: KeyValue, arg: KeyValue) -> App:
    _require_value(fn)
    _require_value(arg)
    return App(fn, arg)


def map_value(fn: Callable[[object], object], v: KeyValue) -> App:
    return app(pure(fn), v)


def _require_value(v: object) -> None:
    if not isinstance(v, (Pure, Read, App)):
        raise DefinitionError(f"expected a key computation, got {type(v).__name__}")


def keys_mentioned(v: KeyValue) -> frozenset[KeySpec]:
    if isinstance(v, Pure):
        return frozenset()
    if isinstance(v, Read):
        return frozenset((v.key,))
    return keys_mentioned(v.fn) | keys_mentioned(v.arg)


def has_function_payload(v: KeyValue) -> bool:
    """True when any pure node carries a host-language function; such a
    computation can never be forwarded to the runtime."""
    if isinstance(v, Pure):
        return callable(v.value)
    if isinstance(v, Read):
        return False
    return has_function_payload(v.fn) or has_function_payload(v.arg)


def render_value(v: KeyValue) -> str:
    if isinstance(v, Pure):
        if callable(v.value):
            name = getattr(v.value, "__qualname__", None) or getattr(
                v.value, "__name__", "fn"
            )
            return f"pure(<{name}>)"
        return f"pure({v.value!r})"
    if isinstance(v, Read):
        return f"key({v.key.name})"
    return f"({render_value(v.fn)} $ {render_value(v.arg)})"


def eval_value(v: KeyValue, resolved: "ResolvedKeys") -> object:
    if isinstance(v, Pure):
        return v.value
    if isinstance(v, Read):
        return resolved.value(v.key.name)
    fn = eval_value(v.fn, resolved)
    arg = eval_value(v.arg, resolved)
    if not callable(fn):
        raise ConfigureError(
            f"cannot apply non-function in key computation {render_value(v)}"
        )
    try:
        return fn(arg)
    except Exception as e:  # noqa: BLE001 - surfaced as a configure diagnostic
        raise ConfigureError(
            f"key computation {render_value(v)} failed: {e}"
        ) from e


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResolvedEntry:
    spec: KeySpec
    value: Literal
    source: Source


class ResolvedKeys:
    """Immutable mapping from key name to its resolved value and source."""

    def __init__(self, entries: Iterable[ResolvedEntry]):
        self._entries: dict[str, ResolvedEntry] = {}
        for e in entries:
            if e.spec.name in self._entries:
                raise DefinitionError(f"key {e.spec.name!r} resolved twice")
            self._entries[e.spec.name] = e

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[ResolvedEntry]:
        return iter(sorted(self._entries.values(), key=lambda e: e.spec.name))

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResolvedKeys):
            return NotImplemented
        return {n: (e.value, e.source) for n, e in self._entries.items()} == {
            n: (e.value, e.source) for n, e in other._entries.items()
        }

    def entry(self, name: str) -> ResolvedEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise UnresolvedKey(name) from None

    def value(self, name: str) -> Literal:
        return self.entry(name).value

    def source(self, name: str) -> Source:
        return self.entry(name).source

    def values_by_name(self) -> dict[str, Literal]:
        return {n: e.value for n, e in self._entries.items()}


def _stage_covers(stage: Stage, phase: Phase) -> bool:
    if phase is Phase.CONFIGURE:
        return stage.covers_configure()
    return stage.covers_runtime()


def resolve_keys(
    specs: Sequence[KeySpec],
    cli: Mapping[str, str | bool],
    persisted: Mapping[str, Literal] | None = None,
    phase: Phase = Phase.CONFIGURE,
) -> ResolvedKeys:
    """Resolve every key with precedence CLI > persisted > default.

    At the runtime phase, configure-only keys reject fresh CLI flags and
    fall back to their persisted value.  Required keys missing at a phase
    their stage covers are an error; a required runtime-only key absent at
    configure time is simply left out.
    """
    persisted = persisted or {}
    entries = []
    for spec in specs:
        name = spec.name
        if name in cli:
            if phase is Phase.RUNTIME and spec.stage is Stage.CONFIGURE_ONLY:
                raise KeyResolutionError(
                    f"key '{name}' is configure-only and cannot be set at runtime"
                )
            raw = cli[name]
            if spec.arg.kind == "flag":
                value: Literal = bool(raw)
            else:
                try:
                    value = spec.arg.value_type.parse(str(raw))
                except KeyResolutionError as e:
                    raise KeyResolutionError(f"key '{name}': {e}") from None
            entries.append(ResolvedEntry(spec, value, Source.CLI))
        elif name in persisted:
            value = persisted[name]
            if not spec.arg.value_type.check(value):
                raise KeyResolutionError(
                    f"persisted value {value!r} for key '{name}' is not a valid "
                    f"{spec.arg.value_type.tag} value"
                )
            entries.append(ResolvedEntry(spec, value, Source.PERSISTED))
        elif spec.arg.default is not None or spec.arg.kind == "flag":
            entries.append(ResolvedEntry(spec, spec.arg.default, Source.DEFAULT))
        elif _stage_covers(spec.stage, phase):
            raise KeyResolutionError(f"required key '{name}' was not given")
        # A required key whose stage does not cover this phase stays absent.
    return ResolvedKeys(entries)


# ---------------------------------------------------------------------------
# Flag syntax: --name value, --name=value, -p value, bare --name for flags
# ---------------------------------------------------------------------------


def parse_flags(
    argv: Sequence[str], specs: Sequence[KeySpec]
) -> dict[str, str | bool]:
    """Parse raw command-line tokens into per-key raw values.

    Values are kept as text; validation against the value type happens in
    ``resolve_keys``.  Unknown flags and missing values are parse errors.
    """
    by_flag: dict[str, KeySpec] = {}
    for spec in specs:
        for n in spec.arg.names:
            by_flag[n] = spec

    out: dict[str, str | bool] = {}
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--"):
            name, eq, inline = tok[2:].partition("=")
        elif tok.startswith("-") and len(tok) == 2:
            name, eq, inline = tok[1:], "", ""
        else:
            raise FlagParseError(f"unexpected argument {tok!r}")
        spec = by_flag.get(name)
        if spec is None:
            raise FlagParseError(f"unknown flag {tok.split('=')[0]!r}")
        if spec.name in out:
            raise FlagParseError(f"key '{spec.name}' given more than once")
        if spec.arg.kind == "flag":
            if eq:
                raise FlagParseError(f"flag {tok.split('=')[0]!r} takes no value")
            out[spec.name] = True
            i += 1
            continue
        if eq:
            value = inline
            i += 1
        else:
            if i + 1 >= len(argv):
                raise FlagParseError(f"flag {tok!r} expects a value")
            value = argv[i + 1]
            i += 2
        out[spec.name] = value
    return out
