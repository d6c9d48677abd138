"""Configurable devices: named, key-carrying component descriptors.

A device couples an implementation identity (``module_name``) with a
state identity (``name``), a signature type, declared keys, package
metadata, a structured connect recipe, and optional lifecycle hooks.
Generative devices receive a fresh name per occurrence, which opts them
out of sharing.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Sequence

from . import dsl
from .errors import DefinitionError, UnregisteredFactoryError
from .keys import (
    App,
    KeySpec,
    KeyValue,
    Pure,
    Read,
    ResolvedKeys,
    check_identifier,
    eval_value,
    pure,
)

if TYPE_CHECKING:
    from .graph import ResolvedGraph


@dataclass(frozen=True)
class Package:
    """Package metadata attached to a device; never installed, only
    aggregated and reported."""

    name: str
    constraints: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.name:
            raise DefinitionError("package name must be non-empty")

    def merge(self, other: "Package") -> "Package":
        if other.name != self.name:
            raise DefinitionError(
                f"cannot merge packages {self.name!r} and {other.name!r}"
            )
        return Package(self.name, self.constraints | other.constraints)

    def render(self) -> str:
        if not self.constraints:
            return self.name
        return f"{self.name} ({', '.join(sorted(self.constraints))})"


def package(name: str, constraint: str | None = None) -> Package:
    return Package(name, frozenset() if constraint is None else frozenset((constraint,)))


@dataclass(frozen=True)
class ConnectRecipe:
    """How the runtime initializes the device: which factory to call, the
    roles of its positional arguments, and which keys it reads by name."""

    factory_id: str
    arg_order: tuple[str, ...] = ()
    key_args: tuple[str, ...] = ()


HookFn = Callable[["Info", "ConfigurableDevice", str], None]


@dataclass(frozen=True)
class ConfigurableDevice:
    name: str
    module_name: str
    ty: dsl.SignatureType
    keys: tuple[KeySpec, ...] = ()
    packages: KeyValue = Pure(())
    connect: ConnectRecipe = ConnectRecipe("")
    configure_hook: HookFn | None = None
    build_hook: HookFn | None = None
    clean_hook: HookFn | None = None
    generative: bool = False


@dataclass(frozen=True)
class Info:
    """Application metadata handed to hooks and runtime factories."""

    app_name: str
    build_dir: Path
    keys: ResolvedKeys
    packages: tuple[Package, ...] = ()
    device_names: tuple[str, ...] = ()


def default_device_name(module_name: str) -> str:
    """Deterministic state identity derived from an implementation name:
    lowercased, with dots turned into underscores."""
    name = module_name.lower().replace(".", "_")
    check_identifier(name, f"device name derived from {module_name!r}")
    return name


def _normalize_packages(packages: object) -> KeyValue:
    if isinstance(packages, (Pure, Read, App)):
        return packages
    return pure(tuple(packages))


def define_device(device: ConfigurableDevice) -> dsl.Device:
    """Wrap a device descriptor as an implementation expression after
    checking its structural invariants."""
    check_identifier(device.name, "device name")
    if not device.module_name:
        raise DefinitionError("device module_name must be non-empty")
    want = dsl.arity(device.ty)
    got = len(device.connect.arg_order)
    if want != got:
        raise DefinitionError(
            f"device '{device.name}': signature type takes {want} argument(s) "
            f"but the connect recipe expects {got}"
        )
    declared = {k.name for k in device.keys}
    for k in device.connect.key_args:
        if k not in declared:
            raise DefinitionError(
                f"device '{device.name}': connect reads key '{k}' which the "
                f"device does not declare"
            )
    return dsl.Device(device)


def foreign(
    module_name: str,
    ty: dsl.SignatureType,
    *,
    name: str | None = None,
    keys: Sequence[KeySpec] = (),
    packages: object = (),
) -> dsl.Device:
    """Materialize a named external module as an implementation expression.

    The connect recipe calls the factory registered under ``module_name``
    with the initialized arguments in order, passing every declared key by
    name.
    """
    keys = tuple(keys)
    roles = tuple(
        p.name if isinstance(p, dsl.Base) else f"arg{i}"
        for i, p in enumerate(dsl.param_types(ty))
    )
    device = ConfigurableDevice(
        name=name or default_device_name(module_name),
        module_name=module_name,
        ty=ty,
        keys=keys,
        packages=_normalize_packages(packages),
        connect=ConnectRecipe(module_name, roles, tuple(k.name for k in keys)),
    )
    return define_device(device)


def aggregate_packages(graph: "ResolvedGraph", resolved: ResolvedKeys) -> list[Package]:
    """Evaluate every device's package computation, merge by name, and
    return the list sorted by package name."""
    merged: dict[str, Package] = {}
    for node in graph.nodes():
        pkgs = eval_value(node.device.packages, resolved)
        for p in pkgs:
            if not isinstance(p, Package):
                raise DefinitionError(
                    f"device '{node.device.name}': packages must evaluate to "
                    f"Package values, got {type(p).__name__}"
                )
            merged[p.name] = merged[p.name].merge(p) if p.name in merged else p
    return [merged[n] for n in sorted(merged)]


# ---------------------------------------------------------------------------
# Runtime factory registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactoryCall:
    """Everything a factory receives: app metadata, the step's unique name,
    the initialized argument handles in order, and its key readings."""

    info: Info
    name: str
    args: tuple[object, ...]
    keys: dict[str, object]


Factory = Callable[[FactoryCall], object]

_factories: dict[str, Factory] = {}


def register_factory(factory_id: str, fn: Factory | None = None):
    """Register the runtime factory for ``factory_id``; usable as a
    decorator.  Re-registering a different function is an error."""

    def add(f: Factory) -> Factory:
        existing = _factories.get(factory_id)
        if existing is not None and existing is not f:
            raise DefinitionError(f"factory '{factory_id}' is already registered")
        _factories[factory_id] = f
        return f

    if fn is not None:
        return add(fn)
    return add


def factory_registered(factory_id: str) -> bool:
    return factory_id in _factories


def get_factory(factory_id: str) -> Factory:
    try:
        return _factories[factory_id]
    except KeyError:
        raise UnregisteredFactoryError(factory_id) from None
