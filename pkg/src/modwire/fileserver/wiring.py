"""The modular file-server ecosystem: signatures, devices, factories.

Wires five device implementations (two local stores, a network-fed
store, a TCP line server, an HTTP wrapper) and the server job functor
into a configurable application: the store is selected at configure
time via ``--store``, and the port (``-p``/``--port``) decides whether
the HTTP layer is stacked on top of TCP.
"""

from __future__ import annotations

from pathlib import Path

from ..devices import (
    ConfigurableDevice,
    ConnectRecipe,
    FactoryCall,
    define_device,
    foreign,
    package,
    register_factory,
)
from ..dsl import JOB, AppConfig, ImplExpr, apply, arrow, base_type, if_, match_, register
from ..errors import DeviceStartError
from ..keys import Enum, Int, Stage, Text, app, create_key, opt, pure, value_of
from .net import HttpHandle, TcpipHandle, network_listen
from .stores import (
    CrunchStore,
    DirectStore,
    NetStore,
    read_snapshot,
    snapshot_directory,
    store_read,
    write_snapshot,
)

STORE = base_type("store")
NETWORK = base_type("network")

store_key = create_key(
    "store",
    opt(Enum(("crunch", "direct")), "crunch", ["store"], doc="Choose store"),
    stage=Stage.CONFIGURE_ONLY,
)
port_key = create_key(
    "port",
    opt(Int(), 80, ["p", "port"], doc="Listening port"),
    stage=Stage.BOTH,
)
fs_key = create_key(
    "fs",
    opt(Text(), "data/", ["fs"], doc="Directory served by the store"),
    stage=Stage.CONFIGURE_ONLY,
)


# ---------------------------------------------------------------------------
# Runtime factories
# ---------------------------------------------------------------------------


@register_factory("Direct")
def direct_create(call: FactoryCall) -> DirectStore:
    return DirectStore(Path(str(call.keys["fs"])))


def _snapshot_path(info, name: str) -> Path:
    return Path(info.build_dir) / f"{name}.crunch"


@register_factory("Crunch")
def crunch_create(call: FactoryCall) -> CrunchStore:
    path = _snapshot_path(call.info, call.name)
    if not path.exists():
        raise DeviceStartError(
            f"crunch snapshot {path} is missing; run the build command first"
        )
    return CrunchStore(read_snapshot(path))


@register_factory("NetStore")
def netstore_create(call: FactoryCall) -> NetStore:
    return NetStore(call.args[0])


@register_factory("Tcpip")
def tcpip_create(call: FactoryCall) -> TcpipHandle:
    port = call.keys["port"]
    if not isinstance(port, int) or isinstance(port, bool):
        raise DeviceStartError(f"port must be an integer, got {port!r}")
    return TcpipHandle(port)


@register_factory("Http")
def http_create(call: FactoryCall) -> HttpHandle:
    return HttpHandle(call.args[0])


class FileServerJob:
    """Job root: serves store reads over the network handle."""

    def __init__(self, store, net):
        self.store = store
        self.net = net

    def serve(self, path: str):
        return store_read(self.store, path.lstrip("/"))

    def start(self) -> None:
        network_listen(self.net, self.serve)


@register_factory("Server_modular.Make")
def server_create(call: FactoryCall) -> FileServerJob:
    return FileServerJob(call.args[0], call.args[1])


# ---------------------------------------------------------------------------
# Device descriptors
# ---------------------------------------------------------------------------


def _crunch_build(info, device, name: str) -> None:
    src = Path(str(info.keys.value("fs")))
    if not src.is_dir():
        raise FileNotFoundError(f"crunch source directory {src} does not exist")
    write_snapshot(_snapshot_path(info, name), snapshot_directory(src))


def _crunch_clean(info, device, name: str) -> None:
    _snapshot_path(info, name).unlink(missing_ok=True)


direct = define_device(
    ConfigurableDevice(
        name="direct",
        module_name="Direct",
        ty=STORE,
        keys=(fs_key,),
        packages=pure((package("store-direct"),)),
        connect=ConnectRecipe("Direct", (), ("fs",)),
    )
)

crunch = define_device(
    ConfigurableDevice(
        name="crunch",
        module_name="Crunch",
        ty=STORE,
        keys=(fs_key,),
        packages=pure((package("store-crunch", ">=1.0"),)),
        connect=ConnectRecipe("Crunch", (), ()),
        build_hook=_crunch_build,
        clean_hook=_crunch_clean,
    )
)

netstore = define_device(
    ConfigurableDevice(
        name="netstore",
        module_name="NetStore",
        ty=arrow(NETWORK, STORE),
        packages=pure((package("store-net"),)),
        connect=ConnectRecipe("NetStore", ("network",), ()),
    )
)

tcpip = define_device(
    ConfigurableDevice(
        name="tcpip",
        module_name="Tcpip",
        ty=NETWORK,
        keys=(port_key,),
        packages=pure((package("net-tcpip"),)),
        connect=ConnectRecipe("Tcpip", (), ("port",)),
    )
)

http = define_device(
    ConfigurableDevice(
        name="http",
        module_name="Http",
        ty=arrow(NETWORK, NETWORK),
        packages=pure((package("net-http"),)),
        connect=ConnectRecipe("Http", ("network",), ()),
    )
)

make_server = foreign(
    "Server_modular.Make",
    arrow(STORE, NETWORK, JOB),
    packages=(package("fileserver-core"),),
)


# ---------------------------------------------------------------------------
# Flexible wiring
# ---------------------------------------------------------------------------


def _wants_http(port: object) -> bool:
    return port == 80 or port == 8080


def default_store() -> ImplExpr:
    """Store selected by the ``--store`` key at configure time."""
    return match_(
        value_of(store_key),
        [("crunch", crunch), ("direct", direct)],
        default=crunch,
    )


def default_network() -> ImplExpr:
    """Bare TCP, or HTTP stacked on TCP when the port says so."""
    is_http = app(pure(_wants_http), value_of(port_key))
    return if_(is_http, apply(http, tcpip), tcpip)


def default_server() -> ImplExpr:
    return apply(apply(make_server, default_store()), default_network())


def register_fileserver(name: str = "filesrv") -> AppConfig:
    """Register the fully flexible file-server application."""
    return register(name, [default_server()])
