"""Worked example ecosystem: a modular file server."""

from .net import Connection, HttpHandle, TcpipHandle, network_listen
from .stores import (
    CrunchStore,
    DirectStore,
    IoFailure,
    NetStore,
    StoreError,
    UnknownFile,
    store_read,
)
from .wiring import (
    NETWORK,
    STORE,
    FileServerJob,
    crunch,
    default_network,
    default_server,
    default_store,
    direct,
    fs_key,
    http,
    make_server,
    netstore,
    port_key,
    register_fileserver,
    store_key,
    tcpip,
)
