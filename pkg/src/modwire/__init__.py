"""modwire: a typed component-composition and configuration engine.

Applications are typed applications of parameterized components,
configured through staged command-line keys, deduplicated into a
configuration graph, and compiled into a deterministic initialization
plan that the bundled runtime executes.
"""

from .devices import (
    ConfigurableDevice,
    ConnectRecipe,
    FactoryCall,
    Info,
    Package,
    aggregate_packages,
    define_device,
    foreign,
    get_factory,
    package,
    register_factory,
)
from .dsl import (
    JOB,
    AppConfig,
    Arrow,
    Base,
    ImplExpr,
    SignatureType,
    apply,
    arity,
    arrow,
    base_type,
    if_,
    match_,
    register,
    typ_of,
)
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
from .graph import build_graph, collect_keys, dedup, resolve, to_dot, topo_order
from .keys import (
    ArgSpec,
    Bool,
    Enum,
    Int,
    KeySpec,
    Phase,
    ResolvedKeys,
    Source,
    Stage,
    Text,
    app,
    create_key,
    eval_value,
    flag,
    keys_mentioned,
    map_value,
    opt,
    pure,
    required,
    resolve_keys,
    value_of,
)
from .plan import PlanDocument, emit_glue, emit_plan, parse_plan, serialize_plan

__version__ = "0.1.0"
