"""Exception types shared across the engine.

Each class maps to one diagnostic family; the CLI translates them into
its fixed exit-code table.
"""

from __future__ import annotations


class ModwireError(Exception):
    """Base class for all engine errors."""


class DefinitionError(ModwireError):
    """Invalid configuration definition: bad identifier, duplicate key,
    flag-name collision, recipe arity mismatch, duplicate match cases."""


class TypeMismatch(ModwireError):
    """Signature types disagree at composition time."""


class ConfigureError(ModwireError):
    """Key computation or switch resolution failed at configure time."""


class UnresolvedKey(ModwireError):
    def __init__(self, name: str):
        super().__init__(f"key '{name}' is not resolved")
        self.name = name


class KeyResolutionError(ModwireError):
    """Required key missing, enum violation, or stage violation."""


class FlagParseError(ModwireError):
    """Command-line flags do not parse against the declared argument specs."""


class StaleConfigError(ModwireError):
    """Persisted configuration is missing or its fingerprint no longer
    matches the loaded config definition."""


class PlanError(ModwireError):
    """A plan document is malformed; message carries the location."""


class HookError(ModwireError):
    def __init__(self, device: str, cause: Exception):
        super().__init__(f"device '{device}' hook failed: {cause}")
        self.device = device
        self.cause = cause


class DeviceStartError(ModwireError):
    """A runtime factory failed to initialize its device."""


class UnregisteredFactoryError(ModwireError):
    def __init__(self, factory_id: str):
        super().__init__(f"no runtime factory registered for '{factory_id}'")
        self.factory_id = factory_id
