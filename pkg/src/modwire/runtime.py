"""Executes an initialization plan against the factory registry."""

from __future__ import annotations

from typing import Mapping

from .devices import FactoryCall, Info, get_factory
from .errors import DeviceStartError, ModwireError, UnresolvedKey
from .plan import PlanDocument


def instantiate(
    plan: PlanDocument, info: Info, key_values: Mapping[str, object]
) -> dict[str, object]:
    """Run every step's factory in plan order, feeding each one the handles
    of its argument steps and its by-name key readings."""
    handles: dict[str, object] = {}
    for step in plan.steps:
        factory = get_factory(step.factory_id)
        args = tuple(handles[a] for a in step.args)
        keys = {}
        for k in step.key_args:
            if k not in key_values:
                raise UnresolvedKey(k)
            keys[k] = key_values[k]
        call = FactoryCall(info=info, name=step.var, args=args, keys=keys)
        try:
            handles[step.var] = factory(call)
        except ModwireError:
            raise
        except Exception as e:  # noqa: BLE001 - device failures become start errors
            raise DeviceStartError(f"device '{step.var}' failed to start: {e}") from e
    return handles


def start_jobs(plan: PlanDocument, handles: Mapping[str, object]) -> None:
    """Start each job root in order; a job blocks until it terminates."""
    for var in plan.jobs:
        job = handles[var]
        start = getattr(job, "start", None)
        if not callable(start):
            raise DeviceStartError(f"job '{var}' has no start() entry point")
        start()
