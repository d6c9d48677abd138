"""Typed signature and implementation expressions.

A signature type is either a named base signature (``store``,
``network``, ``job``) or an arrow between two signature types; an
implementation expression is a tree of device leaves, applications, and
key-conditional switches.  Every expression carries exactly one
signature type, and every ill-typed combination is rejected when the
expression is built, long before any graph or file is produced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .errors import DefinitionError, TypeMismatch
from .keys import KeyValue, Literal, check_identifier, _require_value

if TYPE_CHECKING:
    from .devices import ConfigurableDevice


# ---------------------------------------------------------------------------
# Signature types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Base:
    """A named base signature; two base types are equal iff their names are."""

    name: str


@dataclass(frozen=True)
class Arrow:
    """A functor type from ``param`` to ``result``; equality is structural."""

    param: "SignatureType"
    result: "SignatureType"


SignatureType = Base | Arrow


def base_type(name: str) -> Base:
    """Create the base signature type called ``name``."""
    check_identifier(name, "signature name")
    return Base(name)


def arrow(*types: SignatureType) -> Arrow:
    """Build a functor type; ``arrow(a, b, c)`` right-associates to
    ``a -> (b -> c)``."""
    if len(types) < 2:
        raise DefinitionError("arrow needs a parameter and a result type")
    for t in types:
        if not isinstance(t, (Base, Arrow)):
            raise DefinitionError(f"not a signature type: {t!r}")
    result = types[-1]
    for param in reversed(types[:-1]):
        result = Arrow(param, result)
    return result


def arity(t: SignatureType) -> int:
    """Number of parameters along the result spine of ``t``."""
    n = 0
    while isinstance(t, Arrow):
        n += 1
        t = t.result
    return n


def param_types(t: SignatureType) -> tuple[SignatureType, ...]:
    params = []
    while isinstance(t, Arrow):
        params.append(t.param)
        t = t.result
    return tuple(params)


def result_type(t: SignatureType) -> Base:
    while isinstance(t, Arrow):
        t = t.result
    return t


def render_type(t: SignatureType) -> str:
    if isinstance(t, Base):
        return t.name
    param = render_type(t.param)
    if isinstance(t.param, Arrow):
        param = f"({param})"
    return f"{param} -> {render_type(t.result)}"


# The distinguished signature of runnable application roots.
JOB = Base("job")


# ---------------------------------------------------------------------------
# Implementation expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Device:
    """Leaf wrapping a configurable device descriptor."""

    dev: "ConfigurableDevice"


@dataclass(frozen=True)
class Apply:
    fn: "ImplExpr"
    arg: "ImplExpr"


@dataclass(frozen=True)
class If:
    cond: KeyValue
    then_impl: "ImplExpr"
    else_impl: "ImplExpr"


@dataclass(frozen=True)
class Match:
    scrutinee: KeyValue
    cases: tuple[tuple[Literal, "ImplExpr"], ...]
    default: "ImplExpr | None"


ImplExpr = Device | Apply | If | Match


def typ_of(e: ImplExpr) -> SignatureType:
    """The unique signature type of an implementation expression."""
    if isinstance(e, Device):
        return e.dev.ty
    if isinstance(e, Apply):
        fn_ty = typ_of(e.fn)
        if not isinstance(fn_ty, Arrow):
            raise TypeMismatch(
                f"cannot apply an implementation of non-functor type "
                f"'{render_type(fn_ty)}'"
            )
        arg_ty = typ_of(e.arg)
        if arg_ty != fn_ty.param:
            raise TypeMismatch(
                f"functor expects '{render_type(fn_ty.param)}' but the argument "
                f"has type '{render_type(arg_ty)}'"
            )
        return fn_ty.result
    if isinstance(e, If):
        return _branch_type([e.then_impl, e.else_impl])
    if isinstance(e, Match):
        branches = [impl for _, impl in e.cases]
        if e.default is not None:
            branches.append(e.default)
        return _branch_type(branches)
    raise DefinitionError(f"not an implementation expression: {e!r}")


def _branch_type(branches: Sequence[ImplExpr]) -> SignatureType:
    ty = typ_of(branches[0])
    for b in branches[1:]:
        other = typ_of(b)
        if other != ty:
            raise TypeMismatch(
                f"switch branches disagree: '{render_type(ty)}' vs "
                f"'{render_type(other)}'"
            )
    return ty


def apply(fn: ImplExpr, arg: ImplExpr) -> Apply:
    """Apply a functor implementation to an argument of its parameter type."""
    node = Apply(fn, arg)
    typ_of(node)
    return node


def if_(cond: KeyValue, then_impl: ImplExpr, else_impl: ImplExpr) -> If:
    """Choose between two same-typed implementations on a boolean key value."""
    _require_value(cond)
    node = If(cond, then_impl, else_impl)
    typ_of(node)
    return node


def match_(
    scrutinee: KeyValue,
    cases: Sequence[tuple[Literal, ImplExpr]],
    default: ImplExpr | None = None,
) -> Match:
    """Choose an implementation by comparing a key value against case
    literals; literals must be pairwise distinct."""
    _require_value(scrutinee)
    if not cases:
        raise DefinitionError("match needs at least one case")
    seen = []
    for lit, _ in cases:
        if any(lit == s and type(lit) is type(s) for s in seen):
            raise DefinitionError(f"duplicate match case literal {lit!r}")
        seen.append(lit)
    node = Match(scrutinee, tuple((lit, impl) for lit, impl in cases), default)
    typ_of(node)
    return node


# ---------------------------------------------------------------------------
# Application registration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AppConfig:
    name: str
    jobs: tuple[ImplExpr, ...]


_registered: list[AppConfig] = []


def reset_registered_apps() -> None:
    _registered.clear()


def registered_apps() -> tuple[AppConfig, ...]:
    return tuple(_registered)


def register(name: str, jobs: Sequence[ImplExpr]) -> AppConfig:
    """Name the application and record its runnable roots; every root must
    have the ``job`` signature."""
    check_identifier(name, "application name")
    if not jobs:
        raise DefinitionError("an application needs at least one job")
    for j in jobs:
        ty = typ_of(j)
        if ty != JOB:
            raise TypeMismatch(
                f"registered roots must have type '{render_type(JOB)}', "
                f"got '{render_type(ty)}'"
            )
    app = AppConfig(name, tuple(jobs))
    _registered.append(app)
    return app
