"""Shared plumbing for the instrumented structures."""
from __future__ import annotations

from typing import ClassVar

from ..runtime import World
from ..trace import Ref, Schema


class Structure:
    """Base class: subclasses define the schema, roots and generator operations."""

    name: ClassVar[str] = "?"
    schema: ClassVar[Schema]
    # role -> (reach predicate name, extend relation name)
    bindings: ClassVar[dict] = {}
    semantics: ClassVar[str] = "set"
    mutations_known: ClassVar[frozenset] = frozenset()
    maintenance: ClassVar[tuple] = ()
    # write labels allowed to change the abstract state
    decisive: ClassVar[frozenset] = frozenset()

    def __init__(self, world: World, mutations=()):
        unknown = set(mutations) - self.mutations_known
        if unknown:
            raise ValueError(f"{self.name} has no mutation(s) {sorted(unknown)}")
        self.world = world
        self.mutations = frozenset(mutations)

    @staticmethod
    def ref(value) -> int | None:
        return value.obj if isinstance(value, Ref) else None

    def keys_in_order(self) -> list:  # pragma: no cover - overridden
        raise NotImplementedError
