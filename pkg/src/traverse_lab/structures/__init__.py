"""Instrumented concurrent search structures, addressed by name."""
from .base import Structure
from .cftree import CFTree
from .citrus import Citrus
from .lazylist import LazyList
from .lotree import LOTree

STRUCTURES: dict[str, type[Structure]] = {
    "lazylist": LazyList,
    "lotree": LOTree,
    "cftree": CFTree,
    "citrus": Citrus,
}

__all__ = ["STRUCTURES", "Structure", "LazyList", "LOTree", "CFTree", "Citrus"]
