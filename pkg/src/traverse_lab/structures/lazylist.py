"""Lazy list: sorted linked list, per-node latches, logical removal by marking."""
from __future__ import annotations

from ..trace import NEG_INF, POS_INF, Ref, Schema
from .base import Structure


class LazyList(Structure):
    name = "lazylist"
    schema = Schema("lazylist", {"key": "key", "succ": "link", "rem": "bool"},
                    immutable=frozenset({"key"}))
    bindings = {"search": ("succ_k", "succ_k")}
    decisive = frozenset({"insert:succ-publish", "delete:mark"})

    def __init__(self, world, mutations=()):
        super().__init__(world, mutations)
        self.head = world.init_object(key=NEG_INF).obj
        self.tail = world.init_object(key=POS_INF).obj
        world.trace.initial[(self.head, "succ")] = Ref(self.tail)
        world.trace._live[(self.head, "succ")] = Ref(self.tail)
        world.roots.update(head=self.head)

    def _locate(self, c, k, walk):
        pred = self.head
        yield from c.read(pred, "key", walk)
        curr = (yield from c.read(pred, "succ", walk)).obj
        while (yield from c.read(curr, "key", walk)) < k:
            pred = curr
            curr = (yield from c.read(curr, "succ", walk)).obj
        return pred, curr

    def contains(self, c, k):
        walk = c.walk("search", k, base=c.inv_t)
        _, curr = yield from self._locate(c, k, walk)
        if (yield from c.read(curr, "key")) != k:
            return False
        rem = yield from c.read_field(curr, "rem", walk, "search", k)
        return not rem

    def _locked_window(self, c, k):
        for _ in c.attempts():
            walk = c.walk("search", k, base=c.inv_t)
            pred, curr = yield from self._locate(c, k, walk)
            yield from c.lock(pred)
            yield from c.lock(curr)
            valid = (not (yield from c.read(pred, "rem"))
                     and not (yield from c.read(curr, "rem"))
                     and (yield from c.read(pred, "succ")) == Ref(curr))
            if valid:
                return pred, curr
            c.unlock_all()

    def insert(self, c, k):
        pred, curr = yield from self._locked_window(c, k)
        if (yield from c.read(curr, "key")) == k:
            return False
        node = yield from c.alloc("insert:alloc", key=k, succ=Ref(curr), rem=False)
        yield from c.write(pred, "succ", node, "insert:succ-publish")
        return True

    def delete(self, c, k):
        pred, curr = yield from self._locked_window(c, k)
        if (yield from c.read(curr, "key")) != k:
            return False
        yield from c.write(curr, "rem", True, "delete:mark")
        nxt = yield from c.read(curr, "succ")
        yield from c.write(pred, "succ", nxt, "delete:succ-unlink")
        return True
