"""Citrus: an internal BST map whose readers run inside RCU read-side sections.

Removing a node with two children links a copy of its successor in its place,
waits for a grace period, then unlinks the original successor. The copy carries
a ghost key (the removed key) from the link until that unlink.
"""
from __future__ import annotations

from ..trace import POS_INF, Ref, Schema
from .base import Structure


def default_data(k):
    """Data stored by ``insert(k)`` when the caller gives none."""
    return k * 10


class Citrus(Structure):
    name = "citrus"
    schema = Schema("citrus", {"key": "key", "data": "int", "left": "link", "right": "link",
                               "tag": "int", "rem": "bool"},
                    immutable=frozenset({"key", "data"}), ghost=frozenset({"ghostKey"}))
    bindings = {"search": ("weak_k", "bst_k"), "succ-walk": ("succ_k_eps", "succ_k_eps")}
    semantics = "map"
    mutations_known = frozenset({"no-grace-period"})
    decisive = frozenset({"insert:link-left", "insert:link-right", "delete:bypass",
                          "delete:copy-link"})

    def __init__(self, world, mutations=()):
        super().__init__(world, mutations)
        self.root = world.init_object(key=-1).obj
        top = world.init_object(key=POS_INF).obj
        world.trace.initial[(self.root, "right")] = Ref(top)
        world.trace._live[(self.root, "right")] = Ref(top)
        world.roots.update(root=self.root)

    def locate(self, c, k):
        x = y = self.root
        enter = yield from c.rcu_read_lock()
        walk = c.walk("search", k, base=enter)
        while True:
            ykey = yield from c.read(y, "key", walk)
            if ykey == k:
                break
            x = y
            nxt = yield from c.read(x, "right" if ykey < k else "left", walk)
            if nxt is None:
                y = None
                break
            y = nxt.obj
        tag = yield from c.read_field(x, "tag", walk, "search", k)
        c.rcu_read_unlock()
        return x, tag, y

    def contains(self, c, k):
        _, _, y = yield from self.locate(c, k)
        if y is None:
            return False
        return (yield from c.read(y, "data"))

    def insert(self, c, k, d=None):
        d = default_data(k) if d is None else d
        for _ in c.attempts():
            x, tag, y = yield from self.locate(c, k)
            if y is not None:
                return False
            yield from c.lock(x)
            if (yield from c.read(x, "rem")):
                c.unlock_all()
                continue
            xkey = yield from c.read(x, "key")
            if (k < xkey and (yield from c.read(x, "left")) is None
                    and (yield from c.read(x, "tag")) == tag):
                node = yield from c.alloc("insert:alloc", key=k, data=d)
                yield from c.write(x, "left", node, "insert:link-left")
                return True
            if k > xkey and (yield from c.read(x, "right")) is None:
                node = yield from c.alloc("insert:alloc", key=k, data=d)
                yield from c.write(x, "right", node, "insert:link-right")
                return True
            c.unlock_all()

    def set_child(self, c, x, k, child, label, ghost=()):
        if k < (yield from c.read(x, "key")):
            yield from c.write(x, "left", child, label, ghost)
            if child is None:
                tag = yield from c.read(x, "tag")
                yield from c.write(x, "tag", tag + 1, "delete:tag")
        else:
            yield from c.write(x, "right", child, label, ghost)

    def has_null_child(self, c, y):
        left = yield from c.read(y, "left")
        if left is None:
            return True, (yield from c.read(y, "right"))
        right = yield from c.read(y, "right")
        if right is None:
            return True, left
        return False, None

    def delete(self, c, k):
        for _ in c.attempts():
            x, _, y = yield from self.locate(c, k)
            if y is None:
                return False
            yield from c.lock(x)
            yield from c.lock(y)
            if ((yield from c.read(y, "rem")) or (yield from c.read(x, "rem"))
                    or ((yield from c.read(x, "left")) != Ref(y)
                        and (yield from c.read(x, "right")) != Ref(y))):
                c.unlock_all()
                continue
            one_child, other = yield from self.has_null_child(c, y)
            if one_child:
                yield from c.write(y, "rem", True, "delete:mark")
                yield from self.set_child(c, x, k, other, "delete:bypass")
                return True
            # successor: leftmost node of y's right subtree
            walk = c.walk("succ-walk", k, base=c.world.trace.now)
            yield from c.read(y, "key", walk)
            ps = y
            cs = (yield from c.read(y, "right", walk)).obj
            yield from c.read(cs, "key", walk)
            nx = yield from c.read(cs, "left", walk)
            while nx is not None:
                ps, cs = cs, nx.obj
                yield from c.read(cs, "key", walk)
                nx = yield from c.read(cs, "left", walk)
            yield from c.lock(ps)
            yield from c.lock(cs)
            if ((yield from c.read(ps, "rem")) or (yield from c.read(cs, "rem"))
                    or (ps != y and (yield from c.read(ps, "left")) != Ref(cs))
                    or (yield from c.read(cs, "left")) is not None):
                c.unlock_all()
                continue
            w = (yield from c.alloc("delete:copy", key=k, data=(yield from c.read(y, "data")),
                                    left=(yield from c.read(y, "left")),
                                    right=(yield from c.read(y, "right")),
                                    tag=(yield from c.read(y, "tag")))).obj
            succ_key = yield from c.read(cs, "key")
            yield from c.write(w, "key", succ_key, "delete:copy-key")
            yield from c.write(w, "data", (yield from c.read(cs, "data")), "delete:copy-data")
            yield from c.write(y, "rem", True, "delete:mark")
            yield from c.lock(w)
            yield from self.set_child(c, x, k, Ref(w), "delete:copy-link",
                                      ghost=[((w, "ghostKey"), k)])
            if "no-grace-period" not in self.mutations:
                yield from c.synchronize_rcu()
            yield from c.write(cs, "rem", True, "delete:mark-succ")
            rest = yield from c.read(cs, "right")
            collapse = [((w, "ghostKey"), succ_key)]
            if ps == y:
                yield from c.write(w, "right", rest, "delete:unlink-succ", collapse)
            else:
                yield from c.write(ps, "left", rest, "delete:unlink-succ", collapse)
                if rest is None:
                    tag = yield from c.read(ps, "tag")
                    yield from c.write(ps, "tag", tag + 1, "delete:tag")
            return True
