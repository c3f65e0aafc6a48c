"""Contention-friendly tree: logical deletion, backtracking physical removal, copy rotations."""
from __future__ import annotations

from ..trace import POS_INF, Ref, Schema
from .base import Structure


class CFTree(Structure):
    name = "cftree"
    schema = Schema("cftree", {"key": "key", "left": "link", "right": "link",
                               "del": "bool", "rem": "bool"},
                    immutable=frozenset({"key"}))
    bindings = {"search": ("bst_k", "bst_k")}
    maintenance = ("rotate", "remove_right")
    decisive = frozenset({"insert:link-left", "insert:link-right", "insert:undelete",
                          "delete:set-del"})

    def __init__(self, world, mutations=()):
        super().__init__(world, mutations)
        self.root = world.init_object(key=POS_INF).obj
        world.roots.update(root=self.root)

    def locate(self, c, k, walk):
        x = y = self.root
        while True:
            ykey = yield from c.read(y, "key", walk)
            if ykey == k:
                return x, y
            x = y
            nxt = yield from c.read(x, "right" if ykey < k else "left", walk)
            if nxt is None:
                return x, None
            y = nxt.obj

    def contains(self, c, k):
        walk = c.walk("search", k, base=c.inv_t)
        _, y = yield from self.locate(c, k, walk)
        if y is None:
            return False
        deleted = yield from c.read_field(y, "del", walk, "search", k)
        return not deleted

    def insert(self, c, k):
        for _ in c.attempts():
            walk = c.walk("search", k, base=c.inv_t)
            x, y = yield from self.locate(c, k, walk)
            if y is not None:
                yield from c.lock(y)
                if (yield from c.read(y, "rem")):
                    c.unlock_all()
                    continue
                ret = yield from c.read_field(y, "del", walk, "search", k)
                yield from c.write(y, "del", False, "insert:undelete")
                return ret
            yield from c.lock(x)
            if (yield from c.read(x, "rem")):
                c.unlock_all()
                continue
            xkey = yield from c.read(x, "key")
            if k < xkey and (yield from c.read(x, "left")) is None:
                node = yield from c.alloc("insert:alloc", key=k)
                yield from c.write(x, "left", node, "insert:link-left")
                return True
            if k > xkey and (yield from c.read(x, "right")) is None:
                node = yield from c.alloc("insert:alloc", key=k)
                yield from c.write(x, "right", node, "insert:link-right")
                return True
            c.unlock_all()

    def delete(self, c, k):
        for _ in c.attempts():
            walk = c.walk("search", k, base=c.inv_t)
            _, y = yield from self.locate(c, k, walk)
            if y is None:
                return False
            yield from c.lock(y)
            if (yield from c.read(y, "rem")):
                c.unlock_all()
                continue
            ret = not (yield from c.read_field(y, "del", walk, "search", k))
            yield from c.write(y, "del", True, "delete:set-del")
            return ret

    def remove_right(self, c, k):
        """Physically remove z.right if it is logically deleted and has a null child."""
        walk = c.walk("search", k, base=c.inv_t)
        z, _ = yield from self.locate(c, k, walk)
        yield from c.lock(z)
        y = yield from c.read(z, "right")
        if y is None or (yield from c.read(z, "rem")):
            return None
        y = y.obj
        yield from c.lock(y)
        if not (yield from c.read(y, "del")):
            return None
        if (yield from c.read(y, "left")) is None:
            yield from c.write(z, "right", (yield from c.read(y, "right")), "remove:bypass")
        elif (yield from c.read(y, "right")) is None:
            yield from c.write(z, "right", (yield from c.read(y, "left")), "remove:bypass")
        else:
            return None
        yield from c.write(y, "right", Ref(z), "remove:backtrack-r")
        yield from c.write(y, "left", Ref(z), "remove:backtrack-l")
        yield from c.write(y, "rem", True, "remove:mark")
        return None

    def rotate(self, c, k):
        """Right rotation of p.left by copying it, with p found by a search for k."""
        walk = c.walk("search", k, base=c.inv_t)
        p, _ = yield from self.locate(c, k, walk)
        yield from c.lock(p)
        y = yield from c.read(p, "left")
        if y is None or (yield from c.read(p, "rem")):
            return None
        y = y.obj
        yield from c.lock(y)
        x = yield from c.read(y, "left")
        if x is None:
            return None
        x = x.obj
        yield from c.lock(x)
        z = yield from c.alloc("rotate:alloc", key=(yield from c.read(y, "key")),
                               left=(yield from c.read(y, "left")),
                               right=(yield from c.read(y, "right")),
                               **{"del": (yield from c.read(y, "del"))})
        yield from c.write(z.obj, "left", (yield from c.read(x, "right")), "rotate:fresh-left")
        yield from c.write(x, "right", z, "rotate:x-right")
        yield from c.write(p, "left", Ref(x), "rotate:p-left")
        yield from c.write(y, "rem", True, "rotate:mark")
        return None
