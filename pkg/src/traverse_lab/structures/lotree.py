"""Logical-ordering tree: an unbalanced BST layered over a sorted doubly linked list.

The list (succ/pred) decides membership; the tree only speeds up the search.
Searches walk the tree, fall back along pred links, then finish along succ
links, so a walk thrown off by a concurrent rotation still lands correctly.
"""
from __future__ import annotations

from ..runtime import Livelock
from ..trace import NEG_INF, POS_INF, Ref, Schema
from .base import Structure

TREE, LIST = "tree", "succ"


class LOTree(Structure):
    name = "lotree"
    schema = Schema("lotree", {"key": "key", "rem": "bool", "left": "link", "right": "link",
                               "parent": "link", "succ": "link", "pred": "link"},
                    immutable=frozenset({"key"}))
    bindings = {"tree": ("succ", "treepred"), "list": ("succ_k", "succ_k")}
    mutations_known = frozenset({"orig-insert-order", "skip-mark"})
    maintenance = ("rotate",)

    def __init__(self, world, mutations=()):
        super().__init__(world, mutations)
        self.min = world.init_object(key=NEG_INF).obj
        self.max = world.init_object(key=POS_INF, pred=Ref(self.min)).obj
        world.trace.initial[(self.min, "succ")] = Ref(self.max)
        world.trace._live[(self.min, "succ")] = Ref(self.max)
        world.roots.update(head=self.min, root=self.max)

    @property
    def decisive(self):
        if "skip-mark" in self.mutations:
            return frozenset({"insert:succ-publish", "delete:succ-unlink"})
        return frozenset({"insert:succ-publish", "delete:mark"})

    # -- searching -------------------------------------------------------

    def tree_locate(self, c, k, walk):
        y = self.max
        while True:
            ykey = yield from c.read(y, "key", walk)
            if ykey == k:
                return y
            x = y
            nxt = yield from c.read(x, "right" if ykey < k else "left", walk)
            if nxt is None:
                return x
            y = nxt.obj

    def contains(self, c, k):
        tree_walk = c.walk("tree", k, base=c.inv_t)
        x = yield from self.tree_locate(c, k, tree_walk)
        while (yield from c.read(x, "key", tree_walk)) > k:
            x = (yield from c.read(x, "pred", tree_walk)).obj
        list_walk = c.walk("list", k, glue=tree_walk.index)
        while (yield from c.read(x, "key", list_walk)) < k:
            x = (yield from c.read(x, "succ", list_walk)).obj
        if (yield from c.read(x, "key")) != k:
            return False
        rem = yield from c.read_field(x, "rem", list_walk, "list", k)
        return not rem

    def _window(self, c, k):
        """Lock p.succ with p.key < k <= p.succ.key and p unmarked."""
        for _ in c.attempts():
            walk = c.walk("tree", k, base=c.inv_t)
            x = yield from self.tree_locate(c, k, walk)
            p = x
            while (yield from c.read(p, "key", walk)) >= k:
                p = (yield from c.read(p, "pred", walk)).obj
            yield from c.lock(p, LIST)
            s = (yield from c.read(p, "succ")).obj
            pk = yield from c.read(p, "key")
            sk = yield from c.read(s, "key")
            if pk < k <= sk and not (yield from c.read(p, "rem")):
                return p, s, sk
            c.unlock_all()

    # -- updates ---------------------------------------------------------

    def insert(self, c, k):
        p, s, sk = yield from self._window(c, k)
        if sk == k:
            return False
        n = (yield from c.alloc("insert:alloc", key=k, succ=Ref(s), pred=Ref(p))).obj
        if "orig-insert-order" in self.mutations:
            yield from self._tree_link(c, p, n, k)
            yield from c.write(s, "pred", Ref(n), "insert:pred-link")
            yield from c.write(p, "succ", Ref(n), "insert:succ-publish")
        else:
            yield from c.write(p, "succ", Ref(n), "insert:succ-publish")
            yield from c.write(s, "pred", Ref(n), "insert:pred-link")
            yield from self._tree_link(c, p, n, k)
        return True

    def choose_parent(self, c, p, s, k):
        """Lock and return (z, side) with a free slot adjacent to k in tree order.

        Marked nodes are skipped: they may already be out of the tree.
        """
        if p != self.min:
            yield from c.lock(p, TREE)
            linked = (yield from c.read(p, "parent")) is not None or p == self.max
            if linked and (yield from c.read(p, "right")) is None:
                return p, "right"
            c.unlock(p, TREE)
        yield from c.lock(s, TREE)
        if (yield from c.read(s, "rem")):
            c.unlock(s, TREE)
            return None, s
        nxt = yield from c.read(s, "left")
        if nxt is None:
            return s, "left"
        c.unlock(s, TREE)
        # s's left slot is taken: the slot just before s ends its left subtree's right spine
        z = nxt.obj
        while True:
            yield from c.lock(z, TREE)
            if (yield from c.read(z, "key")) > k or (yield from c.read(z, "rem")):
                c.unlock(z, TREE)
                return None, None
            nxt = yield from c.read(z, "right")
            if nxt is None:
                return z, "right"
            c.unlock(z, TREE)
            z = nxt.obj

    def _tree_link(self, c, p, n, k):
        for _ in c.attempts():
            # the successor may have been deleted since n was published
            s = (yield from c.read(n, "succ")).obj
            z, side = yield from self.choose_parent(c, p, s, k)
            if z is None and side is not None:
                # a delete of the successor is in flight; it holds side's list latch
                yield from c.wait_free(side, LIST)
            elif z is not None:
                yield from c.write(n, "parent", Ref(z), "insert:parent")
                yield from c.write(z, side, Ref(n), "insert:tree-link")
                c.unlock(z, TREE)
                return

    def delete(self, c, k):
        p, s, sk = yield from self._window(c, k)
        if sk != k:
            return False
        yield from c.lock(s, LIST)
        if "skip-mark" not in self.mutations:
            yield from c.write(s, "rem", True, "delete:mark")
        yield from self.remove_from_tree(c, s)
        y = yield from c.read(s, "succ")
        yield from c.write(y.obj, "pred", Ref(p), "delete:pred-unlink")
        yield from c.write(p, "succ", y, "delete:succ-unlink")
        return True

    def remove_from_tree(self, c, n):
        for _ in c.attempts():
            busy = yield from self._remove_attempt(c, n)
            if busy is None:
                return
            if busy:
                yield from c.wait_free(*busy)

    def _lock_parent(self, c, node, taken):
        """Try-lock node's parent and confirm it is still the parent."""
        parent = yield from c.read(node, "parent")
        if parent is None:
            raise Livelock(f"node {node} has no tree parent")
        par = parent.obj
        if not (yield from c.trylock(par, TREE)):
            return None, (par, TREE)
        taken.append(par)
        if (yield from c.read(node, "parent")) != parent:
            return None, ()
        return par, None

    def _remove_attempt(self, c, n):
        taken = [n]
        yield from c.lock(n, TREE)
        try:
            left = yield from c.read(n, "left")
            right = yield from c.read(n, "right")
            if left is None or right is None:
                child = right if left is None else left
                pn, busy = yield from self._lock_parent(c, n, taken)
                if pn is None:
                    return busy
                yield from self.update_child(c, pn, n, child, "remove:bypass")
                return None
            s = (yield from c.read(n, "succ")).obj
            yield from c.lock(s, TREE)
            taken.append(s)
            ps, busy = yield from self._lock_parent(c, s, taken)
            if ps is None:
                return busy
            pn, busy = yield from self._lock_parent(c, n, taken)
            if pn is None:
                return busy
            # temporarily unlink s, then let it take n's place
            yield from self.update_child(c, ps, s, (yield from c.read(s, "right")), "remove:unlink-succ")
            nl = yield from c.read(n, "left")
            yield from c.write(s, "left", nl, "remove:copy-left")
            nr = yield from c.read(n, "right")
            yield from c.write(s, "right", nr, "remove:copy-right")
            yield from c.write(nl.obj, "parent", Ref(s), "remove:adopt")
            if nr is not None:
                yield from c.write(nr.obj, "parent", Ref(s), "remove:adopt")
            yield from self.update_child(c, pn, n, Ref(s), "remove:relink")
            return None
        finally:
            for obj in taken:
                c.unlock(obj, TREE, force=True)

    def update_child(self, c, p, n, child, label):
        if (yield from c.read(p, "left")) == Ref(n):
            yield from c.write(p, "left", child, label)
        else:
            yield from c.write(p, "right", child, label)
        if child is not None:
            yield from c.write(child.obj, "parent", Ref(p), label + ":parent")

    def rotate(self, c, k):
        """Right rotation of p.left, with p found by a tree search for k."""
        walk = c.walk("tree", k, base=c.inv_t)
        p = yield from self.tree_locate(c, k, walk)
        yield from c.lock(p, TREE)
        if (yield from c.read(p, "rem")):
            return None
        y = yield from c.read(p, "left")
        if y is None:
            return None
        y = y.obj
        if not (yield from c.trylock(y, TREE)):
            return None
        x = yield from c.read(y, "left")
        if x is None:
            return None
        x = x.obj
        if not (yield from c.trylock(x, TREE)):
            return None
        yield from c.write(p, "left", Ref(x), "rotate:unlink-y")
        yield from c.write(y, "parent", Ref(x), "rotate:parent")
        yield from c.write(p, "left", Ref(x), "rotate:redundant-left")
        inner = yield from c.read(x, "right")
        yield from c.write(y, "left", inner, "rotate:move-inner")
        if inner is not None:
            yield from c.write(inner.obj, "parent", Ref(y), "rotate:inner-parent")
        yield from c.write(x, "right", Ref(y), "rotate:link-y-back")
        yield from c.write(x, "parent", Ref(p), "rotate:x-parent")
        return None
