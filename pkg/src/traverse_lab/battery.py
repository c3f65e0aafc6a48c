"""The full per-trace checker battery for each structure.

``check_trace`` runs every condition that applies to a structure and returns
one aggregated verdict per condition name plus counters. Which predicates go
with which traversal role comes from the structure's ``bindings``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from . import checker as ck
from . import lin
from .reach import (BstKReach, GhostHistory, SuccKReach, SuccReach, WeakKReach, make_extend,
                    make_reach, weak_paths)
from .runtime import World
from .structures import STRUCTURES
from .trace import Ref, Trace, validate_trace, validate_traversal

# (reach, extend) pairs checked globally, for every key of the domain
GLOBAL_PAIRS = {
    "lazylist": [("succ_k", "succ_k")],
    "lotree": [("succ_k", "succ_k"), ("succ", "treepred")],
    "cftree": [("bst_k", "bst_k")],
    "citrus": [],
}
FIELD_PAIRS = {"lotree": "rem", "cftree": "del"}
BACKTRACK_LABELS = ("remove:backtrack-l", "remove:backtrack-r")


@dataclass
class BatteryConfig:
    effect_points: bool = True
    lin_search_max_ops: int = 8
    traversals: bool = True
    soundness: bool = True
    forepassed: bool = True
    fields: bool = True
    lemmas: bool = True
    points_reachable: bool = False  # quadratic diagnostic


@dataclass
class BatteryResult:
    verdicts: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts.values())

    def failed(self) -> list:
        return [name for name, v in self.verdicts.items() if not v.ok]

    def add(self, name: str, verdict: ck.Verdict | None = None, note: str = "") -> None:
        agg = self.verdicts.setdefault(name, ck.Verdict(name))
        if verdict is not None and not verdict.ok and len(agg.violations) < 20:
            chain = f"{note}: {verdict.chain}" if note else verdict.chain
            agg.fail(verdict.t, verdict.loc, verdict.key, verdict.t2, chain, verdict.status)

    def bump(self, name: str, n: int = 1) -> None:
        self.stats[name] = self.stats.get(name, 0) + n


@lru_cache(maxsize=None)
def structure_info(name: str, mutations: tuple = ()):
    cls = STRUCTURES[name]
    inst = cls(World(cls.schema), mutations)
    return cls, frozenset(inst.decisive), dict(inst.world.roots)


def _keys(trace: Trace) -> range:
    return lin.trace_keys(trace)


def _traversal_preds(structure: str, trace: Trace, trav, roots, base):
    """(reach, extend) prescribed for a logged traversal."""
    cls = STRUCTURES[structure]
    reach_name, ext_name = cls.bindings[trav.role]
    k = trav.key if reach_name != "succ" else None
    view = base if reach_name == "weak_k" else None
    return make_reach(reach_name, k, roots, view), make_extend(ext_name, trav.key)


def _base(structure: str, trace: Trace, trav, roots):
    if trav.base is not None or trav.glue is None:
        return trav.base
    return ck.resolve_base(trace, trav, SuccReach(roots.get("head", 0)))


def check_trace(trace: Trace, structure: str, mutations=(), config: BatteryConfig | None = None
                ) -> BatteryResult:
    config = config or BatteryConfig()
    _cls, decisive, roots = structure_info(structure, tuple(sorted(mutations)))
    roots = dict(trace.roots) or roots
    res = BatteryResult()
    res.add("validate")
    rep = validate_trace(trace)
    if not rep.ok:
        res.add("validate", ck.Verdict("validate").fail(chain=rep.message))
        return res

    if config.effect_points:
        _effect_points(trace, structure, decisive, roots, config, res)
    if config.traversals:
        _traversals(trace, structure, roots, config, res)
    if config.forepassed:
        _global_pairs(trace, structure, roots, config, res)
        if structure == "citrus":
            _citrus_views(trace, roots, res)
    if config.fields and structure in FIELD_PAIRS:
        _fields(trace, structure, roots, res)
    if config.lemmas and structure == "citrus":
        _citrus_lemmas(trace, roots, res)
    return res


# -- linearizability ---------------------------------------------------------

def _effect_points(trace, structure, decisive, roots, config, res):
    cls = STRUCTURES[structure]
    abstraction = lin.abstraction_for(structure, roots, _keys(trace))
    res.add("effect-points", lin.check_effect_points(trace, abstraction, None, cls.semantics))
    res.add("abstraction-stability", lin.check_abstraction_stability(trace, abstraction, decisive))
    history = lin.history_of(trace)
    if len(history) <= config.lin_search_max_ops:
        res.bump("lin_search")
        ok = lin.check_linearizable_search(history, lin.SPECS[cls.semantics],
                                           lin.initial_abstract(trace, abstraction))
        v = ck.Verdict("lin-search")
        if not ok:
            v.fail(chain="no linearization of " + ", ".join(
                f"{h.kind}({h.key})->{h.ret!r}" for h in history))
        res.add("lin-search", v)


# -- traversals ----------------------------------------------------------------

def _traversals(trace, structure, roots, config, res):
    res.add("traversal-validate")
    res.add("traversal-correct")
    if config.soundness:
        res.add("inferred-premises")
        res.add("inferred-sound")
    for trav in trace.traversals:
        if not trav.steps:
            continue
        res.bump("traversals")
        base = _base(structure, trace, trav, roots)
        reach, extend = _traversal_preds(structure, trace, trav, roots, base)
        rep = validate_traversal(trace, trav, extend)
        if not rep.ok:
            res.add("traversal-validate", ck.Verdict("traversal-validate").fail(chain=rep.message),
                    f"op {trav.op} {trav.role}")
        direct = ck.check_traversal_correct(trace, trav, reach, base)
        res.add("traversal-correct", direct, f"op {trav.op} {trav.role}({trav.key})")
        if config.soundness:
            inferred = ck.infer_traversal_correct(trace, trav, reach, extend, base)
            res.add("inferred-premises", inferred, f"op {trav.op} {trav.role}({trav.key})")
            if inferred.ok and not direct.ok:
                res.add("inferred-sound", ck.Verdict("inferred-sound").fail(
                    direct.t, direct.loc, direct.key, chain="premises hold but traversal incorrect"))


# -- forepassed family -----------------------------------------------------------

def _global_pairs(trace, structure, roots, config, res):
    pairs = GLOBAL_PAIRS[structure]
    if not pairs:
        return
    res.add("compat")
    res.add("forepassed")
    strong_name = "strong-stratified" if structure == "cftree" else "strong-forepassed"
    res.add(strong_name)
    for reach_name, ext_name in pairs:
        ks = [None] if reach_name == "succ" else list(_keys(trace))
        for k in ks:
            reach = make_reach(reach_name, k, roots)
            extend = make_extend(ext_name, k)
            tag = f"{reach_name}/{ext_name} k={k}"
            res.add("compat", ck.check_compat_span(trace, reach, extend), tag)
            res.add("forepassed", ck.check_forepassed(trace, reach, extend), tag)
            strong = ck.check_strong_forepassed(trace, reach)
            if structure == "cftree":
                res.bump("strong_violations", len(strong.violations))
                for v in strong.violations:
                    label = trace.write_at(v["t2"]).label
                    res.bump(f"strong_violation:{label}")
                    if label not in BACKTRACK_LABELS:
                        res.add(strong_name, ck.Verdict(strong_name).fail(
                            v["t"], v["loc"], k, v["t2"], f"{tag}: later write is {label}"))
            else:
                res.add(strong_name, strong, tag)
            if config.points_reachable:
                res.add("points-reachable", ck.check_lemma_points_reachable(trace, reach, extend), tag)


def _objects_with_keys(trace):
    out = {}
    for (o, f), v in trace.initial.items():
        if f == "key":
            out[o] = v
    for w in trace.writes:
        if w.loc[1] == "key":
            out.setdefault(w.loc[0], w.value)
    return {o: v for o, v in out.items() if isinstance(v, int)}


def _fields(trace, structure, roots, res):
    f = FIELD_PAIRS[structure]
    pred = SuccKReach if structure == "lotree" else BstKReach
    start = roots.get("head", 0) if structure == "lotree" else roots.get("root", 0)
    res.add("field-forepassed")
    for o, key in sorted(_objects_with_keys(trace).items()):
        res.add("field-forepassed",
                ck.check_field_forepassed(trace, pred(key, start), (o, "key"), (o, f)),
                f"node {o} key {key}")
    res.add("field-witness")
    for fr in trace.field_reads:
        if fr.loc[1] != f:
            continue
        res.bump("field_reads")
        trav = trace.traversals[fr.trav]
        base = _base(structure, trace, trav, roots)
        reach = pred(fr.key, start)
        w = ck.past_holds(trace, reach, fr.node, base, fr.t) if base is not None else None
        if w is None:
            res.add("field-witness", ck.Verdict("field-witness").fail(
                fr.t, fr.node, fr.key, chain=f"op {fr.op}: {fr.node} never reachable before the read"))
            continue
        res.add("field-witness", ck.check_past_reach_with_field(trace, reach, fr.node, fr.loc,
                                                                w.t, fr.t), f"op {fr.op}")


# -- citrus ---------------------------------------------------------------------

def _sections(trace):
    """(thread, op, enter t, exit t) of every RCU read-side section."""
    open_, out = {}, []
    for e in trace.rcu:
        if e.ev == "rcu_enter":
            open_[e.thread] = (e.op, e.t)
        else:
            op, t = open_.pop(e.thread)
            out.append((e.thread, op, t, e.t))
    for th, (op, t) in open_.items():
        out.append((th, op, t, trace.end))
    return out


def _citrus_views(trace, roots, res):
    """Weak-reach forepassed for every traversal view, over its read-side section."""
    root = roots.get("root", 0)
    res.add("weak-forepassed")
    res.add("weak-compat")
    done = set()
    for _th, op, s, x in _sections(trace):
        if (s, x) in done:
            continue
        done.add((s, x))
        for k in _keys(trace):
            reach = WeakKReach(k, root, s)
            extend = make_extend("bst_k", k)
            tag = f"view@{s} k={k}"
            res.add("weak-forepassed", ck.check_forepassed(trace, reach, extend, (s, x)), tag)
            res.add("weak-compat", ck.check_compat_span(trace, reach, extend, (s, x)), tag)
    res.add("rcu-ghost")
    history = GhostHistory.of_trace(trace)
    for obj, t_open, _v, t_collapse in history.intervals:
        for th, op, s, x in _sections(trace):
            if s < t_open and x >= t_collapse:
                res.add("rcu-ghost", ck.Verdict("rcu-ghost").fail(
                    t_open, obj, None, t_collapse,
                    f"section of op {op} [{s},{x}] spans ghost open {t_open} to collapse {t_collapse}"))


def _subtree(state, obj):
    seen, todo = set(), [obj]
    while todo:
        o = todo.pop()
        if o in seen:
            continue
        seen.add(o)
        for f in ("left", "right"):
            v = state.get((o, f))
            if isinstance(v, Ref):
                todo.append(v.obj)
    return seen


def _bst_find_from(state, obj, k):
    seen = set()
    while obj is not None and obj not in seen:
        seen.add(obj)
        key = state.get((obj, "key"))
        if key == k:
            return obj
        v = state.get((obj, "right" if key < k else "left"))
        obj = v.obj if isinstance(v, Ref) else None
    return None


def _citrus_lemmas(trace, roots, res):
    root = roots.get("root", 0)
    history = GhostHistory.of_trace(trace)
    keys = list(_keys(trace))
    for name in ("lemma-succ-subtree", "lemma-succ-right-subtree", "lemma-one-deviation",
                 "tag-lemma", "endpoint"):
        res.add(name)
    # lemmas over every state with a live ghost
    if history.intervals:
        lo = min(iv[1] for iv in history.intervals)
        prev = None
        for t, state, w in trace.iter_states(lo, trace.end):
            ghosts = history.effective(None, t)
            if not ghosts:
                prev = None
                continue
            items = tuple(sorted(ghosts.items()))
            if items == prev and w is not None and w.loc[1] not in ("left", "right", "key"):
                continue
            prev = items
            res.bump("ghost_states")
            for x, g in ghosts.items():
                m = state.get((x, "key"))
                inside = sorted(state.get((o, "key")) for o in _subtree(state, x))
                bad = [k for k in inside if isinstance(k, int) and g < k < m]
                if bad:
                    res.add("lemma-succ-subtree", ck.Verdict("").fail(
                        t, (x, "key"), bad[0], chain=f"keys {bad} in ({g},{m}) inside subtree of {x}"))
                right = state.get((x, "right"))
                right_keys = ([state.get((o, "key")) for o in _subtree(state, right.obj)]
                              if isinstance(right, Ref) else [])
                bad_r = [k for k in right_keys if isinstance(k, int) and g < k < m]
                found = _bst_find_from(state, right.obj, m) if isinstance(right, Ref) else None
                if bad_r or found is None:
                    res.add("lemma-succ-right-subtree", ck.Verdict("").fail(
                        t, (x, "key"), m, chain=f"right subtree of {x}: keys {bad_r} in ({g},{m}); "
                                                f"copy source found={found is not None}"))
                if found is None:
                    res.add("lemma-succ-subtree", ck.Verdict("").fail(
                        t, (x, "key"), m, chain=f"no node with key {m} below {x}"))
            for k in keys:
                _one_deviation(state, k, root, ghosts, t, res)
    _tag_lemma(trace, root, res)
    _endpoints(trace, root, res)


def _one_deviation(state, k, root, ghosts, t, res):
    for path in weak_paths(state, k, root, ghosts):
        dev = 0
        for a, b in zip(path, path[1:]):
            if a[1] == "key":
                m = state.get(a)
                if not (b[1] == "right" and m < k or b[1] == "left" and m > k):
                    dev += 1
        if dev > 1:
            res.add("lemma-one-deviation", ck.Verdict("").fail(
                t, path[-1], k, chain=f"path {path} deviates {dev} times"))
            return


def _tag_lemma(trace, root, res):
    ops = trace.op_intervals()
    by_op: dict = {}
    for fr in trace.field_reads:
        if fr.loc[1] == "tag":
            by_op.setdefault(fr.op, []).append(fr)
    for w in trace.writes:
        if w.label not in ("insert:link-left", "insert:link-right"):
            continue
        res.bump("guarded_inserts")
        x = w.loc[0]
        k = ops[w.op]["key"]
        reads = [fr for fr in by_op.get(w.op, ()) if fr.loc == (x, "tag") and fr.t < w.t]
        if not reads:
            res.add("tag-lemma", ck.Verdict("").fail(w.t, w.loc, k, chain="no tag read for insert",
                                                     status="premise-failed"))
            continue
        fr = reads[-1]
        s = trace.traversals[fr.trav].base
        weak = WeakKReach(k, root, s)
        table = ck._table_for_span(trace, weak, s, fr.t)
        premise = any(table.holds((x, "key"), t3) and ck.value_at(trace, (x, "tag"), t3) == fr.value
                      for t3 in range(s, fr.t + 1))
        if not premise:
            res.add("tag-lemma", ck.Verdict("").fail(fr.t, (x, "key"), k,
                                                     chain="premise: weak reach with tag never held",
                                                     status="premise-failed"))
            continue
        bst = BstKReach(k, root)
        now = ck.reach_table(trace, bst)
        if not now.holds(w.loc, w.t - 1):
            res.add("tag-lemma", ck.Verdict("").fail(w.t, w.loc, k,
                                                     chain=f"{w.label}: {w.loc} not on the search "
                                                           f"path for {k} at {w.t - 1}"))


def _endpoints(trace, root, res):
    ops = trace.op_intervals()
    for trav in trace.traversals:
        if trav.role != "search" or not trav.steps or ops[trav.op]["kind"] != "contains":
            continue
        res.bump("contains_endpoints")
        end, t_last = trav.steps[-1]
        weak = ck.past_holds(trace, WeakKReach(trav.key, root, trav.base), end, trav.base, t_last)
        if weak is None:
            continue
        if ck.past_holds(trace, BstKReach(trav.key, root), end, trav.base, t_last) is None:
            res.add("endpoint", ck.Verdict("").fail(t_last, end, trav.key,
                                                    chain=f"op {trav.op}: end point only weakly reachable"))


# -- aggregation ---------------------------------------------------------------

@dataclass
class Summary:
    """Counts across many traces."""

    structure: str
    traces: int = 0
    unique: int = 0
    statuses: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)  # condition -> count of failing traces
    examples: dict = field(default_factory=dict)  # condition -> first failing verdict (json)
    stats: dict = field(default_factory=dict)
    conditions: set = field(default_factory=set)

    def absorb(self, result: BatteryResult, where: str = "") -> None:
        for name, v in result.verdicts.items():
            self.conditions.add(name)
            if not v.ok:
                self.failures[name] = self.failures.get(name, 0) + 1
                if name not in self.examples:
                    ex = v.to_json()
                    ex["where"] = where
                    self.examples[name] = ex
        for k, n in result.stats.items():
            self.stats[k] = self.stats.get(k, 0) + n

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"structure": self.structure, "traces": self.traces, "unique": self.unique,
                "statuses": self.statuses, "ok": self.ok,
                "conditions": {c: self.failures.get(c, 0) for c in sorted(self.conditions)},
                "examples": self.examples, "stats": self.stats}


def check_workloads(workloads, preemption_bound: int | None = 2, max_traces: int = 1_000_000,
                    config: BatteryConfig | None = None, summary: Summary | None = None,
                    progress=None) -> Summary:
    """Explore every workload and run the battery once per distinct trace."""
    from .explore import run_exhaustive, trace_signature

    summary = summary or Summary(workloads[0].structure)
    for wl in workloads:
        seen = set()
        for run in run_exhaustive(wl, preemption_bound, max_traces):
            summary.traces += 1
            summary.statuses[run.status] = summary.statuses.get(run.status, 0) + 1
            sig = trace_signature(run.trace)
            if sig in seen:
                continue
            seen.add(sig)
            summary.unique += 1
            cfg = config
            if run.status != "ok":
                # cut-off runs have unfinished operations; only the trace itself is checked
                cfg = BatteryConfig(effect_points=False, traversals=False, soundness=False,
                                    forepassed=False, fields=False, lemmas=False)
            result = check_trace(run.trace, wl.structure, wl.mutations, cfg)
            summary.absorb(result, f"{wl.name} schedule={run.schedule}")
        if progress:
            progress(wl, summary)
    return summary


# -- scenarios -----------------------------------------------------------------

@dataclass
class Expectation:
    claim: str
    ok: bool
    detail: str = ""


def _trav(trace, thread, role):
    return [tr for tr in trace.traversals if tr.thread == thread and tr.role == role and tr.steps]


def _writer_label(trace, loc, t):
    """Label of the write that produced the value of ``loc`` at ``t`` (None if initial)."""
    times = ck.writes_by_loc(trace).get(loc, ())
    before = [u for u in times if u <= t]
    return trace.write_at(before[-1]).label if before else None


def scenario_report(name: str, run) -> list[Expectation]:
    """Check a scripted scenario against the verdicts it is meant to produce."""
    trace = run.trace
    roots = trace.roots
    out = [Expectation("run completes", run.status == "ok", run.detail),
           Expectation("trace validates", validate_trace(trace).ok)]
    if name == "lo-rotation-recovery":
        out.append(Expectation("contains(1) returns true", run.results[0] == [True]))
        tree = _trav(trace, 0, "tree")[-1]
        out.append(Expectation("search went off track and followed a pred link",
                               any(loc[1] == "pred" for loc, _ in tree.steps)))
        for tr in _trav(trace, 0, "tree") + _trav(trace, 0, "list"):
            base = _base("lotree", trace, tr, roots)
            reach, _ = _traversal_preds("lotree", trace, tr, roots, base)
            v = ck.check_traversal_correct(trace, tr, reach, base)
            out.append(Expectation(f"{tr.role} segment correct under {reach.name}", v.ok, v.chain))
    elif name == "cf-backtrack":
        out.append(Expectation("contains(4) returns true", run.results[0] == [True]))
        tr = _trav(trace, 0, "search")[-1]
        out.append(Expectation("search crossed a backtracking link",
                               any((_writer_label(trace, loc, t) or "").startswith("remove:backtrack")
                                   for loc, t in tr.steps)))
        reach = BstKReach(4, roots.get("root", 0))
        strong = ck.check_strong_forepassed(trace, reach)
        labels = {trace.write_at(v["t2"]).label for v in strong.violations}
        out.append(Expectation("strong forepassed violated at backtracking writes only",
                               not strong.ok and labels <= set(BACKTRACK_LABELS), str(sorted(labels))))
        fp = ck.check_forepassed(trace, reach, make_extend("bst_k", 4))
        out.append(Expectation("forepassed holds", fp.ok, fp.chain))
        v = ck.check_traversal_correct(trace, tr, reach)
        out.append(Expectation("search correct under bst_k", v.ok, v.chain))
    elif name == "citrus-weakreach":
        root = roots.get("root", 0)
        out.append(Expectation("contains(13) returns false", run.results[0] == [False]))
        tr = _trav(trace, 0, "search")[-1]
        s, t_last = tr.base, tr.steps[-1][1]
        std = BstKReach(13, root)
        weak = WeakKReach(13, root, s)
        fp_std = ck.check_forepassed(trace, std, make_extend("bst_k", 13), (s, t_last))
        tc_std = ck.check_traversal_correct(trace, tr, std)
        fp_weak = ck.check_forepassed(trace, weak, make_extend("bst_k", 13), (s, t_last))
        tc_weak = ck.check_traversal_correct(trace, tr, weak)
        out += [Expectation("bst_k: forepassed violated", not fp_std.ok, fp_std.chain),
                Expectation("bst_k: traversal correctness violated", not tc_std.ok, tc_std.chain),
                Expectation("weak_k: forepassed holds", fp_weak.ok, fp_weak.chain),
                Expectation("weak_k: traversal correct", tc_weak.ok, tc_weak.chain)]
    else:
        raise KeyError(name)
    return out
