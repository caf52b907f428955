"""Dependence queries on a translated PDNet.

Execution paths alternate transitions and places.  ``reachable`` follows
every arc of the net by default; the dependence relations themselves only
follow *flow* arcs (the arcs that move a thread's program counter, including
enter/exit arcs), so variable and synchronisation places never connect
threads.  Each call site owns a separate callee instance, so every flow path
through an enter arc and back out through an exit arc is a realisable
call/return path.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .net import CONTROL, VARIABLE


@dataclass(frozen=True)
class DependenceEdge:
    src: int
    dst: int
    kind: str          # co ca lo po D I
    place: int = None  # witness variable place for D/I


DEP_KINDS = ("co", "ca", "lo", "po", "D", "I")
ACQUIRE_KINDS = ("lock", "wait3")
RELEASE_KINDS = ("unlock", "wait1")


class DependenceError(Exception):
    pass


def _arc_keys(excluded):
    if excluded is None:
        return set()
    if hasattr(excluded, "key"):
        return {excluded.key()}
    out = set()
    for a in excluded:
        out.add(a.key() if hasattr(a, "key") else tuple(a))
    return out


def _usable(a, mode):
    return mode == "all" or a.flow


def successor_transitions(net, t, mode="flow", excluded=frozenset()):
    """Transitions one place away from ``t``."""
    out = []
    for a in net.t_out[t]:
        if not _usable(a, mode) or a.key() in excluded:
            continue
        for b in net.p_out[a.place]:
            if _usable(b, mode) and b.key() not in excluded:
                out.append(b.trans)
    return out


def reachable(net, tm, tn, excluded=None, arcs="all"):
    """Is there a transition/place path from ``tm`` to ``tn``?

    ``excluded`` is an arc (or collection of arcs / ``(place, trans, inbound)``
    keys) that no path may use.  ``arcs='flow'`` restricts paths to flow arcs.
    """
    ex = _arc_keys(excluded)
    seen = {tm}
    queue = deque([tm])
    while queue:
        t = queue.popleft()
        for u in successor_transitions(net, t, arcs, ex):
            if u == tn:
                return True
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return False


def reachable_set(net, tm, arcs="flow", avoid=()):
    """Transitions reachable from ``tm`` without passing through ``avoid``."""
    avoid = set(avoid)
    seen = set()
    queue = deque([tm])
    while queue:
        t = queue.popleft()
        for u in successor_transitions(net, t, arcs):
            if u not in seen:
                seen.add(u)
                if u not in avoid:
                    queue.append(u)
    return seen


def _maximal_path_avoiding(net, start_places, tn, arcs="flow"):
    """Some maximal path from the given places never visits ``tn``.

    A maximal path either ends in a node without successors or is infinite;
    in a finite graph the latter means it closes a cycle.
    """
    # node graph restricted to nodes other than tn
    def succ(node):
        kind, i = node
        if kind == "p":
            return [("t", a.trans) for a in net.p_out[i] if _usable(a, arcs)]
        return [("p", a.place) for a in net.t_out[i] if _usable(a, arcs)]

    start = [("p", p) for p in start_places]
    seen, order = set(), []
    stack = list(start)
    while stack:
        n = stack.pop()
        if n in seen or n == ("t", tn):
            continue
        seen.add(n)
        order.append(n)
        nxt = succ(n)
        if not nxt:
            return True
        stack.extend(nxt)
    # cycle inside the avoiding subgraph?
    colour = {}
    for root in order:
        if root in colour:
            continue
        stack = [(root, iter(succ(root)))]
        colour[root] = 1
        while stack:
            node, it = stack[-1]
            for m in it:
                if m not in seen:
                    continue
                c = colour.get(m)
                if c == 1:
                    return True
                if c is None:
                    colour[m] = 1
                    stack.append((m, iter(succ(m))))
                    break
            else:
                colour[node] = 2
                stack.pop()
    return False


def control_scope(net, tm, tn):
    """``tn`` is reachable from branch/enter transition ``tm`` and can be avoided.

    Paths are taken from the decision point: the flow inputs of ``tm``, so the
    sibling branch transition is one way of avoiding ``tn``.
    """
    kind = net.transitions[tm].kind
    if kind not in ("branch", "enter"):
        raise DependenceError(f"{net.transitions[tm].name} is not a branch or enter transition")
    if not reachable(net, tm, tn, arcs="flow"):
        return False
    starts = [a.place for a in net.t_in[tm] if a.flow]
    return _maximal_path_avoiding(net, starts, tn)


def _same_lock(net, t, mutex, kinds):
    tr = net.transitions[t]
    return tr.kind in kinds and _mutex_of(net, t) == mutex


def _mutex_of(net, t):
    for a in net.t_in[t]:
        if net.places[a.place].sync == "mutex":
            return a.place
    return None


def critical_region(net, tm, tn):
    """``tn`` can be reached from lock ``tm`` without releasing the same mutex."""
    if net.transitions[tm].kind not in ACQUIRE_KINDS:
        raise DependenceError(f"{net.transitions[tm].name} is not a lock transition")
    mutex = _mutex_of(net, tm)
    seen = {tm}
    queue = deque([tm])
    while queue:
        t = queue.popleft()
        for u in successor_transitions(net, t, "flow"):
            if u == tn:
                return True
            if u in seen or _same_lock(net, u, mutex, RELEASE_KINDS):
                continue
            seen.add(u)
            queue.append(u)
    return False


def ref_def_sets(net, t):
    """(Ref, Def): input variable places whose in/out arc expressions agree / differ."""
    ref, dfn = set(), set()
    for a in net.t_in[t]:
        if not net.places[a.place].has(VARIABLE):
            continue
        out = net.arc_expr(a.place, t, False)
        (ref if out == a.expr else dfn).add(a.place)
    return ref, dfn


def used_places(net, t):
    """Variable places whose value ``t`` depends on.

    Ref(t) plus written places whose old value feeds the new one
    (read-modify-write such as ``x := x + 1``).
    """
    ref, dfn = ref_def_sets(net, t)
    names = set()
    tr = net.transitions[t]
    if tr.guard is not None:
        names |= tr.guard.vars()
    for a in net.t_out[t]:
        if a.kind == "rw":
            names |= a.expr.vars()
    return ref | {p for p in dfn if net.places[p].var in names}


def defined_places(net, t):
    return ref_def_sets(net, t)[1]


def data_dependent(net, tn, tm):
    """``tm`` data-depends on ``tn``: returns (flag, witness place)."""
    common = sorted(defined_places(net, tn) & used_places(net, tm))
    for p in common:
        if _def_clear_path(net, tn, tm, p):
            return True, p
    return False, None


def _def_clear_path(net, tn, tm, p):
    """Flow path tn -> tm whose intermediate transitions do not define ``p``."""
    seen = set()
    queue = deque(successor_transitions(net, tn))
    while queue:
        t = queue.popleft()
        if t == tm:
            return True
        if t in seen:
            continue
        seen.add(t)
        if p in defined_places(net, t):
            continue
        queue.extend(successor_transitions(net, t))
    return False


def interference_dependent(net, tn, tm):
    """``tm`` interference-depends on ``tn``: def-use across different threads."""
    a, b = net.transitions[tn], net.transitions[tm]
    if a.thread is None or b.thread is None or a.thread == b.thread:
        return False, None
    common = sorted(defined_places(net, tn) & used_places(net, tm))
    if common:
        return True, common[0]
    return False, None


def control_flow_dependence_edges(net, tmap=None):
    """co, ca, lo and po edges of a translated net."""
    edges = set()
    for a in net.arcs:
        if a.inbound or a.kind != "control" or a.flow:
            continue
        src = net.transitions[a.trans]
        if src.kind not in ("branch", "enter") or not net.places[a.place].has(CONTROL):
            continue
        if net.places[a.place].sync:
            continue
        for b in net.p_out[a.place]:
            edges.add(DependenceEdge(a.trans, b.trans, "co"))
    for a in net.arcs:
        if a.tag == "enter" and not a.inbound:
            for b in net.p_out[a.place]:
                edges.add(DependenceEdge(a.trans, b.trans, "ca"))
        elif a.tag == "exit" and a.inbound:
            for b in net.p_in[a.place]:
                edges.add(DependenceEdge(b.trans, a.trans, "ca"))
    acquires = [t.id for t in net.transitions if t.kind in ACQUIRE_KINDS]
    for tm in acquires:
        mutex = _mutex_of(net, tm)
        region = reachable_set(net, tm, avoid=[u for u in range(len(net.transitions))
                                               if _same_lock(net, u, mutex, RELEASE_KINDS)])
        for tn in sorted(region):
            if tn != tm:
                edges.add(DependenceEdge(tm, tn, "lo"))
        for tn in acquires:
            if tn != tm and _mutex_of(net, tn) == mutex:
                edges.add(DependenceEdge(tm, tn, "lo"))
    waits = [t for t in net.transitions if t.kind == "wait2"]
    signals = [t for t in net.transitions if t.kind == "signal"]
    for w in waits:
        for s in signals:
            if w.sync == s.sync:
                edges.add(DependenceEdge(w.id, s.id, "po"))
                edges.add(DependenceEdge(s.id, w.id, "po"))
    return edges


def data_dependence_edges(net):
    """All D and I edges (pairwise; intended for small nets and overlays)."""
    edges = set()
    writers = [t.id for t in net.transitions if defined_places(net, t.id)]
    for tn in writers:
        for tm in range(len(net.transitions)):
            ok, p = data_dependent(net, tn, tm)
            if ok:
                edges.add(DependenceEdge(tn, tm, "D", p))
            ok, p = interference_dependent(net, tn, tm)
            if ok:
                edges.add(DependenceEdge(tn, tm, "I", p))
    return edges


def dependence_edges(net, tmap=None):
    return control_flow_dependence_edges(net, tmap) | data_dependence_edges(net)


_STYLE = {"co": "dotted", "ca": "dotted", "lo": "dotted", "po": "dotted",
          "D": "bold", "I": "bold"}
_COLOUR = {"co": "black", "ca": "blue", "lo": "darkgreen", "po": "purple",
           "D": "black", "I": "red"}


def dependence_dot(net, edges, title="dependences"):
    """Transitions as nodes, one styled edge per dependence."""
    lines = [f'digraph "{title}" {{', "  node [shape=box];"]
    used = sorted({e.src for e in edges} | {e.dst for e in edges})
    for t in used:
        lines.append(f'  t{t} [label="{net.transitions[t].name}"];')
    for e in sorted(edges, key=lambda e: (e.src, e.dst, e.kind)):
        label = e.kind if e.place is None else f"{e.kind}:{net.places[e.place].name}"
        lines.append(f'  t{e.src} -> t{e.dst} [style={_STYLE[e.kind]}, '
                     f'color={_COLOUR[e.kind]}, label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
