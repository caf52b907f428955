"""On-demand PDNet slicing.

Starting from the criterion places, control places are processed one at a
time (ascending id).  Processing a control place ``p``:

1. every transition that puts a token on ``p`` through a control arc drags in
   its own control inputs;
2. every transition that consumes ``p`` through a control arc is kept
   together with its execution inputs;
3. for variable places those transitions read, the writers that reach them
   (same thread, no redefinition in between) or run in another thread are
   kept by adding their control places.

A post-process then reconnects execution places whose original feeders were
sliced away to the nearest kept predecessors.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from .deps import defined_places, successor_transitions, used_places
from .net import CONTROL, EXECUTION, VARIABLE, Arc


class SliceError(Exception):
    pass


@dataclass
class SliceState:
    places: set            # P'
    transitions: set       # T'
    processed: set         # P_d
    direction: str = "enter"
    trace: list = field(default_factory=list)


@dataclass
class SlicedNet:
    net: object
    original: object
    criterion: frozenset
    state: SliceState
    repairs: list          # (original transition id, original place id)
    place_map: dict        # original id -> sliced id
    trans_map: dict

    @property
    def kept_places(self):
        return set(self.state.places)

    @property
    def kept_transitions(self):
        return set(self.state.transitions)

    def removed_places(self):
        return set(range(len(self.original.places))) - self.state.places

    def removed_transitions(self):
        return set(range(len(self.original.transitions))) - self.state.transitions

    def report(self):
        o = self.original
        pn = lambda ids: sorted(o.places[i].name for i in ids)
        tn = lambda ids: sorted(o.transitions[i].name for i in ids)
        return {
            "criterion": pn(self.criterion),
            "kept_places": pn(self.state.places),
            "kept_transitions": tn(self.state.transitions),
            "removed_places": pn(self.removed_places()),
            "removed_transitions": tn(self.removed_transitions()),
            "repair_arcs": [[o.transitions[t].name, o.places[p].name] for t, p in self.repairs],
            "trace": [{"place": o.places[e["place"]].name,
                       "added_places": pn(e["added_places"]),
                       "added_transitions": tn(e["added_transitions"]),
                       "direction": e["direction"]} for e in self.state.trace],
            "size": {"places": [len(o.places), len(self.net.places)],
                     "transitions": [len(o.transitions), len(self.net.transitions)]},
        }

    def report_json(self):
        return json.dumps(self.report(), indent=2)


def _control_inputs(net, t):
    return [a.place for a in net.t_in[t] if a.kind == "control"]


def default_seeds(net):
    """Control places kept whatever the criterion.

    Control places of loop branches, jumps, exits and every synchronisation
    transition, plus the mutex and condition places themselves: removing them
    could turn a blocking or non-terminating run into a terminating one.
    """
    seeds = set()
    loops = _loop_branches(net)
    for t in net.transitions:
        if t.kind in ("jump", "exit", "lock", "unlock", "signal", "wait1", "wait2", "wait3") \
                or t.id in loops:
            seeds.update(_control_inputs(net, t.id))
    for p in net.places:
        if p.sync:
            seeds.add(p.id)
    return seeds


def _loop_branches(net):
    """Branch transitions that lie on a flow cycle."""
    out = set()
    for t in net.transitions:
        if t.kind != "branch":
            continue
        seen, queue = set(), deque(successor_transitions(net, t.id))
        while queue:
            u = queue.popleft()
            if u == t.id:
                out.add(t.id)
                break
            if u not in seen:
                seen.add(u)
                queue.extend(successor_transitions(net, u))
    return out


def observed_seeds(net, observed):
    """Extra places for atoms the formula observes directly.

    For a watched transition keep its control inputs and those of the
    transitions that feed its execution places, so it becomes enabled at
    the same point of its thread as before.
    """
    if not observed:
        return set()
    trans, places = observed
    seeds = set(places)
    for t in trans:
        seeds.update(_control_inputs(net, t))
        for a in net.t_in[t]:
            if a.flow:
                for b in net.p_in[a.place]:
                    if b.flow:
                        seeds.update(_control_inputs(net, b.trans))
    return seeds


class _Slicer:
    def __init__(self, net, tmap=None):
        self.net = net
        self.tmap = tmap
        self._writers = {}

    def is_global(self, p):
        place = self.net.places[p]
        if self.tmap is not None and place.var is not None:
            return place.var in self.tmap.global_vars
        return place.scope != "local"

    def writers(self, p):
        w = self._writers.get(p)
        if w is None:
            w = [a.trans for a in self.net.p_in[p] if p in defined_places(self.net, a.trans)]
            self._writers[p] = w
        return w

    def def_clear_path(self, tn, tm, p, direction):
        """Flow path tn -> tm with no redefinition of p in between.

        Every call site has its own callee instance, so paths through enter
        and exit arcs are always realisable and both directions use the same
        flow graph.
        """
        net = self.net
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

    def concurrent(self, tn, tm):
        """INCON: writer and reader belong to different threads."""
        a, b = self.net.transitions[tn], self.net.transitions[tm]
        return a.thread is not None and b.thread is not None and a.thread != b.thread

    def return_places(self, t):
        tr = self.net.transitions[t]
        if tr.kind != "call":
            return []
        out = []
        for u in self.net.transitions:
            if u.kind == "return" and u.instance == tr.instance and u.label == tr.label:
                out += [a.place for a in self.net.t_in[u.id] if a.tag == "exit"]
        return out

    def entry_places(self, p):
        net = self.net
        out = []
        for a in net.p_out[p]:
            tr = net.transitions[a.trans]
            if a.kind != "control" or tr.kind != "exit":
                continue
            for u in net.transitions:
                if u.kind == "enter" and u.instance == tr.instance:
                    out += _control_inputs(net, u.id)
        return out

    def find_pre(self, t, p, direction):
        return [w for w in self.writers(p) if self.def_clear_path(w, t, p, direction)]

    def propagate(self, st, direction):
        net = self.net
        st.direction = direction
        while True:
            pending = sorted(q for q in st.places - st.processed if net.places[q].has(CONTROL))
            if not pending:
                return
            p = pending[0]
            before_p, before_t = set(st.places), set(st.transitions)
            # step 1: control-flow dependences into p
            for a in net.p_in[p]:
                if a.kind != "control" or a.trans in st.transitions:
                    continue
                for b in net.t_in[a.trans]:
                    if b.kind == "control":
                        st.places.add(b.place)
            # an exit depends on the entry of its function instance
            st.places.update(self.entry_places(p))
            # step 2: the statement p controls
            for a in net.p_out[p]:
                if a.kind != "control":
                    continue
                t = a.trans
                st.transitions.add(t)
                for b in net.t_in[t]:
                    if net.places[b.place].has(EXECUTION):
                        st.places.add(b.place)
                # terminal places (a thread's final return place) go with their producer
                for b in net.t_out[t]:
                    if b.flow and not net.p_out[b.place]:
                        st.places.add(b.place)
                # step 3: data-flow dependences of what t reads
                for v in sorted(used_places(net, t)):
                    if not net.places[v].has(VARIABLE):
                        continue
                    if self.is_global(v):
                        st.places.add(v)
                        for w in self.writers(v):
                            if self.def_clear_path(w, t, v, direction) or self.concurrent(w, t):
                                st.places.update(_control_inputs(net, w))
                    else:
                        found = self.find_pre(t, v, direction)
                        if found:
                            st.places.add(v)
                        for w in found:
                            st.places.update(_control_inputs(net, w))
                # call/return pairs stay together: a kept call keeps its return place
                st.places.update(self.return_places(t))
            st.processed.add(p)
            st.trace.append({"place": p, "added_places": st.places - before_p,
                             "added_transitions": st.transitions - before_t,
                             "direction": direction})


def compute_slice(net, criterion, observed=None, tmap=None, seeds=True):
    """Run the two propagation passes; returns the SliceState."""
    crit = set(criterion)
    bad = [p for p in crit if not 0 <= p < len(net.places)]
    if bad:
        raise SliceError(f"criterion places not in the net: {bad}")
    st = SliceState(set(crit), set(), set())
    sl = _Slicer(net, tmap)
    if seeds:
        st.places |= default_seeds(net)
    st.places |= observed_seeds(net, observed)
    sl.propagate(st, "enter")
    sl.propagate(st, "exit")
    return st


def post_process(net, st):
    """Reconnect kept execution places to the kept transitions that ran before
    their removed feeders.

    Every flow feeder of a kept execution place that was sliced away is
    replaced by arcs from the nearest kept transitions before it, so no
    execution order through removed code is lost.  Returns a list of new arcs
    (as original ids) and raises SliceError if a place has no kept
    predecessor at all.
    """
    repairs = []
    for p in sorted(st.places):
        place = net.places[p]
        if not place.has(EXECUTION):
            continue
        feeders = [a.trans for a in net.p_in[p] if a.flow]
        lost = [t for t in feeders if t not in st.transitions]
        if not lost:
            continue
        found = _find_exe(net, lost, st.transitions)
        if not found and len(lost) == len(feeders):
            raise SliceError(f"no kept predecessor for execution place {place.name}")
        for t in sorted(found - set(feeders)):
            repairs.append((t, p))
    return repairs


def _find_exe(net, start, kept):
    """Nearest kept transitions before the removed transitions ``start``
    along original flow arcs."""
    out = set()
    seen = set()
    queue = deque(start)
    while queue:
        t = queue.popleft()
        if t in seen:
            continue
        seen.add(t)
        if t in kept:
            out.add(t)
            continue
        for a in net.t_in[t]:
            if a.flow:
                queue.extend(b.trans for b in net.p_in[a.place] if b.flow)
    return out


def slice_net(net, criterion, observed=None, tmap=None, seeds=True):
    """Slice ``net`` for the criterion places and return a SlicedNet."""
    st = compute_slice(net, criterion, observed, tmap, seeds)
    repairs = post_process(net, st)
    extra = [Arc(p, t, False, "exec", flow=True, repair=True) for t, p in repairs]
    sub, pmap, tmap_ = net.restrict(st.places, st.transitions, extra,
                                    meta={"kind": "slice"})
    return SlicedNet(sub, net, frozenset(criterion), st, repairs, pmap, tmap_)


def executable(sliced):
    """Every kept execution place keeps an incoming flow arc for each
    execution order of the original net: a place with original feeders has a
    kept feeder, and every removed feeder is bypassed by a repair arc from a
    kept transition that ran before it."""
    net = sliced.net
    orig = sliced.original
    kept = sliced.state.transitions
    inv = {new: old for old, new in sliced.trans_map.items()}
    for old, new in sliced.place_map.items():
        if not orig.places[old].has(EXECUTION):
            continue
        feeders = [a.trans for a in orig.p_in[old] if a.flow]
        if not feeders:
            continue
        now = {inv[a.trans] for a in net.p_in[new] if a.flow}
        if not now:
            return False
        lost = [t for t in feeders if t not in kept]
        if lost and not _find_exe(orig, lost, kept) <= now:
            return False
    return True


# ------------------------------------------------- stuttering equivalence

END = "end"  # label of the infinite stutter at the end of a run


def _labelled_graph(net, names, formula, bound):
    from . import ltl
    from .checker import reachability_graph
    f = ltl.resolve(ltl.parse(formula) if isinstance(formula, str) else formula, net)
    atom_list = ltl.atoms(f)
    rg = reachability_graph(net, bound)
    ids = [net.place(n).id for n in names]
    labels = [(tuple(m[i] for i in ids), ltl.valuation(net, m, atom_list)) for m in rg.markings]
    succ = [[j for t, _b, j in out if t is not None] for out in rg.edges]
    return labels, succ


def _stutter_step(labels, succ, group):
    """Next observable labels from a set of same-label markings.

    Returns {label: frozenset of markings} plus END when the run can stay on
    the current label forever (a dead marking or a same-label cycle).
    """
    lab = labels[next(iter(group))]
    closure, stack = set(group), list(group)
    while stack:
        m = stack.pop()
        for n in succ[m]:
            if labels[n] == lab and n not in closure:
                closure.add(n)
                stack.append(n)
    out = {}
    for m in closure:
        for n in succ[m]:
            if labels[n] != lab:
                out.setdefault(labels[n], set()).add(n)
    stays = any(not succ[m] for m in closure)
    if not stays:
        # a cycle inside the closure means the label can repeat forever
        inner = {m: [n for n in succ[m] if n in closure] for m in closure}
        stays = _has_cycle(inner)
    result = {k: frozenset(v) for k, v in out.items()}
    if stays:
        result[END] = frozenset()
    return result


def _has_cycle(graph):
    colour = {}
    for root in graph:
        if root in colour:
            continue
        colour[root] = 1
        stack = [(root, iter(graph[root]))]
        while stack:
            node, it = stack[-1]
            for n in it:
                c = colour.get(n)
                if c == 1:
                    return True
                if c is None:
                    colour[n] = 1
                    stack.append((n, iter(graph[n])))
                    break
            else:
                colour[node] = 2
                stack.pop()
    return False


def stuttering_equivalent(net, other, formula, bound=100_000, criterion=None):
    """Do ``net`` and ``other`` have the same runs up to stuttering?

    Markings are observed through the criterion places and the atoms of
    ``formula``.  Both reachability graphs are built (raising
    StateBoundExceeded beyond ``bound`` markings) and the stutter-reduced
    run languages, including runs that stutter forever, are compared by a
    joint subset construction.
    """
    from . import ltl
    target = getattr(other, "net", other)
    if criterion is None:
        f = ltl.resolve(ltl.parse(formula) if isinstance(formula, str) else formula, net)
        criterion = ltl.extract_criterion(net, f)
    names = sorted(net.places[p].name for p in criterion)
    la, sa = _labelled_graph(net, names, formula, bound)
    lb, sb = _labelled_graph(target, names, formula, bound)
    if la[0] != lb[0]:
        return False
    start = (frozenset([0]), frozenset([0]))
    seen, queue = {start}, deque([start])
    while queue:
        ga, gb = queue.popleft()
        na, nb = _stutter_step(la, sa, ga), _stutter_step(lb, sb, gb)
        if set(na) != set(nb):
            return False
        for lab in na:
            if lab == END:
                continue
            pair = (na[lab], nb[lab])
            if pair not in seen:
                seen.add(pair)
                queue.append(pair)
    return True
