"""PDNet: a coloured Petri net whose places carry control/variable/execution roles.

Markings are plain tuples indexed by place id.  Because of the restricted
colour sets used by the translation, every place is stored compactly:

* ``UNIT`` places hold a token count,
* ``INT``/``THREAD`` places hold exactly one token, stored as its value,
* ``TMS`` places (condition-variable sets) hold one token, a sorted tuple of
  signed thread ids.

:func:`tokens` converts a stored entry back into a multiset when needed.
"""
from __future__ import annotations

from collections import Counter

from .program import BINARY_OPS, Binary, Const, DomainOverflow, Unary, Var, format_expr

CONTROL, VARIABLE, EXECUTION = 1, 2, 4
ROLE_NAMES = {CONTROL: "control", VARIABLE: "variable", EXECUTION: "execution"}

UNIT, INT, THREAD, TMS = "UNIT", "INT", "THREAD", "TMS"

TRANSITION_KINDS = ("assign", "jump", "exit", "branch", "call", "return", "enter",
                    "lock", "unlock", "signal", "wait1", "wait2", "wait3", "error")
ARC_KINDS = ("control", "rw", "exec")

UNIT_TOKEN = Const(1)  # arc expression 1`() on UNIT places


class NetError(Exception):
    pass


class NotEnabled(NetError):
    pass


# ------------------------------------------- condition-variable expressions
# A condvar token is a sorted tuple of signed thread ids: +i waits, -i has
# been notified and has not resumed yet.

class WaitAdd:
    """u + {+i}"""

    def __init__(self, var, tid):
        self.var, self.tid = var, tid

    def vars(self):
        return frozenset([self.var])

    def evaluate(self, env):
        return tuple(sorted(env[self.var] + (self.tid,)))

    def __eq__(self, other):
        return type(other) is WaitAdd and (self.var, self.tid) == (other.var, other.tid)

    def __hash__(self):
        return hash(("WaitAdd", self.var, self.tid))

    def __repr__(self):
        return f"{self.var} + {{{self.tid}}}"


class WaitRemove:
    """u - {x} for a signed id x"""

    def __init__(self, var, signed):
        self.var, self.signed = var, signed

    def vars(self):
        return frozenset([self.var])

    def evaluate(self, env):
        u = list(env[self.var])
        u.remove(self.signed)
        return tuple(u)

    def __eq__(self, other):
        return type(other) is WaitRemove and (self.var, self.signed) == (other.var, other.signed)

    def __hash__(self):
        return hash(("WaitRemove", self.var, self.signed))

    def __repr__(self):
        return f"{self.var} - {{{self.signed}}}"


def notify_min(u):
    """Turn the smallest waiting id +j into -j."""
    j = min(x for x in u if x > 0)
    lst = list(u)
    lst.remove(j)
    return tuple(sorted(lst + [-j]))


class Notify:
    def __init__(self, var):
        self.var = var

    def vars(self):
        return frozenset([self.var])

    def evaluate(self, env):
        return notify_min(env[self.var])

    def __eq__(self, other):
        return type(other) is Notify and self.var == other.var

    def __hash__(self):
        return hash(("Notify", self.var))

    def __repr__(self):
        return f"notify({self.var})"


class Member:
    """Guard: x in u (``negate`` flips it)."""

    def __init__(self, var, signed, negate=False):
        self.var, self.signed, self.negate = var, signed, negate

    def vars(self):
        return frozenset([self.var])

    def evaluate(self, env):
        return int((self.signed in env[self.var]) != self.negate)

    def __repr__(self):
        op = "notin" if self.negate else "in"
        return f"{self.signed} {op} {self.var}"


class HasWaiting:
    def __init__(self, var, negate=False):
        self.var, self.negate = var, negate

    def vars(self):
        return frozenset([self.var])

    def evaluate(self, env):
        return int(any(x > 0 for x in env[self.var]) != self.negate)

    def __repr__(self):
        return f"{'!' if self.negate else ''}waiting({self.var})"


def expr_vars(e):
    return e.vars() if e is not None else frozenset()


def eval_expr(e, env):
    if hasattr(e, "evaluate"):
        return e.evaluate(env)
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Unary):
        v = eval_expr(e.arg, env)
        return -v if e.op == "-" else int(not v)
    if e.op == "&&":
        return int(bool(eval_expr(e.left, env)) and bool(eval_expr(e.right, env)))
    if e.op == "||":
        return int(bool(eval_expr(e.left, env)) or bool(eval_expr(e.right, env)))
    return BINARY_OPS[e.op](eval_expr(e.left, env), eval_expr(e.right, env))


def compile_net_expr(e):
    if hasattr(e, "evaluate"):
        return e.evaluate
    if isinstance(e, Const):
        v = e.value
        return lambda env: v
    if isinstance(e, Var):
        k = e.name
        return lambda env: env[k]
    if isinstance(e, Unary):
        f = compile_net_expr(e.arg)
        if e.op == "-":
            return lambda env: -f(env)
        return lambda env: int(not f(env))
    lf, rf = compile_net_expr(e.left), compile_net_expr(e.right)
    if e.op == "&&":
        return lambda env: int(bool(lf(env)) and bool(rf(env)))
    if e.op == "||":
        return lambda env: int(bool(lf(env)) or bool(rf(env)))
    op = BINARY_OPS[e.op]
    return lambda env: op(lf(env), rf(env))


def show_expr(e):
    if e is None:
        return ""
    if e is UNIT_TOKEN or e == UNIT_TOKEN:
        return "1`()"
    if isinstance(e, (Const, Var, Unary, Binary)):
        return format_expr(e)
    return repr(e)


# ------------------------------------------------------------------ nodes

class Place:
    """A place.  ``roles`` is a bitset of CONTROL/VARIABLE/EXECUTION."""

    def __init__(self, pid, name, roles, color=UNIT, lo=None, hi=None, init=0,
                 var=None, scope=None, thread=None, sync=None):
        self.id = pid
        self.name = name
        self.roles = roles
        self.color = color
        self.lo, self.hi = lo, hi
        self.init = init
        self.var = var          # binding variable / program variable key for value places
        self.scope = scope      # 'global' | 'local' for variable places
        self.thread = thread    # owning thread for thread-private places
        self.sync = sync        # 'mutex' | 'cond' for synchronisation places

    def has(self, role):
        return bool(self.roles & role)

    @property
    def is_value(self):
        return self.color != UNIT

    def role_names(self):
        return [ROLE_NAMES[r] for r in (CONTROL, VARIABLE, EXECUTION) if self.roles & r]

    def __repr__(self):
        return f"Place({self.name})"


class Transition:
    def __init__(self, tid, name, kind, guard=None, thread=None, instance=None,
                 label=None, error=None, sync=None):
        assert kind in TRANSITION_KINDS, kind
        self.id = tid
        self.name = name
        self.kind = kind
        self.guard = guard
        self.thread = thread
        self.instance = instance
        self.label = label
        self.error = error      # error-mark name for kind 'error'
        self.sync = sync        # mutex / condvar name for sync transitions

    def __repr__(self):
        return f"Transition({self.name})"


class Arc:
    """Arc between a place and a transition.

    ``inbound`` is True for place -> transition.  ``flow`` marks arcs that
    carry a thread's program counter (used by execution-path queries and the
    post-process); ``tag`` is 'enter' or 'exit' for inter-procedural arcs.
    """

    __slots__ = ("place", "trans", "inbound", "kind", "expr", "flow", "tag", "repair")

    def __init__(self, place, trans, inbound, kind, expr=UNIT_TOKEN, flow=False, tag=None,
                 repair=False):
        assert kind in ARC_KINDS, kind
        self.place, self.trans, self.inbound = place, trans, inbound
        self.kind, self.expr, self.flow, self.tag = kind, expr, flow, tag
        self.repair = repair

    def key(self):
        return (self.place, self.trans, self.inbound)

    def __repr__(self):
        a, b = (f"p{self.place}", f"t{self.trans}")
        return f"Arc({a}->{b})" if self.inbound else f"Arc({b}->{a})"


# -------------------------------------------------------------------- net

class PDNet:
    def __init__(self, places, transitions, arcs, meta=None):
        self.places = list(places)
        self.transitions = list(transitions)
        self.arcs = list(arcs)
        self.meta = dict(meta or {})
        self._index()

    def _index(self):
        np_, nt = len(self.places), len(self.transitions)
        for i, p in enumerate(self.places):
            assert p.id == i, "place ids must be 0..n-1"
        for i, t in enumerate(self.transitions):
            assert t.id == i, "transition ids must be 0..n-1"
        self.t_in = [[] for _ in range(nt)]
        self.t_out = [[] for _ in range(nt)]
        self.p_in = [[] for _ in range(np_)]   # arcs t -> p
        self.p_out = [[] for _ in range(np_)]  # arcs p -> t
        for a in self.arcs:
            if a.inbound:
                self.t_in[a.trans].append(a)
                self.p_out[a.place].append(a)
            else:
                self.t_out[a.trans].append(a)
                self.p_in[a.place].append(a)
        self.place_by_name = {p.name: p for p in self.places}
        self.trans_by_name = {t.name: t for t in self.transitions}
        self._compiled = None

    # -- lookup helpers
    def place(self, name):
        return self.place_by_name[name]

    def trans(self, name):
        return self.trans_by_name[name]

    def preset_t(self, t):
        return [a.place for a in self.t_in[t]]

    def postset_t(self, t):
        return [a.place for a in self.t_out[t]]

    def preset_p(self, p):
        return [a.trans for a in self.p_in[p]]

    def postset_p(self, p):
        return [a.trans for a in self.p_out[p]]

    def arc(self, place, trans, inbound):
        for a in (self.t_in[trans] if inbound else self.t_out[trans]):
            if a.place == place:
                return a
        return None

    def arc_expr(self, place, trans, inbound):
        a = self.arc(place, trans, inbound)
        return None if a is None else a.expr

    def initial_marking(self):
        return tuple(p.init for p in self.places)

    def size(self):
        return len(self.places), len(self.transitions), len(self.arcs)

    # -- validation of the structural invariants
    def validate(self):
        problems = []
        for a in self.arcs:
            p = self.places[a.place]
            need = {"control": CONTROL, "rw": VARIABLE, "exec": EXECUTION}[a.kind]
            if not p.roles & need:
                problems.append(f"{a.kind} arc touches {p.name} without that role")
            if p.color == UNIT:
                if a.expr != UNIT_TOKEN:
                    problems.append(f"arc on UNIT place {p.name} has non-unit expression")
            elif p.color == THREAD:
                if not isinstance(a.expr, Const):
                    problems.append(f"arc on THREAD place {p.name} must be a thread constant")
            elif p.color == INT:
                if not isinstance(a.expr, (Const, Var, Unary, Binary)):
                    problems.append(f"arc on INT place {p.name} must be an integer expression")
            elif p.color == TMS:
                if not isinstance(a.expr, (Var, WaitAdd, WaitRemove, Notify)):
                    problems.append(f"arc on TMS place {p.name} must be a thread-set expression")
        for p in self.places:
            if p.roles == 0:
                problems.append(f"place {p.name} has no role")
            if p.is_value:
                ins = [a for a in self.p_out[p.id]]
                for a in ins:
                    if self.arc(p.id, a.trans, False) is None:
                        problems.append(f"value place {p.name} consumed but not restored by "
                                        f"{self.transitions[a.trans].name}")
            if p.color == INT and not p.lo <= p.init <= p.hi:
                problems.append(f"initial value of {p.name} outside its domain")
        return problems

    # -- compiled firing rule
    def compiled(self):
        if self._compiled is None:
            self._compiled = [_CompiledTransition(self, t) for t in self.transitions]
        return self._compiled

    def enabled_bindings(self, marking, t):
        b = self.compiled()[t].binding(marking)
        return [] if b is None else [b]

    def is_enabled(self, marking, t):
        return self.compiled()[t].binding(marking) is not None

    def fire(self, marking, t, binding=None):
        ct = self.compiled()[t]
        if binding is None:
            binding = ct.binding(marking)
            if binding is None:
                raise NotEnabled(self.transitions[t].name)
        else:
            if ct.binding(marking) != binding:
                raise NotEnabled(self.transitions[t].name)
        return ct.fire(marking, binding)

    def successors(self, marking):
        out = []
        for ct in self.compiled():
            b = ct.binding(marking)
            if b is not None:
                out.append((ct.id, b, ct.fire(marking, b)))
        return out

    def enabled(self, marking):
        return [ct.id for ct in self.compiled() if ct.binding(marking) is not None]

    # -- restriction (used by the slicer)
    def restrict(self, keep_places, keep_trans, extra_arcs=(), meta=None):
        """Sub-net on the given node ids plus extra arcs; ids are renumbered.

        Returns (net, place_map, trans_map) where the maps send old ids to new.
        """
        pmap = {}
        places = []
        for p in self.places:
            if p.id in keep_places:
                q = _copy_place(p, len(places))
                pmap[p.id] = q.id
                places.append(q)
        tmap = {}
        trans = []
        for t in self.transitions:
            if t.id in keep_trans:
                u = _copy_transition(t, len(trans))
                tmap[t.id] = u.id
                trans.append(u)
        arcs = []
        for a in list(self.arcs) + list(extra_arcs):
            if a.place in pmap and a.trans in tmap:
                arcs.append(Arc(pmap[a.place], tmap[a.trans], a.inbound, a.kind, a.expr,
                                a.flow, a.tag, a.repair))
        m = dict(self.meta)
        m.update(meta or {})
        return PDNet(places, trans, arcs, m), pmap, tmap


def _copy_place(p, pid):
    return Place(pid, p.name, p.roles, p.color, p.lo, p.hi, p.init, p.var, p.scope,
                 p.thread, p.sync)


def _copy_transition(t, tid):
    return Transition(tid, t.name, t.kind, t.guard, t.thread, t.instance, t.label, t.error,
                      t.sync)


class _CompiledTransition:
    __slots__ = ("id", "name", "unit_in", "unit_out", "const_in", "var_in", "guard",
                 "value_out")

    def __init__(self, net, t):
        self.id = t.id
        self.name = t.name
        self.unit_in, self.unit_out = [], []
        self.const_in, self.var_in, self.value_out = [], [], []
        for a in net.t_in[t.id]:
            p = net.places[a.place]
            if p.color == UNIT:
                self.unit_in.append(p.id)
            elif isinstance(a.expr, Const):
                self.const_in.append((p.id, a.expr.value))
            elif isinstance(a.expr, Var):
                self.var_in.append((p.id, a.expr.name))
            else:
                raise NetError(f"input arc of {t.name} on {p.name} must be a variable or constant")
        for a in net.t_out[t.id]:
            p = net.places[a.place]
            if p.color == UNIT:
                self.unit_out.append(p.id)
            else:
                lo, hi = (p.lo, p.hi) if p.color == INT else (None, None)
                self.value_out.append((p.id, compile_net_expr(a.expr), lo, hi, p.name))
        self.guard = compile_net_expr(t.guard) if t.guard is not None else None

    def binding(self, m):
        for p in self.unit_in:
            if m[p] < 1:
                return None
        for p, v in self.const_in:
            if m[p] != v:
                return None
        env = {}
        for p, name in self.var_in:
            env[name] = m[p]
        if self.guard is not None and not self.guard(env):
            return None
        return env

    def fire(self, m, env):
        new = list(m)
        for p in self.unit_in:
            new[p] -= 1
        for p in self.unit_out:
            new[p] += 1
        for p, fn, lo, hi, pname in self.value_out:
            v = fn(env)
            if lo is not None and not lo <= v <= hi:
                raise DomainOverflow(f"{self.name} writes {v} to {pname} outside [{lo},{hi}]")
            new[p] = v
        return tuple(new)


# ---------------------------------------------------------- marking views

def tokens(net, marking, place):
    """Multiset (Counter) of tokens on a place."""
    p = net.places[place] if isinstance(place, int) else net.place(place)
    v = marking[p.id]
    if p.color == UNIT:
        return Counter({(): v}) if v else Counter()
    return Counter([v])


def marking_dict(net, marking, hide_empty=True):
    out = {}
    for p in net.places:
        v = marking[p.id]
        if p.color == UNIT:
            if v or not hide_empty:
                out[p.name] = v
        else:
            out[p.name] = list(v) if isinstance(v, tuple) else v
    return out


def format_marking(net, marking):
    parts = []
    for p in net.places:
        v = marking[p.id]
        if p.color == UNIT:
            if v == 1:
                parts.append(p.name)
            elif v:
                parts.append(f"{v}*{p.name}")
        else:
            parts.append(f"{p.name}={v}")
    return "{" + ", ".join(parts) + "}"


def maximal_sequences(net, marking=None, bound=20):
    """All occurrence sequences from ``marking`` that are maximal or hit ``bound``.

    Returns a list of (transitions, markings, truncated) triples.
    """
    m0 = net.initial_marking() if marking is None else marking
    out = []

    def go(m, seq, ms):
        succ = net.successors(m)
        if not succ:
            out.append((tuple(seq), tuple(ms), False))
            return
        if len(seq) >= bound:
            out.append((tuple(seq), tuple(ms), True))
            return
        for t, _b, m2 in succ:
            seq.append(t)
            ms.append(m2)
            go(m2, seq, ms)
            seq.pop()
            ms.pop()

    go(m0, [], [m0])
    return out


# -------------------------------------------------------------- DOT export

def _dot_id(prefix, i):
    return f"{prefix}{i}"


def to_dot(net, title="pdnet", highlight=()):
    lines = [f'digraph "{title}" {{', "  rankdir=TB;"]
    for p in net.places:
        label = f"{p.name}\\n{'/'.join(r[0] for r in p.role_names())}"
        if p.is_value:
            label += f"\\n{p.init}"
        elif p.init:
            label += "\\n•"
        style = ', style=bold' if p.name in highlight else ""
        lines.append(f'  {_dot_id("p", p.id)} [shape=circle, label="{label}"{style}];')
    for t in net.transitions:
        guard = f"\\n[{show_expr(t.guard)}]" if t.guard is not None else ""
        lines.append(f'  {_dot_id("t", t.id)} [shape=box, label="{t.name}\\n{t.kind}{guard}"];')
    for a in net.arcs:
        style = {"control": "dashed", "rw": "dotted", "exec": "solid"}[a.kind]
        if a.repair:
            style = "bold"
        lab = show_expr(a.expr) if a.kind != "exec" and net.places[a.place].is_value else ""
        src, dst = (_dot_id("p", a.place), _dot_id("t", a.trans))
        if not a.inbound:
            src, dst = dst, src
        lines.append(f'  {src} -> {dst} [style={style}, label="{lab}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def net_to_json(net):
    return {
        "places": [{"id": p.id, "name": p.name, "roles": p.role_names(), "color": p.color,
                    "init": list(p.init) if isinstance(p.init, tuple) else p.init}
                   for p in net.places],
        "transitions": [{"id": t.id, "name": t.name, "kind": t.kind, "thread": t.thread,
                         "label": t.label, "guard": show_expr(t.guard)}
                        for t in net.transitions],
        "arcs": [{"place": net.places[a.place].name, "transition": net.transitions[a.trans].name,
                  "direction": "in" if a.inbound else "out", "kind": a.kind,
                  "expr": show_expr(a.expr), "repair": a.repair}
                 for a in net.arcs],
    }
