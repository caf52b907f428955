"""Program -> PDNet translation.

Every thread and every call site gets its own copy of the callee's sub-net
(an *instance*).  Thread instances are numbered "1", "2", ...; the callee of
call site ``k`` inside instance ``I`` is instance ``I.k``.  Function locals
are program variables keyed ``"<instance>/<name>"``.

Transition naming follows statement labels: ``t<k>`` for the statement at
label ``k`` (the true branch for if/while), ``t<k>'`` for the false branch,
``t<k>w1..w3`` for the three wait steps, ``t<k>r`` for the return transition
of a call.  Enter and exit transitions are named after the function's entry
and exit labels.  Places are ``f<k>`` (execution), ``c<k>`` (control),
``v_<var>`` (variables), ``m_<mutex>``, ``u_<cond>`` and ``r<exit>`` (the
place a callee's exit transition hands control back through).  Entry and
exit places ``c<entry>``/``c<exit>`` carry both the control and the
execution role; a thread's exit transition has an empty postset.  Names of functions
instantiated more than once get an ``@<instance>`` suffix.

Control arcs are derived from control dependence on the statement-level
control-flow graph of each instance: a statement depends on the branch
transition whose outcome decides whether it runs next, and every top-level
statement depends on the enter transition.
"""
from __future__ import annotations

from .net import (CONTROL, EXECUTION, INT, THREAD, TMS, UNIT, VARIABLE, Arc, HasWaiting,
                  Member, Notify, PDNet, Place, Transition, UNIT_TOKEN, WaitAdd, WaitRemove)
from .program import (RET_VAR, Assign, Call, Const, ErrorMark, If, Jump, Lock, Signal, Unary,
                      Unlock, Var, Wait, While, all_instances, callee_instance, local_key,
                      rename_expr, walk)


class TranslationError(Exception):
    pass


class TranslationMap:
    """Links between program entities and net nodes."""

    def __init__(self):
        self.stmt_transitions = {}   # (instance, label) -> [tid]
        self.var_place = {}          # variable key -> pid
        self.trans_origin = {}       # tid -> (instance, label)
        self.threads = {}            # thread no. -> (enter tid, exit tid)
        self.instances = {}          # instance -> dict(func, thread, enter, exit, entry_place, return_place)
        self.call_return = {}        # call tid -> (return tid, callee instance)
        self.control_place = {}      # tid -> control place consumed by the statement node
        self.exec_place = {}         # tid -> execution place consumed
        self.global_vars = set()
        self.local_vars = set()
        self.cfg = {}                # instance -> list of (src node, dst node, tid)
        self.mutex_place = {}
        self.cond_place = {}
        self.errors = {}             # error name -> [tid]

    def is_global(self, net, pid):
        return net.places[pid].scope == "global"

    def is_local(self, net, pid):
        return net.places[pid].scope == "local"

    def transitions_for(self, instance, label):
        return self.stmt_transitions.get((instance, label), [])


def returns_value(func):
    return any(isinstance(s, Jump) and s.kind == "return" and s.expr is not None
               for s in walk(func.body))


def instance_local_names(func):
    names = [p.name for p in func.params]
    if returns_value(func):
        names.append(RET_VAR)
    return names


class _Builder:
    def __init__(self, program, lost_signals=False):
        self.program = program
        self.lost_signals = lost_signals
        self.places, self.trans, self.arcs = [], [], []
        self.tmap = TranslationMap()
        self.deferred_exits = []
        self._entry_places = {}
        self._return_places = {}
        counts = {}
        for _inst, fname, _th in all_instances(program):
            counts[fname] = counts.get(fname, 0) + 1
        self.multi = {f for f, c in counts.items() if c > 1}

    # -- node helpers
    def place(self, name, roles, color=UNIT, lo=None, hi=None, init=0, var=None, scope=None,
              thread=None, sync=None):
        p = Place(len(self.places), name, roles, color, lo, hi, init, var, scope, thread, sync)
        self.places.append(p)
        return p.id

    def transition(self, name, kind, guard=None, thread=None, instance=None, label=None,
                   error=None, sync=None):
        t = Transition(len(self.trans), name, kind, guard, thread, instance, label, error, sync)
        self.trans.append(t)
        if label is not None and instance is not None:
            self.tmap.stmt_transitions.setdefault((instance, label), []).append(t.id)
            self.tmap.trans_origin[t.id] = (instance, label)
        return t.id

    def arc_in(self, p, t, kind, expr=UNIT_TOKEN, flow=False, tag=None):
        self.arcs.append(Arc(p, t, True, kind, expr, flow, tag))

    def arc_out(self, t, p, kind, expr=UNIT_TOKEN, flow=False, tag=None):
        self.arcs.append(Arc(p, t, False, kind, expr, flow, tag))

    def rw(self, t, reads, writes=None):
        """Read-write arcs: read keys get x/x, written keys get x/expr."""
        writes = writes or {}
        keys = set(reads) | set(writes)
        for key in sorted(keys, key=lambda k: self.tmap.var_place[k]):
            p = self.tmap.var_place[key]
            self.arc_in(p, t, "rw", Var(key))
            self.arc_out(t, p, "rw", writes.get(key, Var(key)))

    # -- shared places
    def globals_and_sync(self):
        for g in self.program.globals:
            pid = self.place(f"v_{g.name}", VARIABLE, INT, g.lo, g.hi, g.init, var=g.name,
                             scope="global")
            self.tmap.var_place[g.name] = pid
            self.tmap.global_vars.add(g.name)
        for m in self.program.mutexes:
            self.tmap.mutex_place[m] = self.place(f"m_{m}", CONTROL | EXECUTION, THREAD, init=0,
                                                  sync="mutex")
        for c in self.program.condvars:
            self.tmap.cond_place[c] = self.place(f"u_{c}", CONTROL | EXECUTION, TMS, init=(),
                                                 sync="cond")

    def suffix(self, func, inst):
        return f"@{inst}" if func.name in self.multi else ""

    def entry_place(self, inst, func, thread, initial):
        if inst not in self._entry_places:
            sfx = self.suffix(func, inst)
            self._entry_places[inst] = self.place(f"c{func.entry_label}{sfx}", CONTROL | EXECUTION,
                                                  init=1 if initial else 0, thread=thread)
        return self._entry_places[inst]

    def return_place(self, inst, func, thread):
        if inst not in self._return_places:
            sfx = self.suffix(func, inst)
            self._return_places[inst] = self.place(f"r{func.exit_label}{sfx}", CONTROL | EXECUTION,
                                                   thread=thread)
        return self._return_places[inst]

    # -- one function instance
    def instance(self, inst, func, thread, top_level=True, with_frame=True):
        sfx = self.suffix(func, inst)
        rename = {}
        for pdecl in func.params:
            key = local_key(inst, pdecl.name)
            rename[pdecl.name] = key
            self.local_place(key, thread, pdecl)
        if returns_value(func):
            key = local_key(inst, RET_VAR)
            rename[RET_VAR] = key
            self.local_place(key, thread)

        ctx = _InstanceCtx(inst, func, thread, rename, sfx)
        # execution and control places of every statement node, in lexical order
        if with_frame:
            ctx.entry = self.entry_place(inst, func, thread, top_level)
        for s in walk(func.body):
            ctx.f[s.label] = self.place(f"f{s.label}{sfx}", EXECUTION, thread=thread)
            ctx.node_of_place[ctx.f[s.label]] = s.label
            ctx.c[s.label] = self.place(f"c{s.label}{sfx}", CONTROL, thread=thread)
            if isinstance(s, Wait):
                ctx.extra[s.label] = (
                    self.place(f"c{s.label}w2{sfx}", CONTROL | EXECUTION, thread=thread),
                    self.place(f"c{s.label}w3{sfx}", CONTROL | EXECUTION, thread=thread))
        if with_frame:
            # like the entry place, the exit place is both control and execution
            ctx.f_exit = ctx.c_exit = self.place(f"c{func.exit_label}{sfx}", CONTROL | EXECUTION,
                                                 thread=thread)
            if not top_level:
                ctx.ret_place = self.return_place(inst, func, thread)
            exit_node = func.exit_label
        else:
            ctx.f_exit = self.place("f_end", EXECUTION, thread=thread)
            exit_node = "end"
        ctx.node_of_place[ctx.f_exit] = exit_node
        ctx.c[exit_node] = None

        first = ctx.f[func.body[0].label] if func.body else ctx.f_exit
        if with_frame:
            tb = self.transition(f"t{func.entry_label}{sfx}", "enter", thread=thread, instance=inst,
                                 label=func.entry_label)
            self.arc_in(ctx.entry, tb, "control", flow=True)
            self.arc_out(tb, first, "exec", flow=True)
            ctx.enter = tb
            self.tmap.control_place[tb] = ctx.entry
            self.tmap.exec_place[tb] = ctx.entry
            ctx.edges.append(("entry", ctx.node_of_place[first], tb))
        self.block(ctx, func.body, ctx.f_exit, None)

        info = dict(func=func.name, thread=thread, enter=ctx.enter, exit=None,
                    entry_place=ctx.entry, return_place=ctx.ret_place, f_exit=ctx.f_exit)
        self.tmap.instances[inst] = info
        self.tmap.cfg[inst] = ctx.edges
        if with_frame:
            self.deferred_exits.append((ctx, func))
        else:
            # no enter transition: the block starts marked
            self.places[first].init = 1
        return ctx

    def local_place(self, key, thread, decl=None):
        """Variable place of an instance local, created on first use."""
        if key not in self.tmap.var_place:
            if decl is None:
                lo, hi = self.program.domain
                init = 0 if lo <= 0 <= hi else lo
            else:
                lo, hi, init = decl.lo, decl.hi, decl.init
            self.tmap.var_place[key] = self.place(f"v_{key}", VARIABLE, INT, lo, hi, init, var=key,
                                                  scope="local", thread=thread)
            self.tmap.local_vars.add(key)
        return self.tmap.var_place[key]

    def block(self, ctx, stmts, cont, loop):
        for i, s in enumerate(stmts):
            nxt = ctx.f[stmts[i + 1].label] if i + 1 < len(stmts) else cont
            self.stmt(ctx, s, nxt, loop)

    def _start(self, t, ctx, k):
        self.arc_in(ctx.f[k], t, "exec", flow=True)
        self.arc_in(ctx.c[k], t, "control")
        self.tmap.control_place[t] = ctx.c[k]
        self.tmap.exec_place[t] = ctx.f[k]

    def _edge(self, ctx, k, place, t):
        ctx.edges.append((k, ctx.node_of_place[place], t))

    def stmt(self, ctx, s, nxt, loop):
        k, th, inst, sfx = s.label, ctx.thread, ctx.inst, ctx.sfx
        ren = ctx.rename
        name = f"t{k}{sfx}"

        def key(v):
            return ren.get(v, v)

        if isinstance(s, Assign):
            t = self.transition(name, "assign", thread=th, instance=inst, label=k)
            self._start(t, ctx, k)
            e = rename_expr(s.expr, ren)
            self.rw(t, e.vars(), {key(s.var): e})
            self.arc_out(t, nxt, "exec", flow=True)
            self._edge(ctx, k, nxt, t)
        elif isinstance(s, ErrorMark):
            t = self.transition(name, "error", thread=th, instance=inst, label=k, error=s.name)
            self.tmap.errors.setdefault(s.name, []).append(t)
            self._start(t, ctx, k)
            self.arc_out(t, nxt, "exec", flow=True)
            self._edge(ctx, k, nxt, t)
        elif isinstance(s, Jump):
            if s.kind == "return":
                target = ctx.f_exit
            elif loop is None:
                raise TranslationError(f"{s.kind} outside a loop at label {k}")
            else:
                target = loop[0] if s.kind == "break" else loop[1]
            t = self.transition(name, "jump", thread=th, instance=inst, label=k)
            self._start(t, ctx, k)
            if s.expr is not None:
                e = rename_expr(s.expr, ren)
                self.rw(t, e.vars(), {key(RET_VAR): e})
            self.arc_out(t, target, "exec", flow=True)
            self._edge(ctx, k, target, t)
        elif isinstance(s, If):
            cond = rename_expr(s.cond, ren)
            t1 = self.transition(name, "branch", guard=cond, thread=th, instance=inst, label=k)
            t2 = self.transition(f"t{k}'{sfx}", "branch", guard=Unary("!", cond), thread=th,
                                 instance=inst, label=k)
            for t, blk in ((t1, s.then), (t2, s.orelse)):
                self._start(t, ctx, k)
                self.rw(t, cond.vars())
                dst = ctx.f[blk[0].label] if blk else nxt
                self.arc_out(t, dst, "exec", flow=True)
                self._edge(ctx, k, dst, t)
            self.block(ctx, s.then, nxt, loop)
            self.block(ctx, s.orelse, nxt, loop)
        elif isinstance(s, While):
            cond = rename_expr(s.cond, ren)
            t1 = self.transition(name, "branch", guard=cond, thread=th, instance=inst, label=k)
            t2 = self.transition(f"t{k}'{sfx}", "branch", guard=Unary("!", cond), thread=th,
                                 instance=inst, label=k)
            header = ctx.f[k]
            body_start = ctx.f[s.body[0].label] if s.body else header
            for t, dst in ((t1, body_start), (t2, nxt)):
                self._start(t, ctx, k)
                self.rw(t, cond.vars())
                self.arc_out(t, dst, "exec", flow=True)
                self._edge(ctx, k, dst, t)
            self.block(ctx, s.body, header, (nxt, header))
        elif isinstance(s, Call):
            callee = self.program.function(s.callee)
            cinst = callee_instance(inst, s)
            tj = self.transition(name, "call", thread=th, instance=inst, label=k)
            self._start(tj, ctx, k)
            args = [rename_expr(a, ren) for a in s.args]
            reads = set()
            for a in args:
                reads |= a.vars()
            writes = {}
            for pdecl, a in zip(callee.params, args):
                ckey = local_key(cinst, pdecl.name)
                self.local_place(ckey, th, pdecl)
                writes[ckey] = a
            if returns_value(callee):
                rkey = local_key(cinst, RET_VAR)
                self.local_place(rkey, th)
            self.rw(tj, reads, writes)
            centry = self.entry_place(cinst, callee, th, False)
            self.arc_out(tj, centry, "control", flow=True, tag="enter")
            tk = self.transition(f"t{k}r{sfx}", "return", thread=th, instance=inst, label=k)
            cret = self.return_place(cinst, callee, th)
            self.arc_in(cret, tk, "control", flow=True, tag="exit")
            self.tmap.control_place[tk] = cret
            self.tmap.exec_place[tk] = cret
            if s.target is not None:
                rkey = local_key(cinst, RET_VAR)
                self.rw(tk, {rkey}, {key(s.target): Var(rkey)})
            self.arc_out(tk, nxt, "exec", flow=True)
            self.tmap.call_return[tj] = (tk, cinst)
            self._edge(ctx, k, nxt, tk)
        elif isinstance(s, (Lock, Unlock)):
            m = self.tmap.mutex_place[s.mutex]
            kind = "lock" if isinstance(s, Lock) else "unlock"
            t = self.transition(name, kind, thread=th, instance=inst, label=k, sync=s.mutex)
            self._start(t, ctx, k)
            before, after = (0, th) if kind == "lock" else (th, 0)
            self.arc_in(m, t, "control", Const(before))
            self.arc_out(t, m, "control", Const(after))
            self.arc_out(t, nxt, "exec", flow=True)
            self._edge(ctx, k, nxt, t)
        elif isinstance(s, Signal):
            u = self.tmap.cond_place[s.cond]
            uv = f"u_{s.cond}"
            t = self.transition(name, "signal", guard=HasWaiting(uv), thread=th, instance=inst,
                                label=k, sync=s.cond)
            self._start(t, ctx, k)
            self.arc_in(u, t, "control", Var(uv))
            self.arc_out(t, u, "control", Notify(uv))
            self.arc_out(t, nxt, "exec", flow=True)
            self._edge(ctx, k, nxt, t)
            if self.lost_signals:
                t0 = self.transition(f"t{k}n{sfx}", "signal", guard=HasWaiting(uv, negate=True),
                                     thread=th, instance=inst, label=k, sync=s.cond)
                self._start(t0, ctx, k)
                self.arc_in(u, t0, "control", Var(uv))
                self.arc_out(t0, u, "control", Var(uv))
                self.arc_out(t0, nxt, "exec", flow=True)
                self._edge(ctx, k, nxt, t0)
        elif isinstance(s, Wait):
            m = self.tmap.mutex_place[s.mutex]
            u = self.tmap.cond_place[s.cond]
            uv = f"u_{s.cond}"
            w2, w3 = ctx.extra[k]
            t1 = self.transition(f"{name}w1", "wait1", guard=Member(uv, th, negate=True),
                                 thread=th, instance=inst, label=k, sync=s.cond)
            self._start(t1, ctx, k)
            self.arc_in(m, t1, "control", Const(th))
            self.arc_out(t1, m, "control", Const(0))
            self.arc_in(u, t1, "control", Var(uv))
            self.arc_out(t1, u, "control", WaitAdd(uv, th))
            self.arc_out(t1, w2, "control", flow=True)
            t2 = self.transition(f"{name}w2", "wait2", guard=Member(uv, -th), thread=th,
                                 instance=inst, label=k, sync=s.cond)
            self.arc_in(w2, t2, "control", flow=True)
            self.arc_in(m, t2, "control", Const(0))
            self.arc_out(t2, m, "control", Const(0))
            self.arc_in(u, t2, "control", Var(uv))
            self.arc_out(t2, u, "control", WaitRemove(uv, -th))
            self.arc_out(t2, w3, "control", flow=True)
            self.tmap.control_place[t2] = w2
            self.tmap.exec_place[t2] = w2
            t3 = self.transition(f"{name}w3", "wait3", thread=th, instance=inst, label=k,
                                 sync=s.cond)
            self.arc_in(w3, t3, "control", flow=True)
            self.arc_in(m, t3, "control", Const(0))
            self.arc_out(t3, m, "control", Const(th))
            self.arc_out(t3, nxt, "exec", flow=True)
            self.tmap.control_place[t3] = w3
            self.tmap.exec_place[t3] = w3
            self._edge(ctx, k, nxt, t3)
        else:
            raise TranslationError(f"unsupported statement {s!r}")

    def finish_exits(self):
        for ctx, func in self.deferred_exits:
            te = self.transition(f"t{func.exit_label}{ctx.sfx}", "exit", thread=ctx.thread,
                                 instance=ctx.inst, label=func.exit_label)
            self.arc_in(ctx.c_exit, te, "control", flow=True)
            if ctx.ret_place is not None:
                self.arc_out(te, ctx.ret_place, "control", flow=True)
            self.tmap.control_place[te] = ctx.c_exit
            self.tmap.exec_place[te] = ctx.f_exit
            ctx.exit = te
            self.tmap.instances[ctx.inst]["exit"] = te
        for inst, info in self.tmap.instances.items():
            if "." not in inst and info["enter"] is not None:
                self.tmap.threads[int(inst)] = (info["enter"], info["exit"])

    def control_arcs(self, ctx):
        """Materialise control dependence of one instance as control arcs."""
        edges = ctx.edges
        nodes = set()
        succ = {}
        for a, b, _t in edges:
            nodes.update((a, b))
            succ.setdefault(a, set()).add(b)
        exit_node = ctx.node_of_place[ctx.f_exit]
        nodes.add(exit_node)
        nodes.update(ctx.f)
        pdom = postdominators(nodes, succ, exit_node)
        seen = set()

        def add(t, node):
            place = ctx.c.get(node)
            if place is None or (t, place) in seen:
                return
            seen.add((t, place))
            self.arc_out(t, place, "control")

        for a, b, t in edges:
            if a == "entry":
                for s in sorted(pdom[b] - {exit_node}, key=_node_order):
                    add(t, s)
                add(t, exit_node)
            elif self.trans[t].kind == "branch":
                strict = pdom[a] - {a}
                for s in sorted(pdom[b] - strict, key=_node_order):
                    add(t, s)


def _node_order(n):
    return (1, 0) if n == "end" else (0, n)


def postdominators(nodes, succ, exit_node):
    """Postdominator sets (reflexive) by the classic iterative data-flow scheme."""
    allnodes = frozenset(nodes)
    pdom = {n: set(allnodes) for n in nodes}
    pdom[exit_node] = {exit_node}
    changed = True
    order = sorted((n for n in nodes if n != exit_node), key=lambda n: (isinstance(n, str), str(n)))
    while changed:
        changed = False
        for n in order:
            ss = succ.get(n, ())
            if ss:
                inter = set(allnodes)
                for s in ss:
                    inter &= pdom[s]
            else:
                inter = set()
            new = inter | {n}
            if new != pdom[n]:
                pdom[n] = new
                changed = True
    return pdom


class _InstanceCtx:
    def __init__(self, inst, func, thread, rename, sfx):
        self.inst, self.func, self.thread, self.rename, self.sfx = inst, func, thread, rename, sfx
        self.f, self.c, self.extra = {}, {}, {}
        self.node_of_place = {}
        self.edges = []
        self.entry = self.f_exit = self.c_exit = self.ret_place = None
        self.enter = self.exit = None


def translate(program, lost_signals=False):
    """Translate a validated program.  Returns (net, TranslationMap)."""
    b = _Builder(program, lost_signals)
    b.globals_and_sync()
    ctxs = []
    for inst, fname, thread in all_instances(program):
        func = program.function(fname)
        ctxs.append(b.instance(inst, func, thread, top_level="." not in inst))
    b.finish_exits()
    for ctx in ctxs:
        b.control_arcs(ctx)
    net = PDNet(b.places, b.trans, b.arcs, meta={"kind": "program"})
    net.tmap = b.tmap
    return net, b.tmap


def translate_block(program, func_name=None):
    """Translate the body of one function as a bare fragment.

    No enter/exit transitions are generated: the first statement's execution
    place and the control places of its top-level statements start marked,
    and control leaves the fragment through an unconsumed place ``f_end``.
    Used for small hand-sized examples.
    """
    fname = func_name or program.threads[0]
    func = program.function(fname)
    b = _Builder(program)
    b.globals_and_sync()
    ctx = b.instance("1", func, 1, top_level=True, with_frame=False)
    # control dependence relative to a virtual entry node
    if func.body:
        ctx.edges.insert(0, ("entry", func.body[0].label, None))
    _fragment_control(b, ctx)
    net = PDNet(b.places, b.trans, b.arcs, meta={"kind": "fragment"})
    net.tmap = b.tmap
    return net, b.tmap


def _fragment_control(b, ctx):
    edges = [e for e in ctx.edges if e[2] is not None]
    nodes = set(ctx.f) | {"end"}
    succ = {}
    for a, c, _t in edges:
        succ.setdefault(a, set()).add(c)
    pdom = postdominators(nodes, succ, "end")
    seen = set()
    for a, c, t in edges:
        if b.trans[t].kind != "branch":
            continue
        strict = pdom[a] - {a}
        for s in sorted(pdom[c] - strict, key=_node_order):
            place = ctx.c.get(s)
            if place is not None and (t, place) not in seen:
                seen.add((t, place))
                b.arc_out(t, place, "control")
    if ctx.func.body:
        for s in pdom[ctx.func.body[0].label]:
            if s != "end":
                b.places[ctx.c[s]].init = 1
