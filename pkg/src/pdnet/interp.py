"""Reference interpreter: the labelled transition system of a program.

This is the oracle the net translation is tested against, so it shares no
control-flow code with :mod:`pdnet.translate`; the next location of every
statement is found by walking the syntax tree.

A configuration holds, per thread, a stack of frames ``(instance, label,
phase)``.  ``phase`` is 0 except for a call waiting on its callee (1) and for
the three steps of ``wait`` (0, 1, 2).  Memory covers globals and instance
locals in a fixed key order; ``r`` maps each mutex to its holder (0 = free)
and ``u`` each condition variable to the sorted tuple of signed thread ids.
"""
from __future__ import annotations

from dataclasses import dataclass

from .program import (RET_VAR, Assign, Call, DomainOverflow, ErrorMark, If, Jump, Lock, Signal,
                      Unlock, Wait, While, all_instances, callee_instance, evaluate, local_key,
                      walk)


@dataclass(frozen=True)
class Config:
    h: tuple   # per thread: tuple of (instance, label, phase) frames, innermost last
    m: tuple   # variable values, ordered as Interpreter.keys
    r: tuple   # mutex holders, ordered as program.mutexes
    u: tuple   # waiting sets, ordered as program.condvars


@dataclass
class ReachResult:
    configs: set
    truncated: bool


class _FuncInfo:
    """Positions of statements inside one function body."""

    def __init__(self, func):
        self.func = func
        self.stmt = {}
        self.pos = {}  # label -> (block, index, parent statement or None)

        def visit(block, parent):
            for i, s in enumerate(block):
                self.stmt[s.label] = s
                self.pos[s.label] = (block, i, parent)
                if isinstance(s, If):
                    visit(s.then, s)
                    visit(s.orelse, s)
                elif isinstance(s, While):
                    visit(s.body, s)

        visit(func.body, None)

    def first(self, block, otherwise):
        return block[0].label if block else otherwise

    def after(self, label):
        """Location reached when the statement at ``label`` completes normally."""
        block, i, parent = self.pos[label]
        if i + 1 < len(block):
            return block[i + 1].label
        if parent is None:
            return self.func.exit_label
        if isinstance(parent, While):
            return parent.label
        return self.after(parent.label)

    def loop_of(self, label):
        _b, _i, parent = self.pos[label]
        while parent is not None and not isinstance(parent, While):
            parent = self.pos[parent.label][2]
        return parent


class Interpreter:
    def __init__(self, program, lost_signals=False):
        self.program = program
        self.lost_signals = lost_signals
        self.info = {f.name: _FuncInfo(f) for f in program.functions}
        self.inst_func = {}
        keys = [g.name for g in program.globals]
        self.domains = {g.name: (g.lo, g.hi) for g in program.globals}
        self.init_values = [g.init for g in program.globals]
        for inst, fname, _th in all_instances(program):
            func = program.function(fname)
            self.inst_func[inst] = func
            locals_ = [(p.name, p.lo, p.hi, p.init) for p in func.params]
            if _returns_value(func):
                lo, hi = program.domain
                locals_.append((RET_VAR, lo, hi, 0 if lo <= 0 <= hi else lo))
            for name, lo, hi, init in locals_:
                key = local_key(inst, name)
                keys.append(key)
                self.domains[key] = (lo, hi)
                self.init_values.append(init)
        self.keys = tuple(keys)
        self.index = {k: i for i, k in enumerate(self.keys)}
        self.mutex_index = {m: i for i, m in enumerate(program.mutexes)}
        self.cond_index = {c: i for i, c in enumerate(program.condvars)}

    # -- configurations
    def initial(self):
        h = tuple(((str(i + 1), self.program.function(name).entry_label, 0),)
                  for i, name in enumerate(self.program.threads))
        return Config(h, tuple(self.init_values), (0,) * len(self.program.mutexes),
                      ((),) * len(self.program.condvars))

    def memory(self, cfg):
        return dict(zip(self.keys, cfg.m))

    def locations(self, cfg):
        """Thread number -> label of its innermost frame."""
        return {i + 1: stack[-1][1] for i, stack in enumerate(cfg.h)}

    def named_locations(self, cfg):
        return {name: cfg.h[i][-1][1] for i, name in enumerate(self.program.threads)}

    def mutexes(self, cfg):
        return dict(zip(self.program.mutexes, cfg.r))

    def condvars(self, cfg):
        return {c: set(v) for c, v in zip(self.program.condvars, cfg.u)}

    # -- helpers
    def _env(self, cfg, inst):
        env = dict(zip(self.keys, cfg.m))
        prefix = inst + "/"
        for k, v in zip(self.keys, cfg.m):
            if k.startswith(prefix):
                env[k[len(prefix):]] = v
        return env

    def _key(self, inst, name):
        lk = local_key(inst, name)
        return lk if lk in self.index else name

    def _write(self, m, key, value):
        lo, hi = self.domains[key]
        if not lo <= value <= hi:
            raise DomainOverflow(f"{key} := {value} outside [{lo},{hi}]")
        m = list(m)
        m[self.index[key]] = value
        return tuple(m)

    @staticmethod
    def _set_top(h, i, frame):
        stack = h[i][:-1] + (frame,)
        return h[:i] + (stack,) + h[i + 1:]

    # -- one step of one thread
    def thread_steps(self, cfg, i):
        """Steps of thread index ``i`` (0-based) as (tag, config) pairs."""
        stack = cfg.h[i]
        inst, label, phase = stack[-1]
        func = self.inst_func[inst]
        info = self.info[func.name]
        tid = i + 1
        out = []

        def move(to, **kw):
            h = self._set_top(cfg.h, i, (inst, to, 0))
            return Config(h, kw.get("m", cfg.m), kw.get("r", cfg.r), kw.get("u", cfg.u))

        if label == func.entry_label:
            return [("jum", move(info.first(func.body, func.exit_label)))]
        if label == func.exit_label:
            return [("ret", move(func.end_label))]
        if label == func.end_label:
            if len(stack) == 1:
                return []
            cinst = inst
            pinst, plabel, _ph = stack[-2]
            pfunc = self.inst_func[pinst]
            call = self.info[pfunc.name].stmt[plabel]
            m = cfg.m
            if call.target is not None:
                rv = cfg.m[self.index[local_key(cinst, RET_VAR)]]
                m = self._write(m, self._key(pinst, call.target), rv)
            nxt = self.info[pfunc.name].after(plabel)
            h = cfg.h[:i] + (stack[:-2] + ((pinst, nxt, 0),),) + cfg.h[i + 1:]
            return [("rets", Config(h, m, cfg.r, cfg.u))]

        s = info.stmt[label]
        if isinstance(s, Assign):
            env = self._env(cfg, inst)
            val = evaluate(s.expr, env)
            m = self._write(cfg.m, self._key(inst, s.var), val)
            out.append(("asg", move(info.after(label), m=m)))
        elif isinstance(s, ErrorMark):
            out.append(("err", move(info.after(label))))
        elif isinstance(s, Jump):
            m = cfg.m
            if s.kind == "return":
                if s.expr is not None:
                    val = evaluate(s.expr, self._env(cfg, inst))
                    m = self._write(m, local_key(inst, RET_VAR), val)
                out.append(("ret", move(func.exit_label, m=m)))
            else:
                loop = info.loop_of(label)
                to = info.after(loop.label) if s.kind == "break" else loop.label
                out.append(("jum", move(to)))
        elif isinstance(s, If):
            if evaluate(s.cond, self._env(cfg, inst)):
                out.append(("tcd", move(info.first(s.then, info.after(label)))))
            else:
                out.append(("fcd", move(info.first(s.orelse, info.after(label)))))
        elif isinstance(s, While):
            if evaluate(s.cond, self._env(cfg, inst)):
                out.append(("tcd", move(info.first(s.body, label))))
            else:
                out.append(("fcd", move(info.after(label))))
        elif isinstance(s, Call):
            callee = self.program.function(s.callee)
            cinst = callee_instance(inst, s)
            env = self._env(cfg, inst)
            m = cfg.m
            for p, a in zip(callee.params, s.args):
                m = self._write(m, local_key(cinst, p.name), evaluate(a, env))
            stack2 = stack[:-1] + ((inst, label, 1), (cinst, callee.entry_label, 0))
            h = cfg.h[:i] + (stack2,) + cfg.h[i + 1:]
            out.append(("call", Config(h, m, cfg.r, cfg.u)))
        elif isinstance(s, Lock):
            k = self.mutex_index[s.mutex]
            if cfg.r[k] == 0:
                out.append(("acq", move(info.after(label), r=_put(cfg.r, k, tid))))
        elif isinstance(s, Unlock):
            k = self.mutex_index[s.mutex]
            if cfg.r[k] == tid:
                out.append(("rel", move(info.after(label), r=_put(cfg.r, k, 0))))
        elif isinstance(s, Signal):
            c = self.cond_index[s.cond]
            waiting = [j for j in cfg.u[c] if j > 0]
            if waiting:
                j = min(waiting)
                u = tuple(sorted(set(cfg.u[c]) - {j} | {-j}))
                out.append(("sig", move(info.after(label), u=_put(cfg.u, c, u))))
            elif self.lost_signals:
                out.append(("sig", move(info.after(label))))
        elif isinstance(s, Wait):
            k = self.mutex_index[s.mutex]
            c = self.cond_index[s.cond]
            cur = cfg.u[c]
            if phase == 0:
                if cfg.r[k] == tid and tid not in cur:
                    u = tuple(sorted(set(cur) | {tid}))
                    h = self._set_top(cfg.h, i, (inst, label, 1))
                    out.append(("wa1", Config(h, cfg.m, _put(cfg.r, k, 0), _put(cfg.u, c, u))))
            elif phase == 1:
                if cfg.r[k] == 0 and -tid in cur:
                    u = tuple(sorted(set(cur) - {-tid}))
                    h = self._set_top(cfg.h, i, (inst, label, 2))
                    out.append(("wa2", Config(h, cfg.m, cfg.r, _put(cfg.u, c, u))))
            else:
                if cfg.r[k] == 0:
                    out.append(("wa3", move(info.after(label), r=_put(cfg.r, k, tid))))
        return out

    def successors(self, cfg):
        """All (tag, thread number, config) steps from ``cfg``."""
        out = []
        for i in range(len(cfg.h)):
            for tag, c2 in self.thread_steps(cfg, i):
                out.append((tag, i + 1, c2))
        return out

    def reachable(self, bound=None):
        init = self.initial()
        seen = {init}
        stack = [init]
        while stack:
            c = stack.pop()
            for _tag, _i, c2 in self.successors(c):
                if c2 not in seen:
                    if bound is not None and len(seen) >= bound:
                        return ReachResult(seen, True)
                    seen.add(c2)
                    stack.append(c2)
        return ReachResult(seen, False)


def _put(t, k, v):
    return t[:k] + (v,) + t[k + 1:]


def _returns_value(func):
    return any(isinstance(s, Jump) and s.kind == "return" and s.expr is not None
               for s in walk(func.body))


def initial_config(program):
    return Interpreter(program).initial()


def successors(program, config, lost_signals=False):
    return Interpreter(program, lost_signals).successors(config)


def reachable_configs(program, bound=None, lost_signals=False):
    return Interpreter(program, lost_signals).reachable(bound)
