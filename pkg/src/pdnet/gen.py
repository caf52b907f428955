"""Random small programs and formulas for property tests and oracles.

Programs use two threads over a few globals with domain [0,3].  Candidates
whose reference run overflows a domain or exceeds a state bound are rejected,
so every returned program has a small finite state space.
"""
from __future__ import annotations

import random

from . import ltl
from .interp import Interpreter
from .program import DomainOverflow, parse

RELS = ("==", "!=", "<", "<=", ">", ">=")


class _ProgramGen:
    def __init__(self, rng, n_globals, use_mutex, use_cond, use_fn):
        self.rng = rng
        self.vars = [f"g{i}" for i in range(n_globals)]
        self.use_mutex = use_mutex
        self.use_cond = use_cond
        self.use_fn = use_fn

    def atom_expr(self):
        r = self.rng
        if r.random() < 0.5:
            return str(r.randint(0, 3))
        return r.choice(self.vars)

    def expr(self):
        r = self.rng
        k = r.random()
        if k < 0.4:
            return self.atom_expr()
        if k < 0.7:
            return f"{r.choice(self.vars)} + 1"
        if k < 0.85:
            return f"3 - {r.choice(self.vars)}"
        return f"{r.choice(self.vars)} - {self.atom_expr()}"

    def cond(self):
        r = self.rng
        c = f"{r.choice(self.vars)} {r.choice(RELS)} {self.atom_expr()}"
        if r.random() < 0.2:
            c = f"{c} && {r.choice(self.vars)} {r.choice(RELS)} {r.randint(0, 3)}"
        return c

    def block(self, n, depth, in_loop=False, locked=False):
        return [s for _ in range(n) for s in self.stmt(depth, in_loop, locked)]

    def stmt(self, depth, in_loop, locked):
        r = self.rng
        k = r.random()
        if depth > 0 and k < 0.15:
            then = self.block(r.randint(1, 2), depth - 1, in_loop, locked)
            out = [f"if ({self.cond()}) {{"] + then
            if r.random() < 0.5:
                out += ["} else {"] + self.block(r.randint(1, 2), depth - 1, in_loop, locked)
            return out + ["}"]
        if depth > 0 and k < 0.25:
            # a counter loop guarantees progress of the loop variable
            v = r.choice(self.vars)
            body = self.block(r.randint(0, 1), depth - 1, True, locked)
            if r.random() < 0.2:
                body.append(r.choice(["break;", "continue;"]) if body else "break;")
            return [f"while ({v} < {r.randint(1, 3)}) {{"] + body + [f"{v} := {v} + 1;", "}"]
        if k < 0.32:
            return [f"error e{r.randint(0, 1)};"]
        if self.use_mutex and not locked and depth > 0 and k < 0.42:
            return ["lock m;"] + self.block(r.randint(1, 2), depth - 1, in_loop, True) \
                + ["unlock m;"]
        if self.use_cond and k < 0.47:
            if locked:
                return [f"if ({self.cond()}) {{", "wait c m;", "}"]
            return ["signal c;"]
        if self.use_fn and k < 0.55:
            return [f"call f({self.atom_expr()}) -> {r.choice(self.vars)};"]
        return [f"{r.choice(self.vars)} := {self.expr()};"]

    def text(self, stmts_per_thread=3, depth=2):
        r = self.rng
        lines = ["global " + ", ".join(f"{v} in [0,3] = {r.randint(0, 2)}" for v in self.vars)
                 + ";"]
        if self.use_mutex:
            lines.append("mutex m;")
        if self.use_cond:
            lines.append("cond c;")
        if self.use_fn:
            lines += ["fn f(a in [0,3]) {", "if (a > 1) {", "return a - 1;", "}",
                      f"{r.choice(self.vars)} := a;", "return a;", "}"]
        for name in ("p", "q"):
            body = self.block(r.randint(1, stmts_per_thread), depth)
            lines += [f"thread {name} {{"] + body + ["}"]
        return "\n".join(lines) + "\n"


def random_program(rng, max_configs=3000, tries=200, **features):
    """A parsed program plus its source text, sampled until it is bounded."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    for _ in range(tries):
        opts = dict(n_globals=rng.randint(1, 3), use_mutex=rng.random() < 0.4,
                    use_cond=rng.random() < 0.15, use_fn=rng.random() < 0.25)
        opts.update(features)
        if opts["use_cond"]:
            opts["use_mutex"] = True
        text = _ProgramGen(rng, **opts).text()
        program = parse(text)
        try:
            res = Interpreter(program).reachable(max_configs)
        except DomainOverflow:
            continue
        if res.truncated:
            continue
        return program, text
    raise RuntimeError("no bounded random program found")


def random_formula(rng, atom_pool, max_atoms=3, max_depth=4):
    """Random LTL-X formula over at most ``max_atoms`` atoms drawn from ``atom_pool``."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    pool = list(atom_pool)
    chosen = rng.sample(pool, min(max_atoms, len(pool)))

    def go(d):
        if d <= 1 or rng.random() < 0.25:
            if rng.random() < 0.05:
                return ltl.Bool(rng.random() < 0.5)
            return ltl.Prop(rng.choice(chosen))
        op = rng.choice(("not", "and", "or", "implies", "F", "G", "U", "R"))
        if op == "not":
            return ltl.Not(go(d - 1))
        if op == "F":
            return ltl.Finally(go(d - 1))
        if op == "G":
            return ltl.Globally(go(d - 1))
        cls = {"and": ltl.And, "or": ltl.Or, "implies": ltl.Implies,
               "U": ltl.Until, "R": ltl.Release}[op]
        return cls(go(d - 1), go(d - 1))

    return go(max_depth)


def program_atoms(program, net):
    """Atoms that make sense for a translated program: error marks, a few
    transitions, and value tests on the globals."""
    out = []
    errors = sorted({t.error for t in net.transitions if getattr(t, "error", None)})
    out += [ltl.Atom("fireable", e) for e in errors]
    names = sorted(t.name for t in net.transitions)
    out += [ltl.Atom("fireable", n) for n in names[:: max(1, len(names) // 4)]]
    for g in program.globals:
        for c in range(g.lo, g.hi + 1):
            out.append(ltl.Atom("tok", g.name, "==", c))
        out.append(ltl.Atom("tok", g.name, ">", 1))
    return out


def abstract_atoms(n=3):
    """Uninterpreted atoms for automaton-level tests."""
    return [ltl.Atom("fireable", f"p{i}") for i in range(n)]
