"""Mini concurrent language: syntax tree, parser, pretty-printer and checks.

A program declares global integer variables with finite domains, mutexes,
condition variables, functions and the static list of threads.  Every
statement carries a location label; labels are handed out in lexical order
and each function also owns an entry label (before its first statement), an
exit label and a terminal label (after the function has returned).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

DEFAULT_DOMAIN = (-8, 8)


class ProgramError(Exception):
    """Syntax or semantic error.  ``diagnostics`` lists semantic problems."""

    def __init__(self, message, line=None, col=None, diagnostics=None):
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.col = col
        self.diagnostics = list(diagnostics or [])


class DomainOverflow(Exception):
    pass


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Const:
    value: int

    def vars(self):
        return frozenset()


@dataclass(frozen=True)
class Var:
    name: str

    def vars(self):
        return frozenset([self.name])


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or '!'
    arg: object

    def vars(self):
        return self.arg.vars()


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object

    def vars(self):
        return self.left.vars() | self.right.vars()


BINARY_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "<": lambda a, b: int(a < b),
    "<=": lambda a, b: int(a <= b),
    ">": lambda a, b: int(a > b),
    ">=": lambda a, b: int(a >= b),
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "&&": lambda a, b: int(bool(a) and bool(b)),
    "||": lambda a, b: int(bool(a) or bool(b)),
}


def evaluate(expr, env):
    """Evaluate an expression; ``env`` maps variable names to integers."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, Unary):
        v = evaluate(expr.arg, env)
        return -v if expr.op == "-" else int(not v)
    return BINARY_OPS[expr.op](evaluate(expr.left, env), evaluate(expr.right, env))


def compile_expr(expr, rename=None):
    """Turn an expression into a Python callable over a dict environment.

    ``rename`` maps source names to environment keys (used for locals of a
    particular function instance).
    """
    rename = rename or {}
    if isinstance(expr, Const):
        v = expr.value
        return lambda env: v
    if isinstance(expr, Var):
        key = rename.get(expr.name, expr.name)
        return lambda env: env[key]
    if isinstance(expr, Unary):
        f = compile_expr(expr.arg, rename)
        if expr.op == "-":
            return lambda env: -f(env)
        return lambda env: int(not f(env))
    op = BINARY_OPS[expr.op]
    lf = compile_expr(expr.left, rename)
    rf = compile_expr(expr.right, rename)
    if expr.op == "&&":
        return lambda env: int(bool(lf(env)) and bool(rf(env)))
    if expr.op == "||":
        return lambda env: int(bool(lf(env)) or bool(rf(env)))
    return lambda env: op(lf(env), rf(env))


def rename_expr(expr, rename):
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Var):
        return Var(rename.get(expr.name, expr.name))
    if isinstance(expr, Unary):
        return Unary(expr.op, rename_expr(expr.arg, rename))
    return Binary(expr.op, rename_expr(expr.left, rename), rename_expr(expr.right, rename))


_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6}


def format_expr(expr, parent=0):
    if isinstance(expr, Const):
        s = str(expr.value)
        return f"({s})" if expr.value < 0 and parent > 0 else s
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        return f"{expr.op}{format_expr(expr.arg, 7)}"
    p = _PREC[expr.op]
    # comparisons are non-associative in the grammar, so parenthesise both sides
    rp = p + 1
    lp = p + 1 if p in (3, 4) else p
    s = f"{format_expr(expr.left, lp)} {expr.op} {format_expr(expr.right, rp)}"
    return f"({s})" if p < parent else s


# ----------------------------------------------------------------- statements

@dataclass(frozen=True)
class Assign:
    var: str
    expr: object
    label: int = 0


@dataclass(frozen=True)
class Jump:
    kind: str  # break | continue | return
    expr: object = None  # optional return value
    label: int = 0


@dataclass(frozen=True)
class If:
    cond: object
    then: tuple
    orelse: tuple = ()
    label: int = 0


@dataclass(frozen=True)
class While:
    cond: object
    body: tuple
    label: int = 0


@dataclass(frozen=True)
class Call:
    callee: str
    args: tuple
    target: str = None
    label: int = 0


@dataclass(frozen=True)
class Lock:
    mutex: str
    label: int = 0


@dataclass(frozen=True)
class Unlock:
    mutex: str
    label: int = 0


@dataclass(frozen=True)
class Signal:
    cond: str
    label: int = 0


@dataclass(frozen=True)
class Wait:
    cond: str
    mutex: str
    label: int = 0


@dataclass(frozen=True)
class ErrorMark:
    name: str = "err"
    label: int = 0


@dataclass(frozen=True)
class VarDecl:
    name: str
    lo: int = DEFAULT_DOMAIN[0]
    hi: int = DEFAULT_DOMAIN[1]
    init: int = 0


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple
    body: tuple
    entry_label: int = 0
    exit_label: int = 0
    end_label: int = 0


@dataclass(frozen=True)
class Program:
    globals: tuple
    functions: tuple
    threads: tuple
    mutexes: tuple = ()
    condvars: tuple = ()
    domain: tuple = field(default=(-8, 8), compare=False)  # used for implicit locals

    def function(self, name):
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def global_decl(self, name):
        for g in self.globals:
            if g.name == name:
                return g
        raise KeyError(name)


RET_VAR = "ret"  # implicit per-instance local receiving `return e;`


def walk(stmts):
    """Pre-order traversal of a statement list (nested blocks included)."""
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from walk(s.then)
            yield from walk(s.orelse)
        elif isinstance(s, While):
            yield from walk(s.body)


def instance_locals(func):
    return [p.name for p in func.params] + [RET_VAR]


def thread_instances(program):
    """(instance id, function name) for every thread, ids '1', '2', ..."""
    return [(str(i + 1), name) for i, name in enumerate(program.threads)]


def callee_instance(parent, call):
    return f"{parent}.{call.label}"


def local_key(instance, name):
    return f"{instance}/{name}"


def all_instances(program):
    """Every function instance reachable from a thread: (id, function, thread no.)."""
    out = []

    def visit(inst, fname, thread):
        out.append((inst, fname, thread))
        for s in walk(program.function(fname).body):
            if isinstance(s, Call):
                visit(callee_instance(inst, s), s.callee, thread)

    for inst, fname in thread_instances(program):
        visit(inst, fname, int(inst))
    return out


# --------------------------------------------------------------------- lexer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>:=|->|<=|>=|==|!=|&&|\|\||≤|≥|≠|¬|∧|∨|[-+*<>=!(){}\[\];,])
""", re.X)

_UNICODE = {"≤": "<=", "≥": ">=", "≠": "!=", "¬": "!", "∧": "&&", "∨": "||", "=": "=="}

KEYWORDS = {"global", "in", "mutex", "cond", "fn", "thread", "if", "else", "while",
            "break", "continue", "return", "lock", "unlock", "signal", "wait",
            "call", "error"}


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text):
    toks = []
    pos, line, col0 = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ProgramError(f"unexpected character {text[pos]!r}", line, pos - col0 + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            col0 = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(Tok(kind, m.group(), line, pos - col0 + 1))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - col0 + 1))
    return toks


# -------------------------------------------------------------------- parser

class _Parser:
    def __init__(self, text, domain=None):
        self.domain = tuple(domain) if domain else DEFAULT_DOMAIN
        self.toks = tokenize(text)
        self.i = 0

    def peek(self, k=0):
        return self.toks[self.i + k]

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        found = tok.text or "end of input"
        raise ProgramError(f"{msg}, found {found!r}", tok.line, tok.col)

    def take(self, text=None, kind=None):
        tok = self.peek()
        if (text is not None and tok.text != text) or (kind is not None and tok.kind != kind):
            self.error(f"expected {text or kind}")
        self.i += 1
        return tok

    def accept(self, text):
        if self.peek().text == text:
            self.i += 1
            return True
        return False

    def ident(self):
        tok = self.peek()
        if tok.kind != "id" or tok.text in KEYWORDS:
            self.error("expected identifier")
        self.i += 1
        return tok.text

    def integer(self):
        neg = self.accept("-")
        v = int(self.take(kind="num").text)
        return -v if neg else v

    def program(self):
        globals_, funcs, threads, mutexes, conds = [], [], [], [], []
        while self.peek().kind != "eof":
            t = self.peek().text
            if t == "global":
                self.i += 1
                globals_.append(self.var_decl())
                while self.accept(","):
                    globals_.append(self.var_decl())
                self.take(";")
            elif t in ("mutex", "cond"):
                self.i += 1
                names = [self.ident()]
                while self.accept(","):
                    names.append(self.ident())
                self.take(";")
                (mutexes if t == "mutex" else conds).extend(names)
            elif t == "fn":
                self.i += 1
                name = self.ident()
                self.take("(")
                params = []
                if self.peek().text != ")":
                    params.append(self.var_decl(allow_init=False))
                    while self.accept(","):
                        params.append(self.var_decl(allow_init=False))
                self.take(")")
                funcs.append(Function(name, tuple(params), self.block()))
            elif t == "thread":
                self.i += 1
                name = self.ident()
                if self.peek().text == "{":
                    funcs.append(Function(name, (), self.block()))
                else:
                    self.take(";")
                threads.append(name)
            else:
                self.error("expected declaration")
        return Program(tuple(globals_), tuple(funcs), tuple(threads), tuple(mutexes), tuple(conds),
                       self.domain)

    def var_decl(self, allow_init=True):
        name = self.ident()
        lo, hi = self.domain
        if self.accept("in"):
            self.take("[")
            lo = self.integer()
            self.take(",")
            hi = self.integer()
            self.take("]")
        init = 0 if lo <= 0 <= hi else lo
        if allow_init and self.peek().text == "=":
            self.i += 1
            init = self.integer()
        return VarDecl(name, lo, hi, init)

    def block(self):
        self.take("{")
        stmts = []
        while not self.accept("}"):
            if self.peek().kind == "eof":
                self.error("expected '}'")
            stmts.append(self.stmt())
        return tuple(stmts)

    def stmt(self):
        tok = self.peek()
        t = tok.text
        if t == "if":
            self.i += 1
            self.take("(")
            cond = self.expr()
            self.take(")")
            then = self.block()
            orelse = ()
            if self.accept("else"):
                orelse = (self.stmt(),) if self.peek().text == "if" else self.block()
            return If(cond, then, orelse)
        if t == "while":
            self.i += 1
            self.take("(")
            cond = self.expr()
            self.take(")")
            return While(cond, self.block())
        if t in ("break", "continue"):
            self.i += 1
            self.take(";")
            return Jump(t)
        if t == "return":
            self.i += 1
            e = None if self.peek().text == ";" else self.expr()
            self.take(";")
            return Jump("return", e)
        if t in ("lock", "unlock", "signal"):
            self.i += 1
            name = self.ident()
            self.take(";")
            return {"lock": Lock, "unlock": Unlock, "signal": Signal}[t](name)
        if t == "wait":
            self.i += 1
            c = self.ident()
            m = self.ident()
            self.take(";")
            return Wait(c, m)
        if t == "call":
            self.i += 1
            callee = self.ident()
            self.take("(")
            args = []
            if self.peek().text != ")":
                args.append(self.expr())
                while self.accept(","):
                    args.append(self.expr())
            self.take(")")
            target = self.ident() if self.accept("->") else None
            self.take(";")
            return Call(callee, tuple(args), target)
        if t == "error":
            self.i += 1
            name = "err"
            if self.peek().kind == "id" and self.peek().text not in KEYWORDS:
                name = self.ident()
            self.take(";")
            return ErrorMark(name)
        name = self.ident()
        self.take(":=")
        e = self.expr()
        self.take(";")
        return Assign(name, e)

    # precedence climbing: || < && < comparison < additive < multiplicative < unary
    def expr(self):
        return self.binary(1)

    def binary(self, level):
        if level > 6:
            return self.unary()
        left = self.binary(level + 1)
        while True:
            op = _UNICODE.get(self.peek().text, self.peek().text)
            if _PREC.get(op) != level:
                return left
            self.i += 1
            right = self.binary(level + 1)
            left = Binary(op, left, right)
            if level in (3, 4):
                nxt = _UNICODE.get(self.peek().text, self.peek().text)
                if _PREC.get(nxt) in (3, 4):
                    self.error("comparison operators do not chain")

    def unary(self):
        t = _UNICODE.get(self.peek().text, self.peek().text)
        if t == "-":
            self.i += 1
            arg = self.unary()
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Unary("-", arg)
        if t == "!":
            self.i += 1
            return Unary("!", self.unary())
        if t == "(":
            self.i += 1
            e = self.expr()
            self.take(")")
            return e
        tok = self.peek()
        if tok.kind == "num":
            self.i += 1
            return Const(int(tok.text))
        if tok.text in ("true", "false"):
            self.i += 1
            return Const(int(tok.text == "true"))
        if tok.kind == "id" and tok.text not in KEYWORDS:
            self.i += 1
            return Var(tok.text)
        self.error("expected expression")


def assign_labels(program):
    """Number locations 1..n in lexical order (see module docstring)."""
    counter = [0]

    def nxt():
        counter[0] += 1
        return counter[0]

    def block(stmts):
        out = []
        for s in stmts:
            lab = nxt()
            if isinstance(s, If):
                s = replace(s, label=lab, then=block(s.then), orelse=block(s.orelse))
            elif isinstance(s, While):
                s = replace(s, label=lab, body=block(s.body))
            else:
                s = replace(s, label=lab)
            out.append(s)
        return tuple(out)

    funcs = []
    for f in program.functions:
        entry = nxt()
        body = block(f.body)
        funcs.append(replace(f, body=body, entry_label=entry, exit_label=nxt(), end_label=nxt()))
    return replace(program, functions=tuple(funcs))


def parse(text, check=True, domain=None):
    """Parse source text into a labelled Program.

    With ``check`` (the default) semantic problems raise ProgramError carrying
    the diagnostics from :func:`validate`.  ``domain`` overrides the default
    range of variables declared without one.
    """
    prog = assign_labels(_Parser(text, domain).program())
    if check:
        diags = validate(prog)
        if diags:
            raise ProgramError("invalid program: " + "; ".join(diags), diagnostics=diags)
    return prog


# ---------------------------------------------------------------- validation

def _returns_value(func):
    return any(isinstance(s, Jump) and s.kind == "return" and s.expr is not None
               for s in walk(func.body))


def validate(program):
    diags = []
    fnames = [f.name for f in program.functions]
    for name in set(fnames):
        if fnames.count(name) > 1:
            diags.append(f"duplicate-function: {name}")
    gnames = [g.name for g in program.globals]
    for name in sorted(set(gnames)):
        if gnames.count(name) > 1:
            diags.append(f"duplicate-global: {name}")
    for g in program.globals:
        if g.lo > g.hi or not g.lo <= g.init <= g.hi:
            diags.append(f"bad-domain: {g.name}")
    for name in program.threads:
        if name not in fnames:
            diags.append(f"unknown-function: thread {name}")
    funcs = {f.name: f for f in program.functions}
    mutexes, conds = set(program.mutexes), set(program.condvars)
    calls = {}

    for f in program.functions:
        scope = set(gnames) | {p.name for p in f.params}
        if _returns_value(f):
            scope.add(RET_VAR)
        calls[f.name] = set()

        def check_expr(e, where):
            for v in sorted(e.vars()):
                if v not in scope:
                    diags.append(f"undeclared-variable: {v} in {f.name} at {where}")

        def visit(stmts, in_loop):
            for s in stmts:
                if isinstance(s, Assign):
                    if s.var not in scope:
                        diags.append(f"undeclared-variable: {s.var} in {f.name} at {s.label}")
                    check_expr(s.expr, s.label)
                elif isinstance(s, Jump):
                    if s.kind != "return" and not in_loop:
                        diags.append(f"jump-outside-loop: {s.kind} in {f.name} at {s.label}")
                    if s.expr is not None:
                        check_expr(s.expr, s.label)
                elif isinstance(s, If):
                    check_expr(s.cond, s.label)
                    visit(s.then, in_loop)
                    visit(s.orelse, in_loop)
                elif isinstance(s, While):
                    check_expr(s.cond, s.label)
                    visit(s.body, True)
                elif isinstance(s, Call):
                    calls[f.name].add(s.callee)
                    for a in s.args:
                        check_expr(a, s.label)
                    if s.target is not None and s.target not in scope:
                        diags.append(f"undeclared-variable: {s.target} in {f.name} at {s.label}")
                    if s.callee not in funcs:
                        diags.append(f"unknown-function: {s.callee} called in {f.name}")
                    elif len(funcs[s.callee].params) != len(s.args):
                        diags.append(f"arity-mismatch: {s.callee} called in {f.name}")
                    elif s.target is not None and not _returns_value(funcs[s.callee]):
                        diags.append(f"no-return-value: {s.callee} called in {f.name}")
                elif isinstance(s, (Lock, Unlock)):
                    if s.mutex not in mutexes:
                        diags.append(f"unknown-mutex: {s.mutex} in {f.name}")
                elif isinstance(s, Signal):
                    if s.cond not in conds:
                        diags.append(f"unknown-condvar: {s.cond} in {f.name}")
                elif isinstance(s, Wait):
                    if s.cond not in conds:
                        diags.append(f"unknown-condvar: {s.cond} in {f.name}")
                    if s.mutex not in mutexes:
                        diags.append(f"unknown-mutex: {s.mutex} in {f.name}")

        visit(f.body, False)

    # recursion: any cycle in the call graph
    state = {}

    def dfs(name, stack):
        state[name] = 1
        for callee in sorted(calls.get(name, ())):
            if callee not in calls:
                continue
            if state.get(callee) == 1:
                cyc = stack[stack.index(callee):] + [callee]
                diags.append("recursion: " + " -> ".join(cyc))
            elif callee not in state:
                dfs(callee, stack + [callee])
        state[name] = 2

    for name in sorted(calls):
        if name not in state:
            dfs(name, [name])
    return diags


# ------------------------------------------------------------ pretty printing

def _fmt_decl(d, with_init=True):
    s = d.name
    if (d.lo, d.hi) != DEFAULT_DOMAIN:
        s += f" in [{d.lo},{d.hi}]"
    default_init = 0 if d.lo <= 0 <= d.hi else d.lo
    if with_init and d.init != default_init:
        s += f" = {d.init}"
    return s


def _fmt_block(stmts, indent):
    pad = "    " * indent
    lines = []
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{pad}{s.var} := {format_expr(s.expr)};")
        elif isinstance(s, Jump):
            tail = f" {format_expr(s.expr)}" if s.expr is not None else ""
            lines.append(f"{pad}{s.kind}{tail};")
        elif isinstance(s, If):
            lines.append(f"{pad}if ({format_expr(s.cond)}) {{")
            lines += _fmt_block(s.then, indent + 1)
            if s.orelse:
                lines.append(f"{pad}}} else {{")
                lines += _fmt_block(s.orelse, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, While):
            lines.append(f"{pad}while ({format_expr(s.cond)}) {{")
            lines += _fmt_block(s.body, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, Call):
            args = ", ".join(format_expr(a) for a in s.args)
            tail = f" -> {s.target}" if s.target else ""
            lines.append(f"{pad}call {s.callee}({args}){tail};")
        elif isinstance(s, Lock):
            lines.append(f"{pad}lock {s.mutex};")
        elif isinstance(s, Unlock):
            lines.append(f"{pad}unlock {s.mutex};")
        elif isinstance(s, Signal):
            lines.append(f"{pad}signal {s.cond};")
        elif isinstance(s, Wait):
            lines.append(f"{pad}wait {s.cond} {s.mutex};")
        elif isinstance(s, ErrorMark):
            lines.append(f"{pad}error;" if s.name == "err" else f"{pad}error {s.name};")
    return lines


def pretty(program):
    lines = []
    for g in program.globals:
        lines.append(f"global {_fmt_decl(g)};")
    if program.mutexes:
        lines.append("mutex " + ", ".join(program.mutexes) + ";")
    if program.condvars:
        lines.append("cond " + ", ".join(program.condvars) + ";")
    for f in program.functions:
        params = ", ".join(_fmt_decl(p, with_init=False) for p in f.params)
        lines.append(f"fn {f.name}({params}) {{")
        lines += _fmt_block(f.body, 1)
        lines.append("}")
    for t in program.threads:
        lines.append(f"thread {t};")
    return "\n".join(lines) + "\n"
