"""LTL without next-time over PDNet propositions.

Concrete syntax::

    fireable(t8) | fireable(err) | tok(x) <= 3 | true | false
    ! f   f && g   f || g   f -> g   F f   G f   f U g   f R g

``fireable(name)`` names a transition or an error label (``error err;``);
an error label stands for every error transition carrying it.  ``tok(v)``
names a program variable or a place.  Unicode forms (¬ ∧ ∨ → ⇒ □ ◇) and the
long forms ``is-fireable`` / ``token-value`` are accepted too.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .net import EXECUTION, INT


class FormulaError(Exception):
    pass


# ----------------------------------------------------------------- formulas

@dataclass(frozen=True)
class Atom:
    kind: str            # 'fireable' | 'tok'
    name: str
    op: str = None
    value: int = None
    targets: tuple = ()  # resolved transition ids or (place id,)

    def __str__(self):
        if self.kind == "fireable":
            return f"fireable({self.name})"
        return f"tok({self.name}) {self.op} {self.value}"


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class Prop:
    atom: Atom


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Finally:
    arg: object


@dataclass(frozen=True)
class Globally:
    arg: object


@dataclass(frozen=True)
class Until:
    left: object
    right: object


@dataclass(frozen=True)
class Release:
    left: object
    right: object


TRUE, FALSE = Bool(True), Bool(False)
_BINARY = {And: "&&", Or: "||", Implies: "->", Until: "U", Release: "R"}
_PREC = {Implies: 1, Or: 2, And: 3, Until: 4, Release: 4}


def show(f, parent=0):
    if isinstance(f, Bool):
        return "true" if f.value else "false"
    if isinstance(f, Prop):
        return str(f.atom)
    if isinstance(f, Not):
        return "!" + show(f.arg, 9)
    if isinstance(f, Finally):
        return "F " + show(f.arg, 9)
    if isinstance(f, Globally):
        return "G " + show(f.arg, 9)
    prec = _PREC[type(f)]
    # && and || group to the left, the rest to the right, as in the parser
    lp, rp = (prec, prec + 1) if isinstance(f, (And, Or)) else (prec + 1, prec)
    s = f"{show(f.left, lp)} {_BINARY[type(f)]} {show(f.right, rp)}"
    return f"({s})" if prec < parent else s


def children(f):
    if isinstance(f, (Bool, Prop)):
        return ()
    if isinstance(f, (Not, Finally, Globally)):
        return (f.arg,)
    return (f.left, f.right)


def atoms(f):
    """Atoms in order of first occurrence."""
    out = []

    def go(g):
        if isinstance(g, Prop):
            if g.atom not in out:
                out.append(g.atom)
        for c in children(g):
            go(c)

    go(f)
    return out


def depth(f):
    cs = children(f)
    return 0 if not cs else 1 + max(depth(c) for c in cs)


def map_atoms(f, fn):
    if isinstance(f, Prop):
        return Prop(fn(f.atom))
    if isinstance(f, Bool):
        return f
    if isinstance(f, (Not, Finally, Globally)):
        return type(f)(map_atoms(f.arg, fn))
    return type(f)(map_atoms(f.left, fn), map_atoms(f.right, fn))


# ------------------------------------------------------------------- parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>-?\d+)
  | (?P<op><=|>=|==|!=|->|=>|&&|\|\||[<>=!()¬∧∨→⇒□◇])
  | (?P<name>[A-Za-z_][\w.@/'-]*'*)
""", re.VERBOSE)
_UNICODE = {"¬": "!", "∧": "&&", "∨": "||", "→": "->", "⇒": "->", "=>": "->", "□": "G",
            "◇": "F", "=": "=="}
_REL = ("<", "<=", ">", ">=", "==", "!=")


def _tokens(text):
    out, i = [], 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise FormulaError(f"unexpected character {text[i]!r} at {i}")
        i = m.end()
        if m.lastgroup == "ws":
            continue
        tok = m.group()
        if m.lastgroup == "op":
            tok = _UNICODE.get(tok, tok)
        out.append((m.lastgroup, tok))
    out.append(("eof", ""))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i][1]

    def take(self, text=None):
        kind, tok = self.toks[self.i]
        if text is not None and tok != text:
            raise FormulaError(f"expected {text!r}, found {tok or 'end of input'!r}")
        self.i += 1
        return kind, tok

    def parse(self):
        f = self.implies()
        if self.toks[self.i][0] != "eof":
            raise FormulaError(f"unexpected {self.peek()!r}")
        return f

    def implies(self):
        left = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disj(self):
        f = self.conj()
        while self.peek() == "||":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self):
        f = self.until()
        while self.peek() == "&&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self):
        left = self.unary()
        if self.peek() in ("U", "R"):
            op = self.take()[1]
            right = self.until()
            return Until(left, right) if op == "U" else Release(left, right)
        return left

    def unary(self):
        kind, tok = self.toks[self.i]
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok in ("F", "G") and kind != "eof":
            self.take()
            arg = self.unary()
            return Finally(arg) if tok == "F" else Globally(arg)
        if tok == "X":
            raise FormulaError("the next-time operator X is not supported")
        if tok == "(":
            self.take()
            f = self.implies()
            self.take(")")
            return f
        if tok in ("true", "false"):
            self.take()
            return Bool(tok == "true")
        if tok in ("fireable", "is-fireable"):
            self.take()
            self.take("(")
            k, name = self.take()
            if k != "name":
                raise FormulaError("expected a transition name")
            self.take(")")
            return Prop(Atom("fireable", name))
        if tok in ("tok", "token-value"):
            self.take()
            self.take("(")
            k, name = self.take()
            if k != "name":
                raise FormulaError("expected a variable or place name")
            self.take(")")
            op = self.take()[1]
            if op not in _REL:
                raise FormulaError(f"expected a comparison, found {op!r}")
            k, num = self.take()
            if k != "num":
                raise FormulaError("expected an integer constant")
            return Prop(Atom("tok", name, op, int(num)))
        raise FormulaError(f"unexpected {tok or 'end of input'!r}")


def parse(text):
    return _Parser(text).parse()


# ----------------------------------------------------------- normal forms

def nnf(f):
    """Negation normal form: negations only on atoms, no implications."""
    if isinstance(f, (Bool, Prop)):
        return f
    if isinstance(f, Implies):
        return Or(nnf(Not(f.left)), nnf(f.right))
    if isinstance(f, (And, Or, Until, Release)):
        return type(f)(nnf(f.left), nnf(f.right))
    if isinstance(f, (Finally, Globally)):
        return type(f)(nnf(f.arg))
    g = f.arg  # Not
    if isinstance(g, Bool):
        return Bool(not g.value)
    if isinstance(g, Prop):
        return f
    if isinstance(g, Not):
        return nnf(g.arg)
    if isinstance(g, Implies):
        return And(nnf(g.left), nnf(Not(g.right)))
    if isinstance(g, And):
        return Or(nnf(Not(g.left)), nnf(Not(g.right)))
    if isinstance(g, Or):
        return And(nnf(Not(g.left)), nnf(Not(g.right)))
    if isinstance(g, Finally):
        return Globally(nnf(Not(g.arg)))
    if isinstance(g, Globally):
        return Finally(nnf(Not(g.arg)))
    if isinstance(g, Until):
        return Release(nnf(Not(g.left)), nnf(Not(g.right)))
    if isinstance(g, Release):
        return Until(nnf(Not(g.left)), nnf(Not(g.right)))
    raise FormulaError(f"unknown formula {f!r}")


def negate(f):
    return nnf(Not(f))


# -------------------------------------------------------------- resolution

def resolve(f, net, tmap=None):
    """Bind atom names to net nodes; raises FormulaError for unknown names."""
    errors = {}
    for t in net.transitions:
        if t.kind == "error" and t.error:
            errors.setdefault(t.error, []).append(t.id)

    def bind(a):
        if a.kind == "fireable":
            if a.name in net.trans_by_name:
                ids = (net.trans_by_name[a.name].id,)
            elif a.name in errors:
                ids = tuple(errors[a.name])
            elif tmap is not None and a.name in getattr(tmap, "errors", {}):
                ids = ()  # label exists only in sliced-away code
            else:
                raise FormulaError(f"unknown transition or error label {a.name!r}")
            return Atom(a.kind, a.name, targets=ids)
        p = net.place_by_name.get(a.name) or net.place_by_name.get(f"v_{a.name}")
        if p is None:
            raise FormulaError(f"unknown variable or place {a.name!r}")
        if p.color != INT:
            raise FormulaError(f"tok() needs an integer place, {p.name} is not one")
        return Atom(a.kind, a.name, a.op, a.value, (p.id,))

    return map_atoms(f, bind)


_CMP = {"<": lambda a, b: a < b, "<=": lambda a, b: a <= b, ">": lambda a, b: a > b,
        ">=": lambda a, b: a >= b, "==": lambda a, b: a == b, "!=": lambda a, b: a != b}


def eval_atom(net, marking, atom):
    if atom.kind == "fireable":
        return any(net.is_enabled(marking, t) for t in atom.targets)
    (p,) = atom.targets
    v = marking[p]
    if v is None:
        raise FormulaError(f"place {net.places[p].name} holds no token")
    return _CMP[atom.op](v, atom.value)


def valuation(net, marking, atom_list):
    """Bitmask of the atoms true in ``marking`` (bit i for atom_list[i])."""
    bits = 0
    for i, a in enumerate(atom_list):
        if eval_atom(net, marking, a):
            bits |= 1 << i
    return bits


# ----------------------------------------------------- slicing criterion

def _non_exec_inputs(net, t):
    return {a.place for a in net.t_in[t] if net.places[a.place].roles != EXECUTION}


def atom_criterion(net, atom):
    out = set()
    if atom.kind == "fireable":
        for t in atom.targets:
            out |= _non_exec_inputs(net, t)
        return out
    (p,) = atom.targets
    out.add(p)
    for a in net.p_in[p]:
        t = a.trans
        if net.arc_expr(p, t, True) != a.expr:
            out |= _non_exec_inputs(net, t)
    return out


def extract_criterion(net, f):
    """Places whose behaviour decides the atoms of ``f`` (f must be resolved)."""
    out = set()
    for a in atoms(f):
        out |= atom_criterion(net, a)
    return frozenset(out)


def observed(f):
    """(transitions observed by fireable atoms, places observed by tok atoms)."""
    ts, ps = set(), set()
    for a in atoms(f):
        (ts if a.kind == "fireable" else ps).update(a.targets)
    return ts, ps


# ------------------------------------------------------- lasso semantics

def evaluate_lasso(f, word, loop_start, atom_list=None):
    """Truth of ``f`` at position 0 of the infinite word
    ``word[:loop_start] (word[loop_start:])^omega``.

    Letters are bitmasks over ``atom_list`` (default: atoms(f)).
    """
    atom_list = atoms(f) if atom_list is None else atom_list
    index = {a: i for i, a in enumerate(atom_list)}
    n = len(word)
    succ = [i + 1 for i in range(n - 1)] + [loop_start]

    def vec(g):
        if isinstance(g, Bool):
            return [g.value] * n
        if isinstance(g, Prop):
            bit = 1 << index[g.atom]
            return [bool(w & bit) for w in word]
        if isinstance(g, Not):
            return [not v for v in vec(g.arg)]
        if isinstance(g, And):
            a, b = vec(g.left), vec(g.right)
            return [x and y for x, y in zip(a, b)]
        if isinstance(g, Or):
            a, b = vec(g.left), vec(g.right)
            return [x or y for x, y in zip(a, b)]
        if isinstance(g, Implies):
            a, b = vec(g.left), vec(g.right)
            return [(not x) or y for x, y in zip(a, b)]
        if isinstance(g, Finally):
            return vec(Until(TRUE, g.arg))
        if isinstance(g, Globally):
            return vec(Release(FALSE, g.arg))
        a, b = vec(g.left), vec(g.right)
        until = isinstance(g, Until)
        val = [not until] * n
        changed = True
        while changed:
            changed = False
            for i in reversed(range(n)):
                if until:
                    new = b[i] or (a[i] and val[succ[i]])
                else:
                    new = b[i] and (a[i] or val[succ[i]])
                if new != val[i]:
                    val[i] = new
                    changed = True
        return val

    return vec(f)[0]
