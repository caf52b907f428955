"""LTL (without next-time) to Büchi automaton.

Tableau expansion of a negation-normal-form formula into a generalized
Büchi automaton whose nodes carry the literals they require, followed by a
counting degeneralization to a single acceptance set.

The result has an explicit initial state ``0`` with no label.  An edge
``(q, q2, label)`` may be taken on a letter that satisfies ``label``, which
is the literal conjunction of the target node, so atoms are always read on
the letter being entered.  Accepting states are state based.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .ltl import (And, Bool, Finally, Globally, Implies, Not, Or, Prop, Release, Until, atoms,
                  nnf, show)


@dataclass
class BuchiAutomaton:
    atoms: list                 # atom order used for letter bitmasks
    states: list                # state ids; 0 is the initial state
    accepting: set
    edges: dict                 # state -> list of (target, pos mask, neg mask)
    names: dict = field(default_factory=dict)
    formula: object = None

    initial = 0

    def label_ok(self, pos, neg, letter):
        return (letter & pos) == pos and not (letter & neg)

    def step(self, q, letter):
        return [q2 for q2, pos, neg in self.edges.get(q, ()) if (letter & pos) == pos
                and not (letter & neg)]

    def size(self):
        return len(self.states), sum(len(v) for v in self.edges.values())

    def accepts_lasso(self, word, loop_start):
        """Does the automaton accept ``word[:loop_start] (word[loop_start:])^omega``?"""
        n = len(word)
        succ_pos = [i + 1 for i in range(n - 1)] + [loop_start]
        start = [(q, 0) for q in self.step(self.initial, word[0])]
        nodes, stack = set(start), list(start)
        graph = {}
        while stack:
            q, i = stack.pop()
            j = succ_pos[i]
            out = [(q2, j) for q2 in self.step(q, word[j])]
            graph[(q, i)] = out
            for x in out:
                if x not in nodes:
                    nodes.add(x)
                    stack.append(x)
        # an accepting node on a cycle (only loop positions can repeat)
        for node in nodes:
            if node[0] in self.accepting and node[1] >= loop_start:
                seen, stack = set(), list(graph[node])
                while stack:
                    x = stack.pop()
                    if x == node:
                        return True
                    if x not in seen:
                        seen.add(x)
                        stack.extend(graph[x])
        return False

    def to_dot(self, title="buchi"):
        lines = [f'digraph "{title}" {{', "  rankdir=LR;", '  init [shape=point];']
        for q in self.states:
            shape = "doublecircle" if q in self.accepting else "circle"
            lines.append(f'  q{q} [shape={shape}, label="{self.names.get(q, q)}"];')
        lines.append("  init -> q0;")
        for q in self.states:
            for q2, pos, neg in self.edges.get(q, ()):
                lines.append(f'  q{q} -> q{q2} [label="{self.show_label(pos, neg)}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def show_label(self, pos, neg):
        parts = [str(a) for i, a in enumerate(self.atoms) if pos >> i & 1]
        parts += ["!" + str(a) for i, a in enumerate(self.atoms) if neg >> i & 1]
        return " && ".join(parts) if parts else "true"


# -------------------------------------------------------------- tableau

def _desugar(f):
    """NNF with F/G rewritten to U/R and constants folded where trivial."""
    if isinstance(f, Finally):
        return Until(Bool(True), _desugar(f.arg))
    if isinstance(f, Globally):
        return Release(Bool(False), _desugar(f.arg))
    if isinstance(f, (And, Or, Until, Release)):
        return type(f)(_desugar(f.left), _desugar(f.right))
    return f


def _is_literal(f):
    return isinstance(f, (Bool, Prop)) or (isinstance(f, Not) and isinstance(f.arg, Prop))


def _contradicts(lit, old):
    if isinstance(lit, Bool):
        return not lit.value
    if isinstance(lit, Prop):
        return Not(lit) in old
    return lit.arg in old


class _Node:
    __slots__ = ("incoming", "new", "old", "next")

    def __init__(self, incoming, new, old, nxt):
        self.incoming, self.new, self.old, self.next = set(incoming), set(new), set(old), set(nxt)


def _order(f):
    return show(f)


def tableau(f):
    """Generalized Büchi nodes as a list of [incoming, old, next]."""
    done = []  # list of [incoming set, old frozenset, next frozenset]
    index = {}
    work = [_Node({"init"}, {f}, set(), set())]
    while work:
        node = work.pop()
        if not node.new:
            key = (frozenset(node.old), frozenset(node.next))
            if key in index:
                done[index[key]][0].update(node.incoming)
                continue
            index[key] = len(done)
            done.append([set(node.incoming), key[0], key[1]])
            work.append(_Node({index[key]}, node.next, set(), set()))
            continue
        eta = min(node.new, key=_order)
        node.new.discard(eta)
        if _is_literal(eta):
            if _contradicts(eta, node.old):
                continue
            if not (isinstance(eta, Bool)):
                node.old.add(eta)
            work.append(node)
        elif isinstance(eta, And):
            node.new |= {eta.left, eta.right} - node.old
            node.old.add(eta)
            work.append(node)
        elif isinstance(eta, Or):
            for part in (eta.left, eta.right):
                work.append(_Node(node.incoming, node.new | ({part} - node.old),
                                  node.old | {eta}, node.next))
        elif isinstance(eta, Until):
            work.append(_Node(node.incoming, node.new | ({eta.left} - node.old),
                              node.old | {eta}, node.next | {eta}))
            work.append(_Node(node.incoming, node.new | ({eta.right} - node.old),
                              node.old | {eta}, node.next))
        elif isinstance(eta, Release):
            work.append(_Node(node.incoming, node.new | ({eta.right} - node.old),
                              node.old | {eta}, node.next | {eta}))
            work.append(_Node(node.incoming, node.new | ({eta.left, eta.right} - node.old),
                              node.old | {eta}, node.next))
        else:
            raise ValueError(f"formula not in negation normal form: {eta!r}")
    return done


def _subformulas(f):
    out = {f}
    if isinstance(f, (Not, Finally, Globally)):
        out |= _subformulas(f.arg)
    elif isinstance(f, (And, Or, Until, Release, Implies)):
        out |= _subformulas(f.left) | _subformulas(f.right)
    return out


def translate(f, atom_list=None):
    """Büchi automaton for the (any form) formula ``f``."""
    g = _desugar(nnf(f))
    atom_list = list(atoms(f)) if atom_list is None else list(atom_list)
    bit = {a: 1 << i for i, a in enumerate(atom_list)}
    nodes = tableau(g)
    untils = sorted({u for u in _subformulas(g) if isinstance(u, Until)}, key=_order)

    labels = []
    for _inc, old, _nxt in nodes:
        pos = neg = 0
        for lit in old:
            if isinstance(lit, Prop):
                pos |= bit[lit.atom]
            elif isinstance(lit, Not) and isinstance(lit.arg, Prop):
                neg |= bit[lit.arg.atom]
        labels.append((pos, neg))
    acc_sets = []
    for u in untils:
        acc_sets.append({i for i, (_inc, old, _n) in enumerate(nodes)
                         if u not in old or u.right in old})

    k = max(1, len(acc_sets))
    if not acc_sets:
        acc_sets = [set(range(len(nodes)))]
    # degeneralize: state (node, counter); counter advances when leaving a node of the current set
    ids = {}
    names = {0: "init"}
    edges = {0: []}
    accepting = set()

    def sid(n, c):
        key = (n, c)
        if key not in ids:
            ids[key] = len(ids) + 1
            names[ids[key]] = f"n{n}.{c}"
            edges[ids[key]] = []
            if c == k - 1 and n in acc_sets[k - 1]:
                accepting.add(ids[key])
            work.append(key)
        return ids[key]

    succ = {}
    for j, (inc, _old, _nxt) in enumerate(nodes):
        for i in inc:
            succ.setdefault(i, []).append(j)
    work = []
    for j in sorted(succ.get("init", ())):
        pos, neg = labels[j]
        edges[0].append((sid(j, 0), pos, neg))
    while work:
        n, c = work.pop()
        src = ids[(n, c)]
        c2 = (c + 1) % k if n in acc_sets[c] else c
        for j in sorted(succ.get(n, ())):
            pos, neg = labels[j]
            edges[src].append((sid(j, c2), pos, neg))
    states = [0] + sorted(v for v in ids.values())
    return BuchiAutomaton(atom_list, states, accepting, edges, names, f)


def prune(ba):
    """Drop states that cannot reach an accepting cycle (language preserving)."""
    g = nx.DiGraph()
    g.add_nodes_from(ba.states)
    g.add_edges_from((q, e[0]) for q in ba.states for e in ba.edges[q])
    good = set()
    for comp in nx.strongly_connected_components(g):
        q = next(iter(comp))
        if (len(comp) > 1 or g.has_edge(q, q)) and comp & ba.accepting:
            good |= comp
    # backward closure
    pred = {q: set() for q in ba.states}
    for q in ba.states:
        for e in ba.edges[q]:
            pred[e[0]].add(q)
    stack = list(good)
    live = set(good)
    while stack:
        q = stack.pop()
        for p in pred[q]:
            if p not in live:
                live.add(p)
                stack.append(p)
    live.add(0)
    keep = [q for q in ba.states if q in live]
    edges = {q: [e for e in ba.edges[q] if e[0] in live] for q in keep}
    return BuchiAutomaton(ba.atoms, keep, ba.accepting & live, edges,
                          {q: ba.names[q] for q in keep}, ba.formula)


def translate_to_buchi(f, atom_list=None, reduce=True):
    ba = translate(f, atom_list)
    return prune(ba) if reduce else ba
