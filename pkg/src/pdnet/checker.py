"""Explicit-state LTL checking of PDNets.

The product of the reachability graph with the Büchi automaton of the
negated property is explored on the fly by a nested depth-first search.
Dead markings get a stutter self-loop so every run is infinite.  A product
state is ``(marking, q)``; the pseudo state ``(None, 0)`` precedes the
initial marking so the automaton reads the initial marking too.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import networkx as nx

from . import ltl
from .buchi import translate_to_buchi

DEFAULT_MAX_STATES = 1_000_000
INIT_STEP = "init"


class StateBoundExceeded(Exception):
    pass


def max_states_default():
    env = os.environ.get("PDNET_MAX_STATES")
    return int(float(env)) if env else DEFAULT_MAX_STATES


# ------------------------------------------------------ reachability graph

@dataclass
class ReachabilityGraph:
    markings: list
    index: dict
    edges: list            # per marking: list of (tid or None, binding, target index)
    dead: set

    def __len__(self):
        return len(self.markings)

    def edge_count(self):
        return sum(len(e) for e in self.edges)

    def to_dot(self, net, title="rg"):
        from .net import format_marking
        lines = [f'digraph "{title}" {{']
        for i, m in enumerate(self.markings):
            lines.append(f'  m{i} [label="m{i}\\n{format_marking(net, m)}"];')
        for i, out in enumerate(self.edges):
            for t, _b, j in out:
                if t is None:
                    lines.append(f"  m{i} -> m{j} [style=dotted];")
                else:
                    lines.append(f'  m{i} -> m{j} [label="{net.transitions[t].name}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def reachability_graph(net, bound=None):
    """Breadth-first reachability graph with stutter loops on dead markings."""
    bound = max_states_default() if bound is None else bound
    m0 = net.initial_marking()
    markings, index, edges, dead = [m0], {m0: 0}, [], set()
    i = 0
    while i < len(markings):
        m = markings[i]
        out = []
        for t, b, m2 in net.successors(m):
            j = index.get(m2)
            if j is None:
                if len(markings) >= bound:
                    raise StateBoundExceeded(f"more than {bound} markings")
                j = len(markings)
                index[m2] = j
                markings.append(m2)
            out.append((t, b, j))
        if not out:
            dead.add(i)
            out.append((None, None, i))
        edges.append(out)
        i += 1
    return ReachabilityGraph(markings, index, edges, dead)


# ---------------------------------------------------------------- product

class Product:
    """On-the-fly product of a net with a Büchi automaton."""

    def __init__(self, net, ba, atom_list, bound=None):
        self.net, self.ba, self.atoms = net, ba, atom_list
        self.bound = max_states_default() if bound is None else bound
        self.m0 = net.initial_marking()
        self._letters = {}
        self._succ = {}
        self.fired = 0

    initial = (None, 0)

    def letter(self, m):
        v = self._letters.get(m)
        if v is None:
            v = ltl.valuation(self.net, m, self.atoms)
            self._letters[m] = v
        return v

    def net_moves(self, m):
        if m is None:
            return [(INIT_STEP, None, self.m0)]
        moves = self._succ.get(m)
        if moves is None:
            moves = [(t, b, m2) for t, b, m2 in self.net.successors(m)]
            if not moves:
                moves = [(None, None, m)]
            self._succ[m] = moves
            if len(self._succ) > self.bound:
                raise StateBoundExceeded(f"more than {self.bound} markings")
        return moves

    def successors(self, state):
        m, q = state
        out = []
        for t, b, m2 in self.net_moves(m):
            self.fired += 1
            for q2 in self.ba.step(q, self.letter(m2)):
                out.append(((t, b), (m2, q2)))
        return out

    def accepting(self, state):
        return state[1] in self.ba.accepting

    def markings_stored(self):
        return len(self._succ)


# ------------------------------------------------------- emptiness checks

def nested_dfs(product, state_bound=None):
    """Nested DFS with cyan/blue/red colouring.

    Returns (lasso or None, product states visited).  A lasso is a pair of
    step lists (prefix, loop); each step is ``(transition id or None, binding)``
    and the prefix starts after the initial pseudo step.
    """
    bound = product.bound if state_bound is None else state_bound
    cyan, blue, red = set(), set(), set()
    init = product.initial
    # blue stack entries: [state, step into state, successor list, next index]
    stack = [[init, None, product.successors(init), 0]]
    cyan.add(init)
    visited = 1
    pos = {init: 0}

    def lasso(j, tail):
        """Cycle through stack[j:] and then ``tail`` steps back to stack[j]."""
        prefix = [e[1] for e in stack[1:j + 1]]
        loop = [e[1] for e in stack[j + 1:]] + tail
        return prefix, loop

    def red_search(seed):
        rstack = [[seed, None, product.successors(seed), 0]]
        while rstack:
            top = rstack[-1]
            if top[3] >= len(top[2]):
                rstack.pop()
                continue
            step, t = top[2][top[3]]
            top[3] += 1
            if t in cyan:
                tail = [e[1] for e in rstack[1:]] + [step]
                return pos[t], tail
            if t not in red:
                red.add(t)
                rstack.append([t, step, product.successors(t), 0])
        return None

    while stack:
        top = stack[-1]
        s = top[0]
        if top[3] < len(top[2]):
            step, t = top[2][top[3]]
            top[3] += 1
            if t in cyan:
                if product.accepting(s) or product.accepting(t):
                    return _strip(lasso(pos[t], [step])), visited
                continue
            if t in blue:
                continue
            visited += 1
            if visited > bound:
                raise StateBoundExceeded(f"more than {bound} product states")
            cyan.add(t)
            pos[t] = len(stack)
            stack.append([t, step, product.successors(t), 0])
            continue
        if product.accepting(s):
            found = red_search(s)
            if found is not None:
                j, tail = found
                return _strip(lasso(j, tail)), visited
        blue.add(s)
        cyan.discard(s)
        del pos[s]
        stack.pop()
    return None, visited


def _strip(lasso):
    prefix, loop = lasso
    # the first prefix step is the pseudo step into the initial marking
    prefix = [st for st in prefix if st[0] != INIT_STEP]
    loop = [st for st in loop if st[0] != INIT_STEP]
    return prefix, loop


def scc_emptiness(product):
    """Oracle: build the whole product and look for an accepting cyclic SCC."""
    g = nx.DiGraph()
    init = product.initial
    g.add_node(init)
    seen, stack = {init}, [init]
    while stack:
        s = stack.pop()
        for _step, t in product.successors(s):
            g.add_edge(s, t)
            if t not in seen:
                seen.add(t)
                if len(seen) > product.bound:
                    raise StateBoundExceeded(f"more than {product.bound} product states")
                stack.append(t)
    for comp in nx.strongly_connected_components(g):
        s = next(iter(comp))
        cyclic = len(comp) > 1 or g.has_edge(s, s)
        if cyclic and any(product.accepting(x) for x in comp):
            return False, len(seen)
    return True, len(seen)


# ----------------------------------------------------------------- results

@dataclass
class VerificationResult:
    verdict: str                    # holds | violated | unknown
    formula: str
    counterexample: tuple = None    # (prefix steps, loop steps)
    stats: dict = field(default_factory=dict)
    net: object = None

    @property
    def holds(self):
        return self.verdict == "holds"

    def trace_names(self):
        if self.counterexample is None:
            return None
        prefix, loop = self.counterexample
        return ([self._name(t) for t, _b in prefix], [self._name(t) for t, _b in loop])

    def statement_sequence(self):
        """Statement labels of the fired transitions, prefix then loop."""
        if self.counterexample is None:
            return None
        prefix, loop = self.counterexample
        return [self.net.transitions[t].label for t, _b in list(prefix) + list(loop)
                if t is not None]

    def _name(self, t):
        return "(stutter)" if t is None else self.net.transitions[t].name

    def to_json(self):
        out = {"verdict": self.verdict, "formula": self.formula,
               "states": self.stats.get("markings"),
               "product_states": self.stats.get("product_states"),
               "fired": self.stats.get("fired"),
               "slice": self.stats.get("slice"),
               "time": self.stats.get("time")}
        if self.counterexample is not None:
            prefix, loop = self.trace_names()
            out["counterexample"] = {"prefix": prefix, "loop": loop,
                                     "statements": self.statement_sequence()}
        else:
            out["counterexample"] = None
        return out


def _formula(formula, net, tmap=None):
    f = ltl.parse(formula) if isinstance(formula, str) else formula
    return ltl.resolve(f, net, tmap)


def check(net, formula, max_states=None, tmap=None, algorithm="ndfs"):
    """Model check ``formula`` on ``net``."""
    start = time.perf_counter()
    f = _formula(formula, net, tmap)
    atom_list = ltl.atoms(f)
    ba = translate_to_buchi(ltl.negate(f), atom_list)
    product = Product(net, ba, atom_list, max_states)
    stats = {"places": len(net.places), "transitions": len(net.transitions),
             "buchi_states": len(ba.states)}
    try:
        if algorithm == "scc":
            empty, visited = scc_emptiness(product)
            lasso = None if empty else ()
        else:
            lasso, visited = nested_dfs(product)
    except StateBoundExceeded as e:
        stats.update(markings=product.markings_stored(), fired=product.fired,
                     time=time.perf_counter() - start, error=str(e))
        return VerificationResult("unknown", ltl.show(f), None, stats, net)
    stats.update(markings=product.markings_stored(), product_states=visited,
                 fired=product.fired, time=time.perf_counter() - start)
    if lasso is None:
        return VerificationResult("holds", ltl.show(f), None, stats, net)
    return VerificationResult("violated", ltl.show(f), lasso or None, stats, net)


def check_sliced(program, formula, max_states=None, slicing=True, lost_signals=False):
    """translate -> criterion -> slice -> check."""
    from .slicer import slice_net
    from .translate import translate
    net, tmap = translate(program, lost_signals=lost_signals)
    f = _formula(formula, net, tmap)
    original = {"places": len(net.places), "transitions": len(net.transitions)}
    if slicing:
        sliced = slice_net(net, ltl.extract_criterion(net, f), observed=ltl.observed(f),
                           tmap=tmap)
        target = sliced.net
        g = _formula(ltl.show(f) if isinstance(formula, str) else formula, target, tmap)
    else:
        sliced, target, g = None, net, f
    res = check(target, g, max_states, tmap)
    res.stats["slice"] = {"places_kept": len(target.places),
                          "transitions_kept": len(target.transitions),
                          "places_total": original["places"],
                          "transitions_total": original["transitions"]}
    res.stats["sliced"] = slicing
    return res


def replay(net, counterexample, formula):
    """Fire a lasso from the initial marking; returns the letter word and loop start.

    Raises NotEnabled if a step is illegal.
    """
    f = _formula(formula, net) if isinstance(formula, str) else formula
    atom_list = ltl.atoms(f)
    prefix, loop = counterexample
    m = net.initial_marking()
    word = [ltl.valuation(net, m, atom_list)]
    markings = [m]
    for t, b in list(prefix) + list(loop):
        if t is None:
            if net.successors(m):
                raise ValueError("stutter step on a live marking")
        else:
            m = net.fire(m, t, b)
        markings.append(m)
        word.append(ltl.valuation(net, m, atom_list))
    # the loop closes on the marking reached after the prefix
    if markings[len(prefix)] != markings[-1]:
        raise ValueError("loop does not return to its start marking")
    return word[:-1], len(prefix), markings


# ------------------------------------------------------------- product DOT

def product_dot(net, formula, max_states=2000, title="product"):
    f = _formula(formula, net)
    atom_list = ltl.atoms(f)
    ba = translate_to_buchi(ltl.negate(f), atom_list)
    product = Product(net, ba, atom_list, max_states)
    ids = {product.initial: 0}
    midx = {}
    lines = [f'digraph "{title}" {{', '  s0 [label="init", shape=point];']
    stack = [product.initial]
    while stack:
        s = stack.pop()
        for (t, _b), s2 in product.successors(s):
            if s2 not in ids:
                if len(ids) >= max_states:
                    raise StateBoundExceeded(f"more than {max_states} product states")
                ids[s2] = len(ids)
                shape = "doublecircle" if product.accepting(s2) else "circle"
                mark = midx.setdefault(s2[0], len(midx))
                lines.append(f'  s{ids[s2]} [shape={shape}, label="m{mark},q{s2[1]}"];')
                stack.append(s2)
            name = "" if t in (None, INIT_STEP) else net.transitions[t].name
            style = ", style=dotted" if t is None else ""
            lines.append(f'  s{ids[s]} -> s{ids[s2]} [label="{name}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
