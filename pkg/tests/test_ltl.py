import random

import pytest
from hypothesis import given, settings, strategies as st

from pdnet import ltl
from pdnet.gen import random_formula, random_program, program_atoms
from pdnet.ltl import (And, Atom, Finally, FormulaError, Globally, Not, Or, Prop, eval_atom,
                       extract_criterion, negate, parse, resolve)
from pdnet.net import EXECUTION
from pdnet.translate import translate

from lasso_oracle import SemanticMachine, all_lassos


def fire(net, names):
    m = net.initial_marking()
    for n in names:
        m = net.fire(m, net.trans(n).id)
    return m


def names(net, places):
    return {net.places[p].name for p in places}


A, B = Prop(Atom("fireable", "a")), Prop(Atom("fireable", "b"))


def test_parse_forms():
    f = parse("G !fireable(err)")
    assert f == Globally(Not(Prop(Atom("fireable", "err"))))
    g = parse("F (tok(x) >= 2 && fireable(t9)) || false")
    assert isinstance(g, Or) and isinstance(g.left, Finally)
    assert parse("□ ¬fireable(err)") == f
    assert parse(ltl.show(g)) == g


def test_parse_rejects_next_and_garbage():
    for text in ("X fireable(a)", "G (", "tok(x) < ", "fireable()"):
        with pytest.raises(FormulaError):
            parse(text)


def test_negate_examples():
    t21 = Prop(Atom("fireable", "t21"))
    assert negate(Globally(Not(t21))) == Finally(t21)
    assert negate(Not(A)) == A
    assert negate(And(A, B)) == Or(Not(A), Not(B))


def test_resolution_errors(motivating_net):
    net, tm = motivating_net
    with pytest.raises(FormulaError):
        resolve(parse("F fireable(nope)"), net, tm)
    with pytest.raises(FormulaError):
        resolve(parse("G tok(q) > 1"), net, tm)


def test_fireable_in_motivating_run(motivating_net):
    net, tm = motivating_net
    (a,) = ltl.atoms(resolve(parse("F fireable(err)"), net, tm))
    assert not eval_atom(net, net.initial_marking(), a)
    assert eval_atom(net, fire(net, ["t1", "t7", "t8"]), a)
    # once x := 1 has run the error can no longer be reached
    assert not eval_atom(net, fire(net, ["t1", "t7", "t2", "t8'"]), a)


def test_token_value_atoms(motivating_net):
    net, tm = motivating_net
    (a,) = ltl.atoms(resolve(parse("F tok(x) == 1"), net, tm))
    assert not eval_atom(net, net.initial_marking(), a)
    assert eval_atom(net, fire(net, ["t1", "t2"]), a)
    m = list(net.initial_marking())
    m[net.place("v_x").id] = None
    with pytest.raises(FormulaError):
        eval_atom(net, tuple(m), a)


def test_dead_transition_not_fireable():
    from pdnet.program import parse as parse_program
    net, tm = translate(parse_program("global x; thread t { if (0) { error e; } }"))
    (a,) = ltl.atoms(resolve(parse("F fireable(e)"), net, tm))
    seen = {net.initial_marking()}
    stack = [net.initial_marking()]
    while stack:
        m = stack.pop()
        assert not eval_atom(net, m, a)
        for _t, _b, m2 in net.successors(m):
            if m2 not in seen:
                seen.add(m2)
                stack.append(m2)


def test_criterion_examples(motivating_net, fragment_net):
    net, tm = motivating_net
    f = resolve(parse("F fireable(t9)"), net, tm)
    assert names(net, extract_criterion(net, f)) == {"c9"}
    assert names(net, extract_criterion(net, resolve(parse("G !fireable(err)"), net, tm))) \
        == {"c9"}
    assert extract_criterion(net, parse("true")) == frozenset()
    frag, ftm = fragment_net
    g = resolve(parse("G tok(c) <= 0"), frag, ftm)
    assert names(frag, extract_criterion(frag, g)) == {"v_c", "c5"}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_criterion_monotone(seed):
    rng = random.Random(seed)
    p, _ = random_program(rng)
    net, tm = translate(p)
    pool = program_atoms(p, net)
    f1 = resolve(random_formula(rng, pool), net, tm)
    f2 = resolve(And(f1, random_formula(rng, pool)), net, tm)
    c1, c2 = extract_criterion(net, f1), extract_criterion(net, f2)
    assert c1 <= c2
    assert all(net.places[q].roles != EXECUTION for q in c2)


def test_evaluate_lasso_basics():
    a = Atom("fireable", "a")
    f = Globally(Finally(Prop(a)))
    assert ltl.evaluate_lasso(f, [0, 1], 0, [a])
    assert not ltl.evaluate_lasso(f, [1, 0], 1, [a])
    assert ltl.evaluate_lasso(Finally(Prop(a)), [0, 0, 1], 2, [a])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_lasso_evaluators_agree(seed):
    """The library evaluator and the test oracle's backward machine agree."""
    atom_list = [Atom("fireable", f"p{i}") for i in range(2)]
    f = random_formula(random.Random(seed), atom_list, max_atoms=2)
    sem = SemanticMachine(f, atom_list)
    for u, v in all_lassos(4, 3):
        x = sem.loop_vectors(v)[0]
        for a in reversed(u):
            x = sem.step(a, x)
        assert sem.holds(x) == ltl.evaluate_lasso(f, list(u + v), len(u), atom_list)
