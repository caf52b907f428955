import random

from hypothesis import given, settings, strategies as st

from pdnet import ltl
from pdnet.gen import abstract_atoms, program_atoms, random_formula, random_program
from pdnet.interp import Interpreter
from pdnet.translate import translate


def depth(f):
    kids = [getattr(f, k) for k in ("sub", "left", "right") if hasattr(f, k)]
    return 1 + max((depth(k) for k in kids), default=0)


def test_same_seed_same_program():
    assert random_program(7)[1] == random_program(7)[1]
    assert random_program(random.Random(3))[1] == random_program(random.Random(3))[1]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_random_programs_are_bounded(seed):
    p, text = random_program(seed, max_configs=3000)
    assert not Interpreter(p).reachable(3000).truncated
    assert text.count("thread ") == 2
    net, _ = translate(p)
    net.validate()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_random_formula_limits(seed):
    atoms = abstract_atoms(5)
    f = random_formula(random.Random(seed), atoms, max_atoms=3, max_depth=4)
    assert len(ltl.atoms(f)) <= 3 and set(ltl.atoms(f)) <= set(atoms)
    assert depth(f) <= 4
    assert ltl.parse(ltl.show(f)) == f


def test_program_atoms_resolve():
    p, _ = random_program(11)
    net, tm = translate(p)
    for a in program_atoms(p, net):
        ltl.resolve(ltl.Prop(a), net, tm)
