"""Command line front end: check, bench, export."""
from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

from . import ltl
from .checker import (StateBoundExceeded, check, max_states_default, product_dot,
                      reachability_graph)
from .deps import dependence_dot, dependence_edges
from .net import NetError, net_to_json, to_dot
from .program import DomainOverflow, ProgramError, parse
from .slicer import SliceError, slice_net
from .translate import TranslationError, translate

EXIT_HOLDS, EXIT_VIOLATED, EXIT_ERROR = 0, 1, 2
STAGES = ("net", "deps", "slice", "rg", "product")
ERRORS = (OSError, ProgramError, ltl.FormulaError, TranslationError, NetError, SliceError,
          DomainOverflow, StateBoundExceeded, ValueError)


def _int_range(text):
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _max_states(text):
    try:
        return int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def read_formula(arg):
    if arg.startswith("@"):
        return Path(arg[1:]).read_text().strip()
    return arg


def load_program(path, int_range=None):
    return parse(Path(path).read_text(), domain=int_range)


def prepare(program, formula, slicing):
    """Translate, resolve and optionally slice; returns (net, formula, sliced or None, tmap)."""
    net, tmap = translate(program)
    f = ltl.resolve(ltl.parse(formula), net, tmap)
    if not slicing:
        return net, f, None, tmap
    sliced = slice_net(net, ltl.extract_criterion(net, f), observed=ltl.observed(f), tmap=tmap)
    g = ltl.resolve(ltl.parse(formula), sliced.net, tmap)
    return sliced.net, g, sliced, tmap


def run_check(program, formula, slicing=True, max_states=None):
    start = time.perf_counter()
    net, f, sliced, tmap = prepare(program, formula, slicing)
    res = check(net, f, max_states, tmap)
    orig = sliced.original if sliced else net
    res.stats["slice"] = {"places_kept": len(net.places),
                          "transitions_kept": len(net.transitions),
                          "places_total": len(orig.places),
                          "transitions_total": len(orig.transitions)}
    res.stats["time"] = time.perf_counter() - start
    return res


def _text_report(res):
    lines = [f"verdict: {res.verdict}", f"formula: {res.formula}"]
    s = res.stats
    lines.append(f"markings: {s.get('markings')}  product states: {s.get('product_states')}"
                 f"  fired: {s.get('fired')}")
    sl = s.get("slice") or {}
    if sl:
        lines.append(f"net: {sl['places_kept']}/{sl['places_total']} places, "
                     f"{sl['transitions_kept']}/{sl['transitions_total']} transitions")
    if res.counterexample is not None:
        prefix, loop = res.trace_names()
        lines.append("counterexample prefix: " + " ".join(prefix))
        lines.append("counterexample loop: " + " ".join(loop))
        lines.append("statements: " + ",".join(str(x) for x in res.statement_sequence()))
    if "error" in s:
        lines.append(f"error: {s['error']}")
    return "\n".join(lines)


def cmd_check(args):
    program = load_program(args.program, args.int_range)
    res = run_check(program, read_formula(args.ltl), args.slice, args.max_states)
    if args.fmt == "json":
        print(json.dumps(res.to_json(), indent=2))
    else:
        print(_text_report(res))
    if res.verdict == "unknown":
        print(f"state bound exceeded: {res.stats.get('error')}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_HOLDS if res.holds else EXIT_VIOLATED


# ------------------------------------------------------------------- bench

def bench_dir():
    return Path(str(resources.files("pdnet") / "bench"))


def run_bench(corpus, max_states=None):
    """Run every case of ``corpus``; returns (report rows, mismatch messages)."""
    corpus = Path(corpus)
    exp_file = corpus / "expected.json"
    expected = json.loads(exp_file.read_text()) if exp_file.exists() else {}
    rows, problems = [], []
    for prog_file in sorted(corpus.glob("*.cpl")):
        name = prog_file.stem
        formulas = sorted(corpus.glob(f"{name}.psi*.ltl"))
        if not formulas:
            continue
        program = parse(prog_file.read_text())
        for k, ffile in enumerate(formulas):
            formula = ffile.read_text().strip()
            row = {"program": name, "formula_file": ffile.name, "formula": formula}
            for mode in ("sliced", "unsliced"):
                res = run_check(program, formula, mode == "sliced", max_states)
                sl = res.stats["slice"]
                row[mode] = {"verdict": res.verdict, "states": res.stats.get("markings"),
                             "product_states": res.stats.get("product_states"),
                             "places": sl["places_kept"], "transitions": sl["transitions_kept"],
                             "time": round(res.stats["time"], 4)}
            a, b = row["sliced"]["verdict"], row["unsliced"]["verdict"]
            if a != b:
                problems.append(f"{name} {ffile.name}: sliced {a} != unsliced {b}")
            if name in expected and k < len(expected[name]):
                want = "holds" if expected[name][k] else "violated"
                row["expected"] = want
                if b != want:
                    problems.append(f"{name} {ffile.name}: expected {want}, got {b}")
            rows.append(row)
    return rows, problems


def bench_table(rows):
    out = [f"{'program':<10} {'formula':<18} {'exp':<9} {'sliced':<9} {'unsliced':<9}"
           f" {'states s/u':>13} {'places s/u':>11}"]
    for r in rows:
        s, u = r["sliced"], r["unsliced"]
        out.append(f"{r['program']:<10} {r['formula_file']:<18} {r.get('expected', '-'):<9} "
                   f"{s['verdict']:<9} {u['verdict']:<9} "
                   f"{str(s['states']) + '/' + str(u['states']):>13} "
                   f"{str(s['places']) + '/' + str(u['places']):>11}")
    return "\n".join(out)


def cmd_bench(args):
    corpus = Path(args.corpus) if args.corpus else bench_dir()
    if not corpus.is_dir():
        raise OSError(f"no such corpus directory: {corpus}")
    rows, problems = run_bench(corpus, args.max_states)
    if args.fmt == "json":
        print(json.dumps({"cases": rows, "mismatches": problems}, indent=2))
    else:
        print(bench_table(rows))
        for p in problems:
            print("MISMATCH " + p)
    if problems:
        print("\n".join(problems), file=sys.stderr)
        return EXIT_ERROR
    return EXIT_HOLDS


# ------------------------------------------------------------------ export

def export(program, stage, fmt="dot", formula=None, slicing=True, max_states=None):
    """Render one pipeline stage as a string."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    formula = formula or "true"
    if stage == "net":
        net, _tmap = translate(program)
        return to_dot(net) if fmt == "dot" else json.dumps(net_to_json(net), indent=2)
    if stage == "deps":
        net, tmap = translate(program)
        edges = dependence_edges(net, tmap)
        if fmt == "dot":
            return dependence_dot(net, edges)
        return json.dumps([{"src": net.transitions[e.src].name, "dst": net.transitions[e.dst].name,
                            "kind": e.kind,
                            "place": None if e.place is None else net.places[e.place].name}
                           for e in sorted(edges, key=lambda e: (e.src, e.dst, e.kind))],
                          indent=2)
    net, f, sliced, _tmap = prepare(program, formula, slicing)
    if stage == "slice":
        if sliced is None:
            net0 = net
            report = {"criterion": [], "kept_places": sorted(p.name for p in net0.places),
                      "kept_transitions": sorted(t.name for t in net0.transitions),
                      "removed_places": [], "removed_transitions": [], "repair_arcs": []}
        else:
            report = sliced.report()
        if fmt == "dot":
            return to_dot(net, title="slice")
        return json.dumps(report, indent=2)
    if stage == "rg":
        rg = reachability_graph(net, max_states)
        if fmt == "dot":
            return rg.to_dot(net)
        return json.dumps({"markings": len(rg), "edges": rg.edge_count(),
                           "dead": len(rg.dead)}, indent=2)
    dot = product_dot(net, f, max_states or 2000)
    if fmt == "dot":
        return dot
    nodes = sum(1 for line in dot.splitlines() if "[shape=" in line or "shape=point" in line)
    edges = sum(1 for line in dot.splitlines() if "->" in line)
    return json.dumps({"product_states": nodes, "edges": edges}, indent=2)


def cmd_export(args):
    program = load_program(args.program, args.int_range)
    formula = read_formula(args.ltl) if args.ltl else None
    fmt = "json" if args.fmt == "text" else args.fmt
    print(export(program, args.stage, fmt, formula, args.slice, args.max_states), end="")
    if fmt == "json":
        print()
    return EXIT_HOLDS


# ------------------------------------------------------------------- main

def build_parser():
    ap = argparse.ArgumentParser(prog="pdnet", description="PDNet slicing LTL-X model checker")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fmt_default):
        p.add_argument("--max-states", type=_max_states, default=None,
                       help="state bound (default 1e6 or $PDNET_MAX_STATES)")
        p.add_argument("--fmt", choices=("json", "text", "dot"), default=fmt_default)
        p.add_argument("--seed-order", choices=("id",), default="id",
                       help="successor order (transition id, then binding)")

    def program_args(p):
        p.add_argument("program")
        p.add_argument("--slice", dest="slice", action="store_true", default=True)
        p.add_argument("--no-slice", dest="slice", action="store_false")
        p.add_argument("--int-range", type=_int_range, default=None, metavar="LO:HI",
                       help="default domain of int variables")

    c = sub.add_parser("check", help="model check an LTL-X formula")
    program_args(c)
    c.add_argument("--ltl", required=True, help="formula or @file")
    common(c, "text")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", help="run the benchmark corpus")
    b.add_argument("corpus", nargs="?", default=None)
    common(b, "text")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("export", help="emit DOT/JSON for a pipeline stage")
    program_args(e)
    e.add_argument("--ltl", default=None, help="formula or @file (slice/product stages)")
    e.add_argument("--stage", default="net", help="|".join(STAGES))
    common(e, "dot")
    e.set_defaults(func=cmd_export)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_HOLDS
    if args.max_states is None:
        try:
            args.max_states = max_states_default()
        except ValueError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_ERROR
    try:
        return args.func(args)
    except ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
