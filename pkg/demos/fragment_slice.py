"""Slice the three-assignment fragment on G tok(c) <= 0 and show each
iteration of the on-demand propagation."""
from pdnet import ltl
from pdnet.cli import bench_dir
from pdnet.program import parse
from pdnet.slicer import slice_net
from pdnet.translate import translate_block


def main():
    net, tmap = translate_block(parse((bench_dir() / "fragment.cpl").read_text()))
    f = ltl.resolve(ltl.parse("G tok(c) <= 0"), net, tmap)
    sliced = slice_net(net, ltl.extract_criterion(net, f), tmap=tmap)
    report = sliced.report()
    for i, step in enumerate(report["trace"], 1):
        print(f"iteration {i}: place {step['place']} adds places {step['added_places']}"
              f" and transitions {step['added_transitions']}")
    print("removed:", report["removed_transitions"], report["removed_places"])
    print("repair arcs:", report["repair_arcs"])


if __name__ == "__main__":
    main()
