"""Run the benchmark corpus and print the verdict table with state counts."""
from pdnet.cli import bench_table, bench_dir, run_bench


def main():
    rows, problems = run_bench(bench_dir())
    print(bench_table(rows))
    print(f"{len(rows)} cases, {len(problems)} mismatches")
    for p in problems:
        print("MISMATCH", p)


if __name__ == "__main__":
    main()
