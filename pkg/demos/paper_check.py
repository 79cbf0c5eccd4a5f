"""Check the bilinear estimates at a few triples, then sweep a small grid.

    python demos/paper_check.py
"""

from __future__ import annotations

from dyadsum.cli import main

RUNS = [
    # the case-study triple: bounded, inside the admissible region
    ["paper", "--kind", "cucv", "--n", "2", "--s", "-1/2", "--theta", "5/8"],
    # below the admissible region: the low-modulation sum grows like N^(3/20)
    ["paper", "--kind", "cucv", "--n", "2", "--s", "-0.7", "--theta", "5/8"],
    # either side of s = (theta - 1)/2 for the relabelled estimate
    ["paper", "--kind", "cuv", "--n", "2", "--s", "-0.2", "--theta", "0.55"],
    ["paper", "--kind", "cuv", "--n", "2", "--s", "-0.3", "--theta", "0.55"],
    # a row of the region map for n = 3
    ["sweep", "--kind", "uv", "--n", "3", "--s", "-0.6:-0.1:0.1", "--theta", "0.6"],
]

if __name__ == "__main__":
    for argv in RUNS:
        print("$ dyadsum " + " ".join(argv), flush=True)
        code = main(argv)
        print(f"(exit {code})\n", flush=True)
