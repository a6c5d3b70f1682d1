"""Run every attack scenario against one seed and print the outcome table."""

import sys

from vanetfl.matrix import UNMAPPED_ROWS, matrix_rows, matrix_table, run_matrix
from vanetfl.simulation import SimConfig

rounds = int(sys.argv[1]) if len(sys.argv) > 1 else 10
base = SimConfig(rounds=rounds)
table = matrix_table(run_matrix(base), matrix_rows(base))

width = max(len(r["row"]) for r in table)
print(f"{'row':<{width}}  detected blocked  mechanism           accuracy delta")
for r in table:
    print(f"{r['row']:<{width}}  {r['detected']!s:<8} {r['blocked']!s:<7}  {r['mechanism']:<18}  {r['accuracy_delta']:.3g}")
    if r["control"]:
        print(f"{'':<{width}}  ({r['notes']})")

print("\nnot simulated (no mechanism to exercise):", ", ".join(UNMAPPED_ROWS))
