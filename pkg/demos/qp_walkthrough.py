"""Solve the two built-in QP examples and print one row per constraint subset.

Run with ``python3 demos/qp_walkthrough.py``.
"""

from cqe.algorithm import qp_solve
from cqe.scenarios import pd_three_borders, singular_lifted, table_rows


def show(title, prob):
    res = qp_solve(prob)
    print(title)
    print(f"  {'subset':<10}{'kind':<14}{'candidate':<11}{'value':>9}   point")
    if res.base is not None:
        print(f"  {'{}':<10}{res.base.category.value:<14}{'':<11}{res.base.value:>9.3f}   {res.base.x_particular}")
    for row in table_rows(prob, res):
        value = "" if row["value"] is None else f"{row['value']:.3f}"
        point = "" if row["point"] is None else [round(v, 6) + 0.0 for v in row["point"]]
        print(f"  {str(tuple(row['subset'])):<10}{row['categorization']:<14}{str(row['candidate']):<11}{value:>9}   {point}")
    print(f"  optimum {res.l_tilde_star:.6g} at {[(x.round(12) + 0.0).tolist() for x in res.terminal_optima]}")
    print(f"  optimality subsets {res.optimality_subsets}\n")


show("positive definite, three borders", pd_three_borders())
show("singular Hessian lifted to 3-D with x3 = 1", singular_lifted(1.0))
