#!/usr/bin/env python3
"""Solve an LP file with HiGHS and write a solution file mfd-safe can read.

usage: highs_solve.py MODEL.lp SOLUTION [TIME_LIMIT] [SEED]
"""
import sys

import highspy


def main():
    lp, sol = sys.argv[1], sys.argv[2]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    if len(sys.argv) > 3:
        h.setOptionValue("time_limit", max(float(sys.argv[3]), 0.001))
    if len(sys.argv) > 4:
        h.setOptionValue("random_seed", int(sys.argv[4]) % 2147483647)
    if h.readModel(lp) == highspy.HighsStatus.kError:
        sys.exit("cannot read " + lp)
    h.run()
    status = h.getModelStatus()
    with open(sol, "w") as out:
        if status == highspy.HighsModelStatus.kOptimal:
            out.write("status optimal\n")
            out.write("objective %.10g\n" % h.getInfo().objective_function_value)
            values = h.getSolution().col_value
            for i, v in enumerate(values):
                out.write("%s %.10g\n" % (h.getColName(i)[1], v))
        elif status == highspy.HighsModelStatus.kInfeasible:
            out.write("status infeasible\n")
        elif status == highspy.HighsModelStatus.kTimeLimit:
            out.write("status timeout\n")
        else:
            sys.exit("solver status " + h.modelStatusToString(status))


if __name__ == "__main__":
    main()
