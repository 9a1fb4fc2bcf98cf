#!/usr/bin/env python3
"""Solve an MPS model with HiGHS and write a plain-text solution file.

Uses the highspy bindings when importable, otherwise scipy.optimize.milp.
After the MIP solve, integer columns are fixed at their rounded values and the
remaining LP is re-solved with tight tolerances so that the reported point
satisfies every row to well below 1e-6.

Output (generic format):
    # status optimal|feasible|infeasible|unbounded|error [message]
    # objective VALUE
    # gap VALUE
    NAME VALUE
"""

import argparse
import math
import sys
import time


def write_generic(path, status, objective=None, gap=None, names=(), values=(), message=""):
    with open(path, "w") as f:
        f.write(f"# status {status}{(' ' + message) if message else ''}\n")
        if objective is not None:
            f.write(f"# objective {objective!r}\n")
        if gap is not None:
            f.write(f"# gap {gap!r}\n")
        for n, v in zip(names, values):
            f.write(f"{n} {float(v)!r}\n")


def solve_highspy(args):
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", args.gap)
    h.setOptionValue("time_limit", args.time_limit)
    h.setOptionValue("random_seed", args.seed % 2147483647)
    h.setOptionValue("threads", 1)
    if h.readModel(args.model) != highspy.HighsStatus.kOk:
        return ("error", None, None, [], [], "could not read model")
    started = time.monotonic()
    h.run()
    status = h.getModelStatus()
    S = highspy.HighsModelStatus
    if status in (S.kUnboundedOrInfeasible, S.kInfeasible):
        # Presolve occasionally declares feasible models infeasible; confirm without it.
        h.setOptionValue("presolve", "off")
        h.setOptionValue("time_limit", max(1.0, args.time_limit - (time.monotonic() - started)))
        h.run()
        status = h.getModelStatus()
    if status == S.kInfeasible:
        return ("infeasible", None, None, [], [], "")
    if status in (S.kUnbounded, S.kUnboundedOrInfeasible):
        return ("unbounded", None, None, [], [], "")
    info = h.getInfo()
    if info.primal_solution_status != 2:
        return ("error", None, None, [], [], h.modelStatusToString(status).replace(" ", "_"))
    word = "optimal" if status == S.kOptimal else "feasible"
    lp = h.getLp()
    names = list(lp.col_names_)
    x = list(h.getSolution().col_value)
    objective = info.objective_function_value
    gap = info.mip_gap if math.isfinite(info.mip_gap) else None
    integrality = list(lp.integrality_)
    int_cols = [j for j, t in enumerate(integrality) if int(t) != 0]
    if int_cols:
        remaining = max(1.0, args.time_limit - (time.monotonic() - started))
        fixed = [float(round(x[j])) for j in int_cols]
        h.changeColsBounds(len(int_cols), int_cols, fixed, fixed)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("mip_feasibility_tolerance", 1e-9)
        h.setOptionValue("time_limit", remaining)
        h.run()
        if h.getModelStatus() == S.kOptimal and h.getInfo().primal_solution_status == 2:
            x = list(h.getSolution().col_value)
            objective = h.getInfo().objective_function_value
    return (word, objective, gap, names, x, "")


def read_mps(path):
    """Whitespace-separated reader for the fixed-format files written by oosplan."""
    import numpy as np

    sense_max = False
    obj_row = None
    rows, row_kind = {}, []
    cols, col_names = {}, []
    obj, lo, up, integer = [], [], [], []
    entries = []
    rhs = {}
    section = None
    integral = False
    with open(path) as f:
        for raw in f:
            if not raw.strip() or raw.startswith("*"):
                continue
            if not raw.startswith(" "):
                parts = raw.split()
                section = parts[0]
                if section == "OBJSENSE" and len(parts) > 1:
                    sense_max = parts[1].startswith("MAX")
                continue
            p = raw.split()
            if section == "OBJSENSE":
                sense_max = p[0].startswith("MAX")
            elif section == "ROWS":
                if p[0] == "N":
                    obj_row = obj_row or p[1]
                else:
                    rows[p[1]] = len(row_kind)
                    row_kind.append(p[0])
            elif section == "COLUMNS":
                if len(p) >= 3 and p[1] == "'MARKER'":
                    integral = p[2] == "'INTORG'"
                    continue
                name = p[0]
                if name not in cols:
                    cols[name] = len(col_names)
                    col_names.append(name)
                    obj.append(0.0)
                    lo.append(0.0)
                    up.append(math.inf)
                    integer.append(1 if integral else 0)
                j = cols[name]
                for k in range(1, len(p) - 1, 2):
                    r, v = p[k], float(p[k + 1])
                    if r == obj_row:
                        obj[j] = v
                    else:
                        entries.append((rows[r], j, v))
            elif section == "RHS":
                for k in range(1, len(p) - 1, 2):
                    if p[k] != obj_row:
                        rhs[rows[p[k]]] = float(p[k + 1])
            elif section == "BOUNDS":
                kind, j = p[0], cols[p[2]]
                val = float(p[3]) if len(p) > 3 else None
                if kind == "UP":
                    up[j] = val
                elif kind == "LO":
                    lo[j] = val
                elif kind == "FX":
                    lo[j] = up[j] = val
                elif kind == "FR":
                    lo[j], up[j] = -math.inf, math.inf
                elif kind == "MI":
                    lo[j] = -math.inf
                elif kind == "PL":
                    up[j] = math.inf
                elif kind == "BV":
                    lo[j], up[j], integer[j] = 0.0, 1.0, 1
    m, n = len(row_kind), len(col_names)
    rlo = np.full(m, -np.inf)
    rup = np.full(m, np.inf)
    for i, k in enumerate(row_kind):
        b = rhs.get(i, 0.0)
        if k in ("L", "E"):
            rup[i] = b
        if k in ("G", "E"):
            rlo[i] = b
    return dict(
        maximize=sense_max,
        names=col_names,
        c=np.array(obj, dtype=float),
        lo=np.array(lo, dtype=float),
        up=np.array(up, dtype=float),
        integer=np.array(integer, dtype=int),
        entries=entries,
        shape=(m, n),
        rlo=rlo,
        rup=rup,
    )


def solve_scipy(args):
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, linprog, milp
    from scipy.sparse import coo_matrix

    d = read_mps(args.model)
    m, n = d["shape"]
    sign = -1.0 if d["maximize"] else 1.0
    c = sign * d["c"]
    if n == 0:
        return ("optimal", 0.0, 0.0, [], [], "")
    if d["entries"]:
        r, j, v = zip(*d["entries"])
    else:
        r, j, v = (), (), ()
    A = coo_matrix((v, (r, j)), shape=(m, n)).tocsr()
    cons = [LinearConstraint(A, d["rlo"], d["rup"])] if m else []
    res = milp(
        c,
        constraints=cons,
        integrality=d["integer"],
        bounds=Bounds(d["lo"], d["up"]),
        options={"time_limit": args.time_limit, "mip_rel_gap": args.gap, "disp": False},
    )
    if res.status == 2:
        return ("infeasible", None, None, [], [], "")
    if res.status == 3:
        return ("unbounded", None, None, [], [], "")
    if res.x is None:
        return ("error", None, None, [], [], (res.message or "no solution").replace(" ", "_"))
    word = "optimal" if res.status == 0 else "feasible"
    x = np.array(res.x)
    gap = getattr(res, "mip_gap", None)
    ints = d["integer"] == 1
    if ints.any():
        lo, up = d["lo"].copy(), d["up"].copy()
        lo[ints] = np.round(x[ints])
        up[ints] = np.round(x[ints])
        bounds = list(zip(lo, [None if math.isinf(u) else u for u in up]))
        bounds = [(None if math.isinf(a) else a, b) for a, b in bounds]
        eq = d["rlo"] == d["rup"]
        le = np.isfinite(d["rup"]) & ~eq
        ge = np.isfinite(d["rlo"]) & ~eq
        A_ub = None
        b_ub = None
        if le.any() or ge.any():
            from scipy.sparse import vstack

            A_ub = vstack([A[le], -A[ge]]).tocsr()
            b_ub = np.concatenate([d["rup"][le], -d["rlo"][ge]])
        lp = linprog(
            c,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A[eq] if eq.any() else None,
            b_eq=d["rup"][eq] if eq.any() else None,
            bounds=bounds,
            method="highs",
            options={"primal_feasibility_tolerance": 1e-9},
        )
        if lp.status == 0:
            x = np.array(lp.x)
            x[ints] = np.round(x[ints])
    objective = float(np.dot(d["c"], x))
    return (word, objective, gap, d["names"], list(x), "")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--gap", type=float, default=0.01)
    ap.add_argument("--time-limit", type=float, default=7200.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--backend", choices=["auto", "highspy", "scipy"], default="auto")
    args = ap.parse_args()

    backends = []
    if args.backend in ("auto", "highspy"):
        try:
            import highspy  # noqa: F401

            backends.append(solve_highspy)
        except ImportError:
            pass
    if args.backend in ("auto", "scipy") and not backends:
        try:
            import scipy.optimize  # noqa: F401

            if hasattr(scipy.optimize, "milp"):
                backends.append(solve_scipy)
        except ImportError:
            pass
    if not backends:
        print("no HiGHS backend available (install highspy or scipy>=1.9)", file=sys.stderr)
        sys.exit(127)
    try:
        word, objective, gap, names, x, message = backends[0](args)
    except Exception as exc:  # report instead of crashing so the caller sees a status
        write_generic(args.solution, "error", message=f"{type(exc).__name__}: {exc}".replace("\n", " "))
        return
    write_generic(args.solution, word, objective, gap, names, x, message)


if __name__ == "__main__":
    main()
