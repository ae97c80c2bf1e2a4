"""Command-line front end: tree builders, transmission sweeps, evolutions,
penetration probes, Trotter runs, and exact-cover utilities.

Exit codes: 0 success, 1 computation-domain failure (pole, capacity),
2 usage error. Every command is deterministic given its flags (--seed
included); QWALK_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .errors import CapacityError, PoleError
from . import evolution, exact_cover, scattering, spin_encoding, trees
from .hamiltonian import RunwayWeights, hamiltonian_from_tree, reduce_perfect_bushes
from .svgplot import line_plot_svg


class SystemExit2(Exception):
    """Usage error destined for exit code 2."""


def _tree_from_args(args) -> trees.DecisionTree:
    fam = args.family
    if fam == "underlying":
        return trees.build_underlying_tree(args.n)
    if fam == "grover":
        if not args.w:
            raise SystemExit2("--w is required for the grover family")
        return trees.build_grover_tree(args.n, args.w)
    if fam == "even-bush":
        if not args.w:
            raise SystemExit2("--w is required for the even-bush family")
        return trees.build_even_bush_tree(args.n, args.w)
    if fam == "line":
        return trees.from_base_bush_form(trees.line_form(args.n + 1))
    if fam == "exact-cover":
        if not args.instance:
            raise SystemExit2("--instance is required for the exact-cover family")
        with open(args.instance, encoding="utf-8") as fh:
            inst = exact_cover.ExactCoverInstance.from_json(fh.read())
        return trees.trim_tree(inst.n_cols, exact_cover.constraint_family(inst))
    raise SystemExit2(f"unknown family {fam!r}")


def _form_from_args(args) -> trees.BaseBushForm:
    if args.family == "grover":
        return trees.grover_form(args.n)
    if args.family == "even-bush":
        return trees.even_bush_form(args.n)
    if args.family == "line":
        return trees.line_form(args.n + 1)
    raise SystemExit2(f"family {args.family!r} has no base-bush layout")


def _parse_grid(spec: str) -> np.ndarray:
    try:
        kind, lo, hi, num = spec.split(":")
        lo, hi, num = float(lo), float(hi), int(num)
    except ValueError as exc:
        raise SystemExit2(f"bad grid spec {spec!r}; want log:lo:hi:num or lin:lo:hi:num") from exc
    if kind == "log":
        return np.logspace(np.log10(lo), np.log10(hi), num)
    if kind == "lin":
        return np.linspace(lo, hi, num)
    raise SystemExit2(f"unknown grid kind {kind!r}")


def cmd_tree(args) -> int:
    t = _tree_from_args(args)
    text = t.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    summary = {
        "family": args.family,
        "n": t.n_levels,
        "nodes": t.n_nodes,
        "edges": len(t.edges),
        "targets": len(t.target_ids),
    }
    if len(t.target_ids) == 1 and t.n_levels >= 1:
        summary["bush_heights"] = list(trees.to_base_bush_form(t).bush_heights())
    print(json.dumps(summary), file=sys.stderr)
    return 0


def cmd_transmission(args) -> int:
    form = _form_from_args(args)
    grid = _parse_grid(args.grid)
    results = scattering.transmission_sweep(form, grid, csv_path=args.out, version=__version__)
    if args.svg:
        xs = [r.energy for r in results]
        if args.emit == "re":
            ys = [np.real(r.transmission) for r in results]
            line_plot_svg(args.svg, xs, ys, xlog=False, xlabel="E", ylabel="Re T",
                          title=f"{args.family} n={args.n}")
        else:
            ys = [abs(r.transmission) for r in results]
            line_plot_svg(args.svg, xs, ys, xlog=True, xlabel="E", ylabel="|T|",
                          title=f"{args.family} n={args.n}")
    n_poles = sum(r.pole_flag for r in results)
    print(json.dumps({"points": len(results), "poles": n_poles,
                      "max_absT": max(abs(r.transmission) for r in results if not r.pole_flag)}),
          file=sys.stderr)
    if not args.out and not args.svg:
        for r in results:
            print(f"{r.energy!r},{abs(r.transmission)!r},{int(r.pole_flag)}")
    return 0


def _hamiltonian_from_args(args):
    runways = args.runways or 0
    if args.family in ("grover", "even-bush") and args.reduced:
        if args.family == "grover":
            form = trees.grover_form(args.n, runways, runways)
        else:
            form = trees.even_bush_form(args.n, runways, runways)
        return reduce_perfect_bushes(form).hamiltonian
    t = _tree_from_args(args)
    if runways:
        t = trees.attach_runways(t, runways, runways if len(t.target_ids) == 1 else 0)
    rw = RunwayWeights.alternative() if args.alt_runway else None
    return hamiltonian_from_tree(t, runway_weights=rw)


def cmd_evolve(args) -> int:
    h = _hamiltonian_from_args(args)
    report = evolution.penetrability_probe(h, args.mode, args.tmax, args.dt)
    residuals = np.zeros_like(report.p_target)
    if args.out:
        evolution.write_evolution_csv(args.out, report.t_grid, report.p_target, residuals, __version__)
    print(json.dumps({"mode": args.mode, "n": report.n, "max_prob": report.max_prob,
                      "argmax_t": report.argmax_t}))
    return 0


def cmd_penetrate(args) -> int:
    return cmd_evolve(args)


def cmd_trotter(args) -> int:
    terms = spin_encoding.assemble_tree_terms(args.n)
    n_bits = 2 * args.n + 1
    psi0 = np.zeros(1 << n_bits, dtype=complex)
    psi0[spin_encoding.node_state_index(args.n, 0, ())] = 1.0
    plan = spin_encoding.TrotterPlan(args.t, args.m)
    approx = spin_encoding.trotter_evolve(terms, psi0, plan)
    h = spin_encoding.terms_to_dense(terms, n_bits)
    w, v = np.linalg.eigh(h)
    exact = v @ (np.exp(-1j * w * args.t) * (v.conj().T @ psi0))
    overlap = abs(np.vdot(exact, approx))
    print(json.dumps({"n": args.n, "t": args.t, "m": args.m, "overlap_with_exact": overlap,
                      "error_norm": float(np.linalg.norm(approx - exact))}))
    return 0


def cmd_exactcover(args) -> int:
    if args.action == "generate":
        inst = exact_cover.generate_restricted_instance(args.n, args.seed)
        text = inst.to_json()
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return 0
    with open(args.instance, encoding="utf-8") as fh:
        inst = exact_cover.ExactCoverInstance.from_json(fh.read())
    sols = exact_cover.brute_force_solve(inst)
    if args.action == "solve":
        print(json.dumps({"solutions": sols, "count": len(sols)}))
        return 0
    if args.action == "compare":
        t = trees.trim_tree(inst.n_cols, exact_cover.constraint_family(inst))
        leaves = sorted(
            t.labels[v] for v in range(t.n_nodes) if t.levels[v] == inst.n_cols
        )
        match = leaves == sorted(sols)
        print(json.dumps({"solutions": len(sols), "tree_leaves": len(leaves), "match": match}))
        return 0 if match else 1
    raise SystemExit2(f"unknown exactcover action {args.action!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qwalk-trees", description=__doc__)
    p.add_argument("--version", action="version", version=f"qwalk-trees {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tree", help="build and serialize a tree family")
    t.add_argument("--family", required=True,
                   choices=["underlying", "grover", "even-bush", "line", "exact-cover"])
    t.add_argument("--n", type=int, default=4)
    t.add_argument("--w", type=str, default="")
    t.add_argument("--instance", type=str, default="")
    t.add_argument("--out", type=str, default="")
    t.set_defaults(fn=cmd_tree)

    tr = sub.add_parser("transmission", help="energy sweep of T(E) over a base-bush family")
    tr.add_argument("--family", required=True, choices=["grover", "even-bush", "line"])
    tr.add_argument("--n", type=int, required=True)
    tr.add_argument("--grid", type=str, default="log:1e-14:3.999999996:2000")
    tr.add_argument("--out", type=str, default="")
    tr.add_argument("--svg", type=str, default="")
    tr.add_argument("--emit", choices=["abs", "re"], default="abs")
    tr.set_defaults(fn=cmd_transmission)

    for name in ("evolve", "penetrate"):
        e = sub.add_parser(name, help="time-domain probability at the target node")
        e.add_argument("--mode", choices=["classical", "quantum"], required=True)
        e.add_argument("--family", required=True,
                       choices=["underlying", "grover", "even-bush", "line", "exact-cover"])
        e.add_argument("--n", type=int, default=6)
        e.add_argument("--w", type=str, default="")
        e.add_argument("--instance", type=str, default="")
        e.add_argument("--tmax", type=float, default=50.0)
        e.add_argument("--dt", type=float, default=0.1)
        e.add_argument("--runways", type=int, default=0)
        e.add_argument("--reduced", action="store_true",
                       help="use the perfect-bush effective chain")
        e.add_argument("--alt-runway", action="store_true",
                       help="runway profile diagonal 3, couplings -3/2")
        e.add_argument("--out", type=str, default="")
        e.add_argument("--seed", type=int, default=0)
        e.set_defaults(fn=cmd_evolve)

    tt = sub.add_parser("trotter", help="first-order product formula vs exact evolution")
    tt.add_argument("--n", type=int, default=3)
    tt.add_argument("--t", type=float, default=2.0)
    tt.add_argument("--m", type=int, default=64)
    tt.add_argument("--seed", type=int, default=0)
    tt.set_defaults(fn=cmd_trotter)

    x = sub.add_parser("exactcover", help="generate, solve, or cross-check instances")
    x.add_argument("action", choices=["generate", "solve", "compare"])
    x.add_argument("--n", type=int, default=12)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--instance", type=str, default="")
    x.add_argument("--out", type=str, default="")
    x.set_defaults(fn=cmd_exactcover)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit2 as exc:
        parser.exit(2, f"error: {exc}\n")
    except (PoleError, CapacityError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
