"""Command-line front end.

Exit status: 0 on success (a failing verification or test report is still a
successful run), 1 on a domain error, 2 on a usage error.  Diagnostics are a
single line on standard error.  All randomness comes from ``--seed``.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import __version__
from .automorphisms import (
    automorphism_from_json,
    automorphism_to_json,
    extend_homomorphism,
    generate_random,
    verify_automorphism,
)
from .dag import Dag, DagError, load_dag
from .indices import Window, index_from_json, parse_window
from .irm import IrmConfig, NestedIrm, block_matrix_dag, irm_compare
from .modeltheory import antichain_table, check_phi_properties, e_alpha, format_label
from .randomness import PRF_ID, SeededSource
from .sampler import BUILTIN_MODELS, builtin_model, sample_window
from .stats import exchangeability_test

MAX_AUTO_TRIES = 1000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _Version(argparse.Action):
    def __init__(self, option_strings, dest, out=None, **kw):
        super().__init__(option_strings, dest, nargs=0, **kw)
        self.out = out

    def __call__(self, parser, namespace, values, option_string=None):
        (self.out or sys.stdout).write(f"dagexch {__version__} (prf {PRF_ID})\n")
        parser.exit()


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits: {text}")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text}")
    return v


def _dump(obj, out) -> None:
    out.write(json.dumps(obj, indent=2) + "\n")


def _set_text(d: Dag, c) -> str:
    return "{" + ", ".join(d.sort(c)) + "}"


def parse_collection(text: str | None, d: Dag) -> list[frozenset]:
    """``"s+r,s+c"``; ``*`` stands for the full vertex set."""
    if not text:
        return [d.full]
    out = []
    for part in text.split(","):
        part = part.strip()
        c = d.full if part == "*" else d.check_vertices(p.strip() for p in part.split("+") if p.strip())
        if not d.is_closed(c):
            raise DagError(f"collection member {_set_text(d, c)} is not closed")
        out.append(frozenset(c))
    return out


def _window(text: str, d: Dag) -> Window:
    return Window.uniform(d, int(text)) if text.strip().isdigit() else parse_window(text, d)


# -- subcommands ---------------------------------------------------------------


def cmd_closed_sets(args, out) -> None:
    d = load_dag(args.dag)
    sets = d.closed_sets
    if args.format == "json":
        _dump({"vertices": list(d.order), "count": len(sets), "closed_sets": [list(d.sort(c)) for c in sets]}, out)
    else:
        for c in sets:
            out.write(_set_text(d, c) + "\n")


def cmd_antichains(args, out) -> None:
    d = load_dag(args.dag)
    chains = d.antichains()
    images = [d.closure(a) for a in chains]
    bijective = len(set(images)) == len(chains) == len(d.closed_sets) and all(
        d.maximal(c) == a for a, c in zip(chains, images)
    )
    alpha = (
        index_from_json(d, json.loads(args.alpha)) if args.alpha
        else index_from_json(d, {v: 1 for v in d.vertices})
    )
    report = check_phi_properties(d, alpha)
    result = {
        "vertices": list(d.order),
        "antichains": [list(d.sort(a)) for a in chains],
        "closed_sets": len(d.closed_sets),
        "closure_bijection": bijective,
        "alpha": alpha.as_dict(),
        "classes": [format_label(x) for x in e_alpha(alpha)],
        "phi": antichain_table(alpha),
        "phi_properties": report.to_json(),
    }
    if args.format == "json":
        _dump(result, out)
        return
    out.write(f"anti-chains ({len(chains)}; closure bijection {'ok' if bijective else 'FAILED'}):\n")
    for a in chains:
        out.write(f"  {_set_text(d, a)}\n")
    out.write(f"phi table for alpha = {alpha}:\n")
    width = max(len(", ".join(r["antichain"])) for r in result["phi"]) + 2
    for row in result["phi"]:
        left = "{" + ", ".join(row["antichain"]) + "}"
        right = ",".join(f"{v}={n}" for v, n in row["phi"].items())
        out.write(f"  {left:<{width}} -> ({right})\n")
    status = "pass" if report.passed else f"FAIL ({report.reason})"
    out.write(f"phi properties: {status}; max fibre {report.max_fiber}\n")


def _model(name: str, d: Dag, collection):
    if name == "nested-irm":
        if d != block_matrix_dag():
            raise DagError("nested-irm runs on the block-matrix DAG (r0, c0 -> r1, c1)")
        return NestedIrm()
    return builtin_model(name, d, collection)


def cmd_sample(args, out) -> None:
    d = load_dag(args.dag)
    w = _window(args.window, d)
    src = SeededSource(args.seed, "uniforms")
    model = _model(args.model, d, parse_collection(args.collection, d))
    if isinstance(model, NestedIrm):
        values = {(c, a): model.entry(src, c, a) for c, a in model.entries(w)}
    else:
        values = sample_window(model, src, w)
    lines = [
        json.dumps({"C": list(d.sort(c)), "alpha": a.as_dict(), "value": v})
        for (c, a), v in values.items()
    ]
    text = "".join(line + "\n" for line in lines)
    if args.out in (None, "-"):
        out.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)


def select_automorphisms(d: Dag, seed: int, count: int, k: int, move: str | None = None):
    """The first ``count`` automorphisms from successive replicate streams of
    ``SeededSource(seed, "automorphism")``; with ``move`` only those whose table
    at ``move`` is non-trivial are kept."""
    if move is not None and move not in d:
        raise DagError(f"unknown vertex {move!r}")
    base = SeededSource(seed, "automorphism")
    found = []
    for i in range(MAX_AUTO_TRIES):
        t = generate_random(d, base.replicate(i), k)
        if move is None or t.tables()[move]:
            found.append((i, t))
            if len(found) == count:
                return found
    raise DagError(f"no {count} automorphisms moving {move!r} within {MAX_AUTO_TRIES} draws")


def cmd_test_exch(args, out) -> None:
    d = load_dag(args.dag)
    w = _window(args.window, d)
    model = _model(args.model, d, parse_collection(args.collection, d))
    k = args.support or min(w[v] for v in d.vertices)
    label = "irm" if args.model == "nested-irm" else "uniforms"
    reports = []
    for i, t in select_automorphisms(d, args.seed, args.autos, k, args.move):
        r = exchangeability_test(model, t, w, args.reps, args.perms,
                                 SeededSource(args.seed, label).replicate(i), args.level)
        entry = r.to_json()
        entry["automorphism"] = i
        reports.append(entry)
    _dump({
        "model": args.model,
        "dag": list(d.order),
        "window": {v: w[v] for v in d.order},
        "support": k,
        "passed": sum(r["passed"] for r in reports),
        "runs": len(reports),
        "reports": reports,
    }, out)


def cmd_irm_compare(args, out) -> None:
    res = irm_compare(args.rows, args.cols, args.samples, SeededSource(args.seed, "irm"),
                      IrmConfig(args.concentration, (args.prior_a, args.prior_b)))
    if args.format == "json":
        _dump(res, out)
        return
    out.write(f"{'pattern':<{max(7, args.rows * args.cols)}}  {'generative':>12}  {'representation':>14}  {'oracle':>12}\n")
    for row in res["patterns"]:
        out.write(
            f"{row['pattern']:<{max(7, args.rows * args.cols)}}  {row['generative']:>12.6f}  "
            f"{row['representation']:>14.6f}  {row['oracle']:>12.6f}\n"
        )
    for name, v in res["tv"].items():
        out.write(f"tv {name}: {v:.6f}\n")


def _read_json_lines(path: str):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def cmd_extend_homo(args, out) -> None:
    d = load_dag(args.dag)
    pairs = []
    for row in _read_json_lines(args.pairs):
        if not isinstance(row, list) or len(row) != 2:
            raise DagError(f"each line must hold a JSON pair [index, index], got {row!r}")
        pairs.append((index_from_json(d, row[0]), index_from_json(d, row[1])))
    _dump(automorphism_to_json(extend_homomorphism(d, pairs)), out)


def cmd_verify_auto(args, out) -> None:
    d = load_dag(args.dag)
    with open(args.auto) as fh:
        t = automorphism_from_json(d, json.load(fh))
    _dump(verify_automorphism(t, _window(args.window, d)).to_json(), out)


# -- parser ----------------------------------------------------------------------


def build_parser(out=None) -> argparse.ArgumentParser:
    p = _Parser(prog="dagexch", description="DAG-exchangeable random arrays")
    p.add_argument("--version", action=_Version, out=out, help="print build and PRF identifiers")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def dag_cmd(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("dag", help="path to a .dag file or the name of a shipped fixture")
        sp.set_defaults(fn=fn)
        return sp

    sp = dag_cmd("closed-sets", cmd_closed_sets, "list the closed vertex sets")
    sp.add_argument("--format", choices=("text", "json"), default="text")

    sp = dag_cmd("antichains", cmd_antichains, "anti-chains, phi table and property report")
    sp.add_argument("--alpha", help='full-domain index as JSON, e.g. \'{"s": 1, "r": 2, "c": 3}\'')
    sp.add_argument("--format", choices=("text", "json"), default="json")

    models = (*BUILTIN_MODELS, "nested-irm")
    sp = dag_cmd("sample", cmd_sample, "sample a window as JSON lines")
    sp.add_argument("--model", required=True, choices=models)
    sp.add_argument("--seed", required=True, type=_u64)
    sp.add_argument("--window", required=True, help='"v1=4,v2=3", "*=K" or just K')
    sp.add_argument("--collection", help='closed sets like "s+r,s+c"; "*" is the full set')
    sp.add_argument("--out", help="output file (default standard output)")

    sp = dag_cmd("test-exch", cmd_test_exch, "exchangeability tests under random automorphisms")
    sp.add_argument("--model", required=True, choices=models)
    sp.add_argument("--seed", required=True, type=_u64)
    sp.add_argument("--window", required=True)
    sp.add_argument("--collection")
    sp.add_argument("--autos", type=_positive, default=20)
    sp.add_argument("--reps", type=_positive, default=2000)
    sp.add_argument("--perms", type=_positive, default=200)
    sp.add_argument("--level", type=float, default=0.01)
    sp.add_argument("--support", type=_positive, help="permutation support (default: smallest window bound)")
    sp.add_argument("--move", metavar="VERTEX", help="keep only automorphisms that permute this vertex")

    irm = sub.add_parser("irm", help="infinite relational model")
    irm_sub = irm.add_subparsers(dest="irm_command", required=True, parser_class=_Parser)
    sp = irm_sub.add_parser("compare", help="generative vs representation vs exact law")
    sp.add_argument("--rows", type=_positive, required=True)
    sp.add_argument("--cols", type=_positive, required=True)
    sp.add_argument("--samples", type=_positive, required=True)
    sp.add_argument("--seed", type=_u64, required=True)
    sp.add_argument("--concentration", type=float, default=1.0)
    sp.add_argument("--prior-a", type=float, default=1.0)
    sp.add_argument("--prior-b", type=float, default=1.0)
    sp.add_argument("--format", choices=("text", "json"), default="json")
    sp.set_defaults(fn=cmd_irm_compare)

    sp = dag_cmd("extend-homo", cmd_extend_homo, "extend a finite homomorphism to an automorphism")
    sp.add_argument("--pairs", required=True, help="JSON lines, each [index, index]")

    sp = dag_cmd("verify-auto", cmd_verify_auto, "check an automorphism on a window")
    sp.add_argument("--auto", required=True, help="automorphism JSON file")
    sp.add_argument("--window", required=True)
    return p


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser(out).parse_args(argv)
    except UsageError as exc:
        err.write(f"dagexch: usage error: {exc}\n")
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        args.fn(args, out)
    except (ValueError, OSError) as exc:
        msg = " ".join(str(exc).split())
        err.write(f"dagexch: error: {msg}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
