"""Command line front end.

Every command emits one canonical JSON report (keys sorted, no
timestamps), so identical invocations produce byte-identical output.
Range-style results can be emitted as CSV instead.  Randomized commands
take an explicit seed; there is no ambient randomness.  Exit codes:
0 success, 2 a declared expectation failed, 3 resource limit hit,
4 malformed spec or arguments.
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from . import __version__, containers, extremal, graphons, hosts, properties, templates

EXIT_OK = 0
EXIT_EXPECT = 2
EXIT_RESOURCE = 3
EXIT_SPEC = 4


class SpecError(ValueError):
    """Bad arguments, bad spec file, or bad referenced files."""


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def _load_json(path):
    try:
        with open(path, "r") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SpecError("file not found: %s" % path)
    except json.JSONDecodeError as e:
        raise SpecError("%s: invalid JSON at line %d column %d: %s"
                        % (path, e.lineno, e.colno, e.msg))


def _prop(name):
    try:
        return properties.get_property(name)
    except KeyError:
        known = ", ".join(n for n, _ in properties.list_properties())
        raise SpecError("unknown property id %r (known: %s)" % (name, known))


def _graphon(path):
    obj = _load_json(path)
    try:
        return graphons.graphon_from_json(obj)
    except (KeyError, ValueError) as e:
        raise SpecError("%s: not a valid graphon: %s" % (path, e))


# ---------------------------------------------------------------------------
# command handlers: dict of params -> (result dict, nodes or None)
# ---------------------------------------------------------------------------


def _run_extremal(p):
    prop = _prop(p["property"])
    budget = int(p["budget"])
    if p.get("base"):
        base = templates.template_from_json(_load_json(p["base"]))
        res = extremal.relative_extremal_entropy(base, prop, budget)
        sites = base.host.num_sites
    else:
        res = extremal.extremal_entropy(prop, int(p["n"]), budget)
        sites = prop.host_for(int(p["n"])).num_sites
    out = res.to_json()
    out["density"] = res.value / sites if sites else 0.0
    out["oracle"] = "palette branch-and-bound (%s)" % res.optimality
    out["tolerance"] = 1e-9
    return out, res.nodes_explored


def _run_speed(p):
    prop = _prop(p["property"])
    count = properties.speed(prop, int(p["n"]))
    return {"count": count, "oracle": "exact enumeration", "tolerance": 0}, None


def _run_badpairs(p):
    prop = _prop(p["property"])
    t = templates.template_from_json(_load_json(p["template"]))
    bad = properties.bad_pairs(t, prop.effective_family())
    return {"bad_pairs": bad, "entropy": templates.entropy(t),
            "oracle": "exact embedding enumeration", "tolerance": 0}, None


def _run_density(p):
    prop = _prop(p["property"])
    rep = extremal.entropy_density_sequence(
        prop, int(p["n_max"]), int(p["n_min"]), int(p["budget"]))
    rep["rows"] = rep.pop("terms")
    rep["csv_fields"] = ["n", "value", "density"]
    rep["oracle"] = "palette branch-and-bound per term"
    rep["tolerance"] = 1e-12
    return rep, None


def _run_containers(p):
    prop = _prop(p["property"])
    rep = containers.container_pipeline(
        prop, int(p["n"]), float(p["delta"]), int(p["seed"]),
        eps1=(float(p["eps1"]) if p.get("eps1") is not None else None),
        eps=float(p["eps"]), sparsify=not p.get("no_sparsify", False),
        coverage_mode=p.get("coverage", "exact"), samples=int(p["samples"]),
        node_budget=int(p["budget"]), solver_budget=int(p["solver_budget"]))
    rep["oracle"] = ("exact postcondition checks"
                     if p.get("coverage", "exact") == "exact"
                     else "monte-carlo coverage estimate")
    nodes = rep.get("search", {}).get("nodes")
    return rep, nodes


def _run_transfer(p):
    prop = _prop(p["property"])
    rep = extremal.transference_experiment(
        prop, int(p["n"]), float(p["p"]), int(p["colour"]),
        int(p["trials"]), int(p["seed"]),
        epsilon=(float(p["epsilon"]) if p.get("epsilon") is not None else None),
        budget=int(p["budget"]))
    rep["rows"] = [{"trial": i, "value": v, "ratio": r}
                   for i, (v, r) in enumerate(zip(rep["values"], rep["ratios"]))]
    rep["csv_fields"] = ["trial", "value", "ratio"]
    rep["oracle"] = "proved per-trial relative solves"
    rep["tolerance"] = 1e-9
    return rep, None


def _run_typical(p):
    prop = _prop(p["property"])
    if p.get("witness"):
        wits = [templates.template_from_json(_load_json(path))
                for path in p["witness"]]
    else:
        res = extremal.extremal_entropy(prop, int(p["n"]), int(p["budget"]))
        if not res.proved:
            raise properties.ResourceLimitError(
                "no proved extremal witness within budget; pass --witness")
        wits = [res.witness]
    rep = extremal.typical_structure_experiment(
        prop, int(p["n"]), wits, int(p["samples"]), int(p["seed"]))
    rep["oracle"] = ("exact member enumeration" if rep["mode"] == "exact"
                     else "rejection sampling")
    return rep, None


def _run_goodness(p):
    rep = hosts.goodness_diagnostic(
        p["kind"], int(p["pattern"]), [int(x) for x in p["hosts"]])
    rep["rows"] = [asdict(r) for r in rep["rows"]]
    rep["csv_fields"] = ["kind", "pattern_order_param", "host_order_param",
                        "count", "overlap_i", "overlap_j", "edge_ratio",
                        "vertex_ratio"]
    rep["oracle"] = "exact embedding-pair enumeration"
    rep["tolerance"] = 0
    return rep, None


def _run_graphon_cutdist(p):
    u = _graphon(p["u"])
    w = _graphon(p["w"])
    res = graphons.cut_distance(u, w, metric=p.get("metric", "dk"),
                                disjoint=p.get("disjoint", False),
                                seed=int(p.get("seed", 0)))
    out = res.to_json()
    out["metric"] = p.get("metric", "dk")
    out["oracle"] = ("exact refinement enumeration" if res.exact
                     else "certified lower/upper bounds (flagged)")
    out["tolerance"] = 1e-9
    return out, None


def _run_graphon_entropy(p):
    w = _graphon(p["w"])
    return {"entropy": graphons.entropy_graphon(w),
            "oracle": "closed-form cell integration",
            "tolerance": 1e-12}, None


def _run_graphon_weakreg(p):
    w = _graphon(p["w"])
    part, ews, dist = graphons.weak_regularity(w, int(p["m"]))
    return {"distance": dist, "partition": part.to_json(),
            "class_measures": [float(x) for x in part.measures()],
            "entropy_before": graphons.entropy_graphon(w),
            "entropy_after": graphons.entropy_graphon(ews),
            "oracle": "exact distance on the refinement",
            "tolerance": 1e-9}, None


def _run_graphon_sample(p):
    w = _graphon(p["w"])
    n = int(p["n"])
    s = graphons.sample(w, n, p["mode"], int(p["seed"]))
    out = {"n": n, "mode": s.mode,
           "part_indices": [int(x) for x in s.part_indices],
           "oracle": "seeded inverse-cdf sampling", "tolerance": 0}
    if s.mode == "G":
        out["colours"] = [int(c) for c in s.colouring.colours]
    else:
        out["entropy_density"] = graphons.sample_entropy_density(
            w, n, int(p["seed"]))
        if n <= 16:
            out["matrix"] = s.matrix.tolist()
    return out, None


def _run_graphon_homdensity(p):
    w = _graphon(p["w"])
    if p.get("colouring"):
        c = templates.colouring_from_json(_load_json(p["colouring"]))
        pat = graphons.DecoratedPattern.from_colouring(c)
    elif p.get("pattern"):
        obj = _load_json(p["pattern"])
        pat = graphons.DecoratedPattern(
            int(obj["n"]),
            tuple((int(u), int(v), np.array(vec, dtype=np.float64))
                  for u, v, vec in obj["edges"]))
    else:
        raise SpecError("homdensity needs a pattern or colouring file")
    return {"value": graphons.hom_density(pat, w),
            "oracle": "exact assignment sum", "tolerance": 1e-12}, None


def _run_graphon_count(p):
    w = _graphon(p["w"])
    rep = graphons.neighborhood_count(
        w, float(p["delta"]), int(p["n"]), metric=p.get("metric", "dk"),
        grid_m=(int(p["grid"]) if p.get("grid") is not None else None),
        seed=int(p.get("seed", 0)))
    rep["oracle"] = ("exact distance per colouring"
                     if not rep["flagged_lower_bound"]
                     else "upper-bound distances: count is a lower bound")
    rep["tolerance"] = 1e-12
    return rep, None


# name -> (handler, required fields, defaults)
COMMANDS = {
    "extremal": (_run_extremal, ("property", "n"),
                 {"budget": extremal.DEFAULT_NODE_BUDGET, "base": None}),
    "speed": (_run_speed, ("property", "n"), {}),
    "badpairs": (_run_badpairs, ("property", "template"), {}),
    "density": (_run_density, ("property", "n_max"),
                {"n_min": 2, "budget": extremal.DEFAULT_NODE_BUDGET}),
    "containers": (_run_containers, ("property", "n", "delta", "seed"),
                   {"eps": 0.5, "eps1": None, "no_sparsify": False,
                    "coverage": "exact", "samples": 2000,
                    "budget": containers.DEFAULT_CONTAINER_BUDGET,
                    "solver_budget": extremal.DEFAULT_NODE_BUDGET}),
    "transfer": (_run_transfer, ("property", "n", "p", "seed"),
                 {"colour": 1, "trials": 50, "epsilon": None,
                  "budget": extremal.DEFAULT_NODE_BUDGET}),
    "typical": (_run_typical, ("property", "n", "seed"),
                {"samples": 500, "witness": None,
                 "budget": extremal.DEFAULT_NODE_BUDGET}),
    "goodness": (_run_goodness, ("kind", "pattern", "hosts"), {}),
    "graphon.cutdist": (_run_graphon_cutdist, ("u", "w"),
                        {"metric": "dk", "disjoint": False, "seed": 0}),
    "graphon.entropy": (_run_graphon_entropy, ("w",), {}),
    "graphon.weakreg": (_run_graphon_weakreg, ("w", "m"), {}),
    "graphon.sample": (_run_graphon_sample, ("w", "n", "mode", "seed"), {}),
    "graphon.homdensity": (_run_graphon_homdensity, ("w",),
                           {"pattern": None, "colouring": None}),
    "graphon.count": (_run_graphon_count, ("w", "delta", "n"),
                      {"metric": "dk", "grid": None, "seed": 0}),
}


def run_command(name, params):
    """Dispatch to a handler and wrap the result with provenance."""
    handler, required, defaults = COMMANDS[name]
    merged = dict(defaults)
    merged.update({k: v for k, v in params.items() if v is not None})
    for field in required:
        if merged.get(field) is None:
            raise SpecError("field %r required for command %r" % (field, name))
    result, nodes = handler(merged)
    report = {
        "command": name,
        "result": result,
        "provenance": {
            "version": __version__,
            "seed": merged.get("seed"),
            "nodes": nodes,
        },
    }
    return report


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def canonical_json(report):
    return json.dumps(_plain(report), sort_keys=True, indent=2) + "\n"


def _to_csv(report):
    result = report.get("result", report)
    rows = result.get("rows")
    if rows is None:
        raise SpecError("csv output is only available for range commands")
    fields = result.get("csv_fields") or sorted(rows[0]) if rows else []
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(_plain(row))
    return buf.getvalue()


def emit(report, output=None, fmt="json"):
    text = canonical_json(report) if fmt == "json" else _to_csv(report)
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# spec files
# ---------------------------------------------------------------------------


def parse_spec(path):
    """Validate a spec file into (command, params, expectations, output,
    format); raises SpecError with field-precise messages."""
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise SpecError("%s: spec must be a JSON object" % path)
    cmd = obj.get("command")
    if cmd is None:
        raise SpecError("%s: field 'command' is required" % path)
    if cmd not in COMMANDS:
        raise SpecError("%s: unknown command %r (known: %s)"
                        % (path, cmd, ", ".join(sorted(COMMANDS))))
    if "seed" not in obj:
        raise SpecError("%s: seed required" % path)
    meta = {"command", "seed", "expect", "output", "format"}
    _, required, defaults = COMMANDS[cmd]
    allowed = set(required) | set(defaults) | {"seed"}
    params = {}
    for key, val in obj.items():
        if key in meta:
            continue
        if key not in allowed:
            raise SpecError("%s: field %r not recognized for command %r"
                            % (path, key, cmd))
        params[key] = val
    params["seed"] = obj["seed"]
    expect = obj.get("expect", [])
    if not isinstance(expect, list):
        raise SpecError("%s: field 'expect' must be a list" % path)
    fmt = obj.get("format", "json")
    if fmt not in ("json", "csv"):
        raise SpecError("%s: field 'format' must be 'json' or 'csv'" % path)
    if "property" in params:
        _prop(params["property"])
    return cmd, params, expect, obj.get("output"), fmt


def _resolve(report, dotted):
    cur = report
    for part in dotted.split("."):
        if isinstance(cur, dict) and part in cur:
            cur = cur[part]
        elif isinstance(cur, (list, tuple)) and part.isdigit() and int(part) < len(cur):
            cur = cur[int(part)]
        else:
            return None, False
    return cur, True


def check_expectations(report, expect):
    """Evaluate declared expectations against the report; each entry
    checks one dotted field via equals/tol, at_least, or at_most."""
    outcomes = []
    for i, item in enumerate(expect):
        if not isinstance(item, dict) or "field" not in item:
            raise SpecError("expect[%d]: needs a 'field' key" % i)
        val, found = _resolve(report, item["field"])
        entry = {"field": item["field"], "actual": val, "ok": False}
        if not found:
            entry["note"] = "field missing"
        elif "equals" in item:
            tol = float(item.get("tol", 0.0))
            entry["expected"] = item["equals"]
            if isinstance(item["equals"], (int, float)) and isinstance(val, (int, float)):
                entry["ok"] = abs(float(val) - float(item["equals"])) <= tol
            else:
                entry["ok"] = val == item["equals"]
        elif "at_least" in item:
            entry["expected"] = ">= %s" % item["at_least"]
            entry["ok"] = isinstance(val, (int, float)) and float(val) >= float(item["at_least"]) - 1e-15
        elif "at_most" in item:
            entry["expected"] = "<= %s" % item["at_most"]
            entry["ok"] = isinstance(val, (int, float)) and float(val) <= float(item["at_most"]) + 1e-15
        else:
            raise SpecError("expect[%d]: needs equals/at_least/at_most" % i)
        outcomes.append(entry)
    return outcomes


def _starved(report):
    """A search that stopped at its node budget still emits its report,
    but the run exits with the resource code."""
    result = report.get("result", {})
    return isinstance(result, dict) and result.get("optimality") == "lower-bound-only"


def run_spec(path):
    cmd, params, expect, output, fmt = parse_spec(path)
    report = run_command(cmd, params)
    code = EXIT_OK
    if expect:
        outcomes = check_expectations(report, expect)
        report["expectations"] = outcomes
        if not all(o["ok"] for o in outcomes):
            code = EXIT_EXPECT
    emit(report, output, fmt)
    if _starved(report):
        return EXIT_RESOURCE
    return code


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SpecError(message)


def _build_parser():
    top = _Parser(prog="colourcontainers",
                  description="Entropy extremal numbers, containers, and "
                              "step graphons for colour templates.")
    top.add_argument("--list-properties", action="store_true",
                     help="list registered colouring properties and exit")
    sub = top.add_subparsers(dest="cmd")

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--output", help="write the report to this file")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        return p

    p = add("extremal", help="maximum template entropy within a property")
    p.add_argument("--property", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--budget", type=int, default=extremal.DEFAULT_NODE_BUDGET)
    p.add_argument("--base", help="template JSON for a relative solve")

    p = add("speed", help="count property members at order n")
    p.add_argument("--property", required=True)
    p.add_argument("--n", type=int, required=True)

    p = add("badpairs", help="bad copy/realisation pairs of a template")
    p.add_argument("--property", required=True)
    p.add_argument("--template", required=True, help="template JSON file")

    p = add("density", help="entropy density sequence over n")
    p.add_argument("--property", required=True)
    p.add_argument("--n-max", dest="n_max", type=int, required=True)
    p.add_argument("--n-min", dest="n_min", type=int, default=2)
    p.add_argument("--budget", type=int, default=extremal.DEFAULT_NODE_BUDGET)

    p = add("containers", help="container family pipeline")
    p.add_argument("--property", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--eps1", type=float)
    p.add_argument("--no-sparsify", dest="no_sparsify", action="store_true")
    p.add_argument("--coverage", choices=("exact", "sample"), default="exact")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--budget", type=int,
                   default=containers.DEFAULT_CONTAINER_BUDGET)
    p.add_argument("--solver-budget", dest="solver_budget", type=int,
                   default=extremal.DEFAULT_NODE_BUDGET)

    p = add("transfer", help="random sparse transference experiment")
    p.add_argument("--property", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--colour", type=int, default=1)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--budget", type=int, default=extremal.DEFAULT_NODE_BUDGET)

    p = add("typical", help="edit distance from members to witnesses")
    p.add_argument("--property", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--witness", action="append", help="template JSON file")
    p.add_argument("--budget", type=int, default=extremal.DEFAULT_NODE_BUDGET)

    p = add("goodness", help="embedding overlap diagnostics per host")
    p.add_argument("--kind", required=True)
    p.add_argument("--pattern", type=int, required=True,
                   help="pattern order parameter")
    p.add_argument("--hosts", type=int, nargs="+", required=True,
                   help="host order parameters")

    gp = sub.add_parser("graphon", help="step graphon operations")
    gsub = gp.add_subparsers(dest="gcmd")

    def gadd(name, **kwargs):
        p = gsub.add_parser(name, **kwargs)
        p.add_argument("--output", help="write the report to this file")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        return p

    p = gadd("cutdist", help="cut or L1 distance between two graphons")
    p.add_argument("--u", required=True, help="graphon JSON file")
    p.add_argument("--w", required=True, help="graphon JSON file")
    p.add_argument("--metric", choices=("dk", "l1"), default="dk")
    p.add_argument("--disjoint", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = gadd("entropy", help="entropy of a step graphon")
    p.add_argument("--w", required=True)

    p = gadd("weakreg", help="weak regularity partition")
    p.add_argument("--w", required=True)
    p.add_argument("--m", type=int, required=True)

    p = gadd("sample", help="sample a decorated matrix or colouring")
    p.add_argument("--w", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=("H", "G"), required=True)
    p.add_argument("--seed", type=int, required=True)

    p = gadd("homdensity", help="homomorphism density of a pattern")
    p.add_argument("--w", required=True)
    p.add_argument("--pattern", help="vector-decorated pattern JSON")
    p.add_argument("--colouring", help="colouring JSON")

    p = gadd("count", help="colourings of K_n within delta of the graphon")
    p.add_argument("--w", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--metric", choices=("dk", "deltak"), default="dk")
    p.add_argument("--grid", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("run", help="run a JSON spec with expectations")
    p.add_argument("spec", help="spec JSON file")
    return top


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.list_properties:
            for name, desc in properties.list_properties():
                sys.stdout.write("%s: %s\n" % (name, desc))
            return EXIT_OK
        if args.cmd is None:
            parser.print_help()
            return EXIT_SPEC
        if args.cmd == "run":
            return run_spec(args.spec)
        if args.cmd == "graphon":
            if getattr(args, "gcmd", None) is None:
                raise SpecError("graphon needs a subcommand")
            name = "graphon.%s" % args.gcmd
        else:
            name = args.cmd
        params = {k: v for k, v in vars(args).items()
                  if k not in ("cmd", "gcmd", "list_properties", "output",
                               "format")}
        report = run_command(name, params)
        emit(report, args.output, args.format)
        if _starved(report):
            return EXIT_RESOURCE
        return EXIT_OK
    except properties.ResourceLimitError as e:
        sys.stdout.write(canonical_json(
            {"error": "resource-limit", "detail": str(e)}))
        return EXIT_RESOURCE
    except SpecError as e:
        sys.stderr.write("error: %s\n" % e)
        return EXIT_SPEC
    except (ValueError, KeyError, OSError) as e:
        sys.stderr.write("error: %s\n" % e)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
