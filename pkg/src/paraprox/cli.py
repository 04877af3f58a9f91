"""Command-line front end: ``paraprox <command> [options]``.

Commands: fit, verify, table, relax, census, report, zigzag-gen.

Options may also come from a JSON file given with ``--config``; its keys
are the long option names with dashes replaced by underscores, and explicit
flags override it.  The table path defaults to ``$PARAPROX_TABLE``.

Artifacts are deterministic for fixed inputs.  Wall-clock data goes to a
``<artifact>.meta.json`` sidecar next to each artifact.

Exit codes: 0 success, 2 configuration error, 3 certification failure,
4 solver limit reached.
"""

from __future__ import annotations

import argparse
import ast
import json
import logging
import math
import operator
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import verify
from .funcspace import (DomainError, dump_function_table, get_function,
                        load_function_table, piecewise_linear, zigzag_generate)
from .lookup import LookupTable, SchemaError as TableSchemaError, TableEntry, entry_from_report
from .milp import export_lp
from .parafit import FitSizeError, SearchOptions, fit

EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_LIMIT = 0, 2, 3, 4
TABLE_ENV = "PARAPROX_TABLE"

log = logging.getLogger("paraprox")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# small helpers

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text) -> float:
    """Numbers with an optional ``pi``: ``-pi/2``, ``3pi/2``, ``2*pi``, ``0.5``."""
    if isinstance(text, (int, float)):
        return float(text)
    src = re.sub(r"(\d)\s*pi", r"\1*pi", str(text).strip())

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError
    try:
        return ev(ast.parse(src, mode="eval"))
    except (ValueError, SyntaxError, ZeroDivisionError):
        raise ConfigError(f"cannot read number {text!r}") from None


def parse_domain(values) -> tuple:
    nums = [parse_number(v) for v in values]
    if len(nums) < 2 or len(nums) % 2:
        raise ConfigError("--domain takes pairs: lo hi [lo hi ...]")
    lo, hi = nums[0::2], nums[1::2]
    if any(not h > l for l, h in zip(lo, hi)):
        raise ConfigError(f"empty domain {values}")
    return (lo[0], hi[0]) if len(lo) == 1 else (tuple(lo), tuple(hi))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_artifact(path: Path, text: str, meta: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    side = dict(meta, written=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    Path(str(path) + ".meta.json").write_text(dump_json(side))


def resolve_func(name: str, table_file=None):
    if table_file:
        try:
            return load_function_table(Path(table_file).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"function table {table_file}: {exc}") from None
    try:
        return get_function(name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None


def table_path(args):
    return getattr(args, "table", None) or os.environ.get(TABLE_ENV)


def search_options(args) -> SearchOptions:
    opts = SearchOptions(backend=args.backend, solve_time=args.time_limit,
                         iteration_limit=args.max_iterations, max_binaries=args.max_binaries)
    if args.delta_frac is not None:
        opts.delta_frac = args.delta_frac
    if args.nu_frac is not None:
        opts.nu_frac = args.nu_frac
    if args.cert_tol is not None:
        opts.cert_tol = args.cert_tol
    if args.time_budget is not None:
        if args.time_budget <= 0:
            raise ConfigError("--time-budget must be positive")
        opts.time_budget = args.time_budget
    for name in ("time_limit", "max_iterations", "max_binaries"):
        if getattr(args, name) <= 0:
            raise ConfigError(f"--{name.replace('_', '-')} must be positive")
    return opts


def status_code(status: str) -> int:
    return {"certified": EXIT_OK, "limit": EXIT_LIMIT}.get(status, EXIT_CERT)


# ---------------------------------------------------------------------------
# fit / table


def _fit_job(job: dict) -> dict:
    """Run one fit; module-level so worker processes can pickle it."""
    func = resolve_func(job["func"], job.get("func_table"))
    opts = SearchOptions(**job["options"])
    try:
        report = fit(func, job["domain"], job["eps"], job["side"], job["method"], opts)
    except FitSizeError as exc:
        return {"job": job, "error": str(exc), "status": "limit"}
    return {"job": job, "report": report.to_dict(timing=False), "status": report.status,
            "wall_time": report.wall_time, "json": report.to_json(timing=False) + "\n",
            "entry": entry_from_report(report).to_dict() if report.coefficients else None}


def _report_name(job: dict) -> str:
    return f"fit_{job['func']}_{job['side']}_eps{job['eps']:g}_{job['method']}.json"


def _record(result: dict, table, report_dir) -> int:
    job = result["job"]
    label = f"{job['func']} {job['side']} eps={job['eps']:g} {job['method']}"
    if "error" in result:
        print(f"{label}: {result['error']}")
        return EXIT_LIMIT
    rep = result["report"]
    print(f"{label} on {rep['domain']}: {rep['status']} K={rep['K']}")
    if report_dir is not None:
        write_artifact(Path(report_dir) / _report_name(job), result["json"],
                       {"wall_time": result["wall_time"], "job": job})
    if table is not None and result["entry"] and rep["status"] == "certified":
        table.put(TableEntry.from_dict(result["entry"]))
    return status_code(rep["status"])


def _options_dict(opts: SearchOptions) -> dict:
    return {k: getattr(opts, k) for k in opts.__dataclass_fields__}


def cmd_fit(args) -> int:
    func = resolve_func(args.func, args.func_table)
    dom = parse_domain(args.domain) if args.domain else tuple(func.admissible)
    if args.side not in ("below", "above"):
        raise ConfigError("--side must be below or above")
    job = {"func": func.id, "func_table": args.func_table, "domain": dom, "eps": args.eps,
           "side": args.side, "method": args.method, "options": _options_dict(search_options(args))}
    result = _fit_job(job)
    path = table_path(args)
    table = LookupTable(path) if path else None
    out_dir = args.report_dir
    if args.out:
        out_dir = None
        if "json" in result:
            write_artifact(Path(args.out), result["json"], {"wall_time": result["wall_time"]})
    code = _record(result, table, out_dir)
    if table is not None:
        table.save()
    return code


def _expand_jobs(args) -> list:
    if args.jobs:
        raw = args.jobs
    else:
        if not args.func:
            raise ConfigError("table needs --func or a 'jobs' list in --config")
        sides = ["below", "above"] if args.side == "both" else [args.side]
        raw = [{"func": f, "domain": args.domain, "eps": e, "side": s, "method": args.method}
               for f in args.func for e in args.eps for s in sides]
    opts = _options_dict(search_options(args))
    jobs = []
    for i, j in enumerate(raw):
        try:
            func = resolve_func(j["func"], j.get("func_table"))
            dom = parse_domain(j["domain"]) if j.get("domain") else tuple(func.admissible)
            jobs.append({"func": func.id, "func_table": j.get("func_table"), "domain": dom,
                         "eps": parse_number(j["eps"]), "side": j.get("side", "below"),
                         "method": j.get("method", args.method), "options": opts})
        except KeyError as exc:
            raise ConfigError(f"jobs[{i}] misses {exc}") from None
    return jobs


def cmd_table(args) -> int:
    path = table_path(args)
    if not path:
        raise ConfigError(f"table needs --table or ${TABLE_ENV}")
    if args.workers <= 0:
        raise ConfigError("--workers must be positive")
    jobs = _expand_jobs(args)
    table = LookupTable(path)
    code = EXIT_OK
    if args.workers == 1 or len(jobs) == 1:
        results = map(_fit_job, jobs)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=min(args.workers, len(jobs)))
        results = pool.map(_fit_job, jobs)
    try:
        # the main process is the only writer; results arrive in job order
        for result in results:
            code = max(code, _record(result, table, args.report_dir))
            table.save()
    finally:
        if pool is not None:
            pool.shutdown()
    return code


# ---------------------------------------------------------------------------
# verify


def _load_entries(path: str) -> list:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    items = doc.get("entries", [doc]) if isinstance(doc, dict) else doc
    try:
        return [(TableEntry.from_dict(d), d.get("tolerance")) for d in items]
    except (TableSchemaError, AttributeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_verify(args) -> int:
    sources = []
    if args.coeffs:
        sources += [(p, _load_entries(p)) for p in args.coeffs]
    path = args.table or (None if args.coeffs else os.environ.get(TABLE_ENV))
    if path:
        sources.append((path, _load_entries(path)))
    if not sources:
        raise ConfigError("verify needs --coeffs or a table")
    code = EXIT_OK
    results = []
    for src, entries in sources:
        for entry, file_tol in entries:
            tol = args.tol if args.tol is not None else (file_tol or verify.DEFAULT_TOL)
            try:
                rep = entry.recheck(tol)
            except KeyError as exc:
                raise ConfigError(str(exc.args[0])) from None
            worst = max(rep.one_sided, key=lambda c: c.value)
            # each quantity is shown as [seen, certified bound]
            print(f"{src}: {entry.func} {entry.side} eps={entry.eps:g} K={len(entry.paraboloids)} "
                  f"tol={tol:g}: {'pass' if rep.passed else 'FAIL'} "
                  f"(coverage [{rep.coverage.incumbent:.3g}, {rep.coverage.value:.3g}], "
                  f"excess [{worst.incumbent:.3g}, {worst.value:.3g}])")
            results.append({"source": src, "func": entry.func, "side": entry.side,
                            "eps": entry.eps, "domain": entry.domain.to_list(),
                            "check": rep.to_dict()})
            if not rep.passed:
                code = EXIT_CERT
    if args.out:
        write_artifact(Path(args.out), dump_json(results), {})
    return code


# ---------------------------------------------------------------------------
# relaxations, census, report


def _instances(paths):
    from .relax import SchemaError, load_instance
    out = []
    for p in paths:
        try:
            out.append(load_instance(p))
        except (OSError, SchemaError) as exc:
            raise ConfigError(f"{p}: {exc}") from None
    return out


def cmd_relax(args) -> int:
    from .relax import (brute_force_minlp, build_relaxation, find_substitutable, gap_csv,
                        gap_metrics, to_milp_model)
    import warnings
    path = table_path(args)
    if not path:
        raise ConfigError(f"relax needs --table or ${TABLE_ENV}")
    if not Path(path).exists():
        raise ConfigError(f"table {path} does not exist")
    table = LookupTable(path)
    out = Path(args.out)
    variants = [v.strip() for v in args.variants.split(",")]
    rows, times = [], {}
    for inst in _instances(args.instance):
        plan = find_substitutable(inst, table, args.eps, periodic=args.periodic)
        plan_doc = {"instance": inst.name, "eps": args.eps,
                    "skipped": [{"constraint": c, "path": list(p), "func": f, "reason": r}
                                for c, p, f, r in plan.skipped]}
        relaxed = {}
        for v in variants:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rel = build_relaxation(inst, plan, v)
            relaxed[v] = rel
            plan_doc.setdefault("substitutions", rel.log)
            (out / f"{inst.name}_{v}.json").parent.mkdir(parents=True, exist_ok=True)
            (out / f"{inst.name}_{v}.json").write_text(rel.dumps() + "\n")
            if v == "para" and rel.variant == "para":
                try:
                    (out / f"{inst.name}_para.lp").write_text(export_lp(to_milp_model(rel.instance)))
                except ValueError as exc:
                    log.warning("%s: no LP export (%s)", inst.name, exc)
            for w in rel.warnings:
                print(f"{inst.name} {v}: {w}")
        (out / f"{inst.name}_plan.json").write_text(dump_json(plan_doc))
        print(f"{inst.name}: {len(plan.items)} substituted, {len(plan.skipped)} skipped")
        if args.oracle_grid:
            ref = brute_force_minlp(relaxed.get("orig") or inst, args.oracle_grid)
            times[f"{inst.name}/orig"] = ref.wall_time
            for v, rel in relaxed.items():
                res = ref if v == "orig" else brute_force_minlp(rel, args.oracle_grid)
                times[f"{inst.name}/{v}"] = res.wall_time
                rows.append((inst.name, v, gap_metrics(ref.value, res.value)))
    if rows:
        write_artifact(out / "gaps.csv", gap_csv(rows), {"oracle_times": times})
    return EXIT_OK


def cmd_census(args) -> int:
    from .relax import census_csv, function_census
    text = census_csv(function_census(_instances(args.instance)))
    if args.out:
        write_artifact(Path(args.out), text, {"instances": list(args.instance)})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    from .relax import gap_csv, gap_metrics, read_gap_csv, read_result_file, sgm_by_variant
    if args.shift < 0:
        raise ConfigError("--shift must be nonnegative")
    rows = []
    for p in args.times or []:
        try:
            rows += read_gap_csv(Path(p).read_text())
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"{p}: {exc}") from None
    if args.results:
        parsed = {}
        for p in args.results:
            stem = Path(p).stem
            if "__" not in stem:
                raise ConfigError(f"{p}: result files are named <instance>__<variant>.txt")
            name, variant = stem.rsplit("__", 1)
            try:
                parsed[(name, variant)] = read_result_file(Path(p).read_text())
            except (OSError, ValueError) as exc:
                raise ConfigError(f"{p}: {exc}") from None
        gap_rows = []
        for (name, variant), res in sorted(parsed.items()):
            ref = parsed.get((name, "orig"), {})
            c_star = ref.get("objective", math.nan)
            d = res.get("dual", res.get("objective", math.inf))
            rep = gap_metrics(c_star, d, res.get("time"), res["status"])
            gap_rows.append((name, variant, rep))
        text = gap_csv(gap_rows)
        if args.out:
            write_artifact(Path(args.out), text, {"results": list(args.results)})
        rows += read_gap_csv(text)
    if not rows:
        raise ConfigError("report needs --times or --results")
    for variant, value in sgm_by_variant(rows, args.shift).items():
        print(f"{variant} sgm {value:.2f}")
    return EXIT_OK


def cmd_zigzag(args) -> int:
    data = zigzag_generate(args.seed, (parse_number(args.range[0]), parse_number(args.range[1])))
    func = piecewise_linear(data, args.id)
    text = dump_json(dump_function_table(func))
    if args.out:
        write_artifact(Path(args.out), text, {"seed": args.seed})
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _search_flags(p):
    p.add_argument("--method", choices=("exact", "practical"), default="practical")
    p.add_argument("--backend", choices=("highs", "builtin"), default="highs")
    p.add_argument("--time-limit", type=float, default=600.0, help="seconds per MIP solve")
    p.add_argument("--time-budget", type=float,
                   help="wall seconds for a whole practical search (results then depend on speed)")
    p.add_argument("--max-iterations", type=int, default=24)
    p.add_argument("--max-binaries", type=int, default=1000)
    p.add_argument("--delta-frac", type=float)
    p.add_argument("--nu-frac", type=float)
    p.add_argument("--cert-tol", type=float)
    p.add_argument("--report-dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paraprox", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one paraboloid set")
    p.add_argument("--config")
    p.add_argument("--func", default="sin")
    p.add_argument("--func-table", help="piecewise-linear function JSON")
    p.add_argument("--domain", nargs="+")
    p.add_argument("--eps", type=parse_number, default=1.0)
    p.add_argument("--side", default="below")
    p.add_argument("--table")
    p.add_argument("--out")
    _search_flags(p)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("table", help="batch-build table entries")
    p.add_argument("--config")
    p.add_argument("--func", nargs="+")
    p.add_argument("--domain", nargs="+")
    p.add_argument("--eps", nargs="+", type=parse_number, default=[1.0])
    p.add_argument("--side", choices=("below", "above", "both"), default="both")
    p.add_argument("--table")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--jobs", type=json.loads, help="JSON list of job objects")
    _search_flags(p)
    p.set_defaults(handler=cmd_table)

    p = sub.add_parser("verify", help="re-certify coefficient files or a table")
    p.add_argument("--config")
    p.add_argument("--coeffs", nargs="+")
    p.add_argument("--table")
    p.add_argument("--tol", type=float)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("relax", help="write orig/para/both variants of instances")
    p.add_argument("--config")
    p.add_argument("--instance", nargs="+", required=True)
    p.add_argument("--table")
    p.add_argument("--eps", type=parse_number, default=0.01)
    p.add_argument("--out", required=True)
    p.add_argument("--variants", default="orig,para,both")
    p.add_argument("--periodic", action="store_true")
    p.add_argument("--oracle-grid", type=int, default=0)
    p.set_defaults(handler=cmd_relax)

    p = sub.add_parser("census", help="count univariate nonlinear terms")
    p.add_argument("--config")
    p.add_argument("--instance", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_census)

    p = sub.add_parser("report", help="gap CSVs and shifted geometric means")
    p.add_argument("--config")
    p.add_argument("--times", nargs="+")
    p.add_argument("--results", nargs="+")
    p.add_argument("--shift", type=float, default=10.0)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("zigzag-gen", help="sample a random zigzag function")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--range", nargs=2, default=["-5", "5"])
    p.add_argument("--id", default="zigzag_random")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_zigzag)
    return parser


def _apply_config(parser, argv):
    """Re-parse with config-file values as defaults so flags still win."""
    args = parser.parse_args(argv)
    cfg_path = getattr(args, "config", None)
    if not cfg_path:
        return args
    try:
        cfg = json.loads(Path(cfg_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config {cfg_path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in subparser._actions}
    unknown = set(cfg) - known - {"jobs"}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "jobs" in cfg and "jobs" not in known:
        raise ConfigError("'jobs' is only valid for the table command")
    subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


def _shield_negatives(argv):
    # argparse would read "-pi/2" as an option; a leading space hides the dash
    return [" " + a if re.match(r"-(pi|\d|\.|\()", a) else a for a in argv]


def main(argv=None) -> int:
    parser = build_parser()
    argv = _shield_negatives(sys.argv[1:] if argv is None else list(argv))
    try:
        args = _apply_config(parser, argv)
    except ConfigError as exc:
        print(f"paraprox: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:          # argparse usage errors
        return int(exc.code or 0) and EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (ConfigError, DomainError) as exc:
        print(f"paraprox: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
