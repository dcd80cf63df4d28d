"""Command-line front end: batch workflows over JSON and JSONL files.

One exit-code convention everywhere: 0 means pass or accept, 2 means a
statistical rejection or a conservative fallback worth a second look,
and 1 means the input itself was unusable.  Outputs are UTF-8, every
document carries a schema field, and rerunning a command with the same
inputs and seed produces byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from typing import Any, Iterable, Iterator, Optional, Sequence

from .allocator import analysis_to_json, error_bound, occurrence_counts
from .harness import (
    Distribution,
    TrialConfig,
    accuracy_spec,
    benchmark_suite,
    mc_validate_lower_bound,
    mc_validate_sketch,
    mc_validate_threshold,
    mc_validate_verifier,
    record_valuation,
    run_benchmark,
    shift_scenario,
)
from .listdsl import (
    PredictorConfig,
    make_task_data,
    occurrence_labels,
    parse_program,
    synth_predictor,
    value_from_json,
    value_to_json,
)
from .report import (
    SCHEMA_SYNTHESIS,
    metrics_table,
    metrics_to_json,
    save_metrics_figure,
    save_validation_figure,
    synthesis_to_json,
    validation_table,
    validation_to_json,
    write_metrics_csv,
    write_validation_csv,
)
from .sketch_ir import Expr, Valuation, collect_specs, expr_from_json, expr_to_json
from .sketcher import SketchJob, sketch
from .synthesizer import SynthesisError, synthesize, task_from_json
from .verifier import (
    MonitorConfig,
    MonitorState,
    VerifyJob,
    monitor_record,
    verify,
)

__all__ = ["main", "build_parser", "CliError"]

OK = 0
ERR = 1
WARN = 2

SCHEMA_VALUATION = "statsketch/valuation-v1"
SCHEMA_DATA = "statsketch/data-v1"
SCHEMA_VERDICT = "statsketch/verdict-v1"
SCHEMA_SKETCH_REPORT = "statsketch/sketch-report-v1"
SCHEMA_VERIFY = "statsketch/verify-v1"
SCHEMA_ANALYSIS = "statsketch/analysis-v1"


class CliError(Exception):
    """Bad input or arguments; reported on stderr, exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; our contract reserves 2 for
    # statistical rejections, so route usage problems through CliError.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise CliError(message)


# ---------------------------------------------------------------------------
# Flag types and small I/O helpers


def _prob(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {v}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (v > 0.0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {v}")
    return v


def _grid(text: str) -> tuple[int, ...]:
    try:
        levels = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated ints: {text!r}")
    if not levels or any(v < 1 for v in levels):
        raise argparse.ArgumentTypeError("grid levels must be positive")
    return levels


def _seed_list(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated ints: {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("need at least one seed")
    return seeds


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=True)


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fp:
            return fp.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fp:
            fp.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}")


def _iter_jsonl(fp: Iterable[str], where: str) -> Iterator[dict]:
    for i, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CliError(f"{where}:{i}: bad JSON: {exc}")
        if not isinstance(obj, dict):
            raise CliError(f"{where}:{i}: expected an object")
        yield obj


def _valuation_from_obj(obj: dict, where: str) -> Valuation:
    schema = obj.get("schema", SCHEMA_VALUATION)
    if schema != SCHEMA_VALUATION:
        raise CliError(f"{where}: expected schema {SCHEMA_VALUATION}, got {schema!r}")
    if "inputs" not in obj or not isinstance(obj["inputs"], dict):
        raise CliError(f"{where}: valuation needs an 'inputs' object")
    gt = obj.get("ground_truth", {})
    if not isinstance(gt, dict):
        raise CliError(f"{where}: 'ground_truth' must be an object")
    for name, v in list(obj["inputs"].items()) + list(gt.items()):
        if not isinstance(v, (bool, int, float)):
            raise CliError(f"{where}: binding {name!r} must be a scalar, got {v!r}")
    return Valuation(inputs=dict(obj["inputs"]), ground_truth=dict(gt))


def _read_valuations(path: str) -> list[Valuation]:
    with open(path, "r", encoding="utf-8") as fp:
        return [
            _valuation_from_obj(obj, path) for obj in _iter_jsonl(fp, path)
        ]


def _read_task_data(path: str) -> list[tuple]:
    rows = []
    with open(path, "r", encoding="utf-8") as fp:
        for obj in _iter_jsonl(fp, path):
            schema = obj.get("schema", SCHEMA_DATA)
            if schema != SCHEMA_DATA:
                raise CliError(f"{path}: expected schema {SCHEMA_DATA}, got {schema!r}")
            if "inputs" not in obj or not isinstance(obj["inputs"], list):
                raise CliError(f"{path}: data row needs an 'inputs' array")
            try:
                rows.append(tuple(value_from_json(v) for v in obj["inputs"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise CliError(f"{path}: bad input value: {exc}")
    return rows


def _load_expr(path: str) -> Expr:
    try:
        return expr_from_json(_read_text(path))
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise CliError(f"{path}: not a program document: {exc}")


def _load_dsl_program(path: str):
    """A pipeline program, as bare text or inside a synthesis document."""
    text = _read_text(path).strip()
    if text.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: bad JSON: {exc}")
        schema = obj.get("schema", SCHEMA_SYNTHESIS)
        if schema != SCHEMA_SYNTHESIS:
            raise CliError(f"{path}: expected schema {SCHEMA_SYNTHESIS}, got {schema!r}")
        text = obj.get("program")
        if not isinstance(text, str):
            raise CliError(f"{path}: document has no 'program' text")
    try:
        return parse_program(text)
    except ValueError as exc:
        raise CliError(f"{path}: cannot parse program: {exc}")


def _num(v: Optional[float]):
    if v is None or not math.isinf(v):
        return v
    return "inf" if v > 0 else "-inf"


def _out(line: str) -> None:
    sys.stdout.write(line + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_sketch(args: argparse.Namespace) -> int:
    program = _load_expr(args.program)
    specs = collect_specs(program)
    if not specs:
        raise CliError("program has no checks to calibrate")
    for path, spec in specs:
        if not spec.holed:
            raise CliError(
                f"not a full sketch: the check at {list(path)} is already "
                "concrete and its threshold would not be recalibrated"
            )
    data = _read_valuations(args.data)
    result = sketch(SketchJob(program=program, data=data, delta=args.delta))
    report = {
        "schema": SCHEMA_SKETCH_REPORT,
        "m": result.m,
        "delta": result.delta,
        "fills": [
            {
                "hole": f.hole_id,
                "kind": f.kind,
                "value": _num(f.value),
                "n": f.n,
                "k": f.k,
                "delta_share": f.delta_share,
                "eps": f.eps,
                "paths": [list(p) for p in f.paths],
                "conservative": f.conservative,
            }
            for f in result.fills
        ],
    }
    completed = expr_to_json(result.program)
    if args.out:
        _write_text(args.out, completed + "\n")
        for f in result.fills:
            _out(
                f"{f.hole_id or '<shared>'} {f.kind} = {f.value:g} "
                f"(n={f.n}, k={f.k}, delta_share={f.delta_share:g})"
            )
    else:
        _out(completed)
    if args.report:
        _write_text(args.report, _dump(report) + "\n")
    starved = [f.hole_id or "<shared>" for f in result.fills if f.conservative]
    if starved:
        print(
            "warning: not enough data, conservative fallback for: "
            + ", ".join(starved),
            file=sys.stderr,
        )
        return WARN
    return OK


def cmd_verify(args: argparse.Namespace) -> int:
    program = _load_expr(args.program)
    data = _read_valuations(args.data)
    try:
        result = verify(VerifyJob(program, data, args.delta))
    except ValueError as exc:
        raise CliError(str(exc))
    for c in result.checks:
        status = "trivial" if c.trivial else ("pass" if c.passed else "FAIL")
        _out(
            f"check at {list(c.path)} mode={c.mode} eps={c.eps:g} "
            f"n={c.n} failures={c.failures} k={c.k} {status}"
        )
    _out("accepted" if result.accepted else "rejected")
    if args.report:
        doc = {
            "schema": SCHEMA_VERIFY,
            "accepted": result.accepted,
            "m": result.m,
            "delta": result.delta,
            "checks": [
                {
                    "path": list(c.path),
                    "mode": c.mode,
                    "eps": c.eps,
                    "n": c.n,
                    "failures": c.failures,
                    "k": c.k,
                    "passed": c.passed,
                    "trivial": c.trivial,
                }
                for c in result.checks
            ],
        }
        _write_text(args.report, _dump(doc) + "\n")
    return OK if result.accepted else WARN


def cmd_synthesize(args: argparse.Namespace) -> int:
    try:
        task = task_from_json(json.loads(_read_text(args.task)))
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise CliError(f"{args.task}: not a task document: {exc}")
    overrides = {}
    if args.eps is not None:
        overrides["epsilon"] = args.eps
    if args.delta is not None:
        overrides["delta"] = args.delta
    if args.e is not None:
        overrides["tolerance"] = args.e
    if args.length_cap is not None:
        overrides["length_cap"] = (
            None if args.length_cap == "auto" else _positive_int(args.length_cap)
        )
    if overrides:
        task = dataclasses.replace(task, **overrides)
    data = _read_task_data(args.data)
    arity = len(task.input_types)
    for i, row in enumerate(data):
        if len(row) != arity:
            raise CliError(
                f"{args.data}: row {i} has {len(row)} inputs, task takes {arity}"
            )
    res = synthesize(
        task,
        data,
        depth_limit=args.depth_limit,
        seed=args.seed,
        levels=args.grid,
        no_search=args.no_search,
        k_zero=args.k0,
    )
    _out(res.text)
    _out(
        f"commit score {res.commit_score:.4f} over {res.searched} "
        f"allocation(s), length cap {res.length_cap}"
    )
    for label in sorted(res.fill.thresholds):
        _out(
            f"{label}: threshold {res.fill.thresholds[label]:g}, "
            f"eps {res.eps.get(label, math.nan):g}"
        )
    if args.out:
        _write_text(args.out, _dump(synthesis_to_json(res)) + "\n")
    if res.report.core.conservative:
        print(
            "warning: some thresholds fell back to +inf; "
            "the program will abstain wherever they gate",
            file=sys.stderr,
        )
        return WARN
    return OK


def cmd_monitor(args: argparse.Namespace) -> int:
    if args.program is None and args.accuracy_eps is None:
        raise CliError("pass a program document or --accuracy-eps")
    if args.program is not None and args.accuracy_eps is not None:
        raise CliError("pass either a program document or --accuracy-eps, not both")
    program = (
        accuracy_spec(args.accuracy_eps)
        if args.accuracy_eps is not None
        else _load_expr(args.program)
    )
    cfg = MonitorConfig(
        refresh_every=args.refresh,
        min_window=args.min_window,
        max_age=args.max_age,
        delta=args.delta,
    )
    state = MonitorState.fresh(cfg)
    rejected = False
    where = args.follow or "<stdin>"
    if args.follow:
        stream = open(args.follow, "r", encoding="utf-8")
    else:
        stream = sys.stdin
    try:
        for obj in _iter_jsonl(stream, where):
            val = _valuation_from_obj(obj, where)
            state, verdict = monitor_record(state, cfg, val, program, None)
            if verdict is None:
                continue
            line = {
                "schema": SCHEMA_VERDICT,
                "arrival": verdict.arrival,
                "window": verdict.window,
                "accepted": verdict.accepted,
                "checks": [
                    {
                        "path": list(c.path),
                        "eps": c.eps,
                        "n": c.n,
                        "failures": c.failures,
                        "k": c.k,
                        "passed": c.passed,
                    }
                    for c in verdict.result.checks
                ],
            }
            _out(_dump(line))
            sys.stdout.flush()
            if not verdict.accepted:
                rejected = True
    finally:
        if args.follow:
            stream.close()
    return WARN if rejected else OK


def _coeff(a: float) -> str:
    return str(int(a)) if float(a).is_integer() else f"{a:g}"


def cmd_analyze(args: argparse.Namespace) -> int:
    p = _load_dsl_program(args.program)
    doc = {
        "schema": SCHEMA_ANALYSIS,
        **analysis_to_json(p, args.unroll, eps_total=args.eps, e_total=args.e),
    }
    counts = occurrence_counts(p, args.unroll)
    ordered = [counts.get(label, 0) for label, _ in occurrence_labels(p)]
    form = error_bound(p, args.unroll)
    terms = [f"{_coeff(a)}·e_{label}" for label, a in form.coeffs]
    _out(
        f"counts ({','.join(str(c) for c in ordered)}), "
        f"err {' + '.join(terms) if terms else '0'}"
    )
    cands = doc.get("tolerance_candidates", [])
    if len(cands) == 1:
        only = cands[0]
        _out(
            "single tolerance candidate: "
            + ", ".join(f"e_{k}={only[k]}" for k in only)
        )
    if args.out:
        _write_text(args.out, _dump(doc) + "\n")
    return OK


_VALIDATE_OPS = ("all", "threshold", "lower-bound", "verifier", "sketch", "benchmark")


def _validate_reports(args: argparse.Namespace) -> tuple[list, list[str]]:
    """Run the chosen estimator validations; returns (reports, info lines)."""
    reports = []
    info = []
    if args.op in ("all", "threshold"):
        families = (
            Distribution.uniform(0.0, 1.0),
            Distribution.normal(0.0, 1.0),
            Distribution.exponential(1.0),
        )
        for dist in families:
            cfg = TrialConfig(dist, args.n, args.trials, args.eps, args.delta, args.seed)
            r = mc_validate_threshold(cfg)
            reports.append(dataclasses.replace(r, name=f"threshold-{dist.family}"))
    if args.op in ("all", "lower-bound"):
        mus = (args.mu,) if args.mu is not None else (0.5, 0.9, 0.99)
        for mu in mus:
            cfg = TrialConfig(
                Distribution.bernoulli(mu), args.n, args.trials,
                args.eps, args.delta, args.seed,
            )
            r = mc_validate_lower_bound(cfg)
            reports.append(dataclasses.replace(r, name=f"lower-bound-mu{mu:g}"))
    if args.op in ("all", "verifier"):
        mu_bad = args.mu if args.mu is not None else 1.0 - 2.0 * args.eps
        cfg = TrialConfig(
            Distribution.bernoulli(mu_bad), args.n, args.trials,
            args.eps, args.delta, args.seed,
        )
        r = mc_validate_verifier(cfg)
        reports.append(dataclasses.replace(r, name=f"false-accept-mu{mu_bad:g}"))
        mu_good = 1.0 - args.eps / 2.0
        power = mc_validate_verifier(
            TrialConfig(
                Distribution.bernoulli(mu_good), args.n, args.trials,
                args.eps, args.delta, args.seed,
            )
        )
        info.append(
            f"acceptance power at mean {mu_good:g}: {power.fraction:.3f}"
        )
    if args.op in ("all", "sketch"):
        cfg = TrialConfig(
            Distribution.uniform(0.0, 1.0), args.n, args.trials,
            args.eps, args.delta, args.seed,
        )
        reports.append(mc_validate_sketch(cfg))
    return reports, info


def cmd_validate(args: argparse.Namespace) -> int:
    if args.op == "benchmark":
        return _validate_benchmark(args)
    reports, info = _validate_reports(args)
    _out(validation_table(reports))
    for line in info:
        _out(line)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_text(
            os.path.join(args.out, "validation.json"),
            _dump(validation_to_json(reports)) + "\n",
        )
        write_validation_csv(reports, os.path.join(args.out, "validation.csv"))
        save_validation_figure(reports, os.path.join(args.out, "validation.png"))
    return OK if all(r.passed for r in reports) else WARN


def _validate_benchmark(args: argparse.Namespace) -> int:
    if args.task is None:
        raise CliError("--op benchmark needs --task")
    by_name = {b.task.name: b for b in benchmark_suite()}
    if args.task not in by_name:
        raise CliError(
            f"unknown task {args.task!r}; choose from {', '.join(sorted(by_name))}"
        )
    bench = by_name[args.task]
    report = run_benchmark(
        bench,
        seeds=args.seeds,
        train_n=args.train_n,
        eval_n=args.eval_n,
        no_search=args.no_search,
        k_zero=args.k0,
    )
    _out(metrics_table(report))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_text(
            os.path.join(args.out, "metrics.json"),
            _dump(metrics_to_json(report)) + "\n",
        )
        write_metrics_csv(report, os.path.join(args.out, "metrics.csv"))
        save_metrics_figure(report, os.path.join(args.out, "metrics.png"))
    return OK if report.failure_rate <= bench.task.epsilon else WARN


def cmd_gen_data(args: argparse.Namespace) -> int:
    if (args.task is None) == (not args.stream):
        raise CliError("pass exactly one of --task or --stream")
    lines: list[str] = []
    if args.task is not None:
        by_name = {b.task.name: b for b in benchmark_suite()}
        if args.task not in by_name:
            raise CliError(
                f"unknown task {args.task!r}; choose from {', '.join(sorted(by_name))}"
            )
        data_cfg = by_name[args.task].data
        predictor = dataclasses.replace(data_cfg.predictor, accuracy=args.accuracy)
        data_cfg = dataclasses.replace(data_cfg, predictor=predictor)
        for row in make_task_data(data_cfg, args.n, args.seed):
            lines.append(
                _dump(
                    {
                        "schema": SCHEMA_DATA,
                        "inputs": [value_to_json(v) for v in row],
                    }
                )
            )
    else:
        base = PredictorConfig(accuracy=args.accuracy)
        if args.shift_accuracy is not None:
            shifted = PredictorConfig(accuracy=args.shift_accuracy)
            before, after = shift_scenario(base, shifted, args.n, args.seed)
            records = before + after
        else:
            records = synth_predictor(base, args.n, args.seed)
        for rec in records:
            v = record_valuation(rec)
            lines.append(
                _dump(
                    {
                        "schema": SCHEMA_VALUATION,
                        "inputs": dict(v.inputs),
                        "ground_truth": dict(v.ground_truth),
                    }
                )
            )
    body = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        _write_text(args.out, body)
    else:
        sys.stdout.write(body)
    return OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="statsketch",
        description="Calibrate, verify, synthesize, and monitor scored programs.",
    )
    sub = parser.add_subparsers(dest="cmd", metavar="command", required=True)

    p = sub.add_parser(
        "sketch",
        help="fill the holes of a full sketch from calibration data",
        epilog="example:\n"
        "  statsketch sketch sketch.json scores.jsonl --delta 0.05 "
        "--out completed.json --report fills.json",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("program", help="program document with open holes")
    p.add_argument("data", help="JSONL of valuations")
    p.add_argument("--delta", type=_prob, default=0.05)
    p.add_argument("--out", help="write the completed program here")
    p.add_argument("--report", help="write the fill report here")
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser(
        "verify",
        help="check every spec of a completed program on fresh data",
        epilog="example:\n  statsketch verify completed.json holdout.jsonl",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("program", help="completed program document")
    p.add_argument("data", help="JSONL of valuations")
    p.add_argument("--delta", type=_prob, default=0.05)
    p.add_argument("--report", help="write the verification report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser(
        "synthesize",
        help="enumerate a pipeline from examples and calibrate its holes",
        epilog="example:\n"
        "  statsketch synthesize task.json train.jsonl --out result.json",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("task", help="task document with io examples")
    p.add_argument("data", help="JSONL of unlabeled input rows")
    p.add_argument("--eps", type=_prob, default=None, help="override task epsilon")
    p.add_argument("--delta", type=_prob, default=None, help="override task delta")
    p.add_argument("--e", type=_positive_float, default=None,
                   help="override task tolerance")
    p.add_argument("--length-cap", default=None,
                   help="override list-length cap (integer or 'auto')")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth-limit", type=_positive_int, default=6)
    p.add_argument("--grid", type=_grid, default=None,
                   help="candidate levels, e.g. 1,3,5")
    p.add_argument("--no-search", action="store_true",
                   help="uniform budget split, no candidate search")
    p.add_argument("--k0", action="store_true",
                   help="zero-mistake-budget threshold variant")
    p.add_argument("--out", help="write the synthesis document here")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser(
        "monitor",
        help="re-verify a stream of valuations over a sliding window",
        epilog="example:\n"
        "  statsketch gen-data --stream --n 600 --shift-accuracy 0.8 | "
        "statsketch monitor --accuracy-eps 0.05",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("program", nargs="?", default=None,
                   help="program document (omit with --accuracy-eps)")
    p.add_argument("--accuracy-eps", type=_prob, default=None,
                   help="monitor prediction accuracy at this eps instead")
    p.add_argument("--follow", help="read this JSONL file instead of stdin")
    p.add_argument("--refresh", type=_positive_int, default=100,
                   help="examples between verdicts")
    p.add_argument("--min-window", type=_positive_int, default=500)
    p.add_argument("--max-age", type=_positive_int, default=500)
    p.add_argument("--delta", type=_prob, default=0.05)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser(
        "analyze",
        help="static occurrence counts and error form of a pipeline",
        epilog="example:\n  statsketch analyze result.json --unroll 3 --e 6",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("program", help="synthesis document or bare program text file")
    p.add_argument("--unroll", "-N", type=_positive_int, default=3,
                   help="list length bound for the unrolled analyses")
    p.add_argument("--eps", type=_prob, default=0.05,
                   help="total failure budget for the candidate grid")
    p.add_argument("--e", type=_positive_float, default=6.0,
                   help="total tolerance for the candidate grid")
    p.add_argument("--out", help="write the analysis document here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser(
        "validate",
        help="Monte Carlo checks of the advertised failure rates",
        epilog="examples:\n"
        "  statsketch validate --op threshold --trials 2000 --out reports/\n"
        "  statsketch validate --op benchmark --task sum --seeds 0,1,2 --out reports/",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--op", choices=_VALIDATE_OPS, default="all")
    p.add_argument("--n", type=_positive_int, default=500,
                   help="calibration set size per trial")
    p.add_argument("--trials", type=_positive_int, default=400)
    p.add_argument("--eps", type=_prob, default=0.05)
    p.add_argument("--delta", type=_prob, default=0.05)
    p.add_argument("--mu", type=_prob, default=None,
                   help="Bernoulli mean for lower-bound/verifier ops")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--task", default=None, help="benchmark task name")
    p.add_argument("--seeds", type=_seed_list, default=(0, 1),
                   help="benchmark seeds, e.g. 0,1,2")
    p.add_argument("--train-n", type=_positive_int, default=2000)
    p.add_argument("--eval-n", type=_positive_int, default=2000)
    p.add_argument("--no-search", action="store_true")
    p.add_argument("--k0", action="store_true")
    p.add_argument("--out", help="directory for JSON, CSV, and figure output")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser(
        "gen-data",
        help="draw synthetic task data or a monitor stream",
        epilog="examples:\n"
        "  statsketch gen-data --task conditional-sum --n 5000 --out train.jsonl\n"
        "  statsketch gen-data --stream --n 600 --shift-accuracy 0.8",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--task", default=None, help="benchmark task name")
    p.add_argument("--stream", action="store_true",
                   help="emit monitor valuations instead of task rows")
    p.add_argument("--n", type=_positive_int, default=1000,
                   help="rows (per half when shifted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--accuracy", type=_prob, default=0.99)
    p.add_argument("--shift-accuracy", type=_prob, default=None,
                   help="append a second half drawn at this accuracy")
    p.add_argument("--out", help="write JSONL here instead of stdout")
    p.set_defaults(func=cmd_gen_data)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERR
    except SynthesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERR


if __name__ == "__main__":
    sys.exit(main())
