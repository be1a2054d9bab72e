"""Command-line experiment runner."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..controllers import CONTROLLER_KINDS, RLAssistant, make_controller, train_assistant
from ..curation import (
    PriorityConfig,
    curate_run,
    curation_report,
    export_dataset,
    score_sample,
    threshold_filter,
)
from ..deliberation import DeliberationConfigError, client_from_config, mock_panel
from ..network import ScenarioParseError, ValidationError, parse_scenario, scenario_to_dict
from ..network.grid import grid_scenario
from ..sim import MetricsReport, Simulator, run_episode, write_csv, write_json
from ..sim.metrics import CSV_FIELDS

log = logging.getLogger("signalcurate")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


class UsageError(ValueError):
    """Bad flags or inconsistent inputs; exits with the validation code."""


# -- inputs ---------------------------------------------------------------

def parse_seeds(text: str) -> list[int]:
    """``"0,1,2"``, ``"0-4"`` or a mix such as ``"0-2,7"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, part)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise UsageError(f"empty seed range {part!r}")
            seeds.extend(range(lo_i, hi_i + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise UsageError("at least one seed is required")
    return seeds


def parse_grid(text: str) -> tuple[int, int]:
    try:
        r, c = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--grid expects ROWSxCOLS, got {text!r}") from None
    if r < 1 or c < 1:
        raise UsageError("grid dimensions must be >= 1")
    return r, c


def grid_doc(rows: int, cols: int, vph: float, horizon: int, seed: int = 0) -> dict:
    net, demand, cfg = grid_scenario(rows, cols, veh_per_hour=vph, horizon=horizon, seed=seed)
    return scenario_to_dict(net, demand, cfg, name=f"grid{rows}x{cols}@{vph:g}")


def load_doc(args) -> tuple[dict, str]:
    """Scenario document and its name from ``--scenario`` or ``--grid``."""
    if getattr(args, "scenario", None) and getattr(args, "grid", None):
        raise UsageError("give either --scenario or --grid, not both")
    if getattr(args, "scenario", None):
        path = Path(args.scenario)
        try:
            doc = json.loads(path.read_bytes())
        except OSError as exc:
            raise ScenarioParseError(f"cannot read scenario {path}: {exc}") from exc
        except ValueError as exc:
            raise ScenarioParseError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ScenarioParseError(f"{path}: top level must be an object")
        name = doc.get("name") or path.stem
    else:
        rows, cols = parse_grid(getattr(args, "grid", None) or "3x3")
        doc = grid_doc(rows, cols, args.vph, args.horizon or 3600)
        name = doc["name"]
    parse_scenario(doc)  # validate before any simulation starts
    return doc, name


def parse_params(items: Optional[Sequence[str]]) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except ValueError:
            out[key] = raw
    return out


def controller_spec(doc: dict, kind: Optional[str], params: dict) -> tuple[str, dict]:
    base = dict(doc.get("sim", {}).get("controller") or {})
    base_kind = base.pop("kind", None)
    kind = kind or base_kind or "max_pressure"
    if kind not in CONTROLLER_KINDS:
        raise UsageError(f"unknown controller {kind!r}; expected one of {', '.join(CONTROLLER_KINDS)}")
    merged = base if kind == base_kind else {}
    merged.update(params)
    if kind != "rl_assistant":
        try:
            make_controller(kind, **merged)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad {kind} parameters {merged}: {exc}") from exc
    return kind, merged


def build_sim(doc: dict, horizon: Optional[int]) -> Simulator:
    net, demand, cfg = parse_scenario(doc)
    if horizon is not None:
        if horizon < 1:
            raise UsageError("--horizon must be > 0")
        cfg = replace(cfg, horizon=int(horizon))
    return Simulator(net, demand, cfg)


# -- workers --------------------------------------------------------------

def _run_one(job) -> MetricsReport:
    doc, kind, params, seed, horizon = job
    sim = build_sim(doc, horizon)
    ctl = make_controller(kind, sim=sim, seed=seed, **params)
    return run_episode(sim, ctl, seed=seed).metrics


def _map(fn, jobs, n_jobs: int):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


def _median(values):
    vals = [v for v in values if v is not None]
    return statistics.median(vals) if vals else None


def median_report(reports: Sequence[MetricsReport]) -> MetricsReport:
    return MetricsReport(
        _median([r.att for r in reports]),
        statistics.median(r.aql for r in reports),
        _median([r.awt for r in reports]),
        int(statistics.median(r.completed for r in reports)),
        int(statistics.median(r.spawned for r in reports)),
    )


def run_seeds(doc, name, kind, params, seeds, horizon, jobs) -> tuple[list[dict], MetricsReport, list]:
    reports = _map(_run_one, [(doc, kind, params, s, horizon) for s in seeds], jobs)
    rows = [r.row(name, kind, s) for r, s in zip(reports, seeds)]
    med = median_report(reports)
    return rows, med, reports


# -- commands -------------------------------------------------------------

def _check_jobs(args) -> None:
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")


def cmd_run(args) -> int:
    _check_jobs(args)
    doc, name = load_doc(args)
    kind, params = controller_spec(doc, args.controller, parse_params(args.param))
    seeds = parse_seeds(args.seeds)
    rows, med, reports = run_seeds(doc, name, kind, params, seeds, args.horizon, args.jobs)
    rows.append(med.row(name, kind, "median"))  # only after every seed finished
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out / "metrics.csv")
    write_json({
        "scenario": name, "controller": kind, "params": params, "seeds": seeds,
        "runs": [dict(seed=s, **r.to_json()) for s, r in zip(seeds, reports)],
        "median": med.to_json(),
    }, out / "metrics.json")
    sys.stdout.write(write_csv(rows))
    return EXIT_OK


def rank(values: Sequence[Optional[float]]) -> list[Optional[int]]:
    """Competition ranking, lower is better; equal values share a rank; NA is unranked."""
    out = []
    for v in values:
        out.append(None if v is None else 1 + sum(1 for w in values if w is not None and w < v))
    return out


COMPARE_FIELDS = ("controller", "scenario", "ATT", "AQL", "AWT", "rank_ATT", "rank_AQL", "rank_AWT")


def compare_table(entries: Sequence[tuple[str, str, MetricsReport]]) -> list[dict]:
    """Rows sorted by ATT (NA last, then label) with per-metric ranks."""
    order = sorted(range(len(entries)),
                   key=lambda i: (entries[i][2].att is None, entries[i][2].att or 0.0, entries[i][0]))
    entries = [entries[i] for i in order]
    ranks = {m: rank([getattr(e[2], m.lower()) for e in entries]) for m in ("ATT", "AQL", "AWT")}
    rows = []
    for i, (label, scen, rep) in enumerate(entries):
        row = {"controller": label, "scenario": scen}
        r = rep.row(scen, label, "")
        row.update(ATT=r["ATT"], AQL=r["AQL"], AWT=r["AWT"])
        for m in ("ATT", "AQL", "AWT"):
            row[f"rank_{m}"] = "NA" if ranks[m][i] is None else ranks[m][i]
        rows.append(row)
    return rows


def format_table(rows: Sequence[dict], fields=COMPARE_FIELDS) -> str:
    def cell(v):
        if isinstance(v, str):
            try:
                return f"{float(v):.2f}" if "." in v else v
            except ValueError:
                return v
        return str(v)

    cells = [[f for f in fields]] + [[cell(r[f]) for f in fields] for r in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(fields))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells) + "\n"


def cmd_compare(args) -> int:
    specs = args.spec or ["random", "fixed_time", "max_pressure"]
    if len(specs) < 2:
        raise UsageError("compare needs at least two specs")
    _check_jobs(args)
    seeds = parse_seeds(args.seeds)
    default_doc = None
    resolved = []
    for spec in specs:
        kind, _, scen_path = spec.partition("@")
        if scen_path:
            doc, name = load_doc(argparse.Namespace(scenario=scen_path, grid=None, vph=args.vph, horizon=args.horizon))
        else:
            if default_doc is None:
                default_doc = load_doc(args)
            doc, name = default_doc
        resolved.append((kind, doc, name))
    names = {name for _, _, name in resolved}
    docs = {json.dumps(doc, sort_keys=True) for _, doc, _ in resolved}
    if len(names) > 1 or len(docs) > 1:
        raise UsageError(f"compare needs one shared scenario, got {sorted(names)}")
    params = parse_params(args.param)
    entries = []
    for kind, doc, name in resolved:
        kind, p = controller_spec(doc, kind, params if kind == "rl_assistant" else {})
        _, med, _ = run_seeds(doc, name, kind, p, seeds, args.horizon, args.jobs)
        entries.append((kind, name, med))
    rows = compare_table(entries)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(COMPARE_FIELDS), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    (out / "compare.csv").write_text(buf.getvalue(), encoding="utf-8")
    text = format_table(rows)
    (out / "compare.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def deliberation_clients(spec: str):
    """``mock`` or a JSON file ``{"defenders": [...], "consensus": {...}}``."""
    if spec == "mock":
        return mock_panel()
    try:
        doc = json.loads(Path(spec).read_text(encoding="utf-8"))
        defenders = [client_from_config(d) for d in doc["defenders"]]
        consensus = client_from_config(doc["consensus"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad deliberation config {spec}: {exc}") from exc
    if not defenders:
        raise UsageError("deliberation config lists no defenders")
    return defenders, consensus


def cmd_curate(args) -> int:
    doc, name = load_doc(args)
    try:
        cfg = PriorityConfig(args.alpha, args.kappa, args.lambda_neg, args.tau)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.k < 1 or args.top_phases < 1 or not 0 <= args.low_fraction <= 1:
        raise UsageError("--k and --top-phases must be >= 1 and --low-fraction in [0, 1]")
    defenders, consensus = deliberation_clients(args.deliberation)
    seeds = parse_seeds(args.seeds)
    sim = build_sim(doc, args.horizon)
    records, decisions, fallbacks, metrics = [], 0, 0, []
    for seed in seeds:
        if args.checkpoint:
            assistant = RLAssistant.load(args.checkpoint)
        else:
            assistant = train_assistant(sim, seed, args.train_episodes)
        run = curate_run(sim, assistant, defenders, consensus, seed, cfg, K=args.k,
                         top_phases=args.top_phases, scenario=name)
        records += run.records
        decisions += run.decisions
        fallbacks += run.fallbacks
        metrics.append(dict(seed=seed, **run.metrics.to_json()))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_dataset(records, out / "dataset.jsonl")
    high = threshold_filter(records, cfg.kappa)
    low = [r for r in records if r.priority < cfg.kappa]
    rng = np.random.default_rng(np.random.SeedSequence([seeds[0], 0xC0DE]))
    sampled = score_sample(low, int(round(args.low_fraction * len(low))), cfg.tau, rng)
    n_train = export_dataset(high + sampled, out / "train.jsonl")
    report = curation_report(records, cfg, decisions, fallbacks)
    report.update(scenario=name, seeds=seeds, train_records=n_train, low_sampled=len(sampled), metrics=metrics)
    write_json(report, out / "report.json")
    sys.stdout.write(f"records={report['records']} decisions={decisions} d_plus={report['d_plus']} "
                     f"d_minus={report['d_minus']} train={n_train} fallbacks={fallbacks}\n")
    return EXIT_OK


def bench(rows: int, cols: int, vph: float = 300.0, horizon: int = 3600, seed: int = 0) -> dict:
    """Wall-clock of one max-pressure run on a synthetic grid (network build excluded)."""
    net, demand, cfg = grid_scenario(rows, cols, veh_per_hour=vph, horizon=horizon, seed=seed)
    sim = Simulator(net, demand, cfg)
    ctl = make_controller("max_pressure")
    t0 = time.perf_counter()
    result = run_episode(sim, ctl, seed=seed, horizon=horizon)
    wall = time.perf_counter() - t0
    return {
        "intersections": len(net.intersections),
        "ticks": horizon,
        "wall_clock_s": wall,
        "ticks_per_s": horizon / wall if wall > 0 else float("inf"),
        "spawned": result.metrics.spawned,
        "completed": result.metrics.completed,
    }


def cmd_bench(args) -> int:
    rows, cols = parse_grid(args.grid)
    res = bench(rows, cols, args.vph, args.horizon or 3600, parse_seeds(args.seeds)[0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(res, out / "bench.json")
    sys.stdout.write(f"intersections={res['intersections']} ticks={res['ticks']} "
                     f"wall_clock_s={res['wall_clock_s']:.3f} ticks_per_s={res['ticks_per_s']:.1f}\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    doc, name = load_doc(args)
    net, demand, cfg = parse_scenario(doc)
    n_moves = sum(len(n.movements) for n in net.intersections)
    n_phases = sum(n.num_phases for n in net.intersections)
    sys.stdout.write(f"{name}: ok ({len(net.intersections)} intersections, {len(net.lanes)} lanes, "
                     f"{n_moves} movements, {n_phases} phases, {len(demand.flows)} flows)\n")
    return EXIT_OK


def cmd_generate(args) -> int:
    rows, cols = parse_grid(args.grid)
    doc = grid_doc(rows, cols, args.vph, args.horizon or 3600, parse_seeds(args.seeds)[0])
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    sys.stdout.write(f"wrote {path}\n")
    return EXIT_OK


# -- parser ---------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_default: str, scenario: bool = True) -> None:
    p.add_argument("--seeds", "--seed", dest="seeds", default="0", help="e.g. 0,1,2 or 0-4")
    p.add_argument("--horizon", type=int, default=None, help="ticks to simulate (default: scenario's)")
    p.add_argument("--out", default=out_default)
    p.add_argument("--jobs", type=int, default=1, help="seeds simulated in parallel")
    p.add_argument("--vph", type=float, default=300.0, help="entry demand per boundary approach (grid only)")
    if scenario:
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--grid", help="synthetic ROWSxCOLS grid instead of a file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="signalcurate", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one controller over several seeds")
    _common(p, "out/run")
    p.add_argument("--controller", choices=CONTROLLER_KINDS)
    p.add_argument("--param", action="append", help="controller hyperparameter KEY=VALUE")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("compare", help="side-by-side metrics with ranks")
    _common(p, "out/compare")
    p.add_argument("--spec", action="append", help="KIND or KIND@SCENARIO (repeatable)")
    p.add_argument("--param", action="append", help="rl_assistant hyperparameter KEY=VALUE")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("curate", help="deliberate along an RL-assistant run and export a dataset")
    _common(p, "out/curate")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--lambda-neg", dest="lambda_neg", type=float, default=0.3)
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--deliberation", default="mock", help="'mock' or a client config JSON file")
    p.add_argument("--k", type=int, default=3, help="candidates kept by the pre-filter")
    p.add_argument("--top-phases", dest="top_phases", type=int, default=2)
    p.add_argument("--low-fraction", dest="low_fraction", type=float, default=0.25,
                   help="share of below-kappa records drawn by score sampling into train.jsonl")
    p.add_argument("--train-episodes", dest="train_episodes", type=int, default=2)
    p.add_argument("--checkpoint", help="assistant checkpoint to load instead of training")
    p.set_defaults(fn=cmd_curate)

    p = sub.add_parser("bench", help="max-pressure wall-clock on a large synthetic grid")
    _common(p, "out/bench", scenario=False)
    p.add_argument("--grid", default="12x15")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("validate", help="parse and validate a scenario")
    p.add_argument("scenario")
    p.add_argument("--grid", help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_validate, vph=300.0, horizon=None)

    p = sub.add_parser("generate", help="write a synthetic grid scenario file")
    _common(p, "scenario.json", scenario=False)
    p.add_argument("--grid", default="3x3")
    p.set_defaults(fn=cmd_generate)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (UsageError, ScenarioParseError, ValidationError, DeliberationConfigError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime failure
        log.debug("runtime failure", exc_info=True)
        sys.stderr.write(f"runtime error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME
