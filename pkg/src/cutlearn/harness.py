"""Command-line orchestration: instance/scenario generation, cut sampling,
classifier training and evaluation, solving, and report aggregation.

Subcommands: generate, phase1, train, eval, solve, report.  Every option
can live in a JSON config file (--config); command-line flags win over
config values.  One top-level --seed deterministically derives the
scenario-sampling and path-sampling streams, so identical invocations
produce identical artifacts (timing columns aside).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import benders, learnbd, phase1, problems, svm
from .solver_core import InputError

SUMMARY_COLUMNS = ("instance", "method", "iterations", "gap_pct",
                   "cuts_total", "cum_rmp_time_s")


class CliError(Exception):
    """User-facing failure: printed to stderr, exit status 2."""


def derive_seed(seed, stream):
    """Stable child seed for a named stream of the run."""
    streams = {"scenarios": 0, "phase1": 1, "folds": 2}
    child = np.random.SeedSequence(seed).spawn(max(streams.values()) + 1)
    return child[streams[stream]]


# ---------------------------------------------------------------------------
# config / flags
# ---------------------------------------------------------------------------

def _flat(config, *path, default=None):
    node = config
    for key in path:
        if not isinstance(node, dict) or key not in node:
            return default
        node = node[key]
    return node


def _setting(args, name, config, path, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    found = _flat(config, *path)
    return default if found is None else found


def _load_config(args):
    if getattr(args, "config", None) is None:
        return {}
    try:
        with open(args.config) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"config is not valid JSON: {exc}")


def _parse_float_list(text):
    return [float(tok) for tok in str(text).replace(",", " ").split()]


def _parse_grid(text):
    """Grid spec like "c=0.1,1,10;gamma=0.1,1,10"."""
    grids = {}
    for part in str(text).split(";"):
        if not part.strip():
            continue
        key, _, values = part.partition("=")
        grids[key.strip().lower()] = _parse_float_list(values)
    if "c" not in grids or "gamma" not in grids:
        raise CliError('grid must name both c and gamma, e.g. "c=1,10;gamma=0.1,1"')
    return grids["c"], grids["gamma"]


def _out_dir(args, config):
    out = _setting(args, "out", config, ("out",), default=".")
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# problem loading
# ---------------------------------------------------------------------------

def _load_instance(args, config):
    """(name, data, kind) from --cap/--cflp-json/--cmnd/--synth-cflp."""
    cap = _setting(args, "cap", config, ("problem", "cap"))
    cflp_json = _setting(args, "cflp_json", config, ("problem", "cflp_json"))
    cmnd = _setting(args, "cmnd", config, ("problem", "cmnd"))
    synth = _setting(args, "synth_cflp", config, ("problem", "synth_cflp"))
    given = [v for v in (cap, cflp_json, cmnd, synth) if v is not None]
    if len(given) != 1:
        raise CliError("exactly one of --cap, --cflp-json, --cmnd, "
                       "--synth-cflp is required")
    try:
        if cap is not None:
            with open(cap) as fh:
                return os.path.basename(cap), problems.parse_orlib_cap(fh), "cflp"
        if cflp_json is not None:
            with open(cflp_json) as fh:
                return os.path.basename(cflp_json), problems.load_cflp(fh), "cflp"
        if cmnd is not None:
            with open(cmnd) as fh:
                return os.path.basename(cmnd), problems.load_cmnd(fh), "cmnd"
    except OSError as exc:
        raise CliError(str(exc))
    except problems.ParseError as exc:
        raise CliError(f"parse error: {exc}")
    try:
        nf, nc = (int(tok) for tok in str(synth).lower().split("x"))
    except ValueError:
        raise CliError('--synth-cflp expects "FACILITIESxCUSTOMERS", e.g. 16x50')
    seed = int(_setting(args, "seed", config, ("seed",), default=0))
    return f"synth-{nf}x{nc}-seed{seed}", problems.generate_cflp(nf, nc, seed), "cflp"


def _scenarios_for(args, config, data, kind):
    path = _setting(args, "scenario_file", config, ("scenarios", "file"))
    if path is not None:
        try:
            with open(path) as fh:
                return problems.ScenarioSet.from_csv(fh)
        except OSError as exc:
            raise CliError(str(exc))
        except problems.ParseError as exc:
            raise CliError(f"scenario file: {exc}")
    count = int(_setting(args, "scenarios", config, ("scenarios", "count"),
                         default=20))
    sigma = float(_setting(args, "sigma", config, ("scenarios", "sigma"),
                           default=0.1))
    seed = _setting(args, "scenario_seed", config, ("scenarios", "seed"))
    if seed is None:
        seed = derive_seed(int(_setting(args, "seed", config, ("seed",),
                                        default=0)), "scenarios")
    nominal = data.demands
    return problems.sample_scenarios(nominal, sigma, count, seed)


def _build_problem(args, config):
    name, data, kind = _load_instance(args, config)
    scen = _scenarios_for(args, config, data, kind)
    if kind == "cflp":
        return name, problems.build_cflp(data, scen), data
    return name, problems.build_cmnd(data, scen), data


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args, config):
    out = _out_dir(args, config)
    name, data, kind = _load_instance(args, config)
    scen = _scenarios_for(args, config, data, kind)
    scen_path = os.path.join(out, "scenarios.csv")
    with open(scen_path, "w", newline="") as fh:
        scen.to_csv(fh)
    if kind == "cflp":
        inst_path = os.path.join(out, "instance.json")
        with open(inst_path, "w") as fh:
            problems.save_cflp(data, fh)
    else:
        inst_path = os.path.join(out, "instance.json")
        with open(inst_path, "w") as fh:
            problems.save_cmnd(data, fh)
    print(f"wrote {inst_path} and {scen_path} ({scen.n_scenarios} scenarios)")
    return 0


def cmd_phase1(args, config):
    out = _out_dir(args, config)
    name, problem, _ = _build_problem(args, config)
    n_paths = int(_setting(args, "paths", config, ("phase1", "paths"),
                           default=phase1.DEFAULT_NUM_PATHS))
    length = _setting(args, "path_length", config, ("phase1", "length"))
    length = None if length is None else int(length)
    seed = _setting(args, "phase1_seed", config, ("phase1", "seed"))
    if seed is None:
        seed = derive_seed(int(_setting(args, "seed", config, ("seed",),
                                        default=0)), "phase1")
    store = phase1.run_phase1(problem, n_paths=n_paths, path_length=length,
                              seed=seed)
    rows_path = os.path.join(out, "rows.csv")
    with open(rows_path, "w", newline="") as fh:
        store.to_csv(fh)
    print(f"wrote {rows_path}: {len(store.rows)} rows over {n_paths} paths"
          + (f" ({len(store.truncated_paths)} truncated)"
             if store.truncated_paths else ""))
    return 0


def _load_rows(path):
    try:
        with open(path) as fh:
            return phase1.RowStore.from_csv(fh)
    except OSError as exc:
        raise CliError(str(exc))
    except InputError as exc:
        raise CliError(str(exc))


def _delta_list(args, config):
    raw = _setting(args, "delta_list", config, ("classifier", "delta_list"))
    if raw is None:
        return learnbd.DeltaSchedule.default().values
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    return _parse_float_list(raw)


def cmd_train(args, config):
    out = _out_dir(args, config)
    rows_path = _setting(args, "rows", config, ("phase1", "rows"))
    if rows_path is None:
        raise CliError("--rows with phase-1 rows required")
    store = _load_rows(rows_path)
    deltas = _delta_list(args, config)
    grid_raw = _setting(args, "grid", config, ("classifier", "grid"))
    folds = int(_setting(args, "folds", config, ("classifier", "folds"),
                         default=5))
    if grid_raw is not None:
        c_grid, gamma_grid = (_parse_grid(grid_raw)
                              if isinstance(grid_raw, str)
                              else (grid_raw["c"], grid_raw["gamma"]))
        C, gamma = svm.grid_search(store, deltas[0], c_grid, gamma_grid,
                                   n_folds=folds)
        print(f"grid search picked C={C} gamma={gamma}")
    else:
        C = float(_setting(args, "svm_c", config, ("classifier", "c"),
                           default=1.0))
        gamma = float(_setting(args, "svm_gamma", config,
                               ("classifier", "gamma"), default=1.0))
    written = []
    for delta in deltas:
        labeled = phase1.transform_labels(store.rows, delta)
        model = svm.train_svm(labeled, C, gamma)
        path = os.path.join(out, f"model_delta_{delta:.2f}.json")
        with open(path, "w") as fh:
            svm.save_model(model, fh)
        written.append(path)
    meta = {"C": C, "gamma": gamma, "deltas": deltas, "rows": rows_path}
    with open(os.path.join(out, "training_meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
    print(f"wrote {len(written)} model files to {out}")
    return 0


def cmd_eval(args, config):
    out = _out_dir(args, config)
    model_path = _setting(args, "model", config, ("classifier", "model"))
    rows_path = _setting(args, "rows", config, ("phase1", "rows"))
    if model_path is None or rows_path is None:
        raise CliError("--model and --rows are both required")
    delta = _setting(args, "delta", config, ("classifier", "delta"))
    if delta is None:
        raise CliError("--delta required to derive the reference labels")
    try:
        with open(model_path) as fh:
            model = svm.load_model(fh)
    except OSError as exc:
        raise CliError(str(exc))
    store = _load_rows(rows_path)
    labeled = phase1.transform_labels(store.rows, float(delta))
    acc = svm.accuracy(model, labeled)
    path = os.path.join(out, "accuracy.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "rows", "delta", "n_rows", "accuracy_pct"])
        writer.writerow([model_path, rows_path, delta, len(labeled),
                         f"{acc:.4f}"])
    print(f"accuracy {acc:.2f}% over {len(labeled)} rows (wrote {path})")
    return 0


def cmd_solve(args, config):
    out = _out_dir(args, config)
    method = _setting(args, "method", config, ("solve", "method"),
                      default="bd")
    if method not in ("bd", "learnbd"):
        raise CliError(f"unknown method {method!r}: expected bd or learnbd")
    tol = float(_setting(args, "tol", config, ("solve", "tol"), default=0.01))
    iter_limit = int(_setting(args, "iter_limit", config,
                              ("solve", "iter_limit"), default=10000))
    time_limit = _setting(args, "time_limit", config, ("solve", "time_limit"))
    time_limit = None if time_limit is None else float(time_limit)
    name, problem, _ = _build_problem(args, config)
    learned = method == "learnbd"
    if learned:
        rows_path = _setting(args, "rows", config, ("phase1", "rows"))
        if rows_path is None:
            raise CliError("phase-1 rows required: pass --rows for learnbd")
        store = _load_rows(rows_path)
        C = float(_setting(args, "svm_c", config, ("classifier", "c"),
                           default=1.0))
        gamma = float(_setting(args, "svm_gamma", config,
                               ("classifier", "gamma"), default=1.0))
        schedule = learnbd.DeltaSchedule(_delta_list(args, config))
        result = learnbd.run_learnbd(problem, store, tol, C=C, gamma=gamma,
                                     schedule=schedule,
                                     max_iterations=iter_limit,
                                     time_limit_s=time_limit)
    else:
        result = benders.run_classic_bd(problem, tol,
                                        max_iterations=iter_limit,
                                        time_limit_s=time_limit)
    iter_path = os.path.join(out, "iterations.csv")
    with open(iter_path, "w", newline="") as fh:
        benders.write_log_csv(result.state.log, fh, learned=learned)
    summary_path = os.path.join(out, "summary.csv")
    cum_rmp = result.state.log[-1].cum_rmp_time_s if result.state.log else 0.0
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerow([name, method, result.iterations,
                         repr(float(result.gap_pct)), result.cuts_total,
                         f"{cum_rmp:.6f}"])
    print(f"{name} {method}: status={result.status} iterations="
          f"{result.iterations} gap={result.gap_pct:.6g}% "
          f"cuts={result.cuts_total} objective={result.objective:.6f}")
    print(f"wrote {iter_path} and {summary_path}")
    return 0


def cmd_report(args, config):
    out = _out_dir(args, config)
    summaries = list(getattr(args, "summaries", None) or
                     _flat(config, "report", "summaries") or [])
    logs = list(getattr(args, "logs", None) or
                _flat(config, "report", "logs") or [])
    if not summaries and not logs:
        raise CliError("report needs --summaries and/or --logs")
    if summaries:
        rows = []
        for path in summaries:
            try:
                with open(path) as fh:
                    reader = csv.reader(fh)
                    header = next(reader, None)
                    if header is None or tuple(header) != SUMMARY_COLUMNS:
                        raise CliError(f"{path}: unrecognized summary header")
                    rows.extend(r for r in reader if r)
            except OSError as exc:
                raise CliError(str(exc))
        cmp_path = os.path.join(out, "comparison.csv")
        with open(cmp_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_COLUMNS)
            writer.writerows(rows)
        print(f"wrote {cmp_path} ({len(rows)} runs)")
    for path in logs:
        try:
            with open(path) as fh:
                reader = csv.DictReader(fh)
                panel_rows = [(r["iteration"], r["gap_pct"], r["cum_rmp_time_s"],
                               r["cuts_total"], r["cum_sp_time_s"])
                              for r in reader]
        except (OSError, KeyError) as exc:
            raise CliError(f"{path}: {exc}")
        stem = os.path.splitext(os.path.basename(path))[0]
        panel_path = os.path.join(out, f"panels_{stem}.csv")
        with open(panel_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "gap_pct", "cum_rmp_time_s",
                             "cuts_total", "cum_sp_time_s"])
            writer.writerows(panel_rows)
        print(f"wrote {panel_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_problem_flags(p):
    p.add_argument("--cap", help="OR-Library cap instance file")
    p.add_argument("--cflp-json", dest="cflp_json",
                   help="facility-location instance JSON")
    p.add_argument("--cmnd", help="network-design instance JSON")
    p.add_argument("--synth-cflp", dest="synth_cflp", metavar="WxF",
                   help="synthesize a facility-location instance, e.g. 16x50")
    p.add_argument("--scenarios", type=int, help="number of demand scenarios")
    p.add_argument("--sigma", type=float,
                   help="demand standard deviation as a ratio of the mean")
    p.add_argument("--scenario-file", dest="scenario_file",
                   help="load scenarios from CSV instead of sampling")
    p.add_argument("--scenario-seed", dest="scenario_seed", type=int)


def _add_common(p):
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int, help="top-level seed (default 0)")
    p.add_argument("--out", help="output directory (default .)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cutlearn",
        description="Benders decomposition with learned cut selection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write instance and scenario files")
    _add_common(p); _add_problem_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("phase1", help="sample cuts on a training problem")
    _add_common(p); _add_problem_flags(p)
    p.add_argument("--paths", type=int, help="number of sampling paths")
    p.add_argument("--path-length", dest="path_length", type=int,
                   help="steps per path (default twice the scenario count)")
    p.add_argument("--phase1-seed", dest="phase1_seed", type=int)
    p.set_defaults(func=cmd_phase1)

    p = sub.add_parser("train", help="train classifiers from sampled rows")
    _add_common(p)
    p.add_argument("--rows", help="phase-1 rows CSV")
    p.add_argument("--delta-list", dest="delta_list",
                   help='labeling thresholds, e.g. "1.2,1.1,1.0"')
    p.add_argument("--svm-c", dest="svm_c", type=float)
    p.add_argument("--svm-gamma", dest="svm_gamma", type=float)
    p.add_argument("--grid", help='grid search spec "c=1,10;gamma=0.1,1"')
    p.add_argument("--folds", type=int, help="cross-validation folds")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model on labeled rows")
    _add_common(p)
    p.add_argument("--model", help="model JSON file")
    p.add_argument("--rows", help="rows CSV with reference labels")
    p.add_argument("--delta", type=float, help="labeling threshold")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("solve", help="run a decomposition method")
    _add_common(p); _add_problem_flags(p)
    p.add_argument("--method", choices=("bd", "learnbd"))
    p.add_argument("--tol", type=float, help="gap tolerance in percent")
    p.add_argument("--time-limit", dest="time_limit", type=float,
                   help="wall-clock limit in seconds")
    p.add_argument("--iter-limit", dest="iter_limit", type=int)
    p.add_argument("--rows", help="phase-1 rows CSV (learnbd)")
    p.add_argument("--svm-c", dest="svm_c", type=float)
    p.add_argument("--svm-gamma", dest="svm_gamma", type=float)
    p.add_argument("--delta-list", dest="delta_list")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("report", help="aggregate runs into comparison tables")
    _add_common(p)
    p.add_argument("--summaries", nargs="+", help="summary.csv files")
    p.add_argument("--logs", nargs="+", help="iterations.csv files")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        return args.func(args, config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, problems.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
