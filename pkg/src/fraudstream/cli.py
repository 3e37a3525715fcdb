"""Command-line front end: ``gen``, ``static``, ``stream`` and ``compare``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .balance import BALANCER_NAMES, make_balancer
from .eval import ALPHA, grid_search, evaluate, read_jsonl, two_sample_t_test, wilcoxon_signed_rank
from .exceptions import ConfigError, EmptyResultError, FraudStreamError
from .ingest import apply_normalizer, fit_normalizer, load_dataset, stratified_split
from .models import MODEL_NAMES, PARAM_ALIASES, STREAM_DEFAULT_MODELS, DEFAULT_GRIDS, make_model
from .stream import (
    DirectoryWatchSource,
    SlidingWindowSpec,
    StreamingContext,
    queue_stream_source,
    results_by_model,
    run_streaming_pipeline,
    summarize_stream,
)
from .synthgen import GenSpec, generate_batches, generate_dataset, write_batches, write_dataset

STATIC_DEFAULT_MODELS = ("nb", "lr", "svm", "dt", "rf", "gbt", "mlp")
GAN_BALANCERS = ("vgan", "wgan")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# option name -> (type, default); values may come from flags or the config file
OPTIONS = {
    "seed": (int, 0),
    "out": (str, None),
    "n_records": (int, 100_000),
    "n_features": (int, 10),
    "fraud_fraction": (float, 0.122),
    "separation": (float, 1.5),
    "min_positives": (int, 2),
    "batch_size": (int, 1000),
    "batches": (bool, False),
    "input": (str, None),
    "label": (str, "label"),
    "models": (str, None),
    "balancer": (str, None),
    "folds": (int, 10),
    "no_grid": (bool, False),
    "gan_epochs": (int, 10_000),
    "target_ratio": (float, 1.0),
    "batches_dir": (str, None),
    "gen_inline": (bool, False),
    "ws": (int, 2),
    "sl": (int, 1),
    "interval_ms": (float, 0.0),
    "latency": (bool, False),
    "test": (str, "ttest"),
    "metric": (str, "auc"),
    "paired": (bool, False),
    "a": (str, None),
    "b": (str, None),
    "model_a": (str, None),
    "model_b": (str, None),
    "balancer_a": (str, None),
    "balancer_b": (str, None),
}


class UsageError(Exception):
    """Bad names or option values; reported with exit status 2."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _scalar(text: str):
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() == "none":
        return None
    return text


def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise UsageError(f"cannot read config {path}: {err}") from None
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def resolve(args) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    cfg = read_config(args.config) if args.config else {}
    opts = {}
    for key, (typ, default) in OPTIONS.items():
        flag = getattr(args, key, None)
        text = cfg.pop(key, None)
        if flag is not None and flag is not False:
            opts[key] = flag
        elif text is not None:
            try:
                opts[key] = _bool(text) if typ is bool else typ(text)
            except ValueError:
                raise UsageError(f"config value for {key!r} is not a valid {typ.__name__}: {text!r}") from None
        else:
            opts[key] = default
    opts["grid"] = [f"{k[5:]}={cfg[k]}" for k in sorted(cfg) if k.startswith("grid.")] + list(args.grid or [])
    opts["hp"] = [f"{k[3:]}={cfg[k]}" for k in sorted(cfg) if k.startswith("hp.")] + list(args.hp or [])
    leftover = sorted(k for k in cfg if not k.startswith(("grid.", "hp.")))
    if leftover:
        raise UsageError(f"unknown config key(s) {leftover}; valid: {sorted(OPTIONS)} plus grid.<model>.<param>, hp.<model>.<param>")
    return opts


def _names(text, valid, default, what):
    if text is None:
        return list(default)
    if text.strip() == "all":
        return list(valid)
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in valid]
    if bad or not names:
        raise UsageError(f"unknown {what} {bad or text!r}; valid: {', '.join(valid)}")
    return names


def _model_param(spec: str):
    """``model.param=value[,value...]`` -> (model, canonical param, [values])."""
    if "=" not in spec or "." not in spec.split("=", 1)[0]:
        raise UsageError(f"expected model.param=value, got {spec!r}")
    lhs, rhs = spec.split("=", 1)
    model, param = lhs.strip().split(".", 1)
    if model not in MODEL_NAMES:
        raise UsageError(f"unknown model {model!r}; valid: {', '.join(MODEL_NAMES)}")
    param = PARAM_ALIASES.get(param.strip(), param.strip())
    valid = make_model(model).get_params()
    if param not in valid:
        raise UsageError(f"model {model!r} has no parameter {param!r}; valid: {sorted(valid)}")
    return model, param, [_scalar(v) for v in rhs.split(",") if v.strip()]


def build_grids(models, overrides, use_grid: bool) -> dict:
    grids = {m: (dict(DEFAULT_GRIDS[m]) if use_grid else {}) for m in models}
    for spec in overrides:
        model, param, values = _model_param(spec)
        if model in grids:
            grids[model][param] = values
    return grids


def build_hp(overrides) -> dict:
    hp: dict = {}
    for spec in overrides:
        model, param, values = _model_param(spec)
        if len(values) != 1:
            raise UsageError(f"--hp takes a single value: {spec!r}")
        hp.setdefault(model, {})[param] = values[0]
    return hp


def _balancer(name, opts, seed):
    kw = {}
    if name != "none":
        kw["target_ratio"] = opts["target_ratio"]
    if name in GAN_BALANCERS:
        kw["epochs"] = opts["gan_epochs"]
    return make_balancer(name, seed, **kw)


def _out_dir(opts, default):
    path = Path(opts["out"] or default)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def format_table(title, rows, cols, values) -> str:
    """Rows x columns grid of 3-decimal numbers; ``values[(row, col)]``."""
    width = max(8, *(len(c) + 2 for c in cols))
    head = "Model".ljust(8) + "".join(c.rjust(width) for c in cols)
    lines = [title, head]
    for r in rows:
        cells = [f"{values[(r, c)]:.3f}" if (r, c) in values else "-" for c in cols]
        lines.append(r.ljust(8) + "".join(v.rjust(width) for v in cells))
    return "\n".join(lines)


def cmd_gen(opts) -> int:
    spec = GenSpec(opts["n_records"], opts["n_features"], opts["fraud_fraction"], opts["separation"],
                   opts["min_positives"], opts["seed"])
    if opts["batches"]:
        out = _out_dir(opts, "batches")
        paths = write_batches(generate_batches(spec, opts["batch_size"]), out)
        (out / "END").write_text("", encoding="utf-8")
        print(f"wrote {len(paths)} batch files to {out}")
    else:
        out = Path(opts["out"] or "transactions.csv")
        if out.parent != Path("."):
            out.parent.mkdir(parents=True, exist_ok=True)
        ds = generate_dataset(spec)
        write_dataset(ds, out)
        print(f"wrote {len(ds)} records ({int(ds.y.sum())} positive) to {out}")
    return EXIT_OK


def cmd_static(opts) -> int:
    if not opts["input"]:
        raise UsageError("static needs --input")
    models = _names(opts["models"], MODEL_NAMES, STATIC_DEFAULT_MODELS, "model(s)")
    balancers = _names(opts["balancer"], BALANCER_NAMES, BALANCER_NAMES, "balancer(s)")
    grids = build_grids(models, opts["grid"], not opts["no_grid"])
    seed, k = opts["seed"], opts["folds"]
    out = _out_dir(opts, "results")

    ds = load_dataset(opts["input"], opts["label"])
    train_idx, test_idx = stratified_split(ds, 0.80, seed)
    _, schema = fit_normalizer(ds.X[train_idx], ds.schema)
    X_train = apply_normalizer(schema, ds.X[train_idx])
    X_test = apply_normalizer(schema, ds.X[test_idx])
    y_train, y_test = ds.y[train_idx], ds.y[test_idx]

    rows, tables = [], {"auc": {}, "sensitivity": {}, "specificity": {}}
    for bal_name in balancers:
        for model in models:
            print(f"[static] {model} / {bal_name}", file=sys.stderr)
            bal = _balancer(bal_name, opts, seed)
            best = grid_search((X_train, y_train), model, grids[model] or [{}], bal, k, seed)
            best.balancer = bal_name
            Xb, yb = bal.fit_resample(X_train, y_train)
            holdout = evaluate(y_test, make_model(model, best.params, seed=seed).fit(Xb, yb).predict(X_test))
            row = best.as_dict()
            row["holdout"] = {m: getattr(holdout, m) for m in ("auc", "sensitivity", "specificity")}
            row["folds_k"] = k
            row["seed"] = seed
            rows.append(row)
            tables["auc"][(model, bal_name)] = best.mean_auc
            tables["sensitivity"][(model, bal_name)] = best.mean_sensitivity
            tables["specificity"][(model, bal_name)] = best.mean_specificity

    _write_jsonl(out / "static_results.jsonl", rows)
    text = "\n\n".join(
        format_table(f"Mean {m if m != 'auc' else 'AUC'} under {k}-fold CV", models, balancers, tables[m])
        for m in ("auc", "sensitivity", "specificity")
    )
    (out / "static_table.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_stream(opts) -> int:
    models = _names(opts["models"], MODEL_NAMES, STREAM_DEFAULT_MODELS, "model(s)")
    bal_name = opts["balancer"] or "none"
    if bal_name not in BALANCER_NAMES:
        raise UsageError(f"unknown balancer {bal_name!r}; valid: {', '.join(BALANCER_NAMES)}")
    hp = build_hp(opts["hp"])
    spec = SlidingWindowSpec(opts["ws"], opts["sl"])
    seed = opts["seed"]
    if opts["batches_dir"] and opts["gen_inline"]:
        raise UsageError("use either --batches-dir or --gen-inline, not both")
    if opts["batches_dir"]:
        source = DirectoryWatchSource(opts["batches_dir"])
    elif opts["gen_inline"]:
        gspec = GenSpec(opts["n_records"], opts["n_features"], opts["fraud_fraction"], opts["separation"],
                        opts["min_positives"], seed)
        source = queue_stream_source(generate_batches(gspec, opts["batch_size"]), opts["interval_ms"])
    else:
        raise UsageError("stream needs --batches-dir or --gen-inline")
    balancer = None if bal_name == "none" else _balancer(bal_name, opts, seed)
    out = _out_dir(opts, "results")

    with StreamingContext(source, spec, models, hp, balancer, seed) as ctx:
        results = run_streaming_pipeline(ctx)
    keep_latency = opts["latency"]
    rows = [r.as_dict(keep_latency) for r in results]
    grouped = results_by_model(results)
    if not results:
        print(f"warning: no full window of {spec.window_size} batches arrived; nothing evaluated",
              file=sys.stderr)
    summaries = {}
    for model in models:
        series = grouped.get(model, [])
        try:
            summaries[model] = summarize_stream(series)
        except EmptyResultError:
            continue
        rows.append(summaries[model].as_dict(keep_latency))
        with open(out / f"plot_{model}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window_id", "auc"])
            for wid, auc in zip(summaries[model].window_ids, summaries[model].auc_series):
                w.writerow([wid, repr(float(auc))])
    _write_jsonl(out / "stream_windows.jsonl", rows)
    n_windows = spec.n_windows(len(ctx.table))
    print(f"windows: {n_windows} (ws={spec.window_size}, sl={spec.sliding_interval}, batches={len(ctx.table)})")
    if summaries:
        vals = {}
        for m, s in summaries.items():
            vals[(m, "AUC")] = s.mean_auc
            vals[(m, "Sensitivity")] = s.mean_sensitivity
            vals[(m, "Specificity")] = s.mean_specificity
        print(format_table("Mean scores over sliding windows", list(summaries),
                           ["AUC", "Sensitivity", "Specificity"], vals))
    return EXIT_OK


def _pick_row(rows, model, balancer, label):
    cand = [r for r in rows if "folds" in r]
    if model is not None:
        cand = [r for r in cand if r.get("model") == model]
    if balancer is not None:
        cand = [r for r in cand if r.get("balancer") == balancer]
    if len(cand) != 1:
        raise UsageError(f"{label}: {len(cand)} matching result rows; narrow with --model-*/--balancer-*")
    return cand[0]


def load_metric_array(path, metric="auc", model=None, balancer=None, label="a"):
    """Fold array from static results, or ``{window_id: value}`` from stream results."""
    try:
        rows = read_jsonl(path)
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err}") from None
    if any("folds" in r for r in rows):
        row = _pick_row(rows, model, balancer, label)
        return list(row["folds"][metric])
    windows = [r for r in rows if "window_id" in r and not r.get("skipped")]
    models = sorted({r["model"] for r in windows})
    if model is None:
        if len(models) != 1:
            raise UsageError(f"{label}: file holds models {models}; choose one with --model-{label}")
        model = models[0]
    sel = {r["window_id"]: r[metric] for r in windows if r["model"] == model}
    if not sel:
        raise UsageError(f"{label}: no windows for model {model!r}")
    return sel


def cmd_compare(opts) -> int:
    if not opts["a"] or not opts["b"]:
        raise UsageError("compare needs --a and --b result files")
    a = load_metric_array(opts["a"], opts["metric"], opts["model_a"], opts["balancer_a"], "a")
    b = load_metric_array(opts["b"], opts["metric"], opts["model_b"], opts["balancer_b"], "b")
    if isinstance(a, dict) and isinstance(b, dict):
        if sorted(a) != sorted(b):
            raise UsageError(f"window sets differ ({len(a)} vs {len(b)} windows)")
        keys = sorted(a)
        a, b = [a[k] for k in keys], [b[k] for k in keys]
    elif isinstance(a, dict) or isinstance(b, dict):
        raise UsageError("cannot compare fold results with window results")
    if len(a) != len(b):
        raise UsageError(f"metric arrays differ in length: {len(a)} vs {len(b)}")
    if opts["test"] == "ttest":
        res = two_sample_t_test(a, b, paired=opts["paired"])
    elif opts["test"] == "wilcoxon":
        res = wilcoxon_signed_rank(a, b)
    else:
        raise UsageError(f"unknown test {opts['test']!r}; valid: ttest, wilcoxon")
    decision = "reject H0" if res.reject(ALPHA) else "accept H0"
    payload = {"test": opts["test"], "metric": opts["metric"], "n": len(a), **res.as_dict(),
               "alpha": ALPHA, "decision": decision}
    df = "" if res.df is None else f" df={res.df}"
    print(f"{opts['test']}: statistic={res.statistic:.6g}{df} p_value={res.p_value:.6g} -> {decision} at alpha={ALPHA}")
    if opts["out"]:
        Path(opts["out"]).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--config", help="flat key = value file; flags override it")

    gen_opts = argparse.ArgumentParser(add_help=False)
    gen_opts.add_argument("--n-records", type=int)
    gen_opts.add_argument("--n-features", type=int)
    gen_opts.add_argument("--fraud-fraction", type=float)
    gen_opts.add_argument("--separation", type=float, help="class mean shift in standard deviations")
    gen_opts.add_argument("--min-positives", type=int, help="minimum positives per batch")
    gen_opts.add_argument("--batch-size", type=int)

    p = argparse.ArgumentParser(prog="fraudstream", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common, gen_opts], help="write a synthetic dataset")
    g.add_argument("--batches", action="store_true", help="write batch_NNNNNN.csv files into --out")

    s = sub.add_parser("static", parents=[common], help="cross-validated static pipeline")
    s.add_argument("--input")
    s.add_argument("--label")
    s.add_argument("--models", help=f"comma list or 'all' ({','.join(MODEL_NAMES)})")
    s.add_argument("--balancer", help=f"comma list or 'all' ({','.join(BALANCER_NAMES)})")
    s.add_argument("--folds", type=int)
    s.add_argument("--grid", action="append", metavar="MODEL.PARAM=V1,V2")
    s.add_argument("--no-grid", action="store_true", help="use estimator defaults instead of the grid")
    s.add_argument("--gan-epochs", type=int)
    s.add_argument("--target-ratio", type=float)
    s.set_defaults(hp=None)

    t = sub.add_parser("stream", parents=[common, gen_opts], help="sliding-window streaming pipeline")
    src = t.add_mutually_exclusive_group()
    src.add_argument("--batches-dir")
    src.add_argument("--gen-inline", action="store_true")
    t.add_argument("--ws", type=int)
    t.add_argument("--sl", type=int)
    t.add_argument("--models", help=f"comma list ({','.join(MODEL_NAMES)})")
    t.add_argument("--balancer", help=f"one of {','.join(BALANCER_NAMES)}")
    t.add_argument("--hp", action="append", metavar="MODEL.PARAM=V")
    t.add_argument("--interval-ms", type=float)
    t.add_argument("--latency", action="store_true", help="record wall-clock latency (breaks byte-identical output)")
    t.add_argument("--gan-epochs", type=int)
    t.add_argument("--target-ratio", type=float)
    t.set_defaults(grid=None)

    c = sub.add_parser("compare", parents=[common], help="significance test between two result files")
    c.add_argument("--a", required=False)
    c.add_argument("--b", required=False)
    c.add_argument("--model-a")
    c.add_argument("--model-b")
    c.add_argument("--balancer-a")
    c.add_argument("--balancer-b")
    c.add_argument("--test", choices=("ttest", "wilcoxon"))
    c.add_argument("--metric", choices=("auc", "sensitivity", "specificity"))
    c.add_argument("--paired", action="store_true")
    for parser in (g, c):
        parser.set_defaults(grid=None, hp=None)
    return p


COMMANDS = {"gen": cmd_gen, "static": cmd_static, "stream": cmd_stream, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except (UsageError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FraudStreamError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
