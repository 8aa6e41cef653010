"""Command-line interface: select, mi, synth, bench, verify.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  stdout carries only
the requested artifact; diagnostics and errors go to stderr.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys

from . import bench as bench_mod
from . import verify as verify_mod
from .baselines import BaselineKind, baseline_select
from .data import (DataError, TreeModelSpec, discretize, gen_from_spec,
                   gen_tree_synthetic, load_csv, write_csv)
from .estimators import EstimatorError, joint_mi_exact, mi_plugin
from .vmi import (QDistKind, SelectionError, VmiConfig, condition_on, init_state,
                  lb_estimate, score_candidate, select)

logger = logging.getLogger("vmifs")

VMI_METHODS = {"vmi-naive": QDistKind.NAIVE, "vmi-pairwise": QDistKind.PAIRWISE}
METHODS = tuple(VMI_METHODS) + tuple(k.value for k in BaselineKind)

# defaults per option; config files and flags override them in that order
DEFAULTS = {
    "method": "vmi-naive",
    "T": 10,
    "alpha": None,  # command-specific, see _alpha_default
    "bins": 10,
    "strategy": "equal-frequency",
    "kde": False,
    "seed": 0,
    "workers": None,
    "format": "json",
    "label": None,
    "k": 3,
    "methods": "vmi-naive,mim",
    "feature_counts": None,
    "trials": None,
}

_CONVERTERS = {
    "T": int, "alpha": float, "bins": int, "seed": int, "workers": int, "k": int,
    "trials": int,
    "kde": lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
}


class CLIError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def read_config_file(path):
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CLIError("E_CONFIG", f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise CLIError("E_CONFIG", f"{path}:{lineno}: unknown key {key!r}")
            conv = _CONVERTERS.get(key, str)
            try:
                out[key] = conv(value)
            except ValueError:
                raise CLIError("E_CONFIG", f"{path}:{lineno}: bad value for {key}") from None
    return out


def _alpha_default(command):
    return 0.0 if command == "mi" else 0.1


def resolve_config(args):
    """Merge flags > config file > defaults (workers: flag > VMIFS_WORKERS > file)."""
    file_cfg = read_config_file(args.config) if getattr(args, "config", None) else {}
    cfg = {}
    for key, default in DEFAULTS.items():
        if not hasattr(args, key):
            continue
        value = getattr(args, key)
        if value is None or (key == "kde" and value is False):
            value = file_cfg.get(key, default)
        cfg[key] = value
    if "alpha" in cfg and cfg["alpha"] is None:
        cfg["alpha"] = _alpha_default(args.command)
    if "workers" in cfg:
        if args.workers is not None:
            cfg["workers"] = args.workers
        elif os.environ.get("VMIFS_WORKERS"):
            try:
                cfg["workers"] = max(1, int(os.environ["VMIFS_WORKERS"]))
            except ValueError:
                raise CLIError("E_CONFIG", "VMIFS_WORKERS must be an integer") from None
        elif "workers" in file_cfg:
            cfg["workers"] = file_cfg["workers"]
        else:
            cfg["workers"] = os.cpu_count() or 1
    if cfg.get("T") is not None and cfg["T"] < 1:
        raise CLIError("E_USAGE", "T must be >= 1")
    return cfg


def _add_common(p):
    p.add_argument("--config", help="key=value config file (flags take precedence)")
    p.add_argument("--label", help="label column name (default: last column)")
    p.add_argument("--alpha", type=_nonneg_float, help="additive smoothing")
    p.add_argument("--bins", type=int, help="bins for continuous columns (default 10)")
    p.add_argument("--strategy", choices=["equal-width", "equal-frequency"])
    p.add_argument("--kde", action="store_true", default=False,
                   help="keep continuous columns and use KDE (vmi methods only)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=_positive_int)
    p.add_argument("--format", choices=["json", "csv"])
    p.add_argument("-o", "--out", help="write the artifact here instead of stdout")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="vmifs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="rank features")
    p.add_argument("input")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("-T", "--T", dest="T", type=_positive_int, help="features to select")
    _add_common(p)

    p = sub.add_parser("mi", help="per-feature MI and lower-bound table")
    p.add_argument("input")
    p.add_argument("--features", help="comma-separated names or indices (default all)")
    p.add_argument("--exact", action="store_true", help="brute-force joint MI of --set")
    p.add_argument("--set", dest="feature_set", help="comma-separated feature set")
    _add_common(p)

    p = sub.add_parser("synth", help="write synthetic data as CSV")
    p.add_argument("--model", default="tree-gaussian", choices=["tree-gaussian", "spec-file"])
    p.add_argument("--spec", help="JSON tree model (for --model spec-file)")
    p.add_argument("-n", "--n", dest="n", type=_positive_int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out")
    p.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("bench", help="cross-validated error curves")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--methods", help="comma-separated methods (adds 'random')")
    p.add_argument("--feature-counts", dest="feature_counts",
                   help="comma-separated m values (default 10..100 step 10, cut at D)")
    p.add_argument("-k", "--k", dest="k", type=_positive_int, help="neighbours (default 3)")
    p.add_argument("--check-leakage", action="store_true",
                   help="run the canary leakage self-check for every method")
    _add_common(p)

    p = sub.add_parser("verify", help="randomized oracle checks")
    p.add_argument("suite", choices=list(verify_mod.SUITES) + ["all"])
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _load(path, cfg):
    label = cfg.get("label")
    return load_csv(path, label if label else -1)


def _prepare(ds, cfg, allow_kde):
    if cfg.get("kde"):
        if not allow_kde:
            raise CLIError("E_USAGE", "--kde is only valid with vmi methods")
        return ds
    if ds.all_categorical:
        return ds
    if cfg["bins"] < 2:
        raise CLIError("E_USAGE", "--bins must be >= 2")
    return discretize(ds, cfg["bins"], cfg["strategy"])


def _echo(cfg, **extra):
    out = {k: v for k, v in cfg.items() if k != "workers"}
    out.update(extra)
    return out


def cmd_select(args, cfg):
    method = cfg["method"]
    ds = _prepare(_load(args.input, cfg), cfg, method in VMI_METHODS)
    if method in VMI_METHODS:
        res = select(ds, VMI_METHODS[method], cfg["T"],
                     VmiConfig(alpha=cfg["alpha"], workers=cfg["workers"]))
    else:
        res = baseline_select(method, ds, cfg["T"], workers=cfg["workers"])
    logger.info("selection took %.3fs", res.wall_time)
    if cfg["format"] == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "event", "feature", "score"])
        for r in res.trajectory:
            name = "" if r.feature is None else ds.feature_names[r.feature]
            w.writerow([r.step, r.event, name, repr(float(r.score))])
        return buf.getvalue()
    doc = res.to_dict()
    doc["config"] = _echo(cfg, input=os.path.basename(args.input))
    for r in doc["trajectory"]:
        r["feature_name"] = None if r["feature"] is None else ds.feature_names[r["feature"]]
    return _dumps(doc)


def _parse_features(ds, text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(ds.feature_index(int(tok) if tok.lstrip("-").isdigit() else tok))
    return out


def cmd_mi(args, cfg):
    ds = _prepare(_load(args.input, cfg), cfg, allow_kde=False)
    alpha = cfg["alpha"]
    vcfg = VmiConfig(alpha=alpha, workers=cfg["workers"])
    doc = {"config": _echo(cfg, input=os.path.basename(args.input))}
    if args.exact:
        if not args.feature_set:
            raise CLIError("E_USAGE", "--exact requires --set")
        S = _parse_features(ds, args.feature_set)
        state = condition_on(init_state(ds, QDistKind.NAIVE, vcfg), S)
        doc["set"] = {"features": [ds.feature_names[i] for i in S],
                      "joint_mi_exact": joint_mi_exact(ds, S),
                      "lb_naive": lb_estimate(state)}
        rows = [doc["set"]]
    else:
        feats = _parse_features(ds, args.features) if args.features else range(ds.n_features)
        base = init_state(ds, QDistKind.NAIVE, vcfg)
        rows = []
        for i in feats:
            rows.append({"feature": ds.feature_names[i], "mi": mi_plugin(ds, i, alpha),
                         "lb": score_candidate(base, i)})
        doc["features"] = rows
    if cfg["format"] == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if args.exact:
            w.writerow(["features", "joint_mi_exact", "lb_naive"])
            s = doc["set"]
            w.writerow([";".join(s["features"]), repr(s["joint_mi_exact"]), repr(s["lb_naive"])])
        else:
            w.writerow(["feature", "mi", "lb"])
            for r in rows:
                w.writerow([r["feature"], repr(r["mi"]), repr(r["lb"])])
        return buf.getvalue()
    return _dumps(doc)


def cmd_synth(args):
    if args.model == "tree-gaussian":
        ds = gen_tree_synthetic(args.n, args.seed)
    else:
        if not args.spec:
            raise CLIError("E_USAGE", "--model spec-file requires --spec")
        with open(args.spec, encoding="utf-8") as fh:
            spec = TreeModelSpec.from_dict(json.load(fh))
        ds = gen_from_spec(spec, args.n, args.seed)
    buf = io.StringIO()
    write_csv(ds, buf)
    return buf.getvalue()


def cmd_bench(args, cfg):
    methods = [m.strip() for m in cfg["methods"].split(",") if m.strip()]
    for m in methods:
        if m not in METHODS and m != "random":
            raise CLIError("E_USAGE", f"unknown method {m!r}")
        if cfg.get("kde") and m not in VMI_METHODS and m != "random":
            raise CLIError("E_USAGE", "--kde is only valid with vmi methods")
    counts = None
    if cfg["feature_counts"]:
        try:
            counts = [int(x) for x in str(cfg["feature_counts"]).split(",") if x.strip()]
        except ValueError:
            raise CLIError("E_USAGE", "--feature-counts must be integers") from None
    reports = {}
    for path in args.inputs:
        ds = _prepare(_load(path, cfg), cfg, allow_kde=True)
        rep = bench_mod.run_bench(ds, methods, counts, cfg["seed"], cfg["k"],
                                  cfg["workers"], cfg["alpha"])
        rep.config = _echo(cfg, input=os.path.basename(path))
        doc = rep.to_dict()
        if args.check_leakage:
            leak = {}
            for m in methods:
                ok, _ = bench_mod.leakage_check(ds, m, cfg["seed"], cfg["alpha"])
                leak[m] = "pass" if ok else "fail"
            doc["leakage"] = leak
        reports[os.path.basename(path)] = (rep, doc)
    failed = any(v == "fail" for _, d in reports.values()
                 for v in d.get("leakage", {}).values())
    if cfg["format"] == "csv":
        if len(reports) == 1:
            text = next(iter(reports.values()))[0].to_csv()
        else:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["dataset", "method", "m", "mean_error", "std"])
            for name, (rep, _) in reports.items():
                for row in list(csv.reader(io.StringIO(rep.to_csv())))[1:]:
                    w.writerow([name] + row)
            text = buf.getvalue()
    elif len(reports) == 1:
        text = _dumps(next(iter(reports.values()))[1])
    else:
        text = _dumps({name: d for name, (_, d) in reports.items()})
    return text, failed


def cmd_verify(args):
    suites = verify_mod.SUITES if args.suite == "all" else (args.suite,)
    results = []
    for s in suites:
        r = verify_mod.run_suite(s, args.trials, args.seed)
        r.pop("elapsed")
        results.append(r)
    doc = {"suites": results, "passed": all(r["passed"] for r in results)}
    return _dumps(doc), doc["passed"]


def _fail(code, message):
    sys.stderr.write(json.dumps({"error": code, "message": str(message)}) + "\n")
    return 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.ERROR - 10 * min(getattr(args, "verbose", 0), 3)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            _emit(cmd_synth(args), args.out)
            return 0
        if args.command == "verify":
            text, ok = cmd_verify(args)
            _emit(text, args.out)
            return 0 if ok else 1
        cfg = resolve_config(args)
        if args.command == "select":
            _emit(cmd_select(args, cfg), args.out)
        elif args.command == "mi":
            _emit(cmd_mi(args, cfg), args.out)
        elif args.command == "bench":
            text, failed = cmd_bench(args, cfg)
            _emit(text, args.out)
            if failed:
                return _fail("E_LEAKAGE", "canary leakage self-check failed")
        return 0
    except CLIError as exc:
        if exc.code == "E_USAGE":
            parser.print_usage(sys.stderr)
            sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
            return 2
        return _fail(exc.code, exc)
    except DataError as exc:
        return _fail("E_DATA", exc)
    except EstimatorError as exc:
        return _fail("E_ESTIMATOR", exc)
    except SelectionError as exc:
        return _fail("E_SELECTION", exc)
    except bench_mod.BenchError as exc:
        return _fail("E_BENCH", exc)
    except OSError as exc:
        return _fail("E_IO", exc)
    except ValueError as exc:
        return _fail("E_VALUE", exc)


if __name__ == "__main__":
    sys.exit(main())
