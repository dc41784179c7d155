"""Command-line entry point: gen-data, train, eval, verify, plot."""

import argparse
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data, figures, harness, model, oracle, trainer
from .attack import AttackConfig, parse_attack_spec
from .config import ConfigError, atomic_write_bytes, header_lines, layered, load_config_file
from .objective import AuxParams, ObjectiveContext

log = logging.getLogger("adauc")


def _opt_int(v):
    return None if v in (None, "", "none", "auto") else int(v)


def _opt_float(v):
    return None if v in (None, "", "none", "auto") else float(v)


def _opt_str(v):
    return None if v in (None, "", "none") else str(v)


def _hidden(v):
    v = str(v).strip()
    return tuple(int(t) for t in v.split(",") if t.strip()) if v else ()


# key -> (converter, default). Defaults match the reference training setup where one exists.
TRAIN_SCHEMA = {
    "mode": (str, "at2"),
    "hidden": (str, ""),
    "epochs": (int, 60),
    "eta_w": (float, 0.01),
    "eta_alpha": (float, 0.1),
    "batch_size": (int, 128),
    "weight_decay": (float, 5e-4),
    "momentum": (float, 0.0),
    "lr_decay_factor": (float, 0.1),
    "lr_decay_every": (int, 30),
    "lr_min": (float, 0.0),
    "eps": (float, 8.0 / 255.0),
    "beta": (float, 2.0 / 255.0),
    "k_steps": (int, 10),
    "c_max": (_opt_float, None),
    "control_epoch": (_opt_int, None),
    "gamma": (float, 0.01),
    "eval_attack": (_opt_str, None),
    "seed": (int, 0),
}

GEN_SCHEMA = {
    "kind": (str, "synthetic"),
    "seed": (int, 0),
    "n": (int, 2500),
    "d": (int, 50),
    "rho": (float, 0.1),
    "separation": (float, 4.0),
    "test_fraction": (float, 0.2),
    "n_classes": (int, 10),
    "n_max": (_opt_int, None),
    "imbalance": (float, 0.01),
}

EVAL_SCHEMA = {
    "attacks": (str, "clean,fgsm,pgd-5,pgd-10,pgd-20"),
    "eps": (float, 8.0 / 255.0),
    "beta": (float, 2.0 / 255.0),
    "random_start": (lambda v: str(v).lower() in ("1", "true", "yes"), False),
    "hist_bins": (int, 10),
    "seed": (int, 0),
}


def _effective(schema, args):
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    defaults = {k: d for k, (_, d) in schema.items()}
    flags = {k: getattr(args, k, None) for k in schema}
    merged = layered(defaults, file_values, flags)
    return {k: schema[k][0](v) if v is not None else None for k, v in merged.items()}


def _add_schema_flags(p, schema):
    for key in schema:
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None)


def _threads(args):
    if args.threads is not None:
        return max(1, int(args.threads))
    return max(1, int(os.environ.get("ADAUC_THREADS", "1")))


# --- subcommands -------------------------------------------------------------------------


def cmd_gen_data(args):
    cfg = _effective(GEN_SCHEMA, args)
    kind = cfg["kind"]
    if kind == "synthetic":
        full = data.gen_synthetic_longtail(cfg["seed"], cfg["n"], cfg["d"], cfg["rho"],
                                           cfg["separation"])
        if args.test_out:
            train_ds, test_ds = data.train_test_split(full, cfg["test_fraction"], cfg["seed"] + 1)
        else:
            train_ds, test_ds = full, None
    elif kind in ("mnist-lt", "cifar10-lt"):
        if kind == "mnist-lt":
            if not (args.images and args.labels):
                raise ConfigError("mnist-lt needs --images and --labels")
            pool = data.load_mnist_idx(args.images, args.labels)
            test_pool = (data.load_mnist_idx(args.test_images, args.test_labels)
                         if args.test_images and args.test_labels else None)
        else:
            if not args.batches:
                raise ConfigError("cifar10-lt needs --batches")
            pools = [data.load_cifar10_bin(b) for b in args.batches.split(",")]
            pool = data.ClassPool(np.concatenate([p.features for p in pools]),
                                  np.concatenate([p.classes for p in pools]))
            test_pool = data.load_cifar10_bin(args.test_batch) if args.test_batch else None
        n_classes = cfg["n_classes"]
        n_max = cfg["n_max"] or int((pool.classes == 0).sum())
        spec = data.LongTailSpec(n_classes, n_max, cfg["imbalance"],
                                 data.last_half_positive(n_classes))
        train_ds = data.subsample_longtail(pool, spec, cfg["seed"], name=kind)
        test_ds = (data.binarize_pool(test_pool, spec.positive_class_ids, name=kind + "-test")
                   if test_pool is not None else None)
        if args.test_out and test_ds is None:
            raise ConfigError("--test-out needs test files for this kind")
    else:
        raise ConfigError(f"unknown data kind {kind!r}")
    atomic_write_bytes(args.out, data.dataset_to_bytes(train_ds))
    if args.test_out:
        atomic_write_bytes(args.test_out, data.dataset_to_bytes(test_ds))
    log.info("wrote %s (n=%d, d=%d, p=%.4f)", args.out, train_ds.n, train_ds.d, train_ds.p)
    return 0


def cmd_train(args):
    cfg = _effective(TRAIN_SCHEMA, args)
    ds = data.load_dataset(args.data)
    test = data.load_dataset(args.test_data) if args.test_data else None
    if cfg["eval_attack"]:
        parse_attack_spec(cfg["eval_attack"])
    tcfg = trainer.TrainConfig(
        epochs=cfg["epochs"], eta_w=cfg["eta_w"], eta_alpha=cfg["eta_alpha"],
        batch_size=cfg["batch_size"], control_epoch=cfg["control_epoch"],
        lr_decay_factor=cfg["lr_decay_factor"], lr_decay_every=cfg["lr_decay_every"],
        lr_min=cfg["lr_min"], weight_decay=cfg["weight_decay"], momentum=cfg["momentum"],
        seed=cfg["seed"], mode=cfg["mode"], eval_attack=cfg["eval_attack"])
    acfg = AttackConfig(eps=cfg["eps"], beta=cfg["beta"], k_steps=cfg["k_steps"],
                        c_max=cfg["c_max"])
    ctx = ObjectiveContext(ds.p, cfg["gamma"])
    arch = (ds.d,) + _hidden(cfg["hidden"]) + (1,)
    res = trainer.train(ds, arch, acfg, tcfg, ctx, test=test)
    ckpt = model.save_checkpoint(io.BytesIO(), res.params,
                                 [res.aux.a, res.aux.b, res.aux.alpha], tcfg.mode)
    echo = dict(cfg, data=args.data, c_max_used=res.history.c_max)
    hist_text = harness.csv_text(trainer.HISTORY_COLUMNS, harness.history_rows(res.history), echo)
    atomic_write_bytes(args.out_model, ckpt)
    if args.out_history:
        atomic_write_bytes(args.out_history, hist_text.encode("utf-8"))
        if not args.no_figures:
            figures.history_figure(res.history, Path(args.out_history).with_suffix(".png"),
                                   "; ".join(header_lines(echo, prefix="")))
    return 0


def _load_entry(path):
    params, extras, mode = model.load_checkpoint(path)
    if len(extras) != 3:
        raise ConfigError(f"{path}: checkpoint lacks a, b, alpha")
    return harness.ModelEntry(Path(path).stem, mode, params, AuxParams(*extras))


def cmd_eval(args):
    cfg = _effective(EVAL_SCHEMA, args)
    specs = [s.strip() for s in cfg["attacks"].split(",") if s.strip()]
    for s in specs:
        parse_attack_spec(s)
    ds = data.load_dataset(args.data)
    entries = [_load_entry(p) for p in args.model]
    report = harness.evaluate_grid(entries, ds, specs, eps=cfg["eps"], beta=cfg["beta"],
                                   threads=_threads(args), random_start=cfg["random_start"],
                                   seed=cfg["seed"])
    echo = dict(cfg, data=args.data, models=",".join(args.model))
    hists = []
    if args.hist_dir:
        for e in entries:
            for spec in specs:
                h = harness.score_histogram(e, ds, spec, cfg["hist_bins"], cfg["eps"], cfg["beta"])
                hists.append((e, spec, h))
    harness.write_csv(report, args.out, echo)
    if not args.no_figures:
        figures.auc_grid_figure(report, Path(args.out).with_suffix(".png"),
                                "; ".join(header_lines(echo, prefix="")))
    for e, spec, h in hists:
        stem = Path(args.hist_dir) / f"hist_{e.method}_{spec}"
        harness.write_csv(h, stem.with_suffix(".csv"), dict(echo, model=e.method, attack=spec))
        if not args.no_figures:
            figures.histogram_figure(h, stem.with_suffix(".png"), f"{e.method}: {spec}")
    for method, mode, attack, auc in report.records():
        log.info("%s (%s) %s: %.4f", method, mode, attack, auc)
    return 0


def cmd_verify(args):
    suites = [s.strip() for s in args.suite.split(",") if s.strip()]
    report = oracle.run_suites(suites, args.seed)
    for r in report.results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.suite}.{r.check} value={r.value:.3e} "
              f"threshold={r.threshold:.1e} {r.detail}".rstrip())
    if args.out:
        harness.write_csv(report, args.out, {"suite": args.suite, "seed": args.seed})
    return 0 if report.passed else 1


def cmd_plot(args):
    if bool(args.history) == bool(args.histogram):
        raise ConfigError("give exactly one of --history or --histogram")
    src = args.history or args.histogram
    header, rows = harness.read_csv(src)
    wanted = trainer.HISTORY_COLUMNS if args.history else harness.HISTOGRAM_COLUMNS
    missing = set(wanted) - set(header)
    if missing:
        kind = "history" if args.history else "histogram"
        raise ConfigError(f"{src}: not a {kind} CSV (missing {sorted(missing)})")
    cols = {name: [float(r[header.index(name)]) for r in rows] for name in wanted}
    if args.history:
        series = {"auc_clean": (cols["epoch"], cols["auc_clean"])}
        if any(v == v for v in cols["auc_attacked"]):
            series["auc_attacked"] = (cols["epoch"], cols["auc_attacked"])
        harness.write_svg_lines(series, args.out, "test AUC per epoch", "epoch", "AUC",
                                {"source": src})
    else:
        centers = [0.5 * (lo + hi) for lo, hi in zip(cols["bin_lo"], cols["bin_hi"])]
        series = {"positive": (centers, cols["pos_count"]),
                  "negative": (centers, cols["neg_count"])}
        harness.write_svg_lines(series, args.out, "score distribution", "score", "count",
                                {"source": src})
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="adauc", description="Adversarial AUC optimization toolkit")
    parser.add_argument("--threads", default=None, help="parallel fan-out (env ADAUC_THREADS)")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", default=argparse.SUPPRESS,
                        help="parallel fan-out (env ADAUC_THREADS)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate or ingest a dataset")
    _add_schema_flags(p, GEN_SCHEMA)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--test-out")
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--test-images")
    p.add_argument("--test-labels")
    p.add_argument("--batches", help="comma-separated CIFAR-10 binary batch files")
    p.add_argument("--test-batch")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train a scorer (nt | at1 | at2)")
    _add_schema_flags(p, TRAIN_SCHEMA)
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--test-data")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-history")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="AUC grid of models x attacks")
    _add_schema_flags(p, EVAL_SCHEMA)
    p.add_argument("--config")
    p.add_argument("--model", action="append", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hist-dir")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", parents=[common], help="run the brute-force oracle suites")
    p.add_argument("--suite", default="all", help="prop1|lemma1|concavity|gradcheck|all")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", parents=[common], help="render a history or histogram CSV as SVG")
    p.add_argument("--history")
    p.add_argument("--histogram")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(f"adauc {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
