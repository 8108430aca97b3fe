"""Command-line front end.

Subcommands walk the full pipeline: gen-train simulates a training set,
tune/train fit the quantile forest regressors, abc gives a rejection
baseline, diagnose runs the deletion-and-imputation conflict calibration,
window-scan sweeps a time series for locally inconsistent stretches, and
selftest runs the built-in invariant suites.

Exit codes: 0 success, 2 configuration problems, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, load_config
from .diagnostics import calibrate_conflict, window_scan
from .forest import QuantileForest
from .imputation import ENGINES
from .models import SummaryPartition, build_training_set, make_model
from .rejection import rejection_abc
from .selftest import run_all
from .setar import SetarFitError, select_threshold
from .tuning import default_grid, tune_forest

__all__ = ["main"]


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    if cfg.threads is not None:
        import numba

        numba.set_num_threads(int(cfg.threads))
    return cfg


def _load_cfg(args):
    return _apply_overrides(load_config(args.config), args)


def _build_model(cfg, observed=None):
    """Instantiate the configured model, resolving the ricker threshold.

    Resolution order: explicit model_options.setar_threshold, then a
    model_resolved.json left in the output directory by gen-train, then a
    fresh fit on the observed series when fit_threshold is set.
    """
    opts = dict(cfg.model_options)
    fit_thr = bool(opts.pop("fit_threshold", False))
    if cfg.prior is not None:
        opts["prior"] = cfg.prior
    needs_threshold = (
        cfg.model == "ricker"
        and opts.get("summaries", "setar") == "setar"
        and opts.get("setar_threshold") is None
    )
    if needs_threshold:
        opts.pop("setar_threshold", None)
        resolved = Path(cfg.out) / "model_resolved.json"
        if resolved.exists():
            opts["setar_threshold"] = json.loads(resolved.read_text())["setar_threshold"]
        elif fit_thr and observed is not None:
            try:
                opts["setar_threshold"] = float(select_threshold(observed))
            except SetarFitError as err:
                raise RuntimeError(f"threshold selection failed: {err}") from err
        else:
            raise ConfigError(
                "ricker setar summaries need model_options.setar_threshold, or "
                "fit_threshold: true together with --observed"
            )
    try:
        return make_model(cfg.model, opts)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"model_options: {err}") from err


def _targets(cfg, param_names):
    if not cfg.targets:
        return list(param_names)
    for t in cfg.targets:
        if t not in param_names:
            raise ConfigError(f"unknown target {t!r}; parameters are {list(param_names)}")
    return list(cfg.targets)


def _observed_summaries(model, observed):
    s_obs = model.summarize(observed)
    if s_obs is None:
        raise RuntimeError("observed data do not yield valid summaries")
    return np.asarray(s_obs, dtype=float)


def _forest_params(cfg, out, target):
    params = dict(cfg.forest)
    tuning_path = out / "tuning.json"
    if tuning_path.exists():
        tuned = json.loads(tuning_path.read_text())
        params.update(tuned.get(target, {}).get("best", {}))
    params.setdefault("random_state", cfg.seed)
    return params


def _fit_forest(params, X, y):
    try:
        forest = QuantileForest(**params)
    except TypeError as err:
        raise ConfigError(f"forest: {err}") from err
    try:
        return forest.fit(X, y)
    except ValueError as err:
        raise ConfigError(f"forest: {err}") from err


def _load_target_forest(out, target):
    path = out / f"forest_{target}.npz"
    if not path.exists():
        raise ConfigError(f"missing {path}; run the train subcommand first")
    return io.load_forest(path)


# --- subcommands -----------------------------------------------------------

def _cmd_gen_train(args):
    cfg = _load_cfg(args)
    if cfg.n_train is None:
        raise ConfigError("gen-train needs n_train in the config")
    observed = io.read_observed(args.observed) if args.observed else None
    model = _build_model(cfg, observed)
    ts = build_training_set(model, cfg.n_train, cfg.seed)
    out = Path(cfg.out)
    path = io.save_training_set(ts, out / "train.csv")
    if cfg.model == "ricker" and getattr(model, "setar_threshold", None) is not None:
        io.save_json({"setar_threshold": model.setar_threshold}, out / "model_resolved.json")
    print(f"wrote {path}: {ts.n} rows, {ts.n_discarded} invalid draws discarded")
    return 0


def _cmd_tune(args):
    cfg = _load_cfg(args)
    ts = io.load_training_set(args.train)
    tuning = cfg.tuning or {}
    grid = tuning.get("grid") or default_grid(len(ts.summary_names))
    folds = int(tuning.get("folds", 3))
    out = Path(cfg.out)
    report = {}
    for target in _targets(cfg, ts.param_names):
        best, results = tune_forest(
            ts.summaries, ts.param_column(target), grid, folds=folds, seed=cfg.seed
        )
        report[target] = {
            "best": best,
            "results": [{"params": p, "loss": loss} for p, loss in results],
        }
        print(f"{target}: best {best}")
    io.save_json(report, out / "tuning.json")
    print(f"wrote {out / 'tuning.json'}")
    return 0


def _cmd_train(args):
    cfg = _load_cfg(args)
    ts = io.load_training_set(args.train)
    out = Path(cfg.out)
    for target in _targets(cfg, ts.param_names):
        params = _forest_params(cfg, out, target)
        forest = _fit_forest(params, ts.summaries, ts.param_column(target))
        path = io.save_forest(forest, out / f"forest_{target}.npz")
        oob = forest.oob_error(ts.summaries)
        print(f"{target}: {forest.n_trees} trees, oob rmse {np.sqrt(oob):.4g} -> {path}")
    return 0


def _cmd_abc(args):
    cfg = _load_cfg(args)
    ts = io.load_training_set(args.train)
    observed = io.read_observed(args.observed)
    model = _build_model(cfg, observed)
    s_obs = _observed_summaries(model, observed)
    k = int(cfg.abc.get("k", 500))
    if not 1 <= k <= ts.n:
        raise ConfigError(f"abc k must lie in [1, {ts.n}], got {k}")
    subset_names = cfg.abc.get("subset")
    subset = None
    if subset_names:
        for name in subset_names:
            if name not in ts.summary_names:
                raise ConfigError(f"abc subset names unknown summary {name!r}")
        subset = [ts.summary_names.index(name) for name in subset_names]
    result = rejection_abc(
        ts.params, ts.summaries, s_obs, k, subset=subset, summary_names=ts.summary_names
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ",".join(ts.param_names + ("distance",))
    np.savetxt(
        out / "abc_accepted.csv",
        np.column_stack((result.params, result.distances)),
        delimiter=",",
        header=header,
        comments="",
        fmt="%.17g",
    )
    meta = {
        "k": k,
        "scale": [float(s) for s in result.scale],
        "used_components": [ts.summary_names[i] for i in result.used_components],
    }
    io.save_json(meta, out / "abc_meta.json")
    print(f"wrote {out / 'abc_accepted.csv'} ({k} draws)")
    return 0


def _cmd_diagnose(args):
    cfg = _load_cfg(args)
    if not cfg.partitions:
        raise ConfigError("diagnose needs at least one entry under partitions")
    ts = io.load_training_set(args.train)
    observed = io.read_observed(args.observed)
    model = _build_model(cfg, observed)
    s_obs = _observed_summaries(model, observed)
    engine = ENGINES[cfg.imputation_engine_name()]().fit(ts.summaries)
    grid_spec = cfg.grid_spec()
    out = Path(cfg.out)
    for target in _targets(cfg, ts.param_names):
        forest = _load_target_forest(out, target)
        support = model.prior.support(model.param_names.index(target))
        for i, part_cfg in enumerate(cfg.partitions):
            name = part_cfg.get("name", f"part{i}")
            try:
                partition = SummaryPartition.from_names(part_cfg["keep"], ts.summary_names)
            except ValueError as err:
                raise ConfigError(f"partition {name!r}: {err}") from err
            report = calibrate_conflict(
                forest,
                s_obs,
                partition,
                engine,
                n_imputations=cfg.n_imputations(),
                n_reference=cfg.n_reference(),
                seed=cfg.seed,
                grid_spec=grid_spec,
                support=support,
                target=target,
            )
            stem = out / f"report_{target}_{name}"
            io.save_conflict_report(report, stem)
            io.save_density(report.full_density, out / f"density_{target}_full.csv")
            io.save_density(
                report.subset_density, out / f"density_{target}_{name}_subset.csv"
            )
            refit_params = _forest_params(cfg, out, target)
            keep = list(partition.keep)
            # tuned mtry describes the full design, not the kept block
            if refit_params.get("mtry") is not None:
                refit_params["mtry"] = min(int(refit_params["mtry"]), len(keep))
            refit = _fit_forest(refit_params, ts.summaries[:, keep], ts.param_column(target))
            refit_density = refit.density(
                s_obs[keep], grid=report.full_density.grid, support=support
            )
            io.save_density(refit_density, out / f"density_{target}_{name}_refit.csv")
            print(
                f"{target} / {name}: R={report.r_obs:.4f} p~={report.p_tilde:.4f} "
                f"({report.n_imputations} imputations, {report.n_reference} references)"
            )
    return 0


def _cmd_window_scan(args):
    cfg = _load_cfg(args)
    series = io.read_observed(args.observed)
    model = _build_model(cfg, series)
    targets = _targets(cfg, model.param_names)
    out = Path(cfg.out)
    window = cfg.window or {}
    k = args.k if args.k is not None else int(window.get("k", 4))
    grid_spec = cfg.grid_spec()
    for target in targets:
        forest = _load_target_forest(out, target)
        if forest.n_features_in_ != series.size:
            raise ConfigError(
                f"forest for {target!r} expects {forest.n_features_in_} series values, "
                f"observed has {series.size}; train it on raw summaries"
            )
        support = model.prior.support(model.param_names.index(target))
        report = window_scan(
            forest,
            series,
            k=k,
            n_imputations=cfg.n_imputations(),
            n_reference=cfg.n_reference(),
            seed=cfg.seed,
            grid_spec=grid_spec,
            support=support,
            patch_pad=int(window.get("patch_pad", 8)),
            flag_level=float(window.get("flag_level", 0.05)),
        )
        stem = out / f"window_{target}"
        io.save_window_report(report, stem)
        flagged = report.times[report.flagged]
        print(
            f"{target}: {report.window_starts.size} windows of length {k}, "
            f"{flagged.size} flagged time points"
            + (f" at t={list(flagged)}" if flagged.size else "")
        )
    return 0


def _cmd_selftest(args):
    results = run_all(args.seed if args.seed is not None else 0)
    ok = True
    for r in results:
        ok = ok and r.passed
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    if not ok:
        raise RuntimeError("selftest found failing invariants")
    return 0


# --- parser ----------------------------------------------------------------

def _add_common(sp, observed=False, train=False, required_observed=False):
    sp.add_argument("--config", required=True, help="experiment JSON")
    sp.add_argument("--seed", type=int, default=None, help="override config seed")
    sp.add_argument("--out", default=None, help="override output directory")
    sp.add_argument("--threads", type=int, default=None, help="compiled query threads")
    if train:
        sp.add_argument("--train", required=True, help="training set CSV")
    if observed:
        sp.add_argument(
            "--observed", required=required_observed, help="observed data CSV"
        )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lficonflict",
        description="conflict diagnostics for simulation-trained posteriors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-train", help="simulate a training set")
    _add_common(sp, observed=True)
    sp.set_defaults(func=_cmd_gen_train)

    sp = sub.add_parser("tune", help="cross-validate forest hyperparameters")
    _add_common(sp, train=True)
    sp.set_defaults(func=_cmd_tune)

    sp = sub.add_parser("train", help="fit one forest per target parameter")
    _add_common(sp, train=True)
    sp.set_defaults(func=_cmd_train)

    sp = sub.add_parser("abc", help="rejection baseline posterior")
    _add_common(sp, observed=True, train=True, required_observed=True)
    sp.set_defaults(func=_cmd_abc)

    sp = sub.add_parser("diagnose", help="deletion-and-imputation conflict checks")
    _add_common(sp, observed=True, train=True, required_observed=True)
    sp.set_defaults(func=_cmd_diagnose)

    sp = sub.add_parser("window-scan", help="scan a series for conflicting windows")
    _add_common(sp, observed=True, required_observed=True)
    sp.add_argument("--k", type=int, default=None, help="window length")
    sp.set_defaults(func=_cmd_window_scan)

    sp = sub.add_parser("selftest", help="run the built-in invariant suites")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (FloatingPointError, np.linalg.LinAlgError, RuntimeError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
