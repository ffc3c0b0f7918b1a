"""Batch command-line surface: simulate, ingest, cv, fit, forecast, evaluate, granger."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace as dc_replace
from datetime import date

import numpy as np

from sparsevar import cv as cv_mod
from sparsevar import evaluation, forecasting, granger, ingestion, lasso, panel, synthetic


class ConfigError(ValueError):
    """Carries every configuration violation found, not only the first."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


def _setup_logging() -> None:
    level = os.environ.get("SPARSEVAR_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _parse_grid(text: str) -> lasso.LassoGrid:
    n, ratio = text.split(",")
    return lasso.LassoGrid(n_points=int(n), ratio=float(ratio))


def _parse_origins(text: str) -> tuple[date, date]:
    start, end = text.split(":")
    return date.fromisoformat(start), date.fromisoformat(end)


def _parse_named(pairs: list[str], flag: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError([f"{flag} expects NAME=PATH, got {item!r}"])
        name, path = item.split("=", 1)
        if name in out:
            raise ConfigError([f"duplicate {flag} name {name!r}"])
        out[name] = path
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsevar",
        description="Sparse VAR estimation, tuning, forecasting and causality networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its keys")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--lag", type=int, help="VAR lag order p")
        sp.add_argument(
            "--estimator", choices=["ols", "lasso", "fgls-lasso"], help="fit flavor"
        )
        sp.add_argument("--lambda", dest="lam", type=float, help="fixed penalty")
        sp.add_argument("--grid", help="penalty grid as N,RATIO")
        sp.add_argument("--tol", type=float, help="solver tolerance")
        sp.add_argument("--max-sweeps", type=int, help="solver sweep cap")
        sp.add_argument("--horizons", type=int, help="max forecast horizon H")
        sp.add_argument("--origins", help="forecast origins as START:END (ISO dates)")
        sp.add_argument("--threshold", type=float, help="edge p-value threshold")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--threads", type=int, help="worker cap; output is identical for any value")
        sp.add_argument("--n-splits", type=int, help="walk-forward folds")
        sp.add_argument("--test-size", type=int, help="validation points per fold")
        sp.add_argument("--min-train", type=int, help="smallest training window")
        return sp

    sp = common(sub.add_parser("simulate", help="write a synthetic panel plus ground truth"))
    sp.add_argument("--k", type=int, help="number of series")
    sp.add_argument("--t", type=int, help="sample length")
    sp.add_argument("--density", type=float, help="coefficient density")
    sp.add_argument("--magnitude", type=float, help="coefficient magnitude")
    sp.add_argument("--error", choices=["iid", "ar1"], help="error process")
    sp.add_argument("--rho", type=float, help="AR(1) error parameter")
    sp.add_argument("--sd", type=float, help="innovation standard deviation")

    sp = common(sub.add_parser("ingest", help="build a unified daily panel"))
    sp.add_argument("--prices", help="price CSV; log returns are computed")
    sp.add_argument("--volume", help="volume CSV appended as-is")
    sp.add_argument("--sentiment", action="append", default=[], metavar="NAME=PATH",
                    help="scored-item CSV aggregated to a daily series")
    sp.add_argument("--trends", action="append", default=[], metavar="NAME=DIR",
                    help="directory of monthly chunk CSVs plus monthly.csv")
    sp.add_argument("--alpha", type=float, help="sentiment normalization constant")
    sp.add_argument("--fill", choices=["zero", "carry"], help="empty-day policy")

    sp = common(sub.add_parser("cv", help="select the penalty by walk-forward loss"))
    sp.add_argument("--panel", help="input panel CSV")

    sp = common(sub.add_parser("fit", help="fit a model and write it as JSON"))
    sp.add_argument("--panel", help="input panel CSV")

    sp = common(sub.add_parser("forecast", help="run the expanding-origin exercise"))
    sp.add_argument("--panel", help="input panel CSV")
    sp.add_argument("--refit-policy", choices=["first", "per_origin"],
                    help="when to re-select the penalty")

    sp = common(sub.add_parser("evaluate", help="score forecast files"))
    sp.add_argument("--forecast", action="append", default=[], metavar="NAME=PATH",
                    help="forecast CSV to evaluate (repeatable)")
    sp.add_argument("--benchmark", help="model name used as the accuracy-test baseline")
    sp.add_argument("--mda-form", choices=["consecutive", "origin"],
                    help="directional accuracy form")

    sp = common(sub.add_parser("granger", help="all-pairs causality network"))
    sp.add_argument("--panel", help="input panel CSV")
    sp.add_argument("--robust", action="store_true", default=None,
                    help="heteroskedasticity-robust score test")

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """Flat config dict: file values first, then any flag explicitly set."""
    merged: dict = {}
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError([f"config file not found: {args.config}"])
        with open(args.config, encoding="utf-8") as fh:
            try:
                merged.update(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError([f"config file is not valid JSON: {exc}"]) from None
    for key, value in vars(args).items():
        if key in ("config", "command"):
            continue
        if value is not None and value != []:
            merged[key] = value
    return merged


def _require(cfg: dict, keys: list[str], errors: list[str]) -> None:
    for key in keys:
        if cfg.get(key) is None:
            errors.append(f"missing required option --{key.replace('_', '-')}")


def _validate_paths(cfg: dict, keys: list[str], errors: list[str]) -> None:
    for key in keys:
        path = cfg.get(key)
        if path is not None and not os.path.exists(path):
            errors.append(f"--{key.replace('_', '-')}: path does not exist: {path}")


def _lasso_config(cfg: dict, errors: list[str]) -> lasso.LassoConfig:
    kwargs = {}
    if cfg.get("lam") is not None:
        kwargs["lam"] = float(cfg["lam"])
    if cfg.get("tol") is not None:
        kwargs["tol"] = float(cfg["tol"])
    if cfg.get("max_sweeps") is not None:
        kwargs["max_sweeps"] = int(cfg["max_sweeps"])
    if cfg.get("grid") is not None:
        try:
            kwargs["grid"] = (
                cfg["grid"] if isinstance(cfg["grid"], lasso.LassoGrid) else _parse_grid(cfg["grid"])
            )
        except (ValueError, lasso.LassoError) as exc:
            errors.append(f"--grid: {exc}")
    try:
        return lasso.LassoConfig(**kwargs)
    except lasso.LassoError as exc:
        errors.append(str(exc))
        return lasso.LassoConfig()


def _plan(cfg: dict, T: int, p: int, errors: list[str]) -> cv_mod.WalkForwardPlan:
    n_splits = int(cfg.get("n_splits", 3))
    test_size = cfg.get("test_size")
    test_size = int(test_size) if test_size is not None else max(1, T // 10)
    min_train = cfg.get("min_train")
    min_train = int(min_train) if min_train is not None else T - n_splits * test_size
    try:
        plan = cv_mod.WalkForwardPlan(n_splits=n_splits, test_size=test_size, min_train=min_train)
    except cv_mod.CvError as exc:
        errors.append(str(exc))
        return cv_mod.WalkForwardPlan()
    if min_train <= p:
        errors.append(f"walk-forward min_train {min_train} must exceed lag order {p}")
    return plan


def _outdir(cfg: dict, errors: list[str]) -> str:
    out = cfg.get("out")
    if out is None:
        errors.append("missing required option --out")
        return "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(cfg: dict) -> None:
    errors: list[str] = []
    out = _outdir(cfg, errors)
    k = int(cfg.get("k", 5))
    t = int(cfg.get("t", 500))
    p = int(cfg.get("lag", 2))
    density = float(cfg.get("density", 0.2))
    magnitude = float(cfg.get("magnitude", 0.25))
    error = cfg.get("error", "iid")
    rho = float(cfg.get("rho", 0.6 if error == "ar1" else 0.0))
    sd = float(cfg.get("sd", 1.0))
    seed = int(cfg.get("seed", 0))
    if errors:
        raise ConfigError(errors)
    spec = synthetic.SyntheticSpec(
        k=k,
        p=p,
        t=t,
        recipe=synthetic.SparseRecipe(density=density, magnitude=magnitude, seed=seed),
        error=error,
        rho=rho,
        innovation_sd=sd,
        seed=seed,
    )
    pnl, truth = synthetic.simulate(spec)
    panel.write_panel_csv(pnl, os.path.join(out, "panel.csv"))
    with open(os.path.join(out, "truth.json"), "w", encoding="utf-8") as fh:
        fh.write(truth.to_json())
        fh.write("\n")


def cmd_ingest(cfg: dict) -> None:
    errors: list[str] = []
    out = _outdir(cfg, errors)
    _require(cfg, ["prices"], errors)
    _validate_paths(cfg, ["prices", "volume"], errors)
    sentiment = _parse_named(cfg.get("sentiment", []), "--sentiment")
    trends = _parse_named(cfg.get("trends", []), "--trends")
    for name, path in {**sentiment, **trends}.items():
        if not os.path.exists(path):
            errors.append(f"input for {name!r} does not exist: {path}")
    if errors:
        raise ConfigError(errors)
    scfg = ingestion.SentimentConfig(alpha=float(cfg.get("alpha", 15.0)))
    fill = cfg.get("fill", "zero")

    prices = panel.read_panel_csv(cfg["prices"])
    returns = panel.log_returns(prices)
    window = (returns.dates[0], returns.dates[-1])
    blocks = [returns]
    if cfg.get("volume"):
        blocks.append(panel.read_panel_csv(cfg["volume"]))
    for name, path in sentiment.items():
        items = ingestion.load_scored_items_csv(path)
        blocks.append(ingestion.daily_aggregate(items, scfg, window, fill=fill, name=name))
    for name, directory in trends.items():
        chunks = ingestion.load_trend_chunks(directory)
        monthly = ingestion.load_monthly_index_csv(os.path.join(directory, "monthly.csv"))
        blocks.append(ingestion.rescale_gtrends(chunks, monthly, name=name))
    unified = _inner_join(blocks)
    panel.write_panel_csv(unified, os.path.join(out, "panel.csv"))


def _inner_join(blocks: list[panel.TimePanel]) -> panel.TimePanel:
    """Align panels on their common contiguous date range."""
    start = max(b.dates[0] for b in blocks)
    end = min(b.dates[-1] for b in blocks)
    if end < start:
        raise ConfigError(["input date ranges do not overlap"])
    names: list[str] = []
    cols = []
    dates = None
    for b in blocks:
        i0, i1 = b.position(start), b.position(end)
        sliced = b.slice_rows(i0, i1 + 1)
        if dates is None:
            dates = sliced.dates
        elif sliced.dates != dates:
            raise ConfigError(["inputs disagree on the daily calendar"])
        names.extend(sliced.names)
        cols.append(sliced.values)
    return panel.TimePanel(dates, tuple(names), np.hstack(cols))


def cmd_cv(cfg: dict) -> None:
    errors: list[str] = []
    out = _outdir(cfg, errors)
    _require(cfg, ["panel", "lag"], errors)
    _validate_paths(cfg, ["panel"], errors)
    lcfg = _lasso_config(cfg, errors)
    if errors:
        raise ConfigError(errors)
    pnl = panel.read_panel_csv(cfg["panel"])
    p = int(cfg["lag"])
    plan_errors: list[str] = []
    plan = _plan(cfg, pnl.n_obs, p, plan_errors)
    if plan_errors:
        raise ConfigError(plan_errors)
    estimator = cfg.get("estimator", "lasso")
    cv_estimator = "fgls" if estimator == "fgls-lasso" else "lasso"
    _, report = cv_mod.select_lambda(pnl, p, lcfg, plan, estimator=cv_estimator)
    cv_mod.write_cv_report_csv(report, os.path.join(out, "cv_report.csv"))


def cmd_fit(cfg: dict) -> None:
    errors: list[str] = []
    out = _outdir(cfg, errors)
    _require(cfg, ["panel", "lag", "estimator"], errors)
    _validate_paths(cfg, ["panel"], errors)
    lcfg = _lasso_config(cfg, errors)
    if errors:
        raise ConfigError(errors)
    pnl = panel.read_panel_csv(cfg["panel"])
    p = int(cfg["lag"])
    estimator = cfg["estimator"]
    if estimator != "ols" and cfg.get("lam") is None:
        plan_errors: list[str] = []
        plan = _plan(cfg, pnl.n_obs, p, plan_errors)
        if plan_errors:
            raise ConfigError(plan_errors)
        cv_estimator = "fgls" if estimator == "fgls-lasso" else "lasso"
        lam, _ = cv_mod.select_lambda(pnl, p, lcfg, plan, estimator=cv_estimator)
        lcfg = dc_replace(lcfg, lam=lam)
    model = lasso.fit_panel_var(pnl, p, lcfg, estimator)
    with open(os.path.join(out, "model.json"), "w", encoding="utf-8") as fh:
        fh.write(model.to_json())
        fh.write("\n")


def cmd_forecast(cfg: dict) -> None:
    errors: list[str] = []
    out = _outdir(cfg, errors)
    _require(cfg, ["panel", "lag", "estimator", "origins"], errors)
    _validate_paths(cfg, ["panel"], errors)
    lcfg = _lasso_config(cfg, errors)
    origins = None
    if cfg.get("origins") is not None:
        try:
            origins = _parse_origins(cfg["origins"])
        except ValueError:
            errors.append(f"--origins: expected START:END ISO dates, got {cfg['origins']!r}")
    if errors:
        raise ConfigError(errors)
    pnl = panel.read_panel_csv(cfg["panel"])
    p = int(cfg["lag"])
    estimator = cfg["estimator"]
    H = int(cfg.get("horizons", 4))
    plan = None
    if estimator != "ols" and cfg.get("lam") is None:
        start_pos = pnl.position(origins[0])
        plan_errors: list[str] = []
        plan = _plan(cfg, start_pos + 1, p, plan_errors)
        if plan_errors:
            raise ConfigError(plan_errors)
    fs = forecasting.recursive_exercise(
        pnl,
        p,
        lcfg,
        estimator,
        origins[0],
        origins[1],
        H=H,
        plan=plan,
        refit_policy=cfg.get("refit_policy", "first"),
        threads=int(cfg.get("threads", 1)),
    )
    forecasting.write_forecast_csv(fs, os.path.join(out, "forecasts.csv"))


def cmd_evaluate(cfg: dict) -> None:
    errors: list[str] = []
    out = _outdir(cfg, errors)
    forecasts = _parse_named(cfg.get("forecast", []), "--forecast")
    if not forecasts:
        errors.append("need at least one --forecast NAME=PATH")
    for name, path in forecasts.items():
        if not os.path.exists(path):
            errors.append(f"forecast file for {name!r} does not exist: {path}")
    benchmark = cfg.get("benchmark")
    if benchmark is not None and benchmark not in forecasts:
        errors.append(f"--benchmark {benchmark!r} is not among the forecast names")
    if errors:
        raise ConfigError(errors)
    models = {name: forecasting.read_forecast_csv(path) for name, path in forecasts.items()}
    report = evaluation.evaluate_forecasts(
        models, benchmark=benchmark, mda_form=cfg.get("mda_form", "consecutive")
    )
    evaluation.write_evaluation_csv(report, os.path.join(out, "evaluation.csv"))


def cmd_granger(cfg: dict) -> None:
    errors: list[str] = []
    out = _outdir(cfg, errors)
    _require(cfg, ["panel", "lag"], errors)
    _validate_paths(cfg, ["panel"], errors)
    lcfg = _lasso_config(cfg, errors)
    threshold = float(cfg.get("threshold", 0.01))
    if not 0.0 <= threshold <= 1.0:
        errors.append(f"--threshold must be in [0, 1], got {threshold}")
    if errors:
        raise ConfigError(errors)
    pnl = panel.read_panel_csv(cfg["panel"])
    net = granger.granger_network(
        pnl,
        p=int(cfg["lag"]),
        threshold=threshold,
        cfg=lcfg,
        robust=bool(cfg.get("robust", False)),
        threads=int(cfg.get("threads", 1)),
    )
    granger.write_matrix_csv(net, os.path.join(out, "granger_matrix.csv"))
    granger.write_edges_csv(net, os.path.join(out, "granger_edges.csv"))
    granger.write_network_dot(net, os.path.join(out, "granger_network.dot"))


COMMANDS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "cv": cmd_cv,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "granger": cmd_granger,
}


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "messages": exc.messages}), file=sys.stderr)
        return 2
    except (
        panel.PanelError,
        ingestion.IngestionError,
        lasso.LassoError,
        cv_mod.CvError,
        forecasting.ForecastError,
        evaluation.EvaluationError,
        granger.GrangerError,
        synthetic.SyntheticError,
        OSError,
    ) as exc:
        print(json.dumps({"error": "runtime", "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
