"""Command-line entry point: ``hpmpc fit | simulate | evaluate | report``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 no comparable
days.  The output directory comes from ``--out``, else ``HPMPC_OUTPUT_DIR``,
else ``./hpmpc-out``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from contextlib import contextmanager
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import io as hio
from .building import (
    DegenerateExcitationError,
    InsufficientDataError,
    ThermalParams,
    fit_thermal_params,
)
from .efficiency import (
    APPENDIX_B_FITS,
    CollinearBasisError,
    SignConstraintError,
    fit_efficiency,
    fits_from_records,
    fits_to_records,
    heat_from_power,
)
from .efficiency import InsufficientDataError as HpDataError
from .evaluation import (
    CoverageWarning,
    NoComparatorsError,
    SearchBounds,
    day_night_price_ratio,
    day_records,
    peak_block_analysis,
    peak_window_share,
    production_pattern,
    savings_report,
)
from .forecasting import InsufficientDaylightError, PvModel, WeatherSeries, fit_pv_model, predict_pv
from .heatctl import HeatCtlConfig
from .plant import HpPlantConfig, MpcConfig, run_closed_loop
from .sample_data import house_samples, hp_samples, pv_samples
from .scenarios import ComfortLevel, Scenario, ScenarioGapError, comfort_level, synthetic_scenario

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NO_COMPARATORS = 0, 2, 3, 4
CONFIG_KEYS = {"controller", "seed", "scenario", "comfort_level", "comfort", "models", "mpc",
               "plant", "output_dir"}
MPC_KEYS = {"horizon", "gap_tol", "node_limit", "min_down", "sensor_noise", "lead", "tracking",
            "max_close", "design_heat", "appliance_forecast"}
SYNTH_KEYS = {"days", "seed", "T_mean_range", "cloud_range", "I_peak", "spot_night", "spot_day",
              "forecast_error"}


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


@contextmanager
def stage(module: str):
    """Re-raise failures tagged with the module that produced them."""
    try:
        yield
    except (ConfigError, DataError, NoComparatorsError):
        raise
    except (hio.SchemaError, ScenarioGapError, InsufficientDataError, HpDataError,
            DegenerateExcitationError, CollinearBasisError, SignConstraintError,
            InsufficientDaylightError) as exc:
        raise DataError(f"[{module}] {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"[{module}] {exc}") from exc


def _out_dir(arg: str | None, config: dict | None = None) -> Path:
    path = Path(arg or os.environ.get("HPMPC_OUTPUT_DIR")
                or (config or {}).get("output_dir") or "hpmpc-out")
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

FIT_COLUMNS = {
    "house": ("T_r", "Q_hp", "T_a", "I_dir", "cloud"),
    "hp": ("P_hp", "Q_hp", "T_a"),
    "pv": ("I_dir", "cloud", "P_pv"),
}
BUNDLED = {"house": house_samples, "hp": hp_samples, "pv": pv_samples}


def _load_fit_data(kind: str, data: str | None, bundled: bool) -> dict:
    if bundled:
        return dict(BUNDLED[kind]())
    if data is None:
        raise ConfigError("give a data file or --bundled")
    table = hio.read_table(data, required=FIT_COLUMNS[kind])
    if "timestamp" in table:
        table["time"] = np.array([hio.from_iso(s) for s in table["timestamp"]])
    return dict(table)


def cmd_fit(args) -> int:
    out = _out_dir(args.out)
    with stage("fit"):
        series = _load_fit_data(args.kind, args.data, args.bundled)
    digest = hio.config_digest({"kind": args.kind, "data": args.data or "bundled",
                                "robust": args.robust, "seed": args.seed})
    if args.kind == "hp":
        with stage("hp-efficiency"):
            fit = fit_efficiency(series, robust=args.robust, seed=args.seed)
        (out / "hp_fit.csv").write_text(
            f"# hpmpc-table version={hio.SCHEMA_VERSION} kind=hp-fit digest={digest} seed={args.seed}\n"
            + fits_to_records([fit]))
        P, Q, T_a = series["P_hp"], series["Q_hp"], series["T_a"]
        on = P > 0
        pred = heat_from_power(P[on], T_a[on], fit)
        hio.write_table(out / "hp_residuals.csv",
                        {"P_hp": P[on], "T_a": T_a[on], "Q_hp": Q[on], "Q_fit": pred,
                         "residual": Q[on] - pred}, "fit-residuals", digest, args.seed)
        report = {"kind": "hp", "r2": fit.r2, "T_F_bar": fit.T_F_bar,
                  "rmse": float(np.sqrt(np.mean((Q[on] - pred) ** 2))), "samples": int(on.sum())}
    elif args.kind == "house":
        with stage("building-model"):
            fit = fit_thermal_params(series)
        p = fit.params
        hio.write_json(out / "thermal_fit.json", {
            "params": {f.name: getattr(p, f.name) for f in fields(p)},
            "digest": digest, "seed": args.seed})
        hio.write_table(out / "house_rmse.csv",
                        {"horizon_steps": list(fit.rmse), "rmse": list(fit.rmse.values())},
                        "fit-residuals", digest, args.seed)
        report = {"kind": "house", "rmse": {str(k): v for k, v in fit.rmse.items()},
                  "segments": fit.n_segments, "nfev": fit.nfev}
    else:
        with stage("forecasting"):
            t = series.get("time", np.arange(len(series["P_pv"])) * 3600.0)
            T_a = series.get("T_a", np.zeros(len(t)))
            w = WeatherSeries(t, T_a, series["I_dir"], series["cloud"])
            model = fit_pv_model(w, series["P_pv"])
        pred = predict_pv(model, w)
        hio.write_json(out / "pv_fit.json", {"coefficients": model.coefficients,
                                             "P_peak": model.P_peak, "digest": digest,
                                             "seed": args.seed})
        hio.write_table(out / "pv_residuals.csv",
                        {"P_pv": series["P_pv"], "P_fit": pred,
                         "residual": series["P_pv"] - pred}, "fit-residuals", digest, args.seed)
        resid = series["P_pv"] - pred
        ss = float(np.sum((series["P_pv"] - np.mean(series["P_pv"])) ** 2))
        report = {"kind": "pv", "r2": 1.0 - float(resid @ resid) / ss if ss > 0 else None,
                  "rmse": float(np.sqrt(np.mean(resid**2)))}
    report.update(digest=digest, seed=args.seed)
    hio.write_json(out / f"fit_report_{args.kind}.json", report)
    print(hio.canonical_json(report), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def load_config(path: str) -> dict:
    try:
        config = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"[cli-harness] cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"[cli-harness] config {path} is not valid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise ConfigError("[cli-harness] config must be a JSON object")
    config.setdefault("_base", str(Path(path).resolve().parent))
    return config


def resolve_config(config: dict) -> dict:
    """Fill defaults and validate keys; the result is what gets echoed and digested."""
    base = config.get("_base", ".")
    unknown = set(config) - CONFIG_KEYS - {"_base"}
    if unknown:
        raise ConfigError(f"[cli-harness] unknown config key(s): {', '.join(sorted(unknown))}")
    r = {
        "controller": config.get("controller", "mpc"),
        "seed": int(config.get("seed", 0)),
        "scenario": config.get("scenario", {"synthetic": {"days": 2}}),
        "mpc": dict(config.get("mpc", {})),
        "plant": dict(config.get("plant", {})),
        "models": dict(config.get("models", {})),
    }
    if r["controller"] not in ("mpc", "benchmark"):
        raise ConfigError("[cli-harness] controller must be 'mpc' or 'benchmark'")
    if "comfort" in config:
        c = config["comfort"]
        if not isinstance(c, dict) or len(c.get("T_ref", [])) != 24 or len(c.get("c_cmf", [])) != 24:
            raise ConfigError("[cli-harness] comfort needs 24-entry T_ref and c_cmf vectors")
        r["comfort"] = {"T_ref": [float(v) for v in c["T_ref"]],
                        "c_cmf": [float(v) for v in c["c_cmf"]]}
    else:
        r["comfort_level"] = int(config.get("comfort_level", 4))
        if r["comfort_level"] not in (1, 2, 3, 4):
            raise ConfigError("[cli-harness] comfort_level must be 1, 2, 3 or 4")
    bad = set(r["mpc"]) - MPC_KEYS
    if bad:
        raise ConfigError(f"[cli-harness] unknown mpc option(s): {', '.join(sorted(bad))}")
    plant_fields = {f.name for f in fields(HpPlantConfig)} - {"dhw", "defrost", "efficiency"}
    bad = set(r["plant"]) - plant_fields
    if bad:
        raise ConfigError(f"[cli-harness] unknown plant option(s): {', '.join(sorted(bad))}")
    sc = r["scenario"]
    if not isinstance(sc, dict) or len({"synthetic", "files"} & set(sc)) != 1:
        raise ConfigError("[cli-harness] scenario needs exactly one of 'synthetic' or 'files'")
    if "synthetic" in sc:
        bad = set(sc["synthetic"]) - SYNTH_KEYS
        if bad:
            raise ConfigError(f"[cli-harness] unknown synthetic option(s): {', '.join(sorted(bad))}")
    else:
        files = sc["files"]
        for key in ("weather", "prices"):
            if key not in files:
                raise ConfigError(f"[cli-harness] scenario files need a '{key}' entry")
        sc["files"] = {k: str((Path(base) / v).resolve()) for k, v in files.items()}
        if "days" not in sc:
            raise ConfigError("[cli-harness] file scenarios need 'days'")
    for key in ("thermal", "hp"):
        if key in r["models"]:
            path = (Path(base) / r["models"][key]).resolve()
            if not path.exists():
                raise ConfigError(f"[cli-harness] model file {path} does not exist")
            r["models"][key] = str(path)
    return r


def _comfort(r: dict) -> ComfortLevel:
    if "comfort" in r:
        return ComfortLevel("custom", r["comfort"]["T_ref"], r["comfort"]["c_cmf"])
    return comfort_level(r["comfort_level"])


def build_scenario(r: dict, horizon: int) -> Scenario:
    sc = r["scenario"]
    if "synthetic" in sc:
        opts = dict(sc["synthetic"])
        for key in ("T_mean_range", "cloud_range", "forecast_error"):
            if key in opts:
                opts[key] = tuple(opts[key])
        s = synthetic_scenario(horizon=max(horizon, 1), **opts)
        return replace(s, comfort=_comfort(r))
    files = sc["files"]
    w = hio.read_table(files["weather"], required=("timestamp", "T_a", "I_dir", "cloud"))
    p = hio.read_table(files["prices"], required=("timestamp", "spot"))
    t = np.array([hio.from_iso(s) for s in w["timestamp"]])
    weather = WeatherSeries(t, w["T_a"], w["I_dir"], w["cloud"])
    forecast = weather
    if "forecast" in files:
        f = hio.read_table(files["forecast"], required=("timestamp", "T_a", "I_dir", "cloud"))
        forecast = WeatherSeries(t, f["T_a"], f["I_dir"], f["cloud"])
    P_app = p["P_app"] if "P_app" in p else np.full(len(t), 250.0)
    extra = {}
    if "pv_history" in files:
        h = hio.read_table(files["pv_history"], required=("timestamp", "I_dir", "cloud", "P_pv"))
        th = np.array([hio.from_iso(s) for s in h["timestamp"]])
        extra["pv"] = fit_pv_model(WeatherSeries(th, np.zeros(th.size), h["I_dir"], h["cloud"]),
                                   h["P_pv"])
    return Scenario(weather, forecast, p["spot"], P_app, int(sc["days"]), _comfort(r),
                    co2=p.get("co2"), **extra)


def _mpc_config(r: dict) -> MpcConfig:
    opts = dict(r["mpc"])
    hc = {}
    if "lead" in opts:
        hc["lead"] = float(opts.pop("lead"))
    if "tracking" in opts:
        hc["tracking"] = opts.pop("tracking")
    cfg = MpcConfig(heatctl=HeatCtlConfig(**hc), **opts)
    models = r["models"]
    if "hp" in models:
        fits = fits_from_records(Path(models["hp"]).read_text())
        if not fits:
            raise DataError("[hp-efficiency] model file holds no fit")
        cfg = replace(cfg, fit=fits[-1])
    if "thermal" in models:
        params = json.loads(Path(models["thermal"]).read_text())["params"]
        cfg = replace(cfg, model=ThermalParams(**params))
    return cfg


def cmd_simulate(args) -> int:
    with stage("cli-harness"):
        config = load_config(args.config)
        r = resolve_config(config)
    out = _out_dir(args.out, config)
    digest = hio.config_digest(r)
    with stage("cli-harness"):
        mpc = _mpc_config(r)
        plant = HpPlantConfig(**r["plant"])
    with stage("forecasting"):
        scenario = build_scenario(r, mpc.horizon if r["controller"] == "mpc" else 0)
    with stage("plant-sim"):
        trace = run_closed_loop(scenario, r["controller"], r["seed"], plant=plant, mpc=mpc)
    write_trace(out, trace, digest, r)
    print(hio.canonical_json({"config": r, "digest": digest}), end="")
    return EXIT_OK


MINUTE_COLUMNS = ("T_r", "T_f", "T_a", "T_a_art", "T_lpf", "dQ", "P_HP", "P_DHW", "setpoint",
                  "flow", "mode", "events", "valves")


def write_trace(out: Path, trace, digest: str, resolved: dict) -> None:
    seed = resolved["seed"]
    minute = {"timestamp": [hio.to_iso(t) for t in trace.minute["time"]]}
    minute.update({k: trace.minute[k] for k in MINUTE_COLUMNS})
    hio.write_table(out / "trace_minute.csv", minute, "trace-minute", digest, seed)
    hourly = {"timestamp": [hio.to_iso(h * 3600.0) for h in trace.hourly["hour"]]}
    hourly.update({k: v for k, v in trace.hourly.items() if k != "hour"})
    hio.write_table(out / "trace_hourly.csv", hourly, "trace-hourly", digest, seed)
    hio.write_json(out / "run.json", {"config": resolved, "digest": digest, "seed": seed,
                                      "meta": trace.meta, "schema": hio.SCHEMA_VERSION})


# ---------------------------------------------------------------------------
# evaluate / report
# ---------------------------------------------------------------------------

HOURLY_REQUIRED = ("timestamp", "E_HP", "E_IM", "E_EX", "E_PV", "T_a", "buy")


def _read_days(trace_dir: str, tag: str):
    path = Path(trace_dir) / "trace_hourly.csv"
    table = hio.read_table(path, required=HOURLY_REQUIRED, kind="trace-hourly")
    n = len(table["timestamp"])
    if n == 0 or n % 24:
        raise hio.SchemaError(f"{path}: {n} hourly rows do not make whole days")
    return day_records(table, tag=tag), table


def cmd_evaluate(args) -> int:
    with stage("evaluation"):
        exp, exp_t = _read_days(args.exp, "exp")
        bench, bench_t = _read_days(args.bench, "bench")
        bounds = SearchBounds(args.dT, args.dT, args.dPV, args.dPV)
    with stage("evaluation"), warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        report = savings_report(exp, bench, bounds)
    out = _out_dir(args.out)
    digest = hio.config_digest({"exp": exp_t.meta.get("digest"), "bench": bench_t.meta.get("digest"),
                                "bounds": [args.dT, args.dPV]})
    paired = len(exp) == len(bench)
    seed = f"{exp_t.meta.get('seed', '-')}/{bench_t.meta.get('seed', '-')}"
    pb = peak_block_analysis(bench, exp if paired else None, report.reduction)
    summary = report.summary()
    summary.update({
        "excluded_dates": report.excluded,
        "bounds": {"dT": args.dT, "dPV": args.dPV},
        "peak_block": {"energy_kwh": pb.peak_energy, "reduction": pb.reduction,
                       "fraction_of_mpc": pb.fraction_of_mpc, "assumed_cop": pb.assumed_cop},
        "digest": digest,
        "seed": seed,
    })
    rows = report.days
    hio.write_table(out / "comparison_days.csv", {
        "date": [d.date for d in rows],
        "mean_T_a": [d.mean_T_a for d in rows],
        "total_PV": [d.total_PV for d in rows],
        "exp_cost": [d.exp_cost for d in rows],
        "n_comparators": [len(d.comparator_costs) for d in rows],
        "mean_virtual_cost": [d.mean_virtual_cost for d in rows],
        "saving": [d.saving for d in rows],
        "comparator_costs": [";".join(format(c, ".6f") for c in d.comparator_costs) for d in rows],
    }, "comparison-days", digest, seed)
    hio.write_table(out / "saving_rate.csv", {
        "date": [d.date for d in rows],
        "accumulated_saving_rate": report.accumulated_saving_rate(),
    }, "saving-rate", digest, seed)
    hio.write_json(out / "report.json", summary)
    print(hio.canonical_json(summary), end="")
    return EXIT_OK


def _ratio_or_nan(prices) -> float:
    try:
        return day_night_price_ratio(prices)
    except (ZeroDivisionError, ValueError):
        return float("nan")


def cmd_report(args) -> int:
    with stage("evaluation"):
        days, table = _read_days(args.trace, "day")
    out = _out_dir(args.out)
    digest = table.meta.get("digest", "-")
    seed = table.meta.get("seed", "-")
    hio.write_table(out / "daily_summary.csv", {
        "date": [d.date for d in days],
        "mean_T_a": [d.mean_T_a for d in days],
        "total_PV": [d.total_PV for d in days],
        "E_HP": [float(np.sum(d.E_HP)) for d in days],
        "E_G": [float(np.sum(d.E_G)) for d in days],
        "cost": [d.cost for d in days],
        "day_night_ratio": [_ratio_or_nan(d.c_buy) for d in days],
        "peak_share": [peak_window_share([d], use="E_HP") for d in days],
    }, "daily-summary", digest, seed)
    pattern = production_pattern(days, use="E_HP")
    hio.write_table(out / "production_pattern.csv",
                    {"hour": list(range(24)), "share": pattern}, "production-pattern", digest, seed)
    summary = {
        "days": len(days),
        "cost": float(sum(d.cost for d in days)),
        "E_HP": float(sum(np.sum(d.E_HP) for d in days)),
        "peak_share": peak_window_share(days, use="E_HP"),
        "mean_room_temperature": float(np.mean(table["T_r"])) if "T_r" in table else None,
        "digest": digest,
        "seed": seed,
    }
    hio.write_json(out / "report_summary.json", summary)
    print(hio.canonical_json(summary), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hpmpc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a house, heat-pump or PV model")
    f.add_argument("kind", choices=sorted(FIT_COLUMNS))
    f.add_argument("data", nargs="?", help="CSV with the measurement columns")
    f.add_argument("--bundled", action="store_true", help="use the bundled synthetic sample")
    f.add_argument("--robust", action="store_true", help="outlier-robust heat-pump fit")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run a closed-loop simulation from a JSON config")
    s.add_argument("config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="comparison-day savings of one trace against another")
    e.add_argument("exp", help="experiment trace directory")
    e.add_argument("bench", help="benchmark trace directory")
    e.add_argument("--dT", type=float, default=0.5, help="mean-temperature search bound (K)")
    e.add_argument("--dPV", type=float, default=2.0, help="daily PV search bound (kWh)")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="per-day summary and production pattern of one trace")
    r.add_argument("trace")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NoComparatorsError as exc:
        print(f"no comparators: [evaluation] {exc}", file=sys.stderr)
        return EXIT_NO_COMPARATORS


if __name__ == "__main__":
    sys.exit(main())
