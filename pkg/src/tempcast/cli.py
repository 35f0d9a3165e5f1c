"""Command-line interface.

Subcommands: synth, ingest, climatology, train, forecast, rollout,
baseline, score, ensemble, plot, model-summary. Every run writes a
manifest.json (inputs, configuration hash, library versions) next to its
outputs. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ConfigurationError, DataError, NumericError, TempcastError
from .grids import GridSpec, MonthlyField
from .ingest import (
    CONSTANT_CHANNELS,
    ConstantChannels,
    DatasetManifest,
    SplitSpec,
    write_dataset,
)
from .stamps import MonthStamp, Season, SeasonStamp, Stamp, YearStamp
from . import baselines as bl
from . import pipeline, plots, storage
from .net import (
    DESK_CHANNELS,
    Checkpoint,
    ModelConfig,
    load_checkpoint,
    model_summary,
    save_checkpoint,
)
from .train import TrainConfig, make_checkpoint
from .verify import ScoreReport, standard_regions, score_run

log = logging.getLogger("tempcast")

BASELINE_ALIASES = {
    "pm": bl.PERSIST_PRIOR_STEP,
    "ps": bl.PERSIST_PRIOR_STEP,
    "pysm": bl.PERSIST_PRIOR_YEAR,
    "pyss": bl.PERSIST_PRIOR_YEAR,
    "climatology": bl.CLIMATOLOGY,
    "mlr": bl.MLR,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError as exc:
        raise ConfigurationError(f"grid must look like 32x64, got {text!r}") from exc


def _parse_stamp(text: str, mode: str) -> Stamp:
    if mode == "monthly":
        return MonthStamp.parse(text)
    if mode == "seasonal":
        year, _, name = text.partition("-")
        return SeasonStamp(int(year), Season[name])
    return YearStamp(int(text))


def _parse_period(text: str, mode: str) -> tuple[Stamp, Stamp]:
    lo, _, hi = text.partition(":")
    return _parse_stamp(lo, mode), _parse_stamp(hi, mode)


def _channels(text: str) -> tuple[int, ...]:
    return tuple(int(c) for c in text.split(","))


def write_run_manifest(out_dir: Path, command: str, args: dict, cfg: RunConfig, outputs: list[str]) -> None:
    import torch

    manifest = {
        "command": command,
        "arguments": {k: v for k, v in sorted(args.items()) if k not in ("func",)},
        "config_hash": cfg.config_hash,
        "config": cfg.raw,
        "versions": {
            "tempcast": __version__,
            "numpy": np.__version__,
            "torch": torch.__version__,
        },
        "outputs": sorted(outputs),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, default=str)
    )


def _prepared(args, cfg: RunConfig) -> pipeline.PreparedData:
    return pipeline.prepare_dataset(
        args.data,
        anomaly_base=cfg.anomaly_base,
        percentile_base=cfg.percentile_base,
        lsm_threshold=cfg.lsm_threshold,
    )


# --- subcommand handlers ------------------------------------------------------


def cmd_synth(args, cfg: RunConfig) -> int:
    from .synthetic import SyntheticConfig, generate_synthetic_corpus

    n_lat, n_lon = _parse_grid(args.grid)
    grid = GridSpec.cell_centered(n_lat, n_lon)
    sc = SyntheticConfig(
        grid=grid,
        years=args.years,
        start_year=args.start_year,
        seed=args.seed,
        noise_amplitude=args.noise,
        ar_coefficient=args.ar,
        trend_per_decade=args.trend,
    )
    corpus = generate_synthetic_corpus(sc)
    if args.split_train:
        split = SplitSpec(
            train=_parse_period(args.split_train, "monthly"),  # type: ignore[arg-type]
            val=_parse_period(args.split_val, "monthly"),  # type: ignore[arg-type]
            test=_parse_period(args.split_test, "monthly"),  # type: ignore[arg-type]
        )
    else:
        if args.years < 9:
            raise DataError("need at least 9 synthetic years for the default split")
        end = sc.end
        split = SplitSpec(
            train=(sc.start, MonthStamp(end.year - 7, 12)),
            val=(MonthStamp(end.year - 6, 1), MonthStamp(end.year - 5, 12)),
            test=(MonthStamp(end.year - 4, 1), end),
        )
    out = Path(args.out)
    write_dataset(
        out,
        corpus.manifest(split),
        {"t2m": corpus.t2m, "sst": corpus.sst},
        corpus.constants,
    )
    write_run_manifest(out, "synth", vars(args), cfg, ["manifest.json", "t2m.tcg", "sst.tcg"])
    log.info("wrote synthetic dataset (%d years on %dx%d) to %s", args.years, n_lat, n_lon, out)
    return 0


def cmd_ingest(args, cfg: RunConfig) -> int:
    out = Path(args.out)
    variables = args.vars.split(",")
    monthly_vars = [v for v in variables if v in ("t2m", "sst")]
    fields = storage.read_netcdf_dataset(args.input, monthly_vars)
    grid = fields[monthly_vars[0]][0].grid
    if grid.n_lat % 2:
        target = grid.drop_pole_row(cfg.pole_row)
        fields = {
            var: [
                MonthlyField(
                    variable=f.variable,
                    stamp=f.stamp,
                    grid=target,
                    values=f.values[:-1] if cfg.pole_row == "south" else f.values[1:],
                    missing=None
                    if f.missing is None
                    else (f.missing[:-1] if cfg.pole_row == "south" else f.missing[1:]),
                )
                for f in series
            ]
            for var, series in fields.items()
        }
        grid = target
    stamps = [f.stamp for f in fields[monthly_vars[0]]]
    const_vars = [v for v in variables if v not in ("t2m", "sst", "tisr")]
    statics = {}
    if const_vars:
        raw = storage.read_netcdf_dataset(args.input, const_vars)
        for var, series in raw.items():
            f = series[0]
            values = f.values[:-1] if (f.grid.n_lat % 2 and cfg.pole_row == "south") else (
                f.values[1:] if f.grid.n_lat % 2 else f.values
            )
            statics[var] = MonthlyField(variable=var, stamp=None, grid=grid, values=values)
    constants = None
    if "tisr" in variables and len(statics) == len(CONSTANT_CHANNELS):
        tisr_series = storage.read_netcdf_dataset(args.input, ["tisr"])["tisr"]
        cycle = {}
        for month in range(1, 13):
            members = [f.values for f in tisr_series if f.stamp.month == month]
            if not members:
                raise DataError(f"insolation series lacks month {month}")
            values = np.mean(members, axis=0)
            if grid.n_lat != values.shape[0]:
                values = values[:-1] if cfg.pole_row == "south" else values[1:]
            cycle[month] = MonthlyField(variable="tisr", stamp=None, grid=grid, values=values)
        constants = ConstantChannels(tisr_cycle=cycle, **statics)
    manifest = DatasetManifest(
        source="reanalysis_file",
        grid=grid,
        time_range=(min(stamps), max(stamps)),  # type: ignore[type-var]
        variables=tuple(monthly_vars),
        split=cfg.split,
    )
    write_dataset(out, manifest, {v: fields[v] for v in monthly_vars}, constants)
    write_run_manifest(out, "ingest", vars(args), cfg, [f"{v}.tcg" for v in monthly_vars])
    log.info("ingested %s -> %s", args.input, out)
    return 0


def cmd_climatology(args, cfg: RunConfig) -> int:
    prepared = _prepared(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = prepared.manifest.grid
    mean_fields = [
        MonthlyField(
            variable="blended_t", stamp=None, grid=grid,
            values=prepared.anomaly_clim.per_month_mean[m - 1],
        )
        for m in range(1, 13)
    ]
    storage.write_series(out / "clim_mean.tcg", mean_fields, cycle_months=range(1, 13))
    outputs = ["clim_mean.tcg"]
    if prepared.percentile_clim is not None:
        for name, table in (
            ("clim_p33", prepared.percentile_clim.per_month_p33),
            ("clim_p66", prepared.percentile_clim.per_month_p66),
        ):
            fields = [
                MonthlyField(variable="blended_t", stamp=None, grid=grid, values=table[m - 1])
                for m in range(1, 13)
            ]
            storage.write_series(out / f"{name}.tcg", fields, cycle_months=range(1, 13))
            outputs.append(f"{name}.tcg")
    (out / "climatology.json").write_text(
        json.dumps(
            {
                "anomaly_base": list(cfg.anomaly_base),
                "percentile_base": list(cfg.percentile_base),
                "sst_fallback_count": prepared.fallback_count,
            },
            indent=2,
        )
    )
    write_run_manifest(out, "climatology", vars(args), cfg, outputs)
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    from .net import build_model
    from .train import train

    prepared = _prepared(args, cfg)
    window = args.window
    model_cfg = ModelConfig(
        in_channels=2 * window + 5,
        out_channels=window,
        depth=args.depth,
        base_channels=_channels(args.channels),
    )
    model_cfg.validate_grid(*prepared.manifest.grid.shape)
    train_cfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        weight_decay=args.weight_decay,
        cosine_period=args.cosine_period,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
    )
    train_set = pipeline.build_samples(
        prepared, args.mode, "train", window, tisr_alignment=cfg.tisr_alignment
    )
    val_set = pipeline.build_samples(
        prepared, args.mode, "val", window, tisr_alignment=cfg.tisr_alignment
    )
    model = build_model(model_cfg, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .grids import latitude_weights

    result = train(
        model,
        train_set,
        val_set,
        latitude_weights(prepared.manifest.grid),
        train_cfg,
        log_path=out / "history.jsonl",
        allowed_stamps=pipeline.allowed_target_labels(prepared, args.mode, "train"),
    )
    ckpt = make_checkpoint(
        model,
        model_cfg,
        train_cfg,
        prepared.norm_stats,
        result,
        extra={"mode": args.mode, "window": window, "dataset": str(args.data)},
    )
    save_checkpoint(out / "checkpoint.pt", ckpt)
    plots.plot_loss_history(result.history, out / "loss.png")
    write_run_manifest(out, "train", vars(args), cfg, ["checkpoint.pt", "history.jsonl", "loss.png"])
    log.info(
        "trained %s window=%d: best epoch %d val_loss %.6f (%s)",
        args.mode, window, result.best.epoch, result.best.val_loss,
        "early stop" if result.stopped_early else "max epochs",
    )
    return 0


def _write_forecast_outputs(
    out: Path,
    results,
    mode: str,
    checkpoint: Checkpoint | None,
    prepared: pipeline.PreparedData | None,
    label: str,
) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    anomaly_fields = [r.anomaly for r in results]
    storage.write_series(out / "anomaly.tcg", anomaly_fields)
    outputs = ["anomaly.tcg"]
    if all(r.absolute is not None for r in results):
        storage.write_series(out / "absolute.tcg", [r.absolute for r in results])
        outputs.append("absolute.tcg")
    summary = {
        "label": label,
        "mode": mode,
        "stamps": [str(r.stamp) for r in results],
        "checkpoint": None if checkpoint is None else checkpoint.meta,
        "stats_hash": None if checkpoint is None else checkpoint.stats_hash,
        "paths": {"anomaly": "anomaly.tcg"},
    }
    (out / "forecast.json").write_text(json.dumps(summary, indent=2, default=str))
    outputs.append("forecast.json")
    return outputs


def cmd_forecast(args, cfg: RunConfig) -> int:
    prepared = _prepared(args, cfg)
    ckpt = load_checkpoint(args.checkpoint)
    mode = ckpt.meta.get("mode", "monthly")
    period = _parse_period(args.period, mode)
    series = pipeline.model_forecasts(
        prepared, ckpt, mode, period, tisr_alignment=cfg.tisr_alignment
    )
    from .forecast import ForecastResult, attach_absolute

    results = []
    for stamp in sorted(series, key=lambda s: s.index):
        r = ForecastResult(stamp=stamp, anomaly=series[stamp])
        if mode == "monthly":
            r = attach_absolute(r, prepared.anomaly_clim)
        results.append(r)
    out = Path(args.out)
    outputs = _write_forecast_outputs(out, results, mode, ckpt, prepared, args.label)
    write_run_manifest(out, "forecast", vars(args), cfg, outputs)
    return 0


def cmd_rollout(args, cfg: RunConfig) -> int:
    from .forecast import ForecastRequest, rollout

    prepared = _prepared(args, cfg)
    ckpt = load_checkpoint(args.checkpoint)
    window = ckpt.config.window
    start = MonthStamp.parse(args.start)
    observed = []
    for k in range(window, 0, -1):
        stamp = start.shift(-k)
        f = prepared.anomalies.get(stamp)
        if f is None:
            raise DataError(f"rollout needs observed anomaly at {stamp}")
        observed.append(f)
    request = ForecastRequest(
        mode="monthly",
        window=window,
        start=start,
        horizon=args.horizon,
        checkpoint=ckpt,
        climatology=prepared.anomaly_clim,
    )
    results = rollout(request, observed, prepared.constants)
    out = Path(args.out)
    outputs = _write_forecast_outputs(out, results, "monthly", ckpt, prepared, args.label)
    write_run_manifest(out, "rollout", vars(args), cfg, outputs)
    return 0


def cmd_baseline(args, cfg: RunConfig) -> int:
    prepared = _prepared(args, cfg)
    kind = BASELINE_ALIASES.get(args.kind, args.kind)
    if kind not in bl.BASELINE_KINDS:
        raise ConfigurationError(f"unknown baseline kind {args.kind!r}")
    period = _parse_period(args.period, args.mode)
    series = pipeline.baseline_forecasts(prepared, kind, args.mode, period)
    from .forecast import ForecastResult

    results = [
        ForecastResult(stamp=s, anomaly=series[s])
        for s in sorted(series, key=lambda s: s.index)
    ]
    out = Path(args.out)
    outputs = _write_forecast_outputs(out, results, args.mode, None, prepared, args.kind)
    write_run_manifest(out, "baseline", vars(args), cfg, outputs)
    return 0


def _load_forecast_series(path: Path, mode: str) -> tuple[str, dict[Stamp, MonthlyField]]:
    if path.is_dir():
        label = path.name
        summary = path / "forecast.json"
        if summary.exists():
            label = json.loads(summary.read_text()).get("label", label)
        fields, _ = storage.read_series(path / "anomaly.tcg")
    else:
        label = path.stem
        fields, _ = storage.read_series(path)
    return label, {f.stamp: f for f in fields}


def cmd_score(args, cfg: RunConfig) -> int:
    prepared = _prepared(args, cfg)
    region_names = args.regions.split(",")
    regions = standard_regions(
        prepared.manifest.grid,
        prepared.constants.lsm,
        cfg.lsm_threshold,
        names=region_names,
    )
    reports: dict[str, ScoreReport] = {}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    mode = args.mode
    for item in args.forecast:
        path = Path(item)
        label, series = _load_forecast_series(path, mode)
        truth = pipeline.truth_series(
            prepared, mode, (min(series, key=lambda s: s.index), max(series, key=lambda s: s.index))
        )
        report = score_run(
            series,
            truth,
            regions,
            category_clim=prepared.percentile_clim,
            anomaly_clim=prepared.anomaly_clim,
            metadata={"label": label, "mode": mode},
        )
        reports[label] = report
        (out / f"report_{label}.tsv").write_text(report.to_delimited())
        (out / f"report_{label}.json").write_text(json.dumps(report.to_json(), indent=2))
        outputs += [f"report_{label}.tsv", f"report_{label}.json"]
    if not args.no_figures:
        for metric in ("rmse", "acc"):
            target = out / f"{metric}_series.png"
            plots.plot_metric_series(reports, metric, region_names[0], target)
            outputs.append(target.name)
        if any(
            row.hss is not None for rep in reports.values() for row in rep.rows
        ):
            plots.plot_hss_heatmap(reports, region_names[0], out / "hss_heatmap.png")
            outputs.append("hss_heatmap.png")
    summary_lines = ["method\tregion\trmse\tacc\thss"]
    for label, report in reports.items():
        for agg in report.aggregates:
            hss_txt = "" if agg.hss is None else f"{agg.hss:.6g}"
            summary_lines.append(
                f"{label}\t{agg.region}\t{agg.rmse:.6g}\t{agg.acc:.6g}\t{hss_txt}"
            )
    (out / "summary.tsv").write_text("\n".join(summary_lines) + "\n")
    outputs.append("summary.tsv")
    write_run_manifest(out, "score", vars(args), cfg, outputs)
    for label, report in reports.items():
        for agg in report.aggregates:
            hss_txt = "" if agg.hss is None else f" hss={agg.hss:.2f}"
            print(f"{label:>24} {agg.region:<14} rmse={agg.rmse:.4f} acc={agg.acc:.4f}{hss_txt}")
    return 0


def cmd_ensemble(args, cfg: RunConfig) -> int:
    from .forecast import ensemble_inference

    prepared = _prepared(args, cfg)
    ckpt = load_checkpoint(args.checkpoint)
    period = _parse_period(args.period, "monthly")
    lo, hi = period
    window = ckpt.config.window
    base = [
        prepared.anomalies[MonthStamp.from_index(i)]
        for i in range(lo.index - window, hi.index)  # inputs end one month before hi
    ]
    members: list[list[MonthlyField]] = []
    if args.members:
        for item in args.members.split(","):
            m_prepared = pipeline.prepare_dataset(
                item,
                anomaly_base=cfg.anomaly_base,
                lsm_threshold=cfg.lsm_threshold,
            )
            members.append(
                [
                    m_prepared.anomalies[MonthStamp.from_index(i)]
                    for i in range(lo.index - window, hi.index)
                ]
            )
    else:
        rng = np.random.default_rng(args.seed)
        for k in range(args.synthetic_members):
            noise = args.member_noise
            members.append(
                [
                    f.with_values(f.values + noise * rng.standard_normal(f.grid.shape))
                    for f in base
                ]
            )
    per_member, summary = ensemble_inference(members, prepared.constants, ckpt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .grids import latitude_weights
    from .verify import region_global, rmse as rmse_metric

    region = region_global(prepared.manifest.grid)
    truth = pipeline.truth_series(prepared, "monthly", (lo, hi))
    stamps = [s for s in summary.stamps if lo <= s <= hi]  # type: ignore[operator]
    member_rmse = np.array(
        [
            [
                rmse_metric(r.anomaly, truth[r.stamp], region)
                for r in results
                if lo <= r.stamp <= hi  # type: ignore[operator]
            ]
            for results in per_member
        ]
    )
    payload = {
        "members": len(members),
        "months": len(stamps),
        "sample_count": len(members) * len(stamps),
        "stamps": [str(s) for s in stamps],
        "rmse_mean": member_rmse.mean(axis=0).tolist(),
        "rmse_std": member_rmse.std(axis=0).tolist(),
    }
    (out / "ensemble.json").write_text(json.dumps(payload, indent=2))
    plots.plot_ensemble_band(
        [str(s) for s in stamps], member_rmse, None, "RMSE (K)", out / "ensemble_rmse.png"
    )
    write_run_manifest(out, "ensemble", vars(args), cfg, ["ensemble.json", "ensemble_rmse.png"])
    return 0


def cmd_plot(args, cfg: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    if args.kind == "loss":
        plots.plot_loss_history(args.input, out / "loss.png")
        outputs.append("loss.png")
    elif args.kind == "global-mean":
        prepared = pipeline.prepare_dataset(
            args.input,
            anomaly_base=cfg.anomaly_base,
            lsm_threshold=cfg.lsm_threshold,
        )
        plots.plot_global_mean_series(
            list(prepared.blended.values()), out / "global_mean.png"
        )
        outputs.append("global_mean.png")
    elif args.kind == "error-map":
        prepared = _prepared(args, cfg)
        label, series = _load_forecast_series(Path(args.forecast), "monthly")
        stamp = max(series, key=lambda s: s.index)
        truth = pipeline.truth_series(prepared, "monthly", (stamp, stamp))[stamp]
        plots.plot_error_map(
            series[stamp], truth, out / "error_map.png", title=f"{label} {stamp}"
        )
        outputs.append("error_map.png")
    else:
        raise ConfigurationError(f"unknown plot kind {args.kind!r}")
    write_run_manifest(out, "plot", vars(args), cfg, outputs)
    return 0


def cmd_model_summary(args, cfg: RunConfig) -> int:
    window = args.window
    model_cfg = ModelConfig(
        in_channels=2 * window + 5,
        out_channels=window,
        depth=args.depth,
        base_channels=_channels(args.channels),
    )
    print(model_summary(model_cfg))
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tempcast", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, data=True):
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--log-level", default="info")
        if data:
            p.add_argument("--data", required=True, help="dataset directory")

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    common(p, data=False)
    p.add_argument("--grid", default="32x64")
    p.add_argument("--years", type=int, default=42)
    p.add_argument("--start-year", type=int, default=1982)
    p.add_argument("--noise", type=float, default=0.8)
    p.add_argument("--ar", type=float, default=0.8)
    p.add_argument("--trend", type=float, default=0.4)
    p.add_argument("--split-train", default=None, help="e.g. 1985-01:2016-12")
    p.add_argument("--split-val", default=None)
    p.add_argument("--split-test", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="convert CF NetCDF monthly means")
    common(p, data=False)
    p.add_argument("--input", required=True)
    p.add_argument("--vars", default="t2m,sst,lsm,slt,z,cvh,cvl,tisr")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("climatology", help="materialize climatology tables")
    common(p)
    p.set_defaults(func=cmd_climatology)

    p = sub.add_parser("train", help="train a checkpoint")
    common(p)
    p.add_argument("--mode", choices=pipeline.MODES, default="monthly")
    p.add_argument("--window", type=int, default=1)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--channels", default=",".join(str(c) for c in DESK_CHANNELS[:3]))
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--patience", type=int, default=100)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--cosine-period", type=int, default=225)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("forecast", help="tile a period with window forecasts")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--period", required=True, help="e.g. 2019-01:2023-12")
    p.add_argument("--label", default="model")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("rollout", help="autoregressive moving-window forecast")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--start", required=True, help="first target month, e.g. 2024-01")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--label", default="rollout")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("baseline", help="produce a baseline forecast series")
    common(p)
    p.add_argument("--kind", required=True, help="pm|pysm|climatology|mlr")
    p.add_argument("--mode", choices=pipeline.MODES, default="monthly")
    p.add_argument("--period", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("score", help="score forecast series against truth")
    common(p)
    p.add_argument("--forecast", action="append", required=True, help="forecast dir or .tcg (repeatable)")
    p.add_argument("--mode", choices=pipeline.MODES, default="monthly")
    p.add_argument("--regions", default="global,global_land,global_ocean")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("ensemble", help="run a checkpoint over ensemble members")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--period", required=True)
    p.add_argument("--members", default=None, help="comma-separated member dataset dirs")
    p.add_argument("--synthetic-members", type=int, default=10)
    p.add_argument("--member-noise", type=float, default=0.05)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("plot", help="render figures from existing artifacts")
    common(p, data=False)
    p.add_argument("--kind", required=True, choices=("loss", "global-mean", "error-map"))
    p.add_argument("--input", help="history.jsonl or dataset dir")
    p.add_argument("--data", help="dataset directory (error-map)")
    p.add_argument("--forecast", help="forecast dir (error-map)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("model-summary", help="print the architecture table")
    common(p, data=False)
    p.add_argument("--window", type=int, default=1)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--channels", default="64,128,256,512,1024")
    p.set_defaults(func=cmd_model_summary)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = RunConfig.load(args.config)
        return args.func(args, cfg)
    except ConfigurationError as exc:
        print(f"tempcast: usage error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"tempcast: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, TempcastError) as exc:
        print(f"tempcast: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
