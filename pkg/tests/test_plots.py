import numpy as np
import pytest

from tempcast.grids import GridSpec, MonthlyField
from tempcast.plots import (
    plot_ensemble_band,
    plot_error_map,
    plot_global_mean_series,
    plot_hss_heatmap,
    plot_loss_history,
    plot_metric_series,
)
from tempcast.stamps import MonthStamp
from tempcast.verify import ScoreReport, ScoreRow


def history(n=8):
    return [
        {"epoch": e, "lr": 1e-3, "train_loss": 1.0 / e, "val_loss": 1.2 / e}
        for e in range(1, n + 1)
    ]


def report(region="global", n=6, with_hss=True):
    rows = [
        ScoreRow(
            region=region,
            stamp=str(MonthStamp(2019, 1).shift(k)),
            rmse=0.5 + 0.01 * k,
            acc=0.8 - 0.01 * k,
            hss=float(10 + k) if with_hss else None,
        )
        for k in range(n)
    ]
    return ScoreReport(rows=rows, aggregates=[], metadata={})


def test_loss_curve_from_list_and_jsonl(tmp_path):
    out = plot_loss_history(history(), tmp_path / "loss.png")
    assert out.exists() and out.stat().st_size > 0
    import json

    jsonl = tmp_path / "history.jsonl"
    jsonl.write_text("\n".join(json.dumps(h) for h in history()))
    out2 = plot_loss_history(jsonl, tmp_path / "loss2.png")
    assert out2.exists()


def test_metric_series_panels(tmp_path):
    reports = {"model": report(), "persistence": report()}
    out = plot_metric_series(reports, "rmse", "global", tmp_path / "rmse.png")
    assert out.exists() and out.stat().st_size > 0


def test_error_map_with_captions(tmp_path, rng):
    grid = GridSpec.cell_centered(8, 16)
    f = MonthlyField(
        variable="blended_t",
        stamp=MonthStamp(2023, 12),
        grid=grid,
        values=rng.normal(size=grid.shape),
    )
    t = MonthlyField(
        variable="blended_t",
        stamp=MonthStamp(2023, 12),
        grid=grid,
        values=rng.normal(size=grid.shape),
    )
    out = plot_error_map(f, t, tmp_path / "err.png", title="model 2023-12")
    assert out.exists() and out.stat().st_size > 0


def test_hss_heatmap(tmp_path):
    reports = {"model": report(), "reference": report()}
    out = plot_hss_heatmap(reports, "global", tmp_path / "hss.png")
    assert out.exists()


def test_global_mean_series_flat_for_constant_corpus(tmp_path):
    grid = GridSpec.cell_centered(8, 16)
    fields = [
        MonthlyField(
            variable="blended_t",
            stamp=MonthStamp(2000, 1).shift(k),
            grid=grid,
            values=np.full(grid.shape, 288.0),
        )
        for k in range(24)
    ]
    # cosine-weighted global mean of a constant corpus is that constant
    from tempcast.grids import latitude_weights

    w = latitude_weights(grid).weights[:, None]
    mean = float((fields[0].values * w).sum() / grid.n_lon)
    assert mean == pytest.approx(288.0, rel=1e-12)
    out = plot_global_mean_series(fields, tmp_path / "gm.png")
    assert out.exists()


def test_ensemble_band(tmp_path, rng):
    stamps = [str(MonthStamp(2019, 1).shift(k)) for k in range(12)]
    members = rng.normal(0.5, 0.05, size=(10, 12))
    out = plot_ensemble_band(
        stamps, members, members.mean(axis=0), "RMSE (K)", tmp_path / "band.png"
    )
    assert out.exists()
