import numpy as np
import pytest

from tempcast import pipeline
from tempcast.grids import GridSpec
from tempcast.ingest import SplitSpec, write_dataset
from tempcast.stamps import MonthStamp, Season, SeasonStamp
from tempcast.synthetic import SyntheticConfig, generate_synthetic_corpus


@pytest.fixture(scope="module")
def prepared(tmp_path_factory):
    grid = GridSpec.cell_centered(8, 16)
    corpus = generate_synthetic_corpus(
        SyntheticConfig(grid=grid, years=14, start_year=1982, seed=11)
    )
    split = SplitSpec(
        train=(MonthStamp(1982, 1), MonthStamp(1989, 12)),
        val=(MonthStamp(1990, 1), MonthStamp(1991, 12)),
        test=(MonthStamp(1992, 1), MonthStamp(1995, 12)),
    )
    path = tmp_path_factory.mktemp("ds")
    write_dataset(
        path, corpus.manifest(split), {"t2m": corpus.t2m, "sst": corpus.sst}, corpus.constants
    )
    return pipeline.prepare_dataset(
        path, anomaly_base=(1982, 1989), percentile_base=(1984, 1990)
    )


def test_prepared_blends_and_anomalizes(prepared):
    assert len(prepared.blended) == 14 * 12
    assert len(prepared.anomalies) == 14 * 12
    # anomalies over the base period average to ~zero per month
    base = [
        prepared.anomalies[MonthStamp(y, 1)].values for y in range(1982, 1990)
    ]
    np.testing.assert_allclose(np.mean(base, axis=0), 0.0, atol=1e-9)


def test_norm_stats_cover_train_only(prepared):
    lo, hi = prepared.split.train
    train_vals = [
        f.values
        for s, f in prepared.anomalies.items()
        if lo <= s <= hi
    ]
    assert prepared.norm_stats["blended_t"].x_min == float(np.min(train_vals))
    assert prepared.norm_stats["blended_t"].x_max == float(np.max(train_vals))


def test_monthly_samples_window1(prepared):
    samples = pipeline.build_samples(prepared, "monthly", "train", 1)
    # 96 train months -> 95 consecutive pairs
    assert len(samples) == 95
    assert samples.inputs.shape[1:] == (7, 8, 16)
    assert samples.targets.shape[1:] == (1, 8, 16)


def test_monthly_samples_window3(prepared):
    samples = pipeline.build_samples(prepared, "monthly", "train", 3)
    # need 6 consecutive months inside the split
    assert len(samples) == 96 - 5
    assert samples.inputs.shape[1] == 11
    assert samples.targets.shape[1] == 3


def test_target_is_normalized_next_anomaly(prepared):
    samples = pipeline.build_samples(prepared, "monthly", "train", 1)
    from tempcast.grids import normalize

    stats = prepared.norm_stats["blended_t"]
    expected = normalize(
        prepared.anomalies[MonthStamp(1982, 2)].values, stats
    ).astype(np.float32)
    np.testing.assert_array_equal(samples.targets[0, 0], expected)


def test_seasonal_pair_rule_applies_spin_up_year(prepared):
    pairs = pipeline.trainable_pairs(prepared, "seasonal", "train")
    # 1982 is the dataset's first year: seasons start MAM 1983
    assert pairs[0][0] == SeasonStamp(1983, Season.MAM)
    # series MAM 1983 .. SON 1989 -> 4*7 - 1 seasons -> pairs one fewer
    assert len(pairs) == 4 * 7 - 2
    val_pairs = pipeline.trainable_pairs(prepared, "seasonal", "val")
    assert len(val_pairs) == 4 * 2 - 2


def test_annual_stamps_and_pairs(prepared):
    years = pipeline.split_stamps(prepared, "annual", "train")
    assert len(years) == 8
    pairs = pipeline.trainable_pairs(prepared, "annual", "train")
    assert len(pairs) == 7


def test_seasonal_samples_shapes(prepared):
    samples = pipeline.build_samples(prepared, "seasonal", "train", 1)
    assert len(samples) == 26
    assert samples.inputs.shape[1] == 7


def test_published_calendar_counts_via_pipeline():
    from tempcast.ingest import DatasetManifest

    manifest = DatasetManifest(
        source="synthetic",
        grid=GridSpec.cell_centered(4, 8),
        time_range=(MonthStamp(1980, 1), MonthStamp(2023, 12)),
        variables=("t2m", "sst"),
        split=SplitSpec.paper_default(),
    )
    stub = pipeline.PreparedData(
        manifest=manifest,
        constants=None,
        blended={},
        anomalies={},
        anomaly_clim=None,
        percentile_clim=None,
        norm_stats={},
        fallback_count=0,
    )
    months = [
        len(pipeline.split_stamps(stub, "monthly", name))
        for name in ("train", "val", "test")
    ]
    seasons = [
        len(pipeline.trainable_pairs(stub, "seasonal", name))
        for name in ("train", "val", "test")
    ]
    years = [
        len(pipeline.split_stamps(stub, "annual", name))
        for name in ("train", "val", "test")
    ]
    assert months == [444, 24, 60]
    assert seasons == [142, 6, 18]
    assert years == [37, 2, 5]


def test_model_forecast_tiling_covers_period(prepared):
    from tests.test_forecast import make_checkpoint

    ckpt = make_checkpoint(prepared.manifest.grid, window=3, seed=2)
    # window-3 checkpoint built with generic stats; rebuild with dataset stats
    ckpt.norm_stats.update(prepared.norm_stats)
    period = (MonthStamp(1992, 1), MonthStamp(1992, 12))
    out = pipeline.model_forecasts(prepared, ckpt, "monthly", period)
    assert sorted(str(s) for s in out) == [f"1992-{m:02d}" for m in range(1, 13)]


def test_baseline_series_against_truth(prepared):
    from tempcast.baselines import CLIMATOLOGY, PERSIST_PRIOR_YEAR

    period = (MonthStamp(1992, 1), MonthStamp(1992, 6))
    clim = pipeline.baseline_forecasts(prepared, CLIMATOLOGY, "monthly", period)
    assert all(np.all(f.values == 0.0) for f in clim.values())
    pysm = pipeline.baseline_forecasts(prepared, PERSIST_PRIOR_YEAR, "monthly", period)
    np.testing.assert_array_equal(
        pysm[MonthStamp(1992, 3)].values,
        prepared.anomalies[MonthStamp(1991, 3)].values,
    )
