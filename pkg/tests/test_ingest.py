import numpy as np
import pytest

from tempcast.errors import ConfigurationError, StampMismatchError
from tempcast.grids import GridSpec, MonthlyField, build_climatology, anomalize
from tempcast.ingest import (
    ConstantChannels,
    SplitSpec,
    assemble_input_stack,
    blend_sst_t2m,
    training_norm_stats,
)
from tempcast.stamps import MonthStamp
from tempcast.synthetic import SyntheticConfig, generate_synthetic_corpus, trend_at


def field(grid, variable, values, stamp=MonthStamp(2000, 1), missing=None):
    return MonthlyField(
        variable=variable, stamp=stamp, grid=grid, values=values, missing=missing
    )


def make_constants(grid, lsm_values=None):
    lsm = lsm_values if lsm_values is not None else np.zeros(grid.shape)
    zeros = np.zeros(grid.shape)
    return ConstantChannels(
        lsm=field(grid, "lsm", lsm, stamp=None),
        slt=field(grid, "slt", zeros + 2.0, stamp=None),
        orography=field(grid, "orography", zeros + 100.0, stamp=None),
        cvh=field(grid, "cvh", zeros + 0.25, stamp=None),
        cvl=field(grid, "cvl", zeros + 0.5, stamp=None),
        tisr_cycle={
            m: field(grid, "tisr", zeros + 1e8 * m, stamp=None) for m in range(1, 13)
        },
    )


class TestBlend:
    def test_all_land_returns_t2m_exactly(self, small_grid, rng):
        t2m = field(small_grid, "t2m", rng.normal(280, 5, small_grid.shape))
        sst = field(small_grid, "sst", rng.normal(275, 2, small_grid.shape))
        lsm = field(small_grid, "lsm", np.ones(small_grid.shape), stamp=None)
        blended, fallbacks = blend_sst_t2m(t2m, sst, lsm)
        np.testing.assert_array_equal(blended.values, t2m.values)
        assert fallbacks == 0

    def test_all_ocean_returns_sst_exactly(self, small_grid, rng):
        t2m = field(small_grid, "t2m", rng.normal(280, 5, small_grid.shape))
        sst = field(small_grid, "sst", rng.normal(275, 2, small_grid.shape))
        lsm = field(small_grid, "lsm", np.zeros(small_grid.shape), stamp=None)
        blended, _ = blend_sst_t2m(t2m, sst, lsm)
        np.testing.assert_array_equal(blended.values, sst.values)

    def test_checkerboard_matches_pointwise_oracle(self, small_grid, rng):
        t2m_v = rng.normal(280, 5, small_grid.shape)
        sst_v = rng.normal(275, 2, small_grid.shape)
        lsm_v = np.indices(small_grid.shape).sum(axis=0) % 2.0
        blended, _ = blend_sst_t2m(
            field(small_grid, "t2m", t2m_v),
            field(small_grid, "sst", sst_v),
            field(small_grid, "lsm", lsm_v, stamp=None),
        )
        for j in range(small_grid.n_lat):
            for k in range(small_grid.n_lon):
                expected = t2m_v[j, k] if lsm_v[j, k] >= 0.5 else sst_v[j, k]
                assert blended.values[j, k] == expected
        assert blended.missing is None

    def test_masked_ocean_points_fall_back_to_t2m(self, small_grid, rng):
        t2m_v = rng.normal(280, 5, small_grid.shape)
        sst_missing = np.zeros(small_grid.shape, dtype=bool)
        sst_missing[0, :3] = True
        sst_v = np.where(sst_missing, 0.0, rng.normal(275, 2, small_grid.shape))
        blended, fallbacks = blend_sst_t2m(
            field(small_grid, "t2m", t2m_v),
            field(small_grid, "sst", sst_v, missing=sst_missing),
            field(small_grid, "lsm", np.zeros(small_grid.shape), stamp=None),
        )
        assert fallbacks == 3
        np.testing.assert_array_equal(blended.values[0, :3], t2m_v[0, :3])

    def test_changing_sst_at_land_point_never_changes_output(self, small_grid, rng):
        t2m = field(small_grid, "t2m", rng.normal(280, 5, small_grid.shape))
        lsm_v = (rng.random(small_grid.shape) > 0.5).astype(float)
        lsm = field(small_grid, "lsm", lsm_v, stamp=None)
        sst_v = rng.normal(275, 2, small_grid.shape)
        a, _ = blend_sst_t2m(t2m, field(small_grid, "sst", sst_v), lsm)
        sst_v2 = sst_v.copy()
        sst_v2[lsm_v >= 0.5] += 100.0
        b, _ = blend_sst_t2m(t2m, field(small_grid, "sst", sst_v2), lsm)
        np.testing.assert_array_equal(a.values, b.values)

    def test_stamp_mismatch_rejected(self, small_grid):
        t2m = field(small_grid, "t2m", np.zeros(small_grid.shape))
        sst = field(
            small_grid, "sst", np.zeros(small_grid.shape), stamp=MonthStamp(2000, 2)
        )
        lsm = field(small_grid, "lsm", np.zeros(small_grid.shape), stamp=None)
        with pytest.raises(StampMismatchError):
            blend_sst_t2m(t2m, sst, lsm)


class TestInputStack:
    @pytest.mark.parametrize(
        "window,expected",
        [(1, 7), (2, 9), (3, 11), (4, 13), (6, 17), (12, 29)],
    )
    def test_channel_count_contract(self, small_grid, rng, window, expected):
        constants = make_constants(small_grid)
        stats = {
            "blended_t": _stats("blended_t", -5, 5),
            "tisr": _stats("tisr", 0, 2e9),
            "lsm": _stats("lsm", 0, 1),
            "slt": _stats("slt", 0, 7),
            "orography": _stats("orography", 0, 3000),
            "cvh": _stats("cvh", 0, 1),
            "cvl": _stats("cvl", 0, 1),
        }
        anomalies = [
            field(small_grid, "blended_t", rng.normal(size=small_grid.shape),
                  stamp=MonthStamp(2000, 1).shift(k))
            for k in range(window)
        ]
        tisr = [constants.tisr_cycle[(k % 12) + 1] for k in range(window)]
        stack = assemble_input_stack(
            anomalies, tisr, constants, stats, window=window
        )
        assert stack.channels.shape[0] == expected == 2 * window + 5

    def test_channel_order_is_documented_layout(self, small_grid, rng):
        constants = make_constants(small_grid)
        stats = {
            name: _stats(name, lo, hi)
            for name, lo, hi in [
                ("blended_t", -5, 5),
                ("tisr", 0.0, 2e9),
                ("lsm", 0, 1),
                ("slt", 0, 7),
                ("orography", 0, 3000),
                ("cvh", 0, 1),
                ("cvl", 0, 1),
            ]
        }
        anomalies = [
            field(small_grid, "blended_t", np.full(small_grid.shape, float(k)),
                  stamp=MonthStamp(2000, 1).shift(k))
            for k in range(3)
        ]
        tisr = [constants.tisr_cycle[m] for m in (4, 5, 6)]
        stack = assemble_input_stack(anomalies, tisr, constants, stats, window=3)
        assert stack.channel_names == (
            "anomaly[t-2]", "anomaly[t-1]", "anomaly[t]",
            "tisr[t+1]", "tisr[t+2]", "tisr[t+3]",
            "lsm", "slt", "orography", "cvh", "cvl",
        )
        # anomaly channels oldest first: values 0, 1, 2 normalized by (-5, 5)
        np.testing.assert_allclose(stack.channels[0], 0.5, rtol=1e-6)
        np.testing.assert_allclose(stack.channels[2], 0.7, rtol=1e-6)
        # insolation channels carry the requested target months
        np.testing.assert_allclose(stack.channels[3], 4e8 / 2e9, rtol=1e-6)
        np.testing.assert_allclose(stack.channels[5], 6e8 / 2e9, rtol=1e-6)

    def test_unsupported_window_rejected(self, small_grid):
        constants = make_constants(small_grid)
        with pytest.raises(ConfigurationError, match="unsupported"):
            assemble_input_stack([], [], constants, {}, window=5)


def _stats(name, lo, hi):
    from tempcast.grids import NormStats

    return NormStats(channel_id=name, x_min=float(lo), x_max=float(hi))


class TestNormStatsLeakage:
    def test_stats_read_training_period_only(self, small_grid):
        constants = make_constants(small_grid)
        train_range = (MonthStamp(2000, 1), MonthStamp(2001, 12))
        fields = []
        for k in range(36):  # 2000-01 .. 2002-12; last year is out of range
            stamp = MonthStamp(2000, 1).shift(k)
            value = 1.0 if stamp <= train_range[1] else 50.0
            fields.append(
                field(small_grid, "blended_t",
                      np.full(small_grid.shape, value * (1 + k % 3)), stamp=stamp)
            )
        stats = training_norm_stats(fields, constants, train_range)
        # oracle: min/max over the training months alone
        train_values = [
            f.values for f in fields if train_range[0] <= f.stamp <= train_range[1]
        ]
        assert stats["blended_t"].x_min == float(np.min(train_values))
        assert stats["blended_t"].x_max == float(np.max(train_values))
        assert stats["blended_t"].x_max < 50.0  # never saw the held-out spike


class TestSplitSpec:
    def test_disjoint_ordered_enforced(self):
        with pytest.raises(ConfigurationError):
            SplitSpec(
                train=(MonthStamp(1980, 1), MonthStamp(2017, 6)),
                val=(MonthStamp(2017, 1), MonthStamp(2018, 12)),
                test=(MonthStamp(2019, 1), MonthStamp(2023, 12)),
            )

    def test_paper_default_counts(self):
        split = SplitSpec.paper_default()
        train, val, test = (split.train, split.val, split.test)
        assert train[1].index - train[0].index + 1 == 444
        assert val[1].index - val[0].index + 1 == 24
        assert test[1].index - test[0].index + 1 == 60


class TestSyntheticCorpus:
    def test_same_seed_reproduces_bitwise(self):
        grid = GridSpec.cell_centered(16, 32)
        cfg = SyntheticConfig(grid=grid, years=3, seed=42)
        a = generate_synthetic_corpus(cfg)
        b = generate_synthetic_corpus(cfg)
        for fa, fb in zip(a.t2m, b.t2m):
            np.testing.assert_array_equal(fa.values, fb.values)
        np.testing.assert_array_equal(
            a.constants.lsm.values, b.constants.lsm.values
        )

    def test_field_count(self):
        grid = GridSpec.cell_centered(16, 32)
        cfg = SyntheticConfig(grid=grid, years=42, seed=7)
        corpus = generate_synthetic_corpus(cfg)
        assert len(corpus.t2m) == 504
        assert len(corpus.sst) == 504

    def test_noise_free_anomalies_are_exactly_the_trend(self):
        grid = GridSpec.cell_centered(8, 16)
        cfg = SyntheticConfig(
            grid=grid, years=12, seed=3, noise_amplitude=0.0, trend_per_decade=0.5
        )
        corpus = generate_synthetic_corpus(cfg)
        base = (cfg.start_year, cfg.start_year + 9)
        table = build_climatology(corpus.t2m, base, percentiles=False)
        # oracle: trend minus its base-period mean for the same calendar month
        for f in corpus.t2m:
            anomaly = anomalize(f, table)
            base_trend = np.mean(
                [
                    trend_at(cfg, MonthStamp(y, f.stamp.month))
                    for y in range(base[0], base[1] + 1)
                ]
            )
            expected = trend_at(cfg, f.stamp) - base_trend
            np.testing.assert_allclose(
                anomaly.values, expected, rtol=0, atol=1e-9
            )

    def test_sst_masked_over_land(self):
        grid = GridSpec.cell_centered(16, 32)
        corpus = generate_synthetic_corpus(SyntheticConfig(grid=grid, years=2, seed=5))
        land = corpus.constants.lsm.values >= 0.5
        assert land.any() and (~land).any()  # both surface types present
        sst = corpus.sst[0]
        assert sst.missing is not None
        np.testing.assert_array_equal(sst.missing, land)

    def test_tisr_cycle_peaks_follow_the_sun(self):
        grid = GridSpec.cell_centered(16, 32)
        corpus = generate_synthetic_corpus(SyntheticConfig(grid=grid, years=2, seed=5))
        cycle = corpus.constants.tisr_cycle
        north = 0  # northernmost row
        south = grid.n_lat - 1
        assert cycle[6].values[north, 0] > cycle[12].values[north, 0]
        assert cycle[12].values[south, 0] > cycle[6].values[south, 0]
