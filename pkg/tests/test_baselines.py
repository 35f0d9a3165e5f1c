import numpy as np
import pytest

from tempcast.baselines import (
    PERSIST_PRIOR_STEP,
    PERSIST_PRIOR_YEAR,
    block_mean,
    climatology_forecast,
    coarse_grid_factor,
    coarsen_grid,
    mlr_fit,
    mlr_forecast,
    persistence_forecast,
)
from tempcast.errors import StampGapError
from tempcast.grids import ClimatologyTable, GridSpec, MonthlyField
from tempcast.stamps import MonthStamp, Season, SeasonStamp, YearStamp


def anomaly(grid, stamp, values):
    return MonthlyField(variable="blended_t", stamp=stamp, grid=grid, values=values)


def series(grid, rng, start, n):
    return {
        start.shift(k): anomaly(grid, start.shift(k), rng.normal(0, 1, grid.shape))
        for k in range(n)
    }


class TestPersistence:
    def test_prior_month_is_verbatim_copy(self, small_grid, rng):
        history = series(small_grid, rng, MonthStamp(2023, 1), 12)
        out = persistence_forecast(
            PERSIST_PRIOR_STEP, history, MonthStamp(2023, 12)
        )
        np.testing.assert_array_equal(
            out.values, history[MonthStamp(2023, 11)].values
        )
        assert out.stamp == MonthStamp(2023, 12)

    def test_prior_year_same_month_is_verbatim_copy(self, small_grid, rng):
        history = series(small_grid, rng, MonthStamp(2022, 1), 24)
        out = persistence_forecast(
            PERSIST_PRIOR_YEAR, history, MonthStamp(2023, 12)
        )
        np.testing.assert_array_equal(
            out.values, history[MonthStamp(2022, 12)].values
        )

    def test_seasonal_and_annual_prior_steps(self, small_grid, rng):
        seasons = {
            SeasonStamp(2023, s): anomaly(
                small_grid, SeasonStamp(2023, s), rng.normal(size=small_grid.shape)
            )
            for s in Season
        }
        out = persistence_forecast(
            PERSIST_PRIOR_STEP, seasons, SeasonStamp(2023, Season.JJA)
        )
        np.testing.assert_array_equal(
            out.values, seasons[SeasonStamp(2023, Season.MAM)].values
        )
        years = {
            YearStamp(y): anomaly(small_grid, YearStamp(y), rng.normal(size=small_grid.shape))
            for y in (2021, 2022)
        }
        out = persistence_forecast(PERSIST_PRIOR_STEP, years, YearStamp(2022))
        np.testing.assert_array_equal(out.values, years[YearStamp(2021)].values)

    def test_stationary_series_has_zero_persistence_error(self, small_grid, rng):
        frame = rng.normal(0, 1, small_grid.shape)
        history = {
            MonthStamp(2023, m): anomaly(small_grid, MonthStamp(2023, m), frame)
            for m in range(1, 12)
        }
        out = persistence_forecast(PERSIST_PRIOR_STEP, history, MonthStamp(2023, 11))
        assert np.max(np.abs(out.values - frame)) == 0.0

    def test_missing_history_is_an_error(self, small_grid, rng):
        history = series(small_grid, rng, MonthStamp(2023, 6), 3)
        with pytest.raises(StampGapError):
            persistence_forecast(PERSIST_PRIOR_YEAR, history, MonthStamp(2023, 8))


class TestClimatologyBaseline:
    def test_forecast_is_identically_zero(self, small_grid, rng):
        clim = ClimatologyTable(
            base_period=(1950, 1979),
            grid=small_grid,
            per_month_mean=rng.normal(280, 10, (12, *small_grid.shape)),
        )
        out = climatology_forecast(clim, MonthStamp(2023, 7))
        assert np.all(out.values == 0.0)


class TestMlr:
    def test_coarse_factor(self):
        assert coarse_grid_factor(GridSpec.cell_centered(720, 1440)) == 8
        assert coarse_grid_factor(GridSpec.cell_centered(32, 64)) == 1

    def test_block_mean_matches_loop(self, rng):
        values = rng.normal(size=(8, 12))
        out = block_mean(values, 4)
        for i in range(2):
            for j in range(3):
                np.testing.assert_allclose(
                    out[i, j], values[4 * i : 4 * i + 4, 4 * j : 4 * j + 4].mean()
                )

    def test_exact_linear_relationship_recovered(self, small_grid):
        # target = 0.6 * prior + 0.2 sin + intercept, noiseless
        stamps = [MonthStamp(2000, 1).shift(k) for k in range(48)]
        rng = np.random.default_rng(0)
        fields = {}
        prev = rng.normal(0, 1, small_grid.shape)
        fields[stamps[0]] = prev
        for s in stamps[1:]:
            angle = 2 * np.pi * s.month / 12.0
            prev = 0.6 * prev + 0.2 * np.sin(angle) + 0.05 * np.cos(angle) + 0.3
            fields[s] = prev
        anomalies = [anomaly(small_grid, s, fields[s]) for s in stamps]
        model = mlr_fit(anomalies)
        assert model.fallback_count == 0
        target = stamps[30]
        prior = anomalies[29]
        pred = mlr_forecast(model, prior, target)
        np.testing.assert_allclose(pred.values, fields[target], rtol=0, atol=1e-9)

    def test_coefficients_match_normal_equations_oracle(self, rng):
        grid = GridSpec.cell_centered(2, 4)
        stamps = [MonthStamp(2000, 1).shift(k) for k in range(24)]
        anomalies = [
            anomaly(grid, s, rng.normal(0, 1, grid.shape)) for s in stamps
        ]
        model = mlr_fit(anomalies)
        # oracle: solve (X^T X) beta = X^T y per gridpoint
        for j in range(2):
            for k in range(4):
                rows, ys = [], []
                for a, b in zip(anomalies, anomalies[1:]):
                    angle = 2 * np.pi * b.stamp.month / 12.0
                    rows.append(
                        [1.0, a.values[j, k], np.sin(angle), np.cos(angle)]
                    )
                    ys.append(b.values[j, k])
                X = np.array(rows)
                beta = np.linalg.solve(X.T @ X, X.T @ np.array(ys))
                np.testing.assert_allclose(
                    model.coefficients[j, k], beta, rtol=0, atol=1e-10
                )

    def test_rank_deficient_gridpoint_falls_back(self, small_grid):
        # an all-zero series zeroes the prior-anomaly column, which the
        # intercept column then absorbs only up to rank 3 of 4
        stamps = [MonthStamp(2000, 1).shift(k) for k in range(24)]
        anomalies = [
            anomaly(small_grid, s, np.zeros(small_grid.shape)) for s in stamps
        ]
        model = mlr_fit(anomalies)
        assert model.fallback_count == small_grid.n_lat * small_grid.n_lon
        pred = mlr_forecast(model, anomalies[0], stamps[1])
        assert np.all(pred.values == 0.0)

    def test_coarse_fit_regrids_back_to_data_grid(self, rng):
        grid = GridSpec.cell_centered(8, 16)
        stamps = [MonthStamp(2000, 1).shift(k) for k in range(36)]
        anomalies = [
            anomaly(grid, s, rng.normal(0, 1, grid.shape)) for s in stamps
        ]
        model = mlr_fit(anomalies, target_resolution=45.0)
        assert model.coarse_grid.shape == (4, 8)
        pred = mlr_forecast(model, anomalies[-2], stamps[-1])
        assert pred.grid == grid

    def test_coarsen_grid_axes(self):
        grid = GridSpec.cell_centered(8, 16)
        coarse = coarsen_grid(grid, 2)
        assert coarse.shape == (4, 8)
        np.testing.assert_allclose(
            coarse.lat, grid.lat.reshape(-1, 2).mean(axis=1)
        )
