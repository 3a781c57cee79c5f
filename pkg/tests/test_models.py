import math

import numpy as np
import pytest

from sigtrade.errors import ConstructionFailed, FitDegenerate, InvalidArgument, NotMeanReverting
from sigtrade.models import (
    BootstrapConfig,
    BootstrapSampler,
    OUParams,
    OUSampler,
    SpreadSpec,
    block_bootstrap,
    block_bootstrap_values,
    construct_spread,
    fit_ou_mle,
    generate_training_set,
    ou_log_likelihood,
    simulate_ou,
    simulate_ou_paths,
    uniform_grid,
)
from sigtrade.signature import Path


class TestSimulate:
    def test_zero_vol_closed_form(self):
        p = simulate_ou(OUParams(2.0, 3.0, 0.0), x0=7.0, n=50, horizon=2.0)
        np.testing.assert_allclose(p.values[:, 0], 2.0 + 5.0 * np.exp(-3.0 * p.times), rtol=1e-13)

    def test_constant_at_mean(self):
        p = simulate_ou(OUParams(4.0, 3.0, 0.0), x0=4.0, n=20)
        assert np.all(p.values == 4.0)

    def test_deterministic_and_substreams(self):
        times = uniform_grid(30, 1.0)
        params = OUParams(0.0, 5.0, 1.0)
        a = simulate_ou_paths(params, 0.0, times, 6, seed=3)
        np.testing.assert_array_equal(a, simulate_ou_paths(params, 0.0, times, 6, seed=3))
        # sample m does not depend on how many other samples are drawn
        np.testing.assert_array_equal(a[:2], simulate_ou_paths(params, 0.0, times, 2, seed=3))
        assert not np.array_equal(a, simulate_ou_paths(params, 0.0, times, 6, seed=4))

    def test_terminal_moments(self):
        params = OUParams(10.0, 10.0, 1.0)
        end = simulate_ou_paths(params, 5.0, uniform_grid(100, 1.0), 100_000, seed=0)[:, -1]
        mean = 10.0 + (5.0 - 10.0) * math.exp(-10.0)
        var = (1.0 - math.exp(-20.0)) / 20.0
        n = len(end)
        assert abs(end.mean() - mean) <= 3 * math.sqrt(var / n)
        # standard error of the sample variance for Gaussian data
        assert abs(end.var(ddof=1) - var) <= 3 * var * math.sqrt(2.0 / (n - 1))

    @pytest.mark.parametrize("n,horizon", [(0, 1.0), (5, 0.0)])
    def test_bad_grid(self, n, horizon):
        with pytest.raises(InvalidArgument):
            simulate_ou(OUParams(0, 1, 1), 0.0, n=n, horizon=horizon)

    @pytest.mark.parametrize("kw", [{"speed": 0.0}, {"vol": -1.0}])
    def test_param_validation(self, kw):
        base = {"mean_level": 0.0, "speed": 1.0, "vol": 1.0}
        with pytest.raises(InvalidArgument):
            OUParams(**(base | kw))

    def test_json(self):
        p = OUParams(1.5, 2.0, 0.3)
        assert p.to_dict() == {"mean_level": 1.5, "speed": 2.0, "vol": 0.3}
        assert OUParams.from_dict(p.to_dict()) == p


class TestFit:
    def test_recovery_median_over_seeds(self):
        true = OUParams(10.0, 10.0, 1.0)
        fits = [fit_ou_mle(simulate_ou(true, 10.0, n=100_000, horizon=100.0, seed=s), 1e-3) for s in range(10)]
        assert abs(np.median([f.mean_level for f in fits]) - 10.0) <= 0.02 * 10.0
        assert abs(np.median([f.vol for f in fits]) - 1.0) <= 0.02 * 1.0
        assert abs(np.median([f.speed for f in fits]) - 10.0) <= 0.20 * 10.0

    def test_ar1_map_is_exact(self):
        rng = np.random.default_rng(1)
        x = np.empty(500)
        x[0] = 0.3
        for j in range(499):
            x[j + 1] = 0.9 * x[j] + 0.2 + 0.1 * rng.normal()
        # the closed-form regression values, computed independently
        X = np.column_stack([x[:-1], np.ones(499)])
        (a, b), *_ = np.linalg.lstsq(X, x[1:], rcond=None)
        s2 = np.mean((x[1:] - X @ np.array([a, b])) ** 2)
        dt = 0.01
        fit = fit_ou_mle(x, dt)
        theta = -math.log(a) / dt
        assert fit.speed == pytest.approx(theta, rel=1e-12)
        assert fit.mean_level == pytest.approx(b / (1 - a), rel=1e-12)
        assert fit.vol == pytest.approx(math.sqrt(2 * theta * s2 / (1 - a * a)), rel=1e-12)

    def test_mle_beats_perturbations(self):
        path = simulate_ou(OUParams(1.0, 4.0, 0.5), 0.0, n=2000, horizon=5.0, seed=2)
        dt = 5.0 / 2000
        fit = fit_ou_mle(path, dt)
        best = ou_log_likelihood(path, dt, fit)
        for field in ("mean_level", "speed", "vol"):
            for f in (0.97, 1.03):
                d = fit.to_dict()
                d[field] *= f
                assert ou_log_likelihood(path, dt, OUParams.from_dict(d)) < best

    def test_constant_path(self):
        with pytest.raises(FitDegenerate):
            fit_ou_mle(np.full(20, 3.0), 0.1)

    def test_random_walk_with_drift_is_not_mean_reverting(self):
        with pytest.raises(NotMeanReverting):
            fit_ou_mle(np.arange(50.0) ** 2, 0.1)

    def test_too_short(self):
        with pytest.raises(InvalidArgument):
            fit_ou_mle([1.0, 2.0], 0.1)


def _positive_walk(rng, n, vol=0.02):
    return np.exp(np.concatenate([[0.0], np.cumsum(rng.normal(scale=vol, size=n - 1))]))


class TestConstructSpread:
    def test_constant_b_ties_to_smallest_beta(self):
        ou = simulate_ou(OUParams(1.0, 20.0, 0.2), 1.0, n=299, horizon=300 / 252, seed=0).values[:, 0]
        spec, _ = construct_spread(ou + 5.0, np.full(300, 2.0), beta_grid=[-2.0, 1.5, -0.5, 0.75, 3.0])
        assert spec.hedge_ratio == -0.5

    def test_recovers_hedge_ratio(self):
        rng = np.random.default_rng(5)
        n = 1500
        b = _positive_walk(rng, n)
        noise = simulate_ou_paths(OUParams(0.0, 5.0, 0.1), 0.0, np.arange(n) / 252, 1, seed=5)[0]
        a = 0.5 * b + 0.5 + noise
        grid = np.linspace(0.0, 1.0, 101)
        spec, spread = construct_spread(a, b, beta_grid=grid)
        assert abs(spec.hedge_ratio - 0.5) <= 0.01 + 1e-12
        np.testing.assert_allclose(spread.values[:, 0], a / a[0] - spec.hedge_ratio * b / b[0])

    def test_single_candidate(self):
        rng = np.random.default_rng(6)
        b = _positive_walk(rng, 400)
        a = b * (1 + 0.01 * simulate_ou_paths(OUParams(0, 30, 1), 0, np.arange(400) / 252, 1, seed=1)[0])
        spec, spread = construct_spread(a, b, beta_grid=[1.0])
        assert spec.hedge_ratio == 1.0
        np.testing.assert_allclose(spread.values[:, 0], a / a[0] - b / b[0])

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        b = _positive_walk(rng, 500)
        a = 0.8 * b + 0.2 + simulate_ou_paths(OUParams(0, 10, 0.05), 0, np.arange(500) / 252, 1, seed=7)[0]
        grid = np.linspace(-1, 2, 61)
        s1, _ = construct_spread(a, b, grid)
        s2, _ = construct_spread(37.0 * a, 37.0 * b, grid)
        assert s1.hedge_ratio == s2.hedge_ratio

    def test_identical_series(self):
        b = _positive_walk(np.random.default_rng(8), 100)
        with pytest.raises(ConstructionFailed):
            construct_spread(b, 3.0 * b)

    def test_all_candidates_fail(self):
        a = np.linspace(1.0, 2.0, 50)
        with pytest.raises(ConstructionFailed):
            construct_spread(a**2, np.ones(50), beta_grid=[0.0])

    def test_bad_inputs(self):
        with pytest.raises(InvalidArgument):
            construct_spread([1, 2, 3], [1, 2])
        with pytest.raises(InvalidArgument):
            construct_spread([1, -2, 3], [1, 2, 3])
        with pytest.raises(InvalidArgument):
            construct_spread([1, 2, 3, 4], [1, 3, 2, 5], beta_grid=[])

    def test_json(self):
        spec = SpreadSpec("A", "B", 0.5, OUParams(0.1, 2.0, 0.3), -12.5)
        d = spec.to_dict()
        assert d["hedge_ratio"] == 0.5 and d["log_likelihood"] == -12.5
        assert d["fitted"] == {"mean_level": 0.1, "speed": 2.0, "vol": 0.3}


class TestBootstrap:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.source = Path.uniform(np.cumsum(rng.normal(size=60)), 60 / 252)

    def test_single_block_reproduces_source(self):
        paths = block_bootstrap(self.source, BootstrapConfig(60, 5, seed=1), 60, x0=2.0)
        diffs = np.diff(self.source.values[:, 0])
        for p in paths:
            np.testing.assert_allclose(p.values[:, 0], 2.0 + np.concatenate([[0.0], np.cumsum(diffs)]))

    def test_zero_increments(self):
        values = block_bootstrap_values(np.full(30, 4.0), 5, 40, x0=1.5, count=10)
        assert np.all(values == 1.5)

    def test_increments_come_from_source(self):
        diffs = np.diff(self.source.values[:, 0])
        values = block_bootstrap_values(self.source, 7, 100, 0.0, 20, seed=3)
        inc = np.diff(values, axis=1)
        # anchored cumulative sums round, so match each increment to the nearest source value
        nearest = np.min(np.abs(inc[..., None] - diffs), axis=-1)
        assert nearest.max() <= 1e-9

    def test_increment_mean(self):
        diffs = np.diff(self.source.values[:, 0])
        values = block_bootstrap_values(self.source, 5, 40, 0.0, 10_000, seed=4)
        sample_means = np.diff(values, axis=1).mean(axis=1)
        se = sample_means.std(ddof=1) / math.sqrt(len(sample_means))
        assert abs(sample_means.mean() - diffs.mean()) <= 3 * se

    def test_deterministic(self):
        a = block_bootstrap_values(self.source, 5, 30, 0.0, 4, seed=9)
        np.testing.assert_array_equal(a, block_bootstrap_values(self.source, 5, 30, 0.0, 4, seed=9))

    def test_short_horizon(self):
        with pytest.raises(InvalidArgument):
            block_bootstrap(self.source, BootstrapConfig(5), 1, 0.0)

    def test_block_longer_than_source(self):
        with pytest.raises(InvalidArgument):
            block_bootstrap(self.source, BootstrapConfig(61), 10, 0.0)

    def test_config_validation(self):
        with pytest.raises(InvalidArgument):
            BootstrapConfig(0)


class TestTrainingSet:
    def test_single_deterministic_sample(self):
        times = uniform_grid(10, 1.0)
        ts = generate_training_set(OUSampler(OUParams(0.0, 2.0, 0.0)), 3.0, times, 1,
                                   payoff=lambda v, t: -v * np.exp(-t))
        np.testing.assert_allclose(ts.payoffs[0], -3.0 * np.exp(-2.0 * times) * np.exp(-times), rtol=1e-13)

    @pytest.mark.parametrize("sampler", [OUSampler(OUParams(1.0, 5.0, 1.0)),
                                         BootstrapSampler(np.cumsum(np.ones(40)) % 7, 5)])
    def test_anchored_and_deterministic(self, sampler):
        times = uniform_grid(20, 1.0)
        a = generate_training_set(sampler, 0.7, times, 8, seed=2)
        b = generate_training_set(sampler, 0.7, times, 8, seed=2)
        assert np.all(a.values[:, 0, 0] == 0.7)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.payoffs, b.payoffs)

    def test_count(self):
        with pytest.raises(InvalidArgument):
            generate_training_set(OUSampler(OUParams(0, 1, 1)), 0.0, uniform_grid(5, 1.0), 0)
