import numpy as np
import pytest
from scipy import stats

from mocpd import simulate as sim


def test_fuel_variance_examples():
    assert sim.fuel_variance(1000, 948, 50, 0) == -2
    assert sim.fuel_variance(1000, 950, 50, 0) == 0
    assert sim.fuel_variance(1000, 1499, 0, 500) == -1


def test_leak_rate_bounds():
    rng = np.random.default_rng(0)
    for avg, lo, hi in [(0.2, 0.14, 0.26), (0.1, 0.07, 0.13)]:
        draws = [sim.sample_leak_rate(avg, rng) for _ in range(1000)]
        assert lo - 1e-12 <= min(draws) and max(draws) <= hi + 1e-12
    with pytest.raises(ValueError):
        sim.sample_leak_rate(0.0, rng)


def test_leak_rate_distribution():
    rng = np.random.default_rng(1)
    draws = np.array([sim.sample_leak_rate(0.2, rng) for _ in range(10_000)])
    assert abs(draws.mean() - 0.2) <= 0.002
    assert stats.kstest(draws, "uniform", args=(0.14, 0.12)).pvalue > 0.01


def test_leak_volume_examples():
    assert sim.leak_volume_per_interval(0.2, 3.0, 3.0) == pytest.approx(0.1)
    assert sim.leak_volume_per_interval(0.2, 0.0, 3.0) == 0.0
    assert sim.leak_volume_per_interval(0.2, 0.75, 3.0) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        sim.leak_volume_per_interval(0.2, 0.0, 0.0)


def scenario(length=10_000, start=3000, stop=7500, level=1.0, rate=0.2):
    h = np.full(length, level)
    return sim.LeakScenario(rate, rate, start, stop, h, np.full(length, 1.0))


def test_inject_on_zero_base():
    out = sim.inject_leak(np.zeros(10_000), scenario())
    assert out.cps == [3000, 7500]
    assert np.all(out.values[:3000] == 0) and np.all(out.values[7500:] == 0)
    np.testing.assert_allclose(out.values[3000:7500], -0.1)


def test_scenario_geometry_enforced():
    with pytest.raises(ValueError):
        scenario(start=3000, stop=3000)
    with pytest.raises(ValueError):
        scenario(start=1000, stop=6000)
    with pytest.raises(ValueError):
        sim.LeakScenario(0.2, 0.3, 3000, 8000, np.ones(9000), np.ones(9000))


def test_inject_shift_matches_level_profile():
    series, scen = sim.gen_fuel_leak(length=20_000, sigma=0.5, seed=3)
    s, e = scen.start_idx, scen.stop_idx
    base_mean = np.r_[series.values[:s], series.values[e:]].mean()
    shift = base_mean - series.values[s:e].mean()
    expected = 0.5 * scen.drawn_rate * np.mean(np.sqrt(scen.h_series[s:e] / scen.h_max[s:e]))
    se = 0.5 * np.sqrt(1 / (e - s) + 1 / (len(series) - e + s))
    assert abs(shift - expected) < 4 * se


def test_generated_scenarios_respect_geometry():
    for seed in range(20):
        series, scen = sim.gen_fuel_leak(seed=seed)
        assert scen.start_idx >= 2 * 30 * 48
        assert scen.stop_idx >= scen.start_idx + 3 * 30 * 48
        assert scen.stop_idx < len(series)
        assert np.all(scen.h_series <= scen.h_max + 1e-12)
        assert 0.14 <= scen.drawn_rate <= 0.26


def test_fuel_leak_is_deterministic():
    a, _ = sim.gen_fuel_leak(seed=5, trend_amplitude=0.1)
    b, _ = sim.gen_fuel_leak(seed=5, trend_amplitude=0.1)
    assert np.array_equal(a.values, b.values) and a.cps == b.cps


def test_jumping_mean_layout():
    series = sim.gen_jumping_mean(rng=np.random.default_rng(0))
    assert len(series) == 49 * 500
    assert series.cps == list(range(500, 24_001, 500))


def test_jumping_mean_noise_means():
    # removing the AR part leaves the noise, whose mean steps by N / 16
    series = sim.gen_jumping_mean(num_segments=3, seg_len=20_000, rng=np.random.default_rng(1))
    x = series.values
    eps = x[2:] - 0.6 * x[1:-1] + 0.5 * x[:-2]
    seg = [eps[max(0, k * 20_000 - 2) + 100 : (k + 1) * 20_000 - 2].mean() for k in range(3)]
    np.testing.assert_allclose(seg, [0.0, 0.125, 0.125 + 3 / 16], atol=0.05)


def test_jumping_mean_recovers_ar_coefficients():
    x = sim.gen_jumping_mean(num_segments=1, seg_len=20_000, rng=np.random.default_rng(2)).values
    design = np.column_stack([x[1:-1], x[:-2], np.ones(len(x) - 2)])
    coef, *_ = np.linalg.lstsq(design, x[2:], rcond=None)
    assert abs(coef[0] - 0.6) <= 0.05
    assert abs(coef[1] + 0.5) <= 0.05


def test_jumping_mean_residual_std():
    x = sim.gen_jumping_mean(rng=np.random.default_rng(3)).values
    stds = []
    for k in range(49):
        lo, hi = k * 500, (k + 1) * 500
        resid = x[lo + 2 : hi] - 0.6 * x[lo + 1 : hi - 1] + 0.5 * x[lo : hi - 2]
        stds.append(resid.std())
    assert abs(np.mean(stds) / 1.5 - 1) <= 0.05


def test_gaussian_mixture_population_means():
    rng = np.random.default_rng(5)
    assert abs(sim.sample_mixture(sim.GM_A, 1_000_000, rng).mean() - 0.0) <= 0.01
    assert abs(sim.sample_mixture(sim.GM_B, 1_000_000, rng).mean() + 0.6) <= 0.01


def test_gaussian_mixture_layout():
    series = sim.gen_gaussian_mixture(num_segments=10, rng=np.random.default_rng(6))
    assert len(series) == 5000
    assert series.cps == list(range(500, 5000, 500))


def test_generators_deterministic():
    a = sim.gen_gaussian_mixture(rng=np.random.default_rng(7))
    b = sim.gen_gaussian_mixture(rng=np.random.default_rng(7))
    assert np.array_equal(a.values, b.values)


def test_labeled_series_validation():
    with pytest.raises(ValueError):
        sim.LabeledSeries(np.zeros(10), [5, 5])
    with pytest.raises(ValueError):
        sim.LabeledSeries(np.zeros(10), [10])
