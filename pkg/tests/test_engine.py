import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chiarella.engine import (
    GENERATOR_NAME,
    FullState,
    ReducedState,
    SimSpec,
    TrajectoryStats,
    default_dt,
    default_stride,
    from_xy,
    simulate,
    step_full,
    step_reduced,
    to_xy,
)
from chiarella.errors import NonFiniteSample, SupportMismatch
from chiarella.params import ModelParams


@pytest.fixture
def small_spec(fast_trend_params):
    return SimSpec(
        params=fast_trend_params,
        total_time=20.0,
        dt=1e-3,
        n_paths=3,
        seed=123,
        subsample_stride=10,
        hist_bins=32,
    )


class TestStepFunctions:
    def test_reduced_tracks_full(self, strong_coupling_params):
        p = strong_coupling_params.replace(g=0.07)
        rng = np.random.default_rng(0)
        full = FullState(price=0.3, m=-0.1, value=0.25)
        red = ReducedState(delta=full.price - full.value, m=full.m)
        for _ in range(5000):
            noise = tuple(rng.standard_normal(2))
            full = step_full(full, p, 1e-3, noise)
            red = step_reduced(red, p, 1e-3, noise)
            assert full.delta == pytest.approx(red.delta, abs=1e-12)
            assert full.m == pytest.approx(red.m, abs=1e-12)

    def test_matches_compiled_kernel(self, fast_trend_params):
        # replicate the per-path noise stream (single chunk) and step in python
        spec = SimSpec(
            params=fast_trend_params,
            total_time=2.0,
            dt=1e-3,
            burn_in_fraction=0.0,
            n_paths=1,
            seed=77,
            subsample_stride=1,
        )
        stats = simulate(spec)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=77, spawn_key=(0,)))
        )
        xi = rng.standard_normal((2, 2000))
        state = ReducedState(0.0, 0.0)
        samples = []
        for k in range(2000):
            state = step_reduced(state, fast_trend_params, 1e-3, (xi[0, k], xi[1, k]))
            samples.append(state.delta)
        samples = np.array(samples)
        assert stats.n_retained == 2000
        assert stats.moments_delta[1] == pytest.approx(samples.sum(), rel=1e-12)
        assert stats.moments_delta[2] == pytest.approx((samples**2).sum(), rel=1e-12)

    def test_xy_roundtrip(self, fast_trend_params):
        s = ReducedState(delta=0.7, m=-2.1)
        x, y = to_xy(s, fast_trend_params)
        assert x == 0.7
        assert y == -2.1 - fast_trend_params.alpha * 0.7
        back = from_xy(x, y, fast_trend_params)
        assert back.delta == s.delta
        assert back.m == pytest.approx(s.m, rel=1e-15)

    @given(delta=st.floats(-10, 10), m=st.floats(-10, 10))
    def test_xy_roundtrip_property(self, delta, m):
        p = ModelParams(kappa=0.1, beta=1, gamma=1, alpha=3.7, sigma_n=0.2, sigma_v=0.1)
        back = from_xy(*to_xy(ReducedState(delta, m), p), p)
        assert back.delta == pytest.approx(delta, abs=1e-12)
        assert back.m == pytest.approx(m, abs=1e-9)


class TestDefaults:
    def test_default_dt_resolves_all_scales(self):
        p = ModelParams(kappa=0.1, beta=0.2, gamma=1e-4, alpha=0.2, sigma_n=0.2, sigma_v=0.1)
        assert default_dt(p) == pytest.approx(5e-5)  # gamma/2 binds
        q = p.replace(gamma=10.0)
        assert default_dt(q) == pytest.approx(1.0 / (20 * 0.2))  # alpha binds

    def test_default_stride_is_a_correlation_time(self):
        p = ModelParams(kappa=0.1, beta=0.2, gamma=1.0, alpha=0.2, sigma_n=0.2, sigma_v=0.1)
        assert default_stride(p, 0.01) == round(1.0 / (0.1 * 0.01))
        assert default_stride(p, 100.0) == 1


class TestSimSpecValidation:
    def test_too_few_steps(self, fast_trend_params):
        with pytest.raises(ValueError, match="1000 steps"):
            SimSpec(params=fast_trend_params, total_time=1.0, dt=0.01)

    def test_bad_burn_in(self, fast_trend_params):
        with pytest.raises(ValueError, match="burn_in_fraction"):
            SimSpec(params=fast_trend_params, total_time=100.0, dt=0.01, burn_in_fraction=1.0)

    def test_bad_seed(self, fast_trend_params):
        with pytest.raises(ValueError, match="seed"):
            SimSpec(params=fast_trend_params, total_time=100.0, dt=0.01, seed=2**64)

    def test_bad_bins(self, fast_trend_params):
        with pytest.raises(ValueError, match="hist_bins"):
            SimSpec(params=fast_trend_params, total_time=100.0, dt=0.01, hist_bins=4)

    def test_describe_is_json_ready(self, small_spec):
        desc = small_spec.describe()
        assert json.loads(json.dumps(desc)) == desc
        assert desc["generator"] == GENERATOR_NAME
        assert desc["system"] == "reduced"


class TestSimulate:
    def test_deterministic(self, small_spec):
        a = simulate(small_spec)
        b = simulate(small_spec)
        assert np.array_equal(a.hist_delta.counts, b.hist_delta.counts)
        assert np.array_equal(a.moments_delta, b.moments_delta)
        assert np.array_equal(a.moments_m, b.moments_m)

    def test_threads_do_not_change_results(self, small_spec):
        a = simulate(small_spec, threads=1)
        b = simulate(small_spec, threads=3)
        assert np.array_equal(a.hist_delta.counts, b.hist_delta.counts)
        assert np.array_equal(a.moments_delta, b.moments_delta)

    def test_seed_changes_results(self, small_spec):
        from dataclasses import replace

        a = simulate(small_spec)
        b = simulate(replace(small_spec, seed=124))
        assert not np.array_equal(a.moments_delta, b.moments_delta)

    def test_explicit_ranges_pin_edges(self, small_spec):
        from dataclasses import replace

        spec = replace(small_spec, delta_range=(-1.0, 1.0), m_range=(-30.0, 30.0))
        stats = simulate(spec)
        assert stats.hist_delta.edges[0] == -1.0
        assert stats.hist_delta.edges[-1] == 1.0
        assert len(stats.hist_delta.edges) == spec.hist_bins + 1

    def test_moments_count_all_samples_even_outside_range(self, small_spec):
        from dataclasses import replace

        clipped = simulate(replace(small_spec, delta_range=(-1e-6, 1e-6)))
        open_run = simulate(small_spec)
        assert clipped.hist_delta.total < clipped.n_retained
        assert np.array_equal(clipped.moments_delta, open_run.moments_delta)

    def test_ou_variance(self):
        # beta = 0 decouples the trend: delta is an OU process with Var sigma^2/(2 kappa)
        p = ModelParams(kappa=0.5, beta=0.0, gamma=1.0, alpha=1.0, sigma_n=0.3, sigma_v=0.4)
        spec = SimSpec(
            params=p, total_time=4000.0, dt=0.01, n_paths=4, seed=5, subsample_stride=100
        )
        stats = simulate(spec)
        n, s1, s2 = stats.moments_delta[:3]
        var = s2 / n - (s1 / n) ** 2
        target = p.sigma_sq / (2 * p.kappa)
        n_eff = n * min(1.0, 100 * 0.01 * 2 * p.kappa)
        se = target * math.sqrt(2.0 / n_eff)
        assert abs(var - target) < 4 * se

    def test_nonfinite_sample_diagnosed(self):
        p = ModelParams(kappa=0.1, beta=1.0, gamma=1.0, alpha=500.0, sigma_n=0.2, sigma_v=0.1)
        spec = SimSpec(params=p, total_time=200.0, dt=0.1, n_paths=2, seed=0)
        with pytest.raises(NonFiniteSample) as err:
            simulate(spec)
        assert err.value.step > 0
        assert err.value.path in (0, 1)

    def test_full_system_from_init(self, fast_trend_params):
        spec = SimSpec(
            params=fast_trend_params.replace(g=0.05),
            total_time=10.0,
            dt=1e-3,
            n_paths=1,
            seed=9,
            init=FullState(price=0.0, m=0.0, value=0.0),
            subsample_stride=10,
        )
        stats = simulate(spec)
        assert stats.spec.describe()["system"] == "full"
        assert stats.n_retained > 0


class TestMerge:
    def _split_stats(self, small_spec):
        stats = simulate(small_spec)
        resolved = small_spec.resolved()
        n_steps = round(resolved.total_time / resolved.dt)
        burn = round(resolved.burn_in_fraction * n_steps)
        n_ret = (n_steps - burn) // resolved.subsample_stride
        from chiarella.engine import _integrate_path

        parts = []
        for i in range(resolved.n_paths):
            d, m = _integrate_path(resolved, i, n_steps, burn, n_ret)
            parts.append(
                TrajectoryStats.from_samples(
                    resolved, d, m, stats.hist_delta.edges, stats.hist_m.edges, path=i
                )
            )
        return stats, parts

    def test_merge_matches_pooled(self, small_spec):
        stats, parts = self._split_stats(small_spec)
        merged = parts[0].merge(parts[1]).merge(parts[2])
        assert np.array_equal(merged.hist_delta.counts, stats.hist_delta.counts)
        assert merged.paths == stats.paths
        assert merged.moments_delta == pytest.approx(stats.moments_delta, rel=1e-12)

    def test_merge_associative(self, small_spec):
        _, (a, b, c) = self._split_stats(small_spec)
        left = a.merge(b).merge(c)
        right = a.merge(b.merge(c))
        assert np.array_equal(left.hist_delta.counts, right.hist_delta.counts)
        assert left.moments_m == pytest.approx(right.moments_m, rel=1e-12)

    def test_merge_rejects_different_runs(self, small_spec, fast_trend_params):
        from dataclasses import replace

        a = simulate(small_spec)
        b = simulate(replace(small_spec, seed=321))
        with pytest.raises(SupportMismatch):
            a.merge(b)
