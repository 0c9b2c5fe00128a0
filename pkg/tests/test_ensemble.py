import copy
import json
import os

import numpy as np
import pytest

from zxdecoherence.ensemble import (EnsembleDataset, RunConfig, RunningStats, delta0_negativity, f_curves,
                                    load_run, parse_r_grid, rescaled_variance, rescaled_variance_from_samples,
                                    run_sweep, trajectory_rng)
from zxdecoherence.utils.config_reader import apply_overrides
from zxdecoherence.utils.data_utils import SUMMARY, TRAJECTORIES

BASE = {
    'run': {'sizes': [[4, 4]], 'r_grid': [0.0, 0.5], 'samples': 3, 'seed': 42},
    'observables': {'chi_I': True, 'chi_II': True, 'logicals': True},
}


def config_with(run=None, observables=None) -> dict:
    config = copy.deepcopy(BASE)
    config['run'].update(run or {})
    if observables is not None:
        config['observables'] = observables
    return config


class TestRunningStats:
    """Streaming mean and variance."""

    def test_matches_numpy(self, rng):
        values = rng.normal(size=200)
        st = RunningStats().extend(values)
        assert st.mean == pytest.approx(values.mean())
        assert st.var == pytest.approx(values.var(ddof=1))
        assert st.stderr == pytest.approx(values.std(ddof=1) / np.sqrt(200))

    def test_merge_equals_single_pass(self, rng):
        values = rng.exponential(size=101)
        merged = RunningStats().extend(values[:40]).merge(RunningStats().extend(values[40:]))
        whole = RunningStats().extend(values)
        assert merged.n == whole.n
        assert merged.mean == pytest.approx(whole.mean)
        assert merged.var == pytest.approx(whole.var)

    def test_single_sample_has_no_variance(self):
        assert RunningStats().extend([3.0]).var == 0.0


class TestRunConfig:
    """Run configuration parsing and validation."""

    def test_range_grid(self):
        grid = parse_r_grid({'start': 0.0, 'stop': 1.0, 'step': 0.05})
        assert len(grid) == 21
        assert grid[0] == 0.0 and grid[-1] == 1.0
        assert grid[10] == 0.5

    def test_roundtrip(self):
        config = RunConfig.from_dict(config_with())
        assert RunConfig.from_dict(config.to_dict()) == config

    def test_square_size_shorthand(self):
        assert RunConfig.from_dict(config_with({'sizes': [6]})).sizes == ((6, 6),)

    @pytest.mark.parametrize('run, observables', [
        ({'samples': 0}, None),
        ({'r_grid': [0.2, 1.3]}, None),
        ({'sizes': [[2, 6]]}, None),
        ({'sizes': [[6, 3]]}, None),
        ({'initial_state': 'thermal'}, None),
        ({'colour': 'red'}, None),
        ({'seed': None}, None),
        (None, {'entropy': True}),
        ({'sizes': [[3, 6]]}, {'negativity': True, 'chi_II': False}),
    ])
    def test_invalid(self, run, observables):
        config = config_with(run, observables)
        with pytest.raises(ValueError):
            RunConfig.from_dict(config)

    def test_missing_run_section(self):
        with pytest.raises(ValueError):
            RunConfig.from_dict({'observables': {}})


class TestSeeds:
    """Per-trajectory random streams."""

    def test_streams_depend_on_coordinates(self):
        a = trajectory_rng(1, 8, 8, 0, 0).random(4)
        assert np.array_equal(a, trajectory_rng(1, 8, 8, 0, 0).random(4))
        assert not np.array_equal(a, trajectory_rng(1, 8, 8, 0, 1).random(4))
        assert not np.array_equal(a, trajectory_rng(2, 8, 8, 0, 0).random(4))


class TestSweep:
    """Trajectory sweeps, run files and reloading."""

    def test_toric_code_at_zero_decoherence(self):
        config = RunConfig.from_dict(config_with({'r_grid': [0.0], 'samples': 1}))
        dataset = run_sweep(config)
        assert dataset.observable(4, 4, 0.0, 'chi_I').mean == 1.0
        assert dataset.observable(4, 4, 0.0, 'chi_II').mean == 0.0
        assert dataset.observable(4, 4, 0.0, 'p_lo').mean == 0.0

    def test_unknown_point(self):
        dataset = run_sweep(RunConfig.from_dict(config_with({'r_grid': [0.0], 'samples': 1})))
        with pytest.raises(KeyError):
            dataset.observable(4, 4, 0.3, 'chi_I')
        with pytest.raises(KeyError):
            dataset.observable(4, 4, 0.0, 'N_A_k1')

    @pytest.mark.parametrize('threads', [4, 16])
    def test_trajectory_file_independent_of_threads(self, tmp_path, threads):
        """Same config and seed give byte-identical run files for any thread count."""
        files = {}
        for t in (1, threads):
            out = tmp_path / f'threads{t}'
            out.mkdir()
            config = RunConfig.from_dict(apply_overrides(
                config_with({'sizes': [[4, 4], [5, 4]], 'samples': 4}), out=str(out), threads=t))
            run_sweep(config, out_dir=str(out))
            files[t] = ((out / TRAJECTORIES).read_bytes(), (out / SUMMARY).read_bytes())
        assert files[1] == files[threads]

    def test_header_leaves_out_execution_settings(self, tmp_path):
        config = RunConfig.from_dict(config_with({'threads': 3, 'output': str(tmp_path)}))
        run_sweep(config, out_dir=str(tmp_path))
        header = json.loads((tmp_path / TRAJECTORIES).read_text().splitlines()[0])
        assert not {'threads', 'output'} & set(header['config']['run'])
        assert config.to_dict()['run']['threads'] == 3

    def test_trajectory_file_layout(self, tmp_path):
        config = RunConfig.from_dict(config_with())
        run_sweep(config, out_dir=str(tmp_path))
        lines = (tmp_path / TRAJECTORIES).read_text().splitlines()
        header = json.loads(lines[0])
        assert header['kind'] == 'header'
        assert header['config']['run']['seed'] == 42
        assert len(lines) == 1 + 2 * 3
        record = json.loads(lines[1])
        assert {'Lx', 'Ly', 'r', 'r_index', 'sample', 'k', 'pattern', 'observables'} <= set(record)

    def test_load_run_restores_statistics(self, tmp_path):
        config = RunConfig.from_dict(config_with())
        dataset = run_sweep(config, out_dir=str(tmp_path))
        loaded = load_run(str(tmp_path))
        assert loaded.sizes == dataset.sizes
        for key, point in dataset.stats.items():
            for name, st in point.items():
                assert loaded.stats[key][name].mean == pytest.approx(st.mean)
                assert loaded.stats[key][name].n == st.n

    def test_load_run_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_run(str(tmp_path))

    def test_load_run_empty(self, tmp_path):
        config = RunConfig.from_dict(config_with())
        run_sweep(config, out_dir=str(tmp_path))
        path = tmp_path / TRAJECTORIES
        path.write_text(path.read_text().splitlines()[0] + '\n')
        with pytest.raises(ValueError):
            load_run(str(tmp_path))


class TestRescaledVariance:
    """F from chi^II counts and its error bar."""

    def test_constant_counts(self):
        assert rescaled_variance_from_samples([5.0] * 10, 8, 8) == (0.0, 0.0)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            rescaled_variance_from_samples([1.0], 8, 8)

    def test_bernoulli_counts(self, rng):
        lx, ly, p = 8, 8, 0.3
        norm = lx * (ly - 3)
        counts = norm * (rng.random(20000) < p)
        f, df = rescaled_variance_from_samples(counts, lx, ly)
        assert f == pytest.approx(norm * p * (1 - p), rel=0.05)
        assert 0 < df < 0.05 * f

    def test_moment_fallback(self):
        dataset = EnsembleDataset()
        for value in (0.0, 2.0, 4.0):
            dataset.add({'Lx': 4, 'Ly': 4, 'r': 0.5, 'observables': {'chi_II_count': value}})
        dataset.chi_II_counts.clear()
        f, df = rescaled_variance(dataset, 4, 4, 0.5)
        assert f == pytest.approx(4.0 / 4)
        assert df > 0

    def test_curves(self):
        config = RunConfig.from_dict(config_with({'r_grid': [0.3, 0.5], 'samples': 4}))
        curves = f_curves(run_sweep(config))
        assert list(curves) == [(4, 4)]
        assert curves[(4, 4)].columns.tolist() == ['r', 'F', 'dF']
        assert curves[(4, 4)]['r'].tolist() == [0.3, 0.5]


class TestNegativityBaseline:
    """Calibrated r = 1 negativity and Delta_0 N_A."""

    @pytest.fixture(scope='class')
    def dataset(self):
        config = RunConfig.from_dict(config_with(
            {'sizes': [[8, 6]], 'r_grid': [0.0, 1.0], 'samples': 2},
            {'negativity': True, 'chi_I': False, 'chi_II': False, 'logicals': False}))
        return run_sweep(config)

    def test_reference_profile(self, dataset):
        reference = dataset.reference_negativity[(8, 6)]
        assert [k for k, _ in reference] == [1, 2, 3]
        assert np.diff([n for _, n in reference]).tolist() == [3.0, 3.0]

    def test_delta0_vanishes_at_full_decoherence(self, dataset):
        assert delta0_negativity(dataset, 8, 6, 1.0) == 0.0

    def test_delta0_positive_for_toric_code(self, dataset):
        assert delta0_negativity(dataset, 8, 6, 0.0) > 0

    def test_delta0_needs_reference(self):
        with pytest.raises(ValueError):
            delta0_negativity(EnsembleDataset(), 8, 6, 0.0)


@pytest.mark.slow
def test_negativity_plateau(tmp_path):
    config = RunConfig.from_dict(config_with(
        {'sizes': [[20, 6]], 'r_grid': {'start': 0.5, 'stop': 1.0, 'step': 0.05}, 'samples': 200, 'threads': 4},
        {'negativity': True, 'chi_I': False, 'chi_II': False, 'logicals': False}))
    dataset = run_sweep(config, out_dir=str(tmp_path))
    reference = [n for _, n in dataset.reference_negativity[(20, 6)]]
    assert np.diff(reference).tolist() == [3.0] * (len(reference) - 1)
    for r in dataset.r_values(20, 6):
        assert delta0_negativity(dataset, 20, 6, r) < 1e-2
    assert os.path.isfile(tmp_path / SUMMARY)


@pytest.mark.slow
class TestEnsembleShapes:
    """Ensemble-level trends of the logical-failure probability and the negativity."""

    def test_logical_failure_rises_through_threshold(self):
        r_grid = [0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7]
        config = RunConfig.from_dict(config_with(
            {'sizes': [[12, 12]], 'r_grid': r_grid, 'samples': 200, 'threads': 4},
            {'chi_I': False, 'chi_II': False, 'logicals': True}))
        dataset = run_sweep(config)
        p_lo = {r: dataset.observable(12, 12, r, 'p_lo') for r in r_grid}
        assert p_lo[0.3].mean < 0.05
        assert p_lo[0.7].mean > 0.95
        peak = max(r_grid, key=lambda r: p_lo[r].var)
        assert 0.45 <= peak <= 0.55

    def test_negativity_decreases_with_r(self):
        r_grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
        config = RunConfig.from_dict(config_with(
            {'sizes': [[8, 6]], 'r_grid': r_grid, 'samples': 60, 'threads': 4},
            {'negativity': True, 'chi_I': False, 'chi_II': False, 'logicals': False}))
        dataset = run_sweep(config)
        for k in (1, 2, 3):
            points = [dataset.observable(8, 6, r, f'N_A_k{k}') for r in r_grid]
            for before, after in zip(points, points[1:]):
                assert after.mean <= before.mean + 3 * np.hypot(before.stderr, after.stderr)
            assert points[-1].var == 0.0
            assert points[-1].mean < points[0].mean
