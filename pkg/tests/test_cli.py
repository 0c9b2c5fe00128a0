import json
import os

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from zxdecoherence.cli import cli
from zxdecoherence.utils.data_utils import CONFIG_COPY, RUN_INFO, SUMMARY, TRAJECTORIES


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ('ZX_SEED', 'ZX_RUNS_DIR', 'MLFLOW_TRACKING_URI', 'FLUENT_HOST'):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def runner():
    return CliRunner()


def write_config(path, **run):
    config = {
        'run': {'name': 'tiny', 'sizes': [[4, 4]], 'r_grid': [0.0, 0.5], 'samples': 3, **run},
        'observables': {'chi_I': True, 'chi_II': True, 'logicals': True},
    }
    path.write_text(yaml.safe_dump(config))
    return str(path)


def invoke(runner, *args):
    return runner.invoke(cli, list(args), catch_exceptions=False)


class TestHelp:
    """Command group wiring."""

    def test_lists_subcommands(self, runner):
        result = invoke(runner, '--help')
        assert result.exit_code == 0
        for name in ('sweep', 'negativity', 'collapse', 'validate', 'oracle-check', 'emit-plot'):
            assert name in result.output
        for flag in ('--config', '--seed', '--out', '--threads'):
            assert flag in result.output


class TestSweep:
    """Sweep runs, output files and seed precedence."""

    def test_writes_run_directory(self, runner, tmp_path):
        config = write_config(tmp_path / 'config.yaml')
        result = invoke(runner, '--config', config, '--seed', '5', '--out', str(tmp_path / 'runs'), 'sweep')
        assert result.exit_code == 0, result.output
        run_dir = tmp_path / 'runs' / 'tiny'
        for name in (TRAJECTORIES, SUMMARY, CONFIG_COPY, RUN_INFO):
            assert (run_dir / name).is_file()
        header = json.loads((run_dir / TRAJECTORIES).read_text().splitlines()[0])
        assert header['config']['run']['seed'] == 5
        assert yaml.safe_load((run_dir / CONFIG_COPY).read_text())['run']['seed'] == 5

    def test_seed_from_environment(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv('ZX_SEED', '77')
        config = write_config(tmp_path / 'config.yaml')
        assert invoke(runner, '--config', config, '--out', str(tmp_path), 'sweep').exit_code == 0
        header = json.loads((tmp_path / 'tiny' / TRAJECTORIES).read_text().splitlines()[0])
        assert header['config']['run']['seed'] == 77

    def test_config_seed_beats_environment(self, runner, tmp_path, monkeypatch):
        monkeypatch.setenv('ZX_SEED', '77')
        config = write_config(tmp_path / 'config.yaml', seed=9)
        assert invoke(runner, '--config', config, '--out', str(tmp_path), 'sweep').exit_code == 0
        header = json.loads((tmp_path / 'tiny' / TRAJECTORIES).read_text().splitlines()[0])
        assert header['config']['run']['seed'] == 9

    def test_invalid_config_is_a_usage_error(self, runner, tmp_path):
        config = write_config(tmp_path / 'config.yaml', samples=0)
        result = invoke(runner, '--config', config, '--out', str(tmp_path), 'sweep')
        assert result.exit_code == 2
        assert 'run.samples' in result.output

    def test_missing_config_is_an_io_error(self, runner, tmp_path):
        result = invoke(runner, '--config', str(tmp_path / 'absent.yaml'), 'sweep')
        assert result.exit_code == 3


class TestAnalysis:
    """Commands reading a finished run: emit-plot and collapse."""

    @pytest.fixture
    def run_dir(self, runner, tmp_path):
        config = write_config(tmp_path / 'config.yaml')
        invoke(runner, '--config', config, '--seed', '1', '--out', str(tmp_path / 'runs'), 'sweep')
        return str(tmp_path / 'runs' / 'tiny')

    def test_emit_plot(self, runner, run_dir):
        result = invoke(runner, 'emit-plot', 'fig3b', '--run', run_dir)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(os.path.join(run_dir, 'plots', 'fig3b.csv'))
        assert frame.columns.tolist() == ['r', 'mean_chiII', 'stderr', 'Lx', 'Ly']
        assert frame['r'].tolist() == [0.0, 0.5]

    def test_emit_all_skips_missing_observables(self, runner, run_dir):
        result = invoke(runner, 'emit-plot', 'all', '--run', run_dir)
        assert result.exit_code == 0
        written = set(os.listdir(os.path.join(run_dir, 'plots')))
        assert 'fig3a.csv' in written
        assert 'fig2a.csv' not in written

    def test_emit_plot_without_data(self, runner, run_dir):
        assert invoke(runner, 'emit-plot', 'fig2c', '--run', run_dir).exit_code == 2

    def test_unknown_figure(self, runner, run_dir):
        assert invoke(runner, 'emit-plot', 'fig9', '--run', run_dir).exit_code == 2

    def test_collapse_refuses_single_size(self, runner, run_dir):
        result = invoke(runner, 'collapse', '--run', run_dir, '--n-boot', '0')
        assert result.exit_code == 1
        assert 'collapse refused' in result.output

    def test_collapse_missing_run(self, runner, tmp_path):
        assert invoke(runner, 'collapse', '--run', str(tmp_path / 'nothing')).exit_code == 3


class TestChecks:
    """Exact checks: validate and oracle-check."""

    def test_validate(self, runner, tmp_path):
        result = invoke(runner, '--out', str(tmp_path), 'validate')
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / 'validation.json').read_text())
        assert report['passed'] is True

    def test_oracle_check(self, runner, tmp_path):
        result = invoke(runner, '--seed', '3', '--out', str(tmp_path), 'oracle-check',
                        '--size', '5', '5', '--r', '0.4', '--samples', '2')
        assert result.exit_code == 0, result.output
        out = tmp_path / 'oracle_5x5_seed3'
        assert (out / 'oracle_cii.csv').is_file()
        assert (out / 'oracle_ci.csv').is_file()


@pytest.mark.slow
def test_negativity_command(runner, tmp_path):
    result = invoke(runner, '--out', str(tmp_path), '--seed', '4', 'negativity', '--size', '8', '6',
                    '--samples', '2')
    assert result.exit_code == 0, result.output
    run_dir = next(line for line in result.output.splitlines() if os.path.isdir(line))
    delta0 = pd.read_csv(os.path.join(run_dir, 'delta0.csv'))
    assert delta0.loc[delta0['r'] == 1.0, 'delta0_N_A'].item() == 0.0
    reference = pd.read_csv(os.path.join(run_dir, 'reference_negativity.csv'))
    assert reference['k_A'].tolist() == [1, 2, 3]
