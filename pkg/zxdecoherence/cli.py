"""Command-line entry point: sweep, negativity, collapse, validate, oracle-check, emit-plot."""
from __future__ import annotations

import functools
import logging
import os
from typing import Optional

import click
import pandas as pd
import watermark
from dotenv import load_dotenv

from .ensemble import RunConfig, delta0_negativity, load_run, run_sweep
from .lattice import TorusLattice
from .plots import FIGURES, emit_plot
from .scaling import DEFAULT_INIT, collapse, collapsed_curve_frame, curves_from_dataset
from .utils.config_reader import DEFAULT_CONFIG, apply_overrides, load_config
from .utils.data_utils import FIT_REPORT, RUN_INFO, make_run_dir, write_config_copy, write_frame, write_json
from .utils.logging_formatter import configure_logging
from .validation import oracle_comparison, validate

logger = logging.getLogger('cli')

PACKAGES = 'numpy,scipy,pandas,click,mlflow,fluent-logger,PyYAML'


class ValidationFailure(click.ClickException):
    exit_code = 1


class RunIOError(click.ClickException):
    exit_code = 3


def handle_errors(func):
    """Maps I/O failures to exit code 3 and invalid configuration to a usage error."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except OSError as exc:
            path = getattr(exc, 'filename', None)
            raise RunIOError(f'{exc.strerror or exc}: {path}' if path else str(exc))
        except (ValueError, KeyError) as exc:
            raise click.UsageError(str(exc))
    return wrapper


class Settings:
    def __init__(self, config_path: Optional[str], seed: Optional[int], out: Optional[str], threads: Optional[int]):
        self.config_path = config_path or DEFAULT_CONFIG
        self.seed = seed
        self.out = out
        self.threads = threads

    def config(self) -> dict:
        return apply_overrides(load_config(self.config_path), seed=self.seed, out=self.out, threads=self.threads)


def _version_info() -> str:
    return watermark.watermark(packages=PACKAGES)


def _write_run_info(run_dir: str) -> str:
    info = _version_info()
    with open(os.path.join(run_dir, RUN_INFO), 'w', encoding='utf-8') as file:
        file.write(info)
    return info


def _track_sweep(config: dict, run_dir: str, info: str) -> None:
    from . import tracking
    if tracking.tracking_enabled(config):
        tracking.log_sweep(config, run_dir, info)


@click.group()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='YAML run configuration (default: the packaged config.yaml).')
@click.option('--seed', type=int, default=None, help='Master seed; overrides the config file and ZX_SEED.')
@click.option('--out', type=click.Path(file_okay=False), default=None,
              help='Output root for runs; overrides the config file and ZX_RUNS_DIR.')
@click.option('--threads', type=click.IntRange(min=1), default=None, help='Worker processes for trajectories.')
@click.option('-v', '--verbose', is_flag=True, help='Debug logging.')
@click.pass_context
def cli(ctx, config_path, seed, out, threads, verbose):
    """Toric code under stochastic ZX decoherence: trajectory sweeps and their analysis."""
    load_dotenv()
    configure_logging(logging.DEBUG if verbose else logging.INFO)
    ctx.obj = Settings(config_path, seed, out, threads)


@cli.command()
@click.pass_obj
@handle_errors
def sweep(settings: Settings):
    """Sample every (size, r, sample) trajectory of the configuration."""
    config = settings.config()
    run_config = RunConfig.from_dict(config)
    run_dir = make_run_dir(run_config.output, run_config.name)
    write_config_copy(run_config.to_dict(), run_dir)
    info = _write_run_info(run_dir)
    run_sweep(run_config, out_dir=run_dir)
    _track_sweep(config, run_dir, info)
    click.echo(run_dir)


@cli.command()
@click.option('--size', nargs=2, type=int, default=None, help='Lx Ly (default from config, 20 6).')
@click.option('--samples', type=click.IntRange(min=1), default=None)
@click.pass_obj
@handle_errors
def negativity(settings: Settings, size, samples):
    """Negativity sweep, the calibrated r = 1 reference and Delta_0 N_A(r)."""
    config = settings.config()
    section = config.get('negativity') or {}
    lx, ly = size or tuple(section.get('size', (20, 6)))
    config['run'] = {**config['run'], 'sizes': [[lx, ly]],
                     'r_grid': section.get('r_grid', config['run'].get('r_grid')),
                     'samples': samples or section.get('samples', 200)}
    config['observables'] = {'negativity': True, 'chi_I': False, 'chi_II': False, 'logicals': False}
    run_config = RunConfig.from_dict(config)
    run_dir = make_run_dir(run_config.output, f'{run_config.name}_negativity' if run_config.name else None)
    write_config_copy(run_config.to_dict(), run_dir)
    _write_run_info(run_dir)
    dataset = run_sweep(run_config, out_dir=run_dir)
    rows = [{'r': r, 'delta0_N_A': delta0_negativity(dataset, lx, ly, r), 'Lx': lx, 'Ly': ly}
            for r in dataset.r_values(lx, ly)]
    write_frame(pd.DataFrame(rows), os.path.join(run_dir, 'delta0.csv'))
    reference = pd.DataFrame(dataset.reference_negativity[(lx, ly)], columns=['k_A', 'N_A_reference'])
    write_frame(reference, os.path.join(run_dir, 'reference_negativity.csv'))
    click.echo(run_dir)


@cli.command('collapse')
@click.option('--run', 'run_dir', required=True, type=click.Path(file_okay=False),
              help='Run directory written by sweep.')
@click.option('--n-boot', type=click.IntRange(min=0), default=None, help='Bootstrap resamples (0 disables).')
@click.pass_obj
@handle_errors
def collapse_cmd(settings: Settings, run_dir, n_boot):
    """Finite-size scaling collapse of F(r, Lx); writes fit.json and collapse.csv."""
    config = settings.config()
    section = config.get('scaling') or {}
    dataset = load_run(run_dir)
    curves = curves_from_dataset(dataset)
    try:
        fit = collapse(curves, init=section.get('init', DEFAULT_INIT),
                       n_boot=section.get('n_boot', 100) if n_boot is None else n_boot,
                       max_iter=section.get('max_iter', 2000), seed=config['run']['seed'],
                       threads=config['run']['threads'])
    except ValueError as exc:
        raise click.ClickException(f'collapse refused: {exc}')
    report = fit.to_dict()
    write_json(report, os.path.join(run_dir, FIT_REPORT))
    write_frame(collapsed_curve_frame(curves, fit), os.path.join(run_dir, 'collapse.csv'))
    from . import tracking
    if tracking.tracking_enabled(config):
        tracking.log_fit(config, report, run_dir)
    status = '' if fit.converged else ' (not converged)'
    click.echo(f'r_c={fit.r_c:.4f} nu={fit.nu:.3f} zeta={fit.zeta:.3f} quality={fit.quality:.3f}{status}')


@cli.command('validate')
@click.option('--size', nargs=2, type=int, default=(6, 6), show_default=True, help='Lx Ly.')
@click.pass_obj
@handle_errors
def validate_cmd(settings: Settings, size):
    """Symmetry tables and order/disorder parameter equalities; exit 1 on any failed cell."""
    seed = settings.seed if settings.seed is not None else 0
    report = validate(TorusLattice(*size), seed=seed)
    click.echo(report.to_frame().to_string(index=False))
    if settings.out:
        os.makedirs(settings.out, exist_ok=True)
        write_json(report.to_dict(), os.path.join(settings.out, 'validation.json'))
    if not report.passed:
        names = ', '.join(f'{c.table}/{c.name}' for c in report.failures)
        raise ValidationFailure(f'failed cell(s): {names}')


@cli.command('oracle-check')
@click.option('--size', nargs=2, type=int, default=None, help='Lx Ly (default from config).')
@click.option('--r', 'r_values', type=click.FloatRange(0, 1), multiple=True, help='Decoherence probabilities.')
@click.option('--samples', type=click.IntRange(min=1), default=None)
@click.pass_obj
@handle_errors
def oracle_check(settings: Settings, size, r_values, samples):
    """Compare stabilizer C^II and C^I with the percolation predictions per trajectory."""
    config = settings.config()
    section = config.get('oracle_check') or {}
    lx, ly = size or tuple(section.get('size', (8, 8)))
    comparison = oracle_comparison(TorusLattice(lx, ly), list(r_values or section.get('r', (0.3, 0.5, 0.7))),
                                   samples or section.get('samples', 20), config['run']['seed'],
                                   config['run'].get('initial_state', 'pure'))
    run_dir = make_run_dir(config['run']['output'], f'oracle_{lx}x{ly}_seed{config["run"]["seed"]}')
    write_frame(comparison.strings, os.path.join(run_dir, 'oracle_cii.csv'))
    write_frame(comparison.loops, os.path.join(run_dir, 'oracle_ci.csv'))
    click.echo(run_dir)
    if comparison.mismatches:
        raise ValidationFailure(f'{comparison.mismatches} oracle mismatch(es), see {run_dir}')


@cli.command('emit-plot')
@click.argument('figure', type=click.Choice(sorted(FIGURES) + ['all']))
@click.option('--run', 'run_dir', required=True, type=click.Path(file_okay=False))
@click.pass_obj
@handle_errors
def emit_plot_cmd(settings: Settings, figure, run_dir):
    """Write the tidy CSV behind a figure (or all of them) into <run>/plots."""
    dataset = load_run(run_dir)
    out_dir = settings.out or os.path.join(run_dir, 'plots')
    for path in emit_plot(dataset, figure, out_dir):
        click.echo(path)


def main():
    cli(prog_name='zxdecoherence')


if __name__ == '__main__':
    main()
