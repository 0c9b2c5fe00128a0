import os
import logging

import mlflow

logger = logging.getLogger('tracking')

DEFAULT_EXPERIMENT = 'ZX_Decoherence'


def tracking_enabled(config: dict) -> bool:
    """Tracking runs when the config asks for it or MLFLOW_TRACKING_URI is set."""
    section = config.get('tracking') or {}
    return bool(section.get('enabled')) or bool(os.getenv('MLFLOW_TRACKING_URI'))


def _configure(config: dict) -> None:
    section = config.get('tracking') or {}
    tracking_uri = os.getenv('MLFLOW_TRACKING_URI', section.get('uri'))
    if tracking_uri:
        logger.info(f"Setting MLflow tracking URI: {tracking_uri}")
        mlflow.set_tracking_uri(tracking_uri)
    experiment = section.get('experiment', DEFAULT_EXPERIMENT)
    logger.info(f"Setting experiment: {experiment}")
    mlflow.set_experiment(experiment)


def log_sweep(config: dict, run_dir: str, version_info: str = None) -> str:
    """
    Registra os parâmetros de uma varredura e os artefatos do diretório da execução.

    Returns:
        run_id do MLflow
    """
    _configure(config)
    run = config.get('run', {})
    with mlflow.start_run(run_name=run.get('name')) as active:
        mlflow.log_param('sizes', run.get('sizes'))
        mlflow.log_param('r_grid', run.get('r_grid'))
        mlflow.log_param('samples', run.get('samples'))
        mlflow.log_param('seed', run.get('seed'))
        mlflow.log_param('initial_state', run.get('initial_state'))
        mlflow.log_param('threads', run.get('threads'))
        mlflow.log_param('output', run.get('output'))
        mlflow.log_dict(config.get('observables', {}), 'observables.json')
        if version_info:
            mlflow.log_text(version_info, 'run_info.txt')
        for name in ('summary.csv', 'config_copy.yaml'):
            path = os.path.join(run_dir, name)
            if os.path.isfile(path):
                mlflow.log_artifact(path)
        logger.info(f"Sweep logged to MLflow with run_id: {active.info.run_id}")
        return active.info.run_id


def log_fit(config: dict, fit_report: dict, run_dir: str = None) -> str:
    _configure(config)
    with mlflow.start_run(run_name='collapse') as active:
        for key in ('r_c', 'nu', 'zeta', 'quality'):
            mlflow.log_metric(key, fit_report[key])
        for key, value in (fit_report.get('bootstrap_errors') or {}).items():
            mlflow.log_metric(f'{key}_err', value)
        mlflow.log_param('converged', fit_report.get('converged'))
        mlflow.log_param('n_boot', fit_report.get('n_boot'))
        mlflow.log_dict(fit_report, 'fit.json')
        if run_dir:
            path = os.path.join(run_dir, 'collapse.csv')
            if os.path.isfile(path):
                mlflow.log_artifact(path)
        logger.info(f"Fit logged to MLflow with run_id: {active.info.run_id}")
        return active.info.run_id
