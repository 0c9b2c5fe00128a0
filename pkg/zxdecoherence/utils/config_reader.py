import os
import copy

import yaml

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config.yaml')
DEFAULT_SEED = 1
DEFAULT_RUNS_DIR = 'runs'
DEFAULT_THREADS = 1


def load_config(config_path=DEFAULT_CONFIG):
    """Carrega o arquivo de configuração YAML."""
    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Config file not found: {config_path}")

    with open(config_path, 'r') as file:
        config = yaml.safe_load(file)
    if not isinstance(config, dict):
        raise ValueError(f"Config file {config_path} is not a mapping")
    return config


def resolve(cli_value, config_value, env_name, default, cast=str):
    """Flag da CLI > arquivo de configuração > variável de ambiente > default."""
    if cli_value is not None:
        return cast(cli_value)
    if config_value is not None:
        return cast(config_value)
    if env_name and os.environ.get(env_name):
        try:
            return cast(os.environ[env_name])
        except ValueError:
            raise ValueError(f"Environment variable {env_name}={os.environ[env_name]!r} is not valid")
    return default


def apply_overrides(config: dict, seed=None, out=None, threads=None) -> dict:
    """
    Aplica seed, diretório de saída e threads à seção 'run'.

    Args:
        config: configuração carregada
        seed, out, threads: valores vindos da CLI (None quando ausentes)

    Returns:
        cópia da configuração com os valores resolvidos
    """
    config = copy.deepcopy(config)
    run = config.setdefault('run', {}) or {}
    config['run'] = run
    run['seed'] = resolve(seed, run.get('seed'), 'ZX_SEED', DEFAULT_SEED, int)
    run['output'] = resolve(out, run.get('output'), 'ZX_RUNS_DIR', DEFAULT_RUNS_DIR)
    run['threads'] = resolve(threads, run.get('threads'), None, DEFAULT_THREADS, int)
    return config
