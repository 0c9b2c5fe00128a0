import os
import json
from datetime import datetime

import yaml
import pandas as pd

TRAJECTORIES = 'trajectories.jsonl'
SUMMARY = 'summary.csv'
CONFIG_COPY = 'config_copy.yaml'
FIT_REPORT = 'fit.json'
RUN_INFO = 'run_info.txt'


def make_run_dir(root: str, name: str = None) -> str:
    """
    Cria o diretório da execução: runs/<nome> ou runs/<timestamp>.

    Args:
        root: diretório base das execuções
        name: nome da execução (opcional, default é o timestamp)

    Retorna:
        caminho do diretório criado
    """
    name = name or datetime.now().strftime('%Y%m%d_%H%M%S')
    path = os.path.join(root, name)
    os.makedirs(path, exist_ok=True)
    return path


def open_trajectory_sink(run_dir: str, header: dict):
    """Abre trajectories.jsonl para escrita e grava o cabeçalho na primeira linha."""
    sink = open(os.path.join(run_dir, TRAJECTORIES), 'w', encoding='utf-8')
    sink.write(json.dumps(header, sort_keys=True) + '\n')
    return sink


def read_trajectories(run_dir: str):
    """
    Lê o cabeçalho e os registros de trajectories.jsonl.

    Retorna:
        header (dict), lista de registros (dict)
    """
    path = os.path.join(run_dir, TRAJECTORIES)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Trajectory file not found: {path}")
    with open(path, 'r', encoding='utf-8') as file:
        first = file.readline()
        header = json.loads(first) if first.strip() else None
        if not isinstance(header, dict) or header.get("kind") != "header":
            raise ValueError(f"{path}: first line is not a run header")
        records = [json.loads(line) for line in file if line.strip()]
    return header, records


def write_summary(dataset, path: str) -> None:
    dataset.summary_frame().to_csv(path, index=False, float_format='%.17g')


def write_config_copy(config: dict, run_dir: str) -> str:
    path = os.path.join(run_dir, CONFIG_COPY)
    with open(path, 'w', encoding='utf-8') as file:
        yaml.safe_dump(config, file, sort_keys=False)
    return path


def write_json(data: dict, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(data, file, indent=2, sort_keys=True)


def write_frame(frame: pd.DataFrame, path: str) -> None:
    if os.path.dirname(path):
        os.makedirs(os.path.dirname(path), exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.17g')
