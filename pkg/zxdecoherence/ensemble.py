"""Trajectory sampling over an (Lx, Ly, r) grid and the ensemble statistics built on it."""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .channels import apply_maximal, apply_stochastic_layer
from .lattice import TorusLattice, build_initial_state
from .observables import ObservableToggles, evaluate, negativity_profile
from .stabilizer import MixedStabilizerState
from .utils.data_utils import open_trajectory_sink, read_trajectories, write_summary

logger = logging.getLogger('ensemble-runner')

INITIAL_STATES = ('pure', 'mixed')
RUN_KEYS = ('name', 'sizes', 'r_grid', 'samples', 'seed', 'initial_state', 'output', 'threads')
# execution-only settings; never part of the trajectory file
RUN_ONLY_KEYS = ('output', 'threads')
SEED_SCHEME = 'SeedSequence(master_seed, spawn_key=(Lx, Ly, r_index, sample)) -> default_rng'
FORMAT_VERSION = 1

PointKey = Tuple[int, int, float]


def _fail(msg: str):
    logger.error(msg)
    raise ValueError(msg)


def parse_r_grid(value) -> Tuple[float, ...]:
    """A list of probabilities or a {start, stop, step} mapping (stop inclusive)."""
    if isinstance(value, dict):
        missing = {'start', 'stop', 'step'} - set(value)
        if missing:
            _fail(f"run.r_grid: missing key(s) {sorted(missing)}")
        start, stop, step = float(value['start']), float(value['stop']), float(value['step'])
        if step <= 0 or stop < start:
            _fail(f'run.r_grid: invalid range {value}')
        count = int(round((stop - start) / step)) + 1
        grid = np.round(np.linspace(start, start + step * (count - 1), count), 10)
    else:
        grid = np.asarray(list(value), dtype=float)
    if grid.size == 0:
        _fail('run.r_grid: empty grid')
    if np.any(grid < 0) or np.any(grid > 1):
        _fail(f'run.r_grid: values must lie in [0, 1], got {grid.tolist()}')
    return tuple(float(r) for r in grid)


def parse_sizes(value) -> Tuple[Tuple[int, int], ...]:
    sizes = []
    for item in value:
        if isinstance(item, int):
            item = (item, item)
        if len(item) != 2:
            _fail(f'run.sizes: expected [Lx, Ly] pairs, got {item}')
        lx, ly = int(item[0]), int(item[1])
        if lx < 3 or ly < 3:
            _fail(f'run.sizes: lattice ({lx}, {ly}) needs Lx, Ly >= 3')
        sizes.append((lx, ly))
    if not sizes:
        _fail('run.sizes: no lattice sizes given')
    return tuple(sizes)


def parse_toggles(value: Optional[dict]) -> ObservableToggles:
    value = value or {}
    known = {f.name for f in fields(ObservableToggles)}
    for key in value:
        if key not in known:
            _fail(f'observables.{key}: unknown observable (known: {sorted(known)})')
    return ObservableToggles(**{k: bool(v) for k, v in value.items()})


@dataclass(frozen=True)
class RunConfig:
    sizes: Tuple[Tuple[int, int], ...]
    r_grid: Tuple[float, ...]
    samples: int
    master_seed: int
    observables: ObservableToggles = ObservableToggles()
    initial_state: str = 'pure'
    output: str = 'runs'
    name: Optional[str] = None
    threads: int = 1

    @classmethod
    def from_dict(cls, config: dict) -> 'RunConfig':
        """Build from the parsed YAML (sections ``run`` and ``observables``)."""
        if 'run' not in config:
            _fail("Invalid configuration: section 'run' missing")
        run = config['run'] or {}
        for key in run:
            if key not in RUN_KEYS:
                _fail(f'run.{key}: unknown key')
        for key in ('sizes', 'r_grid', 'samples', 'seed'):
            if run.get(key) is None:
                _fail(f'run.{key}: required')
        samples = int(run['samples'])
        if samples < 1:
            _fail(f'run.samples: must be >= 1, got {samples}')
        threads = int(run.get('threads') or 1)
        if threads < 1:
            _fail(f'run.threads: must be >= 1, got {threads}')
        initial_state = run.get('initial_state', 'pure')
        if initial_state not in INITIAL_STATES:
            _fail(f'run.initial_state: expected one of {INITIAL_STATES}, got {initial_state!r}')
        sizes = parse_sizes(run['sizes'])
        toggles = parse_toggles(config.get('observables'))
        for lx, ly in sizes:
            if toggles.chi_II and ly < 4:
                _fail(f'run.sizes: chi_II needs Ly >= 4, got ({lx}, {ly})')
            if toggles.negativity and (lx < 4 or ly < 4):
                _fail(f'run.sizes: negativity needs Lx, Ly >= 4, got ({lx}, {ly})')
        return cls(sizes=sizes, r_grid=parse_r_grid(run['r_grid']), samples=samples,
                   master_seed=int(run['seed']), observables=toggles, initial_state=initial_state,
                   output=str(run.get('output') or 'runs'), name=run.get('name'), threads=threads)

    def to_dict(self) -> dict:
        return {
            'run': {
                'name': self.name,
                'sizes': [list(s) for s in self.sizes],
                'r_grid': list(self.r_grid),
                'samples': self.samples,
                'seed': self.master_seed,
                'initial_state': self.initial_state,
                'output': self.output,
                'threads': self.threads,
            },
            'observables': asdict(self.observables),
        }

    def header_record(self) -> dict:
        """The config as stored in run headers, without ``RUN_ONLY_KEYS``."""
        data = self.to_dict()
        for key in RUN_ONLY_KEYS:
            data['run'].pop(key)
        return data


def trajectory_rng(master_seed: int, Lx: int, Ly: int, r_index: int, sample: int) -> np.random.Generator:
    """Independent stream per trajectory, a pure function of its grid coordinates."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(Lx, Ly, r_index, sample))
    return np.random.default_rng(seq)


class TrajectoryTask(NamedTuple):
    Lx: int
    Ly: int
    r: float
    r_index: int
    sample: int
    master_seed: int
    initial_state: str
    toggles: ObservableToggles


_TEMPLATES: Dict[Tuple[int, int, str], MixedStabilizerState] = {}


def initial_state_template(Lx: int, Ly: int, variant: str) -> MixedStabilizerState:
    """Cached (per process) initial state; callers get a copy."""
    key = (Lx, Ly, variant)
    if key not in _TEMPLATES:
        if variant not in INITIAL_STATES:
            _fail(f'unknown initial state {variant!r}')
        _TEMPLATES[key] = build_initial_state(TorusLattice(Lx, Ly), with_logicals=variant == 'pure')
    return _TEMPLATES[key].copy()


def run_trajectory(task: TrajectoryTask) -> dict:
    """One stochastic layer on a fresh initial state and its observables."""
    lattice = TorusLattice(task.Lx, task.Ly)
    state = initial_state_template(task.Lx, task.Ly, task.initial_state)
    rng = trajectory_rng(task.master_seed, task.Lx, task.Ly, task.r_index, task.sample)
    pattern = apply_stochastic_layer(state, lattice, task.r, rng)
    values = evaluate(state, lattice, task.toggles).flat()
    values['pattern_size'] = float(len(pattern))
    return {
        'Lx': task.Lx, 'Ly': task.Ly, 'r': task.r, 'r_index': task.r_index, 'sample': task.sample,
        'k': state.k, 'pattern': pattern.to_record(), 'observables': values,
    }


class RunningStats:
    """Streaming mean and variance (Welford), mergeable (Chan et al.)."""

    __slots__ = ('n', 'mean', 'm2')

    def __init__(self, n: int = 0, mean: float = 0.0, m2: float = 0.0):
        self.n = n
        self.mean = mean
        self.m2 = m2

    def push(self, value: float) -> None:
        self.n += 1
        delta = value - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (value - self.mean)

    def extend(self, values: Iterable[float]) -> 'RunningStats':
        for value in values:
            self.push(float(value))
        return self

    def merge(self, other: 'RunningStats') -> 'RunningStats':
        n = self.n + other.n
        if n == 0:
            return RunningStats()
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return RunningStats(n, mean, m2)

    @property
    def var(self) -> float:
        """Unbiased sample variance; 0 below two samples."""
        return max(self.m2 / (self.n - 1), 0.0) if self.n > 1 else 0.0

    @property
    def stderr(self) -> float:
        return float(np.sqrt(self.var / self.n)) if self.n else 0.0

    def __repr__(self) -> str:
        return f'RunningStats(n={self.n}, mean={self.mean}, var={self.var})'


@dataclass
class EnsembleDataset:
    """Per-point statistics of every observable plus the per-trajectory chi^II counts."""

    stats: Dict[PointKey, Dict[str, RunningStats]] = field(default_factory=dict)
    chi_II_counts: Dict[PointKey, List[float]] = field(default_factory=dict)
    reference_negativity: Dict[Tuple[int, int], List[Tuple[int, float]]] = field(default_factory=dict)
    header: dict = field(default_factory=dict)

    def add(self, record: dict) -> None:
        key = (int(record['Lx']), int(record['Ly']), float(record['r']))
        point = self.stats.setdefault(key, {})
        for name, value in record['observables'].items():
            point.setdefault(name, RunningStats()).push(float(value))
        if 'chi_II_count' in record['observables']:
            self.chi_II_counts.setdefault(key, []).append(float(record['observables']['chi_II_count']))

    def __len__(self) -> int:
        return len(self.stats)

    @property
    def sizes(self) -> List[Tuple[int, int]]:
        return sorted({(lx, ly) for lx, ly, _ in self.stats})

    def r_values(self, Lx: int, Ly: int) -> List[float]:
        return sorted(r for lx, ly, r in self.stats if (lx, ly) == (Lx, Ly))

    def observable(self, Lx: int, Ly: int, r: float, name: str) -> RunningStats:
        point = self.stats.get((Lx, Ly, float(r)))
        if point is None:
            raise KeyError(f'no data for (Lx={Lx}, Ly={Ly}, r={r})')
        if name not in point:
            raise KeyError(f'observable {name!r} not sampled at (Lx={Lx}, Ly={Ly}, r={r})')
        return point[name]

    def summary_frame(self) -> pd.DataFrame:
        rows = []
        for (lx, ly, r), point in sorted(self.stats.items()):
            for name, st in sorted(point.items()):
                rows.append({'Lx': lx, 'Ly': ly, 'r': r, 'observable': name, 'mean': st.mean,
                             'var': st.var, 'stderr': st.stderr, 'n': st.n})
        return pd.DataFrame(rows, columns=['Lx', 'Ly', 'r', 'observable', 'mean', 'var', 'stderr', 'n'])


def reference_negativity(Lx: int, Ly: int, variant: str = 'pure') -> List[Tuple[int, float]]:
    """N_A(k_A) of the maximally decohered state, the baseline of Delta_0 N_A."""
    lattice = TorusLattice(Lx, Ly)
    state = initial_state_template(Lx, Ly, variant)
    apply_maximal(state, lattice)
    profile = negativity_profile(state, lattice)
    logger.info(f'reference negativity for {Lx}x{Ly}: {profile}',
                extra={'event': 'negativity_reference', 'Lx': Lx, 'Ly': Ly})
    return profile


def delta0_negativity(dataset: EnsembleDataset, Lx: int, Ly: int, r: float) -> float:
    """sum over k_A of (E[N_A(k_A, r)] - N_A^f(k_A))^2."""
    reference = dataset.reference_negativity.get((Lx, Ly))
    if not reference:
        _fail(f'no reference negativity recorded for {Lx}x{Ly}')
    total = 0.0
    for k, n_ref in reference:
        try:
            mean = dataset.observable(Lx, Ly, r, f'N_A_k{k}').mean
        except KeyError as exc:
            _fail(f'negativity for k_A={k} missing: {exc}')
        total += (mean - n_ref) ** 2
    return total


def rescaled_variance_from_samples(counts: Sequence[float], Lx: int, Ly: int) -> Tuple[float, float]:
    """F = var(Lx(Ly-3) chi^II) / (Lx(Ly-3)) and its standard error from the fourth moment."""
    counts = np.asarray(counts, dtype=float)
    n = counts.size
    if n < 2:
        _fail(f'rescaled variance needs at least 2 samples, got {n}')
    norm = Lx * (Ly - 3)
    var = float(counts.var(ddof=1))
    centred = counts - counts.mean()
    m4 = float(np.mean(centred ** 4))
    var_of_var = max((m4 - (n - 3) / (n - 1) * var ** 2) / n, 0.0)
    return var / norm, float(np.sqrt(var_of_var)) / norm


def rescaled_variance(dataset: EnsembleDataset, Lx: int, Ly: int, r: float) -> Tuple[float, float]:
    counts = dataset.chi_II_counts.get((Lx, Ly, float(r)))
    if counts is not None:
        return rescaled_variance_from_samples(counts, Lx, Ly)
    st = dataset.observable(Lx, Ly, r, 'chi_II_count')
    if st.n < 2:
        _fail(f'rescaled variance needs at least 2 samples, got {st.n}')
    norm = Lx * (Ly - 3)
    # normal approximation when only moments survive
    return st.var / norm, st.var * float(np.sqrt(2.0 / (st.n - 1))) / norm


def f_curves(dataset: EnsembleDataset) -> Dict[Tuple[int, int], pd.DataFrame]:
    """F(r) with its error per lattice size, as frames with columns r, F, dF."""
    curves = {}
    for lx, ly in dataset.sizes:
        rows = []
        for r in dataset.r_values(lx, ly):
            try:
                f, df = rescaled_variance(dataset, lx, ly, r)
            except KeyError:
                continue
            rows.append({'r': r, 'F': f, 'dF': df})
        if rows:
            curves[(lx, ly)] = pd.DataFrame(rows)
    return curves


def build_tasks(config: RunConfig) -> List[TrajectoryTask]:
    return [TrajectoryTask(lx, ly, r, i, s, config.master_seed, config.initial_state, config.observables)
            for lx, ly in config.sizes
            for i, r in enumerate(config.r_grid)
            for s in range(config.samples)]


def _execute(tasks: List[TrajectoryTask], threads: int) -> Iterator[dict]:
    if threads <= 1:
        yield from map(run_trajectory, tasks)
        return
    chunksize = max(1, len(tasks) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(run_trajectory, tasks, chunksize=chunksize)


def header_for(config: RunConfig, references: Dict[Tuple[int, int], List[Tuple[int, float]]]) -> dict:
    """Deterministic header of the trajectory file."""
    return {
        'kind': 'header',
        'format_version': FORMAT_VERSION,
        'config': config.header_record(),
        'seed_scheme': SEED_SCHEME,
        'reference_negativity': {f'{lx}x{ly}': [[k, n] for k, n in ref]
                                 for (lx, ly), ref in sorted(references.items())},
    }


def run_sweep(config: RunConfig, threads: Optional[int] = None,
              out_dir: Optional[str] = None) -> EnsembleDataset:
    """Sample every (size, r, sample) trajectory; optionally stream them to ``out_dir``.

    Records are consumed in task order, so the output does not depend on ``threads``.
    """
    threads = config.threads if threads is None else threads
    references = {}
    if config.observables.negativity:
        references = {(lx, ly): reference_negativity(lx, ly, config.initial_state) for lx, ly in config.sizes}
    dataset = EnsembleDataset(reference_negativity=references, header=header_for(config, references))
    tasks = build_tasks(config)
    logger.info(f'Starting sweep: {len(config.sizes)} sizes, {len(config.r_grid)} r values, '
                f'{config.samples} samples, {threads} worker(s)',
                extra={'event': 'sweep_start', 'trajectories': len(tasks), 'seed': config.master_seed})
    time_start = datetime.now()
    sink = None
    if out_dir is not None:
        sink = open_trajectory_sink(out_dir, dataset.header)
    try:
        for done, record in enumerate(_execute(tasks, threads), start=1):
            dataset.add(record)
            if sink is not None:
                sink.write(json.dumps(record, sort_keys=True) + '\n')
            if done % max(1, len(tasks) // 10) == 0:
                logger.debug(f'{done}/{len(tasks)} trajectories done')
    finally:
        if sink is not None:
            sink.close()
    logger.info(f'Sweep completed in {datetime.now() - time_start}',
                extra={'event': 'sweep_done', 'points': len(dataset)})
    if out_dir is not None:
        write_summary(dataset, os.path.join(out_dir, 'summary.csv'))
    return dataset


def dataset_from_records(header: dict, records: Iterable[dict]) -> EnsembleDataset:
    references = {}
    for key, ref in (header.get('reference_negativity') or {}).items():
        lx, ly = (int(p) for p in key.split('x'))
        references[(lx, ly)] = [(int(k), float(n)) for k, n in ref]
    dataset = EnsembleDataset(reference_negativity=references, header=header)
    for record in records:
        dataset.add(record)
    return dataset


def load_run(run_dir: str) -> EnsembleDataset:
    """Rebuild the dataset of a finished run from its trajectory file."""
    header, records = read_trajectories(run_dir)
    dataset = dataset_from_records(header, records)
    if not len(dataset):
        _fail(f'run directory {run_dir} holds no trajectories')
    return dataset
