"""Tidy per-figure tables from an ensemble dataset; plotting itself is left to the reader's tool."""
from __future__ import annotations

import logging
import os
from typing import Callable, Dict, List

import pandas as pd

from .ensemble import EnsembleDataset, delta0_negativity, rescaled_variance

logger = logging.getLogger('plots')


def _observable_rows(dataset: EnsembleDataset, name: str, mean_col: str, var_col: str = None) -> pd.DataFrame:
    rows = []
    for (lx, ly, r), point in sorted(dataset.stats.items()):
        if name not in point:
            continue
        st = point[name]
        row = {'r': r, mean_col: st.mean, 'stderr': st.stderr, 'Lx': lx, 'Ly': ly}
        if var_col:
            row[var_col] = st.var
        rows.append(row)
    return pd.DataFrame(rows)


def fig2a(dataset: EnsembleDataset) -> pd.DataFrame:
    """E[N_A(k_A, r)] against k_A, one series per r, with the calibrated r = 1 reference."""
    rows = []
    for (lx, ly, r), point in sorted(dataset.stats.items()):
        reference = dict(dataset.reference_negativity.get((lx, ly), []))
        for name, st in point.items():
            if name.startswith('N_A_k'):
                k = int(name[len('N_A_k'):])
                rows.append({'r': r, 'k_A': k, 'mean_N_A': st.mean, 'stderr': st.stderr,
                             'reference_N_A': reference.get(k), 'Lx': lx, 'Ly': ly})
    frame = pd.DataFrame(rows)
    return frame.sort_values(['Lx', 'Ly', 'r', 'k_A']).reset_index(drop=True) if rows else frame


def fig2c(dataset: EnsembleDataset) -> pd.DataFrame:
    rows = []
    for lx, ly in dataset.sizes:
        if (lx, ly) not in dataset.reference_negativity:
            continue
        for r in dataset.r_values(lx, ly):
            rows.append({'r': r, 'delta0_N_A': delta0_negativity(dataset, lx, ly, r), 'Lx': lx, 'Ly': ly})
    return pd.DataFrame(rows)


def fig3a(dataset: EnsembleDataset) -> pd.DataFrame:
    return _observable_rows(dataset, 'chi_I', 'mean_chiI')


def fig3b(dataset: EnsembleDataset) -> pd.DataFrame:
    return _observable_rows(dataset, 'chi_II', 'mean_chiII')


def fig4a(dataset: EnsembleDataset) -> pd.DataFrame:
    return _observable_rows(dataset, 'chi_II_count', 'mean_count')


def fig4b(dataset: EnsembleDataset) -> pd.DataFrame:
    rows = []
    for lx, ly in dataset.sizes:
        for r in dataset.r_values(lx, ly):
            if 'chi_II_count' not in dataset.stats[(lx, ly, r)]:
                continue
            f, df = rescaled_variance(dataset, lx, ly, r)
            rows.append({'r': r, 'F': f, 'dF': df, 'Lx': lx, 'Ly': ly})
    return pd.DataFrame(rows)


def fig6a(dataset: EnsembleDataset) -> pd.DataFrame:
    return _observable_rows(dataset, 'p_lo', 'mean_P_LO')


def fig6b(dataset: EnsembleDataset) -> pd.DataFrame:
    frame = _observable_rows(dataset, 'p_lo', 'mean_P_LO', var_col='var_P_LO')
    return frame[['r', 'var_P_LO', 'Lx', 'Ly']] if not frame.empty else frame


FIGURES: Dict[str, Callable[[EnsembleDataset], pd.DataFrame]] = {
    'fig2a': fig2a, 'fig2c': fig2c, 'fig3a': fig3a, 'fig3b': fig3b,
    'fig4a': fig4a, 'fig4b': fig4b, 'fig6a': fig6a, 'fig6b': fig6b,
}


def figure_frame(dataset: EnsembleDataset, figure_id: str) -> pd.DataFrame:
    if figure_id not in FIGURES:
        msg = f'unknown figure id {figure_id!r} (known: {", ".join(sorted(FIGURES))})'
        logger.error(msg)
        raise ValueError(msg)
    if dataset is None or not len(dataset):
        msg = 'dataset is empty'
        logger.error(msg)
        raise ValueError(msg)
    frame = FIGURES[figure_id](dataset)
    if frame.empty:
        msg = f'{figure_id}: dataset holds none of the observables this figure needs'
        logger.error(msg)
        raise ValueError(msg)
    return frame


def emit_plot(dataset: EnsembleDataset, figure_id: str, out_dir: str) -> List[str]:
    """Write ``<figure_id>.csv`` into ``out_dir``; 'all' writes every figure the data supports."""
    ids = sorted(FIGURES) if figure_id == 'all' else [figure_id]
    if dataset is None or not len(dataset):
        msg = 'dataset is empty'
        logger.error(msg)
        raise ValueError(msg)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for fid in ids:
        try:
            frame = figure_frame(dataset, fid)
        except ValueError:
            if figure_id == 'all':
                continue
            raise
        path = os.path.join(out_dir, f'{fid}.csv')
        frame.to_csv(path, index=False, float_format='%.17g')
        logger.info(f'{fid}: {len(frame)} rows written to {path}', extra={'event': 'emit_plot', 'figure': fid})
        paths.append(path)
    return paths
