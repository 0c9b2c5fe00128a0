"""Finite-size scaling collapse F = L^(zeta/nu) Psi((r - r_c) L^(1/nu))."""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from .ensemble import EnsembleDataset, f_curves, rescaled_variance_from_samples

logger = logging.getLogger('scaling-analysis')

DEFAULT_INIT = (0.5, 1.33, 2.5)
RESTART_OFFSETS = ((-0.05, 0.0, 0.05), (-0.3, 0.0, 0.3), (-0.5, 0.0, 0.5))
MIN_SIZES = 3
MIN_POINTS = 5
MIN_BOOT = 100


@dataclass(frozen=True)
class ScalingCurve:
    """F(r) for one size; ``samples`` holds per-r chi^II counts when trajectories exist."""

    L: int
    r: np.ndarray
    F: np.ndarray
    dF: np.ndarray
    Ly: Optional[int] = None
    samples: Optional[Tuple[np.ndarray, ...]] = None

    def resampled(self, rng: np.random.Generator) -> 'ScalingCurve':
        if self.samples is not None and self.Ly is not None:
            f, df = zip(*(rescaled_variance_from_samples(rng.choice(s, size=s.size, replace=True), self.L, self.Ly)
                          for s in self.samples))
            f, df = np.asarray(f), np.asarray(df)
            # a resample can come out constant; keep the original error bar there
            df = np.where(df > 0, df, self.dF)
        else:
            f, df = self.F + self.dF * rng.standard_normal(self.F.size), self.dF
        return ScalingCurve(self.L, self.r, f, df, self.Ly, self.samples)


@dataclass
class ScalingFit:
    r_c: float
    nu: float
    zeta: float
    quality: float
    converged: bool
    bootstrap_errors: Dict[str, float] = field(default_factory=dict)
    n_boot: int = 0
    sizes: Tuple[int, ...] = ()
    iterations: List[dict] = field(default_factory=list)

    @property
    def params(self) -> Tuple[float, float, float]:
        return self.r_c, self.nu, self.zeta

    def to_dict(self) -> dict:
        return {
            'r_c': self.r_c, 'nu': self.nu, 'zeta': self.zeta, 'quality': self.quality,
            'converged': self.converged, 'bootstrap_errors': self.bootstrap_errors,
            'n_boot': self.n_boot, 'sizes': list(self.sizes), 'iterations': self.iterations,
        }


def scaled_points(curves: Sequence[ScalingCurve], r_c: float, nu: float,
                  zeta: float) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    out = []
    for c in curves:
        x = (c.r - r_c) * c.L ** (1.0 / nu)
        scale = c.L ** (-zeta / nu)
        order = np.argsort(x)
        out.append((x[order], (c.F * scale)[order], (c.dF * scale)[order]))
    return out


def _master_curve(x0: float, xs: np.ndarray, ys: np.ndarray, dys: np.ndarray) -> Optional[Tuple[float, float]]:
    """Weighted linear fit through the bracketing points, evaluated at x0 with its variance."""
    w = 1.0 / dys ** 2
    k, kx, kxx = w.sum(), (w * xs).sum(), (w * xs * xs).sum()
    ky, kxy = (w * ys).sum(), (w * xs * ys).sum()
    det = k * kxx - kx * kx
    if det <= 0:
        return None
    y = (kxx * ky - kx * kxy + x0 * (k * kxy - kx * ky)) / det
    dy2 = (kxx - 2 * x0 * kx + x0 * x0 * k) / det
    return y, dy2


def quality(curves: Sequence[ScalingCurve], params: Sequence[float]) -> float:
    """Mean of (y - Y)^2 / (dy^2 + dY^2) over every point covered by the other sizes.

    Y is the local linear master curve built from the neighbouring points of all
    other sizes; about 1 means a collapse within error bars.
    """
    r_c, nu, zeta = params
    if nu <= 0:
        return np.inf
    points = scaled_points(curves, r_c, nu, zeta)
    terms = []
    for i, (x_i, y_i, dy_i) in enumerate(points):
        for x0, y0, dy0 in zip(x_i, y_i, dy_i):
            bx, by, bdy = [], [], []
            for j, (x_j, y_j, dy_j) in enumerate(points):
                if j == i:
                    continue
                pos = np.searchsorted(x_j, x0)
                if pos == 0 or pos == x_j.size:
                    continue
                bx.extend(x_j[pos - 1:pos + 1])
                by.extend(y_j[pos - 1:pos + 1])
                bdy.extend(dy_j[pos - 1:pos + 1])
            if not bx:
                continue
            master = _master_curve(x0, np.asarray(bx), np.asarray(by), np.asarray(bdy))
            if master is None:
                continue
            y, dy2 = master
            terms.append((y0 - y) ** 2 / (dy0 ** 2 + dy2))
    if not terms:
        return np.inf
    return float(np.mean(terms))


def _validate(curves: Sequence[ScalingCurve]) -> None:
    if len(curves) < MIN_SIZES:
        msg = f'scaling collapse needs at least {MIN_SIZES} sizes, got {len(curves)}'
        logger.error(msg)
        raise ValueError(msg)
    for c in curves:
        if c.r.size < MIN_POINTS:
            msg = f'size {c.L}: collapse needs at least {MIN_POINTS} r-points, got {c.r.size}'
            logger.error(msg)
            raise ValueError(msg)
        if np.any(c.dF <= 0):
            msg = f'size {c.L}: error bars must be positive'
            logger.error(msg)
            raise ValueError(msg)


def _minimize(curves: Sequence[ScalingCurve], start: Sequence[float], max_iter: int):
    return minimize(lambda p: quality(curves, p), np.asarray(start, dtype=float), method='Nelder-Mead',
                    options={'maxiter': max_iter, 'xatol': 1e-6, 'fatol': 1e-8})


def collapse(curves: Sequence[ScalingCurve], init: Sequence[float] = DEFAULT_INIT, n_boot: int = MIN_BOOT,
             max_iter: int = 2000, seed: int = 0, threads: Optional[int] = None) -> ScalingFit:
    """Fit (r_c, nu, zeta) by Nelder-Mead restarts around ``init``; bootstrap the errors.

    ``n_boot=0`` skips the bootstrap, otherwise at least 100 resamples are drawn.
    Trajectory resampling is used when the curves carry samples.
    """
    curves = sorted(curves, key=lambda c: c.L)
    _validate(curves)
    if 0 < n_boot < MIN_BOOT:
        raise ValueError(f'bootstrap needs at least {MIN_BOOT} resamples, got {n_boot}')

    best = None
    log = []
    for offsets in itertools.product(*RESTART_OFFSETS):
        start = [p + o for p, o in zip(init, offsets)]
        result = _minimize(curves, start, max_iter)
        log.append({'start': start, 'params': result.x.tolist(), 'quality': float(result.fun),
                    'iterations': int(result.nit), 'success': bool(result.success)})
        if best is None or result.fun < best.fun:
            best = result
    if not np.isfinite(best.fun):
        msg = 'scaling collapse found no parameters with overlapping curves'
        logger.error(msg)
        raise ValueError(msg)
    if not best.success:
        logger.warning(f'Nelder-Mead did not converge: {best.message}',
                       extra={'event': 'collapse_not_converged'})
    r_c, nu, zeta = (float(v) for v in best.x)
    fit = ScalingFit(r_c, nu, zeta, float(best.fun), bool(best.success),
                     sizes=tuple(c.L for c in curves), iterations=log)
    logger.info(f'collapse r_c={r_c:.4f} nu={nu:.3f} zeta={zeta:.3f} S={fit.quality:.3f}',
                extra={'event': 'collapse', 'r_c': r_c, 'nu': nu, 'zeta': zeta})

    if n_boot:
        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_boot)]

        def one(rng):
            resampled = [c.resampled(rng) for c in curves]
            return _minimize(resampled, best.x, max_iter).x

        with ThreadPoolExecutor(max_workers=threads) as pool:
            draws = np.array(list(pool.map(one, streams)))
        errors = draws.std(axis=0, ddof=1)
        fit.bootstrap_errors = {'r_c': float(errors[0]), 'nu': float(errors[1]), 'zeta': float(errors[2])}
        fit.n_boot = n_boot
    return fit


def curves_from_dataset(dataset: EnsembleDataset) -> List[ScalingCurve]:
    """One curve per lattice size from the rescaled variance of chi^II."""
    curves = []
    for (lx, ly), frame in f_curves(dataset).items():
        # deterministic points (r = 0, r = 1) carry no error bar
        frame = frame[frame['dF'] > 0].reset_index(drop=True)
        if frame.empty:
            continue
        samples = None
        keys = [(lx, ly, float(r)) for r in frame['r']]
        if all(k in dataset.chi_II_counts for k in keys):
            samples = tuple(np.asarray(dataset.chi_II_counts[k]) for k in keys)
        curves.append(ScalingCurve(lx, frame['r'].to_numpy(), frame['F'].to_numpy(),
                                   frame['dF'].to_numpy(), ly, samples))
    return curves


def collapsed_curve_frame(curves: Sequence[ScalingCurve], fit: ScalingFit) -> pd.DataFrame:
    rows = []
    for c, (x, y, dy) in zip(curves, scaled_points(curves, *fit.params)):
        rows.extend({'x': a, 'y': b, 'dy': d, 'Lx': c.L} for a, b, d in zip(x, y, dy))
    return pd.DataFrame(rows, columns=['x', 'y', 'dy', 'Lx'])
