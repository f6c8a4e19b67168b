"""Detection pipeline: demodulate, straighten, detect with a named method.

Also provides the benchmark drivers used for the oscillator and Rossler
evaluations (signal batches, detection across a significance grid, ROC
summaries).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .series import PhaseSeries, TimeSeries
from . import detect as det
from .detect import (CUSUM, PD, DetectorConfig, NullModel, ShiftEvent,
                     block_bootstrap_critical, pd_fixed_threshold_detect,
                     recursive_cusum_detect, threshold_pd_detect)
from .phase import DemodConfig, acf_first_zero, complex_demodulate, straighten_phase

METHODS = ("cusum-parametric", "cusum-block", "pd-parametric", "pd-threshold")


class ParametricNullBank:
    """Reusable bank of simulated null phase series for critical values.

    One B x N_max matrix of demodulated null phase rows is simulated once;
    the critical value at segment length n <= N_max is the (1-alpha)
    quantile of the maximum statistic over the first n columns (the null is
    stationary past burn-in, so any window of length n is representative).
    """

    def __init__(self, null_model: NullModel, n_max: int, b: int, seed: int):
        if b < 200:
            raise ValueError("bootstrap needs B >= 200")
        self.null_model = null_model
        self.n_max = n_max
        self.b = b
        rng = np.random.default_rng(seed)
        self._phi = null_model.phase_matrix(n_max, b, rng)
        self._maxima: dict = {}

    def maxima(self, kind: str, n: int) -> np.ndarray:
        if n > self.n_max:
            raise ValueError(f"segment length {n} exceeds bank size {self.n_max}")
        key = (kind, n)
        if key not in self._maxima:
            self._maxima[key] = det._stat_max_matrix(self._phi[:, :n], kind)
        return self._maxima[key]

    def critical(self, kind: str, n: int, alpha: float) -> float:
        return float(np.quantile(self.maxima(kind, n), 1 - alpha))


def estimate_tau(phi: PhaseSeries, segment_s: float = 4.0) -> int:
    """Dependence scale for the nonparametric methods."""
    return acf_first_zero(phi, segment_s=segment_s)


def detect_events(phi: PhaseSeries, method: str, alpha: float,
                  null_model: Optional[NullModel] = None,
                  bank: Optional[ParametricNullBank] = None,
                  tau: Optional[int] = None,
                  isi_min: int = 250, n_min: int = 8,
                  bootstrap_b: int = 1000, seed: int = 0,
                  tau_segment_s: float = 4.0) -> tuple:
    """Run one of the four named detection methods on a phase series.

    Returns (events, metadata).  ``bank`` short-circuits the per-length
    parametric bootstrap; ``tau`` is estimated from the series when not
    given (block bootstrap and threshold methods).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    n = len(phi.analysis_values())
    meta = {"method": method, "alpha": alpha, "n": n, "seed": seed}

    if method in ("cusum-block", "pd-threshold") and tau is None:
        tau = estimate_tau(phi, segment_s=tau_segment_s)
    if tau is not None:
        meta["tau"] = int(tau)

    if method == "cusum-parametric":
        cfg = DetectorConfig(alpha=alpha, method="parametric",
                             n_min=n_min, isi_min=isi_min,
                             bootstrap_b=bootstrap_b,
                             null_model=null_model, seed=seed)
        if bank is not None:
            events = _recursive_with_bank(phi, cfg, bank)
        else:
            if null_model is None:
                raise ValueError("cusum-parametric needs a null model")
            events = recursive_cusum_detect(phi, cfg)
    elif method == "cusum-block":
        cfg = DetectorConfig(alpha=alpha, method="block_bootstrap",
                             n_min=n_min, isi_min=isi_min, tau=int(tau),
                             bootstrap_b=bootstrap_b, seed=seed)
        events = recursive_cusum_detect(phi, cfg)
    elif method == "pd-parametric":
        if bank is not None:
            threshold = bank.critical(PD, n, alpha)
        else:
            if null_model is None:
                raise ValueError("pd-parametric needs a null model")
            threshold = det.parametric_critical(
                PD, null_model, n, alpha, bootstrap_b, seed,
                fit_distribution=False).value
        meta["threshold"] = threshold
        events = pd_fixed_threshold_detect(phi, threshold)
    else:  # pd-threshold
        events = threshold_pd_detect(phi, int(tau), alpha)
    return events, meta


def _recursive_detect(phi: PhaseSeries, critical_for, n_min: int,
                      isi_min: int) -> list:
    """Recursive CUSUM segmentation with a pluggable critical-value source.

    ``critical_for(start, end)`` returns the segment threshold or None to
    stop testing the segment (e.g. too few blocks to permute).
    """
    values = phi.analysis_values()
    offset = phi.burn_in
    events = []
    stack = [(0, len(values))]
    while stack:
        start, end = stack.pop()
        n = end - start
        if n < max(n_min, 4):
            continue
        threshold = critical_for(start, end)
        if threshold is None:
            continue
        stat = det.cusum_stat(values[start:end])
        if stat.max_value <= threshold:
            continue
        idx = start + stat.argmax
        t_lower = max(start, idx - isi_min)
        t_upper = min(end - 1, idx + isi_min)
        magnitude = det.estimate_magnitude(
            values, idx - isi_min, idx + isi_min,
            window=min(isi_min, int(0.25 * phi.rate_hz)))
        events.append(ShiftEvent(
            index=offset + idx, time_s=(offset + idx) / phi.rate_hz,
            magnitude=magnitude, statistic=stat.max_value,
            threshold=threshold, t_lower=offset + t_lower,
            t_upper=offset + t_upper))
        stack.append((start, t_lower))
        stack.append((t_upper + 1, end))
    events.sort(key=lambda e: e.index)
    return events


def _recursive_with_bank(phi: PhaseSeries, cfg: DetectorConfig,
                         bank: ParametricNullBank) -> list:
    """Recursive CUSUM detection drawing critical values from the bank."""
    return _recursive_detect(
        phi, lambda s, e: bank.critical(CUSUM, e - s, cfg.alpha),
        cfg.n_min, cfg.isi_min)


def detect_grid(phi: PhaseSeries, method: str, alphas,
                null_model: Optional[NullModel] = None,
                bank: Optional[ParametricNullBank] = None,
                tau: Optional[int] = None,
                isi_min: int = 250, n_min: int = 8,
                bootstrap_b: int = 1000, seed: int = 0,
                tau_segment_s: float = 4.0) -> dict:
    """Detection over a significance grid, sharing bootstrap work.

    For the block-bootstrap method the permutation maxima are computed once
    per distinct segment and reused for every alpha (the null sample does not
    depend on the level); parametric methods share the supplied bank.
    Returns {alpha: events}.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    alphas = sorted(set(float(a) for a in alphas))
    if method in ("cusum-block", "pd-threshold") and tau is None:
        tau = estimate_tau(phi, segment_s=tau_segment_s)
    if method == "cusum-parametric" and bank is None:
        bank = ParametricNullBank(null_model, len(phi.analysis_values()),
                                  bootstrap_b, seed)
    if method == "pd-parametric" and bank is None:
        bank = ParametricNullBank(null_model, len(phi.analysis_values()),
                                  bootstrap_b, seed)

    out = {}
    if method == "cusum-block":
        maxima_cache: dict = {}
        values = phi.analysis_values()

        def maxima_for(start: int, end: int):
            key = (start, end)
            if key not in maxima_cache:
                seg_seed = int(np.random.SeedSequence(
                    [seed & 0xFFFFFFFF, start, end]).generate_state(1)[0])
                try:
                    maxima_cache[key] = det.block_bootstrap_maxima(
                        values[start:end], int(tau), bootstrap_b, seg_seed)
                except ValueError:
                    maxima_cache[key] = None
            return maxima_cache[key]

        for alpha in alphas:
            def critical_for(start, end, _a=alpha):
                maxima = maxima_for(start, end)
                if maxima is None:
                    return None
                return float(np.quantile(maxima, 1 - _a))

            out[alpha] = _recursive_detect(phi, critical_for, n_min, isi_min)
    elif method == "cusum-parametric":
        for alpha in alphas:
            cfg = DetectorConfig(alpha=alpha, method="parametric",
                                 n_min=n_min, isi_min=isi_min,
                                 bootstrap_b=bootstrap_b, seed=seed)
            out[alpha] = _recursive_with_bank(phi, cfg, bank)
    elif method == "pd-parametric":
        n = len(phi.analysis_values())
        for alpha in alphas:
            out[alpha] = pd_fixed_threshold_detect(
                phi, bank.critical(PD, n, alpha))
    else:  # pd-threshold
        for alpha in alphas:
            out[alpha] = threshold_pd_detect(phi, int(tau), alpha)
    return out


def demodulate_and_straighten(x: TimeSeries, cfg: DemodConfig,
                              burn_in: Optional[int] = None) -> PhaseSeries:
    """Standard phase pipeline: complex demodulation then straightening."""
    return straighten_phase(complex_demodulate(x, cfg, burn_in=burn_in))
