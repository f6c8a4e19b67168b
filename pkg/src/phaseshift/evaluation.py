"""Scoring of detections against ground truth.

Greedy event matching with decision-window true negatives, ROC/AUROC and
accuracy summaries over a significance grid, log-binned power-law fits of
inter-shift-interval distributions, and the event/stimulus uniformity test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as spstats


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int
    matching_tolerance: int
    decision_window: int

    @property
    def tp_rate(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def fp_rate(self) -> float:
        return self.fp / (self.fp + self.tn) if self.fp + self.tn else 0.0


def accuracy(c: ConfusionCounts) -> float:
    """ACC = (TP + TN) / (TP + FP + TN + FN)."""
    total = c.tp + c.fp + c.tn + c.fn
    if total == 0:
        raise ValueError("accuracy undefined for all-zero counts")
    return (c.tp + c.tn) / total


def match_events(detected, truth, tolerance: int, n: int,
                 decision_window: int | None = None) -> ConfusionCounts:
    """Greedy one-to-one matching of detected to truth event indices.

    Events may be ShiftEvent objects or plain indices; both lists must be
    sorted.  A detection within +-tolerance of an unmatched truth event is a
    TP; leftovers are FP/FN.  TN counts the disjoint decision windows (length
    ``decision_window``, default = tolerance) containing neither kind of
    event.
    """
    if tolerance <= 0:
        raise ValueError("matching tolerance must be positive")
    det = [getattr(e, "index", e) for e in detected]
    tru = [getattr(e, "index", e) for e in truth]
    if det != sorted(det) or tru != sorted(tru):
        raise ValueError("event lists must be sorted by index")
    if decision_window is None:
        decision_window = tolerance
    matched_truth = [False] * len(tru)
    tp = 0
    j = 0
    for d in det:
        while j < len(tru) and (matched_truth[j] or tru[j] < d - tolerance):
            j += 1
        if j < len(tru) and abs(tru[j] - d) <= tolerance:
            matched_truth[j] = True
            tp += 1
    fp = len(det) - tp
    fn = len(tru) - tp
    n_windows = max(0, n // decision_window)
    occupied = set()
    for idx in det + tru:
        w = idx // decision_window
        if 0 <= w < n_windows:
            occupied.add(w)
    tn = n_windows - len(occupied)
    return ConfusionCounts(tp, fp, tn, fn, tolerance, decision_window)


@dataclass
class RocCurve:
    """ROC points over a significance grid with trapezoid AUROC.

    ``points`` are (fp_rate, tp_rate, alpha), sorted by fp_rate; the curve is
    anchored at (0,0) and (1,1).  ``max_accuracy`` is (acc, alpha).
    """

    points: list
    auroc: float
    max_accuracy: tuple
    counts: list = field(default_factory=list)


def roc_curve(counts_by_alpha: dict) -> RocCurve:
    """Build the ROC summary from per-alpha ConfusionCounts."""
    if len(counts_by_alpha) < 3:
        raise ValueError("ROC needs at least 3 significance levels")
    points = []
    best = (-1.0, None)
    for alpha, c in counts_by_alpha.items():
        points.append((c.fp_rate, c.tp_rate, alpha))
        acc = accuracy(c)
        if acc > best[0]:
            best = (acc, alpha)
    points.sort()
    xs = [0.0] + [p[0] for p in points] + [1.0]
    ys = [0.0] + [p[1] for p in points] + [1.0]
    auroc = float(np.trapezoid(ys, xs))
    return RocCurve(points, auroc, best, list(counts_by_alpha.items()))


@dataclass
class PowerLawFit:
    slope_q: float
    raw_slope: float
    tail_start: float
    r_squared: float
    bin_centers: np.ndarray
    counts: np.ndarray
    density: np.ndarray


def log_binned_histogram(values: np.ndarray, bins_per_decade: int = 20):
    """Logarithmically binned normalized density histogram."""
    values = np.asarray(values, dtype=float)
    values = values[values > 0]
    lo, hi = values.min(), values.max()
    n_bins = max(3, int(np.ceil(np.log10(hi / lo) * bins_per_decade)) + 1)
    edges = np.logspace(np.log10(lo), np.log10(hi * (1 + 1e-12)), n_bins + 1)
    # guard against logspace rounding pushing the end bins past the extremes
    edges[0] = min(edges[0], lo)
    edges[-1] = max(edges[-1], hi * (1 + 1e-12))
    counts, _ = np.histogram(values, bins=edges)
    widths = np.diff(edges)
    density = counts / (widths * len(values))
    centers = np.sqrt(edges[:-1] * edges[1:])
    return centers, counts, density


def isi_powerlaw(isis: np.ndarray, bins_per_decade: int = 20,
                 tail_start: float | None = None) -> PowerLawFit:
    """Least-squares log-log slope of the ISI density tail.

    ISIs are pooled, log-binned, and the tail (from the mode bin unless
    ``tail_start`` is given) fitted on (log center, log density); the
    exponent q is reported positive.
    """
    isis = np.asarray(isis, dtype=float)
    isis = isis[isis > 0]
    if len(isis) < 200:
        raise ValueError("power-law fit needs at least 200 ISI samples")
    centers, counts, density = log_binned_histogram(isis, bins_per_decade)
    if tail_start is None:
        tail_start = centers[int(np.argmax(counts))]
    in_tail = (centers >= tail_start) & (counts > 0)
    if in_tail.sum() < 3:
        raise ValueError("fewer than 3 non-empty tail bins")
    x = np.log(centers[in_tail])
    y = np.log(density[in_tail])
    res = spstats.linregress(x, y)
    return PowerLawFit(
        slope_q=float(-res.slope),
        raw_slope=float(res.slope),
        tail_start=float(tail_start),
        r_squared=float(res.rvalue**2),
        bin_centers=centers,
        counts=counts,
        density=density,
    )


def events_to_isis(indices, rate_hz: float | None = None) -> np.ndarray:
    """Inter-shift intervals of one event sequence (seconds if rate given)."""
    idx = np.asarray([getattr(e, "index", e) for e in indices], dtype=float)
    gaps = np.diff(np.sort(idx))
    return gaps / rate_hz if rate_hz else gaps


def uniformity_test(event_times_s, stimulus_times_s, window_s: float = 0.5,
                    bins: int = 10):
    """Chi-squared uniformity test of event latencies after stimuli.

    For each event, the time since the most recent stimulus; latencies beyond
    ``window_s`` are discarded and the remainder tested against the uniform
    expectation over equal bins on [0, window_s].  Returns
    (chi2, p_value, bin_counts).
    """
    events = np.sort(np.asarray(event_times_s, dtype=float))
    stimuli = np.sort(np.asarray(stimulus_times_s, dtype=float))
    if len(stimuli) == 0:
        raise ValueError("no stimulus times supplied")
    pos = np.searchsorted(stimuli, events, side="right") - 1
    valid = pos >= 0
    latency = events[valid] - stimuli[pos[valid]]
    latency = latency[latency <= window_s]
    counts, _ = np.histogram(latency, bins=bins, range=(0.0, window_s))
    expected = len(latency) / bins
    if expected < 5:
        raise ValueError(
            f"only {len(latency)} latencies for {bins} bins (need >= 5 expected "
            "per bin); use fewer bins"
        )
    chi2, p = spstats.chisquare(counts)
    return float(chi2), float(p), counts
