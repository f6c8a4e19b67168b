"""Phase-shift change-point statistics, calibration, and detection.

Implements the CUSUM (S1) and phase-derivative (S2) statistics, critical
values by parametric bootstrap, block-permutation bootstrap and the
pooled-variance threshold approximation, recursive multi-shift detection
with exclusion intervals, and the burn-in / N_min / ISI_min / power
calibration procedures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats as spstats
from scipy.special import gamma as gamma_fn

from .series import PhaseSeries, TimeSeries
from .phase import DemodConfig, demodulate_matrix
from .signals import gen_oscillator, PhaseProfile

CUSUM = "cusum"
PD = "pd"


# ---------------------------------------------------------------------------
# Statistics


@dataclass
class StatSeries:
    """A change-point statistic evaluated over the valid interior range.

    ``values[j]`` is the statistic at sample index ``offset + j`` of the
    input series; ``argmax`` is in the same coordinates (ties break to the
    smallest index).
    """

    values: np.ndarray
    kind: str
    offset: int
    max_value: float
    argmax: int


def _cusum_values_matrix(values: np.ndarray) -> np.ndarray:
    """|s1| for each row; columns correspond to t = 2..N-1 (1-indexed)."""
    values = np.atleast_2d(values)
    n = values.shape[1]
    dev = values - values.mean(axis=1, keepdims=True)
    partial = np.cumsum(dev, axis=1)[:, 1:n - 1]
    t = np.arange(2, n)
    weights = np.sqrt(n / (t * (n - t)))
    return np.abs(partial) * weights


def cusum_stat(phi) -> StatSeries:
    """Normalized absolute partial-sum (CUSUM) statistic.

    Accepts a PhaseSeries (burn-in removed) or a plain array.  The statistic
    at 1-indexed t weights the partial sum of the first t mean-centered
    values; the reported sample index is the first post-change sample.
    """
    values, offset = _detection_values(phi)
    n = len(values)
    if n < 4:
        raise ValueError(f"CUSUM needs at least 4 samples, got {n}")
    s = _cusum_values_matrix(values)[0]
    j = int(np.argmax(s))
    return StatSeries(s, CUSUM, offset + 2, float(s[j]), offset + 2 + j)


def pd_stat(phi) -> StatSeries:
    """Central-difference phase derivative magnitude |phi_{t+1}-phi_{t-1}|/2."""
    values, offset = _detection_values(phi)
    n = len(values)
    if n < 3:
        raise ValueError(f"PD needs at least 3 samples, got {n}")
    s = np.abs(values[2:] - values[:-2]) / 2.0
    j = int(np.argmax(s))
    return StatSeries(s, PD, offset + 1, float(s[j]), offset + 1 + j)


def _detection_values(phi):
    if isinstance(phi, PhaseSeries):
        return phi.analysis_values(), phi.burn_in
    return np.asarray(phi, dtype=float), 0


def _stat_max_matrix(values: np.ndarray, kind: str) -> np.ndarray:
    """Row-wise maximum statistic (vectorized over replicates)."""
    if kind == CUSUM:
        return _cusum_values_matrix(values).max(axis=1)
    if kind == PD:
        d = np.abs(values[:, 2:] - values[:, :-2]) / 2.0
        return d.max(axis=1)
    raise ValueError(f"unknown statistic kind {kind!r}")


# ---------------------------------------------------------------------------
# Null model and parametric bootstrap


@dataclass
class NullModel:
    """Constant-phase oscillator with i.i.d. additive noise, plus demodulation.

    The null datasets are sin(2*pi*f0*t/T) mixed with white Gaussian noise at
    weight ``noise_weight`` (r), demodulated and straightened with the first
    ``n_burn`` samples dropped.
    """

    f0_hz: float = 9.0
    rate_hz: float = 250.0
    noise_weight: float = 0.5
    demod: DemodConfig = field(
        default_factory=lambda: DemodConfig(center_freq_hz=9.0, half_bandwidth_hz=1.0)
    )
    n_burn: Optional[int] = None

    def burn(self) -> int:
        if self.n_burn is not None:
            return self.n_burn
        return self.demod.default_burn_in(self.rate_hz)

    def phase_matrix(self, n: int, b: int, rng: np.random.Generator,
                     profile: Optional[PhaseProfile] = None) -> np.ndarray:
        """b straightened demodulated phase rows of length n (post burn-in)."""
        burn = self.burn()
        total = n + burn
        t = np.arange(total)
        phi = profile.phase_values(total) if profile is not None else 0.0
        clean = np.sin(2 * np.pi * self.f0_hz * t / self.rate_hz + phi)
        clean = clean / np.sqrt(np.mean(clean**2))
        eps = rng.standard_normal((b, total))
        eps /= np.sqrt(np.mean(eps**2, axis=1, keepdims=True))
        x = self.noise_weight * clean + (1 - self.noise_weight) * eps
        wrapped = demodulate_matrix(x, self.rate_hz, self.demod)
        return np.unwrap(wrapped, axis=1)[:, burn:]


@dataclass
class GevFit:
    """Generalized extreme value fit (scipy shape convention: c<0 heavy tail)."""

    location: float
    scale: float
    shape: float
    ks_statistic: float
    ks_pvalue: float

    def quantile(self, p: float) -> float:
        return float(spstats.genextreme.ppf(p, self.shape,
                                            loc=self.location, scale=self.scale))


def _gev_lmoments_init(sample: np.ndarray):
    """Hosking's L-moments starting values for the GEV."""
    x = np.sort(sample)
    n = len(x)
    j = np.arange(n)
    b0 = x.mean()
    b1 = np.sum(j * x) / (n * (n - 1))
    b2 = np.sum(j * (j - 1) * x) / (n * (n - 1) * (n - 2))
    l1, l2, l3 = b0, 2 * b1 - b0, 6 * b2 - 6 * b1 + b0
    t3 = l3 / l2
    z = 2.0 / (3.0 + t3) - np.log(2) / np.log(3)
    k = 7.8590 * z + 2.9554 * z**2
    scale = l2 * k / ((1 - 2.0**-k) * gamma_fn(1 + k))
    loc = l1 - scale * (1 - gamma_fn(1 + k)) / k
    return loc, scale, k


def fit_gev(maxima: np.ndarray) -> GevFit:
    """Maximum-likelihood GEV fit with L-moments initialization and KS check."""
    maxima = np.asarray(maxima, dtype=float)
    if len(maxima) < 100:
        raise ValueError("GEV fit needs at least 100 maxima")
    if np.ptp(maxima) == 0:
        raise ValueError("degenerate sample: all maxima are equal")
    loc0, scale0, k0 = _gev_lmoments_init(maxima)
    try:
        shape, loc, scale = spstats.genextreme.fit(maxima, k0, loc=loc0, scale=scale0)
        if not np.isfinite([shape, loc, scale]).all() or scale <= 0:
            raise RuntimeError("non-finite MLE")
    except RuntimeError as exc:
        raise RuntimeError(
            f"GEV MLE failed ({exc}); L-moments fallback "
            f"loc={loc0:.4g} scale={scale0:.4g} shape={k0:.4g}"
        ) from exc
    ks = spstats.kstest(maxima, "genextreme", args=(shape, loc, scale))
    return GevFit(float(loc), float(scale), float(shape),
                  float(ks.statistic), float(ks.pvalue))


@dataclass
class CriticalValue:
    value: float
    alpha: float
    n: int
    kind: str
    gev: Optional[GevFit] = None


def parametric_critical(kind: str, null_model: NullModel, n: int, alpha: float,
                        b: int, seed: int, fit_distribution: bool = True) -> CriticalValue:
    """(1-alpha) quantile of the null maximum statistic by parametric bootstrap."""
    if b < 200:
        raise ValueError("bootstrap needs B >= 200")
    rng = np.random.default_rng(seed)
    maxima = _stat_max_matrix(null_model.phase_matrix(n, b, rng), kind)
    if np.ptp(maxima) == 0:
        raise ValueError("degenerate bootstrap sample: all maxima equal")
    value = float(np.quantile(maxima, 1 - alpha))
    gev = fit_gev(maxima) if fit_distribution and b >= 100 else None
    return CriticalValue(value, alpha, n, kind, gev)


def block_bootstrap_maxima(phi, tau: int, b: int, seed: int,
                           chunk: int = 250) -> np.ndarray:
    """Null sample of S1 maxima from non-overlapping block permutations.

    The series is cut into K = floor(N / L) blocks of length L = 2*tau
    (trailing remainder dropped); B random block permutations are scored.
    Permutations are processed in chunks to bound memory on long series.
    """
    values, _ = _detection_values(phi)
    tau = max(1, int(tau))
    el = 2 * tau
    k = len(values) // el
    if k < 4:
        raise ValueError(
            f"too few blocks to permute: K={k} with L={el} and N={len(values)}"
        )
    rng = np.random.default_rng(seed)
    blocks = values[:k * el].reshape(k, el)
    maxima = np.empty(b)
    done = 0
    while done < b:
        m = min(chunk, b - done)
        perms = np.argsort(rng.random((m, k)), axis=1)
        surrogates = blocks[perms].reshape(m, k * el)
        maxima[done:done + m] = _stat_max_matrix(surrogates, CUSUM)
        done += m
    return maxima


def block_bootstrap_critical(phi, tau: int, alpha: float, b: int,
                             seed: int) -> float:
    """(1-alpha) quantile of the block-permutation null S1 maxima."""
    return float(np.quantile(block_bootstrap_maxima(phi, tau, b, seed),
                             1 - alpha))


# ---------------------------------------------------------------------------
# Detection


@dataclass
class ShiftEvent:
    """A detected (or ground-truth) phase shift event."""

    index: int
    time_s: float
    magnitude: float
    statistic: float
    threshold: float
    t_lower: int
    t_upper: int

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "time_s": self.time_s,
            "magnitude_rad": self.magnitude,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "t_L": self.t_lower,
            "t_U": self.t_upper,
        }


@dataclass
class DetectorConfig:
    """Detection settings shared by the recursive CUSUM and PD detectors."""

    alpha: float = 0.05
    method: str = "parametric"  # parametric | block_bootstrap | threshold
    critical_value: Optional[float] = None
    n_min: int = 8
    isi_min: int = 250
    tau: int = 1
    bootstrap_b: int = 1000
    null_model: Optional[NullModel] = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.bootstrap_b < 200:
            raise ValueError("bootstrap_b must be >= 200 for quantile estimation")


def estimate_magnitude(values: np.ndarray, t_lower: int, t_upper: int,
                       window: int, trim: float = 0.1) -> float:
    """Shift magnitude: trimmed-mean phase after minus before the exclusion."""
    before = values[max(0, t_lower - window):t_lower]
    after = values[t_upper + 1:t_upper + 1 + window]
    if len(before) == 0 or len(after) == 0:
        return float("nan")
    return float(spstats.trim_mean(after, trim) - spstats.trim_mean(before, trim))


def _derive_seed(seed: int, *parts: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[p & 0xFFFFFFFF for p in parts]])


def recursive_cusum_detect(phi: PhaseSeries, cfg: DetectorConfig) -> list:
    """Recursive CUSUM segmentation with exclusion intervals.

    Tests each segment against its critical value; on rejection records the
    argmax, excludes +-isi_min around it and recurses on both sides.  For
    method="block_bootstrap" the critical value is re-derived on each
    subsegment with the globally estimated tau; for method="parametric" it is
    re-simulated at the subsegment length (cached by length).
    """
    values = phi.analysis_values()
    offset = phi.burn_in
    cache: dict[int, float] = {}

    def critical_for(segment: np.ndarray, depth_key: int) -> Optional[float]:
        n = len(segment)
        if cfg.method == "parametric":
            if cfg.critical_value is not None and n not in cache:
                if cfg.null_model is None:
                    # fixed-threshold mode: one value at every depth
                    cache[n] = cfg.critical_value
                elif n == len(values):
                    # caller value applies at full length; recompute others
                    cache[n] = cfg.critical_value
            if n not in cache:
                if cfg.null_model is None:
                    raise ValueError("parametric method needs a null model")
                seed = int(_derive_seed(cfg.seed, n).generate_state(1)[0])
                cache[n] = parametric_critical(
                    CUSUM, cfg.null_model, n, cfg.alpha, cfg.bootstrap_b, seed,
                    fit_distribution=False).value
            return cache[n]
        if cfg.method == "block_bootstrap":
            try:
                seed = int(_derive_seed(cfg.seed, depth_key, n).generate_state(1)[0])
                return block_bootstrap_critical(segment, cfg.tau, cfg.alpha,
                                                cfg.bootstrap_b, seed)
            except ValueError:
                return None  # too few blocks: stop testing this segment
        raise ValueError(f"unsupported method {cfg.method!r} for CUSUM detection")

    events: list[ShiftEvent] = []
    stack = [(0, len(values))]
    while stack:
        start, end = stack.pop()
        n = end - start
        if n < max(cfg.n_min, 4):
            continue
        threshold = critical_for(values[start:end], start)
        if threshold is None:
            continue
        stat = cusum_stat(values[start:end])
        if stat.max_value <= threshold:
            continue
        local = stat.argmax
        idx = start + local
        t_lower = max(start, idx - cfg.isi_min)
        t_upper = min(end - 1, idx + cfg.isi_min)
        magnitude = estimate_magnitude(
            values, idx - cfg.isi_min, idx + cfg.isi_min,
            window=min(cfg.isi_min, int(0.25 * phi.rate_hz)))
        events.append(ShiftEvent(
            index=offset + idx,
            time_s=(offset + idx) / phi.rate_hz,
            magnitude=magnitude,
            statistic=stat.max_value,
            threshold=threshold,
            t_lower=offset + t_lower,
            t_upper=offset + t_upper,
        ))
        stack.append((start, t_lower))
        stack.append((t_upper + 1, end))
    events.sort(key=lambda e: e.index)
    return events


def _normal_max_quantile(alpha: float, k_star: int, printed_form: bool = False) -> float:
    """Standard-normal quantile for the max of k_star independent variables.

    Default: level (1-alpha)^(1/k_star) so the max exceeds with probability
    alpha.  ``printed_form`` uses the published subscript alpha^k_star.
    """
    k_star = max(1, k_star)
    if printed_form:
        return float(spstats.norm.ppf(alpha**k_star))
    return float(spstats.norm.ppf((1 - alpha) ** (1.0 / k_star)))


def threshold_pd_detect(phi: PhaseSeries, tau: int, alpha: float,
                        printed_quantile: bool = False,
                        max_iterations: Optional[int] = None) -> list:
    """Iterative pooled-variance threshold detection on the PD statistic.

    Repeats: estimate the pooled standard deviation of the central phase
    differences outside current exclusion zones, set the threshold to
    sigma_pool times the max-of-K* normal quantile (K* = 2*floor(N/tau)),
    update exclusion boundaries by threshold crossings, and scan for new
    events; overlapping events merge, keeping the larger statistic.
    """
    values = phi.analysis_values()
    offset = phi.burn_in
    n = len(values)
    tau = max(1, int(tau))
    if tau >= n:
        raise ValueError(f"tau={tau} must be smaller than the series length {n}")
    if n < 3:
        raise ValueError("PD detection needs at least 3 samples")
    diff = (values[2:] - values[:-2]) / 2.0  # centered at sample j+1
    s2 = np.abs(diff)
    m = len(diff)
    k_star = 2 * (n // tau)
    q = _normal_max_quantile(alpha, k_star, printed_quantile)

    events: list[dict] = []  # {"center": j, "stat": s, "lo": a, "hi": b} in diff coords
    threshold = np.inf
    if max_iterations is None:
        max_iterations = n

    def excluded_mask() -> np.ndarray:
        mask = np.zeros(m, dtype=bool)
        for ev in events:
            mask[ev["lo"]:ev["hi"] + 1] = True
        return mask

    def boundaries(center: int, thr: float):
        # t_L: last sub-threshold sample left of the event; t_U: first to the
        # right (clipped at the series ends)
        j = center - 1
        while j >= 0 and s2[j] >= thr:
            j -= 1
        lo = max(j, 0)
        j = center + 1
        while j < m and s2[j] >= thr:
            j += 1
        hi = min(j, m - 1)
        return lo, hi

    for _ in range(max_iterations):
        mask = excluded_mask()
        pooled_num = 0.0
        pooled_den = 0
        for seg in _runs(~mask):
            seg_vals = diff[seg[0]:seg[1] + 1]
            nj = len(seg_vals)
            if nj >= 2:
                pooled_num += (nj - 1) * seg_vals.var(ddof=1)
                pooled_den += nj - 1
        if pooled_den == 0:
            break
        sigma_pool = np.sqrt(pooled_num / pooled_den)
        new_threshold = sigma_pool * q
        if sigma_pool == 0:
            break
        threshold = min(threshold, new_threshold)
        # re-derive boundaries of existing events at the lowered threshold
        for ev in events:
            ev["lo"], ev["hi"] = boundaries(ev["center"], threshold)
        found = False
        mask = excluded_mask()
        exceed = (s2 > threshold) & ~mask
        for run in _runs(exceed):
            center = run[0] + int(np.argmax(s2[run[0]:run[1] + 1]))
            lo, hi = boundaries(center, threshold)
            events.append({"center": center, "stat": float(s2[center]),
                           "lo": lo, "hi": hi})
            found = True
        _merge_events(events)
        if not found:
            break

    out = []
    for ev in sorted(events, key=lambda e: e["center"]):
        center = ev["center"] + 1  # diff coords -> series coords
        lo, hi = ev["lo"] + 1, ev["hi"] + 1
        window = max(2, min(int(0.25 * phi.rate_hz), n // 4))
        out.append(ShiftEvent(
            index=offset + center,
            time_s=(offset + center) / phi.rate_hz,
            magnitude=estimate_magnitude(values, lo, hi, window),
            statistic=ev["stat"],
            threshold=float(threshold),
            t_lower=offset + lo,
            t_upper=offset + hi,
        ))
    return out


def pd_fixed_threshold_detect(phi: PhaseSeries, threshold: float) -> list:
    """Single-pass PD detection at a fixed critical value (parametric route).

    Each maximal run of supra-threshold |central difference| values becomes
    one event at its largest statistic.
    """
    values = phi.analysis_values()
    offset = phi.burn_in
    n = len(values)
    if n < 3:
        raise ValueError("PD detection needs at least 3 samples")
    diff = (values[2:] - values[:-2]) / 2.0
    s2 = np.abs(diff)
    events = []
    window = max(2, min(int(0.25 * phi.rate_hz), n // 4))
    for run in _runs(s2 > threshold):
        center = run[0] + int(np.argmax(s2[run[0]:run[1] + 1]))
        lo, hi = run[0] + 1, run[1] + 1
        events.append(ShiftEvent(
            index=offset + center + 1,
            time_s=(offset + center + 1) / phi.rate_hz,
            magnitude=estimate_magnitude(values, lo, hi, window),
            statistic=float(s2[center]),
            threshold=float(threshold),
            t_lower=offset + lo,
            t_upper=offset + hi,
        ))
    return events


def _runs(mask: np.ndarray) -> list:
    """Maximal [start, end] index runs of True values."""
    runs = []
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return runs
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [len(idx) - 1]))
    for s, e in zip(starts, ends):
        runs.append((int(idx[s]), int(idx[e])))
    return runs


def _merge_events(events: list) -> None:
    """Merge events whose exclusion zones touch or overlap (larger stat wins)."""
    events.sort(key=lambda e: e["lo"])
    merged = []
    for ev in events:
        if merged and ev["lo"] <= merged[-1]["hi"] + 1:
            keep = merged[-1] if merged[-1]["stat"] >= ev["stat"] else ev
            keep = dict(keep)
            keep["lo"] = min(merged[-1]["lo"], ev["lo"])
            keep["hi"] = max(merged[-1]["hi"], ev["hi"])
            merged[-1] = keep
        else:
            merged.append(dict(ev))
    events[:] = merged


# ---------------------------------------------------------------------------
# Calibration


def calibrate_nburn(null_model: NullModel, alpha: float, b: int, seed: int,
                    duration_s: float = 5.0,
                    max_burn: Optional[int] = None) -> int:
    """Minimum burn-in with null rejection of both S1 and S2 at most alpha.

    The critical values are established with a conservatively large burn-in,
    then the smallest burn-in keeping both rejection rates <= alpha on fresh
    replicates is located by bisection.
    """
    if b < 100:
        raise ValueError("calibration needs B >= 100 replicates")
    rate = null_model.rate_hz
    if max_burn is None:
        max_burn = null_model.demod.default_burn_in(rate)
    n_eval = int(duration_s * rate)
    probe = NullModel(null_model.f0_hz, rate, null_model.noise_weight,
                      null_model.demod, n_burn=0)
    rng = np.random.default_rng(seed)
    calib = probe.phase_matrix(n_eval + max_burn, b, rng)
    crit = {kind: float(np.quantile(
        _stat_max_matrix(calib[:, max_burn:], kind), 1 - alpha))
        for kind in (CUSUM, PD)}
    fresh = probe.phase_matrix(n_eval + max_burn, b, rng)

    def rejects(burn: int) -> bool:
        for kind in (CUSUM, PD):
            rate_hat = np.mean(_stat_max_matrix(fresh[:, burn:], kind) > crit[kind])
            if rate_hat > alpha:
                return True
        return False

    if rejects(max_burn):
        raise RuntimeError(
            f"target rejection rate {alpha} unreachable at max burn-in {max_burn}"
        )
    lo, hi = 0, max_burn
    if not rejects(0):
        return 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rejects(mid):
            lo = mid
        else:
            hi = mid
    return hi


def _rejection_rate(kind, null_model, n, threshold, b, rng,
                    profile=None) -> float:
    phi = null_model.phase_matrix(n, b, rng, profile=profile)
    return float(np.mean(_stat_max_matrix(phi, kind) > threshold))


def calibrate_nmin(kind: str, null_model: NullModel, alpha: float, b: int,
                   seed: int, reference_n: int = 1250,
                   ceiling: Optional[int] = None) -> int:
    """Smallest segment length keeping null rejection <= alpha at the
    reference critical value.

    The critical value is calibrated at ``reference_n`` (the full analysis
    length); the search doubles from a small floor, then bisects.
    """
    if b < 200:
        raise ValueError("calibration needs B >= 200")
    if ceiling is None:
        ceiling = reference_n
    rng = np.random.default_rng(seed)
    crit_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])
    crit = parametric_critical(kind, null_model, reference_n, alpha, b,
                               crit_seed, fit_distribution=False).value

    def ok(n: int) -> bool:
        return _rejection_rate(kind, null_model, n, crit, b, rng) <= alpha

    n = 8
    if ok(n):
        return n
    while n < ceiling:
        n_next = min(2 * n, ceiling)
        if ok(n_next):
            lo, hi = n, n_next
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if ok(mid):
                    hi = mid
                else:
                    lo = mid
            return hi
        n = n_next
        if n == ceiling:
            break
    raise RuntimeError(
        f"no segment length up to {ceiling} achieves rejection <= {alpha}"
    )


def calibrate_isimin(kind: str, null_model: NullModel, delta: float,
                     alpha: float, b: int, seed: int,
                     n: int = 2500, ceiling: Optional[int] = None,
                     slack_se: float = 2.0,
                     crit_b: Optional[int] = None) -> int:
    """Smallest exclusion half-width resolving a single injected shift.

    Simulates B replicates with one shift of magnitude ``delta`` at the
    midpoint; for a candidate half-width w the subsegments phi[:t0-w] and
    phi[t0+w:] must both be statistically indistinguishable from null: their
    rejection rate against critical values calibrated at matching lengths
    must not exceed the rejection rate of a matched pure-null control sample
    (same lengths, same critical values) by more than ``slack_se``
    two-sample binomial standard errors.  The paired control is essential:
    a fully excluded shift leaves pure null data whose rejection rate
    equals alpha only up to critical-value estimation error, so an absolute
    "<= alpha" test either flips coins at the boundary or inherits the
    common-mode error of the critical curve.  ``crit_b`` sizes the
    critical-value bank (default 4x b).
    """
    if b < 200:
        raise ValueError("calibration needs B >= 200")
    if crit_b is None:
        crit_b = 4 * b
    slack = slack_se * np.sqrt(2.0 * alpha * (1 - alpha) / b)
    if ceiling is None:
        ceiling = n // 2 - 4
    t0 = n // 2
    profile = PhaseProfile(0.0, [(null_model.burn() + t0, delta)])
    rng = np.random.default_rng(seed)
    phi = null_model.phase_matrix(n, b, rng, profile=profile)
    control = null_model.phase_matrix(n, b, rng)
    crit_cache: dict[int, float] = {}
    crit_rng = np.random.default_rng(
        int(np.random.SeedSequence([seed, 2]).generate_state(1)[0]))
    # one bank of null rows sliced to each tested length: nested windows make
    # the critical curve smooth in length, so the width search does not jitter
    # on independent per-length simulation noise
    bank = null_model.phase_matrix(n, crit_b, crit_rng)

    def crit_at(length: int) -> float:
        if length not in crit_cache:
            maxima = _stat_max_matrix(bank[:, :length], kind)
            if np.ptp(maxima) <= 0:
                raise ValueError("degenerate null sample: all maxima equal")
            crit_cache[length] = float(np.quantile(maxima, 1 - alpha))
        return crit_cache[length]

    def ok(w: int) -> bool:
        for lo, hi in ((0, t0 - w), (t0 + w, n)):
            if hi - lo < 4:
                return False
            try:
                thr = crit_at(hi - lo)
            except ValueError:
                # side too short for a non-degenerate null sample
                return False
            r_side = np.mean(_stat_max_matrix(phi[:, lo:hi], kind) > thr)
            r_ctrl = np.mean(_stat_max_matrix(control[:, lo:hi], kind) > thr)
            if r_side > r_ctrl + slack:
                return False
        return True

    w = 4
    if ok(w):
        return w
    while w < ceiling:
        w_next = min(2 * w, ceiling)
        if ok(w_next):
            lo, hi = w, w_next
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if ok(mid):
                    hi = mid
                else:
                    lo = mid
            return hi
        w = w_next
        if w == ceiling:
            break
    raise RuntimeError(
        f"no exclusion half-width up to {ceiling} reaches rejection <= {alpha}"
    )


@dataclass
class PowerSurface:
    """Detection power over an (SNR weight, shift magnitude) grid."""

    snr_weights: np.ndarray
    deltas: np.ndarray
    power: np.ndarray  # shape (len(snr_weights), len(deltas))
    delta_min: np.ndarray  # per-SNR smallest delta with power >= target
    target_power: float


def power_analysis(kind: str, null_model: NullModel, snr_weights, deltas,
                   alpha: float, b: int, seed: int, n: int = 1250,
                   match_tolerance: int = 63,
                   target_power: float = 0.8) -> PowerSurface:
    """Power to detect a single mid-signal shift per (SNR, delta) cell.

    A replicate counts as a success when the statistic exceeds the critical
    value and its argmax lies within ``match_tolerance`` samples of the shift.
    """
    snr_weights = np.atleast_1d(np.asarray(snr_weights, dtype=float))
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if len(snr_weights) == 0 or len(deltas) == 0:
        raise ValueError("grids must be non-empty")
    t0 = n // 2
    power = np.zeros((len(snr_weights), len(deltas)))
    rng = np.random.default_rng(seed)
    for i, r in enumerate(snr_weights):
        model = NullModel(null_model.f0_hz, null_model.rate_hz, float(r),
                          null_model.demod, null_model.n_burn)
        crit_seed = int(np.random.SeedSequence([seed, 3, i]).generate_state(1)[0])
        crit = parametric_critical(kind, model, n, alpha, b, crit_seed,
                                   fit_distribution=False).value
        for j, delta in enumerate(deltas):
            if delta == 0:
                phi = model.phase_matrix(n, b, rng)
            else:
                profile = PhaseProfile(0.0, [(model.burn() + t0, float(delta))])
                phi = model.phase_matrix(n, b, rng, profile=profile)
            if kind == CUSUM:
                s = _cusum_values_matrix(phi)
                arg = np.argmax(s, axis=1) + 2
                smax = s[np.arange(len(s)), np.argmax(s, axis=1)]
            else:
                d = np.abs(phi[:, 2:] - phi[:, :-2]) / 2.0
                arg = np.argmax(d, axis=1) + 1
                smax = d[np.arange(len(d)), np.argmax(d, axis=1)]
            hit = (smax > crit) & (np.abs(arg - t0) <= match_tolerance)
            power[i, j] = float(np.mean(hit))
    delta_min = np.full(len(snr_weights), np.nan)
    for i in range(len(snr_weights)):
        reached = np.flatnonzero(power[i] >= target_power)
        if len(reached):
            delta_min[i] = deltas[reached[0]]
    return PowerSurface(snr_weights, deltas, power, delta_min, target_power)
