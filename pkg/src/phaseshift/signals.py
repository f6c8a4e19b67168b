"""Test-signal generation.

Noisy unit-amplitude oscillators with piecewise-constant phase profiles,
randomized shift schedules, and trajectories of two coupled Rossler
attractors integrated with fixed-step RK4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .series import TWO_PI, PhaseSeries, TimeSeries, wrap_phase


@dataclass
class PhaseProfile:
    """Piecewise-constant phase profile: base phase plus step events.

    ``events`` is an ordered list of ``(sample_index, delta_radians)`` pairs;
    the phase steps by ``delta`` at each event index.  ``truncated`` counts
    events that fell beyond the signal end during generation.
    """

    base_phase: float = 0.0
    events: list = field(default_factory=list)
    truncated: int = 0

    def __post_init__(self):
        indices = [t for t, _ in self.events]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("event indices must be strictly increasing")

    def phase_values(self, n: int) -> np.ndarray:
        """Evaluate the step function on sample indices 0..n-1."""
        phi = np.full(n, self.base_phase, dtype=float)
        for t_i, delta in self.events:
            if t_i < n:
                phi[t_i:] += delta
        return phi


def gen_oscillator(f0: float, rate: float, profile: PhaseProfile, n: int) -> TimeSeries:
    """Unit-amplitude sinusoid sin(2*pi*f0*t/rate + phi_t) with stepped phase."""
    if n <= 0:
        raise ValueError(f"sample count must be positive, got {n}")
    if not 0 < f0 < rate / 2:
        raise ValueError(
            f"oscillator frequency {f0} Hz must lie in (0, {rate / 2}) Hz (Nyquist)"
        )
    t = np.arange(n)
    phi = profile.phase_values(n)
    return TimeSeries(np.sin(TWO_PI * f0 * t / rate + phi), rate)


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def mix_noise(clean: TimeSeries, r: float, seed: int) -> TimeSeries:
    """Weighted mix of unit-power signal and unit-power white Gaussian noise.

    output = r * x/||x|| + (1-r) * eps/||eps||, with ||.|| the RMS norm.
    """
    if not 0 < r < 1:
        raise ValueError(f"noise weight r must lie in (0, 1), got {r}")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(len(clean))
    mixed = r * clean.samples / _rms(clean.samples) + (1 - r) * eps / _rms(eps)
    return TimeSeries(mixed, clean.rate_hz, clean.start_index)


def snr_from_weight(r: float) -> float:
    """SNR in dB of the r-weighted mixture: 10*log10(r^2 / (1-r)^2)."""
    if not 0 < r < 1:
        raise ValueError(f"weight must lie strictly inside (0, 1), got {r}")
    return 10.0 * np.log10(r**2 / (1 - r) ** 2)


def weight_from_snr(snr_db: float) -> float:
    """Inverse of :func:`snr_from_weight`."""
    a = 10.0 ** (snr_db / 20.0)
    return a / (1 + a)


def gen_shift_profile(
    m: int,
    delta_min: float,
    isi_min: float,
    n: int,
    seed: int,
    base_phase: float = 0.0,
) -> PhaseProfile:
    """Randomized shift schedule.

    Magnitudes are uniform on (-pi, -delta_min] U [delta_min, pi); gaps are
    isi_min plus an exponential draw with mean isi_min (inverse-CDF sampling
    for cross-platform reproducibility).  Events past ``n`` are dropped and
    counted in ``truncated``.
    """
    if m < 0:
        raise ValueError("event count must be non-negative")
    if not 0 < delta_min < np.pi:
        raise ValueError(f"delta_min must lie in (0, pi), got {delta_min}")
    if isi_min <= 0:
        raise ValueError("isi_min must be positive")
    rng = np.random.default_rng(seed)
    events = []
    truncated = 0
    t = 0.0
    for _ in range(m):
        gap = isi_min - isi_min * np.log1p(-rng.random())
        t += gap
        magnitude = rng.uniform(delta_min, np.pi)
        if rng.random() < 0.5:
            magnitude = -magnitude
        if int(round(t)) < n:
            events.append((int(round(t)), magnitude))
        else:
            truncated += 1
    return PhaseProfile(base_phase, events, truncated)


@dataclass
class RosslerParams:
    """Two coupled Rossler attractors with frequency mismatch.

    omega_1 = 2*pi*f0 + delta_omega, omega_2 = 2*pi*f0 - delta_omega.
    The integration rate must be an integer multiple of the output rate so
    decimation is exact.
    """

    a: float = 0.15
    b: float = 0.2
    c: float = 10.0
    coupling: float = 0.12
    f0_hz: float = 9.0
    delta_omega: float = 0.675
    internal_rate_hz: float = 10_000.0
    output_rate_hz: float = 250.0
    burn_in_s: float = 30.0
    init_box: float = 10.0
    divergence_bound: float = 1e6

    def __post_init__(self):
        ratio = self.internal_rate_hz / self.output_rate_hz
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(
                "internal_rate_hz must be an integer multiple of output_rate_hz"
            )

    @property
    def omega_1(self) -> float:
        return TWO_PI * self.f0_hz + self.delta_omega

    @property
    def omega_2(self) -> float:
        return TWO_PI * self.f0_hz - self.delta_omega


@njit(cache=True)
def _rossler_rhs(state, omega1, omega2, a, b, c, coupling):
    x1, y1, z1, x2, y2, z2 = state
    out = np.empty(6)
    out[0] = omega1 * (-y1 - z1) + coupling * (x2 - x1)
    out[1] = omega1 * (x1 + a * y1)
    out[2] = omega1 * (b + z1 * (x1 - c))
    out[3] = omega2 * (-y2 - z2) + coupling * (x1 - x2)
    out[4] = omega2 * (x2 + a * y2)
    out[5] = omega2 * (b + z2 * (x2 - c))
    return out


@njit(cache=True)
def _integrate_rossler(state, dt, n_steps, keep_every, n_keep, skip,
                       omega1, omega2, a, b, c, coupling, bound):
    """RK4 loop; stores every ``keep_every``-th state after ``skip`` steps.

    Returns (output, blow_up_step); blow_up_step is -1 on success.
    """
    out = np.empty((n_keep, 6))
    kept = 0
    for step in range(n_steps):
        k1 = _rossler_rhs(state, omega1, omega2, a, b, c, coupling)
        k2 = _rossler_rhs(state + 0.5 * dt * k1, omega1, omega2, a, b, c, coupling)
        k3 = _rossler_rhs(state + 0.5 * dt * k2, omega1, omega2, a, b, c, coupling)
        k4 = _rossler_rhs(state + dt * k3, omega1, omega2, a, b, c, coupling)
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for j in range(6):
            if abs(state[j]) > bound:
                return out, step
        if step >= skip and (step - skip) % keep_every == 0:
            if kept < n_keep:
                out[kept] = state
                kept += 1
    return out, -1


def simulate_rossler(params: RosslerParams, duration_s: float, seed: int,
                     max_retries: int = 0):
    """Integrate the coupled system and return six decimated TimeSeries.

    Initial conditions are uniform in [-init_box, init_box]^3 per attractor
    (seeded); the first ``burn_in_s`` seconds are discarded and the trajectory
    decimated from the internal rate to the output rate.  Some initial points
    lie outside the attractor's basin and blow up almost immediately; with
    ``max_retries`` > 0 fresh initial conditions are drawn from the same
    stream before giving up.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    dt = 1.0 / params.internal_rate_hz
    keep_every = int(round(params.internal_rate_hz / params.output_rate_hz))
    skip = int(round(params.burn_in_s * params.internal_rate_hz))
    n_keep = int(round(duration_s * params.output_rate_hz))
    n_steps = skip + n_keep * keep_every
    blow_up = -1
    for _ in range(max_retries + 1):
        state = rng.uniform(-params.init_box, params.init_box, size=6)
        out, blow_up = _integrate_rossler(
            state, dt, n_steps, keep_every, n_keep, skip,
            params.omega_1, params.omega_2, params.a, params.b, params.c,
            params.coupling, params.divergence_bound,
        )
        if blow_up < 0:
            break
    if blow_up >= 0:
        raise FloatingPointError(
            f"Rossler trajectory diverged at t={blow_up * dt:.3f} s "
            f"(|state| > {params.divergence_bound:g})"
        )
    rate = params.output_rate_hz
    return tuple(TimeSeries(out[:, j].copy(), rate) for j in range(6))


def poincare_phase(x: TimeSeries, y: TimeSeries) -> PhaseSeries:
    """Four-quadrant angle of (x_t, y_t), straightened.

    Serves as the ground-truth phase of a rotating trajectory.
    """
    if len(x) != len(y):
        raise ValueError("x and y must have equal length")
    zero = (x.samples == 0) & (y.samples == 0)
    if np.any(zero):
        raise ValueError(
            f"angle undefined at (0, 0) input sample (first at index {np.argmax(zero)})"
        )
    wrapped = np.arctan2(y.samples, x.samples)
    return PhaseSeries(np.unwrap(wrapped), x.rate_hz, burn_in=0, straightened=True)


def phase_slip_events(difference, threshold: float = 0.6) -> list:
    """Full-cycle slips of a straightened phase difference (ground truth).

    Schmitt-trigger level tracking: an event fires when the difference moves
    more than ``threshold`` cycles beyond the current locking level, which
    then advances by one full cycle.  The hysteresis keeps within-lock
    fluctuations (typically well under half a cycle) from chattering.
    Returns (sample_index, direction) pairs with direction +-1.
    """
    d = difference.values if isinstance(difference, PhaseSeries) else \
        np.asarray(difference, dtype=float)
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1) cycles, got {threshold}")
    base = d[0]
    level = 0.0
    events = []
    for i in range(len(d)):
        x = d[i] - base - TWO_PI * level
        if x > TWO_PI * threshold:
            level += 1.0
            events.append((i, 1))
        elif x < -TWO_PI * threshold:
            level -= 1.0
            events.append((i, -1))
    return events
