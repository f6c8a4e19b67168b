"""Command-line front end.

Subcommands: simulate-oscillator, simulate-rossler, detect, calibrate,
evaluate, rerun.  Every run writes a manifest with the fully resolved
configuration and seed; re-running a manifest reproduces the primary
outputs byte-exactly.

Exit codes: 0 success, 2 configuration errors, 3 I/O errors, 4 numerical
failures.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import detect as det
from . import evaluation as ev
from . import figures as figs
from .io import (derive_seed, read_csv, read_json, write_csv, write_json,
                 write_manifest)
from .phase import DemodConfig, acf_first_zero, complex_demodulate, \
    phase_difference, straighten_phase
from .pipeline import METHODS, detect_events
from .series import PhaseSeries, TimeSeries
from .signals import (PhaseProfile, RosslerParams, gen_oscillator,
                      gen_shift_profile, mix_noise, simulate_rossler,
                      poincare_phase, weight_from_snr)

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class CliError(click.ClickException):
    def __init__(self, message, code):
        super().__init__(message)
        self.exit_code = code


def _guard(fn, *args, **kwargs):
    """Map internal failures onto the documented exit codes."""
    try:
        return fn(*args, **kwargs)
    except (FileNotFoundError, OSError) as exc:
        raise CliError(f"I/O failure: {exc}", EXIT_IO)
    except (ValueError, KeyError) as exc:
        raise CliError(f"configuration error: {exc}", EXIT_CONFIG)
    except (FloatingPointError, RuntimeError, np.linalg.LinAlgError) as exc:
        raise CliError(f"numerical failure: {exc}", EXIT_NUMERIC)


def _load_config_defaults(config_path, command):
    if not config_path:
        return {}
    cfg = read_json(config_path)
    return cfg.get(command, cfg)


def _resolve(ctx, config_path, command, **flags):
    """Config-file values fill in flags the user left at their defaults."""
    defaults = _load_config_defaults(config_path, command)
    resolved = {}
    for key, value in flags.items():
        source = ctx.get_parameter_source(key)
        if (key in defaults
                and source == click.core.ParameterSource.DEFAULT):
            resolved[key] = defaults[key]
        else:
            resolved[key] = value
    return resolved


@click.group()
def main():
    """Instantaneous-phase shift detection toolkit."""


def _common_options(fn):
    fn = click.option("--seed", type=int, default=0, show_default=True,
                      help="Global seed; component seeds are derived.")(fn)
    fn = click.option("--config", "config_path", type=click.Path(),
                      default=None, help="JSON config file with defaults.")(fn)
    fn = click.option("--out-dir", type=click.Path(), default=".",
                      show_default=True)(fn)
    fn = click.option("--threads", type=int, default=1, show_default=True,
                      help="Parallelism hint (runs are vectorized internally).")(fn)
    return fn


# ---------------------------------------------------------------------------
# simulate-oscillator


def run_simulate_oscillator(cfg: dict, out_dir) -> dict:
    out_dir = Path(out_dir)
    rate = cfg["rate"]
    n = int(round(cfg["duration_s"] * rate))
    r = weight_from_snr(cfg["snr_db"])
    profile = gen_shift_profile(
        cfg["shifts"], cfg["delta_min"], cfg["isi_min_s"] * rate, n,
        derive_seed(cfg["seed"], "oscillator-profile"),
        base_phase=cfg["base_phase"],
    ) if cfg["shifts"] > 0 else PhaseProfile(cfg["base_phase"], [])
    clean = gen_oscillator(cfg["f0"], rate, profile, n)
    noisy = mix_noise(clean, r, derive_seed(cfg["seed"], "oscillator-noise"))
    t = np.arange(n)
    write_csv(out_dir / "signal.csv", ["index", "time_s", "value"],
              [t, t / rate, noisy.samples])
    write_json(out_dir / "truth.json", {
        "rate_hz": rate,
        "base_phase": profile.base_phase,
        "events": [{"index": i, "magnitude_rad": d} for i, d in profile.events],
        "truncated": profile.truncated,
        "noise_weight": r,
    })
    write_manifest(out_dir, "simulate-oscillator", cfg)
    return {"signal": str(out_dir / "signal.csv"), "events": len(profile.events)}


@main.command("simulate-oscillator")
@_common_options
@click.option("--f0", type=float, default=9.0, show_default=True)
@click.option("--rate", type=float, default=250.0, show_default=True)
@click.option("--snr-db", type=float, default=0.0, show_default=True)
@click.option("--shifts", type=int, default=20, show_default=True)
@click.option("--delta-min", type=float, default=0.15, show_default=True)
@click.option("--isi-min-s", type=float, default=1.0, show_default=True)
@click.option("--duration-s", type=float, default=45.0, show_default=True)
@click.option("--base-phase", type=float, default=0.0, show_default=True)
@click.pass_context
def cmd_simulate_oscillator(ctx, config_path, out_dir, threads, **flags):
    """Noisy oscillator with a randomized phase-shift profile."""
    cfg = _resolve(ctx, config_path, "simulate-oscillator", **flags)
    result = _guard(run_simulate_oscillator, cfg, out_dir)
    click.echo(json.dumps(result))


# ---------------------------------------------------------------------------
# simulate-rossler


def run_simulate_rossler(cfg: dict, out_dir) -> dict:
    out_dir = Path(out_dir)
    params = RosslerParams(
        a=cfg["a"], b=cfg["b"], c=cfg["c"], coupling=cfg["coupling"],
        f0_hz=cfg["f0"], delta_omega=cfg["delta_omega"],
        internal_rate_hz=cfg["internal_rate"],
        output_rate_hz=cfg["output_rate"], burn_in_s=cfg["burn_in_s"],
    )
    channels = simulate_rossler(params, cfg["duration_s"],
                                derive_seed(cfg["seed"], "rossler-init"))
    names = ["x1", "y1", "z1", "x2", "y2", "z2"]
    n = len(channels[0])
    t = np.arange(n)
    rate = params.output_rate_hz
    write_csv(out_dir / "rossler.csv", ["index", "time_s"] + names,
              [t, t / rate] + [ch.samples for ch in channels])
    ph1 = poincare_phase(channels[0], channels[1])
    ph2 = poincare_phase(channels[3], channels[4])
    write_csv(out_dir / "poincare.csv",
              ["index", "time_s", "phase1_rad", "phase2_rad", "difference_rad"],
              [t, t / rate, ph1.values, ph2.values, ph1.values - ph2.values])
    write_manifest(out_dir, "simulate-rossler", cfg)
    return {"trajectory": str(out_dir / "rossler.csv"), "samples": n}


@main.command("simulate-rossler")
@_common_options
@click.option("--a", type=float, default=0.15, show_default=True)
@click.option("--b", type=float, default=0.2, show_default=True)
@click.option("--c", type=float, default=10.0, show_default=True)
@click.option("--coupling", type=float, default=0.12, show_default=True)
@click.option("--f0", type=float, default=9.0, show_default=True)
@click.option("--delta-omega", type=float, default=0.675, show_default=True,
              help="Frequency mismatch (rad/s); 0.0675 gives the "
                   "locking/shifting regime at weak coupling.")
@click.option("--internal-rate", type=float, default=10000.0, show_default=True)
@click.option("--output-rate", type=float, default=250.0, show_default=True)
@click.option("--burn-in-s", type=float, default=30.0, show_default=True)
@click.option("--duration-s", type=float, default=600.0, show_default=True)
@click.pass_context
def cmd_simulate_rossler(ctx, config_path, out_dir, threads, **flags):
    """Coupled Rossler attractors with Poincare-phase ground truth."""
    cfg = _resolve(ctx, config_path, "simulate-rossler", **flags)
    result = _guard(run_simulate_rossler, cfg, out_dir)
    click.echo(json.dumps(result))


# ---------------------------------------------------------------------------
# detect


def _phase_from_input(cfg: dict) -> PhaseSeries:
    header, cols = read_csv(cfg["input"])
    if "time_s" in cols and len(cols["time_s"]) > 1:
        rate = 1.0 / float(np.median(np.diff(cols["time_s"])))
    else:
        rate = cfg["rate"]
    channels = [c for c in header if c not in ("index", "time_s")]
    picked = cfg["channels"].split(",") if cfg["channels"] else channels[:1]
    for name in picked:
        if name not in cols:
            raise ValueError(f"channel {name!r} not in input (have {channels})")
    if cfg["phase_input"]:
        if len(picked) == 1:
            phi = PhaseSeries(np.unwrap(cols[picked[0]]), rate,
                              straightened=True)
        else:
            phi = PhaseSeries(
                np.unwrap(cols[picked[0]]) - np.unwrap(cols[picked[1]]),
                rate, straightened=True)
        phi.burn_in = cfg["burn_in"] or 0
        return phi
    demod = DemodConfig(cfg["center_freq"], cfg["bandwidth"],
                        filter_type=cfg["filter"], butter_order=cfg["order"])
    burn = cfg["burn_in"]
    series = [complex_demodulate(TimeSeries(cols[name], rate), demod,
                                 burn_in=burn) for name in picked]
    if len(series) == 1:
        return straighten_phase(series[0])
    return phase_difference(series[0], series[1])


def run_detect(cfg: dict, out_dir) -> dict:
    out_dir = Path(out_dir)
    phi = _phase_from_input(cfg)
    null_model = None
    if cfg["method"] in ("cusum-parametric", "pd-parametric"):
        demod = DemodConfig(cfg["center_freq"], cfg["bandwidth"],
                            filter_type=cfg["filter"], butter_order=cfg["order"])
        null_model = det.NullModel(cfg["center_freq"], phi.rate_hz,
                                   cfg["null_weight"], demod, cfg["burn_in"])
    events, meta = detect_events(
        phi, cfg["method"], cfg["alpha"], null_model=null_model,
        tau=cfg["tau"] or None, isi_min=cfg["isi_min"], n_min=cfg["n_min"],
        bootstrap_b=cfg["bootstrap_b"],
        seed=derive_seed(cfg["seed"], "detect"),
        tau_segment_s=cfg["tau_segment_s"])
    payload = {
        "events": [dict(e.to_dict(), method=cfg["method"]) for e in events],
        "meta": dict(meta, rate_hz=phi.rate_hz, burn_in=phi.burn_in,
                     config=cfg),
    }
    write_json(out_dir / "events.json", payload)
    write_manifest(out_dir, "detect", cfg)
    return {"events": len(events), "output": str(out_dir / "events.json")}


@main.command("detect")
@_common_options
@click.option("--input", "input_path", type=click.Path(), required=True)
@click.option("--method", type=click.Choice(METHODS), default="cusum-parametric",
              show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--center-freq", type=float, default=9.0, show_default=True)
@click.option("--bandwidth", type=float, default=1.0, show_default=True,
              help="Low-pass half bandwidth (Hz).")
@click.option("--filter", "filter_", type=click.Choice(["butterworth", "ewma"]),
              default="butterworth", show_default=True)
@click.option("--order", type=int, default=4, show_default=True)
@click.option("--burn-in", type=int, default=None,
              help="Burn-in samples (default: filter heuristic).")
@click.option("--channels", type=str, default=None,
              help="Channel name, or 'a,b' for the pairwise phase difference.")
@click.option("--phase-input", is_flag=True, default=False,
              help="Input columns already contain phase in radians.")
@click.option("--rate", type=float, default=250.0, show_default=True,
              help="Sample rate when the input lacks a time column.")
@click.option("--tau", type=int, default=0,
              help="Dependence scale; 0 = estimate from the series.")
@click.option("--tau-segment-s", type=float, default=4.0, show_default=True)
@click.option("--isi-min", type=int, default=250, show_default=True)
@click.option("--n-min", type=int, default=8, show_default=True)
@click.option("--bootstrap-b", type=int, default=1000, show_default=True)
@click.option("--null-weight", type=float, default=0.5, show_default=True,
              help="Noise weight r of the parametric null model.")
@click.pass_context
def cmd_detect(ctx, config_path, out_dir, threads, input_path, filter_, **flags):
    """Detect phase-shift events in a signal or phase CSV."""
    flags["input"] = input_path
    flags["filter"] = filter_
    cfg = _resolve(ctx, config_path, "detect", **flags)
    result = _guard(run_detect, cfg, out_dir)
    click.echo(json.dumps(result))


# ---------------------------------------------------------------------------
# calibrate


def _cache_path(cfg: dict):
    cache_dir = cfg.get("cache_dir") or os.environ.get("PHASESHIFT_CACHE_DIR")
    if not cache_dir:
        return None
    key = json.dumps({k: cfg[k] for k in sorted(cfg) if k != "cache_dir"},
                     sort_keys=True)
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    return Path(cache_dir) / f"calibration-{cfg['kind']}-{digest}.json"


def run_calibrate(cfg: dict, out_dir) -> dict:
    out_dir = Path(out_dir)
    cache = _cache_path(cfg)
    if cache is not None and cache.exists():
        payload = read_json(cache)
        payload["cache_hit"] = True
        write_json(out_dir / "calibration.json", payload)
        write_manifest(out_dir, "calibrate", cfg)
        return {"cache_hit": True, "output": str(out_dir / "calibration.json")}
    demod = DemodConfig(cfg["center_freq"], cfg["bandwidth"],
                        filter_type=cfg["filter"], butter_order=cfg["order"])
    model = det.NullModel(cfg["center_freq"], cfg["rate"], cfg["null_weight"],
                          demod)
    seed = derive_seed(cfg["seed"], f"calibrate-{cfg['kind']}")
    b = cfg["bootstrap_b"]
    alpha = cfg["alpha"]
    kind = cfg["statistic"]
    payload = {"kind": cfg["kind"], "alpha": alpha, "B": b, "seed": cfg["seed"],
               "statistic": kind, "cache_hit": False}
    if cfg["kind"] == "critical":
        n = int(cfg["length_s"] * cfg["rate"])
        cv = det.parametric_critical(kind, model, n, alpha, b, seed)
        rng = np.random.default_rng(derive_seed(cfg["seed"], "calibrate-audit"))
        audit = det._rejection_rate(kind, model, n, cv.value, b, rng)
        payload.update({
            "critical_value": cv.value, "n": n,
            "gev": {"location": cv.gev.location, "scale": cv.gev.scale,
                    "shape": cv.gev.shape, "ks_statistic": cv.gev.ks_statistic,
                    "ks_pvalue": cv.gev.ks_pvalue},
            "rejection_rate_audit": audit,
        })
    elif cfg["kind"] == "nburn":
        payload["n_burn"] = det.calibrate_nburn(model, alpha, b, seed,
                                                duration_s=cfg["length_s"])
    elif cfg["kind"] == "nmin":
        payload["n_min"] = det.calibrate_nmin(
            kind, model, alpha, b, seed,
            reference_n=int(cfg["length_s"] * cfg["rate"]))
    elif cfg["kind"] == "isimin":
        payload["isi_min"] = det.calibrate_isimin(
            kind, model, cfg["delta"], alpha, b, seed,
            n=int(cfg["length_s"] * cfg["rate"]))
    elif cfg["kind"] == "power":
        weights = [weight_from_snr(s) for s in cfg["snr_grid"]]
        surface = det.power_analysis(kind, model, weights, cfg["delta_grid"],
                                     alpha, b, seed,
                                     n=int(cfg["length_s"] * cfg["rate"]))
        payload.update({
            "snr_grid": list(cfg["snr_grid"]),
            "delta_grid": list(cfg["delta_grid"]),
            "power": surface.power.tolist(),
            "delta_min_at_power": surface.delta_min.tolist(),
            "target_power": surface.target_power,
        })
    else:
        raise ValueError(f"unknown calibration kind {cfg['kind']!r}")
    write_json(out_dir / "calibration.json", payload)
    if cache is not None:
        write_json(cache, payload)
    write_manifest(out_dir, "calibrate", cfg)
    return {"cache_hit": False, "output": str(out_dir / "calibration.json")}


def _parse_grid(text):
    return [float(v) for v in text.split(",")] if text else []


@main.command("calibrate")
@_common_options
@click.option("--kind", type=click.Choice(["critical", "nburn", "nmin",
                                           "isimin", "power"]), required=True)
@click.option("--statistic", type=click.Choice([det.CUSUM, det.PD]),
              default=det.CUSUM, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--center-freq", type=float, default=9.0, show_default=True)
@click.option("--bandwidth", type=float, default=1.0, show_default=True)
@click.option("--filter", "filter_", type=click.Choice(["butterworth", "ewma"]),
              default="butterworth", show_default=True)
@click.option("--order", type=int, default=4, show_default=True)
@click.option("--rate", type=float, default=250.0, show_default=True)
@click.option("--null-weight", type=float, default=0.5, show_default=True)
@click.option("--length-s", type=float, default=5.0, show_default=True)
@click.option("--delta", type=float, default=1.5708, show_default=True)
@click.option("--snr-grid", type=str, default="", help="dB values, comma separated.")
@click.option("--delta-grid", type=str, default="", help="radians, comma separated.")
@click.option("--bootstrap-b", type=int, default=1000, show_default=True)
@click.option("--cache-dir", type=click.Path(), default=None)
@click.pass_context
def cmd_calibrate(ctx, config_path, out_dir, threads, filter_, snr_grid,
                  delta_grid, **flags):
    """Calibrate critical values, burn-in, N_min, ISI_min, or a power grid."""
    flags["filter"] = filter_
    flags["snr_grid"] = _parse_grid(snr_grid)
    flags["delta_grid"] = _parse_grid(delta_grid)
    cfg = _resolve(ctx, config_path, "calibrate", **flags)
    result = _guard(run_calibrate, cfg, out_dir)
    click.echo(json.dumps(result))


# ---------------------------------------------------------------------------
# evaluate


def run_evaluate(cfg: dict, out_dir) -> dict:
    out_dir = Path(out_dir)
    truth_doc = read_json(cfg["truth"])
    rate = truth_doc.get("rate_hz", cfg["rate"])
    truth_idx = sorted(e["index"] for e in truth_doc["events"])
    counts_by_alpha = {}
    all_events = []
    for path in cfg["events"]:
        doc = read_json(path)
        ev_rate = doc["meta"].get("rate_hz")
        if ev_rate is not None and abs(ev_rate - rate) > 1e-9:
            raise ValueError(
                f"{path}: sample rate {ev_rate} does not match truth rate {rate}")
        alpha = doc["meta"]["alpha"]
        idx = sorted(e["index"] for e in doc["events"])
        n = doc["meta"].get("n", (max(idx + truth_idx) + 1) if idx + truth_idx else 1)
        counts_by_alpha[alpha] = ev.match_events(
            idx, truth_idx, cfg["tolerance"], n)
        all_events.extend(idx)
    report = {"per_alpha": [
        dict(alpha=a, tp=c.tp, fp=c.fp, tn=c.tn, fn=c.fn,
             tp_rate=c.tp_rate, fp_rate=c.fp_rate, accuracy=ev.accuracy(c))
        for a, c in sorted(counts_by_alpha.items())]}
    curve = None
    if len(counts_by_alpha) >= 3:
        curve = ev.roc_curve(counts_by_alpha)
        report["auroc"] = curve.auroc
        report["max_accuracy"] = {"accuracy": curve.max_accuracy[0],
                                  "alpha": curve.max_accuracy[1]}
    fit = None
    isis = ev.events_to_isis(sorted(all_events), rate)
    if len(isis) >= 200:
        fit = ev.isi_powerlaw(isis)
        report["isi_powerlaw"] = {"q": fit.slope_q, "r_squared": fit.r_squared,
                                  "tail_start": fit.tail_start}
        write_csv(out_dir / "isi_histogram.csv",
                  ["bin_center", "count", "density"],
                  [fit.bin_centers, fit.counts, fit.density])
    if cfg["stimulus_times"]:
        stim = read_json(cfg["stimulus_times"])["times_s"]
        chi2, p, bins = ev.uniformity_test(
            [i / rate for i in sorted(all_events)], stim,
            window_s=cfg["window_s"], bins=cfg["bins"])
        report["uniformity"] = {"chi2": chi2, "p_value": p,
                                "bin_counts": bins.tolist()}
    write_json(out_dir / "report.json", report)
    rendered = []
    if cfg["figures"]:
        if curve is not None:
            rendered.append(str(figs.plot_roc({"detector": curve},
                                              out_dir / "roc.png")))
        if fit is not None:
            rendered.append(str(figs.plot_isi_histogram(
                fit, out_dir / "isi_histogram.png")))
    write_manifest(out_dir, "evaluate", cfg)
    return {"report": str(out_dir / "report.json"), "figures": rendered}


@main.command("evaluate")
@_common_options
@click.option("--events", type=click.Path(), multiple=True,
              required=True, help="events.json files (one per alpha).")
@click.option("--truth", type=click.Path(), required=True)
@click.option("--tolerance", type=int, default=125, show_default=True,
              help="Matching tolerance in samples.")
@click.option("--rate", type=float, default=250.0, show_default=True)
@click.option("--stimulus-times", type=click.Path(), default=None,
              help="JSON with {'times_s': [...]} for the uniformity test.")
@click.option("--window-s", type=float, default=0.5, show_default=True)
@click.option("--bins", type=int, default=10, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.pass_context
def cmd_evaluate(ctx, config_path, out_dir, threads, events, **flags):
    """Score detections against ground truth; write report and figures."""
    flags["events"] = list(events)
    cfg = _resolve(ctx, config_path, "evaluate", **flags)
    result = _guard(run_evaluate, cfg, out_dir)
    click.echo(json.dumps(result))


# ---------------------------------------------------------------------------
# rerun


_RUNNERS = {
    "simulate-oscillator": run_simulate_oscillator,
    "simulate-rossler": run_simulate_rossler,
    "detect": run_detect,
    "calibrate": run_calibrate,
    "evaluate": run_evaluate,
}


@main.command("rerun")
@click.argument("manifest", type=click.Path())
@click.option("--out-dir", type=click.Path(), default=".", show_default=True)
def cmd_rerun(manifest, out_dir):
    """Re-run a recorded manifest; outputs are byte-identical."""
    doc = read_json(manifest)
    runner = _RUNNERS.get(doc.get("command"))
    if runner is None:
        raise CliError(f"unknown command in manifest: {doc.get('command')!r}",
                       EXIT_CONFIG)
    result = _guard(runner, doc["config"], out_dir)
    click.echo(json.dumps(result))


if __name__ == "__main__":
    main()
