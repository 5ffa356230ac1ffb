"""Command-line front end.

Every subcommand takes display units (kHz/us, kHz, us, dB), converts to SI,
calls the library and prints a one-line JSON summary on stdout. Optional
output paths receive plot-ready CSV/JSON files. Exit codes: 0 success,
1 domain error (bad parameter values, failed detection, infeasible
constraints), 2 usage error.
"""

import argparse
import configparser
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .montecarlo import SimConfig, awgn_channel, degradation_sweep, link_budget, run_trials
from .optimize import ConstraintSet, optimize_alpha
from .profile import available_profiles, load_profile
from .spectral import (
    bandwidth_contour,
    mask_check_spectrum,
    occupied_bandwidth_from_spectrum,
    power_spectrum,
)
from .sync import (
    ALTERNATE,
    COMPOSITE,
    DetectionError,
    SearchConfig,
    detection_report,
    estimate_frequency_error,
    paired_correlations,
    paired_detect,
    refine_timing,
)
from .units import (
    hz_from_khz,
    hz_to_khz,
    rate_from_khz_per_us,
    rate_to_khz_per_us,
    s_from_us,
    s_to_us,
)
from .waveform import ChirpParams, synthesize_composite, synthesize_prototype

logger = logging.getLogger("chirpsync")


class UsageError(Exception):
    """Bad combination of arguments that argparse cannot catch itself."""


def _emit(summary: dict) -> None:
    print(io.dumps(summary))


def _pick(value, default):
    return default if value is None else value


# -- shared argument groups -------------------------------------------------


def _add_chirp_args(p, what="prototype"):
    p.add_argument("--alpha", type=float, help=f"{what} chirp rate, kHz/us (profile default)")
    p.add_argument("--beta", type=float, default=0.0, help="linear-phase term, kHz (default 0)")
    p.add_argument("--t-us", type=float, help=f"{what} duration, us (profile default)")
    p.add_argument("--sample-rate", type=float, help="sample rate, Hz (profile default)")


def _prototype(args, prof):
    return ChirpParams.from_display(
        _pick(args.alpha, rate_to_khz_per_us(prof.prototype_alpha)),
        args.beta,
        _pick(args.t_us, s_to_us(prof.duration)),
    )


def _sub_chirp(args, prof):
    """Up-chirp half of a composite burst."""
    return ChirpParams.from_display(
        _pick(args.alpha, rate_to_khz_per_us(prof.composite_alpha)),
        args.beta,
        _pick(args.t_us, s_to_us(prof.sub_duration)),
    )


def _sample_rate(args, prof):
    return _pick(args.sample_rate, prof.sample_rate)


# -- subcommands -------------------------------------------------------------


def cmd_waveform(args, prof):
    fs = _sample_rate(args, prof)
    if args.composite:
        params = _sub_chirp(args, prof)
        sig = synthesize_composite(params, fs)
    else:
        params = _prototype(args, prof)
        sig = synthesize_prototype(params, fs)
    if args.output:
        io.write_iq(args.output, sig)
    if args.csv:
        io.signal_csv(args.csv, sig)
    _emit(
        {
            "command": "waveform",
            "composite": args.composite,
            "alpha_khz_per_us": rate_to_khz_per_us(params.alpha),
            "beta_khz": hz_to_khz(params.beta),
            "t_us": s_to_us(params.duration),
            "sample_rate_hz": fs,
            "n_samples": sig.n_samples,
            "t0_us": s_to_us(sig.t0),
            "energy": sig.energy,
            "output": args.output,
        }
    )
    return 0


def cmd_spectrum(args, prof):
    params = _prototype(args, prof)
    sigma = _pick(args.sigma, prof.sigma)
    spec = power_spectrum(params, args.sample_rate, args.zero_pad)
    obw = occupied_bandwidth_from_spectrum(spec, sigma)
    mask = prof.mask()
    rbw = hz_from_khz(args.rbw_khz)
    result = mask_check_spectrum(spec, mask, rbw)
    if args.csv:
        io.write_csv(args.csv, ("f_hz", "psd_dBc"), zip(spec.freqs, spec.to_dbc(rbw)))
    if args.mask_csv:
        io.write_csv(
            args.mask_csv,
            ("f_lo_hz", "f_hi_hz", "level_dbc"),
            mask.segments,
        )
    if args.json:
        io.write_json(args.json, result.to_dict())
    _emit(
        {
            "command": "spectrum",
            "alpha_khz_per_us": rate_to_khz_per_us(params.alpha),
            "beta_khz": hz_to_khz(params.beta),
            "t_us": s_to_us(params.duration),
            "sigma": sigma,
            "occupied_bandwidth_khz": hz_to_khz(obw),
            "mask": result.to_dict(),
        }
    )
    return 0


def cmd_contour(args, prof):
    region = bandwidth_contour(
        hz_from_khz(_pick(args.w_khz, hz_to_khz(prof.channel_bandwidth))),
        _pick(args.sigma, prof.sigma),
        s_from_us(_pick(args.t_us, s_to_us(prof.duration))),
        rate_from_khz_per_us(args.alpha_max),
        hz_from_khz(args.beta_max),
        steps=(args.steps, args.steps),
        zero_pad_factor=args.zero_pad,
    )
    if args.csv:
        io.write_csv(
            args.csv,
            ("alpha_khz_per_us", "beta_khz"),
            ((rate_to_khz_per_us(a), hz_to_khz(b)) for a, b in region.boundary),
        )
    ext = region.axis_extremum
    _emit(
        {
            "command": "contour",
            "kind": region.kind,
            "n_inside": int(region.inside.sum()),
            "n_boundary": int(region.boundary.shape[0]),
            "axis_extremum_khz_per_us": None if ext is None else rate_to_khz_per_us(ext),
        }
    )
    return 0


def cmd_optimize(args, prof):
    cs = ConstraintSet(
        delta_f_max=prof.delta_f_max,
        duration=s_from_us(_pick(args.t_us, s_to_us(prof.duration))),
        w_max=prof.channel_bandwidth,
        sigma=_pick(args.sigma, prof.sigma),
        mask=prof.mask(),
        alpha_steps=args.alpha_steps,
        beta_steps=args.beta_steps,
        zero_pad_factor=args.zero_pad,
    )
    want_region = args.region_csv is not None
    out = optimize_alpha(cs, return_grid=want_region)
    best, region = out if want_region else (out, None)
    report = best.to_dict()
    if args.json:
        io.write_json(args.json, report)
    if region is not None:
        io.write_csv(
            args.region_csv,
            ("alpha_khz_per_us", "beta_khz"),
            ((rate_to_khz_per_us(a), hz_to_khz(b)) for a, b in region.points),
        )
    _emit({"command": "optimize", "t_us": s_to_us(cs.duration), "sigma": cs.sigma, **report})
    return 0


def _add_capture_args(p):
    p.add_argument("--input", "-i", help="signal file (raw float64 I/Q with .json sidecar)")
    g = p.add_argument_group("synthetic capture (used when --input is absent)")
    g.add_argument("--df-khz", type=float, default=0.0, help="frequency error, kHz")
    g.add_argument("--delay-us", type=float, help="burst start in the capture, us (default T_s)")
    g.add_argument("--snr-db", type=float, default=math.inf, help="in-band SNR, dB (default noiseless)")
    g.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--threshold", type=float, default=0.15, help="joint-peak detection threshold")
    p.add_argument("--df-max-khz", type=float, help="frequency-error search limit, kHz")
    p.add_argument("--separation-us", type=float,
                   help="nominal up-to-down spacing for bursts sent apart (alternate mode)")
    p.add_argument("--corr-csv", help="write correlation profiles (lag_us, magnitude_up, magnitude_down)")
    p.add_argument("--json", help="write the detection report")


def _capture(args, params, prof):
    fs = _sample_rate(args, prof)
    if args.input:
        sig = io.read_iq(args.input)
        if args.sample_rate is not None and sig.sample_rate != args.sample_rate:
            raise ValueError(
                f"--sample-rate {args.sample_rate} Hz disagrees with the file's {sig.sample_rate} Hz"
            )
        return sig
    if args.separation_us is not None:
        raise UsageError("--separation-us applies only to recorded captures (--input)")
    burst = synthesize_composite(params, fs)
    delay = s_from_us(args.delay_us) if args.delay_us is not None else params.duration
    return awgn_channel(
        burst,
        args.snr_db,
        delta_f=hz_from_khz(args.df_khz),
        delay=delay,
        seed=args.seed,
        capture_duration=delay + 2 * burst.duration,
        filtered=math.isfinite(args.snr_db),
    )


def _search(args, prof):
    return SearchConfig(
        delta_f_max=hz_from_khz(_pick(args.df_max_khz, hz_to_khz(prof.delta_f_max))),
        threshold=args.threshold,
        separation=None if args.separation_us is None else s_from_us(args.separation_us),
    )


def _write_corr(path, rx, params):
    up, down = paired_correlations(rx, params)
    io.write_csv(
        path,
        ("lag_us", "magnitude_up", "magnitude_down"),
        zip(up.lags * 1e6, up.magnitudes, down.magnitudes),
    )


def _detect_common(args, prof, estimate: bool):
    params = _sub_chirp(args, prof)
    rx = _capture(args, params, prof)
    cfg = _search(args, prof)
    if args.corr_csv:
        _write_corr(args.corr_csv, rx, params)
    try:
        peaks = paired_detect(rx, params, cfg)
    except DetectionError as exc:
        report = detection_report(None)
        report["reason"] = str(exc)
        if args.json:
            io.write_json(args.json, report)
        _emit({"command": args.command, **report})
        return 1
    est = timing = None
    if estimate:
        if cfg.separation is None:
            est = estimate_frequency_error(peaks, params.alpha, 2 * params.duration, COMPOSITE)
        else:
            est = estimate_frequency_error(peaks, params.alpha, cfg.separation, ALTERNATE)
        timing = refine_timing(peaks, est)
    report = detection_report(peaks, est, timing)
    if args.json:
        io.write_json(args.json, report)
    summary = {
        "command": args.command,
        "detected": True,
        "t1_us": s_to_us(peaks.t1),
        "t2_us": s_to_us(peaks.t2),
        "d_hat_us": s_to_us(peaks.d_hat),
        "joint_metric": peaks.joint_metric,
    }
    if estimate:
        summary["delta_f_hat_khz"] = hz_to_khz(est.delta_f_hat)
        summary["tau_hat_us"] = s_to_us(est.tau_hat)
        summary["corrected_timing_us"] = s_to_us(timing)
    _emit(summary)
    return 0


def cmd_detect(args, prof):
    return _detect_common(args, prof, estimate=False)


def cmd_estimate(args, prof):
    return _detect_common(args, prof, estimate=True)


SIM_KEYS = {
    "alpha_khz_per_us": float,
    "t_us": float,
    "sample_rate_hz": float,
    "snr_db_list": lambda s: tuple(float(v) for v in s.replace(",", " ").split()),
    "n_trials": int,
    "df_min_hz": float,
    "df_max_hz": float,
    "seed": int,
    "threshold": float,
}


def read_sim_config(path) -> dict:
    """Parse a ``key = value`` file (no section header) into typed values."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string("[sim]\n" + text)
    out = {}
    for key, raw in parser["sim"].items():
        if key not in SIM_KEYS:
            raise ValueError(f"{path}: unknown key {key!r}; expected one of {', '.join(SIM_KEYS)}")
        try:
            out[key] = SIM_KEYS[key](raw)
        except ValueError:
            raise ValueError(f"{path}: bad value for {key}: {raw!r}") from None
    return out


def sim_config_from(values: dict, prof, workers: int = 1) -> SimConfig:
    params = ChirpParams.from_display(
        values.get("alpha_khz_per_us", rate_to_khz_per_us(prof.composite_alpha)),
        0.0,
        values.get("t_us", s_to_us(prof.sub_duration)),
    )
    return SimConfig(
        sub_params=params,
        sample_rate=values.get("sample_rate_hz", prof.sample_rate),
        snr_list=values.get("snr_db_list", (5.0, 0.0, -5.0)),
        n_trials=values.get("n_trials", 500),
        df_min=values.get("df_min_hz", -prof.delta_f_max),
        df_max=values.get("df_max_hz", prof.delta_f_max),
        master_seed=values.get("seed", 0),
        filter_bandwidth=prof.channel_bandwidth,
        threshold=values.get("threshold", 0.15),
        workers=workers,
    )


def cmd_simulate(args, prof):
    values = read_sim_config(args.config) if args.config else {}
    for key in ("n_trials", "seed"):
        override = getattr(args, key)
        if override is not None:
            values[key] = override
    if args.snr_db is not None:
        values["snr_db_list"] = tuple(args.snr_db)
    config = sim_config_from(values, prof, args.workers)
    report = run_trials(config)
    within = hz_from_khz(args.within_khz)
    if args.trials_csv:
        fields = ("trial", "snr_db", "df_true_hz", "df_hat_hz", "df_err_hz", "timing_err_us", "detected")
        io.write_csv(args.trials_csv, fields, ([row[f] for f in fields] for row in report.rows()))
    if args.cdf_csv:
        rows = []
        for snr in report.snr_list:
            for cond in (True, False):
                errs, frac = report.cdf(snr, conditional=cond)
                rows.extend((snr, int(cond), e, f) for e, f in zip(errs, frac))
        io.write_csv(args.cdf_csv, ("snr_db", "conditional", "err_hz", "fraction"), rows)
    per_snr = []
    for row in report.percentile_table():
        snr = row["snr_db"]
        row["fraction_within_hz"] = within
        row["fraction_within"] = report.fraction_within(snr, within)
        row["fraction_within_conditional"] = report.fraction_within(snr, within, conditional=True)
        per_snr.append(row)
    if args.json:
        io.write_json(args.json, {"config": _config_dict(config), "results": per_snr})
    _emit({"command": "simulate", "n_trials": config.n_trials, "seed": config.master_seed, "results": per_snr})
    return 0


def _config_dict(config: SimConfig) -> dict:
    p = config.sub_params
    return {
        "alpha_khz_per_us": rate_to_khz_per_us(p.alpha),
        "t_us": s_to_us(p.duration),
        "sample_rate_hz": config.sample_rate,
        "snr_db_list": list(config.snr_list),
        "n_trials": config.n_trials,
        "df_min_hz": config.df_min,
        "df_max_hz": config.df_max,
        "seed": config.master_seed,
        "threshold": config.threshold,
    }


def cmd_sweep(args, prof):
    params = _prototype(args, prof)
    dfm = hz_from_khz(_pick(args.df_max_khz, hz_to_khz(prof.delta_f_max)))
    grid = np.linspace(-dfm, dfm, args.points)
    points = degradation_sweep(params, grid, _sample_rate(args, prof))
    if args.csv:
        io.write_csv(
            args.csv,
            ("delta_f_hz", "analytic_db", "measured_db", "tau_hat_us", "measured_shift_us"),
            ((p.delta_f_hz, p.analytic_db, p.measured_db, p.tau_hat_us, p.measured_shift_us) for p in points),
        )
    dev = max(abs(p.measured_db - p.analytic_db) for p in points)
    _emit(
        {
            "command": "sweep",
            "alpha_khz_per_us": rate_to_khz_per_us(params.alpha),
            "t_us": s_to_us(params.duration),
            "points": len(points),
            "loss_at_max_db": min(p.analytic_db for p in points),
            "max_deviation_db": dev,
        }
    )
    return 0


def cmd_linkbudget(args, prof):
    d = prof.link
    lb = link_budget(
        _pick(args.p, d.tx_power_dbm),
        _pick(args.delta, d.path_loss_db),
        _pick(args.xi, d.noise_figure_db),
        _pick(args.w_dbhz, d.bandwidth_dbhz),
        _pick(args.n0, d.noise_density_dbm_hz),
    )
    _emit(
        {
            "command": "linkbudget",
            "rho_dbm": lb.rho,
            "noise_dbm": lb.noise_n,
            "eta_db": lb.snr_eta,
        }
    )
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", default="nbiot", choices=available_profiles(),
                        help="scenario constants (default nbiot)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="chirpsync",
        description="Frequency-error-resilient chirp synchronization: synthesis, spectra, "
        "optimisation, detection and Monte-Carlo evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("waveform", parents=[common], help="synthesise a chirp or composite burst")
    _add_chirp_args(p)
    p.add_argument("--composite", action="store_true",
                   help="up-chirp followed by its conjugate (--alpha/--t-us describe one half)")
    p.add_argument("--output", "-o", help="signal file path (sidecar written alongside)")
    p.add_argument("--csv", help="also write t, re, im as CSV")
    p.set_defaults(func=cmd_waveform)

    p = sub.add_parser("spectrum", parents=[common], help="power spectrum, occupied bandwidth and mask check")
    _add_chirp_args(p)
    p.add_argument("--sigma", type=float, help="out-of-band energy fraction (profile default)")
    p.add_argument("--zero-pad", type=int, default=64)
    p.add_argument("--rbw-khz", type=float, default=1.0, help="mask resolution bandwidth, kHz")
    p.add_argument("--csv", help="write f_hz, psd_dBc")
    p.add_argument("--mask-csv", help="write the mask segments")
    p.add_argument("--json", help="write the mask report")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("contour", parents=[common], help="occupied-bandwidth contour over (alpha, beta)")
    p.add_argument("--w-khz", type=float, help="bandwidth target, kHz (profile default)")
    p.add_argument("--sigma", type=float)
    p.add_argument("--t-us", type=float)
    p.add_argument("--alpha-max", type=float, default=0.4, help="grid half-width, kHz/us")
    p.add_argument("--beta-max", type=float, default=300.0, help="grid half-width, kHz")
    p.add_argument("--steps", type=int, default=41, help="points per axis (odd)")
    p.add_argument("--zero-pad", type=int, default=16)
    p.add_argument("--csv", help="write contour points (alpha_khz_per_us, beta_khz)")
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("optimize", parents=[common], help="largest chirp rate meeting all constraints")
    p.add_argument("--t-us", type=float, help="waveform duration, us (profile default)")
    p.add_argument("--sigma", type=float)
    p.add_argument("--alpha-steps", type=int, default=61)
    p.add_argument("--beta-steps", type=int, default=21)
    p.add_argument("--zero-pad", type=int, default=64)
    p.add_argument("--json", help="write the optimisation report")
    p.add_argument("--region-csv", help="write the feasible grid points")
    p.set_defaults(func=cmd_optimize)

    for name, func, text in (
        ("detect", cmd_detect, "locate the up- and down-chirp peaks of a composite burst"),
        ("estimate", cmd_estimate, "detect, then estimate frequency error and corrected timing"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        _add_chirp_args(p, "half-burst")
        _add_capture_args(p)
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo frequency-error and timing statistics")
    p.add_argument("--config", "-c", help="key = value configuration file")
    p.add_argument("--n-trials", type=int, help="overrides the config file")
    p.add_argument("--seed", type=int, help="master seed; overrides the config file")
    p.add_argument("--snr-db", type=float, nargs="+", help="SNR list; overrides the config file")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--within-khz", type=float, default=0.4, help="accuracy threshold for the summary")
    p.add_argument("--trials-csv")
    p.add_argument("--cdf-csv")
    p.add_argument("--json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="detection loss against frequency error")
    _add_chirp_args(p)
    p.add_argument("--df-max-khz", type=float)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("linkbudget", parents=[common], help="received power, noise and SNR")
    p.add_argument("--p", type=float, help="transmit power, dBm")
    p.add_argument("--delta", type=float, help="path loss, dB")
    p.add_argument("--xi", type=float, help="noise figure, dB")
    p.add_argument("--w-dbhz", type=float, help="bandwidth, dBHz")
    p.add_argument("--n0", type=float, help="noise density, dBm/Hz")
    p.set_defaults(func=cmd_linkbudget)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        prof = load_profile(args.profile)
        return args.func(args, prof)
    except UsageError as exc:
        print(f"chirpsync: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, DetectionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
