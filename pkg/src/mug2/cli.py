"""Command-line interface: every operation as a subcommand with
deterministic, machine-readable output.

Data rows go to --out (default stdout) prefixed by a '#' metadata header
echoing the effective configuration; diagnostics go to stderr. Numbers
are printed with 12 significant digits, so identical (argv, constants,
seed) reproduce byte-identical output for any --threads value. Exit
codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, anomaly, decaygen, precession, wigglefit
from .constants import ConfigError, coefficient_C, dump_constants, load_constants

ENV_CONSTANTS = "MUG2_CONSTANTS"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    return f"{float(x):.12g}"


class _Writer:
    def __init__(self, args, subcommand: str, params: dict):
        self.delim = "\t" if args.format == "tsv" else ","
        self.lines: list[str] = []
        # --threads is deliberately not echoed: output is byte-identical
        # for any worker cap, so it is not part of the effective config.
        self.comment("tool", f"mug2 {__version__}")
        self.comment("subcommand", subcommand)
        self.comment("constants", args.constants_label)
        self.comment("seed", str(args.seed))
        for k, v in params.items():
            self.comment(k, v if isinstance(v, str) else _fmt(v))

    def comment(self, key: str, value: str):
        self.lines.append(f"# {key}: {value}")

    def columns(self, *names: str):
        self.lines.append("# columns: " + self.delim.join(names))

    def row(self, *values):
        self.lines.append(self.delim.join(_fmt(v) for v in values))

    def keyval(self, key: str, value):
        self.lines.append(f"{key} = {_fmt(value)}")

    def raw(self, text: str):
        self.lines.append(text.rstrip("\n"))

    def flush(self, out_path: str | None):
        text = "\n".join(self.lines) + "\n"
        if out_path:
            Path(out_path).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)


def _parse_window(spec: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in spec.split(","))
    except ValueError:
        raise ValueError(f"expected 'lo,hi', got {spec!r}") from None
    return lo, hi


def _parse_windows(spec: str) -> list[tuple[float, float]]:
    return [_parse_window(part) for part in spec.split(";") if part]


def _parse_bins_spec(spec: str, e_max: float) -> list[tuple[float, float]]:
    """Either explicit 'lo,hi;lo,hi;...' windows or 'lo:hi:n' equal bins."""
    if ":" in spec:
        lo, hi, n = spec.split(":")
        edges = np.linspace(float(lo), float(hi), int(n) + 1)
        return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]
    return _parse_windows(spec)


def _empirical(args, table):
    if getattr(args, "bins_file", None):
        return anomaly.ingest_bins(args.bins_file, asym_power=args.asym_power,
                                   e_max=table.E_max)
    return None


def _cmd_constants(args, table):
    w = _Writer(args, "constants", {})
    w.raw(dump_constants(table))
    w.flush(args.out)
    return 0


def _cmd_precess(args, table):
    s0 = np.array([float(v) for v in args.s0.split(",")])
    if s0.size != 3:
        raise ValueError("--s0 expects three comma-separated components")
    mu_nat = args.mu * table.e_natural / (2.0 * table.m_e)   # Bohr magnetons -> GeV^-1
    b_nat = args.B * table.tesla_to_gev2
    t_nat = args.t / table.hbar_over_GeV_s
    path = precession.precess_path(precession.SpinState(s0), mu_nat,
                                   precession.FieldConfig.from_natural(b_nat),
                                   t_nat, args.steps)
    w = _Writer(args, "precess", {
        "s0": args.s0, "mu_bohr_magneton": args.mu, "B_tesla": args.B,
        "t_s": args.t, "steps": args.steps,
    })
    w.columns("t_s", "sx", "sy", "sz")
    for t, sx, sy, sz in path:
        w.row(t * table.hbar_over_GeV_s, sx, sy, sz)
    w.flush(args.out)
    return 0


def _cmd_spectrum(args, table):
    window = _parse_window(args.window) if args.window else (0.0, table.E_max)
    beam = decaygen.MuonBeam(gamma_mu=table.gamma_magic, polarization=args.pol,
                             E_max=table.E_max)
    sample = decaygen.generate_events(int(args.events), beam, args.seed,
                                      threads=args.threads)
    spec = decaygen.spectrum_table(sample, bins=args.ybins, window=window)
    emp = _empirical(args, table)
    fdist = decaygen.f_distribution(args.weighting, window, e_max=table.E_max,
                                    bins=args.ybins, empirical=emp)
    w = _Writer(args, "spectrum", {
        "events": int(args.events), "pol": args.pol,
        "window_GeV": f"{window[0]:g},{window[1]:g}", "weighting": args.weighting,
        "ybins": args.ybins,
    })
    w.comment("table", "spectrum")
    w.columns("y", "N_mc", "N_analytic", "A_mc", "A_analytic")
    for row in spec:
        w.row(*row)
    w.comment("table", "f_distribution")
    w.comment("mean_f", _fmt(fdist.mean))
    w.comment("mode_f", _fmt(fdist.mode))
    w.columns("f", "weight")
    centers = 0.5 * (fdist.f_edges[:-1] + fdist.f_edges[1:])
    for f, d in zip(centers, fdist.density):
        w.row(f, d)
    w.flush(args.out)
    return 0


def _cmd_correction(args, table):
    model = anomaly.CorrectionModel.from_constants(table)
    d = anomaly.delta_a(args.f, model)
    w = _Writer(args, "correction", {"f": args.f, "C": model.C,
                                     "a_mu_ref": model.a_mu_ref})
    w.columns("f", "delta_a", "ppm")
    w.row(args.f, d, anomaly.to_ppm(d, table))
    w.flush(args.out)
    return 0


_WEIGHT_NOTE = ("asymmetry weighting is a convention, not a derivation: "
                "N, A, NA, NA2 and empirical are all supported; NA2 is the "
                "statistical-power default and results record the choice")


def _cmd_average(args, table):
    model = anomaly.CorrectionModel.from_constants(table)
    cfg = anomaly.AveragingConfig(window=_parse_window(args.window),
                                  weighting=args.weighting, e_max=table.E_max,
                                  empirical=_empirical(args, table))
    avg = anomaly.average_anomaly(cfg, model)
    w = _Writer(args, "average", {
        "window_GeV": args.window, "weighting": args.weighting,
        "asym_power": args.asym_power, "bins_file": args.bins_file or "none",
        "note": _WEIGHT_NOTE,
    })
    w.columns("weighting", "E_lo_GeV", "E_hi_GeV", "mean_abs", "mean_ppm", "sigma_ppm")
    w.row(avg.weighting, avg.window[0], avg.window[1], avg.mean_abs,
          avg.mean_ppm, avg.sigma_ppm)
    w.flush(args.out)
    return 0


def _cmd_fig1(args, table):
    model = anomaly.CorrectionModel.from_constants(table)
    avgs = []
    for lo, hi in _parse_windows(args.windows):
        cfg = anomaly.AveragingConfig(window=(lo, hi), weighting=args.weighting,
                                      e_max=table.E_max,
                                      empirical=_empirical(args, table))
        avgs.append(anomaly.average_anomaly(cfg, model))
    rows = anomaly.fig1_table(avgs, table)
    w = _Writer(args, "fig1", {
        "windows_GeV": args.windows, "weighting": args.weighting,
        "units": "1e-11", "note": _WEIGHT_NOTE,
    })
    w.columns("label", "central", "err_low", "err_high")
    for r in rows:
        w.row(r.label, r.central, r.err_low, r.err_high)
    w.flush(args.out)
    return 0


def _cmd_wiggle_synth(args, table):
    tau_lab = table.gamma_magic * table.tau_mu
    omega = wigglefit.omega_a(args.a, args.B, table)
    t_max = args.tmax if args.tmax is not None else 10.0 * tau_lab
    p = wigglefit.WiggleParams(n0=1.0, tau_lab=tau_lab, asym=args.asym,
                               omega_a=omega, phi=args.phi)
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 0)))
    times = wigglefit.synth(p, int(args.n), t_max, rng)
    counts, centers = wigglefit.histogram(times, args.bins, t_max)
    w = _Writer(args, "wiggle synth", {
        "n": int(args.n), "a": args.a, "B_tesla": args.B, "asym": args.asym,
        "phi": args.phi, "tau_lab_s": tau_lab, "omega_a_rad_s": omega,
        "t_max_s": t_max, "bins": args.bins,
    })
    w.columns("t_bin_center_s", "counts")
    for t, c in zip(centers, counts):
        w.row(t, c)
    w.flush(args.out)
    return 0


def _read_hist_csv(path: str):
    centers, counts = [], []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace("\t", ",").split(",")
        try:
            t, c = float(parts[0]), float(parts[1])
        except (ValueError, IndexError):
            raise ValueError(f"{path}:{lineno}: expected 't,counts', got {raw!r}") from None
        centers.append(t)
        counts.append(c)
    if not centers:
        raise ValueError(f"{path}: no histogram rows found")
    return np.array(counts), np.array(centers)


def _cmd_wiggle_fit(args, table):
    counts, centers = _read_hist_csv(args.infile)
    tau0 = args.init_tau if args.init_tau is not None else table.gamma_magic * table.tau_mu
    omega0 = (args.init_omega if args.init_omega is not None
              else wigglefit.omega_a(args.init_a, args.B, table))
    width = centers[1] - centers[0] if centers.size > 1 else 1.0
    probe = wigglefit.WiggleParams(1.0, tau0, args.init_asym, omega0, args.init_phi)
    dens = wigglefit.wiggle_rate(centers, probe).sum()
    n0 = max(counts.sum() / max(dens, 1e-300), 1e-300)
    init = wigglefit.WiggleParams(n0, tau0, args.init_asym, omega0, args.init_phi)
    res = wigglefit.fit(counts, centers, init)
    err = res.errors
    w = _Writer(args, "wiggle fit", {"in": args.infile, "B_tesla": args.B})
    for key, val in [
        ("converged", res.converged), ("iterations", res.iterations),
        ("message", res.message), ("chi2", res.chi2), ("ndof", res.ndof),
        ("N0", res.params.n0), ("tau_lab_s", res.params.tau_lab),
        ("asym", res.params.asym), ("omega_a_rad_s", res.params.omega_a),
        ("phi", res.params.phi),
        ("err_N0", err[0]), ("err_tau_lab_s", err[1]), ("err_asym", err[2]),
        ("err_omega_a_rad_s", err[3]), ("err_phi", err[4]),
        ("a_fit", wigglefit.anomaly_from_omega(res.params.omega_a, args.B, table)),
        ("a_err", wigglefit.anomaly_from_omega(float(err[3]), args.B, table)),
        ("t_min_s", float(centers.min() - width / 2)),
        ("t_max_s", float(centers.max() + width / 2)),
        ("n_fine_bins", centers.size),
    ]:
        w.keyval(key, val if not isinstance(val, str) else val)
    w.flush(args.out)
    return 0 if res.converged else 1


def _cmd_wiggle_scan(args, table):
    model = anomaly.CorrectionModel.from_constants(table)
    bins = _parse_bins_spec(args.bins, table.E_max)
    result = wigglefit.binned_scan(bins, args.base_a, model, int(args.events_per_bin),
                                   args.seed, table=table, weighting=args.weighting,
                                   nbins=args.tbins, threads=args.threads)
    w = _Writer(args, "wiggle scan", {
        "bins": args.bins, "events_per_bin": int(args.events_per_bin),
        "base_a": args.base_a, "weighting": args.weighting, "tbins": args.tbins,
        "C_injected": model.C,
    })
    if result.slope is None:
        w.comment("slope", "absent (fewer than two usable bins)")
    else:
        w.comment("slope", _fmt(result.slope))
        w.comment("slope_err", _fmt(result.slope_err))
        w.comment("intercept", _fmt(result.intercept))
    w.columns("E_center_GeV", "f_bar", "a_fit", "a_err", "converged")
    for r in result.rows:
        w.row(r.e_center, r.f_bar, r.a_fit, r.a_err, r.converged)
    w.flush(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--constants", metavar="PATH", default=None,
                        help=f"constants file (fallback: ${ENV_CONSTANTS})")
    common.add_argument("--seed", type=int, default=0, help="64-bit master seed")
    common.add_argument("--out", metavar="PATH", default=None,
                        help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "tsv"), default="csv")
    common.add_argument("--threads", type=int, default=1,
                        help="worker cap; never changes results")

    p = argparse.ArgumentParser(prog="mug2", description=__doc__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("constants", parents=[common],
                   help="canonical constants dump").set_defaults(func=_cmd_constants)

    pp = sub.add_parser("precess", parents=[common], help="spin precession trajectory")
    pp.add_argument("--s0", required=True, help="initial spin, e.g. 0.5,0,0")
    pp.add_argument("--mu", type=float, required=True, help="moment, Bohr magnetons")
    pp.add_argument("--B", type=float, required=True, help="field, tesla")
    pp.add_argument("--t", type=float, required=True, help="duration, seconds")
    pp.add_argument("--steps", type=int, default=1000)
    pp.set_defaults(func=_cmd_precess)

    ps = sub.add_parser("spectrum", parents=[common],
                        help="MC spectrum and asymmetry vs closed forms")
    ps.add_argument("--events", type=float, default=1e5)
    ps.add_argument("--pol", type=float, default=1.0)
    ps.add_argument("--window", default=None, help="E_lo,E_hi in GeV")
    ps.add_argument("--weighting", choices=decaygen.WEIGHTINGS, default="NA2")
    ps.add_argument("--bins", dest="bins_file", default=None,
                    help="empirical bins CSV (E_lo_GeV,E_hi_GeV,counts,asymmetry)")
    ps.add_argument("--asym-power", type=int, choices=(1, 2), default=2)
    ps.add_argument("--ybins", type=int, default=50)
    ps.set_defaults(func=_cmd_spectrum)

    pc = sub.add_parser("correction", parents=[common], help="point correction C*f")
    pc.add_argument("--f", type=float, required=True)
    pc.set_defaults(func=_cmd_correction)

    pa = sub.add_parser("average", parents=[common], help="window-averaged correction")
    pa.add_argument("--window", required=True, help="E_lo,E_hi in GeV")
    pa.add_argument("--weighting", choices=decaygen.WEIGHTINGS, default="NA2")
    pa.add_argument("--bins", dest="bins_file", default=None)
    pa.add_argument("--asym-power", type=int, choices=(1, 2), default=2)
    pa.set_defaults(func=_cmd_average)

    pf = sub.add_parser("fig1", parents=[common], help="comparison table, units 1e-11")
    pf.add_argument("--windows", required=True, help="lo1,hi1;lo2,hi2 in GeV")
    pf.add_argument("--weighting", choices=decaygen.WEIGHTINGS, default="NA2")
    pf.add_argument("--bins", dest="bins_file", default=None)
    pf.add_argument("--asym-power", type=int, choices=(1, 2), default=2)
    pf.set_defaults(func=_cmd_fig1)

    pw = sub.add_parser("wiggle", help="synthesize, fit and scan wiggle histograms")
    wsub = pw.add_subparsers(dest="wiggle_cmd", required=True)

    w1 = wsub.add_parser("synth", parents=[common], help="synthesize a histogram")
    w1.add_argument("--n", type=float, default=1e6, help="events")
    w1.add_argument("--a", type=float, default=1.16592061e-3, help="anomaly value")
    w1.add_argument("--B", type=float, default=1.45)
    w1.add_argument("--asym", type=float, default=0.4)
    w1.add_argument("--phi", type=float, default=math.pi / 2)
    w1.add_argument("--tmax", type=float, default=None, help="seconds; default 10 tau_lab")
    w1.add_argument("--bins", type=int, default=1000)
    w1.set_defaults(func=_cmd_wiggle_synth)

    w2 = wsub.add_parser("fit", parents=[common], help="fit a histogram CSV")
    w2.add_argument("--in", dest="infile", required=True)
    w2.add_argument("--B", type=float, default=1.45)
    w2.add_argument("--init-a", type=float, default=1.16592061e-3)
    w2.add_argument("--init-omega", type=float, default=None, help="rad/s; overrides --init-a")
    w2.add_argument("--init-tau", type=float, default=None, help="seconds")
    w2.add_argument("--init-asym", type=float, default=0.4)
    w2.add_argument("--init-phi", type=float, default=math.pi / 2)
    w2.set_defaults(func=_cmd_wiggle_fit)

    w3 = wsub.add_parser("scan", parents=[common], help="energy-binned anomaly scan")
    w3.add_argument("--bins", required=True,
                    help="'lo,hi;lo,hi;...' or 'lo:hi:n' in GeV")
    w3.add_argument("--events-per-bin", type=float, default=1e6)
    w3.add_argument("--base-a", type=float, default=1.16592061e-3)
    w3.add_argument("--weighting", choices=decaygen.WEIGHTINGS, default="NA2")
    w3.add_argument("--tbins", type=int, default=1000)
    w3.set_defaults(func=_cmd_wiggle_scan)

    return p


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    constants_path = args.constants or os.environ.get(ENV_CONSTANTS) or None
    args.constants_label = constants_path if constants_path else "defaults"
    try:
        table = load_constants(constants_path)
        return args.func(args, table)
    except (ConfigError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"mug2: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
