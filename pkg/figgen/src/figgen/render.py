"""Renderers for the mug2 CSV contracts.

render_fig1 draws the comparison table (label, central, err_low,
err_high; units 1e-11) as horizontal error bars with a vertical guide at
the experimental central value. render_wiggle draws a decay-time
histogram on a semilog axis with an optional fit overlay and a residual
panel. All numbers come from the inputs; nothing physical is computed
here.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    central: float   # units of 1e-11
    err_low: float
    err_high: float


@dataclass(frozen=True)
class Fig1Result:
    rows: list
    image: Path


@dataclass(frozen=True)
class WiggleResult:
    n_bins: int
    residual_mean: float | None
    image: Path


def _data_rows(path):
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def read_fig1_csv(path) -> list[ComparisonRow]:
    rows = []
    for lineno, line in _data_rows(path):
        parts = [p.strip() for p in line.replace("\t", ",").split(",")]
        if parts and parts[0] == "label":
            continue
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 fields "
                             f"(label,central,err_low,err_high), got {len(parts)}")
        try:
            row = ComparisonRow(parts[0], float(parts[1]), float(parts[2]), float(parts[3]))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value in {line!r}") from None
        if row.err_low < 0 or row.err_high < 0:
            raise ValueError(f"{path}:{lineno}: errors must be nonnegative")
        rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def render_fig1(csv_in, image_out) -> Fig1Result:
    """One horizontal error bar per row; guide line at the experimental
    central value. The file type follows the output extension."""
    rows = read_fig1_csv(csv_in)
    fig, ax = plt.subplots(figsize=(7, 0.7 * len(rows) + 1.6))
    ypos = np.arange(len(rows))[::-1]
    for y, row in zip(ypos, rows):
        color = "black" if row.label.startswith("corrected") else "tab:blue"
        ax.errorbar(row.central, y, xerr=[[row.err_low], [row.err_high]],
                    fmt="o", color=color, capsize=4)
    guide = next((r for r in rows if r.label == "experimental"), rows[0])
    ax.axvline(guide.central, color="tab:red", lw=0.8, ls="--", zorder=0)
    ax.set_yticks(ypos)
    ax.set_yticklabels([r.label for r in rows])
    ax.set_xlabel("anomaly (units of 1e-11)")
    fig.tight_layout()
    fig.savefig(image_out)
    plt.close(fig)
    return Fig1Result(rows=rows, image=Path(image_out))


def read_hist_csv(path):
    t, counts = [], []
    for lineno, line in _data_rows(path):
        parts = [p.strip() for p in line.replace("\t", ",").split(",")]
        if parts and not parts[0][0].isdigit() and not parts[0].startswith("-"):
            continue  # column header
        try:
            t.append(float(parts[0]))
            counts.append(float(parts[1]))
        except (ValueError, IndexError):
            raise ValueError(f"{path}:{lineno}: expected 't,counts', got {line!r}") from None
    if not t:
        raise ValueError(f"{path}: no data rows")
    return np.array(t), np.array(counts)


def read_fit_report(path) -> dict:
    report = {}
    for lineno, line in _data_rows(path):
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = (s.strip() for s in line.partition("="))
        report[key] = value
    required = ("N0", "tau_lab_s", "asym", "omega_a_rad_s", "phi")
    missing = [k for k in required if k not in report]
    if missing:
        raise ValueError(f"{path}: fit report missing keys: {', '.join(missing)}")
    return report


def _fit_curve(report, t):
    n0 = float(report["N0"])
    tau = float(report["tau_lab_s"])
    a = float(report["asym"])
    w = float(report["omega_a_rad_s"])
    phi = float(report["phi"])
    return n0 * np.exp(-t / tau) * (1.0 + a * np.cos(w * t + phi))


def _fit_bin_average(report, centers, width):
    # 3-point Gauss-Legendre average over each bin, matching binned counts
    nodes = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
    weights = np.array([5.0, 8.0, 5.0]) / 18.0
    tt = centers[:, None] + 0.5 * width * nodes[None, :]
    return _fit_curve(report, tt) @ weights


def render_wiggle(csv_in, fit_report, image_out) -> WiggleResult:
    """Semilog counts-vs-time plot; with a fit report, overlays the curve
    and adds a residual panel (counts - fit) / sqrt(max(counts, 1))."""
    t, counts = read_hist_csv(csv_in)
    residual_mean = None
    if fit_report is not None:
        report = read_fit_report(fit_report)
        width = t[1] - t[0] if t.size > 1 else 1.0
        data_range = (t.min() - width / 2, t.max() + width / 2)
        if "t_min_s" in report and "t_max_s" in report:
            rep_range = (float(report["t_min_s"]), float(report["t_max_s"]))
            if (abs(rep_range[0] - data_range[0]) > width
                    or abs(rep_range[1] - data_range[1]) > width):
                raise ValueError(
                    f"time ranges do not match: histogram covers "
                    f"[{data_range[0]:g}, {data_range[1]:g}] s but the fit report "
                    f"covers [{rep_range[0]:g}, {rep_range[1]:g}] s")
        model = _fit_bin_average(report, t, width)
        residuals = (counts - model) / np.sqrt(np.maximum(counts, 1.0))
        residual_mean = float(residuals.mean())
        fig, (ax, axr) = plt.subplots(
            2, 1, figsize=(8, 6), sharex=True,
            gridspec_kw={"height_ratios": [3, 1], "hspace": 0.05})
        dense = np.linspace(t.min(), t.max(), max(2000, 4 * t.size))
        ax.plot(dense, _fit_curve(report, dense), color="tab:red", lw=1.0,
                label="fit", zorder=3)
        axr.axhline(0.0, color="tab:red", lw=0.8)
        axr.plot(t, residuals, ".", ms=2, color="black")
        axr.set_ylabel("residual / sigma")
        axr.set_xlabel("time (s)")
    else:
        fig, ax = plt.subplots(figsize=(8, 5))
        ax.set_xlabel("time (s)")
    ax.semilogy(t, np.maximum(counts, 0.5), ".", ms=3, color="black", label="counts")
    ax.set_ylabel("counts per bin")
    ax.legend(loc="upper right")
    fig.savefig(image_out)
    plt.close(fig)
    return WiggleResult(n_bins=t.size, residual_mean=residual_mean,
                        image=Path(image_out))
