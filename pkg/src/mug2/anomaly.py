"""Anomaly correction model: moment scale, delta_a(f) = C f, ppm
conversion, window-averaged corrections, and the comparison table.

The window average is

    mean_abs = C * int (1 - y) w(y) dy / int w(y) dy

over y = E/E_max in the window, with w one of the analytic weightings
(N, A, NA, NA2) or a piecewise-constant empirical table; sigma is the
weighted standard deviation of C (1 - y) under w. The asymmetry
weighting choice is a convention, not a derivation: results always
record which weight produced them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

from . import decaygen
from .constants import ConstantsTable, coefficient_C, default_constants

_DEGENERATE_REL = 1e-12


@dataclass(frozen=True)
class CorrectionModel:
    C: float          # dimensionless coefficient multiplying f
    a_mu_ref: float   # ppm denominator

    def __post_init__(self):
        if not 5e-9 <= self.C <= 9e-9:
            raise ValueError(f"C = {self.C!r} outside the sanity band [5e-9, 9e-9]")
        if self.a_mu_ref <= 0:
            raise ValueError("a_mu_ref must be positive")

    @classmethod
    def from_constants(cls, table: ConstantsTable) -> "CorrectionModel":
        return cls(C=coefficient_C(table), a_mu_ref=table.a_mu_ref)


@dataclass(frozen=True)
class AveragingConfig:
    window: tuple[float, float]   # [E_lo, E_hi], GeV
    weighting: str = "NA2"
    e_max: float = 3.1
    quad_rel_tol: float = 1e-8
    empirical: "EmpiricalWeight | None" = None

    def __post_init__(self):
        lo, hi = self.window
        if not (0.0 <= lo < hi <= self.e_max):
            raise ValueError(
                f"window {self.window!r} must satisfy 0 <= E_lo < E_hi <= {self.e_max}"
            )
        if self.weighting not in decaygen.WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.weighting == "empirical" and self.empirical is None:
            raise ValueError("weighting='empirical' requires ingested bins")


@dataclass(frozen=True)
class AveragedAnomaly:
    mean_abs: float
    mean_ppm: float
    sigma_ppm: float
    weighting: str
    window: tuple[float, float]


def neutrino_magnetic_moment(m_nu_ev: float, table: ConstantsTable | None = None) -> float:
    """Loop-induced Dirac moment in Bohr magnetons, linear in the mass.

    mu / mu_B = 3 G_F m_nu m_e / (4 sqrt(2) pi^2); about 3.2e-19 per eV.
    """
    t = table if table is not None else default_constants()
    m_nu = m_nu_ev * 1e-9  # eV -> GeV
    return 3.0 * t.G_F * m_nu * t.m_e / (4.0 * math.sqrt(2.0) * math.pi**2)


def delta_a(f, model: CorrectionModel):
    """Anomaly correction C * f for an energy fraction in [0, 1]."""
    f = np.asarray(f, dtype=float)
    if np.any((f < 0) | (f > 1)):
        raise ValueError("f must lie in [0, 1]")
    out = model.C * f
    return float(out) if out.ndim == 0 else out


def to_ppm(delta: float, table: ConstantsTable) -> float:
    """Express a dimensionless correction in ppm of the reference anomaly."""
    return delta / table.a_mu_ref * 1e6


@dataclass(frozen=True, eq=False)
class EmpiricalWeight:
    """Piecewise-constant weight over contiguous y bins."""

    y_edges: np.ndarray  # (n + 1,), ascending
    w: np.ndarray        # (n,), counts * asymmetry^k

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        idx = np.clip(np.searchsorted(self.y_edges, y, side="right") - 1, 0, self.w.size - 1)
        out = np.where((y >= self.y_edges[0]) & (y <= self.y_edges[-1]), self.w[idx], 0.0)
        return float(out) if out.ndim == 0 else out

    def _moments(self, ylo: float, yhi: float):
        """Exact integrals of w, (1-y) w, (1-y)^2 w over [ylo, yhi]."""
        lo = np.maximum(self.y_edges[:-1], ylo)
        hi = np.minimum(self.y_edges[1:], yhi)
        width = np.clip(hi - lo, 0.0, None)
        live = width > 0
        a, b, w = lo[live], hi[live], self.w[live]
        i0 = np.sum(w * (b - a))
        i1 = np.sum(w * ((1 - a) ** 2 - (1 - b) ** 2) / 2.0)
        i2 = np.sum(w * ((1 - a) ** 3 - (1 - b) ** 3) / 3.0)
        return float(i0), float(i1), float(i2)

    def integral_w(self, ylo, yhi):
        return self._moments(ylo, yhi)[0]

    def integral_fw(self, ylo, yhi):
        return self._moments(ylo, yhi)[1]


def ingest_bins(path: str | Path, asym_power: int = 2, e_max: float = 3.1) -> EmpiricalWeight:
    """Read an empirical bin table into a piecewise-constant weight.

    Expected CSV header: E_lo_GeV,E_hi_GeV,counts,asymmetry. Bins must be
    contiguous and non-overlapping; offending rows are listed. The weight
    per bin is counts * asymmetry^asym_power with asym_power in {1, 2}.
    """
    if asym_power not in (1, 2):
        raise ValueError("asym_power must be 1 or 2")
    path = Path(path)
    expected = ["E_lo_GeV", "E_hi_GeV", "counts", "asymmetry"]
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != expected:
        raise ValueError(f"{path}: expected header {','.join(expected)}")
    data = []
    for i, row in enumerate(rows[1:], 2):
        try:
            lo, hi, counts, asym = (float(v) for v in row)
        except (ValueError, TypeError):
            raise ValueError(f"{path}: row {i}: cannot parse {row!r}") from None
        if hi <= lo:
            raise ValueError(f"{path}: row {i}: E_hi must exceed E_lo")
        data.append((lo, hi, counts, asym))
    data.sort(key=lambda r: r[0])
    bad = [
        f"rows {i + 1}/{i + 2}: [{a[0]:g},{a[1]:g}] then [{b[0]:g},{b[1]:g}]"
        for i, (a, b) in enumerate(zip(data, data[1:]))
        if abs(a[1] - b[0]) > 1e-9
    ]
    if bad:
        raise ValueError(f"{path}: bins must be contiguous and non-overlapping: " + "; ".join(bad))
    edges = np.array([d[0] for d in data] + [data[-1][1]]) / e_max
    w = np.array([d[2] * d[3] ** asym_power for d in data])
    return EmpiricalWeight(y_edges=edges, w=w)


def average_anomaly(cfg: AveragingConfig, model: CorrectionModel) -> AveragedAnomaly:
    """Window-averaged correction with its weighted spread.

    Analytic weightings use adaptive quadrature at cfg.quad_rel_tol; the
    empirical weighting integrates the piecewise-constant table exactly.
    A weight integrating to <= 0 over the window (possible for the bare
    asymmetry at low energies) raises a degenerate-weight error.
    """
    ylo, yhi = cfg.window[0] / cfg.e_max, cfg.window[1] / cfg.e_max
    if cfg.weighting == "empirical":
        den, num1, num2 = cfg.empirical._moments(ylo, yhi)
        scale = np.sum(np.abs(cfg.empirical.w)) * (yhi - ylo) or 1.0
    else:
        w = decaygen._weight_fn(cfg.weighting)
        kw = dict(epsrel=cfg.quad_rel_tol, limit=200)
        den = integrate.quad(w, ylo, yhi, **kw)[0]
        num1 = integrate.quad(lambda y: (1.0 - y) * w(y), ylo, yhi, **kw)[0]
        num2 = integrate.quad(lambda y: (1.0 - y) ** 2 * w(y), ylo, yhi, **kw)[0]
        scale = integrate.quad(lambda y: abs(w(y)), ylo, yhi, **kw)[0] or 1.0
    if den <= _DEGENERATE_REL * scale:
        raise ValueError(
            f"degenerate weight: integral of {cfg.weighting} over "
            f"{cfg.window!r} GeV is not positive"
        )
    mean_f = num1 / den
    var_f = max(num2 / den - mean_f * mean_f, 0.0)
    mean_abs = model.C * mean_f
    return AveragedAnomaly(
        mean_abs=mean_abs,
        mean_ppm=mean_abs / model.a_mu_ref * 1e6,
        sigma_ppm=model.C * math.sqrt(var_f) / model.a_mu_ref * 1e6,
        weighting=cfg.weighting,
        window=cfg.window,
    )


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    central: float   # units of 1e-11
    err_low: float
    err_high: float


def fig1_table(avg_results: list[AveragedAnomaly], table: ConstantsTable) -> list[ComparisonRow]:
    """Comparison rows: measured, measured minus each windowed correction,
    and the two SM reference values, all in units of 1e-11."""
    u = 1e11
    rows = [ComparisonRow("experimental", table.a_mu_exp * u,
                          table.a_mu_exp_err * u, table.a_mu_exp_err * u)]
    for avg in avg_results:
        sigma_abs = avg.sigma_ppm * table.a_mu_ref * 1e-6
        err = math.sqrt(table.a_mu_exp_err**2 + sigma_abs**2) * u
        label = f"corrected_{avg.window[0]:g}-{avg.window[1]:g}GeV"
        rows.append(ComparisonRow(label, (table.a_mu_exp - avg.mean_abs) * u, err, err))
    rows.append(ComparisonRow("sm_data_driven", table.a_mu_sm_datadriven * u,
                              table.a_mu_sm_datadriven_err * u, table.a_mu_sm_datadriven_err * u))
    rows.append(ComparisonRow("sm_lattice", table.a_mu_sm_lattice * u,
                              table.a_mu_sm_lattice_err * u, table.a_mu_sm_lattice_err * u))
    return rows
