"""Synthetic precession histograms and the five-parameter wiggle fit.

Decay times follow the rate density

    n(t) = N0 exp(-t / tau_lab) [1 + A cos(omega_a t + phi)]

sampled by rejection against the A = 0 envelope times (1 + |A|). The fit
minimizes chi^2 = sum (n_i - model_i)^2 / max(n_i, 1) with a damped
Gauss-Newton step (Levenberg-Marquardt damping: x10 on a rejected step,
/10 on an accepted one) and reports the covariance as the inverse
curvature at the optimum. Low-count bins are merged into groups whose
model value is the sum over the constituent fine bins, so a zero-noise
histogram is an exact fixed point of the fit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from . import anomaly, decaygen
from .constants import ConstantsTable, default_constants

_MIN_EXPECTED = 10
_MIN_USABLE_BINS = 20
_MAX_ITER = 200
_CHI2_RTOL = 1e-10


@dataclass(frozen=True)
class WiggleParams:
    n0: float        # counts normalization per fine bin
    tau_lab: float   # dilated lifetime, seconds
    asym: float      # modulation amplitude, |asym| < 1
    omega_a: float   # anomalous precession angular frequency, rad/s
    phi: float       # phase, rad

    def __post_init__(self):
        if not self.n0 > 0:
            raise ValueError("n0 must be positive")
        if not self.tau_lab > 0:
            raise ValueError("tau_lab must be positive")
        if not abs(self.asym) < 1:
            raise ValueError("|asym| must be < 1 to keep the rate nonnegative")

    def as_vector(self) -> np.ndarray:
        return np.array([self.n0, self.tau_lab, self.asym, self.omega_a, self.phi])

    @classmethod
    def from_vector(cls, p: np.ndarray) -> "WiggleParams":
        return cls(*map(float, p))


@dataclass(frozen=True, eq=False)
class FitResult:
    params: WiggleParams
    covariance: np.ndarray   # 5x5, parameter order as WiggleParams fields
    chi2: float
    ndof: int
    converged: bool
    iterations: int
    message: str = "ok"

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def omega_a(a: float, b_tesla: float, table: ConstantsTable | None = None) -> float:
    """Anomalous precession frequency a e B / m_mu in rad/s."""
    if b_tesla < 0:
        raise ValueError("field must be >= 0")
    t = table if table is not None else default_constants()
    omega_gev = a * t.e_natural * (b_tesla * t.tesla_to_gev2) / t.m_mu
    return omega_gev / t.hbar_over_GeV_s


def anomaly_from_omega(omega: float, b_tesla: float, table: ConstantsTable | None = None) -> float:
    """Inverse of omega_a at the same field."""
    t = table if table is not None else default_constants()
    return omega * t.hbar_over_GeV_s * t.m_mu / (t.e_natural * b_tesla * t.tesla_to_gev2)


def wiggle_rate(t, p: WiggleParams):
    t = np.asarray(t, dtype=float)
    return p.n0 * np.exp(-t / p.tau_lab) * (1.0 + p.asym * np.cos(p.omega_a * t + p.phi))


def synth(p: WiggleParams, n_events: int, t_max: float, rng: np.random.Generator) -> np.ndarray:
    """Sample n_events decay times on [0, t_max] from the wiggle density.

    Proposals are truncated-exponential draws (inverse CDF), accepted with
    probability (1 + A cos(omega t + phi)) / (1 + |A|).
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    tail = 1.0 - math.exp(-t_max / p.tau_lab)
    env = 1.0 + abs(p.asym)
    out = np.empty(n_events)
    got = 0
    while got < n_events:
        m = max(int((n_events - got) * 1.2 * env), 256)
        t = -p.tau_lab * np.log1p(-tail * rng.random(m))
        keep = rng.random(m) * env <= 1.0 + p.asym * np.cos(p.omega_a * t + p.phi)
        k = min(int(keep.sum()), n_events - got)
        out[got:got + k] = t[keep][:k]
        got += k
    return out


def histogram(times: np.ndarray, nbins: int, t_max: float):
    """Counts and bin centers on a uniform grid over [0, t_max]."""
    counts, edges = np.histogram(times, bins=nbins, range=(0.0, t_max))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return counts.astype(float), centers


def _merge_groups(counts: np.ndarray) -> list[np.ndarray]:
    """Group consecutive bins until each group holds >= _MIN_EXPECTED
    counts; a low trailing remainder is folded into the previous group."""
    groups, start, acc = [], 0, 0.0
    for i, c in enumerate(counts):
        acc += c
        if acc >= _MIN_EXPECTED:
            groups.append(np.arange(start, i + 1))
            start, acc = i + 1, 0.0
    if start < counts.size:
        if groups and acc < _MIN_EXPECTED:
            groups[-1] = np.arange(groups[-1][0], counts.size)
        else:
            groups.append(np.arange(start, counts.size))
    return groups


# 3-point Gauss-Legendre bin averaging: evaluating the density at bin
# centers alone damps the fitted amplitude by sinc(omega width / 2),
# a multi-sigma bias at typical binnings.
_GL_NODES = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GL_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def _model_and_jacobian(p: np.ndarray, centers: np.ndarray, width: float):
    """Bin-averaged model counts and Jacobian; n0 is counts per bin."""
    n0, tau, a, w, phi = p
    t = centers[:, None] + (0.5 * width) * _GL_NODES[None, :]
    decay = np.exp(-t / tau)
    c = np.cos(w * t + phi)
    s = np.sin(w * t + phi)
    dens = n0 * decay * (1.0 + a * c)
    model = dens @ _GL_WEIGHTS
    jac = np.stack([
        (decay * (1.0 + a * c)) @ _GL_WEIGHTS,     # d/dn0
        (dens * t / tau**2) @ _GL_WEIGHTS,         # d/dtau
        (n0 * decay * c) @ _GL_WEIGHTS,            # d/dasym
        (-n0 * decay * a * t * s) @ _GL_WEIGHTS,   # d/domega
        (-n0 * decay * a * s) @ _GL_WEIGHTS,       # d/dphi
    ], axis=1)
    return model, jac


def fit(counts: np.ndarray, centers: np.ndarray, init: WiggleParams) -> FitResult:
    """Five-parameter chi-square fit of a binned wiggle histogram.

    counts and centers are the fine binning; merging to groups with at
    least 10 counts happens internally. Requires >= 20 usable groups.
    Numerical failure never raises: the result carries converged=False
    and a diagnostic message.
    """
    counts = np.asarray(counts, dtype=float)
    centers = np.asarray(centers, dtype=float)
    if counts.shape != centers.shape:
        raise ValueError("counts and centers must have matching shape")
    if not np.all(np.isfinite(init.as_vector())):
        raise ValueError("init must be finite")
    diffs = np.diff(centers)
    width = float(diffs[0])
    if width <= 0 or np.any(np.abs(diffs - width) > 1e-6 * width):
        raise ValueError("fit expects a uniform, ascending time grid")
    groups = _merge_groups(counts)
    if len(groups) < _MIN_USABLE_BINS:
        raise ValueError(f"need >= {_MIN_USABLE_BINS} usable bins, got {len(groups)}")
    n_g = np.array([counts[g].sum() for g in groups])
    var_g = np.maximum(n_g, 1.0)
    ndof = len(groups) - 5

    def grouped(p):
        model, jac = _model_and_jacobian(p, centers, width)
        m_g = np.array([model[g].sum() for g in groups])
        j_g = np.array([jac[g].sum(axis=0) for g in groups])
        return m_g, j_g

    def chi2_of(p):
        if p[0] <= 0 or p[1] <= 0 or abs(p[2]) >= 1:
            return math.inf
        model, _ = _model_and_jacobian(p, centers, width)
        m_g = np.array([model[g].sum() for g in groups])
        return float(np.sum((n_g - m_g) ** 2 / var_g))

    p = init.as_vector()
    chi2 = chi2_of(p)
    if not math.isfinite(chi2):
        return FitResult(init, np.zeros((5, 5)), math.inf, ndof, False, 0,
                         "initial parameters outside the allowed region")
    lam = 1e-3
    iterations = 0
    converged = False
    message = "ok"
    for iterations in range(1, _MAX_ITER + 1):
        m_g, j_g = grouped(p)
        r = n_g - m_g
        jw = j_g / var_g[:, None]
        hess = j_g.T @ jw
        grad = jw.T @ r
        stepped = False
        for _ in range(40):
            try:
                delta = np.linalg.solve(hess + lam * np.diag(np.diag(hess)), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + delta
            chi2_new = chi2_of(trial)
            if chi2_new < chi2:
                rel = abs(chi2 - chi2_new) / max(chi2, 1e-300)
                p, chi2 = trial, chi2_new
                lam = max(lam / 10.0, 1e-15)
                stepped = True
                if rel < _CHI2_RTOL or chi2 == 0.0:
                    converged = True
                break
            lam *= 10.0
            if lam > 1e15:
                break
        if converged:
            break
        if not stepped:
            if chi2 <= 1e-20:
                converged = True
            else:
                message = "no descent step found (singular or flat curvature)"
            break
    else:
        message = "iteration limit reached"
    m_g, j_g = grouped(p)
    hess = j_g.T @ (j_g / var_g[:, None])
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(hess)
        converged = False
        message = "singular curvature at the optimum"
    cov = 0.5 * (cov + cov.T)  # symmetric by construction
    try:
        params = WiggleParams.from_vector(p)
    except ValueError:
        params = init
        converged = False
        message = "optimum left the allowed parameter region"
    return FitResult(params, cov, chi2, ndof, converged, iterations, message)


def pull_study(truth: WiggleParams, n_events: int, t_max: float, nbins: int,
               n_experiments: int, seed: int, threads: int = 1) -> np.ndarray:
    """Pulls (fit - truth) / sigma_fit, shape (n_experiments, 5).

    Experiment k draws from the substream (seed, k), with its event count
    drawn from Poisson(n_events) so bin totals carry the fluctuations the
    chi-square error model assumes; the binned truth normalization
    replaces truth.n0 as the fit initial value. Failed fits yield nan rows.
    """
    width = t_max / nbins
    norm = integrate.quad(lambda t: wiggle_rate(t, replace(truth, n0=1.0)), 0.0, t_max,
                          limit=200)[0]
    n0 = n_events * width / norm
    init = replace(truth, n0=n0)
    tvec = init.as_vector()

    def one(k: int):
        rng = np.random.default_rng(np.random.SeedSequence((seed, k)))
        n_k = max(int(rng.poisson(n_events)), 1)
        counts, centers = histogram(synth(truth, n_k, t_max, rng), nbins, t_max)
        res = fit(counts, centers, init)
        if not res.converged:
            return np.full(5, np.nan)
        err = res.errors
        with np.errstate(invalid="ignore", divide="ignore"):
            return (res.params.as_vector() - tvec) / err

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(n_experiments)))
    else:
        rows = [one(k) for k in range(n_experiments)]
    return np.vstack(rows)


@dataclass(frozen=True, eq=False)
class ScanRow:
    e_center: float
    f_bar: float
    a_fit: float
    a_err: float
    converged: bool


@dataclass(frozen=True, eq=False)
class ScanResult:
    rows: list[ScanRow]
    slope: float | None      # fitted d a / d f_bar, weighted least squares
    slope_err: float | None
    intercept: float | None


def _weighted_mean(fn, ylo, yhi, weight):
    w = decaygen._weight_fn(weight)
    num = integrate.quad(lambda y: fn(y) * w(y), ylo, yhi, epsrel=1e-10, limit=200)[0]
    den = integrate.quad(w, ylo, yhi, epsrel=1e-10, limit=200)[0]
    return num / den


def binned_scan(energy_bins: list[tuple[float, float]], base_a: float,
                model: anomaly.CorrectionModel, events_per_bin: int, seed: int,
                table: ConstantsTable | None = None, weighting: str = "NA2",
                t_max: float | None = None, nbins: int = 1000,
                threads: int = 1) -> ScanResult:
    """Inject an energy-dependent anomaly per bin, synthesize, fit, and
    regress the fitted anomaly on the mean energy fraction.

    Per bin: a_inj = base_a + C * f_bar(bin) with f_bar the weighted mean
    of 1 - y, the modulation amplitude is the N-weighted mean asymmetry,
    and the fit starts at the generating parameters. The slope row is
    absent (None) when fewer than two bins converge.
    """
    t = table if table is not None else default_constants()
    tau_lab = t.gamma_magic * t.tau_mu
    if t_max is None:
        t_max = 10.0 * tau_lab
    for lo, hi in energy_bins:
        if not (0.0 <= lo < hi <= t.E_max):
            raise ValueError(f"energy bin ({lo}, {hi}) outside [0, {t.E_max}]")

    def one(item):
        k, (lo, hi) = item
        ylo, yhi = lo / t.E_max, hi / t.E_max
        f_bar = _weighted_mean(lambda y: 1.0 - y, ylo, yhi, weighting)
        a_bin = _weighted_mean(decaygen.analytic_A, ylo, yhi, "N")
        a_inj = base_a + model.C * f_bar
        truth = WiggleParams(n0=1.0, tau_lab=tau_lab, asym=a_bin,
                             omega_a=omega_a(a_inj, t.b_tesla, t), phi=math.pi / 2)
        rng = np.random.default_rng(np.random.SeedSequence((seed, k)))
        times = synth(truth, events_per_bin, t_max, rng)
        counts, centers = histogram(times, nbins, t_max)
        width = t_max / nbins
        norm = integrate.quad(lambda x: wiggle_rate(x, replace(truth, n0=1.0)),
                              0.0, t_max, limit=200)[0]
        init = replace(truth, n0=events_per_bin * width / norm)
        res = fit(counts, centers, init)
        a_fit = anomaly_from_omega(res.params.omega_a, t.b_tesla, t)
        a_err = anomaly_from_omega(float(res.errors[3]), t.b_tesla, t)
        return ScanRow(0.5 * (lo + hi), f_bar, a_fit, a_err, res.converged)

    items = list(enumerate(energy_bins))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, items))
    else:
        rows = [one(it) for it in items]

    good = [r for r in rows if r.converged and r.a_err > 0]
    if len(good) < 2:
        return ScanResult(rows, None, None, None)
    fb = np.array([r.f_bar for r in good])
    av = np.array([r.a_fit for r in good])
    wt = 1.0 / np.array([r.a_err for r in good]) ** 2
    design = np.column_stack([np.ones_like(fb), fb])
    norm_mat = design.T @ (design * wt[:, None])
    try:
        cov = np.linalg.inv(norm_mat)
    except np.linalg.LinAlgError:
        return ScanResult(rows, None, None, None)
    beta = cov @ design.T @ (av * wt)
    return ScanResult(rows, slope=float(beta[1]), slope_err=float(math.sqrt(cov[1, 1])),
                      intercept=float(beta[0]))
