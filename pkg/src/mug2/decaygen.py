"""Monte Carlo generator for polarized muon decay.

Rest-frame sampling uses the standard reduced-energy density
x^2 [(3 - 2x) + P (2x - 1) cos(theta)] with theta measured from the muon
spin, drawn by rejection against the constant envelope 1 + |P|. Lab
kinematics are massless: E_p = gamma (E' + v E' cosTheta') with Theta'
the rest-frame angle to the beam axis, y = E_p / E_max, f = 1 - y.

The lab-frame closed forms, with y in [0, 1]:

    N(y) = (y - 1)(4 y^2 - 5 y - 5)
    A(y) = (-8 y^2 + y + 1) / (4 y^2 - 5 y - 5)

Event generation is chunked: chunk k draws from an independent substream
seeded by (master seed, k), and chunks are concatenated in index order,
so the stream is bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .constants import _DEFAULTS

_DEFAULT_M_MU = _DEFAULTS["m_mu"][0]
_CHUNK = 1 << 16

WEIGHTINGS = ("N", "A", "NA", "NA2", "empirical")


@dataclass(frozen=True, eq=False)
class RestFrameDecay:
    """Rest-frame decay variables; scalar or array fields of equal shape."""

    x: np.ndarray          # reduced positron energy 2 E'_e / m_mu in [0, 1]
    cos_theta: np.ndarray  # cosine of the angle to the muon spin
    phi: np.ndarray        # azimuth about the spin in [0, 2 pi)


@dataclass(frozen=True)
class MuonBeam:
    gamma_mu: float = 29.3
    polarization: float = 1.0
    E_max: float = 3.1

    def __post_init__(self):
        if self.gamma_mu < 1.0:
            raise ValueError("gamma_mu must be >= 1")
        if abs(self.polarization) > 1.0:
            raise ValueError("|polarization| must be <= 1")
        if self.E_max <= 0.0:
            raise ValueError("E_max must be positive")

    @property
    def v_mu(self) -> float:
        return math.sqrt(1.0 - 1.0 / (self.gamma_mu * self.gamma_mu))

    def kinematic_endpoint(self, m_mu: float = _DEFAULT_M_MU) -> float:
        """Largest positron lab energy, gamma m_mu (1 + v) / 2, GeV.

        Slightly below the 3.1 GeV window convention at gamma = 29.3; the
        closed-form spectrum is the high-gamma limit in E over this value.
        """
        return self.gamma_mu * m_mu * (1.0 + self.v_mu) / 2.0


@dataclass(frozen=True, eq=False)
class LabEvent:
    """One (or a batch of) simulated decays in the lab frame."""

    E_p: np.ndarray  # positron lab energy, GeV
    y: np.ndarray    # E_p / E_max clamped to [0, 1]
    f: np.ndarray    # neutrino energy fraction, 1 - y


def michel_density(x, cos_theta, pol):
    """Unnormalized rest-frame density; zero outside the support."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(cos_theta, dtype=float)
    dens = x * x * ((3.0 - 2.0 * x) + pol * (2.0 * x - 1.0) * c)
    inside = (x >= 0) & (x <= 1) & (np.abs(c) <= 1)
    return np.where(inside, dens, 0.0)


def sample_rest(pol: float, rng: np.random.Generator, size: int | None = None) -> RestFrameDecay:
    """Rejection-sample rest-frame decays for polarization pol.

    The density maximum over the support is 1 + |pol| (attained at x = 1,
    cos_theta = sign(pol)), which is the rejection envelope.
    """
    if abs(pol) > 1.0:
        raise ValueError("|polarization| must be <= 1")
    n = 1 if size is None else int(size)
    env = 1.0 + abs(pol)
    xs = np.empty(n)
    cs = np.empty(n)
    got = 0
    while got < n:
        m = max(int((n - got) * 2.2 * env), 64)
        x = rng.random(m)
        c = rng.uniform(-1.0, 1.0, m)
        u = rng.uniform(0.0, env, m)
        keep = u <= michel_density(x, c, pol)
        k = min(int(keep.sum()), n - got)
        xs[got:got + k] = x[keep][:k]
        cs[got:got + k] = c[keep][:k]
        got += k
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    if size is None:
        return RestFrameDecay(xs[0], cs[0], phi[0])
    return RestFrameDecay(xs, cs, phi)


def boost_to_lab(d: RestFrameDecay, beam: MuonBeam, spin_beam_angle: float = 0.0,
                 m_mu: float = _DEFAULT_M_MU) -> LabEvent:
    """Boost rest-frame decays along the beam axis.

    spin_beam_angle is the angle between the muon spin and the beam
    (the instantaneous precession phase); the rest-frame emission angle
    to the beam follows from the spherical cosine rule.
    """
    ca, sa = math.cos(spin_beam_angle), math.sin(spin_beam_angle)
    cos_beam = ca * np.asarray(d.cos_theta) + sa * np.sqrt(
        np.clip(1.0 - np.asarray(d.cos_theta) ** 2, 0.0, None)
    ) * np.cos(np.asarray(d.phi))
    e_rest = np.asarray(d.x) * (m_mu / 2.0)
    E_p = beam.gamma_mu * e_rest * (1.0 + beam.v_mu * cos_beam)
    y = np.clip(E_p / beam.E_max, 0.0, 1.0)
    return LabEvent(E_p=E_p, y=y, f=1.0 - y)


def analytic_N(y):
    """Lab-frame positron spectrum weight, nonnegative on [0, 1]."""
    y = np.asarray(y, dtype=float)
    if np.any((y < 0) | (y > 1)):
        raise ValueError("y must lie in [0, 1]")
    out = (y - 1.0) * (4.0 * y * y - 5.0 * y - 5.0)
    return float(out) if out.ndim == 0 else out


def analytic_A(y):
    """Lab-frame asymmetry, in [-1, 1]; negative below y ~ 0.42."""
    y = np.asarray(y, dtype=float)
    if np.any((y < 0) | (y > 1)):
        raise ValueError("y must lie in [0, 1]")
    out = (-8.0 * y * y + y + 1.0) / (4.0 * y * y - 5.0 * y - 5.0)
    return float(out) if out.ndim == 0 else out


def asymmetry_zero() -> float:
    """Root of A(y) in (0, 1), located by Brent's method."""
    return float(optimize.brentq(analytic_A, 0.05, 0.95, xtol=1e-14, rtol=8.9e-16))


def f_of_y(y):
    """Neutrino energy fraction 1 - y (massless approximation)."""
    y = np.asarray(y, dtype=float)
    if np.any((y < 0) | (y > 1)):
        raise ValueError("y must lie in [0, 1]")
    out = 1.0 - y
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class EventSample:
    """Bulk decay sample: lab observables plus the precession phase
    cosine used by the asymmetry estimator."""

    y: np.ndarray
    f: np.ndarray
    E_p: np.ndarray
    cos_alpha: np.ndarray
    beam: MuonBeam
    seed: int

    def __len__(self):
        return self.y.size


def _gen_chunk(seed: int, index: int, count: int, beam: MuonBeam):
    rng = np.random.default_rng(np.random.SeedSequence((seed, index)))
    rest = sample_rest(beam.polarization, rng, count)
    alpha = rng.uniform(0.0, 2.0 * np.pi, count)
    ca = np.cos(alpha)
    sa = np.sin(alpha)
    cos_beam = ca * rest.cos_theta + sa * np.sqrt(
        np.clip(1.0 - rest.cos_theta**2, 0.0, None)
    ) * np.cos(rest.phi)
    e_rest = rest.x * (_DEFAULT_M_MU / 2.0)
    E_p = beam.gamma_mu * e_rest * (1.0 + beam.v_mu * cos_beam)
    y = np.clip(E_p / beam.E_max, 0.0, 1.0)
    return y, 1.0 - y, E_p, ca


def generate_events(n_events: int, beam: MuonBeam, seed: int, threads: int = 1) -> EventSample:
    """Generate n_events decays with a random precession phase per event.

    Output is invariant to the thread count: chunk k always consumes the
    substream seeded by (seed, k) and chunks are reassembled in order.
    """
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    counts = [_CHUNK] * (n_events // _CHUNK)
    if n_events % _CHUNK:
        counts.append(n_events % _CHUNK)
    jobs = [(seed, i, c, beam) for i, c in enumerate(counts)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _gen_chunk(*a), jobs))
    else:
        parts = [_gen_chunk(*a) for a in jobs]
    y, f, E_p, ca = (np.concatenate([p[i] for p in parts]) for i in range(4))
    return EventSample(y=y, f=f, E_p=E_p, cos_alpha=ca, beam=beam, seed=seed)


def spectrum_table(sample: EventSample, bins: int = 50,
                   window: tuple[float, float] | None = None) -> np.ndarray:
    """Binned MC spectrum and asymmetry against the closed forms.

    Returns an array with columns (y_center, N_mc, N_analytic, A_mc,
    A_analytic); densities are normalized to unit integral over the
    window. A_mc is the per-bin estimator 2 <cos alpha> / P, nan when the
    beam is unpolarized or a bin is empty.
    """
    e_max = sample.beam.E_max
    ylo, yhi = (0.0, 1.0) if window is None else (window[0] / e_max, window[1] / e_max)
    if not 0.0 <= ylo < yhi <= 1.0:
        raise ValueError("window must satisfy 0 <= lo < hi <= E_max")
    edges = np.linspace(ylo, yhi, bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    sel = (sample.y >= ylo) & (sample.y <= yhi)
    yv, cav = sample.y[sel], sample.cos_alpha[sel]
    counts, _ = np.histogram(yv, bins=edges)
    width = edges[1] - edges[0]
    n_tot = counts.sum()
    n_mc = counts / (n_tot * width) if n_tot else np.zeros_like(centers)
    norm = integrate.quad(analytic_N, ylo, yhi, epsrel=1e-10)[0]
    n_ana = analytic_N(centers) / norm
    idx = np.clip(np.searchsorted(edges, yv, side="right") - 1, 0, bins - 1)
    sum_ca = np.bincount(idx, weights=cav, minlength=bins)
    pol = sample.beam.polarization
    with np.errstate(invalid="ignore", divide="ignore"):
        a_mc = np.where(counts > 0, 2.0 * sum_ca / np.maximum(counts, 1) / pol, np.nan) \
            if pol != 0.0 else np.full(bins, np.nan)
    a_ana = analytic_A(centers)
    return np.column_stack([centers, n_mc, n_ana, a_mc, a_ana])


@dataclass(frozen=True, eq=False)
class FDistribution:
    """Normalized distribution of the neutrino energy fraction."""

    f_edges: np.ndarray
    density: np.ndarray
    mean: float
    mode: float
    weighting: str
    window: tuple[float, float]


def _weight_fn(weighting: str, empirical=None):
    if weighting == "N":
        return analytic_N
    if weighting == "A":
        return analytic_A
    if weighting == "NA":
        return lambda y: analytic_N(y) * analytic_A(y)
    if weighting == "NA2":
        return lambda y: analytic_N(y) * analytic_A(y) ** 2
    if weighting == "empirical":
        if empirical is None:
            raise ValueError("empirical weighting requires an ingested bin table")
        return empirical
    raise ValueError(f"unknown weighting {weighting!r}; choose from {WEIGHTINGS}")


def f_distribution(weighting: str, window: tuple[float, float], e_max: float = 3.1,
                   bins: int = 50, sample: EventSample | None = None,
                   empirical=None) -> FDistribution:
    """Distribution of f over an energy window under the chosen weight.

    Quadrature mode evaluates the analytic (or empirical piecewise) weight
    on a fine grid; with an EventSample the events are reweighted by
    w(y)/N(y) since they are drawn from N. The degenerate window [E, E]
    is a point mass at f = 1 - E/e_max.
    """
    lo, hi = window
    if not (0.0 <= lo <= hi <= e_max):
        raise ValueError(f"window {window!r} must lie inside [0, {e_max}]")
    ylo, yhi = lo / e_max, hi / e_max
    if lo == hi:
        fpt = 1.0 - lo / e_max
        return FDistribution(np.array([fpt, fpt]), np.array([math.inf]),
                             mean=fpt, mode=fpt, weighting=weighting, window=(lo, hi))
    flo, fhi = 1.0 - yhi, 1.0 - ylo
    edges = np.linspace(flo, fhi, bins + 1)
    width = edges[1] - edges[0]
    w = _weight_fn(weighting, empirical)
    if sample is not None:
        sel = (sample.y >= ylo) & (sample.y <= yhi)
        yv = sample.y[sel]
        wts = w(yv) / np.maximum(analytic_N(yv), 1e-300)
        hist, _ = np.histogram(1.0 - yv, bins=edges, weights=wts)
        total = hist.sum()
        if total <= 0:
            raise ValueError("degenerate weight: nonpositive total over the window")
        mean = float(np.sum((1.0 - yv) * wts) / np.sum(wts))
    else:
        grid = np.linspace(flo, fhi, bins * 64 + 1)
        wg = w(1.0 - grid)
        hist = np.add.reduceat(wg, np.arange(0, grid.size - 1, 64))
        total = hist.sum()
        if total <= 0:
            raise ValueError("degenerate weight: nonpositive total over the window")
        num = integrate.quad(lambda y: (1.0 - y) * w(y), ylo, yhi, epsrel=1e-10, limit=200)[0]
        den = integrate.quad(w, ylo, yhi, epsrel=1e-10, limit=200)[0]
        mean = num / den
    density = hist / (total * width)
    mode = float(edges[np.argmax(density)] + 0.5 * width)
    return FDistribution(edges, density, mean=float(mean), mode=mode,
                         weighting=weighting, window=(lo, hi))
