"""Physical constants, unit conversions and experiment reference values.

Everything downstream works in natural units (GeV, hbar = c = 1); tesla
and seconds are converted only at module boundaries, using the factors
stored here. Reference anomaly values are configuration inputs with a
citation attached to every entry, never hardcoded in computation paths.

Config file format: flat UTF-8 ``key = value`` lines, ``#`` comments.
Keys are exactly the ConstantsTable field names; ``<key>_source`` sets
the provenance string for ``<key>``. ``dump_constants`` emits the same
format sorted by key, and reloading that dump reproduces the table
bit-exactly (values are written with ``repr``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

# Default values and citations, keyed by field name. A config file can
# override any value; an override without a matching "<key>_source" gets
# a "user override" provenance so the non-empty invariant always holds.
_DEFAULTS: dict[str, tuple[float, str]] = {
    "m_mu": (0.1056583755, "muon mass, GeV; PDG 2024, Phys. Rev. D 110, 030001"),
    "m_e": (5.1099895069e-4, "electron mass, GeV; PDG 2024"),
    "G_F": (1.1663787e-5, "Fermi constant, GeV^-2; PDG 2024"),
    "hbar_over_GeV_s": (6.582119569e-25, "hbar, GeV s; CODATA 2018"),
    "tau_mu": (2.1969811e-6, "muon proper lifetime, s; PDG 2024"),
    "E_max": (3.1, "positron lab endpoint energy, GeV; storage-ring window edge, Phys. Rev. D 73, 072003 (2006)"),
    "gamma_magic": (29.3, "muon Lorentz factor at the magic momentum p = 3.094 GeV/c; Phys. Rev. D 73, 072003 (2006)"),
    "e_natural": (0.30282212087208876, "elementary charge, natural units, sqrt(4 pi alpha); PDG 2024 alpha"),
    "tesla_to_gev2": (1.9535277139164525e-16, "magnetic field conversion, GeV^2 per tesla; derived from CODATA 2018 e, hbar and the kg per GeV/c^2 factor"),
    "b_tesla": (1.45, "default storage-ring field, tesla; Phys. Rev. D 73, 072003 (2006)"),
    "a_mu_ref": (1.16592061e-3, "ppm denominator, defaults to the measured world average; PRL 126, 141801 (2021)"),
    "a_mu_exp": (1.16592061e-3, "measured anomaly, BNL+FNAL world average; PRL 126, 141801 (2021)"),
    "a_mu_exp_err": (4.1e-10, "1 sigma on a_mu_exp; PRL 126, 141801 (2021)"),
    "a_mu_sm_datadriven": (1.16591810e-3, "data-driven SM evaluation; Phys. Rep. 887, 1 (2020)"),
    "a_mu_sm_datadriven_err": (4.3e-10, "1 sigma on the data-driven SM value; Phys. Rep. 887, 1 (2020)"),
    "a_mu_sm_lattice": (1.16591954e-3, "lattice SM evaluation; Nature 593, 51 (2021)"),
    "a_mu_sm_lattice_err": (5.5e-10, "1 sigma on the lattice SM value; Nature 593, 51 (2021)"),
}

_STRICTLY_POSITIVE = (
    "m_mu", "m_e", "G_F", "hbar_over_GeV_s", "tau_mu", "E_max",
    "e_natural", "tesla_to_gev2",
)
_NON_NEGATIVE = (
    "b_tesla", "a_mu_exp_err", "a_mu_sm_datadriven_err", "a_mu_sm_lattice_err",
)


class ConfigError(ValueError):
    """Malformed constants file or invariant violation."""


@dataclass(frozen=True)
class ConstantsTable:
    """Immutable table of constants; safe to share across workers."""

    m_mu: float
    m_e: float
    G_F: float
    hbar_over_GeV_s: float
    tau_mu: float
    E_max: float
    gamma_magic: float
    e_natural: float
    tesla_to_gev2: float
    b_tesla: float
    a_mu_ref: float
    a_mu_exp: float
    a_mu_exp_err: float
    a_mu_sm_datadriven: float
    a_mu_sm_datadriven_err: float
    a_mu_sm_lattice: float
    a_mu_sm_lattice_err: float
    provenance: dict[str, str]

    def __post_init__(self):
        for name in _STRICTLY_POSITIVE:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in _NON_NEGATIVE:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.gamma_magic < 1:
            raise ConfigError("gamma_magic must be >= 1")
        if not 1.0e-3 <= self.a_mu_ref <= 1.3e-3:
            raise ConfigError(
                f"a_mu_ref = {self.a_mu_ref!r} outside the sanity band [1.0e-3, 1.3e-3]"
            )
        for f in fields(self):
            if f.name == "provenance":
                continue
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ConfigError(f"{f.name} must be finite")
            if not self.provenance.get(f.name):
                raise ConfigError(f"missing provenance for {f.name}")

    @property
    def tau_lab(self) -> float:
        """Dilated lifetime gamma_magic * tau_mu, seconds."""
        return self.gamma_magic * self.tau_mu


def default_constants() -> ConstantsTable:
    values = {k: v for k, (v, _) in _DEFAULTS.items()}
    provenance = {k: src for k, (_, src) in _DEFAULTS.items()}
    return ConstantsTable(provenance=provenance, **values)


def load_constants(path: str | Path | None = None) -> ConstantsTable:
    """Build a ConstantsTable from defaults, optionally overridden by a file.

    Unknown keys are rejected; a malformed value names the key and line.
    """
    values = {k: v for k, (v, _) in _DEFAULTS.items()}
    provenance = {k: src for k, (_, src) in _DEFAULTS.items()}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"constants file not found: {path}")
        overridden_without_source = set()
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = (t.strip() for t in line.partition("="))
            if key.endswith("_source") and key[: -len("_source")] in values:
                provenance[key[: -len("_source")]] = value
                overridden_without_source.discard(key[: -len("_source")])
                continue
            if key not in values:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: cannot parse value for {key!r}: {value!r}"
                ) from None
            if provenance[key] == _DEFAULTS[key][1]:
                overridden_without_source.add(key)
        for key in overridden_without_source:
            provenance[key] = f"user override ({path})"
    return ConstantsTable(provenance=provenance, **values)


def dump_constants(table: ConstantsTable) -> str:
    """Canonical key = value dump, sorted by key; reloads bit-exactly."""
    pairs = []
    for f in fields(table):
        if f.name == "provenance":
            continue
        pairs.append((f.name, repr(getattr(table, f.name))))
        pairs.append((f"{f.name}_source", table.provenance[f.name]))
    return "\n".join(f"{k} = {v}" for k, v in sorted(pairs)) + "\n"


def coefficient_C(table: ConstantsTable) -> float:
    """Dimensionless coefficient 3 m_mu^2 G_F / (4 sqrt(2) pi^2).

    Multiplies the neutrino energy fraction f in the anomaly correction.
    Evaluates to 6.997e-9 with the default inputs; the commonly quoted
    rounded value is 7.2e-9.
    """
    return 3.0 * table.m_mu**2 * table.G_F / (4.0 * math.sqrt(2.0) * math.pi**2)
