import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mug2.constants import (
    ConfigError,
    coefficient_C,
    default_constants,
    dump_constants,
    load_constants,
)


def test_defaults_match_pdg_transcriptions():
    t = load_constants()
    assert t.m_mu == 0.1056583755
    assert t.G_F == 1.1663787e-5
    assert t.E_max == 3.1
    assert t.gamma_magic == 29.3
    assert 1.0e-3 <= t.a_mu_ref <= 1.3e-3


def test_every_entry_has_provenance():
    t = default_constants()
    for key, src in t.provenance.items():
        assert src, f"empty provenance for {key}"


def test_file_override(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment line\nE_max = 3.09\n")
    t = load_constants(cfg)
    assert t.E_max == 3.09
    assert "user override" in t.provenance["E_max"]
    # untouched keys keep their defaults and citations
    assert t.m_mu == 0.1056583755
    assert "PDG" in t.provenance["m_mu"]


def test_override_with_source(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("b_tesla = 1.5\nb_tesla_source = my magnet logbook\n")
    t = load_constants(cfg)
    assert t.b_tesla == 1.5
    assert t.provenance["b_tesla"] == "my magnet logbook"


def test_missing_file_is_not_found():
    with pytest.raises(FileNotFoundError):
        load_constants("/no/such/file.txt")


def test_negative_mass_rejected(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("m_mu = -1\n")
    with pytest.raises(ConfigError, match="m_mu must be positive"):
        load_constants(cfg)


def test_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("m_muon = 0.105\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_constants(cfg)


def test_malformed_value_names_key_and_line(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# header\nG_F = twelve\n")
    with pytest.raises(ConfigError, match=r":2: cannot parse value for 'G_F'"):
        load_constants(cfg)


def test_a_mu_ref_sanity_band(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("a_mu_ref = 2.0e-3\n")
    with pytest.raises(ConfigError, match="sanity band"):
        load_constants(cfg)


def test_dump_reload_bit_exact(tmp_path):
    t = default_constants()
    dump = dump_constants(t)
    path = tmp_path / "dump.txt"
    path.write_text(dump)
    t2 = load_constants(path)
    assert t2 == t
    # and the canonical dump is a fixed point
    assert dump_constants(t2) == dump


def test_dump_sorted_by_key():
    lines = [l.split(" = ")[0] for l in dump_constants(default_constants()).splitlines()]
    assert lines == sorted(lines)


def test_coefficient_value():
    # direct evaluation 3 * m_mu^2 * G_F / (4 sqrt(2) pi^2), frozen
    assert coefficient_C(default_constants()) == pytest.approx(6.996711367585137e-9, rel=1e-12)


def test_coefficient_exact_doubling(tmp_path):
    t = default_constants()
    c0 = coefficient_C(t)
    cfg = tmp_path / "c.txt"
    cfg.write_text(f"G_F = {2 * t.G_F!r}\n")
    assert coefficient_C(load_constants(cfg)) == 2.0 * c0
    cfg.write_text(f"m_mu = {2 * t.m_mu!r}\n")
    assert coefficient_C(load_constants(cfg)) == 4.0 * c0


@given(lam=st.floats(min_value=0.25, max_value=4.0))
def test_coefficient_homogeneity(tmp_path_factory, lam):
    t = default_constants()
    c0 = coefficient_C(t)
    cfg = tmp_path_factory.mktemp("h") / "c.txt"
    cfg.write_text(f"m_mu = {lam * t.m_mu!r}\nG_F = {lam * t.G_F!r}\n")
    assert coefficient_C(load_constants(cfg)) == pytest.approx(lam**3 * c0, rel=1e-12)


def test_tau_lab():
    t = default_constants()
    assert t.tau_lab == pytest.approx(6.437154623e-5, rel=1e-12)
