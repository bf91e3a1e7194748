"""Mode-solver tests on a coarse 40 nm grid (a few seconds per solve)."""

import math

import numpy as np
import pytest

from pdcrib.errors import (
    MissingMode,
    NoBracket,
    NoGuidedMode,
    NonMonotonicWavelengths,
    SchemaError,
    ZeroPower,
)
from pdcrib.geometry import RibGeometry, build_cross_section, material_eps
from pdcrib.modesolver import (
    DispersionTable,
    dispersion_scan,
    export_dispersion_table,
    find_degeneracy,
    find_label,
    import_dispersion_table,
    normalize_mode,
    poynting_flux,
    solve_geometry,
    solve_modes,
    yee_cross_flux,
)
from pdcrib.slab import slab_modes

ZC = RibGeometry(w=2000, d=450, h=300, cut="Zcut", grid_step=40)
XC = RibGeometry(w=2000, d=300, h=193.1, cut="Xcut", grid_step=40)


@pytest.fixture(scope="module")
def zmodes():
    return solve_geometry(ZC, 1.55, count=4)


@pytest.fixture(scope="module")
def xmodes():
    return solve_geometry(XC, 1.55, count=4)


def test_zcut_labels_and_order(zmodes):
    assert [m.label for m in zmodes] == ["TE0", "TE1", "TE2", "TM0"]
    n = [m.n_eff for m in zmodes]
    assert n == sorted(n, reverse=True)


def test_guidance_bounds(zmodes, xmodes):
    eln, es = material_eps(1.55)
    for m in zmodes + xmodes:
        assert math.sqrt(es) < m.n_eff < math.sqrt(max(eln))


def test_rib_index_between_slab_limits(zmodes):
    # the rib mode sits between the slab of the outer film and the full film
    eln, es = material_eps(1.55)
    lab = (eln[1], eln[2], eln[0])
    outer = slab_modes(1.55, es, [(ZC.d - ZC.h, lab)], 1.0, "TE")[0]
    full_te = slab_modes(1.55, es, [(ZC.d, lab)], 1.0, "TE")
    full_tm = slab_modes(1.55, es, [(ZC.d, lab)], 1.0, "TM")
    te0 = find_label(zmodes, "TE0").n_eff
    assert outer < te0 < full_te[0]
    assert find_label(zmodes, "TM0").n_eff < full_tm[0]


def test_power_normalized(zmodes):
    for m in zmodes:
        direct = poynting_flux(m.E, m.H, m.mapping, m.cell_area)
        assert direct == pytest.approx(1.0, abs=1e-9)
        assert m.power == pytest.approx(1.0, abs=1e-9)
        assert m.power_normalized


def test_normalization_idempotent_and_scale_free(zmodes):
    m = zmodes[0]
    again = normalize_mode(m)
    assert np.allclose(again.E, m.E, rtol=0, atol=1e-12 * np.abs(m.E).max())
    from dataclasses import replace

    big = replace(m, E=5 * m.E, H=5 * m.H, power_normalized=False)
    back = normalize_mode(big)
    assert np.allclose(back.E, m.E, rtol=1e-10, atol=1e-10 * np.abs(m.E).max())
    assert back.flux() == pytest.approx(1.0, abs=1e-12)


def test_zero_power_rejected(zmodes):
    from dataclasses import replace

    m = zmodes[0]
    with pytest.raises(ZeroPower):
        normalize_mode(replace(m, H=np.zeros_like(m.H), power_normalized=False))


@pytest.mark.parametrize("which", ["z", "x"])
def test_yee_biorthogonality(which, zmodes, xmodes):
    modes = zmodes if which == "z" else xmodes
    diag = [abs(yee_cross_flux(m, m)) for m in modes]
    for i, a in enumerate(modes):
        for j, b in enumerate(modes):
            if i != j:
                assert abs(yee_cross_flux(a, b)) / math.sqrt(diag[i] * diag[j]) < 1e-6


def test_mirror_parity(zmodes, xmodes):
    for m in zmodes + xmodes:
        assert abs(abs(m.parity) - 1) < 1e-6
    par = {m.label: np.sign(m.parity) for m in zmodes}
    # TE0/TE2 share a parity, TE1 has the opposite one
    assert par["TE0"] == par["TE2"] == -par["TE1"]


def test_field_export_header(zmodes):
    head = zmodes[0].to_csv().splitlines()[0].split(",")
    assert head[:2] == ["y_nm", "z_nm"]
    assert len(head) == 14


def test_deterministic_sign():
    a = solve_geometry(ZC, 1.55, count=2)
    b = solve_geometry(ZC, 1.55, count=2)
    for p, q in zip(a, b):
        assert p.n_eff == q.n_eff
        assert np.array_equal(p.E, q.E)


def test_no_guided_mode_for_tiny_rib():
    tiny = RibGeometry(w=40, d=40, h=40, cut="Zcut", grid_step=20, domain_width=1000, domain_height=1000)
    with pytest.raises(NoGuidedMode):
        solve_geometry(tiny, 1.55, count=1)


def test_missing_label(zmodes):
    with pytest.raises(MissingMode):
        find_label(zmodes, "TM3")


def test_wavelength_mismatch():
    pm = build_cross_section(ZC, 1.55)
    with pytest.raises(ValueError):
        solve_modes(pm, 1.50)


def test_single_sample_scan_equals_solve(zmodes):
    t = dispersion_scan(ZC, [1.55], ["TM0", "TE2"], count=4)
    assert t.n_eff("TM0", 1.55) == find_label(zmodes, "TM0").n_eff
    assert t.n_eff("TE2", 1.55) == find_label(zmodes, "TE2").n_eff


# -- dispersion tables ---------------------------------------------------


def _slab_te0(wl):
    eln, es = material_eps(wl)
    return slab_modes(wl, es, [(450, (eln[1], eln[2], eln[0]))], 1.0, "TE")[0]


def _slab_table():
    wl = np.linspace(1.45, 1.65, 9)
    return DispersionTable({"TE0": (wl, np.array([_slab_te0(w) for w in wl]))})


def test_table_roundtrip(tmp_path):
    t = _slab_table()
    path = tmp_path / "t.csv"
    export_dispersion_table(t, path)
    back = import_dispersion_table(path)
    wl, n = t.curves["TE0"]
    assert np.allclose(back.curves["TE0"][0], wl, atol=1e-9)
    # interpolation is exact at samples, and close between them
    assert np.allclose(back.n_eff("TE0", wl), n, atol=1e-8)
    assert back.n_eff("TE0", 1.52) == pytest.approx(_slab_te0(1.52), abs=1e-6)


def test_table_errors():
    with pytest.raises(NonMonotonicWavelengths):
        import_dispersion_table("label,wavelength_um,n_eff\nTE0,1.5,2.0\nTE0,1.5,2.1\n")
    with pytest.raises(SchemaError):
        import_dispersion_table("mode,lambda,n\nTE0,1.5,2.0\n")
    with pytest.raises(SchemaError):
        import_dispersion_table("label,wavelength_um,n_eff\nTE0,abc,2.0\n")
    with pytest.raises(SchemaError):
        import_dispersion_table("label,wavelength_um,n_eff\nTE0,1.55,3.5\n", check_guidance=True)


def test_table_segments():
    t = DispersionTable({"TE0": (np.array([0.77, 0.775, 0.78, 1.5, 1.55, 1.6]), np.arange(6.0))})
    assert len(t.segments("TE0")) == 2
    assert t.n_eff("TE0", 0.775) == pytest.approx(1.0)
    assert t.n_eff("TE0", 1.55) == pytest.approx(4.0)


# -- degeneracy search ---------------------------------------------------


def test_degeneracy_returns_input_when_satisfied():
    assert find_degeneracy(XC, "h", 1.55, tol=0.5) is XC


def test_degeneracy_no_bracket():
    with pytest.raises(NoBracket):
        find_degeneracy(ZC, "h", 1.55, bracket=(280.0, 320.0))


def test_degeneracy_bad_parameter():
    with pytest.raises(ValueError):
        find_degeneracy(ZC, "theta", 1.55)
