import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdcrib.errors import ConfigError, OutOfRange
from pdcrib.geometry import (
    AIR,
    LINBO3,
    SIO2,
    Cut,
    RibGeometry,
    build_cross_section,
    cut_axis_mapping,
)
from pdcrib.materials import LN_EXTRAORDINARY, LN_ORDINARY, refractive_index

Z = RibGeometry(w=2000, d=450, h=300, cut="Zcut")
X = RibGeometry(w=2000, d=300, h=193.1, cut="Xcut")


def test_cut_mappings():
    z = cut_axis_mapping(Cut.Zcut)
    assert z.names == "yzx"  # transverse (y, z), propagation x
    x = cut_axis_mapping("X")
    assert x.names == "zxy"  # transverse (z, x), propagation y


@pytest.mark.parametrize("cut", ["Zcut", "Xcut"])
def test_mapping_inverse_identity(cut):
    m = cut_axis_mapping(cut)
    v = np.array([10.0, 20.0, 30.0])
    assert np.array_equal(m.to_crystal(m.to_lab(v)), v)
    assert [m[i] for i in m.inverse()] == [0, 1, 2]


def test_geometry_invariants():
    with pytest.raises(ConfigError):
        RibGeometry(w=2000, d=300, h=400)
    with pytest.raises(ConfigError):
        RibGeometry(w=2000, d=300, h=0)
    with pytest.raises(ConfigError):
        RibGeometry(w=2000, d=300, h=100, grid_step=0)
    with pytest.raises(ConfigError):
        RibGeometry(w=2000, d=300, h=100, cut="Y")


def test_zcut_permittivity_values():
    pm = build_cross_section(Z, 1.55)
    no = refractive_index(LN_ORDINARY, 1.55)
    ne = refractive_index(LN_EXTRAORDINARY, 1.55)
    full = pm.fill > 1 - 1e-12
    e = pm.eps[full]
    assert np.allclose(e[:, 0], no**2) and np.allclose(e[:, 1], no**2) and np.allclose(e[:, 2], ne**2)
    assert pm.eps.max() == pytest.approx(2.1837**2, abs=1e-2)
    # in-plane (horizontal) is y = ordinary; vertical is z = extraordinary
    m = pm.mapping
    assert pm.eps_linbo3[m.horizontal] == pytest.approx(no**2)
    assert pm.eps_linbo3[m.vertical] == pytest.approx(ne**2)


def test_xcut_optic_axis_horizontal():
    pm = build_cross_section(X, 1.55)
    ne = refractive_index(LN_EXTRAORDINARY, 1.55)
    assert pm.eps_linbo3[pm.mapping.horizontal] == pytest.approx(ne**2)


def test_eps_at_least_one_and_air_exact():
    pm = build_cross_section(Z, 0.775)
    assert pm.eps.min() >= 1.0
    assert np.all(pm.eps[pm.tag == AIR].min() >= 1.0)
    top = pm.eps[:, -1]
    assert np.all(top == 1.0)


@pytest.mark.parametrize("geom", [Z, X, Z.with_(h=450)])
def test_linbo3_area_closed_form(geom):
    pm = build_cross_section(geom, 1.55)
    area = pm.fill.sum() * pm.cell_area
    assert abs(area - geom.linbo3_area()) < pm.cell_area


def test_full_etch_has_no_wings():
    g = Z.with_(h=450)
    pm = build_cross_section(g, 1.55)
    wing = np.abs(pm.u) > g.w / 2 + g.run + g.dx
    assert np.all(pm.tag[wing] != LINBO3)


@pytest.mark.parametrize("geom", [Z, X])
def test_mirror_symmetry(geom):
    pm = build_cross_section(geom, 1.55)
    assert np.allclose(pm.eps, pm.eps[::-1], atol=1e-14)


@pytest.mark.parametrize("geom", [Z, X])
def test_mass_converges_under_refinement(geom):
    a = build_cross_section(geom, 1.55).mass()
    b = build_cross_section(geom.with_(grid_step=geom.grid_step / 2), 1.55).mass()
    assert abs(a - b) / b < 1e-3


@given(
    w=st.floats(500, 3000),
    d=st.floats(200, 800),
    hf=st.floats(0.05, 1.0),
    theta=st.floats(30, 90),
)
@settings(max_examples=20, deadline=None)
def test_area_property(w, d, hf, theta):
    g = RibGeometry(w=w, d=d, h=hf * d, theta=theta, grid_step=25, domain_width=6000, domain_height=3000)
    pm = build_cross_section(g, 1.3)
    assert abs(pm.fill.sum() * pm.cell_area - g.linbo3_area()) < pm.cell_area
    assert np.all((pm.fill >= 0) & (pm.fill <= 1))


def test_tags_layers():
    pm = build_cross_section(Z, 1.55)
    j_buf = np.argmin(np.abs(pm.v + 500))
    assert np.all(pm.tag[:, j_buf] == SIO2)


def test_out_of_range_propagates():
    with pytest.raises(OutOfRange):
        build_cross_section(Z, 2.0)


def test_csv_export():
    g = RibGeometry(w=1000, d=300, h=150, grid_step=100, domain_width=2000, domain_height=1000)
    text = build_cross_section(g, 1.55).to_csv()
    lines = text.splitlines()
    assert lines[0] == "y_nm,z_nm,eps_xx,eps_yy,eps_zz,material"
    assert len(lines) == 1 + 20 * 10
