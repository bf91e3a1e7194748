"""Rib cross-section rasterization and crystal-cut bookkeeping.

Cross-section coordinates: ``u`` runs horizontally (centred on the rib) and
``v`` vertically, with the LiNbO3/SiO2 interface at ``v = 0``.  The LiNbO3
film occupies ``0 <= v <= top(u)`` where ``top`` is ``d`` on the rib, drops
along the sidewalls at angle theta, and is ``d - h`` on the slab wings.
Everything is in nanometres.

Permittivities are kept in the crystal frame (x, y, z), the optic axis
being z for both cuts; :func:`cut_axis_mapping` says which crystal axis is
horizontal, vertical and along propagation.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import materials
from .errors import ConfigError

AIR, SIO2, LINBO3 = 0, 1, 2
MATERIAL_NAMES = {AIR: "air", SIO2: "SiO2", LINBO3: "LiNbO3"}

AXES = "xyz"


class Cut(str, enum.Enum):
    Zcut = "Zcut"
    Xcut = "Xcut"

    @classmethod
    def parse(cls, value) -> "Cut":
        text = str(getattr(value, "value", value)).replace("-", "").lower()
        for c in cls:
            if text in (c.value.lower(), c.value[0].lower()):
                return c
        raise ConfigError(f"unknown crystal cut {value!r}")


class AxisMapping(NamedTuple):
    """Crystal-axis indices (0=x, 1=y, 2=z) along horizontal, vertical, propagation."""

    horizontal: int
    vertical: int
    propagation: int

    @property
    def names(self) -> str:
        return "".join(AXES[i] for i in self)

    def inverse(self) -> tuple[int, int, int]:
        """Position of each crystal axis in (horizontal, vertical, propagation)."""
        inv = [0, 0, 0]
        for lab, crys in enumerate(self):
            inv[crys] = lab
        return tuple(inv)

    def to_lab(self, vec):
        """Reorder a crystal-frame last axis into (h, v, p) order."""
        return np.asarray(vec)[..., list(self)]

    def to_crystal(self, vec):
        return np.asarray(vec)[..., list(self.inverse())]


_MAPPINGS = {
    # Z-cut: propagation along crystal x, cross-section (y, z), optic axis vertical.
    Cut.Zcut: AxisMapping(horizontal=1, vertical=2, propagation=0),
    # X-cut: propagation along crystal y, cross-section (z, x), optic axis horizontal.
    Cut.Xcut: AxisMapping(horizontal=2, vertical=0, propagation=1),
}


def cut_axis_mapping(cut) -> AxisMapping:
    return _MAPPINGS[Cut.parse(cut)]


@dataclass(frozen=True)
class RibGeometry:
    """Rib waveguide cross-section, lengths in nm.

    ``w`` is the top width of the rib, ``d`` the film thickness, ``h`` the
    etch depth and ``theta`` the sidewall angle in degrees.  The computational
    window is ``domain_width`` x ``domain_height`` with the film interface
    placed so that ``buffer_fraction`` of the spare height lies in the buffer.
    ``grid_x`` optionally overrides the horizontal step.
    """

    w: float
    d: float
    h: float
    cut: Cut = Cut.Zcut
    theta: float = 45.0
    domain_width: float = 6000.0
    domain_height: float = 4000.0
    grid_step: float = 20.0
    grid_x: float | None = None
    buffer_fraction: float = 0.65

    def __post_init__(self):
        object.__setattr__(self, "cut", Cut.parse(self.cut))
        if not (self.w > 0 and self.d > 0 and 0 < self.h <= self.d):
            raise ConfigError("rib geometry requires w > 0 and 0 < h <= d")
        if not 0 < self.theta <= 90:
            raise ConfigError("sidewall angle must be in (0, 90] degrees")
        if not (self.grid_step > 0 and (self.grid_x is None or self.grid_x > 0)):
            raise ConfigError("grid steps must be positive")
        if self.domain_height <= self.d or self.domain_width <= self.w:
            raise ConfigError("computational window smaller than the rib")
        if not 0 < self.buffer_fraction < 1:
            raise ConfigError("buffer_fraction must lie in (0, 1)")

    @property
    def dx(self) -> float:
        return self.grid_x or self.grid_step

    @property
    def dy(self) -> float:
        return self.grid_step

    @property
    def slab(self) -> float:
        return self.d - self.h

    @property
    def run(self) -> float:
        """Horizontal extent of one sidewall."""
        if self.theta >= 90:
            return 0.0
        return self.h / math.tan(math.radians(self.theta))

    def with_(self, **kw) -> "RibGeometry":
        return replace(self, **kw)

    def shape(self) -> tuple[int, int]:
        nx = max(int(round(self.domain_width / self.dx)), 4)
        ny = max(int(round(self.domain_height / self.dy)), 4)
        return nx, ny

    def node_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Grid node coordinates (u, v), nm; cells lie between nodes."""
        nx, ny = self.shape()
        width, height = nx * self.dx, ny * self.dy
        u = -width / 2 + self.dx * np.arange(nx + 1)
        spare = height - self.d
        v0 = -self.buffer_fraction * spare
        v = v0 + self.dy * np.arange(ny + 1)
        return u, v

    def top(self, u):
        """Upper LiNbO3 boundary at horizontal position ``u``."""
        a = np.abs(np.asarray(u, dtype=float)) - self.w / 2
        if self.run == 0:
            return np.where(a <= 0, self.d, self.slab)
        return np.clip(self.d - a * (self.h / self.run), self.slab, self.d)

    def linbo3_area(self) -> float:
        """Closed-form LiNbO3 cross-section inside the window (nm^2)."""
        u, _ = self.node_axes()
        width = u[-1] - u[0]
        return width * self.slab + self.h * (self.w + self.run)


def fill_lengths(geom: RibGeometry, u_lo, u_hi, v_lo, v_hi, nsub: int = 16):
    """Per-subcolumn vertical extents of SiO2, LiNbO3 and air in rectangles.

    Rectangles broadcast over the input arrays; returns three arrays of shape
    ``(..., nsub)`` in nm whose sum is ``v_hi - v_lo``.  Subcolumns sit at the
    midpoints of ``nsub`` equal horizontal strips.
    """
    u_lo = np.asarray(u_lo, dtype=float)[..., None]
    u_hi = np.asarray(u_hi, dtype=float)[..., None]
    v_lo = np.asarray(v_lo, dtype=float)[..., None]
    v_hi = np.asarray(v_hi, dtype=float)[..., None]
    frac = (np.arange(nsub) + 0.5) / nsub
    us = u_lo + (u_hi - u_lo) * frac
    top = geom.top(us)
    clip0 = np.clip(0.0, v_lo, v_hi)
    cliptop = np.clip(top, v_lo, v_hi)
    l_sio2 = clip0 - v_lo
    l_ln = cliptop - clip0
    l_air = v_hi - cliptop
    return l_sio2, l_ln, l_air


def average_eps(geom, u_lo, u_hi, v_lo, v_hi, eps_ln, eps_sio2, harmonic_v=False, nsub=16):
    """Area-weighted permittivity of rectangles for one tensor component.

    With ``harmonic_v`` each subcolumn is averaged harmonically along v (the
    component normal to horizontal interfaces) before the arithmetic mean
    across subcolumns.
    """
    l_s, l_l, l_a = fill_lengths(geom, u_lo, u_hi, v_lo, v_hi, nsub)
    tot = l_s + l_l + l_a
    if harmonic_v:
        col = tot / (l_s / eps_sio2 + l_l / eps_ln + l_a)
    else:
        col = (l_s * eps_sio2 + l_l * eps_ln + l_a) / tot
    return col.mean(axis=-1)


@dataclass(frozen=True)
class PermittivityMap:
    """Rasterized cross-section at one wavelength.

    ``eps`` has shape (nx, ny, 3) holding the crystal-frame diagonal
    (eps_xx, eps_yy, eps_zz) per cell; ``fill`` is the LiNbO3 area fraction and
    ``tag`` the majority material per cell.
    """

    geometry: RibGeometry
    wavelength: float
    u_nodes: np.ndarray
    v_nodes: np.ndarray
    eps: np.ndarray
    fill: np.ndarray
    tag: np.ndarray
    eps_linbo3: tuple
    eps_sio2: float
    mapping: AxisMapping = field(default=None)

    @property
    def u(self) -> np.ndarray:
        return 0.5 * (self.u_nodes[1:] + self.u_nodes[:-1])

    @property
    def v(self) -> np.ndarray:
        return 0.5 * (self.v_nodes[1:] + self.v_nodes[:-1])

    @property
    def shape(self):
        return self.eps.shape[:2]

    @property
    def cell_area(self) -> float:
        return self.geometry.dx * self.geometry.dy

    def lab_eps(self, which: str, u_lo, u_hi, v_lo, v_hi, harmonic_v=False):
        """Averaged permittivity of component ``which`` ('h', 'v' or 'p') on rectangles."""
        idx = {"h": 0, "v": 1, "p": 2}[which]
        eps_ln = self.eps_linbo3[self.mapping[idx]]
        return average_eps(self.geometry, u_lo, u_hi, v_lo, v_hi, eps_ln, self.eps_sio2, harmonic_v)

    def mass(self) -> float:
        """Sum of eps over cells times cell area (trace / 3), nm^2."""
        return float(self.eps.mean(axis=-1).sum() * self.cell_area)

    def to_csv(self) -> str:
        m = self.mapping
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow([f"{AXES[m.horizontal]}_nm", f"{AXES[m.vertical]}_nm", "eps_xx", "eps_yy", "eps_zz", "material"])
        for i, uu in enumerate(self.u):
            for j, vv in enumerate(self.v):
                e = self.eps[i, j]
                wr.writerow([f"{uu:.9g}", f"{vv:.9g}", f"{e[0]:.9g}", f"{e[1]:.9g}", f"{e[2]:.9g}",
                             MATERIAL_NAMES[int(self.tag[i, j])]])
        return buf.getvalue()


def material_eps(wavelength: float, models=None) -> tuple[tuple, float]:
    """Crystal-frame LiNbO3 diagonal (n_o^2, n_o^2, n_e^2) and SiO2 permittivity."""
    no = materials.refractive_index(materials.LN_ORDINARY, wavelength, models=models)
    ne = materials.refractive_index(materials.LN_EXTRAORDINARY, wavelength, models=models)
    ns = materials.refractive_index(materials.SIO2, wavelength, models=models)
    return (no * no, no * no, ne * ne), ns * ns


def build_cross_section(geom: RibGeometry, wavelength: float, models=None) -> PermittivityMap:
    """Rasterize the rib at ``wavelength`` (micrometres) with area-weighted cells."""
    eps_ln, eps_s = material_eps(wavelength, models)
    u, v = geom.node_axes()
    U_lo, V_lo = np.meshgrid(u[:-1], v[:-1], indexing="ij")
    U_hi, V_hi = np.meshgrid(u[1:], v[1:], indexing="ij")
    l_s, l_l, l_a = fill_lengths(geom, U_lo, U_hi, V_lo, V_hi)
    tot = (l_s + l_l + l_a).mean(axis=-1)
    f_s = l_s.mean(axis=-1) / tot
    f_l = l_l.mean(axis=-1) / tot
    f_a = l_a.mean(axis=-1) / tot
    eps = np.empty(f_l.shape + (3,))
    for k in range(3):
        eps[..., k] = f_s * eps_s + f_l * eps_ln[k] + f_a * 1.0
    tag = np.argmax(np.stack([f_a, f_s, f_l]), axis=0).astype(np.int8)
    return PermittivityMap(
        geometry=geom,
        wavelength=float(wavelength),
        u_nodes=u,
        v_nodes=v,
        eps=eps,
        fill=f_l,
        tag=tag,
        eps_linbo3=tuple(float(e) for e in eps_ln),
        eps_sio2=float(eps_s),
        mapping=cut_axis_mapping(geom.cut),
    )
