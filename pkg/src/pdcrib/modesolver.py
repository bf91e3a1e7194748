r"""Full-vectorial finite-difference mode solver for the rib cross-section.

Fields vary as exp(i w t - i beta p) along the propagation axis p.  On a
Yee grid over the (u, v) window with node spacing (du, dv):

* E_u sits at (u_{i+1/2}, v_j), E_v at (u_i, v_{j+1/2}), E_p at nodes,
* H_u shares the E_v location, H_v the E_u location, H_p sits at cell centres.

Eliminating E_p and H gives the transverse eigenproblem

    beta^2 E_t = k0^2 eps_t E_t + grad_t[ eps_pp^{-1} div_t(eps_t E_t) ]
                 - curl_t^T curl_t E_t

with a diagonal anisotropic permittivity.  The outer boundary is a perfect
electric conductor: tangential E vanishes on the window edge.  Shift-invert
Arnoldi around the largest material index returns the guided modes.

Discrete orthogonality: for distinct eigenvalues the Yee-collocated cross
flux  1/2 sum (E_u^m H_v^n - E_v^m H_u^n) dA  vanishes to round-off (see
:func:`yee_cross_flux`).  The cell-centred samples returned to callers are
averages of the Yee values and satisfy it only to O(step^2).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.constants import c as C0, epsilon_0, mu_0

from .errors import (
    Ambiguous,
    GridMismatch,
    MissingMode,
    NoBracket,
    NoGuidedMode,
    NonMonotonicWavelengths,
    OutOfTableRange,
    SchemaError,
    SolverFailure,
    TrackingLost,
    ZeroPower,
)
from .geometry import AXES, PermittivityMap, RibGeometry, build_cross_section

log = logging.getLogger(__name__)

Z0 = math.sqrt(mu_0 / epsilon_0)
NM = 1e-9

EIG_TOL = 1e-12
EXTRA_MODES = 4
DEGENERATE_RTOL = 1e-6
AMBIGUOUS_BAND = (0.45, 0.55)


@dataclass(frozen=True)
class ModeRecord:
    """One guided mode sampled at the cell centres of the permittivity map.

    ``E`` and ``H`` have shape (nu, nv, 3) in the crystal frame (x, y, z),
    in V/m and A/m.  ``power`` is N = 1/4 int (E* x H + E x H*) . p dA of the
    stored fields.
    """

    label: str
    wavelength: float
    n_eff: float
    E: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    fill: np.ndarray = field(repr=False)
    geometry: RibGeometry = field(repr=False)
    power: float = 1.0
    power_normalized: bool = False
    te_fraction: float = float("nan")
    parity: float = float("nan")
    boundary_ratio: float = float("nan")
    yee: tuple | None = field(default=None, repr=False)

    @property
    def mapping(self):
        from .geometry import cut_axis_mapping

        return cut_axis_mapping(self.geometry.cut)

    @property
    def cell_area(self) -> float:
        """Cell area in m^2."""
        return self.geometry.dx * self.geometry.dy * NM * NM

    @property
    def omega(self) -> float:
        return 2 * math.pi * C0 / (self.wavelength * 1e-6)

    @property
    def beta(self) -> float:
        return self.n_eff * self.omega / C0

    @property
    def amplitude(self) -> float:
        """Peak |E| (V/m), the scale of the dimensionless profile."""
        return float(np.sqrt((np.abs(self.E) ** 2).sum(-1)).max())

    @property
    def profile(self) -> np.ndarray:
        """Dimensionless transverse E profile, peak |E| = 1."""
        return self.E / self.amplitude

    def lab(self, F: np.ndarray) -> np.ndarray:
        """Reorder a crystal-frame field into (horizontal, vertical, propagation)."""
        return self.mapping.to_lab(F)

    def flux(self) -> float:
        return poynting_flux(self.E, self.H, self.mapping, self.cell_area)

    def same_grid(self, other: "ModeRecord") -> bool:
        return (
            self.u.shape == other.u.shape
            and self.v.shape == other.v.shape
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
        )

    def to_csv(self) -> str:
        """Field export: coordinates then Re/Im of Ex, Ey, Ez, Hx, Hy, Hz."""
        m = self.mapping
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        head = [f"{AXES[m.horizontal]}_nm", f"{AXES[m.vertical]}_nm"]
        for name in ("E", "H"):
            for ax in AXES:
                head += [f"Re_{name}{ax}", f"Im_{name}{ax}"]
        wr.writerow(head)
        for i, uu in enumerate(self.u):
            for j, vv in enumerate(self.v):
                row = [f"{uu:.9g}", f"{vv:.9g}"]
                for F in (self.E, self.H):
                    for k in range(3):
                        row += [f"{F[i, j, k].real:.9g}", f"{F[i, j, k].imag:.9g}"]
                wr.writerow(row)
        return buf.getvalue()


def poynting_flux(E, H, mapping, cell_area) -> float:
    """1/2 Re int (E x H*) . p dA by the midpoint rule."""
    h, v = mapping.horizontal, mapping.vertical
    s = E[..., h] * np.conj(H[..., v]) - E[..., v] * np.conj(H[..., h])
    return float(0.5 * np.real(s.sum()) * cell_area)


def cross_flux(a: ModeRecord, b: ModeRecord) -> complex:
    """1/4 int (E_a x H_b* + E_b* x H_a) . p dA."""
    m = a.mapping
    h, v = m.horizontal, m.vertical
    t1 = a.E[..., h] * np.conj(b.H[..., v]) - a.E[..., v] * np.conj(b.H[..., h])
    t2 = np.conj(b.E[..., h]) * a.H[..., v] - np.conj(b.E[..., v]) * a.H[..., h]
    return complex(0.25 * (t1 + t2).sum() * a.cell_area)


def yee_cross_flux(a: ModeRecord, b: ModeRecord) -> float:
    """1/2 sum (E_u^a H_v^b - E_v^a H_u^b) dA on Yee-collocated samples.

    Vanishes to round-off between distinct modes of one solve: this is the
    discrete biorthogonality relation of the formulation.
    """
    if a.yee is None or b.yee is None:
        raise ValueError("Yee samples not available")
    if not a.same_grid(b):
        raise GridMismatch("modes live on different grids")
    eu, ev, _, _ = a.yee
    _, _, hu, hv = b.yee
    return float(0.5 * ((eu * hv).sum() - (ev * hu).sum()) * a.cell_area)


def normalize_mode(mode: ModeRecord) -> ModeRecord:
    """Rescale fields so the longitudinal Poynting flux is exactly 1 W."""
    P = mode.flux()
    scale_ref = (np.abs(mode.E) ** 2).sum() * mode.cell_area / Z0
    if not np.isfinite(P) or P <= 1e-12 * max(scale_ref, 1e-300):
        raise ZeroPower("mode carries no longitudinal power")
    if mode.power_normalized and abs(P - 1.0) < 1e-13:
        return mode
    s = 1.0 / math.sqrt(P)
    yee = None if mode.yee is None else tuple(a * s for a in mode.yee)
    out = replace(mode, E=mode.E * s, H=mode.H * s, yee=yee, power_normalized=True)
    return replace(out, power=out.flux())


# --------------------------------------------------------------------------
# operator assembly


def _diff(n: int, step: float) -> sp.csr_matrix:
    """(n-1) x n difference from n edge values onto the n-1 interior nodes."""
    ones = np.ones(n - 1)
    return sp.diags([-ones, ones], [0, 1], shape=(n - 1, n), format="csr") / step


@dataclass
class _YeeSystem:
    pmap: PermittivityMap
    k0: float  # 1/nm
    nu: int
    nv: int
    du: float
    dv: float
    eps_u: np.ndarray  # at E_u sites, (nu, nv-1)
    eps_v: np.ndarray  # at E_v sites, (nu-1, nv)
    eps_p: np.ndarray  # at interior nodes, (nu-1, nv-1)
    div_u: sp.csr_matrix
    div_v: sp.csr_matrix
    curl_u: sp.csr_matrix  # d/du of E_v onto cell centres
    curl_v: sp.csr_matrix  # d/dv of E_u onto cell centres

    @property
    def n_u(self) -> int:
        return self.nu * (self.nv - 1)

    def operator(self) -> sp.csr_matrix:
        eps_t = sp.diags(np.concatenate([self.eps_u.ravel(), self.eps_v.ravel()]))
        div = sp.hstack([self.div_u, self.div_v], format="csr")
        curl = sp.hstack([-self.curl_v, self.curl_u], format="csr")
        inv_p = sp.diags(1.0 / self.eps_p.ravel())
        A = self.k0**2 * eps_t - div.T @ inv_p @ div @ eps_t - curl.T @ curl
        return A.tocsc()

    def split(self, vec):
        eu = vec[: self.n_u].reshape(self.nu, self.nv - 1)
        ev = vec[self.n_u :].reshape(self.nu - 1, self.nv)
        return eu, ev

    def mirror(self, vec):
        eu, ev = self.split(vec)
        return np.concatenate([-eu[::-1].ravel(), ev[::-1].ravel()])


def _assemble(pmap: PermittivityMap) -> _YeeSystem:
    g = pmap.geometry
    un, vn = pmap.u_nodes, pmap.v_nodes
    nu, nv = len(un) - 1, len(vn) - 1
    du, dv = g.dx, g.dy
    uc = 0.5 * (un[1:] + un[:-1])
    vc = 0.5 * (vn[1:] + vn[:-1])
    # E_u sites: cell-centre u, interior node v; dual cell straddles the node row.
    U, V = np.meshgrid(uc, vn[1:-1], indexing="ij")
    eps_u = pmap.lab_eps("h", U - du / 2, U + du / 2, V - dv / 2, V + dv / 2)
    U, V = np.meshgrid(un[1:-1], vc, indexing="ij")
    eps_v = pmap.lab_eps("v", U - du / 2, U + du / 2, V - dv / 2, V + dv / 2, harmonic_v=True)
    U, V = np.meshgrid(un[1:-1], vn[1:-1], indexing="ij")
    eps_p = pmap.lab_eps("p", U - du / 2, U + du / 2, V - dv / 2, V + dv / 2)
    Gu, Gv = _diff(nu, du), _diff(nv, dv)
    return _YeeSystem(
        pmap=pmap,
        k0=2 * math.pi / (pmap.wavelength * 1e3),
        nu=nu,
        nv=nv,
        du=du,
        dv=dv,
        eps_u=eps_u,
        eps_v=eps_v,
        eps_p=eps_p,
        div_u=sp.kron(Gu, sp.identity(nv - 1), format="csr"),
        div_v=sp.kron(sp.identity(nu - 1), Gv, format="csr"),
        curl_u=sp.kron(-Gu.T, sp.identity(nv), format="csr"),
        curl_v=sp.kron(sp.identity(nu), -Gv.T, format="csr"),
    )


def _pad(a, axis):
    pad = [(0, 0)] * a.ndim
    pad[axis] = (1, 1)
    return np.pad(a, pad)


def _fields(sys_: _YeeSystem, vec: np.ndarray, beta: float):
    """Cell-centred lab-frame E and H' = Z0 H from a transverse eigenvector."""
    eu, ev = sys_.split(vec)
    D = (sys_.div_u @ (sys_.eps_u.ravel() * eu.ravel()) + sys_.div_v @ (sys_.eps_v.ravel() * ev.ravel()))
    phi = D / sys_.eps_p.ravel()
    ep = (-1j / beta) * phi.reshape(sys_.nu - 1, sys_.nv - 1)
    # grad of phi onto the E_u and E_v sites
    grad_u = (-sys_.div_u.T @ phi).reshape(sys_.nu, sys_.nv - 1)
    grad_v = (-sys_.div_v.T @ phi).reshape(sys_.nu - 1, sys_.nv)
    k0 = sys_.k0
    hu = (grad_v / beta - beta * ev) / k0  # at E_v sites
    hv = (beta * eu - grad_u / beta) / k0  # at E_u sites
    curl = (sys_.curl_u @ ev.ravel() - sys_.curl_v @ eu.ravel()).reshape(sys_.nu, sys_.nv)
    hp = 1j * curl / k0

    def centre_u(a):  # (nu, nv-1) at node rows -> centres
        a = _pad(a, 1)
        return 0.5 * (a[:, 1:] + a[:, :-1])

    def centre_v(a):  # (nu-1, nv) at node columns -> centres
        a = _pad(a, 0)
        return 0.5 * (a[1:, :] + a[:-1, :])

    def centre_node(a):
        a = _pad(_pad(a, 0), 1)
        return 0.25 * (a[1:, 1:] + a[:-1, 1:] + a[1:, :-1] + a[:-1, :-1])

    yee = (eu, ev, hu, hv)
    E = np.stack([centre_u(eu), centre_v(ev), centre_node(ep)], axis=-1).astype(complex)
    Hp = np.stack([centre_v(hu), centre_u(hv), hp], axis=-1).astype(complex)
    return E, Hp, yee


def _disentangle(sys_: _YeeSystem, A, vals, vecs):
    """Rotate near-degenerate eigenvectors onto definite mirror parity."""
    order = np.argsort(-vals.real)
    vals, vecs = vals[order].real, vecs[:, order].real
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and abs(vals[j] - vals[i]) <= DEGENERATE_RTOL * abs(vals[i]):
            j += 1
        if j - i > 1:
            V = vecs[:, i:j]
            MV = np.column_stack([sys_.mirror(V[:, k]) for k in range(j - i)])
            S = V.T @ MV
            G = V.T @ V
            w, c = np.linalg.eig(np.linalg.solve(G, S))
            W = V @ c.real
            for k in range(j - i):
                x = W[:, k] / np.linalg.norm(W[:, k])
                vecs[:, i + k] = x
                vals[i + k] = float(x @ (A @ x))
        i = j
    return vals, vecs


def _classify_arrays(E_lab, u, v, geom: RibGeometry):
    ph = (np.abs(E_lab[..., 0]) ** 2).sum()
    pv = (np.abs(E_lab[..., 1]) ** 2).sum()
    te = float(ph / (ph + pv))
    lo, hi = AMBIGUOUS_BAND
    if lo <= te <= hi:
        raise Ambiguous(f"TE fraction {te:.3f} lies inside the ambiguity band")
    comp = 0 if te > hi else 1
    row = int(np.argmin(np.abs(v - (geom.d - geom.h / 2))))
    line = E_lab[:, row, comp].real
    if not np.any(line):
        line = E_lab[:, row, comp].imag
    big = np.abs(line) > 0.1 * np.abs(line).max()
    s = np.sign(line[big])
    order = int(np.count_nonzero(s[1:] != s[:-1]))
    return ("TE" if comp == 0 else "TM") + str(order), te


def classify_mode(mode: ModeRecord) -> str:
    """TE/TM by dominant transverse E, order by sign changes along the rib midline."""
    label, _ = _classify_arrays(mode.lab(mode.E), mode.u, mode.v, mode.geometry)
    return label


def _boundary_ratio(E_lab) -> float:
    mag = np.sqrt((np.abs(E_lab) ** 2).sum(-1))
    edge = max(mag[0].max(), mag[-1].max(), mag[:, 0].max(), mag[:, -1].max())
    return float(edge / mag.max())


def solve_modes(pmap: PermittivityMap, wavelength: float | None = None, count: int = 4) -> list[ModeRecord]:
    """Return the ``count`` guided modes with largest n_eff, power normalized.

    Modes are ordered by descending n_eff; exact ties go to the larger TE
    fraction first.  Modes whose TE fraction falls in the ambiguity band are
    labelled ``"hybrid"``.
    """
    if wavelength is not None and abs(wavelength - pmap.wavelength) > 1e-12:
        raise ValueError("permittivity map was built at a different wavelength")
    if count < 1:
        raise ValueError("count must be >= 1")
    sys_ = _assemble(pmap)
    A = sys_.operator()
    n_ln = math.sqrt(max(pmap.eps_linbo3))
    n_clad = math.sqrt(max(pmap.eps_sio2, 1.0))
    k0 = sys_.k0
    sigma = (k0 * n_ln) ** 2
    nev = min(count + EXTRA_MODES, A.shape[0] - 2)
    try:
        vals, vecs = spla.eigs(A, k=nev, sigma=sigma, which="LM", tol=EIG_TOL, v0=np.ones(A.shape[0]))
    except (spla.ArpackNoConvergence, RuntimeError) as exc:
        raise SolverFailure(f"eigensolver failed: {exc}") from exc
    vals, vecs = _disentangle(sys_, A, vals, vecs)
    neff = np.sqrt(np.clip(vals, 0, None)) / k0
    keep = (neff > n_clad) & (neff < n_ln)
    if not keep.any():
        raise NoGuidedMode(f"no eigenvalue above the cladding line n={n_clad:.4f}")
    geom = pmap.geometry
    mapping = pmap.mapping
    inv = list(mapping.inverse())
    modes = []
    for val, vec, n in zip(vals[keep], vecs[:, keep].T, neff[keep]):
        beta = math.sqrt(val)
        E_lab, Hp_lab, yee = _fields(sys_, vec, beta)
        # deterministic sign: dominant transverse component positive at its peak
        te_guess = (np.abs(E_lab[..., 0]) ** 2).sum() >= (np.abs(E_lab[..., 1]) ** 2).sum()
        comp = E_lab[..., 0 if te_guess else 1].real
        if comp.flat[np.argmax(np.abs(comp))] < 0:
            E_lab, Hp_lab = -E_lab, -Hp_lab
            yee = tuple(-a for a in yee)
        try:
            label, te = _classify_arrays(E_lab, pmap.u, pmap.v, geom)
        except Ambiguous:
            ph = (np.abs(E_lab[..., 0]) ** 2).sum()
            te = float(ph / (ph + (np.abs(E_lab[..., 1]) ** 2).sum()))
            label = "hybrid"
        mv = sys_.mirror(vec)
        parity = float(vec @ mv / (vec @ vec))
        rec = ModeRecord(
            label=label,
            wavelength=pmap.wavelength,
            n_eff=float(n),
            E=E_lab[..., inv],
            H=Hp_lab[..., inv] / Z0,
            u=pmap.u,
            v=pmap.v,
            fill=pmap.fill,
            geometry=geom,
            te_fraction=te,
            parity=parity,
            boundary_ratio=_boundary_ratio(E_lab),
            yee=(yee[0], yee[1], yee[2] / Z0, yee[3] / Z0),
        )
        rec = normalize_mode(replace(rec, power=rec.flux()))
        modes.append(rec)
    modes.sort(key=lambda m: (-round(m.n_eff, 12), -m.te_fraction))
    modes = modes[:count]
    for m in modes:
        if m.boundary_ratio > 1e-2:
            log.info("mode %s: field at window edge is %.1e of peak", m.label, m.boundary_ratio)
    return modes


def solve_geometry(geom: RibGeometry, wavelength: float, count: int = 4, models=None) -> list[ModeRecord]:
    return solve_modes(build_cross_section(geom, wavelength, models), wavelength, count)


def find_label(modes: Sequence[ModeRecord], label: str) -> ModeRecord:
    for m in modes:
        if m.label == label:
            return m
    raise MissingMode(f"mode {label} not among {[m.label for m in modes]}")


# --------------------------------------------------------------------------
# dispersion tables

DISPERSION_HEADER = ("label", "wavelength_um", "n_eff")
# samples of one label further apart than this belong to separate branches
SEGMENT_GAP_UM = 0.1


@dataclass(frozen=True)
class DispersionTable:
    """Effective-index samples per mode label, wavelengths strictly increasing."""

    curves: dict = field(default_factory=dict)
    order: str = "cubic"

    def __post_init__(self):
        clean = {}
        for label, (wl, n) in self.curves.items():
            wl = np.asarray(wl, dtype=float)
            n = np.asarray(n, dtype=float)
            if wl.shape != n.shape or wl.ndim != 1 or wl.size == 0:
                raise SchemaError(f"curve {label!r} is malformed")
            if not (np.all(np.isfinite(wl)) and np.all(np.isfinite(n))):
                raise SchemaError(f"curve {label!r} has non-finite samples")
            if np.any(np.diff(wl) <= 0):
                raise NonMonotonicWavelengths(f"curve {label!r}: wavelengths not strictly increasing")
            wl.flags.writeable = False
            n.flags.writeable = False
            clean[str(label)] = (wl, n)
        object.__setattr__(self, "curves", dict(sorted(clean.items())))

    @property
    def labels(self) -> list[str]:
        return list(self.curves)

    def wavelengths(self, label: str) -> np.ndarray:
        return self.curves[label][0]

    def segments(self, label: str) -> list[tuple[np.ndarray, np.ndarray]]:
        """Contiguous branches of one label (e.g. a pump and a signal band)."""
        wl, n = self.curves[label]
        cut = np.nonzero(np.diff(wl) > SEGMENT_GAP_UM)[0] + 1
        return list(zip(np.split(wl, cut), np.split(n, cut)))

    def segment(self, label: str, wavelength: float) -> tuple[np.ndarray, np.ndarray]:
        """Branch whose span is nearest to ``wavelength``."""
        segs = self.segments(label)
        dist = [max(w[0] - wavelength, wavelength - w[-1], 0.0) for w, _ in segs]
        return segs[int(np.argmin(dist))]

    def n_eff(self, label: str, wavelength):
        """Cubic interpolation in wavelength (exact at samples)."""
        wl, n = self.segment(label, float(np.mean(wavelength)))
        if wl.size == 1:
            if np.any(np.abs(np.asarray(wavelength) - wl[0]) > 1e-12):
                raise OutOfTableRange(f"{label}: single-sample table")
            return np.full(np.shape(wavelength), n[0])[()]
        x = np.asarray(wavelength, dtype=float)
        if np.any(x < wl[0] - 1e-12) or np.any(x > wl[-1] + 1e-12):
            raise OutOfTableRange(f"{label}: wavelength outside [{wl[0]}, {wl[-1]}] um")
        return _spline(wl, n)(x)[()]

    def merge(self, other: "DispersionTable") -> "DispersionTable":
        """Union of samples; shared labels are concatenated in wavelength."""
        curves = dict(self.curves)
        for label, (wl, n) in other.curves.items():
            if label in curves:
                w0, n0 = curves[label]
                wl, n = np.concatenate([w0, wl]), np.concatenate([n0, n])
                order = np.argsort(wl, kind="stable")
                wl, n = wl[order], n[order]
            curves[label] = (wl, n)
        return DispersionTable(curves, self.order)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(DISPERSION_HEADER)
        for label, (wl, n) in self.curves.items():
            for a, b in zip(wl, n):
                wr.writerow([label, f"{a:.9g}", f"{b:.9g}"])
        return buf.getvalue()


def _spline(x, y):
    from scipy.interpolate import CubicSpline, interp1d

    if len(x) >= 4:
        return CubicSpline(x, y)
    return interp1d(x, y, kind="linear" if len(x) == 2 else "quadratic")


def import_dispersion_table(source, check_guidance: bool = False) -> DispersionTable:
    """Read ``label,wavelength_um,n_eff`` CSV text, a path, or a file object."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        s = str(source)
        if "\n" in s or s.startswith(DISPERSION_HEADER[0] + ","):
            text = s
        else:
            with open(s, newline="") as fh:
                text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows or tuple(c.strip() for c in rows[0]) != DISPERSION_HEADER:
        raise SchemaError(f"expected header {','.join(DISPERSION_HEADER)}")
    data: dict[str, list] = {}
    for k, r in enumerate(rows[1:], start=2):
        if len(r) != 3:
            raise SchemaError(f"line {k}: expected 3 columns")
        try:
            wl, n = float(r[1]), float(r[2])
        except ValueError as exc:
            raise SchemaError(f"line {k}: {exc}") from None
        data.setdefault(r[0].strip(), []).append((wl, n))
    curves = {}
    for label, pts in data.items():
        pts.sort(key=lambda p: p[0])
        wl = np.array([p[0] for p in pts])
        if np.any(np.diff(wl) <= 0):
            raise NonMonotonicWavelengths(f"curve {label!r} repeats a wavelength")
        curves[label] = (wl, np.array([p[1] for p in pts]))
    table = DispersionTable(curves)
    if check_guidance:
        from .geometry import material_eps

        for label, (wl, n) in table.curves.items():
            for a, b in zip(wl, n):
                eln, es = material_eps(a)
                if not math.sqrt(max(es, 1.0)) < b < math.sqrt(max(eln)):
                    raise SchemaError(f"{label} at {a} um violates the guidance bound")
    return table


def export_dispersion_table(table: DispersionTable, path=None) -> str:
    text = table.to_csv()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# --------------------------------------------------------------------------
# scans and degeneracy search


def field_overlap(a: ModeRecord, b: ModeRecord) -> float:
    """Normalized |<E_a, E_b>| of the transverse fields, in [0, 1]."""
    if not a.same_grid(b):
        raise GridMismatch("modes live on different grids")
    m = a.mapping
    t = [m.horizontal, m.vertical]
    ea, eb = a.E[..., t], b.E[..., t]
    num = abs(np.vdot(ea, eb))
    return float(num / math.sqrt(np.vdot(ea, ea).real * np.vdot(eb, eb).real))


def _solve_job(args):
    geom, wl, count, models = args
    return solve_geometry(geom, wl, count, models)


def parallel_map(fn, items, jobs: int = 1):
    """Ordered map; ``jobs > 1`` fans out over worker processes."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _required_count(labels) -> int:
    orders = [int("".join(ch for ch in lab if ch.isdigit()) or 0) for lab in labels]
    return max(4, 2 * (max(orders) + 1) + 2)


def dispersion_scan(
    geom: RibGeometry,
    wavelengths: Sequence[float],
    labels: Sequence[str],
    count: int | None = None,
    models=None,
    jobs: int = 1,
    start: int | None = None,
) -> DispersionTable:
    """Track labelled modes across wavelength by maximal field overlap.

    Labels are assigned by the classifier at ``start`` (default: the sample
    nearest the middle) and carried outward by continuation, so a mode keeps
    its identity through index crossings.
    """
    return track_modes(geom, wavelengths, labels, count, models, jobs, start)[0]


def track_modes(geom, wavelengths, labels, count=None, models=None, jobs=1, start=None):
    """As :func:`dispersion_scan`, also returning ``{label: [ModeRecord, ...]}``."""
    wls = np.asarray(wavelengths, dtype=float)
    if wls.size < 1:
        raise ValueError("need at least one wavelength")
    if np.any(np.diff(wls) <= 0):
        raise NonMonotonicWavelengths("scan wavelengths must be strictly increasing")
    count = count or _required_count(labels)
    solved = parallel_map(_solve_job, [(geom, float(w), count, models) for w in wls], jobs)
    k0 = len(wls) // 2 if start is None else start
    picked: dict[str, list] = {lab: [None] * len(wls) for lab in labels}
    for lab in labels:
        picked[lab][k0] = find_label(solved[k0], lab)
    for rng in (range(k0 + 1, len(wls)), range(k0 - 1, -1, -1)):
        prev = {lab: picked[lab][k0] for lab in labels}
        for k in rng:
            for lab in labels:
                scores = [field_overlap(prev[lab], m) for m in solved[k]]
                best = int(np.argmax(scores))
                if scores[best] < 0.5:
                    raise TrackingLost(f"{lab} lost at {wls[k]} um (best overlap {scores[best]:.2f})")
                picked[lab][k] = solved[k][best]
                prev[lab] = solved[k][best]
    curves = {lab: (wls.copy(), np.array([m.n_eff for m in picked[lab]])) for lab in labels}
    return DispersionTable(curves), picked


def degeneracy_mismatch(geom, wavelength, labels=("TM0", "TE2"), count=None, models=None) -> float:
    modes = solve_geometry(geom, wavelength, count or _required_count(labels), models)
    return find_label(modes, labels[0]).n_eff - find_label(modes, labels[1]).n_eff


def find_degeneracy(
    geom: RibGeometry,
    free_parameter: str,
    target_wavelength: float,
    labels: Sequence[str] = ("TM0", "TE2"),
    bracket: tuple[float, float] | None = None,
    tol: float = 1e-4,
    max_iter: int = 40,
    models=None,
    count: int | None = None,
) -> RibGeometry:
    """Bisect ``free_parameter`` (h, d or w) until |n_eff(l1) - n_eff(l2)| < tol."""
    if free_parameter not in ("h", "d", "w"):
        raise ValueError("free_parameter must be 'h', 'd' or 'w'")

    def f(x):
        return degeneracy_mismatch(geom.with_(**{free_parameter: x}), target_wavelength, labels, count, models)

    x0 = getattr(geom, free_parameter)
    f0 = f(x0)
    if abs(f0) < tol:
        return geom
    lo, hi = bracket if bracket is not None else (0.9 * x0, 1.1 * x0)
    if free_parameter == "h":
        hi = min(hi, geom.d)
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise NoBracket(f"no sign change of n_eff difference on {free_parameter} in [{lo}, {hi}]")
    for x, fx in ((lo, flo), (hi, fhi)):
        if abs(fx) < tol:
            return geom.with_(**{free_parameter: x})
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        log.info("degeneracy search %s=%.4f dn=%.3e", free_parameter, mid, fm)
        if abs(fm) < tol:
            return geom.with_(**{free_parameter: mid})
        if fm * flo < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    raise NoBracket(f"bisection did not reach |dn| < {tol} within {max_iter} steps")
