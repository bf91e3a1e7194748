"""Refractive indices of LiNbO3 (ordinary/extraordinary) and SiO2.

The LiNbO3 dielectric function is modelled per crystal axis as

    eps(E) = eps_re + eps_Sellmeier(E) + eps_TL(E)

with a dissipation-free Sellmeier oscillator and a Tauc-Lorentz oscillator
whose real part follows from a Kramers-Kronig principal-value integral.
Evaluated with the published ellipsometry parameters the model lands near
eps ~ 45, far from the thin-film indices of the design table, so the
shipped models are recalibrated: the oscillator terms keep their shape and
receive a common scale, and the offset is refitted, such that the anchor
indices are reproduced exactly.  The raw evaluation stays reachable through
``raw=True``.

SiO2 uses an anchored fallback: a fused-silica reference curve mapped
affinely onto the anchors plus a monotone cubic correction of the residuals.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import (
    ConfigError,
    DegenerateAnchors,
    NonConvergence,
    OutOfRange,
    PoleProximity,
)

#: E[eV] = HC_EV_UM / lambda[um]
HC_EV_UM = 1.23984193

#: Validity window of the dispersion models, micrometres.
WAVELENGTH_MIN_UM = 0.4
WAVELENGTH_MAX_UM = 1.7

KK_CUTOFF_EV = 50.0
KK_RTOL = 1e-8
SELLMEIER_GUARD_EV = 1e-3


def energy_ev(wavelength_um):
    return HC_EV_UM / np.asarray(wavelength_um, dtype=float)


def wavelength_um(energy):
    return HC_EV_UM / np.asarray(energy, dtype=float)


@dataclass(frozen=True)
class DielectricModel:
    """Offset + Sellmeier + Tauc-Lorentz parameters for one crystal axis.

    Energies are in eV; ``tl_amp`` carries eV as in the ellipsometry fit.
    """

    eps_offset: float
    sellmeier_amp: float
    sellmeier_e0: float
    tl_amp: float
    tl_en: float
    tl_c: float
    tl_eg: float

    def __post_init__(self):
        for name in ("sellmeier_e0", "tl_en", "tl_c", "tl_eg"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.tl_amp < 0 or self.sellmeier_amp < 0:
            raise ValueError("oscillator amplitudes must be non-negative")
        if not self.tl_eg < self.tl_en:
            raise ValueError("absorption edge tl_eg must lie below tl_en")


# Field names used in parameter JSON documents (same column order as the
# ellipsometry table).
JSON_KEYS = {
    "eps_re": "eps_offset",
    "A_n_Sellm": "sellmeier_amp",
    "E_0_Sellm": "sellmeier_e0",
    "A_n_TL": "tl_amp",
    "E_n_TL": "tl_en",
    "C_n_TL": "tl_c",
    "E_g": "tl_eg",
}

TABLE5 = {
    "extraordinary": DielectricModel(1.5015, 41.169, 6.4608, 282.99, 5.0543, 1.4905, 4.2919),
    "ordinary": DielectricModel(1.3135, 32.999, 6.7798, 497.17, 4.9351, 1.0358, 4.3305),
}

#: Bulk indices at the pump and signal/idler wavelengths.
TABLE1 = {
    ("LiNbO3", "extraordinary"): ((0.775, 2.1565), (1.55, 2.122)),
    ("LiNbO3", "ordinary"): ((0.775, 2.2242), (1.55, 2.1837)),
    ("SiO2", "isotropic"): ((0.775, 1.4589), (1.55, 1.4483)),
}


class Material(str, enum.Enum):
    LiNbO3 = "LiNbO3"
    SiO2 = "SiO2"


class Axis(str, enum.Enum):
    ordinary = "ordinary"
    extraordinary = "extraordinary"
    isotropic = "isotropic"


@dataclass(frozen=True)
class MaterialAxis:
    material: Material
    axis: Axis

    def __post_init__(self):
        object.__setattr__(self, "material", Material(self.material))
        object.__setattr__(self, "axis", Axis(self.axis))
        if (self.material is Material.SiO2) != (self.axis is Axis.isotropic):
            raise ValueError(f"{self.material.value} cannot be paired with {self.axis.value}")

    @classmethod
    def parse(cls, text: str) -> "MaterialAxis":
        """Accept ``"LiNbO3:ordinary"``, ``"LiNbO3-e"`` or ``"SiO2"``."""
        if text.strip() == "SiO2":
            return cls(Material.SiO2, Axis.isotropic)
        mat, _, ax = text.replace("-", ":").partition(":")
        ax = {"o": "ordinary", "e": "extraordinary", "eo": "extraordinary"}.get(ax, ax)
        return cls(Material(mat), Axis(ax))


LN_ORDINARY = MaterialAxis(Material.LiNbO3, Axis.ordinary)
LN_EXTRAORDINARY = MaterialAxis(Material.LiNbO3, Axis.extraordinary)
SIO2 = MaterialAxis(Material.SiO2, Axis.isotropic)


# --------------------------------------------------------------------------
# oscillator terms


def tl_eps_im(model: DielectricModel, E):
    """Tauc-Lorentz imaginary part; zero at and below the gap."""
    E = np.abs(np.asarray(E, dtype=float))
    out = np.zeros_like(E)
    above = E > model.tl_eg
    Ea = E[above]
    num = model.tl_amp * model.tl_en * model.tl_c * (Ea - model.tl_eg) ** 2
    den = (Ea**2 - model.tl_en**2) ** 2 + model.tl_c**2 * Ea**2
    out[above] = num / den / Ea
    return out if out.ndim else float(out)


def _tl_im_scalar(m: DielectricModel, x: float) -> float:
    if x <= m.tl_eg:
        return 0.0
    return m.tl_amp * m.tl_en * m.tl_c * (x - m.tl_eg) ** 2 / (
        ((x * x - m.tl_en**2) ** 2 + m.tl_c**2 * x * x) * x
    )


def _kk_integrand(model, E):
    return lambda x: x * _tl_im_scalar(model, x) / (x * x - E * E)


def _check_quad(val, err, info, rtol, E):
    if len(info) > 1 and abs(err) > 10 * rtol * max(abs(val), 1e-300):
        raise NonConvergence(f"Kramers-Kronig quadrature did not converge at E={E} eV")


@lru_cache(maxsize=4096)
def _tl_eps_re_scalar(model: DielectricModel, E: float, e_max: float, rtol: float) -> float:
    if model.tl_amp == 0.0:
        return 0.0
    eg = model.tl_eg
    hi = max(e_max, 2.0 * E + eg)
    peaks = [model.tl_en] if eg < model.tl_en < hi else None
    f = _kk_integrand(model, E)
    opts = dict(epsabs=0.0, epsrel=rtol, limit=500, full_output=1)
    if E <= eg:
        # Regular integrand; at E == eg it vanishes like (x - eg).
        val, err, *info = integrate.quad(f, eg, hi, points=peaks, **opts)
    else:
        # Cauchy-weighted adaptive rule for PV int g(x)/(x - E).
        g = lambda x: x * _tl_im_scalar(model, x) / (x + E)
        val, err, *info = integrate.quad(g, eg, hi, weight="cauchy", wvar=E, **opts)
    _check_quad(val, err, info, rtol, E)
    tail, terr, *tinfo = integrate.quad(f, hi, np.inf, **opts)
    _check_quad(tail, terr, tinfo, rtol, E)
    return 2.0 / math.pi * (val + tail)


def tl_eps_re(model: DielectricModel, E, e_max: float = KK_CUTOFF_EV, rtol: float = KK_RTOL):
    """Kramers-Kronig real part of the Tauc-Lorentz term.

    The range is split at ``e_max``: below it an adaptive rule (Cauchy-weighted
    when E lies above the gap), above it the 1/x^4 tail is integrated to
    infinity, so moving the split point does not change the result beyond the
    quadrature tolerance.  The result is even in E.
    """
    E = np.abs(np.asarray(E, dtype=float))
    out = np.array([_tl_eps_re_scalar(model, float(e), float(e_max), float(rtol)) for e in E.ravel()])
    out = out.reshape(E.shape)
    return out if out.ndim else float(out)


def tl_eps_re_subtracted(model: DielectricModel, E: float, n: int = 400_001) -> float:
    """Second route to the KK integral: dense trapezoid with singularity subtraction.

    On [eg, 2E - eg] the integrand g(x)/(x-E), g(x) = x eps_im(x)/(x+E), is
    replaced by (g(x) - g(E))/(x - E) (the subtracted constant has zero
    principal value on a symmetric interval).  The remainder up to infinity is
    regular and mapped onto [0, 1).  Used to cross-check :func:`tl_eps_re`.
    """
    E = abs(float(E))
    if model.tl_amp == 0.0:
        return 0.0
    eg = model.tl_eg
    total = 0.0
    start = eg
    if E > eg:
        b = 2 * E - eg
        x = np.linspace(eg, b, n)
        g = x * tl_eps_im(model, x) / (x + E)
        gE = 0.5 * _tl_im_scalar(model, E)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = (g - gE) / (x - E)
        mid = n // 2
        f[mid] = 0.5 * (f[mid - 1] + f[mid + 1])
        total += integrate.trapezoid(f, x)
        start = b
    # x = start + s * t / (1 - t); nodes clustered near the resonance scale.
    s = max(model.tl_en, 1.0)
    t = np.linspace(0.0, 1.0, n)[:-1]
    x = start + s * t / (1.0 - t)
    dxdt = s / (1.0 - t) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        f = x * tl_eps_im(model, x) / (x * x - E * E) * dxdt
    # First node can be 0/0 when E sits on the gap; eps_im vanishes there.
    f[~np.isfinite(f)] = 0.0
    total += integrate.trapezoid(np.append(f, 0.0), np.append(t, 1.0))
    return 2.0 / math.pi * total


def sellmeier_eps(model: DielectricModel, E, guard: float = SELLMEIER_GUARD_EV):
    """A E0^2 / (E0^2 - E^2); raises PoleProximity inside the guard band."""
    E = np.asarray(E, dtype=float)
    if np.any(np.abs(np.abs(E) - model.sellmeier_e0) < guard):
        raise PoleProximity(f"energy within {guard} eV of the Sellmeier pole {model.sellmeier_e0} eV")
    e0sq = model.sellmeier_e0**2
    out = model.sellmeier_amp * e0sq / (e0sq - E**2)
    return out if np.ndim(out) else float(out)


def raw_eps(model: DielectricModel, E):
    """Uncalibrated real dielectric function of one axis."""
    return model.eps_offset + sellmeier_eps(model, E) + tl_eps_re(model, E)


@dataclass(frozen=True)
class CalibratedModel:
    """Ellipsometry-form model with refitted offset and oscillator scale.

    eps(E) = offset + scale * (eps_Sellmeier(E) + eps_TL_re(E))
    """

    base: DielectricModel
    offset: float
    scale: float

    def oscillators(self, E):
        return sellmeier_eps(self.base, E) + tl_eps_re(self.base, E)

    def eps(self, E):
        return self.offset + self.scale * self.oscillators(E)

    def index(self, wavelength):
        return np.sqrt(self.eps(energy_ev(wavelength)))


def calibrate_model(base: DielectricModel, anchors: Sequence[tuple[float, float]]) -> CalibratedModel:
    """Fit offset and scale so the model passes through (wavelength_um, n) anchors.

    Two anchors are matched exactly; more anchors are fitted in least squares.
    """
    anchors = _check_anchors(anchors)
    lam = np.array([a[0] for a in anchors])
    target = np.array([a[1] for a in anchors]) ** 2
    osc = sellmeier_eps(base, energy_ev(lam)) + tl_eps_re(base, energy_ev(lam))
    M = np.column_stack([np.ones_like(osc), osc])
    (offset, scale), *_ = np.linalg.lstsq(M, target, rcond=None)
    if scale <= 0:
        raise ConfigError("calibration produced a non-positive oscillator scale")
    return CalibratedModel(base, float(offset), float(scale))


# --------------------------------------------------------------------------
# SiO2 fallback


def fused_silica_reference(wavelength_um):
    """Three-term Sellmeier curve of bulk fused silica (shape reference only)."""
    l2 = np.asarray(wavelength_um, dtype=float) ** 2
    eps = 1 + 0.6961663 * l2 / (l2 - 0.0684043**2) + 0.4079426 * l2 / (l2 - 0.1162414**2) \
        + 0.8974794 * l2 / (l2 - 9.896161**2)
    return np.sqrt(eps)


@dataclass(frozen=True)
class FallbackDispersion:
    """Anchored interpolant n(lambda) = a + b*n_ref(lambda) + residual(lambda)."""

    wavelengths: tuple
    indices: tuple
    a: float
    b: float
    _residual: PchipInterpolator | None

    def __call__(self, wavelength_um):
        lam = np.asarray(wavelength_um, dtype=float)
        n = self.a + self.b * fused_silica_reference(lam)
        if self._residual is not None:
            n = n + self._residual(lam)
        return n if np.ndim(n) else float(n)


def _check_anchors(anchors):
    anchors = sorted((float(l), float(n)) for l, n in anchors)
    if len(anchors) < 2:
        raise DegenerateAnchors("at least two anchors are required")
    lam = [a[0] for a in anchors]
    if any(b - a <= 0 for a, b in zip(lam, lam[1:])):
        raise DegenerateAnchors("anchor wavelengths must be distinct")
    return anchors


def calibrate_fallback_model(anchors: Iterable[tuple[float, float]]) -> FallbackDispersion:
    """Build a smooth dispersion curve passing exactly through the anchors.

    The fused-silica reference supplies the shape; an affine map fitted to the
    anchors carries it onto their level and slope, and a monotone cubic
    (PCHIP) interpolant of what remains makes the curve exact at every anchor.
    Constant anchors give a constant curve.
    """
    anchors = _check_anchors(list(anchors))
    lam = np.array([a[0] for a in anchors])
    n = np.array([a[1] for a in anchors])
    ref = fused_silica_reference(lam)
    M = np.column_stack([np.ones_like(ref), ref])
    (a, b), *_ = np.linalg.lstsq(M, n, rcond=None)
    if np.ptp(n) == 0.0:
        a, b = float(n[0]), 0.0
    resid = n - (a + b * ref)
    interp = None
    if np.max(np.abs(resid)) > 1e-15:
        interp = PchipInterpolator(lam, resid, extrapolate=True)
    return FallbackDispersion(tuple(lam), tuple(n), float(a), float(b), interp)


# --------------------------------------------------------------------------
# public entry points


@lru_cache(maxsize=None)
def builtin_models() -> dict:
    """Calibrated LiNbO3 axis models and the SiO2 fallback."""
    return {
        LN_EXTRAORDINARY: calibrate_model(TABLE5["extraordinary"], TABLE1[("LiNbO3", "extraordinary")]),
        LN_ORDINARY: calibrate_model(TABLE5["ordinary"], TABLE1[("LiNbO3", "ordinary")]),
        SIO2: calibrate_fallback_model(TABLE1[("SiO2", "isotropic")]),
    }


def _check_window(wavelength):
    lam = np.asarray(wavelength, dtype=float)
    eps = 1e-12
    if np.any(lam < WAVELENGTH_MIN_UM - eps) or np.any(lam > WAVELENGTH_MAX_UM + eps):
        raise OutOfRange(
            f"wavelength outside the {WAVELENGTH_MIN_UM}-{WAVELENGTH_MAX_UM} um validity window"
        )
    return lam


def refractive_index(axis: MaterialAxis, wavelength, raw: bool = False, models: Mapping | None = None):
    """Refractive index of a material axis at ``wavelength`` (micrometres).

    ``raw=True`` evaluates the uncalibrated ellipsometry parameters (LiNbO3
    only) for inspection.  ``models`` overrides the built-in model set.
    """
    if not isinstance(axis, MaterialAxis):
        axis = MaterialAxis.parse(str(axis))
    lam = _check_window(wavelength)
    if raw:
        if axis.material is not Material.LiNbO3:
            raise ValueError("raw evaluation exists only for the LiNbO3 ellipsometry model")
        out = np.sqrt(raw_eps(TABLE5[axis.axis.value], energy_ev(lam)))
        return out if np.ndim(out) else float(out)
    model = (models or builtin_models())[axis]
    if isinstance(model, FallbackDispersion):
        out = model(lam)
    else:
        out = model.index(lam)
    return out if np.ndim(out) else float(out)


def models_from_json(doc) -> dict:
    """Build calibrated axis models from a JSON document of ellipsometry parameters.

    The document maps ``"ordinary"`` and ``"extraordinary"`` to objects keyed
    like the parameter table (``eps_re``, ``A_n_Sellm``, ``E_0_Sellm``,
    ``A_n_TL``, ``E_n_TL``, ``C_n_TL``, ``E_g``).  An optional ``"calibrate":
    false`` keeps the parameters as given.
    """
    if isinstance(doc, (str, Path)):
        doc = json.loads(Path(doc).read_text())
    models = dict(builtin_models())
    calibrate = doc.get("calibrate", True)
    for ax_name, key in (("ordinary", LN_ORDINARY), ("extraordinary", LN_EXTRAORDINARY)):
        if ax_name not in doc:
            continue
        params = parse_model_params(doc[ax_name])
        if calibrate:
            models[key] = calibrate_model(params, TABLE1[("LiNbO3", ax_name)])
        else:
            models[key] = CalibratedModel(params, params.eps_offset, 1.0)
    return models


def parse_model_params(obj: Mapping) -> DielectricModel:
    names = {f.name for f in fields(DielectricModel)}
    kw = {}
    for k, v in obj.items():
        name = JSON_KEYS.get(k, k)
        if name not in names:
            raise ConfigError(f"unknown dielectric parameter {k!r}")
        kw[name] = float(v)
    missing = names - kw.keys()
    if missing:
        raise ConfigError(f"missing dielectric parameters: {sorted(missing)}")
    try:
        return DielectricModel(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def dispersion_csv(wavelengths, indices) -> str:
    """CSV text with header ``wavelength_um,n``, nine significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["wavelength_um", "n"])
    for lam, n in zip(wavelengths, indices):
        w.writerow([f"{lam:.9g}", f"{n:.9g}"])
    return buf.getvalue()
