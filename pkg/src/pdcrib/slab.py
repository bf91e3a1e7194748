"""Transfer-matrix solver for guided modes of an anisotropic planar stack.

Independent of the 2D finite-difference code; used as its wide-rib oracle
and to locate slab-mode cutoffs.  Layers are stacked along v with diagonal
lab-frame permittivity (eps_h, eps_v, eps_p); fields are uniform along h.

TE (E along h):  F'' + (k0^2 eps_h - beta^2) F = 0,  F and F' continuous.
TM (H along h):  F'' + eps_p (k0^2 - beta^2/eps_v) F = 0,  F and F'/eps_p continuous.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.optimize import brentq


def _cs(q2: float, t: float):
    """cos(k t) and sin(k t)/k as entire functions of q2 = k^2."""
    if q2 >= 0:
        k = math.sqrt(q2)
        return math.cos(k * t), (math.sin(k * t) / k if k * t > 1e-12 else t)
    g = math.sqrt(-q2)
    return math.cosh(g * t), (math.sinh(g * t) / g if g * t > 1e-12 else t)


def _coeffs(eps, pol, k0, beta):
    eh, ev, ep = eps
    if pol == "TE":
        return k0 * k0 * eh - beta * beta, 1.0
    return ep * (k0 * k0 - beta * beta / ev), 1.0 / ep


def _residual(beta, k0, pol, sub, layers, cover):
    q2, w = _coeffs(sub, pol, k0, beta)
    g = math.sqrt(max(-q2, 0.0))
    f, df = 1.0, w * g
    for t, eps in layers:
        q2, w = _coeffs(eps, pol, k0, beta)
        c, s = _cs(q2, t)
        f, df = c * f + s * df / w, -q2 * w * s * f + c * df
        norm = math.hypot(f, df)
        f, df = f / norm, df / norm
    q2, w = _coeffs(cover, pol, k0, beta)
    return df + w * math.sqrt(max(-q2, 0.0)) * f


def _as3(e):
    e = np.broadcast_to(np.asarray(e, dtype=float), (3,))
    return tuple(float(x) for x in e)


def slab_modes(
    wavelength: float,
    substrate,
    layers: Sequence[tuple[float, object]],
    cover,
    pol: str = "TE",
    samples: int = 4000,
) -> list[float]:
    """Effective indices of guided modes, descending.

    ``wavelength`` in micrometres, layer thicknesses in nm; permittivities
    are scalars or (eps_h, eps_v, eps_p) triples.
    """
    pol = pol.upper()
    if pol not in ("TE", "TM"):
        raise ValueError("pol must be 'TE' or 'TM'")
    k0 = 2 * math.pi / (wavelength * 1e3)
    sub, cov = _as3(substrate), _as3(cover)
    lay = [(float(t), _as3(e)) for t, e in layers]
    comp = 0 if pol == "TE" else 1
    n_lo = math.sqrt(max(sub[comp], cov[comp]))
    n_hi = math.sqrt(max(e[comp] for _, e in lay))
    if pol == "TM":
        # beta bounded by sqrt(eps_v) in every layer the field oscillates in
        n_hi = math.sqrt(max(e[1] for _, e in lay))
    grid = np.linspace(n_hi, n_lo, samples + 1)[1:-1]
    vals = [_residual(n * k0, k0, pol, sub, lay, cov) for n in grid]
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0:
            r = brentq(lambda n: _residual(n * k0, k0, pol, sub, lay, cov), b, a, xtol=1e-15, rtol=1e-15)
            roots.append(float(r))
    return roots
