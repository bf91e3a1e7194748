r"""Quasi-phase matching, joint spectral amplitudes and Schmidt analysis.

Frequencies are angular (rad/s) unless a name says otherwise.  The JSA is

    F(ws, wi) = exp(-(wp - ws - wi)^2 tau^2 / 2) sinc(dB L / 2) exp(i dB L / 2) / N_F

with dB = k_p(ws + wi) - k_s(ws) - k_i(wi) - 2 pi / Lambda and
k = n_eff(w) w / c from cubic splines of the dispersion table in omega.

CW pumping replaces tau by the coherence time of a Gaussian line whose
intensity spectrum has FWHM ``linewidth`` (Hz): tau = sqrt(ln 2) / (pi dnu).
The Schmidt number of a CW ridge scales as 1/linewidth; spectra do not.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C0
from scipy.interpolate import CubicSpline
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridTooCoarse, MultiPeakWarning, NonPositiveMismatch, OutOfTableRange

DEFAULT_LINEWIDTH_HZ = 1e9
DEFAULT_GRID = 1024
DEFAULT_LOBES = 10
PUMP_SIGMAS = 6.0
MIN_LOBE_POINTS = 8


def wavelength_to_omega(um):
    return 2 * np.pi * C0 / (np.asarray(um, dtype=float) * 1e-6)


def omega_to_wavelength(w):
    return 2 * np.pi * C0 / np.asarray(w, dtype=float) * 1e6


def linewidth_to_tau(linewidth_hz: float) -> float:
    """Gaussian pump: intensity-spectrum FWHM (Hz) to the tau of the JSA envelope."""
    return math.sqrt(math.log(2)) / (math.pi * linewidth_hz)


class _Wavevector:
    """k(omega) = n_eff omega / c with a cubic spline of n_eff in omega."""

    def __init__(self, table, label, near_um):
        wl, n = table.segment(label, near_um)
        om = wavelength_to_omega(wl)[::-1]
        self.label = label
        self.lo, self.hi = float(om[0]), float(om[-1])
        self._n = CubicSpline(om, n[::-1]) if om.size >= 4 else None
        self._lin = (om, n[::-1])

    def _check(self, w):
        w = np.asarray(w)
        tol = 1e-9 * self.hi
        if np.any(w < self.lo - tol) or np.any(w > self.hi + tol):
            raise OutOfTableRange(
                f"{self.label}: omega outside table [{self.lo:.6e}, {self.hi:.6e}] rad/s"
            )

    def n(self, w):
        self._check(w)
        if self._n is not None:
            return self._n(w)
        om, n = self._lin
        if om.size == 1:
            return np.full(np.shape(w), n[0])
        return np.interp(w, om, n)

    def k(self, w):
        return self.n(w) * np.asarray(w) / C0

    def k1(self, w):
        """Group slowness dk/domega (s/m)."""
        self._check(w)
        if self._n is None:
            h = 1e-6 * w
            return (self.k(w + h) - self.k(w - h)) / (2 * h)
        return (self._n(w) + w * self._n(w, 1)) / C0


def poling_period(dispersion, lambda_p: float = 0.775, pump="TE0", signal="TM0", idler="TE2") -> float:
    """Lambda = 2 pi / (k_p - k_s - k_i) at omega_s = omega_i = omega_p / 2, in metres."""
    wp = float(wavelength_to_omega(lambda_p))
    kp = _Wavevector(dispersion, pump, lambda_p).k(wp)
    ks = _Wavevector(dispersion, signal, 2 * lambda_p).k(wp / 2)
    ki = _Wavevector(dispersion, idler, 2 * lambda_p).k(wp / 2)
    dk = float(kp - ks - ki)
    if dk <= 0:
        raise NonPositiveMismatch(f"k_p - k_s - k_i = {dk:.4e} 1/m is not positive")
    return 2 * math.pi / dk


@dataclass(frozen=True)
class PhaseMatchConfig:
    """Everything that fixes one JSA.  ``poling`` in metres, None = design value.

    ``tau`` (s) selects a pulsed pump; ``tau=None`` means CW with
    ``linewidth`` (Hz).
    """

    dispersion: object
    pump: str = "TE0"
    signal: str = "TM0"
    idler: str = "TE2"
    L: float = 0.04
    poling: float | None = None
    lambda_p: float = 0.775
    tau: float | None = None
    linewidth: float = DEFAULT_LINEWIDTH_HZ
    _k: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.linewidth > 0:
            raise ValueError("linewidth must be positive")
        near = {"pump": self.lambda_p, "signal": 2 * self.lambda_p, "idler": 2 * self.lambda_p}
        ks = {r: _Wavevector(self.dispersion, getattr(self, r), near[r]) for r in near}
        object.__setattr__(self, "_k", ks)
        if self.poling is None:
            object.__setattr__(
                self, "poling", poling_period(self.dispersion, self.lambda_p, self.pump, self.signal, self.idler)
            )
        if not self.poling > 0:
            raise ValueError("poling period must be positive")

    @property
    def cw(self) -> bool:
        return self.tau is None

    @property
    def pump_tau(self) -> float:
        return linewidth_to_tau(self.linewidth) if self.cw else self.tau

    @property
    def omega_p(self) -> float:
        return float(wavelength_to_omega(self.lambda_p))

    @property
    def omega0(self) -> float:
        return self.omega_p / 2

    def slowness(self):
        """(k_p' - k_s', k_p' - k_i') at the degenerate point, s/m."""
        kp1 = self._k["pump"].k1(self.omega_p)
        return float(kp1 - self._k["signal"].k1(self.omega0)), float(kp1 - self._k["idler"].k1(self.omega0))

    def max_detuning(self) -> float:
        """Largest |omega - omega0| all three tables allow on a symmetric grid."""
        s, i, p = self._k["signal"], self._k["idler"], self._k["pump"]
        w0 = self.omega0
        lim = min(w0 - s.lo, s.hi - w0, w0 - i.lo, i.hi - w0)
        # pump is evaluated at ws + wi = wp + x + y, |x + y| <= 2 S
        lim = min(lim, (self.omega_p - p.lo) / 2, (p.hi - self.omega_p) / 2)
        if lim <= 0:
            raise OutOfTableRange("dispersion tables do not straddle the degenerate point")
        return lim

    def digest(self) -> str:
        payload = {
            "pump": self.pump,
            "signal": self.signal,
            "idler": self.idler,
            "L": self.L,
            "poling": self.poling,
            "lambda_p": self.lambda_p,
            "tau": self.tau,
            "linewidth": self.linewidth,
            "dispersion": self.dispersion.to_csv(),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def phase_mismatch(config: PhaseMatchConfig, omega_s, omega_i):
    """Delta beta (1/m) including the grating vector 2 pi / Lambda."""
    ws = np.asarray(omega_s, dtype=float)
    wi = np.asarray(omega_i, dtype=float)
    k = config._k
    dk = k["pump"].k(ws + wi) - k["signal"].k(ws) - k["idler"].k(wi)
    return dk - 2 * np.pi / config.poling


def _sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


def pump_envelope(config: PhaseMatchConfig, omega_s, omega_i):
    d = config.omega_p - np.asarray(omega_s) - np.asarray(omega_i)
    return np.exp(-0.5 * (d * config.pump_tau) ** 2)


def phase_matching(config: PhaseMatchConfig, omega_s, omega_i):
    x = 0.5 * phase_mismatch(config, omega_s, omega_i) * config.L
    return _sinc(x) * np.exp(1j * x)


@dataclass(frozen=True)
class JsaGrid:
    omega_s: np.ndarray = field(repr=False)
    omega_i: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    N_F: float
    cw: bool = False
    tau: float = float("nan")
    edge_ratio: float = float("nan")
    config: PhaseMatchConfig | None = field(default=None, repr=False, compare=False)

    @property
    def d_omega_s(self) -> float:
        return float(self.omega_s[1] - self.omega_s[0])

    @property
    def d_omega_i(self) -> float:
        return float(self.omega_i[1] - self.omega_i[0])

    @property
    def span(self) -> float:
        return float(self.omega_s[-1] - self.omega_s[0])

    def jsi(self) -> np.ndarray:
        return np.abs(self.F) ** 2

    def norm(self) -> float:
        return float(self.jsi().sum() * self.d_omega_s * self.d_omega_i)

    @staticmethod
    def from_array(omega_s, omega_i, F, **kw) -> "JsaGrid":
        """Wrap and normalize arbitrary samples on uniform axes."""
        omega_s = np.asarray(omega_s, dtype=float)
        omega_i = np.asarray(omega_i, dtype=float)
        F = np.asarray(F, dtype=complex)
        dws, dwi = omega_s[1] - omega_s[0], omega_i[1] - omega_i[0]
        nf = math.sqrt(float((np.abs(F) ** 2).sum() * dws * dwi))
        return JsaGrid(omega_s, omega_i, F / nf, nf, **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["omega_s_rads", "omega_i_rads", "re_F", "im_F"])
        for a, ws in enumerate(self.omega_s):
            for b, wi in enumerate(self.omega_i):
                f = self.F[a, b]
                wr.writerow([f"{ws:.9g}", f"{wi:.9g}", f"{f.real:.9g}", f"{f.imag:.9g}"])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "N_F": self.N_F,
            "n_s": int(self.omega_s.size),
            "n_i": int(self.omega_i.size),
            "omega_s_range": [float(self.omega_s[0]), float(self.omega_s[-1])],
            "omega_i_range": [float(self.omega_i[0]), float(self.omega_i[-1])],
            "cw": self.cw,
            "tau_s": self.tau,
            "edge_ratio": self.edge_ratio,
            "config_hash": self.config.digest() if self.config is not None else None,
        }


def auto_span(config: PhaseMatchConfig, lobes: int = DEFAULT_LOBES) -> float:
    """Half-width of the symmetric detuning window around omega_p / 2.

    Covers ``lobes`` sinc lobes of the phase-matching band inside the pump
    band (PUMP_SIGMAS standard deviations), clipped to the dispersion tables.
    """
    a_s, a_i = config.slowness()
    Q = lobes * 2 * math.pi / config.L  # |a_s x + a_i y| bound
    if config.cw:
        diff = abs(a_s - a_i)
        S = Q / diff if diff > 0 else math.inf
    else:
        P = PUMP_SIGMAS / config.tau  # |x + y| bound
        det = a_i - a_s
        if abs(det) < 1e-300:
            S = math.inf
        else:
            S = 0.0
            for sp_ in (-P, P):
                for sq in (-Q, Q):
                    # x + y = sp_, a_s x + a_i y = sq
                    y = (sq - a_s * sp_) / det
                    S = max(S, abs(sp_ - y), abs(y))
    return min(S, config.max_detuning())


def lobe_points(config: PhaseMatchConfig, span: float, n: int) -> float:
    """Grid samples across the sinc main lobe for a window of half-width ``span``."""
    a_s, a_i = config.slowness()
    rate = abs(a_s - a_i) if config.cw else max(abs(a_s), abs(a_i))
    if rate == 0:
        return math.inf
    step = 2 * span / (n - 1)
    return 4 * math.pi / (config.L * rate * step)


def grid_size(config: PhaseMatchConfig, span: float | None = None, n_min: int = DEFAULT_GRID, n_max: int = 4096) -> int:
    """Smallest multiple of 256 >= n_min giving MIN_LOBE_POINTS across the main lobe."""
    S = auto_span(config) if span is None else span
    n = n_min
    while n < n_max and lobe_points(config, S, n) < MIN_LOBE_POINTS:
        n += 256
    return n


def jsa_grid(
    config: PhaseMatchConfig,
    n: int = DEFAULT_GRID,
    span: float | None = None,
    lobes: int = DEFAULT_LOBES,
    check_sampling: bool = True,
) -> JsaGrid:
    """Sample the normalized JSA on an n x n grid symmetric about omega_p / 2.

    ``span`` is the half-width in rad/s; by default it is chosen by
    :func:`auto_span`.
    """
    S = auto_span(config, lobes) if span is None else float(span)
    S = min(S, config.max_detuning())
    x = np.linspace(-S, S, n)
    if check_sampling:
        pts = lobe_points(config, S, n)
        if pts < MIN_LOBE_POINTS:
            raise GridTooCoarse(f"sinc main lobe spans only {pts:.1f} grid points")
    ws = config.omega0 + x
    wi = config.omega0 + x
    WS, WI = np.meshgrid(ws, wi, indexing="ij")
    F = pump_envelope(config, WS, WI) * phase_matching(config, WS, WI)
    mag = np.abs(F)
    peak = mag.max()
    edge = max(mag[0].max(), mag[-1].max(), mag[:, 0].max(), mag[:, -1].max())
    grid = JsaGrid.from_array(ws, wi, F, cw=config.cw, tau=config.pump_tau, edge_ratio=float(edge / peak), config=config)
    return grid


@dataclass(frozen=True)
class SchmidtResult:
    lambdas: np.ndarray
    K: float
    u: np.ndarray = field(repr=False)  # (modes, n_s) sampled u_n(omega_s)
    v: np.ndarray = field(repr=False)
    omega_s: np.ndarray = field(repr=False)
    omega_i: np.ndarray = field(repr=False)
    method: str = "svd"

    def to_csv(self, count: int | None = None) -> str:
        lam = self.lambdas if count is None else self.lambdas[:count]
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "lambda_n"])
        for k, l in enumerate(lam):
            wr.writerow([k, f"{l:.9g}"])
        return buf.getvalue()


def schmidt(jsa: JsaGrid, modes: int = 20, method: str = "auto") -> SchmidtResult:
    """Schmidt decomposition with quadrature weights folded into the SVD.

    ``method='auto'`` switches to :func:`schmidt_cw` when the JSA comes from
    a CW config whose pump ridge is narrower than two grid steps, since a
    product grid cannot resolve it.
    """
    if method == "auto":
        method = "svd"
        if jsa.cw and jsa.config is not None:
            ridge = 1.0 / jsa.tau
            if ridge < 2 * max(jsa.d_omega_s, jsa.d_omega_i):
                method = "ridge"
    if method == "ridge":
        if jsa.config is None:
            raise ValueError("ridge method needs the originating config")
        return schmidt_cw(jsa.config, span=0.5 * jsa.span, modes=modes)
    dws, dwi = jsa.d_omega_s, jsa.d_omega_i
    M = jsa.F * math.sqrt(dws * dwi)
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    lam = s**2
    lam = lam / lam.sum()
    m = min(modes, lam.size)
    return SchmidtResult(
        lambdas=lam,
        K=float(1.0 / np.sum(lam**2)),
        u=(U[:, :m] / math.sqrt(dws)).T,
        v=(Vh[:m, :] / math.sqrt(dwi)),
        omega_s=jsa.omega_s,
        omega_i=jsa.omega_i,
        method="svd",
    )


def ridge_profile(config: PhaseMatchConfig, x):
    """Phase-matching amplitude along omega_s + omega_i = omega_p."""
    w0 = config.omega0
    return phase_matching(config, w0 + np.asarray(x), w0 - np.asarray(x))


def schmidt_cw(
    config: PhaseMatchConfig,
    span: float | None = None,
    modes: int = 20,
    points_per_width: float = 4.0,
) -> SchmidtResult:
    """Schmidt data of a narrow-line pump from the ridge-reduced density matrix.

    For a pump envelope G much narrower than the phase-matching variation,
    rho(x, x') = f(x) f*(x') (sqrt(pi)/tau) exp(-(x - x')^2 tau^2 / 4), a banded
    Hermitian matrix.  K follows from tr(rho)^2 / tr(rho^2); the leading
    Schmidt modes from a sparse Lanczos eigensolve.
    """
    tau = config.pump_tau
    S = auto_span(config) if span is None else min(float(span), config.max_detuning())
    h = 1.0 / (tau * points_per_width)
    n = int(2 * math.ceil(S / h)) + 1
    x = (np.arange(n) - n // 2) * h
    f = ridge_profile(config, x)
    band = int(math.ceil(8.5 / (tau * h)))
    band = min(band, n - 1)
    gc = np.exp(-0.25 * (np.arange(band + 1) * h * tau) ** 2) * math.sqrt(math.pi) / tau
    # lower-banded storage: ab[d, j] = rho[j + d, j]
    ab = np.zeros((band + 1, n), dtype=complex)
    for d in range(band + 1):
        ab[d, : n - d] = f[d:] * np.conj(f[: n - d]) * gc[d] * h
    tr = float(ab[0].real.sum())
    tr2 = float(np.sum(np.abs(ab[0]) ** 2) + 2 * np.sum(np.abs(ab[1:]) ** 2))
    K = tr * tr / tr2
    m = min(modes, n - 2)
    offsets = list(range(-band, band + 1))
    diags = [np.conj(ab[-d, : n + d]) for d in range(-band, 0)] + [ab[d, : n - d] for d in range(band + 1)]
    rho = sp.diags(diags, offsets, shape=(n, n), format="csr")
    w, vec = spla.eigsh(rho, k=m, which="LA", v0=np.ones(n))
    order = np.argsort(w)[::-1]
    w, vec = w[order], vec[:, order]
    lam = np.clip(w, 0, None) / tr
    u = (vec / math.sqrt(h)).T
    # idler modes on y = -x: v_n(y) = w_n^-1/2 int G(x + y) f(x) u_n*(x) dx
    bg = min(band, (n - 1) // 2)  # "same" convolution needs the kernel no longer than f
    G = np.exp(-0.5 * ((np.arange(-bg, bg + 1) * h) * tau) ** 2)
    v = np.zeros_like(u)
    for k in range(m):
        if w[k] > 0:
            v[k] = np.convolve(f * np.conj(u[k]), G, mode="same") * h / math.sqrt(w[k])
    v = v[:, ::-1]
    y = (-x)[::-1]
    return SchmidtResult(
        lambdas=lam,
        K=float(K),
        u=u,
        v=v,
        omega_s=config.omega0 + x,
        omega_i=config.omega0 + y,
        method="ridge",
    )


def cw_schmidt_estimate(config: PhaseMatchConfig, span: float | None = None, n: int = 200001) -> float:
    """K = tau / sqrt(2 pi) (int |f|^2)^2 / int |f|^4 along the ridge."""
    S = auto_span(config) if span is None else min(float(span), config.max_detuning())
    x = np.linspace(-S, S, n)
    p = np.abs(ridge_profile(config, x)) ** 2
    dx = x[1] - x[0]
    return float(config.pump_tau / math.sqrt(2 * math.pi) * (p.sum() * dx) ** 2 / (np.sum(p**2) * dx))


@dataclass(frozen=True)
class Spectra:
    nu_s_thz: np.ndarray = field(repr=False)
    nu_i_thz: np.ndarray = field(repr=False)
    signal: np.ndarray = field(repr=False)
    idler: np.ndarray = field(repr=False)
    fwhm_s: float
    fwhm_i: float
    multipeak: bool = False

    def to_csv(self, which: str = "signal") -> str:
        nu, I = (self.nu_s_thz, self.signal) if which == "signal" else (self.nu_i_thz, self.idler)
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["nu_THz", "intensity"])
        for a, b in zip(nu, I):
            wr.writerow([f"{a:.9g}", f"{b:.9g}"])
        return buf.getvalue()


def fwhm(axis, y) -> tuple[float, bool]:
    """Width at half maximum by linear interpolation; also flags extra crossings.

    The reported width is that of the lobe containing the global maximum.
    """
    y = np.asarray(y, dtype=float)
    axis = np.asarray(axis, dtype=float)
    k = int(np.argmax(y))
    half = 0.5 * y[k]
    above = y >= half
    crossings = int(np.count_nonzero(above[1:] != above[:-1]))
    i = k
    while i > 0 and y[i - 1] >= half:
        i -= 1
    j = k
    while j < y.size - 1 and y[j + 1] >= half:
        j += 1
    if i == 0 or j == y.size - 1:
        warnings.warn("half maximum not reached inside the window", MultiPeakWarning, stacklevel=2)
        left, right = axis[i], axis[j]
    else:
        left = axis[i - 1] + (half - y[i - 1]) * (axis[i] - axis[i - 1]) / (y[i] - y[i - 1])
        right = axis[j] + (half - y[j]) * (axis[j + 1] - axis[j]) / (y[j + 1] - y[j])
    return float(right - left), crossings > 2


def marginal_spectra(jsa: JsaGrid) -> Spectra:
    """Marginals of |F|^2 and their FWHM in THz."""
    I = jsa.jsi()
    sig = I.sum(axis=1) * jsa.d_omega_i
    idl = I.sum(axis=0) * jsa.d_omega_s
    nu_s = jsa.omega_s / (2 * np.pi) * 1e-12
    nu_i = jsa.omega_i / (2 * np.pi) * 1e-12
    fs, ms = fwhm(nu_s, sig)
    fi, mi = fwhm(nu_i, idl)
    if ms or mi:
        warnings.warn("more than one half-maximum crossing pair in a marginal", MultiPeakWarning, stacklevel=2)
    return Spectra(nu_s, nu_i, sig, idl, fs, fi, ms or mi)


def cw_spectrum(config: PhaseMatchConfig, span: float | None = None, n: int = 20001) -> Spectra:
    """Narrow-line limit: both marginals equal |f|^2 along the ridge."""
    S = auto_span(config) if span is None else min(float(span), config.max_detuning())
    x = np.linspace(-S, S, n)
    p = np.abs(ridge_profile(config, x)) ** 2
    p = p / (p.sum() * (x[1] - x[0]))
    nu_s = (config.omega0 + x) / (2 * np.pi) * 1e-12
    nu_i = (config.omega0 - x)[::-1] / (2 * np.pi) * 1e-12
    f, multi = fwhm(nu_s, p)
    return Spectra(nu_s, nu_i, p, p[::-1].copy(), f, f, multi)


def gaussian_schmidt_number(A: float, B: float) -> float:
    """K for exp(-A (x^2 + y^2) + 2 B x y), |B| < A."""
    return A / math.sqrt(A * A - B * B)
