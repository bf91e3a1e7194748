r"""Second-order nonlinear coupling between guided modes.

Tensor convention (class 3m, crystal frame, mirror plane normal to x):
chi_ljm = 2 d_{l,(jm)} with the Voigt pairs 1=xx 2=yy 3=zz 4=yz 5=xz 6=xy and

    d = [[ 0,    0,   0,   0,   d31, -d22],
         [-d22,  d22, 0,   d31, 0,    0  ],
         [ d31,  d31, d33, 0,   0,    0  ]]

so the nonzero full-tensor entries are

    ===========  ========
    indices      value/2
    ===========  ========
    zzz          d33
    zxx, zyy     d31
    xxz, xzx     d31
    yyz, yzy     d31
    yyy          d22
    yxx          -d22
    xxy, xyx     -d22
    ===========  ========

which is invariant under every index permutation (Kleinman symmetry).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C0, epsilon_0
from scipy.integrate import solve_ivp

from .errors import GridMismatch, StepFailure
from .geometry import Cut, cut_axis_mapping

D31, D33, D22 = 4.6e-12, 25e-12, 2.2e-12  # m/V

_VOIGT = {(0, 0): 0, (1, 1): 1, (2, 2): 2, (1, 2): 3, (2, 1): 3, (0, 2): 4, (2, 0): 4, (0, 1): 5, (1, 0): 5}

# Brightness is quoted per mW of pump and per 1e9 rad/s of spectral bandwidth.
MW = 1e-3
BANDWIDTH_UNIT = 1e9


def contracted_d(d31=D31, d33=D33, d22=D22) -> np.ndarray:
    return np.array(
        [
            [0, 0, 0, 0, d31, -d22],
            [-d22, d22, 0, d31, 0, 0],
            [d31, d31, d33, 0, 0, 0],
        ],
        dtype=float,
    )


@dataclass(frozen=True)
class NonlinearTensor:
    """Full chi^(2) in the crystal frame plus the cut used to view it."""

    chi: np.ndarray
    cut: Cut = Cut.Zcut

    @property
    def mapping(self):
        return cut_axis_mapping(self.cut)

    def lab(self) -> np.ndarray:
        """Tensor with indices in (horizontal, vertical, propagation) order."""
        p = list(self.mapping)
        return self.chi[np.ix_(p, p, p)]

    @staticmethod
    def from_lab(chi_lab, cut) -> "NonlinearTensor":
        inv = list(cut_axis_mapping(cut).inverse())
        return NonlinearTensor(np.asarray(chi_lab)[np.ix_(inv, inv, inv)], Cut.parse(cut))

    def is_kleinman(self, atol=0.0) -> bool:
        return all(
            np.allclose(self.chi, self.chi.transpose(p), rtol=0, atol=atol) for p in itertools.permutations(range(3))
        )


def chi2_full_tensor(cut=Cut.Zcut, d31=D31, d33=D33, d22=D22) -> NonlinearTensor:
    """Expand the 3m contracted coefficients into chi_ljm = 2 d_l(jm)."""
    d = contracted_d(d31, d33, d22)
    chi = np.zeros((3, 3, 3))
    for l, j, m in itertools.product(range(3), repeat=3):
        chi[l, j, m] = 2 * d[l, _VOIGT[j, m]]
    return NonlinearTensor(chi, Cut.parse(cut))


def zero_tensor(cut=Cut.Zcut) -> NonlinearTensor:
    return NonlinearTensor(np.zeros((3, 3, 3)), Cut.parse(cut))


@dataclass(frozen=True)
class CouplingResult:
    kappa_s: complex
    kappa_i: complex
    kappa_p: complex
    overlap: complex  # O, m^2 * m/V, dimensionless profiles
    s_eff_s: float  # m^2
    s_eff_i: float
    n_s: float
    n_i: float
    omega_s: float
    omega_i: float
    pump_amplitude: float  # V/m at 1 W

    @property
    def kappa(self) -> complex:
        return self.kappa_s

    @property
    def kappa_abs(self) -> float:
        return abs(self.kappa_s)

    def G(self, power: float) -> complex:
        """Overlap-route prefactor G with the pump amplitude fixed by ``power``."""
        ep = self.pump_amplitude * math.sqrt(power)
        root = math.sqrt(self.omega_s * self.omega_i * self.n_s * self.n_i / (self.s_eff_s * self.s_eff_i))
        return 1j * ep / (12 * math.pi * C0) * root


def _contract(chi, a, b, c):
    """sum_ljm chi_ljm a_l b_j c_m per cell."""
    return np.einsum("ljm,...l,...j,...m->...", chi, a, b, c, optimize=True)


def s_eff(mode) -> float:
    """int E_perp* . eps_r E_perp dA for the dimensionless profile (m^2)."""
    from .geometry import material_eps

    eln, es = material_eps(mode.wavelength)
    prof = mode.profile
    f = mode.fill[..., None]
    # recover the cell permittivity from the LiNbO3 fill and the SiO2/air split
    below = (mode.v < 0)[None, :, None]
    background = np.where(below, es, 1.0)
    eps = f * np.asarray(eln) + (1 - f) * background
    return float((np.abs(prof) ** 2 * eps).sum() * mode.cell_area)


def coupling_coefficients(pump, signal, idler, tensor: NonlinearTensor | None = None) -> CouplingResult:
    """kappa_s, kappa_i, kappa_p from midpoint quadrature over the LiNbO3 fill."""
    for m in (signal, idler):
        if not pump.same_grid(m):
            raise GridMismatch("pump, signal and idler must share one grid")
    for m in (pump, signal, idler):
        if not m.power_normalized:
            raise ValueError(f"mode {m.label} is not power normalized")
    if tensor is None:
        tensor = chi2_full_tensor(pump.geometry.cut)
    chi = tensor.chi
    w = pump.fill * pump.cell_area
    Ep, Es, Ei = pump.E, signal.E, idler.E
    N = math.sqrt(pump.power * signal.power * idler.power)
    ws, wi, wp = signal.omega, idler.omega, pump.omega
    Is = (_contract(chi, Es.conj(), Ei.conj(), Ep) * w).sum()
    Ii = (_contract(chi, Ei.conj(), Es.conj(), Ep) * w).sum()
    Ip = (_contract(chi, Ep.conj(), Es, Ei) * w).sum()
    O = (_contract(chi, pump.profile.conj(), signal.profile, idler.profile) * w).sum()
    return CouplingResult(
        kappa_s=complex(ws * epsilon_0 / (2 * N) * Is),
        kappa_i=complex(wi * epsilon_0 / (2 * N) * Ii),
        kappa_p=complex(wp * epsilon_0 / (2 * N) * Ip),
        overlap=complex(O),
        s_eff_s=s_eff(signal),
        s_eff_i=s_eff(idler),
        n_s=signal.n_eff,
        n_i=idler.n_eff,
        omega_s=ws,
        omega_i=wi,
        pump_amplitude=pump.amplitude / math.sqrt(pump.power),
    )


@dataclass(frozen=True)
class Brightness:
    gamma: float  # |Gamma| from the kappa relation
    gamma_overlap: float  # |Gamma| from sqrt(2 pi) tau L G O N_F
    rate: float  # pairs / (s * W * rad/s)

    @property
    def per_mw_per_unit(self) -> float:
        """pairs / (s * mW * 1e9 rad/s)."""
        return self.rate * MW * BANDWIDTH_UNIT


def gamma_and_brightness(coupling: CouplingResult | float, tau: float, L: float, P: float, N_F: float) -> Brightness:
    """Coupling strength and spectral brightness.

    ``|Gamma| = |kappa| tau N_F L sqrt(P) / 3``; the pair number per unit
    pump energy and unit bandwidth is |Gamma|^2 / (P tau^2 N_F^2) =
    (|kappa| L / 3)^2, which is independent of tau and N_F and therefore has
    a well-defined CW limit.  Bandwidth is angular frequency.
    """
    if tau <= 0 or L <= 0 or P < 0 or N_F <= 0:
        raise ValueError("tau, L, N_F must be positive and P non-negative")
    if isinstance(coupling, CouplingResult):
        k = coupling.kappa_abs
        g_o = abs(math.sqrt(2 * math.pi) * tau * L * coupling.G(P) * coupling.overlap * N_F)
    else:
        k = abs(coupling)
        g_o = float("nan")
    gamma = k * tau * N_F * L * math.sqrt(P) / 3
    rate = (k * L / 3) ** 2
    return Brightness(gamma=gamma, gamma_overlap=g_o, rate=rate)


# --------------------------------------------------------------------------
# coupled amplitudes


@dataclass(frozen=True)
class AmplitudeTrajectory:
    z: np.ndarray
    A_s: np.ndarray
    A_i: np.ndarray
    A_p: np.ndarray | None = None

    def signal_minus_idler(self) -> np.ndarray:
        return np.abs(self.A_s) ** 2 - np.abs(self.A_i) ** 2

    def total_power(self) -> np.ndarray:
        tot = np.abs(self.A_s) ** 2 + np.abs(self.A_i) ** 2
        if self.A_p is not None:
            tot = tot + np.abs(self.A_p) ** 2
        return tot


def integrate_coupled_amplitudes(
    kappa_s,
    kappa_i,
    dk: float,
    z_max: float,
    A_s0: complex = 0.0,
    A_i0: complex = 1.0,
    z_eval=None,
    kappa_p=None,
    A_p0: complex | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-14,
) -> AmplitudeTrajectory:
    """Integrate the constant-pump pair (primed couplings) or, with
    ``kappa_p`` and ``A_p0``, the full three-wave system (unprimed)."""
    full = kappa_p is not None
    if full and A_p0 is None:
        raise ValueError("A_p0 required with kappa_p")
    ks, ki = complex(kappa_s), complex(kappa_i)
    kp = complex(kappa_p) if full else 0j

    def rhs(z, y):
        a = y[0::2] + 1j * y[1::2]
        ph = np.exp(-1j * dk * z)
        if full:
            As, Ai, Ap = a
            d = np.array(
                [-1j * ks * np.conj(Ai) * Ap * ph, -1j * ki * np.conj(As) * Ap * ph, -1j * kp * As * Ai / ph]
            )
        else:
            As, Ai = a
            d = np.array([-1j * ks * np.conj(Ai) * ph, -1j * ki * np.conj(As) * ph])
        out = np.empty_like(y)
        out[0::2], out[1::2] = d.real, d.imag
        return out

    a0 = [A_s0, A_i0] + ([A_p0] if full else [])
    y0 = np.ravel([[complex(a).real, complex(a).imag] for a in a0])
    if z_eval is None:
        z_eval = np.linspace(0.0, z_max, 201)
    z_eval = np.asarray(z_eval, dtype=float)
    span = (0.0, float(z_max))
    max_step = span[1] / 50 if dk == 0 else min(span[1] / 50, 2 * math.pi / abs(dk) / 20)
    sol = solve_ivp(rhs, span, y0, method="DOP853", t_eval=z_eval, rtol=rtol, atol=atol, max_step=max_step)
    if not sol.success:
        raise StepFailure(sol.message)
    a = sol.y[0::2] + 1j * sol.y[1::2]
    return AmplitudeTrajectory(sol.t, a[0], a[1], a[2] if full else None)


def phase_matched_solution(kappa_s, kappa_i, z, A_i0):
    """Closed form for dk = 0, A_s(0) = 0."""
    g = np.sqrt(complex(kappa_s) * np.conj(complex(kappa_i)))
    z = np.asarray(z, dtype=float)
    sh = np.sinh(g * z) / g if g != 0 else z
    A_s = -1j * kappa_s * np.conj(A_i0) * sh
    A_i = A_i0 * np.cosh(g * z)
    return A_s, A_i


def expm_solution(kappa_s, kappa_i, dk, z, A_s0, A_i0):
    """Exact solution of the constant-pump pair via the rotating frame.

    With a = A_s e^{i dk z/2}, b = conj(A_i) e^{-i dk z/2} the system is
    linear with constant coefficients.
    """
    from scipy.linalg import expm

    M = np.array([[0.5j * dk, -1j * kappa_s], [1j * np.conj(kappa_i), -0.5j * dk]])
    x0 = np.array([A_s0, np.conj(A_i0)], dtype=complex)
    out_s, out_i = [], []
    for zz in np.atleast_1d(z):
        a, b = expm(M * zz) @ x0
        out_s.append(a * np.exp(-0.5j * dk * zz))
        out_i.append(np.conj(b * np.exp(0.5j * dk * zz)))
    return np.array(out_s), np.array(out_i)
