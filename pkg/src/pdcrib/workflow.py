"""Reusable pipeline steps shared by the CLI subcommands and the report."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import MultiPeakWarning
from .modesolver import (
    DispersionTable,
    find_label,
    parallel_map,
    solve_geometry,
    track_modes,
    _required_count,
)
from .nonlinear import chi2_full_tensor, coupling_coefficients
from .pdc import (
    PhaseMatchConfig,
    cw_spectrum,
    grid_size,
    jsa_grid,
    marginal_spectra,
    schmidt,
    schmidt_cw,
)


@dataclass
class BandScan:
    """Dispersion plus the tracked mode records of every scan band."""

    table: DispersionTable
    modes: dict  # (label, wavelength_um) -> ModeRecord

    def mode(self, label: str, wavelength: float):
        for (lab, wl), m in self.modes.items():
            if lab == label and math.isclose(wl, wavelength, abs_tol=1e-9):
                return m
        return None


def scan_bands(geom, bands, models=None, jobs=1) -> BandScan:
    """Run one tracked scan per ``(labels, wavelengths, count)`` band and merge."""
    table, modes = None, {}
    for labels, wls, count in bands:
        t, picked = track_modes(geom, wls, labels, count=count, models=models, jobs=jobs)
        for lab in labels:
            for wl, m in zip(wls, picked[lab]):
                modes[(lab, float(wl))] = m
        table = t if table is None else table.merge(t)
    return BandScan(table, modes)


def design_modes(scan: BandScan | None, geom, labels, wavelength, models=None):
    """Mode records at ``wavelength``: reuse scan samples, solve otherwise."""
    found = {lab: scan.mode(lab, wavelength) for lab in labels} if scan else {lab: None for lab in labels}
    if any(m is None for m in found.values()):
        solved = solve_geometry(geom, wavelength, _required_count(labels), models)
        for lab in labels:
            if found[lab] is None:
                found[lab] = find_label(solved, lab)
    return found


def coupling_rows(geom, scan, pumps, signal="TM0", idler="TE2", lambda_p=0.775, models=None):
    """|kappa| per pump label, in W^-1/2 m^-1."""
    si = design_modes(scan, geom, [signal, idler], 2 * lambda_p, models)
    pm = design_modes(scan, geom, pumps, lambda_p, models)
    tensor = chi2_full_tensor(geom.cut)
    return {p: coupling_coefficients(pm[p], si[signal], si[idler], tensor) for p in pumps}


@dataclass(frozen=True)
class SchmidtJob:
    table: DispersionTable
    pump: str
    signal: str
    idler: str
    L: float
    tau: float | None
    linewidth: float
    lambda_p: float
    poling: float | None
    modes: int
    grid_max: int
    grid_min: int = 1024


def phase_match_config(job: SchmidtJob) -> PhaseMatchConfig:
    return PhaseMatchConfig(
        dispersion=job.table,
        pump=job.pump,
        signal=job.signal,
        idler=job.idler,
        L=job.L,
        poling=job.poling,
        lambda_p=job.lambda_p,
        tau=job.tau,
        linewidth=job.linewidth,
    )


def run_schmidt(job: SchmidtJob) -> dict:
    """K and marginal FWHM for one (pump, L) point; CW uses the ridge reduction."""
    cfg = phase_match_config(job)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MultiPeakWarning)
        if cfg.cw:
            res = schmidt_cw(cfg, modes=job.modes)
            spec = cw_spectrum(cfg)
            n = res.omega_s.size
        else:
            n = grid_size(cfg, n_min=job.grid_min, n_max=job.grid_max)
            grid = jsa_grid(cfg, n=n)
            res = schmidt(grid, modes=job.modes)
            spec = marginal_spectra(grid)
    return {
        "K": res.K,
        "method": res.method,
        "samples": int(n),
        "fwhm_s_THz": spec.fwhm_s,
        "fwhm_i_THz": spec.fwhm_i,
        "multipeak": bool(spec.multipeak),
        "poling_um": cfg.poling * 1e6,
        "lambdas": np.asarray(res.lambdas[: job.modes]),
    }


def run_schmidt_jobs(jobs_list, jobs=1):
    return parallel_map(run_schmidt, jobs_list, jobs)
