"""``pdc-rib`` command-line front-end.

Exit status: 0 on success, 2 for configuration errors, 3 when a computation
fails.  Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, wavelength_list
from .errors import ComputationError, ConfigError, MultiPeakWarning
from .materials import MaterialAxis, dispersion_csv, refractive_index
from .modesolver import find_degeneracy, solve_geometry, _required_count
from .outputs import Emitter
from .svg import heatmap, line_plot
from .workflow import SchmidtJob, coupling_rows, phase_match_config, scan_bands

log = logging.getLogger("pdcrib")

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 2, 3
COMMANDS = ("dispersion", "modes", "scan", "find-degeneracy", "pdc", "report")


def _axis_tag(axis: MaterialAxis) -> str:
    return f"{axis.material.value}_{axis.axis.value}"


def cmd_dispersion(cfg: RunConfig, out: Emitter, jobs: int = 1):
    mat = cfg["materials"]
    wls = wavelength_list(mat["wavelengths_um"])
    if wls.size == 0:
        raise ConfigError("materials.wavelengths_um is empty")
    models = cfg.models()
    try:
        axes = [MaterialAxis.parse(a) for a in mat["axes"]]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"unknown material axis: {exc}") from None
    series = []
    for ax in axes:
        n = np.atleast_1d(refractive_index(ax, wls, models=models))
        out.write(f"dispersion_{_axis_tag(ax)}.csv", dispersion_csv(wls, n), axis=f"{ax.material.value}:{ax.axis.value}")
        series.append((f"{ax.material.value} {ax.axis.value}", wls, n))
    if wls.size > 1:
        out.write("dispersion.svg", line_plot(series, "Bulk refractive index", "wavelength (um)", "n"))


def cmd_modes(cfg: RunConfig, out: Emitter, jobs: int = 1):
    geom = cfg.geometry()
    wl = cfg["modes"]["wavelength_um"]
    modes = solve_geometry(geom, wl, cfg["modes"]["count"], cfg.models())
    rows = []
    for k, m in enumerate(modes):
        name = f"mode_{k}_{m.label}"
        out.write(f"{name}.csv", m.to_csv(), label=m.label, n_eff=m.n_eff, wavelength_um=wl)
        mag = np.sqrt(np.sum(np.abs(m.E) ** 2, axis=-1)) * 1e-6
        out.write(f"{name}.svg", heatmap(m.u, m.v, mag, f"{m.label}  n_eff = {m.n_eff:.5f}", "u (nm)", "v (nm)"))
        rows.append([k, m.label, f"{m.n_eff:.9g}", f"{m.te_fraction:.6f}", f"{m.parity:+.3f}", f"{m.power:.9g}", f"{m.boundary_ratio:.2e}"])
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["index", "label", "n_eff", "te_fraction", "parity", "power_W", "edge_ratio"])
    wr.writerows(rows)
    out.write("modes.csv", buf.getvalue(), wavelength_um=wl)


def _bands(cfg: RunConfig):
    out = []
    for b in cfg["scan"]["bands"]:
        wls = wavelength_list(b["wavelengths_um"])
        if wls.size == 0:
            raise ConfigError("scan band has no wavelengths")
        out.append((list(b["labels"]), wls, b.get("count") or _required_count(b["labels"])))
    return out


def cmd_scan(cfg: RunConfig, out: Emitter, jobs: int = 1):
    scan = scan_bands(cfg.geometry(), _bands(cfg), cfg.models(), jobs)
    out.write("neff.csv", scan.table.to_csv())
    series = []
    for lab in scan.table.labels:
        for wl, n in scan.table.segments(lab):
            series.append((lab, wl, n))
    if all(s[1].size > 1 for s in series):
        out.write("neff.svg", line_plot(series, "Effective index", "wavelength (um)", "n_eff"))
    return scan


def cmd_find_degeneracy(cfg: RunConfig, out: Emitter, jobs: int = 1):
    geom = cfg.geometry()
    d = cfg["degeneracy"]
    bracket = tuple(d["bracket_nm"]) if d.get("bracket_nm") else None
    found = find_degeneracy(
        geom, d["free_parameter"], d["wavelength_um"], tuple(d["labels"]), bracket=bracket, tol=d["tol"], models=cfg.models()
    )
    modes = solve_geometry(found, d["wavelength_um"], _required_count(d["labels"]), cfg.models())
    n = {m.label: m.n_eff for m in modes}
    doc = {
        "free_parameter": d["free_parameter"],
        "value_nm": getattr(found, d["free_parameter"]),
        "wavelength_um": d["wavelength_um"],
        "labels": list(d["labels"]),
        "n_eff": [n.get(lab) for lab in d["labels"]],
        "geometry_nm": {"w": found.w, "d": found.d, "h": found.h, "theta_deg": found.theta, "cut": found.cut.value},
    }
    out.write_json("degeneracy.json", doc)


def _pdc_dispersion(cfg: RunConfig, jobs: int):
    table = cfg.imported_dispersion()
    if table is not None:
        return table, None, None
    geom = cfg.geometry()
    scan = scan_bands(geom, _bands(cfg), cfg.models(), jobs)
    return scan.table, scan, geom


def _fmt_L(L_cm: float) -> str:
    return f"{L_cm:g}".replace(".", "p")


def cmd_pdc(cfg: RunConfig, out: Emitter, jobs: int = 1):
    from .pdc import cw_spectrum, grid_size, jsa_grid, marginal_spectra, schmidt, schmidt_cw

    p = cfg["pdc"]
    table, scan, geom = _pdc_dispersion(cfg, jobs)
    needed = set(p["pump"]) | {p["signal"], p["idler"]}
    missing = needed - set(table.labels)
    if missing:
        raise ConfigError(f"no dispersion for mode(s) {sorted(missing)}")
    tau = None if p["tau_ps"] is None else p["tau_ps"] * 1e-12
    poling = None if p["poling_um"] is None else p["poling_um"] * 1e-6
    kap_rows = []
    kappas = coupling_rows(geom, scan, p["pump"], p["signal"], p["idler"], p["lambda_p_um"], cfg.models()) if scan else {}
    for pump in p["pump"]:
        for L_cm in p["L_cm"]:
            job = SchmidtJob(table, pump, p["signal"], p["idler"], L_cm * 1e-2, tau, p["linewidth_GHz"] * 1e9, p["lambda_p_um"], poling, p["schmidt_modes"], 4096)
            pm = phase_match_config(job)
            n = p["grid"] or (1024 if pm.cw else grid_size(pm))
            tag = f"{pump}_L{_fmt_L(L_cm)}cm"
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MultiPeakWarning)
                grid = jsa_grid(pm, n=n, check_sampling=not pm.cw)
                res = schmidt_cw(pm, modes=p["schmidt_modes"]) if pm.cw else schmidt(grid, modes=p["schmidt_modes"])
                spec = cw_spectrum(pm) if pm.cw else marginal_spectra(grid)
            if p["write_jsa"]:
                out.write(f"jsa_{tag}.csv", grid.to_csv(), **grid.sidecar())
            nu = (grid.omega_s - pm.omega0) / (2 * np.pi) * 1e-12
            out.write(
                f"jsi_{tag}.svg",
                heatmap(nu, nu, grid.jsi(), f"JSI {pump} pump, L = {L_cm:g} cm", "signal detuning (THz)", "idler detuning (THz)"),
            )
            out.write(f"schmidt_{tag}.csv", res.to_csv(p["schmidt_modes"]), K=res.K, method=res.method)
            out.write(f"spectrum_signal_{tag}.csv", spec.to_csv("signal"), fwhm_THz=spec.fwhm_s, multipeak=spec.multipeak)
            out.write(f"spectrum_idler_{tag}.csv", spec.to_csv("idler"), fwhm_THz=spec.fwhm_i, multipeak=spec.multipeak)
            c0 = pm.omega0 / (2 * np.pi) * 1e-12
            out.write(
                f"spectra_{tag}.svg",
                line_plot(
                    [("signal", spec.nu_s_thz - c0, spec.signal), ("idler", spec.nu_i_thz - c0, spec.idler)],
                    f"Marginal spectra, FWHM {spec.fwhm_s:.3f} THz",
                    "detuning (THz)",
                    "intensity",
                ),
            )
            log.info("%s: K = %.4f (%s)", tag, res.K, res.method)
        k = kappas[pump].kappa_abs if pump in kappas else float("nan")
        kap_rows.append([geom.cut.value[0] if geom else "", pump, f"{k:.4f}", f"{pm.poling * 1e6:.4f}"])
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["cut", "pump_mode", "kappa_abs_W-1/2m-1", "poling_period_um"])
    wr.writerows(kap_rows)
    out.write("kappa_table.csv", buf.getvalue())


def cmd_report(cfg: RunConfig, out: Emitter, jobs: int = 1):
    from .report import run_report

    summary = run_report(cfg, out, jobs)
    for name, ok in summary["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")


HANDLERS = {
    "dispersion": cmd_dispersion,
    "modes": cmd_modes,
    "scan": cmd_scan,
    "find-degeneracy": cmd_find_degeneracy,
    "pdc": cmd_pdc,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdc-rib", description="Type-II PDC design for LNOI rib waveguides.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="run configuration (JSON)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = load_config(args.config)
        out = Emitter(Path(args.out), cfg.sidecar(command=args.command))
        HANDLERS[args.command](cfg, out, args.jobs)
    except ConfigError as exc:
        print(f"pdc-rib: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ComputationError as exc:
        print(f"pdc-rib: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
