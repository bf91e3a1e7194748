"""Run-configuration loading: schema validation, presets, defaults and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError
from .geometry import RibGeometry

PRESETS = {
    "zcut-paper": {"cut": "Z", "w_nm": 2000.0, "d_nm": 450.0, "h_nm": 300.0, "theta_deg": 45.0},
    "xcut-paper": {"cut": "X", "w_nm": 2000.0, "d_nm": 300.0, "h_nm": 193.1, "theta_deg": 45.0},
}

PUMP_LABELS = ["TE0", "TE1", "TE2", "TM0"]

DEFAULTS = {
    "geometry": {
        "cut": "Z",
        "theta_deg": 45.0,
        "grid_nm": 20.0,
        "grid_x_nm": None,
        "window_um": [6.0, 4.0],
        "buffer_fraction": 0.65,
    },
    "materials": {
        "source": "builtin",
        "axes": ["LiNbO3:ordinary", "LiNbO3:extraordinary", "SiO2"],
        "wavelengths_um": {"start": 0.4, "stop": 1.7, "points": 261},
    },
    "modes": {"wavelength_um": 1.55, "count": 4},
    "scan": {
        "bands": [
            {"labels": ["TM0", "TE2"], "wavelengths_um": {"start": 1.50, "stop": 1.60, "points": 5}},
            {"labels": PUMP_LABELS, "wavelengths_um": {"start": 0.765, "stop": 0.785, "points": 5}},
        ]
    },
    "degeneracy": {"free_parameter": "h", "wavelength_um": 1.55, "labels": ["TM0", "TE2"], "tol": 1e-4},
    "pdc": {
        "pump": ["TE0"],
        "signal": "TM0",
        "idler": "TE2",
        "L_cm": [4.0],
        "tau_ps": None,
        "linewidth_GHz": 1.0,
        "lambda_p_um": 0.775,
        "poling_um": None,
        "grid": None,
        "schmidt_modes": 20,
        "write_jsa": True,
    },
    "report": {
        "presets": ["zcut-paper", "xcut-paper"],
        "scan_points": 5,
        "L_cm": [0.7, 3.0, 4.0],
        "tau_ps": 1.7,
        "linewidth_GHz": 1.0,
        "pulsed_grid_min": 1024,
        "pulsed_grid_max": 4096,
        "tolerances": {
            "material_abs": 2e-3,
            "neff_abs": 2e-2,
            "degeneracy_abs": 5e-3,
            "poling_rel": 0.03,
            "kappa_rel": 0.25,
            "schmidt_cw_rel": 0.15,
            "fwhm_rel": 0.15,
        },
    },
}


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config.schema.json").read_text())


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def wavelength_list(spec) -> np.ndarray:
    """Explicit list or ``{start, stop, points}`` range, in micrometres."""
    if isinstance(spec, dict):
        if spec["points"] == 1:
            return np.array([float(spec["start"])])
        return np.round(np.linspace(spec["start"], spec["stop"], spec["points"]), 12)
    return np.asarray(spec, dtype=float)


@dataclass(frozen=True)
class RunConfig:
    """Validated, default-filled configuration.  ``data`` is the resolved JSON tree."""

    data: dict
    base_dir: Path

    def __getitem__(self, key):
        return self.data[key]

    def path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p

    def digest(self) -> str:
        """SHA-256 over the resolved config and the bytes of every referenced file."""
        files = {}
        mat = self.data["materials"]
        refs = []
        if mat.get("params_json"):
            refs.append(mat["params_json"])
        dcsv = mat.get("dispersion_csv")
        if dcsv:
            refs.extend([dcsv] if isinstance(dcsv, str) else dcsv)
        for r in refs:
            files[r] = hashlib.sha256(self.path(r).read_bytes()).hexdigest()
        payload = json.dumps({"config": self.data, "files": files}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def geometry(self, preset: str | None = None, **overrides) -> RibGeometry:
        g = dict(self.data["geometry"])
        if preset is not None:
            g.update(PRESETS[preset])
        g.update(overrides)
        missing = [k for k in ("w_nm", "d_nm", "h_nm") if k not in g]
        if missing:
            raise ConfigError(f"geometry needs {', '.join(missing)} (or a preset)")
        win = g["window_um"]
        return RibGeometry(
            w=g["w_nm"],
            d=g["d_nm"],
            h=g["h_nm"],
            cut=g["cut"],
            theta=g["theta_deg"],
            domain_width=1e3 * win[0],
            domain_height=1e3 * win[1],
            grid_step=g["grid_nm"],
            grid_x=g.get("grid_x_nm"),
            buffer_fraction=g["buffer_fraction"],
        )

    def models(self):
        mat = self.data["materials"]
        if mat["source"] == "json":
            from .materials import models_from_json

            return models_from_json(self.path(mat["params_json"]))
        return None

    def imported_dispersion(self):
        """Merged imported tables, or None when dispersion is to be solved."""
        mat = self.data["materials"]
        if mat["source"] != "csv":
            return None
        from .modesolver import import_dispersion_table

        paths = mat["dispersion_csv"]
        paths = [paths] if isinstance(paths, str) else paths
        table, owner = None, {}
        for p in paths:
            t = import_dispersion_table(self.path(p))
            for lab in t.labels:
                if lab in owner:
                    raise ConfigError(f"mode {lab} has two dispersion sources: {owner[lab]} and {p}")
                owner[lab] = p
            table = t if table is None else table.merge(t)
        return table

    def sidecar(self, **extra) -> dict:
        return {"config_hash": self.digest(), "tool": "pdc-rib", "tool_version": __version__, **extra}


def _check_files(cfg: RunConfig):
    mat = cfg.data["materials"]
    src = mat["source"]
    if src == "json" and not mat.get("params_json"):
        raise ConfigError("materials.source = json needs materials.params_json")
    if src == "csv" and not mat.get("dispersion_csv"):
        raise ConfigError("materials.source = csv needs materials.dispersion_csv")
    refs = [mat.get("params_json")] if src == "json" else []
    if src == "csv":
        d = mat["dispersion_csv"]
        refs += [d] if isinstance(d, str) else list(d)
    for r in refs:
        if not cfg.path(r).is_file():
            raise ConfigError(f"referenced file does not exist: {r}")


def load_config(source, base_dir=None) -> RunConfig:
    """Parse a path or a dict into a :class:`RunConfig`.

    Preset geometry sits between the built-in defaults and explicit keys.
    """
    if isinstance(source, dict):
        raw = source
        base = Path(base_dir or ".")
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        base = Path(base_dir) if base_dir else path.parent
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    try:
        jsonschema.validate(raw, schema())
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{loc}: {exc.message}") from None
    data = copy.deepcopy(DEFAULTS)
    if raw.get("preset"):
        data["geometry"].update(PRESETS[raw["preset"]])
    data = _merge(data, {k: v for k, v in raw.items() if k != "preset"})
    data["preset"] = raw.get("preset")
    data.pop("seedless", None)
    cfg = RunConfig(data, base)
    _check_files(cfg)
    for band in data["scan"]["bands"]:
        wl = wavelength_list(band["wavelengths_um"])
        if wl.size == 0:
            raise ConfigError("scan band has no wavelengths")
    return cfg
