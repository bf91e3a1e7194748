import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pdcrib.cli import EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK, run
from pdcrib.config import load_config, schema

ROOT = Path(__file__).resolve().parents[1]


def _cfg(tmp_path, obj, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _files(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_dispersion_outputs_and_sidecars(tmp_path):
    cfg = _cfg(tmp_path, {"materials": {"wavelengths_um": [0.775, 1.55]}})
    out = tmp_path / "o"
    assert run(["dispersion", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = (out / "dispersion_LiNbO3_ordinary.csv").read_text().splitlines()
    assert rows[0] == "wavelength_um,n"
    assert float(rows[2].split(",")[1]) == pytest.approx(2.1837, abs=2e-3)
    side = json.loads((out / "dispersion_LiNbO3_ordinary.csv.meta.json").read_text())
    assert side["config_hash"] == load_config(cfg).digest()
    assert side["sha256"] == hashlib.sha256((out / "dispersion_LiNbO3_ordinary.csv").read_bytes()).hexdigest()
    assert side["tool"] == "pdc-rib"


def test_dispersion_deterministic(tmp_path):
    cfg = _cfg(tmp_path, {"materials": {"wavelengths_um": {"start": 0.6, "stop": 1.6, "points": 11}}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["dispersion", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert run(["dispersion", "--config", cfg, "--out", str(b)]) == EXIT_OK
    assert _files(a) == _files(b)
    assert "dispersion.svg" in _files(a)


@pytest.mark.parametrize(
    "obj",
    [
        {"materials": {"wavelengths_um": []}},
        {"geometry": {"grid_nm": -1}},
        {"unknown_block": {}},
        {"materials": {"source": "json", "params_json": "missing.json"}},
        {"materials": {"source": "csv"}},
    ],
)
def test_config_errors_exit_2(tmp_path, obj, capsys):
    cfg = _cfg(tmp_path, obj)
    assert run(["dispersion", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_unreadable_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["dispersion", "--config", str(bad)]) == EXIT_CONFIG
    assert run(["dispersion", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_geometry_required_for_modes(tmp_path):
    cfg = _cfg(tmp_path, {"geometry": {"grid_nm": 40}})
    assert run(["modes", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_modes_command(tmp_path):
    cfg = _cfg(tmp_path, {"preset": "zcut-paper", "geometry": {"grid_nm": 40}})
    out = tmp_path / "o"
    assert run(["modes", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = (out / "modes.csv").read_text().splitlines()
    assert rows[0] == "index,label,n_eff,te_fraction,parity,power_W,edge_ratio"
    assert [r.split(",")[1] for r in rows[1:]] == ["TE0", "TE1", "TE2", "TM0"]
    assert (out / "mode_3_TM0.svg").exists()


def test_computation_error_exit_3(tmp_path, capsys):
    cfg = _cfg(
        tmp_path,
        {"preset": "zcut-paper", "geometry": {"grid_nm": 40}, "degeneracy": {"bracket_nm": [280, 320]}},
    )
    assert run(["find-degeneracy", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_COMPUTE
    assert "NoBracket" in capsys.readouterr().err


def _synthetic_csv(path: Path):
    rows = ["label,wavelength_um,n_eff"]
    for lab, n0, s, lam0, lo, hi in (
        ("TM0", 1.678, -0.12, 1.55, 1.45, 1.65),
        ("TE2", 1.7027, -0.25, 1.55, 1.45, 1.65),
        ("TE0", 2.05, -0.35, 0.775, 0.74, 0.81),
    ):
        for wl in np.linspace(lo, hi, 9):
            rows.append(f"{lab},{wl:.6f},{n0 + s * (wl - lam0):.9f}")
    path.write_text("\n".join(rows) + "\n")


def test_pdc_from_imported_table(tmp_path):
    _synthetic_csv(tmp_path / "neff.csv")
    cfg = _cfg(
        tmp_path,
        {
            "materials": {"source": "csv", "dispersion_csv": "neff.csv"},
            "pdc": {"L_cm": [0.7], "tau_ps": 1.7, "grid": 512, "schmidt_modes": 5},
        },
    )
    out = tmp_path / "o"
    assert run(["pdc", "--config", cfg, "--out", str(out)]) == EXIT_OK
    names = set(_files(out))
    for n in ("jsa_TE0_L0p7cm.csv", "jsi_TE0_L0p7cm.svg", "schmidt_TE0_L0p7cm.csv", "kappa_table.csv"):
        assert n in names and n + ".meta.json" in names
    side = json.loads((out / "schmidt_TE0_L0p7cm.csv.meta.json").read_text())
    assert side["K"] > 1 and side["method"] == "svd"
    # sidecar hash covers the imported table bytes
    h1 = load_config(cfg).digest()
    (tmp_path / "neff.csv").write_text((tmp_path / "neff.csv").read_text() + "\n")
    assert load_config(cfg).digest() != h1


def test_pdc_unknown_mode(tmp_path):
    _synthetic_csv(tmp_path / "neff.csv")
    cfg = _cfg(tmp_path, {"materials": {"source": "csv", "dispersion_csv": "neff.csv"}, "pdc": {"pump": ["TE1"]}})
    assert run(["pdc", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_bad_jobs(tmp_path):
    cfg = _cfg(tmp_path, {})
    assert run(["dispersion", "--config", cfg, "--jobs", "0"]) == EXIT_CONFIG


def test_docs_schema_matches_package():
    assert json.loads((ROOT / "docs" / "config.schema.json").read_text()) == schema()


def test_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "pdcrib.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "pdc-rib" in out.stdout


@pytest.mark.parametrize("path", sorted((ROOT / "docs" / "examples").glob("*.json")), ids=lambda p: p.name)
def test_example_configs_validate(path):
    load_config(path)
