"""CSV/JSON writers and the design artifact round trip."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..comms import CommSpec, comm_sinr_and_rate
from ..model import Waveform
from ..solver import DesignResult
from .config import ConfigError, MissingArtifactError, RunConfig, parse_config

FORMAT = "dfrc-design/1"


def fmt(value) -> str:
    """CSV cell: floats with 12 significant digits, booleans lower-case."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2) + "\n")
    return path


def cplx(a) -> dict:
    a = np.asarray(a)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def uncplx(d) -> np.ndarray:
    return np.asarray(d["re"], dtype=np.float64) + 1j * np.asarray(d["im"], dtype=np.float64)


def design_payload(cfg: RunConfig, spec: CommSpec, res: DesignResult) -> dict:
    users = []
    for m in range(spec.n_users):
        s, rate, floor = comm_sinr_and_rate(res.x, spec, m)
        users.append({
            "constellation": spec.constellations[m] if spec.constellations else None,
            "mui": res.mui_per_user[m],
            "budget": spec.budgets[m],
            "feasible": res.feasible[m],
            "comm_sinr": s,
            "rate": rate,
            "rate_floor": floor,
        })
    return {
        "format": FORMAT,
        "seed": cfg.seed,
        "result": {
            "sinr_db": res.sinr_db,
            "sinr_upper_bound_db": 10 * np.log10(cfg.scenario.sinr_upper_bound()),
            "converged": res.converged,
            "stop_reason": res.stop_reason,
            "outer_iterations": res.outer_iterations,
            "admm_iterations": res.admm_iterations,
            "first_feasible_outer": res.first_feasible,
            "all_feasible": bool(np.all(res.feasible)),
            "users": users,
        },
        "config": cfg.to_dict(),
        "waveform": {
            "n_tx": res.x.n_tx,
            "code_length": res.x.code_length,
            "energy": res.x.energy,
            "phases": res.x.phases,
            "magnitudes": None if res.x.magnitudes is None else res.x.magnitudes,
        },
        "filter": cplx(res.w),
        "channel": cplx(spec.channel),
        "symbols": cplx(spec.symbols),
        "symbol_indices": spec.symbol_indices,
        "constellations": list(spec.constellations or ()),
        "noise_powers": spec.noise_powers,
        "budgets": spec.budgets,
    }


@dataclass(frozen=True, eq=False)
class DesignArtifact:
    config: RunConfig
    x: Waveform
    w: np.ndarray
    spec: CommSpec
    raw: dict


def load_design(path) -> DesignArtifact:
    p = Path(path)
    if not p.is_file():
        raise MissingArtifactError(f"design artifact {p} not found")
    try:
        data = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MissingArtifactError(f"design artifact {p} unreadable: {exc}") from None
    if data.get("format") != FORMAT:
        raise MissingArtifactError(f"{p} is not a design artifact")
    cfg = parse_config(data["config"])
    wf = data["waveform"]
    mags = wf.get("magnitudes")
    x = Waveform(np.asarray(wf["phases"]), wf["n_tx"], wf["code_length"], wf["energy"],
                 None if mags is None else np.asarray(mags))
    n_tx = wf["n_tx"]
    L = wf["code_length"]
    H = uncplx(data["channel"]).reshape(-1, n_tx)
    S = uncplx(data["symbols"]).reshape(-1, L)
    idx = data.get("symbol_indices")
    idx = None if idx is None else np.asarray(idx, dtype=np.int64).reshape(-1, L)
    try:
        spec = CommSpec(H, S, np.asarray(data["budgets"], float), np.asarray(data["noise_powers"], float),
                        tuple(data["constellations"]), idx)
    except Exception as exc:
        raise ConfigError(f"{p}: inconsistent communication data: {exc}") from None
    return DesignArtifact(cfg, x, uncplx(data["filter"]), spec, data)
