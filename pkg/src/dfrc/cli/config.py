"""YAML run configuration with strict schema checking.

Every section maps onto library types; unknown keys are rejected so that a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from ..comms import CommSpec, get_constellation, make_comm_spec, derive_rng, STREAM_INIT
from ..errors import DfrcError
from ..model import ArrayConfig, Scenario, Waveform, lfm_waveform, random_waveform
from ..solver import SolverParams


class ConfigError(DfrcError, ValueError):
    """Invalid configuration file or command-line override."""


class MissingArtifactError(DfrcError, FileNotFoundError):
    """A required input artifact does not exist or cannot be read."""


@dataclass(frozen=True)
class UserConfig:
    constellation: str = "QPSK"
    energy: float = 20.0
    budget: float = 1e-3
    noise_power: float = 1.0


DEFAULT_USERS = (
    UserConfig("QPSK", 20.0, 1e-3, 1.0),
    UserConfig("QAM8", 20.0, 5e-3, 1.0),
)


@dataclass(frozen=True)
class EmitFlags:
    traces: bool = True
    beampattern: bool = False
    ser: bool = False
    pd: bool = False


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    scenario: Scenario = field(default_factory=Scenario)
    users: tuple[UserConfig, ...] = DEFAULT_USERS
    channel_file: str | None = None
    solver: SolverParams = field(default_factory=SolverParams)
    init: str = "lfm"
    init_seed: int | None = None
    outputs: str = "out"
    emit: EmitFlags = field(default_factory=EmitFlags)

    def with_users(self, count: int) -> RunConfig:
        """First ``count`` users, cycling through the configured list if needed."""
        if count < 0:
            raise ConfigError("user count must be non-negative")
        if count and not self.users:
            raise ConfigError("no users configured to replicate")
        return replace(self, users=tuple(itertools.islice(itertools.cycle(self.users), count)))

    def comm_spec(self) -> CommSpec:
        sc = self.scenario
        if not self.users:
            return CommSpec.empty(sc.n_tx, sc.code_length)
        channel = None
        stored = None
        if self.channel_file is not None:
            stored = load_channel_file(self.channel_file)
            channel = stored["channel"]
            if channel.shape[0] < len(self.users) or channel.shape[1] != sc.n_tx:
                raise ConfigError(
                    f"channel file holds {channel.shape}, need at least {len(self.users)} x {sc.n_tx}"
                )
            channel = channel[: len(self.users)]
        spec = make_comm_spec(
            sc,
            [u.constellation for u in self.users],
            [u.energy for u in self.users],
            [u.budget for u in self.users],
            [u.noise_power for u in self.users],
            self.seed,
            channel=channel,
        )
        if stored is not None and "symbols" in stored:
            m = len(self.users)
            syms = stored["symbols"][:m]
            if syms.shape != spec.symbols.shape:
                raise ConfigError("stored symbols do not match the configured users and code length")
            idx = stored.get("symbol_indices")
            spec = CommSpec(spec.channel, syms, spec.budgets, spec.noise_powers, spec.constellations,
                            None if idx is None else idx[:m])
        return spec

    def initial_waveform(self) -> Waveform:
        if self.init == "lfm":
            return lfm_waveform(self.scenario)
        seed = self.seed if self.init_seed is None else self.init_seed
        return random_waveform(self.scenario, derive_rng(seed, STREAM_INIT))

    def to_dict(self) -> dict:
        sc = self.scenario
        return {
            "seed": self.seed,
            "scenario": {
                "n_tx": sc.n_tx,
                "n_rx": sc.n_rx,
                "spacing_wavelengths": sc.array.spacing_wavelengths,
                "target_angle_deg": sc.target_angle_deg,
                "target_power": sc.target_power,
                "interferers": [{"angle_deg": a, "power": p} for a, p in sc.interferers],
                "noise_power": sc.noise_power,
                "total_energy": sc.total_energy,
                "code_length": sc.code_length,
            },
            "comm": {
                "channel": {"source": "seed"} if self.channel_file is None
                else {"source": "file", "path": self.channel_file},
                "users": [
                    {"constellation": u.constellation, "energy": u.energy, "budget": u.budget,
                     "noise_power": u.noise_power}
                    for u in self.users
                ],
            },
            "solver": self.solver.to_dict(),
            "init": {"kind": self.init} if self.init == "lfm"
            else {"kind": "random", "seed": self.init_seed},
            "outputs": {"dir": self.outputs},
            "emit": {k: getattr(self.emit, k) for k in ("traces", "beampattern", "ser", "pd")},
        }


# ---------------------------------------------------------------------------
# parsing


def _section(obj, where: str, allowed: set[str]) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}; allowed {sorted(allowed)}")
    return obj


def _num(value, where: str, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


_SCENARIO_KEYS = {"n_tx", "n_rx", "spacing_wavelengths", "target_angle_deg", "target_power",
                  "interferers", "noise_power", "total_energy", "code_length"}
_INT_FIELDS = {"n_tx", "n_rx", "code_length", "max_outer", "max_dinkelbach", "max_admm", "max_mm"}


def _parse_scenario(obj) -> Scenario:
    d = _section(obj, "scenario", _SCENARIO_KEYS)
    base = Scenario()
    arr = ArrayConfig(
        _num(d.get("n_tx", base.n_tx), "scenario.n_tx", int),
        _num(d.get("n_rx", base.n_rx), "scenario.n_rx", int),
        _num(d.get("spacing_wavelengths", base.array.spacing_wavelengths), "scenario.spacing_wavelengths"),
    )
    interferers = base.interferers
    if "interferers" in d:
        if not isinstance(d["interferers"], list):
            raise ConfigError("scenario.interferers: expected a list")
        interferers = []
        for i, item in enumerate(d["interferers"]):
            e = _section(item, f"scenario.interferers[{i}]", {"angle_deg", "power"})
            if set(e) != {"angle_deg", "power"}:
                raise ConfigError(f"scenario.interferers[{i}]: needs angle_deg and power")
            interferers.append((_num(e["angle_deg"], "angle_deg"), _num(e["power"], "power")))
    return Scenario(
        array=arr,
        target_angle_deg=_num(d.get("target_angle_deg", base.target_angle_deg), "scenario.target_angle_deg"),
        target_power=_num(d.get("target_power", base.target_power), "scenario.target_power"),
        interferers=tuple(interferers),
        noise_power=_num(d.get("noise_power", base.noise_power), "scenario.noise_power"),
        total_energy=_num(d.get("total_energy", base.total_energy), "scenario.total_energy"),
        code_length=_num(d.get("code_length", base.code_length), "scenario.code_length", int),
    )


def _parse_comm(obj) -> tuple[tuple[UserConfig, ...], str | None]:
    d = _section(obj, "comm", {"users", "channel"})
    users = DEFAULT_USERS
    if "users" in d:
        if not isinstance(d["users"], list):
            raise ConfigError("comm.users: expected a list")
        users = []
        for i, item in enumerate(d["users"]):
            e = _section(item, f"comm.users[{i}]", {"constellation", "energy", "budget", "noise_power"})
            u = UserConfig()
            name = e.get("constellation", u.constellation)
            try:
                name = get_constellation(name).name
            except DfrcError as exc:
                raise ConfigError(f"comm.users[{i}].constellation: {exc}") from None
            users.append(UserConfig(
                name,
                _num(e.get("energy", u.energy), f"comm.users[{i}].energy"),
                _num(e.get("budget", u.budget), f"comm.users[{i}].budget"),
                _num(e.get("noise_power", u.noise_power), f"comm.users[{i}].noise_power"),
            ))
        users = tuple(users)
    ch = _section(d.get("channel"), "comm.channel", {"source", "path"})
    source = ch.get("source", "seed")
    if source == "seed":
        if "path" in ch:
            raise ConfigError("comm.channel.path is only valid with source: file")
        return users, None
    if source == "file":
        if not isinstance(ch.get("path"), str):
            raise ConfigError("comm.channel: source 'file' needs a path")
        return users, ch["path"]
    raise ConfigError(f"comm.channel.source must be 'seed' or 'file', got {source!r}")


def _parse_solver(obj) -> SolverParams:
    names = set(SolverParams.field_names())
    d = _section(obj, "solver", names)
    kwargs = {}
    for k, v in d.items():
        if k == "backend":
            kwargs[k] = str(v)
        elif k in ("papr_rho", "balance") and v is None:
            kwargs[k] = None
        elif k == "papr_rho" and isinstance(v, str) and v.lower() == "cm":
            kwargs[k] = None
        else:
            kwargs[k] = _num(v, f"solver.{k}", int if k in _INT_FIELDS else float)
    return SolverParams(**kwargs)


def parse_config(data: dict | None, base_dir: Path | None = None) -> RunConfig:
    d = _section(data, "config", {"seed", "scenario", "comm", "solver", "init", "outputs", "emit"})
    try:
        scenario = _parse_scenario(d.get("scenario"))
        users, channel_file = _parse_comm(d.get("comm"))
        solver = _parse_solver(d.get("solver"))
        # Validate per-user fields through the library types.
        for u in users:
            if not (u.energy > 0 and u.budget > 0 and u.noise_power > 0):
                raise ConfigError("user energy, budget and noise_power must be positive")
        solver.check_rho(scenario.code_length)
    except ConfigError:
        raise
    except (DfrcError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if channel_file is not None and base_dir is not None and not Path(channel_file).is_absolute():
        channel_file = str((base_dir / channel_file).resolve())
    init = _section(d.get("init"), "init", {"kind", "seed"})
    kind = init.get("kind", "lfm")
    if kind not in ("lfm", "random"):
        raise ConfigError(f"init.kind must be 'lfm' or 'random', got {kind!r}")
    if kind == "lfm" and "seed" in init:
        raise ConfigError("init.seed is only valid with kind: random")
    init_seed = None if init.get("seed") is None else _num(init["seed"], "init.seed", int)
    out = _section(d.get("outputs"), "outputs", {"dir"})
    emit = _section(d.get("emit"), "emit", {"traces", "beampattern", "ser", "pd"})
    for k, v in emit.items():
        if not isinstance(v, bool):
            raise ConfigError(f"emit.{k}: expected true/false")
    return RunConfig(
        seed=_num(d.get("seed", 0), "seed", int),
        scenario=scenario,
        users=users,
        channel_file=channel_file,
        solver=solver,
        init=kind,
        init_seed=init_seed,
        outputs=str(out.get("dir", "out")),
        emit=EmitFlags(**emit),
    )


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML: {exc}") from None
    return parse_config(data, p.parent)


def _complex_from(obj, what: str) -> np.ndarray:
    try:
        return np.asarray(obj["re"], dtype=np.float64) + 1j * np.asarray(obj["im"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: expected an object with 're' and 'im' arrays ({exc})") from None


def load_channel_file(path: str) -> dict:
    """Channel (and optionally symbols) from ``.npy`` or a design/channel JSON file."""
    p = Path(path)
    if not p.exists():
        raise MissingArtifactError(f"channel file {p} not found")
    if p.suffix == ".npy":
        return {"channel": np.atleast_2d(np.load(p)).astype(np.complex128)}
    try:
        data = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse channel file {p}: {exc}") from None
    out = {"channel": np.atleast_2d(_complex_from(data.get("channel"), "channel"))}
    if "symbols" in data:
        out["symbols"] = np.atleast_2d(_complex_from(data["symbols"], "symbols"))
        if data.get("symbol_indices") is not None:
            out["symbol_indices"] = np.asarray(data["symbol_indices"], dtype=np.int64)
    return out
