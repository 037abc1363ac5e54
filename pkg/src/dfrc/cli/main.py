"""Command-line harness: ``dfrc {design,beampattern,pd,ser,sweep}``.

Exit codes: 0 success (also when a run reports non-convergence), 2 bad
configuration or arguments, 3 missing artifact, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ..comms import ser_simulate
from ..detect import detection_probability
from ..errors import DfrcError, DomainError, InvalidInputError
from ..model import ArrayConfig, beampattern, lfm_waveform, sinr, sinr_optimal
from ..solver import design
from .artifacts import design_payload, load_design, write_csv, write_json
from .config import ConfigError, MissingArtifactError, RunConfig, load_config

log = logging.getLogger("dfrc")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4
AXES = ("comm_energy", "users", "code_length", "antennas", "budget", "papr")
DEFAULT_GRID = "-89.9:0.1:89.9"
DEFAULT_SNR = "-6:2:14"


# ---------------------------------------------------------------------------
# helpers


def parse_range(text: str) -> np.ndarray:
    """``start:step:stop`` inclusive of ``stop`` (to rounding), or a comma list."""
    try:
        if ":" in text:
            start, step, stop = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return np.round(start + step * np.arange(n), 10)
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise ConfigError(f"cannot parse range {text!r}; use start:step:stop or a comma list") from None


def resolve(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=int(args.seed))
    if getattr(args, "out", None) is not None:
        cfg = replace(cfg, outputs=args.out)
    if getattr(args, "users", None) is not None:
        cfg = cfg.with_users(args.users)
    return cfg


def run_design(cfg: RunConfig):
    spec = cfg.comm_spec()
    res = design(cfg.scenario, spec, cfg.solver, cfg.initial_waveform())
    return spec, res


def _write_design(cfg: RunConfig, spec, res, out: Path) -> list[Path]:
    paths = [write_json(out / "design.json", design_payload(cfg, spec, res))]
    if cfg.emit.traces:
        paths.append(write_csv(out / "sinr_trace.csv", ["outer_iter", "sinr_db"],
                               [(k, v) for k, v in enumerate(res.sinr_trace)]))
    # Wall-clock data varies between runs, so it lives apart from the reproducible artifacts.
    write_json(out / "timing.json", {
        "wall_time_seconds": res.wall_time,
        "cumulative_seconds": res.cumulative_seconds,
    })
    return paths


def _beampattern_rows(x, w, scenario, grid):
    db, norm = beampattern(x, w, grid, scenario)
    return [(a, p, q) for a, p, q in zip(grid, db, norm)]


# ---------------------------------------------------------------------------
# commands


def cmd_design(args) -> int:
    cfg = resolve(args)
    out = Path(cfg.outputs)
    with threadpool_limits(1):
        spec, res = run_design(cfg)
    _write_design(cfg, spec, res, out)
    if cfg.emit.beampattern:
        write_csv(out / "beampattern.csv", ["angle_deg", "power_db", "power_db_normalized"],
                  _beampattern_rows(res.x, res.w, cfg.scenario, parse_range(DEFAULT_GRID)))
    if cfg.emit.ser and spec.n_users:
        _write_ser(res.x, spec, parse_range(DEFAULT_SNR), 2000, cfg.seed, args.threads, out)
    if cfg.emit.pd:
        _write_pd(cfg.scenario, {"design": sinr(res.x, res.w, cfg.scenario)}, [],
                  np.logspace(-8, -1, 71), out)
    status = "converged" if res.converged else "not converged"
    print(f"SINR {res.sinr_db:.4f} dB after {res.outer_iterations} outer iterations ({status}); "
          f"feasible={res.feasible.tolist()} -> {out}")
    return EXIT_OK


def _design_path(args) -> Path:
    if args.design is not None:
        return Path(args.design)
    return Path(args.out if args.out is not None else resolve(args).outputs) / "design.json"


def cmd_beampattern(args) -> int:
    art = load_design(_design_path(args))
    out = Path(args.out) if args.out is not None else Path(art.config.outputs)
    grid = parse_range(args.grid)
    try:
        rows = _beampattern_rows(art.x, art.w, art.config.scenario, grid)
    except InvalidInputError as exc:
        raise ConfigError(f"beampattern grid: {exc}") from None
    write_csv(out / "beampattern.csv", ["angle_deg", "power_db", "power_db_normalized"], rows)
    return EXIT_OK


def _write_pd(scenario, labeled: dict, extra_db, pfa, out: Path) -> Path:
    """Columns: pfa, then one P_D column per labeled SINR (linear values in ``labeled``)."""
    sinrs = dict(labeled)
    for v in extra_db:
        sinrs[f"sinr_{v:g}dB"] = 10.0 ** (v / 10.0)
    names = list(sinrs)
    cols = [np.asarray(detection_probability(sinrs[k], pfa)) for k in names]
    write_csv(out / "pd_sinr.csv", ["label", "sinr_db"], [(k, 10 * np.log10(sinrs[k])) for k in names])
    return write_csv(out / "pd.csv", ["pfa"] + [f"pd_{k}" for k in names],
                     [[p] + [c[i] for c in cols] for i, p in enumerate(pfa)])


def cmd_pd(args) -> int:
    cfg = resolve(args)
    art = load_design(args.design) if args.design is not None else None
    # the LFM baseline is evaluated on the design's scenario unless a config is given
    scenario = art.config.scenario if art is not None and args.config is None else cfg.scenario
    if args.target_power_db is not None:
        scenario = replace(scenario, target_power=10.0 ** (args.target_power_db / 10.0))
    labeled = {"lfm": sinr_optimal(lfm_waveform(scenario), scenario)}
    if art is not None:
        labeled["design"] = sinr(art.x, art.w, replace(art.config.scenario, target_power=scenario.target_power))
    pfa = np.logspace(np.log10(args.pfa_min), np.log10(args.pfa_max), args.pfa_points)
    try:
        _write_pd(scenario, labeled, args.sinr_db or [], pfa, Path(cfg.outputs))
    except DomainError as exc:
        raise ConfigError(f"detection curve: {exc}") from None
    return EXIT_OK


def _write_ser(x, spec, snr, trials, seed, threads, out: Path) -> list[Path]:
    curves = ser_simulate(x, spec, None, snr, trials, seed, workers=threads)
    return [
        write_csv(out / f"ser_user{c.user + 1}.csv", ["snr_db", "ser_synthesized", "ser_ideal"],
                  zip(c.snr_db, c.ser_synthesized, c.ser_ideal))
        for c in curves
    ]


def cmd_ser(args) -> int:
    art = load_design(_design_path(args))
    out = Path(args.out) if args.out is not None else Path(art.config.outputs)
    seed = art.config.seed if args.seed is None else args.seed
    if art.spec.n_users == 0:
        raise ConfigError("design has no communication users")
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    _write_ser(art.x, art.spec, parse_range(args.snr_db), args.trials, seed, args.threads, out)
    return EXIT_OK


def apply_axis(cfg: RunConfig, axis: str, value: str) -> RunConfig:
    """Configuration for one sweep point. Per-user values accept ``a,b,...`` or a single number."""
    def per_user(text, attr):
        vals = [float(t) for t in text.split(",")]
        if len(vals) == 1:
            vals = vals * len(cfg.users)
        if len(vals) != len(cfg.users):
            raise ConfigError(f"{axis}={text}: expected 1 or {len(cfg.users)} values")
        return tuple(replace(u, **{attr: v}) for u, v in zip(cfg.users, vals))

    try:
        if axis == "users":
            return cfg.with_users(int(value))
        if axis == "code_length":
            sc = replace(cfg.scenario, code_length=int(value))
            cfg.solver.check_rho(sc.code_length)
            return replace(cfg, scenario=sc)
        if axis == "antennas":
            nt, nr = (int(t) for t in value.lower().split("x"))
            sc = replace(cfg.scenario, array=ArrayConfig(nt, nr, cfg.scenario.array.spacing_wavelengths))
            return replace(cfg, scenario=sc)
        if axis == "comm_energy":
            return replace(cfg, users=per_user(value, "energy"))
        if axis == "budget":
            return replace(cfg, users=per_user(value, "budget"))
        if axis == "papr":
            rho = None if value.lower() == "cm" else float(value)
            solver = cfg.solver.replace(papr_rho=rho)
            solver.check_rho(cfg.scenario.code_length)
            return replace(cfg, solver=solver)
    except ConfigError:
        raise
    except (ValueError, DfrcError) as exc:
        raise ConfigError(f"invalid value {value!r} for axis {axis}: {exc}") from None
    raise ConfigError(f"unknown axis {axis!r}; valid axes: {', '.join(AXES)}")


def _sweep_point(cfg: RunConfig):
    with threadpool_limits(1):
        spec, res = run_design(cfg)
    ratio = float(np.max(res.mui_per_user / res.budgets)) if spec.n_users else 0.0
    return (res.sinr_db, res.outer_iterations, res.admm_iterations, res.converged,
            bool(np.all(res.feasible)), ratio, res.wall_time)


def cmd_sweep(args) -> int:
    if args.axis not in AXES:
        raise ConfigError(f"unknown axis {args.axis!r}; valid axes: {', '.join(AXES)}")
    base = resolve(args)
    seeds = args.seeds if args.seeds else [base.seed]
    points = [(v, s) for v in args.values for s in seeds]
    cfgs = [replace(apply_axis(base, args.axis, v), seed=s) for v, s in points]
    for c in cfgs:
        c.comm_spec()  # validate every point before spending time on any
    if args.threads > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_sweep_point, cfgs))
    else:
        results = [_sweep_point(c) for c in cfgs]
    header = ["axis", "value", "seed", "sinr_db", "outer_iterations", "admm_iterations",
              "converged", "feasible", "max_mui_ratio"]
    rows = [[args.axis, v, s, *r[:6]] for (v, s), r in zip(points, results)]
    for v in args.values:
        vals = np.array([r[0] for (pv, _), r in zip(points, results) if pv == v])
        rows.append([args.axis, v, "mean", vals.mean(), "", "", "", "", ""])
        rows.append([args.axis, v, "spread", vals.max() - vals.min(), "", "", "", "", ""])
    out = Path(base.outputs)
    write_csv(out / f"sweep_{args.axis}.csv", header, rows)
    write_json(out / f"sweep_{args.axis}_timing.json",
               [{"value": v, "seed": s, "wall_time_seconds": r[6]} for (v, s), r in zip(points, results)])
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfrc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML run configuration (defaults: built-in scenario)")
        sp.add_argument("--seed", type=int, help="top-level seed (overrides the config)")
        sp.add_argument("--out", help="output directory (overrides outputs.dir)")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")

    sp = sub.add_parser("design", help="run the joint design")
    common(sp)
    sp.add_argument("--users", type=int, help="number of communication users (0 = radar only)")
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("beampattern", help="beampattern of a stored design")
    common(sp)
    sp.add_argument("--design", help="design.json (default: <out>/design.json)")
    sp.add_argument("--grid", default=DEFAULT_GRID, help="angles in degrees, start:step:stop")
    sp.set_defaults(func=cmd_beampattern)

    sp = sub.add_parser("pd", help="detection probability versus false-alarm rate")
    common(sp)
    sp.add_argument("--design", help="include the SINR of this design.json")
    sp.add_argument("--sinr-db", type=float, nargs="*", help="additional SINR values (dB)")
    sp.add_argument("--target-power-db", type=float, help="override the target power (dB)")
    sp.add_argument("--pfa-min", type=float, default=1e-8)
    sp.add_argument("--pfa-max", type=float, default=1e-1)
    sp.add_argument("--pfa-points", type=int, default=71)
    sp.set_defaults(func=cmd_pd)

    sp = sub.add_parser("ser", help="Monte-Carlo symbol error rate of a stored design")
    common(sp)
    sp.add_argument("--design", help="design.json (default: <out>/design.json)")
    sp.add_argument("--snr-db", default=DEFAULT_SNR, help="SNR grid, start:step:stop or list")
    sp.add_argument("--trials", type=int, default=2000)
    sp.set_defaults(func=cmd_ser)

    sp = sub.add_parser("sweep", help="repeat the design over one parameter axis")
    common(sp)
    sp.add_argument("--axis", required=True, help=f"one of {', '.join(AXES)}")
    sp.add_argument("--values", nargs="+", required=True,
                    help="axis values; per-user axes take a,b lists, antennas take NTxNR, papr takes rho or cm")
    sp.add_argument("--seeds", type=int, nargs="*", help="seeds (default: the config seed)")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigError, InvalidInputError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
