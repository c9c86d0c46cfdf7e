"""Configuration-driven pipeline runs with reproducible artifacts.

One structured config file (JSON; TOML accepted by extension) drives four
subcommands -- ``steady``, ``certify``, ``evolve``, ``probe`` -- plus ``all``,
which chains them on a shared equilibrium.  Every artifact embeds (or, for
CSV, carries in a sibling ``.manifest.json``) a manifest with the config
hash, package versions, grid, and timing, so a run can be re-identified and
reproduced byte-for-byte apart from the timing block.

Exit codes: 0 success, 2 config error, 3 infeasible certificate,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .certificate import certify_rate, estimate_constants, full_certificate
from .errors import ConfigError, InfeasibleCertificate, NumericalError
from .evolution import EvolutionConfig, cfl_limit, evolve
from .functionals import LyapunovSpec
from .grid import PhaseGrid
from .potential import PhysParams, make_potential
from .probes import (default_decay_datum, default_rough_datum,
                     default_smooth_datum, run_decay_probe, run_hypo_probe)
from .steady_state import solve_pbe

__all__ = [
    "RunConfig",
    "load_config",
    "cmd_steady",
    "cmd_certify",
    "cmd_evolve",
    "cmd_probe",
    "cmd_all",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "potential": {"family": "quadratic", "omega": 1.0},
    "params": {"nu": 1.0, "sigma": 1.0},
    "coupling": 1.0,
    "grid": {"nx": 128, "nv": 128, "Lx": 6.0, "Lv": 6.0},
    "pbe": {"damping": 0.5, "tol": 1e-10, "max_iter": 500},
    "evolution": {
        "dt": 0.01, "T": 10.0, "mode": "linear", "record_every": 5,
        "snapshot_every": None, "functionals": ["norm2", "mass"],
        "h0": "decay", "amplitude": 1.0, "limiter": None,
    },
    "certificate": {
        "eps_grid": None, "gamma_grid": None, "t0": 1.0, "alpha": 0.6,
        "lambda1_fraction": 0.9, "r": 0.25, "optimize_r": False,
        "semigroup": True,
    },
    "probes": {
        "decay": True, "hypo": True, "control": True,
        "decay_dt": 0.01, "decay_T": 10.0, "decay_window": None,
        "hypo_dt": None, "hypo_t0": 0.3, "hypo_window": None,
    },
    "out": "out",
    "seed": 0,
}

_H0_CHOICES = ("decay", "rough", "smooth")


def _check_number(section, key, value, *, positive=False, integer=False):
    path = f"{section}.{key}" if section else key
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{path} must be an integer, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"{path} must be positive, got {value!r}")
    return int(value) if integer else float(value)


def _merge_section(name, defaults, given):
    if not isinstance(given, dict):
        raise ConfigError(f"section '{name}' must be a table/object")
    unknown = set(given) - set(defaults)
    # the potential section carries family-specific coefficients
    if unknown and name != "potential":
        raise ConfigError(f"unknown key '{name}.{sorted(unknown)[0]}'")
    merged = dict(defaults)
    merged.update(given)
    return merged


@dataclass(frozen=True)
class RunConfig:
    """Validated run description: one source of truth per pipeline run."""

    potential: dict
    params: PhysParams
    coupling: float
    grid: PhaseGrid
    pbe: dict
    evolution: dict
    certificate: dict
    probes: dict
    out: str
    seed: int
    raw: dict = field(repr=False, default_factory=dict)
    config_bytes: bytes = field(repr=False, default=b"")
    negative_control: bool = False

    def config_hash(self) -> str:
        return hashlib.sha256(self.config_bytes).hexdigest()


def _validate(raw: dict, config_bytes: bytes) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a table/object")
    unknown = set(raw) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config section '{sorted(unknown)[0]}'")

    pot_spec = _merge_section("potential", _DEFAULTS["potential"],
                              raw.get("potential", {}))
    family = pot_spec.get("family")
    if not isinstance(family, str):
        raise ConfigError("potential.family must be a string")
    coeffs = {k: _check_number("potential", k, v)
              for k, v in pot_spec.items() if k != "family"}
    try:
        make_potential(family, **coeffs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"potential: {exc}") from exc

    par = _merge_section("params", _DEFAULTS["params"], raw.get("params", {}))
    nu = _check_number("params", "nu", par["nu"], positive=True)
    sigma = _check_number("params", "sigma", par["sigma"], positive=True)
    params = PhysParams(nu=nu, sigma=sigma)

    coupling = _check_number("", "coupling", raw.get("coupling", _DEFAULTS["coupling"]))

    g = _merge_section("grid", _DEFAULTS["grid"], raw.get("grid", {}))
    nx = _check_number("grid", "nx", g["nx"], positive=True, integer=True)
    nv = _check_number("grid", "nv", g["nv"], positive=True, integer=True)
    Lx = _check_number("grid", "Lx", g["Lx"], positive=True)
    Lv = _check_number("grid", "Lv", g["Lv"], positive=True)
    try:
        grid = PhaseGrid(nx=nx, nv=nv, Lx=Lx, Lv=Lv)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    pbe = _merge_section("pbe", _DEFAULTS["pbe"], raw.get("pbe", {}))
    pbe["damping"] = _check_number("pbe", "damping", pbe["damping"], positive=True)
    if pbe["damping"] > 1.0:
        raise ConfigError(f"pbe.damping must lie in (0, 1], got {pbe['damping']}")
    pbe["tol"] = _check_number("pbe", "tol", pbe["tol"], positive=True)
    pbe["max_iter"] = _check_number("pbe", "max_iter", pbe["max_iter"],
                                    positive=True, integer=True)

    evo = _merge_section("evolution", _DEFAULTS["evolution"], raw.get("evolution", {}))
    evo["dt"] = _check_number("evolution", "dt", evo["dt"], positive=True)
    evo["T"] = _check_number("evolution", "T", evo["T"], positive=True)
    if evo["mode"] not in ("linear", "nonlinear"):
        raise ConfigError(f"evolution.mode must be 'linear' or 'nonlinear', got {evo['mode']!r}")
    evo["record_every"] = _check_number("evolution", "record_every",
                                        evo["record_every"], positive=True, integer=True)
    if evo["snapshot_every"] is not None:
        evo["snapshot_every"] = _check_number("evolution", "snapshot_every",
                                              evo["snapshot_every"], positive=True, integer=True)
    if (not isinstance(evo["functionals"], (list, tuple))
            or not all(isinstance(s, str) for s in evo["functionals"])):
        raise ConfigError("evolution.functionals must be a list of names")
    if evo["h0"] not in _H0_CHOICES:
        raise ConfigError(f"evolution.h0 must be one of {_H0_CHOICES}, got {evo['h0']!r}")
    evo["amplitude"] = _check_number("evolution", "amplitude", evo["amplitude"],
                                     positive=True)

    cert = _merge_section("certificate", _DEFAULTS["certificate"],
                          raw.get("certificate", {}))
    for key in ("t0", "alpha", "lambda1_fraction", "r"):
        cert[key] = _check_number("certificate", key, cert[key], positive=True)
    if not 0.0 < cert["lambda1_fraction"] < 1.0:
        raise ConfigError("certificate.lambda1_fraction must lie in (0, 1), "
                          f"got {cert['lambda1_fraction']}")
    for key in ("eps_grid", "gamma_grid"):
        if cert[key] is not None:
            if not isinstance(cert[key], (list, tuple)) or len(cert[key]) == 0:
                raise ConfigError(f"certificate.{key} must be a non-empty list")
            cert[key] = [_check_number("certificate", key, v, positive=True)
                         for v in cert[key]]
    cert["optimize_r"] = bool(cert["optimize_r"])
    cert["semigroup"] = bool(cert["semigroup"])

    prb = _merge_section("probes", _DEFAULTS["probes"], raw.get("probes", {}))
    for key in ("decay", "hypo", "control"):
        prb[key] = bool(prb[key])
    prb["decay_dt"] = _check_number("probes", "decay_dt", prb["decay_dt"], positive=True)
    prb["decay_T"] = _check_number("probes", "decay_T", prb["decay_T"], positive=True)
    prb["hypo_t0"] = _check_number("probes", "hypo_t0", prb["hypo_t0"], positive=True)
    if prb["hypo_dt"] is not None:
        prb["hypo_dt"] = _check_number("probes", "hypo_dt", prb["hypo_dt"], positive=True)
    for key in ("decay_window", "hypo_window"):
        if prb[key] is not None:
            win = prb[key]
            if (not isinstance(win, (list, tuple)) or len(win) != 2
                    or not all(isinstance(w, (int, float)) for w in win)
                    or not win[0] < win[1]):
                raise ConfigError(f"probes.{key} must be [t_lo, t_hi] with t_lo < t_hi")
            prb[key] = [float(win[0]), float(win[1])]

    out = raw.get("out", _DEFAULTS["out"])
    if not isinstance(out, str) or not out:
        raise ConfigError("out must be a non-empty directory path")
    seed = raw.get("seed", _DEFAULTS["seed"])
    seed = _check_number("", "seed", seed, integer=True)
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")

    return RunConfig(potential={"family": family, **coeffs}, params=params,
                     coupling=coupling, grid=grid, pbe=pbe, evolution=evo,
                     certificate=cert, probes=prb, out=out, seed=seed,
                     raw=raw, config_bytes=config_bytes)


def load_config(path=None, *, overrides=None) -> RunConfig:
    """Parse and validate a config file (JSON, or TOML by extension).

    With no path, the built-in defaults apply.  ``overrides`` is a dict of
    {section-or-key: value} merged on top (CLI flags land here); the config
    hash always reflects the bytes actually consumed.
    """
    if path is None:
        raw = {}
        config_bytes = b""
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        config_bytes = p.read_bytes()
        if p.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # pragma: no cover - py310 fallback
                import tomli as tomllib
            try:
                raw = tomllib.loads(config_bytes.decode("utf-8"))
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"TOML parse error in {path}: {exc}") from exc
        else:
            try:
                raw = json.loads(config_bytes.decode("utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"JSON parse error in {path}: {exc}") from exc

    if overrides:
        raw = dict(raw)
        for key, value in overrides.items():
            if isinstance(value, dict):
                section = dict(raw.get(key, {}))
                section.update(value)
                raw[key] = section
            else:
                raw[key] = value

    if not config_bytes:
        config_bytes = json.dumps(raw, sort_keys=True).encode("utf-8")
    return _validate(raw, config_bytes)


# ---------------------------------------------------------------------------
# manifests and serialization
# ---------------------------------------------------------------------------

def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _manifest(config: RunConfig, wall_clock_s: float) -> dict:
    return {
        "config_sha256": config.config_hash(),
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "artifact": __version__,
        },
        "grid": {"nx": config.grid.nx, "nv": config.grid.nv,
                 "Lx": config.grid.Lx, "Lv": config.grid.Lv},
        "seed": config.seed,
        "timing": {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_clock_s": round(float(wall_clock_s), 6),
        },
    }


def _write_json(path: Path, payload: dict) -> str:
    text = json.dumps(_jsonify(payload), sort_keys=True, indent=2)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")
    return str(path)


def _solve_steady(config: RunConfig, *, check_second_init=False):
    pot = make_potential(config.potential["family"],
                         **{k: v for k, v in config.potential.items() if k != "family"})
    return solve_pbe(config.grid, pot, config.params,
                     theta_relax=config.pbe["damping"], tol=config.pbe["tol"],
                     max_iter=int(config.pbe["max_iter"]), coupling=config.coupling,
                     check_second_init=check_second_init)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_steady(config: RunConfig) -> list[str]:
    """Solve the steady field equation; write steady_state.csv + summary."""
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    eq = _solve_steady(config, check_second_init=config.coupling != 0.0)
    wall = time.perf_counter() - t0

    csv_path = outdir / "steady_state.csv"
    eq.to_csv(csv_path)
    manifest = _manifest(config, wall)
    written = [str(csv_path)]
    written.append(_write_json(outdir / "steady_state.manifest.json",
                               {"files": ["steady_state.csv"], "manifest": manifest}))
    written.append(_write_json(outdir / "steady_summary.json",
                               {**eq.summary(), "manifest": manifest}))
    return written


def cmd_certify(config: RunConfig) -> list[str]:
    """Run the certification pipeline; write certificate.json.

    On an infeasible (eps, gamma) search the margin report is still written
    before the InfeasibleCertificate propagates to the exit-code handler.
    """
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cert_cfg = config.certificate
    t0 = time.perf_counter()
    eq = _solve_steady(config)
    try:
        if cert_cfg["semigroup"]:
            bundle = full_certificate(
                eq, config.params, alpha=cert_cfg["alpha"],
                lambda1_fraction=cert_cfg["lambda1_fraction"], r=cert_cfg["r"],
                t0=cert_cfg["t0"], seed=config.seed,
                eps_grid=cert_cfg["eps_grid"], gamma_grid=cert_cfg["gamma_grid"],
                optimize_r=cert_cfg["optimize_r"])
            payload = {
                "constants": bundle["constants"].as_dict(),
                "certificate": bundle["certificate"].as_dict(),
                "hypo": bundle["hypo"],
                "thresholds": bundle["thresholds"],
                "semigroup": bundle["semigroup"],
            }
        else:
            constants = estimate_constants(eq, config.params, seed=config.seed)
            report = certify_rate(constants, config.params,
                                  eps_grid=cert_cfg["eps_grid"],
                                  gamma_grid=cert_cfg["gamma_grid"])
            payload = {"constants": constants.as_dict(),
                       "certificate": report.as_dict()}
    except InfeasibleCertificate as exc:
        wall = time.perf_counter() - t0
        _write_json(outdir / "certificate.json",
                    {"error": str(exc), "feasible": False,
                     "margins": getattr(exc, "report", None),
                     "manifest": _manifest(config, wall)})
        raise
    wall = time.perf_counter() - t0
    payload["manifest"] = _manifest(config, wall)
    return [_write_json(outdir / "certificate.json", payload)]


def _initial_datum(config: RunConfig, eq):
    kind = config.evolution["h0"]
    if kind == "rough":
        h0 = default_rough_datum(eq)
    elif kind == "smooth":
        h0 = default_smooth_datum(eq)
    else:
        h0 = default_decay_datum(eq)
    return config.evolution["amplitude"] * h0


def cmd_evolve(config: RunConfig) -> list[str]:
    """Integrate the configured run; write trajectory.csv (+ snapshots)."""
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    evo = config.evolution
    t0 = time.perf_counter()
    eq = _solve_steady(config)
    h0 = _initial_datum(config, eq)

    # fail fast (exit 4) on an inadmissible step before any work is done
    bound = cfl_limit(eq, config.params, h0=h0)
    if evo["dt"] > bound * (1.0 + 1e-12):
        raise NumericalError(
            f"dt={evo['dt']:.3e} violates the CFL bound {bound:.3e}; "
            "no steps were taken")

    needs_lyapunov = bool({"sP", "E", "h_entropy"} & set(evo["functionals"]))
    lyapunov = LyapunovSpec(gamma=1.0, eps=0.1) if needs_lyapunov else None
    run_cfg = EvolutionConfig(
        dt=evo["dt"], t_final=evo["T"], mode=evo["mode"],
        record_every=int(evo["record_every"]),
        snapshot_every=None if evo["snapshot_every"] is None else int(evo["snapshot_every"]),
        functionals=tuple(evo["functionals"]), limiter=evo["limiter"])
    traj = evolve(h0, run_cfg, eq, config.params, lyapunov=lyapunov)
    wall = time.perf_counter() - t0

    csv_path = outdir / "trajectory.csv"
    traj.to_csv(csv_path)
    files = [str(csv_path)]
    files.extend(traj.write_snapshots(outdir))
    manifest = _manifest(config, wall)
    files.append(_write_json(
        outdir / "trajectory.manifest.json",
        {"files": [Path(f).name for f in files], "n_steps": run_cfg.n_steps,
         "wall_time_stepping_s": round(traj.wall_time, 6), "manifest": manifest}))
    return files


def cmd_probe(config: RunConfig) -> list[str]:
    """Run the selected probes against an inline certificate; write report."""
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    prb = config.probes
    t0 = time.perf_counter()
    eq = _solve_steady(config)
    constants = estimate_constants(eq, config.params, seed=config.seed)
    report = certify_rate(constants, config.params,
                          eps_grid=config.certificate["eps_grid"],
                          gamma_grid=config.certificate["gamma_grid"])

    payload = {
        "certificate": {"lambda": report.lam, "eps": report.eps,
                        "gamma": report.gamma},
        "negative_control": config.negative_control,
    }
    if prb["decay"]:
        scale = 10.0 if config.negative_control else 1.0
        window = prb["decay_window"]
        payload["decay"] = run_decay_probe(
            eq, config.params, report, dt=prb["decay_dt"], t_final=prb["decay_T"],
            window=None if window is None else tuple(window),
            lambda_scale=scale)
        if config.negative_control:
            payload["decay"]["expected"] = "fail"
    if prb["hypo"]:
        window = prb["hypo_window"]
        payload["hypo"] = run_hypo_probe(
            eq, config.params, dt=prb["hypo_dt"], t0=prb["hypo_t0"],
            window=None if window is None else tuple(window))
        if prb["control"]:
            payload["hypo_control"] = run_hypo_probe(
                eq, config.params, dt=prb["hypo_dt"], t0=prb["hypo_t0"],
                window=None if window is None else tuple(window), rough=False)
    wall = time.perf_counter() - t0
    payload["manifest"] = _manifest(config, wall)
    return [_write_json(outdir / "probe_report.json", payload)]


def cmd_all(config: RunConfig) -> list[str]:
    """steady + certify + evolve + probe with one shared output directory."""
    written = []
    for fn in (cmd_steady, cmd_certify, cmd_evolve, cmd_probe):
        written.extend(fn(config))
    return written


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "steady": cmd_steady,
    "certify": cmd_certify,
    "evolve": cmd_evolve,
    "probe": cmd_probe,
    "all": cmd_all,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpfp",
        description="Phase-space simulation and decay certification pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        p.add_argument("--config", default=None, metavar="PATH",
                       help="JSON (or .toml) run configuration")
        p.add_argument("--out", default=None, metavar="DIR",
                       help="output directory (overrides config)")
        p.add_argument("--seed", default=None, type=int, metavar="U64",
                       help="seed override for probe randomization")
        p.add_argument("--coupling-off", action="store_true",
                       help="drop the self-consistent field (coupling = 0)")
        p.add_argument("--negative-control", action="store_true",
                       help="run falsifiability controls (expected to fail)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        overrides = {}
        if args.out is not None:
            overrides["out"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.coupling_off:
            overrides["coupling"] = 0.0
        config = load_config(args.config, overrides=overrides)
        if args.negative_control:
            config = dataclasses.replace(config, negative_control=True)
        written = _COMMANDS[args.command](config)
    except ConfigError as exc:
        json.dump({"error": str(exc), "kind": "config"}, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return EXIT_CONFIG
    except InfeasibleCertificate as exc:
        json.dump({"error": str(exc), "kind": "infeasible",
                   "margins": _jsonify(getattr(exc, "report", None))},
                  sys.stderr, indent=2)
        sys.stderr.write("\n")
        return EXIT_INFEASIBLE
    except (NumericalError, RuntimeError) as exc:
        # non-converged iterations surface as plain RuntimeError from the
        # steady solver; both classes mean "the numbers went bad", exit 4
        json.dump({"error": str(exc), "kind": "numerical"}, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return EXIT_NUMERICAL
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
