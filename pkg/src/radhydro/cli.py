"""Batch command line front end.

Six subcommands wire a single JSON configuration document to the library
modules and serialize their outputs into an output directory:

* ``symbol``          -- eigenvalues and Hurwitz chain over a frequency grid
* ``semigroup-decay`` -- whole-space semigroup norms and fitted slopes
* ``simulate``        -- nonlinear box run: trajectory plus final snapshot
* ``lp``              -- dyadic decomposition report on a seeded field
* ``energy``          -- analysis constants and energy functionals
* ``verify-rates``    -- full decay-rate report suite (rates.json)

Invocation: ``radhydro <command> --config <path> --out <dir> [--seed N]``.
The configuration is parsed strictly (unknown keys are an error) and the
resolved document is written back next to the results, together with a
run manifest (config hash, code version, wall time).  All floats are
formatted with 17 significant digits, so a given config and seed produce
byte-identical CSV/JSON outputs.  Exit codes: 0 success, 1 validation
failure, 2 numerical failure (aborted run, failed rate report).
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, decay, energy, lp, solver, symbol
from .lp import ResolutionError
from .model import (
    ConstraintError,
    Grid,
    PhysicalParams,
    PositivityError,
    derive_constants,
)
from .solver import BlowupError, QuadratureError, RunConfig

__all__ = [
    "CliError",
    "main",
    "read_snapshot",
]


class CliError(Exception):
    """Configuration or invocation problem (maps to exit code 1)."""


# ---------------------------------------------------------------------------
# configuration document
# ---------------------------------------------------------------------------

_TWO_PI = 2.0 * math.pi

#: full schema with defaults; unknown sections or keys are rejected.
#: the b(theta) closure is not configurable here and stays theta^4.
_DEFAULTS = {
    "params": {
        "mu": 1.0, "lambda": 0.0, "kappa": 1.0, "c_light": 1.0,
        "l_rad": 1.0, "sigma_a": 1.0, "sigma_s": 1.0,
    },
    "grid": {"dim": 2, "n": 64, "l_box": _TWO_PI},
    "run": {
        "dt": 0.025, "t_end": 50.0, "epsilon": 1e-3, "profile": "gaussian",
        "seed": 0, "cadence": 40, "dealias": True, "linear_only": False,
    },
    "fit": {
        "t_min": 10.0, "t_max": 1.0e4, "n_times": 25,
        "m_list": [0, 1, 2, 3, 4], "tolerance": 0.05, "rtol": 1e-6,
        "include_kappa_zero": True,
    },
    "symbol": {"rho_min": 1e-2, "rho_max": 1e3, "n_rho": 25},
}


def _load_document(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CliError("config document must be a JSON object")
    return doc


def resolve_config(doc):
    """Merge a user document over the defaults, strictly."""
    unknown = sorted(set(doc) - set(_DEFAULTS))
    if unknown:
        raise CliError(f"unknown config sections: {unknown}")
    resolved = {}
    for section, defaults in _DEFAULTS.items():
        given = doc.get(section, {})
        if not isinstance(given, dict):
            raise CliError(f"config section '{section}' must be an object")
        bad = sorted(set(given) - set(defaults))
        if bad:
            raise CliError(f"unknown keys in config section '{section}': {bad}")
        merged = dict(defaults)
        merged.update(given)
        resolved[section] = merged
    return resolved


def _physical_params(cfg):
    sec = cfg["params"]
    return PhysicalParams(mu=sec["mu"], lam=sec["lambda"],
                          kappa=sec["kappa"], c_light=sec["c_light"],
                          l_rad=sec["l_rad"], sigma_a=sec["sigma_a"],
                          sigma_s=sec["sigma_s"])


def _run_config(cfg):
    grid, run = cfg["grid"], cfg["run"]
    return RunConfig(params=_physical_params(cfg), dt=run["dt"],
                     t_end=run["t_end"], dim=grid["dim"], n=grid["n"],
                     l_box=grid["l_box"], profile=run["profile"],
                     epsilon=run["epsilon"], seed=run["seed"],
                     cadence=run["cadence"], dealias=run["dealias"],
                     linear_only=run["linear_only"])


def _fit_times(cfg):
    sec = cfg["fit"]
    n = int(sec["n_times"])
    if n < 2:
        raise CliError("fit.n_times must be at least 2")
    if not 0.0 < sec["t_min"] < sec["t_max"]:
        raise CliError("fit times must satisfy 0 < t_min < t_max")
    return np.geomspace(float(sec["t_min"]), float(sec["t_max"]), n)


# ---------------------------------------------------------------------------
# deterministic serialization (17 significant digits, LF endings)
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _json_text(obj):
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise CliError("non-finite number in JSON output")
        return "%.17g" % x
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not all(isinstance(k, str) for k in obj):
            raise CliError("JSON object keys must be strings")
        items = (f"{json.dumps(k)}: {_json_text(obj[k])}"
                 for k in sorted(obj))
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    raise CliError(f"cannot serialize {type(obj).__name__} to JSON")


def _write_json(path, obj):
    data = (_json_text(obj) + "\n").encode("utf-8")
    Path(path).write_bytes(data)
    return data


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def _write_snapshot(path, state, t):
    grid = state.grid
    names = ["rho"] + [f"u{i}" for i in range(grid.dim)] + ["theta", "j0"]
    header = {"dim": grid.dim, "N": grid.n, "L_box": grid.l_box,
              "fields": names, "time": float(t)}
    blocks = [state.rho] + [state.u[i] for i in range(grid.dim)] \
        + [state.theta, state.j0]
    payload = np.concatenate(
        [np.asarray(b, dtype="<f8").ravel() for b in blocks])
    with open(path, "wb") as fh:
        fh.write(_json_text(header).encode("utf-8") + b"\n")
        fh.write(payload.tobytes())


def read_snapshot(path):
    """Read a field snapshot back as (header dict, {name: array})."""
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode("utf-8"))
    flat = np.frombuffer(raw[nl + 1:], dtype="<f8")
    shape = (header["N"],) * header["dim"]
    count = int(np.prod(shape))
    if flat.size != count * len(header["fields"]):
        raise CliError("snapshot payload does not match its header")
    fields = {}
    for i, name in enumerate(header["fields"]):
        fields[name] = flat[i * count:(i + 1) * count].reshape(shape).copy()
    return header, fields


# ---------------------------------------------------------------------------
# command bodies
# ---------------------------------------------------------------------------

def _cmd_symbol(cfg, out):
    consts = derive_constants(_physical_params(cfg))
    sec = cfg["symbol"]
    if not 0.0 < sec["rho_min"] < sec["rho_max"]:
        raise CliError("symbol frequencies must satisfy 0 < rho_min < rho_max")
    rho_grid = np.concatenate(
        [[0.0], np.geomspace(float(sec["rho_min"]), float(sec["rho_max"]),
                             int(sec["n_rho"]))])
    eig_rows, hur_rows = [], []
    for rho in rho_grid:
        rep = symbol.eigenvalues(consts, float(rho))
        lam = np.asarray(rep.eigenvalues)
        lam = lam[np.lexsort((lam.imag, lam.real))]
        eig_rows.append([rho] + [p for z in lam for p in (z.real, z.imag)])
        ch = rep.hurwitz  # the chain is defined on rho > 0 only
        if ch is not None:
            hur_rows.append([rho, ch.a_1, ch.a_2, ch.a_3, ch.a_4,
                             ch.a21, ch.a22, ch.a23, rep.abscissa])
    _write_csv(out / "eigenvalues.csv",
               ["rho"] + [f"{p}_lambda_{i}" for i in range(1, 5)
                          for p in ("re", "im")],
               eig_rows)
    _write_csv(out / "hurwitz.csv",
               ["rho", "a_1", "a_2", "a_3", "a_4",
                "a21", "a22", "a23", "abscissa"],
               hur_rows)
    return 0


_SEMIGROUP_SPECS = (
    ("m0", (0, None, False)),
    ("m1", (1, None, False)),
    ("m2", (2, None, False)),
    ("xi0", (0, "xi", False)),
    ("dt_hydro", (0, "hydro", True)),
    ("dt_thermo", (0, "thermo", True)),
)


def _cmd_semigroup_decay(cfg, out):
    consts = derive_constants(_physical_params(cfg))
    times = _fit_times(cfg)
    profile = solver.reference_profile(consts)
    specs = [s for _, s in _SEMIGROUP_SPECS]
    table = solver.semigroup_norm_table(consts, profile, specs, times,
                                        rtol=float(cfg["fit"]["rtol"]))
    header = ["t"] + [name for name, _ in _SEMIGROUP_SPECS]
    rows = [[t] + [table[j, i] for j in range(len(specs))]
            for i, t in enumerate(times)]
    _write_csv(out / "semigroup_norms.csv", header, rows)
    window = (max(10.0, float(times[0])), float(times[-1]))
    slopes = {name: decay.fit_decay(times, table[j], window)
              for j, (name, _) in enumerate(_SEMIGROUP_SPECS)}
    _write_json(out / "slopes.json", slopes)
    return 0


def _cmd_simulate(cfg, out):
    traj = solver.run(_run_config(cfg))
    header = ["time", "grad0", "grad1", "grad2", "grad3", "grad4", "h4",
              "theta_l2", "xi_l2", "low_band", "high_band",
              "min_density", "min_temperature", "mass_mean"]
    h4 = traj.h4_norms
    rows = []
    for i, t in enumerate(traj.times):
        rows.append([t] + list(traj.grad_norms[i]) + [h4[i],
                    traj.theta_norms[i], traj.xi_norms[i],
                    traj.low_band[i], traj.high_band[i],
                    traj.min_density[i], traj.min_temperature[i],
                    traj.mass_means[i]])
    _write_csv(out / "trajectory.csv", header, rows)
    _write_snapshot(out / "final_state.bin", traj.final_state,
                    traj.times[-1])
    if traj.aborted:
        _write_json(out / "abort.json",
                    {"time": traj.abort_time, "reason": traj.abort_reason})
        click.echo(f"numerical failure: run aborted at t = "
                   f"{traj.abort_time:g} ({traj.abort_reason})", err=True)
        return 2
    return 0


def _cmd_lp(cfg, out):
    grid = Grid(int(cfg["grid"]["dim"]), int(cfg["grid"]["n"]),
                float(cfg["grid"]["l_box"]))
    consts = derive_constants(_physical_params(cfg))
    decomp = lp.build_decomposition(grid, consts)
    rng = np.random.default_rng(int(cfg["run"]["seed"]))
    f = rng.standard_normal(grid.shape)
    f -= f.mean()
    shells = [lp.dyadic_project(decomp, f, k)
              for k in range(decomp.k_min, decomp.k_max + 1)]
    recon_err = float(np.max(np.abs(f - sum(shells))))
    f_sq = grid.l2_norm(f) ** 2
    plancherel = abs(sum(grid.l2_norm(s) ** 2 for s in shells) - f_sq)
    f_hat = grid.fft(f)
    report = {
        "k_min": decomp.k_min, "k_max": decomp.k_max,
        "k0": decomp.k0, "k1": decomp.k1,
        "r0": decomp.r0, "R0": decomp.R0,
        "reconstruction_error": recon_err,
        "plancherel_defect": plancherel,
    }
    for s in (0, 1, 2):
        ratio = lp.besov_norm(decomp, f, s) \
            / math.sqrt(grid.seminorm_sq(f_hat, s))
        report[f"besov_ratio_s{s}"] = ratio
    _write_json(out / "lp_report.json", report)
    _write_csv(out / "shells.csv", ["k", "shell_l2"],
               [[k, grid.l2_norm(s)]
                for k, s in zip(range(decomp.k_min, decomp.k_max + 1),
                                shells)])
    return 0


def _cmd_energy(cfg, out):
    consts = derive_constants(_physical_params(cfg))
    grid = Grid(int(cfg["grid"]["dim"]), int(cfg["grid"]["n"]),
                float(cfg["grid"]["l_box"]))
    decomp = lp.build_decomposition(grid, consts)
    ac = energy.select_constants(consts, decomp)
    state = solver.init_perturbation(_run_config(cfg))
    rep = energy.energy_report(state, ac, decomp)
    _write_json(out / "energy_constants.json", {
        "beta1": ac.beta1, "beta2": ac.beta2, "beta3": ac.beta3,
        "k0": ac.k0, "k1": ac.k1, "r0": ac.r0, "R0": ac.R0,
        "c1": ac.c1, "c2": ac.c2, "c3": ac.c3, "c4": ac.c4,
        "c5_const": ac.c5_const, "c5_quad": ac.c5_quad, "c6": ac.c6,
        "low_freq_rate": ac.low_freq_rate,
        "equiv_high": ac.equiv_high,
        "equiv_low_modes": ac.equiv_low_modes,
        "equiv_low_state": ac.equiv_low_state,
    })
    _write_json(out / "energy_report.json",
                {"Theta_norm": rep.Theta_norm, "Xi_norm": rep.Xi_norm})
    _write_csv(out / "energy_shells.csv", ["k", "L_shell", "H_shell"],
               [[k, l, h] for k, l, h
                in zip(rep.shell_ks, rep.shell_L, rep.shell_H)])
    _write_csv(out / "low_modes.csv", ["rho_freq", "L_low"],
               [[x, v] for x, v in zip(rep.low_xi, rep.low_L)])
    return 0


def _cmd_verify_rates(cfg, out):
    consts = derive_constants(_physical_params(cfg))
    sec = cfg["fit"]
    reports = decay.verify_rates(
        consts, m_list=tuple(int(m) for m in sec["m_list"]),
        t_grid=_fit_times(cfg), tolerance=float(sec["tolerance"]),
        rtol=float(sec["rtol"]),
        include_kappa_zero=bool(sec["include_kappa_zero"]))
    _write_json(out / "rates.json", [r.record() for r in reports])
    failed = [r.quantity for r in reports if not r.passed]
    if failed:
        click.echo("numerical failure: rate reports failed: "
                   + ", ".join(failed), err=True)
        return 2
    return 0


_COMMANDS = {
    "symbol": _cmd_symbol,
    "semigroup-decay": _cmd_semigroup_decay,
    "simulate": _cmd_simulate,
    "lp": _cmd_lp,
    "energy": _cmd_energy,
    "verify-rates": _cmd_verify_rates,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _execute(command, config_path, out_dir, seed):
    start = time.perf_counter()
    try:
        resolved = resolve_config(_load_document(config_path))
        if seed is not None:
            resolved["run"]["seed"] = int(seed)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        config_bytes = _write_json(out / "resolved_config.json", resolved)
        code = _COMMANDS[command](resolved, out)
    except (CliError, ValueError, ConstraintError, ResolutionError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (PositivityError, BlowupError, QuadratureError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2
    _write_json(out / "run_manifest.json", {
        "command": command,
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "version": __version__,
        "wall_time_seconds": time.perf_counter() - start,
    })
    return code


@click.group()
def cli():
    """Radiation-hydrodynamics batch driver."""


def _register(name, help_text):
    @cli.command(name, help=help_text)
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False),
                  help="JSON configuration document.")
    @click.option("--out", "out_dir", required=True,
                  type=click.Path(file_okay=False),
                  help="Output directory (created if missing).")
    @click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None,
                  help="Override run.seed from the config.")
    def command(config_path, out_dir, seed, _name=name):
        return _execute(_name, config_path, out_dir, seed)
    return command


_register("symbol", "Eigenvalues and Hurwitz chain over a frequency grid.")
_register("semigroup-decay", "Semigroup norm table and fitted slopes.")
_register("simulate", "Nonlinear box run: trajectory and final snapshot.")
_register("lp", "Dyadic decomposition report on a seeded random field.")
_register("energy", "Analysis constants and energy functionals.")
_register("verify-rates", "Decay-rate report suite against claimed targets.")


def main(argv=None):
    """Entry point; returns the process exit code."""
    try:
        code = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    return 0 if code is None else int(code)
