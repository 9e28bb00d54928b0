"""Command-line entry point: config parsing, the wave -> spectrum ->
experiment pipeline, artifact persistence, and report emission.

Configuration is sectioned key=value text, e.g.

    [model]
    symbol = bbm
    [wave]
    m = 2
    a = 0.05
    [numerics]
    N = 128
    k_count = 64

Unknown sections or keys are rejected.  Exit codes: 0 ok, 2 numeric
failure, 64 usage error, 65 bad data file.  MODULON_OUT overrides the
output directory.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, ModulonError
from .symbols import ModelSpec, NonlinearitySpec, parse_symbol
from .waves import (TravelingWave, load_wave, refine_newton, save_wave,
                    small_amplitude_wave)
from .bloch import (fit_band, scan_bloch, spectrum_summary,
                    unstable_eigenfunction, assemble_bloch)
from .semigroup import dual_propagator_norm, probe_growth, trichotomy_split
from .evolve import (EvolutionState, lift_wave, orbital_distance,
                     record_conserved, step, stable_dt, ConservedLedger,
                     _evolver_for, _lift_eigenfunction)
from .fields import PeriodicField, csv_float, l2_norm
from .experiments import run_localized, run_multiperiodic, threshold_sweep
from .waves import resample

EXIT_OK = 0
EXIT_NUMERIC = 2
EXIT_USAGE = 64
EXIT_BAD_DATA = 65


_SCHEMA = {
    "model": {"symbol": str, "nonlinearity": str, "p": float},
    "wave": {"a": float, "b": float, "kappa": float, "m": float},
    "numerics": {"N": int, "k_count": int, "Q": int, "q_max": int},
    "evolve": {"dt": float, "t_end": float, "snap_every": int,
               "delta": float, "integrator": str},
    "experiment": {"kind": str, "deltas": str, "theta0": float,
                   "t_max": float, "Q": int, "n_nodes": int},
    "sweep": {"family": str, "grid": str, "a": float, "m_exp": float,
              "N": int, "k_count": int},
    "output": {"dir": str},
}

_RANGES = {
    ("wave", "a"): (-0.1, 0.1),
    ("wave", "b"): (-0.1, 0.1),
    ("wave", "kappa"): (1e-6, 64.0),
    ("wave", "m"): (1e-6, 64.0),
    ("numerics", "N"): (16, 1024),
    ("numerics", "k_count"): (16, 4096),
    ("numerics", "Q"): (2, 4096),
    ("numerics", "q_max"): (1, 64),
    ("evolve", "dt"): (1e-9, 10.0),
    ("evolve", "t_end"): (0.0, 1e9),
    ("experiment", "theta0"): (0.0, 1e6),
}


class RunConfig:
    """Validated configuration with typed accessors."""

    def __init__(self, values: dict, text: str):
        self.values = values
        self.sha = hashlib.sha256(text.encode()).hexdigest()[:16]

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        v = self.get(section, key)
        if v is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return v


def parse_config(path: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str          # keys are case-sensitive (N vs n)
    try:
        with open(path) as fh:
            text = fh.read()
        cp.read_string(text)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    values = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            typ = _SCHEMA[section][key]
            try:
                val = typ(raw) if typ is not str else raw.strip()
            except ValueError as exc:
                raise ConfigError(
                    f"key [{section}] {key} = {raw!r} is not a {typ.__name__}") from exc
            rng = _RANGES.get((section, key))
            if rng is not None and not (rng[0] <= val <= rng[1]):
                raise ConfigError(
                    f"key [{section}] {key} = {val} outside [{rng[0]}, {rng[1]}]")
            values[section][key] = val
    return RunConfig(values, text)


def build_model(cfg: RunConfig) -> ModelSpec:
    sym = parse_symbol(cfg.require("model", "symbol"))
    family = "bbm" if sym.kind == "bbm_linear" else "kdv_type"
    nl_name = cfg.get("model", "nonlinearity")
    if nl_name is None:
        nl_name = "quadratic"
    p = cfg.get("model", "p", 2.0)
    nl = NonlinearitySpec(nl_name, p=p)
    kappa = cfg.get("wave", "kappa")
    if kappa is None:
        kappa = cfg.get("wave", "m", 1.0)
    return ModelSpec(family, sym, nl, kappa=float(kappa))


def out_dir(cfg: RunConfig) -> str:
    d = os.environ.get("MODULON_OUT") or cfg.get("output", "dir", ".")
    os.makedirs(d, exist_ok=True)
    return d


def provenance(cfg: RunConfig) -> dict:
    return {"modulon": __version__, "config_sha256": cfg.sha}


def _write_json(obj: dict, path: str, cfg: RunConfig):
    obj = dict(obj)
    obj["provenance"] = provenance(cfg)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)


def _csv_header(cfg: RunConfig) -> str:
    return f"# modulon={__version__} config=sha256:{cfg.sha}\n"


# -- subcommands ----------------------------------------------------------------


def cmd_wave(cfg: RunConfig, args) -> int:
    model = build_model(cfg)
    a = cfg.require("wave", "a")
    b = cfg.get("wave", "b", 0.0)
    N = cfg.get("numerics", "N", 128)
    seed = small_amplitude_wave(model, a=a, b=b, N=N)
    if b != 0.0 and model.symbol.kind != "whitham":
        wave = refine_newton(model, seed, fix_amplitude=a, fix_mean=b)
    else:
        wave = refine_newton(model, seed, fix_amplitude=a,
                             fix_a_const=seed.a_const)
    base = os.path.join(out_dir(cfg), args.name)
    sidecar = save_wave(wave, base)
    sidecar["provenance"] = provenance(cfg)
    with open(base + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    print(f"wave converged: c = {wave.c:.12g}, residual = {wave.residual:.3e} "
          f"-> {base}.fld")
    return EXIT_OK


def _load_wave_checked(path: str) -> TravelingWave:
    try:
        return load_wave(path)
    except (OSError, KeyError, ValueError) as exc:
        raise BadData(f"cannot load wave {path}: {exc}") from exc


class BadData(Exception):
    pass


def cmd_spectrum(cfg: RunConfig, args) -> int:
    wave = _load_wave_checked(args.wave)
    model = wave.model
    N = cfg.get("numerics", "N", 128)
    k_count = cfg.get("numerics", "k_count", 64)
    sp = scan_bloch(model, wave, k_count=k_count, N=N, jobs=args.jobs)
    d = out_dir(cfg)
    csv_path = os.path.join(d, args.name + ".csv")
    with open(csv_path, "w") as fh:
        fh.write(_csv_header(cfg))
    with open(csv_path, "a") as fh:
        fh.write("k,re_lambda,im_lambda\n")
        for k, ev in zip(sp.k_grid, sp.eigenvalues):
            order = np.lexsort((-ev.imag, -ev.real))
            for lam in ev[order][:20]:
                fh.write(f"{csv_float(k)},{csv_float(lam.real)},"
                         f"{csv_float(lam.imag)}\n")
    curve = None
    pq = None
    if sp.lambda0 > sp.threshold:
        try:
            curve = fit_band(sp)
            q_max = cfg.get("numerics", "q_max", 8)
            from .experiments import _pick_rational_k0
            pq = _pick_rational_k0(sp, curve, q_max)
        except ModulonError:
            pass
    summary = spectrum_summary(sp, curve, pq)
    _write_json(summary, os.path.join(d, args.name + ".json"), cfg)
    print(f"lambda0 = {sp.lambda0:.6e} at k0 = {sp.k0:.6f}; "
          f"{len(sp.bands)} unstable band(s) -> {csv_path}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    wave = _load_wave_checked(args.wave)
    model = wave.model
    N = cfg.get("numerics", "N", 96)
    k_count = cfg.get("numerics", "k_count", 32)
    sp = scan_bloch(model, wave, k_count=k_count, N=N, jobs=args.jobs)
    k_probe = sp.k0 if sp.lambda0 > sp.threshold else 0.25
    op = assemble_bloch(model, wave, k_probe, N)
    d = out_dir(cfg)
    rows = []
    verdicts = {"k": k_probe, "lambda0": sp.lambda0}
    ok = True
    m_exp = 2.0 if model.symbol.kind != "fractional" else model.symbol.m
    for s in (-1.0, 0.0, m_exp / 2.0):
        probe = probe_growth(op, s)
        slope = probe.log_slope()
        for t, nrm in zip(probe.t_grid, probe.norms):
            rows.append((k_probe, s, t, nrm))
        passed = sp.lambda0 - 0.05 <= slope <= sp.lambda0 + 0.05
        ok = ok and passed
        verdicts[f"slope_s{s:g}"] = slope
        verdicts[f"pass_s{s:g}"] = passed
    dual = dual_propagator_norm(op, 1.0)
    verdicts["dual_norm_t1"] = dual
    split = trichotomy_split(op)
    verdicts["trichotomy"] = {"dim_Eu": split.dim_Eu, "dim_Es": split.dim_Es,
                              "dim_Ec": split.dim_Ec,
                              "n_minus_L": split.n_minus_L}
    verdicts["pass"] = bool(ok)
    csv_path = os.path.join(d, args.name + ".csv")
    with open(csv_path, "w") as fh:
        fh.write(_csv_header(cfg))
        fh.write("k,s,t,norm\n")
        for k, s, t, nrm in rows:
            fh.write(f"{csv_float(k)},{csv_float(s)},{csv_float(t)},"
                     f"{csv_float(nrm)}\n")
    _write_json(verdicts, os.path.join(d, args.name + ".json"), cfg)
    print(f"semigroup verdicts: pass = {ok} (lambda0 = {sp.lambda0:.3e})")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_evolve(cfg: RunConfig, args) -> int:
    wave = _load_wave_checked(args.wave)
    model = wave.model
    N = cfg.get("numerics", "N", 96)
    q = 1
    delta = cfg.get("evolve", "delta", 0.0)
    u0 = lift_wave(wave, q, N)
    if delta:
        sp = scan_bloch(model, wave, k_count=32, N=N)
        if sp.lambda0 <= sp.threshold:
            print("wave is stable; evolving the unperturbed wave")
        else:
            q_max = cfg.get("numerics", "q_max", 8)
            curve = fit_band(sp)
            from .experiments import _pick_rational_k0
            p, q = _pick_rational_k0(sp, curve, q_max)
            lam, v = unstable_eigenfunction(model, wave, p / q, N)
            Nb = q * N
            wl = _lift_eigenfunction(resample(v, N), p, q, Nb)
            u1 = PeriodicField(q, Nb, wl + np.conj(wl[::-1]), real=True)
            u1 = u1 * (1.0 / l2_norm(u1))
            u0 = lift_wave(wave, q, Nb) + delta * u1
    dt = cfg.get("evolve", "dt") or stable_dt(model, wave.c, u0.q, u0.N)
    t_end = cfg.get("evolve", "t_end", 10.0)
    snap_every = cfg.get("evolve", "snap_every", 10)
    integrator = cfg.get("evolve", "integrator")
    state = EvolutionState(model, wave, u0, 0.0, dt, integrator=integrator)
    ev = _evolver_for(state)
    uc_big = lift_wave(wave, u0.q, u0.N)
    ledger = ConservedLedger()
    record_conserved(ledger, state)
    rows = [(0.0, l2_norm(u0 - uc_big),
             orbital_distance(u0, wave.profile)[0])]
    n_steps = int(np.ceil(t_end / dt))
    for i in range(n_steps):
        state = step(state, ev)
        if (i + 1) % snap_every == 0 or i == n_steps - 1:
            record_conserved(ledger, state)
            rows.append((state.t, l2_norm(state.field - uc_big),
                         orbital_distance(state.field, wave.profile)[0]))
    d = out_dir(cfg)
    csv_path = os.path.join(d, args.name + ".csv")
    md, pd_, ed = (ledger.mass_drift(), ledger.momentum_drift(),
                   ledger.energy_drift())
    with open(csv_path, "w") as fh:
        fh.write(_csv_header(cfg))
        fh.write("t,l2_perturbation,orbital_distance,mass_drift,"
                 "momentum_drift,energy_drift\n")
        for (t, pert, orb), m_, p_, e_ in zip(rows, md, pd_, ed):
            fh.write(f"{csv_float(t)},{csv_float(pert)},{csv_float(orb)},"
                     f"{csv_float(m_)},{csv_float(p_)},{csv_float(e_)}\n")
    print(f"evolved to t = {state.t:.4g}; max |energy drift| = "
          f"{float(np.max(np.abs(ed))):.2e} -> {csv_path}")
    return EXIT_OK


def cmd_experiment(cfg: RunConfig, args) -> int:
    wave = _load_wave_checked(args.wave)
    model = wave.model
    N = cfg.get("numerics", "N", 128)
    k_count = cfg.get("numerics", "k_count", 64)
    kind = cfg.get("experiment", "kind", "multiperiodic")
    deltas = [float(x) for x in
              cfg.get("experiment", "deltas", "1e-3,1e-4,1e-5").split(",")]
    theta0 = cfg.get("experiment", "theta0")
    sp = scan_bloch(model, wave, k_count=k_count, N=N, jobs=args.jobs)
    d = out_dir(cfg)
    if kind == "multiperiodic":
        rep = run_multiperiodic(model, wave, sp, deltas, theta0=theta0,
                                q_max=cfg.get("numerics", "q_max", 8),
                                N_op=N)
    elif kind == "localized":
        curve = fit_band(sp)
        Q = cfg.get("experiment", "Q", 64)
        rep = run_localized(model, wave, sp, curve, Q, deltas, theta0=theta0,
                            n_nodes=cfg.get("experiment", "n_nodes"),
                            N_op=N, enforce_envelope=False)
    else:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    obj = rep.to_dict()
    obj["provenance"] = provenance(cfg)
    path = os.path.join(d, args.name + ".json")
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
    for i, run in enumerate(rep.runs):
        csv_path = os.path.join(d, f"{args.name}_delta{i}.csv")
        with open(csv_path, "w") as fh:
            fh.write(_csv_header(cfg))
        with open(csv_path, "a") as fh:
            fh.write("t,l2_perturbation,orbital_distance\n")
            for t, p_, o in zip(run.times, run.pert_norm, run.orbital):
                fh.write(f"{csv_float(t)},{csv_float(p_)},{csv_float(o)}\n")
    print(f"experiment {kind}: passes = {rep.passes} -> {path}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    family = cfg.require("sweep", "family")
    grid = [float(x) for x in cfg.require("sweep", "grid").split(",")]
    res = threshold_sweep(
        family, grid,
        a=cfg.get("sweep", "a", 0.02),
        m_exp=cfg.get("sweep", "m_exp", 2.0),
        N=cfg.get("sweep", "N", 128),
        k_count=cfg.get("sweep", "k_count", 64),
        jobs=args.jobs)
    d = out_dir(cfg)
    path = os.path.join(d, args.name + ".json")
    obj = res.to_dict()
    obj["provenance"] = provenance(cfg)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
    print(f"sweep {family}: boundary = {res.boundary} -> {path}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    d = out_dir(cfg)
    names = sorted(fn for fn in os.listdir(d) if fn.endswith(".json"))
    if not names:
        print(f"no reports found in {d}")
        return EXIT_OK
    for fn in names:
        with open(os.path.join(d, fn)) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError:
                continue
        line = [fn]
        for key in ("lambda0", "boundary", "reference_rate"):
            if key in obj and obj[key] is not None:
                line.append(f"{key}={obj[key]:.6g}")
        if "passes" in obj and obj["passes"]:
            line.append(f"passes={obj['passes']}")
        if "regression" in obj and obj["regression"]:
            line.append(f"r2={obj['regression']['r2']:.4f}")
        print("  ".join(line))
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="modulon",
        description="Periodic traveling waves of dispersive models, their "
                    "Bloch stability, and nonlinear instability experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, needs_wave in [("wave", False), ("spectrum", True),
                             ("verify", True), ("evolve", True),
                             ("experiment", True), ("sweep", False),
                             ("report", False)]:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the run configuration")
        p.add_argument("--name", default=name,
                       help="basename for output artifacts")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker pool size for k-scans and sweeps")
        if needs_wave:
            p.add_argument("--wave", required=True,
                           help="basename of a persisted wave (no extension)")
    args = ap.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        handler = {
            "wave": cmd_wave, "spectrum": cmd_spectrum, "verify": cmd_verify,
            "evolve": cmd_evolve, "experiment": cmd_experiment,
            "sweep": cmd_sweep, "report": cmd_report,
        }[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BadData as exc:
        print(f"bad data file: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA
    except ModulonError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
