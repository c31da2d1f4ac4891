"""Command line entry point: ``surfnema {simulate,verify,energy-audit,terms-eval}``.

Run files are INI-like: ``[section]`` headers followed by ``key = value``
lines; ``#`` and ``;`` start comments.  Every key is optional except
``solver.kind``; unknown sections or keys are errors.  See README.md for
the full key list and defaults.

Exit codes: 0 success, 1 invalid input, 2 run aborted (blow-up or a
non-converged projection), 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diagnostics import dissipation_audit, verify_lemmas
from .errors import BlowUp, ParseError, ProjectionNonConvergence, TooFewSamples, ValidationError
from .geometry import EmbeddedTorus, FlatTorus, SurfaceKind, build_chart
from .io import format_float, read_energy_csv, state_fields, write_energy_csv, write_snema, write_vtk
from .qtensor import thermotropic_roots
from .solvers import (
    SimState,
    random_q,
    run_flat_be2d,
    run_gradient_flow,
    run_stationary_nemato,
    taylor_green,
    uniform_uniaxial,
    zero_state,
)
from .terms import ModelParams, Phi, bending, elastic, thermotropic

__all__ = ["RunConfig", "SolverConfig", "InitConfig", "parse_config", "parse_config_text", "build_initial_state",
           "main"]

log = logging.getLogger("surfnema")

SOLVERS = ("flat_be2d", "gradient_flow", "stationary_nemato")
SOLVER_MODES = {
    "flat_be2d": ("full", "linear_jaumann", "isotropic"),
    "gradient_flow": ("fixed_beta", "free_beta"),
    "stationary_nemato": ("full",),
}
VELOCITY_INITS = ("zero", "taylor_green")
Q_INITS = ("zero", "random", "uniaxial")
SNAPSHOT_FORMATS = ("vtk", "snema", "both", "none")
TERMS = {"elastic": elastic, "thermotropic": thermotropic, "bending": bending}

_float, _int, _str, _bool = float, int, str, "bool"

# section -> key -> type
SCHEMA = {
    "surface": {"kind": _str, "N1": _int, "N2": _int, "scheme": _str, "R": _float, "r": _float,
                "P1": _float, "P2": _float},
    "model": {"L": _float, "a": _float, "b": _float, "c": _float, "kappa": _float, "H0": _float, "M": _float,
              "upsilon": _float, "xi": _float, "rho": _float, "phi": _str,
              "L2": _float, "L3": _float, "L4": _float, "L5": _float, "L6": _float},
    "solver": {"kind": _str, "dt": _float, "n_steps": _int, "sample_every": _int, "snapshot_every": _int,
               "mode": _str, "beta0": _float, "tol": _float, "proj_tol": _float, "proj_maxiter": _int},
    "init": {"velocity": _str, "velocity_amplitude": _float, "q": _str, "q_amplitude": _float, "q_modes": _int,
             "s": _float, "angle": _float, "beta": _float, "seed": _int},
    "output": {"directory": _str, "snapshots": _str},
    "run": {"strict": _bool},
}

_RESERVED = ("L2", "L3", "L4", "L5", "L6")


@dataclass(frozen=True)
class SolverConfig:
    kind: str
    dt: float = 1e-3
    n_steps: int = 100
    sample_every: int = 1
    snapshot_every: int = 0
    mode: str | None = None
    beta0: float | None = None
    tol: float | None = None
    proj_tol: float = 1e-10
    proj_maxiter: int = 500


@dataclass(frozen=True)
class InitConfig:
    velocity: str = "zero"
    velocity_amplitude: float = 1.0
    q: str = "zero"
    q_amplitude: float = 0.1
    q_modes: int = 3
    s: float | None = None
    angle: float = 0.0
    beta: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    surface: SurfaceKind
    grid_shape: tuple
    scheme: str
    model: ModelParams
    solver: SolverConfig
    init: InitConfig = field(default_factory=InitConfig)
    output: Path = Path("results")
    snapshots: str = "vtk"
    strict: bool = False


# ------------------------------------------------------------------ parsing


def _convert(kind, raw, lineno, key):
    try:
        if kind == _bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is _int:
            return int(raw)
        if kind is _float:
            x = float(raw)
            if not math.isfinite(x):
                raise ValueError(raw)
            return x
        return raw
    except ValueError:
        tname = {_int: "integer", _float: "finite number", _bool: "boolean"}[kind]
        raise ParseError(lineno, f"{key}: expected {tname}, got {raw!r}") from None


def _read_sections(text):
    data = {s: {} for s in SCHEMA}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ParseError(lineno, f"malformed section header {body!r}")
            section = body[1:-1].strip()
            if section not in SCHEMA:
                raise ParseError(lineno, f"unknown section [{section}]")
            continue
        if "=" not in body:
            raise ParseError(lineno, f"expected 'key = value', got {body!r}")
        if section is None:
            raise ParseError(lineno, "key outside of any section")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA[section]:
            raise ParseError(lineno, f"unknown key {key!r} in [{section}]")
        if key in data[section]:
            raise ParseError(lineno, f"duplicate key {key!r} in [{section}]")
        if not raw:
            raise ParseError(lineno, f"{key}: empty value")
        data[section][key] = _convert(SCHEMA[section][key], raw, lineno, key)
    return data


def _choice(value, options, key):
    if value not in options:
        raise ValidationError(key, f"must be one of {', '.join(options)}")
    return value


def _positive(value, key, strict=True):
    if value is None:
        return value
    if value <= 0 if strict else value < 0:
        raise ValidationError(key, "must be positive" if strict else "must be non-negative")
    return value


def _surface(sec):
    kind = sec.get("kind", "flat")
    if kind in ("flat", "FlatTorus"):
        extra = set(sec) & {"R", "r"}
        if extra:
            raise ValidationError(f"surface.{sorted(extra)[0]}", "only valid for an embedded torus")
        surf = FlatTorus(_positive(sec.get("P1", 2 * np.pi), "surface.P1"),
                         _positive(sec.get("P2", 2 * np.pi), "surface.P2"))
    elif kind in ("embedded", "EmbeddedTorus", "torus"):
        extra = set(sec) & {"P1", "P2"}
        if extra:
            raise ValidationError(f"surface.{sorted(extra)[0]}", "only valid for a flat torus")
        R, r = _positive(sec.get("R", 2.0), "surface.R"), _positive(sec.get("r", 1.0), "surface.r")
        if r >= R:
            raise ValidationError("surface.r", "must be smaller than R (no self-intersection)")
        surf = EmbeddedTorus(R, r)
    else:
        raise ValidationError("surface.kind", "must be flat or embedded")
    n1 = sec.get("N1", 64)
    n2 = sec.get("N2", n1)
    for key, n in (("surface.N1", n1), ("surface.N2", n2)):
        if n < 8:
            raise ValidationError(key, "must be at least 8")
    scheme = _choice(sec.get("scheme", "spectral"), ("spectral", "fd4"), "surface.scheme")
    return surf, (n1, n2), scheme


def _model(sec, strict):
    for key in _RESERVED:
        if key in sec:
            raise ValidationError(f"model.{key}", "only one-constant elasticity (L) is supported")
    kw = {k: v for k, v in sec.items() if k != "phi"}
    if "phi" in sec:
        kw["phi"] = Phi(_choice(sec["phi"].lower(), ("material", "jaumann"), "model.phi"))
    xi = kw.get("xi", 0.0)
    if abs(xi) >= 1.5 and strict:
        raise ValidationError("model.xi", "|xi| must be below 3/2 (anisotropic metric loses definiteness)")
    for key in ("L", "kappa", "M", "upsilon"):
        if kw.get(key, 0.0) < 0:
            raise ValidationError(f"model.{key}", "must be non-negative")
    for key in ("c", "rho"):
        if key in kw and kw[key] <= 0:
            raise ValidationError(f"model.{key}", "must be positive")
    return ModelParams(**kw)


def _solver(sec, surf, model):
    if "kind" not in sec:
        raise ValidationError("solver.kind", "is required")
    kind = _choice(sec["kind"], SOLVERS, "solver.kind")
    if kind == "flat_be2d" and not isinstance(surf, FlatTorus):
        raise ValidationError("solver.kind", "flat_be2d requires surface.kind = flat")
    if kind == "flat_be2d" and abs(model.xi) >= 1.5:
        raise ValidationError("model.xi", "flat_be2d requires |xi| < 3/2")
    if kind == "stationary_nemato" and model.xi != 0:
        raise ValidationError("model.xi", "stationary_nemato requires xi = 0")
    mode = _choice(sec.get("mode", SOLVER_MODES[kind][0]), SOLVER_MODES[kind], "solver.mode")
    kw = dict(sec, kind=kind, mode=mode)
    _positive(kw.get("dt", 1.0), "solver.dt")
    for key in ("n_steps", "sample_every", "proj_maxiter"):
        if key in kw and kw[key] < 1:
            raise ValidationError(f"solver.{key}", "must be at least 1")
    if kw.get("snapshot_every", 0) < 0:
        raise ValidationError("solver.snapshot_every", "must be non-negative")
    _positive(kw.get("tol"), "solver.tol")
    _positive(kw.get("proj_tol"), "solver.proj_tol")
    return SolverConfig(**kw)


def _init(sec, solver):
    kw = dict(sec)
    _choice(kw.get("velocity", "zero"), VELOCITY_INITS, "init.velocity")
    _choice(kw.get("q", "zero"), Q_INITS, "init.q")
    if solver.kind == "gradient_flow" and kw.get("velocity", "zero") != "zero":
        raise ValidationError("init.velocity", "gradient_flow has no velocity")
    if kw.get("q_modes", 1) < 1:
        raise ValidationError("init.q_modes", "must be at least 1")
    if kw.get("seed", 0) < 0:
        raise ValidationError("init.seed", "must be non-negative")
    return InitConfig(**kw)


def parse_config_text(text, strict=False, base=None) -> RunConfig:
    data = _read_sections(text)
    strict = bool(data["run"].get("strict", False)) or strict
    surf, grid, scheme = _surface(data["surface"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore" if strict else "default", RuntimeWarning)
        try:
            model = _model(data["model"], strict)
        except ValueError as err:
            if isinstance(err, ValidationError):
                raise
            raise ValidationError("model", str(err)) from None
    solver = _solver(data["solver"], surf, model)
    init = _init(data["init"], solver)
    out = Path(data["output"].get("directory", "results"))
    if base is not None and not out.is_absolute():
        out = Path(base) / out
    snaps = _choice(data["output"].get("snapshots", "vtk"), SNAPSHOT_FORMATS, "output.snapshots")
    return RunConfig(surf, grid, scheme, model, solver, init, out, snaps, strict)


def parse_config(path, strict=False) -> RunConfig:
    """Read and validate a run file; relative output paths stay relative to the cwd."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError("config", f"{path} does not exist")
    return parse_config_text(path.read_text(), strict=strict)


# --------------------------------------------------------------- orchestration


def _default_beta(cfg: RunConfig):
    if cfg.init.beta is not None:
        return cfg.init.beta
    if cfg.solver.beta0 is not None:
        return cfg.solver.beta0
    if cfg.solver.kind == "flat_be2d":
        return 0.0
    m = cfg.model
    try:
        return thermotropic_roots(m.a, m.b, m.c).beta0_stable
    except ValueError:
        return 0.0


def build_initial_state(cfg: RunConfig, chart) -> SimState:
    ini = cfg.init
    beta = 0.0 if cfg.solver.kind == "flat_be2d" else _default_beta(cfg)
    state = zero_state(chart, beta)
    if ini.velocity == "taylor_green":
        state.v = taylor_green(chart, ini.velocity_amplitude)
    if ini.q == "random":
        state.q = random_q(chart, seed=ini.seed, amplitude=ini.q_amplitude, modes=ini.q_modes)
    elif ini.q == "uniaxial":
        m = cfg.model
        s = ini.s if ini.s is not None else thermotropic_roots(m.a, m.b, m.c).S_star
        state.q, b = uniform_uniaxial(chart, s, ini.angle)
        if cfg.solver.kind != "flat_be2d" and ini.beta is None and cfg.solver.beta0 is None:
            state.beta = b
    return state


def run(cfg: RunConfig):
    chart = build_chart(cfg.surface, cfg.grid_shape, cfg.scheme)
    state = build_initial_state(cfg, chart)
    s = cfg.solver
    common = dict(sample_every=s.sample_every, snapshot_every=s.snapshot_every)
    if s.kind == "flat_be2d":
        rec = run_flat_be2d(chart, cfg.model, state, s.dt, s.n_steps, mode=s.mode, **common)
    elif s.kind == "gradient_flow":
        rec = run_gradient_flow(chart, cfg.model, (state.q, state.beta), s.dt, s.n_steps, mode=s.mode,
                                beta0=s.beta0, tol=s.tol, **common)
    else:
        rec = run_stationary_nemato(chart, cfg.model, state, s.dt, s.n_steps, proj_tol=s.proj_tol,
                                    proj_maxiter=s.proj_maxiter, **common)
    return chart, rec


def _write_snapshot(out, stem, chart, fields, fmt, title):
    paths = []
    if fmt in ("vtk", "both"):
        paths.append(write_vtk(out / f"{stem}.vtk", chart, fields, title=title))
    if fmt in ("snema", "both"):
        paths.append(write_snema(out / f"{stem}.snema", fields))
    return paths


def _cmd_simulate(args):
    cfg = parse_config(args.config, strict=args.strict)
    if args.out:
        cfg = replace(cfg, output=Path(args.out))
    cfg.output.mkdir(parents=True, exist_ok=True)
    log.info("running %s on %s, %d steps", cfg.solver.kind, type(cfg.surface).__name__, cfg.solver.n_steps)
    chart, rec = run(cfg)
    csv_path = write_energy_csv(cfg.output / "energy.csv", rec.reports)
    if cfg.snapshots != "none":
        for i, snap in enumerate(rec.snapshots):
            _write_snapshot(cfg.output, f"snapshot_{i:05d}", chart, state_fields(chart, snap), cfg.snapshots,
                            f"t={format_float(snap.t)}")
    print(f"wrote {csv_path} ({len(rec.reports)} samples, {len(rec.snapshots)} snapshots)")
    print(f"steps={rec.meta.get('steps')} max_rel_increase={format_float(rec.meta.get('max_rel_increase', 0.0))}")
    return 0


def _cmd_verify(args):
    report = verify_lemmas(args.seed, args.samples)
    for line in report.lines():
        print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.txt").write_text("\n".join(report.lines()) + "\n")
    return 0 if report.all_passed else 3


def _cmd_energy_audit(args):
    reports = read_energy_csv(args.trajectory)
    summary = dissipation_audit(reports)
    print("t,audit_residual")
    for t, r in zip(summary.times, summary.residuals):
        print(f"{format_float(t)},{format_float(r)}")
    print(f"samples={len(reports)} max_residual={format_float(summary.max_residual)} "
          f"max_relative_increase={format_float(summary.max_relative_increase)}")
    if args.max_residual is not None and summary.max_residual > args.max_residual:
        print(f"FAIL: residual exceeds {args.max_residual:g}")
        return 3
    return 0


def _cmd_terms_eval(args):
    cfg = parse_config(args.config, strict=args.strict)
    chart = build_chart(cfg.surface, cfg.grid_shape, cfg.scheme)
    state = build_initial_state(cfg, chart)
    Q = state.Q(chart)
    fn = TERMS[args.term]
    bundle = fn(chart, cfg.model) if args.term == "bending" else fn(chart, cfg.model, Q=Q)
    n = tuple(chart.grid_shape)
    fields = {"Q": Q}
    for name in ("Sigma", "F", "H"):
        val = getattr(bundle, name)
        if val is not None:
            fields[name] = np.broadcast_to(np.asarray(val, dtype=float), n + np.shape(val)[2:])
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    fmt = "both" if cfg.snapshots == "none" else cfg.snapshots
    paths = _write_snapshot(out, f"term_{args.term}", chart, fields, fmt, f"{bundle.name} term")
    print(f"{bundle.name}: energy={format_float(bundle.energy or 0.0)} -> " + ", ".join(map(str, paths)))
    return 0


def _parser():
    p = argparse.ArgumentParser(prog="surfnema", description="Surface nematodynamics kernels and simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a solver from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (overrides [output] directory)")
    s.add_argument("--strict", action="store_true", help="turn parameter warnings into errors")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("verify", help="run the identity and lemma checks")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_verify)

    s = sub.add_parser("energy-audit", help="dissipation audit of an energy CSV")
    s.add_argument("--trajectory", required=True)
    s.add_argument("--max-residual", type=float, default=None)
    s.set_defaults(func=_cmd_energy_audit)

    s = sub.add_parser("terms-eval", help="evaluate one term on the configured initial state")
    s.add_argument("--config", required=True)
    s.add_argument("--term", choices=sorted(TERMS), default="elastic")
    s.add_argument("--out")
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=_cmd_terms_eval)
    return p


def _check_threads():
    raw = os.environ.get("SURFNEMA_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError("SURFNEMA_THREADS", f"must be a non-negative integer, got {raw!r}") from None
    if n < 0:
        raise ValidationError("SURFNEMA_THREADS", "must be a non-negative integer")
    return n


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _check_threads()
        return args.func(args)
    except (ParseError, ValidationError, TooFewSamples, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (BlowUp, ProjectionNonConvergence) as err:
        print(f"aborted: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
