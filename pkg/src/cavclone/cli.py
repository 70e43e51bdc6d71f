"""Command-line front end.

    cavclone run          one protocol run, JSON report
    cavclone sweep STUDY  universality | scaling | decoherence, CSV table
    cavclone validate     built-in cross-checks
    cavclone feasibility  timing budget for experimental numbers

``run`` and ``sweep`` read an optional flat ``key = value`` config file
(``#`` starts a comment); command-line flags override it.  Angles are in
units of pi unless ``--radians`` is given.

Exit codes: 0 success, 1 validation failure, 2 usage/config error,
3 physical-regime violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .analysis import (
    DEGRADATION_NOTE,
    FeasibilityBudget,
    bloch_grid,
    clone_report,
    decoherence_study,
    dispersive_scaling_study,
    effective_report,
    feasibility_report,
    stage_times,
    universality_sweep,
)
from .checks import DEFAULT_SEED, run_checks
from .dynamics.hamiltonians import PhysicalParams, RegimeWarning
from .dynamics.integrate import IntegrationError
from .protocol import (
    InputQubit,
    ProtocolParams,
    RegimeError,
    parameter_set,
    run_protocol_full,
    run_protocol_lindblad,
)

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_REGIME = 0, 1, 2, 3
NORM_TOL = 1e-9
TIERS = ("effective", "full", "lindblad")
ANGLE_KEYS = ("phase_A", "theta1", "theta2", "phase_B", "phase_C", "theta3", "theta4")
INPUT_POLAR = ("theta", "phi")
INPUT_AMPLITUDES = ("alpha_re", "alpha_im", "beta_re", "beta_im")

# key -> parser for values read from a config file or a flag
FIELDS = {
    "tier": str,
    "theta": float,
    "phi": float,
    "alpha_re": float,
    "alpha_im": float,
    "beta_re": float,
    "beta_im": float,
    "parameter_set": str,
    **{k: float for k in ANGLE_KEYS},
    "g": float,
    "delta_over_g": float,
    "n_max": int,
    "kappa_over_lambda": float,
    "n_th": float,
    "rel_tol": float,
    "radians": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    "output": str,
    "seed": int,
}

log = logging.getLogger("cavclone")


class ConfigError(ValueError):
    """Malformed or incomplete configuration; the message names the field."""


def parse_config(text: str) -> dict:
    """Parse flat ``key = value`` text with ``#`` comments into typed values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in FIELDS:
            raise ConfigError(f"line {lineno}: unknown field {key!r}")
        try:
            out[key] = FIELDS[key](value)
        except ValueError:
            raise ConfigError(f"field {key!r}: cannot parse {value!r}") from None
    return out


@dataclass(frozen=True)
class RunConfig:
    tier: str
    qubit: InputQubit
    physical: PhysicalParams
    params: ProtocolParams
    rel_tol: float = 1e-9
    output: str | None = None
    seed: int = DEFAULT_SEED


def _angle(value: float, radians: bool) -> float:
    return value if radians else value * math.pi


def _resolve_qubit(cfg: dict, radians: bool) -> InputQubit:
    polar = [k for k in INPUT_POLAR if k in cfg]
    amps = [k for k in INPUT_AMPLITUDES if k in cfg]
    if polar and amps:
        raise ConfigError(f"input: give either theta/phi or amplitudes, not both ({polar + amps})")
    if polar:
        if "theta" not in cfg:
            raise ConfigError("theta: required with phi")
        return InputQubit.from_bloch(_angle(cfg["theta"], radians), _angle(cfg.get("phi", 0.0), radians))
    if amps:
        # absent real or imaginary parts are zero; the norm check catches omissions
        a = complex(cfg.get("alpha_re", 0.0), cfg.get("alpha_im", 0.0))
        b = complex(cfg.get("beta_re", 0.0), cfg.get("beta_im", 0.0))
        n = abs(a) ** 2 + abs(b) ** 2
        if not math.isfinite(n) or abs(n - 1.0) > NORM_TOL:
            raise ConfigError(f"alpha/beta: |alpha|^2 + |beta|^2 = {n!r} is not normalized within {NORM_TOL:g}")
        s = math.sqrt(n)
        return InputQubit(a / s, b / s)
    raise ConfigError("input: missing (give theta[/phi] or alpha_*/beta_* amplitudes)")


def _resolve_params(cfg: dict, radians: bool) -> ProtocolParams:
    name = cfg.get("parameter_set", "solver")
    if name == "explicit":
        missing = [k for k in ANGLE_KEYS if k not in cfg]
        if missing:
            raise ConfigError(f"{missing[0]}: required for parameter_set = explicit")
        try:
            return ProtocolParams(*(_angle(cfg[k], radians) for k in ANGLE_KEYS), label="explicit")
        except ValueError as exc:
            raise ConfigError(f"parameter_set: {exc}") from None
    stray = [k for k in ANGLE_KEYS if k in cfg]
    if stray:
        raise ConfigError(f"{stray[0]}: explicit angles need parameter_set = explicit")
    try:
        return parameter_set(name)
    except ValueError:
        raise ConfigError(f"parameter_set: unknown value {name!r} (solver, paper-printed, explicit)") from None


def _positive(cfg: dict, key: str, default: float, allow_zero: bool = False) -> float:
    v = cfg.get(key, default)
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(f"{key}: must be {'non-negative' if allow_zero else 'positive'}, got {v}")
    return v


def resolve_run_config(cfg: dict) -> RunConfig:
    """Validate merged config values and build a :class:`RunConfig`."""
    tier = cfg.get("tier")
    if tier is None:
        raise ConfigError("tier: missing (effective, full or lindblad)")
    if tier not in TIERS:
        raise ConfigError(f"tier: unknown value {tier!r} (effective, full or lindblad)")
    radians = bool(cfg.get("radians", False))
    qubit = _resolve_qubit(cfg, radians)
    params = _resolve_params(cfg, radians)
    g = _positive(cfg, "g", 1.0)
    ratio = _positive(cfg, "delta_over_g", 20.0)
    n_max = cfg.get("n_max", 3)
    if n_max < 1:
        raise ConfigError(f"n_max: must be >= 1, got {n_max}")
    k_over_l = _positive(cfg, "kappa_over_lambda", 0.0, allow_zero=True)
    n_th = _positive(cfg, "n_th", 0.0, allow_zero=True)
    rel_tol = _positive(cfg, "rel_tol", 1e-9)
    if not 1e-13 < rel_tol < 1e-3:
        raise ConfigError(f"rel_tol: must lie in (1e-13, 1e-3), got {rel_tol}")
    lam = g / ratio
    physical = PhysicalParams(g=g, delta=ratio * g, n_max=n_max, kappa=k_over_l * lam, n_th=n_th)
    return RunConfig(tier, qubit, physical, params, rel_tol, cfg.get("output"), cfg.get("seed", DEFAULT_SEED))


# ---------------------------------------------------------------------------
# report emission


def run_report(rc: RunConfig) -> dict:
    """Execute one run and return the flat JSON report."""
    lam = rc.physical.lam()
    notes: list[str] = []
    if rc.tier == "effective":
        rep = effective_report(rc.qubit, rc.params, lam)
    elif rc.tier == "full":
        run = run_protocol_full(rc.qubit, rc.physical, rc.params, rc.rel_tol)
        rep = clone_report(rc.qubit, run.state, leakage=run.leakage, stage_times=run.stage_times)
        if run.regime_warning:
            notes.append(run.regime_warning)
    else:
        run = run_protocol_lindblad(rc.qubit, rc.physical, rc.params, rc.rel_tol)
        rep = clone_report(rc.qubit, run.state, leakage=run.leakage, stage_times=run.stage_times)
        notes.extend(run.notes)
        if run.regime_warning:
            notes.append(run.regime_warning)
    return {
        "tier": rc.tier,
        "parameter_set": rc.params.label,
        "angles": rc.params.angles(),
        "fidelity_clone2": rep.fidelity_clone2,
        "fidelity_clone3": rep.fidelity_clone3,
        "target_overlap": rep.target_overlap,
        "leakage": rep.leakage,
        "stage_times_s": rep.stage_times or stage_times(rc.params, lam),
        "total_time_s": sum((rep.stage_times or stage_times(rc.params, lam)).values()),
        "seed": rc.seed,
        "notes": notes,
    }


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.14e}"
    return str(v)


def write_csv(header: dict, columns: list[str], rows: list[list], stream) -> None:
    """``# key=value`` metadata lines, then an RFC 4180 table."""
    for k, v in header.items():
        stream.write(f"# {k}={v}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _meta(params: ProtocolParams, seed: int, **extra) -> dict:
    meta = {"tool": f"cavclone {__version__}", "parameter_set": params.label}
    meta.update({k: _fmt(v) for k, v in params.angles().items()})
    meta.update(extra)
    meta["seed"] = seed
    return meta


# ---------------------------------------------------------------------------
# subcommands


def _merged(args) -> dict:
    cfg = parse_config(Path(args.config).read_text()) if args.config else {}
    for key in FIELDS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            cfg[key] = v
    return cfg


def cmd_run(args) -> int:
    rc = resolve_run_config(_merged(args))
    report = run_report(rc)
    _emit(json.dumps(report, indent=2) + "\n", rc.output)
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    cfg = _merged(args)
    radians = bool(cfg.get("radians", False))
    params = _resolve_params(cfg, radians)
    seed = cfg.get("seed", DEFAULT_SEED)
    buf = io.StringIO()
    if args.study == "universality":
        if args.n_theta < 1 or args.n_phi < 1:
            raise ConfigError("n_theta/n_phi: grid sizes must be >= 1")
        sweep = universality_sweep(bloch_grid(args.n_theta, args.n_phi), params)
        cols = ["row", "theta", "phi", "fidelity_clone2", "fidelity_clone3", "target_overlap",
                "fidelity_min", "fidelity_max", "fidelity_mean"]
        rows = [
            [r.index, r.theta, r.phi, r.report.fidelity_clone2, r.report.fidelity_clone3,
             r.report.target_overlap, "", "", ""]
            for r in sweep.rows
        ]
        s = sweep.summary
        rows.append(["summary", "", "", "", "", s.overlap_mean, s.fidelity_min, s.fidelity_max, s.fidelity_mean])
        meta = _meta(params, seed, study="universality", grid=f"{args.n_theta}x{args.n_phi}")
    elif args.study == "scaling":
        ratios = args.delta_over_g_list or [20.0, 40.0, 80.0, 160.0, 200.0]
        if any(r < 5 for r in ratios):
            raise ConfigError("delta_over_g: entries must be >= 5")
        q = _resolve_qubit(cfg, radians) if any(k in cfg for k in INPUT_POLAR + INPUT_AMPLITUDES) else None
        q = q or InputQubit.from_bloch(math.pi / 2, 0.0)
        table = dispersive_scaling_study(ratios, params, q, n_max=cfg.get("n_max", 3), rel_tol=cfg.get("rel_tol", 1e-9))
        cols = ["delta_over_g", "infidelity", "conditional_infidelity", "leakage", "leakage_total",
                "peak_photon", "photon_bound"]
        rows = [
            [r.delta_over_g, r.infidelity, r.conditional_infidelity, r.leakage, r.leakage_total,
             r.peak_photon, 10.0 / r.delta_over_g**2]
            for r in table
        ]
        meta = _meta(params, seed, study="scaling", alpha=_fmt(q.alpha), beta=_fmt(q.beta),
                     infidelity="1 - overlap^2 with leaked photon weight counted as error")
    else:
        kappas = args.kappa_over_lambda_list or [0.0, 0.01, 0.05, 0.1]
        n_ths = args.n_th_list or [0.0]
        if any(k < 0 for k in kappas) or any(n < 0 for n in n_ths):
            raise ConfigError("kappa_over_lambda/n_th: rates must be non-negative")
        ratio = cfg.get("delta_over_g", 20.0)
        study = decoherence_study(kappas, n_ths, params, delta_over_g=ratio, rel_tol=cfg.get("rel_tol", 1e-9))
        cols = ["kappa_over_lambda", "n_th", "fidelity", "fidelity_clone2", "fidelity_clone3",
                "fidelity_min", "leakage", "trace_drift", "top_fock"]
        rows = [
            [r.kappa_over_lambda, r.n_th, r.fidelity, r.fidelity_clone2, r.fidelity_clone3,
             r.fidelity_min, r.leakage, r.trace_drift, r.top_fock]
            for r in study.rows
        ]
        meta = _meta(params, seed, study="decoherence", delta_over_g=_fmt(float(ratio)),
                     inputs="six Bloch-axis states (mean)", unitary_fidelity=_fmt(study.unitary_fidelity),
                     model=study.notes[0], benchmark=DEGRADATION_NOTE)
    write_csv(meta, cols, rows, buf)
    _emit(buf.getvalue(), cfg.get("output"))
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_checks(args.seed, self_test=args.self_test)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_feasibility(args) -> int:
    budget = FeasibilityBudget(args.g_khz * 1e3, args.delta_over_g, args.radiative_time, args.photon_lifetime)
    params = parameter_set(args.parameter_set)
    r = feasibility_report(budget, params)
    lines = [
        f"parameter set         {params.label}",
        f"g                     {r.g:.6e} rad/s (g/2pi = {args.g_khz:g} kHz)",
        f"delta                 {r.delta:.6e} rad/s",
        f"lambda = g^2/delta    {r.lam:.6e} rad/s",
        f"pi*delta/g^2          {r.interaction_scale:.1e} s",
    ]
    lines += [f"stage {k}               {v:.6e} s" for k, v in r.stage_times.items()]
    lines += [
        f"total                 {r.total_time:.6e} s",
        f"total / T_r           {r.ratio_radiative:.6e}",
        f"total / photon life   {r.ratio_photon:.6e}",
        f"budget                {'PASS' if r.passes else 'FAIL'}",
    ]
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--parameter-set", dest="parameter_set", help="solver (default), paper-printed or explicit")
    for k in ANGLE_KEYS:
        p.add_argument(f"--{k.replace('_', '-').lower()}", dest=k, type=float, help=argparse.SUPPRESS)
    p.add_argument("--theta", type=float, help="input polar angle")
    p.add_argument("--phi", type=float, help="input azimuth")
    for k in INPUT_AMPLITUDES:
        p.add_argument(f"--{k.replace('_', '-')}", dest=k, type=float)
    p.add_argument("--radians", action="store_true", default=None, help="angles in radians instead of units of pi")
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--rel-tol", dest="rel_tol", type=float)
    p.add_argument("--output", "-o")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavclone", description="Cavity-QED 1->2 quantum cloning simulator")
    parser.add_argument("--version", action="version", version=f"cavclone {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single protocol run, JSON report")
    _add_common(run)
    run.add_argument("--tier", choices=TIERS)
    run.add_argument("--g", type=float, help="coupling in rad/s (default 1)")
    run.add_argument("--delta-over-g", dest="delta_over_g", type=float)
    run.add_argument("--kappa-over-lambda", dest="kappa_over_lambda", type=float)
    run.add_argument("--n-th", dest="n_th", type=float)
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="parameter sweeps, CSV table")
    sw.add_argument("study", choices=("universality", "scaling", "decoherence"))
    _add_common(sw)
    sw.add_argument("--n-theta", dest="n_theta", type=int, default=10)
    sw.add_argument("--n-phi", dest="n_phi", type=int, default=20)
    sw.add_argument("--delta-over-g", dest="delta_over_g_list", type=_float_list,
                    help="scaling: comma-separated list; decoherence: first entry used")
    sw.add_argument("--kappa-over-lambda", dest="kappa_over_lambda_list", type=_float_list)
    sw.add_argument("--n-th", dest="n_th_list", type=_float_list)
    sw.set_defaults(func=cmd_sweep)

    va = sub.add_parser("validate", help="run built-in cross-checks")
    va.add_argument("--self-test", action="store_true", help="perturb the cavity-A phase; checks must fail")
    va.add_argument("--seed", type=int, default=DEFAULT_SEED)
    va.set_defaults(func=cmd_validate)

    fe = sub.add_parser("feasibility", help="timing budget against atomic and cavity lifetimes")
    fe.add_argument("--g-khz", dest="g_khz", type=_positive_float, default=50.0)
    fe.add_argument("--delta-over-g", dest="delta_over_g", type=_positive_float, default=10.0)
    fe.add_argument("--radiative-time", dest="radiative_time", type=_positive_float, default=3e-2)
    fe.add_argument("--photon-lifetime", dest="photon_lifetime", type=_positive_float, default=1e-3)
    fe.add_argument("--parameter-set", dest="parameter_set", default="solver", choices=("solver", "paper-printed"))
    fe.set_defaults(func=cmd_feasibility)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.command == "sweep" and args.delta_over_g_list:
        args.delta_over_g = args.delta_over_g_list[0] if args.study == "decoherence" else None
    with warnings.catch_warnings():
        warnings.simplefilter("always", RegimeWarning)
        warnings.showwarning = _show_warning
        try:
            return args.func(args)
        except ConfigError as exc:
            print(f"cavclone: config error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except OSError as exc:
            print(f"cavclone: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except RegimeError as exc:
            print(f"cavclone: regime violation: {exc}", file=sys.stderr)
            return EXIT_REGIME
        except IntegrationError as exc:
            print(f"cavclone: integration failed: {exc}", file=sys.stderr)
            return EXIT_VALIDATION


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"cavclone: warning: {message}", file=sys.stderr)
