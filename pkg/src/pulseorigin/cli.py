"""Command-line interface.

Every subcommand writes its results under ``--out`` and prints a short
summary. Options on the command line use lab units (kHz, us, ms, mm/s); a
``--config`` JSON file may set the same options using the option names with
dashes replaced by underscores, e.g. ``{"T_ms": [5, 20], "omega0_khz": 25}``.

Exit codes: 0 success, 2 invalid input, 3 optimizer stopped at its
iteration cap (results are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import references
from .characterize import Role, characterize
from .constants import OMEGA0, TAU_BS, TWO_PI
from .doppler import SchemeKind, compensation_bias_sweep, write_bias_csv
from .dynamics import Waveform, rectangular
from .errors import InvalidInputError
from .optimize import (OptimizationConfig, batch_sweep, optimize_beamsplitter,
                       write_sweep_csv)
from .sequence import (MomentumDistribution, fringe_contrast, mach_zehnder,
                       near_resonance_sensitivity, origin_variation, rectangular_sequence,
                       scale_factor_errors, velocity_bias)
from .sensitivity import scale_factor_report

log = logging.getLogger("pulseorigin")

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 2, 3
FIGURES = ("fig2d", "fig4", "fig5", "fig7")


class UsageError(Exception):
    """Bad command-line or config input; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --- helpers ----------------------------------------------------------------

def _fmt(v):
    return f"{v:.17g}" if isinstance(v, float) else v


def write_csv(rows: list[dict], path, columns=None) -> None:
    """CSV with '.' decimals and floats at 17 significant digits."""
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        out = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        out.writeheader()
        for r in rows:
            out.writerow({k: _fmt(r[k]) for k in columns})


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _load_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path} must hold a JSON object")
    return data


def _load_waveform(path) -> Waveform:
    try:
        return Waveform.load(path)
    except FileNotFoundError:
        raise UsageError(f"no such waveform file: {path}") from None
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed waveform file {path}: {exc}") from None


def _pulse(args) -> tuple[str, Waveform]:
    if getattr(args, "waveform", None):
        return Path(args.waveform).stem, _load_waveform(args.waveform)
    name = args.family
    if name not in references.FAMILIES:
        raise UsageError(f"unknown family {name!r}; choose from {', '.join(references.FAMILIES)}")
    return name, references.family_pulse(name)


def _apply_config(args, parser: argparse.ArgumentParser) -> None:
    """Fill options from ``--config`` unless given explicitly on the command line."""
    if not args.config or args.command in ("optimize", "sweep"):
        return
    data = _load_json(args.config)
    known = {a.dest for a in parser._subparsers._group_actions[0].choices[args.command]._actions}
    extra = set(data) - known
    if extra:
        raise UsageError(f"unknown config keys for {args.command}: {sorted(extra)}")
    explicit = set(getattr(args, "_explicit", ()))
    for k, v in data.items():
        if k not in explicit:
            setattr(args, k, v)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("PULSEORIGIN_THREADS")
    return int(env) if env else None


# --- subcommands --------------------------------------------------------------

def cmd_characterize(args) -> int:
    omega = TWO_PI * args.omega0_khz * 1e3
    if args.waveform:
        w = _load_waveform(args.waveform)
    elif args.preset == "rect":
        w = rectangular(omega, args.tau_us * 1e-6, label="rect")
    else:
        raise UsageError(f"unknown preset {args.preset!r}")
    rep = characterize(w, Role(args.role), args.eps)
    out = _out(args)
    rep.write_json(out / "characterization.json")
    rep.write_csv(out / "characterization.csv")
    print(f"tau_o = {rep.tau_origin * 1e6:.6g} us  m = {rep.m * 1e6:.6g} us  "
          f"area = {rep.area / np.pi:.6g} pi  duration = {rep.duration * 1e6:.6g} us")
    return EXIT_OK


def _sequence(args, w, T):
    return mach_zehnder(w, T, mirror=args.mirror)


def cmd_scalefactor(args) -> int:
    name, w = _pulse(args)
    rows = []
    for T_ms in args.T_ms:
        seq = _sequence(args, w, T_ms * 1e-3)
        rep = scale_factor_report(seq)
        errs = scale_factor_errors(seq, np.linspace(-args.eps_range, args.eps_range, 11),
                                   args.eps_mode) if args.eps_range > 0 else np.zeros(1)
        rows.append(dict(T_s=T_ms * 1e-3, pulse_family=name, S_exact=rep.exact,
                         ppm_triangular_origins=rep.ppm_triangular_origins,
                         ppm_triangular_midpoints=rep.ppm_triangular_midpoints,
                         ppm_trapezoidal=np.nan if rep.ppm_trapezoidal is None
                         else rep.ppm_trapezoidal,
                         max_ppm_eps=float(1e6 * np.max(np.abs(errs)))))
        print(f"T = {T_ms:g} ms  S = {rep.exact:.10g} rad/(m/s^2)  "
              f"max |dS/S| over eps = {rows[-1]['max_ppm_eps']:.4g} ppm")
    write_csv(rows, _out(args) / "scalefactor.csv")
    return EXIT_OK


def cmd_contrast(args) -> int:
    name, w = _pulse(args)
    seq = _sequence(args, w, args.T_ms * 1e-3)
    dist = MomentumDistribution.from_momentum_width(args.sigma_p, w.omega0)
    c, phi = fringe_contrast(seq, dist)
    write_json(dict(pulse_family=name, T_s=args.T_ms * 1e-3, sigma_p_hbar_k=args.sigma_p,
                    mirror=args.mirror, contrast=c, phase_rad=phi),
               _out(args) / "contrast.json")
    print(f"contrast = {c:.6f}  phase = {phi:.3e} rad")
    return EXIT_OK


def cmd_bias(args) -> int:
    name, w = _pulse(args)
    seq = _sequence(args, w, args.T_ms * 1e-3)
    dist = MomentumDistribution.from_momentum_width(args.sigma_p, w.omega0)
    rep = velocity_bias(seq, dist, args.v_offset_mm_s * 1e-3, args.imbalance)
    sens = near_resonance_sensitivity(seq, dist, args.imbalance)
    d = rep.to_dict()
    d.update(pulse_family=name, accel_bias_ng=1e9 * rep.accel_bias,
             near_resonance_sensitivity=sens)
    write_json(d, _out(args) / "bias.json")
    print(f"bias = {1e9 * rep.accel_bias:.4g} ng  near-resonance slope = "
          f"{sens:.4g} mrad/(mm/s)  contrast = {rep.contrast:.4f}")
    return EXIT_OK


def _opt_config(args) -> OptimizationConfig:
    data = _load_json(args.config) if args.config else {}
    try:
        cfg = OptimizationConfig.from_dict(data)
    except (InvalidInputError, TypeError) as exc:
        raise UsageError(f"invalid optimization config: {exc}") from None
    if args.seed is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    return cfg


def cmd_optimize(args) -> int:
    cfg = _opt_config(args)
    res = optimize_beamsplitter(cfg)
    out = _out(args)
    res.write_json(out / "result.json")
    res.waveform.save(out / "waveform.json")
    print(f"infidelity = {res.terminal_infidelity:.4e}  area = {res.pulse_area / np.pi:.4g} pi  "
          f"iterations = {res.iterations_used}  converged = {res.converged}")
    return EXIT_OK if res.converged else EXIT_CAP


def cmd_sweep(args) -> int:
    base = _opt_config(args)
    rows = batch_sweep(args.durations, args.fractions, args.seeds_per_cell, base,
                       threads=_threads(args), seed0=base.rng_seed)
    write_sweep_csv(rows, _out(args) / "sweep.csv")
    print(f"{len(rows)} cells written")
    return EXIT_OK


def cmd_doppler(args) -> int:
    fams = {}
    for name in args.families:
        if name not in references.FAMILIES:
            raise UsageError(f"unknown family {name!r}")
        fams[name] = mach_zehnder(references.family_pulse(name), args.T_ms[0] * 1e-3)
    rows = compensation_bias_sweep(fams, np.asarray(args.T_ms) * 1e-3, args.imbalance,
                                   SchemeKind(args.scheme))
    write_bias_csv(rows, _out(args) / "doppler_bias.csv")
    for r in rows:
        print(f"{r['pulse_family']:>18s}  T = {1e3 * r['T_s']:g} ms  bias = {r['bias_ug']:.4g} ug")
    return EXIT_OK


# --- figure data --------------------------------------------------------------

def reproduce_fig2d(out: Path, n_T: int = 60) -> Path:
    rows = []
    for T in np.geomspace(0.5e-3, 100e-3, n_T):
        rep = scale_factor_report(rectangular_sequence(float(T)))
        rows.append(dict(T_s=float(T), ppm_triangular_origins=rep.ppm_triangular_origins,
                         ppm_triangular_midpoints=rep.ppm_triangular_midpoints,
                         ppm_trapezoidal=rep.ppm_trapezoidal))
    write_csv(rows, out / "fig2d.csv")
    return out / "fig2d.csv"


def reproduce_fig4(out: Path, durations, seeds_per_cell, threads=None,
                   base: OptimizationConfig | None = None) -> Path:
    fractions = [1.0, 0.2, 0.4, 0.6, 0.8]
    rows = batch_sweep(durations, fractions, seeds_per_cell, base, threads=threads,
                       with_contrast=True)
    write_sweep_csv(rows, out / "fig4.csv")
    return out / "fig4.csv"


def reproduce_fig5(out: Path, n_eps: int = 21, n_v: int = 41) -> list[Path]:
    eps = np.linspace(-0.1, 0.1, n_eps)
    v = np.linspace(-20e-3, 20e-3, n_v)
    dist_rows, bias_rows = [], []
    for name in references.FAMILIES:
        w = references.family_pulse(name)
        seq = mach_zehnder(w)
        orig = origin_variation(w, eps)
        ppm = 1e6 * scale_factor_errors(seq, eps, "final")
        ppm_all = 1e6 * scale_factor_errors(seq, eps, "all")
        for e, o, p, pa in zip(eps, orig, ppm, ppm_all):
            dist_rows.append(dict(pulse_family=name, eps=float(e), tau_origin_s=float(o),
                                  origin_shift_s=float(o - orig[n_eps // 2]),
                                  scale_error_ppm_final=float(p),
                                  scale_error_ppm_all=float(pa)))
        dist = MomentumDistribution.from_momentum_width(0.4, w.omega0)
        for vi in v:
            rep = velocity_bias(seq, dist, float(vi))
            bias_rows.append(dict(pulse_family=name, v_offset_m_s=float(vi),
                                  phase_rad=rep.phase_bias, bias_ng=1e9 * rep.accel_bias))
    write_csv(dist_rows, out / "fig5_origin_scale.csv")
    write_csv(bias_rows, out / "fig5_bias.csv")
    return [out / "fig5_origin_scale.csv", out / "fig5_bias.csv"]


def reproduce_fig7(out: Path, n_T: int = 30) -> Path:
    Ts = np.geomspace(1e-3, 100e-3, n_T)
    fams = {n: mach_zehnder(references.family_pulse(n))
            for n in ("rectangular", "optimized-origin")}
    rows = compensation_bias_sweep(fams, Ts, 0.01, SchemeKind.PHASE_DISCONTINUOUS)
    write_bias_csv(rows, out / "fig7.csv")
    return out / "fig7.csv"


def cmd_reproduce(args) -> int:
    if args.figure not in FIGURES:
        raise UsageError(f"unknown figure {args.figure!r}; valid ids: {', '.join(FIGURES)}")
    out = _out(args)
    if args.figure == "fig2d":
        paths = [reproduce_fig2d(out)]
    elif args.figure == "fig4":
        base = _opt_config(args)
        paths = [reproduce_fig4(out, args.durations, args.seeds_per_cell, _threads(args), base)]
    elif args.figure == "fig5":
        paths = reproduce_fig5(out)
    else:
        paths = [reproduce_fig7(out)]
    for p in paths:
        print(p)
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def _add_pulse_args(p):
    p.add_argument("--family", default="rectangular",
                   help=f"reference beamsplitter: {', '.join(references.FAMILIES)}")
    p.add_argument("--waveform", help="beamsplitter waveform JSON (overrides --family)")
    p.add_argument("--mirror", default="rect", choices=["rect", "perfect"])


def _add_global_args(p, with_defaults: bool) -> None:
    """Global options, accepted before or after the subcommand."""
    kw = {} if with_defaults else dict(default=argparse.SUPPRESS)
    p.add_argument("--config", help="JSON file with options for the subcommand",
                   **(kw or dict(default=None)))
    p.add_argument("--out", help="output directory", **(kw or dict(default=".")))
    p.add_argument("--seed", type=int, help="override the optimizer seed",
                   **(kw or dict(default=None)))
    p.add_argument("--threads", type=int, help="worker processes (env PULSEORIGIN_THREADS)",
                   **(kw or dict(default=None)))
    p.add_argument("-v", "--verbose", action="store_true", **(kw or dict(default=False)))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pulseorigin", description="Temporal-origin toolkit for atom interferometers.")
    _add_global_args(ap, True)
    common = _Parser(add_help=False)
    _add_global_args(common, False)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **kw: _add(*a, parents=[common], **kw)

    p = sub.add_parser("characterize", help="dispersion, origin and area of one pulse")
    p.add_argument("--waveform", help="waveform JSON")
    p.add_argument("--preset", default="rect", help="built-in pulse when no waveform is given")
    p.add_argument("--tau-us", type=float, default=TAU_BS * 1e6)
    p.add_argument("--omega0-khz", type=float, default=OMEGA0 / TWO_PI / 1e3)
    p.add_argument("--eps", type=float, default=0.0, help="fractional amplitude error")
    p.add_argument("--role", default="beamsplitter-1", choices=[r.value for r in Role])
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("scalefactor", help="exact and approximate scale factors")
    _add_pulse_args(p)
    p.add_argument("--T-ms", type=float, nargs="+", default=[5.0])
    p.add_argument("--eps-range", type=float, default=0.1)
    p.add_argument("--eps-mode", default="all", choices=["all", "final"])
    p.set_defaults(func=cmd_scalefactor)

    p = sub.add_parser("contrast", help="cloud-averaged fringe contrast")
    _add_pulse_args(p)
    p.add_argument("--T-ms", type=float, default=5.0)
    p.add_argument("--sigma-p", type=float, default=0.4, help="momentum width in hbar k")
    p.set_defaults(func=cmd_contrast)

    p = sub.add_parser("bias", help="velocity-dependent acceleration bias")
    _add_pulse_args(p)
    p.add_argument("--T-ms", type=float, default=5.0)
    p.add_argument("--sigma-p", type=float, default=0.4, help="momentum width in hbar k")
    p.add_argument("--v-offset-mm-s", type=float, default=10.0)
    p.add_argument("--imbalance", type=float, default=0.01)
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("optimize", help="design one beamsplitter (config: OptimizationConfig JSON)")
    p.set_defaults(func=cmd_optimize)

    for name, helptext in (("sweep", "batch of optimizations over durations and origins"),
                           ("reproduce", "data behind a figure: " + ", ".join(FIGURES))):
        p = sub.add_parser(name, help=helptext)
        if name == "reproduce":
            p.add_argument("figure")
        p.add_argument("--durations", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
                       help="pulse durations in t_pi")
        if name == "sweep":
            p.add_argument("--fractions", type=float, nargs="+", default=[1.0, 0.4])
        p.add_argument("--seeds-per-cell", type=int, default=3)
        p.set_defaults(func=cmd_sweep if name == "sweep" else cmd_reproduce)

    p = sub.add_parser("doppler", help="Doppler-compensation bias versus T")
    p.add_argument("--families", nargs="+", default=["rectangular", "optimized-origin"])
    p.add_argument("--T-ms", type=float, nargs="+", default=[5.0])
    p.add_argument("--imbalance", type=float, default=0.01)
    p.add_argument("--scheme", default=SchemeKind.PHASE_DISCONTINUOUS.value,
                   choices=[s.value for s in SchemeKind])
    p.set_defaults(func=cmd_doppler)
    return ap


def _explicit_dests(parser, argv) -> set[str]:
    """Option names given on the command line (they beat config values)."""
    flags = {a.split("=")[0] for a in argv if a.startswith("--")}
    sub = parser._subparsers._group_actions[0].choices
    out = set()
    for p in sub.values():
        for act in p._actions:
            if flags & set(act.option_strings):
                out.add(act.dest)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        args._explicit = _explicit_dests(parser, argv)
        _apply_config(args, parser)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
