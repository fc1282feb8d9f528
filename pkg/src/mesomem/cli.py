"""Command-line harness: reproducible experiments with CSV/JSON + SVG output.

Subcommands: profile, grid-sweep, curve-energy, recovery.  Exit codes:
0 success, 1 numerical failure, 2 usage error.  --deterministic forces
ordered reductions, sequential execution and zeroed timing columns so that
identical flags produce byte-identical CSV/JSON.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import figures, reports
from .curves import embedding_check, load_configuration, resample_arclength
from .energies import family_energy, phase_masses, primitive_energy, \
    reduced_full_energy, bending_energy, separation_energy
from .errors import MesomemError
from .grid import PhaseMap, load_phase
from .kernel import ModelParams, equipartition_residual, optimal_profile
from .minimize import Disk, HalfSpace, MinimizeOptions, SweepRecord, SweepReport, \
    epsilon_sweep
from .recovery import PhaseCurve, build_bumps, limsup_report


def _threads_default() -> int:
    env = os.environ.get("MESOMEM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker thread cap (default: hardware, or MESOMEM_THREADS)")
    p.add_argument("--deterministic", action="store_true",
                   help="byte-identical CSV/JSON: ordered reductions, no timing")
    p.add_argument("--config-file", default=None,
                   help="flat 'key = value' file supplying flag defaults")


def _parse_eps_list(text: str) -> list[float]:
    eps = [float(x) for x in text.split(",") if x.strip()]
    if not eps:
        raise argparse.ArgumentTypeError("empty eps list")
    return eps


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_config_file(parser, args, argv):
    """Inject 'key = value' file entries as defaults; unknown keys are rejected."""
    if not args.config_file:
        return args
    known = {a.dest for a in parser._actions}
    overrides = {}
    for lineno, line in enumerate(Path(args.config_file).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            parser.error(f"{args.config_file}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in known:
            parser.error(f"{args.config_file}:{lineno}: unknown key {key!r}")
        overrides[key] = value.strip()
    for key, value in overrides.items():
        if getattr(args, key) == parser.get_default(key):
            action = next(a for a in parser._actions if a.dest == key)
            if action.type is not None:
                value = action.type(value)
            elif isinstance(parser.get_default(key), bool):
                value = value.lower() in ("1", "true", "yes")
            setattr(args, key, value)
    return args


# ---------------------------------------------------------------------------
# profile
# ---------------------------------------------------------------------------

def cmd_profile(args) -> int:
    params = ModelParams(c=args.c, eps=args.eps)
    out = _outdir(args)
    r = np.linspace(args.rmin, args.rmax, args.n)
    q, slope = optimal_profile(r, params)
    resid = equipartition_residual(r, params)
    csv_path = out / "profile.csv"
    with open(csv_path, "w") as fh:
        fh.write("r,q,q_slope,equipartition_residual\n")
        for row in zip(r, q, slope, resid):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    figures.profile_figure(out / "profile.svg", r, q, slope, args.c, args.eps)
    print(f"wrote {csv_path} and {out / 'profile.svg'}")
    return 0


# ---------------------------------------------------------------------------
# grid-sweep
# ---------------------------------------------------------------------------

def _phase_spec(text: str, dim: int):
    if text == "half":
        return HalfSpace(dim=dim)
    if text.startswith("disk:"):
        if dim != 2:
            raise ValueError("disk phases require --dim 2")
        return Disk(radius=float(text.split(":", 1)[1]))
    if text.startswith("file:"):
        return load_phase(text.split(":", 1)[1])
    raise ValueError(f"unknown phase spec {text!r}")


def cmd_grid_sweep(args) -> int:
    phase = _phase_spec(args.phase, args.dim)
    params = ModelParams(c=args.c, eps=args.eps_list[0])
    opts = MinimizeOptions()
    out = _outdir(args)

    threads = 1 if args.deterministic else (args.threads or _threads_default())
    eps_list = args.eps_list
    if threads > 1 and not isinstance(phase, PhaseMap):
        def one(eps):
            return epsilon_sweep(phase, [eps], params, opts).records[0]

        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, eps_list))
        report = SweepReport(records=records)
    else:
        report = epsilon_sweep(phase, eps_list, params, opts)

    reports.write_sweep_csv(out / "sweep.csv", report, args.deterministic)
    reports.write_sweep_json(out / "sweep.json", report, args.deterministic)
    figures.sweep_figure(out / "sweep.svg", report, args.c)
    for rec in report.records:
        rel = abs(rec.gap) / rec.limit_energy if rec.limit_energy else math.inf
        print(f"eps={rec.eps:<10g} min={rec.min_energy:.6f} "
              f"profile={rec.profile_energy:.6f} limit={rec.limit_energy:.6f} "
              f"gap={100 * rel:.2f}%")
    print(f"wrote {out / 'sweep.csv'}, {out / 'sweep.json'}, {out / 'sweep.svg'}")
    return 0


# ---------------------------------------------------------------------------
# curve-energy
# ---------------------------------------------------------------------------

def cmd_curve_energy(args) -> int:
    params = ModelParams(c=args.c, eps=args.eps, sigma=args.sigma)
    out = _outdir(args)
    configs = [load_configuration(p) for p in args.config]
    entries = []
    for path, Z in zip(args.config, configs):
        masses = phase_masses(Z)
        F = reduced_full_energy(Z, params)
        F_tilde = primitive_energy(Z, params)
        emb = embedding_check(Z, args.eps)
        entries.append({
            "file": str(path),
            "length": Z.curve.length,
            "masses": {"m1": masses.m1, "m2": masses.m2},
            "E_eps": separation_energy(Z, params),
            "G_eps": bending_energy(Z, params),
            "F_eps": F,
            "F_tilde_eps": F_tilde,
            "identity_residual": F_tilde - F,
            "embedding": {"ok": emb.ok, "reason": emb.reason},
        })
    payload = {"configurations": entries}
    if len(configs) > 1:
        fam = family_energy(configs, params)
        payload["family"] = {
            "total": fam.total,
            "separation_total": fam.separation_total,
            "bending_total": fam.bending_total,
            "masses": {"m1": fam.masses.m1, "m2": fam.masses.m2},
            "overlap": {"ok": fam.overlap.ok, "reason": fam.overlap.reason,
                        "witness": fam.overlap.witness},
        }
    json_path = out / "curve_energy.json"
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {json_path}")
    return 0


# ---------------------------------------------------------------------------
# recovery
# ---------------------------------------------------------------------------

def _parse_arcs(text: str):
    arcs = []
    for chunk in text.split(","):
        a, _, b = chunk.partition(":")
        arcs.append((float(a), float(b)))
    return arcs


def cmd_recovery(args) -> int:
    eps_list = args.eps_list
    if args.n is not None:
        n = args.n
    else:
        # resolve the smallest transition layer with ~20 nodes per eps
        est = 20.0 * 2.0 * math.pi / eps_list[-1]
        n = 1 << max(12, min(18, math.ceil(math.log2(est))))
    curve = resample_arclength(args.curve, n)
    pc = PhaseCurve.from_arcs(curve, _parse_arcs(args.arcs))
    params = ModelParams(c=args.c, eps=eps_list[0], sigma=args.sigma)
    fields = build_bumps(pc, delta=args.delta, strength=args.bump_strength)
    report = limsup_report(pc, eps_list, params, fields=fields)

    out = _outdir(args)
    reports.write_recovery_csv(out / "recovery.csv", report)
    reports.write_recovery_json(out / "recovery.json", report)
    figures.recovery_figure(out / "recovery.svg", pc, report, args.c)
    for rec in report.records:
        print(f"eps={rec.eps:<10g} total={rec.total:.6f} "
              f"E={rec.E_part:.6f} G={rec.G_part:.6f} "
              f"limit(quarter)={rec.limit_quarter:.7f} "
              f"limit(half)={rec.limit_half:.7f} "
              f"res=({rec.res1:.2e}, {rec.res2:.2e})")
    for fail in report.failures:
        print(f"eps={fail.eps:<10g} FAILED: {fail.error}", file=sys.stderr)
    print(f"wrote {out / 'recovery.csv'}, {out / 'recovery.json'}, "
          f"{out / 'recovery.svg'}")
    return 0 if report.records else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mesomem",
        description="Two-phase membrane energies: profiles, grid sweeps, "
                    "curve energies and recovery sequences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="optimal transition profile tables/plots")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--rmin", type=float, default=-0.5)
    p.add_argument("--rmax", type=float, default=0.5)
    p.add_argument("--n", type=int, default=1000)
    _add_common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("grid-sweep", help="eps sweep of the grid energy")
    p.add_argument("--dim", type=int, choices=(1, 2), default=1)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--eps-list", type=_parse_eps_list, required=True,
                   help="comma-separated, strictly decreasing")
    p.add_argument("--phase", default="half", help="half | disk:r | file:path")
    _add_common(p)
    p.set_defaults(func=cmd_grid_sweep)

    p = sub.add_parser("curve-energy", help="energies of stored configurations")
    p.add_argument("--config", nargs="+", required=True,
                   help="configuration file(s); several files form a family")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_curve_energy)

    p = sub.add_parser("recovery", help="recovery-sequence convergence report")
    p.add_argument("--curve", default="circle:1",
                   help="circle:R | ellipse:a:b | file:path")
    p.add_argument("--arcs", required=True,
                   help="phase-1 arclength arcs 's0:s1[,s2:s3...]'")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--eps-list", type=_parse_eps_list, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=None, help="curve sample count")
    p.add_argument("--delta", type=float, default=None,
                   help="bump support margin around the jumps")
    p.add_argument("--bump-strength", type=float, default=15.0)
    _add_common(p)
    p.set_defaults(func=cmd_recovery)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _apply_config_file(parser, args, argv)
    try:
        return args.func(args)
    except MesomemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
