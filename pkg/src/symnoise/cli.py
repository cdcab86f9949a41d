"""Command-line driver: ``symnoise <subcommand> [options]``.

Exit status is 0 on success, 1 for configuration errors and 2 when a
structural invariant fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import render
from .basis import build_qbasis, centralizer_dims, qbasis_to_json, sector_decompose
from .noise import (NoiseModel, NyquistError, PsdSpec, correlation_length, empirical_psd, loglog_slope,
                    sample_ensemble)
from .propagation import SymmetryViolation
from .scenarios import (SCENARIOS, ConfigError, ScenarioConfig, TfimConfig, build_j_squared, run_scenario,
                        tfim_hamiltonian)

FAST_TRAJECTORIES = 2000


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dump_json(data, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario configuration (overrides --config)")
    g.add_argument("--config", help="JSON configuration file")
    g.add_argument("--n", type=int, help="number of qubits")
    g.add_argument("--coupling", type=float, help="uniform Ising coupling J")
    g.add_argument("--field", type=float, help="transverse field h")
    g.add_argument("--topology", choices=["all-to-all", "chain", "matrix"])
    g.add_argument("--tau-factor", type=float, help="duration in units of the correlation length")
    g.add_argument("--duration", type=float, help="absolute duration (overrides --tau-factor)")
    g.add_argument("--dt", type=float, help="time step")
    g.add_argument("--allow-large", action="store_true", default=None, help="permit n > 6")
    g.add_argument("--noise", choices=["global", "local"])
    g.add_argument("--psd", dest="psd_kind", choices=["pink", "lorentzian", "white"])
    g.add_argument("--omega-ir", type=float)
    g.add_argument("--omega-uv", type=float)
    g.add_argument("--tau-c", type=float, help="lorentzian correlation time")
    g.add_argument("--s0-tau", type=float, help="noise strength as max(S) times the correlation length")
    g.add_argument("--s0", type=float, help="absolute spectral maximum")
    g.add_argument("--trajectories", "-M", type=int)
    g.add_argument("--fast", action="store_true", help=f"use {FAST_TRAJECTORIES} trajectories")
    g.add_argument("--seed", type=int)
    g.add_argument("--initial", help="plus | zeros | basis:<bits>")
    g.add_argument("--mc-long", action="store_true", default=None, help="run the long-time Monte Carlo ensemble")
    g.add_argument("--antithetic", action="store_true", default=None)
    g.add_argument("--control-variate", action="store_true", default=None)
    g.add_argument("--quadrature", choices=["step", "trapezoid"])
    g.add_argument("--kernel", choices=["synthesis", "quadrature"])
    g.add_argument("--checkpoints", type=int, help="population-curve checkpoints (0 disables)")
    g.add_argument("--no-bounds", dest="with_bounds", action="store_false", default=None)
    g.add_argument("--workers", type=int)


TFIM_KEYS = {"n", "coupling", "field", "topology", "tau_factor", "duration", "dt", "allow_large"}
CONFIG_KEYS = TFIM_KEYS | {"noise", "psd_kind", "omega_ir", "omega_uv", "tau_c", "s0_tau", "s0", "trajectories",
                           "seed", "initial", "mc_long", "antithetic", "control_variate", "quadrature", "kernel",
                           "checkpoints", "with_bounds", "workers"}


def _build_config(args, name: str, **forced) -> ScenarioConfig:
    base = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    base.setdefault("name", name)
    if name != "custom":
        base["name"] = name
    tfim = dict(base.pop("tfim", {}))
    for key in sorted(CONFIG_KEYS):
        val = getattr(args, key, None)
        if val is None:
            continue
        if key in TFIM_KEYS:
            tfim[key] = val
        else:
            base[key] = val
    if args.fast:
        base["trajectories"] = FAST_TRAJECTORIES
    base.update(forced)
    base["tfim"] = tfim
    try:
        return ScenarioConfig.from_dict(base)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(path) -> str:
    path = path or "."
    os.makedirs(path, exist_ok=True)
    return path


def _status(report) -> int:
    for v in report.violations:
        print(f"invariant violation: {v}", file=sys.stderr)
    return 2 if report.violations else 0


def _summary(report) -> None:
    m = report.metrics
    print(f"scenario {report.config.name}: n={report.config.tfim.n} noise={report.config.noise} "
          f"T={report.provenance['duration']:.4g} steps={report.provenance['steps']} S0T={m['s0T']:.4g}")
    if "mc" in m:
        print(f"  off-sector population (MC) {m['mc']['outside_population']:.3e}, "
              f"largest off-sector coherence {m['mc']['outside_offdiag_max']:.3e}, "
              f"floor {m['statistical_floor']:.3e}")
        print(f"  FFF vs MC trace distance {m['fff_mc_distance']:.3e}")
    print(f"  off-sector population (FFF) {m['fff']['outside_population']:.3e}")
    if report.bounds:
        b = report.bounds
        print(f"  D={b['distance']:.4g} <= bound {b['bound_total']:.4g} <= white-noise bound {b['white_bound']:.4g}")
    if report.steady:
        print(f"  steady-state distance (extrapolated) {report.steady['distance_extrapolated']:.3e}")
        if "distance_mc" in report.steady:
            print(f"  steady-state distance (MC) {report.steady['distance_mc']:.3e}")


def cmd_basis(args) -> int:
    q = build_j_squared(args.n)
    refine = None if args.no_refine else tfim_hamiltonian(TfimConfig(n=args.n, coupling=args.coupling,
                                                                     field=args.field))
    basis = build_qbasis(sector_decompose(q, refine=refine))
    gens = basis.generators
    gram = np.einsum("iab,jab->ij", gens.conj(), gens)
    ortho = float(np.abs(gram - np.eye(len(gens))).max())
    dims = centralizer_dims(basis)
    spec = basis.spectrum
    print(f"Q = J^2 for n={args.n}: {len(gens)} generators, orthonormality error {ortho:.2e}")
    for v, m, w in zip(spec.eigenvalues, spec.multiplicities, dims.N_q.values()):
        print(f"  sector q={v:g} dimension {m}, within labels {w}")
    print(f"  centralizer dimension {dims.N_Q}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(qbasis_to_json(basis))
    return 0 if ortho <= 1e-10 else 2


def cmd_noise_check(args) -> int:
    if args.psd == "pink":
        psd = PsdSpec.pink(args.s0 * args.omega_ir, args.omega_ir, args.omega_uv)
        band = (args.omega_ir * (args.omega_uv / args.omega_ir) ** 0.25,
                args.omega_ir * (args.omega_uv / args.omega_ir) ** 0.75)
        expected_slope = -1.0
    elif args.psd == "lorentzian":
        psd = PsdSpec.lorentzian(args.s0 / (2 * args.tau_c), args.tau_c)
        band = None
        expected_slope = None
    else:
        raise ConfigError("noise-check supports pink and lorentzian spectra")
    model = NoiseModel((np.eye(2),), (psd,), np.eye(1))
    dt = np.pi / (2 * psd.omega_hi)
    lo = max(psd.omega_lo, 1e-3 * psd.omega_hi)
    steps = int(2 ** np.ceil(np.log2(8 * np.pi / (lo * dt))))
    times = np.arange(steps) * dt
    samples = sample_ensemble(model, times, args.seed, args.trajectories)
    est = empirical_psd(samples, dt)
    report = {"psd": psd.to_dict(), "trajectories": args.trajectories, "steps": steps, "dt": dt,
              "seed": args.seed, "correlation_length": correlation_length(psd)}
    ok = True
    if band is not None:
        slope = loglog_slope(est.omega, est.auto(), *band)
        report.update(slope=slope, slope_band=list(band), slope_ok=abs(slope - expected_slope) <= 0.1)
        ok = report["slope_ok"]
        print(f"log-log slope {slope:.4f} over [{band[0]:.3g}, {band[1]:.3g}] (expected {expected_slope})")
    else:
        rel = abs(report["correlation_length"] - args.tau_c) / args.tau_c
        report.update(tau_c=args.tau_c, tau_rel_error=rel, tau_ok=rel <= 0.02)
        ok = report["tau_ok"]
    print(f"correlation length {report['correlation_length']:.5g}")
    if args.out:
        dump_json(report, args.out)
    return 0 if ok else 2


def _write_report(report, out: str, sources, scale: str, ff_csv: bool = False) -> None:
    dump_json(report.to_dict(), os.path.join(out, "report.json"))
    for src in sources:
        render.render_heatmap(report, out, src, scale)
    if ff_csv and report.filter_functions is not None:
        render.write_filter_csv(os.path.join(out, "filter_functions.csv"), report.filter_functions, report.basis)


def cmd_scenario(args) -> int:
    cfg = _build_config(args, args.name)
    report = run_scenario(cfg)
    out = _out_dir(args.out)
    _write_report(report, out, ["mc", "fff"] if report.rho_mc is not None else ["fff"], args.scale, args.ff_csv)
    _summary(report)
    return _status(report)


def cmd_simulate(args) -> int:
    cfg = _build_config(args, args.scenario, run_mc=True, with_bounds=False, checkpoints=0)
    report = run_scenario(cfg)
    out = _out_dir(args.out)
    _write_report(report, out, ["mc"], args.scale)
    _summary(report)
    return _status(report)


def cmd_fff(args) -> int:
    cfg = _build_config(args, args.scenario, run_mc=False)
    report = run_scenario(cfg)
    out = _out_dir(args.out)
    _write_report(report, out, ["fff"], args.scale, args.ff_csv)
    _summary(report)
    return _status(report)


def cmd_render(args) -> int:
    try:
        matrix, labels, sectors = render.read_matrix_csv(args.csv)
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"cannot read matrix CSV {args.csv}: {exc}") from exc
    svg = render.render_svg(matrix, labels, sectors, args.scale, title=os.path.basename(args.csv))
    out = args.out or os.path.splitext(args.csv)[0] + ".svg"
    with open(out, "w") as fh:
        fh.write(svg)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symnoise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="build and check the total-spin generator basis")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--coupling", type=float, default=1.0)
    p.add_argument("--field", type=float, default=1.0)
    p.add_argument("--no-refine", action="store_true", help="do not order degenerate sectors by the TFIM")
    p.add_argument("--out", help="write the basis as JSON")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("noise-check", help="synthesize noise and compare with its target spectrum")
    p.add_argument("--psd", choices=["pink", "lorentzian"], default="pink")
    p.add_argument("--omega-ir", type=float, default=0.2)
    p.add_argument("--omega-uv", type=float, default=20.0)
    p.add_argument("--tau-c", type=float, default=0.5)
    p.add_argument("--s0", type=float, default=1.0, help="spectral maximum")
    p.add_argument("--trajectories", "-M", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write a JSON report")
    p.set_defaults(func=cmd_noise_check)

    for name, func, helptext in [
        ("simulate", cmd_simulate, "Monte Carlo ensemble only"),
        ("fff", cmd_fff, "cumulant prediction, structure checks and bounds only"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", default="custom", choices=sorted(SCENARIOS))
        _add_config_args(p)
        p.add_argument("--out", help="output directory")
        p.add_argument("--scale", choices=["linear", "log"], default="linear")
        if name == "fff":
            p.add_argument("--ff-csv", action="store_true", help="also write filter functions as CSV")
        p.set_defaults(func=func)

    p = sub.add_parser("scenario", help="run a named scenario end to end")
    p.add_argument("name", choices=sorted(SCENARIOS))
    _add_config_args(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--scale", choices=["linear", "log"], default="linear")
    p.add_argument("--ff-csv", action="store_true", help="also write filter functions as CSV")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("render", help="render a matrix CSV as an SVG heatmap")
    p.add_argument("csv")
    p.add_argument("--out")
    p.add_argument("--scale", choices=["linear", "log"], default="linear")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, NyquistError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except SymmetryViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
